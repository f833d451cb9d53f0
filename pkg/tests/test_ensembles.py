import math
import re

import numpy as np
import pytest
from scipy import integrate, stats

from hardedge.errors import ConfigurationError
from hardedge.ensembles import (
    GUE,
    EnsembleSpec,
    GinibreProduct,
    Histogram,
    MuttalibBorodinMatrix,
    PerturbedSum,
    TruncatedUnitaryProduct,
    Wishart,
    accumulate_histogram,
    backward_error_check,
    build_matrix,
    draw_rng,
    eigvals_hermitian,
    hard_edge_statistics,
    mb_factor,
    sample_ginibre,
    sample_gue,
    sample_haar_unitary,
    sample_spectrum,
)
from hardedge.kernels import HardEdgeScaling, bessel_kernel


# ---------------------------------------------------------------- samplers

def test_gue_scalar_variance():
    rng = np.random.default_rng(11)
    x = np.array([sample_gue(1, rng)[0, 0] for _ in range(100_000)])
    assert np.all(x.imag == 0)
    assert abs(np.var(x.real) - 1.0) < 0.02


def test_gue_hermitian_and_entry_variances():
    n = 300
    h = sample_gue(n, draw_rng(5, 0))
    assert np.array_equal(h, h.conj().T)
    off = h[np.triu_indices(n, 1)]
    assert abs(np.mean(np.abs(off) ** 2) * n - 1) < 0.02
    assert abs(np.var(off.real) * 2 * n - 1) < 0.03
    assert abs(np.var(off.imag) * 2 * n - 1) < 0.03
    assert abs(np.var(np.diag(h).real) * n - 1) < 0.2


@pytest.mark.parametrize("rule,expected", [("wishart", 1 / 50), ("standard", 1.0), (0.25, 0.25)])
def test_ginibre_second_moment(rule, expected):
    g = sample_ginibre(2000, 50, rule, draw_rng(1, 0))
    assert abs(np.mean(np.abs(g) ** 2) / expected - 1) < 0.02


def test_ginibre_columns_uncorrelated():
    g = sample_ginibre(100_000, 2, "standard", draw_rng(2, 0))
    prod = g[:, 0] * np.conj(g[:, 1])
    se = np.std(prod) / math.sqrt(len(prod))
    assert abs(np.mean(prod)) < 3 * se


def test_haar_unitary_properties():
    u = sample_haar_unitary(50, draw_rng(3, 0))
    assert np.max(np.abs(u.conj().T @ u - np.eye(50))) < 1e-12
    assert np.max(np.abs(np.abs(np.linalg.eigvals(u)) - 1)) < 1e-10


def test_haar_first_entry_moment():
    rng = draw_rng(4, 0)
    vals = [abs(sample_haar_unitary(50, rng)[0, 0]) ** 2 for _ in range(10_000)]
    assert abs(np.mean(vals) * 50 - 1) < 0.03


def test_haar_phase_uniform():
    # without the phase correction the diagonal of Q is biased to the positive axis
    rng = draw_rng(6, 0)
    ph = np.array([np.angle(sample_haar_unitary(4, rng)[0, 0]) for _ in range(4000)])
    assert stats.kstest(ph, stats.uniform(loc=-np.pi, scale=2 * np.pi).cdf).pvalue > 1e-3


def test_mb_zero_pattern():
    v = MuttalibBorodinMatrix(n=6, theta=2, alpha=1)
    x = mb_factor(v, 9, 0)
    assert x.shape == (v.m, 6)
    for j in range(1, v.m + 1):
        for k in range(1, 7):
            if j - k > 2 * (k - 1) + 1:
                assert x[j - 1, k - 1] == 0
            else:
                assert x[j - 1, k - 1] != 0


# ---------------------------------------------------------------- configuration validation

@pytest.mark.parametrize("variant,needle", [
    (Wishart(5, -1), "alpha"),
    (GinibreProduct(5, (1, 0)), "nu"),
    (TruncatedUnitaryProduct(5, (0, 0), (5,)), "ell_j >= n + nu_j + 1"),
    (TruncatedUnitaryProduct(5, (0, 0, 0), (8,)), "one ell per factor"),
    (MuttalibBorodinMatrix(5, theta=2, alpha=0, rows=10), "rows"),
    (PerturbedSum(GUE(4), -0.1), "eps"),
    (GUE(0), "n must be"),
])
def test_invalid_specs_name_the_invariant(variant, needle):
    with pytest.raises(ConfigurationError, match=re.escape(needle)):
        EnsembleSpec(variant, 0)


# ---------------------------------------------------------------- spectra

def test_determinism():
    spec = EnsembleSpec(PerturbedSum(Wishart(40, 2), 0.3), 123)
    a = sample_spectrum(spec, 4).eigenvalues
    b = sample_spectrum(spec, 4).eigenvalues
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_spectrum(spec, 5).eigenvalues)
    assert not np.array_equal(a, sample_spectrum(spec.with_seed(124), 4).eigenvalues)


def test_spectra_sorted_and_nonnegative():
    variants = [
        Wishart(30, 1),
        GinibreProduct(20, (0, 1, 0)),
        TruncatedUnitaryProduct(10, (0, 0, 0), (25, 25)),
        MuttalibBorodinMatrix(15, 2, 1),
    ]
    for v in variants:
        ev = sample_spectrum(EnsembleSpec(v, 1), 0).eigenvalues
        assert len(ev) == v.n
        assert np.all(np.diff(ev) >= 0) and np.all(ev >= 0)
        m = build_matrix(v, 1, 0)
        assert np.allclose(m, m.conj().T, atol=1e-12 * np.linalg.norm(m))


def test_truncated_singular_values_below_one():
    ev = sample_spectrum(EnsembleSpec(TruncatedUnitaryProduct(10, (0, 0), (15,)), 2), 0).eigenvalues
    assert ev[-1] <= 1 + 1e-12


def test_zero_perturbation_is_identity():
    base = EnsembleSpec(Wishart(30, 0), 17)
    pert = EnsembleSpec(PerturbedSum(Wishart(30, 0), 0.0), 17)
    assert np.array_equal(sample_spectrum(base, 3).eigenvalues, sample_spectrum(pert, 3).eigenvalues)


def test_ginibre_normalizations_agree_in_law():
    a = np.concatenate([sample_spectrum(EnsembleSpec(GinibreProduct(40, (0, 0, 0), "standard"), 1), d).eigenvalues
                        for d in range(30)])
    b = np.concatenate([sample_spectrum(EnsembleSpec(GinibreProduct(40, (0, 0, 0), "wishart"), 2), d).eigenvalues
                        for d in range(30)])
    assert abs(np.mean(a) - 1) < 0.03 and abs(np.mean(b) - 1) < 0.03
    assert stats.ks_2samp(a, b).statistic < 0.05


def test_wishart_scalar_is_exponential():
    spec = EnsembleSpec(Wishart(1, 0), 21)
    x = np.array([sample_spectrum(spec, d).eigenvalues[0] for d in range(10_000)])
    assert abs(np.mean(x) - 1) < 0.03
    assert stats.kstest(x, "expon").statistic < 0.02


def test_wishart_mean_eigenvalue():
    spec = EnsembleSpec(Wishart(200, 0), 8)
    means = [np.mean(sample_spectrum(spec, d).eigenvalues) for d in range(200)]
    assert abs(np.mean(means) - 1) < 0.01


def test_ginibre_cube_scaled_support():
    # m = 3 Fuss-Catalan right edge is (m+1)^(m+1) / m^m = 256/27
    spec = EnsembleSpec(GinibreProduct(200, (0, 0, 0, 0), scale=27 / 256), 5)
    ev = np.concatenate([sample_spectrum(spec, d).eigenvalues for d in range(4)])
    assert ev.min() >= 0
    assert 0.9 < ev.max() < 1.1
    assert np.mean(ev > 1.0) < 0.01


def test_gue_semicircle_moderate_n():
    from hardedge.freeconv import SemicircleLaw

    spec = EnsembleSpec(GUE(400), 3)
    ev = np.concatenate([sample_spectrum(spec, d).eigenvalues for d in range(5)])
    assert stats.kstest(ev, SemicircleLaw(1.0).cdf).statistic < 0.02


def test_eigensolver_backward_error():
    for v, seed in [(GUE(120), 0), (Wishart(80, 3), 1), (PerturbedSum(MuttalibBorodinMatrix(40, 2, 1), 0.2), 2)]:
        m = build_matrix(v, seed, 0)
        assert backward_error_check(m, checks=10, seed=seed) < 1e-10


def test_eigvals_match_dense_reference():
    m = build_matrix(PerturbedSum(Wishart(25, 0), 0.5), 4, 0)
    ref = np.sort(np.linalg.eigvals(m).real)
    assert np.max(np.abs(eigvals_hermitian(m) - ref)) < 1e-12 * np.linalg.norm(m, 2)


# ---------------------------------------------------------------- histograms

def test_histogram_counts_and_total():
    spec = EnsembleSpec(GUE(50), 1)
    h = accumulate_histogram(spec, 3, 20, (-3, 3))
    assert h.total == 3
    assert h.counts.sum() + h.underflow + h.overflow == 150
    assert h.counts.sum() == 150


def test_histogram_empty_range_goes_to_overflow():
    h = accumulate_histogram(EnsembleSpec(GUE(30), 1), 2, 10, (1.0, 1.0))
    assert h.counts.sum() == 0 and h.overflow == 60


def test_histogram_out_of_range_recorded():
    h = accumulate_histogram(EnsembleSpec(GUE(30), 1), 2, 10, (-0.5, 0.5))
    assert h.counts.sum() + h.underflow + h.overflow == 60
    assert h.underflow > 0 and h.overflow > 0


def test_shard_merge_equals_single_pass():
    spec = EnsembleSpec(PerturbedSum(Wishart(30, 0), 0.5), 99)
    whole = accumulate_histogram(spec, 6, 40, (-1, 5))
    a = accumulate_histogram(spec, 2, 40, (-1, 5), first_draw=0)
    b = accumulate_histogram(spec, 4, 40, (-1, 5), first_draw=2)
    merged = b.merge(a)
    assert np.array_equal(merged.counts, whole.counts)
    assert merged.total == whole.total
    assert merged.underflow == whole.underflow and merged.overflow == whole.overflow


def test_merge_requires_same_bins():
    with pytest.raises(ValueError):
        Histogram.empty(4, 0, 1).merge(Histogram.empty(5, 0, 1))


def test_plot_format():
    h = Histogram.empty(2, 0.0, 1.0)
    h.add([0.1, 0.2, 0.9])
    assert h.to_plot() == "0.0 2\n0.5 1\n1.0 0\n"


# ---------------------------------------------------------------- hard edge

def bessel_bin_mass(lo, hi):
    return integrate.quad(lambda x: float(np.real(bessel_kernel(0.0, x, x))), lo, hi)[0]


def test_wishart_hard_edge_density_matches_bessel():
    n = 100
    spec = EnsembleSpec(Wishart(n, 0), 7)
    pts = hard_edge_statistics(spec, 2000, HardEdgeScaling.lue(4.0, 1.0), 8)
    for lo, hi in [(0, 2), (2, 4), (4, 8)]:
        emp = np.sum((pts >= lo) & (pts < hi)) / pts.shape[0]
        ref = bessel_bin_mass(lo, hi)
        assert abs(emp - ref) < 0.10 * ref


def test_hard_edge_scaling_stable_across_n():
    s50 = hard_edge_statistics(EnsembleSpec(Wishart(50, 0), 1), 1000, HardEdgeScaling.lue(4.0, 1.0), 1)
    s100 = hard_edge_statistics(EnsembleSpec(Wishart(100, 0), 2), 1000, HardEdgeScaling.lue(4.0, 1.0), 1)
    assert stats.ks_2samp(s50[:, 0], s100[:, 0]).statistic < 0.05


def test_subcritical_perturbation_leaves_smallest_point():
    # paired draws: the perturbed and unperturbed runs share the Wishart factor
    n = 100
    sc = HardEdgeScaling.lue(4.0, 1.0)
    a = hard_edge_statistics(EnsembleSpec(Wishart(n, 0), 3), 2000, sc, 1)[:, 0]
    b = hard_edge_statistics(EnsembleSpec(PerturbedSum(Wishart(n, 0), n**-2.0), 3), 2000, sc, 1)[:, 0]
    assert stats.ks_2samp(a, b).statistic < 0.05
