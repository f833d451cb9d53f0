"""Random matrix samplers, eigenvalue pipelines and histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .errors import ConfigurationError
from .kernels import HardEdgeScaling

__all__ = [
    "GUE",
    "Wishart",
    "GinibreProduct",
    "TruncatedUnitaryProduct",
    "MuttalibBorodinMatrix",
    "PerturbedSum",
    "EnsembleSpec",
    "SpectralSample",
    "Histogram",
    "draw_rng",
    "sample_gue",
    "sample_ginibre",
    "sample_haar_unitary",
    "mb_mask",
    "mb_factor",
    "build_matrix",
    "eigvals_hermitian",
    "sample_spectrum",
    "accumulate_histogram",
    "hard_edge_statistics",
    "backward_error_check",
]


# ---------------------------------------------------------------------------
# specifications


@dataclass(frozen=True)
class GUE:
    n: int


@dataclass(frozen=True)
class Wishart:
    """``M = G* G`` with ``G`` of shape ``(n + alpha) x n``."""

    n: int
    alpha: int = 0


@dataclass(frozen=True)
class GinibreProduct:
    """``Y = X_m ... X_1`` with ``X_j`` of shape ``(n + nu_j) x (n + nu_{j-1})``.

    ``nu[0]`` must be 0 and ``m = len(nu) - 1``. With ``normalization =
    'standard'`` entries have unit variance and ``M = n^-m Y* Y``; with
    ``'wishart'`` entries have variance ``1/n`` and no rescaling is applied.
    Both give the same law for ``M``. ``scale`` multiplies ``M`` (for example
    ``27/256`` to put the ``m = 3`` spectrum on ``[0, 1]``).
    """

    n: int
    nu: tuple = (0, 0)
    normalization: str = "standard"
    scale: float = 1.0

    @property
    def m(self) -> int:
        return len(self.nu) - 1


@dataclass(frozen=True)
class TruncatedUnitaryProduct:
    """Product of upper-left ``(n + nu_j) x (n + nu_{j-1})`` blocks of Haar
    unitaries of sizes ``ell_j``."""

    n: int
    nu: tuple = (0, 0)
    ell: tuple = (5,)


@dataclass(frozen=True)
class MuttalibBorodinMatrix:
    """``M = X* X / n`` for an ``rows x n`` Gaussian ``X`` with entries
    ``(j, k)`` set to zero when ``j - k > theta (k - 1) + alpha`` (1-based)."""

    n: int
    theta: int = 1
    alpha: int = 0
    rows: int | None = None

    @property
    def m(self) -> int:
        return self.rows if self.rows is not None else self.n + (self.n - 1) * self.theta + self.alpha


@dataclass(frozen=True)
class PerturbedSum:
    """``S = M + eps H`` with ``H`` an independent GUE matrix."""

    base: "Variant"
    eps: float = 0.0

    @property
    def n(self) -> int:
        return self.base.n


Variant = Union[GUE, Wishart, GinibreProduct, TruncatedUnitaryProduct,
                MuttalibBorodinMatrix, PerturbedSum]


@dataclass(frozen=True)
class EnsembleSpec:
    variant: Variant
    seed: int = 0

    def __post_init__(self):
        validate(self.variant)
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must fit in 64 unsigned bits")

    @property
    def n(self) -> int:
        return self.variant.n

    @property
    def nonnegative(self) -> bool:
        return not isinstance(self.variant, (GUE, PerturbedSum))

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return replace(self, seed=seed)


def validate(v) -> None:
    """Raise ``ConfigurationError`` naming the violated invariant."""
    if getattr(v, "n", 1) < 1:
        raise ConfigurationError("n must be >= 1")
    if isinstance(v, Wishart):
        if v.alpha < 0 or int(v.alpha) != v.alpha:
            raise ConfigurationError("Wishart alpha must be a nonnegative integer")
    elif isinstance(v, GinibreProduct):
        if len(v.nu) < 2 or v.nu[0] != 0:
            raise ConfigurationError("GinibreProduct needs nu[0] == 0 and m >= 1")
        if any(x < 0 or int(x) != x for x in v.nu):
            raise ConfigurationError("nu entries must be nonnegative integers")
        if v.normalization not in ("standard", "wishart"):
            raise ConfigurationError("normalization must be 'standard' or 'wishart'")
    elif isinstance(v, TruncatedUnitaryProduct):
        if len(v.nu) < 2 or v.nu[0] != 0:
            raise ConfigurationError("TruncatedUnitaryProduct needs nu[0] == 0")
        if len(v.ell) != len(v.nu) - 1:
            raise ConfigurationError("need one ell per factor (len(ell) == len(nu) - 1)")
        for j, l in enumerate(v.ell, 1):
            if l < v.n + v.nu[j] + 1:
                raise ConfigurationError(f"ell_{j} = {l} violates ell_j >= n + nu_j + 1")
    elif isinstance(v, MuttalibBorodinMatrix):
        if v.theta < 1 or int(v.theta) != v.theta:
            raise ConfigurationError("theta must be a positive integer")
        if v.alpha < 0 or int(v.alpha) != v.alpha:
            raise ConfigurationError("alpha must be a nonnegative integer")
        need = v.n + (v.n - 1) * v.theta + v.alpha
        if v.m < need:
            raise ConfigurationError(f"rows = {v.m} violates rows >= n + (n-1) theta + alpha = {need}")
    elif isinstance(v, PerturbedSum):
        if v.eps < 0:
            raise ConfigurationError("eps must be >= 0")
        validate(v.base)
    elif not isinstance(v, GUE):
        raise ConfigurationError(f"unknown ensemble variant {type(v).__name__}")


# ---------------------------------------------------------------------------
# random streams


def draw_rng(seed: int, draw: int, part: int = 0) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, draw, part)``.

    Streams do not depend on the order in which draws are made, so shards
    can run anywhere and still reproduce a single-pass run.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(draw), int(part)))
    return np.random.Generator(np.random.Philox(ss))


def _cnormal(rng, shape, var):
    # complex Gaussian with E|g|^2 = var
    s = math.sqrt(var / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def sample_gue(n: int, rng: np.random.Generator) -> np.ndarray:
    """GUE matrix with ``E|H_jk|^2 = 1/n``; spectrum fills ``[-2, 2]``."""
    d = rng.standard_normal(n) / math.sqrt(n)
    off = _cnormal(rng, (n, n), 1.0 / n)
    h = np.triu(off, 1)
    h = h + h.conj().T
    h[np.diag_indices(n)] = d
    return h


def sample_ginibre(rows: int, cols: int, variance_rule: str | float,
                   rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """IID complex Gaussian matrix.

    Parameters
    ----------
    variance_rule : {'wishart', 'standard'} or float
        ``'wishart'`` gives ``E|g|^2 = 1/n`` (``n`` defaults to ``cols``),
        ``'standard'`` gives ``E|g|^2 = 1``, a float sets it directly.
    """
    if variance_rule == "wishart":
        var = 1.0 / (n if n is not None else cols)
    elif variance_rule == "standard":
        var = 1.0
    else:
        var = float(variance_rule)
    return _cnormal(rng, (rows, cols), var)


def sample_haar_unitary(ell: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with the R-diagonal phases removed."""
    z = _cnormal(rng, (ell, ell), 1.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def mb_mask(rows: int, n: int, theta: int, alpha: int) -> np.ndarray:
    """Boolean mask of entries that are kept (True) in the MB construction."""
    j = np.arange(1, rows + 1)[:, None]
    k = np.arange(1, n + 1)[None, :]
    return (j - k) <= theta * (k - 1) + alpha


def mb_factor(v: MuttalibBorodinMatrix, seed: int, draw: int) -> np.ndarray:
    """The masked ``rows x n`` Gaussian factor ``X`` of an MB draw."""
    x = sample_ginibre(v.m, v.n, "standard", draw_rng(seed, draw, 0))
    return np.where(mb_mask(v.m, v.n, v.theta, v.alpha), x, 0.0)


def build_matrix(v: Variant, seed: int, draw: int) -> np.ndarray:
    """Hermitian matrix of one draw."""
    if isinstance(v, GUE):
        return sample_gue(v.n, draw_rng(seed, draw, 0))
    if isinstance(v, Wishart):
        g = sample_ginibre(v.n + v.alpha, v.n, "wishart", draw_rng(seed, draw, 0), n=v.n)
        return g.conj().T @ g
    if isinstance(v, GinibreProduct):
        rng = draw_rng(seed, draw, 0)
        y = None
        for j in range(1, v.m + 1):
            x = sample_ginibre(v.n + v.nu[j], v.n + v.nu[j - 1], v.normalization, rng, n=v.n)
            y = x if y is None else x @ y
        m = y.conj().T @ y
        if v.normalization == "standard":
            m = m / float(v.n) ** v.m
        return m * v.scale
    if isinstance(v, TruncatedUnitaryProduct):
        rng = draw_rng(seed, draw, 0)
        y = None
        for j, l in enumerate(v.ell, 1):
            u = sample_haar_unitary(l, rng)
            t = u[: v.n + v.nu[j], : v.n + v.nu[j - 1]]
            y = t if y is None else t @ y
        return y.conj().T @ y
    if isinstance(v, MuttalibBorodinMatrix):
        x = mb_factor(v, seed, draw)
        return x.conj().T @ x / v.n
    if isinstance(v, PerturbedSum):
        m = build_matrix(v.base, seed, draw)
        if v.eps == 0:
            return m
        return m + v.eps * sample_gue(v.n, draw_rng(seed, draw, 1))
    raise ConfigurationError(f"unknown ensemble variant {type(v).__name__}")


def eigvals_hermitian(m: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (values only, LAPACK)."""
    m = 0.5 * (m + m.conj().T)
    return np.linalg.eigvalsh(m)


def backward_error_check(m: np.ndarray, checks: int = 10, seed: int = 0) -> float:
    """Largest ``||M v - lam v|| / ||M||`` over a few eigenpairs.

    Eigenvectors are recovered by a couple of inverse-iteration steps from the
    values-only solver output, for this check only.
    """
    lam = eigvals_hermitian(m)
    n = len(lam)
    rng = np.random.default_rng(seed)
    norm = np.linalg.norm(m, 2)
    worst = 0.0
    for i in rng.choice(n, size=min(checks, n), replace=False):
        shift = lam[i] + norm * 1e-10
        a = m - shift * np.eye(n)
        v = rng.standard_normal(n) + 0j
        for _ in range(3):
            v = np.linalg.solve(a, v)
            v /= np.linalg.norm(v)
        worst = max(worst, np.linalg.norm(m @ v - lam[i] * v) / norm)
    return float(worst)


@dataclass(frozen=True)
class SpectralSample:
    eigenvalues: np.ndarray
    spec: EnsembleSpec
    draw_index: int

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues)
        if len(ev) != self.spec.n:
            raise ValueError("eigenvalue count does not match n")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be ascending")


def sample_spectrum(spec: EnsembleSpec, draw_index: int = 0) -> SpectralSample:
    """Sorted eigenvalues of draw ``draw_index``; deterministic in ``(spec, draw_index)``."""
    ev = eigvals_hermitian(build_matrix(spec.variant, spec.seed, draw_index))
    if spec.nonnegative:
        # Gram matrices are positive semidefinite; clamp rounding below zero
        ev = np.maximum(ev, 0.0)
    return SpectralSample(ev, spec, draw_index)


# ---------------------------------------------------------------------------
# histograms


@dataclass
class Histogram:
    """Counts on fixed bins; values outside ``[edges[0], edges[-1]]`` go to
    ``underflow``/``overflow``. ``total`` is the number of draws accumulated."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total: int = 0
    underflow: int = 0
    overflow: int = 0

    @classmethod
    def empty(cls, bins: int, lo: float, hi: float) -> "Histogram":
        return cls(np.linspace(lo, hi, bins + 1), np.zeros(bins, dtype=np.int64))

    def add(self, values) -> None:
        x = np.asarray(values, dtype=float)
        lo, hi = self.bin_edges[0], self.bin_edges[-1]
        if hi > lo:
            inside = (x >= lo) & (x <= hi)
            idx = np.searchsorted(self.bin_edges, x[inside], side="right") - 1
            idx = np.clip(idx, 0, len(self.counts) - 1)
            np.add.at(self.counts, idx, 1)
            self.underflow += int(np.sum(x < lo))
            self.overflow += int(np.sum(x > hi))
        else:
            self.overflow += len(x)

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("histograms have different bins")
        return Histogram(self.bin_edges.copy(), self.counts + other.counts,
                         self.total + other.total, self.underflow + other.underflow,
                         self.overflow + other.overflow)

    def to_plot(self) -> str:
        """Two-column ``bin_left count`` text with a closing right-edge row."""
        rows = [f"{float(e)!r} {int(c)}" for e, c in zip(self.bin_edges[:-1], self.counts)]
        rows.append(f"{float(self.bin_edges[-1])!r} 0")
        return "\n".join(rows) + "\n"


def accumulate_histogram(spec: EnsembleSpec, draws: int, bins: int, range: tuple,
                         first_draw: int = 0) -> Histogram:
    """Histogram of all eigenvalues of draws ``first_draw .. first_draw + draws - 1``."""
    if draws < 1 or bins < 1:
        raise ConfigurationError("draws and bins must be >= 1")
    hist = Histogram.empty(bins, float(range[0]), float(range[1]))
    for d in np.arange(first_draw, first_draw + draws):
        hist.add(sample_spectrum(spec, int(d)).eigenvalues)
        hist.total += 1
    return hist


def hard_edge_statistics(spec: EnsembleSpec, draws: int, scaling: HardEdgeScaling,
                         k_smallest: int, first_draw: int = 0) -> np.ndarray:
    """The ``k_smallest`` eigenvalues of each draw times ``scaling.factor(n)``.

    Returns an array of shape ``(draws, k_smallest)``.
    """
    f = scaling.factor(spec.n)
    out = np.empty((draws, k_smallest))
    for i in range(draws):
        ev = sample_spectrum(spec, first_draw + i).eigenvalues
        out[i] = ev[:k_smallest] * f
    return out
