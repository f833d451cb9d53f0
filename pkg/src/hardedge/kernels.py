"""Finite-n and limiting correlation kernels and their Gaussian transforms.

Every kernel object exposes ``matrix(xs, ys)`` which returns the values
``K(xs[i], ys[j])`` together with an error estimate, and is callable
elementwise. The first argument may be complex; the second is real.

Kernels built from a double contour integral with a ``1/sin(pi t)`` factor
are evaluated by summing residues at ``t = 0, 1, 2, ...`` and integrating
the remaining single integral along a line or pair of rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, roots_hermitenorm, roots_jacobi

from .errors import ConditioningError, RepresentationMismatch, UnsupportedConfiguration
from .quadrature import (
    QuadratureSpec,
    path_nodes,
    residue_series,
    two_ray_path,
    vertical_line,
)
from .specfun import airy, bessel_j_entire, log_gamma, log_sin_pi, wright_bessel

__all__ = [
    "Kernel",
    "BesselKernel",
    "AiryKernel",
    "AiryContourKernel",
    "GinibreKernel",
    "TruncatedUnitaryKernel",
    "MBContourKernel",
    "MBSeriesKernel",
    "LUEFiniteKernel",
    "GinibreFiniteKernel",
    "ScaledKernel",
    "ZeroKernel",
    "PerturbedKernelSpec",
    "HardEdgeScaling",
    "bessel_kernel",
    "airy_kernel_cd",
    "airy_kernel_contour",
    "ginibre_limit_kernel",
    "ginibre_m1_kernel",
    "ginibre_finite_kernel",
    "trunc_limit_kernel",
    "mb_limit_kernel_contour",
    "mb_limit_kernel_series",
    "mb_series_placement",
    "lue_finite_kernel",
    "perturb_kernel",
    "perturb_finite_kernel",
]

# s-line quadrature used by the Meijer-G type kernels: the Gamma products
# decay at least like exp(-pi |Im s| / 2), so |Im s| <= 40 loses nothing.
LINE_QUAD = QuadratureSpec(truncation_radius=40.0, panels_per_unit=2, rule_order=16)
AIRY_QUAD = QuadratureSpec(truncation_radius=7.0, panels_per_unit=3, rule_order=16)
MB_QUAD = QuadratureSpec(truncation_radius=30.0, panels_per_unit=3, rule_order=16)

_LOG_OVERFLOW = 700.0


def _as_1d(a, dtype=complex):
    return np.atleast_1d(np.asarray(a, dtype=dtype)).ravel()


class Kernel:
    """Base class. Subclasses implement ``_matrix(xs, ys) -> (K, err)``.

    ``beta`` is the exponent for which ``y**beta * K(x, y)`` stays bounded
    as ``y -> 0+``.
    """

    beta: float = 0.0

    def matrix(self, xs, ys, regularized: bool = False):
        """Values on the tensor grid ``xs x ys``.

        Returns
        -------
        K : complex ndarray, shape (len(xs), len(ys))
        err : float
            Quadrature error estimate (0 for closed forms).
        """
        xs = _as_1d(xs)
        ys = _as_1d(ys, float) if not np.iscomplexobj(ys) else _as_1d(ys)
        k, err = self._matrix(xs, ys)
        if regularized and self.beta:
            k = k * np.abs(ys)[None, :] ** self.beta
        return k, err

    def _matrix(self, xs, ys):  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x, y, regularized: bool = False):
        x_a = np.asarray(x)
        y_a = np.asarray(y)
        xb, yb = np.broadcast_arrays(x_a, y_a)
        if xb.ndim == 0:
            return self.matrix([xb[()]], [yb[()]], regularized)[0][0, 0]
        yu, inv = np.unique(yb.ravel(), return_inverse=True)
        xu, xinv = np.unique(xb.ravel(), return_inverse=True)
        k, _ = self.matrix(xu, yu, regularized)
        return k[xinv, inv].reshape(xb.shape)


@dataclass(frozen=True)
class ZeroKernel(Kernel):
    """The zero kernel (useful as a transform baseline)."""

    beta: float = 0.0

    def _matrix(self, xs, ys):
        return np.zeros((len(xs), len(ys)), dtype=complex), 0.0


# ---------------------------------------------------------------------------
# Bessel


@dataclass(frozen=True)
class BesselKernel(Kernel):
    """Hard-edge Bessel kernel with the ``(y/x)^(alpha/2)`` gauge factor.

    Written through the entire function ``E(w) = J_a(sqrt w)/(sqrt(w)/2)^a``::

        K(x, y) = 4^-a y^a [y E(x) E'(y) - x E'(x) E(y)] / (x - y)

    which is entire in ``x``. Near the diagonal the integral form
    ``K = 4^-a y^a / 4 * int_0^1 u^a E(xu) E(yu) du`` is used instead.
    """

    alpha: float = 0.0
    confluent_tol: float = 1e-4
    jacobi_nodes: int = 64

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError("Bessel kernel requires alpha > -1")

    @property
    def beta(self) -> float:  # type: ignore[override]
        return max(0.0, -self.alpha)

    @cached_property
    def _jacobi(self):
        xi, w = roots_jacobi(self.jacobi_nodes, 0.0, self.alpha)
        u = 0.5 * (1.0 + xi)
        return u, w / 2.0 ** (self.alpha + 1.0)

    def _core(self, xs, ys):
        """The kernel without the ``4^-a y^a`` prefactor."""
        a = self.alpha
        if np.any(np.real(ys) < 0):
            raise ValueError("Bessel kernel requires y >= 0")
        X = xs[:, None]
        Y = ys[None, :].astype(complex)
        ex, ex1 = bessel_j_entire(a, xs)[:, None], bessel_j_entire(a + 1, xs)[:, None]
        ey, ey1 = bessel_j_entire(a, ys)[None, :], bessel_j_entire(a + 1, ys)[None, :]
        # E'(w) = -E_{a+1}(w) / 4
        num = -Y * ex * ey1 / 4.0 + X * ex1 * ey / 4.0
        near = np.abs(X - Y) < self.confluent_tol * (1.0 + np.abs(X))
        with np.errstate(divide="ignore", invalid="ignore"):
            core = num / (X - Y)
        if np.any(near):
            ii, jj = np.nonzero(near)
            u, w = self._jacobi
            e1 = bessel_j_entire(a, np.outer(xs[ii], u))
            e2 = bessel_j_entire(a, np.outer(ys[jj].astype(complex), u))
            core[ii, jj] = 0.25 * np.sum(w * e1 * e2, axis=1)
        return core

    def _matrix(self, xs, ys):
        with np.errstate(divide="ignore"):
            ypow = np.power(np.real(ys).astype(float), self.alpha)
        return 4.0 ** (-self.alpha) * ypow[None, :] * self._core(xs, ys), 0.0

    def matrix(self, xs, ys, regularized: bool = False):
        xs = _as_1d(xs)
        ys = _as_1d(ys, float)
        if regularized and self.alpha < 0:
            # y^beta y^alpha = 1, so the singular power drops out exactly
            return 4.0 ** (-self.alpha) * self._core(xs, ys), 0.0
        return super().matrix(xs, ys, regularized)


def bessel_kernel(alpha: float, x, y, regularized: bool = False):
    """Bessel kernel value(s); see :class:`BesselKernel`.

    With ``regularized=True`` returns ``y**max(0, -alpha) * K(x, y)``.
    """
    return BesselKernel(alpha)(x, y, regularized)


# ---------------------------------------------------------------------------
# Airy


@dataclass(frozen=True)
class AiryKernel(Kernel):
    """Airy kernel in Christoffel-Darboux form (real arguments)."""

    confluent_tol: float = 1e-5

    def _matrix(self, xs, ys):
        xr = np.real(xs).astype(float)
        yr = np.real(ys).astype(float)
        ax, apx = airy(xr)
        ay, apy = airy(yr)
        X, Y = xr[:, None], yr[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = (ax[:, None] * apy[None, :] - ay[None, :] * apx[:, None]) / (X - Y)
        near = np.abs(X - Y) < self.confluent_tol
        if np.any(near):
            ii, jj = np.nonzero(near)
            mid = 0.5 * (xr[ii] + yr[jj])
            a, ap = airy(mid)
            k[ii, jj] = ap**2 - mid * a**2
        return k.astype(complex), 0.0


def airy_kernel_cd(x, y):
    """``(Ai(x)Ai'(y) - Ai(y)Ai'(x))/(x - y)``, diagonal ``Ai'^2 - x Ai^2``."""
    return np.real(AiryKernel()(x, y))


@dataclass(frozen=True)
class AiryContourKernel(Kernel):
    """Airy kernel as a double contour integral::

        K(x, y) = 1/(4 pi^2) int_{C2} ds int_{C1} dt
                  exp(t^3/3 - y t) / exp(s^3/3 - x s) / (s - t)

    C1 runs from ``exp(-i pi/3) inf`` through ``apex`` to ``exp(i pi/3) inf``;
    C2 is its mirror image through the imaginary axis, also oriented upwards.
    """

    apex: float = 1.0
    quad: QuadratureSpec = AIRY_QUAD

    def _nodes(self, refine):
        t, wt = path_nodes(two_ray_path(self.apex, -np.pi / 3, np.pi / 3), self.quad, refine)
        s, ws = path_nodes(
            two_ray_path(-self.apex, -2 * np.pi / 3, 2 * np.pi / 3), self.quad, refine
        )
        return t, wt, s, ws

    def _eval(self, xs, ys, refine):
        t, wt, s, ws = self._nodes(refine)
        A = wt[None, :] * np.exp(t[None, :] ** 3 / 3 - ys[:, None] * t[None, :])
        B = ws[None, :] * np.exp(-s[None, :] ** 3 / 3 + xs[:, None] * s[None, :])
        C = 1.0 / (s[:, None] - t[None, :])
        return (B @ C @ A.T) / (4 * np.pi**2)

    def _matrix(self, xs, ys):
        ys = ys.astype(complex)
        coarse = self._eval(xs, ys, 1)
        fine = self._eval(xs, ys, 2)
        return fine, float(np.max(np.abs(fine - coarse)))


def airy_kernel_contour(x, y):
    """Airy kernel from its double contour integral representation."""
    return AiryContourKernel()(x, np.asarray(y, dtype=complex))


# ---------------------------------------------------------------------------
# Meijer-G type hard edge kernels (products of Ginibre / truncated unitary)


def _log_pow(x, k):
    """log(x**k) elementwise with 0**0 = 1 (returns -inf for 0**k, k > 0)."""
    x = np.asarray(x, dtype=complex)
    zero = x == 0
    lx = np.log(np.where(zero, 1.0, x))
    return np.where(zero, 0.0 if k == 0 else -np.inf, k * lx)


def _residue_sum(coef_log, xs, line_int, k_max, tol=1e-16):
    """Sum over k of (-1)^k x^k exp(coef_log(k)) / pi * line_int(k)[y].

    ``line_int(k)`` returns the line integral for every y (shape (ny,)).
    The result has shape (nx, ny).
    """
    cache = {}

    def g(k):
        if k >= k_max:
            return np.zeros((len(xs), cache[0].shape[-1]), dtype=complex)
        if k not in cache:
            cache[k] = line_int(k)
        lw = _log_pow(xs, k) + coef_log(k)
        return np.exp(lw)[:, None] * cache[k][None, :]

    val, _ = residue_series(g, tol=tol, max_terms=max(k_max + 3, 4))
    return val


@dataclass(frozen=True, kw_only=True)
class _LineKernel(Kernel):
    """Shared machinery for kernels of the form

    ``sum_k (-1)^k x^k c_k / pi * (1/2 pi i) int_{c + iR} F(s) y^(-s-1) / (s - k) ds``
    """

    quad: QuadratureSpec = LINE_QUAD
    k_max: int = 400

    beta = 0.5
    line_real: float = -0.5

    def _log_f(self, s):  # pragma: no cover - abstract
        raise NotImplementedError

    def _log_coef(self, k):  # pragma: no cover - abstract
        raise NotImplementedError

    def _log_scale(self):
        """Log of the argument scaling (0 for the plain kernel)."""
        return 0.0

    def _line(self, ys, refine):
        s, w = path_nodes(vertical_line(self.line_real), self.quad, refine)
        lf = self._log_f(s)
        ly = np.log(ys.astype(complex))
        # A[y, s] = w F(s) y^{-s-1} / (2 pi i)
        la = lf[None, :] - (s[None, :] + 1.0) * ly[:, None]
        peak = float(np.max(la.real))
        if peak > _LOG_OVERFLOW:
            raise ConditioningError("line integrand overflows", peak)
        A = (w / (2j * np.pi))[None, :] * np.exp(la)
        return s, A

    def _eval(self, xs, ys, refine):
        s, A = self._line(ys, refine)
        k_hi = self._k_limit()
        cols = {}

        def line_int(k):
            if k not in cols:
                cols[k] = A @ (1.0 / (s - k))
            return cols[k]

        return _residue_sum(self._log_coef, xs, line_int, k_hi)

    def _k_limit(self):
        return self.k_max

    def _matrix(self, xs, ys):
        if np.any(np.real(ys) <= 0):
            raise ValueError("second argument must be positive")
        coarse = self._eval(xs, ys, 1)
        fine = self._eval(xs, ys, 2)
        return fine, float(np.max(np.abs(fine - coarse)))


def _check_nu(nu):
    nu = tuple(int(v) for v in nu)
    if len(nu) < 2:
        raise ValueError("nu must contain nu_0 = 0 and at least one more entry")
    if nu[0] != 0 or any(v < 0 for v in nu):
        raise ValueError("nu must be nonnegative integers with nu_0 = 0")
    return nu


@dataclass(frozen=True)
class GinibreKernel(_LineKernel):
    """Hard-edge limit kernel of products of ``m = len(nu) - 1`` Ginibre matrices::

        K(x, y) = sum_k (-1)^k x^k / (pi prod_j Gamma(k + nu_j + 1))
                  * (1/2 pi i) int_{-1/2 + iR} prod_j Gamma(s + nu_j + 1)
                    sin(pi s) y^(-s-1) / (s - k) ds

    Requires ``m >= 2`` (the line integral is not absolutely convergent for
    ``m = 1``; use :func:`ginibre_m1_kernel`).
    """

    nu: tuple = (0, 0, 0)

    def __post_init__(self):
        nu = _check_nu(self.nu)
        object.__setattr__(self, "nu", nu)
        if len(nu) - 1 < 2:
            raise UnsupportedConfiguration(
                "m = 1 Ginibre kernel is not integrated directly: it reduces to the "
                "Bessel kernel, 4 * K_Bessel(nu_1; 4x, 4y) (see ginibre_m1_kernel)"
            )

    def _log_f(self, s):
        out = log_sin_pi(s)
        for v in self.nu:
            out = out + log_gamma(s + v + 1.0)
        return out

    def _log_coef(self, k):
        return -sum(gammaln(k + v + 1.0) for v in self.nu)


def ginibre_limit_kernel(nu, x, y, regularized: bool = False):
    """Hard-edge Ginibre-product kernel; see :class:`GinibreKernel`."""
    return GinibreKernel(tuple(nu))(x, y, regularized)


def ginibre_m1_kernel(nu, x, y):
    """The ``m = 1`` case through its Bessel reduction ``4 K_Bessel(4x, 4y)``."""
    nu = _check_nu(nu)
    if len(nu) != 2:
        raise ValueError("ginibre_m1_kernel needs len(nu) == 2")
    return 4.0 * bessel_kernel(nu[1], 4.0 * np.asarray(x), 4.0 * np.asarray(y))


@dataclass(frozen=True)
class TruncatedUnitaryKernel(_LineKernel):
    """Hard-edge limit for products of truncated Haar unitaries.

    Same as :class:`GinibreKernel` with the extra factor
    ``prod_{k in J} Gamma(t + 1 + mu_k) / Gamma(s + 1 + mu_k)``; ``mu`` lists
    the ``mu_k`` for the indices in ``J``. Needs ``m - |J| >= 2``.
    """

    nu: tuple = (0, 0, 0)
    mu: tuple = ()

    def __post_init__(self):
        nu = _check_nu(self.nu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        m = len(nu) - 1
        if len(self.mu) > m - 1:
            raise ValueError("J is a subset of {2, ..., m}")
        if m - len(self.mu) < 2:
            raise UnsupportedConfiguration(
                "need m - |J| >= 2 for an absolutely convergent line integral; "
                "m - |J| = 1 is the Bessel-type borderline case"
            )

    def _log_f(self, s):
        out = log_sin_pi(s)
        for v in self.nu:
            out = out + log_gamma(s + v + 1.0)
        for mu in self.mu:
            out = out - log_gamma(s + 1.0 + mu)
        return out + self._shift

    @property
    def _shift(self) -> float:
        # size of 1/Gamma(s + 1 + mu) on Re s = -1/2, moved into the coefficients
        return float(sum(gammaln(0.5 + mu) for mu in self.mu))

    def _log_coef(self, k):
        return -self._shift - sum(gammaln(k + v + 1.0) for v in self.nu) + sum(
            gammaln(k + 1.0 + mu) for mu in self.mu
        )


def trunc_limit_kernel(nu, mu, x, y, regularized: bool = False):
    """Truncated-unitary product hard-edge kernel."""
    return TruncatedUnitaryKernel(tuple(nu), tuple(mu))(x, y, regularized)


@dataclass(frozen=True)
class GinibreFiniteKernel(_LineKernel):
    """Finite-n kernel of ``n^-m Y_m^* Y_m`` for a product of Ginibre matrices.

    With the t-integral replaced by its residues at ``t = 0..n-1``::

        K(x, y) = sum_{k<n} (-1)^k x^k n^(mk) / (pi Gamma(n-k) prod_j Gamma(k+nu_j+1))
                  * (1/2 pi i) int prod_j Gamma(s+nu_j+1) Gamma(n-s) sin(pi s)
                    y^(-s-1) n^(-ms) / (s - k) ds

    With ``hard_edge=True`` the kernel is returned in hard-edge coordinates,
    ``n^-(m+1) K(x n^-(m+1), y n^-(m+1))``.
    """

    n: int = 1
    nu: tuple = (0, 0)
    hard_edge: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nu", _check_nu(self.nu))
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def m(self) -> int:
        return len(self.nu) - 1

    @property
    def _lam(self) -> float:
        # log of lambda in  lambda K(lambda x, lambda y)
        return -(self.m + 1) * math.log(self.n) if self.hard_edge else 0.0

    def _log_f(self, s):
        n, m = self.n, self.m
        out = log_sin_pi(s) + log_gamma(n - s)
        for v in self.nu:
            out = out + log_gamma(s + v + 1.0)
        return out - s * (m * math.log(n) + self._lam) - self._shift

    @property
    def _shift(self) -> float:
        # size of Gamma(n - s) n^(-ms) on Re s = -1/2, moved from the line
        # integral into the series coefficients to keep both in range
        return gammaln(self.n + 0.5) + 0.5 * (self.m * math.log(self.n) + self._lam)

    def _log_coef(self, k):
        n, m = self.n, self.m
        return (
            self._shift
            + k * (m * math.log(n) + self._lam)
            - gammaln(n - k)
            - sum(gammaln(k + v + 1.0) for v in self.nu)
        )

    def _k_limit(self):
        return self.n

    def bound_constant(self) -> float:
        """Constant c1 with ``|y^(1/2) K(x, y)| <= c1 exp(|x|)`` (hard-edge coordinates).

        Uses ``|s - k| >= 1/2`` and ``|Gamma(n - s) n^s| <= Gamma(n + 1/2) n^(-1/2)``
        on the line ``Re s = -1/2``.
        """
        if not self.hard_edge:
            raise ValueError("bound is stated in hard-edge coordinates")
        n = self.n
        s, w = path_nodes(vertical_line(-0.5), self.quad, 2)
        lf = log_sin_pi(s)
        for v in self.nu:
            lf = lf + log_gamma(s + v + 1.0)
        a = float(np.sum(np.abs(w) * np.exp(lf.real))) / np.pi**2
        k = np.arange(n)
        lr = (
            gammaln(n + 0.5)
            - (k + 0.5) * math.log(n)
            - gammaln(n - k)
            - sum(gammaln(k + v + 1.0) for v in self.nu[1:])
        )
        return a * float(np.exp(np.max(lr)))


def ginibre_finite_kernel(n, nu, x, y, hard_edge: bool = False):
    """Finite-n Ginibre-product kernel; see :class:`GinibreFiniteKernel`."""
    return GinibreFiniteKernel(n=n, nu=tuple(nu), hard_edge=hard_edge)(x, y)


# ---------------------------------------------------------------------------
# Muttalib-Borodin


@dataclass(frozen=True)
class MBContourKernel(Kernel):
    """Muttalib-Borodin hard-edge kernel from its contour representation::

        K(x, y) = theta (y/x)^a sum_k (-1)^k y^(theta k) / (pi Gamma(theta k+a+1) k!)
                  * (1/2 pi i) int_{C} x^(-theta s - 1) Gamma(theta s + a + 1)
                    Gamma(s + 1) sin(pi s) / (s - k) ds

    ``C`` is a pair of rays leaving the apex ``c`` at angle ``delta`` to the
    left of vertical, oriented upwards.
    """

    alpha: float = 1.0
    theta: float = 2.0
    delta: float = 0.4
    quad: QuadratureSpec = MB_QUAD
    k_max: int = 400

    def __post_init__(self):
        if not (0 < self.delta < np.pi / 2):
            raise ValueError("delta must lie strictly between 0 and pi/2")
        if not (self.alpha > -1 and self.theta > 0):
            raise ValueError("need alpha > -1 and theta > 0")

    @property
    def apex(self) -> float:
        return -0.5 + 0.5 * max(0.0, 1.0 - (self.alpha + 1.0) / self.theta)

    def _path(self):
        d = self.delta
        return two_ray_path(self.apex, -(np.pi / 2 + d), np.pi / 2 + d)

    def _eval(self, xs, ys, refine):
        a, th = self.alpha, self.theta
        s, w = path_nodes(self._path(), self.quad, refine)
        lf = log_gamma(th * s + a + 1.0) + log_gamma(s + 1.0) + log_sin_pi(s)
        lx = np.log(xs.astype(complex))
        la = lf[None, :] - (th * s[None, :] + 1.0) * lx[:, None]
        peak = float(np.max(la.real))
        if peak > _LOG_OVERFLOW:
            raise ConditioningError("MB contour integrand overflows", peak)
        A = (w / (2j * np.pi))[None, :] * np.exp(la)
        cols = {}

        def line_int(k):
            if k not in cols:
                cols[k] = A @ (1.0 / (s - k))
            return cols[k]

        ys_c = ys.astype(complex)

        def coef(k):
            return -gammaln(th * k + a + 1.0) - gammaln(k + 1.0)

        # here the power series runs in y^theta and the line integral in x
        body = _residue_sum(coef, ys_c**th, line_int, self.k_max).T
        gauge = (ys_c[None, :] / xs[:, None]) ** a
        return th * gauge * body

    def _matrix(self, xs, ys):
        if np.any(xs == 0):
            raise ValueError("contour form needs x != 0")
        coarse = self._eval(xs, ys, 1)
        fine = self._eval(xs, ys, 2)
        return fine, float(np.max(np.abs(fine - coarse)))


def mb_limit_kernel_contour(alpha, theta, x, y, delta: float = 0.4):
    """Muttalib-Borodin kernel, contour form."""
    return MBContourKernel(alpha, theta, delta)(x, y)


_MB_PLACEMENTS = ("argument", "value")


@dataclass(frozen=True)
class MBSeriesKernel(Kernel):
    """Muttalib-Borodin kernel from Wright's generalized Bessel functions::

        K(x, y) = theta y^a int_0^1 J_{(a+1)/theta, 1/theta}(x u) W(y u) u^a du

    ``placement='argument'`` takes ``W(v) = J_{a+1, theta}(v^theta)``;
    ``placement='value'`` takes ``W(v) = J_{a+1, theta}(v)^theta``.
    """

    alpha: float = 1.0
    theta: float = 2.0
    placement: str = "argument"
    jacobi_nodes: int = 48

    def __post_init__(self):
        if self.placement not in _MB_PLACEMENTS:
            raise ValueError(f"placement must be one of {_MB_PLACEMENTS}")

    def _matrix(self, xs, ys):
        a, th = self.alpha, self.theta
        xi, w = roots_jacobi(self.jacobi_nodes, 0.0, a)
        u = 0.5 * (1.0 + xi)
        w = w / 2.0 ** (a + 1.0)
        xr = np.real(xs).astype(float)
        yr = np.real(ys).astype(float)
        f1 = wright_bessel((a + 1.0) / th, 1.0 / th, np.outer(xr, u).ravel()).reshape(
            len(xr), len(u)
        )
        yu = np.outer(yr, u)
        if self.placement == "argument":
            f2 = wright_bessel(a + 1.0, th, (yu**th).ravel()).reshape(yu.shape)
        else:
            f2 = wright_bessel(a + 1.0, th, yu.ravel()).reshape(yu.shape) ** th
        k = th * (yr**a)[None, :] * ((f1 * w[None, :]) @ f2.T)
        return k.astype(complex), 0.0


def mb_series_placement(alpha: float = 1.0, theta: float = 2.0, tol: float = 1e-4):
    """Decide which reading of the Wright-series formula matches the contour form.

    Both readings are compared against :class:`MBContourKernel` on the grid
    ``{0.5, 1, 2}^2``.

    Returns
    -------
    placement : str
        The matching reading.
    report : dict
        Max abs deviation for each reading.

    Raises
    ------
    RepresentationMismatch
        If no reading matches within ``tol``.
    """
    grid = np.array([0.5, 1.0, 2.0])
    ref, _ = MBContourKernel(alpha, theta).matrix(grid, grid)
    report = {}
    for p in _MB_PLACEMENTS:
        val, _ = MBSeriesKernel(alpha, theta, p).matrix(grid, grid)
        report[p] = float(np.max(np.abs(val - ref)))
    best = min(report, key=report.get)
    if report[best] > tol:
        raise RepresentationMismatch(f"no Wright-series reading matches: {report}")
    return best, report


_PLACEMENT_CACHE: dict = {}


def mb_limit_kernel_series(alpha, theta, x, y):
    """Muttalib-Borodin kernel, Wright-series form with the calibrated reading."""
    key = (float(alpha), float(theta))
    if key not in _PLACEMENT_CACHE:
        _PLACEMENT_CACHE[key] = mb_series_placement(alpha, theta)[0]
    return np.real(MBSeriesKernel(alpha, theta, _PLACEMENT_CACHE[key])(x, y))


# ---------------------------------------------------------------------------
# LUE finite-n kernel


@dataclass(frozen=True)
class LUEFiniteKernel(Kernel):
    """Kernel of the Laguerre ensemble with weight ``x^a exp(-n x)``::

        K_n(x, y) = n sum_{j<n} q_j(n x) q_j(n y) (n y)^a exp(-n y)

    with ``q_j`` orthonormal for ``t^a exp(-t)``, computed by the three-term
    recurrence. The sum is taken directly (no Christoffel-Darboux division),
    so the first argument can be complex.
    """

    n: int = 10
    alpha: float = 0.0

    def __post_init__(self):
        if self.n < 1 or not self.alpha > -1:
            raise ValueError("need n >= 1 and alpha > -1")

    @property
    def beta(self) -> float:  # type: ignore[override]
        return max(0.0, -self.alpha)

    def left(self, x):
        """Rows ``q_j(n x)`` for j < n, shape (n, len(x))."""
        return self._orthonormal(self.n * _as_1d(x), None)

    def right(self, y, regularized: bool = False):
        """Rows ``q_j(n y) (n y)^a exp(-n y)``, shape (n, len(y)).

        The weight is split as two half-weights so no row under- or overflows
        before the other factor is applied.
        """
        t = self.n * _as_1d(y, float)
        if regularized and self.alpha < 0:
            # y^beta (n y)^a = n^a
            loghalf = -0.5 * t
            extra = np.exp(loghalf) * float(self.n) ** self.alpha
        else:
            with np.errstate(divide="ignore"):
                loghalf = 0.5 * (self.alpha * np.log(t) - t)
            extra = np.exp(loghalf)
        psi = self._orthonormal(t.astype(complex), loghalf)
        return psi * extra[None, :]

    def _orthonormal(self, t, loghalf):
        a, n = self.alpha, self.n
        q = np.empty((n, len(t)), dtype=complex)
        start = math.exp(-0.5 * gammaln(a + 1.0))
        if loghalf is None:
            q[0] = start
        else:
            q[0] = start * np.exp(loghalf)
        if n > 1:
            q[1] = (t - (a + 1.0)) * q[0] / math.sqrt(a + 1.0)
        for j in range(1, n - 1):
            bj = math.sqrt(j * (j + a))
            bj1 = math.sqrt((j + 1) * (j + 1 + a))
            q[j + 1] = ((t - (2 * j + a + 1)) * q[j] - bj * q[j - 1]) / bj1
        return q

    def _matrix(self, xs, ys):
        if np.any(np.real(ys) < 0):
            raise ValueError("second argument must be >= 0")
        return self.n * (self.left(xs).T @ self.right(ys)), 0.0

    def matrix(self, xs, ys, regularized: bool = False):
        xs = _as_1d(xs)
        ys = _as_1d(ys, float)
        if regularized and self.alpha < 0:
            return self.n * (self.left(xs).T @ self.right(ys, True)), 0.0
        return self._matrix(xs, ys)


def lue_finite_kernel(n, alpha, x, y):
    """Finite-n LUE kernel for the weight ``x^alpha exp(-n x)``."""
    return np.real_if_close(LUEFiniteKernel(n, alpha)(x, y))


# ---------------------------------------------------------------------------
# scaling and Gaussian transforms


@dataclass(frozen=True)
class HardEdgeScaling:
    """Hard-edge zoom ``x -> x / (c n^gamma)`` or an explicit ``c_n``."""

    c: float = 1.0
    gamma: float = 2.0
    c_n: object = None

    def factor(self, n: int) -> float:
        if self.c_n is not None:
            return float(self.c_n(n))
        return self.c * n**self.gamma

    @classmethod
    def lue(cls, b: float, h0: float) -> "HardEdgeScaling":
        return cls(c=b * h0**2, gamma=2.0)

    @classmethod
    def ginibre(cls, m: int) -> "HardEdgeScaling":
        return cls(c=1.0, gamma=m + 1.0)

    @classmethod
    def muttalib_borodin(cls, theta: float) -> "HardEdgeScaling":
        return cls(c=1.0, gamma=1.0 + 1.0 / theta)

    @classmethod
    def truncated(cls, ell, J=()) -> "HardEdgeScaling":
        ell = tuple(ell)
        J = set(J)
        return cls(c_n=lambda n: n * math.prod(l - n for j, l in enumerate(ell, 1)
                                               if j not in J))


@dataclass(frozen=True)
class ScaledKernel(Kernel):
    """``K'(x, y) = K(x / lam, y / lam) / lam``."""

    base: Kernel = field(default_factory=ZeroKernel)
    lam: float = 1.0

    @property
    def beta(self) -> float:  # type: ignore[override]
        return self.base.beta

    def _matrix(self, xs, ys):
        k, err = self.base.matrix(xs / self.lam, ys / self.lam)
        return k / self.lam, err / self.lam


@dataclass(frozen=True)
class PerturbedKernelSpec:
    """Gaussian transform of a kernel.

    The transformed kernel is::

        K^S(x, y) = int_0^inf phi_sigma(y - t) E_Z[K(x + i sigma Z, t)] dt

    with ``phi_sigma`` the centred normal density of variance ``sigma^2`` and
    ``Z`` standard normal. This is the double integral over ``iR x R+`` after
    moving the s-line to ``x + iR``. ``E_Z`` is computed with ``hermite_nodes``
    Gauss-Hermite points, the t-integral with Gauss-Legendre panels of width
    ``sigma * panel_width`` on ``[max(0, y - width*sigma), y + width*sigma]``.
    """

    base: Kernel
    sigma: float
    quad: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(rule_order=16))
    hermite_nodes: int = 60
    width: float = 10.0
    panel_width: float = 0.25
    max_log_spread: float = 600.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def _t_nodes(lo, hi, beta, npan, order):
    """Gauss-Legendre nodes on [lo, hi]; for lo == 0 and beta > 0 the
    substitution t = w^(1/(1-beta)) absorbs a t^(-beta) endpoint factor."""
    x, w = np.polynomial.legendre.leggauss(order)
    if lo == 0 and beta > 0:
        p = 1.0 / (1.0 - beta)
        a, b = 0.0, hi ** (1.0 / p)
    else:
        p = 1.0
        a, b = lo, hi
    edges = np.linspace(a, b, npan + 1)
    l, r = edges[:-1, None], edges[1:, None]
    u = (0.5 * (r - l) * x + 0.5 * (r + l)).ravel()
    wu = (0.5 * (r - l) * w).ravel()
    if p == 1.0:
        return u, wu, np.ones_like(u)
    # dt = p u^(p-1) du and t^-beta = u^(-p beta); p - 1 - p beta = 0
    return u**p, wu * p, u ** (-p * beta)


def _perturb_once(spec: PerturbedKernelSpec, x: complex, y: float, refine: int):
    sig = spec.sigma
    z, wz = roots_hermitenorm(spec.hermite_nodes * refine if refine > 1 else spec.hermite_nodes)
    wz = wz / math.sqrt(2 * math.pi)
    lo = max(0.0, float(np.real(y)) - spec.width * sig)
    hi = max(float(np.real(y)), 0.0) + spec.width * sig
    npan = max(4, math.ceil((hi - lo) / (spec.panel_width * sig))) * refine
    beta = spec.base.beta if lo == 0 else 0.0
    t, wt, tfac = _t_nodes(lo, hi, beta, npan, spec.quad.rule_order)
    kvals, kerr = spec.base.matrix(x + 1j * sig * z, t, regularized=beta > 0)
    gauss = np.exp(-((y - t) ** 2) / (2 * sig**2)) / (sig * math.sqrt(2 * math.pi))
    terms = (wz[:, None] * kvals) * (wt * gauss * tfac)[None, :]
    mags = np.abs(terms)
    total = complex(np.sum(terms))
    big = float(np.max(mags)) if mags.size else 0.0
    if big > 0 and total != 0:
        spread = math.log(big) - math.log(abs(total))
        if spread * 1.0 > spec.max_log_spread:
            raise ConditioningError("transform cancellation beyond double precision", spread)
    return total, big, kerr


def perturb_kernel(spec: PerturbedKernelSpec, x, y, return_error: bool = False):
    """Gaussian transform of ``spec.base`` at ``(x, y)``.

    Returns the transformed kernel value; with ``return_error=True`` also an
    error estimate from a second pass with twice as many nodes in each
    direction, combined with the cancellation floor ``eps * max|term|``.
    """
    if isinstance(spec.base, ZeroKernel):
        return (0j, 0.0) if return_error else 0j
    v1, big1, _ = _perturb_once(spec, complex(x), y, 1)
    if not return_error:
        return v1
    v2, big2, kerr = _perturb_once(spec, complex(x), y, 2)
    err = abs(v2 - v1) + np.finfo(float).eps * max(big1, big2) * 100 + kerr
    return v1, float(err)


def perturb_finite_kernel(n: int, kernel: Kernel, eps: float, x, y,
                          hermite_nodes: int | None = None,
                          return_error: bool = False):
    """Transform of a finite-n kernel for ``S = M + eps H`` with ``H`` a GUE matrix.

    This is :func:`perturb_kernel` with ``sigma = eps / sqrt(n)`` applied in
    the original (unscaled) coordinates. Gauss-Hermite is exact for kernels
    polynomial in ``x`` once ``hermite_nodes > n / 2``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    nodes = hermite_nodes or max(60, n // 2 + 8)
    spec = PerturbedKernelSpec(kernel, eps / math.sqrt(n), hermite_nodes=nodes)
    return perturb_kernel(spec, x, y, return_error=return_error)
