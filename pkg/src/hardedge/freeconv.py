"""Marchenko-Pastur type laws, free convolution with a semicircle, and
average characteristic polynomials under the Gaussian heat flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import binom, roots_hermitenorm, roots_jacobi

from .errors import ConditioningError, ContinuationError, RealRootsViolation

__all__ = [
    "MPLaw",
    "SemicircleLaw",
    "FreeConvEdges",
    "RealPolynomial",
    "EmpiricalMeasure",
    "mp_from_k",
    "stieltjes",
    "stieltjes_quadrature",
    "solve_edges",
    "subordinate",
    "FreeConvolution",
    "acp_heat_flow",
    "laguerre_acp",
    "real_roots",
    "ks_distance",
]


# ---------------------------------------------------------------------------
# laws


@dataclass(frozen=True)
class MPLaw:
    """Density ``(1/2 pi) sqrt((b - x)/x) h(x)`` on ``[0, b]``.

    ``h`` holds polynomial coefficients in ascending order.
    """

    b: float
    h: tuple

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        object.__setattr__(self, "h", tuple(float(c) for c in self.h))

    def h_eval(self, x, der: int = 0):
        c = np.asarray(self.h)
        if der:
            c = npoly.polyder(c, der) if len(c) > der else np.zeros(1)
        return npoly.polyval(x, c)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x < self.b)
        xs = np.where(inside, x, 0.5 * self.b)
        val = np.sqrt((self.b - xs) / xs) * self.h_eval(xs) / (2 * np.pi)
        return np.where(inside, val, 0.0)

    def scaled(self, s: float) -> "MPLaw":
        """Law of ``s X`` for ``X`` with this law."""
        h = np.asarray(self.h) / s ** (np.arange(len(self.h)) + 1.0)
        return MPLaw(self.b * s, tuple(h))

    def mass(self, nodes: int = 64) -> float:
        return float(stieltjes_quadrature(self, None, nodes=nodes, moment=True))

    @property
    def _tail(self):
        """Coefficients of ``h(z) sqrt(1 - b/z)`` split into polynomial and tail parts."""
        return _split_expansion(np.asarray(self.h), self.b)


def _split_expansion(h, b, tail_terms: int = 60):
    # h(z) sum_j c_j (b/z)^j with c_j = binom(1/2, j) (-1)^j
    deg = len(h) - 1
    jmax = deg + tail_terms
    c = np.array([binom(0.5, j) * (-1) ** j * b**j for j in range(jmax + 1)])
    poly = np.zeros(deg + 1)
    tail = np.zeros(tail_terms + 1)  # coefficient of z^{-m}, m = 1..tail_terms
    for i, hi in enumerate(h):
        for j in range(jmax + 1):
            p = i - j
            if p >= 0:
                poly[p] += hi * c[j]
            elif -p <= tail_terms:
                tail[-p] += hi * c[j]
    return poly, tail


@dataclass(frozen=True)
class SemicircleLaw:
    """Semicircle law of radius ``2 epsilon``."""

    epsilon: float

    def density(self, x):
        e = self.epsilon
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.clip(4 * e * e - x * x, 0.0, None)) / (2 * np.pi * e * e)

    def cdf(self, x):
        e = self.epsilon
        u = np.clip(np.asarray(x, dtype=float) / (2 * e), -1.0, 1.0)
        return 0.5 + (u * np.sqrt(1 - u * u) + np.arcsin(u)) / np.pi


def mp_from_k(k: int):
    """Unit-interval law of the weight ``exp(-n Tr M^k)`` ensemble.

    Returns
    -------
    law : MPLaw
        ``b = 1`` and ``h(x) = 2 sum_{j<k} (A_{k-1-j} / A_k) x^j`` with
        ``A_k = prod_{j<=k} (2j - 1)/(2j)``.
    scale : float
        ``(2 / (k A_k))^(1/k)``; ``law.scaled(scale)`` is the law of the
        n-normalized ensemble.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    A = [1.0]
    for j in range(1, k + 1):
        A.append(A[-1] * (2 * j - 1) / (2 * j))
    h = [2.0 * A[k - 1 - j] / A[k] for j in range(k)]
    return MPLaw(1.0, tuple(h)), (2.0 / (k * A[k])) ** (1.0 / k)


# ---------------------------------------------------------------------------
# Stieltjes transform


def stieltjes_quadrature(law: MPLaw, z, nodes: int = 200, der: int = 0,
                         moment: bool = False):
    """``int d mu(x) / (z - x)^(der+1)`` by Gauss-Jacobi quadrature.

    The nodes absorb the ``x^(-1/2)`` and ``(b - x)^(1/2)`` endpoint factors.
    With ``moment=True`` returns the total mass instead.
    """
    xi, w = roots_jacobi(nodes, 0.5, -0.5)
    x = 0.5 * law.b * (1.0 + xi)
    wh = law.b / (4 * np.pi) * w * law.h_eval(x)
    if moment:
        return float(np.sum(wh))
    z = np.asarray(z, dtype=complex)
    d = z[..., None] - x
    val = np.sum(wh / d ** (der + 1), axis=-1)
    return val * (-1) ** der * math.factorial(der)


def stieltjes(law: MPLaw, z, der: int = 0):
    """Stieltjes transform ``G(z) = int d mu(x) / (z - x)`` or a derivative.

    Closed form ``G = (P(z) - h(z) sqrt(1 - b/z)) / 2``, with ``P`` the
    polynomial part of ``h(z) sqrt(1 - b/z)`` at infinity, so that
    ``G ~ 1/z``. For ``|z| > 2b`` the convergent tail series is summed
    instead to avoid cancellation.

    Parameters
    ----------
    der : {0, 1, 2}
        Order of the derivative.
    """
    z_in = np.asarray(z)
    z = np.atleast_1d(z_in).astype(complex)
    if np.any((z.imag == 0) & (z.real >= 0) & (z.real <= law.b)):
        raise ValueError("z lies on the support [0, b]")
    poly, tail = law._tail
    h = np.asarray(law.h)
    out = np.empty_like(z)
    far = np.abs(z) > 2 * law.b
    if np.any(far):
        zf = z[far]
        m = np.arange(1, len(tail))
        if der == 0:
            coef = tail[1:]
            powr = -m
        elif der == 1:
            coef = tail[1:] * (-m)
            powr = -m - 1
        else:
            coef = tail[1:] * m * (m + 1)
            powr = -m - 2
        # repeated products of 1/z underflow cleanly to 0; complex pow does not
        inv = np.cumprod(np.broadcast_to(1.0 / zf[:, None], (len(zf), -powr[-1])), axis=1)
        out[far] = -0.5 * np.sum(coef * inv[:, -powr - 1], axis=1)
    near = ~far
    if np.any(near):
        out[near] = _closed_form(law, z[near], z[near] - law.b, der)
    return out[0] if z_in.ndim == 0 else out


def _closed_form(law: MPLaw, z, zmb, der):
    # zmb = z - b is passed separately so callers can supply it exactly
    poly, _ = law._tail
    h = np.asarray(law.h)
    r = np.sqrt(zmb / z)
    hz = npoly.polyval(z, h)
    if der == 0:
        return 0.5 * (npoly.polyval(z, poly) - hz * r)
    r1 = law.b / (2 * z**2 * r)
    h1 = npoly.polyval(z, npoly.polyder(h)) if len(h) > 1 else 0 * z
    p1 = npoly.polyval(z, npoly.polyder(poly)) if len(poly) > 1 else 0 * z
    if der == 1:
        return 0.5 * (p1 - h1 * r - hz * r1)
    r2 = -law.b / (z**3 * r) - law.b * r1 / (2 * z**2 * r**2)
    h2 = npoly.polyval(z, npoly.polyder(h, 2)) if len(h) > 2 else 0 * z
    p2 = npoly.polyval(z, npoly.polyder(poly, 2)) if len(poly) > 2 else 0 * z
    return 0.5 * (p2 - h2 * r - 2 * h1 * r1 - hz * r2)


# ---------------------------------------------------------------------------
# edges


@dataclass(frozen=True)
class FreeConvEdges:
    """Edges of the support ``[a_left, b_right]`` of ``mu boxplus semicircle(eps)``.

    ``u_left < 0`` solves ``eps^2 (-G'(u)) = 1`` and ``a_left = u + eps^2 G(u)``;
    ``u_right > b`` and ``b_right`` are the mirror quantities.
    ``c_eps = eps^-2 (|G''(u_left)| / 6)^(-1/3)`` and ``airy_scale`` is the
    zoom factor that matches the standard Airy kernel,
    ``eps^-2 (|G''(u_left)| / 2)^(-1/3)``.
    """

    epsilon: float
    u_left: float
    a_left: float
    u_right: float
    b_right: float
    c_eps: float
    airy_scale: float
    residual_left: float = 0.0
    residual_right: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _solve_side(law: MPLaw, eps: float, side: str):
    """Solve on one side in terms of the distance ``d`` to the support.

    Working with ``d`` rather than ``u`` keeps the root resolvable when it
    sits within a few ulps of ``b``, as happens for small ``eps``.
    """
    e2 = eps * eps
    anchor, sign = (0.0, -1.0) if side == "left" else (law.b, 1.0)

    def g(d, der):
        z = anchor + sign * d
        if abs(z) > 2 * law.b:
            return float(stieltjes(law, z, der).real)
        zmb = (-d - law.b) if side == "left" else d
        return float(_closed_form(law, complex(z), complex(zmb), der).real)

    def phi(d):
        return -e2 * g(d, 1) - 1.0

    # phi decreases from +inf to -1 as d grows
    d = law.b * 1e-30
    prev = None
    while phi(d) > 0:
        prev = d
        d *= 8.0
        if d > 1e12 * law.b:
            raise ContinuationError(f"edge bracketing failed on the {side}")
    if prev is None:
        raise ConditioningError("edge lies within rounding of the support endpoint",
                                math.log(d))
    lo, hi = prev, d
    dr = brentq(phi, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        fp = -sign * e2 * g(dr, 2)
        if fp == 0:
            break
        dn = dr - phi(dr) / fp
        if not (lo <= dn <= hi):
            break
        dr = dn
    u = anchor + sign * dr
    edge = anchor + (sign * dr + e2 * g(dr, 0))
    return u, edge, phi(dr), g(dr, 2)


def solve_edges(law: MPLaw, eps: float) -> FreeConvEdges:
    """Support edges of the free convolution of ``law`` with the semicircle of
    radius ``2 eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    ul, al, rl, g2 = _solve_side(law, eps, "left")
    ur, br, rr, _ = _solve_side(law, eps, "right")
    g2 = abs(g2)
    c_eps = eps**-2 * (g2 / 6.0) ** (-1.0 / 3.0)
    airy_scale = eps**-2 * (g2 / 2.0) ** (-1.0 / 3.0)
    return FreeConvEdges(eps, ul, al, ur, br, c_eps, airy_scale, rl, rr)


# ---------------------------------------------------------------------------
# subordination


def subordinate(law: MPLaw, eps: float, z, steps: int = 32, max_newton: int = 100,
                tol: float = 1e-14):
    """Solve ``G_mu(s) + (s - z)/eps^2 = 0`` for the subordination point.

    The solution is continued from ``Re z + 1e4 i`` down to the target along
    ``steps`` log-spaced imaginary parts; a step whose Newton iteration fails
    is halved.

    Returns
    -------
    s_c : complex ndarray
    G_conv : complex ndarray
        Stieltjes transform of the free convolution at ``z``.
    """
    z_in = np.asarray(z)
    z = np.atleast_1d(z_in).astype(complex)
    if np.any(z.imag <= 0):
        raise ValueError("subordinate needs Im z > 0 (use conjugation below the axis)")
    e2 = eps * eps
    y_start = np.maximum(1e4, z.imag)
    s = (z.real + 1j * y_start) - e2 * stieltjes(law, z.real + 1j * y_start)
    logs = np.log(y_start)
    loge = np.log(z.imag)
    frac, dfrac = 0.0, 1.0 / steps
    while frac < 1.0:
        f_new = min(1.0, frac + dfrac)
        target = z.real + 1j * np.exp(logs + f_new * (loge - logs))
        ok, s_new = _newton(law, e2, target, s, max_newton, tol)
        if ok:
            s, frac = s_new, f_new
        else:
            dfrac /= 2.0
            if dfrac < 1e-6:
                raise ContinuationError("subordination continuation step too small")
    g = stieltjes(law, s)
    if z_in.ndim == 0:
        return s[0], g[0]
    return s, g


def _newton(law, e2, z, s0, max_newton, tol):
    s = s0.copy()
    for _ in range(max_newton):
        g = stieltjes(law, s)
        g1 = stieltjes(law, s, 1)
        f = g + (s - z) / e2
        fp = g1 + 1.0 / e2
        ds = f / fp
        s = s - ds
        if np.any(s.imag < 0) or not np.all(np.isfinite(s)):
            return False, s0
        if np.all(np.abs(ds) <= tol * (1.0 + np.abs(s))):
            return True, s
    return False, s0


@dataclass
class FreeConvolution:
    """Density and distribution function of ``mu boxplus semicircle(eps)``."""

    law: MPLaw
    eps: float
    edges: FreeConvEdges = field(init=False)

    def __post_init__(self):
        self.edges = solve_edges(self.law, self.eps)
        self._cdf = None

    def density(self, x, deltas=(1e-4, 1e-5)):
        """``-Im G(x + i delta) / pi`` extrapolated linearly to ``delta = 0``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d1, d2 = deltas
        r1 = -subordinate(self.law, self.eps, x + 1j * d1)[1].imag / np.pi
        r2 = -subordinate(self.law, self.eps, x + 1j * d2)[1].imag / np.pi
        rho = (d1 * r2 - d2 * r1) / (d1 - d2)
        return np.clip(rho, 0.0, None)

    def _build_cdf(self, panels: int = 200, order: int = 8):
        a, b = self.edges.a_left, self.edges.b_right
        xg, wg = np.polynomial.legendre.leggauss(order)
        th_edges = np.linspace(0.0, np.pi, panels + 1)
        l, r = th_edges[:-1, None], th_edges[1:, None]
        th = (0.5 * (r - l) * xg + 0.5 * (r + l)).ravel()
        w = (0.5 * (r - l) * wg).ravel()
        x = a + (b - a) * (1 - np.cos(th)) / 2
        jac = (b - a) / 2 * np.sin(th)
        vals = (self.density(x) * jac * w).reshape(panels, order).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(vals)])
        self._mass = float(cum[-1])
        self._cdf = PchipInterpolator(th_edges, cum)

    @property
    def mass(self) -> float:
        if self._cdf is None:
            self._build_cdf()
        return self._mass

    def cdf(self, x):
        if self._cdf is None:
            self._build_cdf()
        a, b = self.edges.a_left, self.edges.b_right
        x = np.asarray(x, dtype=float)
        u = np.clip((x - a) / (b - a), 0.0, 1.0)
        th = np.arccos(1 - 2 * u)
        return np.clip(self._cdf(th), 0.0, 1.0)


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class RealPolynomial:
    """Dense real polynomial, ascending coefficients.

    Optionally carries an exact, better conditioned evaluator: a monic
    three-term recurrence ``p_{j+1} = (x - a_j) p_j - b2_j p_{j-1}`` plus the
    variance ``heat`` of the Gaussian average ``E_Z p(x + i sqrt(heat) Z)``
    that was applied to it.
    """

    coeffs: tuple
    recurrence: tuple | None = None
    heat: float = 0.0

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "b")
        if len(c) == 0:
            raise ValueError("zero polynomial")
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def monic(self) -> bool:
        return self.coeffs[-1] == 1.0

    def __call__(self, x):
        if self.recurrence is None:
            return npoly.polyval(x, np.asarray(self.coeffs))
        x = np.asarray(x, dtype=float)
        if self.heat == 0.0:
            return self._rec(x.astype(complex)).real * self.coeffs[-1]
        z, w = roots_hermitenorm(self.degree // 2 + 2)
        w = w / math.sqrt(2 * math.pi)
        pts = x[..., None] + 1j * math.sqrt(self.heat) * z
        return (self._rec(pts) @ w).real * self.coeffs[-1]

    def _rec(self, x):
        a, b2 = self.recurrence
        p0 = np.ones_like(x)
        if self.degree == 0:
            return p0
        p1 = x - a[0]
        for j in range(1, self.degree):
            p0, p1 = p1, (x - a[j]) * p1 - b2[j] * p0
        return p1


def acp_heat_flow(p: RealPolynomial, n: int, eps: float) -> RealPolynomial:
    """``P = sum_m (-eps^2 / 2n)^m p^(2m) / m!``.

    This is ``E_Z p(x + i (eps / sqrt n) Z)``, the average characteristic
    polynomial after adding ``eps`` times a GUE matrix.
    """
    c = np.asarray(p.coeffs, dtype=float)
    out = c.copy()
    term = c.copy()
    q = -(eps * eps) / (2.0 * n)
    m = 1
    while len(term) > 2:
        term = npoly.polyder(term, 2)
        out[: len(term)] += q**m / math.factorial(m) * term
        m += 1
    return RealPolynomial(tuple(out), p.recurrence, p.heat + eps * eps / n)


def laguerre_acp(n: int, alpha: float) -> RealPolynomial:
    """Monic orthogonal polynomial of degree n for the weight ``x^alpha exp(-n x)``."""
    if n < 0 or not alpha > -1:
        raise ValueError("need n >= 0 and alpha > -1")
    a = np.array([(2 * j + alpha + 1) / n for j in range(max(n, 1))])
    b2 = np.array([j * (j + alpha) / n**2 for j in range(max(n, 1))])
    prev, cur = np.array([1.0]), np.array([-a[0], 1.0])
    if n == 0:
        return RealPolynomial((1.0,))
    for j in range(1, n):
        nxt = npoly.polysub(npoly.polymul([-a[j], 1.0], cur), b2[j] * prev)
        prev, cur = cur, nxt
    return RealPolynomial(tuple(cur), (a, b2))


def _newton_polish(c, r, iters=4):
    dc = npoly.polyder(c)
    for _ in range(iters):
        f = npoly.polyval(r, c)
        fp = npoly.polyval(r, dc)
        step = np.where(fp != 0, f / np.where(fp == 0, 1, fp), 0)
        r = r - step
    return r


def _bracket_roots(p: RealPolynomial, max_grid: int = 1 << 20):
    c = np.asarray(p.coeffs)
    d = p.degree
    # Fujiwara bound on the root moduli
    ratios = np.abs(c[:-1] / c[-1])
    bound = 2 * max(ratios[d - i] ** (1.0 / i) for i in range(1, d + 1))
    npts = 64 * d + 1
    while npts <= max_grid:
        x = np.linspace(-bound, bound, npts)
        v = p(x)
        sgn = np.sign(v)
        idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        exact = np.nonzero(v == 0)[0]
        if len(idx) + len(exact) >= d:
            roots = [brentq(p, x[i], x[i + 1], xtol=1e-15, rtol=1e-15) for i in idx]
            roots += list(x[exact])
            return np.sort(np.array(roots))
        npts = 4 * npts - 3
    return None


def real_roots(p: RealPolynomial, known_real: bool = True):
    """Real roots of ``p``, sorted.

    Companion-matrix eigenvalues polished by Newton steps. When ``p`` is
    known to be real-rooted but the companion route leaves imaginary parts
    above ``1e-8 (1 + |Re|)``, the roots are instead bracketed by sign
    changes of ``p`` (using its stable evaluator, if any) and refined by
    Brent's method.

    Raises
    ------
    RealRootsViolation
        ``known_real`` is set and neither route produces ``degree`` real roots.
    """
    c = np.asarray(p.coeffs)
    if p.degree == 0:
        return np.array([])
    r = npoly.polyroots(c).astype(complex)
    r = _newton_polish(c, r)
    real_ok = np.all(np.abs(r.imag) < 1e-8 * (1 + np.abs(r.real)))
    if not known_real:
        keep = np.abs(r.imag) < 1e-8 * (1 + np.abs(r.real))
        return np.sort(r[keep].real)
    if real_ok:
        rr = np.sort(r.real)
        if np.all(np.diff(rr) > 0) and np.max(np.abs(p(rr))) <= _residual_floor(p, rr):
            return rr
    br = _bracket_roots(p)
    if br is None or len(br) != p.degree:
        raise RealRootsViolation(
            f"expected {p.degree} real roots, max |Im| = {np.max(np.abs(r.imag)):.3e}"
        )
    return br


def _residual_floor(p, x):
    c = np.abs(np.asarray(p.coeffs))
    return 1e3 * np.finfo(float).eps * np.max(npoly.polyval(np.abs(x), c))


# ---------------------------------------------------------------------------
# empirical measures


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Equal-weight atoms at sorted points."""

    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(np.sort(np.asarray(self.points, float))))

    @property
    def n(self) -> int:
        return len(self.points)


def ks_distance(emp: EmpiricalMeasure, cdf) -> float:
    """Kolmogorov distance ``sup |F_emp - F|`` checked on both sides of each jump."""
    x = np.asarray(emp.points)
    n = len(x)
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(upper - f)), np.max(np.abs(f - lower))))
