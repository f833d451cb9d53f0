"""Contour paths in the complex plane and panel quadrature along them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Segment",
    "ContourPath",
    "QuadratureSpec",
    "QuadratureWarning",
    "IntegrandError",
    "SeriesDivergenceError",
    "integrate_path",
    "path_nodes",
    "residue_series",
    "vertical_line",
    "two_ray_path",
    "circle",
]

_KINDS = ("vertical-line", "horizontal-line", "ray", "circular-arc")


class QuadratureWarning(RuntimeWarning):
    """Error estimate exceeds the requested tolerance; the value is still returned."""


class IntegrandError(ArithmeticError):
    """The integrand returned a non-finite value at a quadrature node."""

    def __init__(self, node: complex):
        super().__init__(f"non-finite integrand value at node {node!r}")
        self.node = node


class SeriesDivergenceError(ArithmeticError):
    """residue_series did not settle within max_terms."""


@dataclass(frozen=True)
class Segment:
    """One piece of a contour.

    Straight kinds run from ``start`` along the unit vector ``direction`` for
    ``length`` (``math.inf`` allowed for the first or last piece). A
    ``circular-arc`` is centred at ``center`` and sweeps the angle
    ``[angle0, angle0 + sweep]`` at radius ``radius``; ``start``/``direction``
    are ignored for arcs.
    """

    kind: str
    start: complex = 0j
    direction: complex = 1 + 0j
    length: float = 1.0
    center: complex = 0j
    radius: float = 1.0
    angle0: float = 0.0
    sweep: float = 2 * math.pi

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.kind != "circular-arc":
            if not math.isclose(abs(self.direction), 1.0, rel_tol=1e-12):
                raise ValueError("segment direction must be a unit vector")
            if self.kind == "vertical-line" and abs(self.direction.real) > 1e-12:
                raise ValueError("vertical-line direction must be +-i")
            if self.kind == "horizontal-line" and abs(self.direction.imag) > 1e-12:
                raise ValueError("horizontal-line direction must be +-1")
            if not self.length > 0:
                raise ValueError("segment length must be positive")

    @property
    def unbounded(self) -> bool:
        return self.kind != "circular-arc" and math.isinf(self.length)

    def start_point(self) -> complex:
        if self.kind == "circular-arc":
            return self.center + self.radius * np.exp(1j * self.angle0)
        return complex(self.start)

    def end_point(self) -> complex:
        if self.kind == "circular-arc":
            return self.center + self.radius * np.exp(1j * (self.angle0 + self.sweep))
        return complex(self.start + self.direction * self.length)

    def reversed(self) -> "Segment":
        if self.kind == "circular-arc":
            return Segment(
                self.kind,
                center=self.center,
                radius=self.radius,
                angle0=self.angle0 + self.sweep,
                sweep=-self.sweep,
            )
        if self.unbounded:
            raise ValueError("cannot reverse an unbounded segment in place")
        return Segment(self.kind, self.end_point(), -self.direction, self.length)

    def split(self, frac: float) -> tuple["Segment", "Segment"]:
        """Split at fraction ``frac`` of the (finite) parameter range."""
        if self.kind == "circular-arc":
            a = self.sweep * frac
            return (
                Segment(self.kind, center=self.center, radius=self.radius,
                        angle0=self.angle0, sweep=a),
                Segment(self.kind, center=self.center, radius=self.radius,
                        angle0=self.angle0 + a, sweep=self.sweep - a),
            )
        if self.unbounded:
            raise ValueError("cannot split an unbounded segment by fraction")
        l1 = self.length * frac
        return (
            Segment(self.kind, self.start, self.direction, l1),
            Segment(self.kind, self.start + self.direction * l1, self.direction,
                    self.length - l1),
        )


@dataclass(frozen=True)
class ContourPath:
    """Ordered list of connected segments.

    An unbounded segment may only be first (then it is traversed *towards* its
    ``start`` from infinity) or last (traversed from ``start`` to infinity).
    The first segment is marked incoming with ``incoming=True``.
    """

    segments: tuple
    incoming: bool = False

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("empty contour")
        for i, s in enumerate(segs):
            if s.unbounded and not (i == len(segs) - 1 or (i == 0 and self.incoming)):
                raise ValueError("unbounded segments may appear only first or last")
        if self.incoming and not segs[0].unbounded:
            raise ValueError("incoming flag requires an unbounded first segment")
        pts = self._joints()
        for a, b in pts:
            if abs(a - b) > 1e-12 * (1 + abs(a)):
                raise ValueError(f"segments do not connect: {a} -> {b}")

    def _joints(self):
        segs = self.segments
        out = []
        for i in range(len(segs) - 1):
            if i == 0 and self.incoming:
                end = segs[0].start_point()
            else:
                end = segs[i].end_point()
            out.append((end, segs[i + 1].start_point()))
        return out

    def reversed(self) -> "ContourPath":
        segs = list(self.segments)
        if self.incoming:
            # the incoming first piece becomes an outgoing last piece and vice versa
            first = segs[0]
            if len(segs) > 1 and segs[-1].unbounded:
                rest = [s.reversed() for s in reversed(segs[1:-1])]
                return ContourPath((segs[-1],) + tuple(rest) + (first,), incoming=True)
            rest = [s.reversed() for s in reversed(segs[1:])]
            return ContourPath(tuple(rest) + (first,), incoming=False)
        if segs[-1].unbounded:
            rest = [s.reversed() for s in reversed(segs[:-1])]
            return ContourPath((segs[-1],) + tuple(rest), incoming=True)
        return ContourPath(tuple(s.reversed() for s in reversed(segs)))


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for :func:`integrate_path`.

    Unbounded segments are cut at distance ``truncation_radius`` from their
    finite endpoint. Each segment is split into ``ceil(panels_per_unit *
    length)`` Gauss-Legendre panels of ``rule_order`` nodes.
    """

    truncation_radius: float = 10.0
    panels_per_unit: int = 2
    rule_order: int = 16
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not self.truncation_radius > 0:
            raise ValueError("truncation_radius must be positive")
        if self.panels_per_unit < 1 or self.rule_order < 1:
            raise ValueError("panels_per_unit and rule_order must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")


def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def _segment_nodes(seg: Segment, incoming: bool, spec: QuadratureSpec, ppu: int):
    """Nodes z and weights w (dz included) for one segment, in path orientation."""
    x, w = _gl(spec.rule_order)
    if seg.kind == "circular-arc":
        arclen = abs(seg.sweep) * seg.radius
        npan = max(1, math.ceil(ppu * arclen))
        edges = np.linspace(0.0, seg.sweep, npan + 1)
        a, b = edges[:-1, None], edges[1:, None]
        th = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        wt = (0.5 * (b - a) * w).ravel()
        ang = seg.angle0 + th
        z = seg.center + seg.radius * np.exp(1j * ang)
        dz = 1j * seg.radius * np.exp(1j * ang)
        return z, wt * dz
    length = min(seg.length, spec.truncation_radius)
    npan = max(1, math.ceil(ppu * length))
    edges = np.linspace(0.0, length, npan + 1)
    a, b = edges[:-1, None], edges[1:, None]
    t = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wt = (0.5 * (b - a) * w).ravel()
    if incoming:
        # traversed from infinity towards start: z = start + d*t with t decreasing
        z = seg.start + seg.direction * t[::-1]
        return z, -seg.direction * wt[::-1]
    return seg.start + seg.direction * t, seg.direction * wt


def path_nodes(path: ContourPath, spec: QuadratureSpec, refine: int = 1):
    """All quadrature nodes and complex weights along ``path``."""
    zs, ws = [], []
    for i, seg in enumerate(path.segments):
        z, w = _segment_nodes(seg, path.incoming and i == 0, spec,
                              spec.panels_per_unit * refine)
        zs.append(z)
        ws.append(w)
    return np.concatenate(zs), np.concatenate(ws)


def _apply(f, z):
    vals = np.asarray(f(z), dtype=complex)
    if vals.shape != z.shape:
        vals = np.broadcast_to(vals, z.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise IntegrandError(complex(z[np.argmax(bad)]))
    return vals


def integrate_path(
    f: Callable[[np.ndarray], np.ndarray],
    path: ContourPath,
    spec: QuadratureSpec | None = None,
):
    """Integrate ``f`` along ``path`` with composite Gauss-Legendre panels.

    ``f`` is called once per pass with a 1-d complex array of nodes and must
    return values of the same shape.

    Returns
    -------
    value : complex
        Result with the panel count doubled.
    err : float
        ``|refined - coarse|``.

    Warns
    -----
    QuadratureWarning
        When ``err > abs_tol + rel_tol * |value|``.
    """
    spec = spec or QuadratureSpec()
    z0, w0 = path_nodes(path, spec, 1)
    z1, w1 = path_nodes(path, spec, 2)
    coarse = complex(np.sum(w0 * _apply(f, z0)))
    fine = complex(np.sum(w1 * _apply(f, z1)))
    err = abs(fine - coarse)
    if err > spec.abs_tol + spec.rel_tol * abs(fine):
        warnings.warn(
            f"quadrature tolerance not met: err={err:.3e}, value={fine!r}",
            QuadratureWarning,
            stacklevel=2,
        )
    return fine, err


def residue_series(
    g: Callable[[int], complex],
    tol: float = 1e-15,
    max_terms: int = 500,
    min_terms: int = 1,
):
    """Sum ``sum_k (-1)^k g(k) / pi`` over k = 0, 1, 2, ...

    This is ``(1/2 pi i)`` times the integral of ``g(t)/sin(pi t)`` around a
    loop enclosing the nonnegative integers with positive orientation.

    ``g`` may return an array, in which case the sums run elementwise and
    the stopping rule must hold for every element. Stops after three
    consecutive terms satisfy ``|term| <= tol * |partial|``.

    Returns
    -------
    value : complex or ndarray
    terms : int
        Number of terms summed.
    """
    total = None
    quiet = 0
    for k in range(max_terms):
        term = (-1) ** k * np.asarray(g(k), dtype=complex) / math.pi
        if not np.all(np.isfinite(term)):
            raise IntegrandError(complex(k))
        total = term if total is None else total + term
        if np.all(np.abs(term) <= tol * np.abs(total)):
            quiet += 1
        else:
            quiet = 0
        if quiet >= 3 and k + 1 >= min_terms:
            return (complex(total) if total.ndim == 0 else total), k + 1
    raise SeriesDivergenceError(
        f"residue series not settled after {max_terms} terms"
    )


# ---------------------------------------------------------------------------
# common contours


def vertical_line(c: float) -> ContourPath:
    """The line ``c + i R`` oriented upwards."""
    return ContourPath(
        (
            Segment("vertical-line", complex(c), -1j, math.inf),
            Segment("vertical-line", complex(c), 1j, math.inf),
        ),
        incoming=True,
    )


def two_ray_path(apex: complex, angle_in: float, angle_out: float) -> ContourPath:
    """Path arriving at ``apex`` from infinity along ``exp(i angle_in)`` and
    leaving along ``exp(i angle_out)``."""
    return ContourPath(
        (
            Segment("ray", complex(apex), complex(np.exp(1j * angle_in)), math.inf),
            Segment("ray", complex(apex), complex(np.exp(1j * angle_out)), math.inf),
        ),
        incoming=True,
    )


def circle(center: complex = 0j, radius: float = 1.0) -> ContourPath:
    """Positively oriented circle."""
    return ContourPath((Segment("circular-arc", center=center, radius=radius),))


def split_path(path: ContourPath, index: int, frac: float) -> ContourPath:
    """Split segment ``index`` (finite) of ``path`` at fraction ``frac``."""
    segs: Sequence[Segment] = path.segments
    a, b = segs[index].split(frac)
    return ContourPath(tuple(segs[:index]) + (a, b) + tuple(segs[index + 1:]),
                       incoming=path.incoming)
