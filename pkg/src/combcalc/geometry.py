"""Planar geometry for sector and comb-domain boundary contours.

Complex numbers double as points of the plane.  A contour is an ordered list
of oriented pieces (straight segments and circular arcs); closed simple
contours bound the integration domains used by the calculus layer.  Comb sets
are the dyadic rectangle stacks excised around sector boundary rays.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CLOSURE_TOL = 1e-12
BOUNDARY_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric construction or query."""


class BoundaryAmbiguousError(GeometryError):
    """Point query too close to the contour to classify."""


def require_finite(z: complex, name: str = "value") -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise GeometryError(f"{name} must be finite, got {z!r}")
    return z


def _unit(z: complex, name: str) -> complex:
    z = require_finite(z, name)
    if abs(abs(z) - 1.0) > 1e-9:
        raise GeometryError(f"{name} must be a unit complex number, got |{name}|={abs(z)!r}")
    return z / abs(z)


# ---------------------------------------------------------------------------
# contour pieces


@dataclass(frozen=True)
class Segment:
    """Oriented straight segment from ``start`` to ``end``."""

    start: complex
    end: complex

    def __post_init__(self):
        require_finite(self.start, "start")
        require_finite(self.end, "end")
        if abs(self.end - self.start) == 0.0:
            raise GeometryError("degenerate segment")

    @property
    def length(self) -> float:
        return abs(self.end - self.start)

    def point(self, t):
        return self.start + np.asarray(t) * (self.end - self.start)

    def derivative(self, t):
        return np.full_like(np.asarray(t, dtype=float), 1.0) * (self.end - self.start)

    def reversed(self) -> "Segment":
        return Segment(self.end, self.start)


@dataclass(frozen=True)
class Arc:
    """Circular arc around ``center`` from angle ``theta0`` to ``theta1``.

    The sweep ``theta1 - theta0`` is signed; positive means counterclockwise.
    """

    center: complex
    radius: float
    theta0: float
    theta1: float

    def __post_init__(self):
        require_finite(self.center, "center")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError("arc radius must be positive and finite")
        sweep = self.theta1 - self.theta0
        if sweep == 0.0 or abs(sweep) > 2 * math.pi + 1e-12:
            raise GeometryError("arc sweep must be nonzero and at most a full turn")

    @property
    def sweep(self) -> float:
        return self.theta1 - self.theta0

    @property
    def start(self) -> complex:
        return self.center + self.radius * cmath.exp(1j * self.theta0)

    @property
    def end(self) -> complex:
        return self.center + self.radius * cmath.exp(1j * self.theta1)

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point(self, t):
        ang = self.theta0 + np.asarray(t) * self.sweep
        return self.center + self.radius * np.exp(1j * ang)

    def derivative(self, t):
        ang = self.theta0 + np.asarray(t) * self.sweep
        return 1j * self.sweep * self.radius * np.exp(1j * ang)

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)


Piece = Segment | Arc


def _piece_distance_segment(seg: Segment, z: complex) -> float:
    d = seg.end - seg.start
    t = ((z - seg.start) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(seg.start + t * d - z)


def _arc_contains_angle(arc: Arc, phi: float) -> bool:
    # normalize phi into [theta_min, theta_min + 2pi) and compare with sweep
    lo, hi = sorted((arc.theta0, arc.theta1))
    span = hi - lo
    shifted = (phi - lo) % (2 * math.pi)
    return shifted <= span + 1e-15


def _piece_distance_arc(arc: Arc, z: complex) -> float:
    u = z - arc.center
    r = abs(u)
    if r == 0.0:
        return arc.radius
    if _arc_contains_angle(arc, cmath.phase(u)):
        return abs(r - arc.radius)
    return min(abs(z - arc.start), abs(z - arc.end))


def piece_distance(piece: Piece, z: complex) -> float:
    if isinstance(piece, Segment):
        return _piece_distance_segment(piece, z)
    return _piece_distance_arc(piece, z)


def _segment_pair_distance(a: Segment, b: Segment) -> float:
    # min distance between two segments; 0 if they properly intersect
    p, r = a.start, a.end - a.start
    q, s = b.start, b.end - b.start
    denom = (r * s.conjugate()).imag
    if abs(denom) > 1e-30:
        t = ((q - p) * s.conjugate()).imag / denom
        u = ((q - p) * r.conjugate()).imag / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    cands = [
        _piece_distance_segment(a, b.start),
        _piece_distance_segment(a, b.end),
        _piece_distance_segment(b, a.start),
        _piece_distance_segment(b, a.end),
    ]
    return min(cands)


def _arc_polyline(arc: Arc, max_step: float = 0.01) -> list[Segment]:
    n = max(2, int(math.ceil(abs(arc.sweep) / max_step)))
    ts = np.linspace(0.0, 1.0, n + 1)
    pts = arc.point(ts)
    return [Segment(pts[i], pts[i + 1]) for i in range(n)]


def _pair_min_distance(a: Piece, b: Piece) -> float:
    segs_a = [a] if isinstance(a, Segment) else _arc_polyline(a)
    segs_b = [b] if isinstance(b, Segment) else _arc_polyline(b)
    best = math.inf
    for sa in segs_a:
        for sb in segs_b:
            best = min(best, _segment_pair_distance(sa, sb))
    # chord approximation of an arc is within its sagitta of the true arc
    sag = 0.0
    for p in (a, b):
        if isinstance(p, Arc):
            sag += p.radius * (0.01**2) / 8.0
    return best - sag


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class Contour:
    """Closed, simple, piecewise smooth contour."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise GeometryError("contour needs at least one piece")
        n = len(self.pieces)
        scale = max(1.0, max(abs(p.start) for p in self.pieces))
        for i in range(n):
            gap = abs(self.pieces[i].end - self.pieces[(i + 1) % n].start)
            if gap > CLOSURE_TOL * scale:
                raise GeometryError(
                    f"contour not closed: gap {gap:.3e} between piece {i} and {(i + 1) % n}"
                )
        _check_simple(self.pieces)
        if self.signed_area() <= 0.0:
            object.__setattr__(self, "_orientation", -1)
        else:
            object.__setattr__(self, "_orientation", +1)

    @property
    def orientation(self) -> int:
        return self._orientation

    @property
    def total_length(self) -> float:
        return sum(p.length for p in self.pieces)

    def signed_area(self) -> float:
        # area = Im(∮ conj(z) dz) / 2, with exact per-piece antiderivatives
        acc = 0.0
        for p in self.pieces:
            if isinstance(p, Segment):
                acc += (((p.start + p.end) / 2).conjugate() * (p.end - p.start)).imag
            else:
                e0 = cmath.exp(1j * p.theta0)
                e1 = cmath.exp(1j * p.theta1)
                acc += (p.radius * p.center.conjugate() * (e1 - e0)).imag
                acc += p.radius**2 * p.sweep
        return acc / 2.0

    def distance(self, z: complex) -> float:
        return min(piece_distance(p, z) for p in self.pieces)

    def point_at(self, s: float) -> complex:
        """Point at arc length ``s`` from the start of the first piece."""
        s = s % self.total_length
        for p in self.pieces:
            if s <= p.length:
                return complex(p.point(s / p.length))
            s -= p.length
        return complex(self.pieces[-1].point(1.0))

    def sample(self, n: int) -> np.ndarray:
        """``n`` points uniformly spaced in arc length."""
        total = self.total_length
        return np.array([self.point_at(i * total / n) for i in range(n)])

    def vertices(self, arc_step: float = 0.05) -> np.ndarray:
        """Polyline vertices (arcs subdivided at angular step ``arc_step``)."""
        pts: list[complex] = []
        for p in self.pieces:
            if isinstance(p, Segment):
                pts.append(p.start)
            else:
                n = max(1, int(math.ceil(abs(p.sweep) / arc_step)))
                for t in np.linspace(0.0, 1.0, n + 1)[:-1]:
                    pts.append(complex(p.point(t)))
        pts.append(self.pieces[-1].end)
        return np.array(pts)


def _adjacent(i: int, j: int, n: int) -> bool:
    return (j - i) % n == 1 or (i - j) % n == 1


def _check_simple(pieces: Sequence[Piece]) -> None:
    n = len(pieces)
    scale = max(1.0, max(abs(p.start) for p in pieces))
    for i in range(n):
        for j in range(i + 1, n):
            if n > 1 and _adjacent(i, j, n):
                continue
            if n > 2 and _pair_min_distance(pieces[i], pieces[j]) < BOUNDARY_TOL * scale:
                raise GeometryError(
                    f"contour self-intersects: pieces {i} and {j} come within tolerance"
                )


def circle_contour(center: complex = 0.0, radius: float = 1.0) -> Contour:
    return Contour((Arc(center, radius, 0.0, 2 * math.pi),))


def polygon_contour(vertices: Sequence[complex]) -> Contour:
    vs = [complex(v) for v in vertices]
    return Contour(tuple(Segment(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))))


# ---------------------------------------------------------------------------
# winding numbers and point classification


def _segment_sweep(a: complex, b: complex, z: complex) -> float:
    return cmath.phase((b - z) / (a - z))


def _arc_sweep(arc: Arc, z: complex) -> float:
    """Exact argument sweep of ``arc`` as seen from ``z`` (not on the arc)."""
    total = 0.0
    nsub = max(1, int(math.ceil(abs(arc.sweep) / (math.pi / 2))))
    for k in range(nsub):
        t0, t1 = k / nsub, (k + 1) / nsub
        a = complex(arc.point(t0))
        b = complex(arc.point(t1))
        delta = _segment_sweep(a, b, z)
        # lens correction: chord formula is off by a full turn when z sits
        # strictly between the chord and the arc
        u = z - arc.center
        if abs(u) < arc.radius:
            cross_ab = ((b - a).conjugate() * (z - a)).imag
            cross_ac = ((b - a).conjugate() * (arc.center - a)).imag
            if cross_ab * cross_ac < 0.0:
                delta += math.copysign(2 * math.pi, arc.sweep)
        total += delta
    return total


def winding_number(contour: Contour, z: complex) -> int:
    """Winding number of the contour around ``z`` (must be off the contour)."""
    total = 0.0
    for p in contour.pieces:
        if isinstance(p, Segment):
            total += _segment_sweep(p.start, p.end, z)
        else:
            total += _arc_sweep(p, z)
    w = total / (2 * math.pi)
    k = round(w)
    if abs(w - k) > 0.25:
        raise GeometryError(f"winding number did not converge to an integer: {w!r}")
    return int(k)


def point_in_domain(domain: "Domain | Contour", z: complex) -> bool:
    """True iff ``z`` lies in the bounded component enclosed once positively.

    Raises ``BoundaryAmbiguousError`` for points within 1e-12 of the contour.
    """
    contour = domain.boundary if isinstance(domain, Domain) else domain
    z = require_finite(z, "query point")
    scale = max(1.0, max(abs(p.start) for p in contour.pieces))
    if contour.distance(z) < BOUNDARY_TOL * scale:
        raise BoundaryAmbiguousError(f"boundary-ambiguous query at {z!r}")
    return winding_number(contour, z) == contour.orientation


# ---------------------------------------------------------------------------
# chord-arc constant


def chord_arc_constant(contour: Contour, sample_pairs: int = 256) -> float:
    """Max sampled ratio of (shorter) boundary arc length to chord length.

    Deterministic: points are equally spaced in arc length, all pairs among
    an even number M of points with M(M-1)/2 >= sample_pairs are used.
    """
    if sample_pairs < 100:
        raise GeometryError("sample_pairs must be at least 100")
    m = int(math.ceil((1 + math.sqrt(1 + 8 * sample_pairs)) / 2))
    if m % 2:
        m += 1
    if m % 4:
        m += 2  # also hit opposite-corner pairs of 4-fold symmetric contours
    total = contour.total_length
    s = np.arange(m) * (total / m)
    pts = np.array([contour.point_at(si) for si in s])
    best = 0.0
    for i in range(m):
        ds = s[i + 1 :] - s[i]
        arc = np.minimum(ds, total - ds)
        chord = np.abs(pts[i + 1 :] - pts[i])
        ok = chord > 1e-14
        if np.any(ok):
            best = max(best, float(np.max(arc[ok] / chord[ok])))
    return best


# ---------------------------------------------------------------------------
# sectors and comb sets


@dataclass(frozen=True)
class Sector:
    """Open circular sector: {r·direction·e^{it} : 0<r<radius, |t|<half_angle}."""

    direction: complex
    half_angle: float
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "direction", _unit(self.direction, "direction"))
        if not (0.0 < self.half_angle <= math.pi):
            raise GeometryError("half_angle must lie in (0, pi]")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError("radius must be positive and finite")

    @property
    def axis_angle(self) -> float:
        return cmath.phase(self.direction)

    def ray_direction(self, sign: int) -> complex:
        return self.direction * cmath.exp(1j * sign * self.half_angle)

    def contains(self, z: complex) -> bool:
        if z == 0 or abs(z) >= self.radius:
            return False
        t = cmath.phase(z / self.direction)
        return abs(t) < self.half_angle


@dataclass(frozen=True)
class CombPlacement:
    """Where a comb sits: on the ray ``direction·e^{i·sign·ray_angle}``."""

    direction: complex
    sign: int
    ray_angle: float

    def __post_init__(self):
        object.__setattr__(self, "direction", _unit(self.direction, "direction"))
        if self.sign not in (-1, 1):
            raise GeometryError("sign must be +1 or -1")
        if not (0.0 < self.ray_angle <= math.pi):
            raise GeometryError("ray_angle must lie in (0, pi]")

    @property
    def ray(self) -> complex:
        return self.direction * cmath.exp(1j * self.sign * self.ray_angle)


@dataclass(frozen=True)
class CombSet:
    """Stack of rectangles straddling a ray, shrinking toward the origin.

    Rectangle n (1-based) is {a_{n+1} <= x <= a_n, |y| <= delta_n} in ray
    coordinates.  Constraints: a_1 = 1 > a_2 > ... > 0, delta_1 < a_2·sin(alpha),
    delta_n < min(delta_{n-1}, a_{n+1}·sin(alpha)); every rectangle then lies
    inside the half-angle-alpha sector around the ray.
    """

    alpha: float
    a: tuple[float, ...]
    delta: tuple[float, ...]
    placement: CombPlacement

    def __post_init__(self):
        if not (0.0 < self.alpha < math.pi / 2):
            raise GeometryError("alpha must lie in (0, pi/2)")
        a = tuple(float(v) for v in self.a)
        d = tuple(float(v) for v in self.delta)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "delta", d)
        if len(a) < 2 or len(d) != len(a) - 1:
            raise GeometryError("need len(a) = n_rect + 1 >= 2")
        if abs(a[0] - 1.0) > 1e-12:
            raise GeometryError("outermost abscissa a_1 must equal 1")
        if any(not (0.0 < a[i + 1] < a[i]) for i in range(len(a) - 1)):
            raise GeometryError("abscissas must decrease strictly toward 0")
        sa = math.sin(self.alpha)
        for n, dn in enumerate(d, start=1):
            if not (0.0 < dn < self.a[n] * sa):
                raise GeometryError(f"delta_{n} must lie in (0, a_{n + 1}·sin(alpha))")
            if n > 1 and not (dn < d[n - 2]):
                raise GeometryError(f"delta_{n} must be smaller than delta_{n - 1}")

    @property
    def n_rect(self) -> int:
        return len(self.delta)

    @property
    def inner_radius(self) -> float:
        return self.a[-1]

    def rectangles(self) -> list[np.ndarray]:
        """Corner quadruples of each placed rectangle (counterclockwise)."""
        rot = self.placement.ray
        out = []
        for n in range(self.n_rect):
            x0, x1, dn = self.a[n + 1], self.a[n], self.delta[n]
            corners = np.array(
                [x0 - 1j * dn, x1 - 1j * dn, x1 + 1j * dn, x0 + 1j * dn], dtype=complex
            )
            out.append(corners * rot)
        return out


def dyadic_schedule(n_rect: int = 12) -> tuple[float, ...]:
    """Abscissas 1, 1/2, ..., 2^-n_rect."""
    if n_rect < 1:
        raise GeometryError("need at least one rectangle")
    return tuple(2.0 ** (-k) for k in range(n_rect + 1))


def schedule_from_r_min(r_min: float) -> tuple[float, ...]:
    """Dyadic schedule truncated so that the innermost abscissa stays >= r_min."""
    if not (0.0 < r_min < 0.5):
        raise GeometryError("r_min must lie in (0, 0.5)")
    n = int(math.floor(math.log2(1.0 / r_min)))
    return dyadic_schedule(n)


def _rect_axes(corners: np.ndarray) -> list[complex]:
    e1 = corners[1] - corners[0]
    e2 = corners[3] - corners[0]
    return [e1 / abs(e1), e2 / abs(e2)]


def rectangles_intersect(c1: np.ndarray, c2: np.ndarray, slack: float = 0.0) -> bool:
    """Separating-axis test for two convex quadrilaterals."""
    for axis in _rect_axes(c1) + _rect_axes(c2):
        p1 = (c1 * axis.conjugate()).real
        p2 = (c2 * axis.conjugate()).real
        if p1.max() < p2.min() - slack or p2.max() < p1.min() - slack:
            return False
    return True


# ---------------------------------------------------------------------------
# boundary contour assembly


def make_sector(direction: complex, half_angle: float, radius: float = 1.0) -> Sector:
    return Sector(direction, half_angle, radius)


def _comb_for_sign(combs: Iterable[CombSet], sector: Sector, sign: int) -> CombSet | None:
    found = None
    for c in combs:
        if c.placement.sign != sign:
            continue
        if found is not None:
            raise GeometryError(f"two combs share the sign-{sign:+d} ray")
        if abs(c.placement.direction - sector.direction) > 1e-9:
            raise GeometryError("comb placement direction does not match the sector")
        if abs(c.placement.ray_angle - sector.half_angle) > 1e-9:
            raise GeometryError("comb ray_angle does not match the sector half-angle")
        found = c
    return found


def _validate_comb_geometry(sector: Sector, comb: CombSet, clip: float) -> None:
    for n in range(comb.n_rect):
        half_width = math.atan2(comb.delta[n], comb.a[n + 1])
        if half_width >= 2 * sector.half_angle:
            raise GeometryError(f"comb rectangle {n + 1} escapes the sector")
    # only the outermost rectangle may poke through the clip circle
    for n in range(1, comb.n_rect):
        if math.hypot(comb.a[n], comb.delta[n]) >= clip:
            raise GeometryError(f"comb rectangle {n + 1} crosses the clipping circle")


def _ray_path_inward(direction: complex, comb: CombSet | None, clip: float) -> tuple[list[Piece], float]:
    """Pieces along one boundary ray walking from the clip circle to 0.

    Works in ray coordinates with the domain side at y < 0 (the upper-ray
    convention); the caller mirrors for the lower ray.  Returns the pieces
    (already rotated into the plane by ``direction``) plus the polar angle
    offset of the arc junction relative to the ray.
    """
    pts: list[complex] = []
    if comb is None:
        pts = [clip, 0.0]
        segs = [Segment(direction * pts[i], direction * pts[i + 1]) for i in range(len(pts) - 1)]
        return segs, 0.0

    a, d = comb.a, comb.delta
    outer_corner = math.hypot(a[0], d[0])
    if abs(clip - a[0]) <= 1e-12:
        x_star = math.sqrt(clip**2 - d[0] ** 2)
        if x_star <= a[1]:
            raise GeometryError("outermost rectangle is too tall for the clipping radius")
        angle_off = math.asin(d[0] / clip)
        pts.append(x_star - 1j * d[0])
    elif clip > outer_corner:
        angle_off = 0.0
        pts.append(clip)
        pts.append(a[0])
        pts.append(a[0] - 1j * d[0])
    else:
        raise GeometryError(
            "clip radius must equal the outermost abscissa or clear the outer corner"
        )
    # bottom edges with jogs between successive rectangles
    for n in range(comb.n_rect):
        pts.append(a[n + 1] - 1j * d[n])
        if n + 1 < comb.n_rect:
            pts.append(a[n + 1] - 1j * d[n + 1])
    pts.append(a[-1] + 0j)
    pts.append(0j)
    segs = [Segment(direction * pts[i], direction * pts[i + 1]) for i in range(len(pts) - 1)]
    return segs, angle_off


def build_boundary_contour(
    sector: Sector,
    combs: Sequence[CombSet] = (),
    clip_radius: float = 1.0,
) -> Contour:
    """Positively oriented boundary of (sector ∩ disk(clip_radius)) minus combs.

    The contour runs from 0 out along the lower ray (detouring around comb
    rectangles on their in-sector halves), counterclockwise along the clip
    arc, and back along the upper ray to 0.
    """
    if not (0.0 < clip_radius <= sector.radius):
        raise GeometryError("clip radius must lie in (0, sector radius]")
    if sector.half_angle >= math.pi:
        raise GeometryError("boundary assembly needs half_angle < pi")
    lower = _comb_for_sign(combs, sector, -1)
    upper = _comb_for_sign(combs, sector, +1)
    for comb in (lower, upper):
        if comb is not None:
            _validate_comb_geometry(sector, comb, clip_radius)
    if lower is not None and upper is not None:
        for r1 in lower.rectangles():
            for r2 in upper.rectangles():
                if rectangles_intersect(r1, r2):
                    raise GeometryError("combs intersect")

    th = sector.axis_angle
    up_dir = sector.ray_direction(+1)
    lo_dir = sector.ray_direction(-1)

    upper_pieces, up_off = _ray_path_inward(up_dir, upper, clip_radius)
    lower_pieces_in, lo_off = _ray_path_inward(lo_dir, lower, clip_radius)
    # the lower ray is walked outward and mirrored to put the domain at y > 0
    lower_pieces = [
        Segment(p.end.conjugate() * cmath.exp(2j * (th - sector.half_angle)),
                p.start.conjugate() * cmath.exp(2j * (th - sector.half_angle)))
        for p in reversed(lower_pieces_in)
    ]
    arc = Arc(0.0, clip_radius, th - sector.half_angle + lo_off, th + sector.half_angle - up_off)
    return Contour(tuple(lower_pieces) + (arc,) + tuple(upper_pieces))


@dataclass(frozen=True)
class Domain:
    """A contour together with a representative interior point."""

    boundary: Contour
    representative: complex

    def __post_init__(self):
        require_finite(self.representative, "representative")
        if not point_in_domain(self.boundary, self.representative):
            raise GeometryError("representative point is not inside the boundary")

    def contains(self, z: complex) -> bool:
        return point_in_domain(self.boundary, z)


def sector_domain(
    sector: Sector, combs: Sequence[CombSet] = (), clip_radius: float = 1.0
) -> Domain:
    contour = build_boundary_contour(sector, combs, clip_radius)
    return Domain(contour, 0.5 * clip_radius * sector.direction)


# ---------------------------------------------------------------------------
# serialization


def _c2j(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _j2c(v: Sequence[float]) -> complex:
    return complex(v[0], v[1])


def contour_to_dict(contour: Contour) -> dict:
    pieces = []
    for p in contour.pieces:
        if isinstance(p, Segment):
            pieces.append({"type": "segment", "start": _c2j(p.start), "end": _c2j(p.end)})
        else:
            pieces.append(
                {
                    "type": "arc",
                    "center": _c2j(p.center),
                    "radius": p.radius,
                    "theta0": p.theta0,
                    "theta1": p.theta1,
                }
            )
    return {
        "pieces": pieces,
        "total_length": contour.total_length,
        "orientation": contour.orientation,
    }


def contour_from_dict(data: dict) -> Contour:
    pieces: list[Piece] = []
    for p in data["pieces"]:
        if p["type"] == "segment":
            pieces.append(Segment(_j2c(p["start"]), _j2c(p["end"])))
        elif p["type"] == "arc":
            pieces.append(Arc(_j2c(p["center"]), p["radius"], p["theta0"], p["theta1"]))
        else:
            raise GeometryError(f"unknown piece type {p['type']!r}")
    return Contour(tuple(pieces))


def comb_to_dict(comb: CombSet) -> dict:
    return {
        "alpha": comb.alpha,
        "a": list(comb.a),
        "delta": list(comb.delta),
        "placement": {
            "direction": _c2j(comb.placement.direction),
            "sign": comb.placement.sign,
            "ray_angle": comb.placement.ray_angle,
        },
    }


def comb_from_dict(data: dict) -> CombSet:
    pl = data["placement"]
    return CombSet(
        alpha=data["alpha"],
        a=tuple(data["a"]),
        delta=tuple(data["delta"]),
        placement=CombPlacement(_j2c(pl["direction"]), pl["sign"], pl["ray_angle"]),
    )


def contour_to_json(contour: Contour) -> str:
    return json.dumps(contour_to_dict(contour), sort_keys=True)


def contour_from_json(text: str) -> Contour:
    return contour_from_dict(json.loads(text))


def contour_vertices_csv(contour: Contour, arc_step: float = 0.05) -> str:
    """CSV dump of polyline vertices (re, im columns) for external plotting."""
    lines = ["re,im"]
    for z in contour.vertices(arc_step):
        lines.append("%.17g,%.17g" % (float(z.real), float(z.imag)))
    return "\n".join(lines) + "\n"
