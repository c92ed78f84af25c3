"""Weighted resolvent contour integrals.

The central object is the regularizing weight h(z) = exp(-c / (conj(zeta) z)^p)
attached to a sector with axis ``zeta``: its modulus decays superpolynomially
toward 0 inside the sector, which tames resolvent growth along the contour.
Integrals (2 pi i)^{-1} \oint g(z) h(z) R(z) x dz are evaluated by adaptive
composite Gauss-Legendre quadrature over the contour pieces, with an explicit,
separately-bounded truncation of the portion of the contour near the origin.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Arc, Contour, GeometryError, Piece, Segment
from .operators import Operator

LOG_HUGE = 700.0  # log of the overflow threshold for doubles, with headroom

# 5-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_X = np.array(
    [
        -0.9061798459386640,
        -0.5384693101056831,
        0.0,
        0.5384693101056831,
        0.9061798459386640,
    ]
)
_GL_W = np.array(
    [
        0.2369268850561891,
        0.4786286704993665,
        0.5688888888888889,
        0.4786286704993665,
        0.2369268850561891,
    ]
)


class CalculusError(ValueError):
    """Invalid weight, contour, or quadrature request."""


class QuadratureError(CalculusError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class UnboundedIntegrandError(CalculusError):
    """Probes found the integrand blowing up on the contour."""


class TruncationError(CalculusError):
    """Dropped-tail bound exceeds the truncation tolerance."""


# ---------------------------------------------------------------------------
# regularizing weight


@dataclass(frozen=True)
class WeightFunction:
    """h(z) = exp(-c / (conj(direction) z)^p), principal branch.

    ``direction`` is the unit axis of the sector the weight serves; rotating
    by conj(direction) maps that axis to the positive reals, where the
    principal power is smooth.  Points with arg(conj(direction) z) within
    1e-9 of +-pi sit on the branch cut and are rejected.
    """

    c: float
    p: float
    direction: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise CalculusError("weight strength c must be positive and finite")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise CalculusError("weight exponent p must be at least 1")
        d = complex(self.direction)
        if abs(abs(d) - 1.0) > 1e-9:
            raise CalculusError("weight direction must be a unit complex number")
        object.__setattr__(self, "direction", d / abs(d))

    def _rotated(self, z):
        w = np.asarray(z, dtype=complex) * self.direction.conjugate()
        if np.any(w == 0):
            raise CalculusError("weight evaluated at the essential singularity z = 0")
        if np.any(np.abs(np.angle(w)) > math.pi - 1e-9):
            raise CalculusError("weight evaluated on its branch cut")
        return w

    def log_value(self, z):
        """log h(z) = -c w^{-p} with w the rotated argument (complex log)."""
        w = self._rotated(z)
        return -self.c * np.exp(-self.p * np.log(w))

    def log_modulus(self, z):
        return np.real(self.log_value(z))

    def __call__(self, z):
        lv = self.log_value(z)
        if np.any(np.real(lv) > LOG_HUGE):
            raise UnboundedIntegrandError("weight overflows: |h| exceeds the double range")
        out = np.exp(lv)
        return out if np.ndim(z) else complex(out)


def translation_weight(shift: float) -> WeightFunction:
    """Weight exp(-shift/z) whose calculus image of the integration operator
    is translation by ``shift``."""
    return WeightFunction(c=shift, p=1.0, direction=1.0 + 0.0j)


# ---------------------------------------------------------------------------
# truncation of the contour near the origin


def split_pieces_at_radius(
    pieces: Sequence[Piece], r: float
) -> tuple[list[Piece], list[Piece]]:
    """Split contour pieces into (kept, dropped) at the circle |z| = r.

    Only segments with an endpoint inside the circle are cut; a piece whose
    interior dips inside while both endpoints stay outside is rejected, since
    splitting it would break the kept/dropped bookkeeping.
    """
    if r <= 0:
        return list(pieces), []
    kept: list[Piece] = []
    dropped: list[Piece] = []
    for p in pieces:
        s_in = abs(p.start) < r
        e_in = abs(p.end) < r
        if isinstance(p, Arc):
            if abs(abs(p.center) - p.radius) < r or s_in or e_in:
                raise CalculusError("truncation radius cuts an arc piece")
            kept.append(p)
            continue
        if not s_in and not e_in:
            # tolerate tangential grazing (roundoff from rotated vertices)
            if _segment_min_abs(p) < r * (1.0 - 1e-12):
                raise CalculusError("truncation radius cuts a segment interior")
            kept.append(p)
            continue
        if s_in and e_in:
            dropped.append(p)
            continue
        t = _segment_circle_crossing(p, r, inside_start=s_in)
        zc = p.start + t * (p.end - p.start)
        # a crossing at an endpoint (e.g. r hitting a contour vertex exactly)
        # would leave a degenerate half; keep only genuine pieces
        eps = 1e-14 * max(abs(p.start), abs(p.end), 1.0)
        first, second = (dropped, kept) if s_in else (kept, dropped)
        if abs(zc - p.start) > eps:
            first.append(Segment(p.start, zc))
        if abs(p.end - zc) > eps:
            second.append(Segment(zc, p.end))
    return kept, dropped


def _segment_min_abs(seg: Segment) -> float:
    d = seg.end - seg.start
    t = -((seg.start * d.conjugate()).real) / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(seg.start + t * d)


def _segment_circle_crossing(seg: Segment, r: float, inside_start: bool) -> float:
    a, d = seg.start, seg.end - seg.start
    # |a + t d|^2 = r^2
    qa = abs(d) ** 2
    qb = 2 * (a * d.conjugate()).real
    qc = abs(a) ** 2 - r * r
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        raise CalculusError("no circle crossing found on segment")
    roots = [(-qb - math.sqrt(disc)) / (2 * qa), (-qb + math.sqrt(disc)) / (2 * qa)]
    valid = [t for t in roots if -1e-12 <= t <= 1 + 1e-12]
    if not valid:
        raise CalculusError("no circle crossing inside segment range")
    # leaving the circle when the start is inside, entering when it is outside
    t = max(valid) if inside_start else min(valid)
    return min(1.0, max(0.0, t))


# ---------------------------------------------------------------------------
# adaptive quadrature core


@dataclass
class QuadOptions:
    tol: float = 1e-6
    max_depth: int = 42
    truncation_radius: float = 0.0
    truncation_tol: float = 5e-2
    bound_probes: int = 24
    probe_points: int = 48  # boundedness pre-probe per piece


@dataclass
class PieceReport:
    length: float
    value_norm: float
    err_estimate: float
    n_evals: int
    max_depth_hit: int


@dataclass
class IntegralResult:
    """Raw contour integral \oint f dz (no 2 pi i normalization)."""

    value: np.ndarray
    err_estimate: float
    n_evals: int
    truncation_bound: float
    pieces: list[PieceReport] = field(default_factory=list)

    @property
    def normalized(self) -> np.ndarray:
        return self.value / (2j * math.pi)


class _Kahan:
    """Compensated accumulator for complex arrays."""

    def __init__(self, shape):
        self.s = np.zeros(shape, dtype=complex)
        self.c = np.zeros(shape, dtype=complex)

    def add(self, x):
        y = x - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def _gl5(f, piece: Piece, t0: float, t1: float):
    """Gauss-Legendre 5 on the parameter window [t0, t1] of ``piece``."""
    mid = (t0 + t1) / 2
    half = (t1 - t0) / 2
    acc = None
    for xk, wk in zip(_GL_X, _GL_W):
        t = mid + half * xk
        z = complex(piece.point(t))
        dz = complex(piece.derivative(t))
        v = f(z) * (wk * half * dz)
        acc = v if acc is None else acc + v
    return acc


def _adapt_piece(f, piece, norm, tol, max_depth, kahan, diag):
    stack = [(0.0, 1.0, _gl5(f, piece, 0.0, 1.0), tol, 0)]
    err_total = 0.0
    while stack:
        t0, t1, whole, tol_here, depth = stack.pop()
        mid = 0.5 * (t0 + t1)
        left = _gl5(f, piece, t0, mid)
        right = _gl5(f, piece, mid, t1)
        diag["n_evals"] += 10
        err = norm(left + right - whole)
        if err <= tol_here or depth >= max_depth:
            if depth >= max_depth and err > tol_here:
                raise QuadratureError(
                    f"quadrature stalled at depth {depth} on a piece "
                    f"(local error {err:.3e} > {tol_here:.3e})"
                )
            kahan.add(left)
            kahan.add(right)
            err_total += err
            diag["max_depth_hit"] = max(diag["max_depth_hit"], depth)
        else:
            stack.append((t0, mid, left, tol_here / 2, depth + 1))
            stack.append((mid, t1, right, tol_here / 2, depth + 1))
    return err_total


def integrate_pieces(
    f: Callable[[complex], np.ndarray],
    pieces: Sequence[Piece],
    norm: Callable[[np.ndarray], float] | None = None,
    options: QuadOptions | None = None,
) -> IntegralResult:
    """Adaptive \oint f dz over ``pieces`` (no normalization, no truncation)."""
    opts = options or QuadOptions()
    if norm is None:
        norm = lambda v: float(np.max(np.abs(v)))
    if not pieces:
        raise CalculusError("no contour pieces to integrate over")
    total_len = sum(p.length for p in pieces)
    probe0 = f(complex(pieces[0].point(0.5)))
    kahan = _Kahan(np.shape(probe0))
    reports = []
    err_sum = 0.0
    n_evals = 0
    for p in pieces:
        diag = {"n_evals": 5, "max_depth_hit": 0}
        tol_piece = opts.tol * max(p.length / total_len, 1e-6)
        before = kahan.s.copy()
        err = _adapt_piece(f, p, norm, tol_piece, opts.max_depth, kahan, diag)
        reports.append(
            PieceReport(p.length, norm(kahan.s - before), err, diag["n_evals"],
                        diag["max_depth_hit"])
        )
        err_sum += err
        n_evals += diag["n_evals"]
    value = kahan.s
    if not np.all(np.isfinite(value)):
        raise UnboundedIntegrandError("integral accumulated non-finite values")
    return IntegralResult(value, err_sum, n_evals, 0.0, reports)


# ---------------------------------------------------------------------------
# operator-valued integrands


def _probe_boundedness(log_integrand, pieces, n_probe):
    """Error out when the integrand envelope exceeds the double range."""
    worst = -math.inf
    for p in pieces:
        ts = np.linspace(0.0, 1.0, n_probe)
        for t in ts:
            z = complex(p.point(t))
            if z == 0:
                continue
            lv = log_integrand(z)
            worst = max(worst, lv)
            if lv > LOG_HUGE:
                raise UnboundedIntegrandError(
                    f"integrand unbounded on contour: log envelope {lv:.1f} at z={z:.3e}"
                )
    return worst


def truncation_bound(
    log_integrand: Callable[[complex], float],
    dropped: Sequence[Piece],
    n_probe: int = 24,
    safety: float = 2.0,
) -> float:
    """Crude bound on |(2 pi i)^{-1} \int_dropped f dz|.

    Probes the integrand norm at geometrically spaced parameters on each
    dropped piece (dropped pieces end near the origin, where the weight
    decays monotonically, so a probe max is representative), then multiplies
    by piece length over 2 pi with a safety factor.
    """
    total = 0.0
    for p in dropped:
        # geometric spacing toward the endpoint closest to 0
        toward_end = abs(p.end) < abs(p.start)
        frac = np.concatenate(([0.0], np.geomspace(1e-9, 1.0, n_probe)))
        ts = 1.0 - frac if toward_end else frac
        best = -math.inf
        for t in ts:
            z = complex(p.point(t))
            if z == 0:
                continue
            best = max(best, log_integrand(z))
        if best > LOG_HUGE:
            raise UnboundedIntegrandError(
                "dropped tail has an unbounded envelope; truncation invalid"
            )
        total += math.exp(min(best, LOG_HUGE)) * p.length
    return safety * total / (2 * math.pi)


def operator_contour_integral(
    op: Operator,
    contour: Contour | Sequence[Piece],
    weight: WeightFunction,
    x: np.ndarray,
    gfuns: Sequence[Callable[[complex], complex]] = (lambda z: 1.0,),
    options: QuadOptions | None = None,
) -> IntegralResult:
    """(2 pi i)^{-1} \oint g_j(z) h(z) R(z) x dz for all g_j in one sweep.

    Returns an IntegralResult whose ``value`` has shape (len(gfuns), dim) and
    is already normalized by 2 pi i.  The portion of the contour inside
    ``options.truncation_radius`` is dropped; its contribution is bounded by
    probing and the bound is checked against ``options.truncation_tol``.
    """
    opts = options or QuadOptions()
    pieces = contour.pieces if isinstance(contour, Contour) else tuple(contour)
    if isinstance(contour, Contour) and contour.orientation < 0:
        raise CalculusError("contour must be positively oriented")
    x = np.asarray(x, dtype=complex)
    kept, dropped = split_pieces_at_radius(pieces, opts.truncation_radius)
    if not kept:
        raise CalculusError("truncation radius swallowed the whole contour")

    xnorm = max(op.norm_vec(x), 1e-300)

    def log_integrand(z: complex) -> float:
        lm = float(weight.log_modulus(z))
        ln_g = max(math.log(max(abs(complex(g(z))), 1e-300)) for g in gfuns)
        if lm + ln_g < -LOG_HUGE:
            return -math.inf
        ry = op.resolvent(z, x)
        return lm + ln_g + math.log(max(op.norm_vec(ry), 1e-300))

    _probe_boundedness(log_integrand, kept, opts.probe_points)
    tb = 0.0
    if dropped:
        # log_integrand includes ||R x||, so tb already scales with ||x||
        tb = truncation_bound(log_integrand, dropped, opts.bound_probes)
        if tb > opts.truncation_tol * xnorm:
            raise TruncationError(
                f"truncated tail bound {tb:.3e} exceeds tolerance "
                f"{opts.truncation_tol * xnorm:.3e}"
            )

    gs = list(gfuns)

    def f(z: complex) -> np.ndarray:
        hv = complex(weight(z))
        ry = op.resolvent(z, x)
        coeffs = np.array([complex(g(z)) * hv for g in gs])
        return coeffs[:, None] * ry[None, :]

    def norm(v: np.ndarray) -> float:
        return max(op.norm_vec(row) for row in np.atleast_2d(v))

    raw = integrate_pieces(f, kept, norm, _scaled(opts, 2 * math.pi * xnorm))
    return IntegralResult(raw.value / (2j * math.pi), raw.err_estimate / (2 * math.pi),
                          raw.n_evals, tb, raw.pieces)


def _scaled(opts: QuadOptions, factor: float) -> QuadOptions:
    out = QuadOptions(**vars(opts))
    out.tol = opts.tol * factor
    return out


# ---------------------------------------------------------------------------
# self-tests: exact moments and Cauchy integrals


def quadrature_self_test(contour: Contour, points: Sequence[complex] = ()) -> dict:
    """Exact checks on a closed contour: \oint z^n dz = 0 (n = 0, 1, 2) and
    \oint dz/(z - w) = 2 pi i * winding(w).  Returns max absolute errors."""
    from .geometry import winding_number

    opts = QuadOptions(tol=1e-13)
    errs = {}
    for n in (0, 1, 2):
        res = integrate_pieces(lambda z, n=n: np.array([z**n]), contour.pieces,
                               options=opts)
        errs[f"moment_{n}"] = float(abs(res.value[0]))
    worst = 0.0
    for w in points:
        res = integrate_pieces(lambda z, w=w: np.array([1.0 / (z - w)]),
                               contour.pieces, options=opts)
        expected = 2j * math.pi * winding_number(contour, w)
        worst = max(worst, float(abs(res.value[0] - expected)))
    if points:
        errs["cauchy"] = worst
    return errs
