"""Adaptive construction of comb sets on which ||R|| obeys a relaxed bound.

Given a growth envelope phi and constants C0 < C1 such that the resolvent
satisfies ||R|| <= C0 phi(|z|) on a ray, the builder stacks rectangles
straddling that ray and, for each, bisects the largest half-height delta_n
such that every probe point w of the rectangle satisfies
||R(w)|| <= C1 phi(|w|).  Probing replaces the compactness argument of the
underlying lemma; a separate validation pass re-probes at higher density.
All envelope comparisons run in log space — phi overflows doubles long
before the schedule bottoms out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CombPlacement, CombSet, GeometryError, schedule_from_r_min
from .operators import Operator
from .probe import estimate_resolvent_norm

DELTA_FLOOR = 1e-9
CAP_SHAVE = 1e-9  # keep delta strictly below its cap so CombSet invariants hold
LOG_SLACK = 1e-12  # tolerate exact-equality cases (||R|| = C0 phi) up to roundoff


class CombBuildError(ValueError):
    """Ray precondition or bisection failure while building a comb."""


@dataclass(frozen=True)
class CombBudget:
    """Envelope and search parameters for comb construction.

    phi(r) = exp(c0 / r^p) for the expPower form, r^{-N} for the power form;
    C0 is the assumed ray bound constant, C1 > C0 the relaxed constant the
    comb must realize on full rectangles.
    """

    C0: float
    C1: float
    alpha: float
    c0: float = 1.0
    p: float = 1.0
    N: float = 1.0
    phi_form: str = "expPower"
    a_schedule: tuple[float, ...] = ()
    r_min: float = 1e-3
    probe_density: int = 25  # 5x5; 3x3 misses edge maxima between nodes
    max_bisections: int = 40
    norm_method: str = "auto"

    def __post_init__(self):
        if not (self.C1 > self.C0 > 0):
            raise CombBuildError(f"need C1 > C0 > 0, got C0={self.C0}, C1={self.C1}")
        if not (0.0 < self.alpha < math.pi / 2):
            raise CombBuildError("alpha must lie in (0, pi/2)")
        if self.probe_density < 9:
            raise CombBuildError("probe density must be at least 9 (3x3 grid)")
        if self.phi_form not in ("expPower", "power"):
            raise CombBuildError(f"unknown phi form {self.phi_form!r}")
        if self.max_bisections < 1:
            raise CombBuildError("need at least one bisection step")

    def log_phi(self, r: float) -> float:
        if self.phi_form == "expPower":
            return self.c0 * r ** (-self.p)
        return -self.N * math.log(r)

    def schedule(self) -> tuple[float, ...]:
        return self.a_schedule if self.a_schedule else schedule_from_r_min(self.r_min)

    def grid_shape(self, dense_factor: float = 1.0) -> tuple[int, int]:
        side = max(3, math.ceil(math.sqrt(self.probe_density)))
        n = max(3, math.ceil(side * dense_factor))
        return n, n


def _log_norm(op: Operator, z: complex, budget: CombBudget) -> float:
    s = estimate_resolvent_norm(op, z, method=budget.norm_method)
    return math.log(s.norm_estimate)


def _rect_probes(a_in: float, a_out: float, delta: float, nx: int, ny: int) -> np.ndarray:
    # tensor grid over [a_in, a_out] x [-delta, delta]: all edges plus center
    xs = np.linspace(a_in, a_out, nx)
    ys = np.linspace(-delta, delta, ny if ny % 2 == 1 else ny + 1)
    return (xs[:, None] + 1j * ys[None, :]).ravel()


def _rect_worst_gap(op: Operator, budget: CombBudget, ray: complex,
                    a_in: float, a_out: float, delta: float,
                    dense_factor: float = 1.0) -> tuple[float, complex, int]:
    """max over probes of log||R(w)|| - log(C1 phi(|w|)); <= 0 means admissible."""
    nx, ny = budget.grid_shape(dense_factor)
    log_c1 = math.log(budget.C1)
    worst = -math.inf
    worst_w = complex(a_out)
    pts = _rect_probes(a_in, a_out, delta, nx, ny)
    for base in pts:
        w = ray * base
        gap = _log_norm(op, w, budget) - log_c1 - budget.log_phi(abs(w))
        if gap > worst:
            worst, worst_w = gap, w
    return worst, worst_w, len(pts)


def build_comb_set(op: Operator, placement: CombPlacement, budget: CombBudget) -> CombSet:
    """Construct a comb on ``placement``'s ray admissible for C1·phi.

    The ray itself must already obey the stricter C0·phi bound (checked at
    the schedule abscissas and midpoints); each rectangle then takes the
    largest half-height, up to its geometric cap, whose probe grid stays
    under C1·phi.  Rectangles whose admissible height collapses below 1e-9
    abort the build — the envelope does not hold near that ray.
    """
    a = budget.schedule()
    if len(a) < 2:
        raise CombBuildError("schedule needs at least two abscissas")
    if abs(a[0] - 1.0) > 1e-12 or any(a[i + 1] >= a[i] for i in range(len(a) - 1)):
        raise CombBuildError(
            "schedule must start at 1 and decrease strictly")
    ray = placement.ray
    log_c0 = math.log(budget.C0)

    # (estgg) pre-check along the ray
    ray_radii = sorted(set(list(a) + [math.sqrt(a[i] * a[i + 1]) for i in range(len(a) - 1)]),
                       reverse=True)
    for r in ray_radii:
        if _log_norm(op, r * ray, budget) > log_c0 + budget.log_phi(r) + LOG_SLACK:
            raise CombBuildError(
                f"C0 bound violated at r={r:.6g}: ||R|| exceeds C0·phi on the ray"
            )

    sin_a = math.sin(budget.alpha)
    deltas: list[float] = []
    prev = math.inf
    for n in range(len(a) - 1):
        a_out, a_in = a[n], a[n + 1]
        cap = min(prev, a_in * sin_a) * (1.0 - CAP_SHAVE)
        gap, _, _ = _rect_worst_gap(op, budget, ray, a_in, a_out, cap)
        if gap <= LOG_SLACK:
            delta = cap
        else:
            lo, hi = DELTA_FLOOR, cap
            gap_lo, w_lo, _ = _rect_worst_gap(op, budget, ray, a_in, a_out, lo)
            if gap_lo > LOG_SLACK:
                raise CombBuildError(
                    f"rectangle collapsed at n={n + 1}: bound fails even at "
                    f"delta={DELTA_FLOOR:g} (worst probe {w_lo:.6g})"
                )
            for _ in range(budget.max_bisections):
                mid = math.sqrt(lo * hi)  # delta spans decades; bisect in log
                g_mid, _, _ = _rect_worst_gap(op, budget, ray, a_in, a_out, mid)
                if g_mid <= LOG_SLACK:
                    lo = mid
                else:
                    hi = mid
            delta = lo
        deltas.append(delta)
        prev = delta

    return CombSet(budget.alpha, tuple(a), tuple(deltas), placement)


def validate_comb_set(op: Operator, comb: CombSet, budget: CombBudget,
                      dense_factor: float = 4.0) -> dict:
    """Re-probe every rectangle at ``dense_factor`` times the build density.

    Returns the max over all probes of ||R(w)|| / (C1·phi(|w|)) together with
    the worst probe point; a ratio above 1 means the build density missed a
    violation and the comb should be rebuilt with more probes.
    """
    ray = comb.placement.ray
    worst = -math.inf
    worst_w = complex(comb.a[0])
    total = 0
    per_rect = []
    for n in range(comb.n_rect):
        gap, w, k = _rect_worst_gap(op, budget, ray, comb.a[n + 1], comb.a[n],
                                    comb.delta[n], dense_factor)
        per_rect.append(math.exp(gap))
        total += k
        if gap > worst:
            worst, worst_w = gap, w
    return {
        "ratio": math.exp(worst),
        "worst_probe": complex(worst_w),
        "probes": total,
        "dense_factor": float(dense_factor),
        "per_rectangle": per_rect,
    }


def rectangle_certificates(comb: CombSet, budget: CombBudget) -> list[dict]:
    """Per-rectangle build record: height, cap status, probe count."""
    sin_a = math.sin(budget.alpha)
    out = []
    prev = math.inf
    nx, ny = budget.grid_shape()
    for n in range(comb.n_rect):
        cap = min(prev, comb.a[n + 1] * sin_a) * (1.0 - CAP_SHAVE)
        out.append({
            "n": n + 1,
            "a_outer": comb.a[n],
            "a_inner": comb.a[n + 1],
            "delta": comb.delta[n],
            "at_cap": bool(abs(comb.delta[n] - cap) <= 1e-15 * cap),
            "probes": nx * (ny if ny % 2 == 1 else ny + 1),
        })
        prev = comb.delta[n]
    return out


def comb_report_json(comb: CombSet, budget: CombBudget,
                     validation: dict | None = None) -> str:
    doc = {
        "alpha": comb.alpha,
        "a": list(comb.a),
        "delta": list(comb.delta),
        "placement": {
            "direction": [comb.placement.direction.real, comb.placement.direction.imag],
            "sign": comb.placement.sign,
            "rayAngle": comb.placement.ray_angle,
        },
        "certificates": rectangle_certificates(comb, budget),
    }
    if validation is not None:
        doc["validation"] = {
            "ratio": validation["ratio"],
            "worstProbe": [validation["worst_probe"].real, validation["worst_probe"].imag],
            "probes": validation["probes"],
            "denseFactor": validation["dense_factor"],
            "perRectangle": list(validation["per_rectangle"]),
        }
    return json.dumps(doc, sort_keys=True, indent=2)
