"""Resolvent-norm probes and growth-law diagnostics.

Norm estimation has three routes: exact weighted SVD of the materialized
resolvent, power iteration on R R* for matrix-free use, and a fixed-budget
randomized probe for cheap scans.  On top of these sit least-squares fits of
log ||R|| along rays against the two growth laws used elsewhere (exponential
of a power of 1/r, and a pure power), an empirical unboundedness trend test
on sector grids, and the scalar/operator inequalities for power-bounded
operators near w = 0.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .geometry import Sector
from .operators import Operator, OperatorError, materialize_resolvent, weighted_operator_norm

PROBE_SEED = 7


class ProbeError(ValueError):
    """Norm estimation or model fitting failed."""


class PowerIterationError(ProbeError):
    """Carries the last iterate of a non-convergent power iteration."""

    def __init__(self, msg: str, last_estimate: float, iterations: int):
        super().__init__(msg)
        self.last_estimate = last_estimate
        self.iterations = iterations


class GrowthFitError(ProbeError):
    """Carries both candidate fits when neither form matches the data."""

    def __init__(self, msg: str, exp_power_fit: "GrowthModel", power_fit: "GrowthModel"):
        super().__init__(msg)
        self.exp_power_fit = exp_power_fit
        self.power_fit = power_fit


@dataclass(frozen=True)
class ResolventSample:
    z: complex
    norm_estimate: float
    method: str  # denseSVD | powerIteration | randomizedProbe
    probes: int
    rel_err: float = 0.0

    def __post_init__(self):
        if not self.norm_estimate > 0:
            raise ProbeError(f"norm estimate must be positive, got {self.norm_estimate}")


@dataclass(frozen=True)
class GrowthModel:
    """Fitted law for ||R|| along a ray.

    expPower: log ||R(r)|| ~ log C + c / r^p   (houses C0, c0, pi/(2 beta))
    power:    log ||R(r)|| ~ log K - N log r
    """

    form: str
    C: float
    ray_angle: float
    fit_residual: float
    c: float = 0.0
    p: float = 0.0
    N: float = 0.0
    radii: tuple = field(default=(), repr=False)
    log_norms: tuple = field(default=(), repr=False)

    def predict_log(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.form == "expPower":
            return math.log(self.C) + self.c * r ** (-self.p)
        return math.log(self.C) - self.N * np.log(r)


def _power_iteration(op: Operator, z: complex, tol: float, seed: int,
                     max_rounds: int) -> tuple[float, int]:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    v /= op.norm_vec(v)
    sigma = 0.0
    cap = 20
    it = 0
    for _ in range(max_rounds):
        while it < cap:
            u = op.resolvent(z, v)
            s = op.norm_vec(u)
            v = op.resolvent_adjoint(z, u)
            nv = op.norm_vec(v)
            v /= nv
            it += 1
            # s -> sigma_max(R); require settled estimate and the minimum count
            if it >= 20 and abs(s - sigma) <= tol * max(s, 1e-300):
                return s, it
            sigma = s
        cap *= 2
    raise PowerIterationError(
        f"power iteration did not converge after {it} iterations "
        f"(relative tolerance {tol}); last iterate {sigma:.6e}",
        last_estimate=sigma, iterations=it,
    )


def _randomized_probe(op: Operator, z: complex, seed: int,
                      starts: int = 4, iters: int = 16) -> tuple[float, int]:
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(starts):
        v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        v /= op.norm_vec(v)
        for _ in range(iters):
            u = op.resolvent(z, v)
            best = max(best, op.norm_vec(u))
            v = op.resolvent_adjoint(z, u)
            v /= op.norm_vec(v)
    return best, starts * iters


def estimate_resolvent_norm(op: Operator, z: complex, method: str = "auto",
                            tol: float = 0.05, seed: int = PROBE_SEED,
                            max_rounds: int = 7) -> ResolventSample:
    """|| (zI - T)^{-1} || in the operator's weighted norm.

    ``denseSVD`` is exact (largest singular value of the materialized
    resolvent); ``powerIteration`` iterates on R R* until the estimate moves
    by less than ``tol`` relatively, doubling its iteration cap as needed;
    ``randomizedProbe`` spends a fixed budget of seeded random starts.
    """
    z = complex(z)
    if method == "auto":
        method = "denseSVD" if op.kind == "dense" or op.dim <= 96 else "powerIteration"
    if method == "denseSVD":
        if op.kind == "unitaryDiagonal":
            # diagonal resolvent: the SVD is available in closed form
            gap = np.min(np.abs(z - np.asarray(op.poles)))
            op._pole_check(z)
            return ResolventSample(z, 1.0 / gap, "denseSVD", probes=op.dim)
        rz = op.resolvent(z, np.eye(op.dim, dtype=complex))
        return ResolventSample(z, weighted_operator_norm(rz, op.weight), "denseSVD",
                               probes=op.dim)
    if method == "powerIteration":
        s, it = _power_iteration(op, z, tol, seed, max_rounds)
        return ResolventSample(z, s, "powerIteration", probes=it, rel_err=tol)
    if method == "randomizedProbe":
        s, n = _randomized_probe(op, z, seed)
        return ResolventSample(z, s, "randomizedProbe", probes=n, rel_err=tol)
    raise ProbeError(f"unknown norm estimation method {method!r}")


# ---------------------------------------------------------------------------
# growth-law fitting


def _fit_power(radii: np.ndarray, log_obs: np.ndarray) -> tuple[float, float, np.ndarray]:
    a = np.column_stack([np.ones_like(radii), -np.log(radii)])
    coef, *_ = np.linalg.lstsq(a, log_obs, rcond=None)
    return float(coef[0]), float(coef[1]), a @ coef


def _fit_exp_power_at(p: float, radii: np.ndarray, log_obs: np.ndarray):
    a = np.column_stack([np.ones_like(radii), radii ** (-p)])
    coef, *_ = np.linalg.lstsq(a, log_obs, rcond=None)
    pred = a @ coef
    sse = float(np.sum((pred - log_obs) ** 2))
    return sse, float(coef[0]), float(coef[1]), pred


def _fit_exp_power(radii: np.ndarray, log_obs: np.ndarray):
    # coarse scan over the exponent, then golden-section refinement
    grid = np.geomspace(0.2, 4.0, 33)
    sses = [_fit_exp_power_at(p, radii, log_obs)[0] for p in grid]
    j = int(np.argmin(sses))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, len(grid) - 1)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc = _fit_exp_power_at(c, radii, log_obs)[0]
    fd = _fit_exp_power_at(d, radii, log_obs)[0]
    for _ in range(48):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = _fit_exp_power_at(c, radii, log_obs)[0]
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = _fit_exp_power_at(d, radii, log_obs)[0]
    p = (a + b) / 2
    _, logc, cc, pred = _fit_exp_power_at(p, radii, log_obs)
    return p, logc, cc, pred


def _log_deviation(pred: np.ndarray, obs: np.ndarray) -> float:
    return float(np.max(np.abs(pred - obs) / np.maximum(1.0, np.abs(obs))))


def fit_growth_model(op: Operator, ray_angle: float, direction: complex,
                     radii, form: str, norm_method: str = "auto") -> GrowthModel:
    """Least-squares fit of log ||R|| on the ray z = r * direction * e^{i angle}.

    ``form`` picks the law; if the best fit deviates from the data by more
    than 0.5 in relative log terms the fit is rejected with both candidate
    models attached, so the caller can see which law the data actually obeys.
    """
    radii = np.asarray(sorted(set(float(r) for r in radii), reverse=True))
    if len(radii) < 8:
        raise ProbeError(f"need at least 8 distinct radii, got {len(radii)}")
    if np.any(radii <= 0):
        raise ProbeError("radii must be positive")
    zeta = complex(direction)
    zeta /= abs(zeta)
    phase = zeta * complex(math.cos(ray_angle), math.sin(ray_angle))
    log_obs = np.array([
        math.log(estimate_resolvent_norm(op, r * phase, method=norm_method).norm_estimate)
        for r in radii
    ])

    logk, nn, pred_pow = _fit_power(radii, log_obs)
    pp, logc, cc, pred_exp = _fit_exp_power(radii, log_obs)
    model_pow = GrowthModel("power", C=math.exp(logk), ray_angle=ray_angle,
                            fit_residual=_log_deviation(pred_pow, log_obs), N=nn,
                            radii=tuple(radii), log_norms=tuple(log_obs))
    model_exp = GrowthModel("expPower", C=math.exp(logc), ray_angle=ray_angle,
                            fit_residual=_log_deviation(pred_exp, log_obs),
                            c=cc, p=pp, radii=tuple(radii), log_norms=tuple(log_obs))
    if form == "power":
        chosen = model_pow
    elif form == "expPower":
        chosen = model_exp
    else:
        raise ProbeError(f"unknown growth form {form!r}")
    if chosen.fit_residual > 0.5:
        raise GrowthFitError(
            f"model mismatch: {form} fit deviates by {chosen.fit_residual:.3f} "
            f"(> 0.5) in relative log terms on ray angle {ray_angle:.4f}",
            exp_power_fit=model_exp, power_fit=model_pow,
        )
    return chosen


def check_unboundedness_hypothesis(op: Operator, sector: Sector, p: float,
                                   c_list, sample_grid, n_shells: int = 6,
                                   norm_method: str = "auto") -> list[dict]:
    """Empirical trend test for sup exp(-c/|z|^p) ||R(z)|| = infinity.

    For each c the grid maxima of the damped norm are collected in geometric
    shells by |z|; a positive slope of log(max) against log(1/r) as the inner
    radius shrinks flags the pair (c, p) as empirically unbounded.  A trend
    on a finite grid proves nothing; the verdicts are flags only.
    """
    pts = np.asarray(sample_grid, dtype=complex)
    for w in pts:
        if not sector.contains(w):
            raise ProbeError(f"sample point {w!r} lies outside the sector")
    norms = np.array([
        estimate_resolvent_norm(op, w, method=norm_method).norm_estimate for w in pts
    ])
    radii = np.abs(pts)
    edges = np.geomspace(radii.min() * (1 - 1e-12), radii.max() * (1 + 1e-12), n_shells + 1)
    out = []
    for c in c_list:
        damped = np.exp(-c * radii ** (-p)) * norms
        shell_r, shell_max = [], []
        for k in range(n_shells):
            mask = (radii >= edges[k]) & (radii < edges[k + 1])
            if not np.any(mask):
                continue
            shell_r.append(math.sqrt(edges[k] * edges[k + 1]))
            shell_max.append(float(damped[mask].max()))
        shell_r = np.asarray(shell_r)
        # underflowed shells would put -inf into the fit; floor keeps the
        # slope finite and strongly negative, which is the honest verdict
        shell_max = np.maximum(np.asarray(shell_max), 1e-300)
        slope = float(np.polyfit(np.log(1.0 / shell_r), np.log(shell_max), 1)[0])
        out.append({
            "c": float(c),
            "p": float(p),
            "max": float(damped.max()),
            "shell_radii": shell_r.tolist(),
            "shell_max": shell_max.tolist(),
            "slope": slope,
            "unbounded": bool(slope > 0.1),
        })
    return out


def power_bounded_checks(op: Operator, w_grid, K0: float | None = None) -> dict:
    """Scalar and operator bounds near w = 0 for power-bounded T.

    Checks (|w+1| - 1) - |w|^2/3 >= 0 on the grid, and
    ||(wI - (T - I))^{-1}|| <= 3 K0 / |w|^2 via the substitution z = w + 1.
    """
    if op.kind != "unitaryDiagonal":
        raise OperatorError(
            f"power-bounded checks require a power-bounded kind, got {op.kind!r}"
        )
    if K0 is None:
        K0 = 1.0  # unitary diagonal: sup ||T^n|| = 1
    pts = np.asarray(w_grid, dtype=complex)
    for w in pts:
        if not (w.real > 0 and abs(w) < 1):
            raise ProbeError(f"grid point {w!r} outside {{Re w > 0, |w| < 1}}")
    scalar = (np.abs(pts + 1) - 1) - np.abs(pts) ** 2 / 3
    ratios = np.empty(len(pts))
    for i, w in enumerate(pts):
        nrm = estimate_resolvent_norm(op, w + 1, method="denseSVD").norm_estimate
        ratios[i] = nrm * abs(w) ** 2 / (3 * K0)
    i_s = int(np.argmin(scalar))
    i_r = int(np.argmax(ratios))
    return {
        "K0": float(K0),
        "points": len(pts),
        "scalar_min": float(scalar[i_s]),
        "scalar_argmin": complex(pts[i_s]),
        "ratio_max": float(ratios[i_r]),
        "ratio_argmax": complex(pts[i_r]),
        "scalar_ok": bool(scalar[i_s] >= -1e-12),
        "operator_ok": bool(ratios[i_r] <= 1 + 1e-9),
    }


def halton_half_disk(n: int, seed: int = PROBE_SEED) -> np.ndarray:
    """n quasi-random points in the open half-disk {Re w > 0, |w| < 1}."""
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    pts = np.empty(0, dtype=complex)
    while len(pts) < n:
        u = sampler.random(n)
        r = np.sqrt(u[:, 0])
        th = math.pi * (u[:, 1] - 0.5)
        w = r * np.exp(1j * th)
        w = w[(w.real > 0) & (np.abs(w) < 1)]
        pts = np.concatenate([pts, w])
    return pts[:n]


# ---------------------------------------------------------------------------
# dumps


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    buf.write("z_re,z_im,norm,method,probes\n")
    for s in samples:
        buf.write(f"{s.z.real:.17g},{s.z.imag:.17g},{s.norm_estimate:.17g},"
                  f"{s.method},{s.probes}\n")
    return buf.getvalue()


def growth_model_to_dict(model: GrowthModel) -> dict:
    d = {
        "form": model.form,
        "C": model.C,
        "rayAngle": model.ray_angle,
        "fitResidual": model.fit_residual,
        "radii": list(model.radii),
        "logNorms": list(model.log_norms),
    }
    if model.form == "expPower":
        d["c"] = model.c
        d["p"] = model.p
    else:
        d["N"] = model.N
    return d


def growth_model_to_json(model: GrowthModel) -> str:
    return json.dumps(growth_model_to_dict(model), sort_keys=True, indent=2)
