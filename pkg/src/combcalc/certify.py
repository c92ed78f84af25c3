"""Subspace extraction and end-to-end non-comparability certification.

The chain being certified: densified weighted contour integrals A_k lie in
the double commutant of T, so N_k = ker A_k and M_k = clos(A_k H) are
hyperinvariant; if additionally A_1 A_2 = A_2 A_1 = 0 while A_k^2 != 0, the
four subspaces pairwise fail to include one another and the hyperinvariant
lattice carries no total order.  Every identity used along that chain is
rechecked numerically (commutation, power identities, contour deformation,
product formula, annihilation) and recorded with margins in a Certificate
whose verdict is re-derivable from the stored margins alone.
"""

from __future__ import annotations

import cmath
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import (
    LOG_HUGE,
    CalculusError,
    QuadOptions,
    UnboundedIntegrandError,
    WeightFunction,
    _probe_boundedness,
    _scaled,
    integrate_pieces,
    operator_contour_integral,
    quadrature_self_test,
    split_pieces_at_radius,
    truncation_bound,
)
from .combs import CombBudget, build_comb_set, validate_comb_set
from .geometry import (
    BoundaryAmbiguousError,
    CombPlacement,
    Contour,
    Domain,
    GeometryError,
    Sector,
    build_boundary_contour,
    point_in_domain,
    sector_domain,
)
from .operators import Operator, weighted_operator_norm
from .probe import estimate_resolvent_norm

DENSIFY_CAP = 512
ZERO_FLOOR = 1e-9  # sigma_max below this declares the operator numerically zero
CONTAIN_SINE = 0.1
DISTINCT_SINE = 0.5
ORTHO_TOL = 1e-10

VERDICT_CERTIFIED = "CERTIFIED_NONCOMPARABLE"
VERDICT_INCONCLUSIVE = "INCONCLUSIVE_AK_ZERO"
VERDICT_FAILED = "FAILED"

# residual floors a pipeline run must satisfy (relative where noted)
POWER_IDENTITY_FLOOR = 1e-3
DEFORMATION_FLOOR = 1e-2
ANNIHILATION_FLOOR = 1e-4
COMMUTATION_FLOOR_FACTOR = 50.0


class CertifyError(ValueError):
    """Precondition or consistency failure in the certification layer."""


# ---------------------------------------------------------------------------
# integral specifications


def _one(z: complex) -> complex:
    return 1.0


@dataclass
class OperatorIntegral:
    """Bundle describing A = (2 pi i)^{-1} \\oint g(z) h(z) R(z) dz.

    ``domain`` is the region the contour bounds; it is only needed by checks
    that reason about regions (annihilation disjointness, kernel membership).
    ``dense`` caches the densified matrix; the bundle is treated as immutable
    once that cache is filled.
    """

    weight: WeightFunction
    contour: Contour
    gfun: Callable[[complex], complex] | None = None
    domain: Domain | None = None
    options: QuadOptions = field(default_factory=QuadOptions)
    label: str = ""
    dense: np.ndarray | None = None
    dense_for: tuple[str, int] | None = None

    def multiplier(self) -> Callable[[complex], complex]:
        return self.gfun if self.gfun is not None else _one


def integrate_operator_vector(op: Operator, spec: OperatorIntegral,
                              x: np.ndarray) -> np.ndarray:
    """A x by adaptive quadrature along the spec's contour."""
    res = operator_contour_integral(op, spec.contour, spec.weight, x,
                                    gfuns=(spec.multiplier(),),
                                    options=spec.options)
    return res.value[0]


def densify_operator(op: Operator, spec: OperatorIntegral) -> np.ndarray:
    """Materialize A (columns A e_j) through one multi-column quadrature.

    The resolvent solves are linear, so sweeping the identity block through
    the same adaptive panels yields every column at once; the error control
    runs on the weighted Frobenius norm, which dominates each column's error.
    """
    if op.dim > DENSIFY_CAP:
        raise CertifyError(
            f"densify dimension cap: dim {op.dim} exceeds {DENSIFY_CAP}")
    if spec.dense is not None:
        if spec.dense_for != (op.kind, op.dim):
            raise CertifyError(
                f"spec already densified against {spec.dense_for}, "
                f"not ({op.kind!r}, {op.dim})")
        return spec.dense
    opts = spec.options
    g = spec.multiplier()
    weight = spec.weight
    pieces = spec.contour.pieces
    if spec.contour.orientation < 0:
        raise CertifyError("contour must be positively oriented")
    kept, dropped = split_pieces_at_radius(pieces, opts.truncation_radius)
    if not kept:
        raise CertifyError("truncation radius swallowed the whole contour")
    eye = np.eye(op.dim, dtype=complex)
    block_norm = max(op.norm_vec(eye), 1e-300)

    def log_integrand(z: complex) -> float:
        lm = float(weight.log_modulus(z))
        ln_g = math.log(max(abs(complex(g(z))), 1e-300))
        if lm + ln_g < -LOG_HUGE:
            return -math.inf
        ry = op.resolvent(z, eye)
        return lm + ln_g + math.log(max(op.norm_vec(ry), 1e-300))

    _probe_boundedness(log_integrand, kept, opts.probe_points)
    if dropped:
        tb = truncation_bound(log_integrand, dropped, opts.bound_probes)
        if tb > opts.truncation_tol * block_norm:
            raise CalculusError(
                f"truncated tail bound {tb:.3e} exceeds tolerance "
                f"{opts.truncation_tol * block_norm:.3e}")

    def f(z: complex) -> np.ndarray:
        return (complex(g(z)) * complex(weight(z))) * op.resolvent(z, eye)

    raw = integrate_pieces(f, kept, op.norm_vec,
                           _scaled(opts, 2 * math.pi * block_norm))
    dense = raw.value / (2j * math.pi)
    spec.dense = dense
    spec.dense_for = (op.kind, op.dim)
    return dense


# ---------------------------------------------------------------------------
# lemma-level residuals


def power_identity_residual(op: Operator, spec: OperatorIntegral, n: int,
                            x: np.ndarray) -> float:
    """|| T^n (A x) - B_n x || / ||x|| with B_n the integral carrying z^n g.

    Both integrals share one quadrature sweep (and hence one resolvent solve
    per node), so n = 0 returns exactly zero by construction.
    """
    if n < 0:
        raise CertifyError("power must be nonnegative")
    if n > 8:
        raise CertifyError(f"power identity limited to n <= 8, got n={n}")
    g = spec.multiplier()
    res = operator_contour_integral(
        op, spec.contour, spec.weight, x,
        gfuns=(g, lambda z: z ** n * g(z)), options=spec.options)
    ax, bnx = res.value
    lhs = ax
    for _ in range(n):
        lhs = op.apply(lhs)
    xnorm = max(op.norm_vec(x), 1e-300)
    return op.norm_vec(lhs - bnx) / xnorm


def _contour_sample_points(contour: Contour, per_piece: int = 17) -> list[complex]:
    pts = []
    for p in contour.pieces:
        for t in np.linspace(0.0, 1.0, per_piece):
            pts.append(complex(p.point(t)))
    return pts


def _contour_outer_radius(contour: Contour) -> float:
    r = 0.0
    for p in contour.pieces:
        r = max(r, abs(p.start), abs(p.end))
    return r


def _check_containment(inner: Contour, outer: Contour, r_skip: float) -> None:
    """Every sampled inner-contour point (off the origin) must lie strictly
    inside the outer contour."""
    for z in _contour_sample_points(inner):
        if abs(z) <= r_skip:
            continue
        try:
            inside = point_in_domain(outer, z)
        except BoundaryAmbiguousError:
            inside = False
        if not inside:
            raise CertifyError(
                f"containment violated: inner contour point {z:.6g} is not "
                "strictly inside the outer contour")


def _between_probes(inner: Contour, outer: Contour, r_skip: float,
                    n_random: int = 160, seed: int = 13) -> list[complex]:
    """Sample the region between the contours: random rejection plus radial
    sweeps (the sweeps catch thin angular slivers the box sampling misses)."""
    rng = np.random.default_rng(seed)
    radius = _contour_outer_radius(outer)
    pts: list[complex] = []

    def keep(z: complex) -> None:
        if abs(z) <= r_skip:
            return
        try:
            if point_in_domain(outer, z) and not point_in_domain(inner, z):
                pts.append(z)
        except BoundaryAmbiguousError:
            pass

    for _ in range(8 * n_random):
        if len(pts) >= n_random:
            break
        z = complex(rng.uniform(-radius, radius), rng.uniform(-radius, radius))
        keep(z)
    for theta in np.linspace(-math.pi, math.pi, 48, endpoint=False):
        for r in np.geomspace(max(r_skip * 1.05, 1e-12), radius, 16):
            keep(r * cmath.exp(1j * theta))
    return pts


def deformation_residual(op: Operator, weight: WeightFunction,
                         gfun: Callable[[complex], complex] | None,
                         inner: Contour, outer: Contour, x: np.ndarray,
                         options: QuadOptions | None = None,
                         outer_options: QuadOptions | None = None) -> float:
    """|| (A_inner - A_outer) x || / ||x|| after verifying the deformation
    hypotheses: the inner region (minus the origin) sits inside the outer one
    and |g h| ||R x|| stays bounded on probes of the region in between.

    ``outer_options`` lets the outer contour run untruncated (radius 0) when
    its legs sit where the weight decays all the way to the vertex."""
    opts = options or QuadOptions()
    g = gfun if gfun is not None else _one
    r_skip = max(opts.truncation_radius, 1e-9)
    _check_containment(inner, outer, r_skip)
    xnorm = max(op.norm_vec(x), 1e-300)
    for z in _between_probes(inner, outer, r_skip):
        lv = float(weight.log_modulus(z)) \
            + math.log(max(abs(complex(g(z))), 1e-300)) \
            + math.log(max(op.norm_vec(op.resolvent(z, x)), 1e-300))
        if lv > LOG_HUGE:
            raise UnboundedIntegrandError(
                f"boundedness probe fails between the contours at z={z:.6g} "
                f"(log envelope {lv:.1f})")
    inner_spec = OperatorIntegral(weight, inner, gfun, options=opts)
    outer_spec = OperatorIntegral(weight, outer, gfun,
                                  options=outer_options or opts)
    ax_in = integrate_operator_vector(op, inner_spec, x)
    ax_out = integrate_operator_vector(op, outer_spec, x)
    return op.norm_vec(ax_in - ax_out) / xnorm


def product_formula_residual(op: Operator, weight: WeightFunction,
                             g1: Callable[[complex], complex] | None,
                             g2: Callable[[complex], complex] | None,
                             inner: Contour, outer: Contour,
                             options: QuadOptions | None = None,
                             outer_options: QuadOptions | None = None) -> float:
    """max_k || A_{g1} A_{g2} - P ||, || A_{g2} A_{g1} - P || over max(1, ||P||)
    with P the one-contour integral carrying g1 g2 h^2.

    The two factors integrate over the nested pair (outer for g1, inner for
    g2), matching the geometry under which the product collapses to P; the
    deformation preconditions between the contours are re-verified first.
    """
    opts = options or QuadOptions()
    f1 = g1 if g1 is not None else _one
    f2 = g2 if g2 is not None else _one
    r_skip = max(opts.truncation_radius, 1e-9)
    _check_containment(inner, outer, r_skip)
    probe = np.ones(op.dim, dtype=complex)
    probe /= max(op.norm_vec(probe), 1e-300)
    for z in _between_probes(inner, outer, r_skip):
        lv = float(weight.log_modulus(z)) \
            + math.log(max(abs(complex(f1(z))), 1e-300)) \
            + math.log(max(op.norm_vec(op.resolvent(z, probe)), 1e-300))
        if lv > LOG_HUGE:
            raise UnboundedIntegrandError(
                f"boundedness probe fails between the contours at z={z:.6g} "
                f"(log envelope {lv:.1f})")

    def squared(z: complex) -> complex:
        return complex(f1(z)) * complex(f2(z)) * complex(weight(z))

    a1 = densify_operator(op, OperatorIntegral(weight, outer, f1,
                                               options=outer_options or opts))
    a2 = densify_operator(op, OperatorIntegral(weight, inner, f2, options=opts))
    pm = densify_operator(op, OperatorIntegral(weight, inner, squared, options=opts))
    w = op.weight
    p_norm = weighted_operator_norm(pm, w)
    num = max(weighted_operator_norm(a1 @ a2 - pm, w),
              weighted_operator_norm(a2 @ a1 - pm, w))
    return num / max(1.0, p_norm)


def _domain_interior_samples(domain: Domain, n: int, seed: int,
                             r_skip: float) -> list[complex]:
    rng = np.random.default_rng(seed)
    radius = _contour_outer_radius(domain.boundary)
    pts = [complex(domain.representative)]
    for _ in range(40 * n):
        if len(pts) >= n:
            break
        z = complex(rng.uniform(-radius, radius), rng.uniform(-radius, radius))
        if abs(z) <= r_skip:
            continue
        try:
            if domain.contains(z):
                pts.append(z)
        except BoundaryAmbiguousError:
            continue
    return pts


def annihilation_residual(op: Operator, spec1: OperatorIntegral,
                          spec2: OperatorIntegral, n_probe: int = 200,
                          seed: int = 17) -> float:
    """max(||A1 A2||, ||A2 A1||) / max(1, ||A1|| ||A2||) after checking the
    two integration domains are disjoint on interior probe grids."""
    if spec1.domain is None or spec2.domain is None:
        raise CertifyError("annihilation check needs domains on both specs")
    r_skip = max(spec1.options.truncation_radius,
                 spec2.options.truncation_radius, 1e-9)
    for a, b, tag in ((spec1.domain, spec2.domain, "first"),
                      (spec2.domain, spec1.domain, "second")):
        for z in _domain_interior_samples(a, n_probe, seed, r_skip):
            try:
                overlap = b.contains(z)
            except BoundaryAmbiguousError:
                continue
            if overlap:
                raise CertifyError(
                    f"integration domains overlap at z={z:.6g} "
                    f"({tag} domain probe)")
    a1 = densify_operator(op, spec1)
    a2 = densify_operator(op, spec2)
    w = op.weight
    n1, n2 = weighted_operator_norm(a1, w), weighted_operator_norm(a2, w)
    num = max(weighted_operator_norm(a1 @ a2, w),
              weighted_operator_norm(a2 @ a1, w))
    return num / max(1.0, n1 * n2)


# ---------------------------------------------------------------------------
# subspace extraction and the non-comparability test


@dataclass(frozen=True)
class SubspacePair:
    """Numerical kernel and closed range of a densified operator.

    Bases are orthonormal in the ambient weighted inner product; rank plus
    nullity equals the ambient dimension at the chosen threshold.
    """

    range_basis: np.ndarray
    kernel_basis: np.ndarray
    sigma: tuple[float, ...]
    rank_threshold: float
    numerically_zero: bool
    weight: np.ndarray

    def __post_init__(self):
        dim = self.weight.shape[0]
        if self.range_basis.shape[0] != dim or self.kernel_basis.shape[0] != dim:
            raise CertifyError("basis rows must match the ambient dimension")
        if self.rank + self.kernel_dim != dim:
            raise CertifyError("rank-nullity violated by extracted bases")
        for b in (self.range_basis, self.kernel_basis):
            if b.shape[1] == 0:
                continue
            gram = (self.weight[:, None] * b).conj().T @ b
            dev = float(np.max(np.abs(gram - np.eye(b.shape[1]))))
            if dev > ORTHO_TOL:
                raise CertifyError(
                    f"extracted basis not orthonormal (deviation {dev:.2e})")

    @property
    def ambient_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def rank(self) -> int:
        return int(self.range_basis.shape[1])

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_basis.shape[1])


def extract_subspaces(a: np.ndarray, weight: np.ndarray,
                      rank_threshold: float = 1e-6) -> SubspacePair:
    """SVD-based numerical range/kernel of ``a`` on the weighted space.

    Singular values below rank_threshold * sigma_max count as zero; when
    sigma_max itself falls below the absolute floor 1e-9 the operator is
    tagged numerically zero (empty range, full kernel).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise CertifyError(f"need a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise CertifyError("matrix has non-finite entries")
    if not (0.0 < rank_threshold < 1.0):
        raise CertifyError("rank threshold must lie in (0, 1)")
    w = np.asarray(weight, dtype=float)
    sw = np.sqrt(w)
    # unitary change of variables onto plain l2: B = W^{1/2} A W^{-1/2}
    b = (sw[:, None] * a) / sw[None, :]
    u, s, vh = np.linalg.svd(b)
    smax = float(s[0]) if s.size else 0.0
    if smax < ZERO_FLOOR:
        rank = 0
        zero = True
    else:
        rank = int(np.count_nonzero(s >= rank_threshold * smax))
        zero = False
    range_basis = u[:, :rank] / sw[:, None]
    kernel_basis = vh.conj().T[:, rank:] / sw[:, None]
    return SubspacePair(range_basis, kernel_basis, tuple(float(v) for v in s),
                        float(rank_threshold), zero, w)


def containment_sines(basis_a: np.ndarray, basis_b: np.ndarray,
                      weight: np.ndarray) -> np.ndarray:
    """Principal-angle sines of span(basis_a) measured against span(basis_b).

    All sines near 0 certifies span(a) inside span(b); a sine near 1 exhibits
    a direction of span(a) nearly orthogonal to all of span(b).
    """
    p, q = basis_a.shape[1], basis_b.shape[1]
    if p == 0:
        return np.zeros(0)
    if q == 0:
        return np.ones(p)
    sw = np.sqrt(np.asarray(weight, dtype=float))[:, None]
    m = (sw * basis_b).conj().T @ (sw * basis_a)
    cos = np.linalg.svd(m, compute_uv=False)
    if cos.shape[0] < p:
        cos = np.concatenate([cos, np.zeros(p - cos.shape[0])])
    cos = np.clip(cos[:p], 0.0, 1.0)
    return np.sqrt(1.0 - cos ** 2)


def _max_sine(sines: np.ndarray) -> float:
    return float(np.max(sines)) if sines.size else 0.0


def classify_margins(margins: dict) -> tuple[str, str]:
    """Verdict implied by stored margins; the single source the check and the
    certificate re-derivation both call."""
    floor = margins["floor"]
    squares = margins["squareNorms"]
    if min(squares) <= floor:
        return (VERDICT_INCONCLUSIVE,
                f"||A_k^2|| = {min(squares):.3e} <= floor {floor:.1e} for some k")
    products = margins["productNorms"]
    if max(products) > floor:
        return (VERDICT_FAILED,
                f"cross products fail to annihilate: max norm {max(products):.3e} "
                f"> floor {floor:.1e}")
    for name, v in margins["containSines"].items():
        if v >= DISTINCT_SINE:
            return VERDICT_FAILED, f"containment {name} violated (max sine {v:.3g})"
        if v >= CONTAIN_SINE:
            return (VERDICT_FAILED,
                    f"ambiguous geometry: {name} sine {v:.3g} falls in "
                    f"[{CONTAIN_SINE}, {DISTINCT_SINE}]")
    for name, v in margins["distinctSines"].items():
        if v <= CONTAIN_SINE:
            return VERDICT_FAILED, f"non-containment {name} violated (max sine {v:.3g})"
        if v <= DISTINCT_SINE:
            return (VERDICT_FAILED,
                    f"ambiguous geometry: {name} sine {v:.3g} falls in "
                    f"[{CONTAIN_SINE}, {DISTINCT_SINE}]")
    return (VERDICT_CERTIFIED,
            "containment and distinctness margins all clear their thresholds")


def non_comparability_check(pair1: SubspacePair, pair2: SubspacePair,
                            products: Sequence[float],
                            floor: float = ZERO_FLOOR) -> tuple[str, str, dict]:
    """Numerical form of the lattice argument.

    ``products`` carries (||A1 A2||, ||A2 A1||, ||A1^2||, ||A2^2||).  Requires
    nonzero squares and annihilating cross products, the containments
    M2 in N1 and M1 in N2 (max sine < 0.1), and the four non-containments
    among ranges and kernels (max sine > 0.5); sines falling in the dead zone
    [0.1, 0.5] fail as ambiguous geometry rather than certifying either way.
    """
    if pair1.ambient_dim != pair2.ambient_dim:
        raise CertifyError(
            f"ambient dimension mismatch: {pair1.ambient_dim} vs {pair2.ambient_dim}")
    p12, p21, sq1, sq2 = (float(v) for v in products)
    w = pair1.weight
    margins = {
        "floor": float(floor),
        "squareNorms": [sq1, sq2],
        "productNorms": [p12, p21],
        "containSines": {
            "range2_in_kernel1": _max_sine(
                containment_sines(pair2.range_basis, pair1.kernel_basis, w)),
            "range1_in_kernel2": _max_sine(
                containment_sines(pair1.range_basis, pair2.kernel_basis, w)),
        },
        "distinctSines": {
            "range1_vs_range2": _max_sine(
                containment_sines(pair1.range_basis, pair2.range_basis, w)),
            "range2_vs_range1": _max_sine(
                containment_sines(pair2.range_basis, pair1.range_basis, w)),
            "kernel1_vs_kernel2": _max_sine(
                containment_sines(pair1.kernel_basis, pair2.kernel_basis, w)),
            "kernel2_vs_kernel1": _max_sine(
                containment_sines(pair2.kernel_basis, pair1.kernel_basis, w)),
        },
    }
    verdict, reason = classify_margins(margins)
    return verdict, reason, margins


def kernel_membership_test(op: Operator, spec: OperatorIntegral, x: np.ndarray,
                           interior_grid: Sequence[complex],
                           boundary_grid: Sequence[complex],
                           kernel_tol: float = 1e-6) -> dict:
    """Interior versus boundary suprema of |g h| ||R x||, with the kernel
    consistency flag: ||A x|| small forces the interior supremum to be
    dominated by (1.1x) the boundary supremum."""
    g = spec.multiplier()

    def envelope(z: complex) -> float:
        z = complex(z)
        if z == 0:
            raise CertifyError("grid point at the origin")
        lm = float(spec.weight.log_modulus(z)) \
            + math.log(max(abs(complex(g(z))), 1e-300))
        return math.exp(lm) * op.norm_vec(op.resolvent(z, x))

    if spec.domain is not None:
        for z in interior_grid:
            try:
                ok = spec.domain.contains(complex(z))
            except BoundaryAmbiguousError:
                ok = False
            if not ok:
                raise CertifyError(
                    f"interior grid point {complex(z):.6g} lies outside the domain")
    s_int = max((envelope(z) for z in interior_grid), default=0.0)
    s_bd = max((envelope(z) for z in boundary_grid), default=0.0)
    ax_norm = op.norm_vec(integrate_operator_vector(op, spec, x))
    in_kernel = bool(ax_norm <= kernel_tol)
    return {
        "axNorm": float(ax_norm),
        "sInterior": float(s_int),
        "sBoundary": float(s_bd),
        "kernelTol": float(kernel_tol),
        "inKernel": in_kernel,
        "consistent": bool((not in_kernel) or s_int <= 1.1 * s_bd),
    }


# ---------------------------------------------------------------------------
# the end-to-end pipeline


@dataclass
class Certificate:
    operator: dict
    parameters: dict
    stages: list
    combs: list
    norms: dict
    residuals: dict
    floors: dict
    subspaces: dict
    margins: dict | None
    verdict: str
    reason: str

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "parameters": self.parameters,
            "stages": self.stages,
            "combs": self.combs,
            "norms": self.norms,
            "residuals": self.residuals,
            "floors": self.floors,
            "subspaces": self.subspaces,
            "margins": self.margins,
            "verdict": self.verdict,
            "reason": self.reason,
        }


def certificate_to_json(cert: Certificate) -> str:
    return json.dumps(cert.to_dict(), sort_keys=True, indent=2)


def verdict_from_certificate(data: dict) -> str:
    """Recompute the verdict from a certificate's stored margins alone."""
    for st in data["stages"]:
        if st["status"] != "ok":
            return VERDICT_FAILED
    residuals, floors = data["residuals"], data["floors"]
    for key, bound in floors.items():
        if key not in residuals or residuals[key] > bound:
            return VERDICT_FAILED
    margins = data.get("margins")
    if not margins:
        return VERDICT_FAILED
    return classify_margins(margins)[0]


def certificate_summary_csv(cert: Certificate) -> str:
    lines = ["section,key,value"]
    lines.append(f"verdict,verdict,{cert.verdict}")
    for section, table in (("norm", cert.norms), ("residual", cert.residuals),
                           ("floor", cert.floors), ("subspace", cert.subspaces)):
        for key in sorted(table):
            lines.append(f"{section},{key},{float(table[key]):.17g}")
    return "\n".join(lines) + "\n"


def _wrap_angle(t: float) -> float:
    return (t + math.pi) % (2 * math.pi) - math.pi


def _angle_gap(t1: float, t2: float) -> float:
    return abs(_wrap_angle(t1 - t2))


class _StageFailed(Exception):
    pass


_STAGE_NAMES = ("preconditions", "rayBounds", "combs", "contours", "integrals",
                "residuals", "powers", "subspaces", "nonComparability")


def default_comb_tilt(sector1: Sector, sector2: Sector) -> float:
    """Comb tilt that fits between the four boundary rays.

    0.45 of the tightest ray gap keeps neighbouring combs from touching;
    pi/12 caps the tilt so enlarged deformation contours stay inside the
    half-plane where the weights decay.
    """
    angles = sorted(_wrap_angle(s.axis_angle + sign * s.half_angle)
                    for s in (sector1, sector2) for sign in (-1, +1))
    gaps = [_angle_gap(angles[i], angles[(i + 1) % len(angles)])
            for i in range(len(angles))]
    positive = [g for g in gaps if g > 1e-9]
    tightest = min(positive) if positive else math.pi / 3
    return min(math.pi / 12, 0.45 * tightest)


def run_theorem_pipeline(op: Operator, sector1: Sector, sector2: Sector,
                         beta: float, C0: float, c0: float, n_max: int = 4,
                         tol: float = 1e-6, alpha: float | None = None,
                         r_min: float = 1e-3, clip_radius: float = 1.0,
                         c1_multiplier: float = 2.0,
                         rank_threshold: float = 1e-6,
                         truncation_tol: float = 5e-2,
                         norm_method: str = "auto") -> Certificate:
    """Full certification run: ray bounds, combs, contours, integrals, every
    identity residual against its floor, powers, subspaces, and the lattice
    check.  Any stage error marks that stage FAILED in the certificate and
    the remaining stages as skipped; nothing is skipped silently."""
    sectors = (sector1, sector2)
    beta_k = [s.half_angle for s in sectors]
    p = math.pi / (2 * beta)
    stages: list[dict] = []
    combs_out: list[dict] = []
    norms: dict = {}
    residuals: dict = {}
    floors: dict = {}
    subspaces: dict = {}
    margins: dict | None = None
    verdict = VERDICT_FAILED
    reason = ""

    state: dict = {}

    def run_stage(name: str, fn) -> None:
        try:
            detail = fn()
        except Exception as exc:  # recorded, then the pipeline stops
            stages.append({"name": name, "status": "failed", "detail": str(exc)})
            raise _StageFailed(f"stage {name}: {exc}") from exc
        stages.append({"name": name, "status": "ok", "detail": detail})

    # ---- stage bodies ------------------------------------------------------

    def stage_preconditions() -> str:
        if not (0.0 < beta <= math.pi / 2):
            raise CertifyError("beta must lie in (0, pi/2]")
        if beta <= max(beta_k):
            raise CertifyError(
                "Theorem precondition violated: beta must exceed "
                f"max(beta_1, beta_2) (beta={beta:.6g}, max={max(beta_k):.6g})")
        axis_gap = _angle_gap(sector1.axis_angle, sector2.axis_angle)
        if axis_gap < beta_k[0] + beta_k[1] - 1e-12:
            raise CertifyError(
                "Theorem precondition violated: sector interiors overlap "
                f"(axis gap {axis_gap:.6g} < beta_1 + beta_2 = "
                f"{beta_k[0] + beta_k[1]:.6g})")
        state["c_k"] = [c0 / math.cos((math.pi / 2) * (bk / beta)) for bk in beta_k]
        return (f"p={p:.6g}, c_k={state['c_k'][0]:.6g}/{state['c_k'][1]:.6g}, "
                f"axis gap {axis_gap:.6g}")

    def _ray_angles() -> list[tuple[int, int, float]]:
        out = []
        for k, s in enumerate(sectors):
            for sign in (-1, +1):
                out.append((k, sign,
                            _wrap_angle(s.axis_angle + sign * s.half_angle)))
        return out

    def stage_ray_bounds() -> str:
        budget = state["budget"]
        worst = -math.inf
        worst_at = ""
        for k, sign, angle in _ray_angles():
            ray = cmath.exp(1j * angle)
            for r in budget.schedule():
                est = estimate_resolvent_norm(op, r * ray, method=norm_method)
                gap = math.log(est.norm_estimate) - math.log(C0) - budget.log_phi(r)
                if gap > worst:
                    worst = gap
                    worst_at = f"sector {k + 1} sign {sign:+d} r={r:.3g}"
                if gap > 1e-12:
                    raise CertifyError(
                        f"resolvent ray bound violated on sector {k + 1} "
                        f"sign {sign:+d} at r={r:.6g}: ||R|| exceeds C0 phi")
        return f"worst log margin {worst:.3e} at {worst_at}"

    def stage_combs() -> str:
        budget = state["budget"]
        ray_list = _ray_angles()
        built: dict[tuple[int, int], object] = {}
        shared: dict[tuple[int, int], tuple[int, int]] = {}
        for i, (k, sign, angle) in enumerate(ray_list):
            twin = None
            for k2, sign2, angle2 in ray_list[:i]:
                if k2 != k and _angle_gap(angle, angle2) < 1e-9:
                    twin = (k2, sign2)
                    break
            placement = CombPlacement(sectors[k].direction, sign,
                                      sectors[k].half_angle)
            if twin is not None:
                base = built[twin]
                built[(k, sign)] = dataclasses.replace(base, placement=placement)
                shared[(k, sign)] = twin
            else:
                built[(k, sign)] = build_comb_set(op, placement, budget)
        for (k, sign), comb in built.items():
            val = validate_comb_set(op, comb, budget, dense_factor=2.0)
            combs_out.append({
                "sector": k + 1,
                "sign": sign,
                "rayAngle": _wrap_angle(sectors[k].axis_angle + sign * sectors[k].half_angle),
                "schedule": list(comb.a),
                "delta": list(comb.delta),
                "shared": list(shared[(k, sign)]) if (k, sign) in shared else None,
                "validationRatio": val["ratio"],
            })
            if val["ratio"] > 1.05:
                raise CertifyError(
                    f"comb validation ratio {val['ratio']:.4f} exceeds 1.05 "
                    f"on sector {k + 1} sign {sign:+d}")
        state["combs"] = built
        n_shared = len(shared)
        return f"{len(built)} combs ({n_shared} shared), alpha={budget.alpha:.6g}"

    def stage_contours() -> str:
        built = state["combs"]
        contours = []
        domains = []
        worst = 0.0
        for k, s in enumerate(sectors):
            pair = [built[(k, -1)], built[(k, +1)]]
            contour = build_boundary_contour(s, pair, clip_radius)
            rep = 0.5 * clip_radius * s.direction
            errs = quadrature_self_test(contour, points=(rep,))
            worst = max(worst, max(errs.values()))
            if max(errs.values()) > 1e-8:
                raise CertifyError(
                    f"contour self-test failed on sector {k + 1}: {errs}")
            contours.append(contour)
            domains.append(Domain(contour, rep))
        state["contours"] = contours
        state["domains"] = domains
        return f"self-test worst residual {worst:.3e}"

    def stage_integrals() -> str:
        built = state["combs"]
        specs = []
        dense = []
        for k, s in enumerate(sectors):
            trunc = min(built[(k, -1)].inner_radius, built[(k, +1)].inner_radius)
            opts = QuadOptions(tol=tol, truncation_radius=trunc,
                               truncation_tol=truncation_tol)
            weight = WeightFunction(state["c_k"][k], p, s.direction)
            spec = OperatorIntegral(weight, state["contours"][k],
                                    domain=state["domains"][k], options=opts,
                                    label=f"A_{k + 1}")
            specs.append(spec)
            dense.append(densify_operator(op, spec))
            norms[f"A_{k + 1}"] = weighted_operator_norm(dense[k], op.weight)
        state["specs"] = specs
        state["dense"] = dense
        return f"||A_1||={norms['A_1']:.6g}, ||A_2||={norms['A_2']:.6g}"

    def stage_residuals() -> str:
        state["enlarged"] = _enlarged_contours()
        specs, dense = state["specs"], state["dense"]
        tmat = op.matrix()
        x = np.ones(op.dim, dtype=complex)
        x /= op.norm_vec(x)
        violations = []
        for k in range(2):
            key = f"commutation_{k + 1}"
            residuals[key] = weighted_operator_norm(
                tmat @ dense[k] - dense[k] @ tmat, op.weight)
            floors[key] = COMMUTATION_FLOOR_FACTOR * tol * norms[f"A_{k + 1}"]
            for n in range(1, min(3, n_max) + 1):
                pkey = f"powerIdentity_{k + 1}_n{n}"
                residuals[pkey] = power_identity_residual(op, specs[k], n, x)
                floors[pkey] = POWER_IDENTITY_FLOOR
            dkey = f"deformation_{k + 1}"
            enlarged = state["enlarged"][k]
            outer_opts = QuadOptions(tol=tol, truncation_radius=0.0,
                                     truncation_tol=truncation_tol)
            residuals[dkey] = deformation_residual(
                op, specs[k].weight, None, specs[k].contour, enlarged, x,
                options=specs[k].options, outer_options=outer_opts)
            floors[dkey] = DEFORMATION_FLOOR
            prkey = f"product_{k + 1}"
            residuals[prkey] = product_formula_residual(
                op, specs[k].weight, None, None, specs[k].contour, enlarged,
                options=specs[k].options, outer_options=outer_opts)
        residuals["annihilation"] = annihilation_residual(op, specs[0], specs[1])
        floors["annihilation"] = ANNIHILATION_FLOOR
        for key, bound in floors.items():
            if residuals[key] > bound:
                violations.append(f"{key} ({residuals[key]:.3e} > {bound:.3e})")
        if violations:
            raise CertifyError("residual floors violated: " + ", ".join(violations))
        return (f"{len(residuals)} residuals recorded, worst floored margin "
                + f"{max(residuals[k] / floors[k] for k in floors):.3e}")

    def _enlarged_contours() -> list[Contour]:
        # enlarged plain-sector contours for the deformation checks: wide
        # enough to cover the comb bumps (rectangle tilt stays below alpha),
        # narrow enough to keep the weight decaying on the new legs
        # (p * t < pi/2) whenever the sector leaves angular room
        out = []
        alpha_used = state["budget"].alpha
        floor = alpha_used + 1e-4
        for k, s in enumerate(sectors):
            dbeta = 1.05 * alpha_used + 0.01
            slack = math.pi / (2 * p) - s.half_angle
            if slack > floor:
                dbeta = min(dbeta, max(floor, 0.9 * slack))
            half = s.half_angle + max(dbeta, floor)
            if half >= math.pi - 1e-3:
                raise CertifyError(
                    f"no room to enlarge sector {k + 1} past its comb bumps")
            big = Sector(s.direction, half, max(s.radius, clip_radius * 1.1))
            out.append(build_boundary_contour(big, (), clip_radius * 1.1))
        return out

    def stage_powers() -> str:
        dense = state["dense"]
        for k in range(2):
            acc = np.eye(op.dim, dtype=complex)
            for n in range(1, n_max + 1):
                acc = acc @ dense[k]
                norms[f"A_{k + 1}_pow_{n}"] = weighted_operator_norm(acc, op.weight)
        return f"powers up to n={n_max} recorded"

    def stage_subspaces() -> str:
        dense = state["dense"]
        pairs = [extract_subspaces(d, op.weight, rank_threshold) for d in dense]
        state["pairs"] = pairs
        for k, pr in enumerate(pairs):
            subspaces[f"rangeDim_{k + 1}"] = pr.rank
            subspaces[f"kernelDim_{k + 1}"] = pr.kernel_dim
            subspaces[f"sigmaMax_{k + 1}"] = pr.sigma[0] if pr.sigma else 0.0
        subspaces["rankThreshold"] = rank_threshold
        return (f"dims range/kernel: {pairs[0].rank}/{pairs[0].kernel_dim} and "
                f"{pairs[1].rank}/{pairs[1].kernel_dim}")

    def stage_check() -> str:
        dense = state["dense"]
        w = op.weight
        products = (weighted_operator_norm(dense[0] @ dense[1], w),
                    weighted_operator_norm(dense[1] @ dense[0], w),
                    weighted_operator_norm(dense[0] @ dense[0], w),
                    weighted_operator_norm(dense[1] @ dense[1], w))
        norms["A1_A2"], norms["A2_A1"] = products[0], products[1]
        norms["A1_sq"], norms["A2_sq"] = products[2], products[3]
        nonlocal margins, verdict, reason
        verdict, reason, margins = non_comparability_check(
            state["pairs"][0], state["pairs"][1], products)
        return f"verdict {verdict}: {reason}"

    # ---- drive the stages --------------------------------------------------

    try:
        run_stage("preconditions", stage_preconditions)
        a_used = alpha if alpha is not None else default_comb_tilt(sector1, sector2)
        state["budget"] = CombBudget(C0=C0, C1=c1_multiplier * C0, alpha=a_used,
                                     c0=c0, p=p, phi_form="expPower",
                                     r_min=r_min, norm_method=norm_method)
        run_stage("rayBounds", stage_ray_bounds)
        run_stage("combs", stage_combs)
        run_stage("contours", stage_contours)
        run_stage("integrals", stage_integrals)
        run_stage("residuals", stage_residuals)
        run_stage("powers", stage_powers)
        run_stage("subspaces", stage_subspaces)
        run_stage("nonComparability", stage_check)
    except _StageFailed as fail:
        done = {st["name"] for st in stages}
        for name in _STAGE_NAMES:
            if name not in done:
                stages.append({"name": name, "status": "skipped",
                               "detail": "upstream failure"})
        verdict, reason = VERDICT_FAILED, str(fail)

    parameters = {
        "beta": float(beta),
        "beta1": float(beta_k[0]),
        "beta2": float(beta_k[1]),
        "p": float(p),
        "C0": float(C0),
        "C1": float(c1_multiplier * C0),
        "c0": float(c0),
        "c1": float(state["c_k"][0]) if "c_k" in state else None,
        "c2": float(state["c_k"][1]) if "c_k" in state else None,
        "alpha": float(state["budget"].alpha) if "budget" in state else None,
        "tol": float(tol),
        "nMax": int(n_max),
        "rMin": float(r_min),
        "clipRadius": float(clip_radius),
        "rankThreshold": float(rank_threshold),
    }
    return Certificate(
        operator={"kind": op.kind, "dim": op.dim},
        parameters=parameters,
        stages=stages,
        combs=combs_out,
        norms={k: float(v) for k, v in norms.items()},
        residuals={k: float(v) for k, v in residuals.items()},
        floors={k: float(v) for k, v in floors.items()},
        subspaces={k: (float(v) if isinstance(v, float) else v)
                   for k, v in subspaces.items()},
        margins=margins,
        verdict=verdict,
        reason=reason,
    )
