import cmath
import math

import numpy as np
import pytest

from combcalc.calculus import (
    CalculusError,
    QuadOptions,
    TruncationError,
    UnboundedIntegrandError,
    WeightFunction,
    integrate_pieces,
    operator_contour_integral,
    quadrature_self_test,
    split_pieces_at_radius,
    translation_weight,
)
from combcalc.geometry import Sector, build_boundary_contour, circle_contour
from combcalc.operators import dense_operator, jordan_nilpotent, volterra_analytic


def sector_contour(half_angle=math.pi / 4, direction=1.0, clip=1.0):
    return build_boundary_contour(Sector(direction, half_angle, 2.0), (), clip)


# ---------------------------------------------------------------------------
# weight functions


def test_weight_real_axis_value():
    w = WeightFunction(1.0, 1.0, 1.0)
    assert abs(w(0.5) - math.exp(-2.0)) < 1e-15


def test_weight_ray_modulus():
    w = WeightFunction(1.0, 1.0, 1.0)
    z = 0.5 * cmath.exp(1j * math.pi / 3)
    assert abs(abs(w(z)) - math.exp(-1.0)) < 1e-12


def test_weight_boundary_ray_modulus():
    # with c = c0/cos(p*beta_k) the decay on the boundary ray is exp(-c0/r^p)
    beta, beta_k, c0 = math.pi / 2, math.pi / 3, 0.7
    p = math.pi / (2 * beta)
    w = WeightFunction(c0 / math.cos(p * beta_k), p, 1.0)
    for r in (0.1, 0.37, 2.0):
        z = r * cmath.exp(1j * beta_k)
        assert abs(abs(w(z)) - math.exp(-c0 / r**p)) < 1e-12


def test_weight_modulus_identity_random(rng):
    # |h(r zeta e^{it})| = exp(-c cos(pt)/r^p) away from the cut
    for c0, p, phase in ((1.0, 1.0, 0.0), (0.3, 1.7, 0.8), (2.5, 1.0, -1.2)):
        zeta = cmath.exp(1j * phase)
        w = WeightFunction(c0, p, zeta)
        r = rng.uniform(0.05, 3.0, size=2500)
        t = rng.uniform(-0.95 * math.pi, 0.95 * math.pi, size=2500)
        for ri, ti in zip(r, t):
            z = ri * zeta * cmath.exp(1j * ti)
            got = abs(w(z))
            want = math.exp(-c0 * math.cos(p * ti) / ri**p)
            assert abs(got - want) <= 1e-12 * max(1.0, want)


def test_weight_log_modulus_matches_modulus(rng):
    w = WeightFunction(0.8, 1.3, cmath.exp(0.4j))
    for _ in range(50):
        z = cmath.exp(0.4j) * rng.uniform(0.1, 2.0) * cmath.exp(1j * rng.uniform(-1.5, 1.5))
        assert abs(w.log_modulus(z) - math.log(abs(w(z)))) < 1e-10


def test_weight_cut_and_origin_errors():
    w = WeightFunction(1.0, 1.0, 1.0)
    with pytest.raises(CalculusError, match="branch cut"):
        w(-0.5)
    with pytest.raises(CalculusError, match="branch cut"):
        w(0.5 * cmath.exp(1j * (math.pi - 1e-12)))
    with pytest.raises(CalculusError, match="singularity"):
        w(0.0)


def test_weight_constructor_validation():
    with pytest.raises(CalculusError):
        WeightFunction(-0.1, 1.0, 1.0)
    with pytest.raises(CalculusError):
        WeightFunction(1.0, 0.0, 1.0)
    with pytest.raises(CalculusError):
        WeightFunction(1.0, 1.0, 2.0)  # non-unit direction


def test_translation_weight_parameters():
    w = translation_weight(0.5)
    assert (w.c, w.p, w.direction) == (0.5, 1.0, 1.0 + 0j)
    with pytest.raises(CalculusError):
        translation_weight(-0.1)


def test_weight_overflow_raises():
    w = WeightFunction(400.0, 1.0, 1.0)
    with pytest.raises(UnboundedIntegrandError):
        w(1e-3 * cmath.exp(2.8j))  # cos(2.8) < 0: exp(+3.8e5)


# ---------------------------------------------------------------------------
# quadrature engine


def test_self_test_circle_moments():
    rep = quadrature_self_test(circle_contour())
    assert max(rep[f"moment_{n}"] for n in range(3)) < 1e-12


def test_self_test_cauchy_points():
    rep = quadrature_self_test(circle_contour(), [0.3 + 0.1j, 2.0])
    assert rep["cauchy"] < 1e-10


def test_self_test_sector_contour():
    rep = quadrature_self_test(sector_contour(), [0.5, 2.0])
    assert max(rep.values()) < 1e-10


def test_integrate_pieces_residue():
    res = integrate_pieces(lambda z: np.array([1.0 / z]),
                           list(circle_contour().pieces))
    assert abs(res.value[0] - 2j * math.pi) < 1e-12
    assert abs(res.normalized[0] - 1.0) < 1e-12
    assert res.err_estimate < 1e-10
    assert res.n_evals > 0


def test_split_pieces_at_radius_preserves_length():
    contour = sector_contour()
    kept, dropped = split_pieces_at_radius(list(contour.pieces), 0.5)
    assert kept and dropped
    total = sum(p.length for p in kept) + sum(p.length for p in dropped)
    assert abs(total - contour.total_length) < 1e-12
    for p in dropped:
        assert max(abs(p.start), abs(p.end)) <= 0.5 + 1e-9
    for p in kept:
        assert max(abs(p.start), abs(p.end)) >= 0.5 - 1e-9


def test_split_nonpositive_radius_keeps_everything():
    contour = sector_contour()
    kept, dropped = split_pieces_at_radius(list(contour.pieces), 0.0)
    assert not dropped
    assert len(kept) == len(contour.pieces)


def test_split_tiny_radius_trims_ray_tips():
    contour = sector_contour(clip=1.0)
    kept, dropped = split_pieces_at_radius(list(contour.pieces), 1e-6)
    assert sum(p.length for p in dropped) < 3e-6
    assert abs(sum(p.length for p in kept)
               + sum(p.length for p in dropped) - contour.total_length) < 1e-12


def test_split_rejects_radius_cutting_an_arc():
    contour = sector_contour(clip=1.0)  # arc at radius exactly 1
    with pytest.raises(CalculusError, match="arc"):
        split_pieces_at_radius(list(contour.pieces), 1.0 + 1e-6)


# ---------------------------------------------------------------------------
# operator contour integrals


def test_zero_operator_integral_vanishes():
    zero1 = dense_operator(np.zeros((1, 1)), poles=(0j,))
    res = operator_contour_integral(
        zero1, sector_contour(), WeightFunction(1.0, 1.0, 1.0), np.ones(1),
        options=QuadOptions(tol=1e-8))
    assert np.abs(res.value).max() < 1e-8
    assert res.value.shape == (1, 1)


def test_nilpotent_kernel_collapse():
    # weight with an essential zero at the origin kills every T^k moment
    j6 = jordan_nilpotent(6)
    res = operator_contour_integral(
        j6, sector_contour(), WeightFunction(1.0, 1.0, 1.0), np.ones(6),
        options=QuadOptions(tol=1e-8))
    assert np.linalg.norm(res.value) < 1e-6


def test_translation_on_smooth_input():
    # exp(-c/z) calculus on the cumulative-integral operator acts as
    # translation by c; checked on a smooth input where dispersion is tiny
    m = 128
    v = volterra_analytic(m)
    grid = v.params["grid"]
    contour = build_boundary_contour(Sector(1.0, math.radians(89), 1.0), (), 1.0)
    x = np.sin(math.pi * grid) ** 2 * grid**2
    res = operator_contour_integral(
        v, contour, translation_weight(0.5), x,
        options=QuadOptions(tol=1e-6, truncation_radius=1.2e-3))
    target = np.where(grid > 0.5, np.interp(grid - 0.5, grid, x, left=0.0), 0.0)
    l2 = math.sqrt(float(v.weight @ np.abs(res.value[0] - target) ** 2))
    assert l2 < 5e-4  # measured 5.2e-5
    assert res.err_estimate < 1e-5
    assert res.truncation_bound < 1e-5


def test_multiplier_scales_integral():
    # g(z) = z on the resolvent of T reproduces T A + (weighted moment)
    j6 = jordan_nilpotent(6)
    contour = sector_contour()
    w = WeightFunction(1.0, 1.0, 1.0)
    x = np.arange(1.0, 7.0)
    res = operator_contour_integral(
        j6, contour, w, x, gfuns=(lambda z: 1.0, lambda z: z * 0 + 2.0),
        options=QuadOptions(tol=1e-8))
    assert res.value.shape == (2, 6)
    assert np.allclose(res.value[1], 2.0 * res.value[0], atol=1e-9)


def test_truncation_bound_too_coarse():
    j6 = jordan_nilpotent(6)
    with pytest.raises(TruncationError, match="truncated tail bound"):
        operator_contour_integral(
            j6, sector_contour(), WeightFunction(1e-4, 1.0, 1.0), np.ones(6),
            options=QuadOptions(tol=1e-9, truncation_radius=0.3,
                                truncation_tol=1e-12))


def test_unbounded_integrand_probe():
    # rotating the weight axis 90 degrees makes it grow along the lower ray
    j6 = jordan_nilpotent(6)
    with pytest.raises(UnboundedIntegrandError, match="integrand unbounded"):
        operator_contour_integral(
            j6, sector_contour(), WeightFunction(30.0, 1.0, 1j), np.ones(6),
            options=QuadOptions(tol=1e-6))


def test_tightening_tolerance_reduces_error_estimate():
    v = volterra_analytic(32)
    contour = sector_contour(half_angle=math.radians(80))
    w = translation_weight(0.3)
    x = np.sin(math.pi * v.params["grid"]) ** 2
    opts = [QuadOptions(tol=t, truncation_radius=5e-3) for t in (1e-4, 1e-7)]
    coarse = operator_contour_integral(v, contour, w, x, options=opts[0])
    fine = operator_contour_integral(v, contour, w, x, options=opts[1])
    assert fine.err_estimate < coarse.err_estimate / 2
    assert fine.n_evals > coarse.n_evals
    # and the two answers agree to the coarse tolerance
    assert np.linalg.norm(fine.value - coarse.value) < 1e-3
