import math

import numpy as np
import pytest

from combcalc.operators import (
    Operator,
    OperatorError,
    PoleError,
    apply_resolvent,
    apply_resolvent_continuous,
    catalog_kinds,
    dense_operator,
    dense_resolvent_norm,
    jordan_nilpotent,
    make_operator,
    materialize_resolvent,
    null_space_weighted,
    resolvent_defect,
    resolvent_identity_residual,
    unitary_diagonal,
    volterra_analytic,
    weighted_operator_norm,
    weighted_shift,
)


# ---------------------------------------------------------------------------
# catalog construction


def test_catalog_kinds_sorted():
    kinds = catalog_kinds()
    assert kinds == tuple(sorted(kinds))
    assert set(kinds) == {"dense", "jordanNilpotent", "unitaryDiagonal",
                          "volterraAnalytic", "weightedShift"}


def test_make_operator_unknown_kind():
    with pytest.raises(OperatorError, match="unknown operator kind"):
        make_operator("bogus")


def test_jordan_block_matrix():
    j = jordan_nilpotent(2)
    assert j.kind == "jordanNilpotent"
    assert j.poles == (0j,)
    assert np.array_equal(j.matrix(), np.array([[0, 1], [0, 0]], dtype=complex))
    # nilpotency order equals the dimension
    m = jordan_nilpotent(4).matrix()
    assert np.any(np.linalg.matrix_power(m, 3) != 0)
    assert not np.any(np.linalg.matrix_power(m, 4) != 0)


def test_volterra_applies_cumulative_integral():
    v = volterra_analytic(32)
    grid = v.params["grid"]
    # trapezoid rule is exact on constants: V 1 = t
    assert np.max(np.abs(v.apply(np.ones(32)) - grid)) < 1e-12
    # and near-exact on t: V t = t^2/2 + O(h^2)
    err = np.max(np.abs(v.apply(grid) - grid**2 / 2))
    assert err < 1e-3


def test_volterra_declared_spectrum():
    v = volterra_analytic(16)
    h = 1.0 / 15
    assert v.poles == (0j, complex(h / 2))


def test_volterra_needs_enough_points():
    with pytest.raises(OperatorError, match="at least 8"):
        volterra_analytic(4)


def test_weighted_shift_rejects_nonpositive_weights():
    with pytest.raises(OperatorError):
        weighted_shift(np.array([0.5, -0.1]))
    with pytest.raises(OperatorError):
        weighted_shift(np.array([0.5, 0.0]))


def test_weighted_shift_is_nilpotent(rng):
    w = rng.uniform(0.2, 1.0, size=5)
    op = make_operator("weightedShift", weights=w)
    m = op.matrix()
    assert np.allclose(np.linalg.matrix_power(m, 6), 0.0)
    x = rng.standard_normal(6)
    assert np.allclose(op.apply(x), m @ x)


def test_unitary_diagonal_spectrum_on_circle():
    u = unitary_diagonal(8)
    assert len(u.poles) == 8
    for p in u.poles:
        assert abs(abs(p) - 1.0) < 1e-12


def test_dense_operator_requires_square():
    with pytest.raises(OperatorError):
        dense_operator(np.ones((2, 3)))


# ---------------------------------------------------------------------------
# resolvent action


def test_resolvent_of_zero_operator():
    zero1 = dense_operator(np.zeros((1, 1)), poles=(0j,))
    y = apply_resolvent(zero1, 0.5, np.ones(1))
    assert np.allclose(y, [2.0])


def test_resolvent_jordan_two_by_hand():
    # (I - J)^-1 = I + J, so R(1)(0,1) = (1,1)
    y = apply_resolvent(jordan_nilpotent(2), 1.0, np.array([0.0, 1.0]))
    assert np.allclose(y, [1.0, 1.0])


def test_resolvent_rejects_spectral_points():
    j = jordan_nilpotent(3)
    with pytest.raises(PoleError, match="spectral point"):
        apply_resolvent(j, 0.0, np.ones(3))
    with pytest.raises(PoleError):
        apply_resolvent(j, 1e-14, np.ones(3))
    v = volterra_analytic(16)
    with pytest.raises(PoleError):
        apply_resolvent(v, 1.0 / 15 / 2, np.ones(16))


def test_resolvent_defect_small_everywhere(rng):
    ops = [jordan_nilpotent(6), volterra_analytic(32),
           weighted_shift(rng.uniform(0.2, 1.0, size=5)), unitary_diagonal(8)]
    pts = [0.5 * np.exp(1j * t) for t in (0.3, 1.2, 2.1, -0.9)]
    for op in ops:
        x = rng.standard_normal(op.dim)
        for z in pts:
            assert resolvent_defect(op, z, x) < 1e-10
            assert resolvent_identity_residual(op, z, 0.7j, x) < 1e-9


def test_neumann_series_bound(rng):
    # for ||T|| <= 1, ||R(z)x|| <= ||x|| / (|z| - 1) outside the unit disk
    for op in (jordan_nilpotent(6), unitary_diagonal(8)):
        x = rng.standard_normal(op.dim)
        for z in (1.5, 2.0 + 1.0j, -3.0):
            y = apply_resolvent(op, z, x)
            assert np.linalg.norm(y) <= np.linalg.norm(x) / (abs(z) - 1) + 1e-12


def test_materialize_resolvent_matches_apply(rng):
    op = volterra_analytic(24)
    z = -0.2 + 0.1j
    R = materialize_resolvent(op, z)
    x = rng.standard_normal(24)
    assert np.allclose(R @ x, apply_resolvent(op, z, x), atol=1e-12)


def test_materialized_jordan_resolvent_by_hand():
    R = materialize_resolvent(jordan_nilpotent(2), 1.0)
    assert np.allclose(R, np.array([[1, 1], [0, 1]], dtype=complex))


def test_adjoint_resolvent_is_conjugate_transpose(rng):
    op = volterra_analytic(16)
    z = 0.3 - 0.4j
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    # <R(z)x, y> == <x, R(z)* y> in the operator's own inner product
    lhs = op.inner(apply_resolvent(op, z, x), y)
    rhs = op.inner(x, op.resolvent_adjoint(z, y))
    assert abs(lhs - rhs) < 1e-12


# ---------------------------------------------------------------------------
# norms


def test_dense_resolvent_norm_jordan_two():
    # sigma_max of [[1,1],[0,1]] is the golden ratio
    val = dense_resolvent_norm(jordan_nilpotent(2), 1.0)
    assert abs(val - (1 + math.sqrt(5)) / 2) < 1e-12


def test_unitary_diagonal_resolvent_norm_exact():
    u = unitary_diagonal(8)
    for z in (0.5, 0.25 + 0.3j, 1.7):
        exact = 1.0 / min(abs(z - p) for p in u.poles)
        assert abs(dense_resolvent_norm(u, z) - exact) < 1e-10


def test_volterra_resolvent_blows_up_off_axis_asymmetrically():
    v = volterra_analytic(32)
    grow = dense_resolvent_norm(v, 0.05)
    decay = dense_resolvent_norm(v, -0.05)
    assert grow / decay > 1e2


def test_weighted_operator_norm_plain_weight():
    A = np.zeros((3, 3))
    A[0, 1] = 2.0
    assert abs(weighted_operator_norm(A, np.ones(3)) - 2.0) < 1e-12


def test_weighted_operator_norm_rescales(rng):
    # with weight w, the norm is sigma_max(W^1/2 A W^-1/2)
    A = rng.standard_normal((4, 4))
    w = rng.uniform(0.5, 2.0, size=4)
    sw = np.sqrt(w)
    expected = np.linalg.norm((sw[:, None] * A) / sw[None, :], ord=2)
    assert abs(weighted_operator_norm(A, w) - expected) < 1e-12


def test_volterra_weights_are_trapezoid():
    v = volterra_analytic(16)
    assert v.weight is not None
    assert abs(v.weight.sum() - 1.0) < 1e-12
    assert abs(v.weight[0] - v.weight[-1]) < 1e-15
    assert abs(v.weight[1] - 2 * v.weight[0]) < 1e-15


def test_null_space_weighted():
    A = np.zeros((3, 3))
    A[0, 1] = 1.0
    ns = null_space_weighted(A, np.ones(3))
    assert ns.shape == (3, 2)
    assert np.linalg.norm(A @ ns) < 1e-12


# ---------------------------------------------------------------------------
# continuous-kernel cross-check


def test_continuous_resolvent_matches_discrete_under_refinement():
    z = -0.15
    errs = []
    for m in (64, 256):
        grid = np.linspace(0.0, 1.0, m)
        x = np.sin(3 * grid) + 1.0
        yd = apply_resolvent(volterra_analytic(m), z, x)
        yc = apply_resolvent_continuous(z, x, grid)
        errs.append(np.max(np.abs(yd - yc)))
    assert errs[0] < 2e-3
    assert errs[1] < errs[0] / 8  # second-order scheme: 16x drop expected
