import json
import math

import numpy as np
import pytest

from combcalc.geometry import Sector
from combcalc.operators import (
    dense_operator,
    jordan_nilpotent,
    unitary_diagonal,
    volterra_analytic,
    weighted_shift,
)
from combcalc.probe import (
    GrowthFitError,
    ProbeError,
    check_unboundedness_hypothesis,
    estimate_resolvent_norm,
    fit_growth_model,
    growth_model_to_dict,
    growth_model_to_json,
    halton_half_disk,
    power_bounded_checks,
    samples_to_csv,
)


def zero_operator():
    return dense_operator(np.zeros((1, 1)), poles=(0j,))


# ---------------------------------------------------------------------------
# norm estimation


def test_zero_operator_norm_is_reciprocal_radius():
    for z in (0.25, -0.5, 0.1 + 0.1j):
        s = estimate_resolvent_norm(zero_operator(), z)
        assert abs(s.norm_estimate - 1.0 / abs(z)) < 1e-12
        assert s.method == "denseSVD"


def test_jordan_two_norm_golden_ratio():
    golden = (1 + math.sqrt(5)) / 2
    dense = estimate_resolvent_norm(jordan_nilpotent(2), 1.0, method="denseSVD")
    assert abs(dense.norm_estimate - golden) < 1e-12
    probe = estimate_resolvent_norm(jordan_nilpotent(2), 1.0,
                                    method="powerIteration")
    assert abs(probe.norm_estimate - golden) < 0.05 * golden


def test_volterra_norm_asymmetry():
    # defining feature of the cumulative-integral operator: huge resolvent on
    # the positive axis, tame on the negative axis
    v = volterra_analytic(64)
    plus = estimate_resolvent_norm(v, 0.1).norm_estimate
    minus = estimate_resolvent_norm(v, -0.1).norm_estimate
    assert plus / minus > 100.0


def test_probe_never_exceeds_dense(rng):
    ops = [jordan_nilpotent(12), volterra_analytic(48), unitary_diagonal(16),
           weighted_shift(rng.uniform(0.2, 1.0, 7))]
    for op in ops:
        for _ in range(12):
            z = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8))
            if abs(z) < 0.05 or any(abs(z - p) < 0.05 for p in op.poles):
                continue
            dense = estimate_resolvent_norm(op, z, method="denseSVD")
            probe = estimate_resolvent_norm(op, z, method="powerIteration")
            ratio = probe.norm_estimate / dense.norm_estimate
            assert 0.9 <= ratio <= 1.0 + 1e-9


# ---------------------------------------------------------------------------
# growth-law fits


def test_volterra_growth_fit_exponential_law():
    # free fit on the growth axis lands near the continuous law exp(1/r)
    v = volterra_analytic(128)
    model = fit_growth_model(v, 0.0, 1.0, np.geomspace(0.5, 0.02, 16),
                             "expPower")
    assert model.form == "expPower"
    assert 0.9 < model.p < 1.1
    assert 0.8 < model.c < 1.6
    assert model.fit_residual < 0.5
    # frozen regression values for this exact window
    assert abs(model.c - 1.336435) < 1e-4
    assert abs(model.p - 0.945478) < 1e-4


def test_jordan_growth_fit_power_law():
    model = fit_growth_model(jordan_nilpotent(4), 0.0, 1.0,
                             np.geomspace(0.5, 1e-3, 24), "power")
    assert model.form == "power"
    assert 3.8 < model.N < 4.05  # pole order = nilpotency index
    assert model.fit_residual < 0.5


def test_zero_operator_fit_exact():
    model = fit_growth_model(zero_operator(), 0.3, 1.0,
                             np.geomspace(0.5, 1e-3, 24), "power")
    assert abs(model.N - 1.0) < 1e-10
    assert abs(model.C - 1.0) < 1e-10
    assert model.fit_residual < 1e-12


def test_wrong_law_rejected_with_alternatives():
    with pytest.raises(GrowthFitError, match="model mismatch") as exc:
        fit_growth_model(jordan_nilpotent(4), 0.0, 1.0,
                         np.geomspace(0.5, 1e-3, 24), "expPower")
    # the error carries both candidate fits for diagnosis
    assert abs(exc.value.power_fit.N - 4.0) < 0.1


def test_decaying_ray_rejects_growth_fit():
    with pytest.raises(GrowthFitError):
        fit_growth_model(volterra_analytic(64), math.pi, -1.0,
                         np.geomspace(0.5, 1e-3, 24), "expPower")


def test_fit_needs_enough_radii():
    with pytest.raises(ProbeError, match="at least 8"):
        fit_growth_model(jordan_nilpotent(4), 0.0, 1.0, [0.5, 0.2, 0.1],
                         "power")


# ---------------------------------------------------------------------------
# empirical unboundedness trends


def test_weak_weight_leaves_volterra_unbounded():
    v = volterra_analytic(64)
    sector = Sector(1.0, math.radians(85), 1.0)
    grid = np.geomspace(0.4, 0.02, 10)  # stays clear of the grid-scale pole
    (row,) = check_unboundedness_hypothesis(v, sector, 1.0, [0.5], grid)
    assert row["unbounded"] is True
    assert row["slope"] > 0.1


def test_strong_weight_tames_volterra():
    v = volterra_analytic(64)
    sector = Sector(1.0, math.radians(85), 1.0)
    grid = np.geomspace(0.4, 0.02, 10)
    (row,) = check_unboundedness_hypothesis(v, sector, 1.0, [2.0], grid)
    assert row["unbounded"] is False
    assert row["slope"] < 0.0


def test_exponential_weight_beats_polynomial_growth():
    rows = check_unboundedness_hypothesis(
        jordan_nilpotent(4), Sector(1.0, math.radians(85), 1.0), 1.0, [0.1],
        np.geomspace(0.4, 1e-5, 12))
    assert rows[0]["unbounded"] is False
    assert math.isfinite(rows[0]["slope"])


def test_unboundedness_check_rejects_outside_points():
    with pytest.raises(ProbeError, match="outside the sector"):
        check_unboundedness_hypothesis(
            jordan_nilpotent(4), Sector(1.0, math.pi / 4, 1.0), 1.0, [0.5],
            [-0.3])


# ---------------------------------------------------------------------------
# power-bounded comparison bounds


def test_scalar_inequality_at_one():
    # |w+1| - 1 >= |w|^2/3 holds with slack at w = 1
    assert (abs(1.0 + 1.0) - 1.0) - 1.0 / 3.0 >= 1.0 / 3.0 - 1e-15


def test_scalar_inequality_boundary_taylor():
    # w = it: (sqrt(1+t^2) - 1) - t^2/3 ~ t^2/6 > 0 as t -> 0+
    for t in (1e-2, 1e-3, 1e-4):
        gap = (math.hypot(1.0, t) - 1.0) - t * t / 3.0
        assert gap > 0.0
        assert abs(gap - t * t / 6.0) < t ** 3


def test_power_bounded_checks_quasirandom_grid():
    grid = halton_half_disk(10_000)
    assert np.all(grid.real > 0) and np.all(np.abs(grid) < 1)
    rep = power_bounded_checks(unitary_diagonal(8), grid, K0=1.0)
    assert rep["scalar_min"] >= -1e-12
    assert rep["scalar_ok"] is True
    assert rep["ratio_max"] <= 1.0 + 1e-9
    assert rep["operator_ok"] is True
    assert rep["points"] == 10_000


def test_power_bounded_identity_phase():
    # all phases 1 makes T - I = 0, so the shifted resolvent is w^-1 I
    rep = power_bounded_checks(unitary_diagonal(4, 0.0), [0.5], K0=1.0)
    assert abs(rep["ratio_max"] - 2.0 * 0.25 / 3.0) < 1e-12


def test_power_bounded_rejects_outside_grid():
    with pytest.raises(ProbeError, match="outside"):
        power_bounded_checks(unitary_diagonal(4), [1.5], K0=1.0)
    with pytest.raises(ProbeError, match="outside"):
        power_bounded_checks(unitary_diagonal(4), [-0.2 + 0.1j], K0=1.0)


# ---------------------------------------------------------------------------
# dumps


def test_samples_csv_layout():
    ss = [estimate_resolvent_norm(volterra_analytic(64), z)
          for z in (0.1, -0.1, 0.2j)]
    text = samples_to_csv(ss)
    lines = text.strip().splitlines()
    assert lines[0] == "z_re,z_im,norm,method,probes"
    assert len(lines) == 4
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.1 and cells[3] == "denseSVD"


def test_growth_model_json_round_trip():
    model = fit_growth_model(jordan_nilpotent(4), 0.0, 1.0,
                             np.geomspace(0.5, 1e-3, 24), "power")
    doc = json.loads(growth_model_to_json(model))
    assert doc == growth_model_to_dict(model)
    assert set(doc) == {"C", "N", "fitResidual", "form", "logNorms", "radii",
                        "rayAngle"}
    assert doc["form"] == "power"
    assert len(doc["radii"]) == len(doc["logNorms"]) == 24
    exp = fit_growth_model(volterra_analytic(128), 0.0, 1.0,
                           np.geomspace(0.5, 0.02, 16), "expPower")
    exp_doc = growth_model_to_dict(exp)
    assert set(exp_doc) == {"C", "c", "p", "fitResidual", "form", "logNorms",
                            "radii", "rayAngle"}
