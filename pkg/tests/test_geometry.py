import cmath
import math

import numpy as np
import pytest

from combcalc.geometry import (
    Arc,
    BoundaryAmbiguousError,
    CombPlacement,
    CombSet,
    Contour,
    Domain,
    GeometryError,
    Sector,
    Segment,
    build_boundary_contour,
    chord_arc_constant,
    circle_contour,
    comb_from_dict,
    comb_to_dict,
    contour_from_json,
    contour_to_json,
    contour_vertices_csv,
    dyadic_schedule,
    make_sector,
    point_in_domain,
    polygon_contour,
    schedule_from_r_min,
    sector_domain,
    winding_number,
)


# ---------------------------------------------------------------------------
# sectors


def test_make_sector_right_half_disk():
    s = make_sector(1.0, math.pi / 2, 2.0)
    assert s.direction == 1.0
    assert s.contains(1.0)
    assert s.contains(0.1 + 1.0j)
    assert not s.contains(-0.5)
    assert not s.contains(2.5)


def test_make_sector_negative_axis():
    s = make_sector(-1.0, math.pi / 4, 1.5)
    assert s.contains(-0.5)
    assert not s.contains(0.5)
    assert not s.contains(-0.5 + 0.6j)  # 50 degrees off the axis


def test_make_sector_rejects_bad_inputs():
    with pytest.raises(GeometryError):
        make_sector(1.0, math.pi + 0.1, 1.0)
    with pytest.raises(GeometryError):
        make_sector(2.0, math.pi / 4, 1.0)  # non-unit direction
    with pytest.raises(GeometryError):
        make_sector(1.0, math.pi / 4, 0.0)
    with pytest.raises(GeometryError):
        make_sector(1.0, -0.1, 1.0)


def test_sector_rejects_nonfinite():
    with pytest.raises(GeometryError):
        Segment(0.0, complex("nan"))
    with pytest.raises(GeometryError):
        Sector(complex("inf"), math.pi / 4)


# ---------------------------------------------------------------------------
# comb sets and placements


def _comb(alpha=math.pi / 6, a=(1.0, 0.5), delta=(0.05,), direction=1.0,
          sign=+1, ray_angle=math.pi / 4):
    return CombSet(alpha, a, delta, CombPlacement(direction, sign, ray_angle))


def test_comb_rectangles_identity_placement():
    # direction * e^{i sign angle} = 1: rectangles land where they were defined
    comb = _comb(direction=cmath.exp(-1j * math.pi / 4), sign=+1,
                 ray_angle=math.pi / 4)
    (rect,) = comb.rectangles()
    expected = np.array([0.5 - 0.05j, 1.0 - 0.05j, 1.0 + 0.05j, 0.5 + 0.05j])
    assert np.allclose(rect, expected, atol=1e-15)


def test_comb_rectangles_quarter_turn():
    comb = _comb(sign=+1, ray_angle=math.pi / 2)
    (rect,) = comb.rectangles()
    base = np.array([0.5 - 0.05j, 1.0 - 0.05j, 1.0 + 0.05j, 0.5 + 0.05j])
    assert np.allclose(rect, base * 1j, atol=1e-15)


def test_comb_rectangles_composed_placement():
    comb = _comb(a=(1.0, 0.5), delta=(0.1,), alpha=math.pi / 5,
                 direction=1j, sign=-1, ray_angle=math.pi / 4)
    (rect,) = comb.rectangles()
    base = np.array([0.5 - 0.1j, 1.0 - 0.1j, 1.0 + 0.1j, 0.5 + 0.1j])
    assert np.allclose(rect, base * 1j * cmath.exp(-1j * math.pi / 4), atol=1e-14)


def test_comb_rectangles_preserve_side_lengths():
    comb = _comb(direction=cmath.exp(0.7j), sign=-1, ray_angle=1.1)
    (rect,) = comb.rectangles()
    assert abs(abs(rect[1] - rect[0]) - 0.5) < 1e-12
    assert abs(abs(rect[2] - rect[1]) - 0.1) < 1e-12


def test_comb_invariants_enforced():
    pl = CombPlacement(1.0, +1, math.pi / 4)
    with pytest.raises(GeometryError):
        CombSet(math.pi / 6, (0.9, 0.5), (0.05,), pl)  # a_1 != 1
    with pytest.raises(GeometryError):
        CombSet(math.pi / 6, (1.0, 0.5, 0.6), (0.05, 0.01), pl)  # not decreasing
    with pytest.raises(GeometryError):
        CombSet(math.pi / 6, (1.0, 0.5), (0.26,), pl)  # delta >= a_2 sin(alpha)
    with pytest.raises(GeometryError):
        # delta must decrease
        CombSet(math.pi / 6, (1.0, 0.5, 0.25), (0.05, 0.06), pl)
    with pytest.raises(GeometryError):
        CombPlacement(1.0, 0, math.pi / 4)
    with pytest.raises(GeometryError):
        CombPlacement(1.0, +1, 0.0)


def test_delta_caps_hold_as_stored(rng):
    # random valid comb: every stored element obeys the strict caps
    a = (1.0, 0.55, 0.3, 0.14)
    sa = math.sin(0.4)
    delta = []
    prev = math.inf
    for n in range(3):
        cap = min(prev, a[n + 1] * sa)
        delta.append(cap * rng.uniform(0.3, 0.95))
        prev = delta[-1]
    comb = CombSet(0.4, a, tuple(delta), CombPlacement(1.0, -1, 0.8))
    for n in range(comb.n_rect):
        assert comb.delta[n] < comb.a[n + 1] * math.sin(comb.alpha)
        if n:
            assert comb.delta[n] < comb.delta[n - 1]


def test_schedules():
    assert dyadic_schedule(3) == (1.0, 0.5, 0.25, 0.125)
    sched = schedule_from_r_min(1e-3)
    assert sched[0] == 1.0
    assert sched[-1] >= 1e-3 > sched[-1] / 2
    with pytest.raises(GeometryError):
        schedule_from_r_min(0.7)


# ---------------------------------------------------------------------------
# contours


def test_contour_requires_closure():
    with pytest.raises(GeometryError):
        Contour((Segment(0.0, 1.0), Segment(1.0, 1.0 + 1.0j)))


def test_contour_rejects_self_intersection():
    with pytest.raises(GeometryError):
        polygon_contour([0.0, 1.0 + 1.0j, 1.0, 1.0j])  # bowtie


def test_contour_length_and_orientation():
    sq = polygon_contour([0.0, 1.0, 1.0 + 1.0j, 1.0j])
    assert abs(sq.total_length - 4.0) < 1e-15
    assert sq.orientation == +1
    assert abs(sq.signed_area() - 1.0) < 1e-15
    rev = polygon_contour([0.0, 1.0j, 1.0 + 1.0j, 1.0])
    assert rev.orientation == -1


def test_circle_contour_length():
    c = circle_contour(0.0, 2.0)
    assert abs(c.total_length - 4 * math.pi) < 1e-12


def test_sector_contour_no_combs_length():
    contour = build_boundary_contour(Sector(1.0, math.pi / 4, 2.0), (), 1.0)
    assert abs(contour.total_length - (2.0 + math.pi / 2)) < 1e-12
    assert contour.orientation == +1
    kinds = [type(p).__name__ for p in contour.pieces]
    assert kinds == ["Segment", "Arc", "Segment"]


def test_sector_contour_comb_detour_length():
    # boundary detours along the in-sector rectangle halves: each rectangle
    # adds two jogs of height delta; with clip = a_1 the outer rectangle also
    # clips the arc.  Exact length assembled independently below.
    s = Sector(1.0, math.pi / 4, 2.0)
    base = build_boundary_contour(s, (), 1.0)
    comb = _comb()
    contour = build_boundary_contour(s, (comb,), 1.0)
    d = 0.05
    x_star = math.sqrt(1.0 - d * d)
    ray_path = (x_star - 0.5) + d + 0.5   # top edge + jog + remaining ray run
    arc_len = (math.pi / 2 - math.asin(d))
    lower_ray = 1.0
    expected = lower_ray + arc_len + ray_path
    assert abs(contour.total_length - expected) < 1e-12
    # exact change against the plain sector: d - asin(d) + sqrt(1-d^2) - 1
    delta_len = d - math.asin(d) + x_star - 1.0
    assert abs((contour.total_length - base.total_length) - delta_len) < 1e-12


def test_sector_contour_comb_inside_clip_adds_two_jogs():
    s = Sector(1.0, math.pi / 4, 2.0)
    base = build_boundary_contour(s, (), 2.0)
    contour = build_boundary_contour(s, (_comb(),), 2.0)
    assert abs((contour.total_length - base.total_length) - 2 * 0.05) < 1e-12


def test_combs_intersect_error():
    s = Sector(1.0, math.pi / 16, 2.0)
    cl = CombSet(0.45, (1.0, 0.5), (0.2,), CombPlacement(1.0, -1, math.pi / 16))
    cu = CombSet(0.45, (1.0, 0.5), (0.2,), CombPlacement(1.0, +1, math.pi / 16))
    with pytest.raises(GeometryError, match="combs intersect"):
        build_boundary_contour(s, (cl, cu), 1.0)


def test_comb_escaping_sector_error():
    # angular half-width atan2(delta, a_2) exceeds twice the sector half-angle
    s = Sector(1.0, math.pi / 32, 2.0)
    tall = CombSet(0.3, (1.0, 0.5), (0.14,), CombPlacement(1.0, +1, math.pi / 32))
    with pytest.raises(GeometryError, match="escapes the sector"):
        build_boundary_contour(s, (tall,), 1.0)


def test_comb_placement_must_match_sector():
    s = Sector(1.0, math.pi / 4, 2.0)
    wrong = _comb(ray_angle=math.pi / 3)
    with pytest.raises(GeometryError, match="ray_angle"):
        build_boundary_contour(s, (wrong,), 1.0)


def test_boundary_contour_simplicity_with_many_rectangles():
    a = dyadic_schedule(8)
    sa = math.sin(math.pi / 6)
    delta = []
    prev = math.inf
    for n in range(8):
        delta.append(min(prev, a[n + 1] * sa) * 0.8)
        prev = delta[-1]
    s = Sector(1.0, math.pi / 4, 2.0)
    combs = [CombSet(math.pi / 6, a, tuple(delta),
                     CombPlacement(1.0, sg, math.pi / 4)) for sg in (-1, +1)]
    contour = build_boundary_contour(s, combs, 1.0)
    assert contour.orientation == +1
    assert abs(contour.pieces[0].start) < 1e-12  # starts at the origin


# ---------------------------------------------------------------------------
# chord-arc diagnostics


def test_chord_arc_circle():
    val = chord_arc_constant(circle_contour(), 512)
    assert val <= math.pi / 2 + 1e-9
    assert val > (math.pi / 2) * 0.98


def test_chord_arc_square_lower_bound():
    sq = polygon_contour([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    assert chord_arc_constant(sq, 400) >= math.sqrt(2.0) - 1e-9


def test_chord_arc_requires_enough_pairs():
    with pytest.raises(GeometryError):
        chord_arc_constant(circle_contour(), 50)


# ---------------------------------------------------------------------------
# winding numbers and membership


def test_winding_numbers_circle():
    c = circle_contour()
    assert winding_number(c, 0.0) == 1
    assert winding_number(c, 2.0) == 0
    assert winding_number(c, 0.5 - 0.3j) == 1


def test_point_in_domain_disk():
    dom = Domain(circle_contour(), 0.0)
    assert dom.contains(0.0)
    assert not dom.contains(2.0)


def test_point_in_domain_sector():
    dom = sector_domain(Sector(1.0, math.pi / 4, 1.0))
    assert dom.contains(0.5)
    assert not dom.contains(0.5 * cmath.exp(1j * math.pi / 3))
    assert not dom.contains(-0.5)


def test_point_near_boundary_is_ambiguous():
    c = circle_contour()
    with pytest.raises(BoundaryAmbiguousError):
        point_in_domain(c, 1.0 + 1e-14j)


def test_domain_representative_validated():
    with pytest.raises(GeometryError):
        Domain(circle_contour(), 3.0)


def test_winding_consistency_with_membership(rng):
    dom = sector_domain(Sector(cmath.exp(0.4j), 0.9, 1.0))
    hits = 0
    for _ in range(300):
        z = complex(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2))
        if z == 0 or dom.boundary.distance(z) < 1e-9:
            continue
        inside = point_in_domain(dom.boundary, z)
        assert inside == (winding_number(dom.boundary, z) == 1)
        hits += inside
    assert hits > 10  # the sector actually got sampled


# ---------------------------------------------------------------------------
# serialization


def test_contour_json_round_trip():
    contour = build_boundary_contour(Sector(1.0, math.pi / 4, 2.0), (_comb(),), 1.0)
    back = contour_from_json(contour_to_json(contour))
    assert len(back.pieces) == len(contour.pieces)
    for p, q in zip(contour.pieces, back.pieces):
        assert type(p) is type(q)
        assert abs(complex(p.point(0.37)) - complex(q.point(0.37))) < 1e-15


def test_comb_dict_round_trip():
    comb = _comb(direction=1j, sign=-1)
    back = comb_from_dict(comb_to_dict(comb))
    assert back == comb


def test_contour_vertices_csv():
    text = contour_vertices_csv(polygon_contour([0.0, 1.0, 1.0 + 1.0j, 1.0j]))
    lines = text.strip().splitlines()
    assert lines[0] == "re,im"
    assert len(lines) == 6  # header + 4 vertices + closure repeat
