import math

import numpy as np
import pytest

from svfix.correspondence import (
    ConstantSet,
    IntervalValue,
    OmegaPartition,
    PiecePredicate,
    PointValue,
    RandomOperator,
    certify_continuity,
    certify_inverse_closed,
    evaluate,
    find_n0,
    fixed_point_set,
    interval_bounds,
    poly,
    preimage,
    preimage_parts,
    quad_nonpositive,
    range_envelope,
    residual,
    residuals_many,
    validate_operator,
)
from svfix.errors import DomainGapError, HypothesisError, ScenarioError
from svfix.geometry import IntervalUnion, PointSet, is_subset
from svfix.scenario import constant_operator

FIFTEEN_32 = 15 / 32


def spans(parts):
    return [(s.lo, s.hi, s.lo_closed, s.hi_closed) for s in parts]


# -- polynomials -------------------------------------------------------------


def test_poly_degree_limit():
    with pytest.raises(ValueError):
        poly([1, 2, 3, 4])


def test_quad_nonpositive_exact_root():
    # x^2/2 - 0.08 <= 0 on [-0.4, 0.4]
    (s,) = quad_nonpositive((-0.08, 0.0, 0.5))
    assert (s.lo, s.hi) == (-0.4, 0.4)


# -- evaluate / residual -----------------------------------------------------


def test_evaluate_diagonal_low_piece(ex1):
    v = evaluate(ex1.operator, 0.005, 0.005)
    assert v.bounds() == (np.array([0.00005]), np.array([0.00005]))


def test_evaluate_off_diagonal_default(ex1):
    assert evaluate(ex1.operator, 0.3, 0.2).boxes == (((0.00005, 0.5),),)


def test_evaluate_second_example_diagonal(ex2):
    assert evaluate(ex2.operator, 1.0, 1.0).boxes == (((-1.5, 2.5),),)


def test_evaluate_outside_domain(ex1):
    with pytest.raises(DomainGapError, match="domain gap"):
        evaluate(ex1.operator, 0.3, 2.5)


@pytest.mark.parametrize("x, expected", [(0.00005, 0.0), (0.2, 0.18), (FIFTEEN_32, 0.0)])
def test_residual_on_diagonal(ex1, x, expected):
    assert residual(ex1.operator, x, x) == pytest.approx(expected, abs=1e-15)


def test_residual_zero_iff_member_on_grid(ex1, ex2):
    for sc in (ex1, ex2):
        T = sc.operator
        lo, hi = T.domain.bounds()
        xs = np.unique(np.concatenate([np.linspace(lo[0], hi[0], 2001), T.breakpoints()]))
        for w in (None, 0.3, FIFTEEN_32):
            r = residuals_many(T, w, xs[:, None])
            for x, rx in zip(xs, r):
                assert (rx == 0.0) == evaluate(T, w, x).contains(x)
                assert rx == pytest.approx(residual(T, w, x), abs=1e-15)


def test_interval_bounds_match_evaluate(ex2):
    T = ex2.operator.base()
    xs = np.linspace(-2, 2, 101)[:, None]
    lo, hi = interval_bounds(T, None, xs)
    for x, a, b in zip(xs, lo, hi):
        assert evaluate(T, None, x).bounds() == (pytest.approx(a), pytest.approx(b))


def test_diagonal_off_diagonal_value_is_omega_independent(ex1, rng):
    T = ex1.operator
    for x in rng.uniform(0, 2, 50):
        vals = {evaluate(T, w, x).boxes for w in rng.uniform(0, 2, 5) if w != x}
        assert len(vals) == 1


# -- preimage ----------------------------------------------------------------


def test_preimage_low_value_row(ex1):
    assert preimage(ex1.operator, 0.005, 0.00005).boxes == (((0.0, 0.01),),)


def test_preimage_square_root_row(ex1):
    assert preimage(ex1.operator, 0.3, 0.08).boxes == (((0.3, 0.3),), ((0.4, 0.4),))


def test_preimage_outside_range_empty(ex1):
    assert preimage(ex1.operator, 0.3, 0.9).is_empty()
    assert preimage(ex1.operator, 0.3, -1.0).is_empty()


def test_preimage_requires_1d():
    T = RandomOperator(((PiecePredicate.box((0, 0), (1, 1)), PointValue([0, 0, 0], [0, 0, 0])),), IntervalUnion.box((0, 0), (1, 1)))
    with pytest.raises(ValueError, match="preimage requires d=1"):
        preimage(T, None, (0.0, 0.0))


def _duality_pairs(T, rng, n):
    lo, hi = T.domain.bounds()
    env = range_envelope(T, None, T.domain).bounds()
    xs = rng.uniform(lo[0], hi[0], n)
    ys = rng.uniform(env[0][0] - 0.2, env[1][0] + 0.2, n)
    special_x = np.array(T.breakpoints())
    special_x = special_x[(special_x >= lo[0]) & (special_x <= hi[0])]
    xs[: len(special_x) * 20] = np.tile(special_x, 20)[: min(n, len(special_x) * 20)]
    return xs, ys


def _in_parts(parts, x):
    return any(s.contains(x) for s in parts)


def test_preimage_duality_base_maps(t1, t2, rng):
    for T in (t1, t2):
        xs, ys = _duality_pairs(T, rng, 5000)
        for x, y in zip(xs, ys):
            assert evaluate(T, None, x).contains(y) == _in_parts(preimage_parts(T, None, y), x)


def test_preimage_duality_diagonal_reading(ex1, rng):
    """Off the diagonal the preimage solves the base map; at x = omega it takes
    the union of the base value and the default set."""
    T = ex1.operator
    base = T.base()
    n = 0
    while n < 2000:
        w, x, y = rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(-0.1, 0.6)
        parts = preimage_parts(T, w, y)
        assert _in_parts(parts, x) == evaluate(base, None, x).contains(y)
        at_w = evaluate(base, None, w).contains(y) or T.default.contains(y)
        assert _in_parts(parts, w) == at_w
        n += 1


# -- inverse closedness ------------------------------------------------------


def test_inverse_closed_every_bucket(ex1):
    for w in ex1.omega.representatives():
        assert certify_inverse_closed(ex1.operator, w).certified


def test_inverse_closed_refuted_for_half_open_piece():
    # value 1 on [0, 0.5), value 0 on [0.5, 1]: preimage of 1 is [0, 0.5)
    T = RandomOperator(
        (
            (PiecePredicate.interval(0, 0.5, (True, False)), PointValue([1.0])),
            (PiecePredicate.interval(0.5, 1), PointValue([0.0])),
        ),
        IntervalUnion.interval(0, 1),
    )
    cert = certify_inverse_closed(T, None)
    assert cert.verdict == "refuted" and cert.witness_y == 1.0
    assert not all(s.is_closed for s in preimage_parts(T, None, cert.witness_y))


def test_inverse_closed_constant():
    assert certify_inverse_closed(constant_operator(0.1, 0.5), None).certified


# -- continuity --------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.1, 0.01, 0.001])
def test_alsc_certified_base_map(t1, eps):
    assert certify_continuity(t1, None, "alsc", eps, grid=10_001).verdict == "certified"


def test_lsc_refuted_at_jump_with_witness(t1):
    c = certify_continuity(t1, None, "lsc", 0.05, points=[FIFTEEN_32], targets=[0.45])
    assert c.verdict == "refuted"
    w = c.witness
    assert w["x"] == [FIFTEEN_32]
    assert (w["ball_center"][0] - w["ball_radius"], w["ball_center"][0] + w["ball_radius"]) == pytest.approx((0.4, 0.5))
    # re-check: the nearby value misses the ball
    z = w["z"][0]
    assert abs(z - FIFTEEN_32) <= w["radius"]
    assert evaluate(t1, None, z).distance(w["ball_center"]) >= w["ball_radius"]
    assert evaluate(t1, None, z).bounds()[0][0] == pytest.approx(0.1098, abs=1e-4)


def test_constant_map_continuous_both_modes():
    T = constant_operator(0.1, 0.5)
    assert certify_continuity(T, None, "alsc", 0.01).certified
    assert certify_continuity(T, None, "lsc", 0.01).certified


def test_lsc_implies_alsc_convex():
    T = RandomOperator(((PiecePredicate.interval(0, 1), IntervalValue((0, 1, 0), (0.5, 1, 0))),), IntervalUnion.interval(0, 1))
    for eps in (0.1, 0.01):
        if certify_continuity(T, None, "lsc", eps, grid=257).certified:
            assert certify_continuity(T, None, "alsc", eps, grid=257).certified


# -- range envelope / n0 -----------------------------------------------------


def test_range_envelope_low_piece_with_default(ex1):
    env = range_envelope(ex1.operator, 0.005, IntervalUnion.interval(0, 0.01))
    assert env.boxes == (((0.00005, 0.5),),)


def test_range_envelope_base_whole_domain(t1):
    env = range_envelope(t1, None, IntervalUnion.interval(0, 2))
    assert env.boxes == (((0.00005, 0.5),),)
    xs = np.linspace(0, 2, 10_001)[:, None]
    lo, hi = interval_bounds(t1, None, xs)
    assert lo.min() == 0.00005 and hi.max() == 0.5


def test_range_envelope_point(ex2):
    T = ex2.operator
    assert range_envelope(T, 1.0, IntervalUnion.interval(1.0, 1.0)).boxes == evaluate(T, 1.0, 1.0).boxes


def test_range_envelope_union_additive(t1, rng):
    for _ in range(50):
        a, b, c = np.sort(rng.uniform(0, 2, 3))
        whole = range_envelope(t1, None, IntervalUnion.interval(a, c))
        parts = IntervalUnion(
            list(range_envelope(t1, None, IntervalUnion.interval(a, b)).boxes)
            + list(range_envelope(t1, None, IntervalUnion.interval(b, c)).boxes)
        )
        assert whole.boxes == parts.boxes


def test_find_n0_example(ex1):
    assert find_n0(ex1.operator, ex1.c, ex1.omega.representatives()) == 20000


def test_find_n0_quarter_margin():
    assert find_n0(constant_operator(0.25, 0.75), IntervalUnion.interval(0, 1)) == 4


def test_find_n0_touching_boundary():
    with pytest.raises(HypothesisError, match="n0 unsatisfiable"):
        find_n0(constant_operator(0.0, 0.75), IntervalUnion.interval(0, 1))


# -- fixed point sets / validation / partition -------------------------------


def test_fixed_point_set_base(t1):
    fps = fixed_point_set(t1)
    assert [float(p[0]) for p in fps.representatives()] == [0.00005, FIFTEEN_32]


def test_fixed_point_set_off_atom(ex1):
    fps = fixed_point_set(ex1.operator, 0.3)
    assert spans(fps.spans) == [(0.00005, 0.3, True, False), (0.3, 0.5, False, True)]


def test_validate_rejects_gap():
    T = RandomOperator(((PiecePredicate.interval(0, 0.4), PointValue([0.0])),), IntervalUnion.interval(0, 1))
    with pytest.raises(ScenarioError) as e:
        validate_operator(T)
    assert e.value.pointer == "operator.pieces"


def test_validate_rejects_conflicting_overlap():
    T = RandomOperator(
        ((PiecePredicate.interval(0, 0.6), PointValue([0.0])), (PiecePredicate.interval(0.4, 1), PointValue([1.0]))),
        IntervalUnion.interval(0, 1),
    )
    with pytest.raises(ScenarioError, match="overlap"):
        validate_operator(T)


def test_interval_value_rejects_inverted():
    with pytest.raises(ScenarioError, match="lower envelope above upper"):
        IntervalValue((1.0, 0, 0), (0.0, 0, 0)).at(0.5)
    T = RandomOperator(((PiecePredicate.interval(0, 1), IntervalValue((1.0, 0, 0), (0.0, 0, 0))),), IntervalUnion.interval(0, 1))
    with pytest.raises(ScenarioError):
        validate_operator(T)


def test_omega_partition_units(ex1):
    P = ex1.omega
    units = P.units()
    assert len(units) == 67 and [u.kind for u in units].count("atom") == 3
    assert P.cell_of(2.0) == 63 and P.cell_of(0.0) == 0
    assert units[-1].representative == 1.0
    with pytest.raises(ScenarioError):
        OmegaPartition((0, 1), 4, (2.0,))


def test_constant_set_piece():
    T = RandomOperator(((PiecePredicate.interval(0, 1), ConstantSet(PointSet([0.2, 0.7]))),), IntervalUnion.interval(0, 1))
    assert not T.is_convex_valued()
    assert is_subset(evaluate(T, None, 0.5), IntervalUnion([(0.2, 0.2), (0.7, 0.7)]))
