import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svfix.correspondence import FrozenCorrespondence, IntervalValue, PiecePredicate, RandomOperator, residual
from svfix.errors import HypothesisError, NoFixedPointError
from svfix.geometry import IntervalUnion, PointSet, inward_halfspace, norm, set_distance
from svfix.scenario import constant_operator, identity_operator
from svfix.solver import (
    check_boundary_condition,
    epsilon_schedule,
    exact_candidates,
    find_invariant_compact,
    homotopy_solve,
    oracle_scan,
    solve_fixed_point,
)

FIFTEEN_32 = 15 / 32


def point_operator(c, domain=(0.0, 1.0)):
    return constant_operator(c, c, domain)


def band_operator():
    """T(x) = [x - 0.1, x + 0.1] on [0, 1]."""
    return RandomOperator(
        ((PiecePredicate.interval(0, 1), IntervalValue((-0.1, 1, 0), (0.1, 1, 0))),), IntervalUnion.interval(0, 1)
    )


# -- schedule ------------------------------------------------------------------


def test_epsilon_schedule_exact():
    s = epsilon_schedule(20000, 5)
    assert s[0] == 1 / 20000
    assert s == [1 / (n + 20000 - 1) for n in range(1, 6)]


# -- invariant compact -------------------------------------------------------


def test_invariant_compact_example(ex1):
    inv = find_invariant_compact(FrozenCorrespondence(ex1.operator, 0.3), IntervalUnion.interval(0, 2), 20000)
    assert inv.verified
    lo, hi = inv.k.bounds()
    assert lo[0] == 0.0 and hi[0] == pytest.approx(0.50005, abs=1e-15)


def test_invariant_compact_constant_shrinks():
    inv = find_invariant_compact(FrozenCorrespondence(point_operator(0.3), None), IntervalUnion.interval(0, 1), 10)
    lo, hi = inv.k.bounds()
    assert inv.verified and (lo[0], hi[0]) == pytest.approx((0.2, 0.4))


def test_invariant_compact_identity_is_c():
    inv = find_invariant_compact(FrozenCorrespondence(identity_operator((0.0, 1.0)), None), IntervalUnion.interval(0, 1), 10)
    assert inv.k.bounds() == (np.array([0.0]), np.array([1.0]))


def test_invariant_compact_unbounded_c():
    from svfix.geometry import HalfSpace

    with pytest.raises(HypothesisError):
        find_invariant_compact(FrozenCorrespondence(identity_operator(), None), HalfSpace(1.0, 0.0), 10)


# -- fixed point loop ----------------------------------------------------------


def test_solve_off_atom(ex1):
    rep = solve_fixed_point(FrozenCorrespondence(ex1.operator, 0.3), ex1.c, 20000)
    assert rep.fixed_point.tolist() == [0.00005]
    assert rep.residual == 0.0
    assert residual(ex1.operator, 0.3, rep.fixed_point) == 0.0


def test_solve_constant_first_step():
    rep = solve_fixed_point(FrozenCorrespondence(point_operator(0.3), None), IntervalUnion.interval(0, 1), 10)
    assert rep.fixed_point[0] == pytest.approx(0.3, abs=1e-12)
    assert rep.iterations == 1


def test_solve_band_picks_smallest():
    rep = solve_fixed_point(FrozenCorrespondence(band_operator(), None), IntervalUnion.interval(0, 1), 10)
    assert rep.fixed_point.tolist() == [0.0] and rep.residual == 0.0


def test_solve_loop_alone_converges(ex1):
    """Without the exact fixed set the selection loop must still reach tol."""
    t = FrozenCorrespondence(ex1.operator.base(), None)
    rep = solve_fixed_point(t, ex1.c, 20000, use_exact=False)
    assert rep.residual <= 1e-9 and rep.source == "selection loop"


def test_solve_no_fixed_point():
    t = FrozenCorrespondence(RandomOperator(((PiecePredicate.interval(0, 1), IntervalValue((0.5, -1, 0), (0.5, -1, 0))),), IntervalUnion.interval(0, 1)), None)
    rep = solve_fixed_point(t, IntervalUnion.interval(0, 1), 4)
    assert rep.fixed_point[0] == pytest.approx(0.25)


def test_solve_two_dimensional():
    T = RandomOperator(
        ((PiecePredicate.box((-1, -1), (1, 1)), IntervalValue([(0.1, 0.5, 0), (0, 0, 0.25)], [(0.1, 0.5, 0), (0, 0, 0.25)])),),
        IntervalUnion.box((-1, -1), (1, 1)),
    )
    t = FrozenCorrespondence(T, None)
    # the loop alone gets within its eps_n; the exact fixed set pins the point
    loop = solve_fixed_point(t, T.domain, 4, tol=1e-3, n_max=16, use_exact=False)
    assert loop.residual <= 1e-3 and loop.source == "selection loop"
    rep = solve_fixed_point(t, T.domain, 4, n_max=4)
    assert rep.fixed_point.tolist() == [pytest.approx(0.2, abs=1e-15), 0.0]
    assert rep.residual <= 1e-15


# -- oracle ----------------------------------------------------------------------


def test_oracle_base_map(t1):
    o = oracle_scan(FrozenCorrespondence(t1, None), IntervalUnion.interval(0, 2), 1e-4)
    assert o.min_residual == 0.0
    assert o.points[:, 0].tolist() == [0.00005, FIFTEEN_32]


def test_oracle_off_atom_band(ex1):
    o = oracle_scan(FrozenCorrespondence(ex1.operator, 0.3), IntervalUnion.interval(0, 2), 1e-4)
    xs = o.points[:, 0]
    # grid points (plus the 15/32 breakpoint) in the default set [0.00005, 0.5],
    # minus omega itself, where the base value {0.045} applies
    grid = np.arange(0, 20001) * 1e-4
    expected = np.union1d(grid[(grid >= 0.00005) & (grid <= 0.5) & (grid != 0.3)], [FIFTEEN_32])
    assert np.array_equal(xs, expected)
    assert residual(ex1.operator, 0.3, 0.3) == pytest.approx(0.255)
    assert o.min_residual == 0.0


def test_oracle_no_fixed_point():
    o = oracle_scan(FrozenCorrespondence(point_operator(2.0, (0.0, 1.0)), None), IntervalUnion.interval(0, 1), 1e-3)
    assert o.min_residual == pytest.approx(1.0)


def test_solver_agrees_with_oracle(ex1, t1):
    for T, w in ((ex1.operator, 0.3), (ex1.operator, FIFTEEN_32), (t1, None), (band_operator(), None)):
        t = FrozenCorrespondence(T, w)
        c = IntervalUnion.interval(*T.domain.bounds()[0], *T.domain.bounds()[1]) if T.dim == 1 else T.domain
        rep = solve_fixed_point(t, c, 20000 if T is not band_operator() else 10)
        o = oracle_scan(t, c, 1e-4)
        assert o.nearest(rep.fixed_point) <= 1e-4


# -- homotopy ----------------------------------------------------------------------


def test_homotopy_example(ex1):
    steps = homotopy_solve(FrozenCorrespondence(ex1.operator, 0.3), IntervalUnion.interval(0, 1), 64)
    assert [s.n for s in steps] == list(range(2, 65))
    for s in steps:
        assert s.xi[0] == pytest.approx(0.00005 * (1 - 1 / s.n), abs=1e-15)
        assert s.eta[0] == pytest.approx(0.00005, abs=1e-15)
        assert abs(s.gap - 0.00005 / s.n) <= 1e-12
        assert s.gap * s.n <= 1.0
        assert s.membership <= 1e-15


def test_homotopy_constant():
    c = 0.6
    steps = homotopy_solve(FrozenCorrespondence(point_operator(c), None), IntervalUnion.interval(0, 1), 16)
    for s in steps:
        assert s.xi[0] == pytest.approx((1 - 1 / s.n) * c)
        assert s.gap == pytest.approx(c / s.n)


def test_homotopy_failure_reports_n():
    with pytest.raises(NoFixedPointError, match=r"n=2"):
        homotopy_solve(FrozenCorrespondence(point_operator(0.9, (0.0, 1.0)), None), IntervalUnion.interval(0.8, 1.0), 8)


# -- boundary conditions -------------------------------------------------------


def test_condition_iii_fails_example2(ex2):
    v = check_boundary_condition("iii", 1.0, IntervalUnion.interval(-1.5, 2.5))
    assert not v.holds


def test_condition_ii_lambda_zero():
    v = check_boundary_condition("ii", 1.0, np.array([[0.5]]))
    assert v.holds and v.witness["lambda"] == 0.0
    lam = v.witness["lambda"]
    y = 0.5
    assert lam * 1.0 + (1 - lam) * y <= 1.0


def test_condition_v_no_gamma():
    v = check_boundary_condition("v", 1.0, np.array([[1.2]]))
    assert not v.holds
    g = np.linspace(1.0001, 64, 1000)
    assert np.all(1.2**g - 1 > 0.2**g)


def test_condition_iv_ray():
    assert not check_boundary_condition("iv", 1.0, IntervalUnion.interval(1.3, 1.7)).holds
    assert check_boundary_condition("iv", 1.0, IntervalUnion.interval(-1.0, 1.0)).holds
    assert check_boundary_condition("iv", (0.6, 0.8), PointSet([(0.0, 2.0)])).holds


def test_condition_i_strict():
    assert check_boundary_condition("i", 1.0, IntervalUnion.interval(1.5, 2.0)).holds is False
    assert check_boundary_condition("i", 1.0, IntervalUnion.interval(-0.5, 0.5)).holds


def test_condition_witnesses_recheck():
    v = check_boundary_condition("v", 1.0, np.array([[0.5]]))
    assert v.holds
    g = v.witness["gamma"][0]
    assert 0.5**g - 1 <= 0.5**g
    v = check_boundary_condition("vi", 1.0, np.array([[1.5]]))
    if v.holds:
        b = v.witness["beta"][0]
        assert 1.5**b - 1 >= 0.5**b


def test_condition_requires_boundary_point():
    with pytest.raises(ValueError, match="unit sphere"):
        check_boundary_condition("i", 0.5, np.array([[0.2]]))


def _random_boundary_instance(rng):
    th = rng.uniform(0, 2 * np.pi)
    x = np.array([np.cos(th), np.sin(th)])
    ys = rng.normal(scale=1.0, size=(int(rng.integers(1, 6)), 2)) + x * rng.uniform(-1, 1)
    return x, ys


def test_condition_iii_implies_ii(rng):
    n_iii = 0
    for _ in range(100):
        x, ys = _random_boundary_instance(rng)
        if rng.random() < 0.5:
            # push samples into the tangent half-space so iii holds often
            h = inward_halfspace(x)
            ys = np.array([y - max(0.0, float(y @ x) - 1.0 + 0.01) * x for y in ys])
            assert all(set_distance(y, h) == 0.0 for y in ys)
        iii = check_boundary_condition("iii", x, ys)
        ii = check_boundary_condition("ii", x, ys)
        if iii.holds:
            n_iii += 1
            assert ii.holds
    assert n_iii >= 20


@given(st.floats(-3, 3), st.sampled_from([-1.0, 1.0]))
def test_condition_i_matches_closed_form_1d(y, x):
    v = check_boundary_condition("i", x, np.array([[y]]))
    h = inward_halfspace(x)
    assert v.holds == (set_distance(y, h) < abs(y - x))
