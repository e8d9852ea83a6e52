import numpy as np
import pytest

from svfix.correspondence import FrozenCorrespondence, OmegaPartition, PiecePredicate, PointValue, RandomOperator
from svfix.errors import NoFixedPointError
from svfix.geometry import IntervalUnion, radial_retraction
from svfix.random_driver import (
    MEASURABILITY,
    RandomSelection,
    boundary_random,
    frame_violations,
    homotopy_random,
    random_approximation,
    random_solve,
    unit_residual,
    verify_pair,
    worker_count,
)
from svfix.scenario import constant_operator
from svfix.solver import solve_fixed_point


def ball_operator():
    """Values [1.3, 1.7] everywhere on B_2 = [-2, 2]."""
    return constant_operator(1.3, 1.7, (-2.0, 2.0))


SMALL = OmegaPartition((0.0, 1.0), 4)


@pytest.fixture(scope="module")
def ex1_selection():
    from svfix.scenario import builtin

    s = builtin("example1")
    return s, random_solve(s.operator, s.omega, s.c)


def test_example1_uniform(ex1_selection):
    s, sel = ex1_selection
    assert sel.uniform
    assert all(v.tolist() == [0.00005] for v in sel.values)
    assert sel.sup_residual == 0.0 and len(sel.values) == 67
    assert sel.measurability == MEASURABILITY
    assert sel.hypotheses["n0"] == 20000


def test_selection_is_simple_function(ex1_selection):
    s, sel = ex1_selection
    assert sel.is_simple()
    for w in np.linspace(0, 2, 257):
        assert sel.value_at(float(w)).tolist() == [0.00005]
    assert sel.value_at(15 / 32) is sel.values[64 + 1]


def test_residuals_recomputed_per_unit(ex1_selection):
    s, sel = ex1_selection
    for u, x, r in zip(sel.units, sel.values, sel.residuals):
        assert unit_residual(s.operator, u, x) == r == 0.0


def test_omega_independent_matches_deterministic():
    T = constant_operator(0.2, 0.4)
    sel = random_solve(T, SMALL, IntervalUnion.interval(0, 1))
    det = solve_fixed_point(FrozenCorrespondence(T, None), IntervalUnion.interval(0, 1), sel.hypotheses["n0"])
    assert all(np.array_equal(v, det.fixed_point) for v in sel.values)


def test_default_outside_c_has_no_fixed_point():
    T = RandomOperator(
        ((PiecePredicate.interval(0, 1), PointValue([0.5])),), IntervalUnion.interval(0, 1), default=IntervalUnion.interval(2, 2)
    )
    with pytest.raises(NoFixedPointError, match="F\\(ω\\) empty at cell"):
        random_solve(T, SMALL, IntervalUnion.interval(0, 1))


def test_single_thread_same_result(monkeypatch, ex1):
    s = ex1.with_cells(8)
    monkeypatch.setenv("SVFIX_THREADS", "1")
    assert worker_count() == 1
    a = random_solve(s.operator, s.omega, s.c)
    monkeypatch.setenv("SVFIX_THREADS", "4")
    b = random_solve(s.operator, s.omega, s.c)
    assert all(np.array_equal(x, y) for x, y in zip(a.values, b.values))


# -- approximation -----------------------------------------------------------


def test_approximation_example2_exact_fixed_point(ex2):
    rep = random_approximation(ex2.operator, ex2.omega)
    assert rep.verdict
    for r in rep.rows:
        assert r.d_pair == r.d_ball == r.d_inward == 0.0
        assert np.array_equal(radial_retraction(r.eta), r.xi)


def test_approximation_ball_values():
    rep = random_approximation(ball_operator(), SMALL)
    assert rep.verdict
    for r in rep.rows:
        assert r.xi.tolist() == [1.0] and r.eta.tolist() == [1.3]
        for d in (r.d_pair, r.d_ball, r.d_inward):
            assert d == pytest.approx(0.3, abs=1e-12)
    assert any("outside B_1" in n for n in rep.notes)


def test_approximation_inside_unit_ball():
    rep = random_approximation(constant_operator(-0.5, 0.5, (-2.0, 2.0)), SMALL)
    assert rep.verdict
    assert all(r.d_pair == r.d_ball == r.d_inward == 0.0 for r in rep.rows)
    assert frame_violations(constant_operator(-0.5, 0.5, (-2.0, 2.0)), None) == []


def test_verify_pair_example2(ex2):
    rep = verify_pair(ex2.operator, ex2.omega, 1.0, 1.00005)
    assert rep.verdict
    for r in rep.rows:
        assert r.d_pair == pytest.approx(0.00005, abs=1e-12)
        assert max(abs(r.d_pair - r.d_ball), abs(r.d_ball - r.d_inward), abs(r.d_pair - r.d_inward)) <= 1e-12


def test_verify_pair_example1(ex1):
    rep = verify_pair(ex1.operator, ex1.omega, 0.00005)
    assert rep.verdict and len(rep.rows) == 67
    assert all(r.residual == 0.0 and r.d_pair == 0.0 for r in rep.rows)


def test_verify_pair_corrupted(ex2):
    rep = verify_pair(ex2.operator, ex2.omega, 0.5, 1.2)
    assert not rep.verdict
    bad = rep.first_failure()
    assert bad is not None and not bad.retraction_ok


def test_verify_pair_membership_failure_names_cell(ex1):
    rep = verify_pair(ex1.operator, ex1.omega, 0.9)
    assert not rep.verdict and rep.first_failure().unit.label == "cell[0]"


def test_verify_pair_per_unit_values(ex1):
    n = len(ex1.omega.units())
    rep = verify_pair(ex1.operator, ex1.omega, np.full(n, 0.00005))
    assert rep.verdict
    with pytest.raises(ValueError):
        verify_pair(ex1.operator, ex1.omega, np.zeros(n - 1))


# -- homotopy ------------------------------------------------------------------


def test_homotopy_example1(ex1):
    h = homotopy_random(ex1.operator, ex1.omega, IntervalUnion.interval(0, 1), 64)
    assert h.premise and h.diam == 1.0
    assert all(v.tolist() == [0.00005] for v in h.selection.values)
    assert h.selection.sup_residual == 0.0
    for u in h.units:
        assert all(g * n <= 1.0 for n, g in u.gaps)
        assert u.max_gap_times_n <= h.diam


def test_homotopy_constant_limit():
    h = homotopy_random(constant_operator(0.6, 0.6), SMALL, IntervalUnion.interval(0, 1), 32)
    assert all(v[0] == pytest.approx(0.6, abs=1e-15) for v in h.selection.values)


# -- boundary --------------------------------------------------------------------


def test_boundary_example2_direct(ex2):
    b = boundary_random(ex2.operator, ex2.omega)
    assert b.status == "fixed point" and b.selection is not None
    assert all(u.status == "fixed point" for u in b.units)


def test_boundary_ball_iv_inapplicable():
    b = boundary_random(ball_operator(), SMALL, ["iv"])
    assert b.status == "theorem inapplicable" and b.selection is None
    for u in b.units:
        assert [v.holds for v in u.verdicts] == [False]


def test_boundary_inward_values():
    T = constant_operator(-1.5, 0.8, (-2.0, 2.0))
    b = boundary_random(T, SMALL, ["iii"])
    assert b.status == "fixed point"


def test_random_selection_shape_check():
    with pytest.raises(ValueError):
        RandomSelection(SMALL, [np.zeros(1)], [0.0], True)
