"""The omega layer: per-cell solves on a finite partition of Omega.

Selections are constant on every cell and atom, so they are simple
functions and measurable with respect to the partition by construction.

The operator depends on omega only through the diagonal x == omega, so the
values at a point x are the same for every omega != x. That makes the
worst residual over a whole cell exact: the off-diagonal residual, plus the
diagonal residual when x itself lies in the cell.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .correspondence import (
    FrozenCorrespondence,
    OmegaPartition,
    OmegaUnit,
    RandomOperator,
    certify_continuity,
    certify_inverse_closed,
    evaluate,
    find_n0,
    fixed_point_set,
    residual,
)
from .errors import HypothesisError, NoFixedPointError
from .geometry import (
    IntervalUnion,
    UnitBallFrame,
    ValueSet,
    inward_distance,
    norm,
    radial_retraction,
    ray_entry,
    set_distance,
    set_intersect,
    vec,
)
from .noncompactness import diameter
from .solver import BoundaryVerdict, check_boundary_condition, homotopy_solve, oracle_scan, solve_fixed_point

MEASURABILITY = "simple function on the omega partition"


def worker_count() -> int:
    env = os.environ.get("SVFIX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def _map(fn: Callable, items: Sequence):
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(u) for u in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# exact per-unit quantities
# ---------------------------------------------------------------------------


def _off_diagonal_omega(T: RandomOperator, x: np.ndarray, unit: OmegaUnit) -> float | None:
    """Some omega in the unit different from x[0], or None for an atom at x."""
    if unit.kind == "atom":
        return None if unit.lo == float(x[0]) else unit.lo
    for w in (unit.lo, unit.hi, unit.representative):
        if w != float(x[0]):
            return w
    return None


def unit_values(T: RandomOperator, unit: OmegaUnit, x) -> list[ValueSet]:
    """The distinct values T(omega, x) as omega ranges over the unit."""
    x = vec(x)
    if not T.diagonal:
        return [evaluate(T, None, x)]
    out = []
    w = _off_diagonal_omega(T, x, unit)
    if w is not None:
        out.append(evaluate(T, w, x))
    if unit.lo <= float(x[0]) <= unit.hi:
        out.append(evaluate(T, float(x[0]), x))
    return out


def unit_residual(T: RandomOperator, unit: OmegaUnit, x) -> float:
    """sup over omega in the (closed) unit of d(x, T(omega, x))."""
    x = vec(x)
    return max(set_distance(x, v) for v in unit_values(T, unit, x))


def unit_fixed_set(T: RandomOperator, unit: OmegaUnit):
    if not T.diagonal:
        return fixed_point_set(T)
    if unit.kind == "atom":
        return fixed_point_set(T, unit.lo)
    return fixed_point_set(T, cell=(unit.lo, unit.hi))


# ---------------------------------------------------------------------------
# selections
# ---------------------------------------------------------------------------


@dataclass
class RandomSelection:
    partition: OmegaPartition
    values: list[np.ndarray]
    residuals: list[float]
    uniform: bool
    measurability: str = MEASURABILITY
    hypotheses: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.partition.units()):
            raise ValueError("one value per cell and atom is required")

    @property
    def units(self) -> list[OmegaUnit]:
        return self.partition.units()

    @property
    def sup_residual(self) -> float:
        return max(self.residuals)

    def value_at(self, omega: float) -> np.ndarray:
        """Atoms take precedence over the cell containing them."""
        for j, w in enumerate(self.partition.atoms):
            if omega == w:
                return self.values[self.partition.n_cells + j]
        return self.values[self.partition.cell_of(omega)]

    def is_simple(self) -> bool:
        return all(v.shape == self.values[0].shape for v in self.values)

    @classmethod
    def constant(cls, partition: OmegaPartition, x, residuals: Sequence[float] | None = None) -> "RandomSelection":
        x = vec(x)
        n = len(partition.units())
        return cls(partition, [x.copy() for _ in range(n)], list(residuals or [0.0] * n), True)


def _f_nonempty(T: RandomOperator, unit: OmegaUnit, c: ValueSet, tol: float) -> bool:
    try:
        fps = unit_fixed_set(T, unit)
        reps = [p for p in fps.representatives() if c.distance(p) == 0.0]
        if fps.spans is not None:
            inside = set_intersect(IntervalUnion.from_spans(s.closure() for s in fps.spans), c) if fps.spans else None
            return bool(reps) or (inside is not None and not inside.is_empty())
        return bool(reps)
    except NotImplementedError:
        o = oracle_scan(FrozenCorrespondence(T, unit.representative if T.diagonal else None), c, 1e-3)
        return o.min_residual <= max(tol, 1e-3)


def certify_hypotheses(T: RandomOperator, partition: OmegaPartition, c: ValueSet, grid: int = 513) -> dict:
    """n0 plus continuity and inverse-closedness certificates per representative."""
    reps = [u.representative if T.diagonal else None for u in partition.units()]
    n0 = find_n0(T, c, reps if T.diagonal else [None])
    eps = 1.0 / n0
    out = {"n0": n0, "alsc": {}, "inverse_closed": {}}
    uniq = list(dict.fromkeys(reps))

    def one(w):
        al = certify_continuity(T, w, "alsc", eps, grid=grid).verdict if T.is_interval_valued() else "inconclusive"
        ic = certify_inverse_closed(T, w).verdict if T.dim == 1 else "inconclusive"
        return w, al, ic

    for w, al, ic in _map(one, uniq):
        key = "none" if w is None else repr(w)
        out["alsc"][key] = al
        out["inverse_closed"][key] = ic
    refuted = [k for k, v in out["alsc"].items() if v == "refuted"] + [
        k for k, v in out["inverse_closed"].items() if v == "refuted"
    ]
    out["refuted_at"] = refuted
    return out


def random_solve(
    T: RandomOperator,
    partition: OmegaPartition,
    c: ValueSet,
    tol: float = 1e-9,
    n_max: int = 256,
    check_hypotheses: bool = True,
) -> RandomSelection:
    """Random fixed point as a simple function on the partition.

    Every unit is solved with the selection loop; then a single point valid
    on every unit is preferred (checked with exact per-unit residuals),
    otherwise the per-unit points are used.
    """
    units = partition.units()
    for u in units:
        if not _f_nonempty(T, u, c, tol):
            raise NoFixedPointError(f"F(ω) empty at cell {u.index}" if u.kind == "cell" else f"F(ω) empty at atom {u.index}")
    hyp = certify_hypotheses(T, partition, c) if check_hypotheses else {"n0": find_n0(T, c, [u.representative if T.diagonal else None for u in units])}
    if hyp.get("refuted_at"):
        raise HypothesisError(f"hypothesis refuted at omega {hyp['refuted_at'][0]}")
    n0 = hyp["n0"]

    def solve_unit(u: OmegaUnit):
        w = u.representative if T.diagonal else None
        cell = (u.lo, u.hi) if (T.diagonal and u.kind == "cell") else None
        rep = solve_fixed_point(FrozenCorrespondence(T, w), c, n0, tol, n_max, cell=cell)
        scored = [(unit_residual(T, u, p), tuple(p.tolist()), p) for p, _, _ in rep.candidates]
        return rep, min(scored, key=lambda s: (s[0], s[1]))

    if T.diagonal:
        results = _map(solve_unit, units)
    else:
        one = solve_unit(units[0])
        results = [one] * len(units)

    pool = {tuple(s[2].tolist()): s[2] for _, s in results}
    best = None
    for key, p in sorted(pool.items()):
        worst = max(unit_residual(T, u, p) for u in units)
        if worst <= tol and (best is None or (worst, key) < best[:2]):
            best = (worst, key, p)
    if best is not None:
        x = best[2]
        sel = RandomSelection.constant(partition, x, [unit_residual(T, u, x) for u in units])
    else:
        vals, res = [], []
        for u, (_, s) in zip(units, results):
            if s[0] > tol:
                raise NoFixedPointError(f"F(ω) empty at cell {u.index}")
            vals.append(s[2])
            res.append(s[0])
        sel = RandomSelection(partition, vals, res, False)
    sel.hypotheses = hyp
    sel.notes.append(f"loop iterations per unit: max {max(r.iterations for r, _ in results)}")
    if sel.sup_residual > tol:
        raise NoFixedPointError(f"sup residual {sel.sup_residual:.3g} exceeds tol")
    return sel


# ---------------------------------------------------------------------------
# approximation pairs
# ---------------------------------------------------------------------------


@dataclass
class PairRow:
    unit: OmegaUnit
    xi: np.ndarray
    eta: np.ndarray
    membership: float
    residual: float
    retraction_ok: bool
    d_pair: float
    d_ball: float
    d_inward: float
    ok: bool


@dataclass
class ApproximationReport:
    rows: list[PairRow]
    xi: RandomSelection | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return all(r.ok for r in self.rows)

    def first_failure(self) -> PairRow | None:
        return next((r for r in self.rows if not r.ok), None)


def _inner_ball(frame: UnitBallFrame | None, dim: int) -> ValueSet:
    return (frame or UnitBallFrame()).inner(dim)


def _pair_row(T: RandomOperator, u: OmegaUnit, xi, eta, tol: float, frame) -> PairRow:
    xi, eta = vec(xi), vec(eta)
    vals = unit_values(T, u, xi)
    mem = max(set_distance(eta, v) for v in vals)
    res = max(set_distance(xi, v) for v in vals)
    retr = bool(norm(radial_retraction(eta) - xi) <= 1e-12)
    d_pair = norm(eta - xi)
    d_ball = set_distance(eta, _inner_ball(frame, T.dim))
    try:
        d_in = inward_distance(eta, xi)
    except ValueError:
        d_in = math.inf
    eq = abs(d_pair - d_ball) <= 1e-9 and abs(d_ball - d_in) <= 1e-9
    ok = mem <= tol and retr and eq
    return PairRow(u, xi, eta, mem, res, retr, d_pair, d_ball, d_in, ok)


def verify_pair(
    T: RandomOperator,
    partition: OmegaPartition,
    xi,
    eta=None,
    tol: float = 1e-12,
    frame: UnitBallFrame | None = None,
) -> ApproximationReport:
    """Recompute membership, retraction relation and the three distances.

    ``xi`` and ``eta`` are constants or one value per unit; ``eta`` defaults
    to ``xi`` (checking a random fixed point).
    """
    units = partition.units()

    def per_unit(v):
        if isinstance(v, RandomSelection):
            return v.values
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 0 or (arr.ndim == 1 and arr.size == T.dim):
            return [vec(arr)] * len(units)
        if len(arr) != len(units):
            raise ValueError("need a constant or one value per unit")
        return [vec(a) for a in arr]

    xs = per_unit(xi)
    es = per_unit(eta if eta is not None else xi)
    rows = [_pair_row(T, u, x, e, tol, frame) for u, x, e in zip(units, xs, es)]
    sel = RandomSelection(partition, xs, [r.residual for r in rows], all(np.array_equal(xs[0], x) for x in xs))
    return ApproximationReport(rows, sel)


def frame_violations(T: RandomOperator, frame: UnitBallFrame | None, samples: int = 65) -> list[str]:
    """Values whose centre lies outside B_1 (outside the admissible ball family)."""
    frame = frame or UnitBallFrame()
    lo, hi = T.domain.bounds()
    out = []
    pts = [np.array([x]) for x in np.linspace(lo[0], hi[0], samples)] if T.dim == 1 else []
    pts += [np.array([b]) for b in T.breakpoints()] if T.dim == 1 else []
    sets = [T.base_value(p) for p in pts]
    if T.default is not None:
        sets.append(T.default)
    for s in sets:
        if not s.is_bounded():
            continue
        a, b = s.bounds()
        centre = 0.5 * (a + b)
        if norm(centre) > frame.radius_inner + 1e-12:
            out.append(f"value {s} has centre {centre.tolist()} outside B_1")
    return sorted(set(out))


def _eta_on_fiber(xi: np.ndarray, s: ValueSet) -> np.ndarray | None:
    if norm(xi) < 1.0:
        return xi.copy() if s.distance(xi) == 0.0 else None
    t = ray_entry(xi, xi, s, 0.0)
    return None if t is None else (1.0 + t) * xi


def random_approximation(
    T: RandomOperator,
    partition: OmegaPartition,
    tol: float = 1e-9,
    frame: UnitBallFrame | None = None,
    n_max: int = 256,
) -> ApproximationReport:
    """Solve xi in r(T(omega, xi)) on B_2, then recover eta on the retraction fiber.

    eta is the point of the value set on the fiber r^-1(xi) closest to xi,
    intersected over the whole unit so it serves every omega in it.
    """
    frame = frame or T.frame or UnitBallFrame()
    notes = [f"frame: {v}" for v in frame_violations(T, frame)]
    G = T.restricted(frame.outer(T.dim)).retracted()
    sel = random_solve(G, partition, frame.outer(T.dim), tol, n_max)
    etas = []
    for u, x in zip(partition.units(), sel.values):
        vals = unit_values(T, u, x)
        common = vals[0]
        for v in vals[1:]:
            common = set_intersect(common, v)
        eta = None if common.is_empty() else _eta_on_fiber(x, common)
        if eta is None:
            raise NoFixedPointError(f"retraction fiber miss at {u.label}")
        etas.append(eta)
    rep = verify_pair(T, partition, sel, etas, tol=tol, frame=frame)
    rep.xi = sel
    rep.notes = notes
    return rep


# ---------------------------------------------------------------------------
# homotopy limit
# ---------------------------------------------------------------------------


@dataclass
class HomotopyUnit:
    unit: OmegaUnit
    gaps: list[tuple[int, float]]
    premise: bool
    max_gap_times_n: float
    limit: np.ndarray
    residual: float
    cauchy: bool
    source: str


@dataclass
class HomotopyReport:
    selection: RandomSelection
    units: list[HomotopyUnit]
    diam: float

    @property
    def premise(self) -> bool:
        return all(u.premise for u in self.units)


def _limit(T, u, steps, diam, tol):
    n_final = steps[-1].n
    tail = [s for s in steps if s.n >= max(2, n_final // 2)]
    xs = np.array([s.xi for s in tail])
    osc = float(np.max(np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=2)))
    cauchy_tol = max(tol, diam / n_final)
    cands = [(steps[-1].xi, "xi_N"), (steps[-1].eta, "eta_N")]
    half = next((s for s in steps if s.n == n_final // 2), None)
    if half is not None:
        cands.append((2 * steps[-1].xi - half.xi, "extrapolated"))
    if osc > cauchy_tol:
        # compactness gives a convergent subsequence: take the best residuals
        scored = sorted(steps, key=lambda s: unit_residual(T, u, s.xi))[: max(2, len(steps) // 4)]
        sub = np.array([s.xi for s in scored])
        if float(np.max(np.linalg.norm(sub[:, None, :] - sub[None, :, :], axis=2))) > cauchy_tol:
            raise NoFixedPointError(f"no convergent subsequence found at N={n_final}")
        cands = [(s.xi, "subsequence") for s in scored] + [(s.eta, "subsequence") for s in scored]
    lo, hi = T.domain.bounds()
    scored = []
    for p, src in cands:
        if np.all(p >= lo) and np.all(p <= hi):
            scored.append((unit_residual(T, u, p), tuple(p.tolist()), p, src))
    r, _, p, src = min(scored, key=lambda s: (s[0], s[1]))
    return p, r, osc <= cauchy_tol, src


def homotopy_random(
    T: RandomOperator, partition: OmegaPartition, c: ValueSet, n_steps: int = 64, tol: float = 1e-9
) -> HomotopyReport:
    """Run the scaling homotopy on every unit and extract the limits."""
    diam = diameter(c)
    units = partition.units()

    def run(u: OmegaUnit) -> HomotopyUnit:
        w = u.representative if T.diagonal else None
        cell = (u.lo, u.hi) if (T.diagonal and u.kind == "cell") else None
        steps = homotopy_solve(FrozenCorrespondence(T, w), c, n_steps, cell=cell, tol=tol)
        gaps = [(s.n, s.gap) for s in steps]
        m = max(g * n for n, g in gaps)
        limit, r, cauchy, src = _limit(T, u, steps, diam, tol)
        if r > tol:
            raise NoFixedPointError(f"homotopy limit residual {r:.3g} exceeds tol at {u.label}")
        return HomotopyUnit(u, gaps, m <= diam * (1 + 1e-12), m, limit, r, cauchy, src)

    res = _map(run, units) if T.diagonal else [run(units[0])] * len(units)
    vals = [h.limit for h in res]
    uniform = all(np.array_equal(vals[0], v) for v in vals)
    sel = RandomSelection(partition, vals, [unit_residual(T, u, v) for u, v in zip(units, vals)], uniform)
    return HomotopyReport(sel, res, diam)


# ---------------------------------------------------------------------------
# boundary pipeline
# ---------------------------------------------------------------------------


@dataclass
class BoundaryUnit:
    unit: OmegaUnit
    status: str  # "fixed point", "fixed point (condition)", "theorem inapplicable"
    verdicts: list[BoundaryVerdict] = field(default_factory=list)


@dataclass
class BoundaryReport:
    approximation: ApproximationReport
    units: list[BoundaryUnit]
    selection: RandomSelection | None

    @property
    def status(self) -> str:
        if any(u.status == "theorem inapplicable" for u in self.units):
            return "theorem inapplicable"
        return "fixed point"


def boundary_random(
    T: RandomOperator,
    partition: OmegaPartition,
    conditions: Iterable[str] = ("i", "ii", "iii", "iv", "v", "vi"),
    tol: float = 1e-9,
    frame: UnitBallFrame | None = None,
    retries: int = 4,
) -> BoundaryReport:
    """Certify a random fixed point through the approximation pair.

    Units with d_inward <= tol are fixed already. Elsewhere the declared
    conditions are evaluated at xi; if one holds the pair cannot be
    non-fixed, so the approximation is re-run with a tighter tolerance.
    """
    conditions = list(conditions)
    approx = random_approximation(T, partition, tol, frame)
    out = []
    for attempt in range(retries + 1):
        out = []
        redo = False
        for row in approx.rows:
            if row.d_inward <= tol and row.residual <= tol:
                out.append(BoundaryUnit(row.unit, "fixed point"))
                continue
            vals = unit_values(T, row.unit, row.xi)
            verdicts = [check_boundary_condition(c, row.xi, v) for c in conditions for v in vals]
            held = any(v.holds for v in verdicts)
            if held:
                redo = True
                out.append(BoundaryUnit(row.unit, "fixed point (condition)", verdicts))
            else:
                out.append(BoundaryUnit(row.unit, "theorem inapplicable", verdicts))
        if not redo:
            break
        if attempt == retries:
            raise NoFixedPointError("a boundary condition holds but the pair is not a fixed point")
        approx = random_approximation(T, partition, tol / 10 ** (attempt + 1), frame)
    sel = None
    if all(u.status != "theorem inapplicable" for u in out):
        sel = approx.xi
    return BoundaryReport(approx, out, sel)
