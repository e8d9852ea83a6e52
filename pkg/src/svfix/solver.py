"""Per-omega engines: invariant compact sets, the shrinking-enlargement loop,
a brute-force oracle, the scaling homotopy and boundary-condition checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correspondence import (
    FixedPointSet,
    FrozenCorrespondence,
    RandomOperator,
    fixed_point_set,
    interval_bounds,
    range_envelope,
    residual,
    residuals_many,
)
from .errors import HypothesisError, NoFixedPointError
from .geometry import (
    TOL_BOUNDARY,
    IntervalUnion,
    ValueSet,
    bounding_box,
    inward_halfspace,
    is_subset,
    norm,
    ray_entry,
    set_distance,
    set_enlarge,
    set_intersect,
    vec,
)
from .noncompactness import diameter
from .selection import SelectionField, build_approximate_selection

STABLE_TOL = 1e-12


# ---------------------------------------------------------------------------
# invariant compact set
# ---------------------------------------------------------------------------


@dataclass
class InvariantSet:
    k: IntervalUnion
    verified: bool
    iterations: int


def find_invariant_compact(
    t: FrozenCorrespondence, c: ValueSet, n0: int, strict: bool = False, max_iter: int = 200
) -> InvariantSet:
    """Shrink K from C by K <- box(enlarge(T(K), 1/n0)) ∩ K until stable.

    The box hull equals the convex hull in 1-d and contains it in 2-d.
    ``verified`` records whether enlarge(T(K), 1/n0) ⊆ K holds at the end;
    with ``strict`` a failed check raises.
    """
    if not c.is_bounded():
        raise HypothesisError("C must be bounded (truncate it first)")
    k = bounding_box(c)
    r = 1.0 / n0
    it = 0
    for it in range(1, max_iter + 1):
        env = range_envelope(t.op, t.omega, k)
        nxt = set_intersect(bounding_box(set_enlarge(env, r)), k)
        if nxt.is_empty():
            raise HypothesisError("no invariant compact found")
        (olo, ohi), (nlo, nhi) = k.bounds(), nxt.bounds()
        k = nxt
        if np.max(np.abs(olo - nlo)) <= STABLE_TOL and np.max(np.abs(ohi - nhi)) <= STABLE_TOL:
            break
    env = range_envelope(t.op, t.omega, k)
    ok = is_subset(set_enlarge(env, r), k)
    if strict and not ok:
        raise HypothesisError("invariant compact check failed: enlarge(T(K), 1/n0) not inside K")
    return InvariantSet(k, ok, it)


# ---------------------------------------------------------------------------
# fixed-point loop
# ---------------------------------------------------------------------------


@dataclass
class TraceRow:
    n: int
    eps: float
    x: np.ndarray
    residual: float


@dataclass
class SolveReport:
    fixed_point: np.ndarray
    residual: float
    iterations: int
    epsilon_schedule: list[float]
    trace: list[TraceRow]
    k: IntervalUnion
    source: str
    candidates: list[tuple[np.ndarray, float, str]] = field(default_factory=list)


def epsilon_schedule(n0: int, n_max: int) -> list[float]:
    """eps_n = 1 / (n + n0 - 1) for n = 1..n_max."""
    return [1.0 / (n + n0 - 1) for n in range(1, n_max + 1)]


def _roots_1d(f: SelectionField) -> list[np.ndarray]:
    t = np.asarray(f.nodes)
    g = f.values[:, 0] - t
    roots = [t[i] for i in np.flatnonzero(g == 0.0)]
    s = np.flatnonzero(g[:-1] * g[1:] < 0)
    for i in s:
        roots.append(t[i] - g[i] * (t[i + 1] - t[i]) / (g[i + 1] - g[i]))
    return [np.array([float(r)]) for r in roots]


def _roots_2d(f: SelectionField, alpha: float = 0.5, steps: int = 2000) -> list[np.ndarray]:
    """Damped iteration x <- (1 - a) x + a f(x) from a 4 x 4 grid of starts."""
    lo, hi = f.k_lo, f.k_hi
    x = np.stack(np.meshgrid(*(np.linspace(lo[j], hi[j], 4) for j in range(2)), indexing="ij"), -1).reshape(-1, 2)
    for _ in range(steps):
        fx = np.clip(f.evaluate_many(x), lo, hi)
        if np.max(np.linalg.norm(fx - x, axis=1)) <= 1e-13:
            break
        x = (1 - alpha) * x + alpha * fx
    gap = np.linalg.norm(np.clip(f.evaluate_many(x), lo, hi) - x, axis=1)
    return [p for p, g in zip(x, gap) if g <= 1e-9]


def exact_candidates(t: FrozenCorrespondence, k: ValueSet | None = None, cell=None) -> list[np.ndarray]:
    """Smallest attained point of each component of the exact fixed-point set."""
    try:
        fps: FixedPointSet = fixed_point_set(t.op, t.omega, cell)
    except NotImplementedError:
        return []
    reps = fps.representatives()
    if k is not None:
        reps = [p for p in reps if k.distance(p) == 0.0]
    return reps


def _pick(cands: list[tuple[np.ndarray, float, str]]):
    return min(cands, key=lambda c: (c[1], tuple(c[0].tolist())))


def solve_fixed_point(
    t: FrozenCorrespondence,
    c: ValueSet,
    n0: int,
    tol: float = 1e-9,
    n_max: int = 256,
    cell=None,
    use_exact: bool = True,
) -> SolveReport:
    """Fixed point of T(omega, .) via eps_n-approximate selections on K.

    At step n a continuous selection f_n of the 1/(n + n0 - 1)-enlargement is
    built on the invariant compact K and a fixed point of f_n is located
    (exact linear roots in 1-d, damped iteration with 16 restarts in 2-d).
    The reported point is chosen, by smallest residual and then smallest
    coordinates, among the loop points and the components of the exact
    fixed-point set. Residuals are always recomputed.
    """
    inv = find_invariant_compact(t, c, n0)
    k = inv.k
    sched = []
    trace: list[TraceRow] = []
    cands: list[tuple[np.ndarray, float, str]] = []
    any_root = False
    for n, eps in enumerate(epsilon_schedule(n0, n_max), start=1):
        sched.append(eps)
        f = build_approximate_selection(t, k, eps)
        roots = _roots_1d(f) if t.op.dim == 1 else _roots_2d(f)
        if not roots:
            continue
        any_root = True
        res = residuals_many(t.op, t.omega, np.asarray(roots))
        best = min(zip(res, roots), key=lambda p: (p[0], tuple(p[1].tolist())))
        trace.append(TraceRow(n, eps, best[1], float(best[0])))
        cands.append((best[1], float(best[0]), "selection loop"))
        if best[0] <= tol:
            break
    if use_exact:
        for p in exact_candidates(t, k, cell):
            cands.append((p, residual(t.op, t.omega, p), "exact fixed set"))
    if not cands:
        raise NoFixedPointError("Brouwer step failed" if not any_root else "no fixed point within tolerance")
    x, r, src = _pick(cands)
    r = residual(t.op, t.omega, x)
    if r > tol:
        raise NoFixedPointError(f"no fixed point within tolerance (best residual {r:.3g} at x={x.tolist()})")
    return SolveReport(x, r, len(sched), sched, trace, k, src, cands)


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleResult:
    points: np.ndarray
    min_residual: float
    grid_size: int

    def nearest(self, x) -> float:
        """Distance from ``x`` to the closest reported minimum."""
        return float(np.min(np.linalg.norm(self.points - vec(x), axis=1)))


def _signed_gap(t: FrozenCorrespondence, xs: np.ndarray) -> np.ndarray:
    lo, hi = interval_bounds(t.op, t.omega, xs)
    return (xs - np.clip(xs, lo, hi))[:, 0]


def oracle_scan(t: FrozenCorrespondence, k: ValueSet, resolution: float = 1e-4, tol: float = 1e-12) -> OracleResult:
    """Brute-force residual scan of K; returns every point within tol of the minimum.

    The 1-d grid is the uniform grid plus piece breakpoints and omega; where
    the signed gap x - proj_T(x)(x) changes sign between neighbours the root
    is bisected and added, so isolated crossings between grid points are
    not missed.
    """
    lo, hi = k.bounds()
    T = t.op
    if T.dim == 1:
        n = int(math.floor((hi[0] - lo[0]) / resolution + 1e-9)) + 1
        pts = lo[0] + resolution * np.arange(n)
        extra = [v for v in T.breakpoints() if lo[0] <= v <= hi[0]]
        if t.omega is not None and lo[0] <= t.omega <= hi[0]:
            extra.append(float(t.omega))
        xs = np.unique(np.concatenate([pts, [hi[0]], extra]))[:, None]
        if T.is_interval_valued():
            s = _signed_gap(t, xs)
            idx = np.flatnonzero(s[:-1] * s[1:] < 0)
            refined = []
            for i in idx:
                a, b = xs[i, 0], xs[i + 1, 0]
                sa = s[i]
                for _ in range(80):
                    m = 0.5 * (a + b)
                    sm = _signed_gap(t, np.array([[m]]))[0]
                    if sm == 0.0:
                        a = b = m
                        break
                    if (sm < 0) == (sa < 0):
                        a, sa = m, sm
                    else:
                        b = m
                refined.append(0.5 * (a + b))
            if refined:
                xs = np.unique(np.concatenate([xs[:, 0], refined]))[:, None]
    else:
        axes = [np.linspace(lo[j], hi[j], int(math.floor((hi[j] - lo[j]) / resolution + 1e-9)) + 1) for j in range(2)]
        xs = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    res = residuals_many(T, t.omega, xs)
    m = float(np.min(res))
    return OracleResult(xs[res <= m + tol], m, len(xs))


# ---------------------------------------------------------------------------
# homotopy
# ---------------------------------------------------------------------------


@dataclass
class HomotopyStep:
    n: int
    xi: np.ndarray
    eta: np.ndarray
    gap: float
    membership: float  # d(eta, T(xi)), zero up to rounding


def homotopy_solve(t: FrozenCorrespondence, c: ValueSet, n_steps: int, cell=None, tol: float = 1e-9) -> list[HomotopyStep]:
    """Solve xi_n in (1 - 1/n) T(xi_n) for n = 2..N; eta_n = xi_n / (1 - 1/n).

    Each scaled problem is solved on its exact fixed-point set restricted
    to C with the usual tie-break.
    """
    T = t.op.restricted(c) if t.op.dim == 1 else t.op
    diam = diameter(c)
    out = []
    for n in range(2, n_steps + 1):
        lam = 1.0 - 1.0 / n
        sc = FrozenCorrespondence(T.scaled(lam), t.omega)
        reps = exact_candidates(sc, c, cell)
        if not reps:
            raise NoFixedPointError(f"scaled solve failed at n={n}")
        cands = [(p, residual(sc.op, sc.omega, p), "exact") for p in reps]
        xi, r, _ = _pick(cands)
        if r > tol:
            raise NoFixedPointError(f"scaled solve failed at n={n} (residual {r:.3g})")
        eta = xi / lam
        gap = norm(xi - eta)
        mem = set_distance(eta, t.evaluate(xi))
        if gap > diam / n * (1 + 1e-12):
            raise NoFixedPointError(f"gap bound violated at n={n}")
        out.append(HomotopyStep(n, xi, eta, gap, mem))
    return out


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

GAMMA_GRID = 64.0 ** (np.arange(1, 257) / 256)
BETA_GRID = np.linspace(0.0, 1.0, 258)[1:-1]
CONDITIONS = ("i", "ii", "iii", "iv", "v", "vi")


@dataclass
class BoundaryVerdict:
    condition: str
    holds: bool
    witness: dict = field(default_factory=dict)


def _samples(values) -> tuple[np.ndarray, ValueSet | None]:
    if isinstance(values, ValueSet):
        return values.sample(64), values
    ys = np.asarray(values, dtype=float)
    return ys.reshape(len(ys), -1), None


def check_boundary_condition(cond: str, x, values, tol: float = TOL_BOUNDARY) -> BoundaryVerdict:
    """Evaluate one boundary condition at x on the unit sphere.

    ``values`` is the value set T(omega, x) (sampled at its extreme points
    plus 64 interior points) or an explicit array of samples. Condition iii
    uses the support function of the whole set when a set is given.
    """
    x = vec(x)
    if abs(norm(x) - 1.0) > tol:
        raise ValueError(f"x={x.tolist()} is not on the unit sphere")
    if cond not in CONDITIONS:
        raise ValueError(f"unknown condition {cond!r}")
    ys, s = _samples(values)
    h = inward_halfspace(x)
    xx = float(x @ x)

    if cond == "i":
        for y in ys:
            dz, dx = h.distance(y), norm(y - x)
            if not dz < dx:
                return BoundaryVerdict(cond, False, {"y": y.tolist(), "d_inward": dz, "d_x": dx})
        return BoundaryVerdict(cond, True, {"checked": len(ys)})
    if cond == "ii":
        # (1 - lam) <y - x, x> <= 0 with 1 - lam > 0: any |lam| < 1 works iff y is in H
        for y in ys:
            if float(y @ x) > xx:
                return BoundaryVerdict(cond, False, {"y": y.tolist(), "lambda_interval": None})
        return BoundaryVerdict(cond, True, {"lambda": 0.0, "lambda_interval": [-1.0, 1.0]})
    if cond == "iii":
        sup = s.support(x) if s is not None else float(np.max(ys @ x))
        if sup <= xx:
            return BoundaryVerdict(cond, True, {"support": sup})
        worst = ys[int(np.argmax(ys @ x))]
        return BoundaryVerdict(cond, False, {"support": sup, "y": worst.tolist()})
    if cond == "iv":
        if s is not None:
            tt = ray_entry(np.zeros_like(x), x, s, 1.0)
            if tt is not None and tt == 1.0:
                tt = ray_entry(np.zeros_like(x), x, s, 1.0 + 1e-9)
            if tt is None:
                return BoundaryVerdict(cond, True, {})
            return BoundaryVerdict(cond, False, {"mu": float(tt), "lambda": 1.0 / float(tt), "y": (tt * x).tolist()})
        for y in ys:
            mu = float(y @ x) / xx
            if mu > 1.0 and norm(y - mu * x) <= 1e-12:
                return BoundaryVerdict(cond, False, {"mu": mu, "lambda": 1.0 / mu, "y": y.tolist()})
        return BoundaryVerdict(cond, True, {})
    grid = GAMMA_GRID if cond == "v" else BETA_GRID
    found = []
    for y in ys:
        ny, dy = norm(y), norm(y - x)
        with np.errstate(over="ignore", invalid="ignore"):
            lhs = ny**grid - 1.0
            rhs = dy**grid
        ok = lhs <= rhs if cond == "v" else lhs >= rhs
        if not np.any(ok):
            return BoundaryVerdict(cond, False, {"y": y.tolist()})
        found.append(float(grid[int(np.argmax(ok))]))
    key = "gamma" if cond == "v" else "beta"
    return BoundaryVerdict(cond, True, {key: found})
