"""Continuous eps-approximate selections from a hat-function partition of unity.

Each node t_i owns the relatively open cell (t_{i-1}, t_{i+1}) ∩ K. Its value
is the midpoint of the exact intersection of the eps-enlarged values over
that cell, which for box values is [sup lo - eps, inf hi + eps] per axis;
its midpoint (sup lo + inf hi) / 2 does not depend on eps.
Piecewise-linear interpolation of node values is then the partition-of-unity
sum, and convexity of the values keeps every interpolant within eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correspondence import FrozenCorrespondence, interval_bounds, neighborhood_envelopes
from .errors import SelectionError
from .geometry import ValueSet, vec

MAX_DEPTH = 20
MAX_AXIS_NODES_2D = 1025


@dataclass(frozen=True)
class SelectionField:
    """Nodes, node values and the eps the field was built for.

    1-d: ``nodes`` has shape (m,), ``values`` (m, 1). 2-d: ``nodes`` is a pair
    of axis grids and ``values`` has shape (nx, ny, 2).
    """

    nodes: tuple
    values: np.ndarray
    eps: float
    k_lo: np.ndarray
    k_hi: np.ndarray
    depth: int = 0

    @property
    def dim(self) -> int:
        return len(self.k_lo)

    @property
    def h(self) -> float:
        """Smallest node spacing."""
        return float(min(np.min(np.diff(ax)) if len(ax) > 1 else math.inf for ax in self._axes()))

    def _axes(self):
        return [np.asarray(self.nodes)] if self.dim == 1 else [np.asarray(ax) for ax in self.nodes]

    def _check(self, x: np.ndarray) -> None:
        if np.any(x < self.k_lo) or np.any(x > self.k_hi):
            raise ValueError(f"x={x.tolist()} outside the compact set of the field")

    def weights(self, x) -> np.ndarray:
        """Hat-function weights at ``x`` (flattened over nodes)."""
        x = vec(x)
        self._check(x)
        per_axis = []
        for k, ax in enumerate(self._axes()):
            w = np.zeros(len(ax))
            if len(ax) == 1:
                w[0] = 1.0
            else:
                j = int(np.clip(np.searchsorted(ax, x[k], side="right") - 1, 0, len(ax) - 2))
                t = (x[k] - ax[j]) / (ax[j + 1] - ax[j])
                w[j], w[j + 1] = 1.0 - t, t
            per_axis.append(w)
        if self.dim == 1:
            return per_axis[0]
        return np.outer(per_axis[0], per_axis[1]).ravel()

    def __call__(self, x) -> np.ndarray:
        return evaluate_selection(self, x)

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.dim)
        if np.any(xs < self.k_lo) or np.any(xs > self.k_hi):
            raise ValueError("points outside the compact set of the field")
        if self.dim == 1:
            ax = np.asarray(self.nodes)
            if len(ax) == 1:
                return np.repeat(self.values[:1], len(xs), axis=0)
            return np.interp(xs[:, 0], ax, self.values[:, 0])[:, None]
        return _bilinear(self.nodes[0], self.nodes[1], self.values, xs)

    def lipschitz_bound(self) -> float:
        if self.dim == 1:
            ax = np.asarray(self.nodes)
            if len(ax) < 2:
                return 0.0
            return float(np.max(np.abs(np.diff(self.values[:, 0])) / np.diff(ax)))
        gx = np.abs(np.diff(self.values, axis=0)) / np.diff(self.nodes[0])[:, None, None]
        gy = np.abs(np.diff(self.values, axis=1)) / np.diff(self.nodes[1])[None, :, None]
        return float(max(gx.max(initial=0.0), gy.max(initial=0.0)) * math.sqrt(2))

    def node_values(self) -> np.ndarray:
        return self.values.reshape(-1, self.dim)


def _axis_weights(ax: np.ndarray, v: np.ndarray):
    ax = np.asarray(ax)
    if len(ax) == 1:
        z = np.zeros(len(v), dtype=int)
        return z, z, np.zeros(len(v))
    j = np.clip(np.searchsorted(ax, v, side="right") - 1, 0, len(ax) - 2)
    return j, j + 1, (v - ax[j]) / (ax[j + 1] - ax[j])


def _bilinear(ax, ay, values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    i0, i1, tx = _axis_weights(ax, xs[:, 0])
    j0, j1, ty = _axis_weights(ay, xs[:, 1])
    tx, ty = tx[:, None], ty[:, None]
    return (
        (1 - tx) * (1 - ty) * values[i0, j0]
        + tx * (1 - ty) * values[i1, j0]
        + (1 - tx) * ty * values[i0, j1]
        + tx * ty * values[i1, j1]
    )


def evaluate_selection(f: SelectionField, x) -> np.ndarray:
    """Sum of hat weights times node values."""
    x = vec(x)
    f._check(x)
    return f.node_values().T @ f.weights(x)


def _box_bounds(k: ValueSet):
    lo, hi = k.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("K must be compact")
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def _cell_windows(ax: np.ndarray):
    """Open cells (t_{i-1}, t_{i+1}); the end cells reach past K."""
    left = np.concatenate([[ax[0] - 1.0], ax[:-1]])
    right = np.concatenate([ax[1:], [ax[-1] + 1.0]])
    if len(ax) == 1:
        left, right = ax - 1.0, ax + 1.0
    return left, right


def _node_intervals(t: FrozenCorrespondence, axes, k_lo, k_hi):
    """sup of lower and inf of upper envelopes over each node's cell (unenlarged)."""
    if len(axes) == 1:
        a, b = _cell_windows(axes[0])
        return neighborhood_envelopes(t.op, t.omega, a[:, None], b[:, None], within=(k_lo, k_hi))
    (ax, ay) = axes
    la, ra = _cell_windows(ax)
    lb, rb = _cell_windows(ay)
    A = np.stack(np.meshgrid(la, lb, indexing="ij"), axis=-1).reshape(-1, 2)
    B = np.stack(np.meshgrid(ra, rb, indexing="ij"), axis=-1).reshape(-1, 2)
    return neighborhood_envelopes(t.op, t.omega, A, B, within=(k_lo, k_hi))


def build_approximate_selection(
    t: FrozenCorrespondence,
    k: ValueSet,
    eps: float,
    initial_nodes: int = 17,
    max_depth: int = MAX_DEPTH,
) -> SelectionField:
    """Build an eps-approximate continuous selection of ``t`` on the box ``k``.

    Where a node's cell intersection is empty, the neighbouring gaps are split
    (1-d) or the whole grid is halved (2-d), up to ``max_depth`` times.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    T = t.op
    if not T.is_convex_valued():
        raise SelectionError("approximate selection requires convex values")
    if not T.is_interval_valued():
        raise SelectionError("approximate selection needs box-valued pieces")
    k_lo, k_hi = _box_bounds(k)
    d = T.dim
    slack = eps / math.sqrt(d)
    bps = np.asarray(T.breakpoints(), dtype=float)
    axes = []
    for j in range(d):
        base = np.linspace(k_lo[j], k_hi[j], initial_nodes) if k_hi[j] > k_lo[j] else np.array([k_lo[j]])
        extra = bps[(bps > k_lo[j]) & (bps < k_hi[j])] if d == 1 else np.array([])
        axes.append(np.unique(np.concatenate([base, extra])))

    depth = 0
    while True:
        lo, hi = _node_intervals(t, axes, k_lo, k_hi)
        empty = np.any(lo - slack > hi + slack, axis=1)
        if not np.any(empty):
            break
        if depth >= max_depth:
            bad = int(np.argmax(empty))
            if d == 1:
                x_star = [float(axes[0][bad])]
            else:
                i, j = np.unravel_index(bad, (len(axes[0]), len(axes[1])))
                x_star = [float(axes[0][i]), float(axes[1][j])]
            raise SelectionError(f"a.l.s.c. modulus too coarse at x*={x_star}")
        depth += 1
        if d == 1:
            ax = axes[0]
            idx = np.flatnonzero(empty)
            new = []
            for i in idx:
                if i > 0:
                    new.append(0.5 * (ax[i - 1] + ax[i]))
                if i < len(ax) - 1:
                    new.append(0.5 * (ax[i] + ax[i + 1]))
            axes = [np.unique(np.concatenate([ax, new]))]
        else:
            axes = [np.unique(np.concatenate([ax, 0.5 * (ax[:-1] + ax[1:])])) for ax in axes]
            if max(len(ax) for ax in axes) > MAX_AXIS_NODES_2D:
                depth = max_depth
    values = 0.5 * (lo + hi)
    if d == 1:
        return SelectionField(tuple(axes[0].tolist()), values.reshape(-1, 1), eps, k_lo, k_hi, depth)
    shape = (len(axes[0]), len(axes[1]), 2)
    return SelectionField((axes[0], axes[1]), values.reshape(shape), eps, k_lo, k_hi, depth)


def refine(f: SelectionField, t: FrozenCorrespondence) -> SelectionField:
    """Halve every node gap and recompute node values on the finer cells."""
    axes = [np.unique(np.concatenate([ax, 0.5 * (ax[:-1] + ax[1:])])) for ax in f._axes()]
    slack = f.eps / math.sqrt(f.dim)
    lo, hi = _node_intervals(t, axes, f.k_lo, f.k_hi)
    if np.any(lo - slack > hi + slack):
        raise SelectionError("refinement produced an empty node intersection")
    values = 0.5 * (lo + hi)
    if f.dim == 1:
        return SelectionField(tuple(axes[0].tolist()), values.reshape(-1, 1), f.eps, f.k_lo, f.k_hi, f.depth + 1)
    shape = (len(axes[0]), len(axes[1]), 2)
    return SelectionField((axes[0], axes[1]), values.reshape(shape), f.eps, f.k_lo, f.k_hi, f.depth + 1)


def verification_grid(f: SelectionField, n: int | None = None) -> np.ndarray:
    """Uniform grid over K: 10^4 points in 1-d, 256 x 256 in 2-d by default."""
    if f.dim == 1:
        return np.linspace(f.k_lo[0], f.k_hi[0], n or 10_000)[:, None]
    side = n or 256
    g = [np.linspace(f.k_lo[j], f.k_hi[j], side) for j in range(2)]
    return np.stack(np.meshgrid(*g, indexing="ij"), axis=-1).reshape(-1, 2)


def selection_defects(f: SelectionField, t: FrozenCorrespondence, grid=None) -> np.ndarray:
    grid = verification_grid(f) if grid is None else np.asarray(grid, dtype=float).reshape(-1, f.dim)
    fx = f.evaluate_many(grid)
    lo, hi = interval_bounds(t.op, t.omega, grid)
    gap = np.maximum(0.0, np.maximum(lo - fx, fx - hi))
    return np.linalg.norm(gap, axis=1)


def verify_selection(f: SelectionField, t: FrozenCorrespondence, grid=None) -> float:
    """Largest distance from f(x) to T(x) over the grid."""
    return float(np.max(selection_defects(f, t, grid)))
