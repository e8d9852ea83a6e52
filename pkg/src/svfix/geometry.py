"""Closed sets in R^1 and R^2 and the distance geometry the solvers rely on.

Every set is stored closed. Distances, enlargements, hulls and subset tests
are computed in closed form per variant; nothing here samples except
:meth:`ValueSet.sample`, which exists to feed checks that quantify over
members of a set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TOL_BOUNDARY = 1e-9

_INF = math.inf


class EmptySetError(ValueError):
    pass


class UnboundedSetError(ValueError):
    pass


def vec(x) -> np.ndarray:
    """Coerce a scalar or sequence into a 1-d float vector of length 1 or 2."""
    v = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if v.size not in (1, 2):
        raise ValueError(f"vectors must have 1 or 2 coordinates, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector coordinates must be finite")
    return v


def norm(x) -> float:
    # hypot avoids underflow of tiny components
    return float(math.hypot(*np.asarray(x, dtype=float).ravel()))


def _row_norms(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.abs(a[:, 0]) if a.shape[1] == 1 else np.hypot(a[:, 0], a[:, 1])


# ---------------------------------------------------------------------------
# 1-d intervals with open/closed ends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    """Interval of the real line with per-end open/closed flags."""

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    @classmethod
    def point(cls, p: float) -> "Span":
        return cls(p, p)

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    @property
    def is_closed(self) -> bool:
        # infinite ends count as closed: [1, inf) is a closed set
        return (self.lo_closed or self.lo == -_INF) and (self.hi_closed or self.hi == _INF)

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def closure(self) -> "Span":
        return Span(self.lo, self.hi)

    def __str__(self) -> str:
        if self.lo == self.hi:
            return f"{{{self.lo!r}}}"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo!r}, {self.hi!r}{right}"


def merge_spans(spans: Iterable[Span]) -> list[Span]:
    """Normalize a union of spans into sorted, pairwise disjoint spans."""
    items = sorted((s for s in spans if not s.is_empty()), key=lambda s: (s.lo, not s.lo_closed))
    out: list[Span] = []
    for s in items:
        if not out:
            out.append(s)
            continue
        cur = out[-1]
        touches = s.lo < cur.hi or (s.lo == cur.hi and (cur.hi_closed or s.lo_closed))
        if not touches:
            out.append(s)
            continue
        if s.hi > cur.hi:
            out[-1] = Span(cur.lo, s.hi, cur.lo_closed, s.hi_closed)
        elif s.hi == cur.hi:
            out[-1] = Span(cur.lo, cur.hi, cur.lo_closed, cur.hi_closed or s.hi_closed)
    return out


def intersect_spans(a: Iterable[Span], b: Iterable[Span]) -> list[Span]:
    b = list(b)
    out = []
    for s in a:
        for t in b:
            if s.lo > t.lo:
                lo, lc = s.lo, s.lo_closed
            elif t.lo > s.lo:
                lo, lc = t.lo, t.lo_closed
            else:
                lo, lc = s.lo, s.lo_closed and t.lo_closed
            if s.hi < t.hi:
                hi, hc = s.hi, s.hi_closed
            elif t.hi < s.hi:
                hi, hc = t.hi, t.hi_closed
            else:
                hi, hc = s.hi, s.hi_closed and t.hi_closed
            out.append(Span(lo, hi, lc, hc))
    return merge_spans(out)


def complement_spans(spans: Iterable[Span]) -> list[Span]:
    spans = merge_spans(spans)
    out = []
    lo, lc = -_INF, True
    for s in spans:
        out.append(Span(lo, s.lo, lc, not s.lo_closed))
        lo, lc = s.hi, not s.hi_closed
    out.append(Span(lo, _INF, lc, True))
    return [s for s in out if not s.is_empty() and not (s.lo == s.hi == _INF) and not (s.lo == s.hi == -_INF)]


def subtract_spans(a: Iterable[Span], b: Iterable[Span]) -> list[Span]:
    return intersect_spans(a, complement_spans(b))


def spans_contain(spans: Iterable[Span], x: float) -> bool:
    return any(s.contains(x) for s in spans)


# ---------------------------------------------------------------------------
# Value sets
# ---------------------------------------------------------------------------


class ValueSet:
    """Base class of the closed-set variants. Instances are immutable."""

    dim: int

    # subclasses override what they can answer in closed form
    def distance(self, y) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def is_empty(self) -> bool:
        return False

    def is_convex(self) -> bool:
        return True

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:  # pragma: no cover - abstract
        raise NotImplementedError

    def is_bounded(self) -> bool:
        lo, hi = self.bounds()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def support(self, u) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def farthest(self, c) -> float:
        """Largest distance from ``c`` to a point of the set."""
        raise NotImplementedError

    def scaled(self, c: float) -> "ValueSet":  # pragma: no cover - abstract
        raise NotImplementedError

    def to_spans(self) -> list[Span]:
        raise NotImplementedError(f"{type(self).__name__} has no 1-d span form")

    def sample(self, k: int = 64) -> np.ndarray:
        """Extreme points plus ``k`` interior samples, shape (m, dim)."""
        if self.dim == 1:
            return _sample_spans(self.to_spans(), k)
        raise NotImplementedError(f"sampling {type(self).__name__} in 2-d")

    def contains(self, y, tol: float = 0.0) -> bool:
        return self.distance(y) <= tol


def _check_nonempty(s: ValueSet) -> None:
    if s.is_empty():
        raise EmptySetError("empty value set")


def _sample_spans(spans: list[Span], k: int) -> np.ndarray:
    if not spans:
        raise EmptySetError("empty value set")
    pts: list[float] = []
    finite = []
    for s in spans:
        lo = s.lo if math.isfinite(s.lo) else (s.hi - 10.0 if math.isfinite(s.hi) else -10.0)
        hi = s.hi if math.isfinite(s.hi) else lo + 10.0
        pts.extend([lo, hi])
        finite.append((lo, hi))
    per = max(1, k // len(finite))
    for lo, hi in finite:
        if hi > lo:
            pts.extend(np.linspace(lo, hi, per + 2)[1:-1].tolist())
    return np.unique(np.asarray(pts))[:, None]


@dataclass(frozen=True)
class PointSet(ValueSet):
    points: tuple[tuple[float, ...], ...]

    def __init__(self, points):
        pts = tuple(tuple(float(c) for c in vec(p)) for p in points)
        if pts and len({len(p) for p in pts}) != 1:
            raise ValueError("mixed point dimensions")
        object.__setattr__(self, "points", tuple(sorted(set(pts))))

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(-1, self.dim)

    def is_empty(self) -> bool:
        return not self.points

    def is_convex(self) -> bool:
        return len(self.points) <= 1

    def distance(self, y) -> float:
        _check_nonempty(self)
        y = vec(y)
        return float(np.min(_row_norms(self.array - y)))

    def bounds(self):
        _check_nonempty(self)
        a = self.array
        return a.min(axis=0), a.max(axis=0)

    def support(self, u) -> float:
        _check_nonempty(self)
        return float(np.max(self.array @ vec(u)))

    def farthest(self, c) -> float:
        _check_nonempty(self)
        return float(np.max(_row_norms(self.array - vec(c))))

    def scaled(self, c: float) -> "PointSet":
        return PointSet([tuple(c * np.asarray(p)) for p in self.points])

    def to_spans(self) -> list[Span]:
        return [Span.point(p[0]) for p in self.points]

    def sample(self, k: int = 64) -> np.ndarray:
        _check_nonempty(self)
        return self.array


@dataclass(frozen=True)
class IntervalUnion(ValueSet):
    """Finite union of closed axis-aligned boxes; 1-d intervals are 1-boxes.

    In 1-d the boxes are merged into disjoint sorted intervals. In 2-d only
    boxes contained in another box are dropped, so boxes may still overlap.
    """

    boxes: tuple[tuple[tuple[float, float], ...], ...]

    def __init__(self, boxes):
        bx = []
        for b in boxes:
            if len(b) == 2 and all(np.ndim(v) == 0 for v in b):
                b = (b,)  # bare (lo, hi) pair in 1-d
            b = tuple((float(lo), float(hi)) for lo, hi in b)
            if any(lo > hi for lo, hi in b):
                continue
            bx.append(b)
        dims = {len(b) for b in bx}
        if len(dims) > 1:
            raise ValueError("mixed box dimensions")
        if dims == {1}:
            merged = merge_spans(Span(b[0][0], b[0][1]) for b in bx)
            bx = [((s.lo, s.hi),) for s in merged]
        elif bx:
            keep = []
            for i, b in enumerate(bx):
                inside = any(
                    j != i
                    and all(o[k][0] <= b[k][0] and b[k][1] <= o[k][1] for k in range(len(b)))
                    and (o != b or j < i)
                    for j, o in enumerate(bx)
                )
                if not inside:
                    keep.append(b)
            bx = sorted(set(keep))
        object.__setattr__(self, "boxes", tuple(bx))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "IntervalUnion":
        return cls([((lo, hi),)])

    @classmethod
    def from_spans(cls, spans: Iterable[Span]) -> "IntervalUnion":
        return cls([((s.lo, s.hi),) for s in spans if not s.is_empty()])

    @classmethod
    def box(cls, lo, hi) -> "IntervalUnion":
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        return cls([tuple(zip(lo.tolist(), hi.tolist()))])

    @property
    def dim(self) -> int:
        return len(self.boxes[0]) if self.boxes else 1

    def is_empty(self) -> bool:
        return not self.boxes

    def is_convex(self) -> bool:
        return len(self.boxes) <= 1

    def _arrays(self):
        b = np.asarray(self.boxes, dtype=float)
        return b[:, :, 0], b[:, :, 1]

    def distance(self, y) -> float:
        _check_nonempty(self)
        y = vec(y)
        lo, hi = self._arrays()
        return float(np.min(_row_norms(y - np.clip(y, lo, hi))))

    def bounds(self):
        _check_nonempty(self)
        lo, hi = self._arrays()
        return lo.min(axis=0), hi.max(axis=0)

    def support(self, u) -> float:
        _check_nonempty(self)
        u = vec(u)
        lo, hi = self._arrays()
        with np.errstate(invalid="ignore"):
            vals = np.where(u > 0, u * hi, np.where(u < 0, u * lo, 0.0))
        return float(np.max(vals.sum(axis=1)))

    def corners(self) -> np.ndarray:
        lo, hi = self._arrays()
        if self.dim == 1:
            return np.concatenate([lo, hi]).reshape(-1, 1)
        pts = [(a[0], a[1]) for l, h in zip(lo, hi) for a in ((l[0], l[1]), (h[0], l[1]), (l[0], h[1]), (h[0], h[1]))]
        return np.asarray(pts, dtype=float)

    def farthest(self, c) -> float:
        _check_nonempty(self)
        if not self.is_bounded():
            return _INF
        return float(np.max(_row_norms(self.corners() - vec(c))))

    def scaled(self, c: float) -> "IntervalUnion":
        if c < 0:
            raise ValueError("negative scale")
        return IntervalUnion([tuple((c * lo, c * hi) for lo, hi in b) for b in self.boxes])

    def to_spans(self) -> list[Span]:
        if self.dim != 1:
            raise NotImplementedError("2-d boxes have no span form")
        return [Span(b[0][0], b[0][1]) for b in self.boxes]

    def sample(self, k: int = 64) -> np.ndarray:
        _check_nonempty(self)
        if self.dim == 1:
            return _sample_spans(self.to_spans(), k)
        side = max(2, int(math.sqrt(max(k, 4) / len(self.boxes))))
        out = []
        for b in self.boxes:
            g0 = np.linspace(b[0][0], b[0][1], side)
            g1 = np.linspace(b[1][0], b[1][1], side)
            out.append(np.stack(np.meshgrid(g0, g1), axis=-1).reshape(-1, 2))
        return np.unique(np.concatenate(out), axis=0)


@dataclass(frozen=True)
class Ball(ValueSet):
    center: tuple[float, ...]
    radius: float
    closed: bool = True

    def __init__(self, center, radius: float, closed: bool = True):
        if radius < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "center", tuple(vec(center).tolist()))
        object.__setattr__(self, "radius", float(radius))
        object.__setattr__(self, "closed", bool(closed))

    @property
    def dim(self) -> int:
        return len(self.center)

    def distance(self, y) -> float:
        return max(0.0, norm(vec(y) - np.asarray(self.center)) - self.radius)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def support(self, u) -> float:
        u = vec(u)
        return float(u @ np.asarray(self.center)) + self.radius * norm(u)

    def farthest(self, c) -> float:
        return norm(np.asarray(self.center) - vec(c)) + self.radius

    def scaled(self, c: float) -> "Ball":
        return Ball(c * np.asarray(self.center), c * self.radius, self.closed)

    def to_spans(self) -> list[Span]:
        if self.dim != 1:
            raise NotImplementedError
        c = self.center[0]
        return [Span(c - self.radius, c + self.radius)]

    def sample(self, k: int = 64) -> np.ndarray:
        if self.dim == 1:
            return super().sample(k)
        c = np.asarray(self.center)
        th = np.linspace(0.0, 2 * math.pi, max(k, 8), endpoint=False)
        ring = c + self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        inner = c + 0.5 * self.radius * np.stack([np.cos(th[::4]), np.sin(th[::4])], axis=1)
        return np.concatenate([c[None, :], ring, inner])


def _convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def _segment_distance(y: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, float((y - a) @ d) / dd))
    return norm(y - (a + t * d))


@dataclass(frozen=True)
class Polytope(ValueSet):
    """Convex polygon in the plane, vertices stored counter-clockwise."""

    vertices: tuple[tuple[float, float], ...]

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(v) == 0:
            raise EmptySetError("empty value set")
        hull = _convex_hull_2d(v)
        object.__setattr__(self, "vertices", tuple(map(tuple, hull.tolist())))

    dim = 2

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def edges(self):
        v = self.array
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def outward_normals(self):
        """(unit normal, offset) per edge, so the polygon is {z: n.z <= b}."""
        out = []
        for a, b in self.edges():
            e = b - a
            n = np.array([e[1], -e[0]])
            ln = norm(n)
            if ln == 0:
                continue
            n = n / ln
            out.append((n, float(n @ a)))
        return out

    def distance(self, y) -> float:
        y = vec(y)
        v = self.array
        if len(v) >= 3 and all(float(n @ y) <= b for n, b in self.outward_normals()):
            return 0.0
        if len(v) == 1:
            return norm(y - v[0])
        return min(_segment_distance(y, a, b) for a, b in self.edges())

    def bounds(self):
        v = self.array
        return v.min(axis=0), v.max(axis=0)

    def support(self, u) -> float:
        return float(np.max(self.array @ vec(u)))

    def farthest(self, c) -> float:
        return float(np.max(_row_norms(self.array - vec(c))))

    def scaled(self, c: float) -> "Polytope":
        return Polytope(c * self.array)

    def sample(self, k: int = 64) -> np.ndarray:
        v = self.array
        w = np.random.default_rng(0).dirichlet(np.ones(len(v)), size=k)
        return np.concatenate([v, w @ v])


@dataclass(frozen=True)
class HalfSpace(ValueSet):
    """The closed half-space {z : <normal, z> <= offset}."""

    normal: tuple[float, ...]
    offset: float

    def __init__(self, normal, offset: float):
        n = vec(normal)
        if norm(n) == 0:
            raise ValueError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", tuple(n.tolist()))
        object.__setattr__(self, "offset", float(offset))

    @property
    def dim(self) -> int:
        return len(self.normal)

    def distance(self, y) -> float:
        n = np.asarray(self.normal)
        return max(0.0, (float(n @ vec(y)) - self.offset) / norm(n))

    def bounds(self):
        lo = np.full(self.dim, -_INF)
        hi = np.full(self.dim, _INF)
        if self.dim == 1:
            n = self.normal[0]
            if n > 0:
                hi[0] = self.offset / n
            else:
                lo[0] = self.offset / n
        return lo, hi

    def support(self, u) -> float:
        u = vec(u)
        n = np.asarray(self.normal)
        # bounded only along positive multiples of the normal
        cross = u[0] * n[1] - u[1] * n[0] if self.dim == 2 else 0.0
        t = float(u @ n) / float(n @ n)
        if abs(cross) <= 1e-15 * norm(u) * norm(n) and t >= 0:
            return t * self.offset
        return _INF

    def farthest(self, c) -> float:
        return _INF

    def scaled(self, c: float) -> "HalfSpace":
        if c <= 0:
            raise ValueError("half-spaces scale only by positive factors")
        return HalfSpace(self.normal, c * self.offset)

    def to_spans(self) -> list[Span]:
        lo, hi = self.bounds()
        return [Span(float(lo[0]), float(hi[0]))]


@dataclass(frozen=True)
class RayFrom(ValueSet):
    """{origin + t * direction : t >= 0}; ``closed`` is False when t > 0 is meant.

    Storage is closed either way, the flag only records the intent.
    """

    origin: tuple[float, ...]
    direction: tuple[float, ...]
    closed: bool = True

    def __init__(self, origin, direction, closed: bool = True):
        d = vec(direction)
        if norm(d) == 0:
            raise ValueError("ray direction must be nonzero")
        object.__setattr__(self, "origin", tuple(vec(origin).tolist()))
        object.__setattr__(self, "direction", tuple(d.tolist()))
        object.__setattr__(self, "closed", bool(closed))

    @property
    def dim(self) -> int:
        return len(self.origin)

    def distance(self, y) -> float:
        o, d = np.asarray(self.origin), np.asarray(self.direction)
        y = vec(y)
        t = max(0.0, float((y - o) @ d) / float(d @ d))
        return norm(y - o - t * d)

    def bounds(self):
        o, d = np.asarray(self.origin), np.asarray(self.direction)
        lo = np.where(d < 0, -_INF, o)
        hi = np.where(d > 0, _INF, o)
        return lo, hi

    def support(self, u) -> float:
        u = vec(u)
        if float(u @ np.asarray(self.direction)) > 0:
            return _INF
        return float(u @ np.asarray(self.origin))

    def farthest(self, c) -> float:
        return _INF

    def scaled(self, c: float) -> "RayFrom":
        return RayFrom(c * np.asarray(self.origin), self.direction, self.closed)

    def to_spans(self) -> list[Span]:
        lo, hi = self.bounds()
        return [Span(float(lo[0]), float(hi[0]))]


@dataclass(frozen=True)
class Neighborhood(ValueSet):
    """Closed ``radius``-neighborhood {y : d(y, base) <= radius} of a set."""

    base: ValueSet
    radius: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def is_empty(self) -> bool:
        return self.base.is_empty()

    def is_convex(self) -> bool:
        return self.base.is_convex()

    def distance(self, y) -> float:
        return max(0.0, self.base.distance(y) - self.radius)

    def bounds(self):
        lo, hi = self.base.bounds()
        return lo - self.radius, hi + self.radius

    def support(self, u) -> float:
        return self.base.support(u) + self.radius * norm(vec(u))

    def farthest(self, c) -> float:
        return self.base.farthest(c) + self.radius

    def scaled(self, c: float) -> "Neighborhood":
        return Neighborhood(self.base.scaled(c), c * self.radius)

    def to_spans(self) -> list[Span]:
        return merge_spans(Span(s.lo - self.radius, s.hi + self.radius) for s in self.base.to_spans())

    def sample(self, k: int = 64) -> np.ndarray:
        if self.dim == 1:
            return super().sample(k)
        pts = self.base.sample(max(4, k // 4))
        th = np.linspace(0, 2 * math.pi, 8, endpoint=False)
        ring = self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        return np.concatenate([pts, (pts[:, None, :] + ring[None, :, :]).reshape(-1, 2)])


@dataclass(frozen=True)
class UnionSet(ValueSet):
    parts: tuple[ValueSet, ...]

    def __init__(self, parts):
        parts = tuple(p for p in parts if not p.is_empty())
        if len({p.dim for p in parts}) > 1:
            raise ValueError("mixed dimensions in union")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim if self.parts else 1

    def is_empty(self) -> bool:
        return not self.parts

    def is_convex(self) -> bool:
        if self.dim == 1:
            return len(merge_spans(s for p in self.parts for s in p.to_spans())) <= 1
        return len(self.parts) <= 1 and self.parts[0].is_convex()

    def distance(self, y) -> float:
        _check_nonempty(self)
        return min(p.distance(y) for p in self.parts)

    def bounds(self):
        _check_nonempty(self)
        bs = [p.bounds() for p in self.parts]
        return np.min([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)

    def support(self, u) -> float:
        _check_nonempty(self)
        return max(p.support(u) for p in self.parts)

    def farthest(self, c) -> float:
        _check_nonempty(self)
        return max(p.farthest(c) for p in self.parts)

    def scaled(self, c: float) -> "UnionSet":
        return UnionSet([p.scaled(c) for p in self.parts])

    def to_spans(self) -> list[Span]:
        return merge_spans(s for p in self.parts for s in p.to_spans())

    def sample(self, k: int = 64) -> np.ndarray:
        _check_nonempty(self)
        per = max(4, k // len(self.parts))
        return np.concatenate([p.sample(per) for p in self.parts])


EMPTY_1D = IntervalUnion([])


@dataclass(frozen=True)
class UnitBallFrame:
    """The inner ball B_1 and outer ball B_2 of the approximation theorems."""

    radius_inner: float = 1.0
    radius_outer: float = 2.0

    def __post_init__(self):
        if not 0 < self.radius_inner < self.radius_outer:
            raise ValueError("need 0 < radius_inner < radius_outer")

    def inner(self, dim: int) -> ValueSet:
        return _origin_ball(dim, self.radius_inner)

    def outer(self, dim: int) -> ValueSet:
        return _origin_ball(dim, self.radius_outer)

    def on_boundary(self, x, tol: float = TOL_BOUNDARY) -> bool:
        return abs(norm(vec(x)) - self.radius_inner) <= tol


def _origin_ball(dim: int, r: float) -> ValueSet:
    if dim == 1:
        return IntervalUnion.interval(-r, r)
    return Ball((0.0, 0.0), r)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def as_intervals(s: ValueSet) -> IntervalUnion:
    """Exact closed 1-d form of any 1-d set."""
    if s.dim != 1:
        raise ValueError("interval form requires d=1")
    if isinstance(s, IntervalUnion):
        return s
    return IntervalUnion.from_spans(s.to_spans())


def set_distance(y, s: ValueSet) -> float:
    """Exact distance from ``y`` to ``s``; raises on an empty set."""
    _check_nonempty(s)
    return s.distance(y)


def set_enlarge(s: ValueSet, eps: float) -> ValueSet:
    """Closed ``eps``-enlargement {y : d(y, s) <= eps}."""
    if not eps > 0:
        raise ValueError("enlargement radius must be positive")
    _check_nonempty(s)
    if s.dim == 1:
        return IntervalUnion.from_spans(merge_spans(Span(t.lo - eps, t.hi + eps) for t in s.to_spans()))
    if isinstance(s, Ball):
        return Ball(s.center, s.radius + eps)
    if isinstance(s, HalfSpace):
        return HalfSpace(s.normal, s.offset + eps * norm(s.normal))
    if isinstance(s, Neighborhood):
        return Neighborhood(s.base, s.radius + eps)
    if isinstance(s, PointSet):
        balls = [Ball(p, eps) for p in s.points]
        return balls[0] if len(balls) == 1 else UnionSet(balls)
    if isinstance(s, UnionSet):
        return UnionSet([set_enlarge(p, eps) for p in s.parts])
    return Neighborhood(s, eps)


def _circumscribed_polygon(center, r: float, k: int = 64) -> np.ndarray:
    th = np.linspace(0.0, 2 * math.pi, k, endpoint=False)
    rr = r / math.cos(math.pi / k)
    return np.asarray(center) + rr * np.stack([np.cos(th), np.sin(th)], axis=1)


def _extreme_points(s: ValueSet) -> np.ndarray:
    if isinstance(s, PointSet):
        return s.array
    if isinstance(s, IntervalUnion):
        return s.corners()
    if isinstance(s, Polytope):
        return s.array
    if isinstance(s, Ball):
        return _circumscribed_polygon(s.center, s.radius)
    if isinstance(s, Neighborhood):
        base = _extreme_points(s.base)
        return np.concatenate([_circumscribed_polygon(p, s.radius, 16) for p in base])
    if isinstance(s, UnionSet):
        return np.concatenate([_extreme_points(p) for p in s.parts])
    raise UnboundedSetError("hull of unbounded set")


def set_hull(s: ValueSet) -> ValueSet:
    """Closed convex hull of a bounded set.

    1-d: the smallest interval. 2-d: a polytope, except that a lone ball is
    returned as itself and a neighborhood as the neighborhood of the base
    hull; curved pieces inside a union are replaced by circumscribed 64-gons.
    """
    _check_nonempty(s)
    if not s.is_bounded():
        raise UnboundedSetError("hull of unbounded set")
    lo, hi = s.bounds()
    if s.dim == 1:
        return IntervalUnion.interval(float(lo[0]), float(hi[0]))
    if isinstance(s, Ball):
        return s
    if isinstance(s, Neighborhood):
        return Neighborhood(set_hull(s.base), s.radius)
    return Polytope(_extreme_points(s))


def bounding_box(s: ValueSet) -> IntervalUnion:
    lo, hi = s.bounds()
    return IntervalUnion.box(lo, hi)


def set_union(*sets: ValueSet) -> ValueSet:
    sets = [s for s in sets if not s.is_empty()]
    if not sets:
        return EMPTY_1D
    if all(s.dim == 1 for s in sets):
        return IntervalUnion.from_spans(merge_spans(t for s in sets for t in s.to_spans()))
    if all(isinstance(s, IntervalUnion) for s in sets):
        return IntervalUnion([b for s in sets for b in s.boxes])
    return UnionSet(sets)


def set_intersect(a: ValueSet, b: ValueSet) -> IntervalUnion:
    """Intersection of 1-d sets, or of 2-d box unions."""
    if a.dim == 1 and b.dim == 1:
        return IntervalUnion.from_spans(intersect_spans(a.to_spans(), b.to_spans()))
    if isinstance(a, IntervalUnion) and isinstance(b, IntervalUnion):
        out = []
        for p in a.boxes:
            for q in b.boxes:
                out.append(tuple((max(p[k][0], q[k][0]), min(p[k][1], q[k][1])) for k in range(len(p))))
        return IntervalUnion(out)
    raise NotImplementedError("2-d intersection is limited to boxes")


def is_subset(a: ValueSet, b: ValueSet, tol: float = 0.0) -> bool:
    """Exact containment test. In 2-d, ``b`` must be convex."""
    if a.is_empty():
        return True
    if a.dim == 1:
        bs = merge_spans(b.to_spans())
        return all(
            any(t.lo - tol <= s.lo and s.hi <= t.hi + tol for t in bs) for s in merge_spans(a.to_spans())
        )
    if isinstance(b, Ball):
        return a.farthest(b.center) <= b.radius + tol
    if isinstance(b, HalfSpace):
        n = np.asarray(b.normal)
        return a.support(n) <= b.offset + tol * norm(n)
    if isinstance(b, IntervalUnion) and len(b.boxes) == 1:
        lo, hi = b._arrays()
        for k in range(2):
            e = np.zeros(2)
            e[k] = 1.0
            if a.support(e) > hi[0, k] + tol or a.support(-e) > -lo[0, k] + tol:
                return False
        return True
    if isinstance(b, Polytope):
        return all(a.support(n) <= off + tol for n, off in b.outward_normals())
    if isinstance(b, Neighborhood) and b.base.is_convex():
        # a convex neighborhood contains a iff it contains the hull's extreme points
        if not a.is_bounded():
            return False
        return all(b.distance(p) <= tol for p in _extreme_points(a))
    raise NotImplementedError(f"subset test against {type(b).__name__}")


def radial_retraction(x) -> np.ndarray:
    """Identity on the closed unit ball, x / ||x|| outside it."""
    x = vec(x)
    n = norm(x)
    if n <= 1.0:
        return x.copy()
    y = x / n
    # rounding can leave ||y|| a hair above 1; step inward so r(r(x)) == r(x)
    while norm(y) > 1.0:
        y = np.nextafter(y, 0.0)
    return y


def retract_set(s: ValueSet) -> ValueSet:
    """Image of a set under :func:`radial_retraction`.

    Exact in 1-d (the retraction is the clip to [-1, 1]) and for point sets;
    in 2-d other sets must already lie in the unit ball.
    """
    if s.dim == 1:
        spans = [Span(min(max(t.lo, -1.0), 1.0), min(max(t.hi, -1.0), 1.0)) for t in s.to_spans()]
        return IntervalUnion.from_spans(merge_spans(spans))
    if isinstance(s, PointSet):
        return PointSet([radial_retraction(p) for p in s.points])
    if s.farthest((0.0, 0.0)) <= 1.0:
        return s
    raise NotImplementedError("2-d retraction of a set leaving the unit ball")


def inward_halfspace(xi) -> HalfSpace:
    """Closure of the inward set of the unit ball at a boundary point."""
    xi = vec(xi)
    return HalfSpace(xi, float(xi @ xi))


def inward_distance(eta, xi, tol: float = TOL_BOUNDARY) -> float:
    """Distance from ``eta`` to the closed inward set of B_1 at ``xi``.

    Zero when ``xi`` is interior (the closure is the whole space); at a
    boundary point the closure is the tangent half-space through ``xi``.
    """
    eta, xi = vec(eta), vec(xi)
    r = norm(xi)
    if r > 1.0 + tol:
        raise ValueError("base point outside unit ball")
    if r < 1.0 - tol:
        return 0.0
    return max(0.0, float((eta - xi) @ xi) / r)


def ray_entry(origin, direction, s: ValueSet, t_min: float = 0.0) -> float | None:
    """Smallest t >= t_min with origin + t * direction in ``s`` (None if none)."""
    o, d = vec(origin), vec(direction)
    if s.dim == 1:
        best = None
        for sp in s.to_spans():
            if d[0] > 0:
                lo_t, hi_t = (sp.lo - o[0]) / d[0], (sp.hi - o[0]) / d[0]
            else:
                lo_t, hi_t = (sp.hi - o[0]) / d[0], (sp.lo - o[0]) / d[0]
            if hi_t >= t_min:
                t = max(lo_t, t_min)
                best = t if best is None else min(best, t)
        return best
    if isinstance(s, PointSet):
        ts = []
        for p in s.array:
            t = float((p - o) @ d) / float(d @ d)
            if t >= t_min and norm(o + t * d - p) <= 1e-12:
                ts.append(t)
        return min(ts) if ts else None
    if isinstance(s, Ball):
        c = np.asarray(s.center)
        a = float(d @ d)
        b = 2 * float(d @ (o - c))
        cc = float((o - c) @ (o - c)) - s.radius**2
        disc = b * b - 4 * a * cc
        if disc < 0:
            return None
        r0, r1 = (-b - math.sqrt(disc)) / (2 * a), (-b + math.sqrt(disc)) / (2 * a)
        if r1 < t_min:
            return None
        return max(r0, t_min)
    if isinstance(s, IntervalUnion):
        best = None
        for box in s.boxes:
            lo_t, hi_t = t_min, _INF
            for k in range(2):
                lo, hi = box[k]
                if d[k] == 0:
                    if not lo <= o[k] <= hi:
                        lo_t, hi_t = 1.0, 0.0
                        break
                    continue
                a, b = (lo - o[k]) / d[k], (hi - o[k]) / d[k]
                lo_t, hi_t = max(lo_t, min(a, b)), min(hi_t, max(a, b))
            if lo_t <= hi_t:
                best = lo_t if best is None else min(best, lo_t)
        return best
    if isinstance(s, (Polytope, HalfSpace)):
        halves = s.outward_normals() if isinstance(s, Polytope) else [(np.asarray(s.normal), s.offset)]
        lo_t, hi_t = t_min, _INF
        for n, off in halves:
            nd, no = float(n @ d), float(n @ o)
            if nd == 0:
                if no > off:
                    return None
            elif nd > 0:
                hi_t = min(hi_t, (off - no) / nd)
            else:
                lo_t = max(lo_t, (off - no) / nd)
        return lo_t if lo_t <= hi_t else None
    if isinstance(s, UnionSet):
        ts = [t for t in (ray_entry(o, d, p, t_min) for p in s.parts) if t is not None]
        return min(ts) if ts else None
    raise NotImplementedError(f"ray entry for {type(s).__name__}")
