"""Piecewise set-valued random operators.

An operator is a priority-ordered list of pieces. Each piece pairs a region of
the domain (an interval or box, or a finite point list) with a value rule:
a single point, an interval between two polynomial envelopes of degree at
most two, or a constant set. In 2-d every polynomial acts coordinate-wise,
so output coordinate k depends on input coordinate k only; images of boxes
stay boxes and every envelope below is exact.

The random index omega enters through the diagonal combinator only:
``T(omega, x) = base(x)`` if ``x == omega`` else ``default``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainGapError, HypothesisError, ScenarioError
from .geometry import (
    Ball,
    IntervalUnion,
    PointSet,
    Span,
    UnitBallFrame,
    ValueSet,
    as_intervals,
    intersect_spans,
    is_subset,
    merge_spans,
    retract_set,
    set_distance,
    set_enlarge,
    set_union,
    spans_contain,
    subtract_spans,
    vec,
)

_INF = math.inf
N0_LIMIT = 10**6
RADII = tuple(2.0**-j for j in range(1, 21))

Poly = tuple[float, float, float]


def poly(coeffs) -> Poly:
    c = [float(v) for v in coeffs]
    if len(c) > 3:
        raise ScenarioError("polynomial degree must be at most 2")
    c += [0.0] * (3 - len(c))
    return (c[0], c[1], c[2])


def poly_eval(c: Poly, x):
    return c[0] + x * (c[1] + x * c[2])


def poly_extremes(c: Poly, a, b):
    """Min and max of a quadratic over the closed intervals [a, b] (vectorized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va, vb = poly_eval(c, a), poly_eval(c, b)
    lo, hi = np.minimum(va, vb), np.maximum(va, vb)
    if c[2] != 0.0:
        v = -c[1] / (2.0 * c[2])
        inside = (a < v) & (v < b)
        fv = poly_eval(c, v)
        lo = np.where(inside, np.minimum(lo, fv), lo)
        hi = np.where(inside, np.maximum(hi, fv), hi)
    return lo, hi


def quad_nonpositive(c: Poly) -> list[Span]:
    """{x : c0 + c1 x + c2 x^2 <= 0} as closed spans."""
    c0, c1, c2 = c
    if c2 == 0.0:
        if c1 == 0.0:
            return [Span(-_INF, _INF)] if c0 <= 0 else []
        r = -c0 / c1
        return [Span(-_INF, r)] if c1 > 0 else [Span(r, _INF)]
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0:
        return [Span(-_INF, _INF)] if c2 < 0 else []
    if c1 == 0.0:
        s = math.sqrt(-c0 / c2)
        r1, r2 = -s, s
    else:
        q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
        r1, r2 = sorted((q / c2, c0 / q))
    if c2 > 0:
        return [Span(r1, r2)]
    return [Span(-_INF, r1), Span(r2, _INF)]


def _shift(c: Poly, k: float, sign: float = 1.0) -> Poly:
    """sign * c - k, coefficient-wise."""
    return (sign * c[0] - k, sign * c[1], sign * c[2])


# ---------------------------------------------------------------------------
# pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecePredicate:
    """Interval/box with per-edge closed flags, or a finite point list."""

    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    lo_closed: tuple[bool, ...] = ()
    hi_closed: tuple[bool, ...] = ()
    points: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def interval(cls, lo: float, hi: float, closed=(True, True)) -> "PiecePredicate":
        return cls((float(lo),), (float(hi),), (bool(closed[0]),), (bool(closed[1]),))

    @classmethod
    def box(cls, lo, hi, lo_closed=None, hi_closed=None) -> "PiecePredicate":
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        lc = tuple(lo_closed) if lo_closed is not None else (True,) * len(lo)
        hc = tuple(hi_closed) if hi_closed is not None else (True,) * len(hi)
        return cls(lo, hi, lc, hc)

    @classmethod
    def at(cls, *points) -> "PiecePredicate":
        return cls(points=tuple(tuple(vec(p).tolist()) for p in points))

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else len(self.lo)

    def spans(self) -> list[Span]:
        if self.dim != 1:
            raise ValueError("spans of a 2-d predicate")
        if self.points is not None:
            return merge_spans(Span.point(p[0]) for p in self.points)
        return [Span(self.lo[0], self.hi[0], self.lo_closed[0], self.hi_closed[0])]

    def contains(self, x) -> bool:
        x = vec(x)
        if self.points is not None:
            return any(tuple(x.tolist()) == p for p in self.points)
        return all(
            Span(self.lo[k], self.hi[k], self.lo_closed[k], self.hi_closed[k]).contains(float(x[k]))
            for k in range(self.dim)
        )

    def contains_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(len(xs), -1)
        if self.points is not None:
            pts = np.asarray(self.points)
            return np.any(np.all(xs[:, None, :] == pts[None, :, :], axis=2), axis=1)
        ok = np.ones(len(xs), dtype=bool)
        for k in range(self.dim):
            v = xs[:, k]
            ok &= (v > self.lo[k]) | ((v == self.lo[k]) & self.lo_closed[k])
            ok &= (v < self.hi[k]) | ((v == self.hi[k]) & self.hi_closed[k])
        return ok

    def boxes(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
        """(lo, hi, lo_closed, hi_closed) arrays, one entry per box or point."""
        if self.points is not None:
            t = np.ones(self.dim, dtype=bool)
            return [(np.asarray(p), np.asarray(p), t, t) for p in self.points]
        return [(np.asarray(self.lo), np.asarray(self.hi), np.asarray(self.lo_closed), np.asarray(self.hi_closed))]


class PieceValue:
    """Value rule of a piece; subclasses are immutable."""

    def at(self, x: np.ndarray) -> ValueSet:  # pragma: no cover - abstract
        raise NotImplementedError

    def is_convex(self) -> bool:
        return True

    def envelopes(self) -> tuple[tuple[Poly, ...], tuple[Poly, ...]] | None:
        """Lower/upper polynomial per coordinate when the value is a box."""
        return None


@dataclass(frozen=True)
class PointValue(PieceValue):
    coeffs: tuple[Poly, ...]

    def __init__(self, *coeffs):
        if len(coeffs) == 1 and isinstance(coeffs[0], (list, tuple)) and coeffs[0] and isinstance(coeffs[0][0], (list, tuple)):
            coeffs = tuple(coeffs[0])
        object.__setattr__(self, "coeffs", tuple(poly(c) for c in coeffs))

    def at(self, x):
        x = vec(x)
        return PointSet([[poly_eval(c, x[k]) for k, c in enumerate(self.coeffs)]])

    def envelopes(self):
        return self.coeffs, self.coeffs


@dataclass(frozen=True)
class IntervalValue(PieceValue):
    lo: tuple[Poly, ...]
    hi: tuple[Poly, ...]

    def __init__(self, lo, hi):
        if lo and isinstance(lo[0], (list, tuple)):
            lo_t, hi_t = tuple(poly(c) for c in lo), tuple(poly(c) for c in hi)
        else:
            lo_t, hi_t = (poly(lo),), (poly(hi),)
        object.__setattr__(self, "lo", lo_t)
        object.__setattr__(self, "hi", hi_t)

    def at(self, x):
        x = vec(x)
        lo = [poly_eval(c, x[k]) for k, c in enumerate(self.lo)]
        hi = [poly_eval(c, x[k]) for k, c in enumerate(self.hi)]
        if any(a > b for a, b in zip(lo, hi)):
            raise ScenarioError(f"lower envelope above upper envelope at x={x.tolist()}")
        return IntervalUnion.box(lo, hi)

    def envelopes(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class ConstantSet(PieceValue):
    value: ValueSet

    def at(self, x):
        return self.value

    def is_convex(self) -> bool:
        return self.value.is_convex()

    def envelopes(self):
        v = self.value
        if not self.is_convex():
            return None
        if v.dim == 1 or (isinstance(v, IntervalUnion) and len(v.boxes) == 1) or (isinstance(v, PointSet)):
            lo, hi = v.bounds()
            return tuple((float(a), 0.0, 0.0) for a in lo), tuple((float(b), 0.0, 0.0) for b in hi)
        return None


# ---------------------------------------------------------------------------
# operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomOperator:
    """omega-indexed correspondence built from pieces.

    ``scale`` multiplies every value and ``retract`` composes with the radial
    retraction onto the unit ball; both are applied after the piece rule.
    """

    pieces: tuple[tuple[PiecePredicate, PieceValue], ...]
    domain: IntervalUnion
    default: ValueSet | None = None
    frame: UnitBallFrame | None = None
    scale: float = 1.0
    retract: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple((p, v) for p, v in self.pieces))
        if len(self.domain.boxes) != 1:
            raise ScenarioError("domain must be a single box", "domain")
        if self.default is not None and self.dim != 1:
            raise ScenarioError("the diagonal combinator needs d=1", "operator.diagonal")
        if self.scale < 0:
            raise ScenarioError("scale must be nonnegative")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def diagonal(self) -> bool:
        return self.default is not None

    def base(self) -> "RandomOperator":
        """The operator with the diagonal combinator dropped."""
        return replace(self, default=None)

    def scaled(self, c: float) -> "RandomOperator":
        if self.retract:
            raise ValueError("scale before retracting")
        return replace(self, scale=self.scale * c)

    def retracted(self) -> "RandomOperator":
        return replace(self, retract=True)

    def restricted(self, domain: ValueSet) -> "RandomOperator":
        lo, hi = domain.bounds()
        return replace(self, domain=IntervalUnion.box(lo, hi))

    def at(self, omega: float | None) -> "FrozenCorrespondence":
        return FrozenCorrespondence(self, omega)

    def is_convex_valued(self) -> bool:
        vals = [v.is_convex() for _, v in self.pieces]
        if self.default is not None:
            vals.append(self.default.is_convex())
        return all(vals)

    def is_interval_valued(self) -> bool:
        ok = all(v.envelopes() is not None for _, v in self.pieces)
        if self.default is not None:
            ok = ok and ConstantSet(self.default).envelopes() is not None
        return ok

    # --- transforms -------------------------------------------------------

    def transform(self, s: ValueSet) -> ValueSet:
        if self.scale != 1.0:
            s = PointSet([np.zeros(s.dim)]) if self.scale == 0 else s.scaled(self.scale)
        if self.retract:
            s = retract_set(s)
        return s

    def transform_bounds(self, lo, hi):
        lo = np.asarray(lo, dtype=float) * self.scale
        hi = np.asarray(hi, dtype=float) * self.scale
        if self.retract:
            if self.dim != 1:
                raise NotImplementedError("interval retraction in 2-d")
            lo, hi = np.clip(lo, -1.0, 1.0), np.clip(hi, -1.0, 1.0)
        return lo, hi

    # --- regions ------------------------------------------------------------

    @cached_property
    def domain_spans(self) -> list[Span]:
        return as_intervals(self.domain).to_spans() if self.dim == 1 else []

    @cached_property
    def regions(self) -> list[list[Span]]:
        """Effective 1-d region of each piece after priority resolution."""
        if self.dim != 1:
            raise ValueError("regions are 1-d")
        taken: list[Span] = []
        out = []
        for pred, _ in self.pieces:
            own = intersect_spans(pred.spans(), self.domain_spans)
            out.append(subtract_spans(own, taken) if taken else own)
            taken = merge_spans(taken + pred.spans())
        return out

    def breakpoints(self) -> list[float]:
        """Region endpoints (1-d) or box edges per axis (2-d), flattened."""
        pts: set[float] = set()
        if self.dim == 1:
            for reg in self.regions:
                for s in reg:
                    pts.update(v for v in (s.lo, s.hi) if math.isfinite(v))
        else:
            for pred, _ in self.pieces:
                for lo, hi, _, _ in pred.boxes():
                    pts.update(np.concatenate([lo, hi]).tolist())
        return sorted(pts)

    def piece_index(self, x) -> int:
        x = vec(x)
        if x.size != self.dim:
            raise DomainGapError(f"point of dimension {x.size} for a {self.dim}-d operator")
        if self.domain.distance(x) > 0:
            raise DomainGapError(f"domain gap: x={x.tolist()} outside domain")
        for i, (pred, _) in enumerate(self.pieces):
            if pred.contains(x):
                return i
        raise DomainGapError(f"domain gap at x={x.tolist()}")

    def base_value(self, x) -> ValueSet:
        i = self.piece_index(x)
        return self.pieces[i][1].at(vec(x))


@dataclass(frozen=True)
class FrozenCorrespondence:
    """T(omega, .) for a fixed omega; ``omega=None`` ignores the diagonal."""

    op: RandomOperator
    omega: float | None

    def evaluate(self, x) -> ValueSet:
        return evaluate(self.op, self.omega, x)

    def residual(self, x) -> float:
        return residual(self.op, self.omega, x)

    def bounds_many(self, xs):
        return interval_bounds(self.op, self.omega, xs)

    def residuals_many(self, xs):
        return residuals_many(self.op, self.omega, xs)

    def envelope(self, a: ValueSet) -> ValueSet:
        return range_envelope(self.op, self.omega, a)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(T: RandomOperator, omega: float | None, x) -> ValueSet:
    """Exact value set T(omega, x). The diagonal uses exact equality x == omega."""
    x = vec(x)
    if T.default is not None and omega is not None:
        if T.domain.distance(x) > 0:
            raise DomainGapError(f"domain gap: x={x.tolist()} outside domain")
        raw = T.base_value(x) if float(x[0]) == float(omega) else T.default
    else:
        raw = T.base_value(x)
    return T.transform(raw)


def residual(T: RandomOperator, omega: float | None, x) -> float:
    """d(x, T(omega, x)); zero exactly at fixed points."""
    return set_distance(x, evaluate(T, omega, x))


def _value_bounds(v: PieceValue, xs: np.ndarray):
    env = v.envelopes()
    if env is None:
        raise NotImplementedError("value is not a box")
    lo_p, hi_p = env
    lo = np.stack([poly_eval(c, xs[:, k] if len(lo_p) > 1 else xs[:, 0]) for k, c in enumerate(lo_p)], axis=1)
    hi = np.stack([poly_eval(c, xs[:, k] if len(hi_p) > 1 else xs[:, 0]) for k, c in enumerate(hi_p)], axis=1)
    return lo, hi


def interval_bounds(T: RandomOperator, omega: float | None, xs):
    """Vectorized (lo, hi) of box-valued T(omega, x) for each row of ``xs``.

    Shapes (m, d). Requires every value rule to be a box (see
    :meth:`RandomOperator.is_interval_valued`).
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, T.dim)
    m = len(xs)
    lo = np.full((m, T.dim), np.nan)
    hi = np.full((m, T.dim), np.nan)
    need = np.ones(m, dtype=bool)
    if T.default is not None and omega is not None:
        on_diag = xs[:, 0] == float(omega)
        dlo, dhi = (np.asarray(b) for b in T.default.bounds())
        lo[~on_diag], hi[~on_diag] = dlo, dhi
        need = on_diag
    dom_lo, dom_hi = T.domain.bounds()
    if np.any((xs < dom_lo) | (xs > dom_hi)):
        raise DomainGapError("domain gap: point outside domain")
    assigned = ~need
    for pred, val in T.pieces:
        mask = pred.contains_many(xs) & ~assigned
        if np.any(mask):
            plo, phi = _value_bounds(val, xs[mask])
            lo[mask], hi[mask] = plo, phi
            assigned |= mask
    if not np.all(assigned):
        bad = xs[~assigned][0]
        raise DomainGapError(f"domain gap at x={bad.tolist()}")
    return T.transform_bounds(lo, hi)


def residuals_many(T: RandomOperator, omega: float | None, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float).reshape(-1, T.dim)
    if T.is_interval_valued():
        lo, hi = interval_bounds(T, omega, xs)
        gap = np.maximum(0.0, np.maximum(lo - xs, xs - hi))
        return np.linalg.norm(gap, axis=1)
    return np.array([residual(T, omega, x) for x in xs])


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------


def _query_spans(a: ValueSet) -> list[Span]:
    return merge_spans(a.to_spans())


def range_envelope(T: RandomOperator, omega: float | None, a: ValueSet) -> ValueSet:
    """Exact closure of T(omega, A) = union of T(omega, x) over x in A."""
    if a.is_empty():
        raise ValueError("empty query set")
    if T.dim == 1:
        return _range_envelope_1d(T, omega, a)
    return _range_envelope_2d(T, omega, a)


def _range_envelope_1d(T, omega, a) -> ValueSet:
    q = intersect_spans(_query_spans(a), T.domain_spans)
    if not q:
        raise DomainGapError("query set misses the domain")
    parts: list[ValueSet] = []
    if T.default is not None and omega is not None:
        others = subtract_spans(q, [Span.point(float(omega))])
        if others:
            parts.append(T.default)
        if spans_contain(q, float(omega)):
            parts.append(T.base_value(omega))
    else:
        for reg, (_, val) in zip(T.regions, T.pieces):
            for s in intersect_spans(reg, q):
                parts.append(_image_1d(val, s.lo, s.hi))
    return T.transform(set_union(*parts))


def _image_1d(val: PieceValue, a: float, b: float) -> ValueSet:
    if isinstance(val, ConstantSet):
        return val.value
    lo_p, hi_p = val.envelopes()
    lmin, _ = poly_extremes(lo_p[0], a, b)
    _, hmax = poly_extremes(hi_p[0], a, b)
    return IntervalUnion.interval(float(lmin), float(hmax))


def _range_envelope_2d(T, omega, a) -> ValueSet:
    if isinstance(a, PointSet):
        return T.transform(set_union(*(T.base_value(p) for p in a.points)))
    if not isinstance(a, IntervalUnion):
        lo, hi = a.bounds()
        a = IntervalUnion.box(lo, hi)
    parts: list[ValueSet] = []
    dlo, dhi = T.domain.bounds()
    for box in a.boxes:
        qlo = np.maximum([b[0] for b in box], dlo)
        qhi = np.minimum([b[1] for b in box], dhi)
        if np.any(qlo > qhi):
            continue
        for pred, val in T.pieces:
            for plo, phi, plc, phc in pred.boxes():
                lo = np.maximum(qlo, plo)
                hi = np.minimum(qhi, phi)
                ok = np.all((lo < hi) | ((lo == hi) & (((lo > plo) | plc) & ((hi < phi) | phc))))
                if not ok:
                    continue
                if isinstance(val, ConstantSet):
                    parts.append(val.value)
                    continue
                lo_p, hi_p = val.envelopes()
                out_lo = [float(poly_extremes(c, lo[k], hi[k])[0]) for k, c in enumerate(lo_p)]
                out_hi = [float(poly_extremes(c, lo[k], hi[k])[1]) for k, c in enumerate(hi_p)]
                parts.append(IntervalUnion.box(out_lo, out_hi))
    if not parts:
        raise DomainGapError("query set misses every piece")
    return T.transform(set_union(*parts))


def neighborhood_envelopes(T: RandomOperator, omega: float | None, a, b, closed: bool = False, within=None):
    """sup of the lower envelope and inf of the upper envelope over query boxes.

    ``a`` and ``b`` have shape (m, d); the query is the open box (a, b), or the
    closed box [a, b] when ``closed``, intersected with ``within`` (a
    (lo, hi) pair, default the domain). An edge pushed inward by that
    intersection becomes closed, so (a, b) ∩ K is relatively open in K.
    Returns (sup_lo, inf_hi), each (m, d). Requires a box-valued operator.
    """
    a = np.asarray(a, dtype=float).reshape(-1, T.dim)
    b = np.asarray(b, dtype=float).reshape(-1, T.dim)
    klo, khi = within if within is not None else T.domain.bounds()
    dlo, dhi = T.domain.bounds()
    klo, khi = np.maximum(klo, dlo), np.minimum(khi, dhi)
    lc = closed | (a < klo)
    hc = closed | (b > khi)
    a = np.maximum(a, klo)
    b = np.minimum(b, khi)
    m = len(a)
    sup_lo = np.full((m, T.dim), -_INF)
    inf_hi = np.full((m, T.dim), _INF)

    def absorb(mask, lo_vals, hi_vals):
        sup_lo[mask] = np.maximum(sup_lo[mask], lo_vals[mask])
        inf_hi[mask] = np.minimum(inf_hi[mask], hi_vals[mask])

    if T.default is not None and omega is not None:
        w = float(omega)
        a0, b0, lc0, hc0 = a[:, 0], b[:, 0], lc[:, 0], hc[:, 0]
        dl, dh = (np.asarray(v) for v in T.default.bounds())
        nondeg = (b0 > a0) | ((a0 == b0) & lc0 & hc0 & (a0 != w))
        absorb(nondeg, np.broadcast_to(dl, (m, 1)), np.broadcast_to(dh, (m, 1)))
        has_w = ((a0 < w) | ((a0 == w) & lc0)) & ((b0 > w) | ((b0 == w) & hc0))
        if np.any(has_w):
            bl, bh = ConstantSet(T.base_value(w)).envelopes()
            absorb(has_w, np.broadcast_to([c[0] for c in bl], (m, 1)), np.broadcast_to([c[0] for c in bh], (m, 1)))
    else:
        for region_boxes, val in _region_boxes(T):
            lo_p, hi_p = val.envelopes()
            for rlo, rhi, rlc, rhc in region_boxes:
                ok = np.ones(m, dtype=bool)
                for k in range(T.dim):
                    ok &= (a[:, k] < rhi[k]) | ((a[:, k] == rhi[k]) & rhc[k] & lc[:, k])
                    ok &= (b[:, k] > rlo[k]) | ((b[:, k] == rlo[k]) & rlc[k] & hc[:, k])
                if not np.any(ok):
                    continue
                cl = np.maximum(a, rlo)
                ch = np.minimum(b, rhi)
                lo_vals = np.empty((m, T.dim))
                hi_vals = np.empty((m, T.dim))
                for k in range(T.dim):
                    lo_vals[:, k] = poly_extremes(lo_p[k], cl[:, k], ch[:, k])[1]
                    hi_vals[:, k] = poly_extremes(hi_p[k], cl[:, k], ch[:, k])[0]
                absorb(ok, lo_vals, hi_vals)
    if np.any(~np.isfinite(sup_lo)):
        raise DomainGapError("neighborhood misses every piece")
    return T.transform_bounds(sup_lo, inf_hi)


def _region_boxes(T: RandomOperator):
    if T.dim == 1:
        for reg, (_, val) in zip(T.regions, T.pieces):
            boxes = [
                (np.array([s.lo]), np.array([s.hi]), np.array([s.lo_closed]), np.array([s.hi_closed]))
                for s in reg
            ]
            yield boxes, val
    else:
        for pred, val in T.pieces:
            yield pred.boxes(), val


# ---------------------------------------------------------------------------
# preimages
# ---------------------------------------------------------------------------


def _value_hits(val: PieceValue, region: list[Span], lo_t: float, hi_t: float) -> list[Span]:
    """Points of ``region`` whose value meets the closed target [lo_t, hi_t]."""
    if isinstance(val, ConstantSet):
        hit = intersect_spans(val.value.to_spans(), [Span(lo_t, hi_t)])
        return list(region) if hit else []
    lo_p, hi_p = val.envelopes()
    out = list(region)
    if math.isfinite(hi_t):
        out = intersect_spans(out, quad_nonpositive(_shift(lo_p[0], hi_t)))
    if math.isfinite(lo_t):
        out = intersect_spans(out, quad_nonpositive(_shift(hi_p[0], -lo_t, -1.0)))
    return out


def _target(T: RandomOperator, y: float) -> tuple[float, float] | None:
    """Pre-transform target interval: y in transform(V) iff V meets it."""
    if T.retract:
        if abs(y) > 1.0:
            return None
        if T.scale == 0:
            return (-_INF, _INF) if y == 0 else None
        if y == 1.0:
            return (1.0 / T.scale, _INF)
        if y == -1.0:
            return (-_INF, -1.0 / T.scale)
    if T.scale == 0:
        return (-_INF, _INF) if y == 0 else None
    return (y / T.scale, y / T.scale)


def preimage_parts(T: RandomOperator, omega: float | None, y) -> list[Span]:
    """Exact preimage of ``y`` as normalized spans carrying open/closed ends.

    The x != omega part solves lo(x) <= y <= hi(x) piece by piece on the base
    map; the diagonal contributes {omega} when y lies in the base value at
    omega or in the default set. This is the reading under which the inverse
    tables of the diagonal examples are computed.
    """
    if T.dim != 1:
        raise ValueError("preimage requires d=1")
    y = float(vec(y)[0])
    tgt = _target(T, y)
    out: list[Span] = []
    if tgt is not None:
        for reg, (_, val) in zip(T.regions, T.pieces):
            out.extend(_value_hits(val, reg, *tgt))
    if T.default is not None and omega is not None:
        w = float(omega)
        if spans_contain(T.domain_spans, w):
            if T.transform(T.base_value(w)).contains(y) or T.transform(T.default).contains(y):
                out.append(Span.point(w))
    return merge_spans(intersect_spans(merge_spans(out), T.domain_spans))


def preimage(T: RandomOperator, omega: float | None, y) -> IntervalUnion:
    """Preimage of ``y`` as a closed set (closure of :func:`preimage_parts`)."""
    return IntervalUnion.from_spans(s.closure() for s in preimage_parts(T, omega, y))


@dataclass
class InverseCertificate:
    verdict: str
    checked: int
    witness_y: float | None = None
    witness_parts: list[Span] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def _value_breakpoints(T: RandomOperator, omega) -> list[float]:
    ys: set[float] = set()
    for reg, (_, val) in zip(T.regions, T.pieces):
        if isinstance(val, ConstantSet):
            ys.update(s for sp in val.value.to_spans() for s in (sp.lo, sp.hi) if math.isfinite(s))
            continue
        lo_p, hi_p = val.envelopes()
        for sp in reg:
            for c in (lo_p[0], hi_p[0]):
                for x in (sp.lo, sp.hi):
                    if math.isfinite(x):
                        ys.add(float(poly_eval(c, x)))
                if c[2] != 0:
                    ys.add(float(poly_eval(c, -c[1] / (2 * c[2]))))
    if T.default is not None:
        ys.update(s for sp in T.default.to_spans() for s in (sp.lo, sp.hi) if math.isfinite(s))
    out = set()
    for v in ys:
        lo, _ = T.transform_bounds([v], [v])
        out.add(float(lo[0]))
    if T.retract:
        out.update((-1.0, 1.0))
    return sorted(out)


def certify_inverse_closed(T: RandomOperator, omega: float | None, y_grid=None) -> InverseCertificate:
    """Check that the preimage of every grid value and breakpoint is closed."""
    if T.dim != 1:
        raise ValueError("preimage requires d=1")
    if y_grid is None:
        env = as_intervals(range_envelope(T, omega, T.domain))
        lo, hi = env.bounds()
        pad = 0.1 * max(1.0, float(hi[0] - lo[0]))
        y_grid = np.linspace(float(lo[0]) - pad, float(hi[0]) + pad, 257)
    ys = sorted(set(np.asarray(y_grid, dtype=float).tolist()) | set(_value_breakpoints(T, omega)))
    for y in ys:
        parts = preimage_parts(T, omega, y)
        if not all(s.is_closed for s in parts):
            return InverseCertificate("refuted", len(ys), y, parts)
    return InverseCertificate("certified", len(ys))


# ---------------------------------------------------------------------------
# continuity
# ---------------------------------------------------------------------------


@dataclass
class ContinuityCertificate:
    mode: str
    verdict: str
    eps: float
    grid: int
    checked: int
    witness: dict | None = None
    radii: np.ndarray | None = None

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def _candidates(T: RandomOperator, omega, grid: int) -> np.ndarray:
    lo, hi = T.domain.bounds()
    if T.dim == 1:
        pts = set(np.linspace(lo[0], hi[0], grid).tolist()) | set(T.breakpoints())
        if omega is not None and lo[0] <= omega <= hi[0]:
            pts.add(float(omega))
        return np.asarray(sorted(pts))[:, None]
    side = max(2, int(round(math.sqrt(grid))))
    axes = [np.unique(np.concatenate([np.linspace(lo[k], hi[k], side), T.breakpoints()])) for k in range(2)]
    axes = [ax[(ax >= lo[k]) & (ax <= hi[k])] for k, ax in enumerate(axes)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)


def certify_continuity(
    T: RandomOperator,
    omega: float | None,
    mode: str,
    eps: float,
    grid: int = 2001,
    points=None,
    targets=None,
) -> ContinuityCertificate:
    """Certify or refute (almost) lower semicontinuity on a candidate grid.

    ``alsc``: at each candidate x some radius r in {1/2, ..., 2^-20} must give
    a common point of the eps-enlarged values over (x - r, x + r). ``lsc``:
    for sampled v in T(x) (or the given ``targets``), every value over some
    neighborhood must meet the open ball V = (v - eps, v + eps). A candidate
    failing at the smallest radius with a gap that no longer shrinks is a
    refutation; one still shrinking is inconclusive.
    """
    if mode not in ("alsc", "lsc"):
        raise ValueError("mode must be 'alsc' or 'lsc'")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not T.is_interval_valued():
        raise NotImplementedError("continuity certification needs box-valued pieces")
    xs = _candidates(T, omega, grid) if points is None else np.asarray(points, dtype=float).reshape(-1, T.dim)
    d = T.dim
    # sufficient / necessary per-coordinate slack; they coincide in 1-d
    suff = eps / math.sqrt(d)

    def fails(x_arr, r, tv=None):
        sl, ih = neighborhood_envelopes(T, omega, x_arr - r, x_arr + r)
        if mode == "alsc":
            gap = np.max(sl - ih, axis=1)
            return gap > 2 * suff, gap - 2 * eps, gap
        dist = np.sqrt(np.sum(np.maximum(0.0, np.maximum(sl - tv, tv - ih)) ** 2, axis=1))
        return dist >= eps, dist - eps, dist

    if mode == "alsc":
        cert = _scan_radii(T, "alsc", eps, grid, xs, lambda r: fails(xs, r), None)
        if cert.witness is not None:
            cert.witness.update(_alsc_witness(T, omega, np.asarray(cert.witness["x"]), cert.witness["radius"]))
        return cert

    if targets is not None:
        tv_rows = [(x, np.broadcast_to(vec(t), (d,))) for x in xs for t in np.atleast_1d(targets)]
    else:
        tv_rows = []
        for x in xs:
            vs = evaluate(T, omega, x).sample(6)
            tv_rows.extend((x, v) for v in vs)
    xx = np.asarray([r[0] for r in tv_rows])
    tv = np.asarray([r[1] for r in tv_rows])
    cert = _scan_radii(T, "lsc", eps, grid, xx, lambda r: fails(xx, r, tv), tv)
    if cert.witness is not None:
        w = cert.witness
        zs = _near(np.asarray(w["x"]), w["radius"], T)
        dist = [set_distance(w["ball_center"], evaluate(T, omega, z)) for z in zs]
        w["z"] = zs[int(np.argmax(dist))].tolist()
    return cert


def _near(x: np.ndarray, r: float, T: RandomOperator) -> list[np.ndarray]:
    lo, hi = T.domain.bounds()
    steps = np.linspace(-r, r, 33)[1:-1]
    out = []
    for k in range(len(x)):
        for t in steps:
            z = x.copy()
            z[k] += t
            if np.all(z >= lo) and np.all(z <= hi):
                out.append(z)
    return out


def _alsc_witness(T, omega, x, r) -> dict:
    """Two nearby points whose values are farthest apart along some axis."""
    zs = _near(x, r, T)
    lo, hi = interval_bounds(T, omega, np.asarray(zs))
    k = int(np.argmax(np.max(lo, axis=0) - np.min(hi, axis=0)))
    return {"z_high": zs[int(np.argmax(lo[:, k]))].tolist(), "z_low": zs[int(np.argmin(hi[:, k]))].tolist(), "axis": k}


def _scan_radii(T, mode, eps, grid, xs, fails, tv):
    m = len(xs)
    ok_radius = np.full(m, np.nan)
    pending = np.ones(m, dtype=bool)
    last_gap = prev_gap = None
    hard = None
    for r in RADII:
        soft_fail, excess, gap = fails(r)
        good = pending & ~soft_fail
        ok_radius[good] = r
        pending &= soft_fail
        prev_gap, last_gap, hard = last_gap, gap, excess
        if not np.any(pending):
            break
    witness = None
    verdict = "certified"
    if np.any(pending):
        # envelopes are Lipschitz on pieces, so halving r shrinks the defect
        # geometrically; the tail left to remove is at most the last decrement
        stuck = pending & (hard - np.maximum(prev_gap - last_gap, 0.0) > 0)
        idx = int(np.argmax(stuck)) if np.any(stuck) else int(np.argmax(pending))
        verdict = "refuted" if np.any(stuck) else "inconclusive"
        x = xs[idx]
        witness = {"x": x.tolist(), "radius": RADII[-1], "defect": float(last_gap[idx])}
        if mode == "lsc":
            v = tv[idx]
            witness["ball_center"] = v.tolist()
            witness["ball_radius"] = eps
    return ContinuityCertificate(mode, verdict, eps, grid, m, witness, ok_radius)


# ---------------------------------------------------------------------------
# fixed-point sets
# ---------------------------------------------------------------------------


@dataclass
class FixedPointSet:
    """Exact set {x : x in T(omega, x)}.

    1-d: normalized spans. 2-d: list of per-axis span products.
    """

    spans: list[Span] | None = None
    products: list[tuple[list[Span], list[Span]]] | None = None
    points: list[tuple[float, ...]] = field(default_factory=list)

    def is_empty(self) -> bool:
        if self.spans is not None:
            return not self.spans
        return not self.products and not self.points

    def representatives(self) -> list[np.ndarray]:
        """One attained point per component, the smallest where it exists."""
        out = []
        if self.spans is not None:
            for s in self.spans:
                out.append(np.array([_span_rep(s)]))
        else:
            for sx, sy in self.products or []:
                for a in sx:
                    for b in sy:
                        out.append(np.array([_span_rep(a), _span_rep(b)]))
            out.extend(np.asarray(p) for p in self.points)
        return [p for p in out if np.all(np.isfinite(p))]

    def smallest(self) -> np.ndarray | None:
        reps = self.representatives()
        if not reps:
            return None
        return min(reps, key=lambda p: tuple(p.tolist()))


def _span_rep(s: Span) -> float:
    if s.lo_closed and math.isfinite(s.lo):
        return s.lo
    if math.isfinite(s.lo) and math.isfinite(s.hi):
        return 0.5 * (s.lo + s.hi) if s.hi > s.lo else s.lo
    return s.hi if math.isfinite(s.hi) else 0.0


def _fixed_spans_value(T: RandomOperator, val: PieceValue, region: list[Span]) -> list[Span]:
    if isinstance(val, ConstantSet):
        return intersect_spans(region, T.transform(val.value).to_spans())
    lo_p, hi_p = val.envelopes()
    c = T.scale
    below = quad_nonpositive(_shift((c * lo_p[0][0], c * lo_p[0][1] - 1.0, c * lo_p[0][2]), 0.0))
    above = quad_nonpositive((-c * hi_p[0][0], 1.0 - c * hi_p[0][1], -c * hi_p[0][2]))
    if T.retract:
        below = merge_spans(below + [Span(1.0, _INF)])
        above = merge_spans(above + [Span(-_INF, -1.0)])
        region = intersect_spans(region, [Span(-1.0, 1.0)])
    return intersect_spans(intersect_spans(region, below), above)


def fixed_point_set(T: RandomOperator, omega: float | None = None, cell: tuple[float, float] | None = None) -> FixedPointSet:
    """Exact fixed points of T(omega, .), or common ones over an omega cell.

    With ``cell=(a, b)`` and a diagonal operator, x is kept when it is fixed
    for every omega in [a, b]: x must lie in the default set and, if x is in
    the cell, also in its own base value.
    """
    if T.dim == 2:
        return _fixed_point_set_2d(T)
    base_fix = merge_spans(
        s for reg, (_, val) in zip(T.regions, T.pieces) for s in _fixed_spans_value(T, val, reg)
    )
    if T.default is None or (omega is None and cell is None):
        return FixedPointSet(spans=base_fix)
    dfix = intersect_spans(T.transform(T.default).to_spans(), T.domain_spans)
    if cell is not None and cell[1] > cell[0]:
        c = [Span(cell[0], cell[1])]
        keep = merge_spans(subtract_spans(dfix, c) + intersect_spans(intersect_spans(dfix, c), base_fix))
        return FixedPointSet(spans=keep)
    w = float(omega if omega is not None else cell[0])
    out = subtract_spans(dfix, [Span.point(w)])
    if spans_contain(base_fix, w):
        out = merge_spans(out + [Span.point(w)])
    return FixedPointSet(spans=out)


def _fixed_point_set_2d(T: RandomOperator) -> FixedPointSet:
    products = []
    points = []
    for pred, val in T.pieces:
        if pred.points is not None:
            for p in pred.points:
                if T.transform(val.at(np.asarray(p))).contains(p):
                    points.append(tuple(p))
            continue
        env = val.envelopes()
        if env is None:
            raise NotImplementedError("exact 2-d fixed set needs box values")
        lo_p, hi_p = env
        axes = []
        for k in range(2):
            region = [Span(pred.lo[k], pred.hi[k], pred.lo_closed[k], pred.hi_closed[k])]
            sub = IntervalValue(lo_p[k], hi_p[k])
            axes.append(_fixed_spans_value(T, sub, region))
        products.append((axes[0], axes[1]))
    return FixedPointSet(products=products, points=points)


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------


def _margin(env: ValueSet, c: ValueSet) -> float:
    """Largest r with the closed r-enlargement of ``env`` inside ``c``."""
    if env.dim == 1:
        cs = merge_spans(c.to_spans())
        best = _INF
        for s in merge_spans(env.to_spans()):
            host = [t for t in cs if t.lo <= s.lo and s.hi <= t.hi]
            if not host:
                return -_INF
            t = host[0]
            best = min(best, s.lo - t.lo, t.hi - s.hi)
        return best
    if isinstance(c, Ball):
        return c.radius - env.farthest(c.center)
    if isinstance(c, IntervalUnion) and len(c.boxes) == 1:
        lo, hi = c.bounds()
        out = _INF
        for k in range(2):
            e = np.zeros(2)
            e[k] = 1.0
            out = min(out, hi[k] - env.support(e), env.support(-e) * -1 - lo[k])
        return out
    raise NotImplementedError("margin needs a box or ball in 2-d")


def find_n0(T: RandomOperator, c: ValueSet, omegas: Sequence[float | None] = (None,)) -> int:
    """Smallest n0 <= 10^6 with the 1/n0-enlarged range of C inside C."""
    margin = _INF
    envs = []
    for w in omegas:
        env = range_envelope(T, w, c)
        envs.append(env)
        margin = min(margin, _margin(env, c))
    if not margin > 0:
        raise HypothesisError("hypothesis n0 unsatisfiable")
    n0 = max(1, math.ceil(1.0 / margin)) if math.isfinite(margin) else 1

    def fits(n):
        return all(is_subset(set_enlarge(e, 1.0 / n), c) for e in envs)

    while n0 <= N0_LIMIT and not fits(n0):
        n0 += 1
    while n0 > 1 and fits(n0 - 1):
        n0 -= 1
    if n0 > N0_LIMIT:
        raise HypothesisError("hypothesis n0 unsatisfiable")
    return n0


def validate_operator(T: RandomOperator) -> None:
    """Reject gaps, ambiguous overlaps and inverted envelopes."""
    if T.dim == 1:
        covered = merge_spans(s for pred, _ in T.pieces for s in pred.spans())
        gaps = subtract_spans(T.domain_spans, covered)
        if gaps:
            raise ScenarioError(f"pieces leave {gaps[0]} uncovered", "operator.pieces")
        for j, (pj, vj) in enumerate(T.pieces):
            for k in range(j + 1, len(T.pieces)):
                pk, vk = T.pieces[k]
                for s in intersect_spans(pj.spans(), pk.spans()):
                    if s.hi > s.lo:
                        x = np.array([0.5 * (s.lo + s.hi)])
                        if vj.at(x) != vk.at(x):
                            raise ScenarioError(f"pieces {j} and {k} overlap on {s} with different values", "operator.pieces")
        for i, (reg, (_, val)) in enumerate(zip(T.regions, T.pieces)):
            for s in reg:
                lo, hi = s.lo, s.hi
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    continue
                for x in np.linspace(lo, hi, 9):
                    try:
                        v = val.at(np.array([x]))
                    except ScenarioError as exc:
                        raise ScenarioError(str(exc), f"operator.pieces[{i}]") from None
                    if v.is_empty():
                        raise ScenarioError("empty value", f"operator.pieces[{i}]")
    else:
        lo, hi = T.domain.bounds()
        g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 33), np.linspace(lo[1], hi[1], 33)), axis=-1).reshape(-1, 2)
        for x in g:
            T.base_value(x)
    if T.default is not None and T.default.is_empty():
        raise ScenarioError("empty default set", "operator.diagonal.default")


# ---------------------------------------------------------------------------
# omega partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaUnit:
    """A cell [lo, hi] of the partition, or an atom (lo == hi)."""

    kind: str
    index: int
    lo: float
    hi: float

    @property
    def representative(self) -> float:
        return self.lo if self.kind == "atom" else 0.5 * (self.lo + self.hi)

    @property
    def label(self) -> str:
        return f"{self.kind}[{self.index}]"


@dataclass(frozen=True)
class OmegaPartition:
    """Equal-width cells of [a, b] plus distinguished atoms.

    Cells are half-open [t_k, t_{k+1}) except the last, which is closed, so
    they partition [a, b]. Atoms are handled as separate units on top.
    """

    interval: tuple[float, float]
    n_cells: int = 64
    atoms: tuple[float, ...] = ()

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "atoms", tuple(sorted(set(float(w) for w in self.atoms))))
        if not (math.isfinite(a) and math.isfinite(b) and a <= b):
            raise ScenarioError("omega interval must be finite with a <= b", "omega.interval")
        if self.n_cells < 1:
            raise ScenarioError("need at least one cell", "omega.cells")
        for w in self.atoms:
            if not a <= w <= b:
                raise ScenarioError(f"atom {w} outside omega interval", "omega.atoms")

    @cached_property
    def edges(self) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], self.n_cells + 1)

    @property
    def cells(self) -> list[OmegaUnit]:
        e = self.edges
        return [OmegaUnit("cell", k, float(e[k]), float(e[k + 1])) for k in range(self.n_cells)]

    @property
    def atom_units(self) -> list[OmegaUnit]:
        return [OmegaUnit("atom", j, w, w) for j, w in enumerate(self.atoms)]

    def units(self) -> list[OmegaUnit]:
        return self.cells + self.atom_units

    def representatives(self) -> list[float]:
        return [u.representative for u in self.units()]

    def cell_of(self, omega: float) -> int:
        a, b = self.interval
        if not a <= omega <= b:
            raise ValueError("omega outside partition")
        k = int(np.searchsorted(self.edges, omega, side="right")) - 1
        return min(k, self.n_cells - 1)
