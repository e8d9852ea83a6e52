"""Kuratowski measure of noncompactness in R^d and a contraction classifier.

In finite dimensions every bounded set is precompact, so the measure only
takes the values 0 and infinity. The classifier therefore reports a
diameter expansion ratio as supporting evidence and says so.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .correspondence import RandomOperator, range_envelope
from .errors import SvfixError
from .geometry import (
    Ball,
    IntervalUnion,
    PointSet,
    Span,
    UnboundedSetError,
    ValueSet,
    intersect_spans,
)

RATIO_TOL = 1e-12


class Gauge(enum.IntEnum):
    ZERO = 0
    INFINITE = 1

    @property
    def value_float(self) -> float:
        return 0.0 if self is Gauge.ZERO else math.inf


def kuratowski_gauge(s: ValueSet) -> Gauge:
    """0 for bounded (hence precompact) sets, infinity otherwise."""
    if s.is_empty():
        return Gauge.ZERO
    return Gauge.ZERO if s.is_bounded() else Gauge.INFINITE


def gauge_union(*sets: ValueSet) -> Gauge:
    return max((kuratowski_gauge(s) for s in sets), default=Gauge.ZERO)


def _box_meets(s: ValueSet, lo: np.ndarray, hi: np.ndarray) -> bool:
    if s.dim == 1:
        return bool(intersect_spans(s.to_spans(), [Span(lo[0], hi[0])]))
    if isinstance(s, Ball):
        c = np.asarray(s.center)
        return float(np.linalg.norm(c - np.clip(c, lo, hi))) <= s.radius
    if isinstance(s, PointSet):
        a = s.array
        return bool(np.any(np.all((a >= lo) & (a <= hi), axis=1)))
    if isinstance(s, IntervalUnion):
        return any(all(b[k][0] <= hi[k] and lo[k] <= b[k][1] for k in range(2)) for b in s.boxes)
    # generic: keep the box when its center is within a half diagonal
    return s.distance(0.5 * (lo + hi)) <= 0.5 * float(np.linalg.norm(hi - lo))


def cover_witness(s: ValueSet, e: float) -> list[IntervalUnion]:
    """Finitely many boxes of diameter <= e covering ``s``.

    Boxes have side e / sqrt(d) and come from a grid over the bounding box;
    only boxes meeting ``s`` are kept.
    """
    if not e > 0:
        raise ValueError("cover diameter must be positive")
    if not s.is_bounded():
        raise UnboundedSetError("cover of unbounded set")
    lo, hi = s.bounds()
    d = s.dim
    side = e / math.sqrt(d)
    axes = []
    for k in range(d):
        extent = float(hi[k] - lo[k])
        n = max(1, math.ceil(extent / side - 1e-12))
        edges = lo[k] + side * np.arange(n + 1)
        edges[-1] = min(edges[-1], hi[k]) if extent > 0 else lo[k]
        axes.append(list(zip(edges[:-1], edges[1:])) if extent > 0 else [(lo[k], lo[k])])
    out = []
    for idx in np.ndindex(*(len(a) for a in axes)):
        blo = np.array([axes[k][i][0] for k, i in enumerate(idx)])
        bhi = np.array([axes[k][i][1] for k, i in enumerate(idx)])
        if _box_meets(s, blo, bhi):
            out.append(IntervalUnion.box(blo, bhi))
    return out


def diameter(s: ValueSet) -> float:
    if s.is_empty():
        return 0.0
    if not s.is_bounded():
        return math.inf
    if s.dim == 1:
        lo, hi = s.bounds()
        return float(hi[0] - lo[0])
    if isinstance(s, Ball):
        return 2 * s.radius
    pts = s.corners() if isinstance(s, IntervalUnion) else s.sample(256)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.max(np.linalg.norm(diff, axis=2)))


@dataclass
class ContractionClass:
    kind: str  # "condensing", "k-set-contractive" or "unclassified"
    k: float | None = None
    ratio: float | None = None
    evidence: list[str] = field(default_factory=list)
    witnesses: list[tuple[ValueSet, ValueSet]] = field(default_factory=list)


def _dyadic_boxes(domain: ValueSet, levels: int):
    lo, hi = domain.bounds()
    for lev in range(levels + 1):
        n = 2**lev
        edges = [np.linspace(lo[k], hi[k], n + 1) for k in range(domain.dim)]
        for idx in np.ndindex(*([n] * domain.dim)):
            blo = [edges[k][i] for k, i in enumerate(idx)]
            bhi = [edges[k][i + 1] for k, i in enumerate(idx)]
            yield IntervalUnion.box(blo, bhi)


def classify_map(T: RandomOperator, omega: float | None, domain: ValueSet, levels: int | None = None) -> ContractionClass:
    """Condensing / k-set-contractive classification with evidence.

    The reported ratio is sup diam(T(A)) / diam(A) over dyadic sub-boxes A of
    the domain. A ratio of exactly 1 is reported as 1-set-contractive; any
    other finite ratio gives condensing, strictly when below 1 and vacuously
    otherwise (no bounded A has positive measure).
    """
    if not domain.is_bounded():
        return ContractionClass("unclassified", evidence=["domain unbounded: measure of the domain is infinite"])
    for i, (pred, val) in enumerate(T.pieces):
        try:
            if pred.points is not None:
                for p in pred.points:
                    val.at(np.asarray(p))
            elif T.dim == 1 and T.regions[i]:
                s = T.regions[i][0]
                val.at(np.array([0.5 * (s.lo + s.hi)]))
        except Exception as exc:  # noqa: BLE001 - re-raised with the piece id
            raise SvfixError(f"evaluation failed on piece {i}: {exc}") from exc
    levels = levels if levels is not None else (10 if T.dim == 1 else 5)
    whole = range_envelope(T, omega, domain)
    if kuratowski_gauge(whole) is Gauge.INFINITE:
        return ContractionClass("unclassified", evidence=["range envelope unbounded"], witnesses=[(domain, whole)])
    ratio = 0.0
    worst = None
    for a in _dyadic_boxes(domain, levels):
        da = diameter(a)
        if da <= 0:
            continue
        ta = range_envelope(T, omega, a)
        r = diameter(ta) / da
        if r > ratio:
            ratio, worst = r, (a, ta)
    ev = [
        "finite dimension: every bounded set is precompact, so the measure is 0 on bounded sets",
        f"range envelope of the domain is bounded: {whole}",
        f"dyadic diameter ratio sup diam(T(A))/diam(A) = {ratio:.12g} over {levels} levels",
    ]
    wit = [(domain, whole)] + ([worst] if worst else [])
    if abs(ratio - 1.0) <= RATIO_TOL:
        return ContractionClass("k-set-contractive", 1.0, ratio, ev + ["ratio 1: reported as 1-set-contractive"], wit)
    if ratio < 1.0:
        return ContractionClass("condensing", ratio, ratio, ev + ["ratio below 1: strictly contracting diameters"], wit)
    return ContractionClass(
        "condensing", None, ratio, ev + ["no subset has positive measure: condensing holds vacuously"], wit
    )
