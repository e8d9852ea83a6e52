import math

import numpy as np
import pytest

from svfix.correspondence import IntervalValue, PiecePredicate, PointValue, RandomOperator
from svfix.errors import SvfixError
from svfix.geometry import (
    Ball,
    HalfSpace,
    IntervalUnion,
    PointSet,
    RayFrom,
    UnboundedSetError,
    is_subset,
    set_hull,
    set_union,
)
from svfix.noncompactness import Gauge, classify_map, cover_witness, diameter, gauge_union, kuratowski_gauge
from svfix.scenario import identity_operator


def random_set(rng, dim=None):
    dim = dim or int(rng.integers(1, 3))
    kind = rng.integers(5)
    if kind == 0:
        lo = rng.uniform(-5, 5, (int(rng.integers(1, 4)), dim))
        hi = lo + rng.uniform(0, 2, lo.shape)
        return IntervalUnion([tuple(zip(a, b)) for a, b in zip(lo, hi)])
    if kind == 1:
        return PointSet(rng.uniform(-5, 5, (int(rng.integers(1, 5)), dim)))
    if kind == 2:
        return Ball(rng.uniform(-3, 3, dim), float(rng.uniform(0, 2)))
    if kind == 3:
        return HalfSpace(rng.normal(size=dim) + 0.1, float(rng.uniform(-1, 1)))
    return RayFrom(rng.uniform(-1, 1, dim), rng.normal(size=dim) + 0.1)


def test_gauge_examples():
    assert kuratowski_gauge(IntervalUnion.interval(0, 1)) is Gauge.ZERO
    assert kuratowski_gauge(HalfSpace((1.0, 0.0), 0.0)) is Gauge.INFINITE
    s = IntervalUnion([(0, 1), (5, 9)])
    assert kuratowski_gauge(s) is Gauge.ZERO
    assert kuratowski_gauge(set_hull(s)) is kuratowski_gauge(s)
    assert Gauge.ZERO.value_float == 0.0 and Gauge.INFINITE.value_float == math.inf


def test_gauge_zero_iff_bounded(rng):
    for _ in range(200):
        s = random_set(rng)
        assert (kuratowski_gauge(s) is Gauge.ZERO) == s.is_bounded()


def test_gauge_of_hull(rng):
    n = 0
    while n < 200:
        s = random_set(rng)
        if not s.is_bounded():
            continue
        n += 1
        assert kuratowski_gauge(set_hull(s)) is kuratowski_gauge(s)


def test_gauge_of_union_and_monotone(rng):
    for _ in range(200):
        d = int(rng.integers(1, 3))
        a, b = random_set(rng, d), random_set(rng, d)
        u = set_union(a, b)
        assert kuratowski_gauge(u) is max(kuratowski_gauge(a), kuratowski_gauge(b))
        assert gauge_union(a, b) is kuratowski_gauge(u)
        assert kuratowski_gauge(a) <= kuratowski_gauge(u)


def test_monotone_on_nested_sets(rng):
    for _ in range(200):
        lo = rng.uniform(-3, 3)
        inner = IntervalUnion.interval(lo, lo + rng.uniform(0, 1))
        outer = IntervalUnion.interval(lo - 1, lo + 3) if rng.random() < 0.5 else HalfSpace(1.0, lo + 3)
        assert is_subset(inner, outer)
        assert kuratowski_gauge(inner) <= kuratowski_gauge(outer)


def test_cover_unit_interval():
    boxes = cover_witness(IntervalUnion.interval(0, 1), 0.25)
    assert len(boxes) == 4
    for b in boxes:
        assert diameter(b) == pytest.approx(0.25)


def test_cover_ball_2d():
    ball = Ball((0.0, 0.0), 1.0)
    boxes = cover_witness(ball, 0.5)
    side = 0.5 / math.sqrt(2)
    n_axis = math.ceil(2 / side)
    assert len(boxes) <= n_axis**2
    for b in boxes:
        assert diameter(b) <= 0.5 + 1e-12
        assert ball.distance(np.mean(b.corners(), axis=0)) <= 0.5
    rng = np.random.default_rng(3)
    th, r = rng.uniform(0, 2 * np.pi, 2000), np.sqrt(rng.uniform(0, 1, 2000))
    for p in np.stack([r * np.cos(th), r * np.sin(th)], axis=1):
        assert any(b.distance(p) == 0.0 for b in boxes)


def test_cover_singleton():
    boxes = cover_witness(PointSet([0.00005]), 0.1)
    assert len(boxes) == 1 and boxes[0].boxes == (((0.00005, 0.00005),),)


def test_cover_unbounded_raises():
    with pytest.raises(UnboundedSetError):
        cover_witness(HalfSpace(1.0, 0.0), 1.0)


def test_cover_covers_random_sets(rng):
    for _ in range(50):
        s = random_set(rng, 1)
        if not s.is_bounded():
            continue
        e = float(rng.uniform(0.05, 1))
        boxes = cover_witness(s, e)
        for b in boxes:
            assert diameter(b) <= e + 1e-12
        for p in s.sample(32):
            assert any(b.distance(p) <= 1e-12 for b in boxes)


def test_classify_example_base_condensing(t1):
    c = classify_map(t1, None, IntervalUnion.interval(0, 2))
    assert c.kind == "condensing"
    assert any("precompact" in e for e in c.evidence)


def test_classify_identity_one_set_contractive():
    c = classify_map(identity_operator((0.0, 1.0)), None, IntervalUnion.interval(0, 1))
    assert c.kind == "k-set-contractive" and c.k == 1.0


def test_classify_scaled_identity_condensing():
    c = classify_map(identity_operator((0.0, 1.0)).scaled(1 - 1 / 8), None, IntervalUnion.interval(0, 1))
    assert c.kind == "condensing" and c.k == pytest.approx(0.875)


def test_classify_unbounded_domain():
    c = classify_map(identity_operator((0.0, 1.0)), None, HalfSpace(1.0, 0.0))
    assert c.kind == "unclassified"


def test_classify_reports_failing_piece():
    class Broken(PointValue):
        def at(self, x):
            raise ArithmeticError("boom")

    T = RandomOperator(
        ((PiecePredicate.interval(0, 0.5), IntervalValue([0.0], [1.0])), (PiecePredicate.interval(0.5, 1), Broken([0.2]))),
        IntervalUnion.interval(0, 1),
    )
    with pytest.raises(SvfixError, match="piece 1"):
        classify_map(T, None, IntervalUnion.interval(0, 1))
