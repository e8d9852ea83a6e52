"""JSON scenario schema, parsing, emission and the two builtin scenarios.

Schema (all keys lower case)::

    {
      "dimension": 1,
      "domain": [[lo, hi]],                      # one [lo, hi] per axis
      "operator": {
        "pieces": [{"when": <predicate>, "value": <piece value>}, ...],
        "diagonal": {"default": <valueset>}      # optional, d = 1 only
      },
      "omega": {"interval": [a, b], "cells": 64, "atoms": [..]},
      "frame": {"inner": 1, "outer": 2},         # optional
      "c": <valueset>,                           # optional, defaults to domain
      "params": {"tol": 1e-9, "n_max": 256, "grid": 10000, "n": 64}
    }

Predicates: ``{"interval": [lo, hi], "closed": [true, false]}``,
``{"box": [[lo, hi], [lo, hi]], "lo_closed": [..], "hi_closed": [..]}`` or
``{"points": [x, ...]}``. Piece values: ``{"point": [c0, c1, c2]}`` (one
triple per output coordinate in 2-d), ``{"interval": {"lo": [..], "hi": [..]}}``
or ``{"set": <valueset>}``. Infinite bounds are written "inf" / "-inf".
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .correspondence import (
    ConstantSet,
    IntervalValue,
    OmegaPartition,
    PiecePredicate,
    PieceValue,
    PointValue,
    RandomOperator,
    validate_operator,
)
from .errors import ScenarioError
from .geometry import (
    Ball,
    HalfSpace,
    IntervalUnion,
    Neighborhood,
    PointSet,
    Polytope,
    RayFrom,
    UnionSet,
    UnitBallFrame,
    ValueSet,
)


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-9
    n_max: int = 256
    grid: int = 10_000
    homotopy_n: int = 64


@dataclass(frozen=True)
class Scenario:
    name: str
    operator: RandomOperator
    omega: OmegaPartition
    c: ValueSet
    frame: UnitBallFrame | None = None
    params: SolverParams = field(default_factory=SolverParams)
    notes: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.operator.dim

    def with_params(self, **kw) -> "Scenario":
        return replace(self, params=replace(self.params, **{k: v for k, v in kw.items() if v is not None}))

    def with_cells(self, n: int | None) -> "Scenario":
        if n is None:
            return self
        return replace(self, omega=OmegaPartition(self.omega.interval, n, self.omega.atoms))


# ---------------------------------------------------------------------------
# numbers
# ---------------------------------------------------------------------------


def _num(v, ptr: str) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        raise ScenarioError(f"expected a number, got {v!r}", ptr)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {v!r}", ptr)
    return float(v)


def _enc(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _need(obj: dict, key: str, ptr: str):
    if not isinstance(obj, dict):
        raise ScenarioError("expected an object", ptr)
    if key not in obj:
        raise ScenarioError(f"missing field '{key}'", ptr)
    return obj[key]


def _nums(seq, ptr: str) -> list[float]:
    if not isinstance(seq, list):
        raise ScenarioError("expected a list", ptr)
    return [_num(v, f"{ptr}[{i}]") for i, v in enumerate(seq)]


# ---------------------------------------------------------------------------
# value sets
# ---------------------------------------------------------------------------


def parse_valueset(obj: Any, ptr: str) -> ValueSet:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ScenarioError("value set must be an object with exactly one key", ptr)
    (kind, body), = obj.items()
    p = f"{ptr}.{kind}"
    try:
        if kind == "points":
            return PointSet([_nums(v if isinstance(v, list) else [v], f"{p}") for v in body])
        if kind == "intervals":
            return IntervalUnion([((lo, hi),) for lo, hi in (_nums(b, p) for b in body)])
        if kind == "boxes":
            return IntervalUnion([tuple(tuple(_nums(ax, p)) for ax in b) for b in body])
        if kind == "ball":
            return Ball(_nums(_need(body, "center", p), p), _num(_need(body, "radius", p), p), bool(body.get("closed", True)))
        if kind == "polytope":
            return Polytope([_nums(v, p) for v in body])
        if kind == "halfspace":
            return HalfSpace(_nums(_need(body, "normal", p), p), _num(_need(body, "offset", p), p))
        if kind == "ray":
            return RayFrom(_nums(_need(body, "origin", p), p), _nums(_need(body, "direction", p), p), bool(body.get("closed", True)))
        if kind == "neighborhood":
            return Neighborhood(parse_valueset(_need(body, "base", p), f"{p}.base"), _num(_need(body, "radius", p), p))
        if kind == "union":
            return UnionSet([parse_valueset(v, f"{p}[{i}]") for i, v in enumerate(body)])
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), p) from None
    raise ScenarioError(f"unknown value set kind '{kind}'", ptr)


def emit_valueset(s: ValueSet) -> dict:
    if isinstance(s, PointSet):
        return {"points": [list(p) for p in s.points]}
    if isinstance(s, IntervalUnion):
        if s.dim == 1:
            return {"intervals": [[_enc(b[0][0]), _enc(b[0][1])] for b in s.boxes]}
        return {"boxes": [[[_enc(lo), _enc(hi)] for lo, hi in b] for b in s.boxes]}
    if isinstance(s, Ball):
        return {"ball": {"center": list(s.center), "radius": s.radius, "closed": s.closed}}
    if isinstance(s, Polytope):
        return {"polytope": s.array.tolist()}
    if isinstance(s, HalfSpace):
        return {"halfspace": {"normal": list(s.normal), "offset": s.offset}}
    if isinstance(s, RayFrom):
        return {"ray": {"origin": list(s.origin), "direction": list(s.direction), "closed": s.closed}}
    if isinstance(s, Neighborhood):
        return {"neighborhood": {"base": emit_valueset(s.base), "radius": s.radius}}
    if isinstance(s, UnionSet):
        return {"union": [emit_valueset(p) for p in s.parts]}
    raise TypeError(f"cannot emit {type(s).__name__}")


# ---------------------------------------------------------------------------
# pieces
# ---------------------------------------------------------------------------


def parse_predicate(obj: Any, ptr: str, dim: int) -> PiecePredicate:
    if not isinstance(obj, dict):
        raise ScenarioError("predicate must be an object", ptr)
    if "points" in obj:
        pts = [_nums(v if isinstance(v, list) else [v], f"{ptr}.points") for v in obj["points"]]
        if any(len(v) != dim for v in pts):
            raise ScenarioError("point dimension mismatch", f"{ptr}.points")
        return PiecePredicate.at(*pts)
    if "interval" in obj:
        if dim != 1:
            raise ScenarioError("interval predicate in a 2-d scenario", ptr)
        lo, hi = _nums(obj["interval"], f"{ptr}.interval")
        closed = obj.get("closed", [True, True])
        return PiecePredicate.interval(lo, hi, tuple(bool(c) for c in closed))
    if "box" in obj:
        axes = [_nums(ax, f"{ptr}.box") for ax in obj["box"]]
        if len(axes) != dim:
            raise ScenarioError("box dimension mismatch", f"{ptr}.box")
        return PiecePredicate.box(
            [a[0] for a in axes], [a[1] for a in axes], obj.get("lo_closed"), obj.get("hi_closed")
        )
    raise ScenarioError("predicate needs 'interval', 'box' or 'points'", ptr)


def emit_predicate(p: PiecePredicate) -> dict:
    if p.points is not None:
        return {"points": [list(q) if len(q) > 1 else q[0] for q in p.points]}
    if p.dim == 1:
        return {"interval": [_enc(p.lo[0]), _enc(p.hi[0])], "closed": [p.lo_closed[0], p.hi_closed[0]]}
    return {
        "box": [[_enc(a), _enc(b)] for a, b in zip(p.lo, p.hi)],
        "lo_closed": list(p.lo_closed),
        "hi_closed": list(p.hi_closed),
    }


def _coeffs(obj, ptr: str, dim: int) -> list:
    if isinstance(obj, list) and obj and isinstance(obj[0], list):
        rows = [_nums(r, f"{ptr}[{i}]") for i, r in enumerate(obj)]
    else:
        rows = [_nums(obj if isinstance(obj, list) else [obj], ptr)]
    if len(rows) != dim:
        raise ScenarioError(f"expected {dim} coefficient triple(s)", ptr)
    if any(len(r) > 3 for r in rows):
        raise ScenarioError("polynomial degree must be at most 2", ptr)
    return rows


def parse_piece_value(obj: Any, ptr: str, dim: int) -> PieceValue:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ScenarioError("piece value must be an object with one key", ptr)
    (kind, body), = obj.items()
    if kind == "point":
        return PointValue(*_coeffs(body, f"{ptr}.point", dim))
    if kind == "interval":
        lo = _coeffs(_need(body, "lo", f"{ptr}.interval"), f"{ptr}.interval.lo", dim)
        hi = _coeffs(_need(body, "hi", f"{ptr}.interval"), f"{ptr}.interval.hi", dim)
        return IntervalValue(lo, hi)
    if kind == "set":
        return ConstantSet(parse_valueset(body, f"{ptr}.set"))
    raise ScenarioError(f"unknown piece value kind '{kind}'", ptr)


def emit_piece_value(v: PieceValue) -> dict:
    if isinstance(v, PointValue):
        return {"point": [list(c) for c in v.coeffs]}
    if isinstance(v, IntervalValue):
        return {"interval": {"lo": [list(c) for c in v.lo], "hi": [list(c) for c in v.hi]}}
    if isinstance(v, ConstantSet):
        return {"set": emit_valueset(v.value)}
    raise TypeError(type(v).__name__)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def parse_scenario(obj: Any, name: str = "scenario") -> Scenario:
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object", "$")
    dim = obj.get("dimension", 1)
    if dim not in (1, 2):
        raise ScenarioError("dimension must be 1 or 2", "dimension")
    dom = _need(obj, "domain", "$")
    if not isinstance(dom, list) or len(dom) != dim:
        raise ScenarioError(f"domain needs {dim} [lo, hi] pair(s)", "domain")
    axes = [_nums(ax, f"domain[{k}]") for k, ax in enumerate(dom)]
    if any(len(a) != 2 or not a[0] <= a[1] for a in axes):
        raise ScenarioError("each domain axis must be [lo, hi] with lo <= hi", "domain")
    domain = IntervalUnion.box([a[0] for a in axes], [a[1] for a in axes])
    if not domain.is_bounded():
        raise ScenarioError("domain must be bounded", "domain")

    op = _need(obj, "operator", "$")
    raw = _need(op, "pieces", "operator")
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("need at least one piece", "operator.pieces")
    pieces = []
    for i, pc in enumerate(raw):
        ptr = f"operator.pieces[{i}]"
        pieces.append(
            (
                parse_predicate(_need(pc, "when", ptr), f"{ptr}.when", dim),
                parse_piece_value(_need(pc, "value", ptr), f"{ptr}.value", dim),
            )
        )
    default = None
    if "diagonal" in op:
        default = parse_valueset(_need(op["diagonal"], "default", "operator.diagonal"), "operator.diagonal.default")

    frame = None
    if "frame" in obj:
        fr = obj["frame"]
        frame = UnitBallFrame(_num(fr.get("inner", 1.0), "frame.inner"), _num(fr.get("outer", 2.0), "frame.outer"))
    try:
        T = RandomOperator(tuple(pieces), domain, default, frame, name=name)
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), "operator") from None
    validate_operator(T)

    om = obj.get("omega", {"interval": axes[0], "cells": 1, "atoms": []})
    omega = OmegaPartition(
        tuple(_nums(_need(om, "interval", "omega"), "omega.interval")),
        int(om.get("cells", 64)),
        tuple(_nums(om.get("atoms", []), "omega.atoms")),
    )
    c = parse_valueset(obj["c"], "c") if "c" in obj else domain
    pr = obj.get("params", {})
    params = SolverParams(
        tol=_num(pr.get("tol", 1e-9), "params.tol"),
        n_max=int(pr.get("n_max", 256)),
        grid=int(pr.get("grid", 10_000)),
        homotopy_n=int(pr.get("n", 64)),
    )
    notes = tuple(str(n) for n in obj.get("notes", []))
    return Scenario(str(obj.get("name", name)), T, omega, c, frame, params, notes)


def emit_scenario(s: Scenario) -> dict:
    T = s.operator
    lo, hi = T.domain.bounds()
    op: dict = {"pieces": [{"when": emit_predicate(p), "value": emit_piece_value(v)} for p, v in T.pieces]}
    if T.default is not None:
        op["diagonal"] = {"default": emit_valueset(T.default)}
    out: dict = {
        "name": s.name,
        "dimension": T.dim,
        "domain": [[_enc(a), _enc(b)] for a, b in zip(lo.tolist(), hi.tolist())],
        "operator": op,
        "omega": {"interval": list(s.omega.interval), "cells": s.omega.n_cells, "atoms": list(s.omega.atoms)},
        "c": emit_valueset(s.c),
        "params": {"tol": s.params.tol, "n_max": s.params.n_max, "grid": s.params.grid, "n": s.params.homotopy_n},
    }
    if s.frame is not None:
        out["frame"] = {"inner": s.frame.radius_inner, "outer": s.frame.radius_outer}
    if s.notes:
        out["notes"] = list(s.notes)
    return out


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (line {exc.lineno})", str(p)) from None
    except OSError as exc:
        raise ScenarioError(str(exc), str(p)) from None
    return parse_scenario(obj, p.stem)


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(emit_scenario(s), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

HALF_SQ = [0.0, 0.0, 0.5]
HALF_SHIFT = {"lo": [-2.0, 0.0, 0.5], "hi": [2.0, 0.0, 0.5]}

EXAMPLE1 = {
    "name": "example1",
    "dimension": 1,
    "domain": [[0.0, 2.0]],
    "operator": {
        "pieces": [
            {"when": {"interval": [0.0, 0.01]}, "value": {"point": [0.00005]}},
            {"when": {"points": [15 / 32]}, "value": {"interval": {"lo": [0.1], "hi": [0.5]}}},
            {"when": {"interval": [0.01, 15 / 32], "closed": [False, False]}, "value": {"point": HALF_SQ}},
            {"when": {"interval": [15 / 32, 1.0], "closed": [False, True]}, "value": {"point": HALF_SQ}},
            {"when": {"interval": [1.0, 2.0], "closed": [False, True]}, "value": {"point": [0.5]}},
        ],
        "diagonal": {"default": {"intervals": [[0.00005, 0.5]]}},
    },
    "omega": {"interval": [0.0, 2.0], "cells": 64, "atoms": [0.00005, 15 / 32, 1.0]},
    "c": {"intervals": [[0.0, 2.0]]},
    "notes": ["state space [0, inf) and omega space truncated to [0, 2]"],
}

EXAMPLE2 = {
    "name": "example2",
    "dimension": 1,
    "domain": [[-2.0, 2.0]],
    "operator": {
        "pieces": [
            {"when": {"interval": [-0.01, 0.01]}, "value": {"interval": {"lo": [-1.99995], "hi": [2.00005]}}},
            {"when": {"points": [-15 / 32, 15 / 32]}, "value": {"interval": {"lo": [-1.9], "hi": [2.5]}}},
            {"when": {"interval": [-1.0, -15 / 32], "closed": [True, False]}, "value": {"interval": HALF_SHIFT}},
            {"when": {"interval": [-15 / 32, -0.01], "closed": [False, False]}, "value": {"interval": HALF_SHIFT}},
            {"when": {"interval": [0.01, 15 / 32], "closed": [False, False]}, "value": {"interval": HALF_SHIFT}},
            {"when": {"interval": [15 / 32, 1.0], "closed": [False, True]}, "value": {"interval": HALF_SHIFT}},
            {"when": {"interval": [-2.0, -1.0], "closed": [True, False]}, "value": {"interval": {"lo": [-1.5], "hi": [2.5]}}},
            {"when": {"interval": [1.0, 2.0], "closed": [False, True]}, "value": {"interval": {"lo": [-1.5], "hi": [2.5]}}},
        ],
        "diagonal": {"default": {"intervals": [[-1.99995, 2.5]]}},
    },
    "omega": {"interval": [-2.0, 2.0], "cells": 64, "atoms": [-15 / 32, 15 / 32, 1.0]},
    "frame": {"inner": 1.0, "outer": 2.0},
    "c": {"intervals": [[-2.0, 2.0]]},
}

BUILTINS = {"example1": EXAMPLE1, "example2": EXAMPLE2}


def builtin(name: str) -> Scenario:
    if name not in BUILTINS:
        raise ScenarioError(f"unknown builtin '{name}' (known: {', '.join(sorted(BUILTINS))})", "--builtin")
    return parse_scenario(json.loads(json.dumps(BUILTINS[name])), name)


def example1_base() -> RandomOperator:
    """The base map of the first builtin without the diagonal combinator."""
    return builtin("example1").operator.base()


def example2_base() -> RandomOperator:
    return builtin("example2").operator.base()


def constant_operator(lo: float, hi: float, domain=(0.0, 1.0), name: str = "constant") -> RandomOperator:
    """T(x) = [lo, hi] on a 1-d domain; a test and demo fixture."""
    return RandomOperator(
        ((PiecePredicate.interval(*domain), IntervalValue([lo], [hi])),),
        IntervalUnion.interval(*domain),
        name=name,
    )


def identity_operator(domain=(0.0, 1.0)) -> RandomOperator:
    return RandomOperator(
        ((PiecePredicate.interval(*domain), PointValue([0.0, 1.0])),),
        IntervalUnion.interval(*domain),
        name="identity",
    )


def as_array(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))
