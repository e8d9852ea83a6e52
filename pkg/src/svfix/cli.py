"""Command-line front end: ``svfix <command> (--builtin NAME | --scenario PATH) [flags]``.

Exit codes: 0 success, 2 verification failed, 3 no fixed point,
4 invalid scenario (the message names the offending field).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .correspondence import FrozenCorrespondence, OmegaUnit, certify_continuity, certify_inverse_closed, find_n0
from .errors import HypothesisError, NoFixedPointError, ScenarioError, SelectionError, SvfixError
from .geometry import UnitBallFrame, ValueSet
from .noncompactness import classify_map, diameter
from .random_driver import (
    ApproximationReport,
    RandomSelection,
    boundary_random,
    homotopy_random,
    random_approximation,
    random_solve,
    verify_pair,
)
from .scenario import Scenario, builtin, load_scenario
from .solver import CONDITIONS, oracle_scan

COMMANDS = ("certify", "solve", "approx", "verify", "homotopy", "boundary", "oracle")
EXIT_OK, EXIT_VERIFY, EXIT_NOFIX, EXIT_SCENARIO = 0, 2, 3, 4
CSV_HEADER = ["cell_index", "omega_rep", "xi", "eta", "residual", "d_pair", "d_ball", "d_inward"]


@dataclass
class Report:
    command: str
    scenario: str
    flags: dict
    exit_code: int = EXIT_OK
    verdict: str = ""
    certificates: dict = field(default_factory=dict)
    cells: list[dict] = field(default_factory=list)
    result: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def body(self) -> dict:
        """Everything except timings; byte-stable for identical inputs."""
        return {
            "command": self.command,
            "scenario": self.scenario,
            "flags": self.flags,
            "exit_code": self.exit_code,
            "verdict": self.verdict,
            "certificates": self.certificates,
            "cells": self.cells,
            "result": self.result,
            "notes": self.notes,
        }

    def to_json(self, timings: bool = True) -> str:
        out = self.body()
        if timings:
            out["timings"] = self.timings
        return json.dumps(_plain(out), indent=2, sort_keys=True)


def _plain(v: Any):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else ("inf" if f > 0 else ("-inf" if f < 0 else "nan"))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, ValueSet):
        return repr(v)
    return v


def _scalar(x: np.ndarray):
    x = np.asarray(x, dtype=float).ravel()
    return float(x[0]) if x.size == 1 else x.tolist()


def _unit_row(i: int, u: OmegaUnit, **kw) -> dict:
    row = {"cell_index": i, "unit": u.label, "omega_rep": u.representative}
    for k, v in kw.items():
        row[k] = _scalar(v) if isinstance(v, np.ndarray) else v
    return row


def _selection_rows(sel: RandomSelection) -> list[dict]:
    return [
        _unit_row(i, u, xi=x, eta=x, residual=r, d_pair=0.0, d_ball=None, d_inward=None)
        for i, (u, x, r) in enumerate(zip(sel.units, sel.values, sel.residuals))
    ]


def _pair_rows(rep: ApproximationReport) -> list[dict]:
    return [
        _unit_row(
            i,
            r.unit,
            xi=r.xi,
            eta=r.eta,
            residual=r.residual,
            membership=r.membership,
            retraction_ok=r.retraction_ok,
            d_pair=r.d_pair,
            d_ball=r.d_ball,
            d_inward=r.d_inward,
            ok=r.ok,
        )
        for i, r in enumerate(rep.rows)
    ]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, list):
        return ";".join(repr(float(a)) for a in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in CSV_HEADER])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_certify(s: Scenario, flags: dict, rep: Report) -> int:
    T, P = s.operator, s.omega
    reps = [u.representative if T.diagonal else None for u in P.units()]
    n0 = find_n0(T, s.c, reps if T.diagonal else [None])
    eps = 1.0 / n0
    grid = max(65, min(int(flags["grid"]), 4001))
    rep.certificates["n0"] = n0
    per = {}
    refuted = False
    for w in dict.fromkeys(reps):
        al = certify_continuity(T, w, "alsc", eps, grid=grid) if T.is_interval_valued() else None
        ic = certify_inverse_closed(T, w) if T.dim == 1 else None
        cls = classify_map(T, w, s.c)
        entry = {
            "alsc": al.verdict if al else "inconclusive",
            "inverse_closed": ic.verdict if ic else "inconclusive",
            "classification": cls.kind,
            "ratio": cls.ratio,
        }
        refuted |= entry["alsc"] == "refuted" or entry["inverse_closed"] == "refuted"
        per["none" if w is None else repr(w)] = entry
    lsc = certify_continuity(T.base(), None, "lsc", eps, grid=grid)
    rep.certificates["per_omega"] = per
    rep.certificates["lsc_base"] = {"verdict": lsc.verdict, "witness": lsc.witness}
    rep.verdict = "refuted" if refuted else "certified"
    return EXIT_VERIFY if refuted else EXIT_OK


def _cmd_solve(s: Scenario, flags: dict, rep: Report) -> int:
    sel = random_solve(s.operator, s.omega, s.c, s.params.tol, s.params.n_max)
    rep.certificates = {k: v for k, v in sel.hypotheses.items()}
    rep.cells = _selection_rows(sel)
    rep.result = {
        "uniform": sel.uniform,
        "xi": _scalar(sel.values[0]) if sel.uniform else None,
        "sup_residual": sel.sup_residual,
        "measurability": sel.measurability,
    }
    rep.notes += sel.notes
    rep.verdict = "random fixed point"
    return EXIT_OK


def _pair_report(r: ApproximationReport, rep: Report, tol: float) -> int:
    rep.cells = _pair_rows(r)
    bad = r.first_failure()
    rep.result = {
        "uniform": r.xi.uniform if r.xi else None,
        "max_membership": max(x.membership for x in r.rows),
        "max_residual": max(x.residual for x in r.rows),
        "max_equality_gap": max(max(abs(x.d_pair - x.d_ball), abs(x.d_ball - x.d_inward)) for x in r.rows),
        "failing_cell": None if bad is None else bad.unit.label,
    }
    rep.notes += r.notes
    rep.verdict = "verified" if r.verdict else "failed"
    return EXIT_OK if r.verdict else EXIT_VERIFY


def _cmd_approx(s: Scenario, flags: dict, rep: Report) -> int:
    r = random_approximation(s.operator, s.omega, s.params.tol, s.frame, s.params.n_max)
    return _pair_report(r, rep, s.params.tol)


def _cmd_verify(s: Scenario, flags: dict, rep: Report) -> int:
    if flags.get("xi") is None:
        raise ScenarioError("verify needs a value", "--xi")
    xi = np.asarray(flags["xi"], dtype=float)
    eta = None if flags.get("eta") is None else np.asarray(flags["eta"], dtype=float)
    r = verify_pair(s.operator, s.omega, xi, eta, tol=s.params.tol, frame=s.frame)
    return _pair_report(r, rep, s.params.tol)


def _cmd_homotopy(s: Scenario, flags: dict, rep: Report) -> int:
    h = homotopy_random(s.operator, s.omega, s.c, s.params.homotopy_n, s.params.tol)
    rep.cells = [
        _unit_row(
            i, u.unit, xi=u.limit, eta=u.limit, residual=u.residual, max_gap_times_n=u.max_gap_times_n,
            cauchy=u.cauchy, source=u.source,
        )
        for i, u in enumerate(h.units)
    ]
    rep.certificates = {"premise": h.premise, "diam_c": h.diam, "n": s.params.homotopy_n}
    rep.result = {"uniform": h.selection.uniform, "sup_residual": h.selection.sup_residual}
    rep.verdict = "random fixed point" if h.premise else "premise failed"
    return EXIT_OK if h.premise else EXIT_VERIFY


def _cmd_boundary(s: Scenario, flags: dict, rep: Report) -> int:
    b = boundary_random(s.operator, s.omega, flags["conditions"], s.params.tol, s.frame)
    rows = _pair_rows(b.approximation)
    for row, u in zip(rows, b.units):
        row["status"] = u.status
        row["conditions"] = {v.condition: v.holds for v in u.verdicts}
    rep.cells = rows
    rep.result = {"status": b.status, "conditions": list(flags["conditions"])}
    rep.verdict = b.status
    return EXIT_OK if b.selection is not None else EXIT_NOFIX


def _cmd_oracle(s: Scenario, flags: dict, rep: Report) -> int:
    T = s.operator
    d = diameter(s.c)
    res = d / max(1, int(flags["grid"])) if math.isfinite(d) and d > 0 else 1e-4
    found = True
    units = s.omega.units() if T.diagonal else s.omega.units()[:1]
    for i, u in enumerate(units):
        w = u.representative if T.diagonal else None
        o = oracle_scan(FrozenCorrespondence(T, w), s.c, res)
        pts = [_scalar(p) for p in o.points]
        rep.cells.append(
            _unit_row(i, u, residual=o.min_residual, minimizers=pts[:64], n_minimizers=len(pts), grid_size=o.grid_size)
        )
        found &= o.min_residual <= s.params.tol
    rep.result = {"resolution": res, "all_zero": found}
    rep.verdict = "fixed points found" if found else "positive minimum"
    return EXIT_OK if found else EXIT_NOFIX


DISPATCH = {
    "certify": _cmd_certify,
    "solve": _cmd_solve,
    "approx": _cmd_approx,
    "verify": _cmd_verify,
    "homotopy": _cmd_homotopy,
    "boundary": _cmd_boundary,
    "oracle": _cmd_oracle,
}


def _flags_for_report(flags: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(flags.items()) if k not in ("report", "csv")}


def run_scenario(command: str, scenario: Scenario, flags: dict | None = None) -> tuple[Report, int]:
    """Run one command; library errors are mapped to exit codes in the report."""
    if command not in DISPATCH:
        raise ValueError(f"unknown command {command!r}")
    flags = {"grid": scenario.params.grid, "conditions": list(CONDITIONS), **(flags or {})}
    rep = Report(command, scenario.name, _flags_for_report(flags))
    rep.notes += list(scenario.notes)
    t0 = time.perf_counter()
    try:
        code = DISPATCH[command](scenario, flags, rep)
    except NoFixedPointError as exc:
        code, rep.verdict = EXIT_NOFIX, "no fixed point"
        rep.result["error"] = str(exc)
    except (HypothesisError, SelectionError) as exc:
        code, rep.verdict = EXIT_VERIFY, "hypothesis failed"
        rep.result["error"] = str(exc)
    rep.timings["total_s"] = time.perf_counter() - t0
    rep.exit_code = code
    return rep, code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _vector(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or comma-separated vector: {text!r}") from None
    return vals


def _conditions(text: str) -> list[str]:
    out = [t.strip() for t in text.split(",") if t.strip()]
    bad = [c for c in out if c not in CONDITIONS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown condition(s) {bad}; choose from {','.join(CONDITIONS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svfix", description="Random fixed points of set-valued operators.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="JSON scenario file")
    src.add_argument("--builtin", metavar="NAME", help="example1 or example2")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance (default 1e-9)")
    p.add_argument("--grid", type=int, default=None, help="oracle / certificate grid size (default 10000)")
    p.add_argument("--omega-cells", type=int, default=None, help="number of omega cells (default 64)")
    p.add_argument("--n-max", type=int, default=None, help="outer loop cap (default 256)")
    p.add_argument("--n", type=int, default=None, dest="homotopy_n", help="homotopy steps (default 64)")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here (default stdout)")
    p.add_argument("--csv", metavar="PATH", help="write per-cell rows as CSV")
    p.add_argument("--conditions", type=_conditions, default=list(CONDITIONS), help="e.g. i,iii,iv")
    p.add_argument("--xi", type=_vector, help="xi for verify (scalar or comma-separated)")
    p.add_argument("--eta", type=_vector, help="eta for verify (defaults to xi)")
    p.add_argument("--no-timings", action="store_true", help="omit timings from the report")
    return p


def _load(args) -> Scenario:
    s = builtin(args.builtin) if args.builtin else load_scenario(args.scenario)
    if args.omega_cells is not None and args.omega_cells < 1:
        raise ScenarioError("must be at least 1", "--omega-cells")
    s = s.with_cells(args.omega_cells)
    return s.with_params(tol=args.tol, n_max=args.n_max, grid=args.grid, homotopy_n=args.homotopy_n)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        s = _load(args)
    except ScenarioError as exc:
        print(f"svfix: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    load_s = time.perf_counter() - t0
    flags = {"grid": s.params.grid, "conditions": args.conditions, "xi": args.xi, "eta": args.eta}
    try:
        rep, code = run_scenario(args.command, s, flags)
    except ScenarioError as exc:
        print(f"svfix: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except SvfixError as exc:
        print(f"svfix: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    rep.timings["load_s"] = load_s
    text = rep.to_json(timings=not args.no_timings)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"{args.command}: {rep.verdict} (exit {code})")
    else:
        print(text)
    if args.csv:
        write_csv(args.csv, rep.cells)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
