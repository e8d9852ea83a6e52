"""Best-approximation pair for the second builtin scenario.

Run: python3 demos/example2_approximation.py
"""
import numpy as np

from svfix.random_driver import random_approximation, verify_pair
from svfix.scenario import builtin


def main() -> None:
    s = builtin("example2")
    rep = random_approximation(s.operator, s.omega)
    print(f"approximation verdict: {rep.verdict}")
    for note in rep.notes:
        print(f"  note: {note}")
    for row in rep.rows[:5]:
        print(
            f"  {row.unit.kind} {row.unit.index}: xi={row.xi.tolist()} eta={row.eta.tolist()} "
            f"d={row.d_pair:.6f}/{row.d_ball:.6f}/{row.d_inward:.6f}"
        )

    # a hand-picked pair, then a corrupted one
    good = verify_pair(s.operator, s.omega, np.array([1.0]), np.array([1.00005]))
    print(f"xi=1, eta=1.00005: {good.verdict}")
    bad = verify_pair(s.operator, s.omega, np.array([0.5]), np.array([1.2]))
    r = bad.first_failure()
    print(f"xi=0.5, eta=1.2: {bad.verdict}, first failure at {r.unit.kind} {r.unit.index} (retraction ok: {r.retraction_ok})")


if __name__ == "__main__":
    main()
