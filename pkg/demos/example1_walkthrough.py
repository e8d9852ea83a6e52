"""Walk through the random fixed point of the first builtin scenario.

Run: python3 demos/example1_walkthrough.py
"""
from svfix.correspondence import FrozenCorrespondence, certify_continuity, find_n0, preimage
from svfix.random_driver import homotopy_random, random_solve
from svfix.scenario import builtin, example1_base
from svfix.solver import oracle_scan
from svfix.geometry import IntervalUnion


def main() -> None:
    s = builtin("example1")
    T = s.operator
    print(f"scenario {s.name}: {len(s.omega.units())} omega units, C = {s.c.boxes}")

    base = example1_base()
    for eps in (0.1, 0.01):
        print(f"  alsc at eps={eps}: {certify_continuity(base, None, 'alsc', eps).verdict}")
    lsc = certify_continuity(base, None, "lsc", 0.05, points=[15 / 32], targets=[0.45])
    print(f"  lsc: {lsc.verdict}, witness {lsc.witness}")

    print(f"  n0 = {find_n0(T, s.c, s.omega.representatives())}")
    for w, y in ((0.005, 0.02), (0.3, 0.08), (1.5, 0.6)):
        print(f"  preimage at omega={w}, y={y}: {preimage(T, w, y).boxes}")

    sel = random_solve(T, s.omega, s.c)
    print(f"random fixed point: uniform={sel.uniform}, xi={sel.values[0].tolist()}, sup residual {sel.sup_residual}")

    o = oracle_scan(FrozenCorrespondence(base, None), IntervalUnion.interval(0, 2))
    print(f"base-map fixed points by grid scan: {o.points[:, 0].tolist()}")

    h = homotopy_random(T, s.omega, IntervalUnion.interval(0, 1), 16)
    u = h.units[0]
    print("homotopy gaps on the first cell:")
    for n, g in u.gaps[:6]:
        print(f"  n={n:3d}  gap={g:.3e}  n*gap={n * g:.3e}")


if __name__ == "__main__":
    main()
