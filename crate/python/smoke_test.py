"""Smoke test for the fracchemo_py extension.

Build and install first:

    pip install --no-build-isolation ./crates/python
"""

import math
from pathlib import Path

import fracchemo_py as fc

SCENARIOS = Path(__file__).resolve().parent.parent / "crates" / "core" / "scenarios"


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL {msg}")
    print(f"ok   {msg}")


def main():
    g = fc.Grid(1, 32)
    check(g.n == 32 and g.dim == 1, "grid construction")

    # Linear decay of cos x at rate 1 regardless of alpha.
    x = g.nodes()
    u = fc.fractional_heat(g, [math.cos(v) for v in x], 1.5, 0.3)
    err = max(abs(a - math.exp(-0.3) * math.cos(v)) for a, v in zip(u, x))
    check(err < 1e-14, f"fractional heat decay (err {err:.1e})")

    sc = fc.Scenario.load(str(SCENARIOS / "smoke_1d.cfg"))
    tr = sc.simulate()
    rows = tr.rows()
    check(len(rows) == len(tr) > 1 and not tr.blew_up, f"simulate {sc.name}: {len(rows)} rows")
    check(max(r["R_low"] for r in rows) < 1e-8, "energy residual small")
    check(tr.to_csv().splitlines()[0] == fc.CSV_HEADER, "csv header")

    passed, checks = sc.verify()
    check(passed, "verify: " + ", ".join(f"{n}={v:.1e}" for n, v, _, _ in checks))

    again = fc.Scenario.parse(sc.to_config())
    check(again.to_config() == sc.to_config(), "config round trip")

    try:
        fc.Scenario.parse("[model]\nd = 1\nalpha = 2.5\nn = 16\n[integrator]\nt_end = 1\ndt_max = 0.1\n")
    except ValueError as e:
        check("alpha" in str(e), f"bad alpha rejected ({e})")
    else:
        raise SystemExit("FAIL bad alpha accepted")

    scaling = fc.Scenario.parse(
        "[model]\nd = 1\nalpha = 1.5\nn = 32\n[integrator]\nt_end = 0.05\ndt_max = 5e-4\n"
        "[initial]\nu0 = \"1 + 0.2*cos(1)\"\nq0 = \"0.2*sin(1)\"\n"
    )
    d = scaling.scaling_check(2)
    check(d < 1e-5, f"scaling discrepancy {d:.1e}")

    ratio, threshold, evals = fc.sobolev_constant(2000, 7)
    check(ratio >= 0.699 and evals == 2000, f"sobolev ratio {ratio:.4f}, threshold {threshold:.4f}")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
