"""Run the bundled community with and without packet loss and show where they part.

    python demos/commute_peaks.py

Prints, for each road, the slowest speed in each commute window under both
couplings, then the grid-draw deviation summary.
"""

import numpy as np

from gridmesh import bundled_scenario, compare, load_scenario, run

et_cfg = load_scenario(bundled_scenario("case2.scn"))
etc_cfg = load_scenario(bundled_scenario("case3.scn"))
et = run(et_cfg, "et")
etc = run(etc_cfg, "etc")

hours = et.times / 3600.0
print(f"{'road':8s} {'window':>11s} {'min u, E+T':>11s} {'min u, +C':>10s} {'at (h)':>7s} {'max gamma':>10s}")
for a, b in et_cfg.peak_windows:
    m = (et.times >= a) & (et.times < b)
    for j, road in enumerate(et.columns["u_ave"]):
        u0 = et.data["u_ave"][m, j]
        u1 = etc.data["u_ave"][m, j]
        g = etc.data["gamma"][m, j]
        k = int(np.argmin(u1))
        print(
            f"{road:8s} {a / 3600:4.0f}-{b / 3600:<4.0f}h {u0.min():11.2f} {u1.min():10.2f}"
            f" {hours[m][k]:7.2f} {g.max():10.3f}"
        )

print()
for q in ("u_ave", "grid_power"):
    rep = compare(et, etc, q)
    print(f"{q}: peak {100 * rep.peak:.2f}% on {rep.peak_element} at {rep.peak_time / 3600:.2f} h, mean {100 * rep.mean:.3f}%")
