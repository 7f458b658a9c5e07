"""Indicator table for the three bundled scenarios, one coupling mode each.

    python demos/indicators_by_mode.py
"""

from gridmesh import bundled_scenario, evaluate, load_scenario, run

for case, mode in (("case1.scn", "e"), ("case2.scn", "et"), ("case3.scn", "etc")):
    cfg = load_scenario(bundled_scenario(case))
    report = evaluate(run(cfg, mode), cfg)
    print(f"== {case} ({mode})")
    print(report.table())
