#!/usr/bin/env python3
"""A small rejection-rate study on the three-group design.

Runs a reduced version of the bundled scenario. Pass ``--full`` for the
bundled desk-scale config (2000 runs, takes much longer). Null rows marked
with '*' lie inside the 95% binomial interval around alpha.
"""
import sys
import time

from qfmct.cli import bundled_config
from qfmct.simharness import desk_config, load_config, run_scenario


def main():
    if "--full" in sys.argv:
        cfg = load_config(str(bundled_config("paper_table1_desk.cfg")))
    else:
        cfg = desk_config(Ns=(25, 50), deltas=(0.0, 1.0, 2.0), nsim=200, B=300, mc_draws=2000,
                          tests=("mct-eq", "mct-pb", "qfmct-pb-ats", "ats-pb"))
    t0 = time.perf_counter()
    table = run_scenario(cfg, workers=1)
    print(table.to_text())
    print(f"{cfg.nsim} runs per cell, {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
