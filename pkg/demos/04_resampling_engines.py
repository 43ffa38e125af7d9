#!/usr/bin/env python3
"""Monte-Carlo, parametric bootstrap and wild bootstrap critical values.

The Monte-Carlo engine plugs the estimated covariance into the Gaussian limit.
The bootstrap engines also recompute the weight matrix and the standardizer in
every replicate, which is what keeps their size close to alpha in small
samples. Replicates are reproducible for a fixed seed whatever the number of
worker threads.
"""
import time

import numpy as np

from qfmct.hypotheses import per_component_equality
from qfmct.resampling import replicates
from qfmct.simharness import desk_config, gen_observations
from qfmct.testing import calibrate_quantiles


def main():
    cfg = desk_config()
    data = gen_observations(cfg, N=25, delta=0.0, rng=np.random.default_rng(5))
    part = per_component_equality(cfg.a, cfg.d)
    print("critical values at N = 25 (one dataset):")
    for method, w in (("mc", "normal"), ("pb", "normal"), ("wb", "normal"),
                      ("wb", "rademacher"), ("wb", "mammen")):
        reps = replicates(method, data, part, "ats", 4000, seed=1, wdist=w)
        q, beta = calibrate_quantiles(reps, 0.05)
        print(f"  {reps.method:<14} beta* {beta:.4f}  q {np.round(q, 2)}")

    t0 = time.perf_counter()
    one = replicates("pb", data, part, "ats", 5000, seed=9, workers=1).values
    t1 = time.perf_counter()
    four = replicates("pb", data, part, "ats", 5000, seed=9, workers=4).values
    t2 = time.perf_counter()
    print(f"\n1 thread {t1 - t0:.2f}s, 4 threads {t2 - t1:.2f}s, identical: {np.array_equal(one, four)}")


if __name__ == "__main__":
    main()
