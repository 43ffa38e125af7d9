#!/usr/bin/env python3
"""The Gaussian limit of the standardized quadratic forms.

Each statistic converges to a weighted sum of chi-square(1) variables divided
by sqrt(v). The weights depend on the block and on the covariance, so the
components of the limit vector are not identically distributed for the ATS.
For the WTS every block with rank r has the same marginal chi2_r / sqrt(2r).
"""
import numpy as np
from scipy import stats

from qfmct.hypotheses import per_component_equality
from qfmct.linalg import direct_sum
from qfmct.quadform import analytic_cross_covariance, limit_weights, sample_limit
from qfmct.resampling import monte_carlo_from_cov
from qfmct.simharness import desk_config


def main():
    cfg = desk_config()
    Sigma = direct_sum([S / k for S, k in zip(cfg.covs, cfg.fractions)])
    part = per_component_equality(cfg.a, cfg.d)

    print("ATS limit weights per component (divided by sqrt(v)):")
    for lab, (C, _) in zip(part.labels, part.blocks):
        lam, v = limit_weights(C, Sigma, "ats")
        draws = sample_limit(lam, v, 50_000, seed=0)
        print(f"  {lab}: {np.round(lam / np.sqrt(v), 3)}  95% quantile {np.quantile(draws, 0.95):.3f}")

    lam, v = limit_weights(part.blocks[0][0], Sigma, "wts")
    print(f"\nWTS weights {np.round(lam, 6)} and v = {v:g}: the law is chi2_2 / 2")
    x = monte_carlo_from_cov(Sigma, part, "wts", 100_000, seed=3).values[:, 0]
    ks = stats.kstest(x, lambda t: stats.chi2.cdf(2 * t, 2)).statistic
    print(f"KS distance of 1e5 Monte-Carlo draws to chi2_2 / 2: {ks:.4f}")

    print("\nLimit correlation between components (ATS), analytic vs 2e5 draws:")
    reps = monte_carlo_from_cov(Sigma, part, "ats", 200_000, seed=4).values
    emp = np.cov(reps, rowvar=False)
    for j in range(1, cfg.d):
        a = analytic_cross_covariance(part.blocks[0][0], part.blocks[j][0], Sigma, "ats")
        print(f"  (1,{j + 1}): {a:.4f} vs {emp[0, j]:.4f}")
    print("Column variances:", np.round(reps.var(axis=0), 3))


if __name__ == "__main__":
    main()
