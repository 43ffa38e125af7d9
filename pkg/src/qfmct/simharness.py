"""Simulation study: data generators, scenarios and rejection-rate tables.

The default scenario is the three-group, five-dimensional design with
n = (0.4, 0.4, 0.2) N, Sigma_1 = Sigma_2 = diag(2,3,4,5,6) + 11' and an AR(0.65)
covariance in group 3. The alternative moves only the mean of the last group.
"""
from __future__ import annotations

import configparser
import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps

from .data import Dataset
from .hypotheses import global_partition, pairwise_group_equality, per_component_equality
from .linalg import NotPSDError, sym_eig, sym_sqrt
from .testing import TestResult, classic_ats_global, classic_mct_test, qfmct_test

TEST_IDS = (
    "mct-eq", "mct-pb", "mct-wb",
    "qfmct-mc-ats", "qfmct-pb-ats", "qfmct-wb-ats",
    "qfmct-mc-wts", "qfmct-pb-wts", "qfmct-wb-wts",
    "ats-pb", "ats-wb",
)
ERROR_DISTS = ("normal", "t9", "skew_normal")
ALTERNATIVES = ("one_point", "shift")
DEFAULT_COVS = ("compound:2,3,4,5,6", "compound:2,3,4,5,6", "ar:0.65:5")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# covariance structures and generators
# ---------------------------------------------------------------------------

def make_cov(spec) -> np.ndarray:
    """Covariance from a spec string or tuple.

    Accepted forms: ``compound:v1,...,vd`` (diag(v) + 11'), ``ar:rho:d``
    (rho^|j-k|), ``identity:d`` and ``custom:<rows separated by ';'>``, or
    the equivalent tuples ``("compound", values[, offset])``, ``("ar", rho, d)``,
    ``("identity", d)``, ``("custom", matrix)``.
    """
    if isinstance(spec, str):
        name, _, rest = spec.strip().partition(":")
        name = name.strip().lower()
        if name == "compound":
            args = ([float(x) for x in rest.split(",")],)
        elif name == "ar":
            rho, d = rest.split(":")
            args = (float(rho), int(d))
        elif name == "identity":
            args = (int(rest),)
        elif name == "custom":
            args = ([[float(x) for x in row.split(",")] for row in rest.split(";")],)
        else:
            raise ValueError(f"unknown covariance structure {name!r}")
    else:
        name, args = str(spec[0]).lower(), tuple(spec[1:])

    if name == "compound":
        vals = np.asarray(args[0], dtype=float)
        offset = float(args[1]) if len(args) > 1 else 1.0
        return np.diag(vals) + offset * np.ones((len(vals), len(vals)))
    if name == "ar":
        rho, d = float(args[0]), int(args[1])
        idx = np.arange(d)
        return rho ** np.abs(idx[:, None] - idx[None, :])
    if name == "identity":
        return np.eye(int(args[0]))
    if name == "custom":
        S = np.asarray(args[0], dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("custom covariance must be square")
        w = sym_eig(S).values
        if w[-1] < -1e-10 * max(abs(w[0]), 1.0):
            raise NotPSDError("custom covariance is not positive semi-definite")
        return S
    raise ValueError(f"unknown covariance structure {name!r}")


def _skew_moments(shape: float) -> tuple[float, float]:
    delta = shape / np.sqrt(1.0 + shape ** 2)
    mean = delta * np.sqrt(2.0 / np.pi)
    return mean, np.sqrt(1.0 - mean ** 2)


def gen_errors(dist: str, n: int, d: int, rng: np.random.Generator,
               skew_shape: float = 4.0) -> np.ndarray:
    """i.i.d. standardized errors (mean 0, variance 1), shape ``(n, d)``."""
    if dist == "normal":
        return rng.standard_normal((n, d))
    if dist == "t9":
        return rng.standard_t(9, size=(n, d)) * np.sqrt(7.0 / 9.0)
    if dist == "skew_normal":
        if not np.isfinite(skew_shape):
            raise ValueError("skew-normal shape must be finite")
        mean, sd = _skew_moments(skew_shape)
        return (sps.skewnorm.rvs(skew_shape, size=(n, d), random_state=rng) - mean) / sd
    raise ValueError(f"unknown error distribution {dist!r}; choose from {ERROR_DISTS}")


def group_sizes(N: int, fractions) -> list:
    """round(fraction * N) per group, the last group takes the remainder."""
    sizes = [int(round(f * N)) for f in fractions[:-1]]
    sizes.append(N - sum(sizes))
    return sizes


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    Ns: tuple = (25, 50, 100)
    fractions: tuple = (0.4, 0.4, 0.2)
    cov_specs: tuple = DEFAULT_COVS
    error_dist: str = "normal"
    skew_shape: float = 4.0
    alternative: str = "one_point"
    deltas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    nsim: int = 1000
    B: int = 1000
    mc_draws: int = 10_000
    alpha: float = 0.05
    seed: int = 1
    tests: tuple = ("mct-eq", "mct-pb", "qfmct-mc-ats", "qfmct-pb-ats", "ats-pb")
    wild_weights: str = "normal"
    partition: str = "components"
    covs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("Ns", "fractions", "cov_specs", "deltas", "tests"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        covs = tuple(make_cov(s) for s in self.cov_specs)
        object.__setattr__(self, "covs", covs)
        self.validate()

    @property
    def a(self) -> int:
        return len(self.cov_specs)

    @property
    def d(self) -> int:
        return self.covs[0].shape[0]

    def validate(self) -> None:
        if self.a < 2:
            raise ConfigError("design.covariances: need at least 2 groups")
        if len(self.fractions) != self.a:
            raise ConfigError("design.fractions: one fraction per group is required")
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) <= 0:
            raise ConfigError("design.fractions: fractions must be positive and sum to 1")
        if any(S.shape != (self.d, self.d) for S in self.covs):
            raise ConfigError("design.covariances: all covariances must have the same dimension")
        for N in self.Ns:
            if min(group_sizes(N, self.fractions)) < 2:
                raise ConfigError(f"design.N: N={N} leaves a group with fewer than 2 observations")
        if self.error_dist not in ERROR_DISTS:
            raise ConfigError(f"design.errors: unknown distribution {self.error_dist!r}")
        if self.alternative not in ALTERNATIVES:
            raise ConfigError(f"design.alternative: unknown alternative {self.alternative!r}")
        if any(dl < 0 for dl in self.deltas):
            raise ConfigError("design.deltas: shifts must be non-negative")
        if self.nsim < 1:
            raise ConfigError("simulation.nsim: must be at least 1")
        if self.B < 2 or self.mc_draws < 2:
            raise ConfigError("simulation.B: need at least 2 replicates")
        if not 0 < self.alpha < 1:
            raise ConfigError("simulation.alpha: must lie in (0, 1)")
        for t in self.tests:
            if t not in TEST_IDS:
                raise ConfigError(f"simulation.tests: unknown test {t!r}")
        if self.wild_weights not in ("normal", "rademacher", "mammen"):
            raise ConfigError(f"simulation.wild_weights: unknown weights {self.wild_weights!r}")
        if self.partition not in ("components", "pairs", "global"):
            raise ConfigError(f"simulation.partition: unknown partition {self.partition!r}")


_FIELDS = {
    # key: (section, converter, field name)
    "N": ("design", lambda s: tuple(int(x) for x in _split(s)), "Ns"),
    "fractions": ("design", lambda s: tuple(float(x) for x in _split(s)), "fractions"),
    "covariances": ("design", lambda s: tuple(x.strip() for x in s.split("|") if x.strip()),
                    "cov_specs"),
    "errors": ("design", str.strip, "error_dist"),
    "skew_shape": ("design", float, "skew_shape"),
    "alternative": ("design", str.strip, "alternative"),
    "deltas": ("design", lambda s: tuple(float(x) for x in _split(s)), "deltas"),
    "nsim": ("simulation", int, "nsim"),
    "B": ("simulation", int, "B"),
    "mc_draws": ("simulation", int, "mc_draws"),
    "alpha": ("simulation", float, "alpha"),
    "seed": ("simulation", int, "seed"),
    "tests": ("simulation", lambda s: tuple(x.strip() for x in _split(s)), "tests"),
    "wild_weights": ("simulation", str.strip, "wild_weights"),
    "partition": ("simulation", str.strip, "partition"),
}


def _split(s: str) -> list:
    return [x for x in s.replace("\n", ",").split(",") if x.strip()]


def parse_config(text: str) -> ScenarioConfig:
    """Parse the INI-style scenario file (sections ``[design]`` and ``[simulation]``)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    known = {(sec, key) for key, (sec, _, _) in _FIELDS.items()}
    for sec in cp.sections():
        if sec not in ("design", "simulation"):
            raise ConfigError(f"{sec}: unknown section")
        for key in cp[sec]:
            if (sec, key) not in known:
                raise ConfigError(f"{sec}.{key}: unknown key")
    kwargs = {}
    for key, (sec, conv, name) in _FIELDS.items():
        if cp.has_option(sec, key):
            try:
                kwargs[name] = conv(cp[sec][key])
            except ValueError as exc:
                raise ConfigError(f"{sec}.{key}: {exc}") from None
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"design.covariances: {exc}") from None


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def config_to_text(cfg: ScenarioConfig) -> str:
    """Render a config in the same format :func:`parse_config` reads."""
    j = lambda xs: ", ".join(str(x) for x in xs)  # noqa: E731
    return "\n".join([
        "[design]",
        f"N = {j(cfg.Ns)}",
        f"fractions = {j(cfg.fractions)}",
        f"covariances = {' | '.join(cfg.cov_specs)}",
        f"errors = {cfg.error_dist}",
        f"skew_shape = {cfg.skew_shape}",
        f"alternative = {cfg.alternative}",
        f"deltas = {j(cfg.deltas)}",
        "",
        "[simulation]",
        f"nsim = {cfg.nsim}",
        f"B = {cfg.B}",
        f"mc_draws = {cfg.mc_draws}",
        f"alpha = {cfg.alpha}",
        f"seed = {cfg.seed}",
        f"tests = {j(cfg.tests)}",
        f"wild_weights = {cfg.wild_weights}",
        f"partition = {cfg.partition}",
        "",
    ])


# ---------------------------------------------------------------------------
# data generation and a single replication
# ---------------------------------------------------------------------------

def group_means(cfg: ScenarioConfig, delta: float) -> np.ndarray:
    mu = np.zeros((cfg.a, cfg.d))
    if cfg.alternative == "one_point":
        mu[-1, 0] = delta
    else:
        mu[-1, :] = delta
    return mu


def gen_observations(cfg: ScenarioConfig, N: int, delta: float,
                     rng: np.random.Generator) -> Dataset:
    """One dataset X_ik = mu_i + Sigma_i^1/2 Z_ik of total size N."""
    mu = group_means(cfg, delta)
    groups = []
    for i, n in enumerate(group_sizes(N, cfg.fractions)):
        Z = gen_errors(cfg.error_dist, n, cfg.d, rng, cfg.skew_shape)
        groups.append(mu[i] + Z @ sym_sqrt(cfg.covs[i]))
    return Dataset(tuple(groups))


def _partition(cfg: ScenarioConfig):
    if cfg.partition == "components":
        return per_component_equality(cfg.a, cfg.d)
    if cfg.partition == "pairs":
        return pairwise_group_equality(cfg.a, cfg.d)
    return global_partition(cfg.a, cfg.d)


def run_test(test_id: str, data: Dataset, cfg: ScenarioConfig, seed: int,
             partition=None) -> TestResult:
    """Run one of :data:`TEST_IDS` on a dataset."""
    head, *rest = test_id.split("-")
    if head == "mct":
        return classic_mct_test(data, cfg.alpha, cfg.B, rest[0], seed, cfg.wild_weights,
                                n_draws=cfg.mc_draws)
    if head == "ats":
        return classic_ats_global(data, cfg.alpha, cfg.B, seed, rest[0], cfg.wild_weights)
    if head == "qfmct":
        method, kind = rest
        B = cfg.mc_draws if method == "mc" else cfg.B
        partition = partition if partition is not None else _partition(cfg)
        return qfmct_test(data, partition, kind, method, cfg.alpha, B, seed, cfg.wild_weights)
    raise ValueError(f"unknown test {test_id!r}")


def _streams(cfg: ScenarioConfig, n_idx: int, sim: int):
    data_ss = np.random.SeedSequence(cfg.seed, spawn_key=(0, n_idx, sim))
    test_seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(1, n_idx, sim))
                    .generate_state(1, np.uint64)[0])
    return data_ss, test_seed


def _one_replication(cfg: ScenarioConfig, n_idx: int, sim: int) -> np.ndarray:
    """Reject flags of shape (len(tests), len(deltas)) for one simulated run.

    The same standardized errors are reused across the shift grid, so rates
    at different shifts differ only through the shift itself.
    """
    data_ss, test_seed = _streams(cfg, n_idx, sim)
    N = cfg.Ns[n_idx]
    partition = _partition(cfg)
    out = np.zeros((len(cfg.tests), len(cfg.deltas)), dtype=bool)
    for k, delta in enumerate(cfg.deltas):
        data = gen_observations(cfg, N, delta, np.random.default_rng(data_ss))
        for t, test_id in enumerate(cfg.tests):
            out[t, k] = run_test(test_id, data, cfg, test_seed, partition).global_reject
    return out


def _replication_batch(args) -> tuple:
    cfg, n_idx, sims = args
    return n_idx, sum(_one_replication(cfg, n_idx, s).astype(int) for s in sims)


# ---------------------------------------------------------------------------
# power tables
# ---------------------------------------------------------------------------

def binomial_interval(alpha: float, nsim: int, level: float = 0.95) -> tuple[float, float]:
    """Central binomial quantile interval for a rejection rate with true level ``alpha``."""
    lo = sps.binom.ppf((1 - level) / 2, nsim, alpha) / nsim
    hi = sps.binom.ppf(1 - (1 - level) / 2, nsim, alpha) / nsim
    return float(lo), float(hi)


@dataclass(frozen=True)
class PowerRow:
    test: str
    N: int
    delta: float
    rejections: int
    nsim: int
    in_interval: bool | None   # only for delta == 0

    @property
    def rate(self) -> float:
        return 100.0 * self.rejections / self.nsim


@dataclass(frozen=True)
class PowerTable:
    rows: tuple
    alpha: float
    interval: tuple

    CSV_FIELDS = ("test", "N", "delta", "rejections", "nsim", "rate_percent", "in_interval")

    def rate(self, test: str, N: int, delta: float) -> float:
        for r in self.rows:
            if r.test == test and r.N == N and abs(r.delta - delta) < 1e-12:
                return r.rate
        raise KeyError((test, N, delta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.rows:
            flag = "" if r.in_interval is None else int(r.in_interval)
            w.writerow([r.test, r.N, repr(float(r.delta)), r.rejections, r.nsim,
                        f"{r.rate:.2f}", flag])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, alpha: float = 0.05) -> "PowerTable":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            flag = rec["in_interval"]
            rows.append(PowerRow(rec["test"], int(rec["N"]), float(rec["delta"]),
                                 int(rec["rejections"]), int(rec["nsim"]),
                                 None if flag == "" else bool(int(flag))))
        nsim = rows[0].nsim if rows else 1
        return cls(tuple(rows), alpha, binomial_interval(alpha, nsim))

    def to_text(self) -> str:
        """Aligned table, one line per (test, N), rates in percent; '*' marks
        null rates inside the binomial interval."""
        deltas = sorted({r.delta for r in self.rows})
        keys = []
        for r in self.rows:
            if (r.test, r.N) not in keys:
                keys.append((r.test, r.N))
        width = max([len(t) for t, _ in keys] + [4])
        head = f"{'test':<{width}} {'N':>5} " + " ".join(f"{'d=' + format(dl, 'g'):>8}" for dl in deltas)
        lines = [head, "-" * len(head)]
        lookup = {(r.test, r.N, r.delta): r for r in self.rows}
        for t, N in keys:
            cells = []
            for dl in deltas:
                r = lookup.get((t, N, dl))
                if r is None:
                    cells.append(f"{'':>8}")
                else:
                    mark = "*" if r.in_interval else " "
                    cells.append(f"{r.rate:7.2f}{mark}")
            lines.append(f"{t:<{width}} {N:>5} " + " ".join(cells))
        lo, hi = self.interval
        lines.append(f"* null rate inside the 95% binomial interval [{lo:.4f}, {hi:.4f}]")
        return "\n".join(lines) + "\n"


def run_scenario(cfg: ScenarioConfig, workers: int = 1, progress=None) -> PowerTable:
    """Rejection rates for every (test, N, delta) of the scenario.

    Replications are independent given ``cfg.seed``; with ``workers > 1`` they
    run in a process pool and the integer counts are summed, so the table does
    not depend on ``workers``.
    """
    counts = {k: np.zeros((len(cfg.tests), len(cfg.deltas)), dtype=int)
              for k in range(len(cfg.Ns))}
    n_jobs = max(1, min(cfg.nsim, 4 * max(workers, 1)))
    jobs = [(cfg, k, list(range(cfg.nsim))[j::n_jobs])
            for k in range(len(cfg.Ns)) for j in range(n_jobs)]
    jobs = [jb for jb in jobs if jb[2]]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = ex.map(_replication_batch, jobs)
            for k, c in results:
                counts[k] += c
                if progress:
                    progress()
    else:
        for jb in jobs:
            k, c = _replication_batch(jb)
            counts[k] += c
            if progress:
                progress()

    interval = binomial_interval(cfg.alpha, cfg.nsim)
    rows = []
    for t, test in enumerate(cfg.tests):
        for k, N in enumerate(cfg.Ns):
            for j, delta in enumerate(cfg.deltas):
                rej = int(counts[k][t, j])
                flag = None
                if delta == 0:
                    rate = rej / cfg.nsim
                    flag = bool(interval[0] <= rate <= interval[1])
                rows.append(PowerRow(test, N, float(delta), rej, cfg.nsim, flag))
    return PowerTable(tuple(rows), cfg.alpha, interval)


def desk_config(**overrides) -> ScenarioConfig:
    """The default design at desk scale, with any field overridden."""
    return replace(ScenarioConfig(nsim=2000, B=500, mc_draws=2000), **overrides)
