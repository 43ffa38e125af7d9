"""Command-line interface: ``qfmct test``, ``qfmct simulate`` and ``qfmct diag``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data import DataError, Dataset, InsufficientSampleError, compute_stats
from .hypotheses import (global_partition, pairwise_group_equality, partition_from_dict,
                         per_component_equality)
from .quadform import QFKind, q_vector
from .resampling import replicates
from .simharness import ConfigError, PowerRow, PowerTable, load_config, run_scenario
from .testing import TestResult, decide

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG = 0, 1, 2, 3, 4


class MalformedCSVError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class SingletonGroupError(InsufficientSampleError):
    pass


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

def read_dataset(path) -> tuple[Dataset, list]:
    """Read ``label,x1,...,xd`` rows (with header) into a Dataset.

    Groups are ordered by first appearance. Returns the dataset and the
    component names from the header.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise MalformedCSVError(f"{path}: need a header row and at least one data row")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise MalformedCSVError(f"{path}: header needs a group column and at least one variable")
    d = len(header) - 1
    groups: dict[str, list] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise MalformedCSVError(f"{path}, line {lineno}: expected {d + 1} fields, "
                                    f"found {len(row)}")
        label = row[0].strip()
        values = []
        for col, cell in enumerate(row[1:], start=1):
            try:
                x = float(cell)
            except ValueError:
                raise NonNumericCellError(f"{path}, line {lineno}, column '{header[col]}': "
                                          f"non-numeric value {cell!r}") from None
            if not np.isfinite(x):
                raise NonNumericCellError(f"{path}, line {lineno}, column '{header[col]}': "
                                          f"non-finite value {cell!r}")
            values.append(x)
        groups.setdefault(label, []).append(values)
    for label, obs in groups.items():
        if len(obs) < 2:
            raise SingletonGroupError(f"{path}: group '{label}' has a single observation; "
                                      "at least 2 per group are required")
    if len(groups) < 2:
        raise DataError(f"{path}: found {len(groups)} group(s); at least 2 are required")
    data = Dataset(tuple(np.array(v) for v in groups.values()), tuple(groups))
    return data, header[1:]


def build_partition(flag: str, data: Dataset, names=None):
    if flag == "components":
        return per_component_equality(data.a, data.d, names)
    if flag == "pairs":
        return pairwise_group_equality(data.a, data.d, list(data.labels))
    if flag == "global":
        return global_partition(data.a, data.d)
    if flag.startswith("file:"):
        with open(flag[5:]) as fh:
            return partition_from_dict(json.load(fh), data.a * data.d)
    raise ValueError(f"unknown partition {flag!r}")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def bundled_config(name: str):
    ref = resources.files("qfmct") / "configs" / name
    return ref if ref.is_file() else None


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    command: str
    version: str
    seed: int
    started: str
    finished: str
    input_digest: str
    settings: dict
    payload: object   # TestResult or PowerTable

    def to_dict(self) -> dict:
        if isinstance(self.payload, TestResult):
            kind, body = "test_result", self.payload.to_dict()
        else:
            kind = "power_table"
            body = {"alpha": self.payload.alpha, "interval": list(self.payload.interval),
                    "rows": [r.__dict__ for r in self.payload.rows]}
        return {"command": self.command, "version": self.version, "seed": self.seed,
                "started": self.started, "finished": self.finished,
                "input_digest": self.input_digest, "settings": self.settings,
                "payload_type": kind, "payload": body}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        rec = json.loads(text)
        body = rec["payload"]
        if rec["payload_type"] == "test_result":
            payload = TestResult.from_dict(body)
        else:
            payload = PowerTable(tuple(PowerRow(**r) for r in body["rows"]), body["alpha"],
                                 tuple(body["interval"]))
        return cls(rec["command"], rec["version"], rec["seed"], rec["started"],
                   rec["finished"], rec["input_digest"], rec["settings"], payload)


def result_csv(res: TestResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hypothesis", "statistic", "quantile", "adjusted_p", "reject"])
    for lab, s, q, p, r in zip(res.labels, res.statistics, res.local_quantiles,
                               res.adjusted_p, res.local_reject):
        w.writerow([lab, repr(float(s)), repr(float(q)), repr(float(p)), int(r)])
    return buf.getvalue()


def result_csv_parse(text: str) -> list:
    return [(r["hypothesis"], float(r["statistic"]), float(r["quantile"]),
             float(r["adjusted_p"]), bool(int(r["reject"])))
            for r in csv.DictReader(io.StringIO(text))]


def result_text(res: TestResult) -> str:
    width = max(len(x) for x in res.labels + ("hypothesis",))
    lines = [f"{res.method}  alpha={res.alpha:g}  B={res.B}  local level={res.local_level:.4f}",
             f"{'hypothesis':<{width}}  {'Q':>10}  {'quantile':>10}  {'adj. p (%)':>10}  reject",
             "-" * (width + 46)]
    for lab, s, q, p, r in zip(res.labels, res.statistics, res.local_quantiles,
                               res.adjusted_p, res.local_reject):
        lines.append(f"{lab:<{width}}  {s:10.4f}  {q:10.4f}  {100 * p:10.2f}  "
                     f"{'yes' if r else 'no'}")
    lines.append(f"global hypothesis {'REJECTED' if res.global_reject else 'not rejected'}"
                 f" (min adjusted p = {100 * res.adjusted_p.min():.2f}%)")
    return "\n".join(lines) + "\n"


def _write_outputs(out, record: RunRecord, csv_text: str) -> None:
    base = Path(out)
    stem = base.with_suffix("") if base.suffix in (".json", ".csv") else base
    stem.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{stem}.json").write_text(record.to_json())
    Path(f"{stem}.csv").write_text(csv_text)


def _workers(threads: int) -> int:
    return threads if threads and threads > 0 else (os.cpu_count() or 1)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_test(args) -> int:
    started = _now()
    data, names = read_dataset(args.csv)
    partition = build_partition(args.partition, data, names)
    kind = QFKind.parse(args.statistic)
    observed = q_vector(partition, compute_stats(data), kind)
    reps = replicates(args.method, data, partition, kind, args.reps, args.seed,
                      args.wild_weights, _workers(args.threads))
    res = decide(reps, observed, args.alpha, method=f"qfmct-{reps.method}-{kind.value}")
    sys.stdout.write(result_text(res))
    if args.out:
        settings = {k: getattr(args, k) for k in ("partition", "statistic", "method",
                                                  "wild_weights", "alpha", "reps")}
        rec = RunRecord("test", __version__, args.seed, started, _now(), file_digest(args.csv),
                        settings, res)
        _write_outputs(args.out, rec, result_csv(res))
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = _now()
    path = Path(args.config)
    if not path.is_file():
        ref = bundled_config(args.config)
        if ref is None:
            raise ConfigError(f"config: file {args.config!r} not found")
        path = Path(str(ref))
    cfg = load_config(path)
    table = run_scenario(cfg, workers=_workers(args.threads))
    sys.stdout.write(table.to_text())
    if args.out:
        rec = RunRecord("simulate", __version__, cfg.seed, started, _now(), file_digest(path),
                        {"config": str(path)}, table)
        _write_outputs(args.out, rec, table.to_csv())
    return EXIT_OK


def cmd_diag(args) -> int:
    data, names = read_dataset(args.csv)
    partition = build_partition(args.partition, data, names)
    reps = replicates(args.method, data, partition, args.statistic, args.reps, args.seed,
                      args.wild_weights, _workers(args.threads))
    header = ",".join(f"\"{x}\"" for x in partition.labels)
    body = "\n".join(",".join(repr(float(v)) for v in row) for row in reps.values)
    text = header + "\n" + body + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _partition_flag(value: str) -> str:
    if value in ("components", "pairs", "global") or value.startswith("file:"):
        return value
    raise argparse.ArgumentTypeError("choose components, pairs, global or file:<path>")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfmct", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--reps", "-B", dest="reps", type=int, default=1000,
                        help="number of resampling replicates (default 1000)")
        sp.add_argument("--method", choices=("mc", "pb", "wb"), default="pb")
        sp.add_argument("--wild-weights", choices=("normal", "rademacher", "mammen"),
                        default="normal")
        sp.add_argument("--statistic", choices=("ats", "wts"), default="ats")
        sp.add_argument("--partition", type=_partition_flag, default="components",
                        help="components, pairs, global or file:<path.json>")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=0,
                        help="worker threads (default: all cores)")
        sp.add_argument("--out", help="write <stem>.json record and <stem>.csv table")

    t = sub.add_parser("test", help="run the quadratic-form multiple contrast test on a CSV file")
    t.add_argument("csv")
    t.add_argument("--alpha", type=float, default=0.05)
    common(t)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a simulation scenario from a config file")
    s.add_argument("config", help="config path or name of a bundled config")
    s.add_argument("--threads", type=int, default=0, help="worker processes (default: all cores)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("diag", help="dump the replicate matrix as CSV")
    g.add_argument("csv")
    common(g)
    g.set_defaults(func=cmd_diag)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qfmct: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingletonGroupError as exc:
        print(f"qfmct: singleton group: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonNumericCellError as exc:
        print(f"qfmct: non-numeric cell: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MalformedCSVError as exc:
        print(f"qfmct: malformed CSV: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ValueError) as exc:
        print(f"qfmct: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"qfmct: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
