"""Hypothesis matrices and their partitions into local hypotheses."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import selector_matrix
from .linalg import centering_matrix, kron


@dataclass(frozen=True)
class HypothesisPartition:
    """Local hypotheses ``C_l mu = beta_l`` whose intersection is the global one."""

    blocks: tuple   # of (C_l, beta_l) pairs
    labels: tuple

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise ValueError("a partition needs at least one block")
        if len(self.labels) != len(self.blocks):
            raise ValueError("one label per block is required")
        blocks = []
        ncols = None
        for C, beta in self.blocks:
            C = np.array(C, dtype=float, ndmin=2)
            beta = np.zeros(C.shape[0]) if beta is None else np.array(beta, dtype=float).reshape(-1)
            if C.shape[0] < 1 or beta.shape[0] != C.shape[0]:
                raise ValueError(f"block with C of shape {C.shape} and beta of length {beta.shape[0]}")
            if ncols is None:
                ncols = C.shape[1]
            elif C.shape[1] != ncols:
                raise ValueError("all blocks must have the same number of columns")
            C.setflags(write=False)
            beta.setflags(write=False)
            blocks.append((C, beta))
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def L(self) -> int:
        return len(self.blocks)

    @property
    def n_cols(self) -> int:
        return self.blocks[0][0].shape[1]

    @property
    def ranks(self) -> tuple:
        return tuple(C.shape[0] for C, _ in self.blocks)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """The global (C, beta) obtained by stacking all blocks row-wise."""
        return (np.vstack([C for C, _ in self.blocks]),
                np.concatenate([b for _, b in self.blocks]))


def _check(a: int, d: int) -> None:
    if a < 2:
        raise ValueError(f"need a >= 2 groups, got {a}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")


def per_component_equality(a: int, d: int, names=None) -> HypothesisPartition:
    """One block ``P_a A_j`` per component: are all groups equal in component j?"""
    _check(a, d)
    names = names or [f"component {j + 1}" for j in range(d)]
    P = centering_matrix(a)
    blocks = [(P @ selector_matrix(a, d, j), None) for j in range(d)]
    return HypothesisPartition(tuple(blocks), tuple(names))


def pairwise_group_equality(a: int, d: int, group_labels=None) -> HypothesisPartition:
    """One ``d x ad`` block per pair of groups, rows ``e_j`` of mu_i1 - mu_i2.

    Rows are unscaled +-1 differences; the statistics do not depend on a
    nonzero rescaling of a block.
    """
    _check(a, d)
    group_labels = group_labels or [str(i + 1) for i in range(a)]
    blocks, labels = [], []
    for i1, i2 in combinations(range(a), 2):
        e = np.zeros(a)
        e[i1], e[i2] = 1.0, -1.0
        blocks.append((kron(e, np.eye(d)), None))
        labels.append(f"({group_labels[i1]},{group_labels[i2]})")
    return HypothesisPartition(tuple(blocks), tuple(labels))


def tukey_contrast(a: int, d: int) -> np.ndarray:
    """All pairwise group differences, one row per (pair, component).

    Rows are ordered by pair (lexicographic) and then by component.
    """
    _check(a, d)
    rows = []
    for i1, i2 in combinations(range(a), 2):
        for j in range(d):
            r = np.zeros(a * d)
            r[i1 * d + j] = 1.0
            r[i2 * d + j] = -1.0
            rows.append(r)
    return np.array(rows)


def tukey_labels(a: int, d: int, group_labels=None, names=None) -> list:
    group_labels = group_labels or [str(i + 1) for i in range(a)]
    names = names or [str(j + 1) for j in range(d)]
    return [f"({group_labels[i1]},{group_labels[i2]}):{names[j]}"
            for i1, i2 in combinations(range(a), 2) for j in range(d)]


def global_matrix(a: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """``(P_a kron I_d, 0)``: all group mean vectors are equal."""
    _check(a, d)
    return kron(centering_matrix(a), np.eye(d)), np.zeros(a * d)


def global_partition(a: int, d: int) -> HypothesisPartition:
    C, beta = global_matrix(a, d)
    return HypothesisPartition(((C, beta),), ("global",))


def partition_from_dict(spec: dict, n_cols: int | None = None) -> HypothesisPartition:
    """Build a partition from ``{"blocks": [{"C": [[...]], "beta": [...], "label": ...}]}``."""
    try:
        raw = spec["blocks"]
    except (KeyError, TypeError):
        raise ValueError("partition file must contain a 'blocks' list") from None
    blocks, labels = [], []
    for k, blk in enumerate(raw):
        if "C" not in blk:
            raise ValueError(f"blocks[{k}] has no 'C' matrix")
        blocks.append((blk["C"], blk.get("beta")))
        labels.append(blk.get("label", f"block {k + 1}"))
    part = HypothesisPartition(tuple(blocks), tuple(labels))
    if n_cols is not None and part.n_cols != n_cols:
        raise ValueError(f"partition blocks have {part.n_cols} columns, data needs {n_cols}")
    return part


def partition_to_dict(partition: HypothesisPartition) -> dict:
    return {"blocks": [{"label": lab, "C": C.tolist(), "beta": b.tolist()}
                       for lab, (C, b) in zip(partition.labels, partition.blocks)]}
