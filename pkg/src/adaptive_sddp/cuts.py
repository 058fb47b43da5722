"""Cutting-plane models of the expected cost-to-go functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np


class CutKind(str, enum.Enum):
    FINE = "fine"
    COARSE = "coarse"
    SEMI_COARSE = "semi_coarse"


@dataclass(frozen=True)
class Cut:
    """Affine minorant ``beta'x + alpha`` of the cost-to-go of ``stage``."""

    stage: int
    beta: np.ndarray
    alpha: float
    kind: CutKind = CutKind.FINE
    birth_iteration: int = 0
    partition_version: int = 0

    def value(self, x: np.ndarray) -> float:
        return float(self.beta @ x + self.alpha)


class CutPool:
    """Append-only pool for one stage, evaluated as ``max(initial_bound, max_j cut_j(x))``.

    The initial bound is stored as a constant cut in row 0 of :attr:`betas` /
    :attr:`alphas`, so a stage subproblem always carries it as its first cut row.
    """

    def __init__(self, stage: int, dim: int, initial_bound: float):
        self.stage = stage
        self.dim = dim
        self.initial_bound = float(initial_bound)
        self.cuts: List[Cut] = []
        self._betas = np.zeros((16, dim))
        self._alphas = np.zeros(16)
        self._alphas[0] = self.initial_bound
        self._n = 1

    def __len__(self) -> int:
        return len(self.cuts)

    @property
    def betas(self) -> np.ndarray:
        return self._betas[: self._n]

    @property
    def alphas(self) -> np.ndarray:
        return self._alphas[: self._n]

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError(f"state of length {x.shape[0]} evaluated on a pool of dimension {self.dim}")
        return float(np.max(self.betas @ x + self.alphas))

    def append(self, cut: Cut) -> None:
        if cut.beta.shape != (self.dim,):
            raise ValueError("cut dimension does not match pool")
        if self._n == self._betas.shape[0]:
            self._betas = np.vstack([self._betas, np.zeros_like(self._betas)])
            self._alphas = np.concatenate([self._alphas, np.zeros_like(self._alphas)])
        self._betas[self._n] = cut.beta
        self._alphas[self._n] = cut.alpha
        self._n += 1
        self.cuts.append(cut)

    def copy(self) -> "CutPool":
        other = CutPool(self.stage, self.dim, self.initial_bound)
        for c in self.cuts:
            other.append(c)
        return other


def evaluate(pool: CutPool, x) -> float:
    return pool.evaluate(x)


@dataclass
class CutPiece:
    """Dual information of one realization or one aggregated cluster.

    ``mass`` is the probability mass represented and ``multiplicity`` the
    aggregation weight ``w`` (1 for a single realization, the cluster size
    for an aggregated cluster). ``cut_duals`` align with the next-stage pool
    rows, initial-bound row first; it is empty at the last stage.
    """

    mass: float
    multiplicity: float
    rhs_b: np.ndarray
    tech_B: np.ndarray
    eq_duals: np.ndarray
    cut_duals: np.ndarray


def cut_from_duals(
    stage: int,
    pieces: Sequence[CutPiece],
    next_alphas: Optional[np.ndarray],
    kind: CutKind = CutKind.FINE,
    birth_iteration: int = 0,
    partition_version: int = 0,
) -> Cut:
    """Expected-value cut from dual solutions of realization or cluster subproblems."""
    if not pieces:
        raise ValueError("no dual solutions supplied")
    total = sum(p.mass for p in pieces)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"piece masses sum to {total!r}, expected 1")
    dim = pieces[0].tech_B.shape[1]
    beta = np.zeros(dim)
    alpha = 0.0
    for p in pieces:
        if p.eq_duals is None:
            raise ValueError("missing equality duals")
        weight = p.mass / p.multiplicity
        alpha += weight * float(p.rhs_b @ p.eq_duals)
        if p.cut_duals is not None and len(p.cut_duals):
            if next_alphas is None or len(next_alphas) != len(p.cut_duals):
                raise ValueError("cut duals do not align with the next-stage pool")
            alpha += p.mass * float(next_alphas @ p.cut_duals)
        beta -= weight * (p.tech_B.T @ p.eq_duals)
    return Cut(stage, beta, alpha, CutKind(kind), birth_iteration, partition_version)


def is_violated(pool: CutPool, x, candidate: Cut, eps: float) -> bool:
    return candidate.value(np.asarray(x, dtype=float)) > pool.evaluate(x) + eps
