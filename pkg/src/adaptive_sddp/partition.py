"""Scenario partitions per stage: aggregation of cluster data and dual-driven refinement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .lattice import StageData


@dataclass(frozen=True)
class Cluster:
    """A nonempty set of realization indices with its aggregated data.

    Members are summed with weights ``p_k / pbar`` where ``pbar`` is the mean
    member probability, so under uniform probabilities ``agg_B`` and ``agg_b``
    are the plain sums of member data and ``multiplicity`` is the cluster size.
    """

    members: Tuple[int, ...]
    agg_B: np.ndarray
    agg_b: np.ndarray
    mass: float

    @property
    def multiplicity(self) -> float:
        return float(len(self.members))

    @property
    def size(self) -> int:
        return len(self.members)

    @classmethod
    def build(cls, stage: StageData, members: Iterable[int]) -> "Cluster":
        members = tuple(sorted(int(k) for k in members))
        if not members:
            raise ValueError("empty cluster")
        reals = stage.realizations
        probs = np.array([reals[k].probability for k in members])
        mass = float(probs.sum())
        scale = probs / (mass / len(members))
        if np.allclose(scale, 1.0, rtol=0, atol=1e-15):
            agg_B = sum(reals[k].tech_B for k in members)
            agg_b = sum(reals[k].rhs_b for k in members)
        else:
            agg_B = sum(s * reals[k].tech_B for s, k in zip(scale, members))
            agg_b = sum(s * reals[k].rhs_b for s, k in zip(scale, members))
        return cls(members, np.asarray(agg_B, dtype=float), np.asarray(agg_b, dtype=float), mass)

    def mean_realization(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cluster data divided by its multiplicity (the coarse-tree node data)."""
        return self.agg_B / self.multiplicity, self.agg_b / self.multiplicity


@dataclass(frozen=True)
class Partition:
    stage: int
    clusters: Tuple[Cluster, ...]
    n_realizations: int
    version: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def problems(self) -> List[str]:
        seen: Dict[int, int] = {}
        out = []
        for ell, cl in enumerate(self.clusters):
            if not cl.members:
                out.append(f"cluster {ell} is empty")
            for k in cl.members:
                if k in seen:
                    out.append(f"realization {k} in clusters {seen[k]} and {ell}")
                seen[k] = ell
        missing = set(range(self.n_realizations)) - set(seen)
        if missing:
            out.append(f"realizations {sorted(missing)} not covered")
        extra = set(seen) - set(range(self.n_realizations))
        if extra:
            out.append(f"unknown realizations {sorted(extra)}")
        return out


@dataclass(frozen=True)
class DualSignature:
    eq_duals: np.ndarray
    cut_duals: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.eq_duals), np.ravel(self.cut_duals)])


def initial_partition(stage: StageData) -> Partition:
    """Single cluster holding every realization of ``stage``."""
    n = stage.n_realizations
    if n < 1:
        raise ValueError("stage has no realizations")
    return Partition(stage.stage_index, (Cluster.build(stage, range(n)),), n, 0)


def singleton_partition(stage: StageData) -> Partition:
    n = stage.n_realizations
    return Partition(stage.stage_index, tuple(Cluster.build(stage, [k]) for k in range(n)), n, 0)


def group_by_signature(members: Sequence[int], vectors: Mapping[int, np.ndarray], eps: float) -> List[List[int]]:
    """Greedy first-fit grouping in ascending index order; group representative = first member."""
    members = sorted(members)
    norms = [float(np.linalg.norm(vectors[k])) for k in members]
    threshold = eps * (1.0 + max(norms, default=0.0))
    groups: List[List[int]] = []
    reps: List[np.ndarray] = []
    for k in members:
        v = vectors[k]
        for g, rep in zip(groups, reps):
            if float(np.linalg.norm(v - rep)) <= threshold:
                g.append(k)
                break
        else:
            groups.append([k])
            reps.append(v)
    return groups


def refine_absolute(
    partition: Partition,
    stage: StageData,
    signatures: Mapping[int, DualSignature],
    eps: float,
    clusters: Optional[Iterable[int]] = None,
) -> Partition:
    """Split clusters whose members have dual signatures farther apart than ``eps``.

    ``eps`` is relative: two signatures are grouped when their Euclidean distance
    is at most ``eps * (1 + max signature norm in the cluster)``. Only the
    cluster positions listed in ``clusters`` are touched (all by default). Split
    groups replace the original cluster in place, ordered by smallest member.
    """
    targets = set(range(partition.n_clusters)) if clusters is None else set(clusters)
    new_clusters: List[Cluster] = []
    for ell, cl in enumerate(partition.clusters):
        if ell not in targets or cl.size == 1:
            new_clusters.append(cl)
            continue
        missing = [k for k in cl.members if k not in signatures]
        if missing:
            raise KeyError(f"missing dual signature for realizations {missing}")
        vectors = {k: signatures[k].vector() for k in cl.members}
        groups = group_by_signature(cl.members, vectors, eps)
        if len(groups) == 1:
            new_clusters.append(cl)
        else:
            new_clusters.extend(Cluster.build(stage, g) for g in groups)
    return Partition(partition.stage, tuple(new_clusters), partition.n_realizations, partition.version + 1)


def coarse_tree_size(partitions: Sequence[Partition]) -> float:
    """Average over stages ``2..T`` of clusters / realizations."""
    if not partitions:
        raise ValueError("need one partition per stage 2..T")
    return float(sum(p.n_clusters / p.n_realizations for p in partitions) / len(partitions))
