"""Planted-block synthetic relational data and train/test splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import DataError, RelationData


@dataclass(frozen=True)
class BlockSpec:
    """Planted-partition generator settings.

    sizes gives the cluster sizes (objects are laid out cluster by
    cluster); link_prob[k, l] is the probability of a link from a member
    of cluster k to a member of cluster l; noise flips each generated
    value independently.
    """

    sizes: Tuple[int, ...]
    link_prob: np.ndarray
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        P = np.array(self.link_prob, dtype=np.float64)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "link_prob", P)
        k = len(sizes)
        if k == 0 or any(s < 1 for s in sizes):
            raise ValueError("sizes must be a nonempty list of positive counts")
        if P.shape != (k, k):
            raise ValueError(f"link_prob must be {k} x {k}, got {P.shape}")
        if np.any(P < 0.0) or np.any(P > 1.0):
            raise ValueError("link probabilities must lie in [0, 1]")
        if not (0.0 <= self.noise < 0.5):
            raise ValueError("noise must lie in [0, 0.5)")
        P.flags.writeable = False


def three_cluster_spec(noise: float = 0.05, seed: int = 0) -> BlockSpec:
    """The 200-object, three-cluster benchmark layout.

    Clusters one and two are internally fully connected; cluster three is
    internally empty but fully linked (both directions) with cluster one.
    """
    link_prob = np.array(
        [
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ]
    )
    return BlockSpec(sizes=(67, 67, 66), link_prob=link_prob, noise=noise, seed=seed)


def generate(spec: BlockSpec) -> Tuple[RelationData, np.ndarray]:
    """Draw a fully observed directed relation with planted clusters.

    Every ordered pair i != j is observed: a link is drawn with the
    planted probability for its cluster pair, then flipped with
    probability spec.noise. Returns the data and the planted labels.
    Deterministic given spec.seed.
    """
    labels = np.repeat(np.arange(len(spec.sizes)), spec.sizes)
    n = int(labels.size)
    rng = np.random.default_rng(spec.seed)
    ii, jj = np.where(~np.eye(n, dtype=bool))
    p = spec.link_prob[labels[ii], labels[jj]]
    s = (rng.random(ii.size) < p).astype(np.int64)
    if spec.noise > 0.0:
        flips = rng.random(ii.size) < spec.noise
        s = np.where(flips, 1 - s, s)
    entries = tuple(zip(ii.tolist(), jj.tolist(), s.tolist()))
    return RelationData(n=n, entries=entries, directed=True), labels


@dataclass(frozen=True)
class Split:
    """Disjoint train/test partition of one relation's observed entries."""

    train: RelationData
    test: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "test", tuple((int(i), int(j), int(s)) for i, j, s in self.test)
        )


def split(data: RelationData, holdout_frac: float, seed: int) -> Split:
    """Hold out round(holdout_frac * |entries|) entries, sampled uniformly
    without replacement, as a labeled test set; the rest stays observed
    for training. Deterministic given seed."""
    if not (0.0 < holdout_frac < 1.0):
        raise ValueError("holdout_frac must lie in (0, 1)")
    total = len(data.entries)
    n_test = int(round(holdout_frac * total))
    if n_test >= total:
        raise DataError(
            f"holding out {n_test} of {total} entries would leave the training set empty"
        )
    rng = np.random.default_rng(seed)
    test_pos = set(rng.choice(total, size=n_test, replace=False).tolist())
    train_entries = tuple(e for t, e in enumerate(data.entries) if t not in test_pos)
    test_entries = tuple(data.entries[t] for t in sorted(test_pos))
    train = RelationData(n=data.n, entries=train_entries, directed=data.directed)
    return Split(train=train, test=test_entries)
