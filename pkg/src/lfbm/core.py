"""Shared domain types for the latent factor blockmodel.

All types here are immutable after construction and safe to share
read-only across workers. Numpy array fields are stored as float64
copies with the writeable flag cleared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np


class DataError(ValueError):
    """Relational data or a serialized artifact violates a structural invariant."""


class NumericError(RuntimeError):
    """An optimization guarantee (e.g. monotone ascent) failed beyond tolerance."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RelationData:
    """Partially observed binary relation matrix, stored sparsely.

    ``entries`` holds exactly the observed pairs (i, j, s); any pair not
    listed is missing, never implicitly zero. Entries are canonicalized to
    ascending (i, j) order at construction so that equal relations compare
    equal and file round-trips are exact. The ``directed`` flag records how
    the data was ingested; undirected data is materialized as two mirrored
    directed entries per link.
    """

    n: int
    entries: Tuple[Tuple[int, int, int], ...]
    directed: bool = True

    def __post_init__(self):
        canon = tuple(sorted((int(i), int(j), int(s)) for i, j, s in self.entries))
        object.__setattr__(self, "entries", canon)

    @cached_property
    def pair_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Observed pairs as (i, j, s) arrays, in canonical entry order."""
        if not self.entries:
            return (
                np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.float64),
            )
        arr = np.asarray(self.entries, dtype=np.int64)
        out = (arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].astype(np.float64))
        for a in out:
            a.flags.writeable = False
        return out

    @cached_property
    def _row_ptr(self) -> np.ndarray:
        i_idx = self.pair_arrays[0]
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(i_idx, minlength=self.n), out=ptr[1:])
        return ptr

    @cached_property
    def _col_order(self) -> Tuple[np.ndarray, np.ndarray]:
        j_idx = self.pair_arrays[1]
        order = np.argsort(j_idx, kind="stable")
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(j_idx, minlength=self.n), out=ptr[1:])
        return order, ptr

    def row_entries(self, i: int) -> np.ndarray:
        """Positions (into pair_arrays) of observed pairs with sender i."""
        ptr = self._row_ptr
        return np.arange(ptr[i], ptr[i + 1])

    def col_entries(self, j: int) -> np.ndarray:
        """Positions (into pair_arrays) of observed pairs with receiver j."""
        order, ptr = self._col_order
        return order[ptr[j] : ptr[j + 1]]


def validate(data: RelationData) -> None:
    """Check all RelationData invariants, raising DataError on the first failure.

    Errors name the offending entry: index out of range, duplicate (i, j)
    pair, or a relation value outside {0, 1}.
    """
    if data.n < 0:
        raise DataError(f"object count must be nonnegative, got {data.n}")
    seen = set()
    for entry in data.entries:
        i, j, s = entry
        if not (0 <= i < data.n) or not (0 <= j < data.n):
            raise DataError(f"entry {entry}: index out of range for n={data.n}")
        if s not in (0, 1):
            raise DataError(f"entry {entry}: non-binary value {s}")
        if (i, j) in seen:
            raise DataError(f"entry {entry}: duplicate pair ({i}, {j})")
        seen.add((i, j))


@dataclass(frozen=True)
class LatentState:
    """All learnable quantities of the model.

    U and V are n x d sender/receiver factors, C the K x K block matrix,
    z hard cluster labels in [0, K), beta covariate coefficients (possibly
    empty) and bias a scalar offset. Arrays are read-only; updates build a
    new state via dataclasses.replace.
    """

    U: np.ndarray
    V: np.ndarray
    C: np.ndarray
    z: np.ndarray
    beta: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        U = _readonly(np.asarray(self.U, dtype=np.float64))
        V = _readonly(np.asarray(self.V, dtype=np.float64))
        C = _readonly(np.asarray(self.C, dtype=np.float64))
        z = _readonly(np.asarray(self.z, dtype=np.int64))
        beta = _readonly(np.asarray(self.beta, dtype=np.float64).reshape(-1))
        bias = float(self.bias)
        if U.ndim != 2 or V.shape != U.shape:
            raise ValueError(f"U and V must both be n x d, got {U.shape} and {V.shape}")
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"C must be square, got {C.shape}")
        if z.shape != (U.shape[0],):
            raise ValueError(f"z must have length n={U.shape[0]}, got {z.shape}")
        k = C.shape[0]
        if z.size and (z.min() < 0 or z.max() >= k):
            raise ValueError(f"cluster labels must lie in [0, {k})")
        for name, a in (("U", U), ("V", V), ("C", C), ("beta", beta)):
            if a.size and not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")
        if not np.isfinite(bias):
            raise ValueError("bias is non-finite")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "bias", bias)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def k(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.beta.shape[0]

    def one_hot(self) -> np.ndarray:
        """Cluster labels as an n x K indicator matrix (one 1 per row)."""
        Z = np.zeros((self.n, self.k), dtype=np.float64)
        Z[np.arange(self.n), self.z] = 1.0
        return Z


@dataclass(frozen=True)
class HyperParams:
    """Model dimensions, regularization weights and optimizer settings.

    Each lambda multiplies the corresponding quadratic penalty directly:
    the prior contribution of factor block X with weight lam is
    -(lam / 2) * ||X||_F^2. max_sweeps may be zero, in which case fitting
    returns the initial state untouched.
    """

    d: int = 2
    k: int = 3
    lambda_u: float = 1.0
    lambda_v: float = 1.0
    lambda_c: float = 1.0
    lambda_beta: float = 1.0
    eta0: float = 0.2
    armijo_shrink: float = 0.5
    armijo_slope: float = 0.01
    max_sweeps: int = 50
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("latent dimension d must be >= 1")
        if self.k < 1:
            raise ValueError("cluster count k must be >= 1")
        for name in ("lambda_u", "lambda_v", "lambda_c", "lambda_beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0.0 < self.eta0 <= 1.0):
            raise ValueError("eta0 must lie in (0, 1]")
        if not (0.0 < self.armijo_shrink < 1.0):
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if not (0.0 < self.armijo_slope < 1.0):
            raise ValueError("armijo_slope must lie in (0, 1)")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be >= 0")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class SideInfo:
    """Per-pair covariate vectors x_ij of fixed length m.

    Pairs absent from the lookup get the all-zeros vector, so side
    information may be supplied for any subset of pairs.
    """

    m: int
    vectors: Mapping[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), v in dict(self.vectors).items():
            a = np.asarray(v, dtype=np.float64).reshape(-1)
            if a.shape != (self.m,):
                raise ValueError(
                    f"covariate vector for pair ({i}, {j}) has length {a.size}, expected {self.m}"
                )
            if not np.all(np.isfinite(a)):
                raise ValueError(f"covariate vector for pair ({i}, {j}) is non-finite")
            clean[(int(i), int(j))] = _readonly(a)
        object.__setattr__(self, "vectors", clean)

    def vector(self, i: int, j: int) -> np.ndarray:
        v = self.vectors.get((i, j))
        if v is None:
            return np.zeros(self.m, dtype=np.float64)
        return v

    def design(self, i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
        """Stack x_ij rows for the given pair arrays into a (len, m) matrix."""
        X = np.zeros((len(i_idx), self.m), dtype=np.float64)
        for t, (i, j) in enumerate(zip(i_idx.tolist(), j_idx.tolist())):
            v = self.vectors.get((i, j))
            if v is not None:
                X[t] = v
        return X


@dataclass(frozen=True)
class FitTrace:
    """Per-sweep objective values and step diagnostics from one fit.

    objective_per_sweep[0] is the objective of the initial state; each
    subsequent value follows one full sweep and is non-decreasing up to
    1e-8. eta_per_update logs every accepted step size (0.0 marks a
    skipped block), reassignment_counts the labels moved per relabeling
    pass, and warnings any blocks skipped for singular curvature.
    """

    objective_per_sweep: Tuple[float, ...]
    eta_per_update: Tuple[float, ...] = ()
    reassignment_counts: Tuple[int, ...] = ()
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "objective_per_sweep", tuple(float(x) for x in self.objective_per_sweep)
        )
        object.__setattr__(self, "eta_per_update", tuple(float(x) for x in self.eta_per_update))
        object.__setattr__(
            self, "reassignment_counts", tuple(int(x) for x in self.reassignment_counts)
        )
        object.__setattr__(self, "warnings", tuple(str(x) for x in self.warnings))


@dataclass(frozen=True)
class EvalReport:
    """Link prediction and clustering metrics for one (state, test set) pair."""

    auc: float
    roc: Tuple[Tuple[float, float], ...]
    holdout_log_likelihood: float
    nmi: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(
            self, "roc", tuple((float(f), float(t)) for f, t in self.roc)
        )
        object.__setattr__(self, "auc", float(self.auc))
        object.__setattr__(self, "holdout_log_likelihood", float(self.holdout_log_likelihood))
        if self.nmi is not None:
            object.__setattr__(self, "nmi", float(self.nmi))
