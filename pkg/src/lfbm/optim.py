"""Minorize-maximize trainer for the latent factor blockmodel.

Each sweep walks a schedule of phases. Continuous blocks (factor rows,
block matrix, covariate coefficients, bias) take a damped Newton step on
the quadratic minorizer, with the step size chosen by backtracking; the
bounded curvature makes every such step an ascent step for any eta in
(0, 1]. Cluster labels are updated by exact per-object maximization in
ascending index order, so the objective never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import (
    FitTrace,
    HyperParams,
    LatentState,
    NumericError,
    RelationData,
    SideInfo,
    validate,
)
from .model import (
    FactorSelector,
    _block_problem,
    _llp,
    _pair_parts,
    _sigmoid_clamped,
    log_posterior,
    pair_logits,
    with_block,
)

PHASE_U_ROWS = "u_rows"
PHASE_V_ROWS = "v_rows"
PHASE_BETA = "beta"
PHASE_C = "c"
PHASE_LABELS = "labels"
PHASE_BIAS = "bias"

_ALL_PHASES = (PHASE_U_ROWS, PHASE_V_ROWS, PHASE_BETA, PHASE_C, PHASE_LABELS, PHASE_BIAS)

MAX_BACKTRACKS = 30
MONOTONE_TOL = 1e-8


class SingularCurvatureError(RuntimeError):
    """The curvature bound is singular (zero penalty and no data term)."""


class AblationMode(str, Enum):
    """Which model components participate in fitting.

    FACTOR_ONLY freezes C at zero (labels become inert), BLOCK_ONLY
    freezes U and V at zero. Frozen blocks never change during a fit.
    """

    FULL = "full"
    FACTOR_ONLY = "factor-only"
    BLOCK_ONLY = "block-only"


@dataclass(frozen=True)
class SweepSchedule:
    """Order of update phases within one sweep.

    reassign_every runs the label phase only on sweeps whose index is a
    multiple of it (the first sweep always qualifies).
    """

    order: Tuple[str, ...] = _ALL_PHASES
    reassign_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        for phase in self.order:
            if phase not in _ALL_PHASES:
                raise ValueError(f"unknown phase {phase!r}")
        if len(set(self.order)) != len(self.order):
            raise ValueError("each phase may appear at most once")
        if self.reassign_every < 1:
            raise ValueError("reassign_every must be >= 1")


def init_state(n: int, hp: HyperParams, side_dim: int = 0) -> LatentState:
    """Seeded random starting point: small normal factors, zero C/beta/bias,
    uniform random labels. Deterministic given (n, hp, side_dim)."""
    if n < 1:
        raise ValueError("need at least one object")
    rng = np.random.default_rng(hp.seed)
    U = rng.normal(0.0, 0.1, size=(n, hp.d))
    V = rng.normal(0.0, 0.1, size=(n, hp.d))
    z = rng.integers(0, hp.k, size=n)
    return LatentState(
        U=U,
        V=V,
        C=np.zeros((hp.k, hp.k)),
        z=z,
        beta=np.zeros(side_dim),
        bias=0.0,
    )


def _factorize(curv: np.ndarray):
    try:
        return cho_factor(-curv, lower=True)
    except (LinAlgError, ValueError):
        return None


def _armijo_search(prob, direction: np.ndarray, q: float, hp: HyperParams) -> float:
    """Backtrack from eta0 until the sufficient-ascent condition holds.

    q = g . (-K)^-1 g is the predicted first-order gain per unit step;
    exhaustion after MAX_BACKTRACKS shrinks returns 0.0 (skip the block).
    """
    f0 = prob.local_value(prob.omega)
    eta = hp.eta0
    for _ in range(MAX_BACKTRACKS + 1):
        cand = prob.omega + eta * direction
        if prob.local_value(cand) >= f0 + hp.armijo_slope * eta * q:
            return eta
        eta *= hp.armijo_shrink
    return 0.0


def armijo_eta(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> float:
    """Step size for the selected block's minorizer step, by backtracking.

    Returns a value in {0} union (0, eta0]; 0 means the block should be
    skipped (search exhausted, or the curvature bound is singular).
    """
    prob = _block_problem(which, state, data, hp, side)
    if prob.omega.size == 0:
        return hp.eta0
    cho = _factorize(prob.curvature())
    if cho is None:
        return 0.0
    g = prob.gradient()
    direction = cho_solve(cho, g)
    return _armijo_search(prob, direction, float(g @ direction), hp)


def mm_step(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
    eta: float = 1.0,
) -> LatentState:
    """One damped Newton step on the selected block's minorizer.

    Replaces the block with omega + eta * (-K)^-1 grad and leaves every
    other block untouched. Raises SingularCurvatureError when the bound
    cannot be factorized (possible only with zero penalty and a vanishing
    data term), in which case the caller may skip the block.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must lie in (0, 1]")
    prob = _block_problem(which, state, data, hp, side)
    if prob.omega.size == 0:
        return state
    cho = _factorize(prob.curvature())
    if cho is None:
        raise SingularCurvatureError(
            f"curvature bound for {which.kind} block is singular"
        )
    g = prob.gradient()
    return with_block(which, state, prob.omega + eta * cho_solve(cho, g))


def _update_block(which, state, data, hp, side, cache):
    """Gradient/curvature/step for one block, reusing cached factorizations.

    Returns (new_state, eta, warning). eta is None when the block is
    empty, 0.0 when skipped; warning is set on singular curvature.
    """
    prob = _block_problem(which, state, data, hp, side)
    if prob.omega.size == 0:
        return state, None, None
    hit = cache.get(prob.mask_key)
    if hit is None:
        hit = _factorize(prob.curvature())
        cache[prob.mask_key] = hit if hit is not None else "singular"
    if hit == "singular" or hit is None:
        label = which.kind if which.index is None else f"{which.kind}[{which.index}]"
        return state, 0.0, f"{label}: singular curvature, block skipped"
    g = prob.gradient()
    direction = cho_solve(hit, g)
    eta = _armijo_search(prob, direction, float(g @ direction), hp)
    if eta == 0.0:
        return state, 0.0, None
    return with_block(which, state, prob.omega + eta * direction), eta, None


def reassign_clusters(
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> LatentState:
    """Exact coordinate update of the hard cluster labels.

    Objects are visited in ascending index order; each takes the label
    maximizing its observed-pair log-likelihood terms, counting outgoing
    and incoming pairs (a self-pair is counted once), with other labels
    held at their latest values. Ties go to the lowest label, so the
    objective never decreases.
    """
    i_idx, j_idx, s = data.pair_arrays
    bterm, uv, _ = _pair_parts(state, i_idx, j_idx, side)
    base = bterm + uv + state.bias
    C = state.C
    k = state.k
    z = state.z.copy()
    for i in range(data.n):
        out_pos = data.row_entries(i)
        in_pos = data.col_entries(i)
        out_sel = out_pos[j_idx[out_pos] != i]
        in_sel = in_pos[i_idx[in_pos] != i]
        score = np.zeros(k)
        if out_sel.size:
            Hk = base[out_sel][None, :] + C[:, z[j_idx[out_sel]]]
            score += Hk @ s[out_sel] - _llp(Hk).sum(axis=1)
        if in_sel.size:
            Hk = base[in_sel][None, :] + C[z[i_idx[in_sel]], :].T
            score += Hk @ s[in_sel] - _llp(Hk).sum(axis=1)
        self_pos = out_pos[j_idx[out_pos] == i]
        if self_pos.size:
            p = self_pos[0]
            Hk = base[p] + np.diag(C)
            score += s[p] * Hk - _llp(Hk)
        z[i] = int(np.argmax(score))
    return replace(state, z=z)


def _apply_mode(state: LatentState, mode: AblationMode) -> LatentState:
    if mode == AblationMode.FACTOR_ONLY:
        return replace(state, C=np.zeros_like(state.C))
    if mode == AblationMode.BLOCK_ONLY:
        return replace(state, U=np.zeros_like(state.U), V=np.zeros_like(state.V))
    return state


_MODE_SKIPS = {
    AblationMode.FULL: frozenset(),
    AblationMode.FACTOR_ONLY: frozenset({PHASE_C, PHASE_LABELS}),
    AblationMode.BLOCK_ONLY: frozenset({PHASE_U_ROWS, PHASE_V_ROWS}),
}


def fit(
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
    schedule: Optional[SweepSchedule] = None,
    mode: AblationMode = AblationMode.FULL,
    init: Optional[LatentState] = None,
    progress=None,
) -> Tuple[LatentState, FitTrace]:
    """Run up to max_sweeps sweeps of the schedule and return the final
    state with its trace.

    Stops early when a sweep improves the objective by less than
    rel_tol * max(1, |L|). The trace holds the initial objective plus one
    value per completed sweep and is guaranteed non-decreasing; a drop
    beyond 1e-8 raises NumericError since the updates make it impossible.
    init overrides the seeded random starting point (frozen blocks are
    still zeroed per mode); progress, if given, is called as
    progress(sweep_index, objective) after every sweep.
    """
    validate(data)
    if schedule is None:
        schedule = SweepSchedule()
    mode = AblationMode(mode)
    side_dim = side.m if side is not None else 0
    state = init if init is not None else init_state(data.n, hp, side_dim)
    state = _apply_mode(state, mode)

    objective = [log_posterior(state, data, hp, side)]
    etas: List[float] = []
    reassignments: List[int] = []
    warnings: List[str] = []
    skips = _MODE_SKIPS[mode]

    for sweep in range(hp.max_sweeps):
        for phase in schedule.order:
            if phase in skips:
                continue
            if phase == PHASE_U_ROWS:
                cache = {}
                for i in range(data.n):
                    state, eta, warn = _update_block(
                        FactorSelector.u_row(i), state, data, hp, side, cache
                    )
                    if eta is not None:
                        etas.append(eta)
                    if warn:
                        warnings.append(f"sweep {sweep}: {warn}")
            elif phase == PHASE_V_ROWS:
                cache = {}
                for j in range(data.n):
                    state, eta, warn = _update_block(
                        FactorSelector.v_row(j), state, data, hp, side, cache
                    )
                    if eta is not None:
                        etas.append(eta)
                    if warn:
                        warnings.append(f"sweep {sweep}: {warn}")
            elif phase == PHASE_LABELS:
                if sweep % schedule.reassign_every == 0:
                    old = state.z
                    state = reassign_clusters(state, data, hp, side)
                    reassignments.append(int(np.sum(old != state.z)))
            else:
                which = {
                    PHASE_BETA: FactorSelector.beta(),
                    PHASE_C: FactorSelector.c_flat(),
                    PHASE_BIAS: FactorSelector.bias(),
                }[phase]
                state, eta, warn = _update_block(which, state, data, hp, side, {})
                if eta is not None:
                    etas.append(eta)
                if warn:
                    warnings.append(f"sweep {sweep}: {warn}")
        value = log_posterior(state, data, hp, side)
        previous = objective[-1]
        if value < previous - MONOTONE_TOL:
            raise NumericError(
                f"objective decreased from {previous!r} to {value!r} in sweep {sweep}"
            )
        objective.append(value)
        if progress is not None:
            progress(sweep, value)
        if value - previous < hp.rel_tol * max(1.0, abs(previous)):
            break

    trace = FitTrace(
        objective_per_sweep=tuple(objective),
        eta_per_update=tuple(etas),
        reassignment_counts=tuple(reassignments),
        warnings=tuple(warnings),
    )
    return state, trace


def predict(
    state: LatentState,
    pairs: Sequence[Tuple[int, int]],
    side: Optional[SideInfo] = None,
) -> np.ndarray:
    """Link probabilities sigma(H_ij) for the given pairs, each in (0, 1)."""
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.float64)
    arr = np.asarray([(p[0], p[1]) for p in pairs], dtype=np.int64)
    ii, jj = arr[:, 0], arr[:, 1]
    if ii.min() < 0 or jj.min() < 0 or ii.max() >= state.n or jj.max() >= state.n:
        raise IndexError(f"pair index out of range for n={state.n}")
    return _sigmoid_clamped(pair_logits(state, ii, jj, side))
