"""Model math: logits, log-posterior objective, gradients, Hessians and
curvature lower bounds, and the quadratic minorizer built from them.

Every function here is pure. The objective being maximized is

    L = sum over observed (i, j) of  s_ij * H_ij - log(1 + exp(H_ij))
        - (lambda_u / 2) ||U||_F^2 - (lambda_v / 2) ||V||_F^2
        - (lambda_c / 2) ||C||_F^2 - (lambda_beta / 2) ||beta||^2

with logit H_ij = beta . x_ij + u_i . v_j + C[z_i, z_j] + bias. Additive
constants from the priors are dropped throughout, so L <= 0 whenever all
penalty weights are nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .core import HyperParams, LatentState, RelationData, SideInfo

SIGMA_EPS = 1e-12

_SELECTOR_KINDS = ("u_row", "v_row", "c", "beta", "bias")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def _sigmoid_clamped(x: np.ndarray) -> np.ndarray:
    # keeps log(sigma) finite when reporting held-out likelihoods
    return np.clip(expit(x), SIGMA_EPS, 1.0 - SIGMA_EPS)


def _llp(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def stable_logit_terms(x: float) -> Tuple[float, float]:
    """Overflow-safe sigmoid and logistic log-partition of a scalar.

    Returns (sigma, llp) with sigma = 1 / (1 + exp(-x)) clamped into the
    open interval (0, 1) and llp = log(1 + exp(x)) >= 0, both valid for
    |x| up to the float64 exponent range.
    """
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"logit argument must be finite, got {x}")
    return float(_sigmoid_clamped(x)), float(_llp(x))


@dataclass(frozen=True)
class FactorSelector:
    """Identifies the free block in an alternating update.

    One of: a single sender row u_i, a single receiver row v_j, the
    flattened block matrix C, the covariate coefficients beta, or the
    scalar bias.
    """

    kind: str
    index: Optional[int] = None

    def __post_init__(self):
        if self.kind not in _SELECTOR_KINDS:
            raise ValueError(f"unknown selector kind {self.kind!r}")
        needs_index = self.kind in ("u_row", "v_row")
        if needs_index and (self.index is None or self.index < 0):
            raise ValueError(f"{self.kind} selector requires a nonnegative row index")
        if not needs_index and self.index is not None:
            raise ValueError(f"{self.kind} selector takes no index")

    @classmethod
    def u_row(cls, i: int) -> "FactorSelector":
        return cls("u_row", int(i))

    @classmethod
    def v_row(cls, j: int) -> "FactorSelector":
        return cls("v_row", int(j))

    @classmethod
    def c_flat(cls) -> "FactorSelector":
        return cls("c")

    @classmethod
    def beta(cls) -> "FactorSelector":
        return cls("beta")

    @classmethod
    def bias(cls) -> "FactorSelector":
        return cls("bias")


@dataclass(frozen=True)
class MinorizerContext:
    """Frozen ingredients of the quadratic minorizer around one anchor.

    curvature is the constant symmetric negative-definite bound standing
    in for the Hessian; grad_at_anchor and objective_at_anchor are the
    exact gradient and objective value at the anchor.
    """

    anchor: np.ndarray
    grad_at_anchor: np.ndarray
    curvature: np.ndarray
    objective_at_anchor: float

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=np.float64).reshape(-1)
        grad = np.asarray(self.grad_at_anchor, dtype=np.float64).reshape(-1)
        curv = np.asarray(self.curvature, dtype=np.float64)
        p = anchor.size
        if grad.shape != (p,) or curv.shape != (p, p):
            raise ValueError("anchor, gradient and curvature dimensions disagree")
        if p and not np.allclose(curv, curv.T, atol=1e-10):
            raise ValueError("curvature matrix must be symmetric")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "grad_at_anchor", grad)
        object.__setattr__(self, "curvature", curv)
        object.__setattr__(self, "objective_at_anchor", float(self.objective_at_anchor))


def block_kron(z_i: np.ndarray, z_j: np.ndarray) -> np.ndarray:
    """Kronecker product of two one-hot cluster indicators.

    Row-major flattening: the result is one-hot of length K^2 with the 1
    at flat index k*K + l when z_i selects k and z_j selects l, so that
    C.ravel() @ block_kron(z_i, z_j) == C[k, l].
    """
    zi = np.asarray(z_i, dtype=np.float64).reshape(-1)
    zj = np.asarray(z_j, dtype=np.float64).reshape(-1)
    for name, v in (("z_i", zi), ("z_j", zj)):
        ones = np.count_nonzero(v == 1.0)
        if ones != 1 or np.count_nonzero(v) != 1:
            raise ValueError(f"{name} is not one-hot")
    return np.kron(zi, zj)


def _pair_parts(
    state: LatentState,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    side: Optional[SideInfo],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three non-bias addends of H for the given pairs: (beta.x, u.v, C term)."""
    uv = np.einsum("td,td->t", state.U[i_idx], state.V[j_idx])
    cterm = state.C[state.z[i_idx], state.z[j_idx]]
    if side is not None and state.m:
        bterm = side.design(i_idx, j_idx) @ state.beta
    else:
        bterm = np.zeros(len(i_idx), dtype=np.float64)
    return bterm, uv, cterm


def pair_logits(
    state: LatentState,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    side: Optional[SideInfo] = None,
) -> np.ndarray:
    """Vector of logits H_ij for the given pair arrays."""
    bterm, uv, cterm = _pair_parts(state, i_idx, j_idx, side)
    return bterm + uv + cterm + state.bias


def logit(state: LatentState, i: int, j: int, side: Optional[SideInfo] = None) -> float:
    """H_ij = beta . x_ij + u_i . v_j + C[z_i, z_j] + bias for one pair."""
    if not (0 <= i < state.n) or not (0 <= j < state.n):
        raise IndexError(f"pair ({i}, {j}) out of range for n={state.n}")
    ii = np.asarray([i], dtype=np.int64)
    jj = np.asarray([j], dtype=np.int64)
    return float(pair_logits(state, ii, jj, side)[0])


def _penalty(state: LatentState, hp: HyperParams) -> float:
    pen = 0.5 * hp.lambda_u * float(np.sum(state.U * state.U))
    pen += 0.5 * hp.lambda_v * float(np.sum(state.V * state.V))
    pen += 0.5 * hp.lambda_c * float(np.sum(state.C * state.C))
    pen += 0.5 * hp.lambda_beta * float(np.sum(state.beta * state.beta))
    return pen


def log_posterior(
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> float:
    """The objective L: Bernoulli log-likelihood of observed pairs minus penalties."""
    if state.n != data.n:
        raise ValueError(f"state has n={state.n} but data has n={data.n}")
    i_idx, j_idx, s = data.pair_arrays
    H = pair_logits(state, i_idx, j_idx, side)
    data_term = float(s @ H - np.sum(_llp(H)))
    return data_term - _penalty(state, hp)


class _BlockProblem:
    """The objective restricted to one factor block, over its observed pairs.

    The restricted data term is f(w) = s . H(w) - sum llp(H(w)) with
    H(w) = offset + A w, where the design A and offset collect everything
    the block does not touch. Gradient, Hessian and curvature bound of
    the full objective with respect to the block follow directly.
    """

    def __init__(self, A, s, offset, lam, omega, mask_key=None):
        self.A = A
        self.s = s
        self.offset = offset
        self.lam = lam
        self.omega = omega
        # identifies the observed-pair pattern behind A; curvature
        # factorizations may be shared between blocks with equal keys
        self.mask_key = mask_key

    def logits(self, omega: np.ndarray) -> np.ndarray:
        return self.offset + self.A @ omega

    def local_value(self, omega: np.ndarray) -> float:
        """Data terms over this block's pairs minus this block's penalty.

        Differences of this quantity between two block values equal the
        corresponding differences of the full objective.
        """
        H = self.logits(omega)
        val = float(self.s @ H - np.sum(_llp(H)))
        return val - 0.5 * self.lam * float(omega @ omega)

    def gradient(self) -> np.ndarray:
        resid = self.s - _sigmoid(self.logits(self.omega))
        return self.A.T @ resid - self.lam * self.omega

    def hessian(self) -> np.ndarray:
        sig = _sigmoid(self.logits(self.omega))
        w = sig * (1.0 - sig)
        p = self.omega.size
        return -(self.A * w[:, None]).T @ self.A - self.lam * np.eye(p)

    def curvature(self) -> np.ndarray:
        p = self.omega.size
        return -0.25 * (self.A.T @ self.A) - self.lam * np.eye(p)


def _block_problem(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo],
) -> _BlockProblem:
    i_idx, j_idx, s = data.pair_arrays
    if which.kind == "u_row":
        i = which.index
        if i >= state.n:
            raise IndexError(f"u_row index {i} out of range for n={state.n}")
        pos = data.row_entries(i)
        ii, jj = i_idx[pos], j_idx[pos]
        bterm, _, cterm = _pair_parts(state, ii, jj, side)
        A = state.V[jj]
        offset = bterm + cterm + state.bias
        return _BlockProblem(A, s[pos], offset, hp.lambda_u, state.U[i].copy(),
                             mask_key=(b"u", jj.tobytes()))
    if which.kind == "v_row":
        j = which.index
        if j >= state.n:
            raise IndexError(f"v_row index {j} out of range for n={state.n}")
        pos = data.col_entries(j)
        ii, jj = i_idx[pos], j_idx[pos]
        bterm, _, cterm = _pair_parts(state, ii, jj, side)
        A = state.U[ii]
        offset = bterm + cterm + state.bias
        return _BlockProblem(A, s[pos], offset, hp.lambda_v, state.V[j].copy(),
                             mask_key=(b"v", ii.tobytes()))
    if which.kind == "c":
        k = state.k
        bterm, uv, _ = _pair_parts(state, i_idx, j_idx, side)
        flat = state.z[i_idx] * k + state.z[j_idx]
        A = np.zeros((len(i_idx), k * k), dtype=np.float64)
        A[np.arange(len(i_idx)), flat] = 1.0
        offset = bterm + uv + state.bias
        return _BlockProblem(A, s, offset, hp.lambda_c, state.C.ravel().copy(), mask_key="c")
    if which.kind == "beta":
        _, uv, cterm = _pair_parts(state, i_idx, j_idx, side)
        if side is not None and state.m:
            A = side.design(i_idx, j_idx)
        else:
            A = np.zeros((len(i_idx), state.m), dtype=np.float64)
        offset = uv + cterm + state.bias
        return _BlockProblem(A, s, offset, hp.lambda_beta, state.beta.copy(), mask_key="beta")
    # bias: unit design column, no penalty
    bterm, uv, cterm = _pair_parts(state, i_idx, j_idx, side)
    A = np.ones((len(i_idx), 1), dtype=np.float64)
    offset = bterm + uv + cterm
    return _BlockProblem(A, s, offset, 0.0, np.array([state.bias]), mask_key="bias")


def get_block(which: FactorSelector, state: LatentState) -> np.ndarray:
    """The selected block as a flat vector (row-major for C)."""
    if which.kind == "u_row":
        return state.U[which.index].copy()
    if which.kind == "v_row":
        return state.V[which.index].copy()
    if which.kind == "c":
        return state.C.ravel().copy()
    if which.kind == "beta":
        return state.beta.copy()
    return np.array([state.bias])


def with_block(which: FactorSelector, state: LatentState, omega: np.ndarray) -> LatentState:
    """A new state with the selected block replaced by the flat vector omega."""
    omega = np.asarray(omega, dtype=np.float64).reshape(-1)
    if which.kind == "u_row":
        U = state.U.copy()
        U[which.index] = omega
        return replace(state, U=U)
    if which.kind == "v_row":
        V = state.V.copy()
        V[which.index] = omega
        return replace(state, V=V)
    if which.kind == "c":
        return replace(state, C=omega.reshape(state.k, state.k))
    if which.kind == "beta":
        return replace(state, beta=omega)
    if omega.size != 1:
        raise ValueError("bias block is a single scalar")
    return replace(state, bias=float(omega[0]))


def gradient(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> np.ndarray:
    """Gradient of the objective with respect to the selected block.

    Each observed pair contributes its residual (s - sigma(H)) times its
    design row; the block's quadratic penalty contributes -lambda * block.
    """
    return _block_problem(which, state, data, hp, side).gradient()


def exact_hessian(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> np.ndarray:
    """State-dependent Hessian: -sum sigma(1-sigma) a a^T - lambda I."""
    return _block_problem(which, state, data, hp, side).hessian()


def curvature(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> np.ndarray:
    """Global curvature lower bound: -(1/4) sum a a^T - lambda I.

    Uses sigma(1-sigma) <= 1/4, so the bound is independent of the
    current block value and satisfies K <= Hessian in the Loewner order
    for every state sharing the fixed factors.
    """
    return _block_problem(which, state, data, hp, side).curvature()


def minorizer_context(
    which: FactorSelector,
    state: LatentState,
    data: RelationData,
    hp: HyperParams,
    side: Optional[SideInfo] = None,
) -> MinorizerContext:
    """Assemble the minorizer ingredients for the selected block at this state."""
    prob = _block_problem(which, state, data, hp, side)
    return MinorizerContext(
        anchor=prob.omega,
        grad_at_anchor=prob.gradient(),
        curvature=prob.curvature(),
        objective_at_anchor=log_posterior(state, data, hp, side),
    )


def minorizer_value(ctx: MinorizerContext, omega: np.ndarray) -> float:
    """Quadratic minorizer Q(omega) = L0 + delta.g + (1/2) delta.K.delta.

    Touches the objective at the anchor and lower-bounds it everywhere,
    because the curvature matrix under-estimates the Hessian globally.
    """
    omega = np.asarray(omega, dtype=np.float64).reshape(-1)
    if omega.shape != ctx.anchor.shape:
        raise ValueError(
            f"omega has shape {omega.shape}, expected {ctx.anchor.shape}"
        )
    delta = omega - ctx.anchor
    return (
        ctx.objective_at_anchor
        + float(delta @ ctx.grad_at_anchor)
        + 0.5 * float(delta @ ctx.curvature @ delta)
    )
