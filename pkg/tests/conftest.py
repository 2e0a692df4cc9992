"""Shared builders for randomized test instances and numerical oracles,
plus the reporting channel for acceptance-criterion results."""

import math

import numpy as np

import lfbm
from lfbm import FactorSelector

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def make_instance(seed, n=None, d=None, k=None, m=0, density=0.6, self_pairs=True,
                  lam=(0.3, 0.2, 0.5, 0.4)):
    """A random (state, data, hp, side) tuple with consistent shapes.

    Indices, labels and observations are drawn from a seeded generator;
    side is None when m == 0.
    """
    rng = np.random.default_rng(seed)
    n = n if n is not None else int(rng.integers(4, 13))
    d = d if d is not None else int(rng.integers(1, 5))
    k = k if k is not None else int(rng.integers(1, 4))
    entries = []
    for i in range(n):
        for j in range(n):
            if i == j and not self_pairs:
                continue
            if i == j and rng.random() < 0.7:
                continue
            if rng.random() < density:
                entries.append((i, j, int(rng.random() < 0.5)))
    data = lfbm.RelationData(n=n, entries=entries)
    hp = lfbm.HyperParams(
        d=d, k=k,
        lambda_u=lam[0], lambda_v=lam[1], lambda_c=lam[2], lambda_beta=lam[3],
        seed=int(rng.integers(0, 2**31)),
    )
    side = None
    if m > 0:
        vectors = {}
        for i, j, _ in entries:
            if rng.random() < 0.8:
                vectors[(i, j)] = rng.normal(size=m)
        side = lfbm.SideInfo(m=m, vectors=vectors)
    state = lfbm.LatentState(
        U=rng.normal(scale=0.8, size=(n, d)),
        V=rng.normal(scale=0.8, size=(n, d)),
        C=rng.normal(scale=0.8, size=(k, k)),
        z=rng.integers(0, k, size=n),
        beta=rng.normal(size=m),
        bias=float(rng.normal(scale=0.5)),
    )
    return state, data, hp, side


def all_selectors(state, rng):
    """One selector of every kind, with random row indices where needed."""
    return [
        FactorSelector.u_row(int(rng.integers(0, state.n))),
        FactorSelector.v_row(int(rng.integers(0, state.n))),
        FactorSelector.c_flat(),
        FactorSelector.beta(),
        FactorSelector.bias(),
    ]


def naive_log_posterior(state, data, hp, side=None):
    """Independent double-loop evaluation of the objective in pure Python."""
    total = 0.0
    for i, j, s in data.entries:
        h = state.bias + state.C[state.z[i], state.z[j]]
        for t in range(state.d):
            h += state.U[i, t] * state.V[j, t]
        if side is not None:
            x = side.vector(i, j)
            for t in range(state.m):
                h += state.beta[t] * x[t]
        if h > 0:
            llp = h + math.log1p(math.exp(-h))
        else:
            llp = math.log1p(math.exp(h))
        total += s * h - llp
    for lam, block in (
        (hp.lambda_u, state.U),
        (hp.lambda_v, state.V),
        (hp.lambda_c, state.C),
        (hp.lambda_beta, state.beta),
    ):
        acc = 0.0
        for value in np.asarray(block).ravel():
            acc += value * value
        total -= 0.5 * lam * acc
    return total


def fd_gradient(which, state, data, hp, side=None, h=1e-5):
    """Central finite differences of the objective along the selected block."""
    w0 = lfbm.get_block(which, state)
    g = np.zeros_like(w0)
    for t in range(w0.size):
        wp, wm = w0.copy(), w0.copy()
        wp[t] += h
        wm[t] -= h
        lp = lfbm.log_posterior(lfbm.with_block(which, state, wp), data, hp, side)
        lm = lfbm.log_posterior(lfbm.with_block(which, state, wm), data, hp, side)
        g[t] = (lp - lm) / (2.0 * h)
    return g


def fd_hessian(which, state, data, hp, side=None, h=1e-5):
    """Central finite differences of the analytic gradient."""
    w0 = lfbm.get_block(which, state)
    H = np.zeros((w0.size, w0.size))
    for t in range(w0.size):
        wp, wm = w0.copy(), w0.copy()
        wp[t] += h
        wm[t] -= h
        gp = lfbm.gradient(which, lfbm.with_block(which, state, wp), data, hp, side)
        gm = lfbm.gradient(which, lfbm.with_block(which, state, wm), data, hp, side)
        H[:, t] = (gp - gm) / (2.0 * h)
    return H


def rel_err(got, want):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    return float(np.linalg.norm(got - want) / max(1.0, np.linalg.norm(want)))
