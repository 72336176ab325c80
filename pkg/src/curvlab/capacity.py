"""Two-set capacities and the isocapacitary constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .chain import MarkovChain, dirichlet_form, subset_mask
from .spectral import log_mean_array

TOL_LIN = 1e-10
N_MAX_PAIRS = 12


@dataclass
class CapacityResult:
    value: float
    potential: np.ndarray
    residual: float


def _disjoint_pair(chain, A, B):
    a = subset_mask(chain, A)
    b = subset_mask(chain, B)
    if not a.any() or not b.any():
        raise ValueError("A and B must be nonempty")
    if np.any(a & b):
        raise ValueError("A and B must be disjoint")
    return a, b


def capacity(chain: MarkovChain, A, B) -> CapacityResult:
    """``min E(h)`` over ``h`` with ``h = 0`` on ``A`` and ``h = 1`` on ``B``.

    The minimizer is harmonic off ``A ∪ B``; it is found by one dense solve.
    """
    a, b = _disjoint_pair(chain, A, B)
    h = b.astype(float)
    inner = ~(a | b)
    residual = 0.0
    if inner.any():
        L = chain.generator
        I = np.nonzero(inner)[0]
        Bi = np.nonzero(b)[0]
        rhs = -L[np.ix_(I, Bi)].sum(axis=1)
        h[I] = np.linalg.solve(L[np.ix_(I, I)], rhs)
        residual = float(np.abs((L @ h)[I]).max())
        if residual > TOL_LIN * max(1.0, float(np.abs(L).max())):
            raise RuntimeError(f"harmonic solve residual {residual:.3e} too large")
    return CapacityResult(dirichlet_form(chain, h), h, residual)


def _pairs_by_interior(chain: MarkovChain, n_max: int):
    """Yield ``(a_masks, b_masks, caps)`` batches covering all disjoint nonempty pairs.

    For each interior set the harmonic extension operator is factored once
    and applied to every split of the remaining vertices.
    """
    n = chain.n
    if n > n_max:
        raise ValueError(f"exhaustive pair enumeration limited to n <= {n_max} (got {n})")
    L = chain.generator
    W = chain.energy_matrix
    W = 0.5 * (W + W.T)
    verts = np.arange(n)
    for interior_bits in range(1 << n):
        inner = (interior_bits >> verts) & 1 == 1
        J = verts[~inner]
        k = J.size
        if k < 2:
            continue
        I = verts[inner]
        splits = np.arange(1, (1 << k) - 1)
        HJ = ((splits[:, None] >> np.arange(k)) & 1).astype(float)
        H = np.zeros((splits.size, n))
        H[:, J] = HJ
        if I.size:
            G = -np.linalg.solve(L[np.ix_(I, I)], L[np.ix_(I, J)])
            H[:, I] = HJ @ G.T
        caps = np.einsum("ij,jk,ik->i", H, W, H)
        bmask = np.zeros((splits.size, n), dtype=bool)
        bmask[:, J] = HJ.astype(bool)
        amask = np.zeros_like(bmask)
        amask[:, J] = ~HJ.astype(bool)
        yield amask, bmask, caps


def _cap_denominator(mA):
    return mA * np.log1p(math.e ** 2 / mA)


def alpha_cap(chain: MarkovChain, n_max: int = N_MAX_PAIRS):
    """``inf cap(A,B) / (m(A) log(1 + e²/m(A)))`` over disjoint pairs with ``m(B) ≥ 1/2``.

    Returns ``(value, A indices, B indices)``.
    """
    m = chain.m
    best = (math.inf, None, None)
    for amask, bmask, caps in _pairs_by_interior(chain, n_max):
        mA = amask @ m
        mB = bmask @ m
        ok = mB >= 0.5 - chain.tol.sum
        if not ok.any():
            continue
        vals = np.where(ok, caps / _cap_denominator(mA), np.inf)
        i = int(np.argmin(vals))
        if vals[i] < best[0]:
            best = (float(vals[i]), np.nonzero(amask[i])[0].tolist(), np.nonzero(bmask[i])[0].tolist())
    return best


def alpha_cap_theta(chain: MarkovChain, n_max: int = N_MAX_PAIRS):
    """``inf θ(cap/m(A), cap/m(B))`` over disjoint nonempty pairs; ``(value, A, B)``."""
    m = chain.m
    best = (math.inf, None, None)
    for amask, bmask, caps in _pairs_by_interior(chain, n_max):
        vals = log_mean_array(caps / (amask @ m), caps / (bmask @ m))
        i = int(np.argmin(vals))
        if vals[i] < best[0]:
            best = (float(vals[i]), np.nonzero(amask[i])[0].tolist(), np.nonzero(bmask[i])[0].tolist())
    return best


def brute_force_pairs(chain: MarkovChain):
    """Every disjoint nonempty ``(A, B)`` with its capacity, one solve each (test oracle)."""
    n = chain.n
    for labels in iproduct((0, 1, 2), repeat=n):
        A = [v for v in range(n) if labels[v] == 1]
        B = [v for v in range(n) if labels[v] == 2]
        if A and B:
            yield A, B, capacity(chain, A, B).value
