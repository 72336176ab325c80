"""Finite reversible metric Markov chains.

A chain is stored densely: ``P[x, y]`` is the jump rate from ``x`` to ``y``
(the diagonal holds holding mass and is ignored by the Laplacian), ``m`` is
the reversible probability measure and ``D`` the all-pairs path metric
generated by the edge lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import shortest_path


@dataclass(frozen=True)
class Tolerances:
    rev: float = 1e-10
    sum: float = 1e-10
    lip: float = 1e-9
    exp: float = 1e-12


DEFAULT_TOL = Tolerances()


class ChainError(ValueError):
    """Raised when a graph description does not define a valid chain."""


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Immutable reversible metric Markov chain.

    Use :func:`build_chain`, :meth:`from_kernel` or :meth:`from_weights`
    rather than calling the constructor directly; those validate the input.
    """

    P: np.ndarray
    m: np.ndarray
    edge_len: np.ndarray
    labels: tuple = ()
    tol: Tolerances = field(default=DEFAULT_TOL)

    def __post_init__(self):
        for name in ("P", "m", "edge_len"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n)))

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def from_kernel(cls, P, m=None, edge_len=None, labels=None, tol=DEFAULT_TOL):
        """Build from a rate matrix; ``m`` is solved from detailed balance if absent."""
        P = np.array(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ChainError("P must be a square matrix")
        n = P.shape[0]
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise ChainError("rates must be finite and nonnegative")
        off = P.copy()
        np.fill_diagonal(off, 0.0)
        support = off > 0
        if np.any(support != support.T):
            raise ChainError("asymmetric support: P(x,y)>0 must imply P(y,x)>0")
        if m is None:
            m = _detailed_balance_measure(off)
        m = np.array(m, dtype=float)
        if m.shape != (n,):
            raise ChainError("measure has wrong length")
        if np.any(~np.isfinite(m)) or np.any(m <= 0):
            raise ChainError("measure must be strictly positive")
        if abs(m.sum() - 1.0) > 8 * n * np.finfo(float).eps:
            # leave already-normalized input untouched so documents round-trip exactly
            m = m / m.sum()
        if edge_len is None:
            edge_len = np.where(support, 1.0, 0.0)
        else:
            edge_len = np.array(edge_len, dtype=float)
            if edge_len.shape != (n, n):
                raise ChainError("edge_len must be n x n")
            if np.any(edge_len[support] <= 0) or not np.allclose(edge_len, edge_len.T):
                raise ChainError("edge lengths must be positive and symmetric")
            edge_len = np.where(support, edge_len, 0.0)
        flux = m[:, None] * off
        gap = np.abs(flux - flux.T)
        scale = np.maximum(flux, flux.T)
        if np.any(gap > tol.rev * scale):
            x, y = np.unravel_index(np.argmax(gap - tol.rev * scale), gap.shape)
            raise ChainError(f"reversibility violated at ({x},{y}): "
                             f"{flux[x, y]!r} vs {flux[y, x]!r}")
        chain = cls(P=P, m=m, edge_len=edge_len,
                    labels=tuple(labels) if labels is not None else (), tol=tol)
        if not np.all(np.isfinite(chain.D)):
            raise ChainError("graph is disconnected")
        return chain

    @classmethod
    def from_weights(cls, w, m=None, edge_len=None, labels=None, tol=DEFAULT_TOL):
        """Build from symmetric edge weights ``w(x,y) = m(x) P(x,y)``.

        ``m`` may be unnormalized; it defaults to the weighted degree.
        """
        w = np.array(w, dtype=float)
        if np.any(w < 0):
            raise ChainError("weights must be nonnegative")
        off = w.copy()
        np.fill_diagonal(off, 0.0)
        if np.any((off > 0) != (off.T > 0)):
            raise ChainError("asymmetric support: w(x,y)>0 must imply w(y,x)>0")
        if not np.allclose(off, off.T, rtol=tol.rev, atol=0.0):
            raise ChainError("weights must be symmetric")
        if m is None:
            m = off.sum(axis=1)
        m = np.array(m, dtype=float)
        if np.any(m <= 0):
            raise ChainError("measure must be strictly positive")
        P = off / m[:, None]
        return cls.from_kernel(P, m=m, edge_len=edge_len, labels=labels, tol=tol)

    # ------------------------------------------------------------------
    # derived structure

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @cached_property
    def rates(self) -> np.ndarray:
        """Off-diagonal part of ``P``."""
        off = self.P.copy()
        np.fill_diagonal(off, 0.0)
        off.setflags(write=False)
        return off

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = self.rates > 0
        adj.setflags(write=False)
        return adj

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(np.triu(self.adjacency))
        return list(zip(xs.tolist(), ys.tolist()))

    @cached_property
    def deg(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    @cached_property
    def generator(self) -> np.ndarray:
        """Matrix of the Laplacian: ``(L f)(x) = sum_y P(x,y)(f(y)-f(x))``."""
        L = self.rates - np.diag(self.deg)
        L.setflags(write=False)
        return L

    @cached_property
    def energy_matrix(self) -> np.ndarray:
        """Symmetric PSD matrix ``W`` with ``E(f,g) = g @ W @ f``."""
        W = -self.m[:, None] * self.generator
        W = 0.5 * (W + W.T)
        W.setflags(write=False)
        return W

    @cached_property
    def D(self) -> np.ndarray:
        lengths = np.where(self.adjacency, self.edge_len, 0.0)
        D = shortest_path(lengths, method="D", directed=False)
        # path sums can differ by an ulp between directions
        D = np.minimum(D, D.T)
        D.setflags(write=False)
        return D

    @property
    def is_lazy(self) -> bool:
        rows = self.P.sum(axis=1)
        return bool(np.all(np.abs(rows - 1.0) <= 1e-12)
                    and np.all(np.diag(self.P) >= 0.5 - 1e-12))

    def __repr__(self):
        return f"MarkovChain(n={self.n}, edges={len(self.edges)})"


def _detailed_balance_measure(off: np.ndarray) -> np.ndarray:
    """Propagate ``m(y) = m(x) P(x,y) / P(y,x)`` along a BFS tree."""
    n = off.shape[0]
    m = np.full(n, np.nan)
    m[0] = 1.0
    queue = [0]
    while queue:
        x = queue.pop(0)
        for y in np.nonzero(off[x])[0]:
            if np.isnan(m[y]):
                m[y] = m[x] * off[x, y] / off[y, x]
                queue.append(int(y))
    if np.any(np.isnan(m)):
        raise ChainError("graph is disconnected")
    return m


# ----------------------------------------------------------------------
# graph description documents


def build_chain(spec: dict, tol: Tolerances = DEFAULT_TOL) -> MarkovChain:
    """Build a chain from a graph description document.

    The document has ``mode`` ("kernel" or "weights"), ``vertices`` (labels),
    ``edges`` (a list of ``{"u", "v", "w"}`` or ``{"u", "v", "p_uv", "p_vu"}``
    with optional ``"len"``), and optional ``measure`` and ``holding``
    (per-vertex diagonal mass of ``P``).
    """
    try:
        return _build_chain(spec, tol)
    except ChainError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ChainError(f"malformed graph description: {type(exc).__name__}: {exc}") from None


def _build_chain(spec, tol):
    mode = spec.get("mode", "weights")
    labels = [str(v) for v in spec["vertices"]]
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise ChainError("duplicate vertex labels")
    n = len(labels)
    M = np.zeros((n, n))
    lens = np.zeros((n, n))
    for e in spec.get("edges", []):
        try:
            u, v = index[str(e["u"])], index[str(e["v"])]
        except KeyError as exc:
            raise ChainError(f"unknown vertex {exc}") from None
        if u == v:
            raise ChainError("self-loops go in 'holding', not 'edges'")
        if mode == "weights":
            w = float(e["w"])
            if w <= 0:
                raise ChainError("nonpositive weight")
            M[u, v] += w
            M[v, u] += w
        elif mode == "kernel":
            M[u, v] += float(e.get("p_uv", 0.0))
            M[v, u] += float(e.get("p_vu", 0.0))
        else:
            raise ChainError(f"unknown mode {mode!r}")
        lens[u, v] = lens[v, u] = float(e.get("len", 1.0))
    measure = spec.get("measure")
    if mode == "weights":
        chain = MarkovChain.from_weights(M, m=measure, edge_len=lens, labels=labels, tol=tol)
    else:
        chain = MarkovChain.from_kernel(M, m=measure, edge_len=lens, labels=labels, tol=tol)
    holding = spec.get("holding")
    if holding is not None:
        P = chain.P.copy()
        np.fill_diagonal(P, np.asarray(holding, dtype=float))
        chain = MarkovChain(P=P, m=chain.m, edge_len=chain.edge_len,
                            labels=chain.labels, tol=tol)
    return chain


def chain_to_spec(chain: MarkovChain) -> dict:
    """Inverse of :func:`build_chain` in kernel mode (exact float round trip)."""
    edges = []
    for x, y in chain.edges:
        e = {"u": chain.labels[x], "v": chain.labels[y],
             "p_uv": float(chain.P[x, y]), "p_vu": float(chain.P[y, x])}
        if chain.edge_len[x, y] != 1.0:
            e["len"] = float(chain.edge_len[x, y])
        edges.append(e)
    spec = {"mode": "kernel", "vertices": list(chain.labels), "edges": edges,
            "measure": [float(v) for v in chain.m]}
    diag = np.diag(chain.P)
    if np.any(diag != 0):
        spec["holding"] = [float(v) for v in diag]
    return spec


# ----------------------------------------------------------------------
# operations


def _vec(chain: MarkovChain, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.n,):
        raise ValueError(f"expected a vertex function of length {chain.n}")
    if not np.all(np.isfinite(f)):
        raise ValueError("vertex function has non-finite entries")
    return f


def laplacian(chain: MarkovChain, f) -> np.ndarray:
    return chain.generator @ _vec(chain, f)


def dirichlet_form(chain: MarkovChain, f, g=None) -> float:
    """``E(f, g) = -<Δf, g>_m``; ``g`` defaults to ``f``."""
    f = _vec(chain, f)
    g = f if g is None else _vec(chain, g)
    return float(-np.sum(chain.m * g * (chain.generator @ f)))


def inner(chain: MarkovChain, f, g) -> float:
    return float(np.sum(chain.m * np.asarray(f) * np.asarray(g)))


def gradients(chain: MarkovChain, f):
    """Return ``(Lip, grad_abs, grad_minus)`` of ``f``.

    ``grad_abs(x) = max_{y~x} |f(y)-f(x)|/d(x,y)`` and
    ``grad_minus(x) = max_{y~x} (f(y)-f(x))_- / d(x,y)``.
    """
    f = _vec(chain, f)
    adj = chain.adjacency
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(adj, (f[None, :] - f[:, None]) / np.where(adj, chain.D, 1.0), 0.0)
    grad_abs = np.abs(slope).max(axis=1)
    grad_minus = np.maximum(-slope, 0.0).max(axis=1)
    return float(grad_abs.max(initial=0.0)), grad_abs, grad_minus


def lipschitz_constant(chain: MarkovChain, f) -> float:
    return gradients(chain, f)[0]


def is_lipschitz(chain: MarkovChain, f, tol: float | None = None) -> bool:
    tol = chain.tol.lip if tol is None else tol
    return lipschitz_constant(chain, f) <= 1.0 + tol


def heat_operator(chain: MarkovChain, t: float) -> np.ndarray:
    """Dense matrix of ``P_t = exp(t Δ)``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return np.eye(chain.n)
    return expm(t * chain.generator)


def heat_apply(chain: MarkovChain, f, t: float) -> np.ndarray:
    return heat_operator(chain, t) @ _vec(chain, f)


def chain_constants(chain: MarkovChain):
    """Return ``(P0, Deg_max, diam)``; ``P0`` is taken over edges only."""
    adj = chain.adjacency
    P0 = float(np.min((chain.rates * chain.D ** 2)[adj]))
    return P0, float(chain.deg.max()), float(chain.D.max())


def subset_mask(chain: MarkovChain, W: Sequence | np.ndarray) -> np.ndarray:
    """Boolean membership vector from labels, indices or a mask."""
    W = np.asarray(W) if not isinstance(W, (set, frozenset)) else np.asarray(sorted(W, key=str))
    if W.dtype == bool:
        if W.shape != (chain.n,):
            raise ValueError("mask has wrong length")
        return W.copy()
    mask = np.zeros(chain.n, dtype=bool)
    index = {lab: i for i, lab in enumerate(chain.labels)}
    for w in W.tolist():
        if isinstance(w, str):
            if w not in index:
                raise ValueError(f"unknown vertex label {w!r}")
            mask[index[w]] = True
        else:
            if not 0 <= int(w) < chain.n:
                raise ValueError(f"vertex index {w} out of range")
            mask[int(w)] = True
    return mask


def mass(chain: MarkovChain, W) -> float:
    return float(chain.m[subset_mask(chain, W)].sum())
