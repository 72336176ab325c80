"""Fixture families and chain transforms."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .chain import ChainError, MarkovChain, chain_to_spec


def path(n: int, rate: float = 1.0) -> MarkovChain:
    if n < 2:
        raise ValueError("path needs n >= 2")
    P = np.zeros((n, n))
    i = np.arange(n - 1)
    P[i, i + 1] = P[i + 1, i] = rate
    return MarkovChain.from_kernel(P, m=np.ones(n))


def cycle(n: int, rate: float = 0.5) -> MarkovChain:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    P = np.zeros((n, n))
    i = np.arange(n)
    P[i, (i + 1) % n] = P[(i + 1) % n, i] = rate
    return MarkovChain.from_kernel(P, m=np.ones(n))


def complete(n: int, rate: float = 1.0) -> MarkovChain:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    P = np.full((n, n), float(rate))
    np.fill_diagonal(P, 0.0)
    return MarkovChain.from_kernel(P, m=np.ones(n))


def hypercube(d: int, rate: float | None = None) -> MarkovChain:
    """``{0,1}^d`` with rate ``1/d`` (default) along each coordinate flip."""
    if d < 1:
        raise ValueError("hypercube needs d >= 1")
    rate = 1.0 / d if rate is None else rate
    n = 2 ** d
    P = np.zeros((n, n))
    for x in range(n):
        for k in range(d):
            P[x, x ^ (1 << k)] = rate
    labels = [format(x, f"0{d}b") for x in range(n)]
    return MarkovChain.from_kernel(P, m=np.ones(n), labels=labels)


def birth_death(up: Sequence[float], down: Sequence[float], lazy: bool = False) -> MarkovChain:
    """Birth-death chain on ``0..n-1`` with ``P(i,i+1) = up[i]`` and
    ``P(i+1,i) = down[i]`` (both sequences have length ``n-1``).

    With ``lazy=True`` the rates are probabilities and the diagonal is
    filled to make rows sum to one; this requires ``up + down <= 1/2``.
    """
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    if up.shape != down.shape or up.ndim != 1 or up.size < 1:
        raise ValueError("up and down must be equal-length sequences")
    if np.any(up <= 0) or np.any(down <= 0):
        raise ValueError("birth-death rates must be positive")
    n = up.size + 1
    P = np.zeros((n, n))
    i = np.arange(n - 1)
    P[i, i + 1] = up
    P[i + 1, i] = down
    if lazy:
        out = P.sum(axis=1)
        if np.any(out > 0.5 + 1e-12):
            raise ValueError("lazy birth-death needs total jump probability <= 1/2")
        np.fill_diagonal(P, 1.0 - out)
    return MarkovChain.from_kernel(P)


def birth_death_rates(chain: MarkovChain):
    """Per-vertex ``(b, d)`` jump rates of a birth-death chain (``b[-1] = d[0] = 0``)."""
    n = chain.n
    b = np.zeros(n)
    d = np.zeros(n)
    b[:-1] = np.diag(chain.P, 1)
    d[1:] = np.diag(chain.P, -1)
    return b, d


def is_birth_death(chain: MarkovChain) -> bool:
    """Edges join exactly the consecutive vertices ``i, i+1``."""
    idx = np.arange(chain.n)
    return bool(np.array_equal(chain.adjacency, np.abs(idx[:, None] - idx[None, :]) == 1))


def is_monotone_birth_death(chain: MarkovChain, tol: float = 0.0) -> bool:
    """Birth rates nonincreasing and death rates nondecreasing."""
    b, d = birth_death_rates(chain)
    return bool(np.all(np.diff(b) <= tol) and np.all(np.diff(d) >= -tol))


def random_birth_death(n: int, rng: np.random.Generator, monotone: bool = True,
                       lazy: bool = True, low: float = 0.02, high: float = 0.25) -> MarkovChain:
    b = rng.uniform(low, high, n - 1)
    d = rng.uniform(low, high, n - 1)
    if monotone:
        b = np.sort(b)[::-1]
        d = np.sort(d)
    return birth_death(b, d, lazy=lazy)


def product(a: MarkovChain, b: MarkovChain) -> MarkovChain:
    """Cartesian product; jump rates add, measures multiply."""
    na, nb = a.n, b.n
    P = np.kron(a.rates, np.eye(nb)) + np.kron(np.eye(na), b.rates)
    lens = np.kron(a.edge_len, np.eye(nb)) + np.kron(np.eye(na), b.edge_len)
    labels = [f"({u},{v})" for u in a.labels for v in b.labels]
    return MarkovChain.from_kernel(P, m=np.kron(a.m, b.m), edge_len=lens, labels=labels)


def lazify(chain: MarkovChain, mode: str = "normalize") -> MarkovChain:
    """Turn a rate chain into a lazy probability kernel.

    ``normalize``: ``1/2 I + 1/2 P/Deg(x)`` with the measure reweighted by
    ``Deg``.  ``uniform``: ``I + Δ/(2 Deg_max)``, a pure time change that
    keeps the measure and all rate ratios.
    """
    rates = chain.rates
    if mode == "normalize":
        deg = chain.deg
        P = 0.5 * rates / deg[:, None]
        m = chain.m * deg
    elif mode == "uniform":
        P = rates / (2.0 * chain.deg.max())
        m = chain.m
    else:
        raise ValueError(f"unknown lazify mode {mode!r}")
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return MarkovChain.from_kernel(P, m=m, edge_len=chain.edge_len, labels=chain.labels)


def counterexample(eps: float) -> MarkovChain:
    """Three-vertex birth-death chain with ``w(1,2)=10, w(2,3)=1`` and raw
    measure ``(1/eps, 1, 1/20)``; ``P = w/m``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    w = np.array([[0.0, 10.0, 0.0], [10.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    m_raw = np.array([1.0 / eps, 1.0, 1.0 / 20.0])
    P = w / m_raw[:, None]
    return MarkovChain.from_kernel(P, m=m_raw, labels=["1", "2", "3"])


def counterexample_combinatorial(n: int) -> MarkovChain:
    """Unit-rate graph: ``K_{2n} x K_{2n}`` plus ``K_n``, with every ``(1,i)``
    joined to every vertex of ``K_n``."""
    if n < 1:
        raise ValueError("n must be positive")
    k = 2 * n
    grid = list(itertools.product(range(k), range(k)))
    N = len(grid) + n
    A = np.zeros((N, N))
    for a, (i, j) in enumerate(grid):
        for b, (i2, j2) in enumerate(grid):
            if (i == i2) != (j == j2):
                A[a, b] = 1.0
    tail = range(len(grid), N)
    for s in tail:
        for t in tail:
            if s != t:
                A[s, t] = 1.0
    for a, (i, j) in enumerate(grid):
        if i == 0:
            for s in tail:
                A[a, s] = A[s, a] = 1.0
    labels = [f"({i + 1},{j + 1})" for i, j in grid] + [f"k{s + 1}" for s in range(n)]
    return MarkovChain.from_kernel(A, m=np.ones(N), labels=labels)


def erdos_renyi(n: int, p: float, rng: np.random.Generator, max_tries: int = 1000) -> MarkovChain:
    """Connected G(n, p) sample with unit rates (rejection sampling)."""
    for _ in range(max_tries):
        upper = np.triu(rng.random((n, n)) < p, 1)
        A = (upper | upper.T).astype(float)
        try:
            return MarkovChain.from_kernel(A, m=np.ones(n))
        except ChainError:
            continue
    raise ValueError(f"no connected G({n}, {p}) sample in {max_tries} tries")


def two_point(p_ab: float = 1.0, p_ba: float = 1.0, lazy: bool = False) -> MarkovChain:
    P = np.array([[0.0, p_ab], [p_ba, 0.0]])
    if lazy:
        np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return MarkovChain.from_kernel(P, labels=["a", "b"])


# ----------------------------------------------------------------------
# spec documents

FAMILIES = {
    "path": lambda rng, n, rate=1.0: path(int(n), float(rate)),
    "cycle": lambda rng, n, rate=0.5: cycle(int(n), float(rate)),
    "complete": lambda rng, n, rate=1.0: complete(int(n), float(rate)),
    "hypercube": lambda rng, d, rate=None: hypercube(int(d), None if rate is None else float(rate)),
    "birth_death": lambda rng, up=None, down=None, n=None, monotone=True, lazy=True:
        birth_death(_floats(up), _floats(down), lazy=_bool(lazy)) if up is not None
        else random_birth_death(int(n), rng, monotone=_bool(monotone), lazy=_bool(lazy)),
    "counterexample": lambda rng, eps: counterexample(float(eps)),
    "counterexample_combinatorial": lambda rng, n: counterexample_combinatorial(int(n)),
    "erdos_renyi": lambda rng, n, p: erdos_renyi(int(n), float(p), rng),
    "two_point": lambda rng, p_ab=1.0, p_ba=1.0, lazy=False:
        two_point(float(p_ab), float(p_ba), _bool(lazy)),
}


def _floats(v):
    if isinstance(v, str):
        return [float(s) for s in v.split(",")]
    return [float(s) for s in v]


def _bool(v):
    if isinstance(v, str):
        return v.lower() in ("1", "true", "yes")
    return bool(v)


def make_chain(family: str, params: dict | None = None, seed: int = 0) -> MarkovChain:
    """Instantiate a family; ``lazify`` and ``product`` take nested specs."""
    from .chain import build_chain
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if family == "lazify":
        base = params.pop("base")
        inner = build_chain(base) if "vertices" in base else make_chain(
            base["family"], base.get("params"), base.get("seed", seed))
        return lazify(inner, params.pop("mode", "normalize"))
    if family == "product":
        parts = [make_chain(p["family"], p.get("params"), p.get("seed", seed))
                 for p in params.pop("factors")]
        out = parts[0]
        for other in parts[1:]:
            out = product(out, other)
        return out
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    try:
        return FAMILIES[family](rng, **params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {family}: {exc}") from None


def generate(family: str, params: dict | None = None, seed: int = 0) -> dict:
    """Graph description document for a family, with provenance attached."""
    chain = make_chain(family, params, seed)
    spec = chain_to_spec(chain)
    spec["provenance"] = {"family": family, "params": params or {}, "seed": seed}
    return spec
