"""Boundary measure, Cheeger-type constants, observable diameter and
concentration, all by exhaustive subset enumeration.

Subsets are encoded as bitmasks (bit ``v`` set iff vertex ``v`` is a member).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chain import MarkovChain, dirichlet_form, subset_mask

N_MAX_ENUM = 16
TOL_MASS = 1e-12


def _proper(chain, W):
    mask = subset_mask(chain, W)
    if not mask.any() or mask.all():
        raise ValueError("W must be nonempty and proper")
    return mask


def boundary_measure(chain: MarkovChain, W) -> float:
    """``Σ_{x∈W, y∉W} m(x) P(x,y) d(x,y)``."""
    mask = _proper(chain, W)
    flux = chain.m[:, None] * chain.rates * chain.D
    return float(flux[np.ix_(mask, ~mask)].sum())


def set_distance(chain: MarkovChain, B) -> np.ndarray:
    """``d(x, B)`` for every vertex."""
    mask = subset_mask(chain, B)
    if not mask.any():
        raise ValueError("B must be nonempty")
    return chain.D[:, mask].min(axis=1)


def boundary_measure_energy(chain: MarkovChain, W) -> float:
    """``-E(1_W, d(W,.))``; agrees with :func:`boundary_measure` when every
    edge length equals the distance it realizes to ``W``."""
    mask = _proper(chain, W)
    return -dirichlet_form(chain, mask.astype(float), set_distance(chain, mask))


def closure(chain: MarkovChain, B) -> np.ndarray:
    """``B`` together with all of its neighbours (boolean mask)."""
    mask = subset_mask(chain, B)
    return mask | chain.adjacency[mask].any(axis=0)


def subset_diameter(chain: MarkovChain, W) -> float:
    """Diameter of ``W`` in the ambient metric."""
    mask = subset_mask(chain, W)
    return float(chain.D[np.ix_(mask, mask)].max(initial=0.0))


def mask_to_indices(bits: int, n: int) -> list[int]:
    return [v for v in range(n) if bits >> v & 1]


class SubsetTable:
    """Per-subset data for every bitmask of a chain with ``n <= n_max`` vertices."""

    def __init__(self, chain: MarkovChain, n_max: int = N_MAX_ENUM):
        if chain.n > n_max:
            raise ValueError(f"subset enumeration limited to n <= {n_max} (got {chain.n})")
        self.chain = chain
        n = chain.n
        self.bits = np.arange(1 << n)
        self.Z = ((self.bits[:, None] >> np.arange(n)) & 1).astype(bool)
        self.mass = self.Z @ chain.m

    @cached_property
    def boundary(self) -> np.ndarray:
        c = self.chain
        flux = c.m[:, None] * c.rates * c.D
        Zf = self.Z.astype(float)
        return np.einsum("si,ij,sj->s", Zf, flux, 1.0 - Zf)

    @cached_property
    def dist(self) -> np.ndarray:
        """``d(x, B)`` per row ``B`` (row 0, the empty set, is ``inf``)."""
        n = self.chain.n
        out = np.full((1 << n, n), np.inf)
        for b in range(1, 1 << n):
            low = (b & -b).bit_length() - 1
            out[b] = np.minimum(out[b & (b - 1)], self.chain.D[low])
        return out

    @cached_property
    def closure_mass(self) -> np.ndarray:
        reach = self.Z | (self.Z.astype(int) @ self.chain.adjacency.astype(int) > 0)
        return reach @ self.chain.m

    @cached_property
    def _far_sets(self):
        # per row B: distances sorted descending and the mass of {d(., B) >= t}
        d = self.dist[1:]
        order = np.argsort(-d, axis=1, kind="stable")
        ds = np.take_along_axis(d, order, axis=1)
        ms = np.cumsum(self.chain.m[order], axis=1)
        # make masses refer to the whole level set {d >= t}, ties included
        for k in range(ds.shape[1] - 2, -1, -1):
            tie = ds[:, k] == ds[:, k + 1]
            ms[tie, k] = ms[tie, k + 1]
        return ds, ms


@dataclass
class CheegerResult:
    value: float
    witness: list[int]
    boundary: float
    mass: float


_WEIGHTS = {
    "plain": lambda v: v,
    "log": lambda v: -v * np.log(v),
    "sqrtlog": lambda v: v * np.sqrt(np.log(1.0 / v)),
}


def cheeger(chain: MarkovChain, weight: str = "plain", table: SubsetTable | None = None) -> CheegerResult:
    """Minimum of ``|∂W| / weight(m(W))`` over ``0 < m(W) <= 1/2``."""
    if weight not in _WEIGHTS:
        raise ValueError(f"unknown weight {weight!r}")
    t = table or SubsetTable(chain)
    ok = (t.mass > 0) & (t.mass <= 0.5 + TOL_MASS)
    mass = np.where(ok, t.mass, 0.25)
    denom = _WEIGHTS[weight](mass)
    with np.errstate(divide="ignore"):
        vals = np.where(ok & (denom > 0), t.boundary / np.where(denom > 0, denom, 1.0), np.inf)
    i = int(np.argmin(vals))
    return CheegerResult(float(vals[i]), mask_to_indices(i, chain.n), float(t.boundary[i]),
                         float(t.mass[i]))


@dataclass
class ObsDiameter:
    value: float
    A: list[int]
    B: list[int]
    exact: bool


def obs_diameter(chain: MarkovChain, eps: float, mode: str = "exact",
                 table: SubsetTable | None = None) -> ObsDiameter:
    """``sup d(A,B)`` over ``m(A) >= eps`` and ``m(cl B) >= eps``.

    ``heuristic`` only tries metric balls and their complements as ``B`` and
    returns a lower bound.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    n = chain.n
    if mode == "exact":
        t = table or SubsetTable(chain)
        ds, ms = t._far_sets
        valid = (t.closure_mass[1:, None] >= eps - TOL_MASS) & (ms >= eps - TOL_MASS)
        score = np.where(valid, ds, -np.inf)
        flat = int(np.argmax(score))
        row, col = divmod(flat, n)
        b = row + 1
        value = float(ds[row, col])
        A = np.nonzero(t.dist[b] >= value)[0].tolist()
        return ObsDiameter(value, A, mask_to_indices(b, n), True)
    if mode == "heuristic":
        best = ObsDiameter(0.0, list(range(n)), [0], False)
        D = chain.D
        radii = np.unique(D)
        for x in range(n):
            for r in radii:
                ball = D[x] <= r
                for B in (ball, ~ball):
                    if not B.any() or chain.m[closure(chain, B)].sum() < eps - TOL_MASS:
                        continue
                    d = D[:, B].min(axis=1)
                    for s in np.unique(d)[::-1]:
                        A = d >= s
                        if chain.m[A].sum() >= eps - TOL_MASS:
                            if s > best.value:
                                best = ObsDiameter(float(s), np.nonzero(A)[0].tolist(),
                                                   np.nonzero(B)[0].tolist(), False)
                            break
        return best
    raise ValueError(f"unknown mode {mode!r}")


def concentration_profile(chain: MarkovChain, table: SubsetTable | None = None) -> dict:
    """``r -> (worst far mass, witness A)`` for integer ``r`` from 0 to the diameter.

    The far mass of ``A`` is ``m{x : d(x,A) > r}``; ``A`` ranges over ``m(A) >= 1/2``.
    """
    t = table or SubsetTable(chain)
    rows = np.nonzero(t.mass >= 0.5 - TOL_MASS)[0]
    d = t.dist[rows]
    out = {}
    for r in range(int(math.ceil(chain.D.max())) + 1):
        far = (d > r + 1e-12) @ chain.m
        i = int(np.argmax(far))
        out[r] = (float(far[i]), mask_to_indices(int(rows[i]), chain.n))
    return out


def gaussian_rho(profile: dict) -> float:
    """``min_{r>=1, conc(r)>0} -log(conc(r))/r²``, or ``inf``."""
    vals = [-math.log(v[0] if isinstance(v, tuple) else v) / r ** 2
            for r, v in profile.items()
            if r >= 1 and (v[0] if isinstance(v, tuple) else v) > 0]
    return min(vals) if vals else math.inf


@dataclass
class IsoProfile:
    h: CheegerResult
    h_log: CheegerResult
    h_sqrtlog: CheegerResult
    diam_obs: dict = field(default_factory=dict)
    concentration: dict = field(default_factory=dict)
    rho: float = math.inf


def iso_profile(chain: MarkovChain, eps_values=(1 / 8,), n_max: int = N_MAX_ENUM) -> IsoProfile:
    t = SubsetTable(chain, n_max)
    conc = concentration_profile(chain, t)
    return IsoProfile(
        cheeger(chain, "plain", t), cheeger(chain, "log", t), cheeger(chain, "sqrtlog", t),
        {e: obs_diameter(chain, e, "exact", t) for e in eps_values},
        conc, gaussian_rho(conc))
