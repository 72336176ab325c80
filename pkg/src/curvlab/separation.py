"""Laplacian separation: a 1-Lipschitz function with constant Laplacian on a
cut set, built by fixed-point iteration, plus the concave reparameterization
that turns it into Dirichlet eigenvalue bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import (MarkovChain, _vec, chain_constants, gradients, heat_operator,
                    is_lipschitz, laplacian, subset_mask)
from .curvature import min_kappa
from .spectral import dirichlet_eigenvalue, log_mean, supersolution_bound


class NegativeCurvatureError(ValueError):
    pass


class SeparationNotConverged(RuntimeError):
    def __init__(self, msg, solution):
        super().__init__(msg)
        self.solution = solution


# ----------------------------------------------------------------------
# extensions


def lipschitz_extension(chain: MarkovChain, K, fK, direction: str = "min",
                        tol: float | None = None) -> np.ndarray:
    """McShane-type 1-Lipschitz extension of ``fK`` off ``K``.

    ``direction`` names the operator of the formula: ``min`` is
    ``min_k (f(k) + d(x,k))``, the largest extension; ``max`` is
    ``max_k (f(k) - d(x,k))``, the smallest.  ``largest`` and ``smallest``
    are accepted as unambiguous aliases.

    ``fK`` holds one value per vertex of ``K`` in increasing index order, or
    a full vertex function whose entries on ``K`` are used.
    """
    mask = subset_mask(chain, K)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise ValueError("K must be nonempty")
    fK = np.asarray(fK, dtype=float)
    if fK.shape == (chain.n,):
        fK = fK[idx]
    if fK.shape != (idx.size,):
        raise ValueError("fK must have one value per vertex of K")
    tol = chain.tol.lip if tol is None else tol
    DK = chain.D[np.ix_(idx, idx)]
    if np.any(np.abs(fK[:, None] - fK[None, :]) > DK + tol):
        raise ValueError("values on K are not 1-Lipschitz; no extension exists")
    DxK = chain.D[:, idx]
    if direction in ("max", "smallest"):
        f = (fK[None, :] - DxK).max(axis=1)
    elif direction in ("min", "largest"):
        f = (fK[None, :] + DxK).min(axis=1)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    f[idx] = fK
    return f


@dataclass(frozen=True)
class CutPartition:
    X: np.ndarray
    K: np.ndarray
    Y: np.ndarray

    @classmethod
    def of(cls, chain: MarkovChain, X=(), K=(), Y=()) -> "CutPartition":
        X, K, Y = (subset_mask(chain, list(s) if not isinstance(s, np.ndarray) else s)
                   for s in (X, K, Y))
        if np.any(X & K) or np.any(X & Y) or np.any(K & Y):
            raise ValueError("X, K, Y must be disjoint")
        if not np.all(X | K | Y):
            raise ValueError("X, K, Y must cover every vertex")
        if not K.any():
            raise ValueError("K must be nonempty")
        if chain.adjacency[np.ix_(X, Y)].any():
            raise ValueError("no edge may join X and Y")
        return cls(X, K, Y)

    @classmethod
    def from_split(cls, chain: MarkovChain, A) -> "CutPartition":
        """``K`` = vertices with a neighbour across the cut ``A | A^c``."""
        a = subset_mask(chain, A)
        if not a.any() or a.all():
            raise ValueError("A must be nonempty and proper")
        adj = chain.adjacency
        K = (a & adj[:, ~a].any(axis=1)) | (~a & adj[:, a].any(axis=1))
        return cls(a & ~K, K, ~a & ~K)


@dataclass
class SepConfig:
    step: str = "semigroup"
    eps: float | None = None
    tol: float = 1e-9
    max_iters: int = 200_000
    stall_window: int = 50
    max_halvings: int = 10
    polish_every: int = 200
    check_curvature: bool = True


@dataclass
class SeparationSolution:
    f: np.ndarray
    C: float
    residual: float
    iterations: int
    converged: bool
    checks: dict = field(default_factory=dict)


def _project(chain, part, f):
    """Keep ``f`` on ``K``, smallest extension on ``X``, largest on ``Y``."""
    idx = np.nonzero(part.K)[0]
    DxK = chain.D[:, idx]
    fK = f[idx]
    g = f.copy()
    if part.X.any():
        g[part.X] = (fK[None, :] - DxK[part.X]).max(axis=1)
    if part.Y.any():
        g[part.Y] = (fK[None, :] + DxK[part.Y]).min(axis=1)
    return g


def _residual(chain, part, f):
    lf = laplacian(chain, f)[part.K]
    return float(lf.max() - lf.min())


def _polish(chain, part, f, k0):
    """Solve for the exact fixed point with the current extension anchors frozen."""
    n = chain.n
    idx = np.nonzero(part.K)[0]
    pos = {int(k): i for i, k in enumerate(idx)}
    DxK = chain.D[:, idx]
    fK = f[idx]
    # f = E fK + c0
    E = np.zeros((n, idx.size))
    c0 = np.zeros(n)
    for i, k in enumerate(idx):
        E[k, i] = 1.0
    for x in np.nonzero(part.X)[0]:
        j = int(np.argmax(fK - DxK[x]))
        E[x, j], c0[x] = 1.0, -DxK[x, j]
    for y in np.nonzero(part.Y)[0]:
        j = int(np.argmin(fK + DxK[y]))
        E[y, j], c0[y] = 1.0, DxK[y, j]
    L = chain.generator[idx]
    # unknowns (fK, C): L (E fK + c0) - C = 0 on K, fK[k0] = 0
    M = np.zeros((idx.size + 1, idx.size + 1))
    M[:idx.size, :idx.size] = L @ E
    M[:idx.size, idx.size] = -1.0
    M[idx.size, pos[k0]] = 1.0
    rhs = np.zeros(idx.size + 1)
    rhs[:idx.size] = -L @ c0
    try:
        sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        return None
    g = E @ sol[:idx.size] + c0
    return _project(chain, part, g)


def _check_solution(chain, part, f, tol):
    lf = laplacian(chain, f)
    lk = lf[part.K]
    C = float(lk.mean())
    idx = np.nonzero(part.K)[0]
    checks = {
        "constant_on_K": float(lk.max() - lk.min()) <= tol,
        "lipschitz": is_lipschitz(chain, f),
        "minimal_on_X": bool(np.allclose(f[part.X], lipschitz_extension(chain, idx, f[idx], "smallest")[part.X],
                                         atol=chain.tol.lip, rtol=0)),
        "maximal_on_Y": bool(np.allclose(f[part.Y], lipschitz_extension(chain, idx, f[idx], "largest")[part.Y],
                                         atol=chain.tol.lip, rtol=0)),
        "above_C_on_X": bool(np.all(lf[part.X] >= C - tol)),
        "below_C_on_Y": bool(np.all(lf[part.Y] <= C + tol)),
    }
    return C, checks


def separation_solve(chain: MarkovChain, part: CutPartition, cfg: SepConfig | None = None,
                     f0=None) -> SeparationSolution:
    """Find ``f`` in Lip(1) with ``Δf = C`` on ``K`` that is the smallest
    extension of ``f|_K`` on ``X`` and the largest on ``Y``.

    Raises :class:`SeparationNotConverged` (carrying the best iterate) if the
    residual does not reach ``cfg.tol``.
    """
    cfg = cfg or SepConfig()
    if cfg.check_curvature:
        k = min_kappa(chain)
        if k < -1e-9:
            raise NegativeCurvatureError(f"minimum edge curvature {k:.6g} is negative")
    eps = cfg.eps if cfg.eps is not None else 0.5 / chain.deg.max()
    k0 = int(np.nonzero(part.K)[0][0])
    L = chain.generator
    if f0 is None:
        f = np.zeros(chain.n)
    else:
        f = _vec(chain, f0).copy()
    f = _project(chain, part, f - f[k0])

    def stepper(e):
        if cfg.step == "euler":
            A = np.eye(chain.n) + e * L
        elif cfg.step == "semigroup":
            A = heat_operator(chain, e)
        else:
            raise ValueError(f"unknown step {cfg.step!r}")
        return A

    A = stepper(eps)
    halvings = 0
    last_window = math.inf
    res = _residual(chain, part, f)
    lip_ok = True
    it = 0
    while it < cfg.max_iters:
        if res <= cfg.tol:
            break
        if cfg.polish_every and it % cfg.polish_every == 0 and it > 0:
            g = _polish(chain, part, f, k0)
            if g is not None and _residual(chain, part, g) <= cfg.tol and is_lipschitz(chain, g):
                f = g
                res = _residual(chain, part, f)
                break
        g = A @ f
        if lip_ok and cfg.step == "semigroup" and not is_lipschitz(chain, g):
            lip_ok = False
        g = _project(chain, part, g)
        f = g - g[k0]
        res = _residual(chain, part, f)
        it += 1
        if it % cfg.stall_window == 0:
            if res > 0.999 * last_window and halvings < cfg.max_halvings:
                eps *= 0.5
                A = stepper(eps)
                halvings += 1
            last_window = res
    if res > cfg.tol:
        g = _polish(chain, part, f, k0)
        if g is not None and _residual(chain, part, g) <= cfg.tol and is_lipschitz(chain, g):
            f = g
            res = _residual(chain, part, f)
    C, checks = _check_solution(chain, part, f, max(cfg.tol, 1e-9) * 10)
    if cfg.step == "semigroup":
        checks["lipschitz_every_sweep"] = lip_ok
    sol = SeparationSolution(f, C, res, it, res <= cfg.tol, checks)
    if not sol.converged:
        raise SeparationNotConverged(f"residual {res:.3e} after {it} sweeps", sol)
    return sol


# ----------------------------------------------------------------------
# concave reparameterization


def _exp_tail(a):
    """``e^{-a} - 1 + a`` without cancellation for small ``a``."""
    a = np.asarray(a, dtype=float)
    series = a * a * (0.5 - a * (1 / 6 - a * (1 / 24 - a * (1 / 120 - a / 720))))
    return np.where(np.abs(a) < 1e-2, series, np.expm1(-a) + a)


@dataclass(frozen=True)
class PhiProfile:
    """Increasing concave ``φ`` with ``φ(0) = 0``, ``φ' ≤ 1``; linear below 0
    and constant above ``R`` except in the identity case.

    ``d2`` uses the interior formula on the closed interval ``[0, R]``;
    ``d2(s, side="left")`` gives left limits, which is what the chain rule needs.
    """
    case: str
    C: float
    P0: float
    R: float

    @property
    def beta(self) -> float:
        return 2.0 * self.C / self.P0

    @property
    def target(self) -> float:
        """Value of ``Cφ' + (P0/2)φ''`` on ``[0, R]`` (an upper bound in the quadratic case)."""
        if self.case == "exp_positive":
            return -self.C / math.expm1(self.beta * self.R)
        if self.case == "quadratic":
            return -self.P0 / (2.0 * self.R)
        return self.C

    def _inner(self, s):
        b, R = self.beta, self.R
        if self.case == "exp_positive":
            den = -math.expm1(-b * R)
            a = b * s
            return ((-_exp_tail(a) + a * den) / (b * den),
                    (np.expm1(-a) + den) / den,
                    -b * np.exp(-b * s) / den,
                    b * b * np.exp(-b * s) / den)
        return ((2 * R * s - s * s) / (2 * R), (R - s) / R,
                np.full_like(s, -1.0 / R), np.zeros_like(s))

    def _eval(self, s, k, left=False):
        s = np.asarray(s, dtype=float)
        if self.case == "identity":
            return (s, np.ones_like(s), np.zeros_like(s), np.zeros_like(s))[k]
        inner = self._inner(np.clip(s, 0.0, self.R))[k]
        top = self._inner(np.array(self.R))[0]
        if k == 0:
            return np.where(s < 0, s, np.where(s > self.R, top, inner))
        if k == 1:
            return np.where(s < 0, 1.0, np.where(s > self.R, 0.0, inner))
        below = (s <= 0) if left else (s < 0)
        return np.where(below, 0.0, np.where(s > self.R, 0.0, inner))

    def phi(self, s):
        return self._eval(s, 0)

    def d1(self, s):
        return self._eval(s, 1)

    def d2(self, s, side: str = "closed"):
        return self._eval(s, 2, left=(side == "left"))

    def d3(self, s, side: str = "closed"):
        return self._eval(s, 3, left=(side == "left"))


def build_phi(C: float, P0: float, R: float) -> PhiProfile:
    if P0 <= 0 or R <= 0:
        raise ValueError("P0 and R must be positive")
    if C > 0:
        return PhiProfile("exp_positive", float(C), float(P0), float(R))
    if C >= -P0 / (2.0 * R):
        return PhiProfile("quadratic", float(C), float(P0), float(R))
    return PhiProfile("identity", float(C), float(P0), float(R))


def chain_rule_margin(chain: MarkovChain, u, W, phi: PhiProfile) -> float:
    """``min_W [φ'(u)Δu + (P0/2)φ''(u)(∇_-u)² - Δ(φ∘u)]``.

    Raises if some ``x`` in ``W`` has the junction at 0 strictly between its
    lowest neighbour value and ``u(x)``, where ``φ'''`` is not nonnegative.
    """
    u = _vec(chain, u)
    mask = subset_mask(chain, W)
    P0 = chain_constants(chain)[0]
    adj = chain.adjacency
    low = np.where(adj, u[None, :], np.inf).min(axis=1)
    if phi.case != "identity":
        bad = mask & (low < 0) & (u > 0)
        if bad.any():
            raise ValueError("chain rule hypothesis fails: a neighbourhood straddles the kink at 0")
    _, _, gm = gradients(chain, u)
    lhs = phi.d1(u) * laplacian(chain, u) + 0.5 * P0 * phi.d2(u, side="left") * gm ** 2
    return float(np.min((lhs - laplacian(chain, phi.phi(u)))[mask]))


# ----------------------------------------------------------------------
# Dirichlet bounds


@dataclass
class DirichletBounds:
    bound_X: float | None
    bound_Y: float | None
    lambda_X: float | None
    lambda_Y: float | None
    super_X: float | None
    super_Y: float | None
    C: float
    P0: float
    diam: float
    solution: SeparationSolution

    @property
    def theta(self) -> float | None:
        if self.bound_X is None or self.bound_Y is None:
            return None
        return log_mean(self.bound_X, self.bound_Y)

    @property
    def theta_target(self) -> float:
        return self.P0 / (16.0 * self.diam ** 2)


def _side_bound(C, P0, R):
    """``(1/R) (C/2) / (e^{βR} - 1)`` with its ``C -> 0`` limit ``P0/(4R²)``."""
    beta_R = 2.0 * C / P0 * R
    if abs(beta_R) < 1e-12:
        return P0 / (4.0 * R * R)
    return (C / 2.0) / math.expm1(beta_R) / R


def _supersolution(chain, g, C, P0, R, W):
    """``φ∘u`` for ``u = g`` shifted into ``[diam, 2 diam]``; returns its supersolution rate on ``W``."""
    phi = build_phi(C, P0, R)
    F = phi.phi(g)
    return supersolution_bound(chain, W, np.maximum(F, 0.0))


def dirichlet_from_separation(chain: MarkovChain, part: CutPartition,
                              cfg: SepConfig | None = None) -> DirichletBounds:
    """Lower bounds on ``λ_X`` and ``λ_Y`` from a separation solution.

    On ``Y`` the solution is the largest extension, so it has a steepest
    descent direction everywhere and ``Δf ≤ C``; reparameterizing with
    ``build_phi(C, P0, 2 diam)`` gives a positive supersolution.  ``X`` is
    handled the same way with ``-f`` and ``-C``.
    """
    sol = separation_solve(chain, part, cfg)
    P0, _, diam = chain_constants(chain)
    R = 2.0 * diam
    f, C = sol.f, sol.C
    out = dict(bound_X=None, bound_Y=None, lambda_X=None, lambda_Y=None, super_X=None, super_Y=None)
    if part.Y.any():
        u = f - f.min() + diam
        out["bound_Y"] = _side_bound(C, P0, R)
        out["lambda_Y"] = dirichlet_eigenvalue(chain, part.Y)
        out["super_Y"] = _supersolution(chain, u, C, P0, R, part.Y)
    if part.X.any():
        u = -f - (-f).min() + diam
        out["bound_X"] = _side_bound(-C, P0, R)
        out["lambda_X"] = dirichlet_eigenvalue(chain, part.X)
        out["super_X"] = _supersolution(chain, u, -C, P0, R, part.X)
    return DirichletBounds(C=C, P0=P0, diam=diam, solution=sol, **out)
