"""Entropy, log-Sobolev and modified log-Sobolev constants, mixing time.

Both optimizers work on a log-parameterization ``u``: the log-Sobolev
search uses ``f = exp(u/2)`` (so ``f^2 = exp(u)``), the modified one
``f = exp(u)``.  All ratios are scale invariant, so ``u`` is shifted to
``max u = 0`` before evaluation and no normalization constraint is needed.
Reported values are the smallest ratio actually realized by a witness and
therefore upper bounds on the true infimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .chain import MarkovChain, _vec, heat_operator, laplacian
from .generators import counterexample
from .spectral import spectrum

GRID_POINTS = 10 ** 6


@dataclass
class OptConfig:
    restarts: int = 64
    max_iters: int = 500
    tol: float = 1e-10
    seed: int = 0
    grid: bool = True


@dataclass
class OptResult:
    """Outcome of one constant search.

    ``value`` is the reported upper bound; ``witness`` realizes
    ``witness_ratio`` (equal to ``value`` unless ``limit`` is set, in which
    case the witness is a small perturbation of the constant function and
    its ratio approaches ``value``).  ``el_residual`` is filled in by
    :func:`alpha_mod` for interior minimizers.
    """
    value: float
    witness: np.ndarray
    witness_ratio: float
    limit: bool
    converged: bool
    restarts_used: int
    grid_value: float | None = None
    el_residual: float | None = None


# ----------------------------------------------------------------------
# building blocks


_PHI_COEF = np.array([(k - 1) / math.factorial(k) for k in range(2, 14)])


def _phi(l: np.ndarray) -> np.ndarray:
    """``e^l (l - 1) + 1``, i.e. ``a log a - a + 1`` at ``a = e^l``, accurate near ``l = 0``."""
    l = np.asarray(l, dtype=float)
    small = np.abs(l) < 0.05
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(np.isneginf(l), 1.0, np.exp(l) * (l - 1.0) + 1.0)
    if small.any():
        # Σ_{k>=2} (k-1) l^k / k!, Horner form, 12 terms
        ls = l[small]
        acc = np.full_like(ls, _PHI_COEF[-1])
        for c in _PHI_COEF[-2::-1]:
            acc = acc * ls + c
        out[small] = acc * ls * ls
    return out


def _expm1_minus_id(v: np.ndarray) -> np.ndarray:
    """``e^v - 1 - v`` without cancellation for small ``v``."""
    small = np.abs(v) < 1e-2
    vs = np.where(small, v, 0.0)
    series = vs * vs * (0.5 + vs * (1 / 6 + vs * (1 / 24 + vs * (1 / 120 + vs / 720))))
    return np.where(small, series, np.expm1(np.where(small, 0.0, v)) - v)


def _log_density(m: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``l = log(a / N)`` for ``a = e^u`` and ``N = Σ m a``, accurate when ``u`` is nearly constant."""
    # subtracting one entry first is exact for nearly equal floats
    v = u - u[0]
    v = v - m @ v
    top = v.max()
    if top < 30.0:
        logZ = math.log1p(float(m @ _expm1_minus_id(v)))
    else:
        logZ = top + math.log(float(m @ np.exp(v - top)))
    return v - logZ


def _diff_exp(u: np.ndarray, i, j, scale: float = 1.0):
    """``e^{s u_i} - e^{s u_j}`` (rows ``i``, ``j``), stable for close values."""
    du = scale * (u[i] - u[j])
    near = np.abs(du) < 30.0
    with np.errstate(over="ignore"):
        a = np.exp(scale * u[j]) * np.expm1(np.where(near, du, 0.0))
        b = np.exp(scale * u[i]) - np.exp(scale * u[j])
    return np.where(near, a, b)


def entropy(chain: MarkovChain, f) -> float:
    """``Σ m g log g`` for ``g = f / ||f||_{1,m}``."""
    f = _vec(chain, f)
    if np.any(f <= 0):
        raise ValueError("entropy needs a positive function")
    return float(chain.m @ _phi(_log_density(chain.m, np.log(f))))


def _pair_weights(chain: MarkovChain):
    """Edges ``i < j`` with conductances ``m(i) P(i,j)``, cached on the chain."""
    cached = chain.__dict__.get("_pair_weights")
    if cached is None:
        iu, ju = np.triu_indices(chain.n, 1)
        w = chain.energy_matrix
        keep = w[iu, ju] < 0
        cached = (iu[keep], ju[keep], -w[iu, ju][keep])
        chain.__dict__["_pair_weights"] = cached
    return cached


def logsob_ratio(chain: MarkovChain, f) -> float:
    """``E(f,f) / Ent(f^2)`` with the entropy taken in unnormalized form."""
    f = np.abs(_vec(chain, f))
    if np.all(f > 0):
        return _lsi_value(chain, 2.0 * np.log(f))[0]
    return float(_batch_lsi(chain, f[None, :])[0])


def modlogsob_ratio(chain: MarkovChain, f) -> float:
    """``E(f, log f) / Ent(f)``."""
    f = _vec(chain, f)
    if np.any(f <= 0):
        raise ValueError("modified log-Sobolev ratio needs a positive function")
    return _mod_value(chain, np.log(f))[0]


def _scatter(n, i, j, vals):
    out = np.zeros(n)
    np.add.at(out, i, vals)
    np.add.at(out, j, -vals)
    return out


def _lsi_value(chain, u, with_grad=False):
    m = chain.m
    l = _log_density(m, u)
    i, j, w = _pair_weights(chain)
    diff = _diff_exp(l, i, j, 0.5)
    E = float(w @ diff ** 2)
    S = float(m @ _phi(l))
    if S <= 0:
        return math.inf, None
    R = E / S
    if not with_grad:
        return R, None
    f = np.exp(0.5 * l)
    dE = _scatter(chain.n, i, j, w * diff) * f
    dS = m * np.exp(l) * l
    return R, (dE - R * dS) / S


def _mod_value(chain, u, with_grad=False):
    m = chain.m
    l = _log_density(m, u)
    i, j, w = _pair_weights(chain)
    du = u[i] - u[j]
    df = _diff_exp(l, i, j)
    E = float(w @ (df * du))
    S = float(m @ _phi(l))
    if S <= 0:
        return math.inf, None
    R = E / S
    if not with_grad:
        return R, None
    f = np.exp(l)
    dE = _scatter(chain.n, i, j, w * df) + f * _scatter(chain.n, i, j, w * du)
    dS = m * f * l
    return R, (dE - R * dS) / S


# ----------------------------------------------------------------------
# grids for n <= 3


def _grid_points(n: int, positive_only: bool, k: int = GRID_POINTS):
    """Points on the positive orthant of the unit sphere (or simplex)."""
    if n == 2:
        t = (np.arange(k) + 0.5) / k * (np.pi / 2)
        if not positive_only:
            t = np.arange(k + 1) / k * (np.pi / 2)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if n == 3:
        s = int(round(math.sqrt(k)))
        off = 0.5 if positive_only else 0.0
        t = (np.arange(s) + off) / (s - 1 + 2 * off) * (np.pi / 2)
        p = (np.arange(s) + off) / (s - 1 + 2 * off) * (np.pi / 2)
        T, Q = np.meshgrid(t, p, indexing="ij")
        pts = np.stack([np.cos(T) * np.cos(Q), np.cos(T) * np.sin(Q), np.sin(T)], axis=-1)
        return pts.reshape(-1, 3)
    raise ValueError("grids are only used for n <= 3")


def _spread_ok(F):
    # rows that are constant up to rounding are covered by the limit family instead
    top = np.abs(F).max(axis=1)
    return (top - np.abs(F).min(axis=1)) > 1e-7 * top


def _batch_lsi(chain, F):
    i, j, w = _pair_weights(chain)
    m = chain.m
    A = F * F
    A = A / (A @ m)[:, None]
    E = ((F[:, i] - F[:, j]) ** 2) @ w / (F * F @ m)
    with np.errstate(divide="ignore"):
        S = _phi(np.log(A)) @ m
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where((S > 0) & _spread_ok(F), E / S, np.inf)


def _batch_mod(chain, F):
    i, j, w = _pair_weights(chain)
    m = chain.m
    F = F / (F @ m)[:, None]
    L = np.log(F)
    E = ((F[:, i] - F[:, j]) * (L[:, i] - L[:, j])) @ w
    S = _phi(L) @ m
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where((S > 0) & _spread_ok(F), E / S, np.inf)


def grid_minimum(chain: MarkovChain, kind: str, k: int = GRID_POINTS):
    """Best grid ratio and its point for ``kind`` in ``{"lsi", "mod"}``."""
    if kind == "lsi":
        F = _grid_points(chain.n, positive_only=False, k=k)
        vals = _batch_lsi(chain, F)
    else:
        F = _grid_points(chain.n, positive_only=True, k=k)
        vals = _batch_mod(chain, F)
    i = int(np.argmin(vals))
    return float(vals[i]), F[i]


# ----------------------------------------------------------------------
# multi-start search


def _starts(chain, rng, count, eigvecs):
    n = chain.n
    out = []
    scales = (0.5, 2.0, 6.0)
    k = 0
    while len(out) < count:
        if k < 2 * 3 * (n - 1) and n > 1:
            j = 1 + (k // 6) % (n - 1)
            s = scales[(k // 2) % 3] * (1 if k % 2 == 0 else -1)
            g = eigvecs[:, j] / np.abs(eigvecs[:, j]).max()
            out.append(s * g + 0.05 * rng.standard_normal(n))
        else:
            out.append(rng.standard_normal(n) * (0.3, 1.0, 3.0, 10.0)[k % 4])
        k += 1
    return out


def _search(chain, value_fn, cfg, u_extra=()):
    summary = spectrum(chain)
    eig = summary.eigenvectors / np.sqrt(chain.m)[:, None]
    rng = np.random.default_rng(cfg.seed)
    best_R, best_u, best_ok = math.inf, None, False
    fun = lambda u: value_fn(chain, u, True)
    starts = list(u_extra) + _starts(chain, rng, cfg.restarts, eig)
    for u0 in starts:
        res = minimize(fun, u0, jac=True, method="L-BFGS-B",
                       options={"maxiter": cfg.max_iters, "gtol": cfg.tol, "ftol": 1e-15})
        R = value_fn(chain, res.x)[0]
        if R < best_R:
            best_R, best_u = R, res.x
            g = value_fn(chain, res.x, True)[1]
            best_ok = bool(g is not None and np.abs(g).max() <= max(cfg.tol, 1e-6) * max(1.0, R))
    return summary, best_R, best_u, best_ok, len(starts)


def _limit_witness(summary, chain, eps=1e-6):
    g = summary.eigenfunction(1, chain) if summary.eigenvalues.size > 1 else np.zeros(chain.n)
    g = g / np.abs(g).max()
    return 1.0 + eps * g


def _finish(chain, summary, R, u, ok, used, limit_value, ratio_fn, to_f, grid_value):
    if limit_value <= R:
        w = _limit_witness(summary, chain)
        return OptResult(limit_value, w, ratio_fn(chain, w), True, True, used, grid_value)
    f = to_f(u - u.max())
    return OptResult(R, f, R, False, ok, used, grid_value)


def alpha_logsob(chain: MarkovChain, cfg: OptConfig | None = None) -> OptResult:
    """Log-Sobolev constant ``inf E(f)/Ent(f^2)``; witness normalized in ``L²(m)``."""
    cfg = cfg or OptConfig()
    extra, grid_value = [], None
    if cfg.grid and chain.n <= 3:
        grid_value, pt = grid_minimum(chain, "lsi")
        if np.all(pt > 0):
            extra.append(2.0 * np.log(pt))
    summary, R, u, ok, used = _search(chain, _lsi_value, cfg, extra)
    if grid_value is not None and grid_value < R:
        # optimum sits on the boundary f(x) = 0, where the log-parameterization cannot go
        R, ok = grid_value, True
        f = pt / np.sqrt(chain.m @ pt ** 2)
        if summary.lam / 2 > R:
            return OptResult(R, f, logsob_ratio(chain, f), False, ok, used, grid_value)
    res = _finish(chain, summary, R, u, ok, used, summary.lam / 2, logsob_ratio,
                  lambda v: np.exp(0.5 * v), grid_value)
    res.witness = res.witness / np.sqrt(chain.m @ res.witness ** 2)
    return res


def alpha_mod(chain: MarkovChain, cfg: OptConfig | None = None) -> OptResult:
    """Modified log-Sobolev constant ``inf E(f, log f)/Ent(f)``; witness has ``||f||_{1,m} = 1``."""
    cfg = cfg or OptConfig()
    extra, grid_value = [], None
    if cfg.grid and chain.n <= 3:
        grid_value, pt = grid_minimum(chain, "mod")
        extra.append(np.log(pt))
    summary, R, u, ok, used = _search(chain, _mod_value, cfg, extra)
    res = _finish(chain, summary, R, u, ok, used, 2 * summary.lam, modlogsob_ratio,
                  np.exp, grid_value)
    res.witness = res.witness / (chain.m @ res.witness)
    # interior minimizers solve the Euler-Lagrange equation; audit only where both
    # thresholds agree that the minimum is interior
    if not res.limit and res.value < min(summary.lam / 2, 2 * summary.lam):
        res.el_residual = el_residual(chain, res.witness, res.value)
    return res


def el_residual(chain: MarkovChain, f, alpha: float) -> float:
    """Max-norm of ``Δf/f + Δ log f + α log f`` after normalizing ``||f||_{1,m} = 1``."""
    f = _vec(chain, f)
    if np.any(f <= 0):
        raise ValueError("f must be positive")
    f = f / (chain.m @ f)
    lf = np.log(f)
    return float(np.abs(laplacian(chain, f) / f + laplacian(chain, lf) + alpha * lf).max())


# ----------------------------------------------------------------------
# mixing


def _mixing_distance(chain: MarkovChain, t: float) -> np.ndarray:
    """``||P_t u_x - 1||_{2,m}`` for every start ``x`` (``u_x = 1_x / m(x)``)."""
    H = heat_operator(chain, t)
    U = H / chain.m[None, :]
    return np.sqrt(chain.m @ (U - 1.0) ** 2)


def mixing_time(chain: MarkovChain, tol: float = 1e-9):
    """Returns ``(tau, worst starting vertex)``."""
    target = math.exp(-1.0)
    hi = 1.0 / max(chain.deg.max(), 1e-300)
    while _mixing_distance(chain, hi).max() > target:
        hi *= 2.0
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _mixing_distance(chain, mid).max() > target:
            lo = mid
        else:
            hi = mid
    return hi, int(np.argmax(_mixing_distance(chain, lo)))


# ----------------------------------------------------------------------
# three-point counterexample


def counterexample_chain(eps: float) -> MarkovChain:
    return counterexample(eps)


def counterexample_ratio(eps: float) -> float:
    """``E(f, log f)/Ent(f)`` for ``f = (eps, 1, -log eps)`` on the three-point chain."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    chain = counterexample(eps)
    lf = np.array([math.log(eps), 0.0, math.log(-math.log(eps))])
    return _mod_value(chain, lf)[0]


@dataclass
class FunctionalConstants:
    alpha: OptResult
    alpha_mod: OptResult
    tau: float
    tau_vertex: int
    lam: float
    extras: dict = field(default_factory=dict)

    @property
    def restarts_used(self) -> int:
        return self.alpha.restarts_used + self.alpha_mod.restarts_used

    @property
    def converged(self) -> bool:
        return self.alpha.converged and self.alpha_mod.converged


def functional_constants(chain: MarkovChain, cfg: OptConfig | None = None) -> FunctionalConstants:
    cfg = cfg or OptConfig()
    tau, x = mixing_time(chain)
    return FunctionalConstants(alpha_logsob(chain, cfg), alpha_mod(chain, cfg), tau, x,
                               spectrum(chain).lam)
