"""Ollivier Ricci curvature, l-infinity sectional curvature and the
gradient / contraction characterizations built on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from .chain import MarkovChain, gradients, heat_operator, lipschitz_constant, _vec
from .transport import (TransportPlan, bottleneck_feasible, w1,
                        winf_with_plan)

TOL_LP = 1e-9


class NotLazyError(ValueError):
    pass


@dataclass
class EdgeCurvature:
    edge: tuple[int, int]
    kappa: float
    witness: np.ndarray
    kappa_inf: float | None = None
    sectional_nonneg: bool | None = None
    plan: TransportPlan | None = None


def _require_edge(chain: MarkovChain, x: int, y: int):
    if x == y or not chain.adjacency[x, y]:
        raise ValueError(f"({x},{y}) is not an edge")


def _require_lazy(chain: MarkovChain):
    if not chain.is_lazy:
        raise NotLazyError("operation is defined for lazy probability kernels only")


def kappa_lp(chain: MarkovChain, x: int, y: int):
    """Ollivier curvature of edge ``x~y`` by the Lipschitz LP.

    Minimizes ``(Δf(x) - Δf(y)) / d(x,y)`` over 1-Lipschitz ``f`` with
    ``f(y) - f(x) = d(x,y)``.  Returns ``(kappa, f)``; ``kappa`` is recomputed
    from the witness, so it never undercuts what ``f`` certifies.
    """
    _require_edge(chain, x, y)
    n = chain.n
    dxy = chain.D[x, y]
    L = chain.generator
    c = (L[x] - L[y]) / dxy
    us, vs = np.nonzero(chain.adjacency)
    A = np.zeros((us.size, n))
    A[np.arange(us.size), vs] = 1.0
    A[np.arange(us.size), us] -= 1.0
    b = chain.D[us, vs]
    A_eq = np.zeros((2, n))
    A_eq[0, y], A_eq[0, x] = 1.0, -1.0
    A_eq[1, x] = 1.0
    res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[dxy, 0.0],
                  bounds=[(None, None)] * n, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"curvature LP failed: {res.message}")
    f = res.x
    value = float((L[x] @ f - L[y] @ f) / dxy)
    if abs(value - res.fun) > TOL_LP * max(1.0, abs(value)):
        raise RuntimeError("curvature LP witness does not reproduce the optimum")
    return value, f


def kappa(chain: MarkovChain, x: int, y: int) -> float:
    return kappa_lp(chain, x, y)[0]


def kappa_lazy_crosscheck(chain: MarkovChain, x: int, y: int) -> float:
    """``1 - W1(P(x,.), P(y,.)) / d(x,y)`` for lazy kernels."""
    _require_lazy(chain)
    _require_edge(chain, x, y)
    return 1.0 - w1(chain.D, chain.P[x], chain.P[y]) / chain.D[x, y]


def sectional_nonneg(chain: MarkovChain, x: int, y: int):
    """Can ``P(x,.)`` be moved onto ``P(y,.)`` shifting no mass beyond ``d(x,y)``?

    Returns ``(flag, plan)``; ``plan`` is ``None`` when infeasible.
    """
    _require_lazy(chain)
    _require_edge(chain, x, y)
    return bottleneck_feasible(chain.P[x], chain.P[y], chain.D, chain.D[x, y])


def kappa_inf(chain: MarkovChain, x: int, y: int) -> float:
    _require_lazy(chain)
    _require_edge(chain, x, y)
    dist, _ = winf_with_plan(chain.D, chain.P[x], chain.P[y])
    return 1.0 - dist / chain.D[x, y]


def curvature_table(chain: MarkovChain, sectional: bool | None = None) -> list[EdgeCurvature]:
    """Curvature of every edge; sectional data is added for lazy chains."""
    if sectional is None:
        sectional = chain.is_lazy
    out = []
    for x, y in chain.edges:
        k, f = kappa_lp(chain, x, y)
        ec = EdgeCurvature((x, y), k, f)
        if sectional:
            ec.kappa_inf = kappa_inf(chain, x, y)
            ec.sectional_nonneg, ec.plan = sectional_nonneg(chain, x, y)
        out.append(ec)
    return out


def min_kappa(chain: MarkovChain) -> float:
    return min(kappa(chain, x, y) for x, y in chain.edges)


# ----------------------------------------------------------------------
# semigroup characterizations


def lipschitz_contraction_margin(chain: MarkovChain, f, t: float, K: float) -> float:
    """``exp(-K t) Lip(f) - Lip(P_t f)``; nonnegative when ``K`` bounds the curvature."""
    f = _vec(chain, f)
    Pt = heat_operator(chain, t)
    return float(np.exp(-K * t) * lipschitz_constant(chain, f)
                 - lipschitz_constant(chain, Pt @ f))


Variant = Literal["log_inf", "pointwise", "sqrt"]


def gradient_commutation_margin(chain: MarkovChain, f, t: float,
                                variant: Variant = "pointwise") -> float:
    """Slack in one of the gradient estimates equivalent to nonnegative
    sectional curvature:

    * ``log_inf``:   ``|| grad log P_t f ||_inf <= || grad log f ||_inf``
    * ``pointwise``: ``|grad P_t f| <= P_t |grad f|``
    * ``sqrt``:      ``|grad sqrt(P_t f)| <= P_t |grad sqrt f|``

    Returns RHS - LHS (minimum over vertices for the pointwise variants).
    """
    _require_lazy(chain)
    f = _vec(chain, f)
    if variant in ("log_inf", "sqrt") and np.any(f <= 0):
        raise ValueError(f"variant {variant!r} needs a positive function")
    Pt = heat_operator(chain, t)
    grad = lambda g: gradients(chain, g)[1]
    if variant == "log_inf":
        return float(grad(np.log(f)).max() - grad(np.log(Pt @ f)).max())
    if variant == "pointwise":
        return float(np.min(Pt @ grad(f) - grad(Pt @ f)))
    if variant == "sqrt":
        return float(np.min(Pt @ grad(np.sqrt(f)) - grad(np.sqrt(Pt @ f))))
    raise ValueError(f"unknown variant {variant!r}")


def exp_ratio_margin(chain: MarkovChain, x: int, y: int, f, lam: float) -> float:
    """Slack in the exponential ratio conditions for edge ``x~y``.

    For 1-Lipschitz ``f`` with ``f(y) - f(x) = d(x,y)`` and ``lam >= 0``:
    ``Δe^{λf}/e^{λf}`` at ``x`` dominates its value at ``y``, and the reverse
    holds for ``e^{-λf}``.  Returns the smaller of the two slacks.
    """
    _require_lazy(chain)
    _require_edge(chain, x, y)
    f = _vec(chain, f)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lipschitz_constant(chain, f) > 1 + chain.tol.lip:
        raise ValueError("f is not 1-Lipschitz")
    if abs(f[y] - f[x] - chain.D[x, y]) > chain.tol.lip:
        raise ValueError("need f(y) - f(x) = d(x,y)")
    P = chain.rates

    def ratio(z, sign):
        # Δe^{g}/e^{g} at z, computed without overflow
        return float(P[z] @ (np.exp(sign * lam * (f - f[z])) - 1.0))

    plus = ratio(x, 1) - ratio(y, 1)
    minus = ratio(y, -1) - ratio(x, -1)
    return min(plus, minus)
