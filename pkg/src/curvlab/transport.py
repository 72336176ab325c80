"""Discrete optimal transport between vertex measures.

``w1`` is an exact min-cost flow (successive shortest augmenting paths),
``winf`` a bottleneck search over realized distances with max-flow
feasibility.  Both work on the supports of the two measures only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

TOL_FLOW = 1e-11


@dataclass
class TransportPlan:
    plan: np.ndarray
    source: np.ndarray
    target: np.ndarray

    def check(self, tol: float = TOL_FLOW) -> bool:
        scale = max(1.0, float(self.source.sum()))
        return bool(np.all(self.plan >= -tol * scale)
                    and np.allclose(self.plan.sum(axis=1), self.source, atol=tol * scale * 10)
                    and np.allclose(self.plan.sum(axis=0), self.target, atol=tol * scale * 10))

    def cost(self, D: np.ndarray) -> float:
        return float(np.sum(self.plan * D))

    def max_shift(self, D: np.ndarray, tol: float = TOL_FLOW) -> float:
        used = self.plan > tol * max(1.0, float(self.source.sum()))
        return float(D[used].max(initial=0.0))


def _check_measures(mu, nu, tol):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise ValueError("measures live on different vertex sets")
    if np.any(mu < 0) or np.any(nu < 0):
        raise ValueError("measures must be nonnegative")
    total = mu.sum()
    if abs(total - nu.sum()) > tol * max(1.0, total):
        raise ValueError(f"unequal masses {total!r} and {nu.sum()!r}")
    return mu, nu


def min_cost_transport(mu, nu, D, tol: float = TOL_FLOW):
    """Optimal plan for cost matrix ``D`` by successive shortest paths.

    Returns ``(cost, TransportPlan)``.  Optimality is certified at the end by
    checking the residual network for negative cycles.
    """
    mu, nu = _check_measures(mu, nu, tol)
    n = mu.size
    total = mu.sum()
    eps = tol * max(1.0, total)
    src = np.nonzero(mu > eps)[0]
    dst = np.nonzero(nu > eps)[0]
    plan = np.zeros((n, n))
    if src.size == 0:
        return 0.0, TransportPlan(plan, mu, nu)
    a, b = len(src), len(dst)
    C = D[np.ix_(src, dst)]
    supply = mu[src].copy()
    demand = nu[dst].copy()
    # rescale tiny remainders so the masses agree exactly
    demand *= supply.sum() / demand.sum()
    flow = np.zeros((a, b))
    # node ids: 0..a-1 sources, a..a+b-1 sinks
    pot = np.zeros(a + b)
    pot[a:] = C.min(axis=0)
    while supply.max() > eps:
        dist, prev = _dijkstra(C, flow, pot, supply, eps)
        reach = [j for j in range(b) if demand[j] > eps and np.isfinite(dist[a + j])]
        if not reach:
            raise RuntimeError("no augmenting path; masses inconsistent")
        j = min(reach, key=lambda k: dist[a + k])
        # capping at the target distance keeps all reduced costs nonnegative
        pot += np.minimum(dist, dist[a + j])
        # trace path back to a source with remaining supply
        path = []
        node = a + j
        while prev[node] != -1:
            path.append((prev[node], node))
            node = prev[node]
        start = node
        amount = min(supply[start], demand[j])
        for u, v in path:
            if u >= a:  # backward along an existing flow arc
                amount = min(amount, flow[v, u - a])
        for u, v in path:
            if u < a:
                flow[u, v - a] += amount
            else:
                flow[v, u - a] -= amount
        supply[start] -= amount
        demand[j] -= amount
    flow[flow < 0] = 0.0
    plan[np.ix_(src, dst)] = flow
    _certify_optimal(C, flow, eps)
    return float(np.sum(flow * C)), TransportPlan(plan, mu, nu)


def _dijkstra(C, flow, pot, supply, eps):
    a, b = C.shape
    N = a + b
    dist = np.full(N, np.inf)
    prev = np.full(N, -1)
    done = np.zeros(N, dtype=bool)
    dist[:a][supply > eps] = 0.0
    for _ in range(N):
        cand = np.where(done, np.inf, dist)
        u = int(np.argmin(cand))
        if not np.isfinite(cand[u]):
            break
        done[u] = True
        if u < a:
            red = C[u] + pot[u] - pot[a:]
            nd = dist[u] + np.maximum(red, 0.0)
            better = (nd < dist[a:]) & ~done[a:]
            dist[a:][better] = nd[better]
            prev[a:][better] = u
        else:
            j = u - a
            back = flow[:, j] > eps
            red = -C[:, j] + pot[u] - pot[:a]
            nd = dist[u] + np.maximum(red, 0.0)
            better = back & (nd < dist[:a]) & ~done[:a]
            dist[:a][better] = nd[better]
            prev[:a][better] = u
    return dist, prev


def _certify_optimal(C, flow, eps):
    """Bellman-Ford on the residual network; raises if a negative cycle exists."""
    a, b = C.shape
    N = a + b
    arcs = [(i, a + j, C[i, j]) for i in range(a) for j in range(b)]
    arcs += [(a + j, i, -C[i, j]) for i in range(a) for j in range(b) if flow[i, j] > eps]
    d = np.zeros(N)
    scale = max(1.0, float(np.abs(C).max(initial=0.0)))
    for _ in range(N):
        changed = False
        for u, v, c in arcs:
            if d[u] + c < d[v] - 1e-9 * scale:
                d[v] = d[u] + c
                changed = True
        if not changed:
            return
    raise RuntimeError("transport plan failed the optimality certificate")


def w1(chain_or_D, mu, nu, tol: float = TOL_FLOW) -> float:
    """1-Wasserstein distance for the chain's path metric (or a given matrix)."""
    D = getattr(chain_or_D, "D", chain_or_D)
    return min_cost_transport(mu, nu, D, tol)[0]


def _max_flow_feasible(mu, nu, allowed, eps):
    """Edmonds-Karp on the bipartite network; returns (flow value, plan)."""
    a, b = allowed.shape
    flow = np.zeros((a, b))
    out = np.zeros(a)   # flow leaving source i
    inn = np.zeros(b)   # flow entering sink j
    while True:
        # BFS from super-source over residual graph
        prev = {}
        queue = deque()
        for i in range(a):
            if mu[i] - out[i] > eps:
                prev[("s", i)] = None
                queue.append(("s", i))
        found = None
        while queue and found is None:
            node = queue.popleft()
            side, k = node
            if side == "s":
                for j in np.nonzero(allowed[k])[0]:
                    nxt = ("t", int(j))
                    if nxt not in prev:
                        prev[nxt] = node
                        if nu[j] - inn[j] > eps:
                            found = nxt
                            break
                        queue.append(nxt)
            else:
                for i in np.nonzero(flow[:, k] > eps)[0]:
                    nxt = ("s", int(i))
                    if nxt not in prev:
                        prev[nxt] = node
                        queue.append(nxt)
        if found is None:
            break
        path = []
        node = found
        while prev[node] is not None:
            path.append((prev[node], node))
            node = prev[node]
        start = node[1]
        amount = min(mu[start] - out[start], nu[found[1]] - inn[found[1]])
        for u, v in path:
            if u[0] == "t":
                amount = min(amount, flow[v[1], u[1]])
        for u, v in path:
            if u[0] == "s":
                flow[u[1], v[1]] += amount
            else:
                flow[v[1], u[1]] -= amount
        out[start] += amount
        inn[found[1]] += amount
    return float(out.sum()), flow


def bottleneck_feasible(mu, nu, D, r: float, tol: float = TOL_FLOW):
    """Is there a plan moving every unit of mass by at most ``r``?

    Returns ``(flag, TransportPlan or None)``.
    """
    mu, nu = _check_measures(mu, nu, tol)
    n = mu.size
    total = mu.sum()
    eps = tol * max(1.0, total)
    src = np.nonzero(mu > eps)[0]
    dst = np.nonzero(nu > eps)[0]
    if src.size == 0:
        return True, TransportPlan(np.zeros((n, n)), mu, nu)
    allowed = D[np.ix_(src, dst)] <= r + 1e-12 * max(1.0, r)
    value, flow = _max_flow_feasible(mu[src], nu[dst], allowed, eps)
    if value < total - 10 * eps * max(1, src.size):
        return False, None
    plan = np.zeros((n, n))
    plan[np.ix_(src, dst)] = np.maximum(flow, 0.0)
    return True, TransportPlan(plan, mu, nu)


def winf(chain_or_D, mu, nu, tol: float = TOL_FLOW) -> float:
    """Bottleneck (infinity-) Wasserstein distance."""
    return winf_with_plan(chain_or_D, mu, nu, tol)[0]


def winf_with_plan(chain_or_D, mu, nu, tol: float = TOL_FLOW):
    D = getattr(chain_or_D, "D", chain_or_D)
    mu, nu = _check_measures(mu, nu, tol)
    eps = tol * max(1.0, mu.sum())
    src = np.nonzero(mu > eps)[0]
    dst = np.nonzero(nu > eps)[0]
    if src.size == 0:
        return 0.0, TransportPlan(np.zeros((mu.size, mu.size)), mu, nu)
    thresholds = np.unique(D[np.ix_(src, dst)])
    lo, hi = 0, len(thresholds) - 1
    ok, best = bottleneck_feasible(mu, nu, D, thresholds[hi], tol)
    if not ok:
        raise RuntimeError("no plan at the largest threshold")
    while lo < hi:
        mid = (lo + hi) // 2
        ok, plan = bottleneck_feasible(mu, nu, D, thresholds[mid], tol)
        if ok:
            hi, best = mid, plan
        else:
            lo = mid + 1
    return float(thresholds[hi]), best
