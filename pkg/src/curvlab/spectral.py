"""Spectrum of the Laplacian, Dirichlet eigenvalues and the log-spectral constant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .chain import MarkovChain, _vec, laplacian, subset_mask

TOL_EIG = 1e-11
N_MAX_ENUM = 16


def jacobi_eigh(A: np.ndarray, tol: float = TOL_EIG, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Returns ``(eigenvalues ascending, eigenvectors as columns)``.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("jacobi_eigh needs a square symmetric matrix")
    V = np.eye(n)
    scale = max(np.abs(A).max(initial=0.0), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= tol * 1e-3 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q]
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :]
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def symmetrized(chain: MarkovChain) -> np.ndarray:
    """``M^{1/2} (-Δ) M^{-1/2}``, symmetric because the chain is reversible."""
    r = np.sqrt(chain.m)
    S = chain.energy_matrix / np.outer(r, r)
    return 0.5 * (S + S.T)


@dataclass
class SpectralSummary:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lam: float
    dirichlet_cache: dict = field(default_factory=dict)

    def eigenfunction(self, k: int, chain: MarkovChain) -> np.ndarray:
        """``k``-th eigenfunction of ``-Δ``, normalized in ``L²(m)``."""
        return self.eigenvectors[:, k] / np.sqrt(chain.m)


def spectrum(chain: MarkovChain) -> SpectralSummary:
    w, V = jacobi_eigh(symmetrized(chain))
    w[np.abs(w) < TOL_EIG * max(1.0, abs(w[-1]))] = 0.0
    if w[0] < -TOL_EIG * max(1.0, abs(w[-1])):
        raise RuntimeError("negative eigenvalue; the generator is not a Laplacian")
    pos = w[w > 0]
    return SpectralSummary(w, V, float(pos[0]) if pos.size else 0.0)


def spectral_gap(chain: MarkovChain) -> float:
    return spectrum(chain).lam


def _dirichlet_block(chain: MarkovChain, idx):
    S = symmetrized(chain)
    return S[np.ix_(idx, idx)]


def dirichlet_eigenvalue(chain: MarkovChain, W, summary: SpectralSummary | None = None) -> float:
    """Principal eigenvalue of ``-Δ`` with zero boundary values off ``W``."""
    mask = subset_mask(chain, W)
    k = int(mask.sum())
    if k == 0 or k == chain.n:
        raise ValueError("W must be nonempty and proper")
    key = tuple(np.nonzero(mask)[0])
    if summary is not None and key in summary.dirichlet_cache:
        return summary.dirichlet_cache[key]
    w, _ = jacobi_eigh(_dirichlet_block(chain, list(key)))
    value = float(w[0])
    if summary is not None:
        summary.dirichlet_cache[key] = value
    return value


def dirichlet_eigenfunction(chain: MarkovChain, W):
    """``(λ_W, f)`` with ``f ≥ 0`` supported on ``W``."""
    mask = subset_mask(chain, W)
    idx = np.nonzero(mask)[0]
    if idx.size in (0, chain.n):
        raise ValueError("W must be nonempty and proper")
    w, V = jacobi_eigh(_dirichlet_block(chain, idx))
    f = np.zeros(chain.n)
    f[idx] = V[:, 0] / np.sqrt(chain.m[idx])
    if f.sum() < 0:
        f = -f
    return float(w[0]), np.maximum(f, 0.0)


def log_mean(s: float, t: float) -> float:
    if s <= 0 or t <= 0:
        raise ValueError("logarithmic mean needs positive arguments")
    if abs(s / t - 1.0) < 1e-6:
        d = math.log(s / t)
        return 0.5 * (s + t) * (1.0 - d * d / 24.0)
    return (s - t) / (math.log(s) - math.log(t))


def log_mean_array(s, t) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise ValueError("logarithmic mean needs positive arguments")
    d = np.log(s) - np.log(t)
    close = np.abs(s / t - 1.0) < 1e-6
    safe = np.where(close, 1.0, d)
    return np.where(close, 0.5 * (s + t) * (1.0 - d * d / 24.0), (s - t) / safe)


def dirichlet_table(chain: MarkovChain, n_max: int = N_MAX_ENUM) -> np.ndarray:
    """``λ_W`` for every bitmask ``W`` (entries 0 and ``2^n-1`` are NaN).

    Blocks of equal size are solved in one batched LAPACK call.
    """
    n = chain.n
    if n > n_max:
        raise ValueError(f"exhaustive enumeration limited to n <= {n_max} (got {n})")
    S = symmetrized(chain)
    out = np.full(1 << n, np.nan)
    weights = 1 << np.arange(n)
    for k in range(1, n):
        idx = np.array(list(combinations(range(n), k)))
        blocks = S[idx[:, :, None], idx[:, None, :]]
        out[(weights[idx]).sum(axis=1)] = np.linalg.eigvalsh(blocks)[:, 0]
    return out


def alpha_spectral(chain: MarkovChain, n_max: int = N_MAX_ENUM):
    """Exhaustive ``min_X θ(λ_X, λ_{X^c})``; returns ``(value, X as index list)``."""
    n = chain.n
    lam = dirichlet_table(chain, n_max)
    full = (1 << n) - 1
    # X always contains vertex 0, so each unordered split is seen once
    masks = np.arange(1, full, 2)
    vals = log_mean_array(lam[masks], lam[full ^ masks])
    i = int(np.argmin(vals))
    mask = int(masks[i])
    return float(vals[i]), [v for v in range(n) if mask >> v & 1]


def supersolution_bound(chain: MarkovChain, W, f) -> float:
    """Largest ``λ`` with ``Δf ≤ -λ f`` on ``W`` (``-inf`` if none exists)."""
    mask = subset_mask(chain, W)
    f = _vec(chain, f)
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    if not np.any(f[mask] > 0):
        raise ValueError("f vanishes on W")
    lf = laplacian(chain, f)
    pos = mask & (f > 0)
    zero = mask & (f <= 0)
    scale = max(1.0, float(np.abs(chain.rates).max()) * float(f.max()))
    if np.any(lf[zero] > 1e-12 * scale):
        return -math.inf
    return float(np.min(-lf[pos] / f[pos])) + 0.0
