"""Lowest eigenpair of a SparseHamiltonian.

``lanczos_ground`` is the production path.  ``dense_ground_oracle`` is an
independent in-repo Householder + implicit QL eigensolver used only as a
test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import SparseHamiltonian, matvec

DEFAULT_TOL = 1e-9
DENSE_LIMIT = 2000


@dataclass
class GroundStateResult:
    energy: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _krylov_dim(dim: int, requested: int | None) -> int:
    if requested is not None:
        return max(2, min(requested, dim))
    # keep the stored Krylov block under ~200 MB
    return max(2, min(dim, 160, int(2.5e7 // max(dim, 1))))


def _start_vector(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = 1e-2 * rng.standard_normal(dim) / math.sqrt(dim)
    v[0] += 1.0
    return v / np.linalg.norm(v)


def lanczos_ground(
    h: SparseHamiltonian,
    tol: float = DEFAULT_TOL,
    max_iter: int = 5000,
    seed: int = 0,
    krylov_dim: int | None = None,
    v0: np.ndarray | None = None,
) -> GroundStateResult:
    """Restarted Lanczos with full reorthogonalization.

    Each cycle builds an orthonormal Krylov block from the current best
    vector, reorthogonalizing every new vector twice against the whole
    block, and restarts from the lowest Ritz vector.  Convergence is judged
    on the explicit residual ||H psi - E psi||, never on the recurrence
    estimate alone.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    dim = h.dim
    if dim == 1:
        psi = np.ones(1)
        return GroundStateResult(float(h.diag[0]), psi, 0.0, 1, True)

    m = _krylov_dim(dim, krylov_dim)
    x = _start_vector(dim, seed) if v0 is None else np.asarray(v0, dtype=float) / np.linalg.norm(v0)
    V = np.empty((m + 1, dim))
    used = 0
    energy, residual = math.nan, math.inf

    while used < max_iter:
        V[0] = x
        alpha = np.zeros(m)
        beta = np.zeros(m)
        steps = 0
        for j in range(m):
            w = matvec(h, V[j])
            used += 1
            alpha[j] = V[j] @ w
            w -= alpha[j] * V[j]
            if j:
                w -= beta[j - 1] * V[j - 1]
            for _ in range(2):
                w -= V[: j + 1].T @ (V[: j + 1] @ w)
            beta[j] = np.linalg.norm(w)
            steps = j + 1
            if beta[j] < 1e-14 * max(1.0, abs(alpha[j])):
                break  # invariant subspace
            V[j + 1] = w / beta[j]
            if steps % 10 == 0 or used >= max_iter:
                theta, y = _lowest_ritz(alpha[:steps], beta[: steps - 1])
                if abs(beta[j] * y[-1]) < 0.1 * tol or used >= max_iter:
                    break
        theta, y = _lowest_ritz(alpha[:steps], beta[: steps - 1])
        x = V[:steps].T @ y
        x /= np.linalg.norm(x)
        hx = matvec(h, x)
        used += 1
        energy = float(x @ hx)
        residual = float(np.linalg.norm(hx - energy * x))
        if residual <= tol:
            return GroundStateResult(energy, x, residual, used, True)
        if steps == dim:
            # Krylov space already spans everything: rounding floor reached
            break
    return GroundStateResult(energy, x, residual, used, residual <= tol)


def _lowest_ritz(alpha: np.ndarray, beta: np.ndarray):
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    vals, vecs = np.linalg.eigh(T)
    return vals[0], vecs[:, 0]


def tridiagonalize(A: np.ndarray):
    """Householder reduction of a symmetric matrix; returns (diagonal, offdiagonal)."""
    A = np.array(A, dtype=float)
    n = len(A)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            continue
        # A <- H A H with H = 1 - 2 v v^T / |v|^2, applied to the trailing block
        sub = A[k + 1 :, k + 1 :]
        p = sub @ v * (2.0 / vnorm2)
        K = (v @ p) / vnorm2
        q = p - K * v
        sub -= np.outer(v, q) + np.outer(q, v)
        A[k + 1 :, k] = 0.0
        A[k, k + 1 :] = 0.0
        A[k + 1, k] = A[k, k + 1] = alpha
    d = np.diag(A).copy()
    e = np.diag(A, 1).copy()
    return d, e


def tridiagonal_eigenvalues(d: np.ndarray, e: np.ndarray, max_sweeps: int = 60) -> np.ndarray:
    """Implicit-shift QL on a symmetric tridiagonal matrix (eigenvalues only)."""
    d = np.array(d, dtype=float)
    n = len(d)
    e = np.append(np.array(e, dtype=float), 0.0)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 1e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                raise RuntimeError("QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(d)


def dense_eigenvalues(A: np.ndarray) -> np.ndarray:
    d, e = tridiagonalize(A)
    return tridiagonal_eigenvalues(d, e)


def dense_ground_oracle(h: SparseHamiltonian | np.ndarray) -> float:
    A = h.to_dense() if isinstance(h, SparseHamiltonian) else np.asarray(h, dtype=float)
    if len(A) > DENSE_LIMIT:
        raise ValueError(f"dense oracle refuses dimension {len(A)} > {DENSE_LIMIT}")
    return float(dense_eigenvalues(A)[0])
