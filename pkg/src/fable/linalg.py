"""Kernel construction and low-rank Gaussian posterior solves.

The GP step of the label model needs, for every class/subtype pair, the
posterior covariance ``(Sigma^-1 + diag(omega))^-1`` together with its
action on a vector and its diagonal.  Inverting ``Sigma`` directly is
unstable and O(N^3), so everything is routed through the algebraically
equivalent form

    Sigma - Sigma D^1/2 (I + D^1/2 Sigma D^1/2)^-1 D^1/2 Sigma,

with the inner inverse approximated in the Krylov subspace of a Lanczos
run.  ``Sigma`` stays factored whenever it comes from cosine similarity
of features, so no N x N matrix is materialised for large N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import psi

__all__ = [
    "NumericalError",
    "KernelMatrix",
    "cosine_kernel",
    "LanczosFactors",
    "lanczos",
    "SymmetricApprox",
    "lowrank_posterior",
    "pg_mean",
    "dirichlet_log_expectation",
]

# relative tilt below which the PG mean switches to its c -> 0 limit b/4
_PG_SMALL_TILT = 1e-8

# relative residual at which a truncated posterior solve stops early
_SOLVE_STOP_TOL = 1e-10


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite or invalid intermediates."""


def _diag_mul(d: np.ndarray, v: np.ndarray) -> np.ndarray:
    """diag(d) @ v for v of shape (N,) or (N, B)."""
    if v.ndim == 1:
        return d * v
    return d[:, None] * v


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric PSD matrix ``base + jitter * I`` with a cheap matvec.

    ``base`` is either an explicit dense matrix or the implicit Gram
    matrix ``factor @ factor.T + diag(diag_boost)``.  The factored form
    keeps similarity kernels of D-dimensional features at O(N * D)
    storage and matvec cost; nothing is materialised unless ``values``
    is asked for.
    """

    n: int
    jitter: float
    factor: np.ndarray | None = None
    diag_boost: np.ndarray | None = None
    dense: np.ndarray | None = None

    @classmethod
    def from_dense(cls, matrix: np.ndarray, jitter: float = 0.0) -> "KernelMatrix":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("kernel matrix must be square")
        if not np.all(np.isfinite(m)):
            raise ValueError("kernel matrix must be finite")
        if not np.allclose(m, m.T, atol=1e-8):
            raise ValueError("kernel matrix must be symmetric")
        if jitter < 0:
            raise ValueError("jitter must be nonnegative")
        return cls(n=m.shape[0], jitter=float(jitter), dense=0.5 * (m + m.T))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.dense is not None:
            out = self.dense @ v
        else:
            out = self.factor @ (self.factor.T @ v)
            if self.diag_boost is not None:
                out += _diag_mul(self.diag_boost, v)
        return out + self.jitter * v

    def diagonal(self) -> np.ndarray:
        if self.dense is not None:
            base = np.diag(self.dense).copy()
        else:
            base = np.einsum("ij,ij->i", self.factor, self.factor)
            if self.diag_boost is not None:
                base = base + self.diag_boost
        return base + self.jitter

    @property
    def values(self) -> np.ndarray:
        """Materialised dense matrix; only sensible for small N."""
        if self.dense is not None:
            base = self.dense.copy()
        else:
            base = self.factor @ self.factor.T
            if self.diag_boost is not None:
                base[np.diag_indices(self.n)] += self.diag_boost
        base[np.diag_indices(self.n)] += self.jitter
        return base

    def weighted_square_rowsum(self, weights: np.ndarray) -> np.ndarray:
        """Row-wise sum_l weights[l] * K[i, l]**2 without forming K."""
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n,):
            raise ValueError("weights must have one entry per row")
        if self.dense is not None:
            return (self.values ** 2) @ w
        f = self.factor
        second_moment = f.T @ _diag_mul(w, f)
        core = np.einsum("id,de,ie->i", f, second_moment, f)
        # off-diagonal entries are plain inner products; the diagonal also
        # carries jitter and the zero-row boost, so patch those terms in.
        inner_diag = np.einsum("ij,ij->i", f, f)
        extra = self.jitter + (self.diag_boost if self.diag_boost is not None else 0.0)
        full_diag = inner_diag + extra
        return core + w * (full_diag ** 2 - inner_diag ** 2)


def cosine_kernel(features: np.ndarray, jitter: float = 1e-4) -> KernelMatrix:
    """Pairwise cosine similarity of feature rows plus ``jitter`` on the diagonal.

    All-zero feature rows have no direction, so they get similarity 0 to
    every other item and 1 to themselves, keeping the diagonal at
    1 + jitter everywhere.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("features must be a nonempty 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0.0
    normalized = x / np.where(zero, 1.0, norms)[:, None]
    return KernelMatrix(
        n=x.shape[0],
        jitter=float(jitter),
        factor=normalized,
        diag_boost=zero.astype(float),
    )


@dataclass(frozen=True)
class LanczosFactors:
    """Orthonormal basis ``q`` and tridiagonal ``t`` with A ~ q @ t @ q.T."""

    q: np.ndarray
    t: np.ndarray
    rank: int


def _solve_residual(alphas: np.ndarray, betas: np.ndarray, j: int, beta: float) -> float:
    """Relative residual of the Krylov solve of ``A y = probe`` after j+1 steps.

    With T the leading tridiagonal block, the residual norm equals
    ``beta * |last component of T^-1 e_1|`` times the probe norm, so the
    probe norm cancels from the relative criterion.
    """
    m = j + 1
    bands = np.zeros((3, m))
    bands[1] = alphas[:m]
    if m > 1:
        bands[0, 1:] = betas[: m - 1]
        bands[2, :-1] = betas[: m - 1]
    e1 = np.zeros(m)
    e1[0] = 1.0
    try:
        y = solve_banded((1, 1), bands, e1)
    except np.linalg.LinAlgError:
        return np.inf
    return float(beta * abs(y[-1]))


def lanczos(
    matvec,
    probe: np.ndarray,
    k: int,
    stop_tol: float | None = None,
) -> LanczosFactors:
    """Run up to k Lanczos steps with full reorthogonalization.

    ``matvec`` must realise a symmetric linear operator on R^N.  The
    iteration stops early when the residual norm underflows, i.e. the
    Krylov subspace became invariant; the returned ``rank`` reports how
    many basis vectors were actually built.

    When ``stop_tol`` is given, the iteration additionally stops once the
    relative residual of the tridiagonal solve of ``A y = probe`` falls
    below it, the classical conjugate-gradient criterion.  Spectra made of
    a few spikes plus a tight cluster then finish in a handful of steps
    instead of all k.
    """
    b = np.asarray(probe, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("probe must be a nonempty vector")
    if not np.all(np.isfinite(b)):
        raise ValueError("probe must be finite")
    norm = np.linalg.norm(b)
    if norm == 0.0:
        raise ValueError("probe must be nonzero")
    n = b.size
    k = int(min(k, n))
    if k < 1:
        raise ValueError("rank must be at least 1")

    q = np.zeros((n, k))
    alphas = np.zeros(k)
    betas = np.zeros(max(k - 1, 0))
    q[:, 0] = b / norm
    rank = k
    for j in range(k):
        w = matvec(q[:, j])
        w = np.asarray(w, dtype=float)
        if not np.all(np.isfinite(w)):
            raise NumericalError("operator produced non-finite values")
        alphas[j] = q[:, j] @ w
        w = w - alphas[j] * q[:, j]
        if j > 0:
            w = w - betas[j - 1] * q[:, j - 1]
        # full reorthogonalization against every basis vector built so far
        w = w - q[:, : j + 1] @ (q[:, : j + 1].T @ w)
        if j == k - 1:
            break
        beta = np.linalg.norm(w)
        scale = max(1.0, float(np.max(np.abs(alphas[: j + 1]))))
        if j > 0:
            scale = max(scale, float(np.max(betas[:j])))
        if beta <= 100.0 * n * np.finfo(float).eps * scale:
            rank = j + 1
            break
        if stop_tol is not None and _solve_residual(alphas, betas, j, beta) <= stop_tol:
            rank = j + 1
            break
        betas[j] = beta
        q[:, j + 1] = w / beta

    q = q[:, :rank]
    t = np.diag(alphas[:rank])
    if rank > 1:
        off = betas[: rank - 1]
        t += np.diag(off, 1) + np.diag(off, -1)
    return LanczosFactors(q=q, t=t, rank=rank)


@dataclass(frozen=True)
class SymmetricApprox:
    """Low-rank form of the posterior covariance (Sigma^-1 + diag(omega))^-1.

    ``apply`` realises matrix-vector products and ``diagonal`` the
    materialised diagonal.  The inner inverse is completed with the
    identity outside the Krylov subspace, which is exact at full rank and
    keeps the approximation positive semidefinite when truncated.
    """

    prior: KernelMatrix
    omega: np.ndarray
    sqrt_omega: np.ndarray
    basis: np.ndarray
    inner_delta: np.ndarray
    rank: int
    _diag: list = field(default_factory=list, repr=False)

    def _inner_inverse(self, v: np.ndarray) -> np.ndarray:
        return v + self.basis @ (self.inner_delta @ (self.basis.T @ v))

    def apply(self, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec, dtype=float)
        if v.shape != (self.prior.n,):
            raise ValueError("vector length must match the kernel size")
        u = self.prior.matvec(v)
        w = self._inner_inverse(self.sqrt_omega * u)
        return u - self.prior.matvec(self.sqrt_omega * w)

    def diagonal(self) -> np.ndarray:
        if not self._diag:
            term_identity = self.prior.weighted_square_rowsum(self.omega)
            scaled = _diag_mul(self.sqrt_omega, self.basis)
            g = self.prior.matvec(scaled)
            term_krylov = np.einsum("ij,jl,il->i", g, self.inner_delta, g)
            diag = self.prior.diagonal() - term_identity - term_krylov
            self._diag.append(np.maximum(diag, 0.0))
        return self._diag[0].copy()


def lowrank_posterior(
    prior: KernelMatrix,
    omega_diag: np.ndarray,
    rank: int | None = None,
    probe_seed: int = 0,
) -> SymmetricApprox:
    """Approximate (Sigma^-1 + diag(omega))^-1 without inverting Sigma.

    The inner solve runs Lanczos on I + D^1/2 Sigma D^1/2 (eigenvalues
    >= 1, so the tridiagonal factor is always invertible).  The probe is
    the all-ones vector with a tiny seeded perturbation so that no exact
    symmetry can hide an eigendirection from the Krylov space.  Truncated
    runs (rank < N) stop as soon as the Krylov solve residual drops below
    ``_SOLVE_STOP_TOL``; full-rank runs always build the whole basis so
    they reproduce the dense inverse exactly.
    """
    omega = np.asarray(omega_diag, dtype=float)
    n = prior.n
    if omega.shape != (n,):
        raise ValueError("omega_diag must have one entry per item")
    if not np.all(np.isfinite(omega)) or np.any(omega < 0):
        raise ValueError("omega_diag must be finite and nonnegative")
    k = min(n, 100) if rank is None else int(min(rank, n))
    if k < 1:
        raise ValueError("rank must be at least 1")

    d = np.sqrt(omega)

    def shifted(v: np.ndarray) -> np.ndarray:
        return v + d * prior.matvec(d * v)

    rng = np.random.default_rng(probe_seed)
    probe = np.ones(n) + 1e-3 * rng.standard_normal(n)
    factors = lanczos(shifted, probe, k, stop_tol=_SOLVE_STOP_TOL if k < n else None)
    evals, evecs = np.linalg.eigh(factors.t)
    evals = np.maximum(evals, 1e-12)
    inner_delta = (evecs * (1.0 / evals - 1.0)) @ evecs.T
    return SymmetricApprox(
        prior=prior,
        omega=omega,
        sqrt_omega=d,
        basis=factors.q,
        inner_delta=inner_delta,
        rank=factors.rank,
    )


def pg_mean(b, c):
    """Mean of a Polya-Gamma PG(b, c) variable.

    Equals b/(2c) * tanh(c/2), with the exact limit b/4 used for tilts
    near zero; even in c.
    """
    b_arr, c_arr = np.broadcast_arrays(
        np.asarray(b, dtype=float), np.asarray(c, dtype=float)
    )
    small = np.abs(c_arr) < _PG_SMALL_TILT
    safe = np.where(small, 1.0, c_arr)
    out = np.where(small, b_arr / 4.0, b_arr * np.tanh(safe / 2.0) / (2.0 * safe))
    if out.ndim == 0:
        return float(out)
    return out


def dirichlet_log_expectation(alpha: np.ndarray, axis: int = -1) -> np.ndarray:
    """E[log x] under Dirichlet(alpha): psi(alpha_k) - psi(sum alpha).

    Works over the given axis so batched parameter arrays evaluate in one
    call.
    """
    a = np.asarray(alpha, dtype=float)
    if a.size == 0:
        raise ValueError("alpha must be nonempty")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError("alpha entries must be positive and finite")
    return psi(a) - psi(a.sum(axis=axis, keepdims=True))
