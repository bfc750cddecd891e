"""Statistical label-aggregation baselines: majority vote, EM, and BCC models.

The Bayesian classifier-combination family models each labeling function
with per-class confusion distributions.  The subtype variant adds M
latent mixture components per class, so the joint over an item's class z
and subtype g factorises as tau_k * pi_km * prod_j v_{jkm,y_ij}; setting
M = 1 recovers the conditionally independent model.  Inference is
mean-field coordinate ascent with Dirichlet posteriors throughout.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, psi, xlogy

from .data import ABSTAIN, Dataset
from .linalg import NumericalError, dirichlet_log_expectation

__all__ = [
    "Posterior",
    "majority_vote",
    "dawid_skene",
    "EbccPriors",
    "EbccState",
    "ebcc_init",
    "ebcc_update_assignments",
    "ebcc_update_tau",
    "ebcc_update_pi",
    "ebcc_update_confusion",
    "ebcc_elbo",
    "ebcc_fit",
    "ibcc_fit",
]


@dataclass
class Posterior:
    """Result of aggregating labeling-function votes.

    ``probs`` holds the per-item class distribution and ``predictions``
    its argmax (ties broken toward the lowest class index).
    ``elbo_trace`` carries one objective value per sweep when the fit was
    asked to record it; ``diagnostics`` carries convergence details.
    """

    probs: np.ndarray
    predictions: np.ndarray
    n_iters: int
    elbo_trace: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def _predictions(probs: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(probs, axis=1).astype(np.int64)


def _finish(probs, n_iters, elbo_trace=None, **diag) -> Posterior:
    if not np.all(np.isfinite(probs)):
        raise NumericalError("posterior probabilities became non-finite")
    probs = probs / probs.sum(axis=1, keepdims=True)
    return Posterior(
        probs=probs,
        predictions=_predictions(probs),
        n_iters=n_iters,
        elbo_trace=None if elbo_trace is None else np.asarray(elbo_trace),
        diagnostics=diag,
    )


def majority_vote(dataset: Dataset) -> Posterior:
    """Normalized vote counts per class; all-abstain items get a uniform row."""
    n, k = dataset.n_items, dataset.num_classes
    counts = np.zeros((n, k))
    for c in range(k):
        counts[:, c] = (dataset.lf_labels == c).sum(axis=1)
    totals = counts.sum(axis=1)
    silent = totals == 0
    counts[silent] = 1.0
    totals[silent] = k
    return _finish(counts / totals[:, None], n_iters=0)


def _vote_log_scores(elog_v: np.ndarray, lf_labels: np.ndarray) -> np.ndarray:
    """sum_j E[log v_{jkm, y_ij}] over each item's non-abstaining LFs.

    ``elog_v`` has shape (L, K, M, K); the result has shape (N, K, M).
    """
    n = lf_labels.shape[0]
    _, k, m, _ = elog_v.shape
    scores = np.zeros((n, k, m))
    for j in range(lf_labels.shape[1]):
        votes = lf_labels[:, j]
        mask = votes != ABSTAIN
        if not mask.any():
            continue
        scores[mask] += np.moveaxis(elog_v[j][:, :, votes[mask]], 2, 0)
    return scores


def _normalize_log_scores(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax over the trailing axes of (N, K, M) log scores."""
    n = scores.shape[0]
    flat = scores.reshape(n, -1)
    flat = flat - flat.max(axis=1, keepdims=True)
    weights = np.exp(flat)
    weights /= weights.sum(axis=1, keepdims=True)
    rho = weights.reshape(scores.shape)
    return rho, rho.sum(axis=2)


def dawid_skene(
    dataset: Dataset,
    max_iters: int = 500,
    tol: float = 1e-6,
    smoothing: float = 1e-9,
) -> Posterior:
    """Confusion-matrix EM over maximum-likelihood point estimates.

    Starts from the majority-vote posterior; the smoothing pseudocount
    keeps every confusion entry strictly positive.  The recorded trace is
    the observed-data log-likelihood at each iteration's parameters.
    """
    n, k, n_lf = dataset.n_items, dataset.num_classes, dataset.n_lfs
    votes = dataset.lf_labels
    qz = majority_vote(dataset).probs
    trace = []
    n_iters = 0
    converged = False
    for n_iters in range(1, max_iters + 1):
        prior = qz.sum(axis=0) + smoothing
        prior /= prior.sum()
        counts = np.full((n_lf, k, k), smoothing)
        for j in range(n_lf):
            mask = votes[:, j] != ABSTAIN
            if not mask.any():
                continue
            onehot = votes[mask, j][:, None] == np.arange(k)[None, :]
            counts[j] += qz[mask].T @ onehot
        theta = counts / counts.sum(axis=2, keepdims=True)

        scores = np.log(prior)[None, :].repeat(n, axis=0)
        log_theta = np.log(theta)
        for j in range(n_lf):
            mask = votes[:, j] != ABSTAIN
            if not mask.any():
                continue
            scores[mask] += log_theta[j][:, votes[mask, j]].T
        shifted = scores - scores.max(axis=1, keepdims=True)
        weights = np.exp(shifted)
        norms = weights.sum(axis=1, keepdims=True)
        trace.append(float((np.log(norms[:, 0]) + scores.max(axis=1)).sum()))
        new_qz = weights / norms
        delta = float(np.max(np.abs(new_qz - qz)))
        qz = new_qz
        if delta < tol:
            converged = True
            break
    return _finish(qz, n_iters, elbo_trace=trace, converged=converged)


@dataclass(frozen=True)
class EbccPriors:
    """Dirichlet hyperparameters for the BCC family.

    ``alpha`` defaults to the majority-vote class masses when None.  The
    confusion prior puts ``beta_diag`` on agreeing votes and
    ``beta_offdiag`` elsewhere, encoding that labeling functions beat
    random guessing.  With sparse one-class labeling functions the vote
    likelihood is nearly uninformative given coverage, so the diagonal
    boost carries the class signal until the observed counts swamp it;
    the default is sized to stay informative at a few thousand items.
    """

    alpha: np.ndarray | None = None
    a_pi: float = 1.0
    beta_diag: float = 200.0
    beta_offdiag: float = 1.0

    def beta_matrix(self, num_classes: int) -> np.ndarray:
        beta = np.full((num_classes, num_classes), float(self.beta_offdiag))
        np.fill_diagonal(beta, float(self.beta_diag))
        return beta


@dataclass
class EbccState:
    """Variational posteriors of the subtype BCC model.

    rho: (N, K, M) joint q(z_i = k, g_i = m); nu: (K,) class Dirichlet;
    eta: (K, M) subtype Dirichlets; mu: (L, K, M, K) confusion
    Dirichlets; alpha, a_pi, beta echo the priors.
    """

    rho: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray
    a_pi: float
    beta: np.ndarray

    @property
    def qz(self) -> np.ndarray:
        return self.rho.sum(axis=2)


def _confusion_counts(rho: np.ndarray, lf_labels: np.ndarray, k: int) -> np.ndarray:
    n, _, m = rho.shape
    counts = np.zeros((lf_labels.shape[1], rho.shape[1], m, k))
    for j in range(lf_labels.shape[1]):
        votes = lf_labels[:, j]
        mask = votes != ABSTAIN
        if not mask.any():
            continue
        onehot = (votes[mask][:, None] == np.arange(k)[None, :]).astype(float)
        counts[j] = np.einsum("nkm,nl->kml", rho[mask], onehot)
    return counts


def ebcc_init(
    dataset: Dataset,
    subtypes: int = 3,
    priors: EbccPriors | None = None,
    seed: int = 0,
) -> EbccState:
    """Majority-vote start: rho = MV posterior times a per-item Dirichlet draw."""
    if subtypes < 1:
        raise ValueError("need at least one subtype")
    priors = priors or EbccPriors()
    n, k = dataset.n_items, dataset.num_classes
    mv = majority_vote(dataset).probs
    rng = np.random.default_rng(seed)
    subtype_weights = rng.dirichlet(np.ones(subtypes), size=n)
    rho = mv[:, :, None] * subtype_weights[:, None, :]
    rho /= rho.sum(axis=(1, 2), keepdims=True)
    alpha = np.asarray(priors.alpha, dtype=float) if priors.alpha is not None else mv.sum(axis=0)
    if alpha.shape != (k,) or np.any(alpha <= 0):
        raise ValueError("alpha prior must be positive with one entry per class")
    state = EbccState(
        rho=rho,
        nu=np.zeros(k),
        eta=np.zeros((k, subtypes)),
        mu=np.zeros((dataset.n_lfs, k, subtypes, k)),
        alpha=alpha,
        a_pi=float(priors.a_pi),
        beta=priors.beta_matrix(k),
    )
    ebcc_update_tau(state)
    ebcc_update_pi(state)
    ebcc_update_confusion(state, dataset)
    return state


def ebcc_update_assignments(state: EbccState, dataset: Dataset) -> EbccState:
    elog_tau = dirichlet_log_expectation(state.nu)
    elog_pi = dirichlet_log_expectation(state.eta, axis=-1)
    elog_v = dirichlet_log_expectation(state.mu, axis=-1)
    scores = elog_tau[None, :, None] + elog_pi[None, :, :]
    scores = scores + _vote_log_scores(elog_v, dataset.lf_labels)
    state.rho, _ = _normalize_log_scores(scores)
    return state


def ebcc_update_tau(state: EbccState) -> EbccState:
    state.nu = state.alpha + state.rho.sum(axis=(0, 2))
    return state


def ebcc_update_pi(state: EbccState) -> EbccState:
    state.eta = state.a_pi + state.rho.sum(axis=0)
    return state


def ebcc_update_confusion(state: EbccState, dataset: Dataset) -> EbccState:
    counts = _confusion_counts(state.rho, dataset.lf_labels, dataset.num_classes)
    state.mu = state.beta[None, :, None, :] + counts
    return state


def _log_beta(params: np.ndarray, axis: int = -1) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    return gammaln(params).sum(axis=axis) - gammaln(params.sum(axis=axis))


def _dirichlet_entropy(params: np.ndarray, axis: int = -1) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    total = params.sum(axis=axis)
    dim = params.shape[axis]
    return (
        _log_beta(params, axis=axis)
        + (total - dim) * psi(total)
        - ((params - 1.0) * psi(params)).sum(axis=axis)
    )


def ebcc_elbo(state: EbccState, dataset: Dataset) -> float:
    """Full evidence lower bound: expected log joint plus entropies.

    Valid at any state, so it is non-decreasing across coordinate sweeps
    regardless of where in the cycle it is evaluated.
    """
    elog_tau = dirichlet_log_expectation(state.nu)
    elog_pi = dirichlet_log_expectation(state.eta, axis=-1)
    elog_v = dirichlet_log_expectation(state.mu, axis=-1)
    rho = state.rho
    qz = state.qz
    k, m = state.eta.shape
    n_lf = state.mu.shape[0]

    value = float(
        ((state.alpha - 1.0) * elog_tau).sum()
        - _log_beta(state.alpha)
        + (qz.sum(axis=0) * elog_tau).sum()
    )
    value += float(
        (state.a_pi - 1.0) * elog_pi.sum()
        - k * _log_beta(np.full(m, state.a_pi))
        + (rho.sum(axis=0) * elog_pi).sum()
    )
    value += float(
        ((state.beta[None, :, None, :] - 1.0) * elog_v).sum()
        - n_lf * m * _log_beta(state.beta, axis=-1).sum()
        + (rho * _vote_log_scores(elog_v, dataset.lf_labels)).sum()
    )
    value -= float(xlogy(rho, rho).sum())
    value += float(_dirichlet_entropy(state.nu))
    value += float(_dirichlet_entropy(state.eta, axis=-1).sum())
    value += float(_dirichlet_entropy(state.mu, axis=-1).sum())
    return value


def ebcc_fit(
    dataset: Dataset,
    subtypes: int = 3,
    priors: EbccPriors | None = None,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-6,
    record_elbo: bool = False,
) -> Posterior:
    """Coordinate-ascent fit; stops when max |change in q(z)| < tol."""
    start = time.perf_counter()
    state = ebcc_init(dataset, subtypes=subtypes, priors=priors, seed=seed)
    qz = state.qz
    trace = []
    converged = False
    n_iters = 0
    for n_iters in range(1, max_iters + 1):
        ebcc_update_assignments(state, dataset)
        ebcc_update_tau(state)
        ebcc_update_pi(state)
        ebcc_update_confusion(state, dataset)
        if record_elbo:
            trace.append(ebcc_elbo(state, dataset))
        new_qz = state.qz
        delta = float(np.max(np.abs(new_qz - qz)))
        qz = new_qz
        if delta < tol:
            converged = True
            break
    return _finish(
        qz,
        n_iters,
        elbo_trace=trace if record_elbo else None,
        converged=converged,
        wall_time_ms=1000.0 * (time.perf_counter() - start),
    )


def ibcc_fit(
    dataset: Dataset,
    priors: EbccPriors | None = None,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-6,
    record_elbo: bool = False,
) -> Posterior:
    """Conditionally independent BCC: the subtype model with M = 1."""
    return ebcc_fit(
        dataset,
        subtypes=1,
        priors=priors,
        seed=seed,
        max_iters=max_iters,
        tol=tol,
        record_elbo=record_elbo,
    )
