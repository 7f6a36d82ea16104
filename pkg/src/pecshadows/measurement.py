"""The symmetric joint measurement on n copies and its single-shot estimator.

Exact quantities are available through two independent routes: sums over
type vectors (cheap, no dimension cap) and brute-force symmetric partial
traces of rho^(x n) (dense, capped).  Sampling is exact rejection sampling
from the continuous POVM.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor, typedist
from .errors import ContractViolation, NotExchangeableError, SamplerError
from .states import Observable, SpectralState

MAX_DRY_PROPOSALS = 10**7
_BATCH_CAP = 1 << 20


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    success: bool
    psi: np.ndarray | None
    copies_consumed: int

    @property
    def status(self) -> str:
        return "success" if self.success else "failure"


@dataclass(frozen=True, eq=False)
class ShadowEstimate:
    """Average of ``b_averaged`` single-shot estimators.

    ``samples_spent`` counts every copy used, including those of failed
    measurements.  The matrix has unit trace but need not be positive.
    """

    matrix: np.ndarray
    n_used: int
    b_averaged: int
    samples_spent: int
    attempts: int

    def value(self, o: Observable | np.ndarray) -> float:
        mat = o.matrix if isinstance(o, Observable) else np.asarray(o)
        return float(np.real(np.sum(mat.T * self.matrix)))


def _spectrum(state) -> np.ndarray:
    if isinstance(state, SpectralState):
        return state.eigenvalues
    return np.asarray(state, dtype=float)


# ------------------------------------------------------------ exact moments

def success_probability(state, n: int) -> float:
    """Z = sum over type vectors of lambda^e.

    Evaluated as the complete homogeneous symmetric polynomial h_n(lambda)
    via the usual one-variable-at-a-time recurrence, which visits each type
    vector exactly once without listing them.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    h = np.zeros(n + 1)
    h[0] = 1.0
    for lam in _spectrum(state):
        for j in range(1, n + 1):
            h[j] += lam * h[j - 1]
    return float(h[n])


def success_probability_brute(state: SpectralState, n: int) -> float:
    """Tr(Pi_sym rho^(x n)) with dense matrices."""
    proj = tensor.sym_projector(state.d, n)
    return float(np.real(np.sum(proj.T * tensor.kron_power(state.matrix, n))))


def success_bounds(lambda1: float, n: int) -> tuple[float, float]:
    """lambda_1^(n-1) <= Z <= lambda_1^(n+1) / (2 lambda_1 - 1)."""
    return lambda1 ** (n - 1), lambda1 ** (n + 1) / (2 * lambda1 - 1)


def type_moments(state: SpectralState, n: int) -> tuple[float, np.ndarray, np.ndarray | None]:
    """(Z, M1, M2) from the exact type law D; M2 is None when n < 2."""
    dist = typedist.exact_dist(state.eigenvalues, n)
    z = float(np.sum(typedist.type_weights(state.eigenvalues, dist.types)))
    basis = state.eigenvectors
    m1 = typedist.m1_of_type(dist.mean(), basis)
    m2 = None
    if n >= 2:
        weights = np.einsum("t,tij->ij", dist.masses,
                            np.stack([typedist.pair_weights(e) for e in dist.types]))
        m2 = typedist.m2_from_weights(weights, basis, n)
    return z, m1, m2


def m_k_exact(state: SpectralState, n: int, k: int, method: str = "types") -> np.ndarray:
    """Normalised symmetric marginal Tr_{n->k}(rho^(x n)) / Z for k in {1, 2}."""
    if k not in (1, 2) or n < k:
        raise ContractViolation(f"need k in (1, 2) and n >= k, got k={k}, n={n}")
    if method == "types":
        _, m1, m2 = type_moments(state, n)
        return m1 if k == 1 else m2
    if method == "brute":
        a = tensor.kron_power(state.matrix, n)
        marg = tensor.sym_partial_trace(a, n, k, state.d)
        return marg / np.trace(marg).real
    raise ValueError(f"unknown method {method!r}")


def conditional_psi_moments(state: SpectralState, n: int) -> tuple[np.ndarray, np.ndarray]:
    """E[Psi | success] and E[Psi (x) Psi | success]."""
    d = state.d
    _, m1, m2 = type_moments(state, n)
    eye = np.eye(d)
    first = (eye + n * m1) / (d + n)
    inner = np.eye(d * d) + n * (np.kron(m1, eye) + np.kron(eye, m1))
    if n >= 2:
        inner = inner + math.comb(n, 2) * m2
    second = 2 * tensor.sym_projector(d, 2) @ inner / ((d + n) * (d + n + 1))
    return first, second


def mp_map(a: np.ndarray, n: int, k: int, d: int, method: str = "definition",
           check: bool = True) -> np.ndarray:
    """Unconditioned E[Psi^(x k)] for an exchangeable input A on n qudits."""
    a = np.asarray(a, dtype=complex)
    if check:
        defect = tensor.exchangeability_defect(a, n, d)
        if defect > 1e-10 * max(1.0, float(np.max(np.abs(a)))):
            raise NotExchangeableError(f"input is not permutation invariant (defect {defect:.2e})")
    if method == "definition":
        big = tensor.sym_projector(d, n + k) @ np.kron(a, np.eye(d**k))
        scale = tensor.sym_dim(d, n) / tensor.sym_dim(d, n + k)
        return scale * tensor.partial_trace(big, range(n), d)
    if method == "chiribella":
        total = np.zeros((d**k, d**k), dtype=complex)
        for s in range(k + 1):
            marg = tensor.sym_partial_trace(a, n, s, d)
            total += math.comb(n, s) * math.comb(k, s) * np.kron(marg, np.eye(d ** (k - s)))
        proj = tensor.sym_projector(d, k)
        return proj @ total @ proj / tensor.sym_dim(d + n, k)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------------ sampling

def expected_proposals(state: SpectralState, n: int) -> float:
    """Mean Haar proposals per accepted outcome."""
    return tensor.sym_dim(state.d, n) * state.lambda1**n / success_probability(state, n)


def sample_conditional(state: SpectralState, n: int, count: int, rng: np.random.Generator,
                       max_dry: int = MAX_DRY_PROPOSALS) -> np.ndarray:
    """``count`` outcomes drawn from the success-conditioned law, one per row.

    Haar proposals are accepted with probability (<psi|rho|psi>/lambda_1)^n,
    giving density proportional to <psi|rho|psi>^n.
    """
    lam = state.eigenvalues
    out = np.empty((count, state.d), dtype=complex)
    got = dry = 0
    per = expected_proposals(state, n) if count else 1.0
    while got < count:
        batch = int(min(_BATCH_CAP, max_dry, max(64, (count - got) * per * 1.1 + 16)))
        coeffs = tensor.haar_states(state.d, batch, rng)
        ratio = (np.abs(coeffs) ** 2 @ lam) / lam[0]
        accept = rng.random(batch) < ratio**n
        take = coeffs[accept][: count - got]
        if take.shape[0] == 0:
            dry += batch
            if dry > max_dry:
                raise SamplerError(f"no acceptance in {dry} proposals")
            continue
        dry = 0
        out[got:got + take.shape[0]] = take
        got += take.shape[0]
    return out @ state.eigenvectors.T


def sample_outcomes(state: SpectralState, n: int, size: int, rng: np.random.Generator):
    """Vectorised measurements: (success flags, psi rows with zeros on failure)."""
    success = rng.random(size) < success_probability(state, n)
    psis = np.zeros((size, state.d), dtype=complex)
    psis[success] = sample_conditional(state, n, int(success.sum()), rng)
    return success, psis


def sample_outcome(state: SpectralState, n: int, rng: np.random.Generator) -> MeasurementOutcome:
    if n < 1:
        raise ValueError("n must be >= 1")
    success, psis = sample_outcomes(state, n, 1, rng)
    return MeasurementOutcome(bool(success[0]), psis[0] if success[0] else None, n)


# ----------------------------------------------------------------- estimator

def estimator_matrix(psi: np.ndarray, n: int) -> np.ndarray:
    """((d + n)|psi><psi| - I) / n."""
    d = psi.shape[0]
    return ((d + n) * np.outer(psi, psi.conj()) - np.eye(d)) / n


def estimator(outcome: MeasurementOutcome, d: int, n: int) -> ShadowEstimate:
    if not outcome.success:
        raise ContractViolation("estimator is only defined on successful outcomes")
    return ShadowEstimate(estimator_matrix(outcome.psi, n), n, 1, outcome.copies_consumed, 1)


def estimator_values(psis: np.ndarray, o: np.ndarray, n: int) -> np.ndarray:
    """Tr(O phi_hat) for each row of ``psis``, without forming phi_hat."""
    o = np.asarray(o)
    d = o.shape[0]
    quad = np.real(np.einsum("ti,ij,tj->t", psis.conj(), o, psis))
    return ((d + n) * quad - np.trace(o).real) / n


def estimator_variance_exact(state: SpectralState, o: Observable, n: int) -> float:
    """Var[Tr(O phi_hat) | success] from the exact conditional moments."""
    first, second = conditional_psi_moments(state, n)
    om = o.matrix
    mean = np.real(np.sum(om.T * first))
    sq = np.real(np.sum(np.kron(om, om).T * second))
    return float(((state.d + n) / n) ** 2 * (sq - mean**2))


def estimator_variance_bound(state: SpectralState, o: Observable, n: int,
                             c_delta: float = 1.0) -> float:
    """Tr(O^2)/n^2 + 6||O||^2/n + 8||O||^2/n^2 + c_delta * Delta."""
    norm2 = o.infinity_norm**2
    delta = typedist.delta_bound(state.lambda1, n)
    return o.frobenius_sq / n**2 + 6 * norm2 / n + 8 * norm2 / n**2 + c_delta * delta


def variance_given_type(e, basis: np.ndarray, o: np.ndarray, n: int) -> float:
    """Measurement-only variance of Tr(O phi_hat) when the input is sigma(e)."""
    d = basis.shape[0]
    m1 = typedist.m1_of_type(e, basis)
    eye = np.eye(d)
    inner = np.eye(d * d) + n * (np.kron(m1, eye) + np.kron(eye, m1))
    if n >= 2:
        inner = inner + math.comb(n, 2) * typedist.m2_of_type(e, basis)
    second = 2 * tensor.sym_projector(d, 2) @ inner / ((d + n) * (d + n + 1))
    first = (eye + n * m1) / (d + n)
    o = np.asarray(o)
    mean = np.real(np.sum(o.T * first))
    sq = np.real(np.sum(np.kron(o, o).T * second))
    return float(((d + n) / n) ** 2 * (sq - mean**2))


def variance_decomposition(state: SpectralState, o: Observable, n: int) -> tuple[float, float]:
    """(mixture variance, mean measurement variance) over the exact type law."""
    dist = typedist.exact_dist(state.eigenvalues, n)
    mix = typedist.mixture_variance(state.eigenvalues, state.eigenvectors, o.matrix, n)
    meas = sum(m * variance_given_type(e, state.eigenvectors, o.matrix, n)
               for e, m in zip(dist.types, dist.masses))
    return mix, float(meas)
