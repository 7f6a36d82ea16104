"""Compound purify -> measure -> average estimator and the deviation estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import measurement, planner
from .errors import ContractViolation, InvalidDeviationError
from .measurement import ShadowEstimate
from .planner import Plan
from .states import Observable, SpectralState

CONSUMPTION_MODES = ("deterministic", "stochastic")
_ZERO_FAILURE = 1e-14


def purified_state(rho: SpectralState, k: int, constant: float = 1.0) -> SpectralState:
    """Same principal vector, deviation c * eta / k, tail rescaled proportionally."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not rho.eta < 0.5:
        raise InvalidDeviationError(f"principal deviation {rho.eta} must be < 1/2")
    eta = rho.eta
    new_eta = min(constant * eta / k, eta)
    if new_eta == eta:
        return rho
    tail = rho.eigenvalues[1:] * (new_eta / eta)
    lam = np.concatenate([[1 - tail.sum()], tail])
    return SpectralState(lam, rho.eigenvectors)


def purification_cost(k: int, outputs: int, mode: str, rng: np.random.Generator | None) -> int:
    """Raw copies used to produce ``outputs`` purified copies.

    Stochastic mode draws 1 + Poisson(k - 1) per output, which has mean k.
    """
    if mode == "deterministic":
        return k * outputs
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic consumption needs an rng")
        return outputs + int(rng.poisson((k - 1) * outputs)) if outputs else 0
    raise ValueError(f"unknown consumption mode {mode!r}")


def purify(rho: SpectralState, k: int, mode: str = "deterministic",
           rng: np.random.Generator | None = None,
           constant: float = 1.0) -> tuple[SpectralState, int]:
    """Idealised purifier: one output copy from about k raw copies."""
    out = purified_state(rho, k, constant)
    return out, purification_cost(k, 1, mode, rng)


def measure_average(rho: SpectralState, n: int, b: int, rng: np.random.Generator) -> ShadowEstimate:
    """Average of b successful single-shot estimators; failures are retried."""
    if n < 1 or b < 1:
        raise ValueError("n and b must be >= 1")
    z = measurement.success_probability(rho, n)
    failures = int(rng.negative_binomial(b, z)) if z < 1 else 0
    psis = measurement.sample_conditional(rho, n, b, rng)
    d = rho.d
    mean_proj = np.einsum("ti,tj->ij", psis, psis.conj()) / b
    matrix = ((d + n) * mean_proj - np.eye(d)) / n
    attempts = b + failures
    return ShadowEstimate(matrix, n, b, n * attempts, attempts)


def compound_estimate(rho: SpectralState, plan: Plan, rng: np.random.Generator,
                      mode: str = "deterministic") -> ShadowEstimate:
    """Purify with k, measure with width n, average b.

    Every purified copy fed to a measurement, failed or not, costs k raw copies
    on average, so ``samples_spent`` has mean k n b / Z(rho', n).
    """
    c = plan.constants_profile
    purified = purified_state(rho, plan.k, c.purify)
    est = measure_average(purified, plan.n, plan.b, rng)
    raw = purification_cost(plan.k, est.samples_spent, mode, rng)
    return ShadowEstimate(est.matrix, est.n_used, est.b_averaged, raw, est.attempts)


def median_of_means(estimates, o: Observable | np.ndarray) -> float:
    if len(estimates) == 0:
        raise ValueError("median_of_means needs at least one estimate")
    return float(np.median([e.value(o) for e in estimates]))


# ------------------------------------------------------------ eta estimation

@dataclass(frozen=True)
class EtaEstimate:
    p_hat: float
    eta_hat: float
    trials: int
    failures: int
    truncated: bool

    def to_json(self) -> dict:
        return {"p_hat": self.p_hat, "eta_hat": self.eta_hat, "trials": self.trials,
                "failures": self.failures, "truncated": self.truncated}


def count_trials_until_failures(p: float, r: int, cutoff: int | None,
                                rng: np.random.Generator) -> tuple[int, int, bool]:
    """Bernoulli(p) trials until the r-th failure: (trials, failures, truncated).

    Gaps between failures are geometric, so only r draws are needed.  With a
    cutoff the count stops there if the r-th failure has not yet happened.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if p <= 0:
        if cutoff is None:
            raise ContractViolation("failure probability is zero and no cutoff was given")
        return int(cutoff), 0, True
    times = np.cumsum(rng.geometric(min(p, 1.0), size=r))
    if cutoff is not None and times[-1] > cutoff:
        return int(cutoff), int(np.searchsorted(times, cutoff, side="right")), True
    return int(times[-1]), r, False


def estimate_eta(rho: SpectralState, r: int, cutoff_trials: int | None,
                 rng: np.random.Generator) -> EtaEstimate:
    """Run two-copy measurements until r failures; p_hat = r / T, eta_hat = p_hat."""
    p = 1.0 - measurement.success_probability(rho, 2)
    p = 0.0 if p < _ZERO_FAILURE else p
    trials, failures, truncated = count_trials_until_failures(p, r, cutoff_trials, rng)
    p_hat = failures / trials
    return EtaEstimate(p_hat, p_hat, trials, failures, truncated)


def eta_cutoff(r: int, B: float, eps: float) -> int:
    """Trial budget r * s*; running past it means p = O(1/s*), i.e. regime 1."""
    return math.ceil(r * planner.s_star(B, eps))


def eta_window(p_hat: float) -> tuple[float, float]:
    """Range [p/2, 2p] that eta_hat is promised to fall in."""
    return p_hat / 2, 2 * p_hat

