"""Named oracle checks run by ``pecshadows verify``.

Each check compares a closed form against an independent route and records
the worst deviation seen.  Functions are looked up through their modules at
call time so that a patched implementation is what gets checked.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import measurement, pipeline, planner, states, tensor, typedist

QUICK_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    level: str
    tolerance: float
    deviation: float
    passed: bool
    seconds: float = 0.0
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "level": self.level, "tolerance": self.tolerance,
                "deviation": self.deviation, "passed": self.passed,
                "seconds": round(self.seconds, 3), "note": self.note}


@dataclass
class Report:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "failed": self.failed,
                "checks": [r.as_dict() for r in self.results]}


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _spectra(d: int, count: int, rng) -> list[states.SpectralState]:
    return [states.random_spectral_state(d, rng, (0.55, 0.95)) for _ in range(count)]


def _brute_marginal(state, n, k):
    a = tensor.kron_power(state.matrix, n)
    return tensor.sym_partial_trace(a, n, k, state.d)


# ------------------------------------------------------------ quick checks

def check_sym_dim(rng) -> float:
    return max(abs(np.trace(tensor.sym_projector(d, n)).real - tensor.sym_dim(d, n))
               for d in (2, 3) for n in range(1, 5))


def check_permutation_homomorphism(rng) -> float:
    worst = 0.0
    for _ in range(10):
        pi, sigma = rng.permutation(4), rng.permutation(4)
        lhs = tensor.permutation_operator(pi, 2) @ tensor.permutation_operator(sigma, 2)
        worst = max(worst, _max_abs(lhs, tensor.permutation_operator(tensor.compose(pi, sigma), 2)))
    return worst


def check_sigma0(rng) -> float:
    """Z from type sums against Tr(Pi_sym rho^(x n))."""
    return max(abs(measurement.success_probability(s, n) - measurement.success_probability_brute(s, n))
               for d in (2, 3) for n in range(2, 5) for s in _spectra(d, 3, rng))


def check_sigma1(rng) -> float:
    """Single-copy marginal of sigma(e) against the closed form."""
    worst = 0.0
    for d, n in [(2, 3), (3, 3), (3, 4)]:
        basis = tensor.haar_unitary(d, rng)
        for e in typedist.enumerate_types(d, n):
            marg = tensor.sym_partial_trace(typedist.sigma_state(e, basis), n, 1, d)
            worst = max(worst, _max_abs(marg / np.trace(marg).real, typedist.m1_of_type(e, basis)))
    return worst


def check_sigma2(rng) -> float:
    """Two-copy marginal of sigma(e) against the closed form."""
    worst = 0.0
    for d, n in [(2, 3), (3, 3), (3, 4)]:
        basis = tensor.haar_unitary(d, rng)
        for e in typedist.enumerate_types(d, n):
            marg = tensor.sym_partial_trace(typedist.sigma_state(e, basis), n, 2, d)
            worst = max(worst, _max_abs(marg / np.trace(marg).real, typedist.m2_of_type(e, basis)))
    return worst


def check_type_mixture(rng) -> float:
    """M1, M2 of rho^(x n) as D-averages of the per-type marginals."""
    worst = 0.0
    for d, n in [(2, 4), (3, 3)]:
        for s in _spectra(d, 2, rng):
            dist = typedist.exact_dist(s.eigenvalues, n)
            basis = s.eigenvectors
            m1 = sum(m * typedist.m1_of_type(e, basis) for e, m in zip(dist.types, dist.masses))
            m2 = sum(m * typedist.m2_of_type(e, basis) for e, m in zip(dist.types, dist.masses))
            worst = max(worst, _max_abs(m1, measurement.m_k_exact(s, n, 1, "brute")),
                        _max_abs(m2, measurement.m_k_exact(s, n, 2, "brute")))
    return worst


def check_moments_paths(rng) -> float:
    worst = 0.0
    for d, n in [(2, 5), (3, 4)]:
        for s in _spectra(d, 2, rng):
            for k in (1, 2):
                worst = max(worst, _max_abs(measurement.m_k_exact(s, n, k, "types"),
                                            measurement.m_k_exact(s, n, k, "brute")))
    return worst


def check_chiribella(rng) -> float:
    worst = 0.0
    for d, n, k in [(2, 2, 1), (2, 3, 2), (3, 2, 2)]:
        a = tensor.twirl(tensor.kron_power(states.random_density_matrix(d, rng), n), n, d)
        worst = max(worst, _max_abs(measurement.mp_map(a, n, k, d, "definition"),
                                    measurement.mp_map(a, n, k, d, "chiribella")))
    return worst


def check_psi_moments(rng) -> float:
    """E[Psi | success] from the moment formula against MP applied to rho^(x n)."""
    worst = 0.0
    for d, n in [(2, 3), (3, 2)]:
        s = _spectra(d, 1, rng)[0]
        a = tensor.kron_power(s.matrix, n)
        z = measurement.success_probability(s, n)
        first, second = measurement.conditional_psi_moments(s, n)
        worst = max(worst, _max_abs(first, measurement.mp_map(a, n, 1, d) / z),
                    _max_abs(second, measurement.mp_map(a, n, 2, d) / z))
    return worst


def four_copy_marginal(rho: np.ndarray) -> np.ndarray:
    """Tr_{4->1}(rho^(x 4)) grouped by the cycle holding the kept factor."""
    t2, t3 = (np.trace(np.linalg.matrix_power(rho, p)).real for p in (2, 3))
    r2 = rho @ rho
    return (rho * (1 + 3 * t2 + 2 * t3) + r2 * (3 + 3 * t2) + 6 * r2 @ rho + 6 * r2 @ r2) / 24


def check_four_copy_marginal(rng) -> float:
    worst = 0.0
    for _ in range(3):
        rho = states.random_density_matrix(3, rng)
        brute = tensor.sym_partial_trace(tensor.kron_power(rho, 4), 4, 1, 3)
        worst = max(worst, _max_abs(brute, four_copy_marginal(rho)))
    return worst


def check_success_bounds(rng) -> float:
    """Largest violation of lambda_1^(n-1) <= Z <= lambda_1^(n+1)/(2 lambda_1 - 1)."""
    worst = 0.0
    for s in _spectra(3, 10, rng):
        for n in range(1, 9):
            lo, hi = measurement.success_bounds(s.lambda1, n)
            z = measurement.success_probability(s, n)
            worst = max(worst, lo - z, z - hi, 0.0)
    return worst


def check_tv_identity(rng) -> float:
    """TV(D, D') equals the mass D' puts on e_1 < 0."""
    worst = 0.0
    for d, n in [(2, 4), (3, 3)]:
        for s in _spectra(d, 2, rng):
            lam = s.eigenvalues
            geo = typedist.geom_dist(lam, n)
            tv = typedist.tv_distance(typedist.exact_dist(lam, n), geo)
            worst = max(worst, abs(tv - typedist.prob_e1_negative(lam, n)) - geo.truncation_error)
    return max(worst, 0.0)


def check_estimator_unbiased(rng) -> float:
    """((d + n) E[Psi] - I) / n equals M1."""
    worst = 0.0
    for s in _spectra(3, 3, rng):
        first, _ = measurement.conditional_psi_moments(s, 4)
        est = ((s.d + 4) * first - np.eye(s.d)) / 4
        worst = max(worst, _max_abs(est, measurement.m_k_exact(s, 4, 1)))
    return worst


def check_planner_constraints(rng) -> float:
    """Count of grid points whose plan breaks a constraint or its dual certificate."""
    bad = 0
    for B in (10.0, 100.0):
        for eps in (0.01, 0.1):
            for eta in (0.0, 1e-4, 0.01, 0.2):
                plan = planner.plan_parameters(B, eps, eta)
                rep = planner.check_constraints(plan, B, eps, eta)
                bad += not (rep.ok and rep.certified)
    return float(bad)


# ------------------------------------------------------------- full checks

def check_sampler_success_rate(rng) -> float:
    """|rate - Z| in standard errors; passes under 4."""
    s = states.planted_instance(2, 0.1)
    size = 10**5
    success, _ = measurement.sample_outcomes(s, 10, size, rng)
    z = measurement.success_probability(s, 10)
    return abs(success.mean() - z) / math.sqrt(z * (1 - z) / size)


def check_sampler_mean(rng) -> float:
    """Worst entry of the conditional estimator mean versus M1, in standard errors."""
    s = states.planted_instance(2, 0.1, rng=rng)
    n, size = 10, 10**5
    psis = measurement.sample_conditional(s, n, size, rng)
    phis = ((s.d + n) * np.einsum("ti,tj->tij", psis, psis.conj()) - np.eye(s.d)) / n
    se = phis.std(axis=0) / math.sqrt(size)
    gap = np.abs(phis.mean(axis=0) - measurement.m_k_exact(s, n, 1))
    return float(np.max(np.where(se > 0, gap / np.maximum(se, 1e-300), 0.0)))


def check_eta_estimator(rng) -> float:
    """Fraction of runs outside [ln2 r/p, ln4 r/p]; passes under 0.12."""
    s = states.planted_instance(2, 0.2)
    p = 1 - measurement.success_probability(s, 2)
    r, runs = 50, 300
    trials = np.array([pipeline.estimate_eta(s, r, None, rng).trials for _ in range(runs)])
    inside = (trials >= math.log(2) * r / p) & (trials <= math.log(4) * r / p)
    return 1.0 - float(inside.mean())


# name, level, tolerance, check
CHECKS = [
    ("sym_dim", "quick", QUICK_TOL, check_sym_dim),
    ("permutation_homomorphism", "quick", QUICK_TOL, check_permutation_homomorphism),
    ("sigma0", "quick", QUICK_TOL, check_sigma0),
    ("sigma1", "quick", QUICK_TOL, check_sigma1),
    ("sigma2", "quick", QUICK_TOL, check_sigma2),
    ("type_mixture", "quick", QUICK_TOL, check_type_mixture),
    ("moments_two_routes", "quick", QUICK_TOL, check_moments_paths),
    ("chiribella", "quick", QUICK_TOL, check_chiribella),
    ("psi_moments", "quick", QUICK_TOL, check_psi_moments),
    ("four_copy_marginal", "quick", QUICK_TOL, check_four_copy_marginal),
    ("success_bounds", "quick", QUICK_TOL, check_success_bounds),
    ("tv_identity", "quick", 1e-12, check_tv_identity),
    ("estimator_unbiased", "quick", QUICK_TOL, check_estimator_unbiased),
    ("planner_constraints", "quick", 0.0, check_planner_constraints),
    ("sampler_success_rate", "full", 4.0, check_sampler_success_rate),
    ("sampler_mean", "full", 4.0, check_sampler_mean),
    ("eta_estimator", "full", 0.12, check_eta_estimator),
]


def run(level: str = "quick", seed: int = 0, only: list[str] | None = None) -> Report:
    if level not in ("quick", "full"):
        raise ValueError(f"level must be quick or full, got {level!r}")
    report = Report()
    for idx, (name, lvl, tol, fn) in enumerate(CHECKS):
        if lvl == "full" and level == "quick" or only and name not in only:
            continue
        rng = np.random.default_rng([seed, idx])
        start = time.perf_counter()
        try:
            dev = float(fn(rng))
            passed, note = bool(dev <= tol), ""
        except Exception as exc:  # a crashing check is a failing check
            dev, passed, note = float("nan"), False, f"{type(exc).__name__}: {exc}"
        report.results.append(CheckResult(name, lvl, tol, dev, passed,
                                          time.perf_counter() - start, note))
    return report
