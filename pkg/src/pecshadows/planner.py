"""Choice of purification size k, measurement width n and averaging count b.

The program being solved: minimise k n b / Pr[success] subject to

    bias        eta / (n k)   <= c * eps
    variance 1  B / (n^2 b)   <= c * eps^2
    variance 2  1 / (n b)     <= c * eps^2
    success     n             <= c * k / eta
    positivity  k, n, b       >= 1

``plan_parameters`` uses the three-regime closed forms for k and n.  The
closed-form b of regimes 2 and 3 is the sum of the two variance requirements
at that n; here b is the smallest integer meeting both at the rounded n,
which is never more than the closed form and never below half of it.
Rounding can break a constraint, so each plan is repaired afterwards; for b
both roundings are tried and the cheaper repaired plan is kept.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import InvalidDeviationError

_ROUND_SLACK = 1e-9


@dataclass(frozen=True)
class ConstantsProfile:
    """Named set of the big-O constants used by the planner and the pipeline."""

    name: str = "unit"
    purify: float = 1.0  # eta' = purify * eta / k
    regime1: float = 1.0  # regime 1 when eta <= regime1 / s*
    regime3: float = 1.0  # regime 3 when eta >= regime3 * sqrt(eps)
    k: float = 1.0
    n: float = 1.0
    b: float = 1.0
    bias: float = 1.0
    var1: float = 1.0
    var2: float = 1.0
    success: float = 1.0
    delta: float = 1.0  # coefficient of Delta in the variance bound

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ConstantsProfile":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown constants: {sorted(unknown)}")
        return cls(**doc)


UNIT = ConstantsProfile()


@dataclass(frozen=True)
class Plan:
    k: int
    n: int
    b: int
    regime: int
    expected_samples: float
    constants_profile: ConstantsProfile = field(default=UNIT)
    kind: str = "compound"

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "b": self.b,
            "regime": self.regime,
            "expected_samples": self.expected_samples,
            "constants_profile": self.constants_profile.to_json(),
            "kind": self.kind,
        }


def _ceil(x: float) -> int:
    return max(1, math.ceil(x - _ROUND_SLACK * max(1.0, abs(x))))


def _floor(x: float) -> int:
    return max(1, math.floor(x + _ROUND_SLACK * max(1.0, abs(x))))


def s_star(B: float, eps: float) -> float:
    """Pure-state optimum sqrt(B)/eps + 1/eps^2."""
    return math.sqrt(B) / eps + 1 / eps**2


def z_estimate(eta: float, k: int, n: int, c: ConstantsProfile = UNIT) -> float:
    """Lower bound (1 - eta')^(n-1) on the success probability after purification."""
    return (1 - min(c.purify * eta / k, eta)) ** (n - 1)


def _validate(B: float, eps: float, eta: float) -> None:
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 <= eta < 0.5:
        raise InvalidDeviationError(f"eta must lie in [0, 1/2), got {eta}")


def _b_requirement(n: int, B: float, eps: float, c: ConstantsProfile) -> float:
    """Real-valued b at which both variance constraints hold at width n."""
    return max(B / (n**2 * c.var1 * eps**2), 1 / (n * c.var2 * eps**2))


def _n_requirement(b: int, B: float, eps: float, c: ConstantsProfile) -> int:
    """Smallest n meeting both variance constraints for averaging count b."""
    return max(_ceil(math.sqrt(B / (b * c.var1)) / eps), _ceil(1 / (b * c.var2 * eps**2)))


def _repair_k(k: int, n: int, eta: float, eps: float, c: ConstantsProfile) -> int:
    if eta > 0:
        k = max(k, _ceil(n * eta / c.success), _ceil(eta / (n * c.bias * eps)))
    return k


def _plan(k, n, b, regime, B, eps, eta, c, kind) -> Plan:
    return Plan(k, n, b, regime, k * n * b / z_estimate(eta, k, n, c), c, kind)


def _finish(k, n, b, regime, B, eps, eta, c, kind) -> Plan:
    """Restore feasibility after rounding: raise b, then k."""
    b = max(b, _ceil(_b_requirement(n, B, eps, c)))
    return _plan(_repair_k(k, n, eta, eps, c), n, b, regime, B, eps, eta, c, kind)


def _round_b(k, n, b_real, regime, B, eps, eta, c) -> Plan:
    """Cheaper of rounding b up (keep n) or down (widen n, then raise k)."""
    up = _finish(k, n, _ceil(b_real), regime, B, eps, eta, c, "compound")
    b_lo = _floor(b_real)
    n_lo = max(n, _n_requirement(b_lo, B, eps, c))
    down = _finish(k, n_lo, b_lo, regime, B, eps, eta, c, "compound")
    return min(up, down, key=lambda p: p.expected_samples)


def regime_of(B: float, eps: float, eta: float | None, c: ConstantsProfile = UNIT) -> int:
    if eta is None or eta <= c.regime1 / s_star(B, eps):
        return 1
    if eta >= c.regime3 * math.sqrt(eps):
        return 3
    return 2


def plan_parameters(B: float, eps: float, eta_hat, constants: ConstantsProfile = UNIT) -> Plan:
    """Three-regime parameter choice.

    ``eta_hat`` is a float, ``None`` (treated as a truncated estimate) or an
    object with ``eta_hat`` and ``truncated`` attributes.
    """
    c = constants
    eta = _eta_value(eta_hat)
    _validate(B, eps, eta or 0.0)
    regime = regime_of(B, eps, eta, c)
    eta = eta or 0.0
    if regime == 1:
        return _finish(1, _ceil(c.n * s_star(B, eps)), 1, 1, B, eps, eta, c, "compound")
    if regime == 2:
        # n sits on the success constraint, so round it down
        k, n = 1, _floor(c.n / eta)
    else:
        k, n = _ceil(c.k * eta / math.sqrt(eps)), _ceil(c.n / math.sqrt(eps))
    return _round_b(k, n, c.b * _b_requirement(n, B, eps, c), regime, B, eps, eta, c)


def _eta_value(eta_hat) -> float | None:
    if eta_hat is None:
        return None
    if hasattr(eta_hat, "truncated"):
        return None if eta_hat.truncated else float(eta_hat.eta_hat)
    return float(eta_hat)


def single_copy_count(B: float, eps: float, eta: float, c: ConstantsProfile = UNIT) -> float:
    """Closed-form sample count with n = 1."""
    return c.b * B / eps**2 if eta <= eps else c.b * c.k * B * eta / eps**3


def no_average_count(B: float, eps: float, eta: float, c: ConstantsProfile = UNIT) -> float:
    """Closed-form sample count with b = 1."""
    s = s_star(B, eps)
    return c.n * s if eta <= 1 / s else c.n * eta * s**2


def table_count(B: float, eps: float, eta: float, regime: int) -> float:
    """k n b of the unrounded unit-constant closed form for the given regime."""
    if regime == 1:
        return s_star(B, eps)
    if regime == 2:
        return (B * eta + 1) / eps**2
    return B * eta / eps**2 + eta / eps**2.5


def plan_single_copy(B: float, eps: float, eta: float, constants: ConstantsProfile = UNIT) -> Plan:
    """n = 1: purify until eta/k <= eps, then average B/eps^2 estimates."""
    c = constants
    _validate(B, eps, eta)
    k = _ceil(c.k * eta / eps)
    b = _ceil(c.b * B / eps**2)
    return _finish(k, 1, b, 1 if eta <= eps else 2, B, eps, eta, c, "single_copy")


def plan_no_average(B: float, eps: float, eta: float, constants: ConstantsProfile = UNIT) -> Plan:
    """b = 1: one wide measurement of width s*, purifying enough to keep it succeeding."""
    c = constants
    _validate(B, eps, eta)
    n = _ceil(c.n * s_star(B, eps))
    return _finish(1, n, 1, 1 if eta <= 1 / s_star(B, eps) else 2, B, eps, eta, c, "no_average")


# ------------------------------------------------------------ verification

@dataclass(frozen=True)
class ConstraintResult:
    name: str
    value: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.value

    @property
    def ok(self) -> bool:
        return self.value <= self.bound + 1e-12 * max(1.0, abs(self.bound))


@dataclass(frozen=True)
class ConstraintReport:
    results: tuple
    dual_bound: float
    expected_samples: float

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def certified(self) -> bool:
        return self.expected_samples >= self.dual_bound * (1 - 1e-12)

    def as_dict(self) -> dict:
        return {
            "constraints": [
                {"name": r.name, "value": r.value, "bound": r.bound, "slack": r.slack, "ok": r.ok}
                for r in self.results
            ],
            "dual_bound": self.dual_bound,
            "expected_samples": self.expected_samples,
            "certified": self.certified,
        }


def dual_bound(B: float, eps: float, eta: float, c: ConstantsProfile = UNIT) -> float:
    """Largest of the four lower bounds on k n b implied by products of constraints."""
    return max(
        math.sqrt(B / c.var1) / eps,
        1 / (c.var2 * eps**2),
        B * eta / (c.var1 * c.success * eps**2),
        eta / (eps**2.5 * c.var2 * math.sqrt(c.bias * c.success)),
    )


def check_constraints(plan: Plan, B: float, eps: float, eta: float) -> ConstraintReport:
    c = plan.constants_profile
    k, n, b = plan.k, plan.n, plan.b
    results = (
        ConstraintResult("bias", eta / (n * k), c.bias * eps),
        ConstraintResult("variance1", B / (n**2 * b), c.var1 * eps**2),
        ConstraintResult("variance2", 1 / (n * b), c.var2 * eps**2),
        ConstraintResult("success", n * eta, c.success * k),
        ConstraintResult("positivity", -min(k, n, b), -1),
    )
    return ConstraintReport(results, dual_bound(B, eps, eta, c), plan.expected_samples)
