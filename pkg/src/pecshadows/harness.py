"""Experiment runners behind the command-line subcommands."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, measurement, pipeline, planner, states, streams, tensor, typedist
from .config import ExperimentConfig
from .errors import ConfigError, DimensionOverflowError

CSV_SCHEMA = "pecshadows-results/1"
RESULT_COLUMNS = ["run_id", "regime", "k", "n", "b", "samples_spent", "estimate", "truth",
                  "abs_error", "success_rate", "wall_time"]
SUMMARY_QUANTILES = (0.1, 0.5, 0.9)


@dataclass
class ResultRow:
    run_id: str
    regime: int | str
    k: int | str
    n: int | str
    b: int | str
    samples_spent: int
    estimate: float | str
    truth: float | str
    abs_error: float
    success_rate: float
    wall_time: float | str = ""

    def cells(self) -> list:
        # abs_error is recomputed from the written values when both are present
        row = asdict(self)
        if isinstance(self.estimate, float) and isinstance(self.truth, float):
            row["abs_error"] = abs(self.estimate - self.truth)
        return [_fmt(row[c]) for c in RESULT_COLUMNS]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def complex_to_json(a: np.ndarray):
    a = np.asarray(a)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(x) for x in a]


def header_lines(cfg: ExperimentConfig, kind: str) -> list[str]:
    return [
        f"# schema {CSV_SCHEMA} ({kind})",
        f"# version {__version__}",
        f"# config_sha256 {cfg.digest()}",
        f"# seed {cfg.seed}",
        f"# constants {json.dumps(cfg.profile.to_json(), sort_keys=True)}",
        f"# depolarized_noise {str(depolarized(cfg)).lower()}",
    ]


def depolarized(cfg: ExperimentConfig) -> bool:
    """False flags a non-uniform tail, outside the purifier's validated model."""
    return cfg.build_state().is_depolarized


def write_csv(lines: list[str], columns: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    for line in lines:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def envelope(cfg: ExperimentConfig, kind: str, body: dict) -> dict:
    return {"schema": f"pecshadows-{kind}/1", "version": __version__,
            "config_sha256": cfg.digest(), "seed": cfg.seed,
            "constants_profile": cfg.profile.to_json(), "depolarized_noise": depolarized(cfg),
            **body}


# ------------------------------------------------------------------ planning

def _plan_for_run(cfg: ExperimentConfig, state, B: float, rng) -> planner.Plan:
    proto, profile = cfg.protocol, cfg.profile
    if not proto.get("auto"):
        # regime 0 marks an explicit plan given without a target eps
        k, n, b = proto["k"], proto["n"], proto["b"]
        regime = planner.regime_of(B, float(proto["eps"]), state.eta,
                                   profile) if "eps" in proto else 0
        expected = k * n * b / planner.z_estimate(state.eta, k, n, profile)
        return planner.Plan(k, n, b, regime, expected, profile, "fixed")
    eps = float(proto["eps"])
    eta = proto.get("eta", "estimate")
    if eta == "estimate":
        r = int(proto.get("r", 50))
        cutoff = proto.get("cutoff", pipeline.eta_cutoff(r, B, eps))
        eta = pipeline.estimate_eta(state, r, cutoff, rng)
    return planner.plan_parameters(B, eps, eta, profile)


def resolve_B(cfg: ExperimentConfig, observable) -> float:
    """protocol.B if given, else Tr(O^2) of the observable (at least 1)."""
    return float(cfg.protocol.get("B", max(1.0, observable.frobenius_sq)))


def run_pipeline(cfg: ExperimentConfig) -> tuple[list[ResultRow], list[ResultRow]]:
    state = cfg.build_state(streams.stream(cfg.seed, 0, streams.INSTANCE))
    obs = cfg.build_observable(state.d, streams.stream(cfg.seed, 1, streams.INSTANCE))
    B = resolve_B(cfg, obs)
    truth = obs.expectation(state.principal_projector)
    mode = cfg.protocol.get("consumption", "deterministic")
    rows = []
    for idx in range(cfg.repetitions):
        rng = streams.stream(cfg.seed, idx)
        start = time.perf_counter()
        plan = _plan_for_run(cfg, state, B, rng)
        est = pipeline.compound_estimate(state, plan, rng, mode)
        value = est.value(obs)
        wall = time.perf_counter() - start if cfg.record_wall_time else ""
        rows.append(ResultRow(str(idx), plan.regime, plan.k, plan.n, plan.b, est.samples_spent,
                              value, truth, abs(value - truth), est.b_averaged / est.attempts, wall))
    return rows, summarize(rows)


def summarize(rows: list[ResultRow]) -> list[ResultRow]:
    """Mean error plus error quantiles; every summary row carries the total sample count."""
    if not rows:
        return []
    errors = np.array([r.abs_error for r in rows])
    total = int(sum(r.samples_spent for r in rows))
    rate = float(np.mean([r.success_rate for r in rows]))
    out = [ResultRow("summary_mean", "", "", "", "", total, "", "", float(errors.mean()), rate)]
    for q in SUMMARY_QUANTILES:
        out.append(ResultRow(f"summary_q{int(q * 100):02d}", "", "", "", "", total, "", "",
                             float(np.quantile(errors, q)), rate))
    return out


def pipeline_csv(cfg: ExperimentConfig) -> str:
    rows, summary = run_pipeline(cfg)
    return write_csv(header_lines(cfg, "pipeline"), RESULT_COLUMNS,
                     [r.cells() for r in rows + summary])


def pipeline_json(cfg: ExperimentConfig) -> dict:
    rows, summary = run_pipeline(cfg)
    as_dicts = [dict(zip(RESULT_COLUMNS, r.cells())) for r in rows + summary]
    return envelope(cfg, "pipeline", {"rows": as_dicts})


# ------------------------------------------------------------------- moments

def moments_doc(cfg: ExperimentConfig) -> dict:
    state = cfg.build_state(streams.stream(cfg.seed, 0, streams.INSTANCE))
    obs = cfg.build_observable(state.d, streams.stream(cfg.seed, 1, streams.INSTANCE))
    n = int(cfg.moments.get("n", 4))
    if n < 2:
        raise ConfigError("moments.n: must be >= 2")
    z = measurement.success_probability(state, n)
    m1 = measurement.m_k_exact(state, n, 1)
    m2 = measurement.m_k_exact(state, n, 2)
    first, _ = measurement.conditional_psi_moments(state, n)
    brute = None
    try:
        tensor.check_dim(state.d, n)
        z_b = measurement.success_probability_brute(state, n)
        m1_b = measurement.m_k_exact(state, n, 1, "brute")
        m2_b = measurement.m_k_exact(state, n, 2, "brute")
        brute = {"Z": z_b, "M1": complex_to_json(m1_b), "M2": complex_to_json(m2_b),
                 "max_discrepancy": max(abs(z - z_b), float(np.max(np.abs(m1 - m1_b))),
                                        float(np.max(np.abs(m2 - m2_b))))}
    except DimensionOverflowError:
        pass
    return envelope(cfg, "moments", {
        "d": state.d, "n": n, "eta": state.eta,
        "types": {"Z": z, "M1": complex_to_json(m1), "M2": complex_to_json(m2)},
        "brute": brute,
        "E_psi_given_success": complex_to_json(first),
        "variance_exact": measurement.estimator_variance_exact(state, obs, n),
        "variance_bound": measurement.estimator_variance_bound(state, obs, n, cfg.profile.delta),
        "delta": typedist.delta_bound(state.lambda1, n),
    })


# -------------------------------------------------------------------- sample

SAMPLE_COLUMNS = ["attempt", "success", "estimate", "psi"]


def sample_rows(cfg: ExperimentConfig) -> list[list[str]]:
    state = cfg.build_state(streams.stream(cfg.seed, 0, streams.INSTANCE))
    obs = cfg.build_observable(state.d, streams.stream(cfg.seed, 1, streams.INSTANCE))
    n, count = int(cfg.sample.get("n", 4)), int(cfg.sample.get("count", 100))
    success, psis = measurement.sample_outcomes(state, n, count, streams.stream(cfg.seed, 0))
    values = measurement.estimator_values(psis, obs.matrix, n)
    rows = []
    for i in range(count):
        psi = " ".join(f"{z.real!r}{z.imag:+}j" for z in psis[i]) if success[i] else ""
        rows.append([str(i), str(int(success[i])), _fmt(float(values[i])) if success[i] else "", psi])
    return rows


def sample_csv(cfg: ExperimentConfig) -> str:
    return write_csv(header_lines(cfg, "sample"), SAMPLE_COLUMNS, sample_rows(cfg))


# --------------------------------------------------------------- delta curve

DELTA_COLUMNS = ["eta", "n", "delta", "prob_e1_negative"]


def delta_rows(cfg: ExperimentConfig) -> list[dict]:
    spec = cfg.delta_curve
    etas = spec.get("etas") or list(np.round(np.linspace(0.02, 0.4, 39), 10))
    return typedist.delta_curve(etas, spec.get("n_rule", "inverse"), int(spec.get("n", 10)))


def delta_csv(cfg: ExperimentConfig) -> str:
    rows = [[_fmt(float(r[c])) if c != "n" else str(r[c]) for c in DELTA_COLUMNS]
            for r in delta_rows(cfg)]
    return write_csv(header_lines(cfg, "delta-curve"), DELTA_COLUMNS, rows)


# ---------------------------------------------------------------------- plan

PLAN_COLUMNS = ["kind", "regime", "k", "n", "b", "expected_samples", "dual_bound", "constraints_ok"]


def plan_table(cfg: ExperimentConfig, B: float, eps: float, eta, compare: bool) -> list[dict]:
    profile = cfg.profile
    estimate = None
    if eta == "auto":
        state = cfg.build_state(streams.stream(cfg.seed, 0, streams.INSTANCE))
        r = int(cfg.protocol.get("r", 50))
        estimate = pipeline.estimate_eta(state, r, pipeline.eta_cutoff(r, B, eps),
                                         streams.stream(cfg.seed, 0))
        eta = estimate
    plans = [planner.plan_parameters(B, eps, eta, profile)]
    eta_value = 0.0 if estimate is not None and estimate.truncated else (
        estimate.eta_hat if estimate is not None else float(eta))
    if compare:
        plans += [planner.plan_single_copy(B, eps, eta_value, profile),
                  planner.plan_no_average(B, eps, eta_value, profile)]
    out = []
    for p in plans:
        rep = planner.check_constraints(p, B, eps, eta_value)
        out.append({"kind": p.kind, "regime": p.regime, "k": p.k, "n": p.n, "b": p.b,
                    "expected_samples": p.expected_samples, "dual_bound": rep.dual_bound,
                    "constraints_ok": rep.ok})
    return out


# --------------------------------------------------------------------- bench

def bench() -> list[dict]:
    """Wall-clock timings of the heavier kernels (not deterministic)."""
    rng = np.random.default_rng(0)
    state = states.planted_instance(3, 0.2)
    jobs = {
        "sym_projector_d3_n6": lambda: tensor._sym_projector_cached.__wrapped__(3, 6),
        "moments_types_d3_n12": lambda: measurement.type_moments(state, 12),
        "moments_brute_d3_n5": lambda: measurement.m_k_exact(state, 5, 2, "brute"),
        "sample_conditional_1e5_n10": lambda: measurement.sample_conditional(state, 10, 10**5, rng),
        "mp_map_d3_n4_k2": lambda: measurement.mp_map(
            tensor.kron_power(state.matrix, 4), 4, 2, 3, "chiribella"),
    }
    out = []
    for name, job in jobs.items():
        start = time.perf_counter()
        job()
        out.append({"name": name, "seconds": time.perf_counter() - start})
    return out
