"""End-to-end experiment runner: rate sweeps, risk estimation, KME coverage.

Every row of a rate sweep is a pure function of (config, base seed, N,
replicate), so rows can run on any number of workers and the assembled
report is identical; the CSV is written in fixed (N, replicate) order with
floats at 17 significant digits.
"""

from __future__ import annotations

import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .base_kernels import BaseKernel, sup_norm
from .bounds import OracleTerms, Schedule, make_schedule, oracle_rhs
from .errors import InputError
from .hilbert_kernel import HilbertKernel, lipschitz_modulus
from .kme import SampleSet, concentration_bound, embed, exact_gaussian_embedding, rkhs_distance
from .rng import normals, stream, subseed
from .svm import SvmModel, build_gram, decision_values, train
from .synth import MetaDistribution, bayes_risk, sample_first_stage, sample_second_stage

__all__ = [
    "ExperimentConfig",
    "RateRow",
    "RateReport",
    "estimate_risks",
    "run_rate_experiment",
    "run_kme_coverage",
    "rate_report_csv",
]

CSV_COLUMNS = (
    "N",
    "M_N",
    "lambda_N",
    "gamma_N",
    "replicate",
    "seed",
    "emp_risk_01",
    "emp_risk_hinge_clipped",
    "bayes_risk",
    "excess_01",
    "excess_hinge",
    "oracle_rhs_value",
    "oracle_violated",
    "wall_seconds",
)


@dataclass(frozen=True)
class ExperimentConfig:
    meta: MetaDistribution
    base_kernel: BaseKernel
    hkernel: HilbertKernel
    schedule_kind: str
    alpha: float
    n_grid: tuple
    replicates: int
    test_bags: int
    seed: int
    beta: float | None = None
    mu: float | None = None
    test_embedding: object = "exact"  # "exact" or an integer bag size
    train_embedding: str = "empirical"  # "empirical" (bags of size M_N) or "exact"
    universal_c: float = 100.0
    tau: float = 1.0
    approx_error_model: dict = field(default_factory=lambda: {"model": "zero"})
    bayes_mc: int = 100_000
    row_time_cap_s: float = 300.0

    def __post_init__(self):
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if self.test_bags < 1:
            raise InputError("test_bags must be >= 1")
        if self.train_embedding not in ("empirical", "exact"):
            raise InputError(f"train_embedding must be 'empirical' or 'exact', got {self.train_embedding!r}")
        if not (self.test_embedding == "exact" or int(self.test_embedding) >= 1):
            raise InputError("test_embedding must be 'exact' or a bag size >= 1")
        _eval_approx_model(self.approx_error_model, 0.5)  # validates the shape

    def schedule(self) -> Schedule:
        return make_schedule(self.schedule_kind, self.n_grid, self.alpha, beta=self.beta, mu=self.mu)

    def to_json(self) -> dict:
        return {
            "meta": self.meta.to_config(),
            "base_kernel": self.base_kernel.to_config(),
            "hilbert_kernel": self.hkernel.to_config(),
            "schedule": {
                "kind": self.schedule_kind,
                "alpha": self.alpha,
                **({"beta": self.beta} if self.beta is not None else {}),
                **({"mu": self.mu} if self.mu is not None else {}),
            },
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "test_bags": self.test_bags,
            "test_embedding": self.test_embedding,
            "train_embedding": self.train_embedding,
            "seed": self.seed,
            "universal_c": self.universal_c,
            "tau": self.tau,
            "approx_error": dict(self.approx_error_model),
            "bayes_mc": self.bayes_mc,
            "row_time_cap_s": self.row_time_cap_s,
        }

    @classmethod
    def from_json(cls, cfg: dict) -> "ExperimentConfig":
        try:
            sched = cfg["schedule"]
            return cls(
                meta=MetaDistribution.from_config(cfg["meta"]),
                base_kernel=BaseKernel.from_config(cfg["base_kernel"]),
                hkernel=HilbertKernel.from_config(cfg["hilbert_kernel"]),
                schedule_kind=sched["kind"],
                alpha=float(sched["alpha"]),
                beta=float(sched["beta"]) if "beta" in sched else None,
                mu=float(sched["mu"]) if "mu" in sched else None,
                n_grid=tuple(int(n) for n in cfg["n_grid"]),
                replicates=int(cfg["replicates"]),
                test_bags=int(cfg["test_bags"]),
                test_embedding=cfg.get("test_embedding", "exact"),
                train_embedding=cfg.get("train_embedding", "empirical"),
                seed=int(cfg["seed"]),
                universal_c=float(cfg.get("universal_c", 100.0)),
                tau=float(cfg.get("tau", 1.0)),
                approx_error_model=dict(cfg.get("approx_error", {"model": "zero"})),
                bayes_mc=int(cfg.get("bayes_mc", 100_000)),
                row_time_cap_s=float(cfg.get("row_time_cap_s", 300.0)),
            )
        except KeyError as exc:
            raise InputError(f"experiment config missing field {exc}") from exc


def _eval_approx_model(model: dict, lam: float) -> float:
    kind = model.get("model", "zero")
    if kind == "zero":
        return 0.0
    if kind == "constant":
        return float(model["value"])
    if kind == "power":
        return float(model["c"]) * lam ** float(model["beta"])
    raise InputError(f"unknown approx-error model {kind!r}")


def _test_embeddings(cfg: ExperimentConfig, means, seed_r: int, n: int):
    if cfg.test_embedding == "exact":
        return [exact_gaussian_embedding(cfg.base_kernel, m, cfg.meta.bag_spread) for m in means]
    m_test = int(cfg.test_embedding)
    return [
        embed(cfg.base_kernel, sample_second_stage((mean, cfg.meta.bag_spread), m_test, subseed(seed_r, "test-bag", n, i)))
        for i, mean in enumerate(means)
    ]


def estimate_risks(model: SvmModel, meta: MetaDistribution, t: int, test_m_or_exact, seed: int, bayes_mc: int = 100_000):
    """(0-1 risk, clipped hinge risk, 0-1 Bayes risk) on t fresh meta draws."""
    if t < 1:
        raise InputError("number of test draws must be >= 1")
    base = model.support[0].kernel
    means, labels = sample_first_stage(meta, t, subseed(seed, "risk-test"))
    if test_m_or_exact == "exact":
        embs = [exact_gaussian_embedding(base, m, meta.bag_spread) for m in means]
    else:
        m_test = int(test_m_or_exact)
        embs = [
            embed(base, sample_second_stage((mean, meta.bag_spread), m_test, subseed(seed, "risk-bag", i)))
            for i, mean in enumerate(means)
        ]
    vals = decision_values(model, embs)
    risk01, hinge_clipped, _, _ = _risks_from_decisions(vals, labels, model.clip_bound)
    bayes01, _ = bayes_risk(meta, bayes_mc, subseed(seed, "risk-bayes"))
    return risk01, hinge_clipped, bayes01


def _risks_from_decisions(vals: np.ndarray, labels: np.ndarray, clip_bound: float):
    t = labels.shape[0]
    preds = np.where(vals >= 0.0, 1.0, -1.0)
    errs = preds != labels
    risk01 = float(errs.mean())
    se01 = math.sqrt(risk01 * (1.0 - risk01) / t)
    clipped = np.clip(vals, -clip_bound, clip_bound)
    hinge_vals = np.maximum(0.0, 1.0 - labels * clipped)
    hinge = float(hinge_vals.mean())
    hinge_se = float(hinge_vals.std(ddof=1) / math.sqrt(t)) if t > 1 else 0.0
    return risk01, hinge, se01, hinge_se


@dataclass(frozen=True)
class RateRow:
    n: int
    m_n: int
    lambda_n: float
    gamma_n: float
    replicate: int
    seed: int
    emp_risk_01: float = math.nan
    emp_risk_hinge_clipped: float = math.nan
    bayes_risk: float = math.nan
    excess_01: float = math.nan
    excess_hinge: float = math.nan
    oracle_rhs_value: float = math.nan
    oracle_violated: bool = False
    wall_seconds: float = math.nan
    se_01: float = math.nan
    se_hinge: float = math.nan
    error: str = ""


@dataclass(frozen=True)
class RateReport:
    rows: tuple
    n_grid: tuple
    medians_excess_01: tuple
    median_ses: tuple
    slope: float
    slope_floor: float
    violation_rate: float
    bayes01: float
    failures: tuple

    def summary_json(self, cfg: ExperimentConfig | None = None) -> dict:
        out = {
            "n_grid": list(self.n_grid),
            "medians_excess_01": list(self.medians_excess_01),
            "median_ses": list(self.median_ses),
            "slope": self.slope,
            "slope_floor": self.slope_floor,
            "violation_rate": self.violation_rate,
            "bayes_risk_01": self.bayes01,
            "failures": list(self.failures),
        }
        if cfg is not None:
            out["config"] = cfg.to_json()
        return out


class _RowTimeout(Exception):
    pass


def _compute_row(cfg: ExperimentConfig, n: int, m_n: int, lam_n: float, gamma_n: float, rep: int, bayes01: float) -> RateRow:
    seed_r = cfg.seed + 10**6 * rep
    start = time.perf_counter()

    def checkpoint():
        if time.perf_counter() - start > cfg.row_time_cap_s:
            raise _RowTimeout(f"row exceeded {cfg.row_time_cap_s}s")

    base = dict(n=n, m_n=m_n, lambda_n=lam_n, gamma_n=gamma_n, replicate=rep, seed=seed_r)
    try:
        means, labels = sample_first_stage(cfg.meta, n, subseed(seed_r, "first", n))
        if cfg.train_embedding == "exact" or cfg.meta.bag_spread == 0.0:
            embs = [exact_gaussian_embedding(cfg.base_kernel, m, cfg.meta.bag_spread) for m in means]
        else:
            embs = [
                embed(
                    cfg.base_kernel,
                    sample_second_stage((mean, cfg.meta.bag_spread), m_n, subseed(seed_r, "bag", n, i)),
                )
                for i, mean in enumerate(means)
            ]
        checkpoint()
        hk = cfg.hkernel if gamma_n is None else cfg.hkernel.with_width(gamma_n)
        gram = build_gram(hk, embs)
        model = train(gram, labels, lam_n, support=embs, hkernel=hk)
        checkpoint()
        test_means, test_labels = sample_first_stage(cfg.meta, cfg.test_bags, subseed(seed_r, "test", n))
        test_embs = _test_embeddings(cfg, test_means, seed_r, n)
        vals = decision_values(model, test_embs)
        risk01, hinge_clipped, se01, se_hinge = _risks_from_decisions(vals, test_labels, model.clip_bound)
        checkpoint()

        approx = _eval_approx_model(cfg.approx_error_model, lam_n)
        terms = OracleTerms(
            n=n,
            lam=lam_n,
            tau=cfg.tau,
            bag_sizes=(m_n,) * n,
            modulus=lipschitz_modulus(hk),
            approx_error=approx,
            universal_c=cfg.universal_c,
            kernel_sup=sup_norm(cfg.base_kernel),
        )
        rhs = oracle_rhs(terms)
        bayes_hinge = 2.0 * bayes01  # pointwise Bayes hinge risk is 2 min(eta, 1-eta)
        lhs = hinge_clipped + lam_n * model.norm_sq - bayes_hinge
        wall = time.perf_counter() - start
        return RateRow(
            **base,
            emp_risk_01=risk01,
            emp_risk_hinge_clipped=hinge_clipped,
            bayes_risk=bayes01,
            excess_01=risk01 - bayes01,
            excess_hinge=hinge_clipped - bayes_hinge,
            oracle_rhs_value=rhs.total,
            oracle_violated=bool(lhs > rhs.total),
            wall_seconds=wall,
            se_01=se01,
            se_hinge=se_hinge,
        )
    except Exception as exc:  # failed rows are recorded, the sweep continues
        wall = time.perf_counter() - start
        return RateRow(**base, wall_seconds=wall, error=f"{type(exc).__name__}: {exc}")


def _worker_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("TSK_THREADS")
    return max(1, int(env)) if env else 1


def run_rate_experiment(cfg: ExperimentConfig, threads: int | None = None) -> RateReport:
    """Full two-stage sweep over (N, replicate) cells of the schedule."""
    sched = cfg.schedule()
    gammas = sched.gamma if sched.gamma is not None else tuple([cfg.hkernel.width] * len(sched.n_grid))
    bayes01, _ = bayes_risk(cfg.meta, cfg.bayes_mc, subseed(cfg.seed, "bayes"))
    cells = [
        (n, m, lam, gam, rep)
        for n, m, lam, gam in zip(sched.n_grid, sched.bag_sizes, sched.lam, gammas)
        for rep in range(cfg.replicates)
    ]
    workers = _worker_count(threads)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_compute_row, cfg, *cell, bayes01) for cell in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [_compute_row(cfg, *cell, bayes01) for cell in cells]
    rows.sort(key=lambda r: (r.n, r.replicate))

    ok_rows = [r for r in rows if not r.error]
    medians, ses = [], []
    floor = 1.0 / (2.0 * cfg.test_bags)
    for n in sched.n_grid:
        vals = np.array([r.excess_01 for r in ok_rows if r.n == n])
        row_ses = np.array([r.se_01 for r in ok_rows if r.n == n])
        if vals.size == 0:
            medians.append(math.nan)
            ses.append(math.nan)
            continue
        medians.append(float(np.median(vals)))
        spread = 1.2533 * vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0
        mc_floor = float(np.median(row_ses)) if row_ses.size else 0.0
        ses.append(float(math.hypot(spread, mc_floor)))
    slope = _loglog_slope(sched.n_grid, medians, floor)
    violations = [r.oracle_violated for r in ok_rows]
    return RateReport(
        rows=tuple(rows),
        n_grid=sched.n_grid,
        medians_excess_01=tuple(medians),
        median_ses=tuple(ses),
        slope=slope,
        slope_floor=floor,
        violation_rate=float(np.mean(violations)) if violations else math.nan,
        bayes01=bayes01,
        failures=tuple(f"N={r.n} rep={r.replicate}: {r.error}" for r in rows if r.error),
    )


def _loglog_slope(n_grid, medians, floor: float) -> float:
    xs, ys = [], []
    for n, med in zip(n_grid, medians):
        if not math.isnan(med):
            xs.append(math.log(n))
            ys.append(math.log(max(med, floor)))
    if len(xs) < 2:
        return math.nan
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.17g}"


def rate_report_csv(report: RateReport, timing: bool = False) -> str:
    """Fixed-column CSV; wall_seconds stays empty unless timing is requested,
    keeping the bytes a pure function of (config, seed)."""
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in report.rows:
        cells = [
            _fmt(r.n),
            _fmt(r.m_n),
            _fmt(r.lambda_n),
            _fmt(r.gamma_n),
            _fmt(r.replicate),
            _fmt(r.seed),
            _fmt(r.emp_risk_01),
            _fmt(r.emp_risk_hinge_clipped),
            _fmt(r.bayes_risk),
            _fmt(r.excess_01),
            _fmt(r.excess_hinge),
            _fmt(r.oracle_rhs_value),
            _fmt(r.oracle_violated),
            _fmt(r.wall_seconds) if timing else "",
        ]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def run_kme_coverage(params: dict, seed: int) -> dict:
    """Empirical violation rates of the embedding concentration bound.

    Bags come from N(mean, sigma^2 I); the exact embedding is the closed-form
    oracle, and a violation is rkhs_distance(empirical, exact) exceeding the
    bound at the requested confidence.
    """
    try:
        kernel = BaseKernel.from_config(params["base_kernel"])
        sigma = float(params["sigma"])
        mean = np.asarray(params.get("mean", [0.0] * kernel.dim), dtype=np.float64)
        bag_sizes = [int(m) for m in params["bag_sizes"]]
        deltas = [float(d) for d in params["deltas"]]
        trials = int(params["trials"])
    except KeyError as exc:
        raise InputError(f"coverage config missing field {exc}") from exc
    if trials < 1:
        raise InputError("trials must be >= 1")
    exact = exact_gaussian_embedding(kernel, mean, sigma)
    results = []
    for m in bag_sizes:
        dists = np.empty(trials)
        for r in range(trials):
            gen = stream(seed, "coverage", m, r)
            pts = mean + sigma * normals(gen, (m, kernel.dim))
            emp = embed(kernel, SampleSet(pts))
            dists[r] = rkhs_distance(emp, exact)
        for delta in deltas:
            bound = concentration_bound(m, delta, sup_norm(kernel))
            rate = float(np.mean(dists > bound))
            results.append(
                {
                    "bag_size": m,
                    "delta": delta,
                    "bound": bound,
                    "violation_rate": rate,
                    "trials": trials,
                    "pass": rate < delta,
                }
            )
    return {"results": results, "seed": seed}
