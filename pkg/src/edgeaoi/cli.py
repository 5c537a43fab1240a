"""Command-line harness: analyze, simulate, validate, sweep, drift.

Every command emits CSV data files plus a JSON run manifest capturing the
inputs (scenario hash, seeds, tool version) so runs can be reproduced.
Exit codes: 0 success, 1 usage error, 2 validation failure, 3 resource cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, fifo_analysis, gps_analysis, renewal_aoi
from .metrics import DistributionCurve, jain_index
from .policy_analysis import DEFAULT_STATE_CAP, PolicyAnalysis, StateSpaceCapError
from .scenario import (
    Policy,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_policy,
    validate,
)
from .simulator import (
    DEFAULT_WARMUP,
    SimulationConfig,
    SimulationReport,
    dkw_band,
    empirical_cdf,
    run,
)

FULL_PROTOCOL_PERIODS = 10_000_000
_CDF_METRICS = ("latency-cdf", "paoi-cdf")
_SCALAR_METRICS = ("aoi", "success")
_SWEEP_METRICS = ("aoi", "success", "latency-mean", "paoi-p95", "paoi-p99", "paoi-p99.9")


def analyze_policy(scenario: Scenario, policy: Policy,
                   cap: int = DEFAULT_STATE_CAP) -> PolicyAnalysis:
    if parse_policy(policy) is Policy.GPS:
        return gps_analysis.analyze(scenario, cap)
    return fifo_analysis.analyze(scenario, cap)


# ---------------------------------------------------------------------------
# manifests and file output

@dataclass
class RunManifest:
    command: str
    arguments: dict
    scenario_sha256: str
    seeds: list
    version: str
    duration_seconds: float
    outputs: list

    def write(self, path: Path) -> None:
        _atomic_write(path, json.dumps(dataclasses.asdict(self), indent=2) + "\n")


def scenario_hash(scenario: Scenario) -> str:
    canonical = json.dumps(scenario.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def write_curve(path: Path, curve: DistributionCurve) -> None:
    write_csv(path, ("t", "probability"), zip(curve.x, curve.probability))


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


# ---------------------------------------------------------------------------
# validation engine (also used by the test suite)

@dataclass
class CheckResult:
    name: str
    passed: bool
    observed: float
    bound: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: observed={self.observed:.6g} bound={self.bound:.6g}"


def sup_distance_on_grid(curve: DistributionCurve, samples) -> float:
    """Largest gap between a reference curve and the empirical CDF of the
    samples, evaluated on the curve's grid."""
    data = np.sort(np.asarray(samples, dtype=float))
    empirical = np.searchsorted(data, curve.x, side="right") / data.size
    return float(np.max(np.abs(curve.probability - empirical)))


def _empirical_curve_check(curve: DistributionCurve, report: SimulationReport,
                           batch: int, metric: str) -> "tuple[float, int]":
    """Sup distance on the curve grid plus the sample count, working off raw
    samples when retained.  Runs large enough to fall back to histograms are
    checked against the per-bin envelope instead: the distance is then a
    lower bound that is exact at bin edges and slack by at most one bin's
    probability mass in between."""
    if report.raw_samples:
        samples = (report.latency_samples(batch=batch) if metric == "latency"
                   else report.paoi_samples(batch=batch))
        return sup_distance_on_grid(curve, samples), samples.size
    clients = list(report.config.scenario.batch_clients(batch))
    hist = (report.latency_hist if metric == "latency" else report.paoi_hist)
    edges = (report.latency_bin_edges if metric == "latency"
             else report.paoi_bin_edges)
    counts = hist[clients].sum(axis=0)
    total = int(counts.sum())
    cumulative = np.concatenate([[0.0], np.cumsum(counts) / max(total, 1)])
    pos = np.clip(np.searchsorted(edges, curve.x, side="right") - 1,
                  0, len(counts))
    lower = cumulative[pos]
    upper = cumulative[np.minimum(pos + 1, len(counts))]
    violation = np.maximum(curve.probability - upper, lower - curve.probability)
    return float(max(np.max(violation), 0.0)), total


def validate_run(scenario: Scenario, policy: Policy, periods: int,
                 confidence: float = 0.99, seed: int = 0, replications: int = 4,
                 warmup: int = DEFAULT_WARMUP, grid_points: int = 1000,
                 sim_scenario: Scenario = None) -> "tuple[bool, list[CheckResult]]":
    """Compare analytical curves and scalars against a fresh simulation.

    ``sim_scenario`` lets callers deliberately mismatch the simulated system
    (negative controls); by default both sides use the same scenario.

    Curve bands use one effective sample per period and batch, since frames
    of the same batch within a period share the server and are dependent.
    """
    scenario = validate(scenario)
    policy = parse_policy(policy)
    analysis = analyze_policy(scenario, policy)
    report = run(SimulationConfig(
        scenario=sim_scenario or scenario, policy=policy, periods=periods,
        warmup_periods=min(warmup, periods // 10), seed=seed,
        replications=replications,
    ))

    checks: list[CheckResult] = []
    for b in range(1, scenario.n_batches + 1):
        size = scenario.batch_sizes[b - 1]
        curve = analysis.latency_curve(b, points=grid_points)
        sup, count = _empirical_curve_check(curve, report, b, "latency")
        band = dkw_band(max(1, int(round(count / size))), confidence)
        checks.append(CheckResult(f"latency CDF batch {b}", sup <= band, sup, band))

        pcurve = analysis.paoi_curve(b, points_per_period=grid_points)
        sup, count = _empirical_curve_check(pcurve, report, b, "peak-age")
        band = dkw_band(max(1, int(round(count / size))), confidence)
        checks.append(CheckResult(f"peak-age CDF batch {b}", sup <= band, sup, band))

        theory = analysis.sigma_batch[b - 1]
        rates = report.rep_success_rates_of_batch(b)
        se = _scalar_se(rates, binom=np.sqrt(theory * (1 - theory)
                                             / (report.attempts_per_client * size
                                                * replications)))
        bound = max(3 * se, 0.01 * theory)
        diff = abs(theory - rates.mean())
        checks.append(CheckResult(
            f"success probability batch {b}", diff <= bound, diff, bound))

        aoi_theory = renewal_aoi.expected_aoi(analysis, b)
        aois = report.rep_aoi_means_of_batch(b)
        se = _scalar_se(aois, binom=0.0)
        bound = max(3 * se, 0.01 * aoi_theory)
        diff = abs(aoi_theory - aois.mean())
        checks.append(CheckResult(
            f"expected age batch {b}", diff <= bound, diff, bound))

    return all(c.passed for c in checks), checks


def _scalar_se(values: np.ndarray, binom: float) -> float:
    if values.size >= 4:
        return float(max(values.std(ddof=1) / np.sqrt(values.size), 1e-12))
    return float(max(values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0,
                     binom, 1e-12))


# ---------------------------------------------------------------------------
# subcommands

def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    policy = parse_policy(args.policy)
    out = Path(args.out)
    with _Timer() as timer:
        analysis = analyze_policy(scenario, policy, args.cap)
        if args.debug:
            # the fixed enumeration order keys every matrix index
            for i, state in enumerate(analysis.states):
                print(f"state {i}: {state}", file=sys.stderr)
        if args.metric in _CDF_METRICS:
            if args.batch == "all":
                raise ScenarioError("CDF metrics need a single --batch")
            batch = int(args.batch)
            if args.metric == "latency-cdf":
                curve = analysis.latency_curve(batch, points=args.grid)
            else:
                curve = analysis.paoi_curve(batch, points_per_period=args.grid)
            write_curve(out, curve)
        else:
            batches = (range(1, scenario.n_batches + 1)
                       if args.batch == "all" else [int(args.batch)])
            rows = []
            for b in batches:
                if args.metric == "success":
                    rows.append((b, analysis.sigma_batch[b - 1]))
                else:
                    rows.append((b, renewal_aoi.expected_aoi(analysis, b)))
            write_csv(out, ("batch", "value"), rows)
    RunManifest("analyze", _arg_dict(args), scenario_hash(scenario), [],
                __version__, timer.seconds, [str(out)]).write(
                    out.with_name(out.name + ".manifest.json"))
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    policy = parse_policy(args.policy)
    periods = FULL_PROTOCOL_PERIODS if args.full_protocol else args.periods
    out_dir = Path(args.out)
    with _Timer() as timer:
        report = run(SimulationConfig(
            scenario=scenario, policy=policy, periods=periods,
            warmup_periods=min(args.warmup, periods // 10),
            seed=args.seed, replications=args.replications,
        ))
        outputs = _write_simulation_outputs(out_dir, scenario, report, args.grid)
    RunManifest("simulate", _arg_dict(args), scenario_hash(scenario),
                list(report.seeds), __version__, timer.seconds,
                outputs).write(out_dir / "manifest.json")
    return 0


def _write_simulation_outputs(out_dir: Path, scenario: Scenario,
                              report: SimulationReport, grid: int) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    lat_rows, paoi_rows = [], []
    for b in range(1, scenario.n_batches + 1):
        if report.raw_samples:
            lat = empirical_cdf(report.latency_samples(batch=b))
            pa = empirical_cdf(report.paoi_samples(batch=b))
            lat_grid = np.linspace(0.0, scenario.period, grid + 1)
            lat_rows.extend((b, t, p) for t, p in zip(lat_grid, lat.evaluate(lat_grid)))
            hi = float(pa.x[-1])
            pa_grid = np.linspace(0.0, hi, grid + 1)
            paoi_rows.extend((b, t, p) for t, p in zip(pa_grid, pa.evaluate(pa_grid)))
        else:
            clients = list(scenario.batch_clients(b))
            for rows, hist, edges in (
                (lat_rows, report.latency_hist, report.latency_bin_edges),
                (paoi_rows, report.paoi_hist, report.paoi_bin_edges),
            ):
                counts = hist[clients].sum(axis=0)
                total = counts.sum()
                cum = np.cumsum(counts) / max(total, 1)
                step = max(1, len(cum) // grid)
                picks = list(range(0, len(cum), step))
                if picks[-1] != len(cum) - 1:
                    picks.append(len(cum) - 1)
                rows.extend((b, edges[k + 1], cum[k]) for k in picks)
    for name, rows in (("latency_cdf.csv", lat_rows), ("paoi_cdf.csv", paoi_rows)):
        path = out_dir / name
        write_csv(path, ("batch", "t", "probability"), rows)
        outputs.append(str(path))

    scalar_rows = []
    for b in range(1, scenario.n_batches + 1):
        scalar_rows.append((b, "success_rate", report.success_rate_of_batch(b)))
        scalar_rows.append((b, "aoi_mean", report.aoi_mean_of_batch(b)))
    path = out_dir / "scalars.csv"
    write_csv(path, ("batch", "metric", "value"), scalar_rows)
    outputs.append(str(path))

    batch_ids = scenario.batch_of_clients()
    path = out_dir / "clients.csv"
    write_csv(path, ("client", "batch", "success_rate", "aoi_mean"),
              ((i, batch_ids[i], report.success_rate[i], report.aoi_mean[i])
               for i in range(scenario.n_clients)))
    outputs.append(str(path))
    return outputs


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    policy = parse_policy(args.policy)
    periods = FULL_PROTOCOL_PERIODS if args.full_protocol else args.periods
    with _Timer() as timer:
        ok, checks = validate_run(
            scenario, policy, periods, confidence=args.confidence,
            seed=args.seed, replications=args.replications, warmup=args.warmup,
        )
    lines = [c.line() for c in checks]
    lines.append(f"{'ALL CHECKS PASSED' if ok else 'VALIDATION FAILED'} "
                 f"({sum(c.passed for c in checks)}/{len(checks)})")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    outputs = []
    if args.out:
        _atomic_write(Path(args.out), text)
        outputs.append(args.out)
        RunManifest("validate", _arg_dict(args), scenario_hash(scenario),
                    [args.seed], __version__, timer.seconds, outputs).write(
                        Path(args.out).with_name(Path(args.out).name + ".manifest.json"))
    return 0 if ok else 2


def _sweep_scenario(base: Scenario, parameter: str, value: float) -> Scenario:
    if parameter == "mu":
        return validate({**base.to_dict(), "service_rate": value})
    if parameter == "tau":
        scale = value / base.period
        record = base.to_dict()
        record["period"] = value
        record["offsets_from_2"] = [g * scale for g in base.offsets[1:]]
        return validate(record)
    if parameter == "N":
        n = int(round(value))
        B = base.n_batches
        if n % B:
            raise ScenarioError(f"client count {n} is not divisible by {B} batches")
        record = base.to_dict()
        record["n_clients"] = n
        record["batch_sizes"] = [n // B] * B
        return validate(record)
    raise ScenarioError(f"unknown sweep parameter {parameter!r}")


def _sweep_metric(analysis: PolicyAnalysis, metric: str) -> float:
    scenario = analysis.scenario
    if metric == "aoi":
        return renewal_aoi.aggregate_expected_aoi(analysis)
    if metric == "success":
        return float(np.dot(analysis.sigma_batch, scenario.batch_sizes)
                     / scenario.n_clients)
    if metric == "latency-mean":
        return float(np.dot([analysis.expected_latency(b)
                             for b in range(1, scenario.n_batches + 1)],
                            scenario.batch_sizes) / scenario.n_clients)
    if metric.startswith("paoi-p"):
        p = float(metric.removeprefix("paoi-p"))
        worst = max(analysis.paoi_percentile(b, p)
                    for b in range(1, scenario.n_batches + 1))
        return worst
    raise ScenarioError(f"unknown sweep metric {metric!r}")


def _sweep_point(base: Scenario, parameter: str, value: float,
                 policies, metrics, cap: int) -> list:
    scenario = _sweep_scenario(base, parameter, value)
    rows = []
    for policy_name in policies:
        analysis = analyze_policy(scenario, parse_policy(policy_name), cap)
        for metric in metrics:
            rows.append((value, policy_name, metric, _sweep_metric(analysis, metric)))
    return rows


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    if args.steps < 1 or args.stop < args.start:
        raise ScenarioError("sweep range needs start <= stop and steps >= 1")
    values = (np.linspace(args.start, args.stop, args.steps)
              if args.steps > 1 else np.array([args.start]))
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for metric in metrics:
        if metric not in _SWEEP_METRICS and not metric.startswith("paoi-p"):
            raise ScenarioError(f"unknown sweep metric {metric!r}")
    out = Path(args.out)
    with _Timer() as timer:
        rows = []
        if args.workers > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                futures = [pool.submit(_sweep_point, base, args.parameter, float(v),
                                       policies, metrics, args.cap)
                           for v in values]
                for fut in futures:
                    rows.extend(fut.result())
        else:
            for v in values:
                rows.extend(_sweep_point(base, args.parameter, float(v),
                                         policies, metrics, args.cap))
        write_csv(out, (args.parameter, "policy", "metric", "value"),
                  ((v, pol, met, res) for v, pol, met, res in rows))
    RunManifest("sweep", _arg_dict(args), scenario_hash(base), [],
                __version__, timer.seconds, [str(out)]).write(
                    out.with_name(out.name + ".manifest.json"))
    return 0


def drift_scenario(base: Scenario, xi: float, period: float = None) -> Scenario:
    """Shift the first client towards the previous one: the gap before batch 1
    shrinks to ``xi`` times the nominal spacing while batch 2's position is
    preserved."""
    if base.n_batches != base.n_clients:
        raise ScenarioError("drift study needs one client per batch")
    gaps = set(round(g / base.period, 12) for g in base.offsets)
    if len(gaps) != 1:
        raise ScenarioError("drift study starts from equal spacing")
    tau = base.period if period is None else period
    nu = tau / base.n_batches
    offsets_tail = [(2.0 - xi) * nu] + [nu] * (base.n_batches - 2)
    record = base.to_dict()
    record["period"] = tau
    record["offsets_from_2"] = offsets_tail
    return validate(record)


def optimize_drift_period(base: Scenario, policy: Policy, percentile: float,
                          tau_grid, cap: int = DEFAULT_STATE_CAP) -> float:
    """Period minimizing the aggregate peak-age percentile at full coherence."""
    best_tau, best_val = None, np.inf
    for tau in tau_grid:
        scenario = drift_scenario(base, 1.0, period=float(tau))
        analysis = analyze_policy(scenario, policy, cap)
        val = analysis.paoi_percentile(1, percentile)
        if val < best_val:
            best_tau, best_val = float(tau), val
    return best_tau


def cmd_drift(args) -> int:
    base = load_scenario(args.scenario)
    if args.xi_min < 0.01 or args.xi_max > 1.0 or args.xi_min > args.xi_max:
        raise ScenarioError("coherence range must satisfy 0.01 <= min <= max <= 1")
    xis = np.linspace(args.xi_min, args.xi_max, args.steps)
    tau_grid = np.linspace(args.tau_min, args.tau_max, args.tau_steps)
    out_dir = Path(args.out)
    with _Timer() as timer:
        psi_rows, jfi_rows = [], []
        for policy in (Policy.GPS, Policy.FIFO):
            tau_star = optimize_drift_period(base, policy, args.percentile,
                                             tau_grid, args.cap)
            for xi in xis:
                scenario = drift_scenario(base, float(xi), period=tau_star)
                analysis = analyze_policy(scenario, policy, args.cap)
                values = [analysis.paoi_percentile(b, args.percentile)
                          for b in range(1, scenario.n_batches + 1)]
                psi_rows.extend((float(xi), policy.value, b + 1, v)
                                for b, v in enumerate(values))
                jfi_rows.append((float(xi), policy.value, jain_index(values)))
        out_dir.mkdir(parents=True, exist_ok=True)
        psi_path = out_dir / "drift_psi.csv"
        write_csv(psi_path, ("xi", "policy", "client", "value"), psi_rows)
        jfi_path = out_dir / "drift_jfi.csv"
        write_csv(jfi_path, ("xi", "policy", "jfi"), jfi_rows)
    RunManifest("drift", _arg_dict(args), scenario_hash(base), [],
                __version__, timer.seconds,
                [str(psi_path), str(jfi_path)]).write(out_dir / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _arg_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgeaoi",
                     description="Timeliness analysis of a shared preemptive edge server.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out_required=True):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=out_required, default=None,
                       help="output path")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP,
                       help="state-space size cap")

    p = sub.add_parser("analyze", help="closed-form metrics to CSV")
    common(p, seed=False)
    p.add_argument("--policy", required=True, choices=["gps", "fifo"])
    p.add_argument("--metric", required=True, choices=list(_CDF_METRICS + _SCALAR_METRICS))
    p.add_argument("--batch", default="1", help="1-indexed batch or 'all'")
    p.add_argument("--grid", type=int, default=1000, help="grid points per period")
    p.add_argument("--debug", action="store_true",
                   help="dump the state enumeration order to stderr")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo run to CSV")
    common(p)
    p.add_argument("--policy", required=True, choices=["gps", "fifo"])
    p.add_argument("--periods", type=int, default=1_000_000)
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--full-protocol", action="store_true",
                   help="run the full 10^7-period protocol")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="check analysis against simulation")
    common(p, out_required=False)  # --out is an optional report file here
    p.add_argument("--policy", required=True, choices=["gps", "fifo"])
    p.add_argument("--periods", type=int, default=1_000_000)
    p.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    p.add_argument("--replications", type=int, default=4)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--full-protocol", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="metric values over a parameter range")
    common(p, seed=False)
    p.add_argument("--parameter", required=True, choices=["tau", "mu", "N"])
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--metrics", default="aoi",
                   help="comma list: aoi,success,latency-mean,paoi-pXX")
    p.add_argument("--policies", default="gps,fifo")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("drift", help="fairness under clock drift of client 1")
    common(p, seed=False)
    p.add_argument("--xi-min", type=float, default=0.01)
    p.add_argument("--xi-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--tau-min", type=float, default=0.25)
    p.add_argument("--tau-max", type=float, default=4.0)
    p.add_argument("--tau-steps", type=int, default=16)
    p.set_defaults(func=cmd_drift)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except StateSpaceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
