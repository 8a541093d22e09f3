import argparse
import itertools
import sys
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence
import numpy as np
import pandas as pd
from prettytable import PrettyTable
from dercoopt_hub.baselines.customers import customer_types
from dercoopt_hub.baselines.dp import DpSolution, solve_dp
from dercoopt_hub.cli.scenario_config import SCHEMA_VERSION, ScenarioConfig
from dercoopt_hub.core.exceptions import (
    ConfigError,
    DerCooptError,
    DomainError,
    NumericError,
    ResourceGuardError,
)
from dercoopt_hub.core.mco import Trajectory
from dercoopt_hub.core.policy import ThresholdSet, threshold_values, thresholds
from dercoopt_hub.core.storage import A1Case, BatterySpec, BatteryState, clip_limits
from dercoopt_hub.decorators import log_operation
from dercoopt_hub.infra.results_store import ResultsStore
from dercoopt_hub.logging_config import get_logger, set_run_context
from dercoopt_hub.scenario.metrics import (
    net_consumption_histogram,
    rpf_records,
    surplus_gain_table,
    utility_net_cost,
)
from dercoopt_hub.scenario.renewables import RenewableModel, quantize_to_markov, sample_paths
from dercoopt_hub.scenario.runner import POLICIES, ExperimentRunner, resolve_limit_level


logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4

THRESHOLD_COLUMNS = list(ThresholdSet._fields)

# How decide_relaxed_a1 acts in each A1 failure case
RELAXED_REGIMES = {
    A1Case.CASE_1A: "батарея всегда разряжается на ẽ, потребление по тарифу для g + ẽ",
    A1Case.CASE_1B: "батарея всегда заряжается на ē, потребление по тарифу для g - ē",
    A1Case.CASE_1C: "батарея не используется, потребление как без накопителя",
    A1Case.CASE_2: "заряд запрещён, разряд на g - σ⁺ᵒ при g < σ⁺ᵒ (полный ниже Δ⁺)",
    A1Case.CASE_3: "разряд запрещён, заряд на g - σ⁻ᵒ при g > σ⁻ᵒ (полный выше Δ⁻)",
}


def _summary(command: str, config: ScenarioConfig, metrics: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": config.seed,
        "config": config.to_dict(),
        "metrics": metrics,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _print_diagnostics(config: ScenarioConfig):
    report = config.a1_report()
    if report.ok:
        print("A1: ok")
    else:
        print(f"A1: нарушено (случай {report.case.value}): max π⁻={report.max_export_rate}, "
              f"τγ={report.charge_value}, γ/ρ={report.discharge_cost}, "
              f"min π⁺={report.min_retail_rate}")
    print(f"A2 (достаточное условие): {'ok' if config.a2_holds() else 'не выполнено'}")


def _paths(config: ScenarioConfig, renewable: Optional[RenewableModel] = None) -> np.ndarray:
    return sample_paths(renewable or config.renewable, config.horizon, config.n_paths,
                        config.seed)


def _dp_solution(config: ScenarioConfig, battery: BatterySpec,
                 renewable: RenewableModel) -> DpSolution:
    chain = quantize_to_markov(renewable, config.horizon, config.dp_levels)
    return solve_dp(config.schedule, config.fleets, battery, config.initial_soc, chain,
                    config.soc_step, config.action_step, config.dp_inner)


def _reward_stats(runs: Sequence[Trajectory]) -> Dict[str, float]:
    rewards = np.array([traj.cumulative_reward for traj in runs])
    return {"mean_reward": float(rewards.mean()), "std_reward": float(rewards.std()),
            "n_paths": len(runs)}


@log_operation()
def cmd_thresholds(config: ScenarioConfig, store: ResultsStore,
                   interval: Optional[int] = None) -> Dict[str, Any]:
    """
    Raw and SoC-clipped threshold sets per interval.

    When A1 fails the config is still valid: the values are the unchecked
    formulas and decisions follow the relaxed rule of the reported case.
    """
    if interval is not None and not 0 <= interval < config.horizon:
        raise DomainError(f"interval {interval} outside [0, {config.horizon})")
    clipped_limits = clip_limits(config.battery, BatteryState(config.initial_soc))
    intervals = [interval] if interval is not None else range(config.horizon)
    report = config.a1_report()
    compute = thresholds if report.ok else threshold_values
    if not report.ok:
        logger.warning("A1 violated, decisions follow the relaxed rule",
                       extra={"a1_case": report.case.value})
        print(f"Режим решений (случай {report.case.value}): {RELAXED_REGIMES[report.case]}")

    rows = []
    for t in intervals:
        fleet, tariff = config.fleets[t], config.schedule[t]
        for kind, limits in (("raw", config.battery.limits), ("clipped", clipped_limits)):
            ts = compute(fleet, tariff, config.battery, limits)
            rows.append({"t": t, "limits": kind, **ts._asdict()})

    table = PrettyTable()
    table.field_names = ["t", "limits"] + ["Δ⁺", "σ⁺", "σ⁺ᵒ", "σ⁻ᵒ", "σ⁻", "Δ⁻"]
    for row in rows:
        table.add_row([row["t"], row["limits"]]
                      + [f"{row[c]:.6g}" for c in THRESHOLD_COLUMNS])
    print(table)

    store.save_rows("thresholds.csv", rows, columns=["t", "limits"] + THRESHOLD_COLUMNS)
    return {"rows": len(rows), "a1_case": report.case.value}


@log_operation()
def cmd_simulate(config: ScenarioConfig, store: ResultsStore, policy: str, jobs: Optional[int],
                 emit_trajectories: bool = False) -> Dict[str, Any]:
    """Run one policy on n_paths renewable paths"""
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy '{policy}', expected one of {POLICIES}")
    paths = _paths(config)
    dp_solution = None
    if policy == "dp":
        dp_solution = _dp_solution(config, config.battery, config.renewable)

    runner = ExperimentRunner(config.experiment_inputs(), jobs)
    runs = runner.run_policy(policy, paths, config.policy_options(dp_solution=dp_solution))

    rows = [{"path": i, "cumulative_reward": traj.cumulative_reward,
             "terminal_salvage": traj.terminal_salvage, "final_soc": traj.final_soc}
            for i, traj in enumerate(runs)]
    store.save_rows("rewards.csv", rows)
    if emit_trajectories:
        for i, traj in enumerate(runs):
            store.save_rows(f"trajectories/{policy}_path_{i}.csv", traj.to_rows())

    metrics = {"policy": policy, **_reward_stats(runs)}
    if dp_solution is not None:
        metrics["dp_expected_value"] = dp_solution.expected_value(config.initial_soc)
        store.save_frame("dp_values.csv", dp_solution.to_frame())

    table = PrettyTable()
    table.field_names = ["Политика", "Траекторий", "Средний выигрыш", "Ст. отклонение"]
    table.add_row([policy, metrics["n_paths"], f"{metrics['mean_reward']:.6f}",
                   f"{metrics['std_reward']:.6f}"])
    print(table)
    return metrics


def _sweep_points(config: ScenarioConfig) -> List[Dict[str, Any]]:
    sweep = config.sweep
    limits = sweep.get("limits", [None])
    mean_scales = sweep.get("mean_scales", [config.renewable.mean_scale])
    std_scales = sweep.get("std_scales", [config.renewable.std_scale])
    if config.renewable.kind == "markov" and ("mean_scales" in sweep or "std_scales" in sweep):
        raise ConfigError("scale sweeps need a profile renewable")
    return [{"limit": level, "mean_scale": float(ms), "std_scale": float(ss)}
            for level, ms, ss in itertools.product(limits, mean_scales, std_scales)]


@log_operation()
def cmd_gap(config: ScenarioConfig, store: ResultsStore, jobs: Optional[int]) -> Dict[str, Any]:
    """Optimality gap of each selected algorithm against the perfect-foresight bound"""
    if len(config.algorithms) < 2:
        raise ConfigError("gap needs at least 2 algorithms in simulation.algorithms")

    path_rows, summary_rows = [], []
    for point in _sweep_points(config):
        battery = config.battery
        if point["limit"] is not None:
            level = resolve_limit_level(point["limit"], battery.capacity)
            battery = battery.with_limits(level, level)
        renewable = config.renewable.scaled(point["mean_scale"], point["std_scale"])
        paths = _paths(config, renewable)

        dp_solution = None
        if "dp" in config.algorithms:
            dp_solution = _dp_solution(config, battery, renewable)
        runner = ExperimentRunner(config.experiment_inputs(battery), jobs)
        options = config.policy_options(renewable, dp_solution)
        bounds, trajectories, reports = runner.gap_reports(config.algorithms, paths, options)

        axes = {"charge_limit": battery.charge_limit, "discharge_limit": battery.discharge_limit,
                "mean_scale": point["mean_scale"], "std_scale": point["std_scale"]}
        for algorithm, report in reports.items():
            for i, value in enumerate(report.gaps):
                path_rows.append({**axes, "algorithm": algorithm, "path": i,
                                  "reward": trajectories[algorithm][i].cumulative_reward,
                                  "bound": bounds[i], "gap": value})
            summary_rows.append({**axes, "algorithm": algorithm, "mean_gap": report.mean,
                                 "std_gap": report.std})

    store.save_rows("gap_report.csv", path_rows)
    store.save_rows("gap_summary.csv", summary_rows)

    table = PrettyTable()
    table.field_names = ["ē=ẽ", "μ×", "σ×", "Алгоритм", "Средний G, %", "Ст. откл. G"]
    for row in summary_rows:
        table.add_row([f"{row['charge_limit']:.4g}", row["mean_scale"], row["std_scale"],
                       row["algorithm"], f"{row['mean_gap']:.4f}", f"{row['std_gap']:.4f}"])
    print(table)
    return {"points": len(summary_rows) // len(config.algorithms),
            "gaps": [{k: row[k] for k in ("charge_limit", "mean_scale", "std_scale",
                                          "algorithm", "mean_gap")} for row in summary_rows]}


@log_operation()
def cmd_compare(config: ScenarioConfig, store: ResultsStore,
                jobs: Optional[int]) -> Dict[str, Any]:
    """All customer types on shared paths: surplus gains, z histogram, RPF and utility net cost"""
    kinds = [k for k in customer_types() if k != "solar_exporter" or config.peak_window]
    if "solar_exporter" not in kinds:
        logger.warning("solar_exporter skipped: peak_window is empty")
    paths = _paths(config)
    runner = ExperimentRunner(config.experiment_inputs(), jobs)
    options = config.policy_options()
    runs = {kind: runner.run_policy(kind, paths, options) for kind in kinds}

    rewards = {kind: [traj.cumulative_reward for traj in trajs] for kind, trajs in runs.items()}
    gains = surplus_gain_table(rewards, reference="consumer")
    store.save_rows("surplus_gains.csv",
                    [{"customer_type": kind, "gain_percent": gains[kind]} for kind in kinds],
                    columns=["customer_type", "gain_percent"])

    histograms, rpf, net_cost = [], [], []
    avoided = [interval.avoided_cost_rate for interval in config.schedule]
    for kind in kinds:
        hist = net_consumption_histogram(runs[kind], config.histogram_bin).to_frame()
        hist.insert(0, "customer_type", kind)
        histograms.append(hist)

        mean_export = rpf_records(runs[kind]).mean_by_interval
        mean_export.insert(0, "customer_type", kind)
        rpf.append(mean_export)

        if kind == "consumer":
            continue
        series = [utility_net_cost(with_der, baseline, avoided).to_frame()
                  for with_der, baseline in zip(runs[kind], runs["consumer"])]
        mean_series = pd.concat(series).groupby("t", as_index=False).mean()
        mean_series.insert(0, "customer_type", kind)
        net_cost.append(mean_series)

    store.save_frame("z_histogram.csv", pd.concat(histograms, ignore_index=True))
    store.save_frame("rpf.csv", pd.concat(rpf, ignore_index=True))
    if net_cost:
        store.save_frame("net_cost.csv", pd.concat(net_cost, ignore_index=True))

    table = PrettyTable()
    table.field_names = ["Тип клиента", "Прирост выигрыша, %", "Средний выигрыш"]
    for kind in kinds:
        table.add_row([kind, f"{gains[kind]:.2f}", f"{np.mean(rewards[kind]):.6f}"])
    print(table)
    return {"surplus_gains": gains,
            "mean_rewards": {kind: float(np.mean(values)) for kind, values in rewards.items()}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="DER co-optimization hub - demand and storage under net metering")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Scenario JSON file")
    common.add_argument("--seed", type=int, help="Override simulation.seed")
    common.add_argument("--jobs", type=int, help="Worker processes (default: from settings)")
    common.add_argument("--paths", type=int, help="Override simulation.n_paths")
    common.add_argument("--window", type=int, help="Override simulation.mpc_window")
    common.add_argument("--out", help="Output directory (default: config output_dir)")

    # Thresholds command
    thresholds_parser = subparsers.add_parser("thresholds", parents=[common],
                                              help="Print threshold sets per interval")
    thresholds_parser.add_argument("--t", type=int, dest="interval",
                                   help="Single interval index")

    # Simulate command
    simulate_parser = subparsers.add_parser("simulate", parents=[common],
                                            help="Simulate one policy on sampled paths")
    simulate_parser.add_argument("--policy", default="mco", help=f"One of {', '.join(POLICIES)}")
    simulate_parser.add_argument("--emit-trajectories", action="store_true",
                                 help="Write one CSV per path")

    # Gap command
    subparsers.add_parser("gap", parents=[common],
                          help="Optimality gaps against the perfect-foresight bound")

    # Compare command
    subparsers.add_parser("compare", parents=[common],
                          help="Compare customer types on shared paths")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch, and return the exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    set_run_context(args.command, args.config)
    try:
        config = ScenarioConfig.load(args.config).with_overrides(
            seed=args.seed, n_paths=args.paths, mpc_window=args.window, output_dir=args.out)
        set_run_context(args.command, args.config, config.seed)
        _print_diagnostics(config)
        store = ResultsStore(config.output_dir)

        if args.command == "thresholds":
            metrics = cmd_thresholds(config, store, args.interval)

        elif args.command == "simulate":
            metrics = cmd_simulate(config, store, args.policy, args.jobs, args.emit_trajectories)

        elif args.command == "gap":
            metrics = cmd_gap(config, store, args.jobs)

        elif args.command == "compare":
            metrics = cmd_compare(config, store, args.jobs)

        store.save_json(f"{args.command}_summary.json", _summary(args.command, config, metrics))

    except (ConfigError, DomainError) as e:
        print(f"Error: {str(e)}")
        return EXIT_CONFIG
    except ResourceGuardError as e:
        print(f"Error: {str(e)}")
        return EXIT_RESOURCE
    except NumericError as e:
        print(f"Error: {str(e)}")
        return EXIT_NUMERIC
    except DerCooptError as e:
        print(f"Error: {str(e)}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Unexpected error in CLI: {str(e)}")
        print(f"Unexpected error: {str(e)}")
        return 1
    return EXIT_OK


def main():
    """Main CLI entry point"""
    code = run()
    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
