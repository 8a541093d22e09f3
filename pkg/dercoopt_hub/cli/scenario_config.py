"""
Scenario configuration: a single JSON document (schema_version 1) with
the tariff, devices, battery, renewable model and experiment settings.
All energies in kWh, rates in currency/kWh, times as interval indices.
"""

import copy
import json
from typing import Any, Dict, List, Optional, Sequence, Union
from dercoopt_hub.baselines.markov import MarkovRenewable
from dercoopt_hub.baselines.mpc import Forecaster, MeanProfileForecaster
from dercoopt_hub.core.demand import DeviceFleet
from dercoopt_hub.core.exceptions import ConfigError, DerCooptError
from dercoopt_hub.core.storage import A1Report, BatterySpec, check_a1, check_a2_sufficient
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule, validate_no_arbitrage
from dercoopt_hub.scenario.renewables import RenewableModel, default_solar_profile
from dercoopt_hub.scenario.runner import POLICIES, ExperimentInputs, PolicyOptions

SCHEMA_VERSION = 1


class ScenarioConfig:
    """Validated scenario; `to_dict` echoes a normalized document that loads back identically"""

    def __init__(self, schedule: TariffSchedule, fleets: List[DeviceFleet], battery: BatterySpec,
                 initial_soc: float, renewable: RenewableModel, n_paths: int = 100, seed: int = 0,
                 algorithms: Sequence[str] = ("mco",), mpc_window: int = 4,
                 forecast_ahead: bool = False, peak_window: Sequence[int] = (),
                 consumer_has_dg: bool = False, soc_step: float = 0.01, action_step: float = 0.01,
                 dp_levels: int = 5, dp_inner: str = "grid",
                 sweep: Optional[Dict[str, List[Any]]] = None, output_dir: str = "results",
                 histogram_bin: float = 0.1):
        self.schedule = schedule
        self.fleets = fleets
        self.battery = battery
        self.initial_soc = initial_soc
        self.renewable = renewable
        self.n_paths = n_paths
        self.seed = seed
        self.algorithms = list(algorithms)
        self.mpc_window = mpc_window
        self.forecast_ahead = forecast_ahead
        self.peak_window = tuple(peak_window)
        self.consumer_has_dg = consumer_has_dg
        self.soc_step = soc_step
        self.action_step = action_step
        self.dp_levels = dp_levels
        self.dp_inner = dp_inner
        self.sweep = sweep or {}
        self.output_dir = output_dir
        self.histogram_bin = histogram_bin
        self._validate()

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def _validate(self):
        if self.horizon == 0:
            raise ConfigError("tariff schedule is empty")
        if len(self.fleets) != self.horizon:
            raise ConfigError(f"{len(self.fleets)} fleets for horizon {self.horizon}")
        report = validate_no_arbitrage(self.schedule)
        if not report.ok:
            raise ConfigError(
                f"тариф допускает арбитраж: max π⁻={report.max_export_rate} "
                f">= min π⁺={report.min_retail_rate}")
        if not self.battery.min_soc <= self.initial_soc <= self.battery.capacity:
            raise ConfigError(f"initial_soc {self.initial_soc} outside "
                              f"[{self.battery.min_soc}, {self.battery.capacity}]")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if self.mpc_window < 1:
            raise ConfigError("mpc_window must be at least 1")
        unknown = [a for a in self.algorithms if a not in POLICIES]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}, expected a subset of {POLICIES}")
        if any(not 0 <= t < self.horizon for t in self.peak_window):
            raise ConfigError("peak_window has intervals outside the horizon")
        if self.renewable.kind == "profile" and self.renewable.mean.size < self.horizon:
            raise ConfigError("renewable profile is shorter than the horizon")
        if self.soc_step <= 0 or self.action_step <= 0 or self.histogram_bin <= 0:
            raise ConfigError("grid resolutions and histogram bin must be positive")

    def a1_report(self) -> A1Report:
        return check_a1(self.battery, self.schedule)

    def a2_holds(self) -> bool:
        return check_a2_sufficient(self.battery, self.initial_soc, self.horizon)

    def experiment_inputs(self, battery: Optional[BatterySpec] = None) -> ExperimentInputs:
        return ExperimentInputs(self.schedule, self.fleets, battery or self.battery,
                                self.initial_soc)

    def forecaster(self, renewable: Optional[RenewableModel] = None) -> Forecaster:
        """Markov conditional mean, or the mean profile for independent intervals"""
        renewable = renewable or self.renewable
        if renewable.kind == "markov":
            return renewable.markov
        return MeanProfileForecaster(renewable.mean, renewable.mean_scale)

    def policy_options(self, renewable: Optional[RenewableModel] = None,
                       dp_solution=None) -> PolicyOptions:
        return PolicyOptions(
            window=self.mpc_window,
            forecast_ahead=self.forecast_ahead,
            forecaster=self.forecaster(renewable),
            dp_solution=dp_solution,
            peak_window=self.peak_window,
            consumer_has_dg=self.consumer_has_dg,
        )

    def with_overrides(self, **overrides: Any) -> "ScenarioConfig":
        """Copy with CLI overrides applied (None values are ignored)"""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("n_paths", "seed", "algorithms", "mpc_window"):
                data["simulation"][key] = value
            elif key == "output_dir":
                data["output_dir"] = value
            else:
                raise ConfigError(f"unknown override '{key}'")
        return ScenarioConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        battery = self.battery.to_dict()
        battery["initial_soc"] = self.initial_soc
        return {
            "schema_version": SCHEMA_VERSION,
            "tariff": self.schedule.to_list(),
            "fleets": [fleet.to_list() for fleet in self.fleets],
            "battery": battery,
            "renewable": self.renewable.to_dict(),
            "simulation": {
                "n_paths": self.n_paths,
                "seed": self.seed,
                "algorithms": list(self.algorithms),
                "mpc_window": self.mpc_window,
                "forecast_ahead": self.forecast_ahead,
                "peak_window": list(self.peak_window),
                "consumer_has_dg": self.consumer_has_dg,
                "histogram_bin": self.histogram_bin,
            },
            "dp": {
                "soc_step": self.soc_step,
                "action_step": self.action_step,
                "levels": self.dp_levels,
                "inner": self.dp_inner,
            },
            "sweep": copy.deepcopy(self.sweep),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        try:
            schedule = _parse_tariff(data)
            horizon = schedule.horizon
            fleets = _parse_fleets(data, horizon)
            battery_data = _require(data, "battery")
            battery = BatterySpec.from_dict(battery_data)
            initial_soc = float(battery_data.get("initial_soc",
                                                 0.5 * (battery.min_soc + battery.capacity)))
            renewable = _parse_renewable(data.get("renewable", {}), horizon)
            simulation = data.get("simulation", {})
            dp = data.get("dp", {})
            return cls(
                schedule=schedule,
                fleets=fleets,
                battery=battery,
                initial_soc=initial_soc,
                renewable=renewable,
                n_paths=int(simulation.get("n_paths", 100)),
                seed=int(simulation.get("seed", 0)),
                algorithms=simulation.get("algorithms", ["mco"]),
                mpc_window=int(simulation.get("mpc_window", 4)),
                forecast_ahead=bool(simulation.get("forecast_ahead", False)),
                peak_window=[int(t) for t in simulation.get("peak_window", [])],
                consumer_has_dg=bool(simulation.get("consumer_has_dg", False)),
                histogram_bin=float(simulation.get("histogram_bin", 0.1)),
                soc_step=float(dp.get("soc_step", 0.01)),
                action_step=float(dp.get("action_step", 0.01)),
                dp_levels=int(dp.get("levels", 5)),
                dp_inner=dp.get("inner", "grid"),
                sweep=data.get("sweep"),
                output_dir=data.get("output_dir", "results"),
            )
        except ConfigError:
            raise
        except DerCooptError as e:
            raise ConfigError(str(e))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid value: {e}")

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"файл конфигурации не найден: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"некорректный JSON в {path}: {e}")
        return cls.from_dict(data)


def _require(data: Dict[str, Any], key: str) -> Any:
    if key not in data:
        raise ConfigError(f"missing section '{key}'")
    return data[key]


def _parse_tariff(data: Dict[str, Any]) -> TariffSchedule:
    """List of intervals, or one interval repeated `horizon` times"""
    tariff: Union[List, Dict] = _require(data, "tariff")
    if isinstance(tariff, dict):
        horizon = data.get("horizon")
        if horizon is None:
            raise ConfigError("a single tariff interval needs 'horizon'")
        return TariffSchedule([TariffInterval.from_dict(tariff)] * int(horizon))
    schedule = TariffSchedule.from_list(tariff)
    if "horizon" in data and int(data["horizon"]) != schedule.horizon:
        raise ConfigError(f"horizon {data['horizon']} does not match "
                          f"{schedule.horizon} tariff intervals")
    return schedule


def _parse_fleets(data: Dict[str, Any], horizon: int) -> List[DeviceFleet]:
    """'devices' broadcast to every interval, or 'fleets' given per interval"""
    if "fleets" in data:
        fleets = [DeviceFleet.from_list(item) for item in data["fleets"]]
        if len(fleets) != horizon:
            raise ConfigError(f"{len(fleets)} fleets for horizon {horizon}")
        return fleets
    fleet = DeviceFleet.from_list(data.get("devices", []))
    return [fleet] * horizon


def _parse_renewable(data: Dict[str, Any], horizon: int) -> RenewableModel:
    data = dict(data)
    kind = data.get("kind", "profile")
    if kind == "markov":
        return RenewableModel("markov", markov=MarkovRenewable.from_dict(_require(data, "markov")))
    if "solar" in data:
        solar = data.pop("solar")
        mean, std = default_solar_profile(horizon, float(solar.get("peak", 1.0)),
                                          float(solar.get("cv", 0.3)))
        data["mean"], data["std"] = mean.tolist(), std.tolist()
    if "mean" not in data:
        data["mean"] = [0.0] * horizon
    return RenewableModel.from_dict(data)
