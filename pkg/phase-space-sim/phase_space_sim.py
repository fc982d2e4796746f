#!/usr/bin/env python3
"""
Phase-Space Measurement Simulator CLI

Runs conditional (stochastic) and unconditional (master equation) evolution of a
driven quartic oscillator under continuous simultaneous position-momentum
measurement, plus the classical, Poincare and finite-strength POVM companions.
Every run writes tab-separated tables and a manifest into its output directory.
"""

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import COMMON_CONFIG, MODES, PRESET_ALIASES, PRESETS, SIMULATION_CONFIG  # noqa: E402

from classical_dynamics import (  # noqa: E402
    DivergenceError,
    DrivenHamiltonianParams,
    classify_seeds,
    integrate_classical,
    nearest_neighbor_spread,
    poincare_map,
)
from create_manifest import config_digest, write_manifest  # noqa: E402
from fock_core import (  # noqa: E402
    DensityMatrix,
    HbarS,
    HusimiGrid,
    SimulationError,
    build_ladder,
    coherent_state_at,
    husimi_q,
    trace_distance,
)
from integrators import step_count  # noqa: E402
from lindblad_oracle import LindbladGenerator, propagate  # noqa: E402
from povm_measure import MeasurementStrength, OutcomeSampler  # noqa: E402
from sse_integrator import (  # noqa: E402
    MeasurementRates,
    ensemble_moments,
    ensemble_projector_average,
    run_ensemble,
    trajectory_rng,
)

EXIT_CODES = COMMON_CONFIG["exit_codes"]

FIELD_TYPES = {
    "scenario": "str",
    "mode": "str",
    "output_dir": "str",
    "gamma": "opt_float",
    "Gamma1": "opt_float",
    "Gamma2": "opt_float",
    "snapshot_interval": "opt_float",
    "recenter_threshold": "opt_float",
    "seed": "opt_int",
    "N": "int",
    "ensemble": "int",
    "husimi_nx": "int",
    "husimi_np": "int",
    "workers": "int",
    "record_stride": "int",
    "trajectory_files": "int",
    "n_samples": "int",
    "n_strobes": "int",
    "poincare_seeds": "int",
    "classical_compare": "bool",
}

TRAJECTORY_COLUMNS = ["t", "mean_x", "mean_p", "Vx", "Vp", "Cxp", "total_variance", "norm_drift"]
RECORD_FILE_COLUMNS = ["t", "dX1", "dX2", "X1", "X2"]
MOMENT_COLUMNS = ["t", "mean_x", "mean_p", "Vx", "Vp", "Cxp", "total_variance"]


class ConfigError(Exception):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        if field is not None and line is None:
            prefix = f"{field}: "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    mode: str
    hbar: float
    s: float
    gamma: Optional[float]
    Gamma1: Optional[float]
    Gamma2: Optional[float]
    a: float
    b: float
    c: float
    d: float
    omega: float
    x0: float
    p0: float
    N: int
    dt: float
    t_final: float
    ensemble: int
    snapshot_interval: Optional[float]
    seed: Optional[int]
    recenter_threshold: Optional[float]
    record_stride: int
    output_dir: str
    trajectory_files: int
    husimi_x_min: float
    husimi_x_max: float
    husimi_p_min: float
    husimi_p_max: float
    husimi_nx: int
    husimi_np: int
    workers: int
    classical_compare: bool
    sigma: float
    n_samples: int
    strobe_period: float
    n_strobes: int
    poincare_seeds: int

    @property
    def hs(self) -> HbarS:
        return HbarS(self.hbar, self.s)

    @property
    def params(self) -> DrivenHamiltonianParams:
        return DrivenHamiltonianParams(self.a, self.b, self.c, self.d, self.omega)

    @property
    def grid(self) -> HusimiGrid:
        return HusimiGrid(
            self.husimi_x_min,
            self.husimi_x_max,
            self.husimi_p_min,
            self.husimi_p_max,
            self.husimi_nx,
            self.husimi_np,
        )

    @property
    def rates(self) -> MeasurementRates:
        """Measurement rates implied by mode, gamma, s and Gamma1/Gamma2."""
        if self.mode == "sse-position-only":
            return MeasurementRates.position_only(self.Gamma1)
        if self.mode == "sse-momentum-only":
            return MeasurementRates.momentum_only(self.Gamma2)
        if self.gamma is not None:
            return MeasurementRates.joint(self.gamma, self.s)
        return MeasurementRates(self.Gamma1, self.Gamma2)

    def as_text(self, include_output: bool = False) -> str:
        """Canonical key = value form; the output directory is excluded by default."""
        lines = []
        for key, value in asdict(self).items():
            if key == "output_dir" and not include_output:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, raw: str, line: Optional[int]) -> Any:
    kind = FIELD_TYPES.get(key, "float")
    text = raw.strip()
    if kind.startswith("opt_") and text.lower() in ("none", "null", ""):
        return None
    try:
        if kind == "str":
            if not text:
                raise ValueError("empty string")
            return text
        if kind == "bool":
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind in ("int", "opt_int"):
            return int(text)
        value = float(text)
        if not math.isfinite(value):
            raise ValueError(f"not finite: {text!r}")
        return value
    except ValueError as e:
        raise ConfigError(f"invalid value for '{key}': {e}", line=line, field=key)


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse flat `key = value` text with `#` comments into typed values."""
    values: Dict[str, Any] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", line=number)
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in SIMULATION_CONFIG:
            raise ConfigError(f"unknown key '{key}'", line=number, field=key)
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", line=number, field=key)
        values[key] = _parse_value(key, raw, number)
    return values


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, field=field)


def _check_steps(field: str, dt: float, span: float) -> int:
    try:
        return step_count(dt, span)
    except ValueError as e:
        raise ConfigError(str(e), field=field)


def build_config(values: Dict[str, Any], require_seed: bool = True) -> ExperimentConfig:
    """Merge values over the defaults and validate the result."""
    merged = {**SIMULATION_CONFIG, **values}
    names = {f.name for f in fields(ExperimentConfig)}
    config = ExperimentConfig(**{k: merged[k] for k in names})
    validate_config(config, require_seed)
    return config


def validate_config(config: ExperimentConfig, require_seed: bool = True) -> None:
    """
    Raise ConfigError naming the first offending field.

    Args:
        config: configuration to check
        require_seed: seeds are mandatory for files; presets may fill one in
    """
    _require(config.mode in MODES, "mode", f"unknown mode '{config.mode}', expected one of {', '.join(MODES)}")
    if require_seed:
        _require(config.seed is not None, "seed", "seed is required for reproducible runs")
    if config.seed is not None:
        _require(config.seed >= 0, "seed", "seed must be non-negative")
    _require(config.hbar > 0, "hbar", "hbar must be positive")
    _require(config.s > 0, "s", "s must be positive")
    _require(config.N >= 1, "N", "basis size N must be at least 1")
    _require(config.dt > 0, "dt", "dt must be positive")
    _require(config.t_final >= 0, "t_final", "t_final must be non-negative")
    _require(config.workers >= 1, "workers", "workers must be at least 1")
    _require(config.record_stride >= 1, "record_stride", "record_stride must be at least 1")
    _require(config.trajectory_files >= 0, "trajectory_files", "trajectory_files must be non-negative")
    _require(config.husimi_x_max > config.husimi_x_min, "husimi_x_max", "husimi_x_max must exceed husimi_x_min")
    _require(config.husimi_p_max > config.husimi_p_min, "husimi_p_max", "husimi_p_max must exceed husimi_p_min")
    _require(config.husimi_nx >= 2, "husimi_nx", "husimi_nx must be at least 2")
    _require(config.husimi_np >= 2, "husimi_np", "husimi_np must be at least 2")
    if config.recenter_threshold is not None:
        _require(config.recenter_threshold > 0, "recenter_threshold", "recenter_threshold must be positive")

    if config.mode in ("sse", "sse-position-only", "sse-momentum-only", "lindblad", "classical"):
        _check_steps("t_final", config.dt, config.t_final)
    if config.snapshot_interval is not None:
        _require(config.snapshot_interval > 0, "snapshot_interval", "snapshot_interval must be positive")
        _check_steps("snapshot_interval", config.dt, config.snapshot_interval)

    if config.mode in ("sse", "lindblad"):
        explicit = config.Gamma1 is not None or config.Gamma2 is not None
        if config.gamma is not None:
            _require(not explicit, "gamma", "give either gamma or Gamma1/Gamma2, not both")
            _require(config.gamma >= 0, "gamma", "gamma must be non-negative")
        else:
            _require(
                config.Gamma1 is not None and config.Gamma2 is not None,
                "gamma",
                f"mode '{config.mode}' needs gamma or both Gamma1 and Gamma2",
            )
            _require(config.Gamma1 >= 0 and config.Gamma2 >= 0, "Gamma1", "rates must be non-negative")
    elif config.mode == "sse-position-only":
        _require(config.gamma is None, "gamma", "position-only mode takes Gamma1, not gamma")
        _require(config.Gamma1 is not None and config.Gamma1 > 0, "Gamma1", "position-only mode needs Gamma1 > 0")
        _require(not config.Gamma2, "Gamma2", "position-only mode requires Gamma2 = 0")
    elif config.mode == "sse-momentum-only":
        _require(config.gamma is None, "gamma", "momentum-only mode takes Gamma2, not gamma")
        _require(config.Gamma2 is not None and config.Gamma2 > 0, "Gamma2", "momentum-only mode needs Gamma2 > 0")
        _require(not config.Gamma1, "Gamma1", "momentum-only mode requires Gamma1 = 0")

    if config.mode.startswith("sse"):
        _require(config.ensemble >= 1, "ensemble", "ensemble must be at least 1")
    elif config.mode == "lindblad":
        _require(config.ensemble >= 0, "ensemble", "ensemble must be non-negative")
    elif config.mode == "poincare":
        _require(config.strobe_period > 0, "strobe_period", "strobe_period must be positive")
        _check_steps("strobe_period", config.dt, config.strobe_period)
        _require(config.n_strobes >= 1, "n_strobes", "n_strobes must be at least 1")
        _require(config.poincare_seeds >= 1, "poincare_seeds", "poincare_seeds must be at least 1")
    elif config.mode == "povm-sample":
        _require(config.sigma >= 1, "sigma", "sigma must be at least 1")
        _require(config.n_samples >= 1, "n_samples", "n_samples must be at least 1")


def load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    return build_config(parse_config_text(text), require_seed=True)


def load_preset(
    name: str, seed: int = 42, output_dir: Optional[str] = None
) -> ExperimentConfig:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}', available: {', '.join(sorted(PRESETS))}")
    values = dict(PRESETS[name])
    values["seed"] = seed
    values["output_dir"] = output_dir or str(Path(SIMULATION_CONFIG["output_dir"]) / name)
    return build_config(values)


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, progress: bool = True):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.progress = progress
        self.written: List[str] = []
        self.failures: List[Dict[str, Any]] = []

        # Setup logging
        self.setup_logging()

    def setup_logging(self):
        """Setup logging configuration."""
        logs_dir = Path(COMMON_CONFIG["logs_dir"])
        logs_dir.mkdir(exist_ok=True)

        logging.basicConfig(
            level=getattr(logging, COMMON_CONFIG["log_level"]),
            format=COMMON_CONFIG["log_format"],
            handlers=[
                logging.FileHandler(logs_dir / "error.log"),
                logging.StreamHandler(),
            ],
        )
        self.logger = logging.getLogger(__name__)

    def write_table(self, name: str, columns: Sequence[str], data: np.ndarray) -> Path:
        path = self.output_dir / name
        np.savetxt(
            path,
            np.atleast_2d(np.asarray(data, dtype=float)),
            fmt=COMMON_CONFIG["float_format"],
            delimiter=COMMON_CONFIG["delimiter"],
            header=COMMON_CONFIG["delimiter"].join(columns),
            comments="",
        )
        self.written.append(name)
        return path

    def write_husimi(self, t: float, state) -> Path:
        config = self.config
        grid = config.grid
        q = husimi_q(state, grid, config.hs)
        name = f"husimi_t{t:.4f}.tsv"
        header = (
            f"# husimi t={t:.6g} x_min={grid.x_min!r} x_max={grid.x_max!r} n_x={grid.n_x} "
            f"p_min={grid.p_min!r} p_max={grid.p_max!r} n_p={grid.n_p} rows=p cols=x"
        )
        np.savetxt(
            self.output_dir / name,
            q,
            fmt=COMMON_CONFIG["float_format"],
            delimiter=COMMON_CONFIG["delimiter"],
            header=header,
            comments="",
        )
        self.written.append(name)
        return self.output_dir / name

    def run(self) -> int:
        """Run the configured experiment and return the process exit status."""
        config = self.config
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger.info(
            f"Running scenario '{config.scenario}' (mode {config.mode}) into {self.output_dir}"
        )
        start = time.time()
        status = "ok"
        exit_code = EXIT_CODES["ok"]
        try:
            handler = {
                "sse": self.run_trajectories,
                "sse-position-only": self.run_trajectories,
                "sse-momentum-only": self.run_trajectories,
                "lindblad": self.run_lindblad,
                "classical": self.run_classical,
                "poincare": self.run_poincare,
                "povm-sample": self.run_povm_sample,
            }[config.mode]
            handler()
            if self.failures:
                status = "failed"
                exit_code = EXIT_CODES["numeric"]
        except (SimulationError, DivergenceError) as e:
            self.logger.error(f"Numeric failure: {e}")
            print(f"❌ Numeric failure: {e}")
            status = "failed"
            exit_code = EXIT_CODES["numeric"]
        except OSError as e:
            self.logger.error(f"I/O error: {e}")
            print(f"❌ I/O error: {e}")
            return EXIT_CODES["io"]

        try:
            self.write_manifest(status)
        except OSError as e:
            self.logger.error(f"Could not write manifest: {e}")
            return EXIT_CODES["io"]
        self.logger.info(f"Finished '{config.scenario}' in {time.time() - start:.2f}s ({status})")
        return exit_code

    def write_manifest(self, status: str) -> Path:
        config = self.config
        metadata = {
            "scenario": config.scenario,
            "mode": config.mode,
            "seed": config.seed,
            "config_sha256": config_digest(config.as_text()),
            "status": status,
            "failed_trajectories": ",".join(str(f["index"]) for f in self.failures) or "none",
        }
        return write_manifest(self.output_dir, metadata)

    def _initial_state(self):
        config = self.config
        # Without re-centering the basis stays put, so it sits at the lab origin
        return coherent_state_at(
            config.x0, config.p0, config.N, config.hs, centered=config.recenter_threshold is not None
        )

    def _run_sse_ensemble(self, snapshot_interval: Optional[float]):
        config = self.config
        ladder = build_ladder(config.N, config.hs)
        print(f"\n🚀 Starting {config.ensemble} trajectories ({config.mode})...")
        print(f"📊 Using {config.workers} parallel workers")
        print("-" * 60)
        results = run_ensemble(
            self._initial_state(),
            config.params,
            config.rates,
            config.dt,
            config.t_final,
            config.seed,
            config.ensemble,
            ladder,
            max_workers=config.workers,
            progress=self.progress,
            recenter_threshold=config.recenter_threshold,
            snapshot_interval=snapshot_interval,
            record_stride=config.record_stride,
        )
        self.failures = [r for r in results if not r["success"]]
        self.print_summary(results)
        return results

    def run_trajectories(self) -> None:
        config = self.config
        results = self._run_sse_ensemble(config.snapshot_interval)

        for r in results[: config.trajectory_files]:
            if not r["success"]:
                continue
            rec = r["result"].record.as_array()
            k = r["index"]
            total = rec[:, 3] + rec[:, 4]
            self.write_table(
                f"trajectory_{k}.tsv",
                TRAJECTORY_COLUMNS,
                np.column_stack([rec[:, :6], total, rec[:, 10]]),
            )
            if config.rates.mode != "none":
                self.write_table(f"record_{k}.tsv", RECORD_FILE_COLUMNS, rec[:, [0, 6, 7, 8, 9]])

        if any(r["success"] for r in results):
            mean = ensemble_moments(results)
            self.write_table(
                "ensemble_moments.tsv",
                MOMENT_COLUMNS,
                np.column_stack([mean[:, :6], mean[:, 3] + mean[:, 4]]),
            )

        first = results[0]
        if first["success"]:
            for t, state in sorted(first["result"].snapshots.items()):
                self.write_husimi(t, state)
            if config.classical_compare:
                self.write_classical_comparison(first["result"].record.as_array())

    def write_classical_comparison(self, record: np.ndarray) -> None:
        config = self.config
        run = integrate_classical(
            (config.x0, config.p0), config.params, config.dt, config.t_final, stride=config.record_stride
        )
        quantum_x = record[:, 1]
        quantum_p = record[:, 2]
        deviation = np.hypot(run.x - quantum_x, run.p - quantum_p)
        self.write_table(
            "classical.tsv",
            ["t", "x", "p", "quantum_x", "quantum_p", "quantum_classical_deviation"],
            np.column_stack([run.times, run.x, run.p, quantum_x, quantum_p, deviation]),
        )
        print(f"📐 Max quantum-classical deviation: {np.max(deviation):.3e}")

    def run_lindblad(self) -> None:
        config = self.config
        hs = config.hs
        ladder = build_ladder(config.N, hs)
        generator = LindbladGenerator(config.params, config.rates, ladder)
        snapshot_interval = config.snapshot_interval or config.t_final
        snapshot_every = step_count(config.dt, snapshot_interval) if snapshot_interval > 0 else 1
        sample_every = math.gcd(config.record_stride, snapshot_every)

        rho0 = DensityMatrix.from_state(self._initial_state())
        series = propagate(
            rho0,
            generator,
            config.dt,
            config.t_final,
            sample_every=sample_every,
            recenter_threshold=config.recenter_threshold,
            substeps=None,
        )
        keep = [
            i
            for i, t in enumerate(series.times)
            if round(t / config.dt) % config.record_stride == 0 or i == len(series.times) - 1
        ]
        moments = series.moments(ladder)[keep]
        purity = series.purity()[keep]
        self.write_table(
            "lindblad_moments.tsv",
            MOMENT_COLUMNS + ["purity"],
            np.column_stack(
                [series.times[keep], moments, moments[:, 2] + moments[:, 3], purity]
            ),
        )

        if config.ensemble < 1:
            return
        results = self._run_sse_ensemble(snapshot_interval)
        succeeded = [r["result"] for r in results if r["success"]]
        if not succeeded:
            return
        # Compared in a doubled basis so outlying trajectories survive the move
        # into the master-equation frame
        padded = 2 * config.N
        rows = []
        for t in sorted(succeeded[0].snapshots):
            rho = series.at(t).padded(padded)
            average = ensemble_projector_average(
                [res.snapshots[t] for res in succeeded], rho.frame, hs, n_max=padded
            )
            rows.append([t, trace_distance(rho, average, hs)])
        self.write_table("trace_distance.tsv", ["t", "trace_distance"], np.array(rows))
        print(f"📐 Max trace distance to the trajectory average: {max(r[1] for r in rows):.4f}")

    def run_classical(self) -> None:
        config = self.config
        run = integrate_classical(
            (config.x0, config.p0), config.params, config.dt, config.t_final, stride=config.record_stride
        )
        e = config.params.energy(run.x, run.p, run.times)
        self.write_table(
            "classical.tsv", ["t", "x", "p", "energy"], np.column_stack([run.times, run.x, run.p, e])
        )

    def poincare_seeds(self) -> np.ndarray:
        """(x0, p0) plus uniform draws over the Husimi window."""
        config = self.config
        rng = trajectory_rng(config.seed, 0)
        extra = config.poincare_seeds - 1
        xs = rng.uniform(config.husimi_x_min, config.husimi_x_max, extra)
        ps = rng.uniform(config.husimi_p_min, config.husimi_p_max, extra)
        return np.vstack([[config.x0, config.p0], np.column_stack([xs, ps])])

    def run_poincare(self) -> None:
        config = self.config
        seeds = self.poincare_seeds()
        strobes = poincare_map(seeds, config.params, config.strobe_period, config.n_strobes, config.dt)
        labels = classify_seeds(strobes)
        rows = []
        for i, orbit in enumerate(strobes):
            chaotic = 1.0 if labels[i] == "chaotic" else 0.0
            spread = nearest_neighbor_spread(orbit)
            for k, (x, p) in enumerate(orbit, start=1):
                rows.append([i, k, k * config.strobe_period, x, p, chaotic, spread])
        self.write_table(
            "poincare.tsv", ["seed", "strobe", "t", "x", "p", "chaotic", "spread"], np.array(rows)
        )
        print(f"🌀 {labels.count('chaotic')} chaotic / {labels.count('regular')} regular seeds")

    def run_povm_sample(self) -> None:
        config = self.config
        hs = config.hs
        sampler = OutcomeSampler(self._initial_state(), MeasurementStrength(config.sigma), hs)
        chis = sampler.sample(trajectory_rng(config.seed, 0), config.n_samples)
        x1 = np.sqrt(2.0 * hs.hbar / hs.s) * chis.real
        x2 = np.sqrt(2.0 * hs.hbar * hs.s) * chis.imag
        self.write_table(
            "povm_samples.tsv", ["chi1", "chi2", "x1", "x2"], np.column_stack([chis.real, chis.imag, x1, x2])
        )

    def print_summary(self, results: List[Dict[str, Any]]) -> None:
        successful = [r for r in results if r["success"]]
        failed = [r for r in results if not r["success"]]
        total_duration = sum(r["duration"] for r in results)

        print("\n" + "=" * 60)
        print("📈 SIMULATION SUMMARY")
        print("=" * 60)
        print(f"✅ Successful: {len(successful)}")
        print(f"❌ Failed: {len(failed)}")
        if results:
            print(f"📊 Success Rate: {(len(successful) / len(results) * 100):.1f}%")
        if successful:
            average = sum(r["duration"] for r in successful) / len(successful)
            print(f"⏱️  Average trajectory time: {average:.2f}s")
        print(f"⏱️  Total trajectory time: {total_duration:.2f}s")

        if failed:
            print(f"\n❌ Failed trajectories ({len(failed)}):")
            for item in failed:
                print(f"   • trajectory {item['index']}: {item['error']}")
            self.logger.warning(
                f"{len(failed)} trajectories failed. Check logs/error.log for details."
            )


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Simulate continuous simultaneous position-momentum measurement"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="Run an experiment file")
    run_parser.add_argument("config", help="Path to a key = value experiment file")
    run_parser.add_argument("--workers", "-w", type=int, help="Override the worker count")
    run_parser.add_argument("--quiet", "-q", action="store_true", help="Hide progress bars")

    preset_parser = sub.add_parser("preset", help="Run a built-in scenario")
    preset_parser.add_argument("name", help="Preset name (see list-presets)")
    preset_parser.add_argument("--out", "-o", help="Output directory (default: output/<name>)")
    preset_parser.add_argument("--seed", "-s", type=int, default=42, help="Random seed (default: 42)")
    preset_parser.add_argument("--workers", "-w", type=int, help="Override the worker count")
    preset_parser.add_argument("--quiet", "-q", action="store_true", help="Hide progress bars")

    sub.add_parser("list-presets", help="List the built-in scenarios")

    validate_parser = sub.add_parser("validate", help="Check an experiment file")
    validate_parser.add_argument("config", help="Path to a key = value experiment file")

    args = parser.parse_args(argv)

    if args.command == "list-presets":
        for name in sorted(PRESETS):
            preset = PRESETS[name]
            alias = next((a for a, target in PRESET_ALIASES.items() if target == name), "")
            print(
                f"{name:6s} {alias:24s} mode={preset['mode']:18s} "
                f"N={preset.get('N', SIMULATION_CONFIG['N'])} "
                f"t_final={preset.get('t_final', SIMULATION_CONFIG['t_final'])}"
            )
        return EXIT_CODES["ok"]

    try:
        if args.command == "validate":
            config = load_config(args.config)
            print(f"✅ {args.config} is valid (scenario {config.scenario}, mode {config.mode})")
            return EXIT_CODES["ok"]
        if args.command == "run":
            config = load_config(args.config)
        else:
            config = load_preset(args.name, args.seed, args.out)
        if args.workers is not None:
            if args.workers < 1 or args.workers > 64:
                print("⚠️  Warning: Workers should be between 1 and 64. Keeping the configured value.")
            else:
                config = build_config({**asdict(config), "workers": args.workers})
    except ConfigError as e:
        print(f"❌ Config error: {e}")
        return EXIT_CODES["config"]

    try:
        return ExperimentRunner(config, progress=not args.quiet).run()
    except KeyboardInterrupt:
        print("\n🛑 Cancelled; partial outputs were kept.")
        return EXIT_CODES["interrupted"]


if __name__ == "__main__":
    sys.exit(main())
