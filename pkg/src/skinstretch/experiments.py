"""End-to-end experiment recipes, run directories and manifests."""

from __future__ import annotations

import contextlib
import csv
import datetime as _dt
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import calibration as cal
from . import characterization as ch
from . import plots
from .config import ExperimentConfig, config_hash, to_ini
from .controller import ExperimentTrace, closed_loop
from .plant import TactileInterface
from .response import BodeCurve, StepMetrics, bode, exp_chirp, step_metrics

EXPERIMENTS = ("calibrate", "characterize", "step", "chirp")
DIRECTIONS = {"x": (1.0, 0.0), "y": (0.0, 1.0), "xy": (1.0, 1.0)}


class StageError(RuntimeError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # relabel with the stage that failed
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def derive_seed(seed: int, *keys) -> int:
    """Independent, reproducible sub-seed for one stage of an experiment."""
    words = [int(seed)] + [int.from_bytes(hashlib.sha256(str(k).encode()).digest()[:4], "little") for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(v) -> str:
    return f"{v:.8g}"


# --- calibration -------------------------------------------------------------


@dataclass
class CalibrationResult:
    model: cal.CalibrationModel
    train: cal.ErrorStats
    test: cal.ErrorStats
    dynamic: cal.ErrorStats

    def rows(self):
        for name, stats in (("static_train", self.train), ("static_test", self.test), ("dynamic", self.dynamic)):
            yield [name, *map(_g, stats.mae), *map(_g, stats.sd), _g(stats.norm)]

    def summary(self) -> dict:
        return {f"{name}_l2_norm_n": float(row[-1]) for name, row in zip(("static_train", "static_test", "dynamic"), self.rows())}


REPORT_HEADER = ("set", "mae_x_n", "mae_y_n", "mae_z_n", "sd_x_n", "sd_y_n", "sd_z_n", "l2_norm_n")


def train_model(cfg: ExperimentConfig) -> tuple[cal.CalibrationModel, cal.CalibrationDataset]:
    c = cfg.calibration
    with stage("calibration.collect"):
        train = cal.collect(
            cfg.sensor, cal.paper_grid(), derive_seed(cfg.seed, "train"), c.move_s, c.collect_rate_hz, c.via_rest
        )
    with stage("calibration.fit"):
        model = cal.fit(train, cfg.fit)
    return model, train


def run_calibration_experiment(cfg: ExperimentConfig, run_dir=None) -> CalibrationResult:
    """Collect, fit, and score static (train/test) and dynamic errors."""
    c = cfg.calibration
    model, train = train_model(cfg)
    with stage("calibration.test"):
        grid = cal.random_test_grid(c.test_poses, derive_seed(cfg.seed, "test-grid"))
        test = cal.collect(cfg.sensor, grid, derive_seed(cfg.seed, "test"), c.move_s, c.collect_rate_hz, c.via_rest)
        test_err = cal.static_error(model, test)
    with stage("calibration.dynamic"):
        spec = cfg.trajectory
        if c.dynamic_duration_s != spec.duration_s:
            spec = cal.TrajectorySpec(**{**asdict(spec), "duration_s": c.dynamic_duration_s})
        dyn = cal.dynamic_error(model, cfg.sensor, spec, derive_seed(cfg.seed, "dynamic"))
    result = CalibrationResult(model, cal.static_error(model, train), test_err, dyn)
    if run_dir is not None:
        with stage("calibration.write"):
            run_dir = Path(run_dir)
            model.save(run_dir / "model.txt")
            train.to_csv(run_dir / "train_dataset.csv")
            test.to_csv(run_dir / "test_dataset.csv")
            _write_rows(run_dir / "calibration_report.csv", REPORT_HEADER, result.rows())
    return result


def obtain_model(cfg: ExperimentConfig, run_dir=None) -> cal.CalibrationModel:
    """Load ``cfg.model_path`` or, when unset, calibrate in-process."""
    if cfg.model_path:
        with stage("load-model"):
            try:
                return cal.CalibrationModel.load(cfg.model_path)
            except FileNotFoundError:
                raise StageError("load-model", f"model file not found: {cfg.model_path}") from None
    model, _ = train_model(cfg)
    if run_dir is not None:
        model.save(Path(run_dir) / "model.txt")
    return model


# --- characterization --------------------------------------------------------


def run_characterization(cfg: ExperimentConfig, run_dir=None, model=None) -> ch.CharacterizationReport:
    model = model if model is not None else obtain_model(cfg, run_dir)
    cc = cfg.characterization
    sensor = cfg.sensor
    hyst, creep = np.zeros(3), np.zeros(3)
    z_offset = 0.0
    loops = {}
    for axis in range(3):
        p = ch.default_protocol(axis, ramp_rate_m_per_s=cc.ramp_rate_m_per_s)
        with stage(f"characterization.hysteresis_{ch.AXES[axis]}"):
            loading, unloading, trace = ch.hysteresis_run(sensor, model, p, derive_seed(cfg.seed, "hysteresis", axis))
            hyst[axis] = ch.hysteresis_metric(loading, unloading)
            loops[axis] = (loading, unloading)
            if axis == 2:
                z_offset = float(ch.readings(trace, model)[0, 2] - trace.reference[0, 2])
        with stage(f"characterization.creep_{ch.AXES[axis]}"):
            creep[axis], _ = ch.creep_run(sensor, model, p, derive_seed(cfg.seed, "creep", axis))
    torsion = np.zeros((3, 3))
    for axis in range(3):
        with stage(f"characterization.torsion_{ch.AXES[axis]}"):
            torsion[axis] = ch.torsion_sensitivity(
                sensor, model, axis, cc.torsion_angle_deg, seed=derive_seed(cfg.seed, "torsion", axis)
            )
    report = ch.CharacterizationReport(hyst, creep, torsion, z_offset)
    if run_dir is not None:
        run_dir = Path(run_dir)
        report.to_csv(run_dir / "characterization.csv")
        for axis, (loading, unloading) in loops.items():
            rows = [("loading", _g(f), _g(r)) for f, r in zip(*loading)]
            rows += [("unloading", _g(f), _g(r)) for f, r in zip(*unloading)]
            _write_rows(run_dir / f"hysteresis_{ch.AXES[axis]}.csv", ("phase", "reference_n", "reading_n"), rows)
    return report


# --- closed-loop tests --------------------------------------------------------


def make_interface(cfg: ExperimentConfig, model, normal_preload_n: float) -> TactileInterface:
    return TactileInterface(cfg.sensor, model, cfg.drive, normal_preload_n=normal_preload_n)


@dataclass
class StepRecord:
    direction: str
    amplitude_n: float
    repeat: int
    seed: int
    metrics: StepMetrics


@dataclass
class StepReport:
    records: list = field(default_factory=list)

    def directions(self) -> list[str]:
        return list(dict.fromkeys(r.direction for r in self.records))

    def group(self, direction: str) -> list[StepRecord]:
        return [r for r in self.records if r.direction == direction]

    def mean_error(self, direction: str) -> float:
        return float(np.mean([r.metrics.steady_state_error for r in self.group(direction)]))

    def mean_rise(self, direction: str) -> float:
        return float(np.mean([r.metrics.rise_time for r in self.group(direction)]))

    def summary_rows(self):
        for d in self.directions():
            g = self.group(d)
            err = np.array([r.metrics.steady_state_error for r in g])
            rise = np.array([r.metrics.rise_time for r in g])
            unsettled = sum(not r.metrics.settled for r in g)
            yield [d, len(g), _g(err.mean()), _g(err.std()), _g(err.max()), _g(rise.mean()), _g(rise.std()), unsettled]

    def summary(self) -> dict:
        out = {}
        for d in self.directions():
            out[f"{d}_mean_steady_state_error_n"] = self.mean_error(d)
            out[f"{d}_mean_rise_time_s"] = self.mean_rise(d)
        return out


def step_command(cfg: ExperimentConfig, direction: str, amplitude: float) -> tuple[np.ndarray, np.ndarray, float]:
    """(desired (n, 2), unit direction, amplitude along it) for one step."""
    s = cfg.step
    dt = cfg.controller.dt_s
    vec = np.array(DIRECTIONS[direction])
    if direction == "xy" and not s.xy_full_amplitude:
        vec = vec / np.sqrt(2.0)
    n_pre, n_hold, n_post = (int(round(x / dt)) for x in (s.pre_s, s.hold_s, s.post_s))
    desired = np.zeros((n_pre + n_hold + n_post, 2))
    desired[n_pre : n_pre + n_hold] = amplitude * vec
    unit = np.array(DIRECTIONS[direction]) / np.linalg.norm(DIRECTIONS[direction])
    return desired, unit, float(amplitude * vec @ unit)


def run_step_experiment(cfg: ExperimentConfig, run_dir=None, model=None) -> StepReport:
    """Repeated steps per direction and amplitude, each from zero force."""
    model = model if model is not None else obtain_model(cfg, run_dir)
    s = cfg.step
    dt = cfg.controller.dt_s
    for d in s.directions:
        if d not in DIRECTIONS:
            raise StageError("step", f"unknown direction {d!r}; use x, y or xy")
    plant = make_interface(cfg, model, s.normal_preload_n)
    report = StepReport()
    examples = {}
    for direction in s.directions:
        for amplitude in s.amplitudes_n:
            for rep in range(s.repeats):
                seed = derive_seed(cfg.seed, "step", direction, amplitude, rep)
                desired, unit, along = step_command(cfg, direction, amplitude)
                with stage(f"step.{direction}.{amplitude:g}N.{rep}"):
                    trace = closed_loop(plant, cfg.gains, desired, len(desired) * dt, seed, cfg.controller)
                    m = step_metrics(trace.t, trace.desired, trace.measured, s.pre_s, along, direction=unit)
                report.records.append(StepRecord(direction, float(amplitude), rep, seed, m))
                if rep == 0 and amplitude == max(s.amplitudes_n):
                    examples[direction] = trace
    if run_dir is not None:
        run_dir = Path(run_dir)
        rows = [
            [r.direction, _g(r.amplitude_n), r.repeat, r.seed, _g(r.metrics.steady_state_error), _g(r.metrics.rise_time), int(r.metrics.settled)]
            for r in report.records
        ]
        _write_rows(
            run_dir / "steps.csv",
            ("direction", "amplitude_n", "repeat", "seed", "steady_state_error_n", "rise_time_s", "settled"),
            rows,
        )
        _write_rows(
            run_dir / "step_summary.csv",
            ("direction", "steps", "mean_error_n", "sd_error_n", "max_error_n", "mean_rise_s", "sd_rise_s", "unsettled"),
            report.summary_rows(),
        )
        for direction, trace in examples.items():
            trace.to_csv(run_dir / f"trace_step_{direction}.csv")
    return report


@dataclass
class ChirpResult:
    curves: dict  # (axis letter, "custom" | "reference") -> BodeCurve
    traces: dict  # axis letter -> ExperimentTrace

    def crossover(self, axis: str, signal: str = "custom") -> float | None:
        return self.curves[(axis, signal)].gain_crossover

    def summary(self) -> dict:
        return {f"{a}_{sig}_crossover_hz": c.gain_crossover for (a, sig), c in self.curves.items()}


def run_chirp_experiment(cfg: ExperimentConfig, run_dir=None, model=None) -> ChirpResult:
    """Track an exponential chirp on each axis and estimate the Bode response."""
    model = model if model is not None else obtain_model(cfg, run_dir)
    c = cfg.chirp
    rate = 1.0 / cfg.controller.dt_s
    plant = make_interface(cfg, model, c.normal_preload_n)
    _, sweep = exp_chirp(c.f0_hz, c.f1_hz, c.duration_s, c.amplitude_n, rate)
    curves, traces = {}, {}
    for axis, letter in enumerate("xy"):
        desired = np.zeros((len(sweep), 2))
        desired[:, axis] = sweep
        with stage(f"chirp.{letter}"):
            trace = closed_loop(plant, cfg.gains, desired, len(sweep) / rate, derive_seed(cfg.seed, "chirp", letter), cfg.controller)
            traces[letter] = trace
            for signal, series in (("custom", trace.measured), ("reference", trace.reference)):
                curves[(letter, signal)] = bode(
                    trace.desired[:, axis],
                    series[:, axis],
                    rate,
                    c.f0_hz,
                    c.f1_hz,
                    floor_rel=c.excitation_floor_rel,
                    smooth_octaves=c.crossover_smoothing_octaves,
                    crossover_rule=c.crossover_rule,
                )
    result = ChirpResult(curves, traces)
    if run_dir is not None:
        run_dir = Path(run_dir)
        for letter, trace in traces.items():
            trace.to_csv(run_dir / f"trace_chirp_{letter}.csv")
            for signal in ("custom", "reference"):
                curves[(letter, signal)].to_csv(run_dir / f"bode_{signal}_{letter}.csv")
            plots.bode_plot(
                run_dir / f"bode_{letter}.svg",
                {signal: curves[(letter, signal)] for signal in ("custom", "reference")},
                title=f"{letter.upper()} axis",
            )
        rows = [[a, sig, "" if cv.gain_crossover is None else _g(cv.gain_crossover)] for (a, sig), cv in curves.items()]
        _write_rows(run_dir / "chirp_summary.csv", ("axis", "signal", "gain_crossover_hz"), rows)
    return result


# --- run directories and manifests ---------------------------------------------


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    seed: int
    version: str
    files: dict  # relative path -> sha256
    summary: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def new_run_dir(out_dir, experiment: str, now: _dt.datetime | None = None) -> Path:
    """``<out>/<experiment>/<timestamp>/``, suffixed if that already exists."""
    stamp = (now or _dt.datetime.now()).strftime("%Y%m%dT%H%M%S")
    base = Path(out_dir) / experiment / stamp
    path, k = base, 1
    while path.exists():
        path = base.with_name(f"{stamp}-{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def _summary(experiment: str, result) -> dict:
    if experiment == "characterize":
        r = result
        out = {f"hysteresis_{a}_pct": float(v) for a, v in zip(ch.AXES, r.hysteresis_pct)}
        out.update({f"creep_{a}_n": float(v) for a, v in zip(ch.AXES, r.creep_n)})
        out["z_offset_n"] = r.z_offset_n
        return out
    return result.summary()


RUNNERS = {
    "calibrate": run_calibration_experiment,
    "characterize": run_characterization,
    "step": run_step_experiment,
    "chirp": run_chirp_experiment,
}


def execute(experiment: str, cfg: ExperimentConfig, run_dir=None):
    """Run one experiment into a fresh run directory and write its manifest.

    Returns ``(result, run_dir, manifest)``.
    """
    if experiment not in RUNNERS:
        raise StageError("setup", f"unknown experiment {experiment!r}")
    run_dir = Path(run_dir) if run_dir is not None else new_run_dir(cfg.out_dir, experiment)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(to_ini(cfg))
    result = RUNNERS[experiment](cfg, run_dir)
    files = {
        str(p.relative_to(run_dir)): sha256_file(p)
        for p in sorted(run_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = RunManifest(experiment, config_hash(cfg), cfg.seed, __version__, files, _summary(experiment, result))
    manifest.save(run_dir / "manifest.json")
    return result, run_dir, manifest
