"""Field-to-force calibration: pose grids, data collection, cubic-feature robust SGD fit."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np

from . import elastomer as el
from .plant import SensorModel, simulate_stage

DEGREE = 3
MODEL_FORMAT = "skinstretch-calibration/1"
DATASET_COLUMNS = ("t", "counts_x", "counts_y", "counts_z", "fref_x", "fref_y", "fref_z")


class FitError(ValueError):
    pass


def monomial_exponents(degree: int = DEGREE) -> np.ndarray:
    """Exponent rows (a, b, c), by total degree then variable-lexicographic."""
    rows = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(3), d):
            e = [0, 0, 0]
            for var in combo:
                e[var] += 1
            rows.append(e)
    return np.array(rows, dtype=int)


def monomial_terms(degree: int = DEGREE) -> list[tuple[int, ...]]:
    """Variable-index tuples of each monomial, in the same order as the exponents."""
    return [combo for d in range(degree + 1) for combo in combinations_with_replacement(range(3), d)]


EXPONENTS = monomial_exponents()
TERMS = monomial_terms()
N_FEATURES = len(EXPONENTS)


@dataclass
class PoseGrid:
    poses: np.ndarray  # (n, 3) m; z <= 0 is compression
    samples_per_pose: int = 100
    dwell_s: float = 1.0

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def n_samples(self) -> int:
        return len(self.poses) * self.samples_per_pose


ENVELOPE_DEPTH_M = 0.8e-3
ENVELOPE_RADIUS_M = 2.0e-3


def paper_grid(levels: int = 5, radial_steps: int = 5, angles: int = 8) -> PoseGrid:
    """Regular grid: vertical levels x (radial rings x angles + centre)."""
    depths = np.linspace(0.0, ENVELOPE_DEPTH_M, levels)
    radii = np.linspace(0.0, ENVELOPE_RADIUS_M, radial_steps)[1:]
    thetas = np.arange(angles) * 2 * np.pi / angles
    poses = []
    for depth in depths:
        poses.append((0.0, 0.0, -depth))
        for r in radii:
            for th in thetas:
                # radial steps run toward negative r, i.e. [0, -2] mm
                poses.append((-r * np.cos(th), -r * np.sin(th), -depth))
    return PoseGrid(np.array(poses))


def random_test_grid(n: int, seed=0) -> PoseGrid:
    """``n`` poses uniform over the grid's cylindrical envelope."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    depth = rng.uniform(0.0, ENVELOPE_DEPTH_M, n)
    r = ENVELOPE_RADIUS_M * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return PoseGrid(np.column_stack([r * np.cos(th), r * np.sin(th), -depth]))


@dataclass
class CalibrationDataset:
    t: np.ndarray
    counts: np.ndarray
    force: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DATASET_COLUMNS)
            for t, c, f in zip(self.t, self.counts, self.force):
                w.writerow([f"{t:.6f}", *(int(v) for v in c), *(f"{v:.9g}" for v in f)])

    @classmethod
    def from_csv(cls, path) -> "CalibrationDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != DATASET_COLUMNS:
                raise ValueError(f"{path}: expected header {','.join(DATASET_COLUMNS)}")
            rows = [[float(v) for v in row] for row in reader]
        data = np.array(rows).reshape(-1, len(DATASET_COLUMNS))
        return cls(data[:, 0], data[:, 1:4].astype(np.int64), data[:, 4:7])


def collect(
    sensor: SensorModel,
    grid: PoseGrid,
    seed=0,
    move_s: float = 0.5,
    rate_hz: float = 100.0,
    via_rest: bool = True,
) -> CalibrationDataset:
    """Visit each pose in order and sample through the dwell.

    With ``via_rest`` the stage backs off to the unloaded position between
    targets, so every pose is approached from rest; otherwise it moves
    straight from pose to pose. Only dwell samples are kept
    (``samples_per_pose`` of them, covering ``dwell_s``). The elastomer
    state carries over between poses.
    """
    dt = 1.0 / rate_hz
    n_move = max(int(round(move_s * rate_hz)), 1)
    n_dwell = max(int(round(grid.dwell_s * rate_hz)), grid.samples_per_pose)
    frac = np.arange(1, n_move + 1)[:, None] / n_move
    path, keep = [], []

    def move(a, b):
        path.append(a + (b - a) * frac)
        keep.append(np.zeros(n_move, dtype=bool))

    prev = np.zeros(3)
    for pose in grid.poses:
        move(prev, pose)
        path.append(np.repeat(pose[None, :], n_dwell, axis=0))
        k = np.zeros(n_dwell, dtype=bool)
        k[-grid.samples_per_pose :] = True
        keep.append(k)
        if via_rest:
            move(pose, np.zeros(3))
            prev = np.zeros(3)
        else:
            prev = pose
    trace = simulate_stage(sensor, np.concatenate(path), dt, seed)
    mask = np.concatenate(keep)
    return CalibrationDataset(trace.t[mask], trace.counts[mask], trace.reference[mask])


def expand_features(counts, means, scales) -> np.ndarray:
    """Standardize counts and return every monomial of degree <= 3 (20 columns)."""
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    u = (np.asarray(counts, dtype=float) - np.asarray(means, dtype=float)) / scales
    out = np.ones(u.shape[:-1] + (N_FEATURES,))
    for j, term in enumerate(TERMS):
        # left-to-right products, so x*x*x is never replaced by pow(x, 3)
        for var in term:
            out[..., j] = out[..., j] * u[..., var]
    return out


@dataclass
class CalibrationModel:
    weights: np.ndarray  # (3, 20) N per feature
    means: np.ndarray  # (3,) counts
    scales: np.ndarray  # (3,) counts
    degree: int = DEGREE
    final_loss: float = float("nan")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.scales = np.asarray(self.scales, dtype=float)
        if self.weights.shape != (3, N_FEATURES):
            raise ValueError(f"weights must be 3x{N_FEATURES}")
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")

    def predict(self, counts) -> np.ndarray:
        return expand_features(counts, self.means, self.scales) @ self.weights.T

    def save(self, path) -> None:
        lines = [
            f"format = {MODEL_FORMAT}",
            f"degree = {self.degree}",
            "means = " + " ".join(repr(float(v)) for v in self.means),
            "scales = " + " ".join(repr(float(v)) for v in self.scales),
        ]
        for axis, row in zip("xyz", self.weights):
            lines.append(f"weights_{axis} = " + " ".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "CalibrationModel":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"calibration model file not found: {path}")
        values = {}
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip()] = val.strip()
        if values.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: unsupported model format {values.get('format')!r}")
        try:
            vec = lambda k: np.array([float(v) for v in values[k].split()])
            weights = np.vstack([vec(f"weights_{a}") for a in "xyz"])
            return cls(weights, vec("means"), vec("scales"), int(values["degree"]))
        except KeyError as exc:
            raise ValueError(f"{path}: missing field {exc.args[0]}") from None


@dataclass(frozen=True)
class FitHyper:
    huber_delta_n: float = 0.5
    l2_lambda: float = 1e-4
    learning_rate: float = 0.02
    lr_decay_per_epoch: float = 0.02
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    loss: str = "huber"  # or "squared"

    def __post_init__(self):
        if min(self.huber_delta_n, self.learning_rate, self.epochs, self.batch_size) <= 0:
            raise ValueError("hyperparameters must be positive")
        if self.l2_lambda < 0 or self.lr_decay_per_epoch < 0:
            raise ValueError("l2_lambda and lr decay must be >= 0")
        if self.loss not in ("huber", "squared"):
            raise ValueError(f"unknown loss {self.loss!r}")


def _loss(residual, hyper: FitHyper) -> float:
    a = np.abs(residual)
    if hyper.loss == "squared":
        return float(np.mean(0.5 * a**2))
    d = hyper.huber_delta_n
    return float(np.mean(np.where(a <= d, 0.5 * a**2, d * (a - 0.5 * d))))


def fit(data: CalibrationDataset, hyper: FitHyper = FitHyper()) -> CalibrationModel:
    """Mini-batch SGD on Huber loss plus L2 penalty (bias unpenalized).

    Step size decays as lr / (1 + decay * epoch). Shuffling comes from
    ``hyper.seed``, so equal inputs give bitwise-equal weights.
    """
    counts = np.asarray(data.counts, dtype=float)
    target = np.asarray(data.force, dtype=float)
    if len(counts) < N_FEATURES or len(np.unique(counts, axis=0)) < N_FEATURES:
        raise FitError(f"need at least {N_FEATURES} distinct count vectors, got {len(np.unique(counts, axis=0))}")
    if not (np.all(np.isfinite(counts)) and np.all(np.isfinite(target))):
        raise FitError("non-finite samples in calibration data")
    means = counts.mean(axis=0)
    scales = counts.std(axis=0)
    if np.any(scales == 0):
        raise FitError(f"count channel(s) {np.flatnonzero(scales == 0).tolist()} are constant")
    X = expand_features(counts, means, scales)
    if np.linalg.matrix_rank(X) < N_FEATURES:
        raise FitError("feature matrix is rank deficient; poses do not span the cubic basis")

    rng = np.random.default_rng(hyper.seed)
    W = np.zeros((3, N_FEATURES))
    penalty = np.ones(N_FEATURES)
    penalty[0] = 0.0
    n, bs = len(X), hyper.batch_size
    for epoch in range(hyper.epochs):
        lr = hyper.learning_rate / (1.0 + hyper.lr_decay_per_epoch * epoch)
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            xb = X[idx]
            r = target[idx] - xb @ W.T
            if hyper.loss == "huber":
                r = np.clip(r, -hyper.huber_delta_n, hyper.huber_delta_n)
            grad = -(r.T @ xb) / len(idx) + 2 * hyper.l2_lambda * W * penalty
            W -= lr * grad
        if not np.all(np.isfinite(W)):
            raise FitError(f"SGD diverged in epoch {epoch}; lower the learning rate")
    residual = target - X @ W.T
    final = _loss(residual, hyper) + hyper.l2_lambda * float(np.sum((W * penalty) ** 2))
    return CalibrationModel(W, means, scales, DEGREE, final)


def predict(model: CalibrationModel, counts) -> np.ndarray:
    return model.predict(counts)


@dataclass
class ErrorStats:
    mae: np.ndarray
    sd: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.mae))

    @classmethod
    def from_residual(cls, residual) -> "ErrorStats":
        a = np.abs(np.asarray(residual, dtype=float))
        return cls(a.mean(axis=0), a.std(axis=0))


def static_error(model: CalibrationModel, data: CalibrationDataset) -> ErrorStats:
    """Per-axis MAE and per-sample SD of |predicted - reference|."""
    if len(data) == 0:
        raise ValueError("dataset is empty")
    return ErrorStats.from_residual(model.predict(data.counts) - data.force)


@dataclass(frozen=True)
class TrajectorySpec:
    duration_s: float = 30.0
    rate_hz: float = 100.0
    waypoint_s: float = 1.5
    force_bounds_n: tuple = ((-5.0, 4.5), (-8.0, 3.0), (-9.0, 1.0))
    radius_limit_m: float = ENVELOPE_RADIUS_M
    static: bool = False


def _force_to_displacement(force: np.ndarray, params: el.ElastomerParams) -> np.ndarray:
    # invert the monotone quasi-static law per axis on a dense table
    table_d = np.linspace(-el.MAX_DISPLACEMENT_M, el.MAX_DISPLACEMENT_M, 4001)
    out = np.empty_like(force)
    for axis in range(3):
        v = np.zeros((len(table_d), 3))
        v[:, axis] = table_d
        f = el.quasi_static_force(v, params)[:, axis]
        out[:, axis] = np.interp(force[:, axis], f, table_d)
    return out


def dynamic_trajectory(sensor: SensorModel, spec: TrajectorySpec = TrajectorySpec(), seed=0) -> np.ndarray:
    """Smoothed random displacement path whose quasi-static forces stay in bounds."""
    rng = np.random.default_rng(seed)
    n_way = int(np.ceil(spec.duration_s / spec.waypoint_s)) + 1
    lo = np.array([b[0] for b in spec.force_bounds_n])
    hi = np.array([b[1] for b in spec.force_bounds_n])
    forces = rng.uniform(lo, hi, (n_way, 3))
    if spec.static:
        forces[:] = forces[0]
    forces[0] = 0.0
    way = _force_to_displacement(forces, sensor.elastomer)
    radius = np.hypot(way[:, 0], way[:, 1])
    over = radius > spec.radius_limit_m
    way[over, :2] *= (spec.radius_limit_m / radius[over])[:, None]

    t = np.arange(int(round(spec.duration_s * spec.rate_hz))) / spec.rate_hz
    seg = np.minimum((t / spec.waypoint_s).astype(int), n_way - 2)
    s = t / spec.waypoint_s - seg
    blend = (s * s * (3 - 2 * s))[:, None]  # smoothstep: zero velocity at waypoints
    return way[seg] + (way[seg + 1] - way[seg]) * blend


def dynamic_error(
    model: CalibrationModel, sensor: SensorModel, spec: TrajectorySpec = TrajectorySpec(), seed=0
) -> ErrorStats:
    """Error against the plant's true force along a continuously varying path."""
    path = dynamic_trajectory(sensor, spec, seed)
    trace = simulate_stage(sensor, path, 1.0 / spec.rate_hz, seed)
    return ErrorStats.from_residual(model.predict(trace.counts) - trace.true_force)
