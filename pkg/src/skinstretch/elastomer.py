"""Rheology of the silicone sensing element.

Each axis is independent: a linear spring, a set of Maxwell relaxation
branches (spring in series with a dashpot) that produce creep under held
displacement, and elasto-slide elements that produce rate-independent
hysteresis. Each elasto-slide element tracks a Prandtl-Ishlinskii play
operator z(d) and contributes w * (d - z), a force bounded by w * r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DISPLACEMENT_M = 5e-3


def _pad(rows, width=2) -> np.ndarray:
    """Stack ragged per-axis (a, b) lists into a (3, n, 2) zero-padded array."""
    n = max((len(r) for r in rows), default=0)
    out = np.zeros((3, max(n, 1), width))
    for i, r in enumerate(rows):
        if len(r):
            out[i, : len(r)] = np.asarray(r, dtype=float).reshape(-1, width)
    return out


@dataclass(frozen=True)
class ElastomerParams:
    """Constitutive parameters.

    creep_branches[axis] is a list of (stiffness N/m, relaxation time s);
    hysteresis_operators[axis] is a list of (play threshold m, weight N/m).
    """

    shear_stiffness_n_per_m: float = 3600.0
    normal_stiffness_n_per_m: float = 18500.0
    creep_branches: tuple = (
        ((1000.0, 0.3), (110.0, 8.0)),
        ((1000.0, 0.3), (110.0, 8.0)),
        ((4000.0, 0.3), (2200.0, 8.0)),
    )
    hysteresis_operators: tuple = (
        ((0.05e-3, 600.0), (0.15e-3, 420.0), (0.30e-3, 300.0)),
        ((0.05e-3, 600.0), (0.15e-3, 420.0), (0.30e-3, 300.0)),
        ((0.02e-3, 4400.0), (0.06e-3, 2200.0), (0.12e-3, 1100.0)),
    )
    magnet_coupling_ratio: float = 0.5

    def __post_init__(self):
        if self.shear_stiffness_n_per_m <= 0 or self.normal_stiffness_n_per_m <= 0:
            raise ValueError("stiffnesses must be positive")
        if not 0 < self.magnet_coupling_ratio <= 1:
            raise ValueError("magnet_coupling_ratio must lie in (0, 1]")
        if len(self.creep_branches) != 3 or len(self.hysteresis_operators) != 3:
            raise ValueError("need creep and hysteresis lists for each of 3 axes")
        for branches in self.creep_branches:
            for k, tau in branches:
                if k <= 0 or tau <= 0:
                    raise ValueError("creep branch stiffness and time must be positive")
        for ops in self.hysteresis_operators:
            for r, w in ops:
                if r < 0 or w < 0:
                    raise ValueError("play thresholds and weights must be >= 0")
        # Derived padded arrays; cached on the frozen instance.
        creep = _pad(self.creep_branches)
        play = _pad(self.hysteresis_operators)
        object.__setattr__(self, "_creep_k", creep[..., 0])
        object.__setattr__(self, "_creep_tau", np.where(creep[..., 1] > 0, creep[..., 1], 1.0))
        object.__setattr__(self, "_play_r", play[..., 0])
        object.__setattr__(self, "_play_w", play[..., 1])

    @property
    def spring(self) -> np.ndarray:
        s, n = self.shear_stiffness_n_per_m, self.normal_stiffness_n_per_m
        return np.array([s, s, n])

    def memoryless(self) -> "ElastomerParams":
        """Same springs with creep and hysteresis removed."""
        return ElastomerParams(
            shear_stiffness_n_per_m=self.shear_stiffness_n_per_m,
            normal_stiffness_n_per_m=self.normal_stiffness_n_per_m,
            creep_branches=((), (), ()),
            hysteresis_operators=((), (), ()),
            magnet_coupling_ratio=self.magnet_coupling_ratio,
        )

    def small_strain_stiffness(self) -> np.ndarray:
        """Quasi-static slope before any elasto-slide element slips."""
        return self.spring + self._play_w.sum(axis=1)


@dataclass
class ElastomerState:
    creep: np.ndarray  # dashpot positions, (3, n_branches)
    play: np.ndarray  # play-operator outputs, (3, n_operators)
    displacement: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def rest(cls, params: ElastomerParams) -> "ElastomerState":
        return cls(creep=np.zeros_like(params._creep_k), play=np.zeros_like(params._play_r))

    def copy(self) -> "ElastomerState":
        return ElastomerState(self.creep.copy(), self.play.copy(), self.displacement.copy())


def _check(displacement) -> np.ndarray:
    d = np.asarray(displacement, dtype=float)
    if d.shape != (3,):
        raise ValueError(f"displacement must have shape (3,), got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("displacement must be finite")
    if np.any(np.abs(d) > MAX_DISPLACEMENT_M):
        raise ValueError(f"displacement {d} outside +/-{MAX_DISPLACEMENT_M} m")
    return d


def step(state: ElastomerState, displacement, dt: float, params: ElastomerParams):
    """Advance one interval with the displacement held at its new value.

    Returns ``(new_state, force, magnet_displacement)``. Dashpots are
    integrated exactly for a held input, so a step input reproduces the
    analytic relaxation at every sample.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = _check(displacement)
    col = d[:, None]
    decay = np.exp(-dt / params._creep_tau)
    creep = col + (state.creep - col) * decay
    play = np.clip(state.play, col - params._play_r, col + params._play_r)
    force = (
        params.spring * d
        + np.sum(params._creep_k * (col - creep), axis=1)
        + np.sum(params._play_w * (col - play), axis=1)
    )
    new = ElastomerState(creep=creep, play=play, displacement=d)
    return new, force, params.magnet_coupling_ratio * d


def quasi_static_force(displacement, params: ElastomerParams) -> np.ndarray:
    """Force after full relaxation from rest under a constant displacement."""
    d = np.asarray(displacement, dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("displacement must be finite")
    col = d[..., :, None]
    slip = np.sign(col) * np.minimum(np.abs(col), params._play_r)
    return params.spring * d + np.sum(params._play_w * slip, axis=-1)
