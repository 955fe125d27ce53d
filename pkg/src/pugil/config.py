"""Tunable constants for the simulator and the planner.

Everything that can reasonably be tuned lives in :class:`Config`; the rest of
the package takes a config instead of reaching for globals.  Configs load from
a YAML mapping whose keys mirror the dataclass fields, and unknown keys are
rejected so a typo in a parameter study fails loudly instead of silently
running defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Raised for malformed config files or inconsistent parameter values."""


@dataclass(frozen=True)
class Config:
    # Frame timing and horizons (seconds).
    dt: float = 1.0 / 30.0
    max_task_duration: float = 0.5
    horizon: float = 0.6
    opponent_horizon: float = 0.15

    # Per-frame search budget.
    n_cma_updates: int = 4
    n_population: int = 16
    n_last_best: int = 3
    n_default_pose: int = 3
    n_spline_points: int = 3

    # Cost tolerances.  pose_tolerance_deg stays in degrees (pose costs are
    # ratios of degrees); the distance/velocity tolerances are SI.
    pose_tolerance_deg: float = 20.0
    move_tolerance: float = 0.02
    hand_velocity_tolerance: float = 2.5
    hand_relax_tolerance: float = 0.01

    # Punching.
    punch_speed_desired: float = 3.0
    punch_min_speed: float = 0.5

    # Actuation defaults used by the character builder.
    pd_kp: float = 60.0
    pd_kd: float = 6.0
    torque_limit: float = 30.0
    torso_pd_kp: float = 300.0
    torso_pd_kd: float = 60.0
    torso_torque_limit: float = 120.0

    # Contacts (penalty spring-damper) and integration.
    contact_stiffness: float = 2000.0
    contact_damping: float = 50.0
    n_substeps: int = 10
    gravity: float = 9.81

    # Spline canonicalization.
    min_knot_spacing: float = 1e-3

    # Root motion and arena.
    root_speed: float = 0.3
    root_min_gap: float = 0.5
    arena_half_width: float = 2.0
    spawn_gap: float = 0.9

    # CMA-ES restart step size (radians / seconds mixed coordinates).
    cma_sigma0: float = 0.3

    # Match rules.
    win_score: int = 100

    @property
    def pose_tolerance_rad(self) -> float:
        return math.radians(self.pose_tolerance_deg)

    @property
    def n_rollout_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    @property
    def n_seeds(self) -> int:
        return self.n_last_best + self.n_default_pose

    def validate(self) -> "Config":
        positive = [
            "dt", "max_task_duration", "horizon", "opponent_horizon",
            "n_cma_updates", "n_population", "n_spline_points",
            "pose_tolerance_deg", "move_tolerance", "hand_velocity_tolerance",
            "hand_relax_tolerance", "punch_speed_desired", "punch_min_speed",
            "pd_kp", "torque_limit", "contact_stiffness", "n_substeps",
            "min_knot_spacing", "root_speed", "root_min_gap",
            "arena_half_width", "spawn_gap", "cma_sigma0", "win_score",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"config field '{name}' must be positive")
        if self.n_last_best < 0 or self.n_default_pose < 0:
            raise ConfigError("seed counts must be non-negative")
        if self.n_seeds > self.n_population:
            raise ConfigError(
                "n_last_best + n_default_pose must not exceed n_population"
            )
        if self.opponent_horizon >= self.horizon:
            raise ConfigError("opponent_horizon must be smaller than horizon")
        if self.n_population < 4:
            raise ConfigError("n_population must be at least 4")
        return self

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def config_from_dict(data: dict, source: str = "<dict>") -> Config:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    kwargs = {}
    for key, value in data.items():
        field = _FIELDS.get(key)
        if field is None:
            raise ConfigError(f"{source}: unknown config field '{key}'")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{source}: field '{key}' expects a number")
        if isinstance(field.default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{source}: field '{key}' expects an integer")
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    try:
        return Config(**kwargs).validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path | None) -> Config:
    """Load a config from a YAML file; ``None`` returns the defaults."""
    if path is None:
        return Config().validate()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        return Config().validate()
    return config_from_dict(data, source=str(path))
