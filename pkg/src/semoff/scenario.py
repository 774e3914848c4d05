"""Scenario configuration, topology generation, and user mobility.

All randomness flows through an externally owned numpy Generator so that a
(config, seed) pair reproduces a run bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .tasks import TaskType

USER_SPEED_MPS = 3000.0 / 3600.0  # users walk at 3 km/h

DEFAULT_TASK_TYPES = (
    TaskType(delay_limit=0.020, model_param=1.0),
    TaskType(delay_limit=0.040, model_param=3.0),
    TaskType(delay_limit=0.060, model_param=5.0),
)


class ConfigError(ValueError):
    """Raised when a config document is malformed or violates an invariant."""


@dataclass
class ScenarioConfig:
    num_sbs: int = 4                      # K, small base stations (one MEC server each)
    num_users: int = 60                   # U
    area_side: float = 200.0              # m, square coverage area
    lts_length: float = 1.0               # s, admission slot T
    sts_length: float = 0.1               # s, allocation slot tau
    sts_per_lts: int = 10                 # p, T = p * tau
    bandwidth_per_sbs: float = 10e6       # Hz, W_k
    compute_per_sbs: float = 200.0        # gigacycles/s, F_k
    bus_bandwidth: float = 10e9           # bits/s, hardware bus inside each SBS
    transmit_power: float = 10 ** 3.7 / 1000.0   # W, 37 dBm converted once
    noise_power: float = 1e-13            # W, -100 dBm
    carrier_freq: float = 3.5             # GHz
    arrival_mean: float = 2500.0          # bits/STS per user, mean task inflow
    eta: float = 1e-6                     # revenue/cost weight
    lyapunov_v: float = 1e3               # drift-plus-penalty weight V
    kappa_esc: float = 1e-28              # W*s^3/cycle^3, switched capacitance
    alg1_eps: float = 1e-3                # relative stop threshold, allocation loop
    alg1_max_iters: int = 50              # L1
    alg2_max_iters: int = 10              # L2
    alg2_eps: float = 1e-4                # relative stop threshold, admission loop
    num_lts: int = 10                     # Z, horizon in long slots
    task_types: tuple[TaskType, ...] = DEFAULT_TASK_TYPES
    baseline: str = "none"                # none | FA | FC | TC
    seed: int = 0
    data_size_dist: dict = field(
        default_factory=lambda: {"dist": "uniform", "low_bytes": 4500.0, "high_bytes": 8000.0}
    )
    interference_model: str = "paper"     # paper | cross_user
    feature_maps: int = 32768             # N, input feature maps of the extraction CNN
    arrival_dist: str = "poisson"         # poisson | exponential
    arrival_payload_bytes: float = 50.0   # task quantum for the poisson arrival model
    complexity_floor: float = 0.001       # gigacycles, clamp for the extraction model
    tc_coeff: float | None = None         # gigacycles/byte for the TC baseline; None = calibrate
    tc_ref_bytes: float = 200_000.0       # calibration point for tc_coeff

    def effective_kappa(self) -> float:
        """Cubic power coefficient in W per (gigacycle/s)^3."""
        return self.kappa_esc * 1e27

    def delay_limits(self) -> np.ndarray:
        return np.array([t.delay_limit for t in self.task_types])

    def model_params(self) -> np.ndarray:
        return np.array([t.model_param for t in self.task_types])

    def tc_coefficient(self) -> float:
        """Gigacycles per byte for the linear (traditional) compute model."""
        if self.tc_coeff is not None:
            return self.tc_coeff
        from .tasks import complexity

        ref = complexity(self.tc_ref_bytes, 3.0, self.feature_maps, floor=self.complexity_floor)
        return ref / self.tc_ref_bytes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task_types"] = [
            {"delay_ms": t.delay_limit * 1e3, "model_param": t.model_param} for t in self.task_types
        ]
        return d


_INT_FIELDS = {"num_sbs", "num_users", "sts_per_lts", "alg1_max_iters", "alg2_max_iters",
               "num_lts", "seed", "feature_maps"}
_STR_FIELDS = {"baseline", "interference_model", "arrival_dist"}
_POSITIVE_FIELDS = (
    "num_sbs", "area_side", "lts_length", "sts_length",
    "bandwidth_per_sbs", "compute_per_sbs", "bus_bandwidth", "transmit_power",
    "noise_power", "carrier_freq", "lyapunov_v", "kappa_esc", "alg1_eps",
    "alg1_max_iters", "alg2_max_iters", "num_lts", "complexity_floor",
    "arrival_payload_bytes", "feature_maps",
)


def _coerce(key: str, value):
    if key in _STR_FIELDS:
        return str(value)
    if key in _INT_FIELDS:
        iv = int(value)
        if iv != float(value):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return iv
    return value


def _parse_task_types(raw) -> tuple[TaskType, ...]:
    types = []
    for i, entry in enumerate(raw):
        try:
            delay = float(entry["delay_ms"]) / 1e3
            # n_m accepted as an alias for the filter-count proxy
            param = float(entry.get("model_param", entry.get("n_m")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"task_types[{i}] needs delay_ms and model_param: {exc}") from exc
        if delay <= 0:
            raise ConfigError(f"task_types[{i}].delay_ms must be positive")
        if param < 1:
            raise ConfigError(f"task_types[{i}].model_param must be >= 1")
        types.append(TaskType(delay_limit=delay, model_param=param))
    if not types:
        raise ConfigError("task_types must not be empty")
    return tuple(types)


def load_config(text: str, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a YAML config document into a validated ScenarioConfig.

    An empty document reproduces the reference parameter set (1 s long slots,
    0.1 s short slots, 10 MHz and 200 Gcycles/s per SBS, 60 users, eta 1e-6).
    Unknown keys and invariant violations raise ConfigError naming the key.
    """
    try:
        raw = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a mapping")
    if overrides:
        raw = {**raw, **overrides}

    cfg = ScenarioConfig()
    known = set(cfg.__dataclass_fields__)
    tau_given = "sts_length" in raw
    p_given = "sts_per_lts" in raw
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
        if key == "task_types":
            value = _parse_task_types(value)
        elif key == "data_size_dist":
            if not isinstance(value, dict):
                raise ConfigError("data_size_dist must be a mapping")
        else:
            value = _coerce(key, value)
        setattr(cfg, key, value)

    # Derive p when the slot lengths changed but p was not updated alongside.
    if tau_given and not p_given:
        cfg.sts_per_lts = max(1, round(cfg.lts_length / cfg.sts_length))

    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    for key in _POSITIVE_FIELDS:
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be strictly positive")
    if cfg.eta < 0 or cfg.arrival_mean < 0 or cfg.num_users < 0:
        raise ConfigError("eta, arrival_mean, and num_users must be nonnegative")
    if cfg.sts_per_lts < 1:
        raise ConfigError("sts_per_lts must be >= 1")
    if abs(cfg.lts_length - cfg.sts_per_lts * cfg.sts_length) > 1e-9 * cfg.lts_length:
        raise ConfigError(
            "lts_length must equal sts_per_lts * sts_length "
            f"(got lts_length={cfg.lts_length}, sts_per_lts={cfg.sts_per_lts}, "
            f"sts_length={cfg.sts_length})"
        )
    if cfg.baseline not in ("none", "FA", "FC", "TC"):
        raise ConfigError(f"baseline must be one of none|FA|FC|TC, got {cfg.baseline!r}")
    if cfg.interference_model not in ("paper", "cross_user"):
        raise ConfigError(f"interference_model must be paper|cross_user, got {cfg.interference_model!r}")
    if cfg.arrival_dist not in ("poisson", "exponential"):
        raise ConfigError(f"arrival_dist must be poisson|exponential, got {cfg.arrival_dist!r}")
    dist = cfg.data_size_dist
    if dist.get("dist", "uniform") != "uniform":
        raise ConfigError("data_size_dist.dist: only 'uniform' is supported")
    low, high = float(dist.get("low_bytes", 0)), float(dist.get("high_bytes", 0))
    if not (0 < low <= high):
        raise ConfigError("data_size_dist requires 0 < low_bytes <= high_bytes")
    for t in cfg.task_types:
        if t.delay_limit <= 0:
            raise ConfigError("task delay limits must be strictly positive")


@dataclass
class Topology:
    sbs_positions: np.ndarray    # (K, 2) m
    user_positions: np.ndarray   # (U, 2) m
    user_headings: np.ndarray    # (U,) rad


def place_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """SBSs on a hexagonal grid centered in the square area, users uniform."""
    k = cfg.num_sbs
    side = cfg.area_side
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    dx = side / (max(cols, rows) + 1)
    dy = dx * math.sqrt(3) / 2
    center = side / 2.0
    pts = []
    for i in range(rows):
        y = center + (i - (rows - 1) / 2) * dy
        for j in range(cols):
            x = center + (j - (cols - 1) / 2) * dx + (dx / 2 if i % 2 else 0.0)
            pts.append((x, y))
            if len(pts) == k:
                break
        if len(pts) == k:
            break
    sbs = np.clip(np.array(pts, dtype=float).reshape(k, 2), 0.0, side)
    users = rng.uniform(0.0, side, size=(cfg.num_users, 2))
    headings = rng.uniform(0.0, 2 * math.pi, size=cfg.num_users)
    return Topology(sbs_positions=sbs, user_positions=users, user_headings=headings)


def _reflect(x: np.ndarray, side: float) -> np.ndarray:
    # Fold positions back into [0, side]; steps are far smaller than the area
    # so a single fold per edge suffices.
    x = np.where(x < 0.0, -x, x)
    x = np.where(x > side, 2 * side - x, x)
    return np.clip(x, 0.0, side)


def step_mobility(top: Topology, dt: float, rng: np.random.Generator,
                  area_side: float) -> Topology:
    """Advance every user by speed*dt along a freshly drawn heading.

    Headings are resampled each short slot; positions reflect at the area
    boundary. SBS positions never move.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    headings = rng.uniform(0.0, 2 * math.pi, size=top.user_positions.shape[0])
    step = USER_SPEED_MPS * dt
    delta = step * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    pos = top.user_positions + delta
    pos[:, 0] = _reflect(pos[:, 0], area_side)
    pos[:, 1] = _reflect(pos[:, 1], area_side)
    return Topology(sbs_positions=top.sbs_positions, user_positions=pos, user_headings=headings)
