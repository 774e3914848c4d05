"""Task catalog, CNN extraction complexity model, and stochastic demand."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

F_MIN_GC = 0.001  # gigacycles, default clamp for nonphysical tiny inputs


@dataclass(frozen=True)
class TaskType:
    delay_limit: float   # s
    model_param: float   # filter-count proxy of the extraction network


@dataclass
class StsDemand:
    """Per-user demand realization for one short slot."""
    raw_data_bits: np.ndarray      # (U,)
    task_indicator: np.ndarray     # (U, M) one-hot rows
    arrivals_bits: np.ndarray      # (U,)
    clamped: np.ndarray            # (U,) bool, complexity hit the floor

    def task_index(self) -> np.ndarray:
        return np.argmax(self.task_indicator, axis=1)


def complexity_raw(a_bytes: float, model_param: float, feature_maps: int) -> float:
    """Unclamped cycle count of extracting features from a_bytes of input.

    Grows roughly like a*log(a) with the data volume and linearly with the
    filter-count proxy; negative below 3*feature_maps bytes where the log
    approximation leaves its validity range.
    """
    if a_bytes <= 0:
        raise ValueError("data size must be positive")
    n = model_param
    a = float(a_bytes)
    big_n = float(feature_maps)
    return n * a + math.log(a / (3.0 * big_n)) * (n * a / big_n + a + n * a / 3.0)


def complexity(a_bytes: float, model_param: float, feature_maps: int,
               floor: float = F_MIN_GC) -> float:
    """Gigacycles needed to extract features from a_bytes of raw data.

    Results at or below zero (inputs smaller than ~3*feature_maps bytes) are
    clamped to `floor` so downstream delay and queue math never sees
    negative work.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    value = complexity_raw(a_bytes, model_param, feature_maps)
    return value if value > 0 else floor


def required_compute(z_row: np.ndarray, a_bytes: float, types: tuple[TaskType, ...],
                     feature_maps: int, floor: float = F_MIN_GC) -> float:
    """Gigacycles demanded by the one task the indicator row selects."""
    z = np.asarray(z_row)
    if z.ndim != 1 or len(z) != len(types) or not np.all((z == 0) | (z == 1)) or z.sum() != 1:
        raise ValueError("task indicator row must be one-hot over the task catalog")
    m = int(np.argmax(z))
    return complexity(a_bytes, types[m].model_param, feature_maps, floor=floor)


def sample_arrivals(rng: np.random.Generator, mean_bits: float, num_users: int,
                    payload_bytes: float = 10_000.0, dist: str = "poisson") -> np.ndarray:
    """Draw i.i.d. per-user arrival volumes (bits) with the given mean.

    poisson: a Poisson count of fixed-size payloads (task quantum).
    exponential: continuous volumes, heavier tail.
    """
    if mean_bits < 0:
        raise ValueError("mean_bits must be nonnegative")
    if mean_bits == 0:
        return np.zeros(num_users)
    if dist == "poisson":
        payload_bits = payload_bytes * 8.0
        counts = rng.poisson(mean_bits / payload_bits, size=num_users)
        return counts.astype(float) * payload_bits
    if dist == "exponential":
        return rng.exponential(mean_bits, size=num_users)
    raise ValueError(f"unknown arrival distribution {dist!r}")


def sample_task_requests(rng: np.random.Generator, num_types: int, num_users: int) -> np.ndarray:
    """Uniform one-hot task indicators, one row per user."""
    if num_types < 1:
        raise ValueError("need at least one task type")
    picks = rng.integers(0, num_types, size=num_users)
    z = np.zeros((num_users, num_types), dtype=int)
    z[np.arange(num_users), picks] = 1
    return z


def sample_data_sizes(rng: np.random.Generator, dist_spec: dict, num_users: int) -> np.ndarray:
    """Per-user raw data sizes in bytes for one short slot."""
    low = float(dist_spec.get("low_bytes"))
    high = float(dist_spec.get("high_bytes"))
    return rng.uniform(low, high, size=num_users)


def build_demand(rng: np.random.Generator, cfg, compute_model=None) -> StsDemand:
    """Draw one slot of demand: data sizes, task picks, and queue arrivals."""
    u = cfg.num_users
    a_bytes = sample_data_sizes(rng, cfg.data_size_dist, u)
    z = sample_task_requests(rng, len(cfg.task_types), u)
    arrivals = sample_arrivals(rng, cfg.arrival_mean, u,
                               payload_bytes=cfg.arrival_payload_bytes,
                               dist=cfg.arrival_dist)
    model = compute_model or make_compute_model(cfg)
    clamped = np.zeros(u, dtype=bool)
    for i in range(u):
        m = int(np.argmax(z[i]))
        raw = complexity_raw(a_bytes[i], cfg.task_types[m].model_param, cfg.feature_maps)
        clamped[i] = raw <= 0 and model.kind == "semantic"
    return StsDemand(raw_data_bits=a_bytes * 8.0, task_indicator=z,
                     arrivals_bits=arrivals, clamped=clamped)


class ComputeModel:
    """Maps (bytes, task type) to gigacycles; semantic CNN model or the
    linear traditional model used by the TC baseline."""

    def __init__(self, kind: str, types: tuple[TaskType, ...], feature_maps: int,
                 floor: float, linear_coeff: float | None = None):
        self.kind = kind
        self.types = types
        self.feature_maps = feature_maps
        self.floor = floor
        self.linear_coeff = linear_coeff

    def demand_gc(self, a_bytes: float, type_index: int) -> float:
        if self.kind == "linear":
            return self.linear_coeff * a_bytes
        return complexity(a_bytes, self.types[type_index].model_param,
                          self.feature_maps, floor=self.floor)

    def demand_vector(self, a_bytes: np.ndarray, type_indices: np.ndarray) -> np.ndarray:
        return np.array([self.demand_gc(a, int(m)) for a, m in zip(a_bytes, type_indices)])


def make_compute_model(cfg, linear: bool = False) -> ComputeModel:
    if linear:
        return ComputeModel("linear", cfg.task_types, cfg.feature_maps,
                            cfg.complexity_floor, linear_coeff=cfg.tc_coefficient())
    return ComputeModel("semantic", cfg.task_types, cfg.feature_maps, cfg.complexity_floor)
