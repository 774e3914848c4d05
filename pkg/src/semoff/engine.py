"""Run loop over long slots, baseline strategies, and metrics emission."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import yaml

from . import admission, channel, queues, scenario, tasks
from .scenario import ScenarioConfig


@dataclass
class StsRecord:
    lts_index: int
    sts_index: int
    offloading_bits: float    # backlog after this slot's update
    bus_bits: float
    processing_gc: float
    power_w: float
    rates: np.ndarray         # (U,) bits/s realized
    objective: float
    alg1_iterations: int
    violations: int


@dataclass
class LtsRecord:
    lts_index: int
    y: np.ndarray
    admitted_by_type: np.ndarray   # modal task type of each admitted user
    revenue: float                 # G_L
    cost: float                    # G_S
    utility: float                 # G
    avg_utility: float             # running mean over completed long slots
    drift: queues.DriftRecord


def _modal_type_counts(lts_inputs: admission.LtsInputs, y: np.ndarray,
                       num_types: int) -> np.ndarray:
    """Classify each admitted user by its most-requested task type this LTS."""
    counts = np.zeros(num_types, dtype=int)
    z_sum = np.sum([d.task_indicator for d in lts_inputs.demands], axis=0)
    for u in np.nonzero(y)[0]:
        counts[int(np.argmax(z_sum[u]))] += 1
    return counts


def _draw_lts_inputs(cfg: ScenarioConfig, rng: np.random.Generator,
                     top: scenario.Topology, queue: queues.QueueState,
                     compute_model) -> tuple[admission.LtsInputs, scenario.Topology]:
    """Pre-draw the long slot: mobility, channel, and demand for every short
    slot, so admission can optimize offline against the realized traces."""
    p = cfg.sts_per_lts
    demands = []
    eff = np.zeros((p, cfg.num_users, cfg.num_sbs))
    dist = np.zeros((p, cfg.num_users, cfg.num_sbs))
    for t in range(p):
        top = scenario.step_mobility(top, cfg.sts_length, rng, cfg.area_side)
        assoc = None
        if cfg.interference_model == "cross_user":
            # offline pass has no realized association yet; use nearest SBS
            d0 = np.linalg.norm(top.user_positions[:, None, :] - top.sbs_positions[None, :, :], axis=2)
            assoc = np.argmin(d0, axis=1)
        state = channel.build_channel_state(top.user_positions, top.sbs_positions, cfg,
                                            assoc=assoc)
        eff[t] = channel.spectral_efficiency(cfg.transmit_power, state.gain,
                                             state.interference, cfg.noise_power)
        dist[t] = state.distance
        demands.append(tasks.build_demand(rng, cfg, compute_model=compute_model))
    inputs = admission.LtsInputs(demands=demands, eff=eff, distance=dist,
                                 queue_start=queues.QueueState(*queue.as_tuple()))
    return inputs, top


def _run(cfg: ScenarioConfig, mode: str) -> tuple[list[LtsRecord], list[StsRecord]]:
    rng = np.random.default_rng(cfg.seed)
    top = scenario.place_topology(cfg, rng)
    compute_model = tasks.make_compute_model(cfg, linear=(mode == "TC"))
    queue = queues.QueueState()
    lts_records: list[LtsRecord] = []
    sts_records: list[StsRecord] = []
    g_values: list[float] = []

    for l in range(cfg.num_lts):
        lts_inputs, top = _draw_lts_inputs(cfg, rng, top, queue, compute_model)
        result = admission.admit_lts(cfg, lts_inputs, compute_model,
                                     mode=mode if mode in ("FA", "FC") else "none")
        p = cfg.sts_per_lts
        rates = np.stack([r.rates for r in result.slot_results])
        arrivals = np.stack([d.arrivals_bits for d in lts_inputs.demands])
        f_users = np.stack([(r.decision.f * r.decision.x).sum(axis=1)
                            for r in result.slot_results])
        trace = queues.LtsTrace(y=result.y.astype(float), rates=rates, arrivals=arrivals,
                                f=f_users, compute_arrival_caps=result.compute_caps_trace,
                                bus_bandwidth=cfg.bus_bandwidth, tau=cfg.sts_length,
                                queue_path=result.queue_path)
        drift = queues.check_drift_bound(trace, cfg.lyapunov_v, cfg.eta,
                                         result.utility, lts_index=l)
        g_values.append(result.utility)
        lts_records.append(LtsRecord(
            lts_index=l,
            y=result.y.copy(),
            admitted_by_type=_modal_type_counts(lts_inputs, result.y, len(cfg.task_types)),
            revenue=result.revenue,
            cost=result.cost,
            utility=result.utility,
            avg_utility=float(np.mean(g_values)),
            drift=drift,
        ))
        for t, res in enumerate(result.slot_results):
            sts_records.append(StsRecord(
                lts_index=l,
                sts_index=t,
                offloading_bits=result.queue_path[t + 1, 0],
                bus_bits=result.queue_path[t + 1, 1],
                processing_gc=result.queue_path[t + 1, 2],
                power_w=res.power_w,
                rates=res.rates.copy(),
                objective=res.decision.objective,
                alg1_iterations=res.iterations,
                violations=res.violations,
            ))
        queue = queues.QueueState(*result.queue_path[-1])
    return lts_records, sts_records


def run(cfg: ScenarioConfig) -> tuple[list[LtsRecord], list[StsRecord]]:
    """Simulate the configured horizon with the full optimization pipeline
    (or the baseline named in cfg.baseline)."""
    mode = cfg.baseline if cfg.baseline != "none" else "none"
    return _run(cfg, mode)


def run_baseline(cfg: ScenarioConfig, mode: str) -> tuple[list[LtsRecord], list[StsRecord]]:
    """Run one of the reference strategies on the same draws as run():
    FA fixes the whole allocation at the initial point, FC fixes association
    and bandwidth, TC swaps in the linear compute model."""
    if mode not in ("FA", "FC", "TC"):
        raise ValueError(f"unknown baseline {mode!r}")
    return _run(cfg, mode)


# ---------------------------------------------------------------------------
# metrics emission

_F = "{:.17g}".format


def _fmt_vec(vec) -> str:
    return ";".join(_F(float(v)) for v in vec)


def _fmt_int_vec(vec) -> str:
    return ";".join(str(int(v)) for v in vec)


LTS_COLUMNS = ["lts_index", "y", "admitted_by_type", "revenue", "cost", "utility",
               "avg_utility", "lyapunov_start", "lyapunov_end", "drift", "penalty",
               "bound_constant", "bound_rhs", "bound_holds"]
STS_COLUMNS = ["lts_index", "sts_index", "offloading_bits", "bus_bits", "processing_gc",
               "power_w", "objective", "alg1_iterations", "violations", "rates"]


def _lts_row(r: LtsRecord) -> list[str]:
    d = r.drift
    return [str(r.lts_index), _fmt_int_vec(r.y), _fmt_int_vec(r.admitted_by_type),
            _F(r.revenue), _F(r.cost), _F(r.utility), _F(r.avg_utility),
            _F(d.lyapunov_start), _F(d.lyapunov_end), _F(d.drift), _F(d.penalty),
            _F(d.bound_constant), _F(d.bound_rhs), str(int(d.holds))]


def _sts_row(r: StsRecord) -> list[str]:
    return [str(r.lts_index), str(r.sts_index), _F(r.offloading_bits), _F(r.bus_bits),
            _F(r.processing_gc), _F(r.power_w), _F(r.objective),
            str(r.alg1_iterations), str(r.violations), _fmt_vec(r.rates)]


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = yaml.safe_dump(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def emit_metrics(lts_records: list[LtsRecord], sts_records: list[StsRecord],
                 fmt: str, out_dir: str, cfg: ScenarioConfig, seed: int | None = None,
                 ) -> dict[str, str]:
    """Write one row per record plus a run manifest; returns the file paths."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be csv or jsonl, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    from . import __version__

    paths = {}
    try:
        if fmt == "csv":
            paths["lts"] = os.path.join(out_dir, "lts_records.csv")
            with open(paths["lts"], "w") as fh:
                fh.write(",".join(LTS_COLUMNS) + "\n")
                for r in lts_records:
                    fh.write(",".join(_lts_row(r)) + "\n")
            paths["sts"] = os.path.join(out_dir, "sts_records.csv")
            with open(paths["sts"], "w") as fh:
                fh.write(",".join(STS_COLUMNS) + "\n")
                for r in sts_records:
                    fh.write(",".join(_sts_row(r)) + "\n")
        else:
            paths["lts"] = os.path.join(out_dir, "lts_records.jsonl")
            with open(paths["lts"], "w") as fh:
                for r in lts_records:
                    fh.write(json.dumps(dict(zip(LTS_COLUMNS, _lts_row(r)))) + "\n")
            paths["sts"] = os.path.join(out_dir, "sts_records.jsonl")
            with open(paths["sts"], "w") as fh:
                for r in sts_records:
                    fh.write(json.dumps(dict(zip(STS_COLUMNS, _sts_row(r)))) + "\n")
        paths["manifest"] = os.path.join(out_dir, "manifest.txt")
        with open(paths["manifest"], "w") as fh:
            fh.write(f"config_hash={config_hash(cfg)}\n")
            fh.write(f"seed={cfg.seed if seed is None else seed}\n")
            fh.write(f"version={__version__}\n")
            fh.write(f"lts_records={len(lts_records)}\n")
            fh.write(f"sts_records={len(sts_records)}\n")
    except OSError as exc:
        raise OSError(f"cannot write metrics under {out_dir}: {exc}") from exc
    return paths


def _parse_vec(s: str) -> np.ndarray:
    return np.array([float(v) for v in s.split(";")]) if s else np.array([])


def parse_metrics(out_dir: str, fmt: str = "csv") -> tuple[list[LtsRecord], list[StsRecord]]:
    """Reload emitted metrics; inverse of emit_metrics for round-trip checks."""
    def rows(path, columns):
        with open(path) as fh:
            if fmt == "csv":
                header = fh.readline().strip().split(",")
                assert header == columns, f"unexpected header in {path}"
                for line in fh:
                    yield dict(zip(columns, line.rstrip("\n").split(",")))
            else:
                for line in fh:
                    yield json.loads(line)

    ext = "csv" if fmt == "csv" else "jsonl"
    lts_records = []
    for d in rows(os.path.join(out_dir, f"lts_records.{ext}"), LTS_COLUMNS):
        drift = queues.DriftRecord(
            lts_index=int(d["lts_index"]),
            lyapunov_start=float(d["lyapunov_start"]),
            lyapunov_end=float(d["lyapunov_end"]),
            drift=float(d["drift"]),
            penalty=float(d["penalty"]),
            bound_constant=float(d["bound_constant"]),
            bound_rhs=float(d["bound_rhs"]),
            holds=bool(int(d["bound_holds"])),
        )
        lts_records.append(LtsRecord(
            lts_index=int(d["lts_index"]),
            y=_parse_vec(d["y"]).astype(int),
            admitted_by_type=_parse_vec(d["admitted_by_type"]).astype(int),
            revenue=float(d["revenue"]),
            cost=float(d["cost"]),
            utility=float(d["utility"]),
            avg_utility=float(d["avg_utility"]),
            drift=drift,
        ))
    sts_records = []
    for d in rows(os.path.join(out_dir, f"sts_records.{ext}"), STS_COLUMNS):
        sts_records.append(StsRecord(
            lts_index=int(d["lts_index"]),
            sts_index=int(d["sts_index"]),
            offloading_bits=float(d["offloading_bits"]),
            bus_bits=float(d["bus_bits"]),
            processing_gc=float(d["processing_gc"]),
            power_w=float(d["power_w"]),
            rates=_parse_vec(d["rates"]),
            objective=float(d["objective"]),
            alg1_iterations=int(d["alg1_iterations"]),
            violations=int(d["violations"]),
        ))
    return lts_records, sts_records
