"""The three tandem queues (offloading -> bus -> processing), the quadratic
Lyapunov function, and the pathwise drift-plus-penalty bound checker.

All flows are normalized to per-slot quantities before entering a min/max so
bits always compare with bits and gigacycles with gigacycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QueueState:
    offloading_bits: float = 0.0   # data waiting to leave the users
    bus_bits: float = 0.0          # data in transfer on the SBS-internal bus
    processing_gc: float = 0.0     # offloaded but unprocessed work

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.offloading_bits, self.bus_bits, self.processing_gc)


@dataclass
class DriftRecord:
    lts_index: int
    lyapunov_start: float
    lyapunov_end: float
    drift: float
    penalty: float          # V * G(l)
    bound_constant: float   # C
    bound_rhs: float
    holds: bool


def _check_lengths(*vecs):
    n = len(vecs[0])
    for v in vecs[1:]:
        if len(v) != n:
            raise ValueError("vector length mismatch in queue update")


def update_offloading(q: QueueState, y: np.ndarray, rates: np.ndarray,
                      arrivals: np.ndarray, tau: float) -> float:
    """Serve tau*(y.r) bits, then add the admitted arrivals."""
    _check_lengths(y, rates, arrivals)
    served = tau * float(np.dot(y, rates))
    return max(q.offloading_bits - served, 0.0) + float(np.dot(y, arrivals))


def update_bus(q: QueueState, y: np.ndarray, rates: np.ndarray,
               bus_bandwidth: float, tau: float) -> float:
    """Bus drains at B_bus per admitted user; arrivals are capped by the
    upstream backlog (tandem coupling)."""
    _check_lengths(y, rates)
    service = float(np.sum(y)) * bus_bandwidth * tau
    inflow = min(tau * float(np.dot(y, rates)), q.offloading_bits)
    return max(q.bus_bits - service, 0.0) + inflow


def update_processing(q: QueueState, y: np.ndarray, f: np.ndarray, tau: float,
                      arrival_bound_gc: float, backlog_bound_gc: float) -> float:
    """Serve tau*(y.f) gigacycles; arrivals are the smaller of what the bus
    could deliver and what the bus backlog actually holds, both expressed as
    compute demand."""
    _check_lengths(y, f)
    served = tau * float(np.dot(y, f))
    inflow = min(arrival_bound_gc, backlog_bound_gc)
    return max(q.processing_gc - served, 0.0) + inflow


def split_bus_backlog(bus_bits: float, y: np.ndarray, rates: np.ndarray,
                      tau: float) -> np.ndarray:
    """Apportion the scalar bus backlog to admitted users in proportion to
    their slot delivery, falling back to an equal split when nothing moves."""
    y = np.asarray(y, dtype=float)
    delivery = y * rates * tau
    total = delivery.sum()
    if total > 0:
        return bus_bits * delivery / total
    admitted = y.sum()
    if admitted == 0:
        return np.zeros_like(y)
    return bus_bits * y / admitted


def processing_arrival_bounds(bus_bits: float, y: np.ndarray, rates: np.ndarray,
                              a_bytes_deliverable: float, demand_types: np.ndarray,
                              compute_model, tau: float) -> tuple[float, float]:
    """The two arms of the processing-queue arrival: compute demand of the
    bytes the bus could deliver this slot, and of each user's share of the
    actual bus backlog."""
    y = np.asarray(y, dtype=float)
    cap = 0.0
    for u in np.nonzero(y)[0]:
        cap += compute_model.demand_gc(a_bytes_deliverable, int(demand_types[u]))
    shares = split_bus_backlog(bus_bits, y, rates, tau) / 8.0  # bits -> bytes
    backlog = 0.0
    for u in np.nonzero(y)[0]:
        if shares[u] > 0:
            backlog += compute_model.demand_gc(shares[u], int(demand_types[u]))
    return cap, backlog


def lyapunov(q: QueueState) -> float:
    """Half the summed squares of the three backlogs."""
    a, b, c = q.as_tuple()
    return 0.5 * (a * a + b * b + c * c)


@dataclass
class LtsTrace:
    """Everything the drift bound needs about one long slot, per short slot."""
    y: np.ndarray                      # (U,) admissions held for the whole LTS
    rates: np.ndarray                  # (p, U) bits/s realized
    arrivals: np.ndarray               # (p, U) bits
    f: np.ndarray                      # (p, U) gigacycles/s realized
    compute_arrival_caps: np.ndarray   # (p, U) gigacycles, demand of bus-deliverable bytes
    bus_bandwidth: float
    tau: float
    queue_path: np.ndarray             # (p + 1, 3) backlogs at slot boundaries

    def num_slots(self) -> int:
        return self.rates.shape[0]


def drift_bound_constant(trace: LtsTrace) -> float:
    """The half-sum-of-squares constant bounding the quadratic expansion of
    the three queue updates over one long slot."""
    if trace.num_slots() == 0:
        raise ValueError("empty trace")
    y = trace.y
    tau = trace.tau
    served_bits = np.array([tau * float(np.dot(y, r)) for r in trace.rates])
    admitted_arrivals = np.array([float(np.dot(y, a)) for a in trace.arrivals])
    per_user_rate_sums = (trace.rates * y).sum(axis=0)   # sum_t r_u(t), rates unscaled
    bus_term = float(np.sum(y)) * trace.bus_bandwidth * tau * trace.num_slots()
    total_compute_rate = float((trace.f * y).sum())      # sum_u y_u sum_t f_u(t)
    per_user_cap_sums = (trace.compute_arrival_caps * y).sum(axis=0)
    terms = (
        served_bits.sum() ** 2,
        admitted_arrivals.sum() ** 2,
        bus_term ** 2,
        float(per_user_rate_sums.max()) ** 2 if len(per_user_rate_sums) else 0.0,
        total_compute_rate ** 2,
        float(per_user_cap_sums.max()) ** 2 if len(per_user_cap_sums) else 0.0,
    )
    return 0.5 * float(sum(terms))


def check_drift_bound(trace: LtsTrace, v_lyap: float, eta: float, utility: float,
                      lts_index: int = 0,
                      bound_constant: float | None = None) -> DriftRecord:
    """Verify the sample-path drift-plus-penalty inequality for one long slot.

    Both sides carry the same -V*utility term; the comparison therefore
    reduces to drift <= C - sum_t <backlog, service - arrival-bound>, which
    holds pathwise because every queue update has max/min form.
    """
    p = trace.num_slots()
    if trace.queue_path.shape != (p + 1, 3):
        raise ValueError("queue_path must hold p+1 slot-boundary states")
    y = trace.y
    tau = trace.tau
    c_const = drift_bound_constant(trace) if bound_constant is None else bound_constant

    start = QueueState(*trace.queue_path[0])
    end = QueueState(*trace.queue_path[-1])
    l_start, l_end = lyapunov(start), lyapunov(end)
    drift = l_end - l_start
    penalty = v_lyap * utility

    cross = 0.0
    n_adm = float(np.sum(y))
    for t in range(p):
        phi_i, phi_ii, phi = trace.queue_path[t]
        served_bits = tau * float(np.dot(y, trace.rates[t]))
        arr_bits = float(np.dot(y, trace.arrivals[t]))
        bus_service = n_adm * trace.bus_bandwidth * tau
        served_gc = tau * float(np.dot(y, trace.f[t]))
        cap_gc = float(np.dot(y, trace.compute_arrival_caps[t]))
        cross += phi_i * (served_bits - arr_bits)
        cross += phi_ii * (bus_service - served_bits)
        cross += phi * (served_gc - cap_gc)

    lhs = drift - penalty
    rhs = c_const - cross - penalty
    scale = max(1.0, abs(lhs), abs(rhs))
    holds = lhs <= rhs + 1e-9 * scale
    return DriftRecord(lts_index=lts_index, lyapunov_start=l_start, lyapunov_end=l_end,
                       drift=drift, penalty=penalty, bound_constant=c_const,
                       bound_rhs=rhs, holds=bool(holds))
