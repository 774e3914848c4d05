"""Long-slot user admission: importance weights, revenue/cost accounting,
the separable 0-1 admission program, and the iterate-with-allocation loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import allocator, queues


@dataclass
class AdmissionState:
    y: np.ndarray          # (U,) 0/1
    weights: np.ndarray    # (U,) importance v_u
    revenue: float         # G_L
    cost: float            # G_S, watt-slots
    utility: float         # G = G_L - eta * G_S


def weight_v(z_history: np.ndarray, types, lts_length: float) -> np.ndarray:
    """Per-user importance: average requested delay limit over the long slot.

    z_history is (p, U, M); the weight sums each slot's selected delay limit
    and divides by the long-slot length.
    """
    if z_history.ndim != 3 or z_history.shape[0] == 0:
        raise ValueError("need a (p, U, M) task-indicator history")
    limits = np.array([t.delay_limit for t in types])
    # (p, U, M) @ (M,) -> (p, U) -> (U,)
    per_slot = z_history @ limits
    return per_slot.sum(axis=0) / lts_length


def revenue(y: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(y, v))


def cost(power_trace) -> float:
    """Total compute power over the long slot's short slots (watt-slots)."""
    return float(np.sum(power_trace))


def utility(g_l: float, g_s: float, eta: float) -> float:
    return g_l - eta * g_s


def average_utility(g_sequence) -> float:
    seq = np.asarray(g_sequence, dtype=float)
    return float(seq.mean()) if seq.size else 0.0


def solve_admission(v: np.ndarray, feasible: np.ndarray, marginal_costs: np.ndarray,
                    eta: float, current_y: np.ndarray | None = None) -> np.ndarray:
    """Exact solution of the separable 0-1 admission program.

    Once allocations are fixed the objective decomposes per user, so the
    optimum admits exactly the feasible users whose weight exceeds their
    weighted realized cost. Anding with current_y makes the loop's pruning
    monotone (no readmission within a long slot).
    """
    y = ((v - eta * marginal_costs) > 0) & feasible.astype(bool)
    if current_y is not None:
        y = y & current_y.astype(bool)
    return y.astype(int)


@dataclass
class LtsInputs:
    """Pre-drawn randomness and channel evolution for one long slot."""
    demands: list                  # p StsDemand
    eff: np.ndarray                # (p, U, K) spectral efficiency
    distance: np.ndarray           # (p, U, K)
    queue_start: queues.QueueState


@dataclass
class LtsResult:
    y: np.ndarray
    weights: np.ndarray
    revenue: float
    cost: float
    utility: float
    iterations: int
    slot_results: list             # StsSolveResult per slot, final pass
    queue_path: np.ndarray         # (p+1, 3)
    compute_caps_trace: np.ndarray  # (p, U) processing-arrival bound per user
    violations: int


def _fixed_queue_prob(cfg, lts: LtsInputs, t: int, y: np.ndarray,
                      queue: queues.QueueState, demand_gc: np.ndarray,
                      delay_limits_slot: np.ndarray) -> allocator.SlotProblem:
    d = lts.demands[t]
    return allocator.SlotProblem(
        y=y,
        a_bits=d.raw_data_bits,
        demand_gc=demand_gc,
        delay_limits=delay_limits_slot,
        eff=lts.eff[t],
        distance=lts.distance[t],
        queue=queue,
        bandwidth_caps=np.full(cfg.num_sbs, cfg.bandwidth_per_sbs),
        compute_caps=np.full(cfg.num_sbs, cfg.compute_per_sbs),
        bus_bandwidth=cfg.bus_bandwidth,
        v_lyap=cfg.lyapunov_v,
        eta=cfg.eta,
        kappa=cfg.effective_kappa(),
        eps=cfg.alg1_eps,
        max_iters=cfg.alg1_max_iters,
    )


def _solve_slot_fixed(prob: allocator.SlotProblem, mode: str) -> allocator.StsSolveResult:
    """FA: full initial point held fixed. FC: association and bandwidth held
    at the initial point, computing re-optimized."""
    active = prob.y.astype(bool).copy()
    infeasible: list = []

    def drop(pairs):
        for u, reason in pairs:
            if active[u]:
                active[u] = False
                infeasible.append((u, reason))

    x, w, f = allocator.initial_point(prob, active)
    if mode == "FC":
        floors, dead = allocator._floors(prob, x, w, active)
        drop(dead)
        x[~active] = 0
        w[~active] = 0.0
        f, shed, _mu = allocator.solve_compute(x, active.astype(int), prob.queue.processing_gc,
                                               floors, prob.compute_caps,
                                               prob.v_lyap, prob.eta, prob.kappa)
        drop(shed)
    x[~active] = 0
    w[~active] = 0.0
    f[~active] = 0.0
    w = w * x
    f = f * x

    rates = (w * prob.eff * x).sum(axis=1)
    f_user = (f * x).sum(axis=1)
    served = active & (x.sum(axis=1) == 1)
    delays: list = [None] * len(active)
    violators = []
    for u in np.nonzero(served)[0]:
        dl = allocator.delay(prob.a_bits[u], rates[u], prob.demand_gc[u], f_user[u],
                             prob.bus_bandwidth)
        delays[u] = dl
        if dl.total > prob.delay_limits[u] * (1 + 1e-9) + 1e-12:
            violators.append((int(u), "delay_audit"))
    drop(violators)
    for u, _ in violators:
        x[u] = 0
        w[u] = 0.0
        f[u] = 0.0
        delays[u] = None
    rates = (w * prob.eff * x).sum(axis=1)
    served = active & (x.sum(axis=1) == 1)
    remaining = sum(
        1 for u in np.nonzero(served)[0]
        if delays[u] is not None and delays[u].total > prob.delay_limits[u] * (1 + 1e-9) + 1e-12
    )
    decision = allocator.AllocationDecision(x=x, w=w, f=f,
                                            objective=allocator.slot_objective(prob, x, w, f))
    return allocator.StsSolveResult(decision=decision, rates=rates, delays=delays,
                                    infeasible_users=infeasible, objective_trace=[decision.objective],
                                    iterations=1, converged=True,
                                    power_w=float(np.sum(x * prob.kappa * f ** 3)),
                                    served_mask=served, violations=remaining)


def run_lts_pass(cfg, lts: LtsInputs, y: np.ndarray, compute_model,
                 mode: str = "none") -> dict:
    """One offline pass of the allocation loop over the long slot's p slots,
    replaying the queue trajectory from the stored starting state."""
    p = len(lts.demands)
    u_count = cfg.num_users
    queue = queues.QueueState(*lts.queue_start.as_tuple())
    slot_results = []
    queue_path = np.zeros((p + 1, 3))
    queue_path[0] = queue.as_tuple()
    infeasible = np.zeros(u_count, dtype=bool)
    costs_gc3 = np.zeros(u_count)     # realized kappa * f^3, summed over slots
    power_trace = np.zeros(p)
    caps_trace = np.zeros((p, u_count))
    violations = 0
    convergence_flags = []
    deliverable_bytes = cfg.bus_bandwidth * cfg.sts_length / 8.0

    for t in range(p):
        d = lts.demands[t]
        types_idx = d.task_index()
        demand_gc = compute_model.demand_vector(d.raw_data_bits / 8.0, types_idx)
        limits = cfg.delay_limits()[types_idx]
        prob = _fixed_queue_prob(cfg, lts, t, y, queue, demand_gc, limits)
        if mode in ("FA", "FC"):
            res = _solve_slot_fixed(prob, mode)
        else:
            res = allocator.allocate_slot(prob)
        slot_results.append(res)
        convergence_flags.append(res.converged)
        for u, _reason in res.infeasible_users:
            infeasible[u] = True
        f_user = (res.decision.f * res.decision.x).sum(axis=1)
        costs_gc3 += cfg.effective_kappa() * f_user ** 3
        power_trace[t] = res.power_w
        violations += sum(
            1 for u in np.nonzero(res.served_mask)[0]
            if res.delays[u] is not None and res.delays[u].total > limits[u] * (1 + 1e-9) + 1e-12
        )

        caps = np.zeros(u_count)
        for u in np.nonzero(y)[0]:
            caps[u] = compute_model.demand_gc(deliverable_bytes, int(types_idx[u]))
        caps_trace[t] = caps
        arrival_cap = float(np.dot(y, caps))
        _, backlog_cap = queues.processing_arrival_bounds(
            queue.bus_bits, y, res.rates, deliverable_bytes, types_idx,
            compute_model, cfg.sts_length)

        new_off = queues.update_offloading(queue, y, res.rates, d.arrivals_bits, cfg.sts_length)
        new_bus = queues.update_bus(queue, y, res.rates, cfg.bus_bandwidth, cfg.sts_length)
        new_proc = queues.update_processing(queue, y, f_user, cfg.sts_length,
                                            arrival_cap, backlog_cap)
        queue = queues.QueueState(new_off, new_bus, new_proc)
        queue_path[t + 1] = queue.as_tuple()

    return {
        "slot_results": slot_results,
        "queue_path": queue_path,
        "infeasible": infeasible,
        "marginal_costs": costs_gc3,
        "power_trace": power_trace,
        "caps_trace": caps_trace,
        "violations": violations,
        "converged": convergence_flags,
    }


def admit_lts(cfg, lts: LtsInputs, compute_model, mode: str = "none") -> LtsResult:
    """Iterate allocation passes with admission re-solves until the long-slot
    utility settles; admission starts from all-ones and only prunes."""
    u_count = cfg.num_users
    z_history = np.stack([d.task_indicator for d in lts.demands])
    v = weight_v(z_history, cfg.task_types, cfg.lts_length)
    y = np.ones(u_count, dtype=int)
    g_prev = None
    best = None
    iterations = 0

    for _ in range(max(1, cfg.alg2_max_iters)):
        iterations += 1
        result = run_lts_pass(cfg, lts, y, compute_model, mode=mode)
        g_l = revenue(y, v)
        g_s = cost(result["power_trace"])
        g = utility(g_l, g_s, cfg.eta)
        best = (y.copy(), result, g_l, g_s, g)
        y_next = solve_admission(v, ~result["infeasible"], result["marginal_costs"],
                                 cfg.eta, current_y=y)
        stable_g = g_prev is not None and abs(g - g_prev) <= cfg.alg2_eps * (abs(g_prev) + 1.0)
        if np.array_equal(y_next, y) or stable_g:
            y = y_next
            break
        g_prev = g
        y = y_next

    y_final, result, g_l, g_s, g = best
    # If pruning changed the admission on the last pass, redo one pass so the
    # committed allocations match the final admission.
    if not np.array_equal(y, y_final):
        result = run_lts_pass(cfg, lts, y, compute_model, mode=mode)
        g_l = revenue(y, v)
        g_s = cost(result["power_trace"])
        g = utility(g_l, g_s, cfg.eta)
        y_final = y

    return LtsResult(y=y_final, weights=v, revenue=g_l, cost=g_s, utility=g,
                     iterations=iterations, slot_results=result["slot_results"],
                     queue_path=result["queue_path"],
                     compute_caps_trace=result["caps_trace"],
                     violations=result["violations"])
