"""Per-slot resource allocation: the drift-plus-penalty objective and its
three decoupled solvers (association, computing, bandwidth), iterated to a
fixed point.

Solver conventions
------------------
* kappa here is the effective cubic coefficient in W per (gigacycle/s)^3,
  i.e. the switched capacitance already scaled by 1e27.
* A candidate rate at a foreign SBS assumes the user carries its current
  total bandwidth there (the allocation follows in the bandwidth step).
* Infeasibility is data, not an exception: users that cannot meet their
  delay limit under the current iterate are dropped from the slot and
  reported so admission can act on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INFEASIBLE_DELAY = float("inf")


@dataclass
class AllocationDecision:
    x: np.ndarray          # (U, K) 0/1 association
    w: np.ndarray          # (U, K) Hz
    f: np.ndarray          # (U, K) gigacycles/s
    objective: float       # drift-plus-penalty value of the slot


@dataclass
class DelayBreakdown:
    comm: float
    comp: float
    bus: float
    total: float


@dataclass
class StsSolveResult:
    decision: AllocationDecision
    rates: np.ndarray                  # (U,) bits/s realized
    delays: list                       # DelayBreakdown per user (None when idle)
    infeasible_users: list             # [(user, reason), ...]
    objective_trace: list[float]
    iterations: int
    converged: bool
    power_w: float
    served_mask: np.ndarray            # (U,) bool, allocated this slot
    violations: int = 0                # served users over their limit (0 after shedding)


def delay(a_bits: float, rate: float, demand_gc: float, f_gcps: float,
          bus_bandwidth: float) -> DelayBreakdown:
    """Transmission, computing, and bus transfer delay for one task."""
    comm = 0.0 if a_bits == 0 else (a_bits / rate if rate > 0 else INFEASIBLE_DELAY)
    comp = 0.0 if demand_gc == 0 else (demand_gc / f_gcps if f_gcps > 0 else INFEASIBLE_DELAY)
    bus = 0.0 if a_bits == 0 else (a_bits / bus_bandwidth if bus_bandwidth > 0 else INFEASIBLE_DELAY)
    return DelayBreakdown(comm=comm, comp=comp, bus=bus, total=comm + comp + bus)


def power(f_gcps, kappa_esc: float):
    """Watts drawn at allocation f (gigacycles/s); cubic in the clock rate."""
    f_cycles = np.asarray(f_gcps, dtype=float) * 1e9
    out = kappa_esc * f_cycles ** 3
    return float(out) if np.isscalar(f_gcps) else out


def total_power(x: np.ndarray, f: np.ndarray, kappa_esc: float) -> float:
    """System power: inner product of the association mask with per-pair power."""
    return float(np.sum(np.asarray(x) * power(f, kappa_esc)))


def compute_floor(demand_gc: float, a_bits: float, rate: float,
                  delay_limit: float, bus_bandwidth: float) -> float:
    """Minimum compute rate that still meets the delay limit after transport.

    Returns inf when transport alone exceeds the limit (the user cannot be
    served at the current rate).
    """
    budget = delay_limit
    if a_bits > 0:
        if rate <= 0:
            return INFEASIBLE_DELAY
        budget -= a_bits / rate + a_bits / bus_bandwidth
    if budget <= 0:
        return INFEASIBLE_DELAY
    return demand_gc / budget


def solve_compute(x: np.ndarray, y: np.ndarray, phi_processing: float,
                  floors: np.ndarray, compute_caps: np.ndarray,
                  v_lyap: float, eta: float, kappa: float,
                  tol_rel: float = 1e-9) -> tuple[np.ndarray, list, np.ndarray]:
    """Per-SBS compute allocation maximizing phi*(y.f) - V*eta*kappa*sum f^3.

    Unconstrained stationary point sqrt(phi*y/(3*V*eta*kappa)) per user,
    clamped up to the delay floor; when the SBS capacity binds, a bisection
    on the capacity multiplier mu restores sum f = F_k.
    Returns the (U, K) allocation, a list of (user, reason) pairs for SBSs
    whose floors alone exceed capacity (largest floors dropped first), and
    the per-SBS capacity multiplier.
    """
    u_count, k_count = x.shape
    f = np.zeros((u_count, k_count))
    mu_out = np.zeros(k_count)
    dropped: list = []
    coef = 3.0 * v_lyap * eta * kappa
    for k in range(k_count):
        users = np.nonzero((x[:, k] == 1) & (y == 1))[0]
        if len(users) == 0:
            continue
        cap = compute_caps[k]
        fl = floors[users].copy()
        keep = users
        # Shed the most expensive floors until the rest fit.
        if not np.all(np.isfinite(fl)) or fl.sum() > cap:
            fit, running = [], 0.0
            for idx in np.argsort(fl):  # smallest floors first
                if np.isfinite(fl[idx]) and running + fl[idx] <= cap:
                    running += fl[idx]
                    fit.append(idx)
                else:
                    dropped.append((int(users[idx]), "compute_floor"))
            keep = users[sorted(fit)]
            fl = floors[keep]
            if len(keep) == 0:
                continue

        weights = phi_processing * y[keep]

        def alloc(mu: float) -> np.ndarray:
            head = np.maximum(weights - mu, 0.0)
            interior = np.sqrt(head / coef) if coef > 0 else np.full(len(keep), np.inf)
            return np.maximum(fl, interior)

        if coef <= 0:
            # No power penalty: give everything above the floors to the
            # largest weight, or leave at floors when the queue is empty.
            vals = fl.copy()
            if phi_processing > 0 and len(keep):
                vals[np.argmax(weights)] += max(cap - fl.sum(), 0.0)
            f[keep, k] = vals
            mu_out[k] = 0.0
            continue

        vals = alloc(0.0)
        if vals.sum() > cap:
            lo, hi = 0.0, float(weights.max())
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                s = alloc(mid).sum()
                if abs(s - cap) <= tol_rel * cap:
                    break
                if s > cap:
                    lo = mid
                else:
                    hi = mid
            mu = 0.5 * (lo + hi)
            vals = alloc(mu)
            mu_out[k] = mu
            excess = vals.sum() - cap
            if excess > 0:
                # trim the slack above floors proportionally to stay feasible
                slack = vals - fl
                total_slack = slack.sum()
                if total_slack > 0:
                    vals = vals - slack * min(1.0, excess / total_slack)
        f[keep, k] = vals
    return f, dropped, mu_out


def association_costs(w_user: np.ndarray, f_user: np.ndarray, y: np.ndarray,
                      queue_gap: float, eff: np.ndarray,
                      v_lyap: float, eta: float, kappa: float) -> np.ndarray:
    """Per-(user, SBS) cost of associating there: queue-weighted rate plus
    the cubic power penalty, with the user's current bandwidth and compute
    carried to each candidate."""
    rate_cand = w_user[:, None] * eff
    penalty = v_lyap * eta * kappa * f_user[:, None] ** 3
    return queue_gap * (y[:, None] * rate_cand) + penalty


def solve_association(costs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise argmin with ties broken toward the lowest SBS index;
    unadmitted users get all-zero rows."""
    u_count, k_count = costs.shape
    x = np.zeros((u_count, k_count), dtype=int)
    best = np.argmin(costs, axis=1)  # np.argmin already takes the first minimum
    admitted = y == 1
    x[np.arange(u_count)[admitted], best[admitted]] = 1
    return x


def solve_bandwidth(x: np.ndarray, y: np.ndarray, w_min: np.ndarray,
                    queue_gap: float, eff: np.ndarray,
                    bandwidth_caps: np.ndarray) -> tuple[np.ndarray, list]:
    """Structured solution of the per-SBS bandwidth LP.

    Every served user gets its minimum bandwidth; when the queue gap is
    negative (offloading backlog exceeds the bus queue) all residual
    bandwidth goes to the user with the best spectral efficiency, which is
    the vertex optimum of the one-constraint LP. Users whose minima do not
    fit are shed largest-first and reported.
    """
    u_count, k_count = x.shape
    w = np.zeros((u_count, k_count))
    dropped: list = []
    for k in range(k_count):
        users = np.nonzero((x[:, k] == 1) & (y == 1))[0]
        if len(users) == 0:
            continue
        cap = bandwidth_caps[k]
        need = w_min[users].copy()
        keep_idx = list(range(len(users)))
        if not np.all(np.isfinite(need)) or need.sum() > cap:
            order = np.argsort(need)
            keep_idx, running = [], 0.0
            for idx in order:
                if np.isfinite(need[idx]) and running + need[idx] <= cap:
                    running += need[idx]
                    keep_idx.append(idx)
                else:
                    dropped.append((int(users[idx]), "bandwidth_floor"))
            keep_idx.sort()
        keep = users[keep_idx]
        if len(keep) == 0:
            continue
        alloc = w_min[keep].copy()
        residual = cap - alloc.sum()
        if queue_gap < 0 and residual > 0:
            alloc[np.argmax(eff[keep, k])] += residual
        w[keep, k] = alloc
    return w, dropped


def _nearest_sbs(distance: np.ndarray) -> np.ndarray:
    return np.argmin(distance, axis=1)


@dataclass
class SlotProblem:
    """Inputs the allocation loop needs for one short slot."""
    y: np.ndarray                 # (U,) admission
    a_bits: np.ndarray            # (U,) raw data per user
    demand_gc: np.ndarray         # (U,) compute demand per user
    delay_limits: np.ndarray      # (U,) this slot's per-user delay limit
    eff: np.ndarray               # (U, K) spectral efficiency
    distance: np.ndarray          # (U, K) m
    queue: "object"               # QueueState
    bandwidth_caps: np.ndarray    # (K,)
    compute_caps: np.ndarray      # (K,)
    bus_bandwidth: float
    v_lyap: float
    eta: float
    kappa: float                  # effective, per (Gc/s)^3
    eps: float
    max_iters: int


def initial_point(prob: SlotProblem, active: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-SBS association with equal splits of each SBS budget."""
    u_count, k_count = prob.eff.shape
    x = np.zeros((u_count, k_count), dtype=int)
    nearest = _nearest_sbs(prob.distance)
    idx = np.nonzero(active)[0]
    x[idx, nearest[idx]] = 1
    w = np.zeros((u_count, k_count))
    f = np.zeros((u_count, k_count))
    for k in range(k_count):
        members = np.nonzero(x[:, k] == 1)[0]
        if len(members):
            w[members, k] = prob.bandwidth_caps[k] / len(members)
            f[members, k] = prob.compute_caps[k] / len(members)
    return x, w, f


def slot_objective(prob: SlotProblem, x: np.ndarray, w: np.ndarray, f: np.ndarray) -> float:
    """Drift-plus-penalty value of a slot allocation (maximization sense):
    backlog-weighted service minus the weighted power draw."""
    rates = (w * prob.eff * x).sum(axis=1)
    f_user = (f * x).sum(axis=1)
    gap = prob.queue.offloading_bits - prob.queue.bus_bits
    drift_gain = gap * float(np.dot(prob.y, rates)) \
        + prob.queue.processing_gc * float(np.dot(prob.y, f_user))
    pen = prob.v_lyap * prob.eta * float(np.sum(x * prob.kappa * f ** 3))
    return drift_gain - pen


def _min_bandwidth(prob: SlotProblem, x: np.ndarray, f: np.ndarray,
                   active: np.ndarray) -> tuple[np.ndarray, list]:
    """Per-user bandwidth floor implied by the delay limit at current f."""
    u_count = len(active)
    w_min = np.zeros(u_count)
    infeasible: list = []
    assoc = np.argmax(x, axis=1)
    f_user = (f * x).sum(axis=1)
    for u in np.nonzero(active)[0]:
        a = prob.a_bits[u]
        if a == 0:
            continue
        k = assoc[u]
        t_comp = 0.0 if prob.demand_gc[u] == 0 else (
            prob.demand_gc[u] / f_user[u] if f_user[u] > 0 else INFEASIBLE_DELAY)
        budget = prob.delay_limits[u] - t_comp - a / prob.bus_bandwidth
        if budget <= 0 or not np.isfinite(budget):
            infeasible.append((int(u), "delay_budget"))
            w_min[u] = np.inf
            continue
        required_rate = a / budget
        e = prob.eff[u, k]
        w_min[u] = required_rate / e if e > 0 else np.inf
        if not np.isfinite(w_min[u]):
            infeasible.append((int(u), "zero_efficiency"))
    return w_min, infeasible


COMPUTE_BUDGET_SHARE = 0.5  # largest slice of the delay budget the floor may claim


def _floors(prob: SlotProblem, x: np.ndarray, w: np.ndarray,
            active: np.ndarray) -> tuple[np.ndarray, list]:
    """Compute floors at the current rates, with the computing time slice
    capped at half of the post-bus delay budget.

    Without the cap, a slack transport iterate lets the floor settle where
    computing fills the entire remaining budget, which freezes the bandwidth
    floors at exactly the current split (a degenerate fixed point). Capping
    the allowance raises the floor just enough that the bandwidth step always
    keeps room to move. Users whose post-bus budget is already gone are
    reported infeasible.
    """
    u_count = len(active)
    floors = np.zeros(u_count)
    infeasible: list = []
    rates = (w * prob.eff * x).sum(axis=1)
    for u in np.nonzero(active)[0]:
        post_bus = prob.delay_limits[u] - (prob.a_bits[u] / prob.bus_bandwidth
                                           if prob.a_bits[u] > 0 else 0.0)
        if post_bus <= 0:
            floors[u] = INFEASIBLE_DELAY
            infeasible.append((int(u), "delay_budget"))
            continue
        if prob.demand_gc[u] <= 0:
            floors[u] = 0.0
            continue
        remaining = post_bus - (prob.a_bits[u] / rates[u] if rates[u] > 0
                                else INFEASIBLE_DELAY)
        allowance = COMPUTE_BUDGET_SHARE * post_bus
        if 0 < remaining < allowance:
            allowance = remaining
        floors[u] = prob.demand_gc[u] / allowance
    return floors, infeasible


def allocate_slot(prob: SlotProblem) -> StsSolveResult:
    """Iterate association -> computing -> bandwidth until the objective
    settles or the iteration budget runs out.

    Users rendered infeasible under the current iterate are removed from the
    slot (zero rows) and reported; the loop then continues on the survivors.
    """
    u_count, k_count = prob.eff.shape
    active = prob.y.astype(bool).copy()
    infeasible: list = []

    def drop(pairs):
        hit = False
        for u, reason in pairs:
            if active[u]:
                active[u] = False
                infeasible.append((u, reason))
                hit = True
        return hit

    x, w, f = initial_point(prob, active)
    objective = slot_objective(prob, x, w, f)
    trace = [objective]
    gap = prob.queue.bus_bits - prob.queue.offloading_bits
    # When the bus queue dominates (gap >= 0) the bandwidth step pins every
    # served rate at its delay floor, which is the same at any SBS, so the
    # association term goes flat (or would perversely chase the weakest
    # link, starving the bandwidth caps). Break that degeneracy toward the
    # stronger link; genuinely queue-driven choices (gap < 0) are untouched.
    assoc_gap = min(gap, -1e-3)
    iterations = 0
    converged = False

    while iterations < prob.max_iters:
        iterations += 1
        w_user = (w * x).sum(axis=1)
        f_user = (f * x).sum(axis=1)
        costs = association_costs(w_user, f_user, active.astype(int), assoc_gap,
                                  prob.eff, prob.v_lyap, prob.eta, prob.kappa)
        x = solve_association(costs, active.astype(int))

        floors, dead = _floors(prob, x, w, active)
        if drop(dead):
            x[~active] = 0
        f, shed, _mu = solve_compute(x, active.astype(int), prob.queue.processing_gc,
                                     floors, prob.compute_caps,
                                     prob.v_lyap, prob.eta, prob.kappa)
        if drop(shed):
            x[~active] = 0
            f[~active] = 0.0

        w_min, dead = _min_bandwidth(prob, x, f, active)
        if drop(dead):
            x[~active] = 0
            f[~active] = 0.0
        w, shed = solve_bandwidth(x, active.astype(int), w_min, gap, prob.eff,
                                  prob.bandwidth_caps)
        if drop(shed):
            x[~active] = 0
            f[~active] = 0.0
            w[~active] = 0.0

        # enforce zero off the association support
        w = w * x
        f = f * x

        new_objective = slot_objective(prob, x, w, f)
        trace.append(new_objective)
        if abs(new_objective - objective) <= prob.eps * (abs(objective) + 1.0):
            objective = new_objective
            converged = True
            break
        objective = new_objective

    rates = (w * prob.eff * x).sum(axis=1)
    f_user = (f * x).sum(axis=1)
    served = active & (x.sum(axis=1) == 1)

    # Final audit: anyone left violating the delay limit is shed and reported.
    delays: list = [None] * u_count
    violators = []
    for u in np.nonzero(served)[0]:
        d = delay(prob.a_bits[u], rates[u], prob.demand_gc[u], f_user[u],
                  prob.bus_bandwidth)
        delays[u] = d
        if d.total > prob.delay_limits[u] * (1 + 1e-9) + 1e-12:
            violators.append((int(u), "delay_audit"))
    if drop(violators):
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
    decision = AllocationDecision(x=x, w=w, f=f, objective=slot_objective(prob, x, w, f))
    power_w = float(np.sum(x * prob.kappa * f ** 3))
    return StsSolveResult(decision=decision, rates=rates, delays=delays,
                          infeasible_users=infeasible, objective_trace=trace,
                          iterations=iterations, converged=converged or iterations == 0,
                          power_w=power_w, served_mask=served, violations=remaining)
