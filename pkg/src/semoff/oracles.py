"""Brute-force oracles for the closed-form solvers, plus the self-test
suites the CLI exposes.

Each oracle attacks the same problem by a different principle than the
production solver (greedy grid ascent, generic LP, exhaustive enumeration)
so agreement is meaningful evidence of correctness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import allocator
from .admission import solve_admission


# ---------------------------------------------------------------------------
# computing allocation

def compute_objective(f: np.ndarray, phi: float, y: np.ndarray,
                      v_lyap: float, eta: float, kappa: float) -> float:
    return float(phi * np.dot(y, f) - v_lyap * eta * kappa * np.sum(f ** 3))


def grid_compute_oracle(phi: float, y: np.ndarray, floors: np.ndarray, cap: float,
                        v_lyap: float, eta: float, kappa: float,
                        step_frac: float = 1e-4) -> tuple[np.ndarray, float]:
    """Greedy marginal ascent on a step_frac*cap grid, starting from the
    delay floors. For a concave separable objective under one capacity
    constraint the greedy grid solution is the grid optimum; a final
    continuum top-up of the sub-step remainder removes the discretization
    bias at a binding capacity."""
    delta = step_frac * cap
    f = floors.astype(float).copy()
    y = np.asarray(y, dtype=float)
    budget = cap - f.sum()
    if budget < 0:
        raise ValueError("floors exceed capacity")

    def gains(df):
        return phi * y * df - v_lyap * eta * kappa * ((f + df) ** 3 - f ** 3)

    while budget >= delta:
        g = gains(delta)
        best = int(np.argmax(g))
        if g[best] <= 0:
            break
        f[best] += delta
        budget -= delta
    if budget > 0:
        g = gains(budget)
        best = int(np.argmax(g))
        if g[best] > 0:
            f[best] += budget
    return f, compute_objective(f, phi, y, v_lyap, eta, kappa)


# ---------------------------------------------------------------------------
# bandwidth allocation

def bandwidth_objective(w: np.ndarray, queue_gap: float, eff: np.ndarray) -> float:
    return float(queue_gap * np.dot(eff, w))


def lp_bandwidth_oracle(w_min: np.ndarray, cap: float, queue_gap: float,
                        eff: np.ndarray) -> tuple[np.ndarray, float]:
    """Generic LP solution of the per-SBS bandwidth subproblem."""
    n = len(w_min)
    c = queue_gap * eff
    res = linprog(c, A_ub=np.ones((1, n)), b_ub=[cap],
                  bounds=[(float(w_min[i]), None) for i in range(n)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return res.x, float(res.fun)


# ---------------------------------------------------------------------------
# association

def enumerate_association(costs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-user linear scan for the cheapest SBS, first minimum wins."""
    u_count, k_count = costs.shape
    x = np.zeros((u_count, k_count), dtype=int)
    for u in range(u_count):
        if y[u] != 1:
            continue
        best_k, best_c = 0, costs[u, 0]
        for k in range(1, k_count):
            if costs[u, k] < best_c:
                best_k, best_c = k, costs[u, k]
        x[u, best_k] = 1
    return x


# ---------------------------------------------------------------------------
# admission

def enumerate_admission(v: np.ndarray, feasible: np.ndarray,
                        marginal_costs: np.ndarray, eta: float) -> tuple[np.ndarray, float]:
    """Exhaustive scan over all 2^U admission vectors obeying the flags."""
    n = len(v)
    best_y, best_val = np.zeros(n, dtype=int), 0.0
    for mask in range(1 << n):
        y = np.array([(mask >> u) & 1 for u in range(n)])
        if np.any(y > feasible.astype(int)):
            continue
        val = float(np.dot(y, v - eta * marginal_costs))
        if val > best_val:
            best_y, best_val = y, val
    return best_y, best_val


def admission_objective(y: np.ndarray, v: np.ndarray, marginal_costs: np.ndarray,
                        eta: float) -> float:
    return float(np.dot(y, v - eta * marginal_costs))


# ---------------------------------------------------------------------------
# instance generators shared by selftest and the acceptance suite

def gen_compute_instance(rng: np.random.Generator) -> dict:
    n = int(rng.integers(1, 6))
    cap = float(rng.uniform(1.0, 100.0))
    floors = rng.uniform(0.0, cap / (2 * n), size=n)
    return {
        "phi": float(rng.uniform(0.0, 10.0) ** rng.integers(0, 3)),
        "y": np.ones(n, dtype=int),
        "floors": floors,
        "cap": cap,
        "v_lyap": float(10.0 ** rng.uniform(-1, 3)),
        "eta": float(10.0 ** rng.uniform(-7, -4)),
        "kappa": float(10.0 ** rng.uniform(-2, 1)),
    }


def gen_bandwidth_instance(rng: np.random.Generator) -> dict:
    n = int(rng.integers(1, 7))
    cap = float(rng.uniform(1e6, 2e7))
    w_min = rng.uniform(0.0, cap / (2 * n), size=n)
    return {
        "w_min": w_min,
        "cap": cap,
        "queue_gap": float(rng.normal(0.0, 1e5)),
        "eff": rng.uniform(0.1, 8.0, size=n),
    }


def gen_association_instance(rng: np.random.Generator) -> dict:
    u_count = int(rng.integers(1, 7))
    k_count = int(rng.integers(1, 5))
    w_user = rng.uniform(1e5, 2e6, size=u_count)
    f_user = rng.uniform(0.0, 50.0, size=u_count)
    eff = rng.uniform(0.1, 8.0, size=(u_count, k_count))
    y = (rng.uniform(size=u_count) < 0.8).astype(int)
    return {
        "w_user": w_user,
        "f_user": f_user,
        "eff": eff,
        "y": y,
        "queue_gap": float(rng.normal(0.0, 1e4)),
        "v_lyap": float(10.0 ** rng.uniform(0, 3)),
        "eta": 1e-6,
        "kappa": 0.1,
    }


def gen_admission_instance(rng: np.random.Generator) -> dict:
    n = int(rng.integers(1, 11))
    return {
        "v": rng.uniform(0.0, 1.0, size=n),
        "feasible": rng.uniform(size=n) < 0.8,
        "marginal_costs": rng.uniform(0.0, 2e5, size=n),
        "eta": float(10.0 ** rng.uniform(-7, -5)),
    }


# ---------------------------------------------------------------------------
# selftest suites

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    elapsed_s: float


def _compute_suite(instances: int = 100, seed: int = 1234) -> SuiteResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        inst = gen_compute_instance(rng)
        n = len(inst["y"])
        x = np.ones((n, 1), dtype=int)
        f, dropped, _ = allocator.solve_compute(
            x, inst["y"], inst["phi"], inst["floors"], np.array([inst["cap"]]),
            inst["v_lyap"], inst["eta"], inst["kappa"])
        assert not dropped
        obj = compute_objective(f[:, 0], inst["phi"], inst["y"],
                                inst["v_lyap"], inst["eta"], inst["kappa"])
        _, oracle_obj = grid_compute_oracle(inst["phi"], inst["y"], inst["floors"],
                                            inst["cap"], inst["v_lyap"], inst["eta"],
                                            inst["kappa"])
        scale = max(abs(oracle_obj), 1e-12)
        worst = max(worst, abs(obj - oracle_obj) / scale)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6
    return SuiteResult("compute_vs_grid", ok, f"worst rel dev {worst:.3e}", elapsed)


def _bandwidth_suite(instances: int = 100, seed: int = 2345) -> SuiteResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        inst = gen_bandwidth_instance(rng)
        n = len(inst["w_min"])
        x = np.ones((n, 1), dtype=int)
        y = np.ones(n, dtype=int)
        w, dropped = allocator.solve_bandwidth(x, y, inst["w_min"], inst["queue_gap"],
                                               inst["eff"][:, None],
                                               np.array([inst["cap"]]))
        assert not dropped
        obj = bandwidth_objective(w[:, 0], inst["queue_gap"], inst["eff"])
        _, oracle_obj = lp_bandwidth_oracle(inst["w_min"], inst["cap"],
                                            inst["queue_gap"], inst["eff"])
        scale = max(abs(oracle_obj), 1e-9)
        worst = max(worst, abs(obj - oracle_obj) / scale)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6
    return SuiteResult("bandwidth_vs_lp", ok, f"worst rel dev {worst:.3e}", elapsed)


def _association_suite(instances: int = 200, seed: int = 3456) -> SuiteResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(instances):
        inst = gen_association_instance(rng)
        costs = allocator.association_costs(inst["w_user"], inst["f_user"], inst["y"],
                                            inst["queue_gap"], inst["eff"],
                                            inst["v_lyap"], inst["eta"], inst["kappa"])
        x = allocator.solve_association(costs, inst["y"])
        x_ref = enumerate_association(costs, inst["y"])
        if not np.array_equal(x, x_ref):
            mismatches += 1
    elapsed = time.perf_counter() - start
    return SuiteResult("association_vs_enumeration", mismatches == 0,
                       f"{mismatches} mismatches", elapsed)


def _admission_suite(instances: int = 50, seed: int = 4567) -> SuiteResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        inst = gen_admission_instance(rng)
        y = solve_admission(inst["v"], inst["feasible"], inst["marginal_costs"], inst["eta"])
        obj = admission_objective(y, inst["v"], inst["marginal_costs"], inst["eta"])
        _, oracle_obj = enumerate_admission(inst["v"], inst["feasible"],
                                            inst["marginal_costs"], inst["eta"])
        worst = max(worst, abs(obj - oracle_obj))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9
    return SuiteResult("admission_vs_enumeration", ok, f"worst abs dev {worst:.3e}", elapsed)


def run_selftest(verbose: bool = True) -> list[SuiteResult]:
    """Run every oracle suite; used by the CLI selftest subcommand."""
    results = [_compute_suite(), _bandwidth_suite(), _association_suite(), _admission_suite()]
    if verbose:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"[{status}] {r.name}: {r.detail} ({r.elapsed_s:.2f}s)")
    return results
