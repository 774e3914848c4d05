import numpy as np
import pytest

from semoff import allocator, oracles, queues
from semoff.allocator import SlotProblem


def test_delay_breakdown_zero_task():
    d = allocator.delay(0.0, 1e6, 0.0, 10.0, 1e9)
    assert (d.comm, d.comp, d.bus, d.total) == (0.0, 0.0, 0.0, 0.0)


def test_delay_breakdown_hand_values():
    d = allocator.delay(1e6, 1e7, 2.0, 100.0, 1e10)
    assert d.comm == pytest.approx(0.1)
    assert d.comp == pytest.approx(0.02)
    assert d.bus == pytest.approx(1e-4)
    assert d.total == pytest.approx(0.1201)


def test_delay_separability_in_rate():
    d1 = allocator.delay(1e6, 1e7, 2.0, 100.0, 1e10)
    d2 = allocator.delay(1e6, 2e7, 2.0, 100.0, 1e10)
    assert d2.comm == pytest.approx(d1.comm / 2)
    assert d2.comp == d1.comp and d2.bus == d1.bus


def test_delay_zero_denominator_is_infinite():
    d = allocator.delay(1e6, 0.0, 2.0, 100.0, 1e10)
    assert d.comm == float("inf") and d.total == float("inf")


def test_power_cubic():
    assert allocator.power(0.0, 1e-28) == 0.0
    # f given in gigacycles/s; 2 cycles/s equals 2e-9 Gc/s
    assert allocator.power(2e-9, 1.0) == pytest.approx(8.0)
    assert allocator.power(1.0, 1e-28) == pytest.approx(0.1)


def test_total_power_inner_product():
    x = np.array([[1, 0], [0, 1]])
    f = np.array([[1.0, 9.0], [9.0, 2.0]])
    # only the associated entries count
    assert allocator.total_power(x, f, 1e-28) == pytest.approx(0.1 * (1 + 8))


def test_compute_floor_hand_value():
    # a/r = 0.005 s, a/bus = 0.001 s, limit 20 ms, demand 1 Gc
    f_min = allocator.compute_floor(1.0, 1e4, 2e6, 0.020, 1e7)
    assert f_min == pytest.approx(1 / 0.014, rel=1e-12)


def test_compute_floor_no_transport():
    assert allocator.compute_floor(1.0, 0.0, 0.0, 0.020, 1e10) == pytest.approx(50.0)


def test_compute_floor_dead_budget_signals_infinity():
    assert allocator.compute_floor(1.0, 1e6, 1e6, 0.020, 1e10) == float("inf")


def test_solve_compute_stationary_point():
    x = np.ones((1, 1), dtype=int)
    f, dropped, mu = allocator.solve_compute(x, np.array([1]), 1.0, np.zeros(1),
                                             np.array([1e9]), 1.0, 1.0, 1.0 / 3.0)
    assert not dropped
    assert f[0, 0] == pytest.approx(1.0, rel=1e-9)
    assert mu[0] == 0.0


def test_solve_compute_symmetric_binding_capacity():
    x = np.ones((2, 1), dtype=int)
    f, dropped, _ = allocator.solve_compute(x, np.ones(2), 10.0, np.zeros(2),
                                            np.array([1.0]), 1.0, 1.0, 1.0)
    assert not dropped
    np.testing.assert_allclose(f[:, 0], [0.5, 0.5], rtol=1e-6)


def test_solve_compute_respects_floors():
    x = np.ones((2, 1), dtype=int)
    floors = np.array([0.8, 0.0])
    f, dropped, _ = allocator.solve_compute(x, np.ones(2), 0.0, floors,
                                            np.array([10.0]), 1.0, 1.0, 1.0)
    assert not dropped
    assert f[0, 0] >= 0.8
    assert f[1, 0] == pytest.approx(0.0)


def test_solve_compute_sheds_largest_floor_on_capacity_conflict():
    x = np.ones((3, 1), dtype=int)
    floors = np.array([6.0, 3.0, 2.0])
    f, dropped, _ = allocator.solve_compute(x, np.ones(3), 0.0, floors,
                                            np.array([5.5]), 1.0, 1.0, 1.0)
    assert [u for u, _ in dropped] == [0]
    assert f[0, 0] == 0.0
    assert f[1, 0] >= 3.0 and f[2, 0] >= 2.0


def test_solve_compute_matches_grid_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        inst = oracles.gen_compute_instance(rng)
        n = len(inst["y"])
        x = np.ones((n, 1), dtype=int)
        f, dropped, _ = allocator.solve_compute(x, inst["y"], inst["phi"], inst["floors"],
                                                np.array([inst["cap"]]), inst["v_lyap"],
                                                inst["eta"], inst["kappa"])
        assert not dropped
        obj = oracles.compute_objective(f[:, 0], inst["phi"], inst["y"],
                                        inst["v_lyap"], inst["eta"], inst["kappa"])
        _, ref = oracles.grid_compute_oracle(inst["phi"], inst["y"], inst["floors"],
                                             inst["cap"], inst["v_lyap"], inst["eta"],
                                             inst["kappa"])
        assert obj >= ref - 1e-6 * max(abs(ref), 1e-12)
        assert abs(obj - ref) <= 1e-6 * max(abs(ref), 1e-12)


def test_solve_compute_kkt_stationarity_residual():
    rng = np.random.default_rng(12)
    for _ in range(40):
        inst = oracles.gen_compute_instance(rng)
        n = len(inst["y"])
        x = np.ones((n, 1), dtype=int)
        f, _, mu = allocator.solve_compute(x, inst["y"], inst["phi"], inst["floors"],
                                           np.array([inst["cap"]]), inst["v_lyap"],
                                           inst["eta"], inst["kappa"])
        coef = 3 * inst["v_lyap"] * inst["eta"] * inst["kappa"]
        scale = max(inst["phi"], 1.0)
        for u in range(n):
            fu = f[u, 0]
            if fu > inst["floors"][u] + 1e-9:  # interior user
                resid = inst["phi"] * inst["y"][u] - coef * fu ** 2 - mu[0]
                assert abs(resid) <= 1e-6 * scale


def test_association_argmin_and_tie_break():
    costs = np.array([[5.0, 3.0]])
    x = allocator.solve_association(costs, np.array([1]))
    assert x[0, 1] == 1 and x[0, 0] == 0
    costs = np.array([[4.0, 4.0]])
    x = allocator.solve_association(costs, np.array([1]))
    assert x[0, 0] == 1  # tie broken toward the lowest index


def test_association_unadmitted_rows_zero():
    costs = np.zeros((2, 3))
    x = allocator.solve_association(costs, np.array([0, 1]))
    assert x[0].sum() == 0 and x[1].sum() == 1


def test_association_scale_invariance():
    rng = np.random.default_rng(2)
    costs = rng.normal(size=(6, 4))
    y = np.ones(6, dtype=int)
    x1 = allocator.solve_association(costs, y)
    x2 = allocator.solve_association(costs * 7.3, y)
    np.testing.assert_array_equal(x1, x2)


def test_association_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(60):
        inst = oracles.gen_association_instance(rng)
        costs = allocator.association_costs(inst["w_user"], inst["f_user"], inst["y"],
                                            inst["queue_gap"], inst["eff"],
                                            inst["v_lyap"], inst["eta"], inst["kappa"])
        x = allocator.solve_association(costs, inst["y"])
        np.testing.assert_array_equal(x, oracles.enumerate_association(costs, inst["y"]))


def test_bandwidth_single_user_negative_gap_gets_everything():
    x = np.ones((1, 1), dtype=int)
    w, dropped = allocator.solve_bandwidth(x, np.ones(1), np.array([1e5]), -1.0,
                                           np.array([[2.0]]), np.array([1e7]))
    assert not dropped
    assert w[0, 0] == pytest.approx(1e7)


def test_bandwidth_nonnegative_gap_floors_only():
    x = np.ones((2, 1), dtype=int)
    w_min = np.array([2e5, 3e5])
    w, dropped = allocator.solve_bandwidth(x, np.ones(2), w_min, 1.0,
                                           np.array([[1.0], [2.0]]), np.array([1e7]))
    assert not dropped
    np.testing.assert_allclose(w[:, 0], w_min)


def test_bandwidth_sheds_largest_requirement_first():
    x = np.ones((3, 1), dtype=int)
    w_min = np.array([6e6, 3e6, 5e6])
    w, dropped = allocator.solve_bandwidth(x, np.ones(3), w_min, 1.0,
                                           np.array([[1.0], [1.0], [1.0]]),
                                           np.array([1e7]))
    assert [u for u, _ in dropped] == [0]
    assert w[0, 0] == 0.0
    assert w[1, 0] == pytest.approx(3e6) and w[2, 0] == pytest.approx(5e6)


def test_bandwidth_matches_lp_oracle():
    rng = np.random.default_rng(4)
    for _ in range(40):
        inst = oracles.gen_bandwidth_instance(rng)
        n = len(inst["w_min"])
        x = np.ones((n, 1), dtype=int)
        w, dropped = allocator.solve_bandwidth(x, np.ones(n, dtype=int), inst["w_min"],
                                               inst["queue_gap"], inst["eff"][:, None],
                                               np.array([inst["cap"]]))
        assert not dropped
        obj = oracles.bandwidth_objective(w[:, 0], inst["queue_gap"], inst["eff"])
        _, ref = oracles.lp_bandwidth_oracle(inst["w_min"], inst["cap"],
                                             inst["queue_gap"], inst["eff"])
        assert abs(obj - ref) <= 1e-6 * max(abs(ref), 1e-9)


def _small_problem(u=4, k=2, seed=0, queue=None, **overrides):
    rng = np.random.default_rng(seed)
    prob = SlotProblem(
        y=np.ones(u, dtype=int),
        a_bits=rng.uniform(2e4, 6e4, u),
        demand_gc=np.full(u, 0.001),
        delay_limits=rng.choice([0.02, 0.04, 0.06], size=u),
        eff=rng.uniform(0.5, 6.0, (u, k)),
        distance=rng.uniform(5, 150, (u, k)),
        queue=queue or queues.QueueState(5e4, 1e4, 0.05),
        bandwidth_caps=np.full(k, 10e6),
        compute_caps=np.full(k, 200.0),
        bus_bandwidth=1e10,
        v_lyap=1e3,
        eta=1e-6,
        kappa=0.1,
        eps=1e-3,
        max_iters=50,
    )
    for key, value in overrides.items():
        setattr(prob, key, value)
    return prob


def test_allocate_slot_single_user_converges_fast():
    prob = _small_problem(u=1, k=1)
    res = allocator.allocate_slot(prob)
    assert res.converged
    assert res.iterations <= 2
    assert res.served_mask.sum() == 1


def test_allocate_slot_infinite_eps_stops_after_first_pass():
    prob = _small_problem(eps=float("inf"))
    res = allocator.allocate_slot(prob)
    assert res.iterations == 1


def test_allocate_slot_respects_all_capacity_constraints():
    for seed in range(15):
        prob = _small_problem(u=8, k=2, seed=seed,
                              queue=queues.QueueState(3e5, 2e4, 1.0))
        res = allocator.allocate_slot(prob)
        x, w, f = res.decision.x, res.decision.w, res.decision.f
        assert np.all(x.sum(axis=1) <= 1)
        assert np.all((x == 0) | (x == 1))
        assert np.all(w >= 0) and np.all(f >= 0)
        np.testing.assert_array_equal(w[x == 0], 0.0)
        np.testing.assert_array_equal(f[x == 0], 0.0)
        for k in range(2):
            assert (x[:, k] * w[:, k]).sum() <= prob.bandwidth_caps[k] * (1 + 1e-9)
            assert (x[:, k] * f[:, k]).sum() <= prob.compute_caps[k] * (1 + 1e-9)
        assert res.violations == 0


def test_allocate_slot_served_users_meet_delay_limits():
    for seed in range(10):
        prob = _small_problem(u=10, k=2, seed=100 + seed)
        res = allocator.allocate_slot(prob)
        for u in np.nonzero(res.served_mask)[0]:
            assert res.delays[u].total <= prob.delay_limits[u] * (1 + 1e-9) + 1e-12


def test_allocate_slot_converges_on_seeded_instances():
    converged = 0
    for seed in range(20):
        prob = _small_problem(u=8, k=2, seed=200 + seed)
        res = allocator.allocate_slot(prob)
        converged += res.converged
    assert converged >= 19


def test_allocate_slot_objective_trace_recorded():
    prob = _small_problem(u=6, k=2, seed=5)
    res = allocator.allocate_slot(prob)
    assert len(res.objective_trace) == res.iterations + 1
    # converged exit means the last step moved less than the tolerance
    if res.converged and res.iterations < prob.max_iters:
        a, b = res.objective_trace[-2], res.objective_trace[-1]
        assert abs(b - a) <= prob.eps * (abs(a) + 1.0)
