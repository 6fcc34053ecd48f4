import numpy as np
import pytest

from tonealloc import (
    Allocation,
    PriceState,
    Scenario,
    allocation_objective,
    check_converged,
    exhaustive_grid_solve,
    kkt_residual,
    price_update,
    recover_allocation,
    reduced_update_set,
)

from conftest import make_symmetric

LN2 = np.log(2.0)


class TestPriceUpdate:
    def test_full_ascent(self):
        st = PriceState(mu=[0.5], step_alpha0=0.1, step_tau=50.0)
        new = price_update(st, [3], reduced=False)
        assert new.mu[0] == pytest.approx(0.7)
        assert new.iter == 1

    def test_projection_at_zero(self):
        st = PriceState(mu=[0.05], step_alpha0=0.1, step_tau=50.0)
        new = price_update(st, [0], reduced=False)
        assert new.mu[0] == 0.0

    def test_reduced_skips_satisfied_tone(self):
        st = PriceState(mu=[0.0], step_alpha0=0.1, step_tau=50.0)
        assert reduced_update_set(st.mu, [1]) == set()
        new = price_update(st, [1], reduced=True)
        assert new.mu[0] == 0.0

    def test_reduced_updates_only_violating_tone(self):
        st = PriceState(mu=[0.2, 0.0], step_alpha0=0.1, step_tau=50.0)
        assert reduced_update_set(st.mu, [1, 2]) == {1}
        new = price_update(st, [1, 2], reduced=True)
        assert new.mu[0] == pytest.approx(0.2)
        assert new.mu[1] == pytest.approx(0.1)

    def test_diminishing_schedule(self):
        st = PriceState(mu=[0.0], iter=50, step_alpha0=0.1, step_tau=50.0)
        assert st.step_size() == pytest.approx(0.05)
        st = PriceState(mu=[0.0], iter=50, step_alpha0=0.1, step_tau=50.0,
                        schedule="constant")
        assert st.step_size() == pytest.approx(0.1)

    def test_prices_stay_nonnegative_long_random_sequence(self, rng):
        st = PriceState(mu=rng.uniform(0, 1, 4), step_alpha0=0.3, step_tau=10.0)
        demands = rng.integers(0, 5, size=(100_000, 4))
        reduced_flags = rng.random(100_000) < 0.5
        for d, red in zip(demands, reduced_flags):
            st = price_update(st, d, reduced=bool(red))
        assert np.all(st.mu >= 0.0)
        assert np.all(np.isfinite(st.mu))


class TestReducedUpdateSet:
    def test_optimum_reached(self):
        assert reduced_update_set([0.0, 0.0], [1, 1]) == set()

    def test_positive_price_zero_demand(self):
        assert reduced_update_set([0.1, 0.0], [0, 0]) == {0}

    def test_infeasible_tone(self):
        assert reduced_update_set([0.0, 0.0], [2, 1]) == {0}

    def test_empty_iff_zero_residual(self, rng):
        for _ in range(500):
            mu = np.where(rng.random(5) < 0.4, 0.0, rng.uniform(0, 1, 5))
            demand = rng.integers(0, 4, 5)
            upd = reduced_update_set(mu, demand)
            assert upd <= set(range(5))
            assert (len(upd) == 0) == (kkt_residual(mu, demand) == 0.0)


class TestKktResidual:
    def test_feasible_and_slack(self):
        assert kkt_residual([0.0, 0.0], [1, 0]) == 0.0

    def test_slackness_violation(self):
        assert kkt_residual([0.5, 0.0], [0, 1]) == pytest.approx(0.5)

    def test_pure_infeasibility(self):
        assert kkt_residual([0.0, 0.0], [3, 1]) == pytest.approx(2.0)

    def test_fixed_points_shared_by_both_variants(self, rng):
        for _ in range(200):
            mu = np.where(rng.random(4) < 0.5, 0.0, rng.uniform(0, 1, 4))
            demand = rng.integers(0, 3, 4)
            if kkt_residual(mu, demand) == 0.0:
                st = PriceState(mu=mu, step_alpha0=0.2, step_tau=50.0)
                full = price_update(st, demand, reduced=False)
                red = price_update(st, demand, reduced=True)
                np.testing.assert_array_equal(full.mu, st.mu)
                np.testing.assert_array_equal(red.mu, st.mu)


class TestCheckConverged:
    def test_all_below(self):
        assert check_converged([1e-4] * 5, 1e-3, 5)

    def test_short_history(self):
        assert not check_converged([1e-4] * 3, 1e-3, 5)

    def test_one_spike(self):
        assert not check_converged([1e-4, 2e-3, 1e-4, 1e-4, 1e-4], 1e-3, 5)


class TestRecoverAllocation:
    def test_single_user_gets_tone_at_full_power(self):
        sc = Scenario(num_users=1, num_tones=1, gain=[[1.0]], noise=[1.0],
                      self_noise=[0.0], snr_cap=[np.inf], power_budget=[2.0],
                      weight=[1.0])
        alloc = recover_allocation(sc, np.zeros(1))
        assert alloc.assign[0, 0]
        assert alloc.power[0, 0] == pytest.approx(2.0, abs=1e-9)

    def test_tie_breaks_to_lower_index(self):
        sc = make_symmetric(2, [1.0], power=1.0)
        alloc = recover_allocation(sc, np.zeros(1))
        assert alloc.assign[0, 0] and not alloc.assign[1, 0]

    def test_symmetric_two_by_two_reaches_optimum(self):
        sc = make_symmetric(2, [1.0, 1.0], power=1.0)
        alloc = recover_allocation(sc, np.full(2, 0.1))
        assert allocation_objective(sc, alloc) == pytest.approx(2 * LN2, abs=1e-9)
        assert alloc.assign.sum(axis=0).tolist() == [1, 1]
        assert alloc.assign.sum(axis=1).tolist() == [1, 1]
        # independent brute-force value
        ex = exhaustive_grid_solve(sc, grid_points=41)
        assert allocation_objective(sc, alloc) == pytest.approx(ex.best_value, abs=1e-9)

    def test_invariants_on_random_scenarios(self, rng):
        from tonealloc import generate_random_scenario

        for seed in range(25):
            sc = generate_random_scenario(seed, int(rng.integers(1, 5)),
                                          int(rng.integers(1, 9)))
            mu = rng.uniform(0, 1, sc.num_tones)
            alloc = recover_allocation(sc, mu)
            alloc.validate(sc)  # exclusivity, budgets, power placement
            assert allocation_objective(sc, alloc) >= 0.0


class TestAllocation:
    def test_rejects_double_assignment(self):
        sc = make_symmetric(2, [1.0], power=1.0)
        bad = Allocation(assign=np.array([[True], [True]]),
                         power=np.array([[0.5], [0.5]]))
        with pytest.raises(Exception):
            bad.validate(sc)

    def test_rejects_power_outside_assignment(self):
        sc = make_symmetric(2, [1.0, 1.0], power=1.0)
        bad = Allocation(assign=np.array([[True, False], [False, False]]),
                         power=np.array([[0.5, 0.1], [0.0, 0.0]]))
        with pytest.raises(Exception):
            bad.validate(sc)

    def test_rejects_budget_violation(self):
        sc = make_symmetric(1, [1.0, 1.0], power=1.0)
        bad = Allocation(assign=np.array([[True, True]]),
                         power=np.array([[0.7, 0.7]]))
        with pytest.raises(Exception):
            bad.validate(sc)
