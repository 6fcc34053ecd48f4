"""Deterministic message-passing simulation of the price/bid protocol.

One logical tick per round: the base station announces prices, every user
computes its best response to the prices it has most recently received and
sends a bid, and the base station aggregates bids (holding the last received
bid per user when messages are delayed or dropped) and updates prices.
Everything is a deterministic function of (scenario, config, network seed).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .basestation import (
    Allocation,
    PriceState,
    allocation_objective,
    check_converged,
    kkt_residual,
    price_update,
    recover_allocation,
    reduced_update_set,
)
from .errors import NumericalError, ValidationError
from .messages import Bid, PriceAnnounce
from .model import Scenario
from .trace import TraceRecord
from .user import ResponseSolver

__all__ = [
    "NetworkModel",
    "RunConfig",
    "RunResult",
    "DeterministicNetwork",
    "Simulation",
    "run_until_converged",
    "deliver",
]


@dataclass(frozen=True)
class NetworkModel:
    """Per-link delay in rounds plus seeded i.i.d. message drops."""

    delay_rounds: int = 0
    drop_probability: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.delay_rounds < 0:
            raise ValidationError("delay_rounds must be >= 0")
        if not (0.0 <= self.drop_probability < 1.0):
            raise ValidationError("drop_probability must be in [0, 1)")


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one distributed run."""

    max_rounds: int = 5000
    epsilon: float = 1e-3
    window: int = 5
    reduced: bool = True
    alpha0: float = 0.1
    tau: float = 50.0
    step_schedule: str = "diminishing"
    synchronous: bool = True
    stop_on_price_stability: bool = True

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        if self.epsilon <= 0 or self.window < 1:
            raise ValidationError("epsilon must be > 0 and window >= 1")


class DeterministicNetwork:
    """FIFO per-link queues with seeded drops; links processed in ascending id.

    Link ids: 0..K-1 are base station -> user (price announcements),
    K..2K-1 are user -> base station (bids).
    """

    def __init__(self, model: NetworkModel, num_users: int):
        self.model = model
        self.num_users = num_users
        self._rng = np.random.default_rng(model.rng_seed)
        self._queues: dict[int, deque] = {i: deque() for i in range(2 * num_users)}
        self.sent = 0
        self.delivered = 0
        self.dropped = 0

    def send(self, link_id: int, message, now: int) -> bool:
        """Queue a message; returns True when it was dropped instead."""
        self.sent += 1
        if self.model.drop_probability > 0.0:
            if self._rng.random() < self.model.drop_probability:
                self.dropped += 1
                return True
        self._queues[link_id].append((now + self.model.delay_rounds, message))
        return False

    def poll(self, link_id: int, now: int) -> list:
        """All messages on one link due at `now` or earlier, FIFO order."""
        out = []
        queue = self._queues[link_id]
        while queue and queue[0][0] <= now:
            out.append(queue.popleft()[1])
        self.delivered += len(out)
        return out


def deliver(network: DeterministicNetwork, now: int) -> list[tuple[int, object]]:
    """Drain every due message, links in ascending id, FIFO within a link."""
    out = []
    for link_id in range(2 * network.num_users):
        for msg in network.poll(link_id, now):
            out.append((link_id, msg))
    return out


@dataclass
class RunResult:
    allocation: Allocation
    trace: list[TraceRecord]
    rounds_used: int
    converged: bool
    converged_by: str | None
    final_prices: np.ndarray
    primal_value: float
    dual_bound: float


class Simulation:
    """World state for one distributed run (single-threaded, replayable)."""

    def __init__(
        self,
        scenario: Scenario,
        config: RunConfig,
        network: NetworkModel | None = None,
        active_users: list[int] | None = None,
    ):
        self.scenario = scenario
        self.config = config
        net_model = network or NetworkModel()
        if config.synchronous and (net_model.delay_rounds or net_model.drop_probability):
            raise ValidationError("synchronous mode requires a zero-delay, zero-drop network")
        self.users = (
            list(range(scenario.num_users)) if active_users is None else list(active_users)
        )
        self.network = DeterministicNetwork(net_model, scenario.num_users)
        n = scenario.num_tones
        self.price_state = PriceState(
            mu=np.zeros(n),
            step_alpha0=config.alpha0,
            step_tau=config.tau,
            schedule=config.step_schedule,
        )
        self.round_index = 0
        self.user_views = np.zeros((len(self.users), n))
        self.held_bids = np.zeros((len(self.users), n), dtype=bool)
        self.last_lams = np.zeros(len(self.users))
        self.trace: list[TraceRecord] = []
        self.residual_history: list[float] = []
        self.price_delta_history: list[float] = []
        self._solver = None
        if self.users:
            self._solver = ResponseSolver(
                scenario.gain[self.users],
                scenario.noise,
                scenario.self_noise[self.users],
                scenario.snr_cap[self.users],
                scenario.power_budget[self.users],
                scenario.weight[self.users],
                user_ids=self.users,
                num_users=scenario.num_users,
            )

    # -- one synchronous tick -------------------------------------------------
    def schedule_round(self) -> TraceRecord:
        sc, cfg = self.scenario, self.config
        now = self.round_index
        net = self.network
        drops_before = net.dropped
        mu = self.price_state.mu

        for i, k in enumerate(self.users):
            net.send(k, PriceAnnounce(iter=self.price_state.iter, mu=tuple(mu)), now)
        for i, k in enumerate(self.users):
            for msg in net.poll(k, now):
                self.user_views[i] = np.asarray(msg.mu)

        if self.users:
            sol = self._solver.solve(self.user_views)
            self.last_lams = sol.lam
            for i, k in enumerate(self.users):
                bid = Bid(user_id=k, demand=tuple(bool(d) for d in sol.demand[i]))
                net.send(sc.num_users + k, bid, now)
        for i, k in enumerate(self.users):
            for msg in net.poll(sc.num_users + k, now):
                self.held_bids[i] = np.asarray(msg.demand, dtype=bool)

        demand = self.held_bids.sum(axis=0).astype(int)
        residual = kkt_residual(mu, demand)
        dual = self._dual_bound(mu)
        if cfg.reduced:
            updates = len(reduced_update_set(mu, demand))
        else:
            updates = sc.num_tones
        new_state = price_update(self.price_state, demand, reduced=cfg.reduced)
        if not np.all(np.isfinite(new_state.mu)):
            raise NumericalError("non-finite tone price reached")

        record = TraceRecord(
            round=now,
            residual=residual,
            dual_value=dual,
            prices=np.array(mu),
            demand=demand,
            updates_performed=updates,
            messages_dropped=net.dropped - drops_before,
        )
        self.trace.append(record)
        self.residual_history.append(residual)
        self.price_delta_history.append(float(np.max(np.abs(new_state.mu - mu), initial=0.0)))
        self.price_state = new_state
        self.round_index += 1
        return record

    def _dual_bound(self, mu: np.ndarray) -> float:
        """Upper bound on the optimum from the users' current power prices.

        For any lambda >= 0, sum_n (v_n(lambda))_+ + lambda*P bounds a user's
        best response value, so this is a valid dual value every round.
        """
        sc = self.scenario
        if not self.users:
            return float(np.sum(mu))
        values = _responses_at(sc, self.users, self.last_lams, mu)
        return float(np.sum(np.maximum(values, 0.0))
                     + np.dot(self.last_lams, sc.power_budget[self.users])
                     + np.sum(mu))

    # -- full run -------------------------------------------------------------
    def run(self) -> RunResult:
        cfg = self.config
        converged_by = None
        while self.round_index < cfg.max_rounds:
            self.schedule_round()
            if check_converged(self.residual_history, cfg.epsilon, cfg.window):
                converged_by = "residual"
                break
            if cfg.stop_on_price_stability and check_converged(
                self.price_delta_history, cfg.epsilon, cfg.window
            ):
                converged_by = "prices"
                break
        mu = self.price_state.mu
        allocation = recover_allocation(self.scenario, mu)
        primal = allocation_objective(self.scenario, allocation)
        dual = min([r.dual_value for r in self.trace] + [exact_dual_bound(self.scenario, mu)])
        return RunResult(
            allocation=allocation,
            trace=self.trace,
            rounds_used=self.round_index,
            converged=converged_by is not None,
            converged_by=converged_by,
            final_prices=np.array(mu),
            primal_value=primal,
            dual_bound=dual,
        )


def _responses_at(scenario: Scenario, users, lams, mu) -> np.ndarray:
    """Net benefits v[k][n] at fixed per-user lambdas against common prices."""
    from .model import cap_power
    from .user import _eval_responses  # shared internal evaluator

    h = scenario.gain[users]
    sigma2 = np.broadcast_to(scenario.noise, h.shape)
    beta = scenario.self_noise[users][:, None]
    s_max = scenario.snr_cap[users][:, None]
    w = scenario.weight[users][:, None]
    q_cap = cap_power(h, sigma2, beta, s_max)
    lam_col = np.asarray(lams, dtype=float)[:, None]
    mu_b = np.broadcast_to(np.asarray(mu, dtype=float), h.shape)
    mask = np.ones(h.shape, dtype=bool)
    q, v = _eval_responses(w, np.maximum(lam_col, 1e-300), h, sigma2, beta,
                           s_max, q_cap, mu_b, mask)
    # lam == 0 only occurs when every cap is reachable; the optimum is then
    # the cap power and the rate is exactly ln(1 + s_max)
    zero = lam_col[:, 0] == 0.0
    if np.any(zero):
        v0 = w[zero] * np.log1p(s_max[zero] * np.ones((1, h.shape[1]))) - mu_b[zero]
        v[zero] = v0
    return v


def exact_dual_bound(scenario: Scenario, mu) -> float:
    """Tight dual value at mu: golden-section inner minimization over lambda."""
    from .oracle import dual_upper_bound

    return dual_upper_bound(scenario, mu)


def run_until_converged(
    scenario: Scenario,
    config: RunConfig | None = None,
    network: NetworkModel | None = None,
    active_users: list[int] | None = None,
) -> RunResult:
    """Iterate rounds until the stopping rule fires or max_rounds is reached.

    A feasible allocation is always recovered, converged or not.
    """
    sim = Simulation(scenario, config or RunConfig(), network=network,
                     active_users=active_users)
    return sim.run()
