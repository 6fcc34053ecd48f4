"""Base-station side: projected subgradient tone pricing, reduced updates,
KKT residual, convergence detection and feasible primal recovery."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .errors import ValidationError
from .model import Scenario, cap_power

__all__ = [
    "PriceState",
    "Allocation",
    "price_update",
    "reduced_update_set",
    "kkt_residual",
    "check_converged",
    "recover_allocation",
    "allocation_objective",
]


@dataclass(frozen=True)
class PriceState:
    """Dual state: one nonnegative price per tone plus the step schedule."""

    mu: np.ndarray
    iter: int = 0
    step_alpha0: float = 0.1
    step_tau: float = 50.0
    schedule: str = "diminishing"

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValidationError("mu must be a finite nonnegative vector")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if self.step_alpha0 <= 0 or self.step_tau <= 0:
            raise ValidationError("step parameters must be > 0")
        if self.schedule not in ("diminishing", "constant"):
            raise ValidationError("schedule must be 'diminishing' or 'constant'")

    def step_size(self) -> float:
        if self.schedule == "constant":
            return self.step_alpha0
        return self.step_alpha0 / (1.0 + self.iter / self.step_tau)


def reduced_update_set(mu, demand) -> set[int]:
    """Tones violating feasibility or complementary slackness.

    U = { n : demand[n] > 1 } union { n : demand[n] < 1 and mu[n] > 0 }.
    Empty exactly when the KKT residual is zero.
    """
    mu = np.asarray(mu, dtype=float)
    demand = np.asarray(demand)
    over = demand > 1
    slack = (demand < 1) & (mu > 0)
    return set(np.flatnonzero(over | slack).tolist())


def price_update(state: PriceState, demand, reduced: bool) -> PriceState:
    """One projected subgradient step mu <- [mu + alpha*(demand - 1)]_+.

    The full variant touches every tone; the reduced variant only the tones
    in reduced_update_set (unnecessary updates are skipped -- prices already
    consistent with their tone's demand stay put).
    """
    demand = np.asarray(demand, dtype=float)
    alpha = state.step_size()
    mu = np.array(state.mu, dtype=float)
    if reduced:
        upd = sorted(reduced_update_set(state.mu, demand))
        if upd:
            idx = np.asarray(upd, dtype=int)
            mu[idx] = np.maximum(0.0, mu[idx] + alpha * (demand[idx] - 1.0))
    else:
        mu = np.maximum(0.0, mu + alpha * (demand - 1.0))
    return replace(state, mu=mu, iter=state.iter + 1)


def kkt_residual(mu, demand) -> float:
    """max over tones of max(demand - 1, mu*(1 - demand), 0).

    Zero iff every tone is feasible (demand <= 1) and complementary slackness
    holds (mu > 0 implies demand = 1).
    """
    mu = np.asarray(mu, dtype=float)
    demand = np.asarray(demand, dtype=float)
    if mu.size == 0:
        return 0.0
    terms = np.maximum(demand - 1.0, mu * (1.0 - demand))
    return float(max(np.max(terms), 0.0))


def check_converged(history, epsilon: float = 1e-3, window: int = 5) -> bool:
    """True iff the last `window` entries of `history` are all below epsilon."""
    if epsilon <= 0 or window < 1:
        raise ValidationError("epsilon must be > 0 and window >= 1")
    hist = list(history)
    if len(hist) < window:
        return False
    return all(h < epsilon for h in hist[-window:])


@dataclass(frozen=True)
class Allocation:
    """Feasible primal point: exclusive tone ownership plus budgeted powers."""

    assign: np.ndarray  # (K, N) bool, column sums <= 1
    power: np.ndarray   # (K, N) >= 0, zero wherever assign is False

    def validate(self, scenario: Scenario) -> None:
        k, n = scenario.num_users, scenario.num_tones
        if self.assign.shape != (k, n) or self.power.shape != (k, n):
            raise ValidationError("allocation shape mismatch")
        if np.any(self.assign.sum(axis=0) > 1):
            raise ValidationError("a tone is assigned to more than one user")
        if np.any(self.power < 0):
            raise ValidationError("negative power in allocation")
        if np.any((self.power > 0) & ~self.assign):
            raise ValidationError("power on an unassigned tone")
        budget = scenario.power_budget * (1.0 + 1e-9)
        if np.any(self.power.sum(axis=1) > budget):
            raise ValidationError("a user exceeds its power budget")


def allocation_objective(scenario: Scenario, alloc: Allocation) -> float:
    """Weighted sum rate of a feasible allocation, in nats."""
    h = scenario.gain
    sigma2 = scenario.noise[None, :]
    beta = scenario.self_noise[:, None]
    s_max = scenario.snr_cap[:, None]
    hq = h * alloc.power
    s = hq / (sigma2 + beta * hq)
    rates = np.log1p(np.minimum(s, s_max))
    return float(np.sum(scenario.weight[:, None] * np.where(alloc.assign, rates, 0.0)))


class _SubsetValues:
    """Cached optimal water-filling value of a user's budget over a tone set."""

    def __init__(self, scenario: Scenario):
        sc = scenario
        self.num_tones = sc.num_tones
        self._h = np.ascontiguousarray(sc.gain)
        self._s2 = np.ascontiguousarray(sc.noise)
        self._beta = sc.self_noise
        self._smax = sc.snr_cap
        self._w = sc.weight
        self._p = sc.power_budget
        self._qcap = np.ascontiguousarray(cap_power(
            self._h, self._s2[None, :], self._beta[:, None], self._smax[:, None]))
        self._cache: dict[tuple[int, frozenset], tuple[float, np.ndarray]] = {}

    def value(self, k: int, tones: frozenset) -> float:
        return self._entry(k, tones)[0]

    def powers(self, k: int, tones: frozenset) -> np.ndarray:
        return self._entry(k, tones)[1]

    def _entry(self, k: int, tones: frozenset):
        key = (k, tones)
        if key not in self._cache:
            n = self.num_tones
            q = np.zeros(n)
            if not tones:
                self._cache[key] = (0.0, q)
            else:
                mask = np.zeros(n, dtype=bool)
                mask[sorted(tones)] = True
                val = _k.waterfill_kernel(
                    self._h[k], self._s2, float(self._beta[k]),
                    float(self._smax[k]), self._qcap[k], float(self._w[k]),
                    float(self._p[k]), mask, 60, q,
                )
                self._cache[key] = (float(val), q)
        return self._cache[key]


class _Assignment:
    """Mutable tone ownership worked on by the recovery local search."""

    def __init__(self, k_total: int, n_total: int, vals: _SubsetValues):
        self.k_total = k_total
        self.n_total = n_total
        self.vals = vals
        self.won: list[frozenset] = [frozenset() for _ in range(k_total)]
        self.owner: list[int | None] = [None] * n_total

    def clone(self) -> "_Assignment":
        other = _Assignment(self.k_total, self.n_total, self.vals)
        other.won = list(self.won)
        other.owner = list(self.owner)
        return other

    def total(self) -> float:
        return sum(self.vals.value(k, self.won[k]) for k in range(self.k_total))

    def apply_move(self, n: int, dst: int | None) -> None:
        src = self.owner[n]
        if src is not None:
            self.won[src] = self.won[src] - {n}
        if dst is not None:
            self.won[dst] = self.won[dst] | {n}
        self.owner[n] = dst

    def move_gain(self, n: int, dst: int) -> float:
        src = self.owner[n]
        gain = self.vals.value(dst, self.won[dst] | {n}) - self.vals.value(dst, self.won[dst])
        if src is not None:
            gain -= self.vals.value(src, self.won[src]) - self.vals.value(src, self.won[src] - {n})
        return gain

    def swap_gain(self, n: int, m: int) -> float:
        a, b = self.owner[n], self.owner[m]
        gain = 0.0
        if a is not None:
            gain += self.vals.value(a, (self.won[a] - {n}) | {m}) - self.vals.value(a, self.won[a])
        if b is not None:
            gain += self.vals.value(b, (self.won[b] - {m}) | {n}) - self.vals.value(b, self.won[b])
        return gain

    def apply_swap(self, n: int, m: int) -> None:
        a, b = self.owner[n], self.owner[m]
        if a is not None:
            self.won[a] = (self.won[a] - {n}) | {m}
        if b is not None:
            self.won[b] = (self.won[b] - {m}) | {n}
        self.owner[n], self.owner[m] = b, a


def _greedy_seed(state: _Assignment, mu: np.ndarray) -> None:
    """Claim tones by largest marginal net benefit (value gain minus price)."""
    unassigned = set(range(state.n_total))
    vals = state.vals
    while unassigned:
        best = None  # (delta, k, n)
        for k in range(state.k_total):
            base = vals.value(k, state.won[k])
            for n in sorted(unassigned):
                delta = vals.value(k, state.won[k] | {n}) - base - mu[n]
                if delta > 0.0 and (
                    best is None
                    or delta > best[0]
                    or (delta == best[0] and (k, n) < (best[1], best[2]))
                ):
                    best = (delta, k, n)
        if best is None:
            break
        _, k, n = best
        state.apply_move(n, k)
        unassigned.discard(n)


def _polish(state: _Assignment) -> None:
    """Deterministic local search: single moves, tone swaps, then move pairs."""
    k_total, n_total = state.k_total, state.n_total

    def _best_single():
        best = None  # (gain, kind, payload)
        for n in range(n_total):
            for dst in range(k_total):
                if dst == state.owner[n]:
                    continue
                gain = state.move_gain(n, dst)
                if gain > 1e-12 and (best is None or gain > best[0]):
                    best = (gain, "move", (n, dst))
        for n in range(n_total):
            for m in range(n + 1, n_total):
                if state.owner[n] == state.owner[m]:
                    continue
                gain = state.swap_gain(n, m)
                if gain > 1e-12 and (best is None or gain > best[0]):
                    best = (gain, "swap", (n, m))
        return best

    for _ in range(4):
        # 2-exchange until it stalls
        for _ in range(8 * n_total):
            best = _best_single()
            if best is None:
                break
            _, kind, payload = best
            if kind == "move":
                state.apply_move(*payload)
            else:
                state.apply_swap(*payload)

        # escape chains the 2-exchange cannot see: lead with one of the
        # least-damaging moves, then respond with the best single move
        candidates = []
        for n in range(n_total):
            for dst in range(k_total):
                if dst == state.owner[n]:
                    continue
                candidates.append((state.move_gain(n, dst), n, dst))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        best_pair = None  # (gain, first, second)
        for lead_gain, n, dst in candidates[:12]:
            trial = state.clone()
            trial.apply_move(n, dst)
            for m in range(n_total):
                for dst2 in range(k_total):
                    if dst2 == trial.owner[m] or m == n:
                        continue
                    gain = lead_gain + trial.move_gain(m, dst2)
                    if gain > 1e-12 and (best_pair is None or gain > best_pair[0]):
                        best_pair = (gain, (n, dst), (m, dst2))
        if best_pair is None:
            break
        state.apply_move(*best_pair[1])
        state.apply_move(*best_pair[2])


def recover_allocation(scenario: Scenario, mu) -> Allocation:
    """Turn converged prices into an exclusive, budget-feasible allocation.

    Tones are claimed greedily: at each step the (user, tone) pair with the
    largest marginal net benefit -- the gain in the user's water-filling value
    from adding the tone, minus the tone price -- wins (ties by lowest user
    index, then lowest tone index); tones nobody values above their price stay
    unassigned. A deterministic local search (single moves, tone swaps, move
    pairs, run from both the price-greedy and the free-price-greedy seeds)
    then polishes the true objective, and every user finally re-runs its
    budget bisection restricted to the tones it won.
    """
    mu = np.asarray(mu, dtype=float)
    k_total, n_total = scenario.num_users, scenario.num_tones
    vals = _SubsetValues(scenario)

    best_state = None
    best_total = -np.inf
    for seed_prices in (mu, np.zeros(n_total)):
        state = _Assignment(k_total, n_total, vals)
        _greedy_seed(state, seed_prices)
        _polish(state)
        total = state.total()
        if total > best_total + 1e-15:
            best_total = total
            best_state = state

    assign = np.zeros((k_total, n_total), dtype=bool)
    power = np.zeros((k_total, n_total))
    for k in range(k_total):
        if best_state.won[k]:
            assign[k, sorted(best_state.won[k])] = True
            power[k] = vals.powers(k, best_state.won[k])
    alloc = Allocation(assign=assign, power=power)
    alloc.validate(scenario)
    return alloc
