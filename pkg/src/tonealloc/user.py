"""Per-user local computation: best responses to prices and budget bisection.

Given the tone prices mu announced by the base station, a user picks, for
each tone, the power maximizing

    f(q) = w * ln(1 + min(s(q), s_max)) - lambda * q

where lambda is its local power price. The stationary point below the cap
solves the quadratic

    beta*(1+beta)*h^2 * q^2 + (2*beta+1)*h*sigma2 * q + sigma2^2 - w*h*sigma2/lambda = 0

(positive root; for beta = 0 this degenerates to classic water-filling
q = w/lambda - sigma2/h). lambda itself is found by bisection so that the
power demanded on profitable tones (net benefit v = f(q*) - mu > 0) meets the
budget. On degenerate landings -- where a tone's net benefit crosses zero
exactly at the budget boundary, the fractional-ownership face of the relaxed
problem -- the user keeps a budget-feasible subset of the boundary tones,
chosen in a deterministic order rotated by its own id so that identical users
prefer disjoint tones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import UnboundedProblemError, ValidationError
from .model import Scenario, cap_power, cap_reachable

__all__ = [
    "BestResponse",
    "UserState",
    "BidSolution",
    "ResponseSolver",
    "per_tone_best_response",
    "power_price_bisection",
    "solve_price_responses",
    "build_bid",
    "stationary_power",
]

#: absolute tolerance on the budget, as a fraction of P[k]
BUDGET_RTOL = 1e-9
#: bisection iteration cap (interval shrinks by 2^-iter)
MAX_BISECT_ITERS = 200
#: iterations actually used; 2^-60 of the bracket is far below BUDGET_RTOL
BISECT_ITERS = 60


@dataclass(frozen=True)
class BestResponse:
    """A user's per-tone answer to the current prices.

    q is the optimal transmit power for the tone, v the net benefit
    w*r(q) - lambda*q - mu, and demand is set only if v > 0 (a user abstains
    on exact ties).
    """

    q: float
    v: float
    demand: bool


@dataclass
class UserState:
    """Mutable per-user agent state (owned by exactly one logical agent)."""

    user_id: int
    lam: float = 0.0
    q: np.ndarray | None = None
    v: np.ndarray | None = None
    demand: np.ndarray | None = None

    @property
    def last_responses(self) -> list[BestResponse]:
        if self.q is None:
            return []
        return [
            BestResponse(float(qi), float(vi), bool(di))
            for qi, vi, di in zip(self.q, self.v, self.demand)
        ]


def stationary_power(weight, lam, gain, noise, beta):
    """Power where w * r'(q) = lambda, ignoring the SINR cap. Requires lam > 0.

    Vectorized over broadcastable array inputs; returns 0 where the price
    exceeds the marginal utility at zero power. Reference implementation of
    the compiled kernel's scalar math.
    """
    w = np.asarray(weight, dtype=float)
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(gain, dtype=float)
    sigma2 = np.asarray(noise, dtype=float)
    beta = np.asarray(beta, dtype=float)

    w, lam, h, sigma2, beta = np.broadcast_arrays(w, lam, h, sigma2, beta)
    q = np.zeros(w.shape)
    active = lam < w * h / sigma2
    if np.any(active):
        wa, la, ha, sa, ba = (x[active] for x in (w, lam, h, sigma2, beta))
        a = ba * (1.0 + ba) * ha * ha
        b = (2.0 * ba + 1.0) * ha * sa
        c = sa * (sa - wa * ha / la)  # < 0 on the active set
        linear = wa / la - sa / ha
        # stable positive root -2c/(b + sqrt(b^2 - 4ac)); fall back to the
        # water-filling line when the quadratic term is negligible
        disc = b * b - 4.0 * a * c
        root = -2.0 * c / (b + np.sqrt(disc))
        use_linear = 4.0 * a * np.abs(c) < 1e-14 * b * b
        q[active] = np.where(use_linear, linear, root)
    out = np.maximum(q, 0.0)
    return out if out.ndim else float(out)


def _rate(q, h, sigma2, beta, s_max):
    hq = h * q
    s = hq / (sigma2 + beta * hq)
    return np.log1p(np.minimum(s, s_max))


def _eval_responses(w, lam, h, sigma2, beta, s_max, q_cap, mu, mask):
    """Per-tone optimal power and net benefit at a given per-user lambda.

    Pure-numpy twin of _kernels.eval_responses_kernel, kept as the reference
    for property tests.
    """
    q = stationary_power(w, lam, h, sigma2, beta)
    q = np.minimum(q, q_cap)
    v = w * _rate(q, h, sigma2, beta, s_max) - lam * q - mu
    q = np.where(mask, q, 0.0)
    v = np.where(mask, v, -np.inf)
    return q, v


def per_tone_best_response(weight, lam, mu, gain, noise, beta, s_max) -> BestResponse:
    """Solve argmax_{q >= 0} w*ln(1 + min(s(q), s_max)) - lam*q for one tone.

    Returns the maximizer q*, the net benefit v = f(q*) - mu and the demand
    indicator (v > 0). With lam = 0 the problem only has a maximizer when the
    cap is reachable, in which case q* = q_cap (the smallest maximizer);
    otherwise an UnboundedProblemError is raised.
    """
    for name, x in (("weight", weight), ("gain", gain), ("noise", noise)):
        if not (np.isfinite(x) and x > 0):
            raise ValidationError(f"{name} must be finite and > 0")
    if not (np.isfinite(lam) and lam >= 0):
        raise ValidationError("lam must be finite and >= 0")
    if not (np.isfinite(mu) and mu >= 0):
        raise ValidationError("mu must be finite and >= 0")
    if beta < 0:
        raise ValidationError("beta must be >= 0")
    if not s_max > 0:
        raise ValidationError("s_max must be > 0")

    reachable = cap_reachable(beta, s_max)
    if lam == 0.0:
        if not reachable:
            raise UnboundedProblemError(
                "lam = 0 with unreachable SNR cap: no finite maximizer"
            )
        q = cap_power(gain, noise, beta, s_max)
    else:
        q = stationary_power(weight, lam, gain, noise, beta)
        if reachable:
            q = min(q, cap_power(gain, noise, beta, s_max))
    v = float(weight * _rate(q, gain, noise, beta, s_max) - lam * q - mu)
    return BestResponse(q=float(q), v=v, demand=v > 0.0)


@dataclass
class BidSolution:
    """Vectorized best-response bundle for one or more users.

    lam has shape (K,); power, value and demand have shape (K, N). When
    fractional responses were requested, fraction holds the time-sharing
    ownership x in [0, 1] per (user, tone) used by the centralized oracle.
    """

    lam: np.ndarray
    power: np.ndarray
    value: np.ndarray
    demand: np.ndarray
    fraction: np.ndarray | None = None


class ResponseSolver:
    """Best-response solver bound to fixed user parameters.

    Builds the static arrays once so that repeated solves against changing
    prices (the simulation and oracle hot loops) stay cheap.
    """

    def __init__(self, gain, noise, beta, s_max, budget, weight,
                 tone_mask=None, user_ids=None, num_users=None):
        h = np.asarray(gain, dtype=float)
        if h.ndim == 1:
            h = h[None, :]
        self.num_k, self.num_n = h.shape
        self.h = np.ascontiguousarray(h)
        self.s2v = np.ascontiguousarray(np.broadcast_to(
            np.asarray(noise, dtype=float), (self.num_n,)))
        self.beta = np.ascontiguousarray(np.asarray(beta, dtype=float).reshape(self.num_k))
        self.s_max = np.ascontiguousarray(np.asarray(s_max, dtype=float).reshape(self.num_k))
        self.budget = np.ascontiguousarray(np.asarray(budget, dtype=float).reshape(self.num_k))
        self.w = np.ascontiguousarray(np.asarray(weight, dtype=float).reshape(self.num_k))
        self.mask = (
            np.ones((self.num_k, self.num_n), dtype=bool)
            if tone_mask is None
            else np.ascontiguousarray(
                np.asarray(tone_mask, dtype=bool).reshape(self.num_k, self.num_n))
        )
        self.ids = (np.arange(self.num_k) if user_ids is None
                    else np.asarray(user_ids, dtype=int))
        self.total_users = self.num_k if num_users is None else int(num_users)

        self.q_cap = np.ascontiguousarray(cap_power(
            self.h, self.s2v[None, :], self.beta[:, None], self.s_max[:, None]))
        reach = cap_reachable(self.beta[:, None], self.s_max[:, None])
        self.reach_row = np.all(reach | ~self.mask, axis=1)
        self.lam_hi = np.max(
            np.where(self.mask, self.w[:, None] * self.h / self.s2v, 0.0), axis=1)
        self.empty = ~self.mask.any(axis=1)
        # value of a capped tone at lam = 0: the rate there is ln(1 + s_max)
        with np.errstate(invalid="ignore"):
            self.v0_base = self.w[:, None] * np.log1p(
                np.where(reach, self.s_max[:, None], 0.0)) * np.ones((1, self.num_n))
        self.cap_row_power = np.where(self.mask & reach, self.q_cap, 0.0)
        self.stride = max(1, self.num_n // max(self.total_users, 1))

    def solve(self, prices, fractional: bool = False) -> BidSolution:
        """Best responses of every bound user to `prices` ((N,) or (K, N))."""
        mu = np.asarray(prices, dtype=float)
        if mu.ndim == 1:
            mu = np.broadcast_to(mu, (self.num_k, self.num_n))
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValidationError("prices must be finite and >= 0")

        lam = np.zeros(self.num_k)
        power = np.zeros((self.num_k, self.num_n))
        value = np.where(self.mask, -mu, -np.inf)
        demand = np.zeros((self.num_k, self.num_n), dtype=bool)
        fraction = np.zeros((self.num_k, self.num_n)) if fractional else None

        # --- lam = 0 path: every cap reachable and capped demand fits ---
        v0 = np.where(self.mask, self.v0_base - mu, -np.inf)
        d0 = v0 > 0.0
        dem0 = np.where(d0, self.cap_row_power, 0.0).sum(axis=1)
        free = self.reach_row & (dem0 <= self.budget) & ~self.empty
        if np.any(free):
            power[free] = np.where(d0[free], self.cap_row_power[free], 0.0)
            value[free] = v0[free]
            demand[free] = d0[free]
            if fractional:
                fraction[free] = d0[free].astype(float)

        # --- bisection path: smallest lam with demanded power <= budget ---
        todo = ~free & ~self.empty
        if np.any(todo):
            idx = np.flatnonzero(todo)
            hs = np.ascontiguousarray(self.h[idx])
            bs = np.ascontiguousarray(self.beta[idx])
            sm = np.ascontiguousarray(self.s_max[idx])
            qc = np.ascontiguousarray(self.q_cap[idx])
            ws = np.ascontiguousarray(self.w[idx])
            pb = np.ascontiguousarray(self.budget[idx])
            ms = np.ascontiguousarray(mu[idx])
            msk = np.ascontiguousarray(self.mask[idx])
            lo = np.zeros(idx.size)
            hi = self.lam_hi[idx].copy()
            hi[hi <= 0] = 1.0
            _k.bisect_kernel(hs, self.s2v, bs, sm, qc, ws, pb, ms, msk,
                             lo, hi, BISECT_ITERS)

            q_hi = np.empty_like(hs)
            v_hi = np.empty_like(hs)
            _k.eval_responses_kernel(hi, hs, self.s2v, bs, sm, qc, ws, ms, msk,
                                     q_hi, v_hi)
            d_hi = v_hi > 0.0
            p_used = np.where(d_hi, q_hi, 0.0).sum(axis=1)
            slack = pb - p_used

            lam[idx] = hi
            power[idx] = np.where(d_hi, q_hi, 0.0)
            value[idx] = v_hi
            demand[idx] = d_hi
            if fractional:
                fraction[idx] = d_hi.astype(float)

            # degenerate landings: budget slack with boundary tones at v ~ 0;
            # take them from the infeasible side of the bracket
            loose = np.flatnonzero(slack > BUDGET_RTOL * pb)
            if loose.size:
                q_lo = np.empty_like(hs)
                v_lo = np.empty_like(hs)
                _k.eval_responses_kernel(lo, hs, self.s2v, bs, sm, qc, ws, ms,
                                         msk, q_lo, v_lo)
                for j in loose:
                    g = idx[j]
                    cand = np.flatnonzero((v_lo[j] > 0.0) & ~d_hi[j])
                    if cand.size == 0:
                        continue
                    if fractional:
                        pool = float(np.sum(q_lo[j, cand]))
                        if pool > 0.0:
                            fraction[g, cand] = min(1.0, float(slack[j]) / pool)
                        continue
                    rot = (cand - self.ids[g] * self.stride) % self.num_n
                    order = cand[np.lexsort((rot, -v_lo[j, cand]))]
                    room = float(slack[j])
                    for n in order:
                        qn = float(q_lo[j, n])
                        if qn <= room + 1e-12 * pb[j]:
                            demand[g, n] = True
                            power[g, n] = qn
                            value[g, n] = v_lo[j, n]
                            room -= qn

        return BidSolution(lam=lam, power=power, value=value, demand=demand,
                           fraction=fraction)


def solve_price_responses(
    gain,
    noise,
    beta,
    s_max,
    budget,
    weight,
    prices,
    tone_mask=None,
    user_ids=None,
    num_users=None,
    fractional=False,
) -> BidSolution:
    """Best responses to tone prices for a block of users at once.

    Args:
        gain: (K, N) channel gains.
        noise: (N,) noise powers.
        beta, s_max, budget, weight: (K,) per-user parameters.
        prices: (N,) common prices, or (K, N) per-user price views.
        tone_mask: optional (K, N) bool; False excludes a tone from the solve
            (used when re-filling power on won tones at recovery time).
        user_ids: (K,) ids used for the rotated degenerate tie-break.
        num_users: total user count (public constant; sets the rotation stride).
        fractional: also return relaxed time-sharing fractions (oracle use).

    Returns:
        BidSolution with the budget price lam per user, and per-tone powers,
        net benefits and demand indicators. Power is nonzero only on demanded
        tones and sums to at most budget*(1 + 1e-9) per user.
    """
    solver = ResponseSolver(gain, noise, beta, s_max, budget, weight,
                            tone_mask=tone_mask, user_ids=user_ids,
                            num_users=num_users)
    return solver.solve(prices, fractional=fractional)


def _row_solution(scenario: Scenario, user_id: int, prices, tones=None) -> BidSolution:
    row = scenario.user_row(user_id)
    tone_mask = None
    if tones is not None:
        tone_mask = np.zeros((1, scenario.num_tones), dtype=bool)
        tone_mask[0, list(tones)] = True
    return solve_price_responses(
        row["gain"][None, :],
        row["noise"],
        [row["beta"]],
        [row["s_max"]],
        [row["power_budget"]],
        [row["weight"]],
        prices,
        tone_mask=tone_mask,
        user_ids=[user_id],
        num_users=scenario.num_users,
    )


def power_price_bisection(
    user: UserState, scenario: Scenario, prices, tones=None
) -> tuple[float, list[BestResponse]]:
    """Find the smallest power price lambda fitting user `user` into its budget.

    The demanded power D(lambda) -- the sum of per-tone optimal powers over
    tones with positive net benefit -- is nonincreasing in lambda. If D(0)
    fits the budget the price is zero (complementary slackness); otherwise
    lambda is bisected until the demanded power matches the budget to within
    1e-9 * P[k], except on fractional-boundary landings where the budget may
    be left partially slack by design.

    Updates `user` in place and returns (lambda, per-tone responses). An
    optional tone subset restricts the solve (used for primal recovery).
    """
    sol = _row_solution(scenario, user.user_id, prices, tones=tones)
    user.lam = float(sol.lam[0])
    user.q = sol.power[0].copy()
    user.v = np.where(np.isfinite(sol.value[0]), sol.value[0], 0.0)
    user.demand = sol.demand[0].copy()
    return user.lam, user.last_responses


def build_bid(user: UserState):
    """Construct the user's bid message: demand indicators and id only.

    No channel gains, powers or utilities leave the user.
    """
    from .messages import Bid

    if user.demand is None:
        raise ValidationError("no responses computed yet for this user")
    return Bid(user_id=user.user_id, demand=tuple(bool(d) for d in user.demand))
