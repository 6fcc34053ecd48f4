"""Centralized reference solvers used for verification.

dual_oracle_solve runs the tone-price subgradient centrally with full
information: users answer with relaxed (time-sharing) tone fractions, the
dual value is evaluated with an exact inner minimization over each user's
power price, and the best dual value seen is tracked. exhaustive_grid_solve
brute-forces tiny instances by enumerating every exclusive tone assignment
and gridding each user's budget split.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .basestation import Allocation, allocation_objective, recover_allocation
from .errors import NumericalError, SizeError, ValidationError
from .model import Scenario, cap_power, cap_reachable
from .user import ResponseSolver

__all__ = [
    "OracleResult",
    "ExhaustiveResult",
    "dual_upper_bound",
    "dual_oracle_solve",
    "exhaustive_grid_solve",
]


def dual_upper_bound(scenario: Scenario, mu) -> float:
    """Tight dual value g(mu) = sum_k min_lam phi_k(lam; mu) + sum_n mu_n.

    phi_k(lam) = sum_n (F_n(lam) - mu_n)_+ + lam*P is convex in lam (a
    pointwise max of affine functions plus a linear term), so a golden-section
    search over (0, lam_hi] finds the minimum; the lam = 0 endpoint is checked
    separately for users whose caps are all reachable. Any lam gives a valid
    upper bound by weak duality, so the returned value is a certificate
    regardless of search precision.
    """
    mu = np.ascontiguousarray(mu, dtype=float)
    h = np.ascontiguousarray(scenario.gain)
    sigma2 = np.ascontiguousarray(scenario.noise)
    beta = np.ascontiguousarray(scenario.self_noise)
    s_max = np.ascontiguousarray(scenario.snr_cap)
    w = np.ascontiguousarray(scenario.weight)
    q_cap = np.ascontiguousarray(
        cap_power(h, sigma2[None, :], beta[:, None], s_max[:, None])
    )
    lam_hi = np.max(w[:, None] * h / sigma2, axis=1)
    lam_lo = 1e-14 * lam_hi
    best = _k.phi_min_kernel(h, sigma2, beta, s_max, q_cap, w,
                             np.ascontiguousarray(scenario.power_budget),
                             mu, lam_lo, lam_hi, 90)

    reachable = cap_reachable(scenario.self_noise, scenario.snr_cap)
    if np.any(reachable):
        v0 = (scenario.weight[:, None]
              * np.log1p(np.where(reachable, scenario.snr_cap, 0.0))[:, None]
              - mu[None, :])
        phi0 = np.sum(np.maximum(v0, 0.0), axis=1)
        best = np.where(reachable, np.minimum(best, phi0), best)
    return float(np.sum(best) + np.sum(mu))


@dataclass
class OracleResult:
    dual_value: float
    mu: np.ndarray
    allocation: Allocation
    primal_value: float
    gap: float
    iters_used: int


def dual_oracle_solve(
    scenario: Scenario,
    iters: int = 50000,
    tol: float = 1e-9,
    alpha0: float = 0.1,
    tau: float = 50.0,
    eval_every: int = 25,
    patience: int = 1000,
) -> OracleResult:
    """Centralized dual solve with best-dual-value tracking.

    Runs projected subgradient descent on the tone prices using relaxed
    (fractional) user responses, evaluates the exact dual value every
    `eval_every` iterations and stops early once the best value has not
    improved by more than tol (relative) within `patience` iterations.
    """
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if tol <= 0:
        raise ValidationError("tol must be > 0")
    n = scenario.num_tones
    solver = ResponseSolver(
        scenario.gain, scenario.noise, scenario.self_noise, scenario.snr_cap,
        scenario.power_budget, scenario.weight,
    )
    mu = np.zeros(n)
    best_g = np.inf
    best_mu = mu.copy()
    last_improve = 0
    t = 0
    for t in range(iters):
        if t % eval_every == 0:
            g = dual_upper_bound(scenario, mu)
            if not np.isfinite(g):
                raise NumericalError("non-finite dual value in oracle")
            if g < best_g - tol * max(1.0, abs(best_g)):
                last_improve = t
            if g < best_g:
                best_g = g
                best_mu = mu.copy()
            if t - last_improve >= patience and t >= 2 * patience:
                break
        sol = solver.solve(mu, fractional=True)
        alpha = alpha0 / (1.0 + t / tau)
        mu = np.maximum(0.0, mu + alpha * (sol.fraction.sum(axis=0) - 1.0))
        if not np.all(np.isfinite(mu)):
            raise NumericalError("non-finite tone price in oracle")

    g = dual_upper_bound(scenario, mu)
    if g < best_g:
        best_g, best_mu = g, mu.copy()
    allocation = recover_allocation(scenario, best_mu)
    primal = allocation_objective(scenario, allocation)
    if not best_g >= primal - 1e-9:
        raise NumericalError(
            f"weak duality violated: dual {best_g!r} < primal {primal!r}"
        )
    return OracleResult(
        dual_value=best_g,
        mu=best_mu,
        allocation=allocation,
        primal_value=primal,
        gap=best_g - primal,
        iters_used=t + 1,
    )


@dataclass
class ExhaustiveResult:
    best_value: float
    allocation: Allocation
    error_bound: float


def _subset_value(scenario: Scenario, k: int, tones: tuple[int, ...],
                  grid_points: int) -> tuple[float, np.ndarray]:
    """Best gridded budget split of user k across `tones` (value, powers)."""
    if not tones:
        return 0.0, np.zeros(scenario.num_tones)
    row = scenario.user_row(k)
    p = row["power_budget"]
    axis = np.linspace(0.0, p, grid_points)
    grids = np.meshgrid(*([axis] * len(tones)), indexing="ij")
    q = np.stack([g.ravel() for g in grids], axis=1)  # (points, |tones|)
    q = q[q.sum(axis=1) <= p * (1.0 + 1e-12)]
    h = row["gain"][list(tones)][None, :]
    sigma2 = row["noise"][list(tones)][None, :]
    hq = h * q
    s = hq / (sigma2 + row["beta"] * hq)
    vals = row["weight"] * np.sum(np.log1p(np.minimum(s, row["s_max"])), axis=1)
    i = int(np.argmax(vals))
    powers = np.zeros(scenario.num_tones)
    powers[list(tones)] = q[i]
    return float(vals[i]), powers


def exhaustive_grid_solve(scenario: Scenario, grid_points: int = 201) -> ExhaustiveResult:
    """Brute-force tiny instances: every assignment, gridded power splits.

    Enumerates every exclusive tone assignment (each tone to one user or
    unassigned) and, independently per user, the best budget split over its
    won tones on a grid of `grid_points` levels per tone. The reported error
    bound versus the true optimum is sum_k L_k * N * P_k / (2*(grid_points-1))
    with L_k the user's largest rate slope at zero power; refining the grid
    on nested levels never decreases the best value.
    """
    k_total, n_total = scenario.num_users, scenario.num_tones
    if k_total > 3 or n_total > 3:
        raise SizeError("exhaustive solve limited to K <= 3 and N <= 3")
    if grid_points < 2:
        raise ValidationError("grid_points must be >= 2")

    subset_best: list[dict[tuple[int, ...], tuple[float, np.ndarray]]] = []
    for k in range(k_total):
        per_user = {}
        for r in range(n_total + 1):
            for tones in itertools.combinations(range(n_total), r):
                per_user[tones] = _subset_value(scenario, k, tones, grid_points)
        subset_best.append(per_user)

    best_value = -np.inf
    best_assignment = None
    for assignment in itertools.product(range(-1, k_total), repeat=n_total):
        won = [tuple(n for n in range(n_total) if assignment[n] == k)
               for k in range(k_total)]
        value = sum(subset_best[k][won[k]][0] for k in range(k_total))
        if value > best_value:
            best_value = value
            best_assignment = assignment

    assign = np.zeros((k_total, n_total), dtype=bool)
    power = np.zeros((k_total, n_total))
    for k in range(k_total):
        tones = tuple(n for n in range(n_total) if best_assignment[n] == k)
        if tones:
            assign[k, list(tones)] = True
            power[k] = subset_best[k][tones][1]
    alloc = Allocation(assign=assign, power=power)
    alloc.validate(scenario)

    slopes = np.max(scenario.weight[:, None] * scenario.gain / scenario.noise, axis=1)
    bound = float(np.sum(slopes * scenario.power_budget) * n_total
                  / (2.0 * (grid_points - 1)))
    return ExhaustiveResult(best_value=float(best_value), allocation=alloc,
                            error_bound=bound)
