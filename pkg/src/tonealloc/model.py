"""Pure mathematical core: effective SINR with self-noise, capped rate, derivative.

All rates are in nats (natural log). The self-noise model is multiplicative
received-power leakage,

    s(q) = h*q / (sigma2 + beta*h*q),

which is strictly increasing in q and saturates at 1/beta for beta > 0. The
usable SINR is additionally capped at s_max, so the rate is

    r(q) = ln(1 + min(s(q), s_max)).

When the cap is reachable (beta*s_max < 1 and s_max finite) the rate is
constant for q >= q_cap = sigma2*s_max / (h*(1 - beta*s_max)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "Scenario",
    "effective_sinr",
    "capped_rate",
    "rate_derivative",
    "cap_reachable",
    "cap_power",
]


def _check_power(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValidationError("power q must be finite")
    if np.any(q < 0):
        raise ValidationError("power q must be >= 0")
    return q


def effective_sinr(q, h, sigma2, beta):
    """Effective SINR s(q) = h*q / (sigma2 + beta*h*q).

    Strictly increasing in q, s(0) = 0, and sup_q s(q) = 1/beta when beta > 0.
    Accepts scalars or broadcastable arrays; raises on negative/non-finite q.
    """
    q = _check_power(q)
    hq = np.asarray(h, dtype=float) * q
    out = hq / (np.asarray(sigma2, dtype=float) + np.asarray(beta, dtype=float) * hq)
    return out if out.ndim else float(out)


def cap_reachable(beta, s_max):
    """True where the SINR cap can be met with finite power."""
    beta = np.asarray(beta, dtype=float)
    s_max = np.asarray(s_max, dtype=float)
    finite = np.isfinite(s_max)
    out = finite & (beta * np.where(finite, s_max, 0.0) < 1.0)
    return out if out.ndim else bool(out)


def cap_power(h, sigma2, beta, s_max):
    """Smallest power reaching the cap, q_cap = sigma2*s_max/(h*(1-beta*s_max)).

    Returns +inf where the cap is unreachable.
    """
    h = np.asarray(h, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    beta = np.asarray(beta, dtype=float)
    s_max = np.asarray(s_max, dtype=float)
    reach = cap_reachable(beta, s_max)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = sigma2 * s_max / (h * (1.0 - beta * s_max))
    out = np.where(reach, q, np.inf)
    return out if out.ndim else float(out)


def capped_rate(q, h, sigma2, beta, s_max):
    """Rate r(q) = ln(1 + min(s(q), s_max)) in nats.

    Nondecreasing and concave in q; constant for q >= q_cap when the cap is
    reachable.
    """
    s = effective_sinr(q, h, sigma2, beta)
    out = np.log1p(np.minimum(s, np.asarray(s_max, dtype=float)))
    return out if np.ndim(out) else float(out)


def rate_derivative(q, h, sigma2, beta, s_max):
    """dr/dq = h*sigma2 / ((sigma2 + beta*h*q)(sigma2 + (1+beta)*h*q)) below the cap.

    Zero above q_cap; exactly at q_cap the left limit is returned (the kink is
    only ever used for bracketing). Strictly decreasing on [0, q_cap).
    """
    q = _check_power(q)
    h = np.asarray(h, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    beta = np.asarray(beta, dtype=float)
    hq = h * q
    slope = h * sigma2 / ((sigma2 + beta * hq) * (sigma2 + (1.0 + beta) * hq))
    qc = cap_power(h, sigma2, beta, s_max)
    out = np.where(q <= qc, slope, 0.0)
    return out if out.ndim else float(out)


def _bad(name: str, index, why: str) -> ValidationError:
    if index is None:
        return ValidationError(f"{name} {why}")
    return ValidationError(f"{name}[{index}] {why}")


def _check_vector(name: str, arr: np.ndarray, n: int, positive: bool,
                  allow_inf: bool = False) -> None:
    if arr.shape != (n,):
        raise _bad(name, None, f"must have {n} entries (got {arr.size})")
    for i, x in enumerate(arr):
        if np.isnan(x) or (not allow_inf and not np.isfinite(x)):
            raise _bad(name, i, "must be finite")
        if positive and not x > 0:
            raise _bad(name, i, "must be > 0")
        if not positive and x < 0:
            raise _bad(name, i, "must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """Static problem instance for uplink tone/power allocation.

    Attributes:
        num_users: number of users K (>= 1).
        num_tones: number of tones N (>= 1).
        gain: (K, N) linear power gains h[k][n], all > 0.
        noise: (N,) receiver noise powers sigma2[n] in watts, all > 0.
        self_noise: (K,) self-noise coefficients beta[k] >= 0.
        snr_cap: (K,) maximum effective SINR s_max[k], > 0 or +inf.
        power_budget: (K,) per-user power budgets P[k] in watts, all > 0.
        weight: (K,) utility weights w[k], all > 0.

    Immutable after construction and safe to share between threads.
    """

    num_users: int
    num_tones: int
    gain: np.ndarray
    noise: np.ndarray
    self_noise: np.ndarray
    snr_cap: np.ndarray
    power_budget: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        k, n = int(self.num_users), int(self.num_tones)
        if k < 1:
            raise ValidationError("num_users must be >= 1")
        if n < 1:
            raise ValidationError("num_tones must be >= 1")
        object.__setattr__(self, "num_users", k)
        object.__setattr__(self, "num_tones", n)

        gain = np.array(self.gain, dtype=float)
        if gain.shape != (k, n):
            raise _bad("gain", None,
                       f"must be {k}x{n} (got shape {'x'.join(map(str, gain.shape))})")
        for i in range(k):
            for j in range(n):
                x = gain[i, j]
                if not np.isfinite(x):
                    raise _bad("gain", f"{i}][{j}", "must be finite")
                if not x > 0:
                    raise _bad("gain", f"{i}][{j}", "must be > 0")

        noise = np.array(self.noise, dtype=float)
        _check_vector("noise", noise, n, positive=True)
        self_noise = np.array(self.self_noise, dtype=float)
        _check_vector("self_noise", self_noise, k, positive=False)
        snr_cap = np.array(self.snr_cap, dtype=float)
        if snr_cap.shape != (k,):
            raise _bad("snr_cap", None, f"must have {k} entries (got {snr_cap.size})")
        for i, x in enumerate(snr_cap):
            if np.isnan(x):
                raise _bad("snr_cap", i, "must not be NaN")
            if not x > 0:
                raise _bad("snr_cap", i, "must be > 0")
        power_budget = np.array(self.power_budget, dtype=float)
        _check_vector("power_budget", power_budget, k, positive=True)
        weight = np.array(self.weight, dtype=float)
        _check_vector("weight", weight, k, positive=True)

        for name, arr in (("gain", gain), ("noise", noise),
                          ("self_noise", self_noise), ("snr_cap", snr_cap),
                          ("power_budget", power_budget), ("weight", weight)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def user_row(self, k: int) -> dict:
        """Per-user parameters as a plain dict (local view of user k)."""
        return {
            "gain": self.gain[k],
            "noise": self.noise,
            "beta": float(self.self_noise[k]),
            "s_max": float(self.snr_cap[k]),
            "power_budget": float(self.power_budget[k]),
            "weight": float(self.weight[k]),
        }

    def equals(self, other: "Scenario") -> bool:
        """Field-for-field equality (exact float comparison)."""
        return (
            self.num_users == other.num_users
            and self.num_tones == other.num_tones
            and np.array_equal(self.gain, other.gain)
            and np.array_equal(self.noise, other.noise)
            and np.array_equal(self.self_noise, other.self_noise)
            and np.array_equal(self.snr_cap, other.snr_cap)
            and np.array_equal(self.power_budget, other.power_budget)
            and np.array_equal(self.weight, other.weight)
        )
