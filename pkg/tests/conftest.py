import numpy as np
import pytest

from tonealloc import Scenario


def make_symmetric(num_users, gains, beta=0.0, s_max=np.inf, power=1.0, weight=1.0,
                   noise=1.0):
    """Scenario with identical users (same row of every per-user field)."""
    gains = np.asarray(gains, dtype=float)
    n = gains.size
    return Scenario(
        num_users=num_users,
        num_tones=n,
        gain=np.tile(gains, (num_users, 1)),
        noise=np.full(n, noise),
        self_noise=np.full(num_users, beta),
        snr_cap=np.full(num_users, s_max),
        power_budget=np.full(num_users, power),
        weight=np.full(num_users, weight),
    )


def grid_argmax(w, lam, h, sigma2, beta, s_max, hi=100.0, num=1_000_001):
    """Independent brute-force maximizer of w*ln(1+min(s(q),s_max)) - lam*q."""
    q = np.linspace(0.0, hi, num)
    hq = h * q
    s = hq / (sigma2 + beta * hq)
    f = w * np.log1p(np.minimum(s, s_max)) - lam * q
    i = int(np.argmax(f))
    return float(q[i]), float(f[i])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
