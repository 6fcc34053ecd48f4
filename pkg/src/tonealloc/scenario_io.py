"""Scenario documents: JSON load/save and seeded random generation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Scenario

__all__ = ["ScenarioRanges", "load_scenario", "save_scenario",
           "generate_random_scenario", "scenario_to_dict"]

_FIELDS = ("num_users", "num_tones", "gain", "noise", "self_noise",
           "snr_cap", "power_budget", "weight")


def _parse_number(name, value):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return np.inf
        raise ValidationError(f"{name} has non-numeric entry {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} has non-numeric entry {value!r}")
    return float(value)


def load_scenario(source) -> Scenario:
    """Read and validate a scenario document (path, stream or parsed dict).

    The document is JSON with the fields num_users, num_tones, gain (row-major
    K x N, nested or flat), noise (N), self_noise (K), snr_cap (K, the string
    "inf" allowed), power_budget (K), weight (K). Every model invariant is
    enforced at load time; violations name the offending field and index.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError("scenario document must be a JSON object")
    for f in _FIELDS:
        if f not in doc:
            raise ValidationError(f"missing field '{f}'")

    try:
        k = int(doc["num_users"])
        n = int(doc["num_tones"])
    except (TypeError, ValueError):
        raise ValidationError("num_users and num_tones must be integers") from None

    gain_raw = doc["gain"]
    if not isinstance(gain_raw, list):
        raise ValidationError("gain must be a list")
    if gain_raw and isinstance(gain_raw[0], list):
        flat = [x for row in gain_raw for x in row]
    else:
        flat = gain_raw
    if len(flat) != k * n:
        raise ValidationError(f"gain must have {k * n} entries (got {len(flat)})")
    gain = np.array([_parse_number("gain", x) for x in flat]).reshape(k, n)

    def vector(name, length):
        raw = doc[name]
        if not isinstance(raw, list) or len(raw) != length:
            got = len(raw) if isinstance(raw, list) else type(raw).__name__
            raise ValidationError(f"{name} must have {length} entries (got {got})")
        return np.array([_parse_number(name, x) for x in raw])

    return Scenario(
        num_users=k,
        num_tones=n,
        gain=gain,
        noise=vector("noise", n),
        self_noise=vector("self_noise", k),
        snr_cap=vector("snr_cap", k),
        power_budget=vector("power_budget", k),
        weight=vector("weight", k),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    def enc(x):
        return "inf" if np.isinf(x) else float(x)

    return {
        "num_users": scenario.num_users,
        "num_tones": scenario.num_tones,
        "gain": [[float(x) for x in row] for row in scenario.gain],
        "noise": [float(x) for x in scenario.noise],
        "self_noise": [float(x) for x in scenario.self_noise],
        "snr_cap": [enc(x) for x in scenario.snr_cap],
        "power_budget": [float(x) for x in scenario.power_budget],
        "weight": [float(x) for x in scenario.weight],
    }


def save_scenario(scenario: Scenario, destination) -> None:
    """Write a scenario document that load_scenario reads back exactly."""
    doc = scenario_to_dict(scenario)
    if hasattr(destination, "write"):
        json.dump(doc, destination, indent=2)
        destination.write("\n")
    else:
        with open(destination, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class ScenarioRanges:
    """Sampling ranges for random scenarios (defaults per the test corpus)."""

    gain_low: float = 0.1
    gain_high: float = 10.0
    sigma2: float = 1.0
    beta_low: float = 0.0
    beta_high: float = 0.2
    snr_cap_choices: tuple[float, ...] = (10.0, np.inf)
    power_low: float = 1.0
    power_high: float = 5.0
    weight_low: float = 0.5
    weight_high: float = 2.0

    def validate(self) -> None:
        pairs = [
            ("gain", self.gain_low, self.gain_high, True),
            ("beta", self.beta_low, self.beta_high, False),
            ("power", self.power_low, self.power_high, True),
            ("weight", self.weight_low, self.weight_high, True),
        ]
        for name, lo, hi, pos in pairs:
            if not lo <= hi:
                raise ValidationError(f"{name} range is empty ({lo} > {hi})")
            if pos and lo <= 0:
                raise ValidationError(f"{name} range must be > 0")
            if not pos and lo < 0:
                raise ValidationError(f"{name} range must be >= 0")
        if self.sigma2 <= 0:
            raise ValidationError("sigma2 must be > 0")
        if not self.snr_cap_choices or any(not c > 0 for c in self.snr_cap_choices):
            raise ValidationError("snr_cap_choices must be positive")


def generate_random_scenario(
    seed: int, num_users: int, num_tones: int,
    ranges: ScenarioRanges | None = None,
) -> Scenario:
    """Deterministic random scenario for a given (seed, K, N, ranges).

    Gains are log-uniform, self-noise and budgets uniform, and the SNR cap is
    drawn uniformly from the configured choices. The PCG64 generator and the
    fixed draw order (gain, self_noise, snr_cap, power_budget, weight) make
    the output reproducible field for field.
    """
    if num_users < 1 or num_tones < 1:
        raise ValidationError("num_users and num_tones must be >= 1")
    ranges = ranges or ScenarioRanges()
    ranges.validate()
    rng = np.random.default_rng(seed)
    gain = np.exp(rng.uniform(np.log(ranges.gain_low), np.log(ranges.gain_high),
                              size=(num_users, num_tones)))
    self_noise = rng.uniform(ranges.beta_low, ranges.beta_high, size=num_users)
    snr_cap = np.array(ranges.snr_cap_choices, dtype=float)[
        rng.integers(0, len(ranges.snr_cap_choices), size=num_users)
    ]
    power_budget = rng.uniform(ranges.power_low, ranges.power_high, size=num_users)
    weight = rng.uniform(ranges.weight_low, ranges.weight_high, size=num_users)
    return Scenario(
        num_users=num_users,
        num_tones=num_tones,
        gain=gain,
        noise=np.full(num_tones, ranges.sigma2),
        self_noise=self_noise,
        snr_cap=snr_cap,
        power_budget=power_budget,
        weight=weight,
    )
