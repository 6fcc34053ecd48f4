"""Wire messages exchanged between users and the base station.

Deliberately thin: a bid carries only the demand indicators and the sender
id, a price announcement only the iteration counter and the tone prices. No
channel gains, budgets, powers or utilities ever travel.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["PriceAnnounce", "Bid", "Message"]


@dataclass(frozen=True)
class PriceAnnounce:
    """Base station -> all users: current tone prices."""

    iter: int
    mu: tuple[float, ...]


@dataclass(frozen=True)
class Bid:
    """User -> base station: per-tone demand indicators."""

    user_id: int
    demand: tuple[bool, ...]


Message = PriceAnnounce | Bid
