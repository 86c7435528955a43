"""Lumped optical losses and the HBT beam splitter as Bernoulli thinning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

CHANNELS = ("signal_c_band", "idler_l_band")


@dataclass(frozen=True)
class ChainElement:
    name: str
    transmission_db: float  # loss, positive
    channel_applicability: str = "both"  # "signal", "idler" or "both"

    def __post_init__(self):
        if self.transmission_db < 0:
            raise DomainError(f"{self.name}: loss must be >= 0 dB")
        if self.channel_applicability not in ("signal", "idler", "both"):
            raise DomainError(f"{self.name}: bad applicability {self.channel_applicability!r}")

    def applies_to(self, channel):
        return self.channel_applicability in ("both", channel)


@dataclass
class ArrivalStream:
    """Photon arrivals on one channel, ordered by time (integer ps)."""

    channel: str
    time_ps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    origin_window: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        self.origin_window = np.asarray(self.origin_window, dtype=np.int64)
        if self.time_ps.shape != self.origin_window.shape:
            raise ValueError("time_ps and origin_window must have equal length")
        if self.time_ps.size and self.time_ps.min() < 0:
            raise ValueError("arrival times must be >= 0")

    def __len__(self):
        return int(self.time_ps.size)

    def subset(self, mask):
        return ArrivalStream(self.channel, self.time_ps[mask], self.origin_window[mask])


def db_to_transmission(db):
    if np.any(np.asarray(db) < 0):
        raise DomainError("loss in dB must be >= 0")
    return 10.0 ** (-np.asarray(db, dtype=float) / 10.0)


def chain_transmission(elements, channel):
    """Product of the transmissions of every element applying to ``channel``."""
    total_db = sum(e.transmission_db for e in elements if e.applies_to(channel))
    return float(db_to_transmission(total_db))


def thin(arrivals: ArrivalStream, transmission, rng) -> ArrivalStream:
    """Keep each arrival independently with probability ``transmission``."""
    if not 0.0 <= transmission <= 1.0:
        raise DomainError("transmission must lie in [0, 1]")
    if transmission == 1.0:
        return arrivals
    keep = rng.random(len(arrivals)) < transmission
    return arrivals.subset(keep)


def split_50_50(arrivals: ArrivalStream, rng):
    """Route each photon to arm B or arm C with equal probability."""
    to_b = rng.random(len(arrivals)) < 0.5
    return arrivals.subset(to_b), arrivals.subset(~to_b)
