"""Communication-agent model for road routing links."""

from __future__ import annotations

import math
from dataclasses import dataclass

# retransmission is not modelled, so the transmission delay is always zero
TRANSMISSION_DELAY = 0.0


@dataclass(frozen=True)
class CommState:
    q_c: float = 0.0  # packets/s
    gamma: float = 0.0  # packet loss rate
    delay: float = TRANSMISSION_DELAY


def throughput_from_traffic(vehicles_on_road: float, c_pkt: float) -> float:
    """Routing packets/s exchanged with the vehicles on a road."""
    if vehicles_on_road < 0 or c_pkt < 0:
        raise ValueError("vehicle count and packet rate must be >= 0")
    return c_pkt * vehicles_on_road


def packet_loss(q_c: float, kappa: float, c_c: float) -> float:
    """Packet loss rate for throughput ``q_c``.

    Zero up to the threshold ``c_c``, then ``kappa * sqrt(q_c - c_c)``,
    capped at total loss.
    """
    if q_c < 0:
        raise ValueError("throughput must be >= 0")
    if q_c <= c_c:
        return 0.0
    return min(1.0, kappa * math.sqrt(q_c - c_c))


def delay_factor(gamma: float) -> float:
    """Travel-time multiplier caused by lost routing packets."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return 1.0 + gamma


def link_state(vehicles_on_road: float, kappa: float, c_c: float, c_pkt: float) -> CommState:
    q = throughput_from_traffic(vehicles_on_road, c_pkt)
    return CommState(q, packet_loss(q, kappa, c_c))
