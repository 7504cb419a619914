"""
sfc_provisioning/workload.py

Stochastic request generator: Poisson arrivals per slot, uniform packet sizes,
chain chosen by configured weights. Output is a pure function of the config.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .topology import ServiceChain

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9
DEFAULT_TIMEOUT_MS = 1000.0

REQUEST_CSV_COLUMNS = ["slot", "user", "chain", "bytes", "timeout"]


class WorkloadConfigError(ValueError):
    """Workload parameters are inconsistent."""


@dataclass(frozen=True)
class Request:
    """A user's request for one service chain."""

    user_id: str
    chain_id: str
    packet_size: float  # bytes
    timeout: float  # milliseconds
    arrival_slot: int


@dataclass(frozen=True)
class WorkloadConfig:
    packet_min: float = 100_000.0
    packet_max: float = 2_000_000.0
    arrival_rate: float = 2.0
    horizon: int = 50
    chain_weights: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0
    timeouts: Mapping[str, float] = field(default_factory=dict)

    def timeout_for(self, chain_id: str) -> float:
        return float(self.timeouts.get(chain_id, DEFAULT_TIMEOUT_MS))

    def validate(self):
        """Raise WorkloadConfigError on the first inconsistent field."""
        if not 0 < self.packet_min <= self.packet_max:
            raise WorkloadConfigError(
                f"Packet range must satisfy 0 < min <= max, got "
                f"[{self.packet_min}, {self.packet_max}]"
            )
        if self.arrival_rate < 0:
            raise WorkloadConfigError("Arrival rate must be non-negative")
        if self.horizon < 0:
            raise WorkloadConfigError("Horizon must be non-negative")
        if self.arrival_rate > 0 and not self.chain_weights:
            raise WorkloadConfigError("Chain weights are required for a non-zero rate")
        if self.chain_weights:
            weights = np.array(list(self.chain_weights.values()), dtype=float)
            if (weights < 0).any():
                raise WorkloadConfigError("Chain weights must be non-negative")
            if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
                raise WorkloadConfigError(
                    f"Chain weights must sum to 1, got {weights.sum():.12f}"
                )
        for chain_id, timeout in self.timeouts.items():
            if not timeout > 0:
                raise WorkloadConfigError(f"Timeout of {chain_id} must be positive")


def generate_requests(config: WorkloadConfig) -> List[Request]:
    """
    Draw a request trace.

    Per slot the number of arrivals is Poisson(arrival_rate); each arrival
    picks its chain from ``chain_weights`` and its packet size uniformly in
    [packet_min, packet_max]. The same seed always yields the same list.
    """
    config.validate()
    if config.arrival_rate == 0 or config.horizon == 0:
        return []

    rng = np.random.default_rng(config.seed)
    chain_ids = list(config.chain_weights)
    weights = np.array([config.chain_weights[c] for c in chain_ids], dtype=float)
    weights = weights / weights.sum()

    requests: List[Request] = []
    for slot in range(config.horizon):
        count = int(rng.poisson(config.arrival_rate))
        if not count:
            continue
        picks = rng.choice(len(chain_ids), size=count, p=weights)
        sizes = rng.uniform(config.packet_min, config.packet_max, size=count)
        for pick, size in zip(picks, sizes):
            chain_id = chain_ids[int(pick)]
            requests.append(
                Request(
                    user_id=f"user-{len(requests)}",
                    chain_id=chain_id,
                    packet_size=float(size),
                    timeout=config.timeout_for(chain_id),
                    arrival_slot=slot,
                )
            )

    logger.debug(
        f"Generated {len(requests)} requests over {config.horizon} slots "
        f"(rate {config.arrival_rate}, seed {config.seed})"
    )
    return requests


def fixed_requests(
    chains: Sequence[ServiceChain],
    packet_size: float,
    timeouts: Optional[Mapping[str, float]] = None,
) -> List[Request]:
    """One request per chain at a fixed packet size (packet-size sweeps)."""
    timeouts = timeouts or {}
    return [
        Request(
            user_id=f"ref-{chain.id}",
            chain_id=chain.id,
            packet_size=float(packet_size),
            timeout=float(timeouts.get(chain.id, DEFAULT_TIMEOUT_MS)),
            arrival_slot=0,
        )
        for chain in chains
    ]


def requests_frame(requests: Sequence[Request]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "slot": r.arrival_slot,
                "user": r.user_id,
                "chain": r.chain_id,
                "bytes": r.packet_size,
                "timeout": r.timeout,
            }
            for r in requests
        ],
        columns=REQUEST_CSV_COLUMNS,
    )


def export_requests_csv(requests: Sequence[Request], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    requests_frame(requests).to_csv(path, index=False, lineterminator="\n")
    return path


def count_timeouts(requests: Sequence[Request], delays: Sequence[float]) -> int:
    """Requests whose delay exceeded their timeout; they are not rescheduled."""
    return sum(1 for r, d in zip(requests, delays) if d > r.timeout)


def chain_counts(requests: Sequence[Request]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for r in requests:
        counts[r.chain_id] = counts.get(r.chain_id, 0) + 1
    return counts
