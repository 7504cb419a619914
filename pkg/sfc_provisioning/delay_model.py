"""
sfc_provisioning/delay_model.py

Processing, transmission and end-to-end delay of a request under a complete
placement, and the global objective (sum of request delays).

Packets traverse a chain in order, so transmission is charged only between
consecutive VNFs of the chain; colocated hops cost nothing.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from .scenario import Scenario
from .topology import PlacementMatrix, ServiceChain, Topology
from .workload import Request, fixed_requests

logger = logging.getLogger(__name__)


class IncompletePlacementError(ValueError):
    """A chain VNF is unplaced or placed more than once."""


class MissingLinkAllocationError(ValueError):
    """A placed cross-node hop has no link allocation."""


@dataclass(frozen=True)
class DelayBreakdown:
    """Delays in milliseconds; ``total`` is always processing + transmission."""

    processing: float
    transmission: float

    @property
    def total(self) -> float:
        return self.processing + self.transmission


def _chain_lookup(chains: Sequence[ServiceChain], chain_id: str) -> ServiceChain:
    for chain in chains:
        if chain.id == chain_id:
            return chain
    raise KeyError(f"Unknown chain '{chain_id}'")


def unit_processing_delay(
    topology: Topology, node_id: str, vnf_id: str, packet_size: float
) -> float:
    """c_hat * beta / alpha: processing time of vnf on node for one packet."""
    demand = topology.vnf(vnf_id).demand.compute
    return demand * packet_size / topology.node(node_id).processing_capacity


def unit_transmission_delay(
    topology: Topology,
    node_id: str,
    vnf_id: str,
    next_node_id: str,
    next_vnf_id: str,
    packet_size: float,
) -> float:
    """omega_hat * beta / l for one hop; exactly zero within one node."""
    if node_id == next_node_id:
        return 0.0
    share = topology.links.allocation_for(node_id, vnf_id, next_node_id, next_vnf_id)
    if share is None:
        raise MissingLinkAllocationError(
            f"No link allocation for ({node_id},{vnf_id}) -> "
            f"({next_node_id},{next_vnf_id})"
        )
    return topology.vnf(vnf_id).demand.transmission * packet_size / share


def processing_delay(
    node_id: str,
    vnf_id: str,
    chain_id: str,
    packet_size: float,
    placement: PlacementMatrix,
    topology: Topology,
) -> float:
    """x * c_hat * beta / alpha for one (node, vnf) pair of a chain."""
    x = placement.get(node_id, vnf_id, chain_id)
    if not x:
        return 0.0
    return x * unit_processing_delay(topology, node_id, vnf_id, packet_size)


def hosting_nodes(
    chain: ServiceChain, placement: PlacementMatrix
) -> List[str]:
    """Node of every chain VNF in order; raises on incomplete placements."""
    hosts = []
    for vnf_id in chain.vnf_sequence:
        nodes = placement.nodes_of(vnf_id, chain.id)
        if len(nodes) != 1:
            raise IncompletePlacementError(
                f"{vnf_id} of {chain.id} is placed on {len(nodes)} node(s); "
                f"delay needs exactly one"
            )
        hosts.append(nodes[0])
    return hosts


def total_processing_delay(
    chain: ServiceChain,
    request: Request,
    placement: PlacementMatrix,
    topology: Topology,
) -> float:
    hosting_nodes(chain, placement)
    return sum(
        processing_delay(
            node_id, vnf_id, chain.id, request.packet_size, placement, topology
        )
        for node_id in topology.node_ids
        for vnf_id in chain.vnf_sequence
    )


def transmission_delay(
    node_id: str,
    next_node_id: str,
    vnf_id: str,
    next_vnf_id: str,
    chain_id: str,
    packet_size: float,
    placement: PlacementMatrix,
    topology: Topology,
) -> float:
    """omega_hat * beta / l * x * x' for a hop; exactly zero within one node."""
    if node_id == next_node_id:
        return 0.0
    x = placement.get(node_id, vnf_id, chain_id)
    x_next = placement.get(next_node_id, next_vnf_id, chain_id)
    if not (x and x_next):
        return 0.0
    return (
        unit_transmission_delay(
            topology, node_id, vnf_id, next_node_id, next_vnf_id, packet_size
        )
        * x
        * x_next
    )


def total_transmission_delay(
    chain: ServiceChain,
    request: Request,
    placement: PlacementMatrix,
    topology: Topology,
) -> float:
    hosts = hosting_nodes(chain, placement)
    total = 0.0
    for position, (vnf_id, next_vnf_id) in enumerate(chain.hops()):
        total += transmission_delay(
            hosts[position],
            hosts[position + 1],
            vnf_id,
            next_vnf_id,
            chain.id,
            request.packet_size,
            placement,
            topology,
        )
    return total


def request_delay(
    request: Request,
    placement: PlacementMatrix,
    topology: Topology,
    chains: Sequence[ServiceChain],
) -> DelayBreakdown:
    chain = _chain_lookup(chains, request.chain_id)
    return DelayBreakdown(
        processing=total_processing_delay(chain, request, placement, topology),
        transmission=total_transmission_delay(chain, request, placement, topology),
    )


def objective(
    requests: Iterable[Request],
    placement: PlacementMatrix,
    topology: Topology,
    chains: Sequence[ServiceChain],
) -> float:
    """Sum of end-to-end delays over all requests (ms)."""
    return sum(
        request_delay(r, placement, topology, chains).total for r in requests
    )


def chain_delays(
    placement: PlacementMatrix, scenario: Scenario, packet_size: float
) -> Dict[str, DelayBreakdown]:
    """Delay of one request per chain at a fixed packet size."""
    return {
        r.chain_id: request_delay(r, placement, scenario.topology, scenario.chains)
        for r in fixed_requests(scenario.chains, packet_size)
    }


def reference_objective(
    placement: PlacementMatrix,
    topology: Topology,
    chains: Sequence[ServiceChain],
    packet_sizes: Sequence[float],
) -> float:
    """Objective over one request per chain at every packet size of a grid."""
    return sum(
        objective(fixed_requests(chains, beta), placement, topology, chains)
        for beta in packet_sizes
    )


def breakdown_frame(
    requests: Sequence[Request], placement: PlacementMatrix, scenario: Scenario
) -> pd.DataFrame:
    rows = []
    for r in requests:
        delay = request_delay(r, placement, scenario.topology, scenario.chains)
        rows.append(
            {
                "slot": r.arrival_slot,
                "user": r.user_id,
                "chain": r.chain_id,
                "bytes": r.packet_size,
                "processing_ms": delay.processing,
                "transmission_ms": delay.transmission,
                "total_ms": delay.total,
                "timeout_ms": r.timeout,
                "timed_out": delay.total > r.timeout,
            }
        )
    return pd.DataFrame(
        rows,
        columns=[
            "slot",
            "user",
            "chain",
            "bytes",
            "processing_ms",
            "transmission_ms",
            "total_ms",
            "timeout_ms",
            "timed_out",
        ],
    )
