"""
sfc_provisioning/oracle.py

Brute-force reference used for verification at desk scale.

The delay arithmetic here is written out again from the model equations and
does not import delay_model, and the dynamic-programming values do not use
mfg_core's recursions, so each pair can check the other.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .mfg_core import RewardKernel, StateSpace
from .scenario import Scenario
from .topology import PlacementMatrix, enumerate_feasible_placements

logger = logging.getLogger(__name__)


def reference_delay(
    placement: PlacementMatrix, scenario: Scenario, packet_size: float
) -> Dict[str, float]:
    """Per-chain end-to-end delay of one request of ``packet_size`` bytes."""
    topology = scenario.topology
    nodes = {n.id: n for n in topology.nodes}
    vnfs = {v.id: v for v in topology.vnfs}
    entries = placement.entries
    node_ids = placement.node_ids
    vnf_pos = {v: j for j, v in enumerate(placement.vnf_ids)}

    out = {}
    for k, chain in enumerate(scenario.chains):
        hosts = []
        for vnf_id in chain.vnf_sequence:
            column = entries[:, vnf_pos[vnf_id], k]
            if column.sum() != 1:
                raise ValueError(f"{vnf_id} of {chain.id} is not placed exactly once")
            hosts.append(node_ids[int(np.argmax(column))])

        total = 0.0
        for vnf_id, host in zip(chain.vnf_sequence, hosts):
            total += vnfs[vnf_id].demand.compute * packet_size / nodes[host].processing_capacity
        for position in range(len(chain.vnf_sequence) - 1):
            src, dst = hosts[position], hosts[position + 1]
            if src == dst:
                continue
            vnf_id = chain.vnf_sequence[position]
            share = topology.links.allocation.get(
                (src, vnf_id, dst, chain.vnf_sequence[position + 1])
            )
            if share is None:
                raise ValueError(f"No link share for {chain.id} hop {src}->{dst}")
            total += vnfs[vnf_id].demand.transmission * packet_size / share
        out[chain.id] = total
    return out


def reference_objective(
    placement: PlacementMatrix, scenario: Scenario, packet_sizes: Sequence[float]
) -> float:
    return sum(
        sum(reference_delay(placement, scenario, beta).values()) for beta in packet_sizes
    )


def optimal_placement(
    scenario: Scenario,
    packet_sizes: Optional[Sequence[float]] = None,
    limit: int = 1_000_000,
    progress_callback: Optional[Callable[[int, int, str], None]] = None,
) -> Tuple[PlacementMatrix, float]:
    """
    Exhaustive minimum of the objective (one request per chain at every
    packet size) over all capacity-feasible complete placements. Ties keep
    the first placement in enumeration order.
    """
    packet_sizes = list(packet_sizes or [scenario.reference_packet_size])
    best: Optional[PlacementMatrix] = None
    best_value = float("inf")
    count = 0
    for placement in enumerate_feasible_placements(
        scenario.topology, scenario.chains, limit=limit
    ):
        try:
            value = reference_objective(placement, scenario, packet_sizes)
        except ValueError:
            # unroutable hop
            continue
        count += 1
        if value < best_value:
            best, best_value = placement, value
        if progress_callback and count % 10_000 == 0:
            progress_callback(count, 0, f"best {best_value:.3f} ms")

    if best is None:
        raise ValueError(f"Scenario '{scenario.name}' has no feasible placement")
    logger.info(
        f"Oracle searched {count:,} feasible placements of '{scenario.name}': "
        f"optimum {best_value:.6f} ms"
    )
    return best, best_value


def _state_graph(space: StateSpace, rewards: np.ndarray) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(space)))
    for s, t in space.edges():
        if s != t:
            graph.add_edge(s, t, reward=float(rewards[s, t]))
    return graph


def dp_values(space: StateSpace, kernel: RewardKernel) -> np.ndarray:
    """
    Best total reward to absorption from every state under the density-free
    kernel: V(s) = max over successors of r + V, 0 at sink states.
    """
    graph = _state_graph(space, kernel.base)
    values = np.zeros(len(space))
    for s in reversed(list(nx.topological_sort(graph))):
        succ = list(graph.successors(s))
        if succ:
            values[s] = max(graph[s][t]["reward"] + values[t] for t in succ)
    return values


def enumerate_paths(
    space: StateSpace, kernel: RewardKernel, max_paths: int = 10_000
) -> Dict[int, List[Tuple[Tuple[int, ...], float]]]:
    """Every path from each state to a sink with its total density-free reward."""
    graph = _state_graph(space, kernel.base)
    sinks = [s for s in graph.nodes if graph.out_degree(s) == 0]
    out: Dict[int, List[Tuple[Tuple[int, ...], float]]] = {}
    for s in graph.nodes:
        if s in sinks:
            out[s] = [((s,), 0.0)]
            continue
        paths = []
        for path in nx.all_simple_paths(graph, s, sinks):
            total = sum(graph[a][b]["reward"] for a, b in zip(path, path[1:]))
            paths.append((tuple(path), total))
            if len(paths) > max_paths:
                raise ValueError(f"More than {max_paths} paths from state {s}")
        out[s] = paths
    return out


def best_path_values(space: StateSpace, kernel: RewardKernel) -> np.ndarray:
    paths = enumerate_paths(space, kernel)
    return np.array([max(total for _, total in paths[s]) for s in range(len(space))])
