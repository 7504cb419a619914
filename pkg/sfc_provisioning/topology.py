"""
sfc_provisioning/topology.py

MEC infrastructure model: nodes, VNF catalog, service chains, inter-node link
capacities and the VNF-node-chain placement matrix, plus structural
validation and the feasibility rules every search engine shares.

Resource triples are (compute, storage, transmission). Capacity constraints
are checked component-wise.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Relative slack for floating-point capacity sums
CAPACITY_TOLERANCE = 1e-9

FEASIBILITY_MODES = ("partial", "complete")


class PlacementIndexError(ValueError):
    """Placement labels do not match the topology or chain set."""


class EnumerationLimitExceeded(ValueError):
    """Exhaustive enumeration would exceed the caller's bound."""


@dataclass(frozen=True)
class ResourceVector:
    """Compute / storage / transmission capacity or demand."""

    compute: float
    storage: float
    transmission: float

    def as_array(self) -> np.ndarray:
        return np.array([self.compute, self.storage, self.transmission], dtype=float)

    def is_nonnegative(self) -> bool:
        return min(self.compute, self.storage, self.transmission) >= 0


@dataclass(frozen=True)
class MecNode:
    """A MEC node; ``processing_capacity`` is the divisor of the processing delay."""

    id: str
    capacity: ResourceVector
    processing_capacity: float


@dataclass(frozen=True)
class VnfSpec:
    id: str
    demand: ResourceVector


@dataclass(frozen=True)
class ServiceChain:
    """Ordered VNF sequence; first element is the ingress, last the egress."""

    id: str
    vnf_sequence: Tuple[str, ...]

    @property
    def ingress(self) -> str:
        return self.vnf_sequence[0]

    @property
    def egress(self) -> str:
        return self.vnf_sequence[-1]

    def hops(self) -> List[Tuple[str, str]]:
        """Consecutive (sender, receiver) VNF pairs in chain order."""
        return list(zip(self.vnf_sequence[:-1], self.vnf_sequence[1:]))

    def __len__(self) -> int:
        return len(self.vnf_sequence)


def _pair_key(node_a: str, node_b: str) -> Tuple[str, str]:
    return (node_a, node_b) if node_a <= node_b else (node_b, node_a)


@dataclass(frozen=True)
class LinkCapacitySet:
    """
    Inter-node link capacities.

    ``total`` maps an unordered node pair to L; ``allocation`` maps a directed
    (node, vnf, node', vnf') hop to the share l of the pair's capacity.
    """

    total: Mapping[Tuple[str, str], float] = field(default_factory=dict)
    allocation: Mapping[Tuple[str, str, str, str], float] = field(
        default_factory=dict
    )

    def pair_total(self, node_a: str, node_b: str) -> Optional[float]:
        key = _pair_key(node_a, node_b)
        if key in self.total:
            return self.total[key]
        return self.total.get((node_b, node_a))

    def allocation_for(
        self, node: str, vnf: str, next_node: str, next_vnf: str
    ) -> Optional[float]:
        return self.allocation.get((node, vnf, next_node, next_vnf))

    def allocated_per_pair(self) -> Dict[Tuple[str, str], float]:
        sums: Dict[Tuple[str, str], float] = {}
        for (node, _, next_node, _), share in self.allocation.items():
            key = _pair_key(node, next_node)
            sums[key] = sums.get(key, 0.0) + share
        return sums


@dataclass(frozen=True)
class Topology:
    """MEC nodes, hosted VNF catalog and inter-node links."""

    nodes: Tuple[MecNode, ...]
    vnfs: Tuple[VnfSpec, ...]
    links: LinkCapacitySet = field(default_factory=LinkCapacitySet)

    @property
    def node_ids(self) -> Tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def vnf_ids(self) -> Tuple[str, ...]:
        return tuple(v.id for v in self.vnfs)

    def node_index(self, node_id: str) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise PlacementIndexError(f"Unknown MEC node '{node_id}'") from None

    def vnf_index(self, vnf_id: str) -> int:
        try:
            return self.vnf_ids.index(vnf_id)
        except ValueError:
            raise PlacementIndexError(f"Unknown VNF '{vnf_id}'") from None

    def node(self, node_id: str) -> MecNode:
        return self.nodes[self.node_index(node_id)]

    def vnf(self, vnf_id: str) -> VnfSpec:
        return self.vnfs[self.vnf_index(vnf_id)]

    def capacity_matrix(self) -> np.ndarray:
        """(nodes x 3) capacity array."""
        return np.array([n.capacity.as_array() for n in self.nodes]).reshape(-1, 3)

    def demand_matrix(self) -> np.ndarray:
        """(vnfs x 3) demand array."""
        return np.array([v.demand.as_array() for v in self.vnfs]).reshape(-1, 3)


# ----------------------------------------------------------------------
# Placement matrix
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlacementMatrix:
    """
    Binary VNF-node-chain assignment x[i, j, k].

    Axis labels travel with the array so placements can be checked against
    the topology they were built for. Instances are immutable; use
    ``with_entry`` to derive a modified copy.
    """

    entries: np.ndarray
    node_ids: Tuple[str, ...]
    vnf_ids: Tuple[str, ...]
    chain_ids: Tuple[str, ...]

    @classmethod
    def empty(
        cls, topology: Topology, chains: Sequence[ServiceChain]
    ) -> "PlacementMatrix":
        shape = (len(topology.nodes), len(topology.vnfs), len(chains))
        return cls(
            entries=np.zeros(shape, dtype=np.int8),
            node_ids=topology.node_ids,
            vnf_ids=topology.vnf_ids,
            chain_ids=tuple(c.id for c in chains),
        )

    @classmethod
    def from_assignment(
        cls,
        topology: Topology,
        chains: Sequence[ServiceChain],
        assignment: Mapping[Tuple[str, str], str],
    ) -> "PlacementMatrix":
        """Build from a {(chain_id, vnf_id): node_id} mapping."""
        placement = cls.empty(topology, chains)
        entries = placement.entries.copy()
        chain_ids = placement.chain_ids
        for (chain_id, vnf_id), node_id in assignment.items():
            if chain_id not in chain_ids:
                raise PlacementIndexError(f"Unknown chain '{chain_id}'")
            entries[
                topology.node_index(node_id),
                topology.vnf_index(vnf_id),
                chain_ids.index(chain_id),
            ] = 1
        return cls(entries, placement.node_ids, placement.vnf_ids, chain_ids)

    def _indices(self, node_id: str, vnf_id: str, chain_id: str) -> Tuple[int, int, int]:
        try:
            return (
                self.node_ids.index(node_id),
                self.vnf_ids.index(vnf_id),
                self.chain_ids.index(chain_id),
            )
        except ValueError:
            raise PlacementIndexError(
                f"Placement index ({node_id}, {vnf_id}, {chain_id}) out of range"
            ) from None

    def get(self, node_id: str, vnf_id: str, chain_id: str) -> int:
        return int(self.entries[self._indices(node_id, vnf_id, chain_id)])

    def with_entry(
        self, node_id: str, vnf_id: str, chain_id: str, value: int
    ) -> "PlacementMatrix":
        entries = self.entries.copy()
        entries[self._indices(node_id, vnf_id, chain_id)] = 1 if value else 0
        return PlacementMatrix(entries, self.node_ids, self.vnf_ids, self.chain_ids)

    def nodes_of(self, vnf_id: str, chain_id: str) -> List[str]:
        j = self.vnf_ids.index(vnf_id)
        k = self.chain_ids.index(chain_id)
        return [self.node_ids[i] for i in np.flatnonzero(self.entries[:, j, k])]

    def node_of(self, vnf_id: str, chain_id: str) -> Optional[str]:
        """Hosting node of a chain VNF, or None when unplaced."""
        hosts = self.nodes_of(vnf_id, chain_id)
        return hosts[0] if hosts else None

    def assignment(self) -> Dict[Tuple[str, str], str]:
        out = {}
        for i, j, k in zip(*np.nonzero(self.entries)):
            out[(self.chain_ids[k], self.vnf_ids[j])] = self.node_ids[i]
        return out

    def rows(self) -> List[Dict[str, str]]:
        """One record per placed (chain, vnf) in chain/vnf label order."""
        return [
            {"chain": chain, "vnf": vnf, "node": node}
            for (chain, vnf), node in sorted(self.assignment().items())
        ]


def _check_labels(
    placement: PlacementMatrix, topology: Topology, chains: Sequence[ServiceChain]
):
    expected = (topology.node_ids, topology.vnf_ids, tuple(c.id for c in chains))
    actual = (placement.node_ids, placement.vnf_ids, placement.chain_ids)
    if expected != actual or placement.entries.shape != tuple(len(a) for a in expected):
        raise PlacementIndexError(
            "Placement does not match the topology/chain index ranges"
        )


def node_load(placement: PlacementMatrix, topology: Topology) -> np.ndarray:
    """Per-node component-wise demand sum over all placed (vnf, chain) pairs."""
    return np.einsum(
        "ijk,jc->ic", placement.entries.astype(float), topology.demand_matrix()
    )


def capacity_violation(placement: PlacementMatrix, topology: Topology) -> float:
    """Total relative overload; 0.0 for placements within capacity."""
    load = node_load(placement, topology)
    capacity = topology.capacity_matrix()
    with np.errstate(divide="ignore", invalid="ignore"):
        excess = np.where(
            capacity > 0,
            np.maximum(load - capacity * (1 + CAPACITY_TOLERANCE), 0.0) / capacity,
            np.where(load > 0, np.inf, 0.0),
        )
    return float(excess.sum())


def is_feasible(
    placement: PlacementMatrix,
    topology: Topology,
    chains: Sequence[ServiceChain],
    mode: str = "complete",
) -> bool:
    """
    Check the placement constraints.

    ``partial`` applies the literal constraints: each (vnf, chain) on at most
    one node and node loads within capacity. ``complete`` additionally needs
    every chain VNF placed exactly once and nothing placed for VNFs outside
    the chain.
    """
    if mode not in FEASIBILITY_MODES:
        raise ValueError(f"Unknown feasibility mode '{mode}'")
    _check_labels(placement, topology, chains)

    per_slot = placement.entries.sum(axis=0)  # (vnfs x chains)
    if (per_slot > 1).any():
        return False
    if capacity_violation(placement, topology) > 0:
        return False

    if mode == "complete":
        required = np.zeros_like(per_slot)
        for k, chain in enumerate(chains):
            for vnf_id in chain.vnf_sequence:
                required[topology.vnf_index(vnf_id), k] = 1
        if not np.array_equal(per_slot, required):
            return False
    return True


def chain_slots(
    topology: Topology, chains: Sequence[ServiceChain]
) -> List[Tuple[int, int, int]]:
    """(chain index, position, vnf index) for every chain VNF, in chain order."""
    return [
        (k, position, topology.vnf_index(vnf_id))
        for k, chain in enumerate(chains)
        for position, vnf_id in enumerate(chain.vnf_sequence)
    ]


def enumerate_feasible_placements(
    topology: Topology,
    chains: Sequence[ServiceChain],
    limit: int = 1_000_000,
) -> Iterator[PlacementMatrix]:
    """
    Yield every complete placement that respects node capacities.

    Order is lexicographic over (chain, position, node index). Raises
    EnumerationLimitExceeded before yielding anything when the raw search
    space node^slots is larger than ``limit``.
    """
    slots = chain_slots(topology, chains)
    n_nodes = len(topology.nodes)
    space = n_nodes ** len(slots)
    if space > limit:
        raise EnumerationLimitExceeded(
            f"{n_nodes}^{len(slots)} = {space:,} candidate placements exceeds "
            f"the enumeration bound {limit:,}"
        )

    capacity = topology.capacity_matrix() * (1 + CAPACITY_TOLERANCE)
    demand = topology.demand_matrix()
    shape = (n_nodes, len(topology.vnfs), len(chains))
    node_ids = topology.node_ids
    vnf_ids = topology.vnf_ids
    chain_ids = tuple(c.id for c in chains)
    load = np.zeros((n_nodes, 3))
    choice = [0] * len(slots)

    def _walk(depth: int) -> Iterator[PlacementMatrix]:
        if depth == len(slots):
            entries = np.zeros(shape, dtype=np.int8)
            for (k, _, j), i in zip(slots, choice):
                entries[i, j, k] = 1
            yield PlacementMatrix(entries, node_ids, vnf_ids, chain_ids)
            return
        _, _, j = slots[depth]
        for i in range(n_nodes):
            load[i] += demand[j]
            if (load[i] <= capacity[i]).all():
                choice[depth] = i
                yield from _walk(depth + 1)
            load[i] -= demand[j]

    yield from _walk(0)


# ----------------------------------------------------------------------
# Structural validation
# ----------------------------------------------------------------------


@dataclass
class ValidationIssue:
    """A single structural problem found in a topology."""

    code: str
    message: str
    details: Optional[List[str]] = None


@dataclass
class ValidationReport:
    """Result of validate_topology; an empty report means the topology is valid."""

    issues: List[ValidationIssue] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.issues

    @property
    def messages(self) -> List[str]:
        return [issue.message for issue in self.issues]

    def codes(self) -> List[str]:
        return [issue.code for issue in self.issues]

    def add(self, code: str, message: str, details: Optional[List[str]] = None):
        self.issues.append(ValidationIssue(code, message, details))

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)


def validate_topology(
    topology: Topology, chains: Sequence[ServiceChain] = ()
) -> ValidationReport:
    """Collect structural problems; never raises."""
    report = ValidationReport()
    node_ids = topology.node_ids
    vnf_ids = topology.vnf_ids

    for label, ids in (("node", node_ids), ("VNF", vnf_ids)):
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            report.add("duplicate_id", f"duplicate {label} ids: {', '.join(duplicates)}")

    for node in topology.nodes:
        if not node.capacity.is_nonnegative():
            report.add("negative_capacity", f"negative capacity on node {node.id}")
        if not node.processing_capacity > 0:
            report.add(
                "nonpositive_processing",
                f"processing capacity of node {node.id} must be positive",
            )

    for vnf in topology.vnfs:
        if not vnf.demand.is_nonnegative():
            report.add("negative_demand", f"negative demand for {vnf.id}")

    for chain in chains:
        if not chain.vnf_sequence:
            report.add("empty_chain", f"chain {chain.id} has no VNFs")
            continue
        unknown = [v for v in chain.vnf_sequence if v not in vnf_ids]
        if unknown:
            report.add(
                "unknown_vnf",
                f"chain {chain.id} references unknown VNF {', '.join(unknown)}",
            )
        if len(set(chain.vnf_sequence)) != len(chain.vnf_sequence):
            report.add("duplicate_vnf", f"chain {chain.id} repeats a VNF")

    links = topology.links
    for (node_a, node_b), capacity in links.total.items():
        if node_a not in node_ids or node_b not in node_ids:
            report.add("unknown_node", f"link {node_a}-{node_b} names an unknown node")
        if node_a == node_b:
            report.add("self_link", f"link {node_a}-{node_b} connects a node to itself")
        if not capacity > 0:
            report.add("nonpositive_link", f"link {node_a}-{node_b} capacity must be positive")

    for (node, vnf, next_node, next_vnf), share in links.allocation.items():
        hop = f"({node},{vnf})->({next_node},{next_vnf})"
        if node == next_node:
            report.add("self_link", f"allocation {hop} is defined within one node")
        if node not in node_ids or next_node not in node_ids:
            report.add("unknown_node", f"allocation {hop} names an unknown node")
        if vnf not in vnf_ids or next_vnf not in vnf_ids:
            report.add("unknown_vnf", f"allocation {hop} names an unknown VNF")
        if not share > 0:
            report.add("nonpositive_link", f"allocation {hop} must be positive")

    for (node_a, node_b), allocated in sorted(links.allocated_per_pair().items()):
        total = links.pair_total(node_a, node_b)
        if total is None:
            report.add(
                "unknown_node",
                f"allocations on {node_a}-{node_b} have no link total",
            )
        elif allocated > total * (1 + CAPACITY_TOLERANCE):
            report.add(
                "link_over_allocation",
                f"link over-allocation on {node_a}-{node_b}: "
                f"{allocated:g} allocated of {total:g}",
            )

    if report.issues:
        logger.debug(f"Topology validation found {len(report.issues)} issue(s)")
    return report
