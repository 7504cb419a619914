"""
sfc_provisioning/scenario.py

Scenario files and the bundled three-node template ("paper").

A scenario file is a JSON document:

{
  "name": "paper",
  "reference_packet_size": 1000000,        # bytes
  "nodes": [
    {"id": "MEC-1",
     "capacity": {"compute": 140, "storage": 140, "transmission": 140},
     "processing_capacity": 400000}        # byte-units per ms
  ],
  "vnfs": [
    {"id": "VNF-1", "demand": {"compute": 10, "storage": 15, "transmission": 10}}
  ],
  "chains": [
    {"id": "SFC-1", "vnfs": ["VNF-1", "VNF-2", "VNF-3"], "timeout_ms": 400}
  ],
  "links": [
    {"nodes": ["MEC-1", "MEC-2"], "capacity": 1400000,
     "allocations": [
       {"source": ["MEC-1", "VNF-1"], "target": ["MEC-2", "VNF-2"],
        "capacity": 100000}
     ]}
  ],
  "workload": {"packet_min": 100000, "packet_max": 2000000,
               "arrival_rate": 2.0, "horizon": 50,
               "chain_weights": {"SFC-1": 0.4}, "seed": 2021}
}

Units: packet sizes in bytes, processing capacity and link allocations in
bytes per millisecond (scaled by the VNF demand), so every delay comes out
in milliseconds. Unknown fields are rejected.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .topology import (
    LinkCapacitySet,
    MecNode,
    PlacementMatrix,
    ResourceVector,
    ServiceChain,
    Topology,
    VnfSpec,
)
from .workload import WorkloadConfig

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """A scenario file could not be read or failed schema validation."""


# ----------------------------------------------------------------------
# File schema
# ----------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ResourceSchema(_Strict):
    compute: float
    storage: float
    transmission: float


class NodeSchema(_Strict):
    id: str
    capacity: ResourceSchema
    processing_capacity: float


class VnfSchema(_Strict):
    id: str
    demand: ResourceSchema


class ChainSchema(_Strict):
    id: str
    vnfs: List[str]
    timeout_ms: float = 1000.0


class AllocationSchema(_Strict):
    source: Tuple[str, str]
    target: Tuple[str, str]
    capacity: float


class LinkSchema(_Strict):
    nodes: Tuple[str, str]
    capacity: float
    allocations: List[AllocationSchema] = Field(default_factory=list)


class WorkloadSchema(_Strict):
    packet_min: float = 100_000.0
    packet_max: float = 2_000_000.0
    arrival_rate: float = 2.0
    horizon: int = 50
    chain_weights: Dict[str, float] = Field(default_factory=dict)
    seed: int = 0


class ScenarioSchema(_Strict):
    name: str
    reference_packet_size: float = 1_000_000.0
    nodes: List[NodeSchema]
    vnfs: List[VnfSchema]
    chains: List[ChainSchema]
    links: List[LinkSchema] = Field(default_factory=list)
    workload: WorkloadSchema = Field(default_factory=WorkloadSchema)


# ----------------------------------------------------------------------
# Domain aggregate
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Everything an engine needs: infrastructure, chains and workload."""

    name: str
    topology: Topology
    chains: Tuple[ServiceChain, ...]
    workload: WorkloadConfig
    reference_packet_size: float = 1_000_000.0

    @property
    def chain_ids(self) -> Tuple[str, ...]:
        return tuple(c.id for c in self.chains)

    def chain(self, chain_id: str) -> ServiceChain:
        for chain in self.chains:
            if chain.id == chain_id:
                return chain
        raise KeyError(chain_id)

    @property
    def timeouts(self) -> Dict[str, float]:
        return {c.id: self.workload.timeout_for(c.id) for c in self.chains}

    def empty_placement(self) -> PlacementMatrix:
        return PlacementMatrix.empty(self.topology, self.chains)


def _resource(schema: ResourceSchema) -> ResourceVector:
    return ResourceVector(schema.compute, schema.storage, schema.transmission)


def _resource_schema(vector: ResourceVector) -> ResourceSchema:
    return ResourceSchema(
        compute=vector.compute,
        storage=vector.storage,
        transmission=vector.transmission,
    )


def scenario_from_schema(schema: ScenarioSchema) -> Scenario:
    totals = {}
    allocations = {}
    for link in schema.links:
        totals[tuple(link.nodes)] = link.capacity
        for alloc in link.allocations:
            key = (alloc.source[0], alloc.source[1], alloc.target[0], alloc.target[1])
            allocations[key] = alloc.capacity

    topology = Topology(
        nodes=tuple(
            MecNode(n.id, _resource(n.capacity), n.processing_capacity)
            for n in schema.nodes
        ),
        vnfs=tuple(VnfSpec(v.id, _resource(v.demand)) for v in schema.vnfs),
        links=LinkCapacitySet(total=totals, allocation=allocations),
    )
    chains = tuple(ServiceChain(c.id, tuple(c.vnfs)) for c in schema.chains)
    w = schema.workload
    weights = dict(w.chain_weights)
    unknown = sorted(set(weights) - {c.id for c in chains})
    if unknown:
        raise ScenarioError(f"Workload weights name unknown chain(s): {', '.join(unknown)}")
    if not weights and chains:
        # unweighted workloads pick chains uniformly
        weights = {c.id: 1.0 / len(chains) for c in chains}
    workload = WorkloadConfig(
        packet_min=w.packet_min,
        packet_max=w.packet_max,
        arrival_rate=w.arrival_rate,
        horizon=w.horizon,
        chain_weights=weights,
        seed=w.seed,
        timeouts={c.id: c.timeout_ms for c in schema.chains},
    )
    return Scenario(
        name=schema.name,
        topology=topology,
        chains=chains,
        workload=workload,
        reference_packet_size=schema.reference_packet_size,
    )


def scenario_to_schema(scenario: Scenario) -> ScenarioSchema:
    topology = scenario.topology
    links = []
    for (node_a, node_b), capacity in topology.links.total.items():
        allocations = [
            AllocationSchema(
                source=(node, vnf),
                target=(next_node, next_vnf),
                capacity=share,
            )
            for (node, vnf, next_node, next_vnf), share in topology.links.allocation.items()
            if {node, next_node} == {node_a, node_b}
        ]
        links.append(
            LinkSchema(nodes=(node_a, node_b), capacity=capacity, allocations=allocations)
        )
    w = scenario.workload
    return ScenarioSchema(
        name=scenario.name,
        reference_packet_size=scenario.reference_packet_size,
        nodes=[
            NodeSchema(
                id=n.id,
                capacity=_resource_schema(n.capacity),
                processing_capacity=n.processing_capacity,
            )
            for n in topology.nodes
        ],
        vnfs=[VnfSchema(id=v.id, demand=_resource_schema(v.demand)) for v in topology.vnfs],
        chains=[
            ChainSchema(id=c.id, vnfs=list(c.vnf_sequence), timeout_ms=w.timeout_for(c.id))
            for c in scenario.chains
        ],
        links=links,
        workload=WorkloadSchema(
            packet_min=w.packet_min,
            packet_max=w.packet_max,
            arrival_rate=w.arrival_rate,
            horizon=w.horizon,
            chain_weights=dict(w.chain_weights),
            seed=w.seed,
        ),
    )


def parse_scenario(document: dict) -> Scenario:
    try:
        return scenario_from_schema(ScenarioSchema.model_validate(document))
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {e}") from e


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"Could not read scenario {path}: {e}") from e
    scenario = parse_scenario(document)
    logger.info(
        f"Loaded scenario '{scenario.name}' from {path}: "
        f"{len(scenario.topology.nodes)} nodes, {len(scenario.topology.vnfs)} VNFs, "
        f"{len(scenario.chains)} chains"
    )
    return scenario


def scenario_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_schema(scenario).model_dump(mode="json"), indent=2) + "\n"


def dump_scenario(scenario: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(scenario_json(scenario))
    return path


def scenario_hash(scenario: Scenario) -> str:
    canonical = json.dumps(
        scenario_to_schema(scenario).model_dump(mode="json"),
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# Bundled three-node template
# ----------------------------------------------------------------------

# Capacity of a standard MEC node; VNF demands are fractions of it.
REFERENCE_CAPACITY = 100.0

PAPER_NODES = (
    # id, capacity multiple of the reference node, processing capacity
    ("MEC-1", 1.4, 400_000.0),
    ("MEC-2", 1.2, 320_000.0),
    ("MEC-3", 1.0, 250_000.0),
)

# Fixed draw of (compute, storage, transmission) demand fractions in [10 %, 70 %].
PAPER_DEMAND_FRACTIONS = {
    "VNF-1": (0.10, 0.15, 0.10),
    "VNF-2": (0.20, 0.10, 0.15),
    "VNF-3": (0.15, 0.20, 0.10),
    "VNF-4": (0.25, 0.20, 0.20),
    "VNF-5": (0.30, 0.25, 0.15),
    "VNF-6": (0.15, 0.30, 0.10),
    "VNF-7": (0.35, 0.70, 0.25),
}

PAPER_CHAINS = (
    ("SFC-1", ("VNF-1", "VNF-2", "VNF-3"), 400.0),
    ("SFC-2", ("VNF-1", "VNF-4", "VNF-6"), 400.0),
    ("SFC-3", ("VNF-3", "VNF-4", "VNF-5", "VNF-7"), 700.0),
)

PAPER_LINK_CAPACITY = 1_400_000.0
PAPER_CHAIN_WEIGHTS = {"SFC-1": 0.4, "SFC-2": 0.3, "SFC-3": 0.3}
PAPER_WORKLOAD_SEED = 2021


def even_link_allocations(
    node_ids, chains, pair_capacity: float
) -> LinkCapacitySet:
    """
    Split each node pair's capacity evenly over every directed hop that a
    chain could route across it.
    """
    hops = []
    for chain in chains:
        for hop in chain.hops():
            if hop not in hops:
                hops.append(hop)

    totals = {}
    allocations = {}
    for a, node_a in enumerate(node_ids):
        for node_b in node_ids[a + 1 :]:
            totals[(node_a, node_b)] = pair_capacity
            directed = [
                (src, vnf, dst, next_vnf)
                for src, dst in ((node_a, node_b), (node_b, node_a))
                for vnf, next_vnf in hops
            ]
            for key in directed:
                allocations[key] = pair_capacity / len(directed)
    return LinkCapacitySet(total=totals, allocation=allocations)


def paper_scenario(demand_fraction: Optional[float] = None) -> Scenario:
    """
    Three MEC nodes, VNF-1..7 and the three evaluation chains.

    ``demand_fraction`` replaces every demand component by that fraction of
    the reference node capacity.
    """
    nodes = tuple(
        MecNode(
            node_id,
            ResourceVector(*(round(REFERENCE_CAPACITY * multiple, 6),) * 3),
            processing,
        )
        for node_id, multiple, processing in PAPER_NODES
    )
    vnfs = []
    for vnf_id, fractions in PAPER_DEMAND_FRACTIONS.items():
        if demand_fraction is not None:
            fractions = (demand_fraction,) * 3
        vnfs.append(
            VnfSpec(vnf_id, ResourceVector(*(round(f * REFERENCE_CAPACITY, 6) for f in fractions)))
        )
    chains = tuple(ServiceChain(chain_id, seq) for chain_id, seq, _ in PAPER_CHAINS)
    links = even_link_allocations(
        tuple(n.id for n in nodes), chains, PAPER_LINK_CAPACITY
    )
    workload = WorkloadConfig(
        packet_min=100_000.0,
        packet_max=2_000_000.0,
        arrival_rate=2.0,
        horizon=50,
        chain_weights=dict(PAPER_CHAIN_WEIGHTS),
        seed=PAPER_WORKLOAD_SEED,
        timeouts={chain_id: timeout for chain_id, _, timeout in PAPER_CHAINS},
    )
    name = "paper" if demand_fraction is None else f"paper-{demand_fraction:g}"
    return Scenario(
        name=name,
        topology=Topology(nodes=nodes, vnfs=tuple(vnfs), links=links),
        chains=chains,
        workload=workload,
        reference_packet_size=1_000_000.0,
    )


SCENARIO_TEMPLATES = {"paper": paper_scenario}


def fig2_placement(scenario: Scenario) -> PlacementMatrix:
    """Reference spread placement: each chain fanned out over the nodes."""
    assignment = {
        ("SFC-1", "VNF-1"): "MEC-1",
        ("SFC-1", "VNF-2"): "MEC-2",
        ("SFC-1", "VNF-3"): "MEC-3",
        ("SFC-2", "VNF-1"): "MEC-1",
        ("SFC-2", "VNF-4"): "MEC-2",
        ("SFC-2", "VNF-6"): "MEC-3",
        ("SFC-3", "VNF-3"): "MEC-1",
        ("SFC-3", "VNF-4"): "MEC-2",
        ("SFC-3", "VNF-5"): "MEC-3",
        ("SFC-3", "VNF-7"): "MEC-3",
    }
    return PlacementMatrix.from_assignment(scenario.topology, scenario.chains, assignment)
