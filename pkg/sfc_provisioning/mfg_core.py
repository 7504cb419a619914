"""
sfc_provisioning/mfg_core.py

Discrete-time mean-field game over (node, VNF) states.

The state space is the union of one sub-graph per chain:

    gateway(k) -> (i, ingress) -> (i', vnf_2) -> ... -> (i'', egress) -> itself

A gateway is the point where a request enters its chain (no node yet); each
egress state carries a zero-reward self-loop so every row of a transition
matrix is a probability vector and density mass is conserved. A state at
chain position p is reached at time p + 1, so the horizon is the longest
chain length.

Arrays are indexed by the state order of ``StateSpace.states``:
densities and values are (n,), transition matrices and rewards (n, n),
trajectories carry a leading time axis.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .delay_model import unit_processing_delay, unit_transmission_delay
from .scenario import Scenario
from .topology import CAPACITY_TOLERANCE, PlacementMatrix, Topology

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12
TIE_BREAKS = ("lowest", "uniform")

# Congestion weight multiple of the largest single-hop delay
DEFAULT_CONGESTION_MULTIPLE = 10.0


class StochasticMatrixError(ValueError):
    """A transition matrix row is not a probability vector."""


class MalformedStateSpaceError(ValueError):
    """A non-terminal state has no outgoing edge."""


class PlacementDecodeError(RuntimeError):
    """No capacity-feasible completion exists for a chain."""


# ----------------------------------------------------------------------
# State space
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MfgState:
    chain_id: str
    position: int  # -1 for the gateway
    node_id: Optional[str] = None
    vnf_id: Optional[str] = None

    @property
    def is_gateway(self) -> bool:
        return self.node_id is None

    @property
    def layer(self) -> int:
        """Time slot at which the state is occupied."""
        return self.position + 1

    @property
    def label(self) -> str:
        if self.is_gateway:
            return f"{self.chain_id}|gateway"
        return f"{self.chain_id}|{self.node_id}|{self.vnf_id}"


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Ordered states plus the boolean adjacency of allowed transitions."""

    states: Tuple[MfgState, ...]
    allowed: np.ndarray
    chain_ids: Tuple[str, ...]
    chain_lengths: Tuple[int, ...]
    node_ids: Tuple[str, ...]
    _index: Dict[MfgState, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index.update({s: n for n, s in enumerate(self.states)})

    def __len__(self) -> int:
        return len(self.states)

    @property
    def horizon(self) -> int:
        return max(self.chain_lengths)

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.states]

    @property
    def layers(self) -> np.ndarray:
        return np.array([s.layer for s in self.states], dtype=int)

    @property
    def node_indices(self) -> np.ndarray:
        """Hosting node index per state, -1 for gateways."""
        return np.array(
            [-1 if s.is_gateway else self.node_ids.index(s.node_id) for s in self.states],
            dtype=int,
        )

    def index(self, state: MfgState) -> int:
        return self._index[state]

    def successors(self, state: int) -> np.ndarray:
        return np.flatnonzero(self.allowed[state])

    def is_absorbing(self, state: int) -> bool:
        return bool(self.allowed[state, state])

    def gateway(self, chain_id: str) -> int:
        return self._index[MfgState(chain_id, -1)]

    @property
    def gateways(self) -> List[int]:
        return [self.gateway(c) for c in self.chain_ids]

    def chain_states(self, chain_id: str) -> List[int]:
        return [n for n, s in enumerate(self.states) if s.chain_id == chain_id]

    def states_at(self, chain_id: str, position: int) -> List[int]:
        return [
            n
            for n, s in enumerate(self.states)
            if s.chain_id == chain_id and s.position == position
        ]

    def edges(self) -> List[Tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.allowed))]


def build_state_space(scenario: Scenario) -> StateSpace:
    """
    Chain-ordered (node, VNF) graph of a scenario.

    A cross-node edge exists only when the hop has a link allocation; hops
    within one node are always allowed.
    """
    if not scenario.chains:
        raise MalformedStateSpaceError("Scenario has no service chains")
    topology = scenario.topology
    node_ids = topology.node_ids

    states: List[MfgState] = []
    for chain in scenario.chains:
        if not chain.vnf_sequence:
            raise MalformedStateSpaceError(f"Chain {chain.id} has no VNFs")
        states.append(MfgState(chain.id, -1))
        for position, vnf_id in enumerate(chain.vnf_sequence):
            states.extend(MfgState(chain.id, position, i, vnf_id) for i in node_ids)

    index = {s: n for n, s in enumerate(states)}
    allowed = np.zeros((len(states), len(states)), dtype=bool)
    links = topology.links
    for chain in scenario.chains:
        gateway = index[MfgState(chain.id, -1)]
        for i in node_ids:
            allowed[gateway, index[MfgState(chain.id, 0, i, chain.ingress)]] = True
        for position, (vnf_id, next_vnf_id) in enumerate(chain.hops()):
            for i in node_ids:
                for i_next in node_ids:
                    if i != i_next and links.allocation_for(
                        i, vnf_id, i_next, next_vnf_id
                    ) is None:
                        continue
                    allowed[
                        index[MfgState(chain.id, position, i, vnf_id)],
                        index[MfgState(chain.id, position + 1, i_next, next_vnf_id)],
                    ] = True
        last = len(chain) - 1
        for i in node_ids:
            egress = index[MfgState(chain.id, last, i, chain.egress)]
            allowed[egress, egress] = True

    return StateSpace(
        states=tuple(states),
        allowed=allowed,
        chain_ids=tuple(c.id for c in scenario.chains),
        chain_lengths=tuple(len(c) for c in scenario.chains),
        node_ids=node_ids,
    )


# ----------------------------------------------------------------------
# Reward kernel
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RewardKernel:
    """
    Edge rewards r[s, s'] = -(hop delay) - congestion penalty.

    ``base`` holds the density-free part (zero outside allowed edges). The
    penalty charged on entering a state on node i is
    ``congestion_weight * max_c (load_c(i) - cap_c)+ / cap_c`` where load is
    the occupancy-weighted demand of every state hosted on i.
    """

    base: np.ndarray
    allowed: np.ndarray
    congestion_weight: float
    state_nodes: np.ndarray
    state_demand: np.ndarray
    capacity: np.ndarray
    packet_size: float = 1_000_000.0

    @property
    def density_independent(self) -> bool:
        return self.congestion_weight == 0

    @property
    def max_hop_delay(self) -> float:
        return float(np.abs(self.base).max()) if self.base.size else 0.0

    @property
    def _penalised(self) -> np.ndarray:
        targets = self.state_nodes >= 0
        mask = self.allowed & targets[None, :]
        np.fill_diagonal(mask, False)
        return mask

    def node_load(self, occupancy: np.ndarray) -> np.ndarray:
        load = np.zeros_like(self.capacity)
        hosted = self.state_nodes >= 0
        np.add.at(
            load,
            self.state_nodes[hosted],
            occupancy[hosted, None] * self.state_demand[hosted],
        )
        return load

    def node_penalty(self, occupancy: np.ndarray) -> np.ndarray:
        """Largest relative overload per node; 0 within capacity."""
        excess = np.maximum(self.node_load(occupancy) - self.capacity, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            relative = np.where(
                self.capacity > 0,
                excess / self.capacity,
                np.where(excess > 0, np.inf, 0.0),
            )
        return relative.max(axis=1)

    def evaluate(self, occupancy: Optional[np.ndarray] = None) -> np.ndarray:
        if occupancy is None or self.density_independent:
            return self.base.copy()
        penalty = self.node_penalty(np.asarray(occupancy, dtype=float))
        charge = np.zeros(len(self.state_nodes))
        hosted = self.state_nodes >= 0
        charge[hosted] = penalty[self.state_nodes[hosted]]
        return np.where(
            self._penalised, self.base - self.congestion_weight * charge[None, :], self.base
        )

    def shifted(self, constant: float) -> "RewardKernel":
        """Kernel with ``constant`` added to every allowed edge."""
        return replace(self, base=np.where(self.allowed, self.base + constant, 0.0))

    def without_congestion(self) -> "RewardKernel":
        return replace(self, congestion_weight=0.0)


def state_demand(space: StateSpace, topology: Topology) -> np.ndarray:
    """(states x 3) resource demand; zero for gateways."""
    demand = np.zeros((len(space), 3))
    for s, state in enumerate(space.states):
        if not state.is_gateway:
            demand[s] = topology.vnf(state.vnf_id).demand.as_array()
    return demand


def build_kernel(
    space: StateSpace,
    scenario: Scenario,
    packet_size: Optional[float] = None,
    congestion_weight: Optional[float] = None,
) -> RewardKernel:
    """
    Reward kernel at one packet size.

    Gateway edges cost the ingress processing delay; chain edges cost the hop
    transmission delay plus the receiver's processing delay. A None
    ``congestion_weight`` means ten times the largest single-hop delay.
    """
    topology = scenario.topology
    beta = scenario.reference_packet_size if packet_size is None else packet_size
    n = len(space)
    base = np.zeros((n, n))
    for s, t in space.edges():
        if s == t:
            continue
        src, dst = space.states[s], space.states[t]
        reward = -unit_processing_delay(topology, dst.node_id, dst.vnf_id, beta)
        if not src.is_gateway:
            reward -= unit_transmission_delay(
                topology, src.node_id, src.vnf_id, dst.node_id, dst.vnf_id, beta
            )
        base[s, t] = reward

    if congestion_weight is None:
        congestion_weight = DEFAULT_CONGESTION_MULTIPLE * float(np.abs(base).max())

    return RewardKernel(
        base=base,
        allowed=space.allowed.copy(),
        congestion_weight=float(congestion_weight),
        state_nodes=space.node_indices,
        state_demand=state_demand(space, topology),
        capacity=topology.capacity_matrix(),
        packet_size=float(beta),
    )


# ----------------------------------------------------------------------
# Densities and transition matrices
# ----------------------------------------------------------------------


def initial_density(
    space: StateSpace, mass: Optional[Mapping[str, float]] = None
) -> np.ndarray:
    """Unit mass (or the given per-chain mass) at every chain gateway."""
    theta = np.zeros(len(space))
    for chain_id in space.chain_ids:
        theta[space.gateway(chain_id)] = 1.0 if mass is None else mass[chain_id]
    return theta


def uniform_policy(space: StateSpace) -> np.ndarray:
    allowed = space.allowed.astype(float)
    rows = allowed.sum(axis=1, keepdims=True)
    if (rows == 0).any():
        bad = space.states[int(np.flatnonzero(rows.ravel() == 0)[0])].label
        raise MalformedStateSpaceError(f"State {bad} has no outgoing edge")
    return allowed / rows


def check_stochastic(P: np.ndarray, allowed: Optional[np.ndarray] = None):
    """Raise StochasticMatrixError unless every row is a probability vector."""
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise StochasticMatrixError(f"Transition matrix must be square, got {P.shape}")
    if (P < -STOCHASTIC_TOLERANCE).any() or (P > 1 + STOCHASTIC_TOLERANCE).any():
        raise StochasticMatrixError("Transition probabilities must lie in [0, 1]")
    sums = P.sum(axis=1)
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > STOCHASTIC_TOLERANCE:
        raise StochasticMatrixError(f"Row {worst} sums to {sums[worst]:.12g}, not 1")
    if allowed is not None and (P[~allowed] > STOCHASTIC_TOLERANCE).any():
        raise StochasticMatrixError("Transition mass outside the allowed edges")


def fpk_step(density: np.ndarray, P: np.ndarray, literal: bool = False) -> np.ndarray:
    """
    One forward step of the density.

    Forward form theta'_j = sum_j' P[j', j] theta_j' moves mass along
    transitions and conserves it. ``literal`` applies P[j, j'] instead.
    """
    check_stochastic(P)
    density = np.asarray(density, dtype=float)
    return P @ density if literal else P.T @ density


def forward_sweep(
    theta0: np.ndarray,
    policies: np.ndarray,
    horizon: int,
    literal: bool = False,
) -> np.ndarray:
    """(horizon + 1, n) trajectory; ``policies`` is one matrix or one per step."""
    trajectory = np.zeros((horizon + 1, len(theta0)))
    trajectory[0] = theta0
    for t in range(horizon):
        P = policies if policies.ndim == 2 else policies[t]
        trajectory[t + 1] = fpk_step(trajectory[t], P, literal=literal)
    return trajectory


def occupancy(space: StateSpace, trajectory: np.ndarray) -> np.ndarray:
    """Density of every state at the slot it is occupied."""
    layers = np.minimum(space.layers, trajectory.shape[0] - 1)
    return trajectory[layers, np.arange(len(space))]


def expected_reward(state: int, P_row: np.ndarray, rewards: np.ndarray) -> float:
    """sum_j' P[j, j'] r[j, j'] for one state under evaluated rewards."""
    return float(np.dot(P_row, rewards[state]))


def average_reward(
    state: int,
    density: Optional[np.ndarray],
    P: np.ndarray,
    V: np.ndarray,
    kernel: RewardKernel,
) -> float:
    """One-step payoff plus continuation value: sum_j' P[j, j'] (r[j, j'] + V[j'])."""
    rewards = kernel.evaluate(density)
    return float(np.dot(P[state], rewards[state] + V))


# ----------------------------------------------------------------------
# Backward / forward recursions
# ----------------------------------------------------------------------


def _best_response(
    V_next: np.ndarray,
    rewards: np.ndarray,
    allowed: np.ndarray,
    tie_break: str,
) -> Tuple[np.ndarray, np.ndarray]:
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"Unknown tie-break '{tie_break}'")
    if not np.isfinite(V_next).all():
        raise ValueError("Continuation values must be finite")
    dead = ~allowed.any(axis=1)
    if dead.any():
        raise MalformedStateSpaceError(
            f"State {int(np.flatnonzero(dead)[0])} has no outgoing edge"
        )
    q = np.where(allowed, rewards + V_next[None, :], -np.inf)
    V = q.max(axis=1)
    P = np.zeros_like(rewards)
    if tie_break == "lowest":
        P[np.arange(len(V)), np.argmax(q, axis=1)] = 1.0
    else:
        slack = TIE_TOLERANCE * np.maximum(1.0, np.abs(V))
        ties = allowed & (V[:, None] - q <= slack[:, None])
        P = ties / ties.sum(axis=1, keepdims=True)
    return V, P


def hjb_backstep(
    V_next: np.ndarray,
    density: Optional[np.ndarray],
    kernel: RewardKernel,
    tie_break: str = "lowest",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One backward Bellman step.

    The maximised quantity is linear in the row, so the best row is a point
    mass on the best successor. ``lowest`` picks the lowest state index on
    ties; ``uniform`` spreads the row over all tied successors.
    """
    return _best_response(
        np.asarray(V_next, dtype=float), kernel.evaluate(density), kernel.allowed, tie_break
    )


def backward_sweep(
    rewards: np.ndarray, allowed: np.ndarray, horizon: int, tie_break: str = "lowest"
) -> Tuple[np.ndarray, np.ndarray]:
    n = len(rewards)
    values = np.zeros((horizon + 1, n))
    policies = np.zeros((horizon, n, n))
    for t in range(horizon - 1, -1, -1):
        values[t], policies[t] = _best_response(values[t + 1], rewards, allowed, tie_break)
    return values, policies


@dataclass
class IterationRecord:
    iteration: int
    value_change: float
    density_change: float


@dataclass(eq=False)
class MfgSolution:
    """Coupled fixed point: value, policy and density trajectories."""

    space: StateSpace
    values: np.ndarray  # (T + 1, n)
    policies: np.ndarray  # (T, n, n)
    densities: np.ndarray  # (T + 1, n)
    occupancy: np.ndarray  # mean field used by the last backward sweep
    rewards: np.ndarray
    converged: bool
    iterations: int
    history: List[IterationRecord] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.policies.shape[0]

    def convergence_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "iteration": r.iteration,
                    "value_change": r.value_change,
                    "density_change": r.density_change,
                }
                for r in self.history
            ],
            columns=["iteration", "value_change", "density_change"],
        )

    def solution_frame(self) -> pd.DataFrame:
        """Per (t, state): value, density and the chosen successor."""
        labels = self.space.labels
        rows = []
        for t in range(self.horizon + 1):
            for s, label in enumerate(labels):
                if t < self.horizon:
                    row = self.policies[t, s]
                    choice = labels[int(np.argmax(row))]
                    probability = float(row.max())
                else:
                    choice, probability = "", 1.0
                rows.append(
                    {
                        "t": t,
                        "state": label,
                        "value": self.values[t, s],
                        "density": self.densities[t, s],
                        "next_state": choice,
                        "probability": probability,
                    }
                )
        return pd.DataFrame(
            rows,
            columns=["t", "state", "value", "density", "next_state", "probability"],
        )


def solve_mfg(
    space: StateSpace,
    kernel: RewardKernel,
    theta0: Optional[np.ndarray] = None,
    horizon: Optional[int] = None,
    tol: float = 1e-9,
    max_iters: int = 200,
    damping: float = 0.5,
    tie_break: str = "lowest",
    literal_fpk: bool = False,
    status_callback: Optional[Callable[[str], None]] = None,
) -> MfgSolution:
    """
    Alternate backward (HJB) and forward (FPK) sweeps to a fixed point.

    The first mean field comes from a forward sweep under the uniform
    policy. Each iteration re-evaluates the kernel on the current mean
    field, solves the backward sweep, pushes theta0 forward under the new
    policies and damps the density update
    ``theta <- (1 - damping) theta_old + damping theta_new``. Stops when the
    value and density trajectories both move by less than ``tol`` (max
    norm). A density-independent kernel needs a single pass.
    """
    horizon = space.horizon if horizon is None else horizon
    if horizon < space.horizon:
        raise ValueError(
            f"Horizon {horizon} is shorter than the longest chain ({space.horizon})"
        )
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")

    theta0 = initial_density(space) if theta0 is None else np.asarray(theta0, float)
    trajectory = forward_sweep(theta0, uniform_policy(space), horizon, literal_fpk)
    values = np.zeros((horizon + 1, len(space)))
    policies = np.zeros((horizon, len(space), len(space)))
    history: List[IterationRecord] = []
    converged = False
    mean_field = occupancy(space, trajectory)
    rewards = kernel.evaluate(mean_field)

    for iteration in range(1, max_iters + 1):
        mean_field = occupancy(space, trajectory)
        rewards = kernel.evaluate(mean_field)
        new_values, policies = backward_sweep(rewards, kernel.allowed, horizon, tie_break)
        fresh = forward_sweep(theta0, policies, horizon, literal_fpk)

        if kernel.density_independent:
            record = IterationRecord(
                iteration,
                float(np.abs(new_values - values).max()),
                float(np.abs(fresh - trajectory).max()),
            )
            values, trajectory = new_values, fresh
            history.append(record)
            converged = True
            break

        damped = (1.0 - damping) * trajectory + damping * fresh
        record = IterationRecord(
            iteration,
            float(np.abs(new_values - values).max()),
            float(np.abs(damped - trajectory).max()),
        )
        values, trajectory = new_values, damped
        history.append(record)
        if status_callback and iteration % 10 == 0:
            status_callback(
                f"iteration {iteration}: dV={record.value_change:.3g} "
                f"dtheta={record.density_change:.3g}"
            )
        if iteration > 1 and record.value_change < tol and record.density_change < tol:
            converged = True
            break

    if converged:
        logger.info(f"MFG fixed point reached after {len(history)} iteration(s)")
    else:
        logger.warning(
            f"MFG did not converge within {max_iters} iterations "
            f"(last dV={history[-1].value_change:.3g}, "
            f"dtheta={history[-1].density_change:.3g})"
        )

    return MfgSolution(
        space=space,
        values=values,
        policies=policies,
        densities=trajectory,
        occupancy=mean_field,
        rewards=rewards,
        converged=converged,
        iterations=len(history),
        history=history,
    )


def verify_nash(
    solution: MfgSolution, kernel: RewardKernel, epsilon: float = 1e-6
) -> bool:
    """
    True when no single-row deviation to a point mass improves any state's
    payoff-plus-continuation by more than ``epsilon``. The mean field is held
    at the solution's occupancy.
    """
    rewards = kernel.evaluate(solution.occupancy)
    allowed = kernel.allowed
    for t in range(solution.horizon):
        continuation = np.where(allowed, rewards + solution.values[t + 1][None, :], 0.0)
        achieved = (solution.policies[t] * continuation).sum(axis=1)
        best = np.where(allowed, continuation, -np.inf).max(axis=1)
        if (best > achieved + epsilon).any():
            s = int(np.argmax(best - achieved))
            logger.debug(
                f"Profitable deviation at t={t} from {solution.space.states[s].label}: "
                f"{best[s]:.6g} > {achieved[s]:.6g}"
            )
            return False
    return True


def capacity_aware_walk(
    space: StateSpace,
    scenario: Scenario,
    ranked_successors: Callable[[int, int], Sequence[int]],
    score: Callable[[int, int, int], float],
) -> PlacementMatrix:
    """
    Decode a placement chain by chain, in listed order.

    At step t from state s the first of ``ranked_successors(t, s)`` is taken
    when it fits its node given everything placed so far; otherwise, or when
    it leaves a later VNF with no node, the fitting successors are tried by
    descending ``score(t, s, a)`` (lowest index on ties). Raises
    PlacementDecodeError when no capacity-feasible completion exists.
    """
    topology = scenario.topology
    capacity = topology.capacity_matrix() * (1 + CAPACITY_TOLERANCE)
    demand = state_demand(space, topology)
    nodes = space.node_indices
    load = np.zeros_like(capacity)
    steps = [(chain, t) for chain in scenario.chains for t in range(len(chain))]
    chosen = [0] * len(steps)

    def _fits(state: int) -> bool:
        return bool((load[nodes[state]] + demand[state] <= capacity[nodes[state]]).all())

    def _extend(n: int, s: int) -> bool:
        if n == len(steps):
            return True
        chain, t = steps[n]
        if t == 0:
            s = space.gateway(chain.id)
        ranked = list(ranked_successors(t, s))
        order = ranked[:1] + sorted(ranked[1:], key=lambda a: (-score(t, s, a), a))
        for a in order:
            if not _fits(a):
                continue
            if a != ranked[0]:
                logger.debug(
                    f"{chain.id}: {space.states[ranked[0]].label} not usable, "
                    f"trying {space.states[a].label}"
                )
            load[nodes[a]] += demand[a]
            chosen[n] = a
            if _extend(n + 1, a):
                return True
            load[nodes[a]] -= demand[a]
        return False

    if not _extend(0, -1):
        raise PlacementDecodeError(
            f"No capacity-feasible placement of {', '.join(scenario.chain_ids)} "
            f"on {', '.join(topology.node_ids)}"
        )
    assignment = {}
    for (chain, _), a in zip(steps, chosen):
        state = space.states[a]
        assignment[(chain.id, state.vnf_id)] = state.node_id
    return PlacementMatrix.from_assignment(topology, scenario.chains, assignment)


def decode_solution(solution: MfgSolution, scenario: Scenario) -> PlacementMatrix:
    """
    Walk each chain from its gateway along the most probable successor,
    diverting to the best-valued fitting successor (reward plus continuation
    value) when the preferred node is full.
    """
    space = solution.space

    def _ranked(t: int, s: int) -> List[int]:
        row = solution.policies[t, s]
        return sorted(space.successors(s).tolist(), key=lambda a: (-row[a], a))

    def _score(t: int, s: int, a: int) -> float:
        return float(solution.rewards[s, a] + solution.values[t + 1, a])

    return capacity_aware_walk(space, scenario, _ranked, _score)
