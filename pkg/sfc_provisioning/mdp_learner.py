"""
sfc_provisioning/mdp_learner.py

MDP reduction of the placement game and a tabular actor-critic learner.

The actor keeps one preference weight per allowed edge of the mean-field
state graph and decodes them into transition rows with a temperature
softmax. The critic keeps one value per state. Each episode:

  1. decode the policy and push unit mass from every chain gateway forward
     (FPK) to get the expected occupancy, the mean field of the episode;
  2. evaluate the reward kernel on that mean field;
  3. sample one traversal per chain from its gateway to its egress and
     collect temporal-difference errors  delta = r + V(s') - V(s);
  4. move the critic along delta and the actor along delta times the
     log-softmax gradient of the sampled edge.

Rewards are divided by a reward scale before learning so the learning
rates do not depend on the delay units; logs stay in milliseconds.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .delay_model import objective
from .mfg_core import (
    MalformedStateSpaceError,
    PlacementDecodeError,
    RewardKernel,
    StateSpace,
    build_kernel,
    build_state_space,
    capacity_aware_walk,
    check_stochastic,
    forward_sweep,
    initial_density,
    occupancy,
)
from .scenario import Scenario
from .topology import PlacementMatrix
from .workload import fixed_requests

logger = logging.getLogger(__name__)

PLATEAU_FRACTION = 0.1
PLATEAU_TOLERANCE = 0.05


class LearnerDivergenceError(RuntimeError):
    """Critic values left the configured bound."""


@dataclass
class LearnerConfig:
    episodes: int = 2000
    actor_lr: float = 0.05
    critic_lr: float = 0.1
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    congestion_weight: Optional[float] = None
    value_bound: float = 1e6
    reward_scale: Optional[float] = None
    seed: int = 0

    def validate(self):
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be non-negative")
        if not (self.temperature_start > 0 and self.temperature_end > 0):
            raise ValueError("temperatures must be positive")
        if not self.value_bound > 0:
            raise ValueError("value_bound must be positive")
        if self.reward_scale is not None and not self.reward_scale > 0:
            raise ValueError("reward_scale must be positive")

    def temperature(self, episode: int) -> float:
        """Linear anneal from temperature_start (first) to temperature_end (last)."""
        if self.episodes == 1:
            return self.temperature_start
        fraction = episode / (self.episodes - 1)
        return self.temperature_start + fraction * (
            self.temperature_end - self.temperature_start
        )


# ----------------------------------------------------------------------
# Actor / critic
# ----------------------------------------------------------------------


@dataclass(eq=False)
class Policy:
    """Preference weights over allowed edges, decoded by a temperature softmax."""

    space: StateSpace
    weights: np.ndarray
    temperature: float = 1.0

    @classmethod
    def uniform(cls, space: StateSpace, temperature: float = 1.0) -> "Policy":
        return cls(space, np.zeros((len(space), len(space))), temperature)

    def decode(self, temperature: Optional[float] = None) -> np.ndarray:
        tau = self.temperature if temperature is None else temperature
        allowed = self.space.allowed
        logits = np.where(allowed, self.weights / tau, -np.inf)
        logits = logits - logits.max(axis=1, keepdims=True)
        exp = np.where(allowed, np.exp(logits), 0.0)
        P = exp / exp.sum(axis=1, keepdims=True)
        check_stochastic(P, allowed)
        return P

    def greedy_successors(self, state: int) -> List[int]:
        """Successors ordered by weight, lowest index first on ties."""
        succ = self.space.successors(state)
        return sorted(succ.tolist(), key=lambda a: (-self.weights[state, a], a))


@dataclass(eq=False)
class Critic:
    space: StateSpace
    values: np.ndarray

    @classmethod
    def zeros(cls, space: StateSpace) -> "Critic":
        return cls(space, np.zeros(len(space)))

    def value(self, state: int) -> float:
        """V(s); absorbing egress states are worth nothing."""
        return 0.0 if self.space.is_absorbing(state) else float(self.values[state])


# ----------------------------------------------------------------------
# Episodes
# ----------------------------------------------------------------------


@dataclass
class Transition:
    state: int
    next_state: int
    reward: float  # scaled
    td_error: float


@dataclass
class EpisodeResult:
    sampled_reward: float  # ms
    transitions: List[Transition] = field(default_factory=list)


def expected_occupancy(space: StateSpace, P: np.ndarray) -> np.ndarray:
    trajectory = forward_sweep(initial_density(space), P, space.horizon)
    return occupancy(space, trajectory)


def mdp_reward(
    density: Optional[np.ndarray],
    P: np.ndarray,
    kernel: RewardKernel,
    chain_id: str,
    space: StateSpace,
) -> float:
    """Sum over the chain's states of the row-expected edge reward."""
    rewards = kernel.evaluate(density)
    states = [s for s in space.chain_states(chain_id) if not space.is_absorbing(s)]
    return float(sum(np.dot(P[s], rewards[s]) for s in states))


def arrival_rewards(
    space: StateSpace, P: np.ndarray, rewards: np.ndarray
) -> Dict[Tuple[str, str], float]:
    """
    Expected reward collected on entering each chain VNF (ms), keyed by
    (chain, vnf), under unit mass per gateway.
    """
    trajectory = forward_sweep(initial_density(space), P, space.horizon)
    flow = P * rewards
    out = {}
    for chain_id, length in zip(space.chain_ids, space.chain_lengths):
        for position in range(length):
            targets = space.states_at(chain_id, position)
            t = position  # senders occupy slot `position`
            collected = trajectory[t] @ flow[:, targets]
            out[(chain_id, space.states[targets[0]].vnf_id)] = float(collected.sum())
    return out


def run_episode(
    policy: Policy,
    critic: Critic,
    kernel: RewardKernel,
    rng: np.random.Generator,
    reward_scale: float = 1.0,
    mean_field: Optional[np.ndarray] = None,
) -> EpisodeResult:
    """
    Sample one traversal per chain and compute TD errors against the
    current critic. Nothing is updated here.
    """
    space = policy.space
    P = policy.decode()
    if mean_field is None:
        mean_field = expected_occupancy(space, P)
    rewards = kernel.evaluate(mean_field)

    result = EpisodeResult(sampled_reward=0.0)
    for chain_id in space.chain_ids:
        s = space.gateway(chain_id)
        while not space.is_absorbing(s):
            succ = space.successors(s)
            if not len(succ):
                raise MalformedStateSpaceError(
                    f"{space.states[s].label} cannot reach its egress"
                )
            probs = P[s, succ]
            nxt = int(succ[rng.choice(len(succ), p=probs / probs.sum())])
            reward = rewards[s, nxt]
            scaled = reward / reward_scale
            delta = scaled + critic.value(nxt) - critic.value(s)
            result.transitions.append(Transition(s, nxt, scaled, delta))
            result.sampled_reward += reward
            s = nxt
    return result


def apply_updates(
    policy: Policy,
    critic: Critic,
    episode: EpisodeResult,
    actor_lr: float,
    critic_lr: float,
):
    """Critic V(s) += lr * delta; actor w(s, .) += lr * delta * grad log pi(s'|s)."""
    if not episode.transitions:
        return
    P = policy.decode()
    tau = policy.temperature
    for step in episode.transitions:
        if step.td_error == 0:
            continue
        s = step.state
        critic.values[s] += critic_lr * step.td_error
        if actor_lr:
            allowed = policy.space.allowed[s]
            grad = -P[s].copy()
            grad[step.next_state] += 1.0
            policy.weights[s] += np.where(allowed, actor_lr * step.td_error * grad / tau, 0.0)


# ----------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------


def plateaued(
    curve: Sequence[float],
    fraction: float = PLATEAU_FRACTION,
    tolerance: float = PLATEAU_TOLERANCE,
) -> bool:
    """Variance of the last ``fraction`` of the curve is below ``tolerance`` x its range."""
    values = np.asarray(curve, dtype=float)
    values = values[np.isfinite(values)]
    if len(values) < 2:
        return True
    span = float(values.max() - values.min())
    tail = values[-max(2, int(np.ceil(len(values) * fraction))) :]
    if span == 0:
        return True
    return float(tail.var()) < tolerance * span


@dataclass
class TrainingLog:
    episodes: List[int] = field(default_factory=list)
    temperatures: List[float] = field(default_factory=list)
    sampled_rewards: List[float] = field(default_factory=list)
    expected_rewards: List[float] = field(default_factory=list)
    mdp_rewards: List[float] = field(default_factory=list)
    delays: List[float] = field(default_factory=list)
    curves: Dict[Tuple[str, str], List[float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.episodes)

    def record(
        self,
        episode: int,
        temperature: float,
        sampled: float,
        expected: float,
        mdp: float,
        delay: float,
        arrivals: Dict[Tuple[str, str], float],
    ):
        self.episodes.append(episode)
        self.temperatures.append(temperature)
        self.sampled_rewards.append(sampled)
        self.expected_rewards.append(expected)
        self.mdp_rewards.append(mdp)
        self.delays.append(delay)
        for key, value in arrivals.items():
            self.curves.setdefault(key, []).append(value)

    @property
    def final_delay(self) -> float:
        return self.delays[-1] if self.delays else float("nan")

    @property
    def converged(self) -> bool:
        return all(plateaued(curve) for curve in self.curves.values())

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "episode": self.episodes,
                "temperature": self.temperatures,
                "sampled_reward": self.sampled_rewards,
                "expected_reward": self.expected_rewards,
                "mdp_reward": self.mdp_rewards,
                "delay_ms": self.delays,
            }
        )
        for (chain_id, vnf_id), curve in self.curves.items():
            frame[f"reward[{chain_id}/{vnf_id}]"] = curve
        return frame


@dataclass(eq=False)
class TrainingResult:
    policy: Policy
    critic: Critic
    log: TrainingLog
    kernel: RewardKernel
    reward_scale: float


def train(
    scenario: Scenario,
    config: Optional[LearnerConfig] = None,
    packet_size: Optional[float] = None,
    status_callback: Optional[Callable[[str], None]] = None,
    progress_callback: Optional[Callable[[int, int, str], None]] = None,
) -> TrainingResult:
    """Run the actor-critic loop for ``config.episodes`` episodes."""
    config = config or LearnerConfig()
    config.validate()
    space = build_state_space(scenario)
    kernel = build_kernel(space, scenario, packet_size, config.congestion_weight)
    reward_scale = config.reward_scale or kernel.max_hop_delay or 1.0
    beta = kernel.packet_size

    rng = np.random.default_rng(config.seed)
    policy = Policy.uniform(space, config.temperature_start)
    critic = Critic.zeros(space)
    log = TrainingLog()
    reference_requests = fixed_requests(scenario.chains, beta)

    for episode in range(config.episodes):
        policy.temperature = config.temperature(episode)
        P = policy.decode()
        mean_field = expected_occupancy(space, P)
        rewards = kernel.evaluate(mean_field)

        result = run_episode(policy, critic, kernel, rng, reward_scale, mean_field)
        apply_updates(policy, critic, result, config.actor_lr, config.critic_lr)

        if not np.isfinite(critic.values).all() or np.abs(critic.values).max() > config.value_bound:
            worst = int(np.nanargmax(np.abs(critic.values)))
            raise LearnerDivergenceError(
                f"Critic value {critic.values[worst]:.6g} at "
                f"{space.states[worst].label} exceeds bound {config.value_bound:g} "
                f"in episode {episode}"
            )

        arrivals = arrival_rewards(space, P, rewards)
        try:
            placement = extract_placement(policy, scenario, critic, kernel, reward_scale)
            delay = objective(reference_requests, placement, scenario.topology, scenario.chains)
        except PlacementDecodeError:
            delay = float("nan")
        log.record(
            episode,
            policy.temperature,
            result.sampled_reward,
            sum(arrivals.values()),
            sum(mdp_reward(mean_field, P, kernel, c, space) for c in space.chain_ids),
            delay,
            arrivals,
        )
        if progress_callback and (episode + 1) % 100 == 0:
            progress_callback(episode + 1, config.episodes, f"delay {delay:.3f} ms")

    logger.info(
        f"Trained {config.episodes} episodes (seed {config.seed}): "
        f"final decoded delay {log.final_delay:.3f} ms"
    )
    if status_callback:
        status_callback(
            f"reward curves {'plateaued' if log.converged else 'still moving'}"
        )
    return TrainingResult(policy, critic, log, kernel, reward_scale)


# ----------------------------------------------------------------------
# Decode
# ----------------------------------------------------------------------


def extract_placement(
    policy: Policy,
    scenario: Scenario,
    critic: Optional[Critic] = None,
    kernel: Optional[RewardKernel] = None,
    reward_scale: float = 1.0,
) -> PlacementMatrix:
    """
    Greedy decode: per chain, in listed order, follow the highest-weight
    successor from the gateway. When that successor would overload its node,
    or strands a later VNF, fall back to the feasible successors by best
    r + V; raise PlacementDecodeError when no feasible completion exists.
    """
    space = policy.space
    if kernel is None:
        kernel = build_kernel(space, scenario, congestion_weight=0.0)

    def _score(t: int, s: int, a: int) -> float:
        tail = critic.value(a) if critic is not None else 0.0
        return kernel.base[s, a] / reward_scale + tail

    return capacity_aware_walk(
        space, scenario, lambda t, s: policy.greedy_successors(s), _score
    )


def save_policy(policy: Policy, path) -> Path:
    """Row-major weights as text; the header line lists the state labels."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, policy.weights, fmt="%.17g", header=" ".join(policy.space.labels))
    return path


def load_policy(path, space: StateSpace, temperature: float = 0.1) -> Policy:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().lstrip("#").split()
    if header != space.labels:
        raise ValueError(f"Policy {path} was saved for a different state space")
    weights = np.loadtxt(path, ndmin=2)
    if weights.shape != (len(space), len(space)):
        raise ValueError(f"Policy {path} has shape {weights.shape}, expected {len(space)}^2")
    return Policy(space, weights, temperature)
