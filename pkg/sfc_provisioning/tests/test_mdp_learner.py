import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag

from sfc_provisioning.delay_model import reference_objective
from sfc_provisioning.mdp_learner import (
    Critic,
    LearnerConfig,
    LearnerDivergenceError,
    PlacementDecodeError,
    Policy,
    apply_updates,
    arrival_rewards,
    extract_placement,
    load_policy,
    mdp_reward,
    plateaued,
    run_episode,
    save_policy,
    train,
)
from sfc_provisioning.mfg_core import build_kernel, build_state_space, check_stochastic
from sfc_provisioning.oracle import optimal_placement
from sfc_provisioning.scenario import paper_scenario
from sfc_provisioning.topology import is_feasible

from .factories import MB, single_vnf_scenario, two_node_scenario

# Zero-weight decode of the bundled scenario at 1 MB: 112.5 + 125 + 418.75
FROZEN_DECODE_MS = 656.25


class LearnerConfigTests(SimpleTestCase):
    def test_linear_temperature_anneal(self):
        config = LearnerConfig(episodes=11)
        self.assertEqual(config.temperature(0), 1.0)
        self.assertAlmostEqual(config.temperature(5), 0.55)
        self.assertAlmostEqual(config.temperature(10), 0.1)
        self.assertEqual(LearnerConfig(episodes=1).temperature(0), 1.0)

    def test_validation(self):
        for bad in (
            LearnerConfig(episodes=0),
            LearnerConfig(actor_lr=-0.1),
            LearnerConfig(temperature_end=0.0),
            LearnerConfig(value_bound=0.0),
            LearnerConfig(reward_scale=0.0),
        ):
            with self.assertRaises(ValueError):
                bad.validate()


class RewardTests(SimpleTestCase):
    def setUp(self):
        self.scenario = single_vnf_scenario()
        self.space = build_state_space(self.scenario)
        self.kernel = build_kernel(self.space, self.scenario)
        self.P = Policy.uniform(self.space).decode()

    def test_single_vnf_chain_reward(self):
        self.assertEqual(mdp_reward(None, self.P, self.kernel, "C", self.space), -100.0)
        self.assertEqual(arrival_rewards(self.space, self.P, self.kernel.base), {("C", "A"): -100.0})

    def test_zero_kernel_gives_zero_reward(self):
        kernel = replace(self.kernel, base=np.zeros_like(self.kernel.base))
        self.assertEqual(mdp_reward(None, self.P, kernel, "C", self.space), 0.0)


class EpisodeTests(SimpleTestCase):
    def test_td_error_on_single_hop(self):
        scenario = single_vnf_scenario()
        space = build_state_space(scenario)
        kernel = build_kernel(space, scenario)
        critic = Critic(space, np.array([0.3, 5.0]))
        episode = run_episode(
            Policy.uniform(space), critic, kernel, np.random.default_rng(0), reward_scale=100.0
        )
        self.assertEqual(len(episode.transitions), 1)
        step = episode.transitions[0]
        self.assertEqual((step.state, step.next_state), (0, 1))
        self.assertEqual(step.reward, -1.0)
        # the egress is absorbing, so its stored value is ignored
        self.assertAlmostEqual(step.td_error, -1.3)
        self.assertEqual(episode.sampled_reward, -100.0)

        apply_updates(Policy.uniform(space), critic, episode, actor_lr=0.05, critic_lr=0.1)
        self.assertAlmostEqual(critic.values[0], 0.3 - 0.13)

    def test_zero_rewards_leave_learner_unchanged(self):
        scenario = two_node_scenario()
        space = build_state_space(scenario)
        kernel = build_kernel(space, scenario, congestion_weight=0.0)
        kernel = replace(kernel, base=np.zeros_like(kernel.base))
        policy = Policy.uniform(space)
        critic = Critic.zeros(space)
        rng = np.random.default_rng(3)
        for _ in range(20):
            episode = run_episode(policy, critic, kernel, rng)
            self.assertTrue(all(step.td_error == 0 for step in episode.transitions))
            apply_updates(policy, critic, episode, actor_lr=0.05, critic_lr=0.1)
        np.testing.assert_array_equal(policy.weights, 0.0)
        np.testing.assert_array_equal(critic.values, 0.0)

    def test_decoded_rows_stay_stochastic(self):
        scenario = paper_scenario()
        space = build_state_space(scenario)
        kernel = build_kernel(space, scenario)
        policy = Policy.uniform(space, temperature=0.1)
        critic = Critic.zeros(space)
        rng = np.random.default_rng(5)
        for _ in range(50):
            episode = run_episode(policy, critic, kernel, rng, kernel.max_hop_delay)
            apply_updates(policy, critic, episode, actor_lr=0.5, critic_lr=0.5)
            check_stochastic(policy.decode(), space.allowed)
        self.assertTrue(np.isfinite(policy.weights).all())


class TrainTests(SimpleTestCase):
    def setUp(self):
        self.scenario = paper_scenario()

    def test_same_seed_same_run(self):
        config = LearnerConfig(episodes=20, seed=4)
        first = train(self.scenario, config)
        second = train(self.scenario, config)
        pd.testing.assert_frame_equal(first.log.to_frame(), second.log.to_frame())
        np.testing.assert_array_equal(first.policy.weights, second.policy.weights)

    def test_single_episode(self):
        result = train(self.scenario, LearnerConfig(episodes=1))
        self.assertEqual(len(result.log), 1)
        frame = result.log.to_frame()
        self.assertIn("reward[SFC-3/VNF-7]", frame.columns)
        self.assertEqual(frame["temperature"].tolist(), [1.0])

    def test_frozen_actor_keeps_uniform_policy(self):
        result = train(self.scenario, LearnerConfig(episodes=20, actor_lr=0.0))
        np.testing.assert_array_equal(result.policy.weights, 0.0)
        # zero weights put SFC-1, SFC-2 and the head of SFC-3 on MEC-1; the
        # rest of SFC-3 cannot do better than one hop onto MEC-2
        for delay in result.log.delays:
            self.assertGreaterEqual(delay, FROZEN_DECODE_MS - 1e-9)

    def test_divergence_guard(self):
        with self.assertRaises(LearnerDivergenceError):
            train(self.scenario, LearnerConfig(episodes=5, value_bound=1e-6))


class ExtractPlacementTests(SimpleTestCase):
    def test_uniform_policy_fills_first_node_then_falls_back(self):
        scenario = paper_scenario()
        placement = extract_placement(Policy.uniform(build_state_space(scenario)), scenario)
        self.assertTrue(is_feasible(placement, scenario.topology, scenario.chains))
        nodes = {(row["chain"], row["vnf"]): row["node"] for row in placement.rows()}
        for chain in scenario.chains[:2]:
            self.assertEqual({nodes[(chain.id, v)] for v in chain.vnf_sequence}, {"MEC-1"})
        self.assertEqual(
            [nodes[("SFC-3", v)] for v in ("VNF-3", "VNF-4", "VNF-5", "VNF-7")],
            ["MEC-1", "MEC-2", "MEC-2", "MEC-2"],
        )
        self.assertAlmostEqual(
            reference_objective(placement, scenario.topology, scenario.chains, [MB]),
            FROZEN_DECODE_MS,
        )

    def test_falls_back_when_node_is_full(self):
        scenario = two_node_scenario(capacity_a=15.0)
        placement = extract_placement(Policy.uniform(build_state_space(scenario)), scenario)
        self.assertEqual(placement.node_of("A", "C"), "N-A")
        self.assertEqual(placement.node_of("B", "C"), "N-B")

    def test_backtracks_when_a_fitting_choice_strands_the_chain(self):
        # B fits only on N-A, so A has to leave room for it
        scenario = two_node_scenario(capacity_a=20.0, capacity_b=10.0, demand_b=15.0)
        placement = extract_placement(Policy.uniform(build_state_space(scenario)), scenario)
        self.assertEqual(placement.node_of("A", "C"), "N-B")
        self.assertEqual(placement.node_of("B", "C"), "N-A")
        self.assertTrue(is_feasible(placement, scenario.topology, scenario.chains))

    def test_no_node_fits(self):
        scenario = single_vnf_scenario(capacity=5.0)
        with self.assertRaises(PlacementDecodeError):
            extract_placement(Policy.uniform(build_state_space(scenario)), scenario)


class PolicyFileTests(SimpleTestCase):
    def test_saved_policy_decodes_the_same(self):
        scenario = paper_scenario()
        space = build_state_space(scenario)
        result = train(scenario, LearnerConfig(episodes=10))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_policy(result.policy, Path(tmp) / "policy.txt")
            loaded = load_policy(path, space)
            with self.assertRaises(ValueError):
                load_policy(path, build_state_space(two_node_scenario()))
        np.testing.assert_array_equal(loaded.weights, result.policy.weights)
        self.assertEqual(
            extract_placement(loaded, scenario).rows(),
            extract_placement(result.policy, scenario).rows(),
        )


class PlateauTests(SimpleTestCase):
    def test_flat_and_moving_curves(self):
        self.assertTrue(plateaued([3.0] * 50))
        self.assertFalse(plateaued(list(range(100))))
        self.assertTrue(plateaued(list(range(50)) + [49.0] * 50))


@tag("slow")
class LearnerQualityTests(SimpleTestCase):
    """Full-length training runs on the bundled scenario."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scenario = paper_scenario()
        _, cls.optimum = optimal_placement(cls.scenario)
        cls.results = [train(cls.scenario, LearnerConfig(seed=seed)) for seed in range(10)]
        cls.frozen = train(cls.scenario, LearnerConfig(actor_lr=0.0, seed=0))

    def test_decoded_delay_near_optimum(self):
        close = [r.log.final_delay <= 1.1 * self.optimum for r in self.results]
        self.assertGreaterEqual(sum(close), 8)

    def test_learning_beats_frozen_actor(self):
        baseline = self.frozen.log.final_delay
        self.assertGreaterEqual(baseline, FROZEN_DECODE_MS - 1e-9)
        better = [r.log.final_delay < baseline for r in self.results]
        self.assertGreaterEqual(sum(better), 8)

    def test_reward_curves_plateau(self):
        self.assertTrue(all(r.log.converged for r in self.results[:3]))

    def test_shared_ingress_curves_agree(self):
        for result in self.results[:3]:
            first = result.log.curves[("SFC-1", "VNF-1")][-1]
            second = result.log.curves[("SFC-2", "VNF-1")][-1]
            self.assertLessEqual(abs(first - second), 0.3 * max(abs(first), abs(second)))
