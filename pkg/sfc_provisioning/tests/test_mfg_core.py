from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from sfc_provisioning.delay_model import reference_objective
from sfc_provisioning.mfg_core import (
    MfgState,
    PlacementDecodeError,
    RewardKernel,
    StochasticMatrixError,
    average_reward,
    backward_sweep,
    build_kernel,
    build_state_space,
    check_stochastic,
    decode_solution,
    forward_sweep,
    fpk_step,
    hjb_backstep,
    initial_density,
    solve_mfg,
    uniform_policy,
    verify_nash,
)
from sfc_provisioning.oracle import dp_values
from sfc_provisioning.scenario import paper_scenario
from sfc_provisioning.topology import is_feasible

from .factories import MB, PAPER_OPTIMUM_MS, single_vnf_scenario, two_node_scenario


def _kernel(base):
    """Three states: 0 branches to 1 and 2, both absorbing."""
    allowed = np.array([[0, 1, 1], [0, 1, 0], [0, 0, 1]], dtype=bool)
    return RewardKernel(
        base=np.array(base, dtype=float),
        allowed=allowed,
        congestion_weight=0.0,
        state_nodes=np.full(3, -1),
        state_demand=np.zeros((3, 3)),
        capacity=np.zeros((0, 3)),
    )


class StateSpaceTests(SimpleTestCase):
    def test_bundled_state_space(self):
        space = build_state_space(paper_scenario())
        # gateway + 3 nodes per chain VNF
        self.assertEqual(len(space), 10 + 10 + 13)
        self.assertEqual(space.horizon, 4)
        self.assertEqual(len(space.edges()), 81)
        self.assertEqual(space.labels[0], "SFC-1|gateway")
        self.assertEqual(space.labels[1], "SFC-1|MEC-1|VNF-1")

    def test_layers_follow_chain_position(self):
        space = build_state_space(paper_scenario())
        egress = space.index(MfgState("SFC-3", 3, "MEC-2", "VNF-7"))
        self.assertEqual(space.layers[egress], 4)
        self.assertTrue(space.is_absorbing(egress))
        self.assertFalse(space.is_absorbing(space.gateway("SFC-3")))
        self.assertEqual(space.layers[space.gateway("SFC-3")], 0)

    def test_missing_allocations_remove_cross_node_edges(self):
        space = build_state_space(two_node_scenario(links=False))
        a_on_a = space.index(MfgState("C", 0, "N-A", "A"))
        self.assertEqual(
            [space.states[s].label for s in space.successors(a_on_a)], ["C|N-A|B"]
        )
        self.assertEqual(len(space.edges()), 6)


class KernelTests(SimpleTestCase):
    def setUp(self):
        self.scenario = paper_scenario()
        self.space = build_state_space(self.scenario)
        self.kernel = build_kernel(self.space, self.scenario)

    def test_gateway_edge_is_ingress_processing(self):
        gateway = self.space.gateway("SFC-1")
        target = self.space.index(MfgState("SFC-1", 0, "MEC-1", "VNF-1"))
        self.assertEqual(self.kernel.base[gateway, target], -25.0)

    def test_chain_edge_adds_transmission(self):
        src = self.space.index(MfgState("SFC-1", 0, "MEC-1", "VNF-1"))
        dst = self.space.index(MfgState("SFC-1", 1, "MEC-2", "VNF-2"))
        self.assertAlmostEqual(self.kernel.base[src, dst], -162.5, places=9)

    def test_default_congestion_weight(self):
        # VNF-4 -> VNF-5 onto MEC-3 from elsewhere: 200 + 120 ms
        self.assertAlmostEqual(self.kernel.max_hop_delay, 320.0, places=9)
        self.assertAlmostEqual(self.kernel.congestion_weight, 3200.0, places=6)
        self.assertFalse(self.kernel.density_independent)
        self.assertTrue(self.kernel.without_congestion().density_independent)

    def test_overloaded_node_penalises_entering_edges(self):
        scenario = single_vnf_scenario()
        space = build_state_space(scenario)
        kernel = build_kernel(space, scenario, congestion_weight=10.0)
        occupancy = np.array([0.0, 15.0])  # 150 demand on 100 capacity
        np.testing.assert_allclose(kernel.node_penalty(occupancy), [0.5])
        rewards = kernel.evaluate(occupancy)
        self.assertAlmostEqual(rewards[0, 1], -105.0, places=9)
        self.assertEqual(rewards[1, 1], 0.0)

    def test_within_capacity_no_penalty(self):
        occupancy = np.full(len(self.space), 1.0 / 3)
        np.testing.assert_array_equal(self.kernel.evaluate(occupancy), self.kernel.base)


class FpkTests(SimpleTestCase):
    def test_swap(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(fpk_step(np.array([0.3, 0.7]), P), [0.7, 0.3])

    def test_forward_and_literal_orientation(self):
        P = np.array([[1.0, 0.0], [1.0, 0.0]])
        theta = np.array([0.3, 0.7])
        np.testing.assert_allclose(fpk_step(theta, P), [1.0, 0.0])
        np.testing.assert_allclose(fpk_step(theta, P, literal=True), [0.3, 0.3])

    def test_mass_is_conserved(self):
        rng = np.random.default_rng(11)
        theta = rng.random(6)
        theta /= theta.sum()
        for _ in range(10_000):
            P = rng.random((6, 6))
            P /= P.sum(axis=1, keepdims=True)
            theta = fpk_step(theta, P)
            self.assertTrue((theta >= 0).all())
            self.assertAlmostEqual(theta.sum(), 1.0, delta=1e-9)

    def test_uniform_sweep_keeps_unit_mass_per_chain(self):
        space = build_state_space(paper_scenario())
        trajectory = forward_sweep(initial_density(space), uniform_policy(space), space.horizon)
        for t in range(space.horizon + 1):
            for chain_id in space.chain_ids:
                mass = trajectory[t, space.chain_states(chain_id)].sum()
                self.assertAlmostEqual(mass, 1.0, places=12)

    def test_non_stochastic_rows_rejected(self):
        with self.assertRaises(StochasticMatrixError):
            check_stochastic(np.array([[0.5, 0.4], [0.0, 1.0]]))
        with self.assertRaises(StochasticMatrixError):
            check_stochastic(np.array([[1.5, -0.5], [0.0, 1.0]]))
        with self.assertRaises(StochasticMatrixError):
            fpk_step(np.array([1.0, 0.0]), np.array([[0.5, 0.4], [0.0, 1.0]]))
        with self.assertRaises(StochasticMatrixError):
            check_stochastic(
                np.array([[0.5, 0.5], [0.0, 1.0]]),
                allowed=np.array([[True, False], [True, True]]),
            )


class HjbTests(SimpleTestCase):
    def test_picks_better_successor(self):
        V, P = hjb_backstep(np.zeros(3), None, _kernel([[0, 5, 3], [0, 0, 0], [0, 0, 0]]))
        self.assertEqual(V[0], 5.0)
        np.testing.assert_array_equal(P[0], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(P[1], [0.0, 1.0, 0.0])

    def test_continuation_value_counts(self):
        V, P = hjb_backstep(
            np.array([0.0, 0.0, 10.0]), None, _kernel([[0, 5, 3], [0, 0, 0], [0, 0, 0]])
        )
        self.assertEqual(V[0], 13.0)
        self.assertEqual(int(np.argmax(P[0])), 2)

    def test_tie_breaks(self):
        kernel = _kernel([[0, 4, 4], [0, 0, 0], [0, 0, 0]])
        _, lowest = hjb_backstep(np.zeros(3), None, kernel, tie_break="lowest")
        _, uniform = hjb_backstep(np.zeros(3), None, kernel, tie_break="uniform")
        np.testing.assert_array_equal(lowest[0], [0.0, 1.0, 0.0])
        np.testing.assert_allclose(uniform[0], [0.0, 0.5, 0.5])
        with self.assertRaises(ValueError):
            hjb_backstep(np.zeros(3), None, kernel, tie_break="random")

    def test_average_reward(self):
        kernel = _kernel([[0, 4, 2], [0, 0, 0], [0, 0, 0]])
        P = np.array([[0, 0.5, 0.5], [0, 1, 0], [0, 0, 1]])
        self.assertEqual(average_reward(0, None, P, np.array([0.0, 1.0, 3.0]), kernel), 5.0)

    def test_constant_shift_moves_values_only(self):
        scenario = paper_scenario()
        space = build_state_space(scenario)
        kernel = build_kernel(space, scenario, congestion_weight=0.0)
        horizon = space.horizon
        values, policies = backward_sweep(kernel.base, kernel.allowed, horizon)
        shifted_values, shifted_policies = backward_sweep(
            kernel.shifted(7.5).base, kernel.allowed, horizon
        )
        for t in range(horizon + 1):
            np.testing.assert_allclose(
                shifted_values[t], values[t] + 7.5 * (horizon - t), atol=1e-9
            )
        np.testing.assert_array_equal(shifted_policies, policies)


class SolveMfgTests(SimpleTestCase):
    def setUp(self):
        self.scenario = paper_scenario()
        self.space = build_state_space(self.scenario)

    def test_density_independent_kernel_needs_one_pass(self):
        kernel = build_kernel(self.space, self.scenario, congestion_weight=0.0)
        solution = solve_mfg(self.space, kernel)
        self.assertTrue(solution.converged)
        self.assertEqual(solution.iterations, 1)

    def test_values_match_dynamic_programming(self):
        kernel = build_kernel(self.space, self.scenario, congestion_weight=0.0)
        solution = solve_mfg(self.space, kernel)
        np.testing.assert_allclose(solution.values[0], dp_values(self.space, kernel), atol=1e-9)
        gateways = [self.space.gateway(c) for c in ("SFC-1", "SFC-2", "SFC-3")]
        np.testing.assert_allclose(solution.values[0, gateways], [-112.5, -125.0, -262.5])

    def test_congested_kernel_decodes_within_capacity(self):
        kernel = build_kernel(self.space, self.scenario)
        solution = solve_mfg(self.space, kernel)
        self.assertGreater(solution.iterations, 1)
        placement = decode_solution(solution, self.scenario)
        self.assertTrue(is_feasible(placement, self.scenario.topology, self.scenario.chains))
        self.assertGreaterEqual(
            reference_objective(placement, self.scenario.topology, self.scenario.chains, [MB]),
            PAPER_OPTIMUM_MS - 1e-9,
        )

    def test_congestion_free_decode_falls_back_off_full_node(self):
        kernel = build_kernel(self.space, self.scenario, congestion_weight=0.0)
        placement = decode_solution(solve_mfg(self.space, kernel), self.scenario)
        self.assertTrue(is_feasible(placement, self.scenario.topology, self.scenario.chains))
        self.assertEqual(
            [placement.node_of(v, "SFC-3") for v in ("VNF-3", "VNF-4", "VNF-5", "VNF-7")],
            ["MEC-1", "MEC-2", "MEC-2", "MEC-2"],
        )
        self.assertAlmostEqual(
            reference_objective(placement, self.scenario.topology, self.scenario.chains, [MB]),
            656.25,
            places=9,
        )

    def test_decode_moves_overflow_to_next_node(self):
        scenario = two_node_scenario(capacity_a=15.0)
        space = build_state_space(scenario)
        solution = solve_mfg(space, build_kernel(space, scenario, congestion_weight=0.0))
        placement = decode_solution(solution, scenario)
        self.assertEqual(placement.node_of("A", "C"), "N-A")
        self.assertEqual(placement.node_of("B", "C"), "N-B")

    def test_decode_backtracks_out_of_dead_end(self):
        scenario = two_node_scenario(capacity_a=20.0, capacity_b=10.0, demand_b=15.0)
        space = build_state_space(scenario)
        solution = solve_mfg(space, build_kernel(space, scenario, congestion_weight=0.0))
        placement = decode_solution(solution, scenario)
        self.assertEqual(placement.node_of("A", "C"), "N-B")
        self.assertEqual(placement.node_of("B", "C"), "N-A")

    def test_decode_raises_when_nothing_fits(self):
        scenario = single_vnf_scenario(capacity=5.0)
        space = build_state_space(scenario)
        solution = solve_mfg(space, build_kernel(space, scenario, congestion_weight=0.0))
        with self.assertRaises(PlacementDecodeError):
            decode_solution(solution, scenario)

    def test_deviation_breaks_equilibrium(self):
        kernel = build_kernel(self.space, self.scenario, congestion_weight=0.0)
        solution = solve_mfg(self.space, kernel)
        gateway = self.space.gateway("SFC-1")
        successors = self.space.successors(gateway)
        worst = int(successors[np.argmin(kernel.base[gateway, successors])])
        policies = solution.policies.copy()
        policies[0, gateway] = 0.0
        policies[0, gateway, worst] = 1.0
        self.assertFalse(verify_nash(replace(solution, policies=policies), kernel))

    def test_symmetric_nodes_split_mass_under_uniform_ties(self):
        scenario = two_node_scenario()
        space = build_state_space(scenario)
        solution = solve_mfg(space, build_kernel(space, scenario), tie_break="uniform")
        self.assertTrue(solution.converged)
        ingress = space.states_at("C", 0)
        egress = space.states_at("C", 1)
        np.testing.assert_allclose(solution.densities[1, ingress], [0.5, 0.5])
        np.testing.assert_allclose(solution.densities[2, egress], [0.5, 0.5])

    def test_lowest_tie_break_concentrates_mass(self):
        scenario = two_node_scenario()
        space = build_state_space(scenario)
        solution = solve_mfg(space, build_kernel(space, scenario, congestion_weight=0.0))
        ingress = space.states_at("C", 0)
        np.testing.assert_allclose(solution.densities[1, ingress], [1.0, 0.0])

    def test_frames(self):
        kernel = build_kernel(self.space, self.scenario, congestion_weight=0.0)
        solution = solve_mfg(self.space, kernel)
        frame = solution.solution_frame()
        self.assertEqual(len(frame), (self.space.horizon + 1) * len(self.space))
        first = frame.iloc[0]
        self.assertEqual(first["state"], "SFC-1|gateway")
        self.assertEqual(first["next_state"], "SFC-1|MEC-1|VNF-1")
        self.assertEqual(len(solution.convergence_frame()), solution.iterations)

    def test_invalid_arguments(self):
        kernel = build_kernel(self.space, self.scenario)
        with self.assertRaises(ValueError):
            solve_mfg(self.space, kernel, horizon=2)
        with self.assertRaises(ValueError):
            solve_mfg(self.space, kernel, damping=0.0)
        with self.assertRaises(ValueError):
            solve_mfg(self.space, kernel, tol=0.0)
