import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from sfc_provisioning.scenario import paper_scenario
from sfc_provisioning.workload import (
    Request,
    WorkloadConfig,
    WorkloadConfigError,
    chain_counts,
    count_timeouts,
    export_requests_csv,
    fixed_requests,
    generate_requests,
)


class GenerateRequestsTests(SimpleTestCase):
    def setUp(self):
        self.config = paper_scenario().workload

    def test_same_seed_same_trace(self):
        self.assertEqual(generate_requests(self.config), generate_requests(self.config))

    def test_different_seed_different_trace(self):
        other = WorkloadConfig(**{**self.config.__dict__, "seed": self.config.seed + 1})
        self.assertNotEqual(generate_requests(self.config), generate_requests(other))

    def test_requests_respect_bounds(self):
        requests = generate_requests(self.config)
        self.assertTrue(requests)
        for r in requests:
            self.assertGreaterEqual(r.packet_size, self.config.packet_min)
            self.assertLessEqual(r.packet_size, self.config.packet_max)
            self.assertIn(r.chain_id, self.config.chain_weights)
            self.assertEqual(r.timeout, self.config.timeout_for(r.chain_id))
            self.assertLess(r.arrival_slot, self.config.horizon)
        slots = [r.arrival_slot for r in requests]
        self.assertEqual(slots, sorted(slots))
        self.assertEqual(len({r.user_id for r in requests}), len(requests))

    def test_zero_rate_or_horizon_is_empty(self):
        self.assertEqual(
            generate_requests(WorkloadConfig(arrival_rate=0.0, chain_weights={})), []
        )
        self.assertEqual(
            generate_requests(WorkloadConfig(horizon=0, chain_weights={"C": 1.0})), []
        )

    def test_single_weighted_chain_gets_everything(self):
        config = WorkloadConfig(chain_weights={"C": 1.0, "D": 0.0}, seed=5)
        self.assertEqual(set(chain_counts(generate_requests(config))), {"C"})


class LongHorizonTests(SimpleTestCase):
    """Empirical moments of a long trace against the configured distribution."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.config = WorkloadConfig(
            arrival_rate=2.0,
            horizon=10_000,
            chain_weights={"SFC-1": 0.4, "SFC-2": 0.3, "SFC-3": 0.3},
            seed=2021,
        )
        cls.requests = generate_requests(cls.config)

    def test_mean_arrivals_per_slot(self):
        per_slot = np.bincount(
            [r.arrival_slot for r in self.requests], minlength=self.config.horizon
        )
        sigma = np.sqrt(self.config.arrival_rate / self.config.horizon)
        self.assertLessEqual(abs(per_slot.mean() - self.config.arrival_rate), 3 * sigma)
        # Poisson: variance equals the rate
        self.assertAlmostEqual(per_slot.var() / self.config.arrival_rate, 1.0, delta=0.1)

    def test_chain_frequencies_follow_weights(self):
        chain_ids = list(self.config.chain_weights)
        counts = chain_counts(self.requests)
        observed = np.array([counts.get(c, 0) for c in chain_ids], dtype=float)
        expected = len(self.requests) * np.array(
            [self.config.chain_weights[c] for c in chain_ids]
        )
        statistic = float(((observed - expected) ** 2 / expected).sum())
        # 99.9 % quantile of chi-square with two degrees of freedom
        self.assertLess(statistic, -2.0 * np.log(0.001))
        np.testing.assert_allclose(
            observed / len(self.requests), expected / len(self.requests), atol=0.015
        )

    def test_mean_packet_size(self):
        sizes = np.array([r.packet_size for r in self.requests])
        spread = self.config.packet_max - self.config.packet_min
        sigma = spread / np.sqrt(12 * len(sizes))
        midpoint = (self.config.packet_min + self.config.packet_max) / 2
        self.assertLessEqual(abs(sizes.mean() - midpoint), 4 * sigma)


class WorkloadValidationTests(SimpleTestCase):
    def test_inverted_packet_range(self):
        with self.assertRaises(WorkloadConfigError):
            WorkloadConfig(packet_min=10.0, packet_max=5.0, chain_weights={"C": 1.0}).validate()

    def test_weights_must_sum_to_one(self):
        with self.assertRaisesMessage(WorkloadConfigError, "sum to 1"):
            WorkloadConfig(chain_weights={"C": 0.5, "D": 0.4}).validate()

    def test_negative_weight(self):
        with self.assertRaises(WorkloadConfigError):
            WorkloadConfig(chain_weights={"C": 1.5, "D": -0.5}).validate()

    def test_weights_required_for_nonzero_rate(self):
        with self.assertRaises(WorkloadConfigError):
            generate_requests(WorkloadConfig())

    def test_timeouts_must_be_positive(self):
        with self.assertRaises(WorkloadConfigError):
            WorkloadConfig(chain_weights={"C": 1.0}, timeouts={"C": 0.0}).validate()


class TimeoutTests(SimpleTestCase):
    def test_strictly_longer_delays_time_out(self):
        requests = [
            Request("u0", "C", 1.0, 100.0, 0),
            Request("u1", "C", 1.0, 100.0, 0),
            Request("u2", "C", 1.0, 100.0, 1),
        ]
        self.assertEqual(count_timeouts(requests, [99.0, 100.0, 100.5]), 1)

    def test_fixed_requests_use_chain_timeouts(self):
        scenario = paper_scenario()
        reference_requests = fixed_requests(scenario.chains, 1e6, scenario.timeouts)
        self.assertEqual([r.chain_id for r in reference_requests], ["SFC-1", "SFC-2", "SFC-3"])
        self.assertEqual([r.timeout for r in reference_requests], [400.0, 400.0, 700.0])
        self.assertTrue(all(r.packet_size == 1e6 for r in reference_requests))


class ExportTests(SimpleTestCase):
    def test_csv_header_and_rows(self):
        requests = generate_requests(paper_scenario().workload)
        with tempfile.TemporaryDirectory() as tmp:
            path = export_requests_csv(requests, Path(tmp) / "nested" / "requests.csv")
            lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "slot,user,chain,bytes,timeout")
        self.assertEqual(len(lines), len(requests) + 1)
