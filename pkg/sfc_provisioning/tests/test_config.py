import json
import os
import tempfile
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase

from sfc_provisioning.config import ConfigError, load_run_config, read_overrides


class LoadRunConfigTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.tmp = Path(self._tmp.name)

    def _overrides(self, document):
        path = self.tmp / "overrides.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    def test_settings_defaults(self):
        config = load_run_config()
        self.assertEqual(config.learner.episodes, 2000)
        self.assertEqual(config.ga.population_size, 50)
        self.assertEqual(config.mfg.tie_break, "lowest")
        self.assertIsNone(config.mfg.congestion_weight)

    def test_overrides_file_merges_nested_values(self):
        path = self._overrides({"learner": {"episodes": 30}, "ga": {"generations": 5}})
        config = load_run_config(path)
        self.assertEqual(config.learner.episodes, 30)
        self.assertEqual(config.learner.actor_lr, 0.05)
        self.assertEqual(config.ga.generations, 5)
        self.assertEqual(config.ga.population_size, 50)

    def test_cli_wins_and_none_is_ignored(self):
        path = self._overrides({"learner": {"episodes": 30}})
        config = load_run_config(
            path,
            cli={"output_dir": str(self.tmp / "out"), "workers": None,
                 "learner": {"episodes": 7}},
        )
        self.assertEqual(config.learner.episodes, 7)
        self.assertEqual(config.output_dir, self.tmp / "out")
        self.assertEqual(config.workers, 1)

        config = load_run_config(path, cli={"learner": {"episodes": None}})
        self.assertEqual(config.learner.episodes, 30)

    def test_seeded_copies(self):
        config = load_run_config()
        self.assertEqual(config.learner_config(3).seed, 3)
        self.assertEqual(config.ga_config(4).seed, 4)
        self.assertEqual(config.learner.seed, 0)

    def test_environment_workers(self):
        with mock.patch.dict(os.environ, {"SFC_WORKERS": "3"}):
            self.assertEqual(load_run_config().workers, 3)

    def test_unknown_key_rejected(self):
        with self.assertRaises(ConfigError):
            read_overrides(self._overrides({"learner": {"epochs": 3}}))

    def test_invalid_values_rejected(self):
        with self.assertRaises(ConfigError):
            load_run_config(self._overrides({"mfg": {"tie_break": "random"}}))
        with self.assertRaises(ConfigError):
            load_run_config(self._overrides({"ga": {"mutation_rate": 2.0}}))
        with self.assertRaises(ConfigError):
            load_run_config(self._overrides({"workers": 0}))

    def test_reward_scale_override(self):
        self.assertIsNone(load_run_config().learner.reward_scale)
        config = load_run_config(self._overrides({"learner": {"reward_scale": 50.0}}))
        self.assertEqual(config.learner.reward_scale, 50.0)
        self.assertEqual(config.learner_config(2).reward_scale, 50.0)
        with self.assertRaises(ConfigError):
            load_run_config(self._overrides({"learner": {"reward_scale": 0.0}}))

    def test_reference_packet_size_override(self):
        self.assertIsNone(load_run_config().reference_packet_size)
        config = load_run_config(self._overrides({"reference_packet_size": 500_000}))
        self.assertEqual(config.reference_packet_size, 500_000.0)
        with self.assertRaises(ConfigError):
            load_run_config(self._overrides({"reference_packet_size": -1.0}))

    def test_unreadable_file(self):
        with self.assertRaises(ConfigError):
            load_run_config(self.tmp / "missing.json")
