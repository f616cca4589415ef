"""Unit test for config.py."""

import json
import os

from absl.testing import absltest
from polyattack import base
from polyattack import config
from polyattack import report

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(
    os.path.abspath(__file__))), "configs")


def _blobs_config(**overrides):
  data = {
      "dataset": {"kind": "blobs", "n": 40, "seed": 1},
      "concepts": ["A", "B"],
      "models": {"kind": "linear", "defaults": {"epochs": 2}},
      "scenarios": [{"name": "s", "attacked": ["A"], "protected": ["B"],
                     "kind": "linear_l1"}],
  }
  data.update(overrides)
  return data


class SeedOverrideTest(absltest.TestCase):

  def testFlagBeatsEnvironment(self):
    self.assertEqual(3, config.seed_override(3, {config.SEED_ENV: "7"}))
    self.assertEqual(7, config.seed_override(None, {config.SEED_ENV: "7"}))
    self.assertIsNone(config.seed_override(None, {}))

  def testEnvironmentMustBeAnInteger(self):
    with self.assertRaises(base.ConfigError):
      config.seed_override(None, {config.SEED_ENV: "seven"})

  def testOverrideBeatsConfigFile(self):
    self.assertEqual(1, config.RunConfig(_blobs_config()).seed)
    self.assertEqual(9, config.RunConfig(_blobs_config(), seed=9).seed)


class RunConfigTest(absltest.TestCase):

  def testDefaults(self):
    run_config = config.RunConfig(_blobs_config())
    self.assertEqual(20, run_config.dataset["test_n"])
    self.assertEqual(config.DEFAULT_EVAL_SIZE, run_config.dataset["eval_size"])
    self.assertEqual(200, run_config.explain["samples"])
    self.assertEqual(1, run_config.explain["seed"])
    self.assertTrue(run_config.timestamp)
    self.assertEqual(report.AttackKind.LINEAR_L1,
                     run_config.scenario("s").kind)

  def testHyperparametersTakeTheRunSeed(self):
    data = _blobs_config(models={
        "kind": "mlp",
        "defaults": {"hidden_sizes": [4], "epochs": 1},
        "per_concept": {"B": {"lr": 0.2}},
    }, scenarios=[])
    run_config = config.RunConfig(data)
    self.assertEqual({"hidden_sizes": (4,), "epochs": 1, "seed": 1},
                     run_config.hyperparameters("A"))
    self.assertEqual(0.2, run_config.hyperparameters("B")["lr"])

  def testUnknownKeysAreRejected(self):
    with self.assertRaises(base.ConfigError):
      config.RunConfig(_blobs_config(verbose=True))
    with self.assertRaises(base.ConfigError):
      config.RunConfig(_blobs_config(models={"kind": "linear",
                                             "defaults": {"lr": 0.1}}))

  def testOverlappingScenarioIsInvalid(self):
    data = _blobs_config(scenarios=[{"name": "s", "attacked": ["A"],
                                     "protected": ["A"], "kind": "linear_l1"}])
    with self.assertRaises(base.InvalidSpec):
      config.RunConfig(data)

  def testLinearAttackNeedsLinearModels(self):
    data = _blobs_config(models={"kind": "mlp"})
    with self.assertRaises(base.ConfigError):
      config.RunConfig(data)

  def testBaselinePgdWithBaselineIsInvalid(self):
    data = _blobs_config(models={"kind": "mlp"}, scenarios=[
        {"name": "s", "attacked": ["A"], "kind": "baseline_pgd",
         "baseline": True}])
    with self.assertRaises(base.InvalidSpec):
      config.RunConfig(data)

  def testDuplicateScenarioNames(self):
    scenario = {"name": "s", "attacked": ["A"], "kind": "multigrad"}
    with self.assertRaises(base.ConfigError):
      config.RunConfig(_blobs_config(scenarios=[scenario, scenario]))

  def testUnknownConcept(self):
    with self.assertRaises(base.ConfigError):
      config.RunConfig(_blobs_config(concepts=["A", "C"]))

  def testMnistPathsAndAliases(self):
    data = {
        "dataset": {"kind": "mnist", "train_images": "a.gz",
                    "train_labels": "b.gz", "test_images": "c.gz",
                    "test_labels": "d.gz"},
        "concepts": ["even", "GE5"],
        "models": {"kind": "linear"},
        "scenarios": [{"name": "s", "attacked": ["ge5"],
                       "protected": "rest", "kind": "linear_linf"}],
    }
    run_config = config.RunConfig(data, "/data/run")
    self.assertEqual(["EVEN", ">=5"], run_config.concepts)
    self.assertEqual(os.path.join("/data/run", "a.gz"),
                     run_config.dataset["train_images"])
    self.assertEqual((">=5",), run_config.scenario("s").attacked)
    self.assertLen(run_config.input_files(), 4)

  def testFromFile(self):
    path = os.path.join(self.create_tempdir().full_path, "run.json")
    with open(path, "w") as f:
      json.dump(_blobs_config(), f)
    run_config = config.RunConfig.from_file(path)
    self.assertEqual([path], run_config.input_files())

  def testBrokenFile(self):
    path = os.path.join(self.create_tempdir().full_path, "run.json")
    with open(path, "w") as f:
      f.write("{not json")
    with self.assertRaises(base.ConfigError):
      config.RunConfig.from_file(path)
    with self.assertRaises(base.ConfigError):
      config.RunConfig.from_file(path + ".missing")


class ShippedConfigTest(absltest.TestCase):

  def _configs(self):
    names = sorted(n for n in os.listdir(CONFIG_DIR) if n.endswith(".json"))
    self.assertNotEmpty(names)
    return [config.RunConfig.from_file(os.path.join(CONFIG_DIR, n))
            for n in names]

  def testMultigradScenariosBuildTheirAttack(self):
    for run_config in self._configs():
      for scenario in run_config.scenarios:
        if scenario.kind != report.AttackKind.MULTIGRAD:
          continue
        attacked, protected = scenario.resolve(run_config.concepts)
        cfg = report._multigrad_config(scenario, attacked, protected,
                                       run_config.concepts, run_config.seed)
        for k in protected:
          self.assertLess(cfg.weight(k), 1.0, scenario.name)

  def testEveryConfigAttacksAllConcepts(self):
    for run_config in self._configs():
      covered = [set(s.attacked) == set(run_config.concepts)
                 for s in run_config.scenarios]
      self.assertTrue(any(covered), run_config.source)


if __name__ == "__main__":
  absltest.main()
