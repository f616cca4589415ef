"""Tests on the MNIST IDX files, skipped unless POLYATTACK_MNIST_DIR is set."""

import os

from absl.testing import absltest
import numpy as np
from polyattack import datasets
from polyattack import linear_models
from polyattack import report

MNIST_DIR = os.environ.get("POLYATTACK_MNIST_DIR")
CONCEPTS = ["EVEN", ">=5", "ZERO"]


def _path(name):
  return os.path.join(MNIST_DIR, name)


@absltest.skipUnless(MNIST_DIR, "POLYATTACK_MNIST_DIR is not set")
class MnistTest(absltest.TestCase):

  @classmethod
  def setUpClass(cls):
    super(MnistTest, cls).setUpClass()
    cls.train = datasets.load_mnist(_path("train-images-idx3-ubyte.gz"),
                                    _path("train-labels-idx1-ubyte.gz"),
                                    CONCEPTS, limit=10000)
    test = datasets.load_mnist(_path("t10k-images-idx3-ubyte.gz"),
                               _path("t10k-labels-idx1-ubyte.gz"), CONCEPTS)
    cls.eval = datasets.sample_eval_subset(test, 60, 0)
    cls.registry = report.ModelRegistry(
        [linear_models.train_svm(cls.train, name, epochs=5)
         for name in cls.train.concept_names])

  def testShapes(self):
    self.assertEqual((28, 28), self.train.feature_shape)
    self.assertEqual(784, self.train.dimension)
    self.assertEqual(("EVEN", ">=5", "ZERO"), self.eval.concept_names)

  def testLinearModelsLearnTheConcepts(self):
    for name in self.train.concept_names:
      self.assertGreater(
          linear_models.evaluate(self.registry.get(name), self.eval), 0.75)

  def testAttackOneProtectOne(self):
    scenario = report.Scenario("l1", [">=5"], ["EVEN"], "linear_l1",
                               baseline=True)
    result = report.run_scenario(scenario, self.registry, self.eval)
    attacked = result.stats_for(">=5")
    protected = result.stats_for("EVEN")
    self.assertLess(attacked.accuracy(report.CUSTOM),
                    attacked.accuracy(report.ORIGINAL))
    self.assertGreaterEqual(protected.accuracy(report.CUSTOM),
                            protected.accuracy(report.ORIGINAL))


  def _attacked_recall_collapses(self, result, names):
    success = np.array(result.statuses) == "SUCCESS"
    self.assertGreater(np.sum(success), len(success) // 2)
    for name in names:
      positive = self.eval.labels[:, self.eval.concept_index(name)] == 1
      predictions = self.registry.get(name).predict(result.perturbed)
      self.assertTrue(np.all(predictions[success & positive] == -1), name)

  def testAttackTwoProtectEven(self):
    scenario = report.Scenario("l1", [">=5", "ZERO"], ["EVEN"], "linear_l1")
    result = report.run_scenario(scenario, self.registry, self.eval)
    self.assertLess(result.stats_for(">=5").accuracy(report.CUSTOM), 0.2)
    self.assertLess(result.stats_for("ZERO").accuracy(report.CUSTOM), 0.9)
    even = result.stats_for("EVEN")
    self.assertGreaterEqual(even.accuracy(report.CUSTOM),
                            even.accuracy(report.ORIGINAL) - 0.01)
    self._attacked_recall_collapses(result, [">=5", "ZERO"])

  def testAttackZeroProtectRest(self):
    scenario = report.Scenario("l1", ["ZERO"], report.PROTECT_REST,
                               "linear_l1")
    result = report.run_scenario(scenario, self.registry, self.eval)
    for name in ("EVEN", ">=5"):
      stats = result.stats_for(name)
      self.assertGreaterEqual(stats.accuracy(report.CUSTOM),
                              stats.accuracy(report.ORIGINAL) - 0.02, name)
    self._attacked_recall_collapses(result, ["ZERO"])

  def testAttackAll(self):
    scenario = report.Scenario("l1", CONCEPTS, kind="linear_l1")
    result = report.run_scenario(scenario, self.registry, self.eval)
    self._attacked_recall_collapses(result, CONCEPTS)


if __name__ == "__main__":
  absltest.main()
