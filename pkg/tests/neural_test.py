"""Unit test for neural.py."""

import os

from absl.testing import absltest
import numpy as np
from polyattack import base
from polyattack import datasets
from polyattack import linear_models
from polyattack import neural
from polyattack.neural import Activation
from polyattack.neural import Layer
from polyattack.neural import MlpClassifier
from scipy import special


def _identity_net(w, b):
  return MlpClassifier([Layer(np.reshape(w, (1, -1)), [b],
                              Activation.IDENTITY)], "c")


class MlpClassifierTest(absltest.TestCase):

  def testZeroWeightsGiveOneHalf(self):
    net = _identity_net([0.0, 0.0, 0.0], 0.0)
    self.assertEqual(0.5, net.forward([0.3, 0.1, 0.9]))

  def testIdentityLayerIsLogisticRegression(self):
    w = np.array([0.5, -1.5])
    net = _identity_net(w, 0.25)
    x = np.array([0.2, 0.7])
    probability = special.expit(w.dot(x) + 0.25)
    self.assertAlmostEqual(probability, net.forward(x), places=12)
    for target in (0.0, 1.0):
      np.testing.assert_allclose((probability - target) * w,
                                 net.input_gradient(x, target), atol=1e-12)

  def testTwoLayerForwardValue(self):
    net = MlpClassifier([
        Layer([[1.0, -1.0], [0.5, 2.0]], [0.0, -1.0], Activation.RELU),
        Layer([[1.0, -2.0]], [0.5], Activation.IDENTITY)], "c")
    x = np.array([0.8, 0.2])
    # Hidden pre-activations (0.6, -0.2) leave only the first unit active.
    self.assertAlmostEqual(1.1, net.logit(x), places=12)
    self.assertAlmostEqual(0.7502601, net.forward(x), places=7)

  def testLayersMustChain(self):
    with self.assertRaises(base.DimensionMismatch):
      MlpClassifier([Layer(np.ones((3, 2)), np.zeros(3)),
                     Layer(np.ones((1, 4)), np.zeros(1))], "c")
    with self.assertRaises(base.DimensionMismatch):
      MlpClassifier([Layer(np.ones((2, 2)), np.zeros(2))], "c")

  def testWrongInputWidth(self):
    with self.assertRaises(base.DimensionMismatch):
      _identity_net([1.0, 1.0], 0.0).forward([1.0, 2.0, 3.0])

  def testGradientMatchesFiniteDifferences(self):
    rng = np.random.default_rng(0)
    h = 1e-5
    for trial in range(20):
      net = neural.init_mlp(5, (7, 4), "c", rng)
      x = rng.uniform(size=5)
      target = float(trial % 2)
      grad = net.input_gradient(x, target)
      numeric = np.zeros_like(x)
      for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        numeric[i] = (net.loss(x + step, target) -
                      net.loss(x - step, target)) / (2 * h)
      scale = max(np.linalg.norm(numeric), 1e-8)
      self.assertLess(np.linalg.norm(grad - numeric) / scale, 1e-4)

  def testSaturatedCorrectPredictionHasNoGradient(self):
    net = _identity_net([100.0, 0.0], 0.0)
    grad = net.input_gradient([1.0, 0.0], 1.0)
    self.assertLess(np.linalg.norm(grad), 1e-6)

  def testBatchedGradientMatchesRows(self):
    rng = np.random.default_rng(1)
    net = neural.init_mlp(3, (5,), "c", rng)
    x = rng.uniform(size=(4, 3))
    targets = np.array([0.0, 1.0, 1.0, 0.0])
    batched = net.input_gradient(x, targets)
    for i in range(4):
      np.testing.assert_allclose(net.input_gradient(x[i], targets[i]),
                                 batched[i], atol=1e-14)

  def testPredictScalarAndBatch(self):
    net = _identity_net([1.0, 0.0], -0.5)
    self.assertEqual(1, net.predict([0.9, 0.0]))
    self.assertEqual(-1, net.predict([0.1, 0.0]))
    np.testing.assert_array_equal([1, -1],
                                  net.predict([[0.9, 0.0], [0.1, 0.0]]))

  def testJsonRestoresPredictions(self):
    rng = np.random.default_rng(2)
    net = neural.init_mlp(4, (6,), "EVEN", rng)
    path = os.path.join(self.create_tempdir().full_path, "net.json")
    net.save(path)
    loaded = MlpClassifier.load(path)
    x = rng.uniform(size=(10, 4))
    np.testing.assert_array_equal(net.logit(x), loaded.logit(x))
    self.assertEqual("EVEN", loaded.concept_name)

  def testMalformedJson(self):
    with self.assertRaises(base.DataError):
      MlpClassifier.from_json('{"concept": "c", "layers": [{"shape": [1]}]}')

  def testFromLinearAgreesWithLinearModel(self):
    clf = linear_models.LinearClassifier([0.3, -0.8, 0.1], 0.05, "A")
    net = neural.from_linear(clf)
    x = np.random.default_rng(3).uniform(size=(25, 3))
    np.testing.assert_array_equal(clf.predict(x), net.predict(x))
    np.testing.assert_allclose(x.dot(clf.w) + clf.b, net.logit(x), atol=1e-12)


class TrainMlpTest(absltest.TestCase):

  def testLearnsBlobConcept(self):
    ds = datasets.synth_blobs(1000, 0)
    net = neural.train_mlp(ds, "A", hidden_sizes=(16,), lr=0.5, epochs=60)
    self.assertGreaterEqual(net.validation_accuracy, 0.98)
    self.assertGreaterEqual(neural.evaluate(net, datasets.synth_blobs(500, 1)),
                            0.98)

  def testUntrainedNetsAreAtChance(self):
    ds = datasets.synth_blobs(400, 0)
    accuracies = [neural.evaluate(neural.train_mlp(ds, "A", epochs=0, seed=s),
                                  ds)
                  for s in range(20)]
    self.assertBetween(np.mean(accuracies), 0.3, 0.7)

  def testNumpyIntegerConcept(self):
    ds = datasets.synth_blobs(100, 0)
    net = neural.train_mlp(ds, np.int64(1), epochs=1)
    self.assertEqual("B", net.concept_name)

  def testDeterministicUnderSeed(self):
    ds = datasets.synth_blobs(200, 0)
    a = neural.train_mlp(ds, "B", epochs=2, seed=9)
    b = neural.train_mlp(ds, "B", epochs=2, seed=9)
    for la, lb in zip(a.layers, b.layers):
      np.testing.assert_array_equal(la.weights, lb.weights)
      np.testing.assert_array_equal(la.bias, lb.bias)

  def testSingleClassIsDegenerate(self):
    ds = datasets.ConceptDataset([[0.1, 0.2], [0.3, 0.4]], ["A"], [[-1], [-1]])
    with self.assertRaises(base.DegenerateLabels):
      neural.train_mlp(ds, "A")


if __name__ == "__main__":
  absltest.main()
