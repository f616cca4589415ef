"""Copyright 2026 The polyattack Authors.

All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

Feed-forward binary classifiers with exact backpropagation.

Labels cross this module's boundary as {0,1}: a {-1,+1} concept label maps
-1 -> 0 and +1 -> 1. The network emits a single logit turned into a
probability by a sigmoid, and predicts the positive class above 0.5.
"""

import enum
import json
import numbers

from absl import logging
from polyattack import base
from polyattack import linalg
import numpy as np
from scipy import special

PROBABILITY_CLAMP = 1e-12


class Activation(enum.Enum):
  RELU = 1
  IDENTITY = 2


class LossKind(enum.Enum):
  BINARY_CROSS_ENTROPY = 1


def to_binary(labels):
  """Map {-1,+1} labels onto {0,1}."""
  return (np.asarray(labels) > 0).astype(np.float64)


def bce(probability, target):
  """Binary cross entropy with probabilities clamped away from 0 and 1."""
  p = np.clip(probability, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
  return -(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))


class Layer(object):
  """Affine map weights @ a + bias followed by an activation."""

  def __init__(self, weights, bias, activation=Activation.RELU):
    self.weights = linalg.as_matrix(weights)
    self.bias = linalg.as_vector(bias)
    if self.bias.size != self.weights.shape[0]:
      raise base.DimensionMismatch("Layer bias has {} entries for {} outputs"
                                   .format(self.bias.size,
                                           self.weights.shape[0]))
    self.activation = Activation(activation)

  @property
  def fan_in(self):
    return self.weights.shape[1]

  @property
  def fan_out(self):
    return self.weights.shape[0]

  def apply(self, pre):
    if self.activation == Activation.RELU:
      return np.maximum(pre, 0.0)
    return pre

  def derivative(self, pre):
    if self.activation == Activation.RELU:
      return (pre > 0).astype(np.float64)
    return np.ones_like(pre)


class MlpClassifier(object):
  """Chain of layers ending in a single logit."""

  def __init__(self, layers, concept_name):
    if not layers:
      raise base.DimensionMismatch("A network needs at least one layer")
    for previous, layer in zip(layers, layers[1:]):
      if previous.fan_out != layer.fan_in:
        raise base.DimensionMismatch(
            "Layer dimensions do not chain: {} -> {}".format(
                previous.fan_out, layer.fan_in))
    if layers[-1].fan_out != 1:
      raise base.DimensionMismatch("The last layer must have one output")
    self.layers = list(layers)
    self.concept_name = concept_name
    self.train_accuracy = None
    self.validation_accuracy = None

  @property
  def dimension(self):
    return self.layers[0].fan_in

  def _forward(self, x):
    """Logits of a batch and the (input, pre-activation) cache per layer."""
    if x.shape[-1] != self.dimension:
      raise base.DimensionMismatch("Input has {} features, network {}".format(
          x.shape[-1], self.dimension))
    cache = []
    a = x
    for layer in self.layers:
      pre = a.dot(layer.weights.T) + layer.bias
      cache.append((a, pre))
      a = layer.apply(pre)
    return a[:, 0], cache

  def _backward(self, upstream, cache, want_params=False):
    """Push d loss / d logit back to the input (and the parameters)."""
    delta = upstream[:, None]
    grads = []
    for layer, (a, pre) in zip(reversed(self.layers), reversed(cache)):
      delta = delta * layer.derivative(pre)
      if want_params:
        grads.append((delta.T.dot(a), delta.sum(axis=0)))
      delta = delta.dot(layer.weights)
    grads.reverse()
    return delta, grads

  def logit(self, x):
    x = np.asarray(x, dtype=np.float64)
    logits, _ = self._forward(np.atleast_2d(x))
    return float(logits[0]) if x.ndim == 1 else logits

  def forward(self, x):
    """Probability of the positive class, in (0,1)."""
    return special.expit(self.logit(x))

  def predict(self, x):
    """+1 above probability 0.5, else -1 (for one instance or a batch)."""
    probability = self.forward(x)
    if np.ndim(probability) == 0:
      return 1 if probability > 0.5 else -1
    return np.where(probability > 0.5, 1, -1)

  def logit_gradient(self, x):
    """Gradient of the logit with respect to the input, batched."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    logits, cache = self._forward(x)
    grad, _ = self._backward(np.ones_like(logits), cache)
    return grad

  def input_gradient(self, x, target, loss=LossKind.BINARY_CROSS_ENTROPY):
    """Exact gradient of BCE(forward(x), target) with respect to x."""
    if loss != LossKind.BINARY_CROSS_ENTROPY:
      raise base.UsageError("Unsupported loss {}".format(loss))
    x = np.asarray(x, dtype=np.float64)
    logits, cache = self._forward(np.atleast_2d(x))
    target = np.broadcast_to(np.asarray(target, dtype=np.float64),
                             logits.shape)
    grad, _ = self._backward(special.expit(logits) - target, cache)
    return grad[0] if x.ndim == 1 else grad

  def loss(self, x, target):
    return bce(self.forward(x), target)

  def to_json(self):
    return json.dumps({
        "concept": self.concept_name,
        "layers": [{
            "shape": list(layer.weights.shape),
            "weights": [float(v) for v in layer.weights.reshape(-1)],
            "bias": [float(v) for v in layer.bias],
            "activation": layer.activation.name,
        } for layer in self.layers]
    })

  @classmethod
  def from_json(cls, text):
    data = json.loads(text)
    try:
      layers = [
          Layer(np.array(spec["weights"]).reshape(spec["shape"]),
                spec["bias"], Activation[spec["activation"]])
          for spec in data["layers"]
      ]
      return cls(layers, data["concept"])
    except (KeyError, ValueError) as e:
      raise base.DataError("Malformed network JSON: {}".format(e))

  def save(self, path):
    with open(path, "w") as f:
      f.write(self.to_json())

  @classmethod
  def load(cls, path):
    with open(path) as f:
      return cls.from_json(f.read())


def from_linear(clf):
  """A single Identity layer network computing the logit w.x + b."""
  return MlpClassifier(
      [Layer(clf.w.reshape(1, -1), [clf.b], Activation.IDENTITY)],
      clf.concept_name)


def init_mlp(dimension, hidden_sizes, concept_name, rng):
  """He initialization scaled by each layer's fan-in, zero biases."""
  sizes = [dimension] + list(hidden_sizes) + [1]
  layers = []
  for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
    weights = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
    last = i == len(sizes) - 2
    layers.append(Layer(weights, np.zeros(fan_out),
                        Activation.IDENTITY if last else Activation.RELU))
  return MlpClassifier(layers, concept_name)


def train_mlp(ds, concept, hidden_sizes=(16,), lr=0.1, epochs=20, batch=32,
              seed=0, validation_fraction=0.2):
  """Mini-batch SGD on binary cross entropy for one concept.

  A seeded fraction of the data is held out for validation. Training is
  deterministic under seed.

  Raises:
    DegenerateLabels: only one class is present for the concept.
  """
  if not isinstance(concept, numbers.Integral):
    concept = ds.concept_index(concept)
  name = ds.concept_names[concept]
  labels = ds.labels[:, concept]
  if np.unique(labels).size < 2:
    raise base.DegenerateLabels(
        "Concept {} has a single class in the training data".format(name))
  rng = np.random.default_rng(seed)
  order = rng.permutation(len(ds))
  held_out = int(round(validation_fraction * len(ds)))
  val_idx, train_idx = order[:held_out], order[held_out:]
  x_train = ds.instances[train_idx]
  t_train = to_binary(labels[train_idx])

  net = init_mlp(ds.dimension, hidden_sizes, name, rng)
  for epoch in range(epochs):
    permutation = rng.permutation(train_idx.size)
    total = 0.0
    for start in range(0, permutation.size, batch):
      rows = permutation[start:start + batch]
      logits, cache = net._forward(x_train[rows])  # pylint: disable=protected-access
      probability = special.expit(logits)
      total += float(np.sum(bce(probability, t_train[rows])))
      upstream = (probability - t_train[rows]) / rows.size
      _, grads = net._backward(upstream, cache, want_params=True)  # pylint: disable=protected-access
      for layer, (d_weights, d_bias) in zip(net.layers, grads):
        layer.weights -= lr * d_weights
        layer.bias -= lr * d_bias
    logging.debug("MLP %s epoch %d mean loss %.6f", name, epoch,
                  total / max(1, train_idx.size))

  net.train_accuracy = float(np.mean(
      net.predict(x_train) == labels[train_idx])) if train_idx.size else None
  if val_idx.size:
    net.validation_accuracy = float(np.mean(
        net.predict(ds.instances[val_idx]) == labels[val_idx]))
  logging.info("Trained MLP for %s: train accuracy %s, validation accuracy %s",
               name, net.train_accuracy, net.validation_accuracy)
  return net


def evaluate(net, ds):
  labels = ds.concept_labels(net.concept_name)
  return float(np.mean(net.predict(ds.instances) == labels))
