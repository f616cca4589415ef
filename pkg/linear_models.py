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

Binary linear SVMs, one per concept, trained with Pegasos.
"""

import json
import math
import numbers

from absl import logging
from polyattack import base
from polyattack import linalg
import numpy as np


class LinearClassifier(object):
  """f(x) = w.x + b with sign predictions; an exact zero predicts -1."""

  def __init__(self, w, b, concept_name):
    self.w = linalg.as_vector(w)
    self.b = float(b)
    if not math.isfinite(self.b):
      raise base.NonFiniteValue("Bias is not finite")
    self.concept_name = concept_name
    self.train_accuracy = None
    self.objective_history = []

  @property
  def dimension(self):
    return self.w.size

  def decision(self, x):
    x = np.asarray(x, dtype=np.float64)
    linalg.check_dims(self.w, x)
    return x.dot(self.w) + self.b

  def predict(self, x):
    """+1 if w.x + b > 0 else -1, for one instance or a batch."""
    decision = self.decision(x)
    if np.ndim(decision) == 0:
      return 1 if decision > 0 else -1
    return np.where(decision > 0, 1, -1)

  def to_json(self):
    return json.dumps({"concept": self.concept_name, "b": self.b,
                       "w": [float(v) for v in self.w]})

  @classmethod
  def from_json(cls, text):
    data = json.loads(text)
    try:
      return cls(data["w"], data["b"], data["concept"])
    except KeyError as e:
      raise base.DataError("Linear model JSON is missing {}".format(e))

  def save(self, path):
    with open(path, "w") as f:
      f.write(self.to_json())

  @classmethod
  def load(cls, path):
    with open(path) as f:
      return cls.from_json(f.read())


def _objective(w_aug, x_aug, y, lambda_reg):
  hinge = np.maximum(0.0, 1.0 - y * x_aug.dot(w_aug))
  return 0.5 * lambda_reg * float(w_aug.dot(w_aug)) + float(hinge.mean())


def train_svm(ds, concept, lambda_reg=1e-4, epochs=20, seed=0):
  """Train a hinge loss linear SVM for one concept with Pegasos.

  The bias is learned as the weight of a constant extra feature. Every epoch
  visits the instances in a fresh seeded order and averages its iterates. The
  returned model is the epoch average with the lowest objective, and
  objective_history holds the objective of the model kept after each epoch,
  so it never increases.

  Args:
    ds: a ConceptDataset.
    concept: concept index or name.
    lambda_reg: regularization strength.
    epochs: passes over the data.
    seed: seed of the visiting order.

  Returns:
    A LinearClassifier with train_accuracy and objective_history set.

  Raises:
    DegenerateLabels: only one class is present for the concept.
  """
  if not isinstance(concept, numbers.Integral):
    concept = ds.concept_index(concept)
  name = ds.concept_names[concept]
  y = ds.labels[:, concept].astype(np.float64)
  if np.unique(y).size < 2:
    raise base.DegenerateLabels(
        "Concept {} has a single class in the training data".format(name))
  n = len(ds)
  x_aug = np.hstack([ds.instances, np.ones((n, 1))])
  rng = np.random.default_rng(seed)
  radius = 1.0 / math.sqrt(lambda_reg)

  w = np.zeros(x_aug.shape[1])
  best, best_objective = w.copy(), _objective(w, x_aug, y, lambda_reg)
  history = []
  step = 0
  for epoch in range(epochs):
    average = np.zeros_like(w)
    for i in rng.permutation(n):
      step += 1
      eta = 1.0 / (lambda_reg * step)
      margin = y[i] * x_aug[i].dot(w)
      w *= 1.0 - eta * lambda_reg
      if margin < 1.0:
        w += eta * y[i] * x_aug[i]
      length = math.sqrt(w.dot(w))
      if length > radius:
        w *= radius / length
      average += w
    average /= n
    objective = _objective(average, x_aug, y, lambda_reg)
    logging.debug("SVM %s epoch %d objective %.6f", name, epoch, objective)
    if objective <= best_objective:
      best, best_objective = average, objective
    history.append(best_objective)

  clf = LinearClassifier(best[:-1], best[-1], name)
  clf.objective_history = history
  clf.train_accuracy = float(np.mean(clf.predict(ds.instances) == y))
  logging.info("Trained linear SVM for %s: training accuracy %.4f", name,
               clf.train_accuracy)
  return clf


def evaluate(clf, ds):
  """Accuracy of clf on the concept it was trained for."""
  labels = ds.concept_labels(clf.concept_name)
  return float(np.mean(clf.predict(ds.instances) == labels))
