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

Projected gradient ascent on a combined multi-concept loss.

Attacked networks ascend binary cross entropy on their true label. Protected
networks ascend it on the flipped label, which pushes them further toward
their true label. Each step moves along the preset weighted sum of the
per-network input gradients and is then projected onto the epsilon ball
around the input, followed by a clamp onto the box.
"""

import csv
import os

from concurrent import futures

from polyattack import base
from polyattack import images
from polyattack import linalg
from polyattack.linalg import Norm
from polyattack import neural
import numpy as np

ZERO_GRADIENT = 1e-12

# (epsilon, step size) per norm, in [0,1] feature units.
NORM_DEFAULTS = {
    Norm.L2: (4.0, 0.8),
    Norm.LINF: (0.3, 0.06),
}


class MultiAttackConfig(object):
  """Attack sets and PGD parameters.

  lambda_weights is None (every weight 1), a mapping from network index to
  weight, or a sequence aligned with the network list.
  """

  def __init__(self, attacked, protected=(), norm=Norm.LINF, epsilon=None,
               step_size=None, iterations=200, lambda_weights=None,
               clip_box=(0.0, 1.0), random_start=False, seed=0):
    self.attacked = tuple(int(k) for k in attacked)
    self.protected = tuple(int(k) for k in protected)
    overlap = set(self.attacked) & set(self.protected)
    if overlap:
      raise base.InvalidSpec(
          "Networks {} are both attacked and protected".format(
              sorted(overlap)))
    self.norm = norm if isinstance(norm, Norm) else Norm.parse(norm)
    if self.norm not in NORM_DEFAULTS:
      raise base.InvalidSpec("PGD supports the L2 and LINF norms, not {}"
                             .format(self.norm.name))
    default_epsilon, default_step = NORM_DEFAULTS[self.norm]
    self.epsilon = float(default_epsilon if epsilon is None else epsilon)
    self.step_size = float(default_step if step_size is None else step_size)
    self.iterations = int(iterations)
    if self.epsilon < 0:
      raise base.InvalidSpec("epsilon must not be negative")
    if self.iterations < 0:
      raise base.InvalidSpec("iterations must not be negative")
    if self.step_size < 0:
      raise base.InvalidSpec("step_size must not be negative")
    self.lambda_weights = lambda_weights
    values = (lambda_weights.values() if isinstance(lambda_weights, dict)
              else lambda_weights or ())
    if any(float(v) <= 0 for v in values):
      raise base.InvalidSpec("Every lambda weight must be positive")
    lo, hi = clip_box
    if lo > hi:
      raise base.InvalidSpec("clip_box lower bound exceeds upper bound")
    self.clip_box = (float(lo), float(hi))
    self.random_start = bool(random_start)
    self.seed = seed

  def weight(self, index):
    if self.lambda_weights is None:
      return 1.0
    if isinstance(self.lambda_weights, dict):
      return float(self.lambda_weights.get(index, 1.0))
    return float(self.lambda_weights[index])

  def restricted(self, attacked, protected=()):
    """Same parameters for other attack sets."""
    return MultiAttackConfig(attacked, protected, self.norm, self.epsilon,
                             self.step_size, self.iterations,
                             self.lambda_weights, self.clip_box,
                             self.random_start, self.seed)

  def snapshot(self):
    return {
        "norm": self.norm.name,
        "epsilon": self.epsilon,
        "step_size": self.step_size,
        "iterations": self.iterations,
        "clip_box": list(self.clip_box),
        "random_start": self.random_start,
        "seed": self.seed,
    }


class CombinedLoss(object):

  def __init__(self, value, per_classifier):
    self.value = value
    self.per_classifier = per_classifier

  def __repr__(self):
    return "CombinedLoss(value={!r})".format(self.value)


def combined_loss_grad(nets, x, y, cfg):
  """Combined objective and its exact input gradient at x.

  Args:
    nets: MlpClassifier per concept.
    x: the current input.
    y: per-concept labels in {0,1}.
    cfg: MultiAttackConfig naming the attacked and protected indices.

  Returns:
    (CombinedLoss, gradient). The attacked and the protected groups are each
    averaged over their members; per_classifier lists the weighted losses,
    attacked members first.
  """
  x = np.asarray(x, dtype=np.float64)
  y = np.asarray(y, dtype=np.float64)
  for k in cfg.attacked + cfg.protected:
    if not 0 <= k < len(nets):
      raise base.InvalidSpec("Network index {} out of range".format(k))
    linalg.check_dims(nets[k].layers[0].weights, x)
  if y.size != len(nets):
    raise base.DimensionMismatch("{} labels for {} networks".format(
        y.size, len(nets)))
  grad = np.zeros_like(x)
  per_classifier = []
  value = 0.0
  for group, flip in ((cfg.attacked, False), (cfg.protected, True)):
    if not group:
      continue
    group_grad = np.zeros_like(x)
    group_value = 0.0
    for k in group:
      target = 1.0 - y[k] if flip else y[k]
      weight = cfg.weight(k)
      loss = weight * float(nets[k].loss(x, target))
      group_grad += weight * nets[k].input_gradient(x, target)
      group_value += loss
      per_classifier.append(loss)
    grad += group_grad / len(group)
    value += group_value / len(group)
  return CombinedLoss(value, per_classifier), grad


def _step(grad, norm):
  if norm == Norm.L2:
    return grad / np.sqrt(grad.dot(grad))
  return np.sign(grad)


def project(delta, x, cfg):
  """Project delta onto the epsilon ball, then clamp x + delta to the box."""
  if cfg.norm == Norm.L2:
    length = np.sqrt(delta.dot(delta))
    if length > cfg.epsilon:
      delta = delta * (cfg.epsilon / length)
  else:
    delta = np.clip(delta, -cfg.epsilon, cfg.epsilon)
  lo, hi = cfg.clip_box
  return np.clip(x + delta, lo, hi) - x


def _random_start(x, cfg):
  rng = np.random.default_rng(cfg.seed)
  if cfg.norm == Norm.L2:
    direction = rng.normal(size=x.size)
    direction /= max(np.sqrt(direction.dot(direction)), ZERO_GRADIENT)
    delta = direction * cfg.epsilon * rng.uniform() ** (1.0 / x.size)
  else:
    delta = rng.uniform(-cfg.epsilon, cfg.epsilon, size=x.size)
  return project(delta, x, cfg)


def attack(nets, x, y, cfg, issues=None, instance=None):
  """Run cfg.iterations projected ascent steps from x.

  Steps whose gradient norm is below ZERO_GRADIENT are skipped; the number of
  skipped steps is recorded as a ZeroGradient in issues.

  Returns:
    The perturbed input, inside the epsilon ball around x and the box.
  """
  x = linalg.as_vector(x)
  if cfg.epsilon == 0 or cfg.iterations == 0:
    return x.copy()
  delta = _random_start(x, cfg) if cfg.random_start else np.zeros_like(x)
  skipped = 0
  for _ in range(cfg.iterations):
    _, grad = combined_loss_grad(nets, x + delta, y, cfg)
    if np.sqrt(grad.dot(grad)) < ZERO_GRADIENT:
      skipped += 1
      continue
    delta = project(delta + cfg.step_size * _step(grad, cfg.norm), x, cfg)
  if skipped and issues is not None:
    issues.record("multigrad", base.ZeroGradient(
        "Skipped zero gradient steps",
        [base.InstanceLogEntry(instance, "{} of {} steps skipped".format(
            skipped, cfg.iterations))]))
  return x + delta


def baseline_pgd(net, x, y, cfg, issues=None, instance=None):
  """Single network PGD: attack with the network attacked and nothing protected."""
  return attack([net], x, [y], cfg.restricted((0,)), issues, instance)


def attack_batch(nets, instances, labels, cfg, jobs=1, issues=None):
  """Attack every row of instances with {0,1} label rows; order is kept."""
  instances = np.asarray(instances, dtype=np.float64)
  labels = neural.to_binary(labels) if np.min(labels) < 0 else labels

  def run(i):
    return attack(nets, instances[i], labels[i], cfg, issues, i)

  if jobs <= 1:
    rows = [run(i) for i in range(len(instances))]
  else:
    with futures.ThreadPoolExecutor(max_workers=jobs) as pool:
      rows = list(pool.map(run, range(len(instances))))
  return np.array(rows).reshape(instances.shape)


def write_perturbed_csv(path, originals, perturbed, norm=Norm.LINF):
  """instance_id, perturbation norm and the perturbed features per row."""
  originals = np.asarray(originals, dtype=np.float64)
  perturbed = np.asarray(perturbed, dtype=np.float64)
  with open(path, "w", newline="") as f:
    writer = csv.writer(f)
    writer.writerow(["instance_id", "perturbation_norm"] +
                    ["f%d" % i for i in range(perturbed.shape[1])])
    for i, (x, x_adv) in enumerate(zip(originals, perturbed)):
      writer.writerow([i, repr(linalg.norm(x_adv - x, norm))] +
                      [repr(float(v)) for v in x_adv])


def read_perturbed_csv(path):
  """The perturbed feature rows written by write_perturbed_csv."""
  with open(path, newline="") as f:
    reader = csv.reader(f)
    next(reader)
    rows = [[float(v) for v in row[2:]] for row in reader]
  return np.array(rows, dtype=np.float64)


def dump_images(directory, prefix, perturbed, shape, limit):
  """Write the first limit perturbed instances as PGM files."""
  paths = []
  for i, x_adv in enumerate(perturbed[:limit]):
    path = os.path.join(directory, "{}_{:04d}.pgm".format(prefix, i))
    images.write_pgm(path, x_adv, shape)
    paths.append(path)
  return paths
