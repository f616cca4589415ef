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

SHAP style feature attributions for linear models and networks.

Network attributions explain the pre-sigmoid logit.
"""

from polyattack import base
from polyattack import images
from polyattack import linalg
import numpy as np

GRADIENT_SHAP_BACKGROUND = 16


class Attribution(object):
  """Per-feature contributions phi with sum(phi) ~ model_output - base_value."""

  def __init__(self, phi, base_value, model_output):
    self.phi = np.asarray(phi, dtype=np.float64)
    self.base_value = float(base_value)
    self.model_output = float(model_output)

  @property
  def efficiency_gap(self):
    return float(np.sum(self.phi)) - (self.model_output - self.base_value)


def linear_shap(clf, x, background_mean):
  """Exact SHAP values of w.x + b against an independent background mean."""
  x = linalg.as_vector(x)
  mean = linalg.as_vector(background_mean)
  linalg.check_dims(clf.w, x)
  linalg.check_dims(clf.w, mean)
  return Attribution(clf.w * (x - mean), clf.decision(mean), clf.decision(x))


def gradient_shap(net, x, background, samples=200, seed=0):
  """Expected gradients of the logit along paths from background to x.

  Splits [0,1] into samples equal strata and draws one interpolation point u
  uniformly inside each. Every u is paired with every background point b and
  grad logit(b + u(x - b)) * (x - b) is averaged over all pairs. Since the
  logit is piecewise linear along each path, only strata holding a kink
  contribute error.

  Args:
    net: MlpClassifier.
    x: the instance to explain.
    background: non-empty table of baseline points.
    samples: number of interpolation points, at least 1.
    seed: seed of the interpolation points.

  Returns:
    Attribution whose base_value is the mean background logit.
  """
  x = linalg.as_vector(x)
  background = linalg.as_matrix(background, cols=x.size)
  if samples < 1:
    raise base.UsageError("gradient_shap needs at least one sample")
  rng = np.random.default_rng(seed)
  u = (np.arange(samples) + rng.uniform(size=samples)) / samples
  differences = x - background
  phi = np.zeros_like(x)
  for u_j in u:
    points = background + u_j * differences
    phi += np.mean(net.logit_gradient(points) * differences, axis=0)
  phi /= samples
  base_value = float(np.mean(net.logit(background)))
  return Attribution(phi, base_value, net.logit(x))


def background_sample(instances, seed, size=GRADIENT_SHAP_BACKGROUND):
  """Seeded rows drawn without replacement for gradient_shap."""
  instances = np.asarray(instances, dtype=np.float64)
  rng = np.random.default_rng(seed)
  size = min(size, instances.shape[0])
  return instances[rng.choice(instances.shape[0], size=size, replace=False)]


def attribution_shift(before, after):
  """Cosine distance between two attributions, in [0,2]."""
  a = np.asarray(before.phi, dtype=np.float64)
  b = np.asarray(after.phi, dtype=np.float64)
  if a.shape != b.shape:
    raise base.DimensionMismatch("Attributions have {} and {} features".format(
        a.size, b.size))
  norm_a = np.linalg.norm(a)
  norm_b = np.linalg.norm(b)
  if norm_a == 0 or norm_b == 0:
    raise base.ZeroVector("Cannot compare an all-zero attribution")
  cosine = float(a.dot(b)) / (norm_a * norm_b)
  return min(2.0, max(0.0, 1.0 - cosine))


def explain(model, x, background, samples=200, seed=0):
  """Attribution for either model kind.

  A linear model is explained against the background mean.
  """
  if hasattr(model, "w"):
    return linear_shap(model, x, np.mean(np.atleast_2d(background), axis=0))
  return gradient_shap(model, x, background, samples, seed)


def dump_attribution(path, attribution, shape):
  """PGM of phi rescaled onto [0,255] with a JSON sidecar of the rescale."""
  return images.write_rescaled_pgm(path, attribution.phi, shape)
