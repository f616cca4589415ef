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

Multi-concept datasets: one input, one {-1,+1} label per concept.
"""

import csv
import gzip
import numbers
import struct

from absl import logging
from polyattack import base
from polyattack import concepts
import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# Synthetic points closer than this to a concept boundary are resampled.
BLOB_BOUNDARY_MARGIN = 0.02
BLOB_CENTERS = ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75))
BLOB_STDDEV = 0.12


class ConceptDataset(object):
  """Instances with one {-1,+1} label per concept.

  Read-only after construction, instances of one dataset can be shared
  between workers.
  """

  def __init__(self, instances, concept_names, labels, feature_shape=None,
               digits=None):
    instances = np.asarray(instances, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if instances.ndim != 2:
      raise base.DimensionMismatch("Instances must form a 2-D table")
    if labels.shape != (instances.shape[0], len(concept_names)):
      raise base.DimensionMismatch(
          "Labels table is {} but {} instances and {} concepts were given"
          .format(labels.shape, instances.shape[0], len(concept_names)))
    if not np.all(np.isfinite(instances)):
      raise base.NonFiniteValue("Instances hold a NaN or an infinity")
    if instances.size and (instances.min() < 0.0 or instances.max() > 1.0):
      raise base.DataError("Every feature must lie in [0,1]")
    if labels.size and not np.all(np.isin(labels, (-1, 1))):
      raise base.DataError("Every label must be -1 or +1")
    if feature_shape is not None:
      feature_shape = tuple(int(s) for s in feature_shape)
      if feature_shape[0] * feature_shape[1] != instances.shape[1]:
        raise base.DimensionMismatch(
            "Feature shape {} does not hold {} features".format(
                feature_shape, instances.shape[1]))
    self.instances = instances
    self.concept_names = tuple(concept_names)
    self.labels = labels
    self.feature_shape = feature_shape
    self.digits = None if digits is None else np.asarray(digits)

  def __len__(self):
    return self.instances.shape[0]

  @property
  def dimension(self):
    return self.instances.shape[1]

  @property
  def is_image(self):
    return self.feature_shape is not None

  def concept_index(self, name):
    try:
      return self.concept_names.index(name)
    except ValueError:
      raise base.ConfigError("Unknown concept {}. Known concepts are {}".format(
          name, ", ".join(self.concept_names)))

  def concept_labels(self, concept):
    if not isinstance(concept, numbers.Integral):
      concept = self.concept_index(concept)
    return self.labels[:, concept]

  def subset(self, indices):
    indices = np.asarray(indices, dtype=np.int64)
    digits = None if self.digits is None else self.digits[indices]
    return ConceptDataset(self.instances[indices], self.concept_names,
                          self.labels[indices], self.feature_shape, digits)

  def positive_rate(self, concept):
    return float(np.mean(self.concept_labels(concept) == 1))

  def to_csv(self, path):
    """Write a header f0..fd plus one column per concept, then one row each."""
    with open(path, "w", newline="") as f:
      writer = csv.writer(f)
      writer.writerow(["f%d" % i for i in range(self.dimension)] +
                      list(self.concept_names))
      for features, labels in zip(self.instances, self.labels):
        writer.writerow([repr(float(v)) for v in features] +
                        [int(v) for v in labels])


class RawDigits(object):
  """Digit images as read from IDX files: 0-255 pixels and 0-9 labels."""

  def __init__(self, pixels, digits, shape):
    self.pixels = pixels
    self.digits = digits
    self.shape = shape

  def __len__(self):
    return self.pixels.shape[0]


def _read_bytes(path):
  opener = gzip.open if str(path).endswith(".gz") else open
  try:
    with opener(path, "rb") as f:
      return f.read()
  except (IOError, OSError) as e:
    raise base.DataError("Cannot read {}: {}".format(path, e))


def _header(data, path, fields):
  size = 4 * fields
  if len(data) < size:
    raise base.TruncatedFile("{} is too short for an IDX header".format(path))
  return struct.unpack(">" + "I" * fields, data[:size])


def load_idx(images_path, labels_path):
  """Read a pair of IDX image and label files.

  Args:
    images_path: IDX3 image file, optionally gzipped.
    labels_path: IDX1 label file, optionally gzipped.

  Returns:
    RawDigits with pixels reshaped to rows*cols vectors.

  Raises:
    BadMagic: a file starts with the wrong magic number.
    TruncatedFile: a file holds fewer items than its header claims.
    CountMismatch: the files disagree on the number of items.
  """
  image_data = _read_bytes(images_path)
  magic = _header(image_data, images_path, 1)[0]
  if magic != IDX_IMAGE_MAGIC:
    raise base.BadMagic("Magic number mismatch in image file {} (0x{:08x})"
                        .format(images_path, magic))
  _, count, rows, cols = _header(image_data, images_path, 4)
  expected = count * rows * cols
  pixels = np.frombuffer(image_data, dtype=np.uint8, offset=16)
  if pixels.size < expected:
    raise base.TruncatedFile(
        "{} announces {} images but holds only {} pixels".format(
            images_path, count, pixels.size))
  pixels = pixels[:expected].reshape(count, rows * cols)

  label_data = _read_bytes(labels_path)
  magic = _header(label_data, labels_path, 1)[0]
  if magic != IDX_LABEL_MAGIC:
    raise base.BadMagic("Magic number mismatch in label file {} (0x{:08x})"
                        .format(labels_path, magic))
  _, label_count = _header(label_data, labels_path, 2)
  digits = np.frombuffer(label_data, dtype=np.uint8, offset=8)
  if digits.size < label_count:
    raise base.TruncatedFile(
        "{} announces {} labels but holds only {}".format(
            labels_path, label_count, digits.size))
  digits = digits[:label_count]
  if label_count != count:
    raise base.CountMismatch("{} images but {} labels".format(
        count, label_count))
  logging.info("Loaded %d images of %dx%d from %s", count, rows, cols,
               images_path)
  return RawDigits(pixels, digits, (rows, cols))


def apply_concepts(raw, rules):
  """Scale pixels into [0,1] and label every digit with every rule."""
  if not rules:
    raise base.UsageError("At least one concept rule is required")
  table = np.array([[rule.label(d) for rule in rules] for d in range(10)],
                   dtype=np.int64)
  labels = table[np.asarray(raw.digits, dtype=np.int64)]
  instances = np.asarray(raw.pixels, dtype=np.float64) / 255.0
  return ConceptDataset(instances, [rule.name for rule in rules], labels,
                        feature_shape=raw.shape, digits=raw.digits)


def load_mnist(images_path, labels_path, rule_names, limit=None):
  raw = load_idx(images_path, labels_path)
  if limit is not None and limit < len(raw):
    raw = RawDigits(raw.pixels[:limit], raw.digits[:limit], raw.shape)
  return apply_concepts(raw, concepts.rules_by_name(rule_names))


def blob_labels(points):
  """Concept A is sign(x1 - 0.5), concept B is sign(x2 - 0.5)."""
  points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  return np.where(points > 0.5, 1, -1).astype(np.int64)


def synth_blobs(n, seed):
  """Four Gaussian blobs in [0,1]^2 labelled by two axis aligned concepts."""
  if n < 4:
    raise base.UsageError("synth_blobs needs n >= 4, got {}".format(n))
  rng = np.random.default_rng(seed)
  centers = np.array(BLOB_CENTERS)
  accepted = []
  total = 0
  while total < n:
    picks = rng.integers(0, len(centers), size=n)
    points = centers[picks] + rng.normal(0.0, BLOB_STDDEV, size=(n, 2))
    inside = np.all((points >= 0.0) & (points <= 1.0), axis=1)
    clear = np.all(np.abs(points - 0.5) >= BLOB_BOUNDARY_MARGIN, axis=1)
    points = points[inside & clear]
    accepted.append(points)
    total += points.shape[0]
  points = np.vstack(accepted)[:n]
  return ConceptDataset(points, concepts.BLOB_CONCEPTS, blob_labels(points))


def sample_eval_subset(ds, n, seed):
  """Uniform sample of n instances without replacement."""
  if n > len(ds):
    raise base.DataError("Cannot sample {} of {} instances".format(n, len(ds)))
  rng = np.random.default_rng(seed)
  return ds.subset(rng.choice(len(ds), size=n, replace=False))
