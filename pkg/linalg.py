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

Dense vector and matrix helpers.

Vectors are one dimensional float64 numpy arrays and matrices are two
dimensional row-major float64 arrays. Every public helper returns a fresh
array and never mutates its inputs.
"""

import enum

from polyattack import base
import numpy as np


class Norm(enum.Enum):
  """The perturbation norms understood by the attacks."""
  L1 = 1
  L2 = 2
  LINF = 3

  @classmethod
  def parse(cls, name):
    key = str(name).strip().upper().replace("∞", "INF")
    if key == "INFINITY":
      key = "LINF"
    try:
      return cls[key]
    except KeyError:
      raise base.UsageError(
          "Unknown norm {}. Options are l1, l2, linf".format(name))


def _check_finite(array, what):
  if not np.all(np.isfinite(array)):
    raise base.NonFiniteValue("{} holds a NaN or an infinity".format(what))


def as_vector(data):
  """Copy data into a non-empty, finite float64 vector."""
  vector = np.array(data, dtype=np.float64).reshape(-1)
  if vector.size == 0:
    raise base.DimensionMismatch("A vector needs at least one entry")
  _check_finite(vector, "Vector")
  return vector


def as_matrix(data, cols=None):
  """Copy data into a finite float64 matrix with row-major storage."""
  matrix = np.array(data, dtype=np.float64)
  if matrix.ndim == 1:
    matrix = matrix.reshape(1, -1) if cols is None else matrix.reshape(-1, cols)
  if matrix.ndim != 2:
    raise base.DimensionMismatch(
        "A matrix needs two dimensions, got {}".format(matrix.ndim))
  if cols is not None and matrix.shape[1] != cols:
    raise base.DimensionMismatch(
        "Expected {} columns, got {}".format(cols, matrix.shape[1]))
  _check_finite(matrix, "Matrix")
  return np.ascontiguousarray(matrix)


def check_dims(a, b):
  if a.shape[-1] != b.shape[-1]:
    raise base.DimensionMismatch(
        "Dimension mismatch: {} vs {}".format(a.shape[-1], b.shape[-1]))


def dot(a, b):
  """Inner product of two vectors of equal length."""
  a = np.asarray(a, dtype=np.float64)
  b = np.asarray(b, dtype=np.float64)
  if a.shape != b.shape or a.ndim != 1:
    raise base.DimensionMismatch(
        "Cannot take the dot product of shapes {} and {}".format(
            a.shape, b.shape))
  return float(np.dot(a, b))


def norm(v, p):
  """Exact L1, L2 (the root, not the square) or Linf norm of v."""
  v = np.asarray(v, dtype=np.float64).reshape(-1)
  if v.size == 0:
    raise base.DimensionMismatch("Cannot take the norm of an empty vector")
  if p == Norm.L1:
    return float(np.sum(np.abs(v)))
  if p == Norm.L2:
    return float(np.linalg.norm(v, 2))
  if p == Norm.LINF:
    return float(np.max(np.abs(v)))
  raise base.UsageError("Unknown norm {}".format(p))


def weighted_norm(v, costs, p):
  """Norm of the elementwise product c * v."""
  return norm(np.asarray(costs, dtype=np.float64) * np.asarray(v), p)
