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
"""

from polyattack import base
import numpy as np

UNDEFINED = "NA"


def _check(preds, labels):
  preds = np.asarray(preds).reshape(-1)
  labels = np.asarray(labels).reshape(-1)
  if preds.size != labels.size:
    raise base.LengthMismatch("{} predictions for {} labels".format(
        preds.size, labels.size))
  return preds, labels


def accuracy(preds, labels):
  preds, labels = _check(preds, labels)
  if not labels.size:
    return None
  return float(np.mean(preds == labels))


def recall(preds, labels):
  """Recall of the +1 class; None when there are no positive labels."""
  preds, labels = _check(preds, labels)
  positives = labels == 1
  if not np.any(positives):
    return None
  return float(np.mean(preds[positives] == 1))


def format_metric(value):
  return UNDEFINED if value is None else repr(float(value))


def mean_defined(values):
  """Mean of the values that are not None, or None if there are none."""
  defined = [v for v in values if v is not None]
  if not defined:
    return None
  return float(np.mean(defined))


class ConceptStats(object):
  """Accuracy and recall of one concept under each report column."""

  def __init__(self, name, count, role):
    self.name = name
    self.count = count
    self.role = role
    self.columns = {}

  def add_column(self, column, preds, labels):
    self.columns[column] = (accuracy(preds, labels), recall(preds, labels))

  def accuracy(self, column):
    return self.columns[column][0]

  def recall(self, column):
    return self.columns[column][1]

  def __str__(self):
    """Returns a table of accuracy and recall per column."""
    output = []
    row_format = "{:<22s}{:^14s}{:>14s}"
    output.append("\n" + " " * 8 + "-" * 50)
    output.append(" " * 8 + row_format.format(
        "{0} [{1}] (Total: {2})".format(self.name, self.role, self.count),
        "| accuracy", "| recall"))
    output.append(" " * 8 + "-" * 50)
    for column, (acc, rec) in self.columns.items():
      output.append(" " * 8 + row_format.format(
          column,
          UNDEFINED if acc is None else "{:.4f}".format(acc),
          UNDEFINED if rec is None else "{:.4f}".format(rec)))
    return "\n".join(output)
