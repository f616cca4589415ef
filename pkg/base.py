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

from __future__ import print_function

import threading


# pylint: disable=g-bad-exception-name
class PolyAttackException(Exception):
  """Base class for all the errors in this package."""
  error_message = None
  description = None
  exit_code = 1
  error_log = []

  def __init__(self, message, error_log=None):
    super(PolyAttackException, self).__init__()
    self.error_message = message
    if error_log:
      self.error_log = error_log

  def __str__(self):
    return str(self.error_message)


class UsageError(PolyAttackException):
  """The command line, the config or a scenario is not usable as given."""

  description = "Usage error"
  exit_code = 1


class ConfigError(UsageError):
  """The run config does not match the expected schema."""


class InvalidSpec(UsageError):
  """An attack spec or attack config breaks one of its invariants."""


class DataError(PolyAttackException):
  """Input data cannot be read or does not have the expected shape."""

  description = "Data error"
  exit_code = 2


class BadMagic(DataError):
  """An IDX file starts with the wrong magic number."""


class TruncatedFile(DataError):
  """An IDX file holds fewer bytes than its header announces."""


class CountMismatch(DataError):
  """Image and label files disagree on the number of items."""


class DegenerateLabels(DataError):
  """A training set holds a single class for the requested concept."""


class LengthMismatch(DataError):
  """Two sequences that should be aligned have different lengths."""


class DimensionMismatch(DataError):
  """Vector or matrix dimensions do not agree."""


class NonFiniteValue(DataError):
  """A vector or matrix holds a NaN or an infinity."""


class ZeroVector(DataError):
  """A direction was requested from an all-zero vector."""


class MissingModel(DataError):
  """No trained model is registered for a concept."""


class SolverError(PolyAttackException):
  """A numerical procedure could not finish."""

  description = "Solver error"
  exit_code = 3


class IterationLimit(SolverError):
  """The iteration budget was exhausted before convergence."""


class SolverFailure(SolverError):
  """A solver finished without a usable answer."""


class AttackWarning(PolyAttackException):
  """An attack that did not reach its goal on one instance.

  It does not stop a scenario, the instance is left unmodified.
  """

  description = "Warning"


class AttackInfo(PolyAttackException):
  """Information about how an attack run went."""

  description = "Info"


class ZeroGradient(AttackInfo):
  """A PGD step was skipped because the gradient vanished."""


class InstanceLogEntry(object):
  instance = None
  message = None

  def __init__(self, instance, message):
    self.instance = instance
    self.message = message


class IssueLog(object):
  """Collects the exceptions recorded while running scenarios.

  Exceptions are grouped by severity and by the source that raised them, the
  source being any hashable name such as a scenario or a procedure.
  """

  _SEVERITIES = (AttackInfo, AttackWarning, PolyAttackException)

  def __init__(self):
    self._lock = threading.Lock()
    self.issues = {}
    self.issue_counts = {}
    self.source_counts = {}
    self.total_count = 0
    for e_type in self._SEVERITIES:
      self.issues[e_type] = dict()
      self.issue_counts[e_type] = 0
      self.source_counts[e_type] = dict()

  def _severity(self, exception):
    for e_type in self._SEVERITIES:
      if issubclass(exception.__class__, e_type):
        return e_type
    return PolyAttackException

  def record(self, source, exception):
    """Gather issue counts by severity, source, and total."""
    with self._lock:
      self._record(source, exception)

  def _record(self, source, exception):
    e_type = self._severity(exception)
    if source not in self.issues[e_type]:
      self.issues[e_type][source] = []
      self.source_counts[e_type][source] = 0
    self.issues[e_type][source].append(exception)
    issue_count = 1
    if exception.error_log:
      issue_count = len(exception.error_log)
    self.issue_counts[e_type] += issue_count
    self.source_counts[e_type][source] += issue_count
    self.total_count += issue_count

  def count(self, e_type):
    """Number of recorded issues of exactly this class or its subclasses."""
    total = 0
    for sources in self.issues.values():
      for exceptions in sources.values():
        for exception in exceptions:
          if isinstance(exception, e_type):
            total += len(exception.error_log) if exception.error_log else 1
    return total

  def merge(self, other):
    for sources in other.issues.values():
      for source, exceptions in sources.items():
        for exception in exceptions:
          self.record(source, exception)

  def print_issues(self, verbose=False):
    """Print issues in decreasing order of severity."""
    if self.total_count == 0:
      print("Run completed with no warnings/errors.")
      return
    for e_type in reversed(self._SEVERITIES):
      suffix = ""
      if self.issue_counts[e_type] == 0:
        continue
      elif self.issue_counts[e_type] > 1:
        suffix = "s"
      e_type_name = e_type.description or "Error"
      print("{0:6d} {1} message{2} found".format(self.issue_counts[e_type],
                                                 e_type_name, suffix))
      # pylint: disable=cell-var-from-loop
      # Within the severity, sort from most common to least common.
      for source in sorted(
          self.issues[e_type].keys(),
          key=lambda src: (-self.source_counts[e_type][src], str(src))):
        source_count = self.source_counts[e_type][source]
        source_suffix = ""
        if source_count > 1:
          source_suffix = "s"
        print("{0:10d} {1} {2} message{3}".format(source_count, source,
                                                  e_type_name, source_suffix))
        if verbose:
          for exception in self.issues[e_type][source]:
            if not exception.error_log:
              print(" " * 14 + "{0}".format(exception))
              continue
            for entry in exception.error_log:
              if entry.instance is not None:
                print(" " * 14 +
                      "Instance {0}: {1}".format(entry.instance, entry.message))
              else:
                print(" " * 14 + "{0}".format(entry.message))
