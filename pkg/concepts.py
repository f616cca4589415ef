# Copyright 2026 The polyattack Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Concept rules that turn one digit label into many binary labels."""

from polyattack import base


class ConceptRule(object):
  """Base class for concept rules.

  A rule maps a raw class label (a digit 0-9) onto +1 when the concept holds
  and -1 otherwise. Rules must be total over 0-9.
  """

  name = None
  aliases = ()

  def holds(self, digit):
    """Whether the concept holds for the digit."""
    raise NotImplementedError

  def label(self, digit):
    digit = int(digit)
    if digit < 0 or digit > 9:
      raise base.DataError("Digit {} is outside 0-9".format(digit))
    return 1 if self.holds(digit) else -1

  def __call__(self, digit):
    return self.label(digit)

  def __repr__(self):
    return "{}({!r})".format(self.__class__.__name__, self.name)


class Even(ConceptRule):
  """The digit is even."""

  name = "EVEN"

  def holds(self, digit):
    return digit % 2 == 0


class GreaterEqualFive(ConceptRule):
  """The digit is five or more."""

  name = ">=5"
  aliases = ("GE5", "≥5")

  def holds(self, digit):
    return digit >= 5


class Zero(ConceptRule):
  """The digit is zero."""

  name = "ZERO"

  def holds(self, digit):
    return digit == 0


# Concepts of the synthetic blobs are defined by the generator itself, over
# the point coordinates rather than over a digit.
BLOB_CONCEPTS = ("A", "B")

# To add new rules, create a new class, inherit ConceptRule,
# and add it to the rule list.
MNIST_RULES = (
    Even,
    GreaterEqualFive,
    Zero,
)

ALL_RULES = frozenset(MNIST_RULES)


def rule_by_name(name):
  """Instantiate the rule registered under name or one of its aliases."""
  key = str(name).strip().upper()
  for rule in sorted(ALL_RULES, key=lambda x: x.__name__):
    if key == rule.name or key in rule.aliases:
      return rule()
  raise base.ConfigError("The concept rule {} does not exist. Options are {}"
                         .format(name, ", ".join(
                             sorted(r.name for r in ALL_RULES))))


def rules_by_name(names):
  if not names:
    raise base.ConfigError("At least one concept rule is required")
  return [rule_by_name(name) for name in names]
