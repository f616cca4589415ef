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

JSON run configuration.

Every block is validated when the file is loaded, before any work starts;
unknown keys are rejected.
"""

import json
import os

from polyattack import base
from polyattack import concepts
from polyattack import report

SEED_ENV = "POLYATTACK_SEED"

_TOP_KEYS = frozenset([
    "dataset", "concepts", "models", "scenarios", "explain", "output_dir",
    "timestamp"
])
_MNIST_KEYS = frozenset([
    "kind", "train_images", "train_labels", "test_images", "test_labels",
    "seed", "eval_size", "full_eval", "train_limit"
])
_MNIST_PATHS = ("train_images", "train_labels", "test_images", "test_labels")
_BLOBS_KEYS = frozenset(["kind", "n", "test_n", "seed", "eval_size",
                         "full_eval"])
_MODEL_KEYS = frozenset(["kind", "defaults", "per_concept"])
_HYPERPARAMETERS = {
    report.ModelRegistry.LINEAR: frozenset(["lambda_reg", "epochs", "seed"]),
    report.ModelRegistry.MLP: frozenset([
        "hidden_sizes", "lr", "epochs", "batch", "seed", "validation_fraction"
    ]),
}
_SCENARIO_KEYS = frozenset(["name", "attacked", "protected", "kind", "config",
                            "baseline"])
_EXPLAIN_KEYS = frozenset(["samples", "background", "dump_images", "seed"])

DEFAULT_EVAL_SIZE = 200


def _reject_unknown(block, allowed, where):
  if not isinstance(block, dict):
    raise base.ConfigError("{} must be a JSON object".format(where))
  unknown = set(block) - allowed
  if unknown:
    raise base.ConfigError("Unknown keys in {}: {}".format(
        where, ", ".join(sorted(unknown))))


def _require(block, keys, where):
  missing = [key for key in keys if key not in block]
  if missing:
    raise base.ConfigError("{} is missing {}".format(where,
                                                     ", ".join(missing)))


def seed_override(cli_seed=None, environ=None):
  """The --seed flag beats the environment, which beats the config file."""
  if cli_seed is not None:
    return int(cli_seed)
  environ = os.environ if environ is None else environ
  value = environ.get(SEED_ENV)
  if value is None or not value.strip():
    return None
  try:
    return int(value)
  except ValueError:
    raise base.ConfigError("{} must be an integer, got {!r}".format(
        SEED_ENV, value))


class RunConfig(object):
  """A validated run configuration."""

  def __init__(self, data, base_dir=".", seed=None, source=None):
    _reject_unknown(data, _TOP_KEYS, "the config")
    _require(data, ("dataset", "concepts", "models"), "the config")
    self.source = source
    self.dataset = self._parse_dataset(data["dataset"], base_dir)
    if seed is not None:
      self.dataset["seed"] = seed
    self.seed = self.dataset["seed"]
    self.concepts = self._parse_concepts(data["concepts"])
    self.models = self._parse_models(data["models"])
    self.scenarios = self._parse_scenarios(data.get("scenarios", []))
    self.explain = self._parse_explain(data.get("explain", {}))
    self.output_dir = data.get("output_dir", "polyattack_out")
    self.timestamp = bool(data.get("timestamp", True))

  @classmethod
  def from_file(cls, path, seed=None):
    if not os.path.isfile(path):
      raise base.ConfigError("Config file {} does not exist".format(path))
    with open(path) as f:
      try:
        data = json.load(f)
      except ValueError as e:
        raise base.ConfigError("Config file {} is not valid JSON: {}".format(
            path, e))
    return cls(data, os.path.dirname(os.path.abspath(path)), seed, path)

  @property
  def is_mnist(self):
    return self.dataset["kind"] == "mnist"

  def input_files(self):
    """Files whose checksum is recorded in the run metadata."""
    files = [self.source] if self.source else []
    if self.is_mnist:
      files.extend(self.dataset[key] for key in _MNIST_PATHS)
    return files

  def _parse_dataset(self, block, base_dir):
    if not isinstance(block, dict):
      raise base.ConfigError("dataset must be a JSON object")
    kind = block.get("kind")
    if kind == "mnist":
      _reject_unknown(block, _MNIST_KEYS, "dataset")
      _require(block, _MNIST_PATHS, "dataset")
      dataset = dict(block)
      for key in _MNIST_PATHS:
        dataset[key] = os.path.join(base_dir, block[key])
    elif kind == "blobs":
      _reject_unknown(block, _BLOBS_KEYS, "dataset")
      dataset = dict(block)
      dataset.setdefault("n", 1000)
      dataset.setdefault("test_n", dataset["n"] // 2)
      if dataset["n"] < 4 or dataset["test_n"] < 4:
        raise base.ConfigError("blobs datasets need at least 4 points")
    else:
      raise base.ConfigError(
          "dataset kind must be mnist or blobs, got {}".format(kind))
    dataset.setdefault("seed", 0)
    dataset.setdefault("eval_size", DEFAULT_EVAL_SIZE)
    dataset.setdefault("full_eval", False)
    if dataset["eval_size"] < 1:
      raise base.ConfigError("eval_size must be positive")
    return dataset

  def _parse_concepts(self, names):
    if not isinstance(names, list) or not names:
      raise base.ConfigError("concepts must be a non-empty list")
    if self.is_mnist:
      return [rule.name for rule in concepts.rules_by_name(names)]
    unknown = [n for n in names if n not in concepts.BLOB_CONCEPTS]
    if unknown:
      raise base.ConfigError("Unknown blob concepts {}. Options are {}".format(
          ", ".join(unknown), ", ".join(concepts.BLOB_CONCEPTS)))
    return list(names)

  def _canonical(self, name):
    if self.is_mnist:
      return concepts.rule_by_name(name).name
    if name not in concepts.BLOB_CONCEPTS:
      raise base.ConfigError("Unknown blob concept {}".format(name))
    return name

  def _parse_models(self, block):
    _reject_unknown(block, _MODEL_KEYS, "models")
    kind = block.get("kind")
    if kind not in _HYPERPARAMETERS:
      raise base.ConfigError("models kind must be linear or mlp, got {}"
                             .format(kind))
    allowed = _HYPERPARAMETERS[kind]
    defaults = dict(block.get("defaults", {}))
    _reject_unknown(defaults, allowed, "models.defaults")
    per_concept = {}
    for name, hp in block.get("per_concept", {}).items():
      name = self._canonical(name)
      if name not in self.concepts:
        raise base.ConfigError(
            "models.per_concept names concept {} that is not used".format(name))
      _reject_unknown(hp, allowed, "models.per_concept.{}".format(name))
      per_concept[name] = hp
    return {"kind": kind, "defaults": defaults, "per_concept": per_concept}

  def hyperparameters(self, concept):
    """Training arguments of one concept; the run seed fills a missing seed."""
    hp = dict(self.models["defaults"])
    hp.update(self.models["per_concept"].get(concept, {}))
    hp.setdefault("seed", self.seed)
    if "hidden_sizes" in hp:
      hp["hidden_sizes"] = tuple(hp["hidden_sizes"])
    return hp

  def _parse_scenarios(self, blocks):
    if not isinstance(blocks, list):
      raise base.ConfigError("scenarios must be a list")
    scenarios = []
    names = set()
    for i, block in enumerate(blocks):
      where = "scenarios[{}]".format(i)
      _reject_unknown(block, _SCENARIO_KEYS, where)
      _require(block, ("name", "attacked", "kind"), where)
      if block["name"] in names:
        raise base.ConfigError("Duplicate scenario name {}".format(
            block["name"]))
      names.add(block["name"])
      protected = block.get("protected", [])
      if protected != report.PROTECT_REST:
        protected = [self._canonical(n) for n in protected]
      attacked = [self._canonical(n) for n in block["attacked"]]
      for name in attacked + (protected if isinstance(protected, list) else []):
        if name not in self.concepts:
          raise base.ConfigError("{} names concept {} that is not used".format(
              where, name))
      scenario = report.Scenario(block["name"], attacked, protected,
                                 block["kind"], block.get("config"),
                                 block.get("baseline", False))
      if (scenario.kind.is_linear and
          self.models["kind"] != report.ModelRegistry.LINEAR):
        raise base.ConfigError(
            "Scenario {} is a linear attack but the models are {}".format(
                scenario.name, self.models["kind"]))
      scenarios.append(scenario)
    return scenarios

  def _parse_explain(self, block):
    _reject_unknown(block, _EXPLAIN_KEYS, "explain")
    explain = {"samples": 200, "background": 16, "dump_images": 0,
               "seed": self.seed}
    explain.update(block)
    if explain["samples"] < 1 or explain["background"] < 1:
      raise base.ConfigError("explain samples and background must be positive")
    return explain

  def scenario(self, name):
    for scenario in self.scenarios:
      if scenario.name == name:
        return scenario
    raise base.ConfigError("No scenario named {}".format(name))
