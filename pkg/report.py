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

Attack-m-protect-n scenarios run end to end.

A scenario attacks one set of concepts while protecting another. Running it
produces per-concept accuracy and recall under up to three columns:
"original" (clean instances), "baseline" (the same attack with nothing
protected) and "custom" (the scenario's attack).
"""

from __future__ import print_function

import collections
import csv
import enum
import json
import os

from absl import logging
from polyattack import base
from polyattack import explain
from polyattack import linalg
from polyattack import linear_attack
from polyattack import linear_models
from polyattack import multigrad
from polyattack import neural
from polyattack import stats
from polyattack import version
import numpy as np

ORIGINAL = "original"
BASELINE = "baseline"
CUSTOM = "custom"
PROTECT_REST = "rest"

_LINEAR_KEYS = frozenset([
    "attack_margin", "protect_margin", "costs", "box", "positive_only",
    "mutable_features", "max_iters", "seed"
])
_MULTIGRAD_KEYS = frozenset([
    "norm", "epsilon", "step_size", "iterations", "lambda_weights",
    "clip_box", "random_start", "seed"
])


class AttackKind(enum.Enum):
  LINEAR_L1 = "linear_l1"
  LINEAR_LINF = "linear_linf"
  LINEAR_L2 = "linear_l2"
  MULTIGRAD = "multigrad"
  BASELINE_PGD = "baseline_pgd"

  @classmethod
  def parse(cls, name):
    try:
      return cls(str(name).lower())
    except ValueError:
      raise base.ConfigError("Unknown attack kind {}. Options are {}".format(
          name, ", ".join(kind.value for kind in cls)))

  @property
  def is_linear(self):
    return self in (AttackKind.LINEAR_L1, AttackKind.LINEAR_LINF,
                    AttackKind.LINEAR_L2)

  @property
  def norm(self):
    return {
        AttackKind.LINEAR_L1: linalg.Norm.L1,
        AttackKind.LINEAR_LINF: linalg.Norm.LINF,
        AttackKind.LINEAR_L2: linalg.Norm.L2,
    }.get(self)


class Scenario(object):
  """Named attack of some concepts with others protected.

  protected may be the string "rest": every concept not attacked.
  """

  def __init__(self, name, attacked, protected=(), kind=AttackKind.LINEAR_L1,
               config=None, baseline=False):
    self.name = name
    self.attacked = tuple(attacked)
    self.protected = protected if protected == PROTECT_REST else tuple(
        protected)
    self.kind = kind if isinstance(kind, AttackKind) else AttackKind.parse(kind)
    self.config = dict(config or {})
    self.baseline = bool(baseline)
    allowed = _LINEAR_KEYS if self.kind.is_linear else _MULTIGRAD_KEYS
    unknown = set(self.config) - allowed
    if unknown:
      raise base.ConfigError("Scenario {} has unknown config keys: {}".format(
          name, ", ".join(sorted(unknown))))
    if self.protected != PROTECT_REST:
      overlap = set(self.attacked) & set(self.protected)
      if overlap:
        raise base.InvalidSpec(
            "Scenario {}: concepts {} are both attacked and protected".format(
                name, ", ".join(sorted(overlap))))
    if self.kind == AttackKind.BASELINE_PGD and self.protected not in (
        (), PROTECT_REST):
      raise base.InvalidSpec(
          "Scenario {}: baseline_pgd does not protect concepts".format(name))
    if self.kind == AttackKind.BASELINE_PGD and self.baseline:
      raise base.InvalidSpec(
          "Scenario {}: baseline_pgd is itself the baseline, drop baseline"
          .format(name))

  def resolve(self, concept_names):
    """(attacked, protected) concept indices in concept_names order."""
    for name in self.attacked + (() if self.protected == PROTECT_REST else
                                 self.protected):
      if name not in concept_names:
        raise base.ConfigError("Scenario {} names unknown concept {}".format(
            self.name, name))
    attacked = [concept_names.index(name) for name in self.attacked]
    if self.kind == AttackKind.BASELINE_PGD:
      protected = []
    elif self.protected == PROTECT_REST:
      protected = [k for k in range(len(concept_names)) if k not in attacked]
    else:
      protected = [concept_names.index(name) for name in self.protected]
    return attacked, protected

  def snapshot(self):
    return {
        "name": self.name,
        "attacked": list(self.attacked),
        "protected": (self.protected if self.protected == PROTECT_REST else
                      list(self.protected)),
        "kind": self.kind.value,
        "config": self.config,
        "baseline": self.baseline,
    }


class ModelRegistry(object):
  """Trained models addressed by concept name."""

  LINEAR = "linear"
  MLP = "mlp"

  def __init__(self, models=None):
    self.models = collections.OrderedDict()
    for model in models or ():
      self.add(model)

  def add(self, model):
    self.models[model.concept_name] = model

  def get(self, name):
    try:
      return self.models[name]
    except KeyError:
      raise base.MissingModel("No model trained for concept {}".format(name))

  def __contains__(self, name):
    return name in self.models

  def __len__(self):
    return len(self.models)

  @property
  def names(self):
    return list(self.models)

  def kind_of(self, name):
    model = self.get(name)
    return self.LINEAR if isinstance(model,
                                     linear_models.LinearClassifier) else self.MLP

  def classifiers(self, names):
    """Linear models in names order."""
    models = [self.get(name) for name in names]
    for model in models:
      if not isinstance(model, linear_models.LinearClassifier):
        raise base.InvalidSpec(
            "Linear attacks need linear models, {} is a network".format(
                model.concept_name))
    return models

  def networks(self, names):
    """Networks in names order; linear models become one layer networks."""
    nets = []
    for name in names:
      model = self.get(name)
      if isinstance(model, linear_models.LinearClassifier):
        model = neural.from_linear(model)
      nets.append(model)
    return nets

  @staticmethod
  def _file(directory, name):
    safe = "".join(c if c.isalnum() else "_" for c in name)
    return os.path.join(directory, "{}.json".format(safe))

  def save(self, directory):
    if not os.path.isdir(directory):
      os.makedirs(directory)
    index = collections.OrderedDict()
    for name, model in self.models.items():
      path = self._file(directory, name)
      model.save(path)
      index[name] = {"kind": self.kind_of(name),
                     "file": os.path.basename(path)}
    with open(os.path.join(directory, "index.json"), "w") as f:
      json.dump(index, f, indent=2)

  @classmethod
  def load(cls, directory):
    index_path = os.path.join(directory, "index.json")
    if not os.path.isfile(index_path):
      raise base.MissingModel(
          "No trained models in {}, run the train command first".format(
              directory))
    with open(index_path) as f:
      index = json.load(f, object_pairs_hook=collections.OrderedDict)
    registry = cls()
    for entry in index.values():
      loader = (linear_models.LinearClassifier
                if entry["kind"] == cls.LINEAR else neural.MlpClassifier)
      registry.add(loader.load(os.path.join(directory, entry["file"])))
    return registry


class AttackReport(object):
  """Per-concept column statistics, per-instance outcomes and metadata."""

  def __init__(self, scenario, concept_stats, statuses, perturbation_norms,
               metadata, perturbed=None, baseline_perturbed=None,
               originals=None, results=None):
    self.scenario = scenario
    self.concept_stats = concept_stats
    self.statuses = statuses
    self.perturbation_norms = perturbation_norms
    self.metadata = metadata
    self.perturbed = perturbed
    self.baseline_perturbed = baseline_perturbed
    self.originals = originals
    self.results = results

  @property
  def columns(self):
    return list(self.concept_stats[0].columns) if self.concept_stats else []

  def stats_for(self, name):
    for concept in self.concept_stats:
      if concept.name == name:
        return concept
    raise base.MissingModel("Concept {} is not in the report".format(name))

  @property
  def solver_failures(self):
    return self.statuses.count(linear_attack.AttackStatus.SOLVER_FAILURE.name)

  def rows(self):
    """(concept, role, column, accuracy, recall) in a stable order."""
    for concept in self.concept_stats:
      for column in concept.columns:
        yield (concept.name, concept.role, column, concept.accuracy(column),
               concept.recall(column))

  def write_csv(self, path):
    with open(path, "w", newline="") as f:
      writer = csv.writer(f)
      writer.writerow(["concept", "role", "column", "accuracy", "recall"])
      for name, role, column, acc, rec in self.rows():
        writer.writerow([name, role, column, stats.format_metric(acc),
                         stats.format_metric(rec)])

  def to_dict(self):
    return {
        "scenario": self.scenario.snapshot(),
        "metadata": self.metadata,
        "concepts": [{
            "concept": name,
            "role": role,
            "column": column,
            "accuracy": acc,
            "recall": rec,
        } for name, role, column, acc, rec in self.rows()],
        "instances": [{
            "instance_id": i,
            "status": status,
            "perturbation_norm": norm,
        } for i, (status, norm) in enumerate(
            zip(self.statuses, self.perturbation_norms))],
    }

  def write_json(self, path):
    with open(path, "w") as f:
      json.dump(self.to_dict(), f, indent=2, sort_keys=True)

  def __str__(self):
    header = "Scenario {} ({}): attacked {}, protected {}".format(
        self.scenario.name, self.scenario.kind.value,
        ", ".join(self.scenario.attacked) or "-",
        self.metadata.get("protected_names") or "-")
    return "\n".join([header] + [str(c) for c in self.concept_stats])


def _role(k, attacked, protected):
  if k in attacked:
    return "attacked"
  if k in protected:
    return "protected"
  return "other"


def concept_columns(models, ds_eval, columns, attacked=(), protected=()):
  """ConceptStats of every dataset concept for each (column, instances)."""
  result = []
  for k, name in enumerate(ds_eval.concept_names):
    model = models.get(name)
    concept = stats.ConceptStats(name, len(ds_eval),
                                 _role(k, attacked, protected))
    labels = ds_eval.labels[:, k]
    for column, instances in columns:
      concept.add_column(column, model.predict(instances), labels)
    result.append(concept)
  return result


def _linear_spec(scenario, attacked, protected, seed):
  config = dict(scenario.config)
  box = config.pop("box", True)
  if box is True:
    box = (0.0, 1.0)
  elif box is False:
    box = None
  config.setdefault("seed", seed)
  return linear_attack.AttackSpec(attacked, protected, norm=scenario.kind.norm,
                                  box=box, **config)


def _run_linear(scenario, models, ds_eval, attacked, protected, jobs, issues,
                seed):
  clfs = models.classifiers(ds_eval.concept_names)
  spec = _linear_spec(scenario, attacked, protected, seed)
  results = linear_attack.attack_batch(ds_eval.instances, ds_eval.labels, clfs,
                                       spec, jobs)
  perturbed = ds_eval.instances.copy()
  statuses, norms = [], []
  for i, result in enumerate(results):
    statuses.append(result.status.name)
    if result.success:
      perturbed[i] = ds_eval.instances[i] + result.delta
      norms.append(float(result.cost_value))
      continue
    norms.append(0.0)
    entry = base.InstanceLogEntry(i, result.message or result.status.name)
    if result.status == linear_attack.AttackStatus.INFEASIBLE:
      issues.record(scenario.name, base.AttackWarning("Infeasible", [entry]))
    else:
      issues.record(scenario.name, base.SolverFailure("Solver failed", [entry]))
  counts = collections.Counter(statuses)
  metadata = dict(spec.snapshot(), feasibility={
      status.name: counts.get(status.name, 0)
      for status in linear_attack.AttackStatus
  })
  if not scenario.baseline:
    return perturbed, None, statuses, norms, metadata, results
  baseline_spec = _linear_spec(scenario, attacked, (), seed)
  baseline = ds_eval.instances.copy()
  for i, result in enumerate(linear_attack.attack_batch(
      ds_eval.instances, ds_eval.labels, clfs, baseline_spec, jobs)):
    if result.success:
      baseline[i] = ds_eval.instances[i] + result.delta
  return perturbed, baseline, statuses, norms, metadata, results


def _multigrad_config(scenario, attacked, protected, concept_names, seed):
  config = dict(scenario.config)
  weights = config.pop("lambda_weights", None)
  if isinstance(weights, dict):
    for name in weights:
      if name not in concept_names:
        raise base.ConfigError("lambda_weights names unknown concept {}"
                               .format(name))
    weights = {concept_names.index(name): w for name, w in weights.items()}
  config.setdefault("seed", seed)
  return multigrad.MultiAttackConfig(attacked, protected,
                                     lambda_weights=weights, **config)


def _run_multigrad(scenario, models, ds_eval, attacked, protected, jobs,
                   issues, seed):
  nets = models.networks(ds_eval.concept_names)
  cfg = _multigrad_config(scenario, attacked, protected, ds_eval.concept_names,
                          seed)
  labels = neural.to_binary(ds_eval.labels)
  log = base.IssueLog()
  perturbed = multigrad.attack_batch(nets, ds_eval.instances, labels, cfg, jobs,
                                     log)
  for exceptions in log.issues[base.AttackInfo].values():
    for exception in exceptions:
      issues.record(scenario.name, exception)
  norms = [linalg.norm(x_adv - x, cfg.norm)
           for x, x_adv in zip(ds_eval.instances, perturbed)]
  statuses = ["PERTURBED"] * len(ds_eval)
  baseline = None
  if scenario.baseline:
    baseline = multigrad.attack_batch(nets, ds_eval.instances, labels,
                                      cfg.restricted(attacked), jobs)
  return perturbed, baseline, statuses, norms, cfg.snapshot(), None


def run_scenario(scenario, models, ds_eval, jobs=1, issues=None, seed=0):
  """Attack every evaluation instance and tabulate the report columns.

  Instances whose linear attack fails stay unmodified; the failure is recorded
  in issues and never aborts the batch.

  Args:
    scenario: the Scenario to run.
    models: ModelRegistry holding a model for every dataset concept.
    ds_eval: the evaluation ConceptDataset.
    jobs: worker threads across instances.
    issues: IssueLog receiving per-instance failures.
    seed: seed of attacks whose config sets none.

  Returns:
    AttackReport.
  """
  if not len(ds_eval):
    raise base.DataError("The evaluation set is empty")
  if issues is None:
    issues = base.IssueLog()
  attacked, protected = scenario.resolve(list(ds_eval.concept_names))
  logging.info("Running scenario %s (%s) on %d instances", scenario.name,
               scenario.kind.value, len(ds_eval))
  runner = _run_linear if scenario.kind.is_linear else _run_multigrad
  perturbed, baseline, statuses, norms, metadata, results = runner(
      scenario, models, ds_eval, attacked, protected, jobs, issues, seed)

  columns = [(ORIGINAL, ds_eval.instances)]
  if baseline is not None:
    columns.append((BASELINE, baseline))
  columns.append((CUSTOM, perturbed))
  concept_stats = concept_columns(models, ds_eval, columns, attacked,
                                  protected)
  metadata = dict(metadata, version=version.__version__, seed=seed,
                  instances=len(ds_eval),
                  protected_names=", ".join(
                      ds_eval.concept_names[k] for k in protected))
  return AttackReport(scenario, concept_stats, statuses, norms, metadata,
                      perturbed, baseline, ds_eval.instances, results)


def output_base(scenario_name, timestamp=None):
  """File stem {scenario}_{timestamp}, or just {scenario} without one."""
  if timestamp:
    return "{}_{}".format(scenario_name, timestamp)
  return scenario_name


def write_report(report, output_dir, timestamp=None, shape=None,
                 dump_images=0):
  """Write the CSV and JSON report plus the perturbed instance dumps.

  Returns:
    Paths written, by kind.
  """
  if not os.path.isdir(output_dir):
    os.makedirs(output_dir)
  stem = os.path.join(output_dir, output_base(report.scenario.name, timestamp))
  paths = {"csv": stem + ".csv", "json": stem + ".json",
           "perturbed": stem + "_perturbed.csv"}
  report.write_csv(paths["csv"])
  report.write_json(paths["json"])
  originals = report.originals
  if originals is None:
    originals = report.perturbed
  norm = linalg.Norm[report.metadata.get("norm", "LINF")]
  multigrad.write_perturbed_csv(paths["perturbed"], originals,
                                report.perturbed, norm)
  if report.results is not None:
    paths["results"] = stem + "_results.csv"
    linear_attack.write_results_csv(
        paths["results"], report.results,
        [concept.name for concept in report.concept_stats])
  if report.baseline_perturbed is not None:
    paths["baseline"] = stem + "_baseline_perturbed.csv"
    multigrad.write_perturbed_csv(paths["baseline"], originals,
                                  report.baseline_perturbed, norm)
  if shape is not None and dump_images:
    paths["images"] = multigrad.dump_images(output_dir,
                                            os.path.basename(stem),
                                            report.perturbed, shape,
                                            dump_images)
  logging.info("Wrote report %s", paths["csv"])
  return paths


def recompute_columns(models, ds_eval, perturbed_path, baseline_path=None,
                      attacked=(), protected=()):
  """ConceptStats rebuilt from the dumped perturbed instances alone."""
  columns = [(ORIGINAL, ds_eval.instances)]
  if baseline_path is not None:
    columns.append((BASELINE, multigrad.read_perturbed_csv(baseline_path)))
  columns.append((CUSTOM, multigrad.read_perturbed_csv(perturbed_path)))
  return concept_columns(models, ds_eval, columns, attacked, protected)


def explain_scenario(report, models, ds_eval, ds_train, samples=200, seed=0,
                     issues=None,
                     background_size=explain.GRADIENT_SHAP_BACKGROUND):
  """Mean attribution shift of every concept between clean and attacked.

  Linear models are explained against the training mean, networks against a
  seeded sample of training instances. Instances whose attribution is all
  zero before or after the attack are skipped and recorded.

  Returns:
    A list of (concept, role, mean shift or None, instances used), and the
    per-concept clean and attacked attributions of every instance.
  """
  if issues is None:
    issues = base.IssueLog()
  background_mean = np.mean(ds_train.instances, axis=0)
  background = explain.background_sample(ds_train.instances, seed,
                                          background_size)
  rows = []
  attributions = collections.OrderedDict()
  for concept in report.concept_stats:
    model = models.get(concept.name)
    is_linear = isinstance(model, linear_models.LinearClassifier)
    shifts = []
    pairs = []
    for i, (x, x_adv) in enumerate(zip(ds_eval.instances, report.perturbed)):
      if is_linear:
        before = explain.linear_shap(model, x, background_mean)
        after = explain.linear_shap(model, x_adv, background_mean)
      else:
        before = explain.gradient_shap(model, x, background, samples, seed)
        after = explain.gradient_shap(model, x_adv, background, samples, seed)
      pairs.append((before, after))
      try:
        shifts.append(explain.attribution_shift(before, after))
      except base.ZeroVector as e:
        issues.record("explain", base.AttackInfo(
            "Zero attribution", [base.InstanceLogEntry(i, "{}: {}".format(
                concept.name, e))]))
    attributions[concept.name] = pairs
    rows.append((concept.name, concept.role, stats.mean_defined(shifts),
                 len(shifts)))
  return rows, attributions


def write_attribution(path, rows):
  with open(path, "w", newline="") as f:
    writer = csv.writer(f)
    writer.writerow(["concept", "role", "mean_shift", "instances"])
    for name, role, shift, count in rows:
      writer.writerow([name, role, stats.format_metric(shift), count])


def dump_attributions(directory, stem, attributions, shape, limit):
  """PGM dumps of clean and attacked attributions of the first instances."""
  paths = []
  for name, pairs in attributions.items():
    safe = "".join(c if c.isalnum() else "_" for c in name)
    for i, (before, after) in enumerate(pairs[:limit]):
      for tag, attribution in (("clean", before), ("attacked", after)):
        path = os.path.join(directory, "{}_{}_{:04d}_{}.pgm".format(
            stem, safe, i, tag))
        explain.dump_attribution(path, attribution, shape)
        paths.append(path)
  return paths
