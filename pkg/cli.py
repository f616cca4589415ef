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

Command line entry point.

Subcommands prepare, train, attack, explain, report and all, driven by a JSON
run configuration. Exit codes: 0 success, 1 usage error, 2 data error,
3 solver failure in any scenario.
"""
from __future__ import print_function

import argparse
import codecs
import csv
import datetime
import os
import re
import sys

from absl import logging
from cryptography.hazmat.backends import default_backend
from cryptography.hazmat.primitives import hashes
from polyattack import base
from polyattack import config
from polyattack import datasets
from polyattack import linear_models
from polyattack import neural
from polyattack import report
from polyattack import stats
from polyattack import version

COMMANDS = ("prepare", "train", "attack", "explain", "report", "all")
MODELS_DIR = "models"
SUMMARY_FILE = "summary.csv"


class ArgumentParser(argparse.ArgumentParser):
  """Reports argument errors as UsageError instead of exiting with 2."""

  def error(self, message):
    raise base.UsageError(message)


def _validate_path(parser, arg):
  """Check that the files provided exist."""
  if not os.path.exists(arg):
    parser.error("The file path for %s doesn't exist" % arg)
  else:
    return arg


def _validate_jobs(parser, arg):
  try:
    jobs = int(arg)
  except ValueError:
    jobs = 0
  if jobs < 1:
    parser.error("--jobs must be a positive integer, got %s" % arg)
  return jobs


def arg_parser():
  """Parser for command line arguments."""
  description = ("Multi-concept adversarial attacks: attack some concept "
                 "classifiers while protecting the others")
  parser = ArgumentParser(description=description, prog="polyattack")
  subparsers = parser.add_subparsers(dest="cmd")
  for command in COMMANDS:
    sub = subparsers.add_parser(command)
    sub.add_argument(
        "--config",
        help="JSON run configuration",
        required=True,
        metavar="config_file",
        type=lambda x: _validate_path(parser, x))
    sub.add_argument(
        "--output-dir",
        help="Overrides the output directory of the config",
        required=False)
    sub.add_argument(
        "--seed",
        type=int,
        help="Global seed, overrides {} and the config".format(
            config.SEED_ENV),
        required=False)
    sub.add_argument(
        "--jobs",
        default=1,
        type=lambda x: _validate_jobs(parser, x),
        help="Worker threads across instances. Defaults to 1",
        required=False)
    sub.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Print out detailed log messages. Defaults to False",
        required=False)
    sub.add_argument(
        "--no-timestamp",
        action="store_true",
        help="Name outputs {scenario}.csv instead of {scenario}_{time}.csv",
        required=False)
    if command in ("attack", "explain", "report"):
      sub.add_argument(
          "--scenario",
          action="append",
          help="Only run the named scenario; may be repeated",
          required=False)
  return parser


def file_checksum(filename):
  """SHA-512/256 checksum of a file as a hex string."""
  blocksize = 65536
  digest = hashes.Hash(hashes.SHA512_256(), backend=default_backend())
  with open(filename, "rb") as f:
    for block in iter(lambda: f.read(blocksize), b""):
      digest.update(block)
  return "0x{:x}".format(int(codecs.encode(digest.finalize(), "hex"), 16))


def print_metadata(run_config):
  """Prints metadata associated with this run and returns it."""
  checksums = {
      os.path.basename(path): file_checksum(path)
      for path in run_config.input_files()
  }
  print("polyattack version: {}".format(version.__version__))
  print("Seed: {}".format(run_config.seed))
  for name, checksum in sorted(checksums.items()):
    print("SHA-512/256 checksum of {}: {}".format(name, checksum))
  return {"checksums": checksums, "dataset": dict(run_config.dataset)}


class Run(object):
  """State shared by the stages of one command."""

  def __init__(self, run_config, options):
    self.config = run_config
    self.output_dir = options.output_dir or run_config.output_dir
    self.jobs = options.jobs
    self.verbose = options.verbose
    self.timestamp = None
    if run_config.timestamp and not options.no_timestamp:
      self.timestamp = datetime.datetime.now().strftime("%Y%m%dT%H%M%S")
    self.only = getattr(options, "scenario", None)
    self.issues = base.IssueLog()
    self._data = None
    self.reports = []

  @property
  def models_dir(self):
    return os.path.join(self.output_dir, MODELS_DIR)

  def scenarios(self):
    if not self.only:
      return list(self.config.scenarios)
    return [self.config.scenario(name) for name in self.only]

  def data(self):
    """(train, evaluation) datasets, loaded once."""
    if self._data is None:
      self._data = load_data(self.config)
    return self._data


def load_data(run_config):
  """Training set and the seeded evaluation subset of the test set."""
  dataset = run_config.dataset
  seed = dataset["seed"]
  if run_config.is_mnist:
    train = datasets.load_mnist(dataset["train_images"],
                                dataset["train_labels"], run_config.concepts,
                                dataset.get("train_limit"))
    test = datasets.load_mnist(dataset["test_images"], dataset["test_labels"],
                               run_config.concepts)
  else:
    train = datasets.synth_blobs(dataset["n"], seed)
    test = datasets.synth_blobs(dataset["test_n"], seed + 1)
    keep = [train.concept_index(name) for name in run_config.concepts]
    train = datasets.ConceptDataset(train.instances, run_config.concepts,
                                    train.labels[:, keep])
    test = datasets.ConceptDataset(test.instances, run_config.concepts,
                                   test.labels[:, keep])
  if dataset["full_eval"]:
    evaluation = test
  else:
    evaluation = datasets.sample_eval_subset(
        test, min(dataset["eval_size"], len(test)), seed)
  return train, evaluation


def prepare(run):
  train, evaluation = run.data()
  if not os.path.isdir(run.output_dir):
    os.makedirs(run.output_dir)
  path = os.path.join(run.output_dir, "eval.csv")
  evaluation.to_csv(path)
  print("Training instances: {}, evaluation instances: {}".format(
      len(train), len(evaluation)))
  for name in train.concept_names:
    print("  {:<8s} positive rate {:.4f} (train) {:.4f} (eval)".format(
        name, train.positive_rate(name), evaluation.positive_rate(name)))
  logging.info("Wrote evaluation subset to %s", path)


def train_models(run):
  train, evaluation = run.data()
  registry = report.ModelRegistry()
  kind = run.config.models["kind"]
  for name in run.config.concepts:
    hp = run.config.hyperparameters(name)
    if kind == report.ModelRegistry.LINEAR:
      model = linear_models.train_svm(train, name, **hp)
      accuracy = linear_models.evaluate(model, evaluation)
    else:
      model = neural.train_mlp(train, name, **hp)
      accuracy = neural.evaluate(model, evaluation)
    print("  {:<8s} {} model, evaluation accuracy {:.4f}".format(
        name, kind, accuracy))
    registry.add(model)
  registry.save(run.models_dir)
  return registry


def attack(run):
  _, evaluation = run.data()
  registry = report.ModelRegistry.load(run.models_dir)
  metadata = print_metadata(run.config)
  shape = evaluation.feature_shape
  dump = run.config.explain["dump_images"]
  run.reports = []
  for scenario in run.scenarios():
    issues = base.IssueLog()
    result = report.run_scenario(scenario, registry, evaluation, run.jobs,
                                 issues, run.config.seed)
    result.metadata.update(metadata)
    report.write_report(result, run.output_dir, run.timestamp, shape, dump)
    print(result)
    print("\nIssues of scenario {}:".format(scenario.name))
    issues.print_issues(run.verbose)
    run.issues.merge(issues)
    run.reports.append(result)
  return run.reports


def explain(run):
  train, evaluation = run.data()
  registry = report.ModelRegistry.load(run.models_dir)
  settings = run.config.explain
  reports = run.reports
  if not reports:
    reports = [report.run_scenario(s, registry, evaluation, run.jobs,
                                   base.IssueLog(), run.config.seed)
               for s in run.scenarios()]
  for result in reports:
    rows, attributions = report.explain_scenario(
        result, registry, evaluation, train, settings["samples"],
        settings["seed"], run.issues, settings["background"])
    stem = report.output_base(result.scenario.name, run.timestamp)
    path = os.path.join(run.output_dir, stem + "_attribution.csv")
    report.write_attribution(path, rows)
    if evaluation.is_image and settings["dump_images"]:
      report.dump_attributions(run.output_dir, stem, attributions,
                               evaluation.feature_shape,
                               settings["dump_images"])
    print("Attribution shift of scenario {}:".format(result.scenario.name))
    for name, role, shift, count in rows:
      print("  {:<8s} {:<10s} {} over {} instances".format(
          name, role, stats.format_metric(shift), count))


def _latest_dump(output_dir, name):
  """Newest {name}_perturbed.csv or {name}_{timestamp}_perturbed.csv."""
  stamped = re.compile(re.escape(name) + r"(_\d{8}T\d{6})?_perturbed\.csv$")
  candidates = sorted(
      os.path.join(output_dir, f) for f in os.listdir(output_dir)
      if stamped.match(f))
  if not candidates:
    raise base.MissingModel(
        "No perturbed instances for scenario {} in {}, run attack first"
        .format(name, output_dir))
  return candidates[-1]


def summarize(run):
  """Recompute every scenario's columns from its dumped instances."""
  _, evaluation = run.data()
  registry = report.ModelRegistry.load(run.models_dir)
  path = os.path.join(run.output_dir, SUMMARY_FILE)
  with open(path, "w", newline="") as f:
    writer = csv.writer(f)
    writer.writerow(["scenario", "concept", "role", "column", "accuracy",
                     "recall"])
    for scenario in run.scenarios():
      dump = _latest_dump(run.output_dir, scenario.name)
      baseline = dump[:-len("_perturbed.csv")] + "_baseline_perturbed.csv"
      attacked, protected = scenario.resolve(list(evaluation.concept_names))
      concept_stats = report.recompute_columns(
          registry, evaluation, dump,
          baseline if os.path.isfile(baseline) else None, attacked, protected)
      print("Scenario {} from {}".format(scenario.name, dump))
      for concept in concept_stats:
        print(concept)
        for column in concept.columns:
          writer.writerow([scenario.name, concept.name, concept.role, column,
                           stats.format_metric(concept.accuracy(column)),
                           stats.format_metric(concept.recall(column))])
  logging.info("Wrote summary to %s", path)


def run_command(options):
  run_config = config.RunConfig.from_file(
      options.config, config.seed_override(options.seed))
  run = Run(run_config, options)
  if options.cmd in ("prepare", "all"):
    prepare(run)
  if options.cmd in ("train", "all"):
    train_models(run)
  if options.cmd in ("attack", "all"):
    attack(run)
  if options.cmd in ("explain", "all"):
    explain(run)
  if options.cmd in ("report", "all"):
    summarize(run)
  if options.cmd in ("attack", "all"):
    print("\nAll scenarios:")
    run.issues.print_issues(run.verbose)
    if run.issues.count(base.SolverError):
      return base.SolverError.exit_code
  return 0


def main(argv=None):
  """Runs the command line; returns the process exit code."""
  p = arg_parser()
  try:
    options = p.parse_args(argv)
    if not options.cmd:
      p.error("A command is required: {}".format(", ".join(COMMANDS)))
    logging.set_verbosity(logging.DEBUG if options.verbose else logging.INFO)
    return run_command(options)
  except base.PolyAttackException as e:
    print("polyattack: {}: {}".format(e.description or "Error", e),
          file=sys.stderr)
    return e.exit_code


if __name__ == "__main__":
  sys.exit(main())
