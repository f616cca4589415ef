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

Minimum cost perturbations against linear classifiers.

A perturbation delta must push every attacked classifier k to the wrong side,
y_k (w_k (x + delta) + b_k) <= -attack_margin, while every protected
classifier keeps its label, y_k (w_k (x + delta) + b_k) >= protect_margin.
Among those, the one minimizing ||c * delta|| under L1, Linf or L2 is
returned. Results are always re-verified from the slacks, never taken on
trust from a solver.
"""

from concurrent import futures
import csv
import enum

from absl import logging
from polyattack import base
from polyattack import linalg
from polyattack import simplex
from polyattack.linalg import Norm
import numpy as np

# Margins handed to the solvers are tightened by this much, so that solver
# rounding never breaks the verification against the requested margins.
SOLVER_MARGIN_PAD = 1e-7

DUAL_TOLERANCE = 1e-8
DUAL_MAX_ITERS = 10000
DUAL_DIVERGENCE = 1e10

# Relative width at which the Linf budget bisection stops.
LINF_TOLERANCE = 1e-10
LINF_MAX_BISECTIONS = 100


class AttackStatus(enum.Enum):
  SUCCESS = 1
  INFEASIBLE = 2
  SOLVER_FAILURE = 3


class AttackSpec(object):
  """Which classifiers to attack and protect, and at what cost.

  Attributes:
    attacked: indices J of the classifiers to attack.
    protected: indices K of the classifiers to protect, disjoint from J.
    norm: Norm of the cost.
    costs: positive per-feature costs c, all ones when None.
    attack_margin: attacked rows are tightened to <= -attack_margin.
    protect_margin: protected rows are tightened to >= protect_margin.
    mutable_features: indices of the features that may change, all if None.
    box: optional (lo, hi) bounds on x + delta, scalars or per feature.
    positive_only: attacked rows drop the label factor, so only positive
      instances are pushed across the boundary.
  """

  def __init__(self, attacked, protected=(), norm=Norm.L1, costs=None,
               attack_margin=1e-4, protect_margin=1e-4, mutable_features=None,
               box=None, positive_only=False, max_iters=None, seed=0):
    self.attacked = tuple(int(k) for k in attacked)
    self.protected = tuple(int(k) for k in protected)
    overlap = set(self.attacked) & set(self.protected)
    if overlap:
      raise base.InvalidSpec(
          "Classifiers {} are both attacked and protected".format(
              sorted(overlap)))
    self.norm = norm if isinstance(norm, Norm) else Norm.parse(norm)
    self.costs = None if costs is None else linalg.as_vector(costs)
    if self.costs is not None and np.any(self.costs <= 0):
      raise base.InvalidSpec("Every feature cost must be positive")
    if attack_margin < 0 or protect_margin < 0:
      raise base.InvalidSpec("Margins must not be negative")
    self.attack_margin = float(attack_margin)
    self.protect_margin = float(protect_margin)
    self.mutable_features = (None if mutable_features is None else
                             np.unique(np.asarray(mutable_features,
                                                  dtype=np.int64)))
    if self.mutable_features is not None and not self.mutable_features.size:
      raise base.UsageError("At least one feature must be mutable")
    self.box = box
    self.positive_only = bool(positive_only)
    self.max_iters = max_iters
    self.seed = seed

  @property
  def box_mode(self):
    return "box" if self.box is not None else "free"

  def cost_vector(self, dimension):
    if self.costs is None:
      return np.ones(dimension)
    if self.costs.size != dimension:
      raise base.DimensionMismatch("{} costs for {} features".format(
          self.costs.size, dimension))
    return self.costs

  def mutable(self, dimension):
    if self.mutable_features is None:
      return np.arange(dimension)
    if (self.mutable_features[0] < 0 or
        self.mutable_features[-1] >= dimension):
      raise base.InvalidSpec("Mutable feature index out of range")
    return self.mutable_features

  def bounds(self, dimension):
    if self.box is None:
      return None
    lo, hi = self.box
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (dimension,))
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (dimension,))
    return lo, hi

  def snapshot(self):
    return {
        "norm": self.norm.name,
        "attack_margin": self.attack_margin,
        "protect_margin": self.protect_margin,
        "box": self.box_mode,
        "positive_only": self.positive_only,
        "costs": "ones" if self.costs is None else "custom",
        "mutable_features": ("all" if self.mutable_features is None else
                             int(self.mutable_features.size)),
    }


class PerturbationResult(object):
  """Outcome of one instance attack."""

  def __init__(self, status, delta, cost_value, constraint_slacks,
               box_mode="free", message=None, iterations=0):
    self.status = status
    self.iterations = iterations
    self.delta = delta
    self.cost_value = cost_value
    self.constraint_slacks = constraint_slacks
    self.box_mode = box_mode
    self.message = message

  @property
  def success(self):
    return self.status == AttackStatus.SUCCESS

  def __repr__(self):
    return "PerturbationResult(status={}, cost_value={})".format(
        self.status.name, self.cost_value)


def _check_inputs(x, y, clfs):
  x = linalg.as_vector(x)
  y = np.asarray(y, dtype=np.float64).reshape(-1)
  if y.size != len(clfs):
    raise base.DimensionMismatch("{} labels for {} classifiers".format(
        y.size, len(clfs)))
  for clf in clfs:
    linalg.check_dims(clf.w, x)
  return x, y


def verify(x, delta, y, clfs, spec=None):
  """Slack y_k (w_k (x + delta) + b_k) of every classifier."""
  x = np.asarray(x, dtype=np.float64)
  delta = np.asarray(delta, dtype=np.float64)
  if x.shape != delta.shape:
    raise base.DimensionMismatch("x and delta differ in shape")
  point = x + delta
  return np.array([y_k * (np.dot(clf.w, point) + clf.b)
                   for clf, y_k in zip(clfs, np.asarray(y, dtype=np.float64))])


def constraints_hold(slacks, y, spec):
  """Success recomputed from slacks and margins only."""
  for k in spec.attacked:
    value = slacks[k] * y[k] if spec.positive_only else slacks[k]
    if not value <= -spec.attack_margin:
      return False
  for k in spec.protected:
    if not slacks[k] >= spec.protect_margin:
      return False
  return True


def _margin_rows(x, y, clfs, spec, pad):
  """Constraints as rows a.delta + e <= 0 over the full feature space."""
  rows, offsets = [], []
  for k in spec.attacked:
    clf = clfs[k]
    value = float(np.dot(clf.w, x) + clf.b)
    sign = 1.0 if spec.positive_only else y[k]
    rows.append(sign * clf.w)
    offsets.append(sign * value + spec.attack_margin + pad)
  for k in spec.protected:
    clf = clfs[k]
    value = float(np.dot(clf.w, x) + clf.b)
    rows.append(-y[k] * clf.w)
    offsets.append(-y[k] * value + spec.protect_margin + pad)
  if not rows:
    return np.zeros((0, x.size)), np.zeros(0)
  return np.vstack(rows), np.array(offsets)


def _finish(x, y, clfs, spec, delta, costs):
  bounds = spec.bounds(x.size)
  if bounds is not None:
    delta = np.clip(x + delta, bounds[0], bounds[1]) - x
  slacks = verify(x, delta, y, clfs, spec)
  cost = linalg.weighted_norm(delta, costs, spec.norm)
  if constraints_hold(slacks, y, spec):
    return PerturbationResult(AttackStatus.SUCCESS, delta, cost, slacks,
                              spec.box_mode)
  return PerturbationResult(
      AttackStatus.SOLVER_FAILURE, delta, cost, slacks, spec.box_mode,
      "Solution failed the independent margin verification")


def _unchanged(x, y, clfs, spec, status, message):
  delta = np.zeros_like(x)
  return PerturbationResult(status, delta, 0.0, verify(x, delta, y, clfs, spec),
                            spec.box_mode, message)


def _build_lp(x, y, clfs, spec, budget=None):
  """L1 program over delta_A = u - v with u, v >= 0.

  The objective is sum_i c_i (u_i + v_i) and there is one row per attacked
  or protected classifier. A box becomes upper bounds u_i <= hi_i - x_i and
  v_i <= x_i - lo_i; a budget t further caps u_i and v_i at t / c_i.

  Returns:
    (lp, mutable, costs), or (None, mutable, costs) when x lies outside the
    box.
  """
  d = x.size
  mutable = spec.mutable(d)
  costs = spec.cost_vector(d)
  size = mutable.size
  room_up = np.full(size, np.inf)
  room_down = np.full(size, np.inf)
  box = spec.bounds(d)
  if box is not None:
    room_up = box[1][mutable] - x[mutable]
    room_down = x[mutable] - box[0][mutable]
    if np.any(room_up < 0.0) or np.any(room_down < 0.0):
      return None, mutable, costs
  if budget is not None:
    cap = budget / costs[mutable]
    room_up = np.minimum(room_up, cap)
    room_down = np.minimum(room_down, cap)
  objective = np.concatenate([costs[mutable], costs[mutable]])
  lp = simplex.LinearProgram(objective,
                             upper_bounds=np.concatenate([room_up, room_down]))
  margin_a, margin_e = _margin_rows(x, y, clfs, spec, SOLVER_MARGIN_PAD)
  for a, e in zip(margin_a, margin_e):
    lp.add_constraint(np.concatenate([a[mutable], -a[mutable]]),
                      simplex.Relation.LE, -e)
  return lp, mutable, costs


def _solve_lp(x, y, clfs, spec, budget=None):
  """Solve the L1 program, optionally under a budget, and verify it.

  Returns:
    (result, iterations); result is None when the program is infeasible.
  """
  lp, mutable, costs = _build_lp(x, y, clfs, spec, budget)
  if lp is None:
    return None, 0
  solution = simplex.solve(lp, max_iters=spec.max_iters)
  if solution.status == simplex.LpStatus.INFEASIBLE:
    return None, solution.iterations
  if solution.status != simplex.LpStatus.OPTIMAL:
    raise base.SolverFailure("Simplex reported {}".format(
        solution.status.name))
  size = mutable.size
  delta = np.zeros_like(x)
  delta[mutable] = solution.z[:size] - solution.z[size:]
  return _finish(x, y, clfs, spec, delta, costs), solution.iterations


def attack_l1(x, y, clfs, spec):
  """Minimum sum_i |c_i delta_i| perturbation via the L1 linear program.

  Args:
    x: instance.
    y: the instance's label for every classifier, in {-1,+1}.
    clfs: list of LinearClassifier; spec indices refer to this list.
    spec: AttackSpec with norm L1.

  Returns:
    A PerturbationResult.
  """
  x, y = _check_inputs(x, y, clfs)
  try:
    result, iterations = _solve_lp(x, y, clfs, spec)
  except base.SolverError as e:
    logging.warning("Simplex failed: %s", e)
    return _unchanged(x, y, clfs, spec, AttackStatus.SOLVER_FAILURE, str(e))
  if result is None:
    return _unchanged(x, y, clfs, spec, AttackStatus.INFEASIBLE,
                      "Attack and protection constraints are unsatisfiable")
  result.iterations = iterations
  return result


def attack_linf(x, y, clfs, spec):
  """Minimum max_i |c_i delta_i| perturbation.

  The smallest budget t for which the program with every |c_i delta_i|
  capped at t stays feasible is bracketed between 0 and the Linf cost of the
  L1 optimum, then narrowed by bisection to LINF_TOLERANCE relative width.
  Only verified perturbations ever close the upper end of the bracket.
  """
  x, y = _check_inputs(x, y, clfs)
  try:
    best, iterations = _solve_lp(x, y, clfs, spec)
    if best is None:
      return _unchanged(x, y, clfs, spec, AttackStatus.INFEASIBLE,
                        "Attack and protection constraints are unsatisfiable")
    if not best.success:
      best.iterations = iterations
      return best
    costs = spec.cost_vector(x.size)
    low, high = 0.0, linalg.weighted_norm(best.delta, costs, Norm.LINF)
    for _ in range(LINF_MAX_BISECTIONS):
      if high - low <= LINF_TOLERANCE * (1.0 + high):
        break
      budget = 0.5 * (low + high)
      candidate, steps = _solve_lp(x, y, clfs, spec, budget)
      iterations += steps
      if candidate is not None and candidate.success:
        best = candidate
        high = min(budget, linalg.weighted_norm(candidate.delta, costs,
                                                Norm.LINF))
      else:
        low = budget
  except base.SolverError as e:
    logging.warning("Simplex failed: %s", e)
    return _unchanged(x, y, clfs, spec, AttackStatus.SOLVER_FAILURE, str(e))
  logging.debug("Linf budget bracket [%g, %g] after %d simplex iterations",
                low, high, iterations)
  best.iterations = iterations
  return best


class _L2Dual(object):
  """Dual of min sum (c_i delta_i)^2 s.t. a_k.delta + e_k <= 0.

  For multipliers lam >= 0, the inner minimizer is
  delta = clip(-G / (2 c^2), lo - x, hi - x) with G = sum_k lam_k a_k, the
  clip only applying when a box is set. The dual function is concave and its
  gradient is the vector of constraint values at the inner minimizer.
  """

  def __init__(self, rows, offsets, costs, lower, upper):
    self.rows = rows
    self.offsets = offsets
    self.costs_sq = costs ** 2
    self.lower = lower
    self.upper = upper

  def primal(self, lam):
    g = lam.dot(self.rows)
    delta = -g / (2.0 * self.costs_sq)
    if self.lower is not None:
      delta = np.clip(delta, self.lower, self.upper)
    return delta

  def value(self, lam):
    delta = self.primal(lam)
    return (float(np.dot(self.costs_sq, delta ** 2)) +
            float(lam.dot(self.rows.dot(delta) + self.offsets)))

  def gradient(self, lam):
    return self.rows.dot(self.primal(lam)) + self.offsets

  def lipschitz_bound(self):
    return 0.5 * float(np.sum(self.rows ** 2 / self.costs_sq))

  def ascend(self, lam):
    """Projected gradient ascent with backtracking on the step 1/L.

    Returns:
      (lam, converged, diverged).
    """
    lipschitz = max(self.lipschitz_bound() * 1e-3, 1e-12)
    for iteration in range(DUAL_MAX_ITERS):
      grad = self.gradient(lam)
      projected = np.where(lam > 0, grad, np.maximum(grad, 0.0))
      if np.max(np.abs(projected), initial=0.0) < DUAL_TOLERANCE:
        logging.debug("L2 dual converged after %d iterations", iteration)
        return lam, True, False
      current = self.value(lam)
      while True:
        candidate = np.maximum(lam + grad / lipschitz, 0.0)
        step = candidate - lam
        bound = (current + float(grad.dot(step)) -
                 0.5 * lipschitz * float(step.dot(step)))
        if self.value(candidate) >= bound - 1e-12 * (1.0 + abs(current)):
          break
        lipschitz *= 2.0
      lam = candidate
      if np.max(lam, initial=0.0) > DUAL_DIVERGENCE:
        return lam, False, True
    return lam, False, False


def _feasible(x, y, clfs, spec):
  """Whether the constraint set admits any perturbation at all."""
  lp, _, _ = _build_lp(x, y, clfs, spec)
  if lp is None:
    return False
  try:
    return simplex.solve(lp).status != simplex.LpStatus.INFEASIBLE
  except base.SolverError:
    return True


def attack_l2(x, y, clfs, spec):
  """Minimum ||c * delta||_2 perturbation via projected dual ascent.

  The cost vector is read as a positive diagonal matrix. When the ascent
  does not converge or its primal point fails verification, one restart from
  a seeded random point is tried before the instance is declared infeasible
  (no perturbation satisfies the constraints) or a solver failure.
  """
  x, y = _check_inputs(x, y, clfs)
  d = x.size
  mutable = spec.mutable(d)
  costs = spec.cost_vector(d)
  rows, offsets = _margin_rows(x, y, clfs, spec, SOLVER_MARGIN_PAD)
  lower = upper = None
  box = spec.bounds(d)
  if box is not None:
    lower = box[0][mutable] - x[mutable]
    upper = box[1][mutable] - x[mutable]
  dual = _L2Dual(rows[:, mutable], offsets, costs[mutable], lower, upper)

  rng = np.random.default_rng(spec.seed)
  starts = [np.zeros(offsets.size), rng.uniform(0.0, 1.0, offsets.size)]
  result = None
  for attempt, lam in enumerate(starts):
    lam, converged, diverged = dual.ascend(lam)
    if diverged:
      return _unchanged(x, y, clfs, spec, AttackStatus.INFEASIBLE,
                        "L2 dual is unbounded")
    delta = np.zeros_like(x)
    delta[mutable] = dual.primal(lam)
    result = _finish(x, y, clfs, spec, delta, costs)
    if converged and result.success:
      return result
    logging.warning("L2 dual attempt %d did not produce a verified "
                    "perturbation, %s", attempt,
                    "restarting" if attempt == 0 else "giving up")
  if not _feasible(x, y, clfs, spec):
    return _unchanged(x, y, clfs, spec, AttackStatus.INFEASIBLE,
                      "Attack and protection constraints are unsatisfiable")
  return _unchanged(x, y, clfs, spec, AttackStatus.SOLVER_FAILURE,
                    "L2 dual ascent did not converge")


_ATTACKS = {
    Norm.L1: attack_l1,
    Norm.LINF: attack_linf,
    Norm.L2: attack_l2,
}


def attack(x, y, clfs, spec):
  """Dispatch on spec.norm."""
  return _ATTACKS[spec.norm](x, y, clfs, spec)


def attack_batch(instances, labels, clfs, spec, jobs=1):
  """Attack every row of instances; results keep the instance order."""
  pairs = list(zip(instances, labels))
  if jobs <= 1:
    return [attack(x, y, clfs, spec) for x, y in pairs]
  with futures.ThreadPoolExecutor(max_workers=jobs) as pool:
    return list(pool.map(lambda pair: attack(pair[0], pair[1], clfs, spec),
                         pairs))


def write_results_csv(path, results, concept_names, instance_ids=None):
  """instance_id, status, cost_value and one slack column per concept."""
  if instance_ids is None:
    instance_ids = range(len(results))
  with open(path, "w", newline="") as f:
    writer = csv.writer(f)
    writer.writerow(["instance_id", "status", "cost_value"] +
                    ["slack_%s" % name for name in concept_names])
    for instance_id, result in zip(instance_ids, results):
      writer.writerow([instance_id, result.status.name,
                       repr(float(result.cost_value))] +
                      [repr(float(s)) for s in result.constraint_slacks])
