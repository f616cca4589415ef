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

Dense two-phase primal simplex with bounded variables.

Programs are always minimizations of c.z. Strict inequalities cannot be
expressed; callers convert them into margins before building the program.
"""

import collections
import enum

from absl import logging
from polyattack import base
from polyattack import linalg
import numpy as np


class Relation(enum.Enum):
  LE = 1
  GE = 2
  EQ = 3


class VarBound(enum.Enum):
  FREE = 1
  NONNEG = 2


class LpStatus(enum.Enum):
  OPTIMAL = 1
  INFEASIBLE = 2
  UNBOUNDED = 3


Constraint = collections.namedtuple("Constraint", ["row", "relation", "rhs"])


class LinearProgram(object):
  """Minimize objective.z subject to row.z (<=|>=|=) rhs constraints.

  Nonnegative variables may also carry a finite upper bound; the solver keeps
  those as variable bounds instead of constraint rows.

  column_origin, when set, maps every column of this program onto a column of
  the program it was derived from as (original_index, sign) pairs, so that a
  solution can be carried back with recover().
  """

  def __init__(self, objective, constraints=(), var_bounds=None,
               upper_bounds=None, column_origin=None, original_size=None):
    self.objective = linalg.as_vector(objective)
    self.constraints = []
    if var_bounds is None:
      var_bounds = [VarBound.NONNEG] * self.num_vars
    if len(var_bounds) != self.num_vars:
      raise base.DimensionMismatch(
          "{} variable bounds for {} variables".format(
              len(var_bounds), self.num_vars))
    self.var_bounds = tuple(var_bounds)
    if upper_bounds is None:
      upper_bounds = np.full(self.num_vars, np.inf)
    upper_bounds = np.asarray(upper_bounds, dtype=np.float64).reshape(-1)
    if upper_bounds.size != self.num_vars:
      raise base.DimensionMismatch(
          "{} upper bounds for {} variables".format(
              upper_bounds.size, self.num_vars))
    if np.any(np.isnan(upper_bounds)) or np.any(upper_bounds < 0.0):
      raise base.InvalidSpec("Upper bounds must be nonnegative")
    for bound, upper in zip(self.var_bounds, upper_bounds):
      if bound == VarBound.FREE and np.isfinite(upper):
        raise base.InvalidSpec("A free variable cannot have an upper bound")
    self.upper_bounds = upper_bounds
    self.column_origin = column_origin
    self.original_size = original_size
    for constraint in constraints:
      self.add_constraint(*constraint)

  @property
  def num_vars(self):
    return self.objective.size

  def add_constraint(self, row, relation, rhs):
    row = linalg.as_vector(row)
    if row.size != self.num_vars:
      raise base.DimensionMismatch(
          "Constraint row has {} entries, the objective {}".format(
              row.size, self.num_vars))
    rhs = float(rhs)
    if not np.isfinite(rhs):
      raise base.NonFiniteValue("Constraint right hand side is not finite")
    self.constraints.append(Constraint(row, Relation(relation), rhs))

  def matrix_form(self):
    """Returns (A, relations, b) with one row of A per constraint."""
    if not self.constraints:
      return np.zeros((0, self.num_vars)), [], np.zeros(0)
    a = np.vstack([c.row for c in self.constraints])
    b = np.array([c.rhs for c in self.constraints])
    return a, [c.relation for c in self.constraints], b

  def recover(self, z):
    """Map a solution of this program onto the original coordinates."""
    z = np.asarray(z, dtype=np.float64)
    if self.column_origin is None:
      return z.copy()
    original = np.zeros(self.original_size)
    for column, (index, sign) in enumerate(self.column_origin):
      original[index] += sign * z[column]
    return original

  def max_violation(self, z):
    """Largest violation of a bound or constraint by z, scaled by 1 + |rhs|."""
    z = np.asarray(z, dtype=np.float64)
    worst = 0.0
    for value, bound, upper in zip(z, self.var_bounds, self.upper_bounds):
      if bound == VarBound.NONNEG:
        worst = max(worst, -value)
      if np.isfinite(upper):
        worst = max(worst, (value - upper) / (1.0 + upper))
    if self.constraints:
      a, relations, b = self.matrix_form()
      lhs = a.dot(z)
      for gap_lhs, relation, rhs in zip(lhs, relations, b):
        if relation == Relation.LE:
          gap = gap_lhs - rhs
        elif relation == Relation.GE:
          gap = rhs - gap_lhs
        else:
          gap = abs(gap_lhs - rhs)
        worst = max(worst, gap / (1.0 + abs(rhs)))
    return worst


class LpSolution(object):
  """Outcome of a solve; z is only meaningful when status is OPTIMAL."""

  def __init__(self, status, z=None, objective_value=None, iterations=0):
    self.status = status
    self.z = z
    self.objective_value = objective_value
    self.iterations = iterations

  def __repr__(self):
    return "LpSolution(status={}, objective_value={}, iterations={})".format(
        self.status.name, self.objective_value, self.iterations)


def free_var_split(lp):
  """Replace every free variable z by u - v with u, v >= 0."""
  if all(bound == VarBound.NONNEG for bound in lp.var_bounds):
    return lp
  origin = []
  upper = []
  for index, bound in enumerate(lp.var_bounds):
    origin.append((index, 1.0))
    upper.append(lp.upper_bounds[index])
    if bound == VarBound.FREE:
      origin.append((index, -1.0))
      upper.append(np.inf)
  columns = np.array([index for index, _ in origin])
  signs = np.array([sign for _, sign in origin])
  split = LinearProgram(
      lp.objective[columns] * signs,
      upper_bounds=upper,
      column_origin=origin,
      original_size=lp.num_vars)
  for row, relation, rhs in lp.constraints:
    split.add_constraint(row[columns] * signs, relation, rhs)
  return split


class SimplexSolver(object):
  """Two-phase bounded-variable tableau simplex.

  Entering columns are priced by the most negative reduced cost, lowest index
  on ties. After stall_limit consecutive degenerate iterations the solver
  switches to Bland's rule until the objective moves again, so it cannot
  cycle. A variable sitting at its upper bound is stored complemented,
  z = upper - z', which keeps every nonbasic column at zero in the tableau.

  A solver instance is meant for a single solve; concurrent solves should
  each create their own instance.
  """

  def __init__(self, feas_tol=1e-7, pivot_tol=1e-9, max_iters=None,
               stall_limit=None, debug=False):
    self.feas_tol = feas_tol
    self.pivot_tol = pivot_tol
    self.max_iters = max_iters
    self.stall_limit = stall_limit
    self.debug = debug
    self.iterations = 0
    self.bland_iterations = 0
    self._limit = None
    self._stall = None
    self._upper = None
    self._flipped = None

  def _dump(self, phase, tableau, basis):
    if self.debug:
      logging.debug("%s iteration %d, basis %s\n%s", phase, self.iterations,
                    basis, np.array2string(tableau, precision=4,
                                           max_line_width=200))

  def _pivot(self, tableau, row, col):
    pivot_row = tableau[row] / tableau[row, col]
    column = tableau[:, col].copy()
    column[row] = 0.0
    rows = np.nonzero(column)[0]
    if rows.size:
      tableau[rows] -= np.outer(column[rows], pivot_row)
    tableau[row] = pivot_row

  def _complement(self, tableau, col):
    """Substitute z = upper - z' for column col in every row."""
    tableau[:, -1] -= self._upper[col] * tableau[:, col]
    tableau[:, col] *= -1.0
    self._flipped[col] = not self._flipped[col]

  def _entering(self, costs, bland):
    candidates = np.nonzero(costs < -self.pivot_tol)[0]
    if candidates.size == 0:
      return -1
    if bland:
      return int(candidates[0])
    # argmin keeps the lowest index among equal reduced costs.
    return int(np.argmin(costs))

  def _leaving(self, tableau, basis, col):
    """Ratio test. Returns (row, step, at_upper); row -1 means a bound flip."""
    m = len(basis)
    column = tableau[:m, col]
    rhs = tableau[:m, -1]
    upper = self._upper[basis]
    step = self._upper[col]
    down = column > self.pivot_tol
    up = (column < -self.pivot_tol) & np.isfinite(upper)
    ratios = np.full(m, np.inf)
    ratios[down] = np.maximum(rhs[down], 0.0) / column[down]
    ratios[up] = np.maximum(upper[up] - rhs[up], 0.0) / -column[up]
    best = ratios.min() if m else np.inf
    if step <= best:
      return -1, step, False
    ties = np.nonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))[0]
    row = int(min(ties, key=lambda r: basis[r]))
    return row, best, bool(up[row] and not down[row])

  def _run(self, tableau, basis, num_cols, phase):
    m = len(basis)
    basis_array = np.asarray(basis)
    # Columns whose range is a single point never enter.
    fixed = self._upper[:num_cols] <= self.pivot_tol
    degenerate = 0
    while True:
      self._dump(phase, tableau, basis)
      bland = degenerate >= self._stall
      costs = np.where(fixed, 0.0, tableau[m, :num_cols])
      col = self._entering(costs, bland)
      if col < 0:
        return LpStatus.OPTIMAL
      row, step, at_upper = self._leaving(tableau, basis_array, col)
      if not np.isfinite(step):
        return LpStatus.UNBOUNDED
      self.iterations += 1
      if bland:
        self.bland_iterations += 1
      if self.iterations > self._limit:
        raise base.IterationLimit(
            "Simplex exceeded {} iterations".format(self._limit))
      degenerate = degenerate + 1 if step <= self.pivot_tol else 0
      if row < 0:
        self._complement(tableau, col)
        continue
      leaving = basis[row]
      self._pivot(tableau, row, col)
      basis[row] = col
      basis_array[row] = col
      if at_upper:
        self._complement(tableau, leaving)

  def _canonical(self, split):
    """All constraints as a.z <= b rows; EQ becomes a pair of inequalities."""
    a, relations, b = split.matrix_form()
    rows, rhs = [], []
    for i, relation in enumerate(relations):
      if relation in (Relation.LE, Relation.EQ):
        rows.append(a[i])
        rhs.append(b[i])
      if relation in (Relation.GE, Relation.EQ):
        rows.append(-a[i])
        rhs.append(-b[i])
    if not rows:
      return np.zeros((0, split.num_vars)), np.zeros(0)
    return np.vstack(rows), np.array(rhs)

  def _box_only(self, lp, split, cost, upper):
    """Without constraint rows every variable sits at the cheaper bound."""
    descending = cost < -self.pivot_tol
    if np.any(descending & ~np.isfinite(upper)):
      return LpSolution(LpStatus.UNBOUNDED, iterations=0)
    z = np.where(descending, upper, 0.0)
    return self._finish(lp, split, z)

  def solve(self, lp):
    """Solve lp and return an LpSolution.

    Args:
      lp: a LinearProgram.

    Returns:
      An LpSolution whose z is expressed in the coordinates of lp.

    Raises:
      IterationLimit: the pivot budget was exhausted.
      SolverFailure: the optimum failed the re-verification against lp.
    """
    self.iterations = 0
    self.bland_iterations = 0
    split = free_var_split(lp)
    a, b = self._canonical(split)
    m, n = a.shape
    self._limit = self.max_iters
    if self._limit is None:
      self._limit = 10 * (m + n)
    self._stall = self.stall_limit
    if self._stall is None:
      self._stall = max(50, m)
    cost = split.objective

    if m == 0:
      return self._box_only(lp, split, cost, split.upper_bounds)

    negative = b < 0
    num_art = int(np.sum(negative))
    width = n + m + num_art
    self._upper = np.concatenate([split.upper_bounds,
                                  np.full(m + num_art, np.inf)])
    self._flipped = np.zeros(width, dtype=bool)
    tableau = np.zeros((m + 1, width + 1))
    basis = []
    art = n + m
    for i in range(m):
      if negative[i]:
        tableau[i, :n] = -a[i]
        tableau[i, n + i] = -1.0
        tableau[i, art] = 1.0
        tableau[i, -1] = -b[i]
        basis.append(art)
        art += 1
      else:
        tableau[i, :n] = a[i]
        tableau[i, n + i] = 1.0
        tableau[i, -1] = b[i]
        basis.append(n + i)

    if num_art:
      # Phase 1: minimize the sum of the artificial variables.
      tableau[m, n + m:width] = 1.0
      for i in range(m):
        if basis[i] >= n + m:
          tableau[m] -= tableau[i]
      self._run(tableau, basis, width, "phase1")
      infeasibility = -tableau[m, -1]
      logging.debug("Phase 1 finished after %d iterations, infeasibility %g",
                    self.iterations, infeasibility)
      if infeasibility > self.feas_tol:
        return LpSolution(LpStatus.INFEASIBLE, iterations=self.iterations)
      tableau, basis = self._drop_artificials(tableau, basis, n + m)
      self._upper = self._upper[:n + m]
      self._flipped = self._flipped[:n + m]

    rows = len(basis)
    full_cost = np.zeros(n + m)
    full_cost[:n] = cost
    signs = np.where(self._flipped, -1.0, 1.0)
    tableau[rows, :] = 0.0
    tableau[rows, :n + m] = full_cost * signs
    flipped = np.nonzero(self._flipped)[0]
    tableau[rows, -1] = -float(np.dot(full_cost[flipped],
                                      self._upper[flipped]))
    for i in range(rows):
      coefficient = tableau[rows, basis[i]]
      if coefficient != 0.0:
        tableau[rows] -= coefficient * tableau[i]
    status = self._run(tableau, basis, n + m, "phase2")
    if status == LpStatus.UNBOUNDED:
      return LpSolution(LpStatus.UNBOUNDED, iterations=self.iterations)

    values = np.zeros(n + m)
    for i in range(rows):
      values[basis[i]] = tableau[i, -1]
    values = np.where(self._flipped, self._upper - values, values)
    z = np.clip(values[:n], 0.0, self._upper[:n])
    return self._finish(lp, split, z)

  def _drop_artificials(self, tableau, basis, first_artificial):
    """Pivot artificials out of the basis, drop redundant rows and columns."""
    keep_rows = []
    for i in range(len(basis)):
      if basis[i] < first_artificial:
        keep_rows.append(i)
        continue
      candidates = np.nonzero(
          np.abs(tableau[i, :first_artificial]) > self.pivot_tol)[0]
      if candidates.size == 0:
        logging.debug("Dropping redundant constraint row %d", i)
        continue
      self._pivot(tableau, i, int(candidates[0]))
      basis[i] = int(candidates[0])
      keep_rows.append(i)
    keep_rows.append(tableau.shape[0] - 1)
    columns = list(range(first_artificial)) + [tableau.shape[1] - 1]
    reduced = tableau[np.ix_(keep_rows, columns)].copy()
    return reduced, [basis[i] for i in keep_rows[:-1]]

  def _finish(self, lp, split, z):
    original = split.recover(z)
    violation = lp.max_violation(original)
    if violation > self.feas_tol:
      raise base.SolverFailure(
          "Simplex optimum violates the program by {:.3g}".format(violation))
    value = float(np.dot(lp.objective, original))
    return LpSolution(LpStatus.OPTIMAL, original, value, self.iterations)


def solve(lp, feas_tol=1e-7, pivot_tol=1e-9, max_iters=None, stall_limit=None,
          debug=False):
  """Solve lp with a fresh SimplexSolver; see SimplexSolver.solve."""
  solver = SimplexSolver(feas_tol=feas_tol, pivot_tol=pivot_tol,
                         max_iters=max_iters, stall_limit=stall_limit,
                         debug=debug)
  return solver.solve(lp)
