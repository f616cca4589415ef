"""Unit test for linear_attack.py."""

import csv
import itertools
import os

from absl.testing import absltest
from absl.testing import parameterized
import numpy as np
from polyattack import base
from polyattack import linear_attack
from polyattack.linalg import Norm
from polyattack.linear_attack import AttackSpec
from polyattack.linear_attack import AttackStatus
from polyattack.linear_models import LinearClassifier


def _clfs(*weights_and_biases):
  return [LinearClassifier(w, b, "c%d" % i)
          for i, (w, b) in enumerate(weights_and_biases)]


class AttackSpecTest(absltest.TestCase):

  def testOverlapIsInvalid(self):
    with self.assertRaises(base.InvalidSpec):
      AttackSpec([0, 1], [1])

  def testCostsMustBePositive(self):
    with self.assertRaises(base.InvalidSpec):
      AttackSpec([0], costs=[1.0, 0.0])

  def testMarginsMustNotBeNegative(self):
    with self.assertRaises(base.InvalidSpec):
      AttackSpec([0], attack_margin=-1.0)

  def testBoxMode(self):
    self.assertEqual("free", AttackSpec([0]).box_mode)
    self.assertEqual("box", AttackSpec([0], box=(0.0, 1.0)).box_mode)

  def testEmptyMutableSetIsUsageError(self):
    with self.assertRaises(base.UsageError):
      AttackSpec([0], mutable_features=[])

  def testMutableIndexOutOfRange(self):
    with self.assertRaises(base.InvalidSpec):
      AttackSpec([0], mutable_features=[5]).mutable(3)


class L1AttackTest(absltest.TestCase):

  def testAttackOneProtectOther(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0))
    spec = AttackSpec([0], [1], attack_margin=0.0, protect_margin=0.0)
    result = linear_attack.attack_l1([1.0, 1.0], [1, 1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    np.testing.assert_allclose([-1.0, 0.0], result.delta, atol=1e-6)
    self.assertAlmostEqual(1.0, result.cost_value, places=6)

  def testFeasibleAtOriginCostsNothing(self):
    clfs = _clfs(([-1.0, 0.0], 0.0), ([0.0, 1.0], 0.0))
    result = linear_attack.attack_l1([1.0, 1.0], [1, 1], clfs,
                                     AttackSpec([0], [1]))
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    np.testing.assert_allclose([0.0, 0.0], result.delta, atol=1e-12)
    self.assertAlmostEqual(0.0, result.cost_value, places=12)

  def testCheapCoordinateWins(self):
    clfs = _clfs(([1.0, 1.0], 0.0))
    spec = AttackSpec([0], costs=[10.0, 1.0])
    result = linear_attack.attack_l1([0.6, 0.6], [1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertAlmostEqual(0.0, result.delta[0], places=9)
    self.assertAlmostEqual(-1.2001, result.delta[1], places=6)

  def testMutableFeaturesRestrictTheSupport(self):
    clfs = _clfs(([1.0, 1.0], 0.0))
    spec = AttackSpec([0], mutable_features=[0])
    result = linear_attack.attack_l1([0.6, 0.6], [1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertAlmostEqual(-1.2001, result.delta[0], places=6)
    self.assertEqual(0.0, result.delta[1])

  def testPositiveOnlyLeavesNegativesAlone(self):
    clfs = _clfs(([-1.0, 0.0], 0.0))
    relaxed = linear_attack.attack_l1([1.0, 1.0], [-1], clfs,
                                      AttackSpec([0], positive_only=True))
    np.testing.assert_allclose([0.0, 0.0], relaxed.delta, atol=1e-12)
    forced = linear_attack.attack_l1([1.0, 1.0], [-1], clfs, AttackSpec([0]))
    self.assertEqual(AttackStatus.SUCCESS, forced.status)
    self.assertAlmostEqual(-1.0001, forced.delta[0], places=6)

  def testBoxKeepsPointInside(self):
    clfs = _clfs(([1.0, 0.0], -0.2))
    result = linear_attack.attack_l1([0.5, 0.5], [1], clfs,
                                     AttackSpec([0], box=(0.0, 1.0)))
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertEqual("box", result.box_mode)
    self.assertAlmostEqual(-0.3001, result.delta[0], places=6)

  def testBoxCanMakeTheAttackInfeasible(self):
    clfs = _clfs(([1.0, 0.0], 0.5))
    boxed = linear_attack.attack_l1([0.5, 0.5], [1], clfs,
                                    AttackSpec([0], box=(0.0, 1.0)))
    self.assertEqual(AttackStatus.INFEASIBLE, boxed.status)
    np.testing.assert_array_equal([0.0, 0.0], boxed.delta)
    free = linear_attack.attack_l1([0.5, 0.5], [1], clfs, AttackSpec([0]))
    self.assertEqual(AttackStatus.SUCCESS, free.status)


class LinfAttackTest(absltest.TestCase):

  def testAttackOneProtectOther(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0))
    spec = AttackSpec([0], [1], norm=Norm.LINF, attack_margin=0.0,
                      protect_margin=0.0)
    result = linear_attack.attack_linf([1.0, 1.0], [1, 1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertAlmostEqual(-1.0, result.delta[0], places=6)
    self.assertAlmostEqual(1.0, result.cost_value, places=6)

  def testTwoAttackedShareTheBudget(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0))
    spec = AttackSpec([0, 1], norm=Norm.LINF, attack_margin=0.0)
    result = linear_attack.attack_linf([1.0, 1.0], [1, 1], clfs, spec)
    np.testing.assert_allclose([-1.0, -1.0], result.delta, atol=1e-6)
    self.assertAlmostEqual(1.0, result.cost_value, places=6)

  def testUnreachableProtectionMarginIsInfeasible(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0))
    spec = AttackSpec([0], [1], norm=Norm.LINF, protect_margin=5.0,
                      box=(0.0, 1.0))
    result = linear_attack.attack_linf([0.5, 0.5], [-1, 1], clfs, spec)
    self.assertEqual(AttackStatus.INFEASIBLE, result.status)
    self.assertFalse(result.success)


class L2AttackTest(absltest.TestCase):

  def testProjectionOntoHalfspace(self):
    clfs = _clfs(([1.0, 0.0], 0.0))
    spec = AttackSpec([0], norm=Norm.L2)
    result = linear_attack.attack_l2([1.0, 1.0], [1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    np.testing.assert_allclose([-1.0001, 0.0], result.delta, atol=1e-6)

  def testFeasibleAtOrigin(self):
    clfs = _clfs(([-1.0, 0.0], 0.0))
    result = linear_attack.attack_l2([1.0, 1.0], [1], clfs,
                                     AttackSpec([0], norm=Norm.L2))
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    np.testing.assert_array_equal([0.0, 0.0], result.delta)

  def testActiveProtectionMatchesGridSearch(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([1.0, 1.0], -1.5))
    spec = AttackSpec([0], [1], norm=Norm.L2)
    x = np.array([1.0, 1.0])
    result = linear_attack.attack_l2(x, [1, 1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)

    grid = np.arange(-2.0, 1.0 + 1e-9, 1e-3)
    d1, d2 = np.meshgrid(grid, grid, indexing="ij")
    attacked = (x[0] + d1) <= -spec.attack_margin
    protected = (x[0] + d1) + (x[1] + d2) - 1.5 >= spec.protect_margin
    cost = np.where(attacked & protected, d1 ** 2 + d2 ** 2, np.inf)
    best = np.unravel_index(np.argmin(cost), cost.shape)
    np.testing.assert_allclose([d1[best], d2[best]], result.delta, atol=2e-3)
    self.assertGreater(result.delta[1], 0.4)

  def testWeightedCostsPreferCheapFeature(self):
    clfs = _clfs(([1.0, 1.0], 0.0))
    spec = AttackSpec([0], norm=Norm.L2, costs=[10.0, 1.0])
    result = linear_attack.attack_l2([0.6, 0.6], [1], clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertLess(abs(result.delta[0]), abs(result.delta[1]) / 50.0)

  def testContradictionIsInfeasible(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([1.0, 0.0], 0.0))
    spec = AttackSpec([0], [1], norm=Norm.L2)
    result = linear_attack.attack_l2([0.5, 0.5], [1, 1], clfs, spec)
    self.assertEqual(AttackStatus.INFEASIBLE, result.status)
    np.testing.assert_array_equal([0.0, 0.0], result.delta)


class VerifyTest(absltest.TestCase):

  def testSlacksAreAffine(self):
    rng = np.random.default_rng(3)
    clfs = _clfs((rng.normal(size=3), 0.3), (rng.normal(size=3), -0.2))
    x = rng.uniform(size=3)
    delta = rng.normal(size=3)
    y = [1, -1]
    slacks = linear_attack.verify(x, delta, y, clfs)
    for k, clf in enumerate(clfs):
      expected = y[k] * (float(np.dot(clf.w, x + delta)) + clf.b)
      self.assertAlmostEqual(expected, slacks[k], delta=1e-12)

  def testCorrectInstanceHasPositiveSlacks(self):
    clfs = _clfs(([1.0, 0.0], 0.0), ([0.0, -1.0], 0.0))
    slacks = linear_attack.verify([1.0, 1.0], [0.0, 0.0], [1, -1], clfs)
    self.assertTrue(np.all(slacks > 0))

  def testBoundaryCountsAsSatisfied(self):
    spec = AttackSpec([0], [1], attack_margin=0.5, protect_margin=0.25)
    self.assertTrue(linear_attack.constraints_hold([-0.5, 0.25], [1, 1], spec))
    self.assertFalse(linear_attack.constraints_hold([-0.49, 0.25], [1, 1],
                                                    spec))


class PropertyTest(parameterized.TestCase):

  def _random_instances(self, seed, count=15):
    rng = np.random.default_rng(seed)
    for _ in range(count):
      clfs = _clfs(*[(rng.normal(size=3), rng.normal(scale=0.3))
                     for _ in range(3)])
      x = rng.uniform(size=3)
      y = [clf.predict(x) for clf in clfs]
      yield x, y, clfs

  def testLinfCostNeverExceedsL1Cost(self):
    compared = 0
    for x, y, clfs in self._random_instances(11):
      l1 = linear_attack.attack(x, y, clfs, AttackSpec([0], [1]))
      linf = linear_attack.attack(x, y, clfs,
                                  AttackSpec([0], [1], norm=Norm.LINF))
      if l1.success and linf.success:
        self.assertLessEqual(linf.cost_value, l1.cost_value + 1e-6)
        compared += 1
    self.assertGreater(compared, 0)

  @parameterized.parameters(Norm.L1, Norm.LINF)
  def testProtectingMoreNeverCostsLess(self, norm):
    compared = 0
    for x, y, clfs in self._random_instances(12):
      small = linear_attack.attack(x, y, clfs, AttackSpec([0], [1], norm=norm))
      large = linear_attack.attack(x, y, clfs,
                                   AttackSpec([0], [1, 2], norm=norm))
      if small.success and large.success:
        self.assertGreaterEqual(large.cost_value, small.cost_value - 1e-6)
        compared += 1
    self.assertGreater(compared, 0)

  def testL1MatchesVertexEnumeration(self):
    # In 2-D the L1 optimum lies on a vertex of the feasible polygon or at a
    # constraint line crossing an axis through x.
    rng = np.random.default_rng(5)
    for _ in range(20):
      clfs = _clfs(*[(rng.normal(size=2), rng.normal(scale=0.3))
                     for _ in range(2)])
      x = rng.uniform(size=2)
      y = [clf.predict(x) for clf in clfs]
      spec = AttackSpec([0], [1], attack_margin=0.0, protect_margin=0.0)
      result = linear_attack.attack_l1(x, y, clfs, spec)
      lines = [(y[0] * clfs[0].w, -y[0] * clfs[0].b - y[0] * clfs[0].w.dot(x)),
               (y[1] * clfs[1].w, -y[1] * clfs[1].b - y[1] * clfs[1].w.dot(x)),
               (np.array([1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0)]
      best = None
      for (a1, c1), (a2, c2) in itertools.combinations(lines, 2):
        matrix = np.vstack([a1, a2])
        if abs(np.linalg.det(matrix)) < 1e-12:
          continue
        delta = np.linalg.solve(matrix, [c1, c2])
        slacks = linear_attack.verify(x, delta, y, clfs)
        if slacks[0] <= 1e-9 and slacks[1] >= -1e-9:
          cost = float(np.sum(np.abs(delta)))
          best = cost if best is None else min(best, cost)
      if best is None:
        continue
      self.assertTrue(result.success)
      self.assertAlmostEqual(best, result.cost_value, delta=1e-5)

  def testLinfMatchesVertexEnumeration(self):
    # Vertices of {a.delta <= c, |delta_i| <= t} in (delta_1, delta_2, t).
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(20):
      clfs = _clfs(*[(rng.normal(size=2), rng.normal(scale=0.3))
                     for _ in range(2)])
      x = rng.uniform(size=2)
      y = [clf.predict(x) for clf in clfs]
      spec = AttackSpec([0], [1], norm=Norm.LINF, attack_margin=0.0,
                        protect_margin=0.0)
      result = linear_attack.attack_linf(x, y, clfs, spec)
      rows = [np.append(y[0] * clfs[0].w, 0.0),
              np.append(-y[1] * clfs[1].w, 0.0),
              np.array([1.0, 0.0, -1.0]), np.array([-1.0, 0.0, -1.0]),
              np.array([0.0, 1.0, -1.0]), np.array([0.0, -1.0, -1.0])]
      rhs = [-y[0] * (clfs[0].w.dot(x) + clfs[0].b),
             y[1] * (clfs[1].w.dot(x) + clfs[1].b), 0.0, 0.0, 0.0, 0.0]
      matrix, rhs = np.vstack(rows), np.array(rhs)
      best = None
      for active in itertools.combinations(range(6), 3):
        sub = matrix[list(active)]
        if abs(np.linalg.det(sub)) < 1e-12:
          continue
        point = np.linalg.solve(sub, rhs[list(active)])
        if np.all(matrix.dot(point) <= rhs + 1e-9):
          best = point[2] if best is None else min(best, point[2])
      if best is None:
        continue
      self.assertTrue(result.success)
      self.assertAlmostEqual(best, result.cost_value, delta=1e-5)
      checked += 1
    self.assertGreater(checked, 5)


class ImageScaleTest(absltest.TestCase):
  """784 features, the size of a flattened digit image."""

  def setUp(self):
    super(ImageScaleTest, self).setUp()
    rng = np.random.default_rng(0)
    self.d = 784
    self.x = rng.uniform(size=self.d)
    weights = rng.normal(size=(3, self.d)) / 28.0
    offsets = [0.5, 0.3, -0.3]
    self.clfs = _clfs(*[(w, offset - w.dot(self.x))
                        for w, offset in zip(weights, offsets)])
    self.y = [1, 1, -1]

  def testL1NeedsFewPivotsInsideTheBox(self):
    spec = AttackSpec([0], [1, 2], box=(0.0, 1.0))
    result = linear_attack.attack_l1(self.x, self.y, self.clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    self.assertLess(result.iterations, 300)
    point = self.x + result.delta
    self.assertTrue(np.all((point >= 0.0) & (point <= 1.0)))

  def testL1SingleConstraintOptimum(self):
    spec = AttackSpec([0])
    result = linear_attack.attack_l1(self.x, self.y, self.clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    w = self.clfs[0].w
    needed = 0.5 + spec.attack_margin + linear_attack.SOLVER_MARGIN_PAD
    self.assertAlmostEqual(needed / np.max(np.abs(w)), result.cost_value,
                           places=6)
    self.assertLessEqual(np.count_nonzero(result.delta), 1)

  def testLinfSingleConstraintOptimum(self):
    spec = AttackSpec([0], norm=Norm.LINF)
    result = linear_attack.attack_linf(self.x, self.y, self.clfs, spec)
    self.assertEqual(AttackStatus.SUCCESS, result.status)
    w = self.clfs[0].w
    needed = 0.5 + spec.attack_margin + linear_attack.SOLVER_MARGIN_PAD
    self.assertAlmostEqual(needed / np.sum(np.abs(w)), result.cost_value,
                           places=7)

  def testLinfInsideTheBoxNeverExceedsL1(self):
    l1 = linear_attack.attack_l1(self.x, self.y, self.clfs,
                                 AttackSpec([0], [1, 2], box=(0.0, 1.0)))
    linf = linear_attack.attack_linf(
        self.x, self.y, self.clfs,
        AttackSpec([0], [1, 2], norm=Norm.LINF, box=(0.0, 1.0)))
    self.assertEqual(AttackStatus.SUCCESS, linf.status)
    self.assertLessEqual(linf.cost_value, l1.cost_value + 1e-9)
    self.assertLessEqual(np.max(np.abs(linf.delta)), linf.cost_value + 1e-12)
    point = self.x + linf.delta
    self.assertTrue(np.all((point >= 0.0) & (point <= 1.0)))


class BatchTest(absltest.TestCase):

  def setUp(self):
    super(BatchTest, self).setUp()
    rng = np.random.default_rng(2)
    self.clfs = _clfs(([1.0, -1.0], 0.1), ([0.5, 1.0], -0.7))
    self.x = rng.uniform(size=(8, 2))
    self.y = np.array([[c.predict(row) for c in self.clfs] for row in self.x])

  def testThreadsKeepOrder(self):
    spec = AttackSpec([0], [1])
    serial = linear_attack.attack_batch(self.x, self.y, self.clfs, spec)
    threaded = linear_attack.attack_batch(self.x, self.y, self.clfs, spec,
                                          jobs=3)
    for a, b in zip(serial, threaded):
      self.assertEqual(a.status, b.status)
      np.testing.assert_array_equal(a.delta, b.delta)

  def testResultsCsv(self):
    results = linear_attack.attack_batch(self.x, self.y, self.clfs,
                                         AttackSpec([0], [1]))
    path = os.path.join(self.create_tempdir().full_path, "r.csv")
    linear_attack.write_results_csv(path, results, ["P", "Q"])
    with open(path) as f:
      rows = list(csv.reader(f))
    self.assertEqual(["instance_id", "status", "cost_value", "slack_P",
                      "slack_Q"], rows[0])
    self.assertLen(rows, 9)


if __name__ == "__main__":
  absltest.main()
