#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np

from mhpatchcore.util import squared_distances, squared_distances_to, min_squared_distances, unique_row_indices

def test_squared_distances_match_brute_force():
  rng = np.random.default_rng(0)
  q = rng.standard_normal((7, 5))
  p = rng.standard_normal((11, 5))
  expected = np.array([ [ float(np.sum((a - b) ** 2)) for b in p ] for a in q ])
  assert np.allclose(squared_distances(q, p), expected, rtol=1e-12, atol=0.0)
  assert np.allclose(squared_distances_to(p, q[0]), expected[0], rtol=1e-12, atol=0.0)
  assert np.allclose(min_squared_distances(q, p), expected.min(axis=1), rtol=1e-12, atol=0.0)

def test_rows_do_not_depend_on_batching():
  rng = np.random.default_rng(1)
  q = 1e3 * rng.standard_normal((40, 9))
  p = 1e3 * rng.standard_normal((25, 9))
  full = squared_distances(q, p)
  for i in range(q.shape[0]):
    assert np.array_equal(squared_distances(q[i:i + 1], p)[0], full[i])
    assert np.array_equal(squared_distances_to(p, q[i]), full[i])

def test_identical_vectors_are_exactly_zero_apart():
  rng = np.random.default_rng(2)
  p = 1e6 * rng.standard_normal((30, 6))
  d = squared_distances(p, p)
  assert np.all(np.diag(d) == 0.0)
  assert np.all(min_squared_distances(p, p) == 0.0)

def test_empty_inputs():
  assert squared_distances(np.zeros((0, 3)), np.ones((4, 3))).shape == (0, 4)
  assert squared_distances(np.ones((2, 3)), np.zeros((0, 3))).shape == (2, 0)
  assert min_squared_distances(np.zeros((0, 3)), np.ones((4, 3))).shape == (0,)

def test_unique_rows_keep_first_occurrence():
  x = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [3.0, 3.0], [0.0, 0.0]])
  assert unique_row_indices(x).tolist() == [0, 1, 3]
