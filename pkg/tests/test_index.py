#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.bank import MemoryBank
from mhpatchcore.index import FlatIndex
from mhpatchcore.exceptions import EmptyBankError, DimensionMismatchError

def naive_scan(bank: np.ndarray, query: np.ndarray) -> tuple:
  d = [ float(sum((query[c] - row[c]) ** 2 for c in range(len(query)))) for row in bank ]
  order = sorted(range(len(d)), key=lambda i: (d[i], i))
  return np.array([ d[i] for i in order ]), np.array(order)

def test_build_sizes():
  assert FlatIndex.build(MemoryBank(np.ones((1, 3)), 'greedy_coreset', 1)).size == 1
  rng = np.random.default_rng(0)
  idx = FlatIndex.build(MemoryBank(rng.standard_normal((1000, 4)), 'greedy_coreset', 1000))
  assert idx.size == 1000
  assert idx.dim == 4
  with pytest.raises(EmptyBankError):
    FlatIndex(np.zeros((0, 3)))

def test_rebuild_is_deterministic():
  rng = np.random.default_rng(1)
  bank = rng.standard_normal((50, 5))
  q = rng.standard_normal((10, 5))
  d1, i1 = FlatIndex(bank).search_batch(q, 7)
  d2, i2 = FlatIndex(bank.copy()).search_batch(q, 7)
  assert np.array_equal(d1, d2)
  assert np.array_equal(i1, i2)

def test_search_cases():
  idx = FlatIndex([[0.0, 0.0], [3.0, 4.0]])
  d, ids = idx.search([0.0, 0.0], 2)
  assert d.tolist() == [0.0, 25.0]
  assert ids.tolist() == [0, 1]
  d, ids = idx.search([3.0, 4.0], 1)
  assert d.tolist() == [0.0]
  assert ids.tolist() == [1]
  d, ids = idx.search([0.0, 0.0], 5)
  assert len(d) == 2
  with pytest.raises(DimensionMismatchError):
    idx.search([1.0, 2.0, 3.0], 1)

def test_search_matches_naive_scan():
  rng = np.random.default_rng(2)
  bank = rng.standard_normal((30, 6))
  idx = FlatIndex(bank)
  for _ in range(10):
    q = rng.standard_normal(6)
    d, ids = idx.search(q, idx.size)
    nd, nids = naive_scan(bank, q)
    assert np.array_equal(ids, nids)
    assert np.allclose(d, nd, rtol=1e-12, atol=0.0)
    assert np.all(d >= 0.0)
    assert ids[0] == int(np.argmin(np.sqrt(np.sum((bank - q) ** 2, axis=1))))

def test_ties_go_to_lower_index():
  idx = FlatIndex([[1.0], [-1.0], [1.0]])
  d, ids = idx.search([0.0], 3)
  assert ids.tolist() == [0, 1, 2]
  d, ids = idx.search([0.0], 1)
  assert ids.tolist() == [0]

def test_search_batch_matches_search():
  rng = np.random.default_rng(3)
  idx = FlatIndex(rng.standard_normal((40, 3)))
  q = rng.standard_normal((128, 3))
  d, ids = idx.search_batch(q, 4)
  for r in range(q.shape[0]):
    dr, ir = idx.search(q[r], 4)
    assert np.array_equal(d[r], dr)
    assert np.array_equal(ids[r], ir)
  d1, i1 = idx.search_batch(q[:1], 4)
  assert np.array_equal(d1[0], idx.search(q[0], 4)[0])
  d0, i0 = idx.search_batch(np.zeros((0, 3)), 4)
  assert d0.shape == (0, 4) and i0.shape == (0, 4)

def test_neighbourhood():
  idx = FlatIndex([[0.0], [10.0], [1.0], [0.0], [5.0]])
  assert idx.neighbourhood(0, 3).tolist() == [0, 3, 2]
  assert idx.neighbourhood(1, 2).tolist() == [1, 4]
  assert idx.neighbourhood(4, 10).tolist()[0] == 4
  assert len(idx.neighbourhood(4, 10)) == 5
