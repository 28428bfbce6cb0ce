#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.moments import init, update_batch, merge, finalize_covariance, batch_summary
from mhpatchcore.exceptions import (
    InvalidDimensionError,
    InsufficientSamplesError,
    DimensionMismatchError,
    EmptyBatchError,
  )

def two_pass(x: np.ndarray):
  mu = x.mean(axis=0)
  c = x - mu
  return x.shape[0], mu, c.T @ c

def test_init_zero_state():
  s = init(3)
  assert s.n == 0
  assert np.array_equal(s.mu, np.zeros(3))
  assert np.array_equal(s.M2, np.zeros((3, 3)))
  assert init(1).dim == 1
  with pytest.raises(InvalidDimensionError):
    init(0)

def test_single_point_has_zero_scatter():
  s = update_batch(init(2), [[1.0, 2.0]])
  assert s.n == 1
  assert np.array_equal(s.mu, [1.0, 2.0])
  assert np.array_equal(s.M2, np.zeros((2, 2)))

def test_two_batches_match_direct_covariance():
  s = update_batch(init(2), [[0.0, 0.0], [2.0, 0.0]])
  s = update_batch(s, [[0.0, 2.0], [2.0, 2.0]])
  assert s.n == 4
  assert np.allclose(s.mu, [1.0, 1.0], atol=1e-15)
  assert np.allclose(s.M2, [[4.0, 0.0], [0.0, 4.0]], atol=1e-12)
  assert np.allclose(finalize_covariance(s), [[4 / 3, 0.0], [0.0, 4 / 3]], atol=1e-12)

def test_any_partition_matches_single_batch():
  rng = np.random.default_rng(1)
  x = rng.standard_normal((100, 8))
  n, mu, m2 = two_pass(x)
  for cuts in ([10, 50], [1, 2], [33, 99], [60, 61]):
    s = init(8)
    for part in np.split(x, cuts):
      s = update_batch(s, part)
    assert s.n == n
    assert np.max(np.abs(s.mu - mu)) < 1e-9
    assert np.max(np.abs(s.M2 - m2)) < 1e-9

def test_merge_identity_and_symmetry():
  rng = np.random.default_rng(2)
  a = batch_summary(rng.standard_normal((20, 5)))
  b = batch_summary(rng.standard_normal((30, 5)) + 3.0)
  same = merge(a, init(5))
  assert same.n == a.n
  assert np.array_equal(same.mu, a.mu)
  assert np.array_equal(same.M2, a.M2)
  ab = merge(a, b)
  ba = merge(b, a)
  assert ab.n == ba.n
  assert np.max(np.abs(ab.mu - ba.mu)) < 1e-10
  assert np.max(np.abs(ab.M2 - ba.M2)) < 1e-10

def test_merge_is_associative_and_matches_concatenation():
  rng = np.random.default_rng(3)
  parts = [ rng.standard_normal((n, 4)) * 2.0 + 1.0 for n in (7, 13, 21) ]
  a, b, c = (batch_summary(p) for p in parts)
  left = merge(merge(a, b), c)
  right = merge(a, merge(b, c))
  assert np.max(np.abs(left.M2 - right.M2)) < 1e-9
  assert np.max(np.abs(left.mu - right.mu)) < 1e-9
  n, mu, m2 = two_pass(np.vstack(parts[:2]))
  ab = merge(a, b)
  assert ab.n == n
  assert np.max(np.abs(ab.M2 - m2)) < 1e-9
  assert np.max(np.abs(ab.mu - mu)) < 1e-9

def test_m2_stays_symmetric_and_psd():
  rng = np.random.default_rng(4)
  s = init(6)
  for _ in range(10):
    s = update_batch(s, rng.standard_normal((17, 6)))
  assert np.array_equal(s.M2, s.M2.T)
  assert np.linalg.eigvalsh(s.M2).min() > -1e-9

def test_finalize_needs_two_samples():
  with pytest.raises(InsufficientSamplesError):
    finalize_covariance(update_batch(init(2), [[1.0, 2.0]]))

def test_streamed_gaussian_matches_two_pass_covariance():
  rng = np.random.default_rng(5)
  x = rng.standard_normal((1000, 16))
  s = init(16)
  for part in np.array_split(x, 7):
    s = update_batch(s, part)
  oracle = np.cov(x, rowvar=False)
  assert np.max(np.abs(finalize_covariance(s) - oracle)) < 1e-9

def test_large_mean_has_no_cancellation():
  rng = np.random.default_rng(6)
  x = 1e6 + rng.standard_normal((10_000, 4))
  s = init(4)
  for part in np.array_split(x, 10):
    s = update_batch(s, part)
  oracle = np.diag(np.cov(x, rowvar=False))
  got = np.diag(finalize_covariance(s))
  assert np.max(np.abs(got - oracle) / oracle) < 1e-4

def test_update_rejects_bad_batches():
  with pytest.raises(DimensionMismatchError):
    update_batch(init(3), np.zeros((2, 2)))
  with pytest.raises(EmptyBatchError):
    update_batch(init(3), np.zeros((0, 3)))
  with pytest.raises(DimensionMismatchError):
    merge(init(2), init(3))
