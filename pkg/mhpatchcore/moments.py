# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Streaming mean/covariance accumulation with an associative merge.

A MomentState is the triple (n, mu, M2), where M2 is the unnormalised second
central moment matrix. Batches are summarised with a two-pass scheme and folded
into the running state with the parallel Welford combine rule, so any partition
of a dataset into batches produces the same state up to round-off. Independent
states (e.g., per worker) are combined with merge().

All accumulation is float64 regardless of the input precision.
"""

from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from .internal_types import Matrix, Vector
from .exceptions import (
    InvalidDimensionError,
    DimensionMismatchError,
    EmptyBatchError,
    InsufficientSamplesError,
  )
from .util import as_matrix

class MomentState(NamedTuple):
  n: int
  mu: Vector
  M2: Matrix

  @property
  def dim(self) -> int:
    return int(self.mu.shape[0])

def init(k: int) -> MomentState:
  """The zero state for k-dimensional samples"""
  if k < 1:
    raise InvalidDimensionError(f"Moment dimension must be >= 1, got {k}")
  return MomentState(0, np.zeros((k,), dtype=np.float64), np.zeros((k, k), dtype=np.float64))

def _symmetrize(m: Matrix) -> Matrix:
  return (m + m.T) / 2.0

def batch_summary(batch: npt.ArrayLike) -> MomentState:
  """Two-pass (n_b, mean, M2) summary of a single in-memory batch"""
  x = as_matrix(batch)
  n_b = x.shape[0]
  if n_b < 1:
    raise EmptyBatchError("Cannot summarise an empty batch")
  mu_b = x.mean(axis=0)
  centred = x - mu_b[None, :]
  m2_b = _symmetrize(centred.T @ centred)
  return MomentState(n_b, mu_b, m2_b)

def merge(a: MomentState, b: MomentState) -> MomentState:
  """Combine two states as if their samples had been accumulated together"""
  if a.dim != b.dim:
    raise DimensionMismatchError(a.dim, b.dim, what="moment state dimension")
  if b.n == 0:
    return a
  if a.n == 0:
    return b
  n = a.n + b.n
  delta = b.mu - a.mu
  mu = a.mu + (b.n / n) * delta
  m2 = a.M2 + b.M2 + (a.n * b.n / n) * np.outer(delta, delta)
  return MomentState(n, mu, _symmetrize(m2))

def update_batch(state: MomentState, batch: npt.ArrayLike) -> MomentState:
  """Fold a mini-batch of reduced vectors into the running state"""
  x = as_matrix(batch)
  if x.shape[0] < 1:
    raise EmptyBatchError("Cannot update moments with an empty batch")
  if x.shape[1] != state.dim:
    raise DimensionMismatchError(state.dim, x.shape[1], what="batch column count")
  return merge(state, batch_summary(x))

def finalize_covariance(state: MomentState) -> Matrix:
  """The unbiased empirical covariance M2/(n-1)"""
  if state.n < 2:
    raise InsufficientSamplesError(f"At least 2 samples are required for a covariance estimate, got {state.n}")
  return _symmetrize(state.M2 / (state.n - 1))
