# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Incrementally fitted linear reduction R(u) = W^T (u - u_bar).

The fit is a mini-batch incremental SVD: each batch is centred on its own mean
and stacked under the scaled previous components, together with one
mean-correction row, before the SVD is retaken and truncated to k_max
components.
"""

import logging

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .internal_types import Matrix, Vector
from .constants import RHO_TOLERANCE
from .exceptions import (
    InvalidDimensionError,
    EmptyBatchError,
    RankDeficientSeedError,
    UnfittedReducerError,
    InvalidConfigError,
  )
from .util import as_matrix, as_vector, rowwise_products

logger = logging.getLogger(__name__)

def _fix_signs(components: Matrix) -> Matrix:
  """Flip rows so the entry of largest magnitude in each is non-negative"""
  if components.shape[0] == 0:
    return components
  pivots = np.argmax(np.abs(components), axis=1)
  signs = np.sign(components[np.arange(components.shape[0]), pivots])
  signs[signs == 0] = 1.0
  return components * signs[:, None]

def select_dimension(explained_variance: npt.ArrayLike, rho: float) -> int:
  """Smallest q whose leading explained-variance fraction reaches rho.

  Fractions are compared with a 1e-12 tolerance. A spectrum with no variance
  at all retains a single component.
  """
  if not 0.0 < rho <= 1.0:
    raise InvalidConfigError(f"rho must be in (0, 1], got {rho}")
  nu = as_vector(explained_variance, what="explained variance")
  if nu.shape[0] == 0:
    raise UnfittedReducerError("No components to select from")
  total = float(nu.sum())
  if total <= 0.0:
    return 1
  fractions = np.cumsum(nu) / total
  hits = np.nonzero(fractions >= rho - RHO_TOLERANCE)[0]
  if hits.shape[0] == 0:
    return int(nu.shape[0])
  return int(hits[0]) + 1

class Reducer:
  """A finalized projection: W (d0 x k), u_bar and the retained spectrum"""
  _W: Matrix
  _Wt: Matrix
  _u_bar: Vector
  _explained_variance: Vector

  def __init__(self, W: npt.ArrayLike, u_bar: npt.ArrayLike, explained_variance: npt.ArrayLike):
    self._W = as_matrix(W, what="projection").copy()
    d0, k = self._W.shape
    if k < 1:
      raise InvalidDimensionError("Reducer must retain at least one component")
    self._u_bar = as_vector(u_bar, dim=d0, what="reducer mean").copy()
    self._explained_variance = as_vector(explained_variance, dim=k, what="explained variance").copy()
    self._Wt = np.ascontiguousarray(self._W.T)
    for a in (self._W, self._Wt, self._u_bar, self._explained_variance):
      a.flags.writeable = False

  @property
  def W(self) -> Matrix:
    return self._W

  @property
  def u_bar(self) -> Vector:
    return self._u_bar

  @property
  def explained_variance(self) -> Vector:
    return self._explained_variance

  @property
  def d0(self) -> int:
    return int(self._W.shape[0])

  @property
  def k(self) -> int:
    return int(self._W.shape[1])

  def transform_batch(self, batch: npt.ArrayLike) -> Matrix:
    rows = as_matrix(batch, cols=self.d0, what="descriptor batch")
    return rowwise_products(rows - self._u_bar[None, :], self._Wt)

  def transform(self, u: npt.ArrayLike) -> Vector:
    v = as_vector(u, dim=self.d0, what="descriptor")
    return self.transform_batch(v[None, :])[0]

class ReducerFit:
  """Running state of the incremental SVD.

  partial_fit() updates the state in place and returns it.
  """
  _d0: int
  _k_max: int
  _seen: int
  _mean: Vector
  _components: Matrix
  _singular_values: Vector
  _explained_variance: Vector
  _finalized: bool = False

  def __init__(self, d0: int, k_max: int):
    if d0 < 1:
      raise InvalidDimensionError(f"Descriptor dimension must be >= 1, got {d0}")
    if k_max < 1:
      raise InvalidDimensionError(f"k_max must be >= 1, got {k_max}")
    self._d0 = d0
    self._k_max = min(k_max, d0)
    self._seen = 0
    self._mean = np.zeros((d0,), dtype=np.float64)
    self._components = np.zeros((0, d0), dtype=np.float64)
    self._singular_values = np.zeros((0,), dtype=np.float64)
    self._explained_variance = np.zeros((0,), dtype=np.float64)

  @property
  def d0(self) -> int:
    return self._d0

  @property
  def k_max(self) -> int:
    return self._k_max

  @property
  def seen(self) -> int:
    return self._seen

  @property
  def mean(self) -> Vector:
    return self._mean

  @property
  def components(self) -> Matrix:
    return self._components

  @property
  def singular_values(self) -> Vector:
    return self._singular_values

  @property
  def explained_variance(self) -> Vector:
    return self._explained_variance

  @property
  def finalized(self) -> bool:
    return self._finalized

  def partial_fit(self, batch: npt.ArrayLike) -> 'ReducerFit':
    x = as_matrix(batch, cols=self._d0, what="descriptor batch")
    n_b = x.shape[0]
    if n_b == 0:
      raise EmptyBatchError("Cannot fit the reducer on an empty batch")
    if self._seen == 0 and n_b < self._k_max:
      raise RankDeficientSeedError(
          f"First reducer batch has {n_b} rows; at least k_max={self._k_max} are required")
    n_total = self._seen + n_b
    batch_mean = x.mean(axis=0)
    centred = x - batch_mean[None, :]
    if self._seen == 0:
      stacked = centred
      new_mean = batch_mean
    else:
      correction = np.sqrt((self._seen / n_total) * n_b) * (self._mean - batch_mean)
      stacked = np.vstack((self._singular_values[:, None] * self._components, centred, correction[None, :]))
      new_mean = self._mean + (n_b / n_total) * (batch_mean - self._mean)
    _, s, vt = scipy.linalg.svd(stacked, full_matrices=False, check_finite=False)
    keep = min(self._k_max, vt.shape[0])
    self._components = np.ascontiguousarray(_fix_signs(vt[:keep]))
    self._singular_values = np.ascontiguousarray(s[:keep])
    self._explained_variance = (self._singular_values ** 2) / max(n_total - 1, 1)
    self._mean = new_mean
    self._seen = n_total
    logger.debug("Reducer partial fit: batch=%d seen=%d components=%d", n_b, n_total, keep)
    return self

  def finalize(self, rho: float) -> Reducer:
    """Keep the smallest leading set of components explaining a fraction rho of the variance"""
    if self._seen < 2:
      raise UnfittedReducerError(f"Reducer has seen {self._seen} samples; at least 2 are required")
    k = select_dimension(self._explained_variance, rho)
    self._finalized = True
    logger.info("Reducer finalized: d0=%d k=%d of %d tracked components", self._d0, k, self._components.shape[0])
    return Reducer(self._components[:k].T, self._mean, self._explained_variance[:k])
