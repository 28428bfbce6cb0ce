# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Miscellaneous utility functions"""

from typing import Any, Optional

import hashlib

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist  # type: ignore[import]

from .internal_types import Matrix, Vector
from .constants import DISTANCE_CHUNK_ELEMENTS
from .exceptions import DimensionMismatchError, InvalidDimensionError

def full_type(obj: Any) -> str:
  t = type(obj)
  module = t.__module__
  if module is None or module == 'builtins':
    return t.__qualname__
  return f"{module}.{t.__qualname__}"

def as_matrix(x: npt.ArrayLike, cols: Optional[int]=None, what: str="batch") -> Matrix:
  """Convert to a C-contiguous float64 matrix, optionally checking the column count.

  A 1-D input is treated as a single row.
  """
  result = np.ascontiguousarray(x, dtype=np.float64)
  if result.ndim == 1:
    result = result.reshape(1, -1)
  if result.ndim != 2:
    raise InvalidDimensionError(f"{what} must be a 2-D matrix, got {result.ndim} dimensions")
  if cols is not None and result.shape[1] != cols:
    raise DimensionMismatchError(cols, result.shape[1], what=f"{what} column count")
  return result

def as_vector(x: npt.ArrayLike, dim: Optional[int]=None, what: str="vector") -> Vector:
  result = np.ascontiguousarray(x, dtype=np.float64)
  if result.ndim != 1:
    raise InvalidDimensionError(f"{what} must be 1-D, got {result.ndim} dimensions")
  if dim is not None and result.shape[0] != dim:
    raise DimensionMismatchError(dim, result.shape[0], what=f"{what} length")
  return result

def unique_row_indices(x: Matrix) -> npt.NDArray[np.intp]:
  """Indices of the first occurrence of each distinct row, in input order.

  Rows are compared by exact bit pattern.
  """
  if x.shape[0] == 0:
    return np.zeros((0,), dtype=np.intp)
  contiguous = np.ascontiguousarray(x)
  keys = contiguous.view(np.dtype((np.void, contiguous.dtype.itemsize * contiguous.shape[1]))).ravel()
  _, first = np.unique(keys, return_index=True)
  return np.sort(first)

def squared_distances(queries: Matrix, points: Matrix) -> Matrix:
  """All squared Euclidean distances between query rows and point rows.

  Each entry is summed over its own pair of rows only, so a row of the result is
  bit-identical however the queries are batched, and bit-identical vectors are
  exactly 0 apart.
  """
  n_q = queries.shape[0]
  n_p = points.shape[0]
  if n_q == 0 or n_p == 0:
    return np.zeros((n_q, n_p), dtype=np.float64)
  return cdist(queries, points, 'sqeuclidean')

def squared_distances_to(points: Matrix, center: Vector) -> Vector:
  """Squared Euclidean distance from every row of points to a single center"""
  if points.shape[0] == 0:
    return np.zeros((0,), dtype=np.float64)
  return cdist(points, center[None, :], 'sqeuclidean')[:, 0]

def min_squared_distances(queries: Matrix, points: Matrix) -> Vector:
  """Per-query squared distance to the nearest point row"""
  n_q = queries.shape[0]
  result = np.empty((n_q,), dtype=np.float64)
  if n_q == 0:
    return result
  chunk = max(1, DISTANCE_CHUNK_ELEMENTS // max(points.shape[0], 1))
  for start in range(0, n_q, chunk):
    stop = min(n_q, start + chunk)
    result[start:stop] = squared_distances(queries[start:stop], points).min(axis=1)
  return result

def rowwise_products(rows: Matrix, basis: Matrix) -> Matrix:
  """rows @ basis.T, with every output entry summed over its own pair of rows only.

  Each entry depends only on its own pair of rows, so a vector maps to the same
  bits alone or inside any batch.
  """
  n_r = rows.shape[0]
  n_b = basis.shape[0]
  result = np.empty((n_r, n_b), dtype=np.float64)
  if n_r == 0 or n_b == 0:
    result.fill(0.0)
    return result
  k = max(basis.shape[1], 1)
  chunk = max(1, DISTANCE_CHUNK_ELEMENTS // (n_b * k))
  for start in range(0, n_r, chunk):
    stop = min(n_r, start + chunk)
    result[start:stop] = (rows[start:stop, None, :] * basis[None, :, :]).sum(axis=2)
  return result

def sha256_hex(data: bytes) -> str:
  return hashlib.sha256(data).hexdigest()
