# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Exact flat nearest-neighbour search over a memory bank, in squared L2"""

from typing import Tuple

import numpy as np
import numpy.typing as npt

from .internal_types import Matrix, Vector
from .exceptions import EmptyBankError, InvalidDimensionError
from .util import as_matrix, as_vector, squared_distances, squared_distances_to
from .bank import MemoryBank

IdArray = npt.NDArray[np.intp]

class FlatIndex:
  _vectors: Matrix

  def __init__(self, vectors: npt.ArrayLike):
    v = as_matrix(vectors, what="bank")
    if v.shape[0] == 0:
      raise EmptyBankError("Cannot index an empty bank")
    self._vectors = v.copy()
    self._vectors.flags.writeable = False

  @classmethod
  def build(cls, bank: MemoryBank) -> 'FlatIndex':
    return cls(bank.vectors)

  @property
  def vectors(self) -> Matrix:
    return self._vectors

  @property
  def size(self) -> int:
    return int(self._vectors.shape[0])

  @property
  def dim(self) -> int:
    return int(self._vectors.shape[1])

  def _clamp(self, j: int) -> int:
    if j < 1:
      raise InvalidDimensionError(f"Neighbour count must be >= 1, got {j}")
    return min(j, self.size)

  def search_batch(self, queries: npt.ArrayLike, j: int) -> Tuple[Matrix, IdArray]:
    """Per query row, the j nearest bank rows ascending by squared distance.

    Ties go to the lower row index. Returns (distances, ids), each n x min(j, size).
    """
    q = as_matrix(queries, cols=self.dim, what="query batch")
    j = self._clamp(j)
    if q.shape[0] == 0:
      return np.zeros((0, j), dtype=np.float64), np.zeros((0, j), dtype=np.intp)
    d = squared_distances(q, self._vectors)
    if j == 1:
      ids = np.argmin(d, axis=1)[:, None]
    else:
      ids = np.argsort(d, axis=1, kind='stable')[:, :j]
    return np.take_along_axis(d, ids, axis=1), ids.astype(np.intp)

  def search(self, query: npt.ArrayLike, j: int) -> Tuple[Vector, IdArray]:
    v = as_vector(query, dim=self.dim, what="query")
    d, ids = self.search_batch(v[None, :], j)
    return d[0], ids[0]

  def neighbourhood(self, row: int, b: int) -> IdArray:
    """Row `row` followed by its b-1 nearest other bank rows.

    Exact duplicates of `row` count as distinct rows.
    """
    b = self._clamp(b)
    d = squared_distances_to(self._vectors, self._vectors[row])
    order = np.argsort(d, kind='stable')
    others = order[order != row][:b - 1]
    return np.concatenate((np.array([row], dtype=np.intp), others.astype(np.intp)))
