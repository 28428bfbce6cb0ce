# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Budgeted memory-bank construction in whitened space.

Four constructors are provided:

  greedy_coreset          offline farthest-first selection over a materialised pool
  MergeReduceConstructor  streaming k-center via bounded merge-reduce summaries
  KMeansConstructor       streaming mini-batch k-means with count-based steps
  geores                  two-pass coverage + residual-tail constructor

Coverage constructors (all but k-means) only ever return observed input rows,
never duplicated. Farthest-first selection is seeded with the first row in
stream order, and every argmax/argmin tie goes to the lowest index.
"""

from typing import Optional, List, Tuple, Iterable, Set
import heapq
import logging
import math

import numpy as np
import numpy.typing as npt

from .internal_types import Matrix, JsonableDict
from .constants import (
    DEFAULT_MR_LEVELS,
    GEORES_MIN_Q,
    GEORES_Q_PER_TAIL,
  )
from .exceptions import (
    EmptyInputError,
    InvalidBudgetError,
    UnderfilledBankError,
    NonReiterableStreamError,
    InvalidDimensionError,
  )
from .util import (
    as_matrix,
    unique_row_indices,
    squared_distances,
    squared_distances_to,
    min_squared_distances,
  )

logger = logging.getLogger(__name__)

CONSTRUCTOR_KINDS = ('greedy_coreset', 'merge_reduce', 'kmeans', 'geores')

class MemoryBank:
  """A finished, immutable retrieval support set"""
  _vectors: Matrix
  _constructor: str
  _budget: int
  _local_budget: Optional[int]
  _observed: bool
  _underfilled: bool

  def __init__(
        self,
        vectors: npt.ArrayLike,
        constructor: str,
        budget: int,
        local_budget: Optional[int]=None,
        observed: bool=True,
        underfilled: bool=False,
      ):
    if constructor not in CONSTRUCTOR_KINDS:
      raise InvalidBudgetError(f"Unknown bank constructor '{constructor}'")
    self._vectors = as_matrix(vectors, what="bank").copy()
    self._vectors.flags.writeable = False
    self._constructor = constructor
    self._budget = budget
    self._local_budget = local_budget
    self._observed = observed
    self._underfilled = underfilled

  @property
  def vectors(self) -> Matrix:
    return self._vectors

  @property
  def constructor(self) -> str:
    return self._constructor

  @property
  def budget(self) -> int:
    return self._budget

  @property
  def local_budget(self) -> Optional[int]:
    return self._local_budget

  @property
  def observed(self) -> bool:
    """True if every row is an observed input point"""
    return self._observed

  @property
  def underfilled(self) -> bool:
    return self._underfilled

  @property
  def size(self) -> int:
    return int(self._vectors.shape[0])

  @property
  def dim(self) -> int:
    return int(self._vectors.shape[1])

  def to_jsonable(self) -> JsonableDict:
    return dict(
        constructor=self._constructor,
        budget=self._budget,
        local_budget=self._local_budget,
        observed=self._observed,
        underfilled=self._underfilled,
        size=self.size,
      )

def _check_budget(K: int, what: str="budget") -> None:
  if not isinstance(K, (int, np.integer)) or K < 1:
    raise InvalidBudgetError(f"Bank {what} must be a positive integer, got {K!r}")

def _row_keys(rows: Matrix) -> List[bytes]:
  return [ row.tobytes() for row in np.ascontiguousarray(rows) ]

def farthest_first(points: Matrix, budget: int, centers: Optional[Matrix]=None) -> List[int]:
  """Indices of up to `budget` rows of points chosen by farthest-first traversal.

  Without `centers` the first row is the seed. With `centers`, selection
  continues from that existing set. Stops early once every remaining row is at
  distance 0 from the selection.
  """
  n = points.shape[0]
  selected: List[int] = []
  if n == 0 or budget < 1:
    return selected
  if centers is None or centers.shape[0] == 0:
    selected.append(0)
    min_d = squared_distances_to(points, points[0])
  else:
    min_d = min_squared_distances(points, centers)
  while len(selected) < budget:
    j = int(np.argmax(min_d))
    if not min_d[j] > 0.0:
      break
    selected.append(j)
    min_d = np.minimum(min_d, squared_distances_to(points, points[j]))
  return selected

def reduce_points(points: Matrix, budget: int) -> Matrix:
  """Distinct rows in input order when they fit the budget; otherwise farthest-first"""
  distinct = points[unique_row_indices(points)]
  if distinct.shape[0] <= budget:
    return distinct
  return distinct[farthest_first(distinct, budget)]

def covering_radius(points: npt.ArrayLike, bank: npt.ArrayLike) -> float:
  """max over points of the Euclidean distance to the nearest bank row"""
  p = as_matrix(points, what="points")
  b = as_matrix(bank, cols=p.shape[1], what="bank")
  if p.shape[0] == 0:
    return 0.0
  if b.shape[0] == 0:
    raise EmptyInputError("Covering radius of an empty bank is undefined")
  return math.sqrt(float(min_squared_distances(p, b).max()))

def greedy_coreset(points: npt.ArrayLike, K: int) -> MemoryBank:
  """Offline farthest-first coreset of at most K distinct rows"""
  _check_budget(K)
  x = as_matrix(points, what="points")
  if x.shape[0] == 0:
    raise EmptyInputError("Cannot build a coreset from an empty point set")
  return MemoryBank(reduce_points(x, K), 'greedy_coreset', K)

class MergeReduceConstructor:
  """Streaming k-center summaries with a binary-counter merge discipline.

  Each absorbed chunk is reduced to at most m_c rows and pushed at level 0; two
  summaries meeting at a level are merged and reduced, carrying upward. A carry
  out of the top level folds into a root summary holding up to max(K, m_c)
  rows, which keeps the retained-row peak independent of stream length.
  """
  _budget: int
  _local_budget: int
  _max_levels: int
  _dim: Optional[int] = None
  _levels: List[Optional[Matrix]]
  _root: Optional[Matrix] = None
  _chunks: int = 0
  _peak_rows: int = 0

  def __init__(self, K: int, m_c: int, max_levels: int=DEFAULT_MR_LEVELS):
    _check_budget(K)
    _check_budget(m_c, "local budget")
    if max_levels < 1:
      raise InvalidBudgetError(f"Merge-reduce needs at least one level, got {max_levels}")
    self._budget = K
    self._local_budget = m_c
    self._max_levels = max_levels
    self._levels = [ None ] * max_levels

  @property
  def budget(self) -> int:
    return self._budget

  @property
  def local_budget(self) -> int:
    return self._local_budget

  @property
  def levels(self) -> List[Optional[Matrix]]:
    return list(self._levels)

  @property
  def root(self) -> Optional[Matrix]:
    return self._root

  @property
  def chunks(self) -> int:
    return self._chunks

  @property
  def retained_rows(self) -> int:
    total = 0 if self._root is None else self._root.shape[0]
    for summary in self._levels:
      if summary is not None:
        total += summary.shape[0]
    return total

  @property
  def peak_rows(self) -> int:
    """Largest number of rows held at once: summaries plus in-flight unions"""
    return self._peak_rows

  def _note(self, in_flight: int) -> None:
    self._peak_rows = max(self._peak_rows, self.retained_rows + in_flight)

  def absorb(self, chunk: npt.ArrayLike) -> 'MergeReduceConstructor':
    x = as_matrix(chunk, cols=self._dim, what="chunk")
    if x.shape[0] == 0:
      return self
    if self._dim is None:
      self._dim = x.shape[1]
    self._chunks += 1
    carry = reduce_points(x, self._local_budget)
    self._note(carry.shape[0])
    for level in range(self._max_levels):
      held = self._levels[level]
      if held is None:
        self._levels[level] = carry
        return self
      union = np.vstack((held, carry))
      self._note(carry.shape[0] + union.shape[0])
      self._levels[level] = None
      carry = reduce_points(union, self._local_budget)
    union = carry if self._root is None else np.vstack((self._root, carry))
    self._note(carry.shape[0] + union.shape[0])
    self._root = reduce_points(union, max(self._budget, self._local_budget))
    logger.debug("Merge-reduce root fold: root now %d rows", self._root.shape[0])
    return self

  def outstanding(self) -> Matrix:
    """All retained rows, oldest first"""
    parts: List[Matrix] = []
    if self._root is not None:
      parts.append(self._root)
    for summary in reversed(self._levels):
      if summary is not None:
        parts.append(summary)
    if len(parts) == 0:
      raise EmptyInputError("Merge-reduce constructor has absorbed nothing")
    return np.vstack(parts)

  def finalize(self) -> MemoryBank:
    union = self.outstanding()
    self._note(union.shape[0])
    vectors = reduce_points(union, self._budget)
    logger.info("Merge-reduce bank: %d rows from %d chunks (peak %d retained rows)",
                vectors.shape[0], self._chunks, self._peak_rows)
    return MemoryBank(vectors, 'merge_reduce', self._budget, local_budget=self._local_budget)

class KMeansConstructor:
  """Streaming mini-batch k-means.

  Centroids start as the first K distinct points, each with count 1. Within a
  chunk, samples are assigned against the centroids as they stood at the start
  of the chunk, then applied in order as c <- c + (z - c) / count.
  """
  _budget: int
  _centroids: Matrix
  _counts: npt.NDArray[np.int64]
  _filled: int = 0
  _seen: int = 0
  _keys: Set[bytes]

  def __init__(self, K: int):
    _check_budget(K)
    self._budget = K
    self._centroids = np.zeros((0, 0), dtype=np.float64)
    self._counts = np.zeros((K,), dtype=np.int64)
    self._keys = set()

  @property
  def budget(self) -> int:
    return self._budget

  @property
  def centroids(self) -> Matrix:
    return self._centroids[:self._filled]

  @property
  def counts(self) -> npt.NDArray[np.int64]:
    return self._counts[:self._filled]

  @property
  def seen(self) -> int:
    return self._seen

  @property
  def peak_rows(self) -> int:
    return self._filled

  def _step(self, c: int, z: npt.NDArray[np.float64]) -> None:
    self._counts[c] += 1
    self._centroids[c] += (z - self._centroids[c]) / float(self._counts[c])

  def absorb(self, chunk: npt.ArrayLike) -> 'KMeansConstructor':
    cols = None if self._centroids.shape[1] == 0 else self._centroids.shape[1]
    x = as_matrix(chunk, cols=cols, what="chunk")
    n = x.shape[0]
    if n == 0:
      return self
    if cols is None:
      self._centroids = np.zeros((self._budget, x.shape[1]), dtype=np.float64)
    start = 0
    while self._filled < self._budget and start < n:
      z = x[start]
      key = z.tobytes()
      if key in self._keys:
        # an exact copy of a centroid still in its initial position
        self._step(int(np.argmin(squared_distances_to(self.centroids, z))), z)
      else:
        self._keys.add(key)
        self._centroids[self._filled] = z
        self._counts[self._filled] = 1
        self._filled += 1
      start += 1
    if self._filled == self._budget:
      self._keys.clear()
    if start < n:
      rest = x[start:]
      nearest = np.argmin(squared_distances(rest, self._centroids), axis=1)
      for z, c in zip(rest, nearest):
        self._step(int(c), z)
    self._seen += n
    return self

  def finalize(self, strict: bool=False) -> MemoryBank:
    if self._filled == 0:
      raise EmptyInputError("k-means constructor has absorbed nothing")
    underfilled = self._filled < self._budget
    if underfilled:
      msg = f"k-means saw only {self._filled} distinct points for a budget of {self._budget}"
      if strict:
        raise UnderfilledBankError(msg)
      logger.warning(msg)
    return MemoryBank(self.centroids, 'kmeans', self._budget, observed=False, underfilled=underfilled)

def budget_split(K: int, alpha: float) -> Tuple[int, int]:
  """(K0, Kt): main coverage budget and tail budget, both positive"""
  if not isinstance(K, (int, np.integer)) or K < 2:
    raise InvalidBudgetError(f"GeoReS needs a budget of at least 2, got {K!r}")
  if not 0.0 < alpha < 1.0:
    raise InvalidBudgetError(f"GeoReS alpha must be in (0, 1), got {alpha}")
  k0_raw = int(math.floor(alpha * K + 0.5))
  k0 = min(K - 1, max(1, k0_raw))
  return k0, K - k0

def default_tail_candidates(Kt: int) -> int:
  return max(GEORES_Q_PER_TAIL * Kt, GEORES_MIN_Q)

def pi_k_complete(candidates: npt.ArrayLike, pool: npt.ArrayLike, K: int) -> MemoryBank:
  """Dedupe candidates, fill up to K from pool by farthest-first, truncate to K"""
  _check_budget(K)
  p = as_matrix(pool, what="pool")
  if p.shape[0] == 0:
    raise EmptyInputError("Completion pool is empty")
  c = as_matrix(candidates, what="candidates")
  if c.shape[0] == 0:
    c = np.zeros((0, p.shape[1]), dtype=np.float64)
  elif c.shape[1] != p.shape[1]:
    raise InvalidDimensionError(f"Candidates have {c.shape[1]} columns, pool has {p.shape[1]}")
  current = c[unique_row_indices(c)]
  if current.shape[0] >= K:
    return MemoryBank(current[:K], 'geores', K)
  taken = set(_row_keys(current))
  fill = p[unique_row_indices(p)]
  fill = fill[[ key not in taken for key in _row_keys(fill) ]]
  if fill.shape[0] > 0:
    chosen = farthest_first(fill, K - current.shape[0], centers=current)
    current = np.vstack((current, fill[chosen]))
  return MemoryBank(current, 'geores', K)

def _is_reiterable(stream: Iterable[Matrix]) -> bool:
  return iter(stream) is not stream

class _TailHeap:
  """Top-q rows by residual; equal residuals keep the earlier stream index"""
  _q: int
  _heap: List[Tuple[float, int, bytes]]

  def __init__(self, q: int):
    self._q = q
    self._heap = []

  def __len__(self) -> int:
    return len(self._heap)

  def offer(self, residuals: npt.NDArray[np.float64], rows: Matrix, first_index: int) -> None:
    considered = range(len(residuals))
    if len(self._heap) == self._q:
      considered = np.nonzero(residuals >= self._heap[0][0])[0]
    for i in considered:
      key = (float(residuals[i]), -(first_index + int(i)), rows[i].tobytes())
      if len(self._heap) < self._q:
        heapq.heappush(self._heap, key)
      elif key[:2] > self._heap[0][:2]:
        heapq.heapreplace(self._heap, key)

  def rows(self, dim: int) -> Matrix:
    """Candidate rows in stream order"""
    ordered = sorted(self._heap, key=lambda e: -e[1])
    if len(ordered) == 0:
      return np.zeros((0, dim), dtype=np.float64)
    return np.vstack([ np.frombuffer(e[2], dtype=np.float64) for e in ordered ])

class GeoResResult:
  bank: MemoryBank
  provisional: Matrix
  main: Matrix
  tail: Matrix
  peak_rows: int

  def __init__(self, bank: MemoryBank, provisional: Matrix, main: Matrix, tail: Matrix, peak_rows: int):
    self.bank = bank
    self.provisional = provisional
    self.main = main
    self.tail = tail
    self.peak_rows = peak_rows

def geores_build(
      stream: Iterable[Matrix],
      K: int,
      alpha: float,
      q: Optional[int]=None,
      m_c: int=256,
      max_levels: int=DEFAULT_MR_LEVELS,
    ) -> GeoResResult:
  """Two traversals of a re-iterable chunk stream; see geores()"""
  if not _is_reiterable(stream):
    raise NonReiterableStreamError("GeoReS needs a stream that can be traversed twice")
  k0, kt = budget_split(K, alpha)
  if q is None:
    q = default_tail_candidates(kt)
  if q < kt:
    raise InvalidBudgetError(f"GeoReS tail candidate count q={q} is smaller than the tail budget {kt}")

  provisional_builder = MergeReduceConstructor(K, m_c, max_levels)
  for chunk in stream:
    provisional_builder.absorb(chunk)
  provisional = provisional_builder.finalize().vectors
  logger.info("GeoReS provisional bank: %d rows", provisional.shape[0])

  main_builder = MergeReduceConstructor(k0, m_c, max_levels)
  heap = _TailHeap(q)
  # P falls short of K only when the merge levels never filled; a farthest-first
  # reservoir of up to K observed rows then keeps the completion pool at K distinct rows
  reservoir: Optional[Matrix] = None
  if provisional.shape[0] < K:
    logger.info("GeoReS provisional bank holds %d < K=%d rows; keeping a fill reservoir", provisional.shape[0], K)
    reservoir = np.zeros((0, provisional.shape[1]), dtype=np.float64)
  reservoir_peak = 0
  index = 0
  for chunk in stream:
    x = as_matrix(chunk, cols=provisional.shape[1], what="chunk")
    if x.shape[0] == 0:
      continue
    main_builder.absorb(x)
    heap.offer(min_squared_distances(x, provisional), x, index)
    if reservoir is not None:
      reservoir_peak = max(reservoir_peak, reservoir.shape[0] + x.shape[0])
      reservoir = reduce_points(np.vstack((reservoir, x)), K)
    index += x.shape[0]
  if main_builder.chunks == 0:
    raise EmptyInputError("GeoReS stream was empty on its second traversal")
  main = main_builder.finalize().vectors

  candidates = heap.rows(main.shape[1])
  tail = candidates[farthest_first(candidates, kt, centers=main)] if candidates.shape[0] > 0 else candidates
  pool_parts = [ provisional, main, candidates ]
  if reservoir is not None:
    pool_parts.append(reservoir)
  bank = pi_k_complete(np.vstack((main, tail)), np.vstack(pool_parts), K)
  peak = max(provisional_builder.peak_rows, main_builder.peak_rows + provisional.shape[0] + q + reservoir_peak)
  logger.info("GeoReS bank: K0=%d Kt=%d q=%d tail=%d final=%d", k0, kt, q, tail.shape[0], bank.size)
  return GeoResResult(bank, provisional, main, tail, peak)

def geores(
      stream: Iterable[Matrix],
      K: int,
      alpha: float,
      q: Optional[int]=None,
      m_c: int=256,
      max_levels: int=DEFAULT_MR_LEVELS,
    ) -> MemoryBank:
  """Two-pass constructor: main coverage bank plus high-residual tail representatives.

  Pass 1 builds a provisional merge-reduce bank P of size K. Pass 2 keeps the q
  rows with the largest squared distance to P and builds the main bank M0 of
  size K0. Kt tail rows are then taken greedily from those candidates by
  max-min distance to M0 and the tail chosen so far, and the result is
  completed to K rows from P, M0 and the tail candidates. When P has fewer than K
  rows, pass 2 also keeps a farthest-first reservoir of up to K observed rows for
  the completion, so a stream with at least K distinct rows always yields K.
  """
  return geores_build(stream, K, alpha, q=q, m_c=m_c, max_levels=max_levels).bank
