# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Training, scoring and persistence of the Mahalanobis PatchCore detector.

fit() makes three passes over a re-iterable dataset of DescriptorBlocks:

  1. incremental reducer fit, finalized at retained variance rho
  2. streaming moments of the reduced patches, regularised into a whitening
     operator (skipped for identity whitening)
  3. whitened patches streamed into the configured bank constructor
     (GeoReS traverses twice)

Patches are processed in mini-batches of `batch_size` rows; the full patch pool
is never held in memory by the streaming constructors.
"""

from typing import Optional, List, Iterable, Iterator, Dict, Any, Tuple, cast
from contextlib import contextmanager
import hashlib
import logging

import numpy as np
import numpy.typing as npt
import scipy.ndimage

from .internal_types import Matrix, JsonableDict
from .config import DetectorConfig
from .dataset import DescriptorBlock
from .exceptions import (
    EmptyInputError,
    EmptyBankError,
    FitStageError,
    NonReiterableDatasetError,
    InvalidDimensionError,
  )
from .moments import init as moments_init, update_batch, finalize_covariance
from .covreg import CovarianceModel, ShrinkagePolicy, regularize, whiten_batch
from .reducer import Reducer, ReducerFit
from .bank import (
    MemoryBank,
    MergeReduceConstructor,
    KMeansConstructor,
    greedy_coreset,
    geores_build,
  )
from .index import FlatIndex
from .container import write_container, read_container
from .util import squared_distances

logger = logging.getLogger(__name__)

FIT_STAGES = ('reducer', 'moments', 'covariance', 'bank')

@contextmanager
def _fit_stage(stage: str) -> Iterator[None]:
  logger.info("fit: stage '%s' starting", stage)
  try:
    yield
  except (NonReiterableDatasetError, EmptyInputError, FitStageError):
    raise
  except Exception as ex:
    raise FitStageError(stage, ex) from ex
  logger.info("fit: stage '%s' finished", stage)

class PatchBatches:
  """Re-iterable patch-row mini-batches over a dataset of DescriptorBlocks.

  Every traversal fingerprints the blocks it reads (ids, shapes and data); a
  traversal whose fingerprint differs from the first raises
  NonReiterableDatasetError.
  """
  _dataset: Iterable[DescriptorBlock]
  _batch_size: int
  _fingerprint: Optional[str] = None
  _traversals: int = 0
  _max_batch_rows: int = 0
  _n_blocks: int = 0
  _n_patches: int = 0
  _d0: Optional[int] = None

  def __init__(self, dataset: Iterable[DescriptorBlock], batch_size: int):
    if iter(dataset) is dataset:
      raise NonReiterableDatasetError("Training dataset is a one-shot iterator; fit needs to traverse it several times")
    self._dataset = dataset
    self._batch_size = batch_size

  @property
  def traversals(self) -> int:
    return self._traversals

  @property
  def max_batch_rows(self) -> int:
    return self._max_batch_rows

  @property
  def n_blocks(self) -> int:
    return self._n_blocks

  @property
  def n_patches(self) -> int:
    return self._n_patches

  @property
  def d0(self) -> Optional[int]:
    return self._d0

  def __iter__(self) -> Iterator[Matrix]:
    self._traversals += 1
    digest = hashlib.sha256()
    pending: List[Matrix] = []
    pending_rows = 0
    n_blocks = 0
    n_patches = 0
    for block in self._dataset:
      if self._d0 is None:
        self._d0 = block.d0
      elif block.d0 != self._d0:
        raise InvalidDimensionError(f"Block '{block.image_id}' has d0={block.d0}; earlier blocks have d0={self._d0}")
      digest.update(block.image_id.encode('utf-8'))
      digest.update(np.array([block.grid_h, block.grid_w, block.d0], dtype='<i8').tobytes())
      digest.update(block.data.tobytes())
      n_blocks += 1
      n_patches += block.data.shape[0]
      pending.append(block.data)
      pending_rows += block.data.shape[0]
      while pending_rows >= self._batch_size:
        joined = np.vstack(pending) if len(pending) > 1 else pending[0]
        batch = joined[:self._batch_size]
        rest = joined[self._batch_size:]
        pending = [ rest ] if rest.shape[0] > 0 else []
        pending_rows = rest.shape[0]
        self._max_batch_rows = max(self._max_batch_rows, batch.shape[0])
        yield batch
    if pending_rows > 0:
      batch = np.vstack(pending) if len(pending) > 1 else pending[0]
      self._max_batch_rows = max(self._max_batch_rows, batch.shape[0])
      yield batch
    fingerprint = digest.hexdigest()
    if self._fingerprint is None:
      if n_blocks == 0:
        raise EmptyInputError("Training dataset is empty")
      self._fingerprint = fingerprint
      self._n_blocks = n_blocks
      self._n_patches = n_patches
    elif fingerprint != self._fingerprint:
      raise NonReiterableDatasetError(
          f"Training dataset changed between traversals (traversal {self._traversals} differs from the first)")

class WhitenedStream:
  """Re-iterable stream of whitened patch batches"""
  _batches: PatchBatches
  _reducer: Reducer
  _model: CovarianceModel

  def __init__(self, batches: PatchBatches, reducer: Reducer, model: CovarianceModel):
    self._batches = batches
    self._reducer = reducer
    self._model = model

  def __iter__(self) -> Iterator[Matrix]:
    for batch in self._batches:
      yield whiten_batch(self._model, self._reducer.transform_batch(batch))

class DetectorState:
  """Everything needed at inference: reducer, whitening model, bank, index and config"""
  _reducer: Reducer
  _model: CovarianceModel
  _bank: MemoryBank
  _index: FlatIndex
  _config: DetectorConfig
  _fit_stats: JsonableDict

  def __init__(
        self,
        reducer: Reducer,
        model: CovarianceModel,
        bank: MemoryBank,
        config: DetectorConfig,
        fit_stats: Optional[JsonableDict]=None,
      ):
    if not reducer.k == model.dim == bank.dim:
      raise InvalidDimensionError(
          f"Inconsistent detector dimensions: reducer k={reducer.k}, model k={model.dim}, bank k={bank.dim}")
    self._reducer = reducer
    self._model = model
    self._bank = bank
    self._index = FlatIndex.build(bank)
    self._config = config
    self._fit_stats = dict(fit_stats) if fit_stats is not None else {}

  @property
  def reducer(self) -> Reducer:
    return self._reducer

  @property
  def model(self) -> CovarianceModel:
    return self._model

  @property
  def bank(self) -> MemoryBank:
    return self._bank

  @property
  def index(self) -> FlatIndex:
    return self._index

  @property
  def config(self) -> DetectorConfig:
    return self._config

  @property
  def fit_stats(self) -> JsonableDict:
    return dict(self._fit_stats)

  @property
  def d0(self) -> int:
    return self._reducer.d0

  def whiten_descriptors(self, data: npt.ArrayLike) -> Matrix:
    return whiten_batch(self._model, self._reducer.transform_batch(data))

def _build_bank(stream: WhitenedStream, config: DetectorConfig) -> Tuple[MemoryBank, int]:
  """Returns (bank, constructor peak retained rows)"""
  kind = config.constructor
  if kind == 'merge_reduce':
    mr = MergeReduceConstructor(config.K, config.m_c, config.mr_levels)
    for chunk in stream:
      mr.absorb(chunk)
    return mr.finalize(), mr.peak_rows
  if kind == 'kmeans':
    km = KMeansConstructor(config.K)
    for chunk in stream:
      km.absorb(chunk)
    return km.finalize(), km.peak_rows
  if kind == 'greedy_coreset':
    pool = np.vstack(list(stream))
    return greedy_coreset(pool, config.K), int(pool.shape[0])
  assert kind == 'geores'
  result = geores_build(stream, config.K, config.geores_alpha, q=config.geores_q, m_c=config.m_c, max_levels=config.mr_levels)
  return result.bank, result.peak_rows

def fit(dataset: Iterable[DescriptorBlock], config: Optional[DetectorConfig]=None) -> DetectorState:
  """Train a detector from a re-iterable dataset of normal DescriptorBlocks.

  Raises:
      EmptyInputError: the dataset has no blocks
      NonReiterableDatasetError: a traversal did not reproduce the first one
      FitStageError: any other failure, naming the stage it happened in
  """
  if config is None:
    config = DetectorConfig()
  batches = PatchBatches(dataset, config.batch_size)

  with _fit_stage('reducer'):
    reducer_fit: Optional[ReducerFit] = None
    for batch in batches:
      if reducer_fit is None:
        k_max = min(config.k_max, batch.shape[1], batch.shape[0])
        if k_max < config.k_max:
          logger.info("Tracking %d reducer components (k_max=%d, d0=%d, first batch %d rows)",
                      k_max, config.k_max, batch.shape[1], batch.shape[0])
        reducer_fit = ReducerFit(batch.shape[1], k_max)
      reducer_fit.partial_fit(batch)
    assert reducer_fit is not None
    reducer = reducer_fit.finalize(config.rho)

  if config.whitening == 'identity':
    model = CovarianceModel.identity(reducer.k)
  else:
    with _fit_stage('moments'):
      state = moments_init(reducer.k)
      for batch in batches:
        state = update_batch(state, reducer.transform_batch(batch))
    with _fit_stage('covariance'):
      sigma_hat = finalize_covariance(state)
      model = regularize(
          sigma_hat,
          state.mu,
          state.n,
          config.shrinkage_policy,
          config.eps_rel,
          delta_min=config.delta_min,
          m=config.delta_factor,
          delta_max=config.delta_max,
        )

  with _fit_stage('bank'):
    bank, constructor_peak = _build_bank(WhitenedStream(batches, reducer, model), config)

  peak_rows = batches.max_batch_rows + constructor_peak
  fit_stats: JsonableDict = dict(
      traversals=batches.traversals,
      peak_rows=peak_rows,
      n_images=batches.n_blocks,
      n_patches=batches.n_patches,
      d0=reducer.d0,
      k=reducer.k,
      jitter=model.delta,
      bank_size=bank.size,
    )
  logger.info("fit: done; k=%d bank=%d traversals=%d peak_rows=%d", reducer.k, bank.size, batches.traversals, peak_rows)
  return DetectorState(reducer, model, bank, config, fit_stats=fit_stats)

class ImageScore:
  image_id: str
  s: float
  s_max: float
  patch_scores: Matrix
  w: Optional[float]
  b: Optional[int]
  label: Optional[str]

  def __init__(
        self,
        image_id: str,
        s: float,
        s_max: float,
        patch_scores: Matrix,
        w: Optional[float]=None,
        b: Optional[int]=None,
        label: Optional[str]=None,
      ):
    self.image_id = image_id
    self.s = s
    self.s_max = s_max
    self.patch_scores = patch_scores
    self.w = w
    self.b = b
    self.label = label

  def to_jsonable(self) -> JsonableDict:
    result: JsonableDict = dict(image_id=self.image_id, s=self.s, s_max=self.s_max, w=self.w, b=self.b)
    if self.label is not None:
      result['label'] = self.label
    return result

def score_patches(state: DetectorState, block: DescriptorBlock) -> Matrix:
  """Squared whitened nearest-neighbour distance of every patch, on the grid"""
  z = state.whiten_descriptors(block.data)
  d, _ = state.index.search_batch(z, 1)
  return d[:, 0].reshape(block.grid_h, block.grid_w)

def reweight_factor(distances: npt.ArrayLike, tau: Optional[float]=None) -> float:
  """w = 1 - exp(d_0 - tau) / sum_m exp(d_m - tau), with d_0 the nearest neighbour's
  distance and tau = max(d) by default. Any tau gives the same w up to round-off."""
  d = np.asarray(distances, dtype=np.float64)
  if d.ndim != 1 or d.shape[0] == 0:
    raise InvalidDimensionError("Reweighting needs a non-empty 1-D distance vector")
  if tau is None:
    tau = float(d.max())
  e = np.exp(d - tau)
  return float(1.0 - e[0] / e.sum())

def score_image(state: DetectorState, block: DescriptorBlock) -> ImageScore:
  if state.bank.size == 0:
    raise EmptyBankError("Detector bank is empty")
  z = state.whiten_descriptors(block.data)
  d, ids = state.index.search_batch(z, 1)
  a = d[:, 0]
  star = int(np.argmax(a))
  a_star = float(a[star])
  patch_scores = a.reshape(block.grid_h, block.grid_w)
  config = state.config
  if config.scoring == 'max':
    return ImageScore(block.image_id, a_star, a_star, patch_scores, label=block.label)
  b = min(config.b, state.bank.size)
  if b < config.b:
    logger.warning("Bank has %d rows; reweighting with b=%d instead of %d", state.bank.size, b, config.b)
  neighbourhood = state.index.neighbourhood(int(ids[star, 0]), b)
  delta = squared_distances(z[star:star + 1], state.index.vectors[neighbourhood])[0]
  w = reweight_factor(delta)
  return ImageScore(block.image_id, w * a_star, a_star, patch_scores, w=w, b=b, label=block.label)

def score_dataset(state: DetectorState, blocks: Iterable[DescriptorBlock]) -> List[ImageScore]:
  return [ score_image(state, block) for block in blocks ]

def anomaly_map(patch_scores: npt.ArrayLike, out_h: int, out_w: int) -> Matrix:
  """Corner-aligned bilinear upsampling of a patch-score grid"""
  grid = np.asarray(patch_scores, dtype=np.float64)
  if grid.ndim != 2:
    raise InvalidDimensionError(f"Patch scores must be a 2-D grid, got {grid.ndim} dimensions")
  if grid.size == 0:
    raise EmptyInputError("Cannot upsample an empty patch grid")
  if out_h < 1 or out_w < 1:
    raise InvalidDimensionError(f"Anomaly map size must be positive, got {out_h}x{out_w}")
  gh, gw = grid.shape
  rows = np.linspace(0.0, gh - 1, out_h) if out_h > 1 else np.zeros((1,))
  cols = np.linspace(0.0, gw - 1, out_w) if out_w > 1 else np.zeros((1,))
  rr, cc = np.meshgrid(rows, cols, indexing='ij')
  result = scipy.ndimage.map_coordinates(grid, [rr, cc], order=1, mode='nearest')
  return np.ascontiguousarray(result, dtype=np.float64)

# ----------------------------------------------------------------- persistence

def _metadata(state: DetectorState) -> JsonableDict:
  policy = state.model.policy
  return dict(
      config=state.config.to_jsonable(),
      model=dict(
          delta=state.model.delta,
          eps_rel=state.model.eps_rel,
          is_identity=state.model.is_identity,
          policy=None if policy is None else policy.to_jsonable(),
        ),
      bank=state.bank.to_jsonable(),
      fit_stats=state.fit_stats,
    )

def save(state: DetectorState, destination: str) -> None:
  write_container(destination, _metadata(state), [
      ('reducer.W', state.reducer.W),
      ('reducer.u_bar', state.reducer.u_bar),
      ('reducer.explained_variance', state.reducer.explained_variance),
      ('model.mu', state.model.mu),
      ('model.sigma_reg', state.model.sigma_reg),
      ('model.L', state.model.L),
      ('bank.vectors', state.bank.vectors),
    ])
  logger.info("Saved detector state to %s", destination)

def load(source: str) -> DetectorState:
  metadata, segments = read_container(source)
  meta: Dict[str, Any] = cast(Dict[str, Any], metadata)
  model_meta = meta['model']
  bank_meta = meta['bank']
  reducer = Reducer(segments['reducer.W'], segments['reducer.u_bar'], segments['reducer.explained_variance'])
  policy_data = model_meta.get('policy')
  model = CovarianceModel(
      segments['model.mu'],
      segments['model.sigma_reg'],
      segments['model.L'],
      float(model_meta['delta']),
      None if policy_data is None else ShrinkagePolicy.from_jsonable(policy_data),
      float(model_meta['eps_rel']),
      is_identity=bool(model_meta['is_identity']),
    )
  bank = MemoryBank(
      segments['bank.vectors'],
      str(bank_meta['constructor']),
      int(bank_meta['budget']),
      local_budget=bank_meta.get('local_budget'),
      observed=bool(bank_meta['observed']),
      underfilled=bool(bank_meta['underfilled']),
    )
  config = DetectorConfig.from_jsonable(meta['config'])
  return DetectorState(reducer, model, bank, config, fit_stats=meta.get('fit_stats'))
