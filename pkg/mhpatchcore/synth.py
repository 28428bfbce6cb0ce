# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Synthetic anisotropic-Gaussian descriptor datasets.

Normal patches are drawn from N(mean, R diag(eigenvalues) R^T). Anomalous test
images get a contiguous sub-grid of patches displaced along one eigen-direction
by `magnitude` standard deviations of that direction.
"""

from typing import Optional, List, Tuple, Any, Union
import os
import logging

import numpy as np

from .internal_types import JsonableDict, Matrix, Vector
from .exceptions import InvalidConfigError
from .dataset import DescriptorBlock, DatasetManifest, ManifestEntry, write_descriptor_file
from .config import load_structured_file

logger = logging.getLogger(__name__)

class SynthSpec:
  d0: int
  mean: Vector
  eigenvalues: Vector
  rotation_seed: Optional[int]
  grid_h: int
  grid_w: int
  n_train: int
  n_test_normal: int
  n_test_anomalous: int
  direction: int
  magnitude: float
  region_h: int
  region_w: int
  seed: int
  dtype: str

  def __init__(
        self,
        d0: int,
        eigenvalues: Optional[List[float]]=None,
        spectrum: Optional[Tuple[float, float]]=None,
        mean: Union[float, List[float]]=0.0,
        rotation_seed: Optional[int]=None,
        grid_h: int=4,
        grid_w: int=4,
        n_train: int=100,
        n_test_normal: int=20,
        n_test_anomalous: int=20,
        direction: Union[int, str]='smallest',
        magnitude: float=6.0,
        region_h: int=2,
        region_w: int=2,
        seed: int=0,
        dtype: str='float64',
      ):
    """Either `eigenvalues` (length d0) or `spectrum` = (largest, smallest) for a
    geometric spectrum must be given. `direction` is an index into the
    eigenvalues, or 'smallest'/'largest'."""
    if d0 < 1:
      raise InvalidConfigError(f"d0 must be >= 1, got {d0}")
    self.d0 = d0
    if eigenvalues is not None:
      ev = np.asarray(eigenvalues, dtype=np.float64)
    elif spectrum is not None:
      hi, lo = float(spectrum[0]), float(spectrum[1])
      if not hi > 0.0 or not lo > 0.0:
        raise InvalidConfigError("Spectrum bounds must be positive")
      ev = np.geomspace(hi, lo, d0) if d0 > 1 else np.array([hi], dtype=np.float64)
    else:
      raise InvalidConfigError("Either eigenvalues or spectrum must be given")
    if ev.shape != (d0,):
      raise InvalidConfigError(f"Expected {d0} eigenvalues, got {ev.shape[0] if ev.ndim == 1 else ev.shape}")
    if not np.all(ev > 0.0):
      raise InvalidConfigError("Eigenvalues must be strictly positive")
    self.eigenvalues = ev
    m = np.asarray(mean, dtype=np.float64)
    self.mean = np.full((d0,), float(m)) if m.ndim == 0 else m
    if self.mean.shape != (d0,):
      raise InvalidConfigError(f"Mean must be a scalar or have length {d0}")
    if direction == 'smallest':
      direction = int(np.argmin(ev))
    elif direction == 'largest':
      direction = int(np.argmax(ev))
    if not isinstance(direction, int) or not 0 <= direction < d0:
      raise InvalidConfigError(f"Anomaly direction must be an index below d0={d0}, got {direction!r}")
    self.direction = direction
    if magnitude < 0:
      raise InvalidConfigError(f"Anomaly magnitude must be >= 0, got {magnitude}")
    self.magnitude = float(magnitude)
    if grid_h < 1 or grid_w < 1:
      raise InvalidConfigError("Grid dimensions must be >= 1")
    if not 1 <= region_h <= grid_h or not 1 <= region_w <= grid_w:
      raise InvalidConfigError("Anomalous region must fit inside the patch grid")
    if min(n_train, n_test_normal, n_test_anomalous) < 0:
      raise InvalidConfigError("Image counts must be >= 0")
    if dtype not in ('float32', 'float64'):
      raise InvalidConfigError(f"dtype must be float32 or float64, got {dtype!r}")
    self.rotation_seed = rotation_seed
    self.grid_h = grid_h
    self.grid_w = grid_w
    self.n_train = n_train
    self.n_test_normal = n_test_normal
    self.n_test_anomalous = n_test_anomalous
    self.region_h = region_h
    self.region_w = region_w
    self.seed = seed
    self.dtype = dtype

  @classmethod
  def from_jsonable(cls, data: JsonableDict) -> 'SynthSpec':
    kwargs: Any = dict(data)
    if 'spectrum' in kwargs and kwargs['spectrum'] is not None:
      kwargs['spectrum'] = tuple(kwargs['spectrum'])
    try:
      return cls(**kwargs)
    except TypeError as ex:
      raise InvalidConfigError(f"Bad synthetic dataset spec: {ex}") from ex

  @classmethod
  def load(cls, pathname: str) -> 'SynthSpec':
    return cls.from_jsonable(load_structured_file(pathname))

  def rotation(self) -> Matrix:
    """Orthonormal basis whose columns are the eigen-directions"""
    if self.rotation_seed is None:
      return np.eye(self.d0, dtype=np.float64)
    rng = np.random.default_rng(self.rotation_seed)
    q, r = np.linalg.qr(rng.standard_normal((self.d0, self.d0)))
    return q * np.sign(np.diag(r))[None, :]

class SynthGenerator:
  _spec: SynthSpec
  _rotation: Matrix
  _scales: Vector
  _rng: np.random.Generator

  def __init__(self, spec: SynthSpec):
    self._spec = spec
    self._rotation = spec.rotation()
    self._scales = np.sqrt(spec.eigenvalues)
    self._rng = np.random.default_rng(spec.seed)

  @property
  def displacement(self) -> Vector:
    s = self._spec
    return s.magnitude * self._scales[s.direction] * self._rotation[:, s.direction]

  def _normal_patches(self, n: int) -> Matrix:
    z = self._rng.standard_normal((n, self._spec.d0)) * self._scales[None, :]
    return self._spec.mean[None, :] + z @ self._rotation.T

  def _block(self, image_id: str, label: str, anomalous: bool) -> DescriptorBlock:
    s = self._spec
    data = self._normal_patches(s.grid_h * s.grid_w)
    if anomalous:
      top = int(self._rng.integers(0, s.grid_h - s.region_h + 1))
      left = int(self._rng.integers(0, s.grid_w - s.region_w + 1))
      grid = data.reshape(s.grid_h, s.grid_w, s.d0)
      grid[top:top + s.region_h, left:left + s.region_w, :] += self.displacement[None, None, :]
    if s.dtype == 'float32':
      data = data.astype(np.float32).astype(np.float64)
    return DescriptorBlock(image_id, s.grid_h, s.grid_w, data, label=label)

  def generate(self) -> Tuple[List[DescriptorBlock], List[DescriptorBlock]]:
    """(train blocks, test blocks); test normals precede test anomalies"""
    s = self._spec
    train = [ self._block(f"train_{i:05d}", 'normal', False) for i in range(s.n_train) ]
    test = [ self._block(f"test_normal_{i:05d}", 'normal', False) for i in range(s.n_test_normal) ]
    test += [ self._block(f"test_anomalous_{i:05d}", 'anomalous', True) for i in range(s.n_test_anomalous) ]
    return train, test

def generate(spec: SynthSpec) -> Tuple[List[DescriptorBlock], List[DescriptorBlock]]:
  return SynthGenerator(spec).generate()

def _write_split(out_dir: str, split: str, blocks: List[DescriptorBlock], dtype: str) -> DatasetManifest:
  split_dir = os.path.join(out_dir, split)
  os.makedirs(split_dir, exist_ok=True)
  entries: List[ManifestEntry] = []
  for block in blocks:
    rel_path = f"{split}/{block.image_id}.mhpc"
    write_descriptor_file(os.path.join(out_dir, rel_path), block.data, dtype=dtype)
    entries.append(ManifestEntry(rel_path, block.image_id, block.grid_h, block.grid_w, block.d0, label=block.label))
  manifest = DatasetManifest(split, entries, base_dir=out_dir)
  manifest.save(os.path.join(out_dir, f"{split}.yaml"))
  return manifest

def write_dataset(spec: SynthSpec, out_dir: str) -> Tuple[DatasetManifest, DatasetManifest]:
  """Write OUT/train/*.mhpc, OUT/test/*.mhpc and the OUT/train.yaml, OUT/test.yaml manifests"""
  train, test = generate(spec)
  os.makedirs(out_dir, exist_ok=True)
  train_manifest = _write_split(out_dir, 'train', train, spec.dtype)
  test_manifest = _write_split(out_dir, 'test', test, spec.dtype)
  logger.info("Wrote synthetic dataset to %s: %d train, %d test images", out_dir, len(train), len(test))
  return train_manifest, test_manifest
