# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Descriptor blocks, descriptor files and dataset manifests.

A descriptor file holds one row-major matrix:

  magic "MHPC" | u32 version | u32 rows | u32 cols | u8 dtype | data

with dtype 0 for little-endian float32 and 1 for little-endian float64. All
integers are little-endian.
"""

from typing import Optional, List, Iterator, Sequence, cast

import os
import struct

import numpy as np
import numpy.typing as npt

from .internal_types import Matrix, JsonableDict
from .constants import (
    DESCRIPTOR_MAGIC,
    DESCRIPTOR_FORMAT_VERSION,
    DESCRIPTOR_DTYPE_FLOAT32,
    DESCRIPTOR_DTYPE_FLOAT64,
    MANIFEST_VERSION,
  )
from .exceptions import (
    DescriptorFormatError,
    DimensionMismatchError,
    InvalidDimensionError,
    ManifestError,
  )
from .config import load_structured_file, save_structured_file
from .util import as_matrix

LABELS = ('normal', 'anomalous')
SPLITS = ('train', 'test')

_HEADER = struct.Struct('<4sIIIB')

class DescriptorBlock:
  """The patch descriptors of one image, grid_h * grid_w rows of d0 values"""
  _image_id: str
  _grid_h: int
  _grid_w: int
  _data: Matrix
  _label: Optional[str]

  def __init__(self, image_id: str, grid_h: int, grid_w: int, data: npt.ArrayLike, label: Optional[str]=None):
    if grid_h < 1 or grid_w < 1:
      raise InvalidDimensionError(f"Patch grid of '{image_id}' must be at least 1x1, got {grid_h}x{grid_w}")
    m = as_matrix(data, what=f"descriptors of '{image_id}'")
    if m.shape[0] != grid_h * grid_w:
      raise DimensionMismatchError(grid_h * grid_w, m.shape[0], what=f"row count of '{image_id}'")
    if not np.all(np.isfinite(m)):
      raise DescriptorFormatError(f"Descriptors of '{image_id}' contain non-finite values")
    if label is not None and label not in LABELS:
      raise ManifestError(f"Label of '{image_id}' must be one of {', '.join(LABELS)}, got {label!r}")
    m.flags.writeable = False
    self._image_id = image_id
    self._grid_h = grid_h
    self._grid_w = grid_w
    self._data = m
    self._label = label

  @property
  def image_id(self) -> str:
    return self._image_id

  @property
  def grid_h(self) -> int:
    return self._grid_h

  @property
  def grid_w(self) -> int:
    return self._grid_w

  @property
  def d0(self) -> int:
    return int(self._data.shape[1])

  @property
  def data(self) -> Matrix:
    return self._data

  @property
  def label(self) -> Optional[str]:
    return self._label

def write_descriptor_file(pathname: str, data: npt.ArrayLike, dtype: str='float32') -> None:
  m = as_matrix(data, what="descriptor matrix")
  if dtype == 'float32':
    tag = DESCRIPTOR_DTYPE_FLOAT32
    payload = m.astype('<f4').tobytes(order='C')
  elif dtype == 'float64':
    tag = DESCRIPTOR_DTYPE_FLOAT64
    payload = m.astype('<f8').tobytes(order='C')
  else:
    raise DescriptorFormatError(f"Unsupported descriptor dtype '{dtype}'")
  with open(pathname, 'wb') as f:
    f.write(_HEADER.pack(DESCRIPTOR_MAGIC, DESCRIPTOR_FORMAT_VERSION, m.shape[0], m.shape[1], tag))
    f.write(payload)

def read_descriptor_file(pathname: str) -> Matrix:
  """Read a descriptor file, promoting float32 data to float64"""
  if not os.path.isfile(pathname):
    raise DescriptorFormatError(f"Descriptor file not found: '{pathname}'")
  with open(pathname, 'rb') as f:
    raw = f.read()
  if len(raw) < _HEADER.size:
    raise DescriptorFormatError(f"Descriptor file is truncated: '{pathname}'")
  magic, version, rows, cols, tag = _HEADER.unpack_from(raw, 0)
  if magic != DESCRIPTOR_MAGIC:
    raise DescriptorFormatError(f"Not a descriptor file (bad magic): '{pathname}'")
  if version != DESCRIPTOR_FORMAT_VERSION:
    raise DescriptorFormatError(f"Unsupported descriptor file version {version}: '{pathname}'")
  if tag == DESCRIPTOR_DTYPE_FLOAT32:
    dt = np.dtype('<f4')
  elif tag == DESCRIPTOR_DTYPE_FLOAT64:
    dt = np.dtype('<f8')
  else:
    raise DescriptorFormatError(f"Unknown dtype tag {tag}: '{pathname}'")
  expected = _HEADER.size + rows * cols * dt.itemsize
  if len(raw) != expected:
    raise DescriptorFormatError(f"Descriptor file '{pathname}' has {len(raw)} bytes, expected {expected}")
  data = np.frombuffer(raw, dtype=dt, count=rows * cols, offset=_HEADER.size)
  return np.ascontiguousarray(data.reshape(rows, cols), dtype=np.float64)

class ManifestEntry:
  path: str
  image_id: str
  label: Optional[str]
  grid_h: int
  grid_w: int
  d0: int

  def __init__(self, path: str, image_id: str, grid_h: int, grid_w: int, d0: int, label: Optional[str]=None):
    self.path = path
    self.image_id = image_id
    self.grid_h = grid_h
    self.grid_w = grid_w
    self.d0 = d0
    self.label = label

  def to_jsonable(self) -> JsonableDict:
    result: JsonableDict = dict(path=self.path, image_id=self.image_id, grid_h=self.grid_h, grid_w=self.grid_w, d0=self.d0)
    if self.label is not None:
      result['label'] = self.label
    return result

class DatasetManifest:
  """A split of descriptor files. Entry paths are relative to base_dir."""
  _version: int
  _split: str
  _entries: List[ManifestEntry]
  _base_dir: str

  def __init__(self, split: str, entries: Sequence[ManifestEntry], base_dir: str='.', version: int=MANIFEST_VERSION):
    if version != MANIFEST_VERSION:
      raise ManifestError(f"Unsupported manifest version {version}")
    if split not in SPLITS:
      raise ManifestError(f"Manifest split must be one of {', '.join(SPLITS)}, got {split!r}")
    self._version = version
    self._split = split
    self._entries = list(entries)
    self._base_dir = os.path.abspath(base_dir)
    for entry in self._entries:
      if entry.label is not None and entry.label not in LABELS:
        raise ManifestError(f"Entry '{entry.image_id}' has unknown label {entry.label!r}")
      if split == 'train' and entry.label not in (None, 'normal'):
        raise ManifestError(f"Train manifest entry '{entry.image_id}' is labelled {entry.label!r}; training data must be normal")

  @classmethod
  def load(cls, pathname: str) -> 'DatasetManifest':
    data = load_structured_file(pathname)
    version = data.get('version', MANIFEST_VERSION)
    split = data.get('split')
    raw_entries = data.get('entries', [])
    if not isinstance(version, int) or not isinstance(split, str) or not isinstance(raw_entries, list):
      raise ManifestError(f"Malformed manifest: '{pathname}'")
    entries: List[ManifestEntry] = []
    for i, raw in enumerate(raw_entries):
      if not isinstance(raw, dict):
        raise ManifestError(f"Manifest entry {i} is not a mapping: '{pathname}'")
      try:
        label = raw.get('label')
        entries.append(ManifestEntry(
            path=str(raw['path']),
            image_id=str(raw.get('image_id', raw['path'])),
            grid_h=int(cast(int, raw['grid_h'])),
            grid_w=int(cast(int, raw['grid_w'])),
            d0=int(cast(int, raw['d0'])),
            label=None if label is None else str(label),
          ))
      except (KeyError, TypeError, ValueError) as ex:
        raise ManifestError(f"Manifest entry {i} is missing or has a bad field ({ex}): '{pathname}'") from ex
    return cls(split, entries, base_dir=os.path.dirname(os.path.abspath(pathname)), version=version)

  def save(self, pathname: str) -> None:
    save_structured_file(pathname, self.to_jsonable())

  def to_jsonable(self) -> JsonableDict:
    return dict(version=self._version, split=self._split, entries=[ e.to_jsonable() for e in self._entries ])

  @property
  def split(self) -> str:
    return self._split

  @property
  def entries(self) -> List[ManifestEntry]:
    return list(self._entries)

  @property
  def base_dir(self) -> str:
    return self._base_dir

  def __len__(self) -> int:
    return len(self._entries)

  def resolve(self, entry: ManifestEntry) -> str:
    return os.path.join(self._base_dir, os.path.expanduser(entry.path))

  def load_block(self, entry: ManifestEntry) -> DescriptorBlock:
    pathname = self.resolve(entry)
    data = read_descriptor_file(pathname)
    if data.shape[1] != entry.d0:
      raise DimensionMismatchError(entry.d0, data.shape[1], what=f"d0 of '{pathname}'")
    return DescriptorBlock(entry.image_id, entry.grid_h, entry.grid_w, data, label=entry.label)

class ManifestDataset:
  """Re-iterable view of a manifest; each traversal reads the files afresh"""
  _manifest: DatasetManifest

  def __init__(self, manifest: DatasetManifest):
    self._manifest = manifest

  @property
  def manifest(self) -> DatasetManifest:
    return self._manifest

  def __len__(self) -> int:
    return len(self._manifest)

  def __iter__(self) -> Iterator[DescriptorBlock]:
    for entry in self._manifest.entries:
      yield self._manifest.load_block(entry)
