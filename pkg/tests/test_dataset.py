#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.dataset import (
    DescriptorBlock,
    DatasetManifest,
    ManifestDataset,
    ManifestEntry,
    write_descriptor_file,
    read_descriptor_file,
  )
from mhpatchcore.exceptions import (
    DescriptorFormatError,
    DimensionMismatchError,
    InvalidDimensionError,
    ManifestError,
  )

def test_descriptor_file_dtypes(tmp_path):
  data = np.array([[0.1, -2.0, 3.5], [1e-3, 4.0, 0.0]])
  path64 = str(tmp_path / 'a.mhpc')
  write_descriptor_file(path64, data, dtype='float64')
  assert np.array_equal(read_descriptor_file(path64), data)
  path32 = str(tmp_path / 'b.mhpc')
  write_descriptor_file(path32, data)
  loaded = read_descriptor_file(path32)
  assert loaded.dtype == np.float64
  assert np.array_equal(loaded, data.astype(np.float32).astype(np.float64))

def test_descriptor_file_errors(tmp_path):
  path = tmp_path / 'bad.mhpc'
  path.write_bytes(b'XXXX' + bytes(13))
  with pytest.raises(DescriptorFormatError):
    read_descriptor_file(str(path))
  good = tmp_path / 'good.mhpc'
  write_descriptor_file(str(good), np.ones((2, 2)))
  path.write_bytes(good.read_bytes()[:-1])
  with pytest.raises(DescriptorFormatError):
    read_descriptor_file(str(path))
  with pytest.raises(DescriptorFormatError):
    read_descriptor_file(str(tmp_path / 'missing.mhpc'))
  with pytest.raises(DescriptorFormatError):
    write_descriptor_file(str(path), np.ones((1, 1)), dtype='int8')

def test_block_validation():
  block = DescriptorBlock('img', 2, 3, np.zeros((6, 4)), label='normal')
  assert (block.grid_h, block.grid_w, block.d0) == (2, 3, 4)
  with pytest.raises(DimensionMismatchError):
    DescriptorBlock('img', 2, 2, np.zeros((3, 4)))
  with pytest.raises(DescriptorFormatError):
    DescriptorBlock('img', 1, 1, [[np.nan]])
  with pytest.raises(InvalidDimensionError):
    DescriptorBlock('img', 0, 1, np.zeros((0, 2)))
  with pytest.raises(ManifestError):
    DescriptorBlock('img', 1, 1, [[1.0]], label='weird')

def test_manifest_round_trip(tmp_path):
  rng = np.random.default_rng(0)
  (tmp_path / 'test').mkdir()
  entries = []
  for i, label in enumerate(('normal', 'anomalous')):
    rel = f"test/img{i}.mhpc"
    write_descriptor_file(str(tmp_path / rel), rng.standard_normal((4, 3)), dtype='float64')
    entries.append(ManifestEntry(rel, f"img{i}", 2, 2, 3, label=label))
  manifest_path = str(tmp_path / 'test.yaml')
  DatasetManifest('test', entries, base_dir=str(tmp_path)).save(manifest_path)
  loaded = DatasetManifest.load(manifest_path)
  assert loaded.split == 'test'
  assert len(loaded) == 2
  assert [ e.label for e in loaded.entries ] == ['normal', 'anomalous']
  dataset = ManifestDataset(loaded)
  first = [ b.image_id for b in dataset ]
  second = [ b.image_id for b in dataset ]
  assert first == second == ['img0', 'img1']

def test_manifest_checks(tmp_path):
  with pytest.raises(ManifestError):
    DatasetManifest('train', [ ManifestEntry('x.mhpc', 'x', 1, 1, 2, label='anomalous') ])
  with pytest.raises(ManifestError):
    DatasetManifest('validation', [])
  bad = tmp_path / 'bad.yaml'
  bad.write_text("split: test\nentries:\n  - path: a.mhpc\n")
  with pytest.raises(ManifestError):
    DatasetManifest.load(str(bad))
  write_descriptor_file(str(tmp_path / 'a.mhpc'), np.ones((1, 5)))
  manifest = DatasetManifest('test', [ ManifestEntry('a.mhpc', 'a', 1, 1, 4) ], base_dir=str(tmp_path))
  with pytest.raises(DimensionMismatchError):
    manifest.load_block(manifest.entries[0])
