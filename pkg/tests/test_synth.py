#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.synth import SynthSpec, SynthGenerator, generate, write_dataset
from mhpatchcore.dataset import ManifestDataset, DatasetManifest
from mhpatchcore.exceptions import InvalidConfigError

def test_generated_blocks():
  spec = SynthSpec(d0=6, spectrum=(1.0, 0.01), n_train=3, n_test_normal=2, n_test_anomalous=2)
  train, test = generate(spec)
  assert [ b.image_id for b in train ] == ['train_00000', 'train_00001', 'train_00002']
  assert [ b.label for b in test ] == ['normal', 'normal', 'anomalous', 'anomalous']
  assert all(b.data.shape == (16, 6) for b in train + test)

def test_displacement_follows_smallest_direction():
  spec = SynthSpec(d0=4, eigenvalues=[4.0, 1.0, 0.25, 0.01], magnitude=6.0)
  d = SynthGenerator(spec).displacement
  assert spec.direction == 3
  assert np.allclose(d, [0.0, 0.0, 0.0, 0.6])
  assert SynthSpec(d0=4, eigenvalues=[4.0, 1.0, 0.25, 0.01], direction='largest').direction == 0

def test_rotation_is_orthonormal():
  r = SynthSpec(d0=5, spectrum=(1.0, 0.1), rotation_seed=7).rotation()
  assert np.allclose(r.T @ r, np.eye(5), atol=1e-12)

def test_same_seed_writes_identical_files(tmp_path):
  spec = SynthSpec.from_jsonable(dict(d0=4, spectrum=[2.0, 0.1], n_train=3, n_test_normal=1, n_test_anomalous=1, seed=5))
  train_a, _ = write_dataset(spec, str(tmp_path / 'a'))
  write_dataset(spec, str(tmp_path / 'b'))
  for name in ('train/train_00000.mhpc', 'test/test_anomalous_00000.mhpc', 'train.yaml', 'test.yaml'):
    assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
  loaded = DatasetManifest.load(str(tmp_path / 'a' / 'train.yaml'))
  blocks = list(ManifestDataset(loaded))
  assert len(blocks) == len(train_a) == 3
  assert blocks[0].data.dtype == np.float64

def test_spec_errors():
  with pytest.raises(InvalidConfigError):
    SynthSpec(d0=3)
  with pytest.raises(InvalidConfigError):
    SynthSpec(d0=3, eigenvalues=[1.0, 2.0])
  with pytest.raises(InvalidConfigError):
    SynthSpec(d0=3, spectrum=(1.0, 0.1), region_h=5)
  with pytest.raises(InvalidConfigError):
    SynthSpec.from_jsonable(dict(d0=3, spectrum=[1.0, 0.1], colour='red'))
