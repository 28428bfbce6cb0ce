#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import pytest

from mhpatchcore.config import DetectorConfig, locate_config_file
from mhpatchcore.covreg import ShrinkagePolicy
from mhpatchcore.exceptions import InvalidConfigError

def test_defaults():
  cfg = DetectorConfig()
  assert (cfg.rho, cfg.shrinkage_lambda, cfg.eps_rel, cfg.K, cfg.m_c, cfg.b) == (0.99, 0.07, 1e-8, 1000, 256, 9)
  assert cfg.constructor == 'merge_reduce'
  assert cfg.shrinkage_policy == ShrinkagePolicy.fixed(0.07)

def test_geores_configuration_is_accepted():
  cfg = DetectorConfig(constructor='geores', K=2000, geores_alpha=0.90)
  assert cfg.K == 2000
  with pytest.raises(InvalidConfigError):
    DetectorConfig(constructor='geores', K=1)
  with pytest.raises(InvalidConfigError):
    DetectorConfig(constructor='geores', K=100, geores_alpha=0.9, geores_q=5)

@pytest.mark.parametrize('kwargs', [
    dict(rho=0.0),
    dict(rho=1.5),
    dict(scoring='reweighted', b=1),
    dict(whitening='cosine'),
    dict(shrinkage='ledoit'),
    dict(shrinkage_lambda=2.0),
    dict(constructor='random'),
    dict(K=0),
    dict(delta_min=1.0, delta_max=0.5),
    dict(K='many'),
    dict(unknown_key=1),
  ])
def test_invalid_values(kwargs):
  with pytest.raises(InvalidConfigError):
    DetectorConfig(**kwargs)

def test_max_scoring_allows_b_one():
  assert DetectorConfig(scoring='max', b=1).b == 1

def test_load_yaml_and_replace(tmp_path, monkeypatch):
  path = tmp_path / 'cfg.yaml'
  path.write_text("K: 200\nshrinkage: oas\nwhitening: identity\n")
  cfg = DetectorConfig.load(str(path))
  assert (cfg.K, cfg.shrinkage, cfg.whitening) == (200, 'oas', 'identity')
  assert cfg.replace(seed=3).seed == 3
  assert cfg.seed == 0
  assert DetectorConfig.from_jsonable(cfg.to_jsonable()) == cfg
  monkeypatch.setenv('MHPATCHCORE_CONFIG', str(path))
  assert DetectorConfig.load().K == 200
  monkeypatch.setenv('MHPATCHCORE_CONFIG', '')
  assert locate_config_file() is None
  with pytest.raises(FileNotFoundError):
    locate_config_file(str(tmp_path / 'missing.yaml'))
