#!/usr/bin/env python3
#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""mhpatchcore configuration"""

from typing import Optional, Dict, Any, cast

import os
import json
import yaml

from .internal_types import JsonableDict, Jsonable
from .constants import (
    DEFAULT_RHO,
    DEFAULT_K_MAX,
    DEFAULT_BATCH_SIZE,
    DEFAULT_SHRINKAGE,
    DEFAULT_SHRINKAGE_LAMBDA,
    DEFAULT_EPS_REL,
    DEFAULT_DELTA_MIN,
    DEFAULT_DELTA_FACTOR,
    DEFAULT_DELTA_MAX,
    DEFAULT_BANK_BUDGET,
    DEFAULT_LOCAL_BUDGET,
    DEFAULT_MR_LEVELS,
    DEFAULT_GEORES_ALPHA,
    DEFAULT_REWEIGHT_NEIGHBOURS,
    DEFAULT_SEED,
  )
from .exceptions import InvalidConfigError, InvalidPolicyError, InvalidBudgetError
from .covreg import ShrinkagePolicy, SHRINKAGE_VARIANTS
from .bank import CONSTRUCTOR_KINDS, budget_split

try:
  from yaml import CLoader as Loader, CDumper as Dumper
except ImportError:
  from yaml import Loader, Dumper  #type: ignore[misc]

WHITENING_MODES = ('mahalanobis', 'identity')
SCORING_MODES = ('reweighted', 'max')

def locate_config_file(config_path: Optional[str]=None, starting_dir: Optional[str]=None) -> Optional[str]:
  """Resolve a config path, falling back to $MHPATCHCORE_CONFIG; None means defaults only"""
  if starting_dir is None:
    starting_dir = '.'
  starting_dir = os.path.abspath(os.path.expanduser(starting_dir))
  if config_path is None:
    config_path = os.environ.get('MHPATCHCORE_CONFIG', None)
    if config_path == '':
      config_path = None
  if config_path is None:
    return None
  result = os.path.abspath(os.path.join(starting_dir, os.path.expanduser(config_path)))
  if not os.path.isfile(result):
    raise FileNotFoundError(f"mhpatchcore: Config file not found: '{result}'")
  return result

def load_structured_file(pathname: str) -> JsonableDict:
  """Load a YAML (.yaml/.yml) or JSON file whose top level is a mapping"""
  if not os.path.isfile(pathname):
    raise FileNotFoundError(f"mhpatchcore: File not found: '{pathname}'")
  with open(pathname, encoding='utf-8') as f:
    text = f.read()
  if pathname.endswith('.yaml') or pathname.endswith('.yml'):
    data = yaml.load(text, Loader=Loader)
  else:
    data = json.loads(text)
  if data is None:
    data = {}
  if not isinstance(data, dict):
    raise InvalidConfigError(f"Top level of '{pathname}' must be a mapping")
  return cast(JsonableDict, data)

def save_structured_file(pathname: str, data: Jsonable) -> None:
  if pathname.endswith('.yaml') or pathname.endswith('.yml'):
    text = yaml.dump(data, Dumper=Dumper, sort_keys=True, default_flow_style=False)
  else:
    text = json.dumps(data, indent=2, sort_keys=True) + '\n'
  with open(pathname, 'w', encoding='utf-8') as f:
    f.write(text)

_DEFAULTS: Dict[str, Any] = dict(
    rho=DEFAULT_RHO,
    k_max=DEFAULT_K_MAX,
    batch_size=DEFAULT_BATCH_SIZE,
    whitening='mahalanobis',
    shrinkage=DEFAULT_SHRINKAGE,
    shrinkage_lambda=DEFAULT_SHRINKAGE_LAMBDA,
    eps_rel=DEFAULT_EPS_REL,
    delta_min=DEFAULT_DELTA_MIN,
    delta_factor=DEFAULT_DELTA_FACTOR,
    delta_max=DEFAULT_DELTA_MAX,
    constructor='merge_reduce',
    K=DEFAULT_BANK_BUDGET,
    m_c=DEFAULT_LOCAL_BUDGET,
    mr_levels=DEFAULT_MR_LEVELS,
    geores_alpha=DEFAULT_GEORES_ALPHA,
    geores_q=None,
    scoring='reweighted',
    b=DEFAULT_REWEIGHT_NEIGHBOURS,
    seed=DEFAULT_SEED,
  )

_INT_KEYS = ('k_max', 'batch_size', 'K', 'm_c', 'mr_levels', 'geores_q', 'b', 'seed')
_FLOAT_KEYS = ('rho', 'shrinkage_lambda', 'eps_rel', 'delta_min', 'delta_factor', 'delta_max', 'geores_alpha')

class DetectorConfig:
  """Every tunable of fit and scoring. Immutable; use replace() for variants."""
  _values: Dict[str, Any]

  def __init__(self, **kwargs: Any):
    unknown = sorted(set(kwargs) - set(_DEFAULTS))
    if len(unknown) > 0:
      raise InvalidConfigError(f"Unknown config key(s): {', '.join(unknown)}")
    values = dict(_DEFAULTS)
    values.update(kwargs)
    for key in _INT_KEYS:
      v = values[key]
      if v is None and key == 'geores_q':
        continue
      if isinstance(v, bool) or not isinstance(v, int):
        raise InvalidConfigError(f"Config key '{key}' must be an integer, got {v!r}")
    for key in _FLOAT_KEYS:
      v = values[key]
      if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidConfigError(f"Config key '{key}' must be a number, got {v!r}")
      values[key] = float(v)
    self._values = values
    self.validate()

  @classmethod
  def from_jsonable(cls, data: JsonableDict) -> 'DetectorConfig':
    return cls(**data)

  @classmethod
  def load(cls, pathname: Optional[str]=None, starting_dir: Optional[str]=None) -> 'DetectorConfig':
    config_file = locate_config_file(pathname, starting_dir=starting_dir)
    if config_file is None:
      return cls()
    return cls.from_jsonable(load_structured_file(config_file))

  def to_jsonable(self) -> JsonableDict:
    return dict(self._values)

  def replace(self, **kwargs: Any) -> 'DetectorConfig':
    values = dict(self._values)
    values.update(kwargs)
    return DetectorConfig(**values)

  def validate(self) -> None:
    v = self._values
    if not 0.0 < v['rho'] <= 1.0:
      raise InvalidConfigError(f"rho must be in (0, 1], got {v['rho']}")
    if v['k_max'] < 1:
      raise InvalidConfigError(f"k_max must be >= 1, got {v['k_max']}")
    if v['batch_size'] < 1:
      raise InvalidConfigError(f"batch_size must be >= 1, got {v['batch_size']}")
    if v['whitening'] not in WHITENING_MODES:
      raise InvalidConfigError(f"whitening must be one of {', '.join(WHITENING_MODES)}, got {v['whitening']!r}")
    if v['shrinkage'] not in SHRINKAGE_VARIANTS:
      raise InvalidConfigError(f"shrinkage must be one of {', '.join(SHRINKAGE_VARIANTS)}, got {v['shrinkage']!r}")
    try:
      self.shrinkage_policy  # pylint: disable=pointless-statement
    except InvalidPolicyError as ex:
      raise InvalidConfigError(str(ex)) from ex
    if v['eps_rel'] < 0.0:
      raise InvalidConfigError(f"eps_rel must be >= 0, got {v['eps_rel']}")
    if not 0.0 < v['delta_min'] < v['delta_max']:
      raise InvalidConfigError("Jitter bounds must satisfy 0 < delta_min < delta_max")
    if not v['delta_factor'] > 1.0:
      raise InvalidConfigError(f"delta_factor must be > 1, got {v['delta_factor']}")
    if v['constructor'] not in CONSTRUCTOR_KINDS:
      raise InvalidConfigError(f"constructor must be one of {', '.join(CONSTRUCTOR_KINDS)}, got {v['constructor']!r}")
    if v['K'] < 1 or v['m_c'] < 1 or v['mr_levels'] < 1:
      raise InvalidConfigError("K, m_c and mr_levels must all be >= 1")
    if v['constructor'] == 'geores':
      try:
        _, kt = budget_split(v['K'], v['geores_alpha'])
      except InvalidBudgetError as ex:
        raise InvalidConfigError(str(ex)) from ex
      if v['geores_q'] is not None and v['geores_q'] < kt:
        raise InvalidConfigError(f"geores_q={v['geores_q']} is smaller than the tail budget {kt}")
    if v['scoring'] not in SCORING_MODES:
      raise InvalidConfigError(f"scoring must be one of {', '.join(SCORING_MODES)}, got {v['scoring']!r}")
    if v['b'] < 1:
      raise InvalidConfigError(f"b must be >= 1, got {v['b']}")
    if v['scoring'] == 'reweighted' and v['b'] < 2:
      raise InvalidConfigError("Reweighted scoring needs b >= 2; b=1 makes every weight 0")

  @property
  def shrinkage_policy(self) -> ShrinkagePolicy:
    variant = self._values['shrinkage']
    return ShrinkagePolicy(variant, self._values['shrinkage_lambda'] if variant == 'fixed' else None)

  @property
  def rho(self) -> float:
    return self._values['rho']

  @property
  def k_max(self) -> int:
    return self._values['k_max']

  @property
  def batch_size(self) -> int:
    return self._values['batch_size']

  @property
  def whitening(self) -> str:
    return self._values['whitening']

  @property
  def shrinkage(self) -> str:
    return self._values['shrinkage']

  @property
  def shrinkage_lambda(self) -> float:
    return self._values['shrinkage_lambda']

  @property
  def eps_rel(self) -> float:
    return self._values['eps_rel']

  @property
  def delta_min(self) -> float:
    return self._values['delta_min']

  @property
  def delta_factor(self) -> float:
    return self._values['delta_factor']

  @property
  def delta_max(self) -> float:
    return self._values['delta_max']

  @property
  def constructor(self) -> str:
    return self._values['constructor']

  @property
  def K(self) -> int:
    return self._values['K']

  @property
  def m_c(self) -> int:
    return self._values['m_c']

  @property
  def mr_levels(self) -> int:
    return self._values['mr_levels']

  @property
  def geores_alpha(self) -> float:
    return self._values['geores_alpha']

  @property
  def geores_q(self) -> Optional[int]:
    return self._values['geores_q']

  @property
  def scoring(self) -> str:
    return self._values['scoring']

  @property
  def b(self) -> int:
    return self._values['b']

  @property
  def seed(self) -> int:
    return self._values['seed']

  def __eq__(self, other: Any) -> bool:
    return isinstance(other, DetectorConfig) and self._values == other._values

  def __repr__(self) -> str:
    return f"DetectorConfig({json.dumps(self._values, sort_keys=True)})"
