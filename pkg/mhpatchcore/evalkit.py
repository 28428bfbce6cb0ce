# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Image-level AUROC, macro-averaging and resource telemetry"""

from typing import Optional, List, Sequence, Callable, Tuple, TypeVar, Any, Union
import logging
import sys
import time

import numpy as np
import numpy.typing as npt
from scipy.stats import rankdata  # type: ignore[import]

from .internal_types import JsonableDict
from .exceptions import UndefinedAUROCError, EmptyInputError, InvalidDimensionError

logger = logging.getLogger(__name__)

T = TypeVar('T')

LabelLike = Union[int, str, None]

def label_to_int(label: LabelLike) -> Optional[int]:
  """1 for anomalous, 0 for normal, None if unlabelled"""
  if label is None:
    return None
  if label in ('anomalous', 1, True):
    return 1
  if label in ('normal', 0, False):
    return 0
  raise UndefinedAUROCError(f"Unrecognised label {label!r}")

def auroc(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
  """Mann-Whitney AUROC with average ranks for ties.

  Equals the probability that a random positive (label 1) scores above a random
  negative, counting ties as one half.
  """
  s = np.asarray(scores, dtype=np.float64)
  y = np.asarray(labels)
  if s.ndim != 1 or y.shape != s.shape:
    raise InvalidDimensionError(f"scores and labels must be 1-D of equal length, got {s.shape} and {y.shape}")
  pos = y == 1
  n_pos = int(pos.sum())
  n_neg = int(s.shape[0]) - n_pos
  if n_pos == 0 or n_neg == 0:
    raise UndefinedAUROCError(f"AUROC needs both classes; got {n_pos} positive and {n_neg} negative")
  ranks = rankdata(s, method='average')
  u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
  return u / (n_pos * n_neg)

def macro_average(values: Sequence[float]) -> float:
  if len(values) == 0:
    raise EmptyInputError("Macro-average of an empty list is undefined")
  return float(np.mean(np.asarray(values, dtype=np.float64)))

class EvalReport:
  auroc: float
  n_pos: int
  n_neg: int
  per_image: List[Tuple[str, float, int]]

  def __init__(self, auroc_value: float, n_pos: int, n_neg: int, per_image: List[Tuple[str, float, int]]):
    self.auroc = auroc_value
    self.n_pos = n_pos
    self.n_neg = n_neg
    self.per_image = per_image

  def to_jsonable(self) -> JsonableDict:
    return dict(
        auroc=self.auroc,
        n_pos=self.n_pos,
        n_neg=self.n_neg,
        per_image=[ dict(image_id=i, score=s, label=y) for i, s, y in self.per_image ],
      )

def evaluate(records: Sequence[JsonableDict], score_key: str='s') -> EvalReport:
  """AUROC over per-image score records carrying 'image_id', a score and a 'label'"""
  per_image: List[Tuple[str, float, int]] = []
  for record in records:
    label = label_to_int(record.get('label'))  # type: ignore[arg-type]
    if label is None:
      raise UndefinedAUROCError(f"Score record for '{record.get('image_id')}' has no label")
    score = record.get(score_key)
    assert isinstance(score, (int, float))
    per_image.append((str(record.get('image_id')), float(score), label))
  labels = [ y for _, _, y in per_image ]
  value = auroc([ s for _, s, _ in per_image ], labels)
  n_pos = sum(labels)
  return EvalReport(value, n_pos, len(labels) - n_pos, per_image)

def peak_rss_bytes() -> Optional[int]:
  """Peak resident set size of this process, or None where the platform has no readout"""
  try:
    import resource  # pylint: disable=import-outside-toplevel
  except ImportError:
    return None
  try:
    peak = int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)
  except (OSError, ValueError):
    return None
  # ru_maxrss is in bytes on macOS and kilobytes elsewhere
  return peak if sys.platform == 'darwin' else peak * 1024

class Telemetry:
  ram_max: Optional[int]
  t_fit: Optional[float]
  t_infer: Optional[float]
  l_infer: Optional[float]
  n_test: Optional[int]
  traversals: Optional[int]
  peak_rows: Optional[int]

  def __init__(
        self,
        ram_max: Optional[int]=None,
        t_fit: Optional[float]=None,
        t_infer: Optional[float]=None,
        n_test: Optional[int]=None,
        traversals: Optional[int]=None,
        peak_rows: Optional[int]=None,
      ):
    self.ram_max = ram_max
    self.t_fit = t_fit
    self.t_infer = t_infer
    self.n_test = n_test
    self.l_infer = None if t_infer is None or not n_test else 1000.0 * t_infer / n_test
    self.traversals = traversals
    self.peak_rows = peak_rows

  def to_jsonable(self) -> JsonableDict:
    return dict(
        ram_max=self.ram_max,
        t_fit=self.t_fit,
        t_infer=self.t_infer,
        l_infer=self.l_infer,
        n_test=self.n_test,
        traversals=self.traversals,
        peak_rows=self.peak_rows,
      )

def measure(
      run: Callable[[], T],
      n_test: Optional[int]=None,
      clock: Callable[[], float]=time.perf_counter,
      rss: Callable[[], Optional[int]]=peak_rss_bytes,
    ) -> Tuple[T, Telemetry]:
  """Run and time a fit (n_test None) or a scoring run over n_test images.

  For a fit, the traversal count and logical peak-row counter are taken from
  the returned state's fit_stats.
  """
  start = clock()
  result = run()
  elapsed = clock() - start
  ram_max = rss()
  if ram_max is None:
    logger.warning("Peak resident memory is not available on this platform")
  if n_test is not None:
    return result, Telemetry(ram_max=ram_max, t_infer=elapsed, n_test=n_test)
  stats: Any = getattr(result, 'fit_stats', None)
  traversals = stats.get('traversals') if isinstance(stats, dict) else None
  peak_rows = stats.get('peak_rows') if isinstance(stats, dict) else None
  return result, Telemetry(ram_max=ram_max, t_fit=elapsed, traversals=traversals, peak_rows=peak_rows)
