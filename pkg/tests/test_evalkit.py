#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

import numpy as np
import pytest

from mhpatchcore.evalkit import (
    auroc,
    macro_average,
    evaluate,
    measure,
    label_to_int,
    peak_rss_bytes,
    Telemetry,
  )
from mhpatchcore.exceptions import UndefinedAUROCError, EmptyInputError

def pairwise_auroc(scores, labels) -> float:
  pos = [ s for s, y in zip(scores, labels) if y == 1 ]
  neg = [ s for s, y in zip(scores, labels) if y == 0 ]
  wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
  return wins / (len(pos) * len(neg))

def fake_clock(*readings: float):
  it = iter(readings)
  return lambda: next(it)

class FakeState:
  fit_stats = dict(traversals=3, peak_rows=1234)

def test_auroc_cases():
  assert auroc([0.1, 0.9], [0, 1]) == 1.0
  assert auroc([0.5, 0.5], [0, 1]) == 0.5
  assert auroc([0.2, 0.8, 0.5], [0, 1, 1]) == 1.0
  assert auroc([0.9, 0.1], [0, 1]) == 0.0

def test_auroc_single_class_is_undefined():
  with pytest.raises(UndefinedAUROCError):
    auroc([0.1, 0.2], [1, 1])
  with pytest.raises(UndefinedAUROCError):
    auroc([0.1, 0.2], [0, 0])

def test_auroc_matches_pairwise_counting():
  rng = np.random.default_rng(0)
  for _ in range(30):
    n = int(rng.integers(2, 201))
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    scores = np.round(rng.standard_normal(n), 1)
    assert auroc(scores, labels) == pytest.approx(pairwise_auroc(scores.tolist(), labels.tolist()), abs=1e-12)

def test_auroc_complement_and_monotone_invariance():
  rng = np.random.default_rng(1)
  scores = rng.standard_normal(80)
  labels = rng.integers(0, 2, size=80)
  labels[:2] = [0, 1]
  value = auroc(scores, labels)
  assert value + auroc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)
  assert auroc(np.exp(scores), labels) == value
  assert auroc(3.0 * scores + 7.0, labels) == value

def test_macro_average_cases():
  assert macro_average([1.0]) == 1.0
  assert macro_average([0.8, 1.0]) == pytest.approx(0.9)
  assert macro_average([0.37] * 15) == pytest.approx(0.37, rel=1e-15)
  with pytest.raises(EmptyInputError):
    macro_average([])

def test_labels():
  assert label_to_int('anomalous') == 1
  assert label_to_int('normal') == 0
  assert label_to_int(None) is None
  with pytest.raises(UndefinedAUROCError):
    label_to_int('broken')

def test_evaluate_records():
  records = [
      dict(image_id='a', s=0.1, s_max=0.3, label='normal'),
      dict(image_id='b', s=0.7, s_max=0.2, label='anomalous'),
      dict(image_id='c', s=0.4, s_max=0.9, label='normal'),
    ]
  report = evaluate(records)
  assert report.auroc == 1.0
  assert (report.n_pos, report.n_neg) == (1, 2)
  assert evaluate(records, score_key='s_max').auroc == 0.0
  assert report.to_jsonable()['per_image'][1] == dict(image_id='b', score=0.7, label=1)
  with pytest.raises(UndefinedAUROCError):
    evaluate([ dict(image_id='x', s=1.0) ])

def test_measure_scoring_latency():
  result, telemetry = measure(lambda: 'done', n_test=10, clock=fake_clock(2.0, 2.5), rss=lambda: 4096)
  assert result == 'done'
  assert telemetry.t_infer == 0.5
  assert telemetry.l_infer == 50.0
  assert telemetry.ram_max == 4096
  assert telemetry.t_fit is None

def test_measure_fit_reads_counters():
  state, telemetry = measure(FakeState, clock=fake_clock(0.0, 3.0), rss=lambda: None)
  assert isinstance(state, FakeState)
  assert telemetry.t_fit == 3.0
  assert telemetry.ram_max is None
  assert telemetry.traversals == 3
  assert telemetry.peak_rows == 1234
  assert telemetry.to_jsonable()['l_infer'] is None

def test_telemetry_latency_needs_images():
  assert Telemetry(t_infer=1.0, n_test=0).l_infer is None
  assert Telemetry(t_infer=1.0, n_test=4).l_infer == 250.0

def test_peak_rss_is_positive_or_absent():
  rss = peak_rss_bytes()
  assert rss is None or rss > 0
