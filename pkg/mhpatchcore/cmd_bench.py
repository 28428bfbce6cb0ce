#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""
mhpatchcore bench command handler
"""

from typing import Optional, List, Dict, Any, cast

import sys
import logging
import tabulate
import humanize  # type: ignore[import]

from .cli import CommandHandler
from .config import DetectorConfig, load_structured_file
from .dataset import DatasetManifest
from .evalkit import evaluate
from .exceptions import InvalidConfigError
from .internal_types import JsonableDict, Jsonable

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    ('name', 'NAME'),
    ('constructor', 'CONSTRUCTOR'),
    ('K', 'K'),
    ('m_c', 'M_C'),
    ('whitening', 'WHITENING'),
    ('scoring', 'SCORING'),
    ('bank_size', 'BANK'),
    ('k', 'DIM'),
    ('auroc', 'AUROC'),
    ('ram_max', 'PEAK RAM'),
    ('t_fit', 'FIT (s)'),
    ('l_infer', 'LATENCY (ms/img)'),
    ('traversals', 'PASSES'),
    ('peak_rows', 'PEAK ROWS'),
    ('error', 'ERROR'),
  ]

def load_sweep(pathname: str) -> List[JsonableDict]:
  """A sweep file is a mapping with a 'configs' list; each entry is a detector
  config plus an optional 'name'."""
  data = load_structured_file(pathname)
  configs = data.get('configs', [])
  if not isinstance(configs, list) or not all(isinstance(c, dict) for c in configs):
    raise InvalidConfigError(f"Sweep file '{pathname}' must hold a list of config mappings under 'configs'")
  return cast(List[JsonableDict], configs)

def format_table(rows: List[JsonableDict]) -> str:
  otable: List[List[Any]] = []
  for row in rows:
    orow: List[Any] = []
    for key, _ in TABLE_COLUMNS:
      value = row.get(key)
      if value is None:
        orow.append('')
      elif key == 'ram_max':
        orow.append(humanize.naturalsize(value, binary=True))
      elif key in ('auroc', 't_fit', 'l_infer'):
        orow.append(f"{value:.4f}" if key == 'auroc' else f"{value:.3f}")
      else:
        orow.append(value)
    otable.append(orow)
  return tabulate.tabulate(otable, headers=[ h for _, h in TABLE_COLUMNS ], tablefmt='plain')

class CmdBench(CommandHandler):
  train_manifest: DatasetManifest
  test_manifest: DatasetManifest

  def run_one(self, index: int, entry: JsonableDict, seed: Optional[int]) -> JsonableDict:
    values: Dict[str, Any] = dict(entry)
    name = str(values.pop('name', f"config-{index}"))
    row: JsonableDict = dict(
        name=name,
        constructor=cast(Jsonable, values.get('constructor')),
        K=cast(Jsonable, values.get('K')),
        m_c=cast(Jsonable, values.get('m_c')),
        whitening=cast(Jsonable, values.get('whitening')),
        scoring=cast(Jsonable, values.get('scoring')),
        error=None,
      )
    try:
      cfg = DetectorConfig(**values)
      if seed is not None:
        cfg = cfg.replace(seed=seed)
      row.update(constructor=cfg.constructor, K=cfg.K, m_c=cfg.m_c, whitening=cfg.whitening, scoring=cfg.scoring)
      self.cli.banner(f"Bench {name}: {cfg.constructor}, K={cfg.K}, whitening={cfg.whitening}")
      state, fit_telemetry = self.cli.fit_manifest(self.train_manifest, cfg)
      records, score_telemetry = self.cli.score_manifest(state, self.test_manifest)
      report = evaluate(records)
      ram = [ r for r in (fit_telemetry.ram_max, score_telemetry.ram_max) if r is not None ]
      row.update(
          bank_size=state.bank.size,
          k=state.reducer.k,
          auroc=report.auroc,
          ram_max=max(ram) if len(ram) > 0 else None,
          t_fit=fit_telemetry.t_fit,
          l_infer=score_telemetry.l_infer,
          traversals=fit_telemetry.traversals,
          peak_rows=fit_telemetry.peak_rows,
        )
    except Exception as ex:
      logger.warning("Bench config '%s' failed: %s", name, ex)
      row['error'] = self.cli.error_record(ex)['error']
    return row

  def __call__(self) -> int:
    args = self.args
    self.train_manifest = self.cli.load_manifest(args.manifest, split='train')
    self.test_manifest = self.cli.load_manifest(args.test_manifest)
    sweep = load_sweep(self.cli.abspath(args.sweep))
    seed = cast(Optional[int], args.seed)
    rows = [ self.run_one(i, entry, seed) for i, entry in enumerate(sweep) ]
    table = format_table(rows)
    out = self.cli.out_path()
    self.cli.pretty_print(cast(Jsonable, rows), output_file=out)
    print(table, file=sys.stdout if out is not None else sys.stderr)
    return 0
