# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""mhpatchcore CLI"""

from typing import Optional, Sequence, List, TextIO, Type, Tuple, cast

import os
import sys
import json
import shutil
import logging
import argparse
import subprocess
import argcomplete # type: ignore[import]
import colorama # type: ignore[import]
from colorama import Fore, Style

from .config import DetectorConfig, load_structured_file
from .dataset import DatasetManifest, ManifestDataset, write_descriptor_file
from .detector import DetectorState, fit, save, load, score_image, anomaly_map
from .evalkit import measure, evaluate, Telemetry
from .synth import SynthSpec, write_dataset
from .exceptions import FitStageError, DimensionMismatchError, ManifestError
from .internal_types import Jsonable, JsonableDict
from .constants import DEFAULT_MAP_UPSCALE
from .version import __version__ as pkg_version
from .util import full_type

logger = logging.getLogger(__name__)

def is_colorizable(stream: TextIO) -> bool:
  is_a_tty = hasattr(stream, 'isatty') and stream.isatty()
  return is_a_tty


class CmdExitError(RuntimeError):
  exit_code: int

  def __init__(self, exit_code: int, msg: Optional[str]=None):
    if msg is None:
      msg = f"Command exited with return code {exit_code}"
    super().__init__(msg)
    self.exit_code = exit_code

class ArgparseExitError(CmdExitError):
  pass

class NoExitArgumentParser(argparse.ArgumentParser):
  def exit(self, status=0, message=None):
    if message:
      self._print_message(message, sys.stderr)
    raise ArgparseExitError(status, message)


class CommandLineInterface:
  _argv: Optional[Sequence[str]]
  _parser: argparse.ArgumentParser
  _args: argparse.Namespace
  _cwd: str

  _raw_stderr: TextIO = sys.stderr
  _compact: bool = False
  _output_file: Optional[str] = None
  _encoding: str = 'utf-8'

  _colorize_stdout: bool = False
  _colorize_stderr: bool = False

  def __init__(self, argv: Optional[Sequence[str]]=None):
    self._argv = argv

  def ecolor(self, codes: str) -> str:
    return codes if self._colorize_stderr else ""

  @property
  def cwd(self) -> str:
    return self._cwd

  def abspath(self, path: str) -> str:
    return os.path.abspath(os.path.join(self.cwd, os.path.expanduser(path)))

  def pretty_print(
        self,
        value: Jsonable,
        compact: Optional[bool]=None,
        colorize: Optional[bool]=None,
        output_file: Optional[str]=None,
      ):
    """Emit a JSON value to stdout, or to output_file (default: the -o file)"""
    if compact is None:
      compact = self._compact
    if colorize is None:
      colorize = True

    def emit_to(f: TextIO):
      final_colorize = colorize and f is sys.stdout and self._colorize_stdout and shutil.which('jq') is not None

      if not final_colorize:
        if compact:
          json.dump(value, f, separators=(',', ':'), sort_keys=True)
        else:
          json.dump(value, f, indent=2, sort_keys=True)
        f.write('\n')
      else:
        jq_input = json.dumps(value, separators=(',', ':'), sort_keys=True)
        cmd = [ 'jq' ]
        if compact:
          cmd.append('-c')
        cmd.append('.')
        with subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=f) as proc:
          proc.communicate(input=jq_input.encode('utf-8'))
          exit_code = proc.returncode
        if exit_code != 0:
          raise subprocess.CalledProcessError(exit_code, cmd)

    if output_file is None:
      output_file = self._output_file
    if output_file is None:
      emit_to(sys.stdout)
    else:
      with open(output_file, "w", encoding=self._encoding) as f:
        emit_to(f)

  def banner(self, text: str) -> None:
    if not is_colorizable(self._raw_stderr):
      return
    print(f"\n{self.ecolor(Fore.GREEN)}===============================================================================", file=sys.stderr)
    print(f"     {text}", file=sys.stderr)
    print(f"==============================================================================={self.ecolor(Style.RESET_ALL)}\n", file=sys.stderr)

  def out_path(self) -> Optional[str]:
    out = cast(Optional[str], getattr(self._args, 'out', None))
    return None if out is None else self.abspath(out)

  def load_config(self) -> DetectorConfig:
    args = self._args
    cfg = DetectorConfig.load(cast(Optional[str], args.config), starting_dir=self.cwd)
    seed = cast(Optional[int], args.seed)
    if seed is not None:
      cfg = cfg.replace(seed=seed)
    return cfg

  def load_manifest(self, pathname: str, split: Optional[str]=None) -> DatasetManifest:
    manifest = DatasetManifest.load(self.abspath(pathname))
    if split is not None and manifest.split != split:
      raise ManifestError(f"Manifest '{pathname}' is a {manifest.split} manifest; a {split} manifest is required")
    return manifest

  def cmd_bare(self) -> int:
    print("A command is required", file=sys.stderr)
    return 1

  def cmd_version(self) -> int:
    self.pretty_print(pkg_version)
    return 0

  def cmd_synth(self) -> int:
    args = self._args
    spec = SynthSpec.load(self.abspath(args.config))
    seed = cast(Optional[int], args.seed)
    if seed is not None:
      spec.seed = seed
    out_dir = self.abspath(args.out)
    train, test = write_dataset(spec, out_dir)
    self.pretty_print(dict(
        out=out_dir,
        train_manifest=os.path.join(out_dir, 'train.yaml'),
        test_manifest=os.path.join(out_dir, 'test.yaml'),
        n_train=len(train),
        n_test=len(test),
      ), output_file=None)
    return 0

  def fit_manifest(self, manifest: DatasetManifest, cfg: DetectorConfig) -> Tuple[DetectorState, Telemetry]:
    return measure(lambda: fit(ManifestDataset(manifest), cfg))

  def score_manifest(self, state: DetectorState, manifest: DatasetManifest) -> Tuple[List[JsonableDict], Telemetry]:
    for entry in manifest.entries:
      if entry.d0 != state.d0:
        raise DimensionMismatchError(state.d0, entry.d0, what=f"descriptor dimension of '{entry.image_id}'")
    scores, telemetry = measure(
        lambda: [ score_image(state, block) for block in ManifestDataset(manifest) ],
        n_test=len(manifest))
    maps_dir = cast(Optional[str], getattr(self._args, 'maps', None))
    if maps_dir is not None:
      maps_dir = self.abspath(maps_dir)
      os.makedirs(maps_dir, exist_ok=True)
      map_size = cast(Optional[List[int]], getattr(self._args, 'map_size', None))
      for score in scores:
        gh, gw = score.patch_scores.shape
        out_h, out_w = (gh * DEFAULT_MAP_UPSCALE, gw * DEFAULT_MAP_UPSCALE) if map_size is None else map_size
        write_descriptor_file(
            os.path.join(maps_dir, f"{score.image_id}.mhpc"),
            anomaly_map(score.patch_scores, out_h, out_w),
            dtype='float64')
    return [ s.to_jsonable() for s in scores ], telemetry

  def emit_telemetry(self, what: str, telemetry: Telemetry) -> None:
    """Write telemetry to --telemetry FILE, else log it at INFO; run records never carry timings"""
    pathname = cast(Optional[str], getattr(self._args, 'telemetry', None))
    if pathname is None:
      logger.info("%s telemetry: %s", what, json.dumps(telemetry.to_jsonable(), sort_keys=True))
    else:
      self.pretty_print(telemetry.to_jsonable(), output_file=self.abspath(pathname))

  def cmd_fit(self) -> int:
    args = self._args
    manifest = self.load_manifest(args.manifest, split='train')
    cfg = self.load_config()
    self.banner(f"Fitting detector on {len(manifest)} images ({cfg.constructor}, K={cfg.K}, whitening={cfg.whitening})")
    state, telemetry = self.fit_manifest(manifest, cfg)
    state_path = self.abspath(args.state)
    save(state, state_path)
    self.emit_telemetry('fit', telemetry)
    self.pretty_print(dict(
        state=state_path,
        config=cfg.to_jsonable(),
        fit_stats=state.fit_stats,
      ), output_file=self.out_path())
    return 0

  def cmd_score(self) -> int:
    args = self._args
    state = load(self.abspath(args.state))
    manifest = self.load_manifest(args.manifest)
    records, telemetry = self.score_manifest(state, manifest)
    self.emit_telemetry('score', telemetry)
    self.pretty_print(dict(scores=cast(Jsonable, records)), output_file=self.out_path())
    return 0

  def cmd_eval(self) -> int:
    args = self._args
    data = load_structured_file(self.abspath(args.scores))
    records = data.get('scores', [])
    assert isinstance(records, list)
    report = evaluate(cast(List[JsonableDict], records))
    self.pretty_print(report.to_jsonable(), output_file=self.out_path())
    return 0

  def run_cmd_class(self, cmd_class: Type['CommandHandler']):
    exit_code = cmd_class(self)()
    return exit_code

  def cmd_bench(self) -> int:
    from .cmd_bench import CmdBench as cmd_class # pylint: disable=cyclic-import
    return self.run_cmd_class(cmd_class)

  def error_record(self, ex: BaseException) -> JsonableDict:
    ex_desc = str(ex)
    if ex_desc == '':
      ex_desc = full_type(ex)
    return dict(
        error=ex_desc,
        type=full_type(ex),
        stage=ex.stage if isinstance(ex, FitStageError) else None,
      )

  def run(self) -> int:
    """Run the mhpatchcore command-line tool with provided arguments

    Args:
        argv (Optional[Sequence[str]], optional):
            A list of commandline arguments (NOT including the program as argv[0]!),
            or None to use sys.argv[1:]. Defaults to None.

    Returns:
        int: The exit code that would be returned if this were run as a standalone command.
    """
    parser = NoExitArgumentParser(prog='mhpatchcore', description="Bounded-memory Mahalanobis PatchCore anomaly detection.")

    # ======================= Main command

    self._parser = parser
    parser.add_argument('--traceback', "--tb", action='store_true', default=False,
                        help='Display detailed exception information')
    parser.add_argument('-M', '--monochrome', action='store_true', default=False,
                        help='Output to stdout/stderr in monochrome. Default is to colorize if stream is a compatible terminal')
    parser.add_argument('-c', '--compact', action='store_true', default=False,
                        help='Compact instead of pretty-printed output')
    parser.add_argument('-o', '--output', dest="output_file", default=None,
                        help='Write output value to the specified file instead of stdout')
    parser.add_argument('--text-encoding', default='utf-8',
                        help='The encoding used for text. Default  is utf-8')
    parser.add_argument('-C', '--cwd', default='.',
                        help="Change the effective directory used to resolve relative paths")
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Logging level for messages written to stderr. Default is WARNING')
    parser.add_argument('-v', '--verbose', action='store_true', default=False,
                        help='Shorthand for --log-level INFO')
    parser.set_defaults(func=self.cmd_bare)

    subparsers = parser.add_subparsers(
                        title='Commands',
                        description='Valid commands',
                        help='Additional help available with "mhpatchcore <command-name> -h"')


    # ======================= version

    parser_version = subparsers.add_parser('version',
                            description='''Display version information. JSON-quoted string.''')
    parser_version.set_defaults(func=self.cmd_version)

    # ======================= synth

    parser_synth = subparsers.add_parser('synth',
                            description='''Generate a synthetic anisotropic-Gaussian descriptor dataset with train and test manifests.''')
    parser_synth.add_argument('--config', required=True,
                        help='YAML or JSON file describing the synthetic dataset')
    parser_synth.add_argument('--out', required=True,
                        help='Directory to write descriptor files and manifests into')
    parser_synth.add_argument('--seed', type=int, default=None,
                        help='Override the seed in the dataset description')
    parser_synth.set_defaults(func=self.cmd_synth)

    # ======================= fit

    parser_fit = subparsers.add_parser('fit',
                            description='''Train a detector on a train manifest and save its state.''')
    parser_fit.add_argument('--manifest', required=True,
                        help='Train manifest')
    parser_fit.add_argument('--config', default=None,
                        help='Detector config file (YAML or JSON). Default is $MHPATCHCORE_CONFIG, else built-in defaults')
    parser_fit.add_argument('--state', required=True,
                        help='Where to write the detector state')
    parser_fit.add_argument('--out', default=None,
                        help='Write the run record to this file instead of stdout')
    parser_fit.add_argument('--seed', type=int, default=None,
                        help='Override the config seed')
    parser_fit.add_argument('--telemetry', default=None,
                        help='Write fit telemetry (peak RAM, fit time, passes) to this file. Default is to log it at INFO')
    parser_fit.set_defaults(func=self.cmd_fit)

    # ======================= score

    parser_score = subparsers.add_parser('score',
                            description='''Score every image of a manifest with a saved detector.''')
    parser_score.add_argument('--state', required=True,
                        help='Detector state written by "fit"')
    parser_score.add_argument('--manifest', required=True,
                        help='Manifest of images to score')
    parser_score.add_argument('--out', default=None,
                        help='Write score records to this file instead of stdout')
    parser_score.add_argument('--maps', default=None,
                        help='Directory to write per-image anomaly maps into')
    parser_score.add_argument('--map-size', type=int, nargs=2, metavar=('H', 'W'), default=None,
                        help=f'Anomaly map size. Default is the patch grid scaled by {DEFAULT_MAP_UPSCALE}')
    parser_score.add_argument('--telemetry', default=None,
                        help='Write scoring telemetry (peak RAM, latency) to this file. Default is to log it at INFO')
    parser_score.set_defaults(func=self.cmd_score)

    # ======================= eval

    parser_eval = subparsers.add_parser('eval',
                            description='''Compute image-level AUROC from labelled score records.''')
    parser_eval.add_argument('--scores', required=True,
                        help='Score records written by "score"')
    parser_eval.add_argument('--out', default=None,
                        help='Write the report to this file instead of stdout')
    parser_eval.set_defaults(func=self.cmd_eval)

    # ======================= bench

    parser_bench = subparsers.add_parser('bench',
                            description='''Fit, score and evaluate every configuration of a sweep.''')
    parser_bench.add_argument('--manifest', required=True,
                        help='Train manifest')
    parser_bench.add_argument('--test-manifest', required=True,
                        help='Labelled test manifest')
    parser_bench.add_argument('--sweep', required=True,
                        help='Sweep file: a list of named detector configs')
    parser_bench.add_argument('--out', default=None,
                        help='Write the JSON rows to this file; the text table then goes to stdout')
    parser_bench.add_argument('--seed', type=int, default=None,
                        help='Override the seed of every config')
    parser_bench.set_defaults(func=self.cmd_bench)

    # =========================================================

    argcomplete.autocomplete(parser)
    try:
      args = parser.parse_args(self._argv)
    except ArgparseExitError as ex:
      return ex.exit_code
    traceback: bool = args.traceback
    try:
      self._args = args
      self._raw_stderr = sys.stderr
      self._compact = args.compact
      self._output_file = args.output_file
      self._encoding = args.text_encoding
      monochrome: bool = args.monochrome
      if not monochrome:
        self._colorize_stdout = is_colorizable(sys.stdout)
        self._colorize_stderr = is_colorizable(sys.stderr)
        if self._colorize_stdout or self._colorize_stderr:
          colorama.init(wrap=False)
          if self._colorize_stdout:
            new_stream = colorama.AnsiToWin32(sys.stdout)
            if new_stream.should_wrap():
              sys.stdout = new_stream
          if self._colorize_stderr:
            new_stream = colorama.AnsiToWin32(sys.stderr)
            if new_stream.should_wrap():
              sys.stderr = new_stream
      logging.basicConfig(
          level=logging.INFO if args.verbose else getattr(logging, args.log_level),
          format='%(asctime)s %(levelname)s %(name)s: %(message)s',
          stream=sys.stderr,
        )
      self._cwd = os.path.abspath(os.path.expanduser(args.cwd))
      if self._output_file is not None:
        self._output_file = self.abspath(self._output_file)
      rc = args.func()
    except Exception as ex:
      if isinstance(ex, CmdExitError):
        rc = ex.exit_code
      else:
        rc = 1
      if rc != 0:
        if traceback:
          raise

        record = self.error_record(ex)
        print(f"{self.ecolor(Fore.RED)}mhpatchcore: error: {record['error']}{self.ecolor(Style.RESET_ALL)}", file=sys.stderr)
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return rc

  @property
  def args(self) -> argparse.Namespace:
    return self._args

def run(argv: Optional[Sequence[str]]=None) -> int:
  try:
    rc = CommandLineInterface(argv).run()
  except CmdExitError as ex:
    rc = ex.exit_code
  return rc

class CommandHandler:
  cli: CommandLineInterface
  args: argparse.Namespace

  def __init__(self, cli: CommandLineInterface):
    self.cli = cli
    self.args = cli.args

  def __call__(self) -> int:
    raise NotImplementedError(f"{full_type(self)} has not implemented __call__")
