# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Exceptions defined by this package"""

from typing import Optional

class MhpcError(Exception):
  """Base class for all error exceptions defined by this package."""
  #pass

class InvalidDimensionError(MhpcError):
  pass

class DimensionMismatchError(MhpcError):
  _expected: int
  _found: int

  def __init__(self, expected: int, found: int, what: str="dimension"):
    super().__init__(f"{what} mismatch: expected {expected}, found {found}")
    self._expected = expected
    self._found = found

  @property
  def expected(self) -> int:
    return self._expected

  @property
  def found(self) -> int:
    return self._found

class EmptyBatchError(MhpcError):
  pass

class InsufficientSamplesError(MhpcError):
  pass

class AsymmetricMatrixError(MhpcError):
  pass

class InvalidPolicyError(MhpcError):
  pass

class NumericalFailureError(MhpcError):
  pass

class NotFactorizableError(MhpcError):
  pass

class RankDeficientSeedError(MhpcError):
  pass

class UnfittedReducerError(MhpcError):
  pass

class EmptyInputError(MhpcError):
  pass

class InvalidBudgetError(MhpcError):
  pass

class UnderfilledBankError(MhpcError):
  pass

class NonReiterableStreamError(MhpcError):
  pass

class NonReiterableDatasetError(MhpcError):
  pass

class EmptyBankError(MhpcError):
  pass

class InvalidConfigError(MhpcError):
  pass

class VersionMismatchError(MhpcError):
  pass

class ChecksumError(MhpcError):
  pass

class TruncatedFileError(MhpcError):
  pass

class DescriptorFormatError(MhpcError):
  pass

class ManifestError(MhpcError):
  pass

class UndefinedAUROCError(MhpcError):
  pass

class FitStageError(MhpcError):
  """Raised by fit when one of its stages fails; names the stage and chains the cause."""
  _stage: str

  def __init__(self, stage: str, cause: Optional[BaseException]=None):
    msg = f"fit failed in stage '{stage}'"
    if cause is not None:
      cause_desc = str(cause)
      if cause_desc == '':
        cause_desc = type(cause).__name__
      msg += f": {cause_desc}"
    super().__init__(msg)
    self._stage = stage

  @property
  def stage(self) -> str:
    return self._stage
