# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Covariance regularisation and whitening.

An empirical covariance is turned into a whitening operator in three steps:
shrinkage toward the scaled identity, an optional eigenvalue floor, and a
Cholesky factorisation with adaptive diagonal jitter. Whitening is the forward
triangular solve L z = x - mu; an explicit inverse is never formed.
"""

from typing import Optional, Tuple, Any
import logging

import numpy as np
import numpy.typing as npt
import scipy.linalg
from sklearn.covariance import shrunk_covariance  # type: ignore[import]

from .internal_types import Matrix, Vector, JsonableDict
from .constants import (
    DEFAULT_DELTA_MIN,
    DEFAULT_DELTA_FACTOR,
    DEFAULT_DELTA_MAX,
    SIGMA_BAR_FLOOR,
  )
from .exceptions import (
    AsymmetricMatrixError,
    InvalidPolicyError,
    InsufficientSamplesError,
    NumericalFailureError,
    NotFactorizableError,
    DimensionMismatchError,
    InvalidDimensionError,
  )
from .util import as_matrix, as_vector

logger = logging.getLogger(__name__)

SHRINKAGE_VARIANTS = ('fixed', 'oas', 'rblw', 'jitter_only')

class ShrinkagePolicy:
  _variant: str
  _lam: Optional[float]

  def __init__(self, variant: str, lam: Optional[float]=None):
    if variant not in SHRINKAGE_VARIANTS:
      raise InvalidPolicyError(f"Unknown shrinkage policy '{variant}'; expected one of {', '.join(SHRINKAGE_VARIANTS)}")
    if variant == 'fixed':
      if lam is None:
        raise InvalidPolicyError("Fixed shrinkage requires a lambda value")
      lam = float(lam)
      if not 0.0 <= lam <= 1.0:
        raise InvalidPolicyError(f"Fixed shrinkage lambda must be in [0, 1], got {lam}")
    else:
      lam = None
    self._variant = variant
    self._lam = lam

  @classmethod
  def fixed(cls, lam: float) -> 'ShrinkagePolicy':
    return cls('fixed', lam)

  @classmethod
  def oas(cls) -> 'ShrinkagePolicy':
    return cls('oas')

  @classmethod
  def rblw(cls) -> 'ShrinkagePolicy':
    return cls('rblw')

  @classmethod
  def jitter_only(cls) -> 'ShrinkagePolicy':
    return cls('jitter_only')

  @property
  def variant(self) -> str:
    return self._variant

  @property
  def lam(self) -> Optional[float]:
    return self._lam

  def to_jsonable(self) -> JsonableDict:
    return dict(variant=self._variant, lam=self._lam)

  @classmethod
  def from_jsonable(cls, data: JsonableDict) -> 'ShrinkagePolicy':
    variant = data.get('variant')
    lam = data.get('lam')
    if not isinstance(variant, str):
      raise InvalidPolicyError(f"Shrinkage policy variant must be a string: {variant!r}")
    assert lam is None or isinstance(lam, (int, float))
    return cls(variant, None if lam is None else float(lam))

  def __eq__(self, other: Any) -> bool:
    return isinstance(other, ShrinkagePolicy) and self._variant == other._variant and self._lam == other._lam

  def __repr__(self) -> str:
    if self._variant == 'fixed':
      return f"ShrinkagePolicy.fixed({self._lam})"
    return f"ShrinkagePolicy.{self._variant}()"

def _check_symmetric(m: Matrix, what: str="covariance") -> None:
  if m.ndim != 2 or m.shape[0] != m.shape[1]:
    raise InvalidDimensionError(f"{what} must be square, got shape {m.shape}")
  scale = max(1.0, float(np.max(np.abs(m))) if m.size > 0 else 1.0)
  if m.size > 0 and float(np.max(np.abs(m - m.T))) > 1e-10 * scale:
    raise AsymmetricMatrixError(f"{what} is not symmetric")

def _analytic_intensity(sigma_hat: Matrix, n: int, variant: str) -> float:
  if n < 2:
    raise InsufficientSamplesError(f"{variant.upper()} shrinkage requires n >= 2, got {n}")
  d = sigma_hat.shape[0]
  tr = float(np.trace(sigma_hat))
  tr2 = float(np.sum(sigma_hat * sigma_hat))   # tr(S^2) for symmetric S
  if variant == 'oas':
    num = (1.0 - 2.0 / d) * tr2 + tr * tr
    den = (n + 1.0 - 2.0 / d) * (tr2 - tr * tr / d)
  else:
    num = ((n - 2.0) / n) * tr2 + tr * tr
    den = (n + 2.0) * (tr2 - tr * tr / d)
  if den <= 0.0:
    # sigma_hat is proportional to the identity
    return 1.0
  return float(np.clip(num / den, 0.0, 1.0))

def shrinkage_intensity(sigma_hat: npt.ArrayLike, policy: ShrinkagePolicy, n: int) -> float:
  """The lambda a policy selects for a given empirical covariance and sample count"""
  s = as_matrix(sigma_hat, what="covariance")
  _check_symmetric(s)
  if policy.variant == 'fixed':
    assert policy.lam is not None
    return policy.lam
  if policy.variant == 'jitter_only':
    return 0.0
  return _analytic_intensity(s, n, policy.variant)

def shrink(sigma_hat: npt.ArrayLike, policy: ShrinkagePolicy, n: int) -> Matrix:
  """(1 - lambda) sigma_hat + lambda * sigma_bar * I, with sigma_bar = tr(sigma_hat)/d"""
  s = as_matrix(sigma_hat, what="covariance")
  _check_symmetric(s)
  if policy.variant == 'jitter_only':
    return s.copy()
  lam = shrinkage_intensity(s, policy, n)
  return np.ascontiguousarray(shrunk_covariance(s, shrinkage=lam), dtype=np.float64)

def eigenvalue_floor(sigma_shr: npt.ArrayLike, eps_rel: float) -> Matrix:
  """Raise every eigenvalue to at least eps_rel * max(|sigma_bar|, 1e-12).

  The input is returned unchanged when no eigenvalue is below the floor.
  """
  s = as_matrix(sigma_shr, what="covariance")
  _check_symmetric(s)
  if eps_rel < 0:
    raise InvalidPolicyError(f"eps_rel must be >= 0, got {eps_rel}")
  d = s.shape[0]
  sigma_bar = float(np.trace(s)) / d
  eps = eps_rel * max(abs(sigma_bar), SIGMA_BAR_FLOOR)
  sym = (s + s.T) / 2.0
  try:
    gamma, vecs = scipy.linalg.eigh(sym)
  except (np.linalg.LinAlgError, ValueError) as ex:
    raise NumericalFailureError(f"Eigendecomposition failed: {ex}") from ex
  if not np.all(np.isfinite(gamma)):
    raise NumericalFailureError("Eigendecomposition produced non-finite eigenvalues")
  if float(gamma.min()) >= eps:
    return s.copy()
  floored = np.maximum(gamma, eps)
  result = (vecs * floored[None, :]) @ vecs.T
  return (result + result.T) / 2.0

def jittered_cholesky(
      sigma_reg: npt.ArrayLike,
      delta_min: float=DEFAULT_DELTA_MIN,
      m: float=DEFAULT_DELTA_FACTOR,
      delta_max: float=DEFAULT_DELTA_MAX,
    ) -> Tuple[Matrix, float]:
  """Lower Cholesky factor of sigma_reg + delta*I for the first delta in
  {0, delta_min, delta_min*m, delta_min*m^2, ...} that factorises.

  Raises:
      NotFactorizableError: every delta up to delta_max failed
  """
  s = as_matrix(sigma_reg, what="covariance")
  _check_symmetric(s)
  if not 0.0 < delta_min < delta_max:
    raise InvalidPolicyError(f"Jitter bounds must satisfy 0 < delta_min < delta_max, got {delta_min}, {delta_max}")
  if not m > 1.0:
    raise InvalidPolicyError(f"Jitter growth factor must be > 1, got {m}")
  eye = np.eye(s.shape[0], dtype=np.float64)
  delta = 0.0
  step = 0
  while delta <= delta_max:
    try:
      lower = scipy.linalg.cholesky(s + delta * eye, lower=True, check_finite=True)
      diag = np.diag(lower)
      if np.all(np.isfinite(lower)) and np.all(diag > 0.0):
        if delta > 0.0:
          logger.debug("Cholesky succeeded with jitter %g", delta)
        return np.ascontiguousarray(lower), delta
    except (np.linalg.LinAlgError, ValueError):
      pass
    delta = delta_min * (m ** step)
    step += 1
  raise NotFactorizableError(f"Covariance is not factorisable with jitter up to {delta_max}")

class CovarianceModel:
  """The whitening operator: reduced-space mean, regularised covariance and its factor.

  Immutable after construction; arrays are exposed read-only.
  """
  _mu: Vector
  _sigma_reg: Matrix
  _L: Matrix
  _delta: float
  _policy: Optional[ShrinkagePolicy]
  _eps_rel: float
  _is_identity: bool

  def __init__(
        self,
        mu: npt.ArrayLike,
        sigma_reg: npt.ArrayLike,
        L: npt.ArrayLike,
        delta: float,
        policy: Optional[ShrinkagePolicy],
        eps_rel: float,
        is_identity: bool=False,
      ):
    self._mu = as_vector(mu, what="mean").copy()
    k = self._mu.shape[0]
    self._sigma_reg = as_matrix(sigma_reg, cols=k, what="regularised covariance").copy()
    self._L = as_matrix(L, cols=k, what="Cholesky factor").copy()
    if self._sigma_reg.shape[0] != k or self._L.shape[0] != k:
      raise DimensionMismatchError(k, self._L.shape[0], what="covariance row count")
    for a in (self._mu, self._sigma_reg, self._L):
      a.flags.writeable = False
    self._delta = float(delta)
    self._policy = policy
    self._eps_rel = float(eps_rel)
    self._is_identity = is_identity

  @classmethod
  def identity(cls, k: int) -> 'CovarianceModel':
    """mu=0, L=I: whitening is the identity map (the Euclidean control)"""
    eye = np.eye(k, dtype=np.float64)
    return cls(np.zeros((k,), dtype=np.float64), eye, eye, 0.0, None, 0.0, is_identity=True)

  @property
  def dim(self) -> int:
    return int(self._mu.shape[0])

  @property
  def mu(self) -> Vector:
    return self._mu

  @property
  def sigma_reg(self) -> Matrix:
    return self._sigma_reg

  @property
  def L(self) -> Matrix:
    return self._L

  @property
  def delta(self) -> float:
    return self._delta

  @property
  def policy(self) -> Optional[ShrinkagePolicy]:
    return self._policy

  @property
  def eps_rel(self) -> float:
    return self._eps_rel

  @property
  def is_identity(self) -> bool:
    return self._is_identity

def regularize(
      sigma_hat: npt.ArrayLike,
      mu: npt.ArrayLike,
      n: int,
      policy: ShrinkagePolicy,
      eps_rel: float,
      delta_min: float=DEFAULT_DELTA_MIN,
      m: float=DEFAULT_DELTA_FACTOR,
      delta_max: float=DEFAULT_DELTA_MAX,
    ) -> CovarianceModel:
  """shrink -> eigenvalue_floor -> jittered_cholesky, packaged as a CovarianceModel"""
  sigma_shr = shrink(sigma_hat, policy, n)
  sigma_reg = eigenvalue_floor(sigma_shr, eps_rel) if eps_rel > 0 else sigma_shr
  lower, delta = jittered_cholesky(sigma_reg, delta_min=delta_min, m=m, delta_max=delta_max)
  logger.info("Covariance regularised: policy=%r eps_rel=%g jitter=%g", policy, eps_rel, delta)
  return CovarianceModel(mu, sigma_reg, lower, delta, policy, eps_rel)

def whiten_batch(model: CovarianceModel, x: npt.ArrayLike) -> Matrix:
  """Row-wise z = L^-1 (x - mu) by forward substitution over the whole batch.

  Each row is solved with the same sequence of operations, so the result for a
  row does not depend on the other rows in the batch.
  """
  rows = as_matrix(x, cols=model.dim, what="reduced batch")
  if rows.shape[0] == 0:
    return np.zeros((0, model.dim), dtype=np.float64)
  if model.is_identity:
    return rows.copy()
  centred = rows - model.mu[None, :]
  lower = model.L
  z = np.empty_like(centred)
  for i in range(model.dim):
    acc = (z[:, :i] * lower[i, :i][None, :]).sum(axis=1)
    z[:, i] = (centred[:, i] - acc) / lower[i, i]
  return z

def whiten(model: CovarianceModel, x: npt.ArrayLike) -> Vector:
  """z = L^-1 (x - mu) for a single reduced vector"""
  v = as_vector(x, dim=model.dim, what="reduced vector")
  return whiten_batch(model, v[None, :])[0]
