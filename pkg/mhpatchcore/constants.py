# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Constants and configuration defaults used by mhpatchcore"""

# Reducer
DEFAULT_RHO: float = 0.99
DEFAULT_K_MAX: int = 512
DEFAULT_BATCH_SIZE: int = 1024

# Covariance regularisation
DEFAULT_SHRINKAGE: str = 'fixed'
DEFAULT_SHRINKAGE_LAMBDA: float = 0.07
DEFAULT_EPS_REL: float = 1e-8
DEFAULT_DELTA_MIN: float = 1e-12
DEFAULT_DELTA_FACTOR: float = 10.0
DEFAULT_DELTA_MAX: float = 1.0
SIGMA_BAR_FLOOR: float = 1e-12

# Memory bank
DEFAULT_BANK_BUDGET: int = 1000
DEFAULT_LOCAL_BUDGET: int = 256
DEFAULT_MR_LEVELS: int = 3
DEFAULT_GEORES_ALPHA: float = 0.95
GEORES_MIN_Q: int = 1024
GEORES_Q_PER_TAIL: int = 16

# Scoring
DEFAULT_REWEIGHT_NEIGHBOURS: int = 9
DEFAULT_SEED: int = 0

# Tolerance used when comparing cumulative explained-variance fractions with rho
RHO_TOLERANCE: float = 1e-12

# Maximum number of float64 elements materialised at once by distance computations
DISTANCE_CHUNK_ELEMENTS: int = 1 << 22

# File formats
DESCRIPTOR_MAGIC: bytes = b'MHPC'
DESCRIPTOR_FORMAT_VERSION: int = 1
DESCRIPTOR_DTYPE_FLOAT32: int = 0
DESCRIPTOR_DTYPE_FLOAT64: int = 1

STATE_MAGIC: bytes = b'MHPCSTAT'
STATE_FORMAT_VERSION: int = 1

MANIFEST_VERSION: int = 1

DEFAULT_MAP_UPSCALE: int = 8
