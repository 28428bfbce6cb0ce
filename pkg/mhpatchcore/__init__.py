# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""Package mhpatchcore provides a bounded-memory, covariance-aware PatchCore
anomaly detector over precomputed patch descriptors
"""

from .version import __version__

from .internal_types import Jsonable, JsonableDict, JsonableList

from .exceptions import (
    MhpcError,
    FitStageError,
    DimensionMismatchError,
  )

from .moments import MomentState
from .covreg import ShrinkagePolicy, CovarianceModel, whiten, whiten_batch
from .reducer import Reducer, ReducerFit
from .bank import (
    MemoryBank,
    MergeReduceConstructor,
    KMeansConstructor,
    greedy_coreset,
    geores,
    budget_split,
    pi_k_complete,
  )
from .index import FlatIndex
from .config import DetectorConfig
from .dataset import DescriptorBlock, DatasetManifest, ManifestDataset
from .detector import DetectorState, ImageScore, fit, score_patches, score_image, anomaly_map
from .evalkit import auroc, macro_average, measure, EvalReport, Telemetry
from .util import full_type
