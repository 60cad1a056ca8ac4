"""Active pairwise annotation engine for video person re-identification."""

from .config import RunConfig
from .dataset import DatasetManifest, generate_synthetic, load_manifest, write_manifest
from .labels import LabelState, apply_annotation, init_labels, merge_labels
from .metric import Pair, build_distance_pools, set_to_set_distance
from .oracle import SimulatedOracle
from .orchestrator import Orchestrator, replay

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "LabelState",
    "Orchestrator",
    "Pair",
    "RunConfig",
    "SimulatedOracle",
    "apply_annotation",
    "build_distance_pools",
    "generate_synthetic",
    "init_labels",
    "load_manifest",
    "merge_labels",
    "replay",
    "set_to_set_distance",
    "write_manifest",
]
