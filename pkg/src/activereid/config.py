"""Run configuration: every schedule and algorithm knob in one place.

Serialized as a flat ``key = value`` text file; unknown keys are errors so
typos never pass silently.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

STRATEGIES = (
    "view_aware_resample",
    "view_aware_only",
    "mixed_view",
    "random",
    "kmeans",
)

SIGMA_MODES = ("nn_median_sq", "median_sq", "fixed")


@dataclass
class RunConfig:
    # sampling schedule; 0 means "derive from pool sizes at run start"
    s1: int = 0
    s2: int = 0
    s3: int = 0
    s4: int = 0
    t0: int = 5
    K_dist: int = 3
    K_recip: int = 5
    sigma_mode: str = "nn_median_sq"
    sigma_value: float = 1.0
    dbscan_eps: float = 0.01
    dbscan_min_pts: int = 2
    prop_max_iters: int = 50
    prop_tol: float = 1e-6
    refresh_alpha: float = 0.3
    strategy: str = "view_aware_resample"
    max_iterations: int = 100
    stop_when_pools_exhausted: bool = True
    seed: int = 0
    # baseline knobs
    kmeans_k: int = 0  # 0 -> round(sqrt(C))
    # evaluation cadence; 0 disables per-iteration retrieval metrics
    eval_reid_every: int = 0
    tpa_runs: int = 0  # 0 skips the T_pa estimate (AR reported as null)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}; pick one of {SIGMA_MODES}")
        if self.sigma_mode == "fixed" and self.sigma_value <= 0:
            raise ValueError("sigma_value must be > 0 for fixed sigma_mode")
        if self.K_dist < 1 or self.K_recip < 1:
            raise ValueError("K_dist and K_recip must be >= 1")
        if not 0.0 <= self.refresh_alpha <= 1.0:
            raise ValueError("refresh_alpha must be in [0, 1]")
        if self.dbscan_eps <= 0 or self.dbscan_min_pts < 1:
            raise ValueError("dbscan_eps must be > 0 and dbscan_min_pts >= 1")
        if self.prop_max_iters < 1 or self.prop_tol <= 0:
            raise ValueError("prop_max_iters must be >= 1 and prop_tol > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if min(self.s1, self.s2, self.s3, self.s4) < 0 or self.t0 < 1:
            raise ValueError("schedule counts must be >= 0 and t0 >= 1")


def _parse_value(field_type, raw: str):
    if field_type == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if field_type == "int":
        return int(raw)
    if field_type == "float":
        return float(raw)
    return raw


def load_config(path) -> RunConfig:
    """Parse a flat key = value file; '#' starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(types[key], raw)
    return RunConfig(**values)


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(RunConfig):
            fh.write(f"{f.name} = {getattr(config, f.name)}\n")
