"""Experiment configuration: TOML file with documented keys and defaults."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dataset import PROPERTIES
from .errors import UsageError

DEFAULT_CONFIG_TOML = """\
# steelprop experiment configuration

[experiment]
out_dir = "runs/default"
seed = 20180619
jobs = 1

[dataset]
csv = "alloys.csv"
properties = ["hardness", "tensile", "yield", "elongation"]
encoding = "ordinal"        # or "one_hot"
augment_cap = 4096

[folds]
k = 10
grouped = true

[synth]
records = 207
# per-property Gaussian noise on the generated targets
noise_hardness = 6.0
noise_tensile = 18.0
noise_yield = 15.0
noise_elongation = 1.2

[linear]
degrees = [1, 2, 3]
lambdas = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]
interactions = false

[neural]
hidden = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
trainers = ["lm"]           # gd | gd_momentum | rprop | lm | lm_l2
max_epochs = 200
patience = 6

[svr]
kernels = ["gaussian"]      # linear | polynomial | gaussian
C = 1.0
epsilon = 0.1
tolerance = 1e-3
max_passes = 200000
cache_mb = 64.0
# SMO training-set cap; larger fold-train sets are subsampled
# deterministically (seeded) down to this size
max_train = 2000

[tree]
min_leaf = 1
gap_tol = 0.05
"""


@dataclass
class Config:
    out_dir: str = "runs/default"
    seed: int = 20180619
    jobs: int = 1
    dataset_csv: str = "alloys.csv"
    properties: tuple[str, ...] = PROPERTIES
    encoding: str = "ordinal"
    augment_cap: int = 4096
    fold_k: int = 10
    fold_grouped: bool = True
    synth_records: int = 207
    synth_noise: dict = field(default_factory=dict)
    linear_degrees: tuple[int, ...] = (1, 2, 3)
    linear_lambdas: tuple[float, ...] = (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
    linear_interactions: bool = False
    nn_hidden: tuple[int, ...] = tuple(range(1, 11))
    nn_trainers: tuple[str, ...] = ("lm",)
    nn_max_epochs: int = 200
    nn_patience: int = 6
    svr_kernels: tuple[str, ...] = ("gaussian",)
    svr_c: float = 1.0
    svr_epsilon: float = 0.1
    svr_tolerance: float = 1e-3
    svr_max_passes: int = 200_000
    svr_cache_mb: float = 64.0
    svr_max_train: int = 2000
    tree_min_leaf: int = 1
    tree_gap_tol: float = 0.05

    def snapshot(self) -> dict:
        """JSON-serializable view for manifests."""
        return {
            "out_dir": self.out_dir, "seed": self.seed, "jobs": self.jobs,
            "dataset_csv": self.dataset_csv,
            "properties": list(self.properties), "encoding": self.encoding,
            "augment_cap": self.augment_cap,
            "fold_k": self.fold_k, "fold_grouped": self.fold_grouped,
            "synth_records": self.synth_records,
            "synth_noise": dict(self.synth_noise),
            "linear_degrees": list(self.linear_degrees),
            "linear_lambdas": list(self.linear_lambdas),
            "linear_interactions": self.linear_interactions,
            "nn_hidden": list(self.nn_hidden),
            "nn_trainers": list(self.nn_trainers),
            "nn_max_epochs": self.nn_max_epochs,
            "nn_patience": self.nn_patience,
            "svr_kernels": list(self.svr_kernels), "svr_c": self.svr_c,
            "svr_epsilon": self.svr_epsilon,
            "svr_tolerance": self.svr_tolerance,
            "svr_max_passes": self.svr_max_passes,
            "svr_cache_mb": self.svr_cache_mb,
            "svr_max_train": self.svr_max_train,
            "tree_min_leaf": self.tree_min_leaf,
            "tree_gap_tol": self.tree_gap_tol,
        }


def load_config(path: Path | str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad TOML in {path}: {exc}") from None

    exp = data.get("experiment", {})
    cfg.out_dir = exp.get("out_dir", cfg.out_dir)
    cfg.seed = int(exp.get("seed", cfg.seed))
    cfg.jobs = int(exp.get("jobs", cfg.jobs))

    ds = data.get("dataset", {})
    cfg.dataset_csv = ds.get("csv", cfg.dataset_csv)
    cfg.properties = tuple(ds.get("properties", cfg.properties))
    cfg.encoding = ds.get("encoding", cfg.encoding)
    cfg.augment_cap = int(ds.get("augment_cap", cfg.augment_cap))
    for prop in cfg.properties:
        if prop not in PROPERTIES:
            raise UsageError(f"unknown property in config: {prop}")
    if cfg.encoding not in ("ordinal", "one_hot"):
        raise UsageError(f"encoding must be ordinal or one_hot, got {cfg.encoding}")

    folds = data.get("folds", {})
    cfg.fold_k = int(folds.get("k", cfg.fold_k))
    cfg.fold_grouped = bool(folds.get("grouped", cfg.fold_grouped))
    if cfg.fold_k < 2:
        raise UsageError("folds.k must be >= 2")

    synth = data.get("synth", {})
    cfg.synth_records = int(synth.get("records", cfg.synth_records))
    for prop in PROPERTIES:
        key = f"noise_{prop}"
        if key in synth:
            cfg.synth_noise[prop] = float(synth[key])

    lin = data.get("linear", {})
    cfg.linear_degrees = tuple(int(d) for d in lin.get("degrees", cfg.linear_degrees))
    cfg.linear_lambdas = tuple(float(v) for v in lin.get("lambdas", cfg.linear_lambdas))
    cfg.linear_interactions = bool(lin.get("interactions", cfg.linear_interactions))

    nn = data.get("neural", {})
    cfg.nn_hidden = tuple(int(h) for h in nn.get("hidden", cfg.nn_hidden))
    cfg.nn_trainers = tuple(nn.get("trainers", cfg.nn_trainers))
    cfg.nn_max_epochs = int(nn.get("max_epochs", cfg.nn_max_epochs))
    cfg.nn_patience = int(nn.get("patience", cfg.nn_patience))

    svr = data.get("svr", {})
    cfg.svr_kernels = tuple(svr.get("kernels", cfg.svr_kernels))
    cfg.svr_c = float(svr.get("C", cfg.svr_c))
    cfg.svr_epsilon = float(svr.get("epsilon", cfg.svr_epsilon))
    cfg.svr_tolerance = float(svr.get("tolerance", cfg.svr_tolerance))
    cfg.svr_max_passes = int(svr.get("max_passes", cfg.svr_max_passes))
    cfg.svr_cache_mb = float(svr.get("cache_mb", cfg.svr_cache_mb))
    cfg.svr_max_train = int(svr.get("max_train", cfg.svr_max_train))

    tree = data.get("tree", {})
    cfg.tree_min_leaf = int(tree.get("min_leaf", cfg.tree_min_leaf))
    cfg.tree_gap_tol = float(tree.get("gap_tol", cfg.tree_gap_tol))
    return cfg
