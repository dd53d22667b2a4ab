"""
ERKC Solver - Services

Stateful services: configuration/logging setup and the history stores
that the integrator populates.
"""

from .config_service import apply_overrides, get_config, load_config, read_plain_config, setup_logging
from .history_store import (
    ExponentialDenseOutput,
    HistoryStore,
    InterpolantStore,
    ModifiedInterpolantStore,
    check_node_consistency,
    dump_dense_csv,
    eval_dense,
    eval_interpolant,
    eval_modified,
    make_history_store,
)

__all__ = [
    "apply_overrides",
    "get_config",
    "load_config",
    "read_plain_config",
    "setup_logging",
    "ExponentialDenseOutput",
    "HistoryStore",
    "InterpolantStore",
    "ModifiedInterpolantStore",
    "check_node_consistency",
    "dump_dense_csv",
    "eval_dense",
    "eval_interpolant",
    "eval_modified",
    "make_history_store",
]
