"""Dynamic approximate nearest neighbour benchmark suite.

Thin Python surface over the C++ core: synthetic data, the dataset store,
dynamic indexes, workload scripts, and the timed replay harness.  Figures and
result files are produced by the `dynann` command line tool.
"""

from ._core import (
    DatasetStore,
    GroundTruthCache,
    Index,
    RunRecord,
    WorkloadScript,
    exact_knn,
    gen_odc,
    gen_ofl,
    gen_synthetic,
    known_methods,
    load_script,
    make_index,
    recall_score,
    reschedule,
    run,
    save_script,
    speedup,
    validate_script,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetStore",
    "GroundTruthCache",
    "Index",
    "RunRecord",
    "WorkloadScript",
    "exact_knn",
    "gen_odc",
    "gen_ofl",
    "gen_synthetic",
    "known_methods",
    "load_script",
    "make_index",
    "recall_score",
    "reschedule",
    "run",
    "save_script",
    "speedup",
    "validate_script",
]
