"""Python bindings for the lfsim simulator and recommender."""

from ._lfsim import (
    CKG,
    Catalog,
    GeneratorParams,
    LfsimError,
    LruCache,
    Model,
    RecDatasetParams,
    Request,
    TrainConfig,
    Workload,
    __version__,
    build_graph,
    classify,
    cli,
    default_topology,
    generate_trace,
    holdout_split,
    kmeans,
    modes,
    parse_topology,
    planted_dataset,
    popularity_eval,
    program_histories,
    requests_csv,
    run_scenario,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
