"""Constructive neural networks with incremental feature learning."""

from ._core import (  # noqa: F401
    Activation,
    ContractError,
    Criterion,
    DataError,
    Dataset,
    DimensionError,
    Error,
    FormatError,
    GroupOrder,
    GroupPlan,
    GrowthConfig,
    InitPolicy,
    InputError,
    Loss,
    MetricsReport,
    NetworkGraph,
    Optimizer,
    RelevancyMethod,
    TrainConfig,
    TransferConfig,
    build_initial_model,
    chunk_by_time,
    compare_json,
    compare_text,
    dedup,
    default_seeds,
    evaluate_accuracy,
    evaluate_loss,
    grow,
    ifl_feature_groups,
    ifl_transfer,
    ifl_transfer_from,
    load_csv,
    load_dataset,
    make_groups,
    multi_run,
    new_network,
    normalize_range,
    predict,
    refit,
    relevancy_scores,
    save_dataset,
    score,
    smote,
    stratified_split,
    synthetic,
    train,
    transform,
    write_csv,
)

__version__ = "0.1.0"
