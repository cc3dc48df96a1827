from .engine import (
    VARIANTS,
    DsomConfig,
    EpochStats,
    Trainer,
    TrainingResult,
    choose_update_strategy,
    init_prototypes,
    quantization_error,
    train,
)
from .ops import (
    affect_one,
    affectation_phase,
    compute_D_full,
    repr_brute_force,
    repr_early_stopping,
    repr_partial_sums,
    s_direct,
    s_from_partials,
    update_D_incremental,
)
