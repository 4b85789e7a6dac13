from netconv.finetune.loop import (
    EpochRecord,
    FinetuneConfig,
    FinetuneResult,
    evaluate,
    finetune,
    pooled_features,
    predict,
    standardize_head,
)
from netconv.finetune.metrics import ClassMetrics, EvalReport
from netconv.finetune.splits import Split, few_shot_subset, stratified_split
from netconv.finetune.sweeps import (
    ABLATION_HEADER,
    ABLATIONS,
    FEWSHOT_HEADER,
    SCALABILITY_HEADER,
    SCALABILITY_LENGTHS,
    AblationResult,
    FewShotRow,
    ScalabilityRow,
    ablation_row,
    few_shot_sweep,
    run_ablation,
    scalability_run,
    synthetic_length_corpora,
    write_rows_csv,
)

__all__ = [
    "ABLATIONS",
    "ABLATION_HEADER",
    "AblationResult",
    "ClassMetrics",
    "EpochRecord",
    "EvalReport",
    "FEWSHOT_HEADER",
    "FewShotRow",
    "FinetuneConfig",
    "FinetuneResult",
    "SCALABILITY_HEADER",
    "SCALABILITY_LENGTHS",
    "ScalabilityRow",
    "Split",
    "ablation_row",
    "evaluate",
    "few_shot_subset",
    "few_shot_sweep",
    "finetune",
    "pooled_features",
    "predict",
    "run_ablation",
    "scalability_run",
    "standardize_head",
    "stratified_split",
    "synthetic_length_corpora",
    "write_rows_csv",
]
