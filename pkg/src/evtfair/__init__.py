"""Worst-case fairness auditing for binary classifiers.

Fits extreme value distributions to counterfactual discrimination
measurements, with statistically screened tail sampling, synthetic-data
augmentation, return-level extrapolation, and a tail-aware mitigator.
"""

__version__ = "0.1.0"

from .discrimination import CdSample, GroupMetrics, acd, compute_cd, cvar, group_metrics
from .errors import EvtFairError
from .evt import (
    EvtFit,
    GevFit,
    GpdFit,
    bootstrap_se,
    classify_tail,
    cv_test,
    fit_gev,
    fit_gpd,
    gev_cdf,
    horizon,
    qq_diagnostic,
    return_level,
    select_threshold,
)
from .mitigation import MitigationResult, mitigate
from .scoring import (
    ConstantModel,
    ExternalModel,
    FunctionModel,
    LogRegModel,
    TrainConfig,
    evaluate,
    score,
    train_logreg,
)
from .statcompare import ComparisonResult, bootstrap_test, cliffs_delta
from .synthgen import (
    CopulaGenerator,
    detection_auc,
    downstream_f1_loss,
    fit_generator,
    frechet_distance,
    kl_similarity,
    sample,
)
from .tabular import (
    Dataset,
    GroupSpec,
    Schema,
    flip_protected,
    load_csv,
    split,
    write_csv,
)
from .tailsampler import (
    AuditReport,
    GroupTailReport,
    SamplerConfig,
    audit,
    compute_ecd,
    generate_tail_samples,
)
