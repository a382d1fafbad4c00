"""Treatment-effect estimation for multiple outcomes in two-arm randomized
trials, via sparse latent-variable regression on modified outcomes."""

from .baselines import (
    FullModel,
    fit_full_simultaneous,
    fit_full_tandem,
    fit_lasso_logistic_multi,
    fit_lasso_multi,
    fit_mom_tandem,
    fit_spca,
)
from .binary import (
    BinaryProblem,
    fit_binary,
    log_likelihood_binary,
    objective_binary,
)
from .continuous import (
    ContinuousProblem,
    fit_continuous,
    objective_continuous,
)
from .core import (
    build_design,
    modified_outcome,
    predict_binary_prob,
    predict_continuous,
    soft_threshold,
    treatment_effect,
)
from .crossval import CvPlan, CvTable, cv_score, kfold_split, select_lambdas
from .dataio import CsvSchema, TrialDataset, load_csv, load_fit, save_fit
from .diagram import PathDiagram, build_path_diagram, export_path_diagram
from .glm import (
    BERNOULLI,
    GAUSSIAN,
    MULTINOMIAL,
    POISSON,
    RegressionLoss,
    fit_gsmr,
    grad_multiclass,
    grad_poisson,
    loss_multiclass,
    loss_poisson,
)
from .simulate import (
    ScenarioSpec,
    TrueParams,
    gen_binary,
    gen_continuous,
    gen_covariates,
    gen_treatment,
    mse,
    run_benchmark,
    run_scenario,
)
from .types import (
    DesignMatrix,
    FactorModel,
    FitResult,
    Hyperparameters,
    OutcomeMatrix,
    Problem,
    TreatmentAssignment,
)

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "BinaryProblem",
    "build_design",
    "build_path_diagram",
    "ContinuousProblem",
    "CsvSchema",
    "CvPlan",
    "CvTable",
    "cv_score",
    "DesignMatrix",
    "export_path_diagram",
    "FactorModel",
    "fit_binary",
    "fit_continuous",
    "fit_full_simultaneous",
    "fit_full_tandem",
    "fit_gsmr",
    "fit_lasso_logistic_multi",
    "fit_lasso_multi",
    "fit_mom_tandem",
    "fit_spca",
    "FitResult",
    "FullModel",
    "GAUSSIAN",
    "gen_binary",
    "gen_continuous",
    "gen_covariates",
    "gen_treatment",
    "grad_multiclass",
    "grad_poisson",
    "Hyperparameters",
    "kfold_split",
    "load_csv",
    "load_fit",
    "log_likelihood_binary",
    "loss_multiclass",
    "loss_poisson",
    "mse",
    "MULTINOMIAL",
    "modified_outcome",
    "objective_binary",
    "objective_continuous",
    "OutcomeMatrix",
    "PathDiagram",
    "POISSON",
    "predict_binary_prob",
    "predict_continuous",
    "Problem",
    "RegressionLoss",
    "run_benchmark",
    "run_scenario",
    "save_fit",
    "ScenarioSpec",
    "select_lambdas",
    "soft_threshold",
    "treatment_effect",
    "TreatmentAssignment",
    "TrueParams",
]
