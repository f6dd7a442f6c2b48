"""Cross-subject decoding toolkit.

Sparse logistic decoders with instance weighting, stacked generalization
across subjects, importance weighting for covariate shift between subjects,
and a leave-one-subject-out evaluation harness, plus a synthetic generator
with a closed-form Bayes oracle for calibration.
"""

from .data import (DesignMatrix, MultiSubjectDataset, SubjectDataset, Trial,
                   fingerprint, pool, split_kfold)
from .decoders import METHODS, DecoderSpec, FittedDecoder, fit_decoder, predict_decoder
from .evaluation import ResultsTable, accuracy, kfold_single, loso, permutation_check
from .glm import FitOptions, LinearModel, fit, fit_cv, lambda_max, load_model, save_model
from .io import load_dataset, save_dataset, standardize, vectorize
from .shift import ImportanceWeights, ShiftOptions, estimate_weights
from .stacking import (FirstLevelBank, SecondLevelDataset, StackedModel,
                       audit_leak_freedom, build_second_level, fit_first_level,
                       fit_stacked, load_stacked, predict_stacked, save_stacked)
from .synth import SubjectParams, SynthConfig, bayes_accuracy, generate, shift_profile

__version__ = "0.1.0"

__all__ = [
    "Trial", "SubjectDataset", "MultiSubjectDataset", "DesignMatrix",
    "pool", "split_kfold", "fingerprint",
    "FitOptions", "LinearModel", "fit", "fit_cv", "lambda_max",
    "save_model", "load_model",
    "ShiftOptions", "ImportanceWeights", "estimate_weights",
    "FirstLevelBank", "SecondLevelDataset", "StackedModel",
    "fit_first_level", "build_second_level", "audit_leak_freedom",
    "fit_stacked", "predict_stacked", "save_stacked", "load_stacked",
    "METHODS", "DecoderSpec", "FittedDecoder", "fit_decoder", "predict_decoder",
    "ResultsTable", "accuracy", "loso", "kfold_single", "permutation_check",
    "SynthConfig", "SubjectParams", "generate", "bayes_accuracy", "shift_profile",
    "vectorize", "standardize", "save_dataset", "load_dataset",
    "__version__",
]
