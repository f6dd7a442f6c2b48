"""Uniform strategy interface over the four compared methods.

single: one subject's own model (the within-subject baseline).
pool: one model over the concatenated trials of all training subjects.
sg: stacked generalization over per-subject models.
sg_cs: sg with covariate-shift instance weights on the second-level fit.

The harness treats all four through fit_decoder/predict_decoder. Unlabeled
target features are threaded explicitly (sg_cs only accepts features, never
labels), which keeps the no-test-label contract visible in the signatures.
"""

import numpy as np

from .data import DesignMatrix, pool
from . import glm
from .shift import ShiftOptions
from .stacking import StackedModel, fit_stacked, predict_stacked

__all__ = ["METHODS", "DecoderSpec", "FittedDecoder", "fit_decoder",
           "predict_decoder"]

METHODS = ("single", "pool", "sg", "sg_cs")


class DecoderSpec:
    """Which method to run and with what options.

    Option groups not used by the chosen method are validated but ignored.
    """

    def __init__(self, method, options=None, k=6, shift_options=None,
                 lambda_mode="fixed", seed=0):
        if method not in METHODS:
            raise ValueError("unknown method %r, expected one of %r"
                             % (method, METHODS))
        if lambda_mode not in ("fixed", "cv"):
            raise ValueError("lambda_mode must be 'fixed' or 'cv'")
        if k < 2:
            raise ValueError("k must be at least 2")
        self.method = method
        self.options = options
        self.k = int(k)
        self.shift_options = shift_options if shift_options is not None else ShiftOptions()
        self.lambda_mode = lambda_mode
        self.seed = int(seed)


class FittedDecoder:
    def __init__(self, method, model, metadata):
        self.method = method
        self.model = model
        self.metadata = dict(metadata)


def fit_decoder(spec, train, target_unlabeled=None):
    """Fit one method on the training subjects.

    Parameters
    ----------
    spec : DecoderSpec
    train : MultiSubjectDataset
    target_unlabeled : DesignMatrix, ndarray or None
        The held-out subject's features, required for sg_cs and ignored by
        the label-free signature everywhere else.
    """
    meta = {"subjects": train.subject_ids, "seed": spec.seed,
            "lambda_mode": spec.lambda_mode}
    if spec.method == "single":
        if train.n_subjects != 1:
            raise ValueError("method 'single' needs exactly one training subject")
        sub = train.subjects[0]
        model = _fit_glm(spec, sub.features, sub.labels)
        meta["lam"] = model.lam
        return FittedDecoder("single", model, meta)
    if spec.method == "pool":
        dm, y = pool(train)
        model = _fit_glm(spec, dm.X, y)
        meta["lam"] = model.lam
        return FittedDecoder("pool", model, meta)
    if spec.method == "sg_cs" and target_unlabeled is None:
        raise ValueError("SG+CS requires unlabeled target trials")
    target = target_unlabeled if spec.method == "sg_cs" else None
    if target is not None and isinstance(target, DesignMatrix):
        target = target.X
    model = fit_stacked(
        train,
        target_features=target,
        k=spec.k,
        seed=spec.seed,
        options=spec.options,
        shift_options=spec.shift_options,
        lambda_mode=spec.lambda_mode,
    )
    meta["lam"] = model.combiner.lam
    if model.weights is not None:
        meta["weights_summary"] = model.weights.summary()
    return FittedDecoder(spec.method, model, meta)


def _fit_glm(spec, X, y):
    if spec.lambda_mode == "cv":
        model, _ = glm.fit_cv(X, y, k=3, seed=spec.seed, options=spec.options)
        return model
    return glm.fit(X, y, spec.options)


def predict_decoder(decoder, X):
    """Labels and probabilities for new trials (features only).

    Returns (labels, probabilities); empty inputs give empty outputs.
    """
    if isinstance(X, DesignMatrix):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    if isinstance(decoder.model, StackedModel):
        proba = predict_stacked(decoder.model, X)
    else:
        proba = decoder.model.predict_proba(X)
    return (proba >= 0.5).astype(np.int64), proba
