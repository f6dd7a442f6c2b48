"""Stacked generalization over per-subject first-level models.

One first-level classifier is trained per training subject (plus k fold-models
per subject for leak-free self-prediction); the second-level dataset holds one
probability per training subject per trial; a second-level combiner is fitted
on it, optionally with covariate-shift instance weights. The rule that makes
stacking legal is that the prediction entering a training trial's own-subject
cell must come from a model that never saw that trial: own-subject cells use
the out-of-fold model, other-subject cells use full models (which were trained
on a different subject entirely). Provenance of every cell is recorded so the
rule is auditable after the fact.
"""

import os

import numpy as np

from .data import DesignMatrix, MultiSubjectDataset, split_kfold
from . import glm
from .shift import ShiftOptions, estimate_weights

__all__ = [
    "FirstLevelBank",
    "SecondLevelDataset",
    "StackedModel",
    "fit_first_level",
    "build_second_level",
    "fit_stacked",
    "predict_stacked",
    "audit_leak_freedom",
    "save_stacked",
    "load_stacked",
]

# provenance code for "full model"; fold-models are coded by fold index >= 0
FULL_MODEL = -1


def _open_unit(p):
    # sigmoid saturates to exactly 0.0 or 1.0 in float64 for |score| > ~745;
    # second-level features must stay strictly inside (0, 1)
    return np.clip(p, 1e-15, 1.0 - 1e-15)


class FirstLevelBank:
    """Per-subject full models plus k out-of-fold models each."""

    def __init__(self, models, oof_models, fold_assignment, k, seed):
        self.models = dict(models)
        self.oof_models = dict(oof_models)
        self.fold_assignment = dict(fold_assignment)
        self.k = int(k)
        self.seed = int(seed)
        for sid in self.models:
            if len(self.oof_models[sid]) != self.k:
                raise ValueError(
                    "subject %d has %d fold-models, expected %d"
                    % (sid, len(self.oof_models[sid]), self.k)
                )

    @property
    def subject_ids(self):
        """Training subject ids, ascending; also the second-level column order."""
        return sorted(self.models)

    @property
    def d(self):
        return self.models[self.subject_ids[0]].d


class SecondLevelDataset:
    """n x S matrix of first-level probabilities plus cell provenance.

    provenance[i, j] is FULL_MODEL (-1) when cell (i, j) came from subject
    j's full model, or the fold index f >= 0 when it came from the fold-model
    whose training data excluded trial i.
    """

    def __init__(self, features, labels, provenance, subject_ids,
                 trial_subjects=None, weights=None):
        features = np.asarray(features, dtype=np.float64)
        if np.any(features <= 0.0) or np.any(features >= 1.0):
            raise ValueError("second-level features must lie strictly in (0,1)")
        self.features = features
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        self.provenance = np.asarray(provenance, dtype=np.int64)
        self.subject_ids = list(subject_ids)
        self.trial_subjects = (
            None if trial_subjects is None
            else np.asarray(trial_subjects, dtype=np.int64)
        )
        self.weights = weights

    @property
    def n(self):
        return self.features.shape[0]


class StackedModel:
    """First-level bank plus fitted second-level combiner.

    weights holds the ImportanceWeights used for the combiner fit, or None
    when used_weights is False.
    """

    def __init__(self, bank, combiner, used_weights, options=None, weights=None):
        if combiner.d != len(bank.subject_ids):
            raise ValueError(
                "combiner dimensionality %d does not match %d training subjects"
                % (combiner.d, len(bank.subject_ids))
            )
        self.bank = bank
        self.combiner = combiner
        self.used_weights = bool(used_weights)
        self.options = options
        self.weights = weights


def _fit_one(X, y, options, lambda_mode, seed):
    if lambda_mode == "cv":
        model, _ = glm.fit_cv(X, y, k=3, seed=seed, options=options)
        return model
    return glm.fit(X, y, options)


def fit_first_level(train, k=6, seed=0, options=None, lambda_mode="fixed"):
    """Fit one full model and k out-of-fold models per training subject.

    Fold-model f of a subject is trained on all of that subject's trials
    except fold f; the fold assignment is recorded per trial. Deterministic
    given seed (fold shuffles are keyed by (seed, subject_id)).
    """
    models = {}
    oof = {}
    assignment = {}
    for sid in train.subject_ids:
        sub = train.subject(sid)
        counts = sub.class_counts()
        for c, cnt in counts.items():
            if cnt < k:
                raise ValueError(
                    "subject %d has only %d trials of class %d, need >= k=%d"
                    % (sid, cnt, c, k)
                )
        folds = split_kfold(sub, k, seed)
        assign = np.empty(sub.n_trials, dtype=np.int64)
        for f, idx in enumerate(folds):
            assign[idx] = f
        assignment[sid] = assign
        models[sid] = _fit_one(sub.features, sub.labels, options,
                               lambda_mode, [seed, sid, 0])
        fold_models = []
        all_idx = np.arange(sub.n_trials)
        for f, idx in enumerate(folds):
            keep = np.setdiff1d(all_idx, idx, assume_unique=True)
            fold_models.append(
                _fit_one(sub.features[keep], sub.labels[keep], options,
                         lambda_mode, [seed, sid, f + 1])
            )
        oof[sid] = fold_models
    return FirstLevelBank(models, oof, assignment, k, seed)


def build_second_level(bank, data, mode):
    """Map trials through the bank into the second-level feature space.

    mode="train": data is a MultiSubjectDataset whose subjects are exactly
    the bank's subjects; rows are ordered by ascending subject_id then trial
    order; each trial's own-subject cell uses the fold-model that excluded
    it, every other cell uses the full model; labels are copied.

    mode="test": data is a feature matrix (DesignMatrix or ndarray); every
    cell uses full models; labels are None.
    """
    cols = bank.subject_ids
    if mode == "test":
        if isinstance(data, DesignMatrix):
            data = data.X
        X = np.asarray(data, dtype=np.float64)
        feats = np.column_stack([bank.models[sid].predict_proba(X) for sid in cols])
        prov = np.full(feats.shape, FULL_MODEL, dtype=np.int64)
        return SecondLevelDataset(_open_unit(feats), None, prov, cols)
    if mode != "train":
        raise ValueError("mode must be 'train' or 'test'")

    if not isinstance(data, MultiSubjectDataset):
        raise ValueError("train mode needs a MultiSubjectDataset")
    for sid in data.subject_ids:
        if sid not in bank.models:
            raise ValueError("trial from unknown subject %d" % sid)

    blocks = []
    labels = []
    provs = []
    trial_subjects = []
    for sid in data.subject_ids:
        sub = data.subject(sid)
        feats = np.empty((sub.n_trials, len(cols)))
        prov = np.full((sub.n_trials, len(cols)), FULL_MODEL, dtype=np.int64)
        for j, col_sid in enumerate(cols):
            if col_sid == sid:
                assign = bank.fold_assignment[sid]
                if assign.shape[0] != sub.n_trials:
                    raise ValueError(
                        "subject %d trial count does not match the bank" % sid
                    )
                for f in range(bank.k):
                    rows = np.flatnonzero(assign == f)
                    if rows.size:
                        m = bank.oof_models[sid][f]
                        feats[rows, j] = m.predict_proba(sub.features[rows])
                        prov[rows, j] = f
            else:
                feats[:, j] = bank.models[col_sid].predict_proba(sub.features)
        blocks.append(feats)
        provs.append(prov)
        labels.append(sub.labels)
        trial_subjects.append(np.full(sub.n_trials, sid, dtype=np.int64))
    return SecondLevelDataset(
        _open_unit(np.vstack(blocks)),
        np.concatenate(labels),
        np.vstack(provs),
        cols,
        trial_subjects=np.concatenate(trial_subjects),
    )


def audit_leak_freedom(bank, second_level):
    """Verify every training trial's own-subject cell came from a fold-model
    that excluded it. Returns the number of cells checked; raises on any
    violation."""
    if second_level.trial_subjects is None:
        raise ValueError("audit needs a train-mode second-level dataset")
    cols = {sid: j for j, sid in enumerate(second_level.subject_ids)}
    checked = 0
    per_subject_row = {}
    for i in range(second_level.n):
        sid = int(second_level.trial_subjects[i])
        local = per_subject_row.get(sid, 0)
        per_subject_row[sid] = local + 1
        j = cols[sid]
        f = int(second_level.provenance[i, j])
        if f == FULL_MODEL:
            raise AssertionError(
                "row %d: own-subject cell used the full model" % i
            )
        if int(bank.fold_assignment[sid][local]) != f:
            raise AssertionError(
                "row %d: own-subject cell used fold-model %d but the trial "
                "sits in fold %d" % (i, f, int(bank.fold_assignment[sid][local]))
            )
        # every other cell must be a full model of a different subject
        others = np.delete(second_level.provenance[i], j)
        if np.any(others != FULL_MODEL):
            raise AssertionError("row %d: cross-subject cell not a full model" % i)
        checked += second_level.provenance.shape[1]
    return checked


def fit_stacked(train, target_features=None, k=6, seed=0, options=None,
                shift_options=None, lambda_mode="fixed"):
    """Fit the full stacked model on the training subjects.

    If target_features is given (the unlabeled trials of the evaluation
    target), importance weights are estimated and attached to the second-level
    instances before the combiner fit; by default the domain classifier runs
    in the second-level space, so the target trials are first mapped through
    the bank in test mode. Without target_features the plain combiner is
    fitted (method SG); with it, the weighted one (method SG+CS).
    """
    if shift_options is None:
        shift_options = ShiftOptions()
    bank = fit_first_level(train, k=k, seed=seed, options=options,
                           lambda_mode=lambda_mode)
    sl = build_second_level(bank, train, "train")
    iw = None
    weights = None
    used_weights = False
    if target_features is not None:
        if isinstance(target_features, DesignMatrix):
            target_features = target_features.X
        target_features = np.asarray(target_features, dtype=np.float64)
        if shift_options.space == "second_level":
            target_sl = build_second_level(bank, target_features, "test")
            iw = estimate_weights(sl.features, target_sl.features,
                                  shift_options, seed=seed)
        else:
            source_raw = np.vstack(
                [train.subject(sid).features for sid in train.subject_ids]
            )
            iw = estimate_weights(source_raw, target_features,
                                  shift_options, seed=seed)
        sl.weights = iw
        weights = iw.weights
        used_weights = True
    combiner = _fit_one(
        DesignMatrix(sl.features, weights), sl.labels, options,
        lambda_mode, [seed, 1_000_003],
    )
    return StackedModel(bank, combiner, used_weights, options, weights=iw)


def predict_stacked(model, X):
    """Combiner probabilities for new trials (features only)."""
    sl = build_second_level(model.bank, X, "test")
    return model.combiner.predict_proba(sl.features)


def save_stacked(model, dirpath):
    """Write a stacked model as a directory of model text files + manifest."""
    os.makedirs(dirpath, exist_ok=True)
    bank = model.bank
    lines = [
        "format_version=1",
        "k=%d" % bank.k,
        "seed=%d" % bank.seed,
        "subjects=%s" % ",".join(str(s) for s in bank.subject_ids),
        "used_weights=%d" % int(model.used_weights),
    ]
    for sid in bank.subject_ids:
        glm.save_model(bank.models[sid],
                       os.path.join(dirpath, "subject_%d.model" % sid))
        for f, m in enumerate(bank.oof_models[sid]):
            glm.save_model(
                m, os.path.join(dirpath, "subject_%d_fold%d.model" % (sid, f))
            )
        assign = ",".join(str(int(a)) for a in bank.fold_assignment[sid])
        lines.append("folds_%d=%s" % (sid, assign))
    glm.save_model(model.combiner, os.path.join(dirpath, "combiner.model"))
    with open(os.path.join(dirpath, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_stacked(dirpath):
    manifest = {}
    with open(os.path.join(dirpath, "manifest.txt")) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                manifest[key] = value
    k = int(manifest["k"])
    seed = int(manifest["seed"])
    sids = [int(s) for s in manifest["subjects"].split(",") if s]
    models = {}
    oof = {}
    assignment = {}
    for sid in sids:
        models[sid] = glm.load_model(
            os.path.join(dirpath, "subject_%d.model" % sid)
        )
        oof[sid] = [
            glm.load_model(
                os.path.join(dirpath, "subject_%d_fold%d.model" % (sid, f))
            )
            for f in range(k)
        ]
        assignment[sid] = np.array(
            [int(a) for a in manifest["folds_%d" % sid].split(",")],
            dtype=np.int64,
        )
    bank = FirstLevelBank(models, oof, assignment, k, seed)
    combiner = glm.load_model(os.path.join(dirpath, "combiner.model"))
    return StackedModel(bank, combiner, bool(int(manifest["used_weights"])))
