"""Evaluation harnesses and accuracy-table reporting.

The table mixes two protocols on purpose: the "single" column is each
subject's own k-fold CV accuracy (no transfer involved), while pool / sg /
sg_cs are evaluated under leave-one-subject-out, training on everyone else.
That is the comparison practitioners actually care about (my best
within-subject decoder versus what transfer buys me), and the text report
labels the protocol of each column. Held-out labels are read by accuracy()
only; no fit API accepts them (sg_cs receives the held-out subject's
features as a bare matrix).
"""

import numpy as np

from .data import (MultiSubjectDataset, SubjectDataset, fingerprint, pool,
                   seed_key, split_kfold)
from . import glm
from .decoders import DecoderSpec, fit_decoder, predict_decoder

__all__ = [
    "ResultsTable",
    "accuracy",
    "kfold_single",
    "loso",
    "permutation_check",
]


def accuracy(predicted, true):
    """Fraction of exact label matches."""
    p = np.asarray(predicted).ravel()
    t = np.asarray(true).ravel()
    if p.shape[0] != t.shape[0]:
        raise ValueError("length mismatch: %d vs %d" % (p.shape[0], t.shape[0]))
    if p.shape[0] == 0:
        raise ValueError("need at least one prediction")
    return float(np.mean(p == t))


class ResultsTable:
    """Per-subject accuracies for the requested methods plus a mean row.

    cells[subject_id][method] is a float accuracy; errors[subject_id][method]
    records a failure message for cells that could not be computed (those are
    absent from cells, not silently skipped).
    """

    COLUMNS = ("single", "pool", "sg", "sg_cs")

    def __init__(self, subject_ids, methods, metadata=None):
        self.subject_ids = list(subject_ids)
        self.methods = list(methods)
        self.cells = {sid: {} for sid in self.subject_ids}
        self.errors = {sid: {} for sid in self.subject_ids}
        self.metadata = dict(metadata or {})

    def set(self, subject_id, method, value):
        if not (0.0 <= value <= 1.0):
            raise ValueError("accuracy %r outside [0, 1]" % value)
        self.cells[subject_id][method] = float(value)

    def set_error(self, subject_id, method, message):
        self.errors[subject_id][method] = str(message)

    def mean_row(self):
        """Arithmetic mean per method over subjects with a value."""
        out = {}
        for m in self.methods:
            vals = [self.cells[s][m] for s in self.subject_ids
                    if m in self.cells[s]]
            if vals:
                out[m] = float(np.mean(vals))
        return out

    def to_csv_text(self):
        """Delimited rendering, one row per subject then the mean row.

        The header is always the full four-method column set; methods that
        were not run leave their column empty. Floats use shortest
        round-trip formatting so reruns are byte-identical.
        """
        lines = ["subject," + ",".join(self.COLUMNS)]
        rows = list(self.subject_ids) + ["mean"]
        mean = self.mean_row()
        for sid in rows:
            vals = []
            for m in self.COLUMNS:
                if sid == "mean":
                    v = mean.get(m)
                else:
                    v = self.cells[sid].get(m)
                vals.append("" if v is None else repr(v))
            lines.append(("%s," % sid) + ",".join(vals))
        return "\n".join(lines) + "\n"

    def to_txt_text(self):
        """Aligned human-readable rendering with protocol and config notes."""
        mean = self.mean_row()
        width = 10
        header = "subject".ljust(9) + "".join(c.rjust(width) for c in self.COLUMNS)
        lines = ["Decoding accuracy per subject", "", header,
                 "-" * len(header)]
        for sid in self.subject_ids:
            row = str(sid).ljust(9)
            for m in self.COLUMNS:
                v = self.cells[sid].get(m)
                row += ("%.4f" % v).rjust(width) if v is not None else " " * width
            lines.append(row)
        lines.append("-" * len(header))
        row = "mean".ljust(9)
        for m in self.COLUMNS:
            v = mean.get(m)
            row += ("%.4f" % v).rjust(width) if v is not None else " " * width
        lines.append(row)
        lines.append("")
        lines.append("protocols: single = within-subject %s-fold CV; "
                     "pool/sg/sg_cs = leave-one-subject-out"
                     % self.metadata.get("k", "k"))
        for key in ("lambda_mode", "standardize", "seed", "fingerprint"):
            if key in self.metadata:
                lines.append("%s: %s" % (key, self.metadata[key]))
        failures = [(s, m, e) for s in self.subject_ids
                    for m, e in self.errors[s].items()]
        for sid, m, e in failures:
            lines.append("error subject=%s method=%s: %s" % (sid, m, e))
        return "\n".join(lines) + "\n"


def _standardize_params(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def kfold_single(subject, k=6, options=None, seed=0, standardize=True,
                 lambda_mode="fixed"):
    """Within-subject k-fold CV accuracy (the "single" column).

    Standardization parameters are computed on each fold's training side and
    applied to the held-out fold, never refitted on it.
    """
    folds = split_kfold(subject, k, seed)
    all_idx = np.arange(subject.n_trials)
    correct = 0
    for f_idx, fold in enumerate(folds):
        tr = np.setdiff1d(all_idx, fold, assume_unique=True)
        Xtr, ytr = subject.features[tr], subject.labels[tr]
        Xte, yte = subject.features[fold], subject.labels[fold]
        if standardize:
            mean, scale = _standardize_params(Xtr)
            Xtr = (Xtr - mean) / scale
            Xte = (Xte - mean) / scale
        if lambda_mode == "cv":
            model, _ = glm.fit_cv(Xtr, ytr, k=3,
                                  seed=seed_key(seed, subject.subject_id, f_idx),
                                  options=options)
        else:
            model = glm.fit(Xtr, ytr, options)
        correct += int(np.sum(model.predict_label(Xte) == yte))
    return correct / subject.n_trials


def loso(dataset, methods, seed=0, standardize=True):
    """Leave-one-subject-out evaluation of the given DecoderSpecs.

    For each held-out subject: cross-subject methods are fitted on all other
    subjects (sg_cs additionally receives the held-out subject's unlabeled
    features) and scored on the held-out labels; the single method is the
    held-out subject's own k-fold accuracy. Failed cells are recorded with
    their error instead of aborting the table.
    """
    if dataset.n_subjects < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    specs = list(methods)
    table = ResultsTable(
        dataset.subject_ids,
        [s.method for s in specs],
        metadata={
            "seed": seed,
            "standardize": standardize,
            "fingerprint": fingerprint(dataset),
        },
    )
    for spec in specs:
        table.metadata.setdefault("k", spec.k)
        table.metadata.setdefault("lambda_mode", spec.lambda_mode)
    for sid in dataset.subject_ids:
        held = dataset.subject(sid)
        train = dataset.without([sid])
        train_pool, _ = pool(train)
        if standardize:
            mean, scale = _standardize_params(train_pool.X)
        for spec in specs:
            try:
                if spec.method == "single":
                    acc = kfold_single(held, k=spec.k, options=spec.options,
                                       seed=seed, standardize=standardize,
                                       lambda_mode=spec.lambda_mode)
                else:
                    if standardize:
                        std_subjects = [
                            SubjectDataset(s.subject_id,
                                           (s.features - mean) / scale,
                                           s.labels)
                            for s in (train.subject(t) for t in train.subject_ids)
                        ]
                        fit_train = MultiSubjectDataset(std_subjects)
                        Xte = (held.features - mean) / scale
                    else:
                        fit_train = train
                        Xte = held.features
                    run_spec = DecoderSpec(
                        spec.method, options=spec.options, k=spec.k,
                        shift_options=spec.shift_options,
                        lambda_mode=spec.lambda_mode,
                        seed=int(np.random.SeedSequence(
                            seed_key(seed, sid)).generate_state(1)[0]),
                    )
                    target = Xte if spec.method == "sg_cs" else None
                    dec = fit_decoder(run_spec, fit_train, target)
                    pred, _ = predict_decoder(dec, Xte)
                    acc = accuracy(pred, held.labels)
                table.set(sid, spec.method, acc)
            except Exception as exc:  # record, do not abort the table
                table.set_error(sid, spec.method, exc)
    return table


def permutation_check(dataset, spec, n_permutations, seed=0, standardize=True):
    """Null accuracies: rerun LOSO with labels permuted within each subject.

    Labels of every subject are independently shuffled (training and test
    sides alike), so any residual signal indicates leakage. Returns the list
    of LOSO mean accuracies, one per permutation.
    """
    if n_permutations < 1:
        raise ValueError("need at least one permutation")
    out = []
    for p in range(n_permutations):
        permuted = []
        for sid in dataset.subject_ids:
            sub = dataset.subject(sid)
            rng = np.random.default_rng(seed_key(seed, p, sid))
            permuted.append(SubjectDataset(sid, sub.features,
                                           rng.permutation(sub.labels)))
        pdata = MultiSubjectDataset(permuted)
        run_seed = int(np.random.SeedSequence(seed_key(seed, p)).generate_state(1)[0])
        table = loso(pdata, [spec], seed=run_seed, standardize=standardize)
        out.append(table.mean_row()[spec.method])
    return out
