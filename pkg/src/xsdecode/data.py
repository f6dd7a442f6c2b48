"""Trial/subject/dataset data model and dense matrix views.

All containers are immutable after construction and safe to share across
workers. Features are dense row-major float64 throughout; there is no sparse
path.
"""

import hashlib

import numpy as np

__all__ = [
    "Trial",
    "SubjectDataset",
    "MultiSubjectDataset",
    "DesignMatrix",
    "pool",
    "split_kfold",
    "stratified_folds",
    "seed_key",
    "fingerprint",
]


def _as_features(arr, name="features"):
    x = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("%s contains non-finite values" % name)
    return x


class Trial:
    """One labeled recording: a feature vector, a binary label, a subject id.

    Parameters
    ----------
    features : array-like, shape (d,)
        Concatenated channels x timepoints, or synthetic features. Must be
        finite.
    label : int
        Stimulus category, 0 or 1.
    subject_id : int
    """

    __slots__ = ("features", "label", "subject_id")

    def __init__(self, features, label, subject_id):
        features = _as_features(features)
        if features.ndim != 1:
            raise ValueError("trial features must be a vector")
        if label not in (0, 1):
            raise ValueError("label must be 0 or 1, got %r" % (label,))
        self.features = features
        self.label = int(label)
        self.subject_id = int(subject_id)

    @property
    def d(self):
        return self.features.shape[0]


class SubjectDataset:
    """All trials of one subject, stored as a dense (n, d) block.

    Stores one features matrix and one label vector rather than per-trial
    objects; ``trials()`` yields Trial views when the object form is needed.

    Parameters
    ----------
    subject_id : int
    features : ndarray, shape (n, d)
    labels : ndarray, shape (n,)
        Binary in {0, 1}; both classes must be present (per-subject model
        fitting requires it).
    """

    def __init__(self, subject_id, features, labels):
        X = _as_features(features)
        if X.ndim != 2:
            raise ValueError("subject features must be a 2-D matrix")
        y = np.asarray(labels)
        if y.shape != (X.shape[0],):
            raise ValueError(
                "labels shape %r does not match %d trials" % (y.shape, X.shape[0])
            )
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be binary in {0, 1}")
        y = y.astype(np.int64)
        for c in (0, 1):
            if not np.any(y == c):
                raise ValueError(
                    "subject %d has no trials of class %d" % (subject_id, c)
                )
        self.subject_id = int(subject_id)
        self.features = X
        self.labels = y

    @property
    def n_trials(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def trials(self):
        for i in range(self.n_trials):
            yield Trial(self.features[i], int(self.labels[i]), self.subject_id)

    def class_counts(self):
        return {c: int(np.sum(self.labels == c)) for c in (0, 1)}


class MultiSubjectDataset:
    """An ordered collection of subjects sharing one feature dimensionality.

    Subject ids must be unique; all subjects must share d (the shared feature
    space assumption that makes cross-subject transfer well posed).
    """

    def __init__(self, subjects):
        subjects = list(subjects)
        if not subjects:
            raise ValueError("need at least one subject")
        ids = [s.subject_id for s in subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject_ids are not unique: %r" % (sorted(ids),))
        d = subjects[0].d
        for s in subjects:
            if s.d != d:
                raise ValueError(
                    "subject %d has d=%d, expected %d" % (s.subject_id, s.d, d)
                )
        self.subjects = subjects
        self.d = d

    @property
    def subject_ids(self):
        """Subject ids in ascending order."""
        return sorted(s.subject_id for s in self.subjects)

    @property
    def n_subjects(self):
        return len(self.subjects)

    def subject(self, subject_id):
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError("no subject with id %r" % (subject_id,))

    def without(self, subject_ids):
        """A new dataset excluding the given subject ids."""
        drop = set(int(i) for i in subject_ids)
        kept = [s for s in self.subjects if s.subject_id not in drop]
        if not kept:
            raise ValueError("no training subjects")
        return MultiSubjectDataset(kept)


class DesignMatrix:
    """Flattened (n, d) view of trials for the solver, with optional row weights.

    If weights are given they must be nonnegative with at least one strictly
    positive entry.
    """

    def __init__(self, X, weights=None):
        X = _as_features(X, "design matrix")
        if X.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
            if w.shape != (X.shape[0],):
                raise ValueError("weights length must equal row count")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
            if not np.any(w > 0):
                raise ValueError("at least one weight must be positive")
        else:
            w = None
        self.X = X
        self.weights = w

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def cols(self):
        return self.X.shape[1]


def pool(dataset, exclude=()):
    """Row-stack all non-excluded subjects' trials.

    Rows are ordered by ascending subject_id, trial order preserved within a
    subject, so that pooled matrices are reproducible regardless of subject
    insertion order.

    Parameters
    ----------
    dataset : MultiSubjectDataset
    exclude : iterable of int
        Subject ids to leave out.

    Returns
    -------
    (DesignMatrix, ndarray)
        The pooled design matrix (no weights) and the pooled label vector.
    """
    drop = set(int(i) for i in exclude)
    kept = [
        dataset.subject(sid) for sid in dataset.subject_ids if sid not in drop
    ]
    if not kept:
        raise ValueError("no training subjects")
    X = np.vstack([s.features for s in kept])
    y = np.concatenate([s.labels for s in kept])
    return DesignMatrix(X), y


def seed_key(seed, *extra):
    """Flatten a seed spec (int or sequence of ints) plus extra ints into a
    flat list usable as ``numpy.random.default_rng`` entropy."""
    if isinstance(seed, (list, tuple)):
        base = [int(s) for s in seed]
    else:
        base = [int(seed)]
    return base + [int(e) for e in extra]


def stratified_folds(labels, k, seed):
    """Stratified k-fold assignment over a binary label vector.

    Each class's indices are shuffled with the seeded generator and dealt into
    k folds as evenly as possible (earlier folds take the remainder). Returns
    a list of k sorted index arrays partitioning ``range(len(labels))``.

    ``seed`` may be anything ``numpy.random.default_rng`` accepts, including a
    list of integers for hierarchical keying.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2, got %d" % k)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if idx.size < 2:
            raise ValueError(
                "class %d has %d trials, need at least 2 for stratified folds"
                % (c, idx.size)
            )
        idx = rng.permutation(idx)
        for f, chunk in enumerate(np.array_split(idx, k)):
            folds[f].extend(chunk.tolist())
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def fingerprint(dataset):
    """Content hash of a dataset: d, then per ascending subject id the raw
    feature and label bytes. Bit-exact round-trips preserve it."""
    h = hashlib.sha256()
    h.update(("d=%d" % dataset.d).encode())
    for sid in dataset.subject_ids:
        sub = dataset.subject(sid)
        h.update(("subject=%d;n=%d" % (sid, sub.n_trials)).encode())
        h.update(np.ascontiguousarray(sub.features, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(sub.labels, dtype="<i8").tobytes())
    return h.hexdigest()


def split_kfold(subject, k, seed):
    """Stratified k-fold split of one subject's trials.

    Deterministic given (seed, subject_id): the fold generator is keyed by
    both, so fold structure does not depend on the order subjects are
    processed in. Trials are seed-shuffled within class strata before
    dealing.

    Returns a list of k disjoint sorted index arrays that partition the
    subject's trial indices.
    """
    if k > subject.n_trials:
        raise ValueError(
            "k=%d exceeds the %d trials of subject %d"
            % (k, subject.n_trials, subject.subject_id)
        )
    return stratified_folds(subject.labels, k, seed_key(seed, subject.subject_id))
