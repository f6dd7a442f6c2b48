"""Multi-subject synthetic data with controllable covariate shift.

Stands in for a real multi-subject recording: every subject shares one
discriminative axis in a latent space (same task everywhere), and per-subject
linear maps plus mean shifts move the observed marginal distributions apart
(different domains). The linear-Gaussian family keeps the optimal accuracy in
closed form, so decoders can be checked against an analytic oracle instead of
against other trained models.

Randomness is counter based: every draw comes from a Philox stream keyed by
(seed, subject_id, purpose, trial_index), so generation is bitwise
reproducible regardless of execution order and parallelizes over subjects and
trials with no effect on output.
"""

import math

import numpy as np

from .data import MultiSubjectDataset, SubjectDataset
from . import glm
from .data import stratified_folds

__all__ = [
    "SynthConfig",
    "SubjectParams",
    "make_subject_params",
    "generate",
    "bayes_accuracy",
    "shift_profile",
]

# purpose codes for the Philox key
_PURPOSE_TRANSFORM = 1
_PURPOSE_SHIFT = 2
_PURPOSE_NOISE = 3

_MASK64 = (1 << 64) - 1


class SynthConfig:
    """Generator configuration.

    Parameters
    ----------
    n_subjects : int
    trials_per_subject : int
        Must be even; classes are exactly balanced.
    d : int
        Feature dimensionality.
    mu : float
        Class separation along the shared latent axis e1.
    sigma : float
        Within-class noise scale.
    gamma : float
        Subject transform perturbation scale; 0 means every subject sees the
        identity map.
    tau : float
        Subject mean-shift scale; 0 means no shifts.
    seed : int
    """

    def __init__(self, n_subjects, trials_per_subject, d, mu, sigma,
                 gamma=0.0, tau=0.0, seed=0):
        if n_subjects < 1:
            raise ValueError("n_subjects must be at least 1")
        if d < 1:
            raise ValueError("d must be at least 1")
        if trials_per_subject < 2 or trials_per_subject % 2 != 0:
            raise ValueError("trials_per_subject must be even and >= 2")
        for name, v in (("mu", mu), ("sigma", sigma), ("gamma", gamma), ("tau", tau)):
            if v < 0:
                raise ValueError("%s must be nonnegative, got %r" % (name, v))
        self.n_subjects = int(n_subjects)
        self.trials_per_subject = int(trials_per_subject)
        self.d = int(d)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.gamma = float(gamma)
        self.tau = float(tau)
        self.seed = int(seed)


class SubjectParams:
    """Per-subject generative parameters: transform A and mean shift b.

    A = I + gamma * G with G entries iid standard normal scaled by 1/sqrt(d);
    b entries iid normal with scale tau. Both are a deterministic function of
    (seed, subject_id).
    """

    def __init__(self, subject_id, A, b):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise ValueError("subject params must be finite")
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("A must be square d x d and b length d")
        self.subject_id = int(subject_id)
        self.A = A
        self.b = b


def _stream(seed, subject_id, purpose, trial_index=0):
    """Philox stream keyed by (seed, subject_id, purpose, trial_index)."""
    if subject_id < 0 or subject_id >= (1 << 32):
        raise ValueError("subject_id out of key range")
    if trial_index < 0 or trial_index >= (1 << 24):
        raise ValueError("trial_index out of key range")
    word0 = seed & _MASK64
    word1 = (subject_id << 32) | (purpose << 24) | trial_index
    key = np.array([word0, word1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def make_subject_params(config, subject_id):
    """Deterministic per-subject params from (config.seed, subject_id)."""
    d = config.d
    g = _stream(config.seed, subject_id, _PURPOSE_TRANSFORM)
    G = g.standard_normal((d, d)) / math.sqrt(d)
    A = np.eye(d) + config.gamma * G
    g = _stream(config.seed, subject_id, _PURPOSE_SHIFT)
    b = config.tau * g.standard_normal(d)
    return SubjectParams(subject_id, A, b)


def generate(config):
    """Generate a multi-subject dataset and the parameters that produced it.

    Per subject s with params (A_s, b_s) and per trial i: the label is
    i mod 2 (classes exactly balanced), the latent is
    z = y * mu * e1 + eps with eps ~ N(0, sigma^2 I), and the observed
    features are x = A_s z + b_s.

    Returns
    -------
    (MultiSubjectDataset, list of SubjectParams)
    """
    subjects = []
    params = []
    n = config.trials_per_subject
    d = config.d
    for sid in range(config.n_subjects):
        p = make_subject_params(config, sid)
        labels = np.arange(n, dtype=np.int64) % 2
        Z = np.empty((n, d))
        for i in range(n):
            g = _stream(config.seed, sid, _PURPOSE_NOISE, i)
            Z[i] = config.sigma * g.standard_normal(d)
        Z[:, 0] += labels * config.mu
        X = Z @ p.A.T + p.b
        subjects.append(SubjectDataset(sid, X, labels))
        params.append(p)
    return MultiSubjectDataset(subjects), params


def bayes_accuracy(params, config):
    """Exact optimal accuracy for one subject under the generative model.

    The two classes are Gaussian with means m_y = A (y mu e1) + b and shared
    covariance Sigma = sigma^2 A A', so the optimal rule is linear and its
    accuracy is Phi(0.5 sqrt(delta' Sigma^-1 delta)) with delta = mu A e1.
    For any invertible A this collapses to Phi(mu / (2 sigma)): the
    Mahalanobis separation is invariant under invertible linear maps.
    """
    if config.sigma <= 0:
        raise ValueError("sigma must be positive")
    if config.mu < 0:
        raise ValueError("mu must be nonnegative")
    A = params.A
    delta = config.mu * A[:, 0]
    cov = (config.sigma ** 2) * (A @ A.T)
    try:
        sol = np.linalg.solve(cov, delta)
    except np.linalg.LinAlgError:
        raise ValueError(
            "singular subject covariance (condition estimate %.3e); "
            "the transform is not invertible" % np.linalg.cond(A)
        )
    m2 = float(delta @ sol)
    if m2 < 0:
        m2 = 0.0
    z = 0.5 * math.sqrt(m2)
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _pair_domain_accuracy(Xa, Xb, seed, options=None):
    """3-fold CV accuracy of a domain classifier separating two subjects."""
    X = np.vstack([Xa, Xb])
    dom = np.concatenate([np.zeros(len(Xa), dtype=np.int64),
                          np.ones(len(Xb), dtype=np.int64)])
    folds = stratified_folds(dom, 3, seed)
    all_idx = np.arange(X.shape[0])
    correct = 0
    for f in folds:
        tr = np.setdiff1d(all_idx, f, assume_unique=True)
        model = glm.fit(X[tr], dom[tr], options)
        correct += int(np.sum(model.predict_label(X[f]) == dom[f]))
    return correct / X.shape[0]


def shift_profile(dataset, seed=0, options=None):
    """Pairwise domain-classifier accuracies between subjects.

    Entry (i, j) is the cross-validated accuracy of a domain classifier
    separating subject i's features from subject j's: 0.5 means the two are
    indistinguishable, 1.0 means disjoint supports. The matrix is symmetric;
    the diagonal is NaN (a subject against itself is excluded by convention).

    Use ``numpy.nanmean`` of the result for a scalar shift summary.
    """
    ids = dataset.subject_ids
    if len(ids) < 2:
        raise ValueError("need at least 2 subjects")
    S = len(ids)
    out = np.full((S, S), np.nan)
    for i in range(S):
        for j in range(i + 1, S):
            a = dataset.subject(ids[i])
            b = dataset.subject(ids[j])
            acc = _pair_domain_accuracy(
                a.features, b.features, [int(seed), ids[i], ids[j]], options
            )
            out[i, j] = acc
            out[j, i] = acc
    return out
