"""Instance-weighted L1-penalized logistic regression.

The single classifier primitive used at every level of the pipeline: decoders,
domain classifiers and second-level combiners all go through ``fit``. The
objective is

    (1/n) sum_i w_i * loss(beta, b; x_i, y_i) + lam * ||beta||_1

with ``loss`` the logistic loss, ``w`` normalized internally to mean one and
the intercept ``b`` unpenalized. The optimizer is accelerated proximal
gradient (soft-thresholding prox) with backtracking line search and adaptive
restart on objective increase, which keeps the accepted objective sequence
non-increasing. Everything is deterministic; no randomness is consumed.
"""

import numpy as np

from .data import DesignMatrix, seed_key, stratified_folds

__all__ = [
    "LinearModel",
    "FitOptions",
    "fit",
    "fit_cv",
    "lambda_max",
    "objective_and_gradient",
    "save_model",
    "load_model",
]

# Grid for the optional cross-validated lambda selection, as fractions of
# lambda_max, strongest first so ties resolve toward more regularization.
CV_GRID = (1.0, 0.1, 0.01, 0.001)
DEFAULT_LAMBDA_FRACTION = 0.01


class FitOptions:
    """Solver options.

    Parameters
    ----------
    lam : float or None
        L1 strength. None means the default 0.01 * lambda_max of the problem
        at hand, resolved inside ``fit``.
    tol : float
        Relative-objective convergence tolerance.
    max_iter : int
    seed : int
        Unused by the deterministic solver, reserved.
    """

    def __init__(self, lam=None, tol=1e-7, max_iter=2000, seed=0):
        if lam is not None and lam < 0:
            raise ValueError("lam must be nonnegative")
        if tol <= 0:
            raise ValueError("tol must be positive")
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        self.lam = lam
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.seed = int(seed)


class LinearModel:
    """Fitted coefficients of a logistic regression.

    Attributes
    ----------
    beta : ndarray, shape (d,)
        Penalized coefficients.
    intercept : float
        Unpenalized.
    lam : float
        The L1 strength the model was fitted at.
    n_iter : int
    converged : bool
        True iff the relative objective decrease fell below tol before
        max_iter.
    """

    def __init__(self, beta, intercept, lam, n_iter=0, converged=True):
        beta = np.asarray(beta, dtype=np.float64)
        if not np.all(np.isfinite(beta)) or not np.isfinite(intercept):
            raise ValueError("model coefficients must be finite")
        self.beta = beta
        self.intercept = float(intercept)
        self.lam = float(lam)
        self.n_iter = int(n_iter)
        self.converged = bool(converged)

    @property
    def d(self):
        return self.beta.shape[0]

    def decision_function(self, X):
        X = _matrix(X)
        if X.shape[1] != self.d:
            raise ValueError(
                "dimension mismatch: model has d=%d, input has %d columns"
                % (self.d, X.shape[1])
            )
        return X @ self.beta + self.intercept

    def predict_proba(self, X):
        """Per-row probability of class 1, sigmoid(beta @ x + intercept)."""
        return _sigmoid(self.decision_function(X))

    def predict_label(self, X, threshold=0.5):
        """Hard labels; probability exactly at threshold goes to class 1."""
        return (self.predict_proba(X) >= threshold).astype(np.int64)


def _matrix(X):
    if isinstance(X, DesignMatrix):
        return X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return X


def _sigmoid(s):
    # Evaluate exp only on negative arguments so large scores cannot overflow.
    out = np.empty_like(s, dtype=np.float64)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def _normalize_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError("weights length must equal number of rows")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    m = w.mean()
    if m <= 0:
        raise ValueError("at least one weight must be positive")
    return w / m


def _check_Xy(X, y):
    X = _matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError("labels length must equal number of rows")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite inputs")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary in {0, 1}")
    return X, y


def _smooth_loss(X, y, w, beta, intercept):
    s = X @ beta + intercept
    # logistic loss in log-sum-exp form, stable for |s| far beyond 30
    per_trial = np.logaddexp(0.0, s) - y * s
    return float(np.mean(w * per_trial))


def _smooth_grad(X, y, w, beta, intercept):
    s = X @ beta + intercept
    r = w * (_sigmoid(s) - y)
    n = X.shape[0]
    return (X.T @ r) / n, float(np.sum(r) / n)


def objective_and_gradient(beta, intercept, X, y, weights=None, lam=0.0):
    """Smooth part of the weighted objective and its gradient.

    Returns ``(value, grad_beta, grad_intercept)`` where ``value`` is the
    weighted mean logistic loss only. The L1 term is handled by the proximal
    step inside ``fit`` and is never differentiated; ``lam`` is validated here
    so callers can form the full objective as ``value + lam * l1(beta)``.

    Weights are normalized to mean one before use, so rescaling all weights by
    a constant leaves both value and gradient unchanged.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X, y = _check_Xy(X, y)
    w = _normalize_weights(weights, X.shape[0])
    beta = np.asarray(beta, dtype=np.float64)
    value = _smooth_loss(X, y, w, beta, intercept)
    gb, gi = _smooth_grad(X, y, w, beta, intercept)
    return value, gb, gi


def lambda_max(X, y, weights=None):
    """Smallest L1 strength at which all penalized coefficients are zero.

    Computed as the sup-norm of the coefficient gradient at the prior-only
    optimum (beta = 0, intercept = logit of the weighted class prior), which
    is where the solver starts; any lam at or above this value keeps beta at
    exactly zero.
    """
    X, y = _check_Xy(X, y)
    w = _normalize_weights(weights, X.shape[0])
    p_bar = float(np.clip(np.mean(w * y), 1e-12, 1.0 - 1e-12))
    g = X.T @ (w * (p_bar - y)) / X.shape[0]
    return float(np.max(np.abs(g)))


def _soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def fit(X, y, options=None, weights=None):
    """Fit the weighted L1 logistic regression.

    Parameters
    ----------
    X : DesignMatrix or ndarray, shape (n, d)
        If a DesignMatrix with weights is given and the ``weights`` argument
        is None, the matrix weights are used.
    y : array-like of {0, 1}
    options : FitOptions or None
    weights : array-like or None
        Per-trial nonnegative instance weights; normalized internally to mean
        one, so any positive rescaling yields the identical model.

    Returns
    -------
    LinearModel

    Notes
    -----
    Initialization is beta = 0, intercept = logit of the weighted class
    prior, which makes the initial coefficient gradient equal to the
    lambda_max vector: for lam >= lambda_max the very first proximal step is
    a fixed point and beta stays exactly zero. Acceleration is restarted
    whenever the penalized objective would increase, and the restarted plain
    proximal step is kept instead, so accepted objectives never increase.
    """
    if options is None:
        options = FitOptions()
    if weights is None and isinstance(X, DesignMatrix):
        weights = X.weights
    X, y = _check_Xy(X, y)
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 trials")
    w = _normalize_weights(weights, n)
    for c in (0.0, 1.0):
        if not np.any(w[y == c] > 0):
            raise ValueError("degenerate labels: class %d has zero total weight" % c)

    lam = options.lam
    if lam is None:
        lam = DEFAULT_LAMBDA_FRACTION * lambda_max(X, y, w)
    lam = float(lam)

    p_bar = float(np.clip(np.mean(w * y), 1e-12, 1.0 - 1e-12))
    beta = np.zeros(d)
    intercept = float(np.log(p_bar / (1.0 - p_bar)))

    def penalized(b, b0):
        return _smooth_loss(X, y, w, b, b0) + lam * np.sum(np.abs(b))

    def prox_step(b0, i0, L):
        """One backtracked proximal gradient step from (b0, i0)."""
        f0 = _smooth_loss(X, y, w, b0, i0)
        gb, gi = _smooth_grad(X, y, w, b0, i0)
        while True:
            nb = _soft_threshold(b0 - gb / L, lam / L)
            ni = i0 - gi / L
            db = nb - b0
            di = ni - i0
            f_new = _smooth_loss(X, y, w, nb, ni)
            quad = (
                f0
                + float(gb @ db)
                + gi * di
                + 0.5 * L * (float(db @ db) + di * di)
            )
            if f_new <= quad + 1e-12 * max(1.0, abs(f0)) or L >= 1e15:
                return nb, ni, L
            L *= 2.0

    # crude Lipschitz estimate; backtracking corrects any underestimate
    L = max(0.25 * float(np.mean(w * (np.einsum("ij,ij->i", X, X) + 1.0))), 1e-6)

    obj = penalized(beta, intercept)
    beta_prev, int_prev = beta.copy(), intercept
    t = 1.0
    n_iter = 0
    converged = False

    for n_iter in range(1, options.max_iter + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        yb = beta + mom * (beta - beta_prev)
        yi = intercept + mom * (intercept - int_prev)
        cand_b, cand_i, L = prox_step(yb, yi, L)
        cand_obj = penalized(cand_b, cand_i)
        restarted = False
        if cand_obj > obj:
            # adaptive restart: drop momentum, take a plain descent step
            # from the last accepted iterate (guaranteed non-increasing)
            cand_b, cand_i, L = prox_step(beta, intercept, L)
            cand_obj = penalized(cand_b, cand_i)
            t_next = 1.0
            restarted = True
        beta_prev, int_prev = beta, intercept
        beta, intercept = cand_b, cand_i
        t = t_next
        delta = obj - cand_obj
        obj = cand_obj
        # a restart iteration can stall with an inflated L, which says
        # nothing about stationarity, so convergence is only declared on
        # ordinary iterations
        if not restarted and delta <= options.tol * abs(obj):
            converged = True
            break
        L *= 0.8

    return LinearModel(beta, intercept, lam, n_iter, converged)


def fit_cv(X, y, weights=None, k=3, seed=0, options=None, grid=CV_GRID):
    """Select lam by stratified k-fold validation accuracy, then refit.

    The grid is ``grid`` (fractions of this data's lambda_max), iterated
    strongest-first so ties resolve toward more regularization. Selection is
    confined to the given data; callers pass training data only.

    Returns
    -------
    (LinearModel, float)
        The refitted model and the chosen fraction of lambda_max.
    """
    if options is None:
        options = FitOptions()
    if weights is None and isinstance(X, DesignMatrix):
        weights = X.weights
    Xm, yv = _check_Xy(X, y)
    w = _normalize_weights(weights, Xm.shape[0])
    lmax = lambda_max(Xm, yv, w)
    folds = stratified_folds(yv.astype(np.int64), k, seed_key(seed, 104729))
    all_idx = np.arange(Xm.shape[0])
    best_frac, best_acc = None, -1.0
    for frac in grid:
        correct = 0
        total = 0
        for f in folds:
            tr = np.setdiff1d(all_idx, f, assume_unique=True)
            opts = FitOptions(
                lam=frac * lambda_max(Xm[tr], yv[tr], w[tr]),
                tol=options.tol,
                max_iter=options.max_iter,
            )
            m = fit(Xm[tr], yv[tr], opts, weights=w[tr])
            pred = m.predict_label(Xm[f])
            correct += int(np.sum(pred == yv[f]))
            total += f.size
        acc = correct / total
        if acc > best_acc:
            best_frac, best_acc = frac, acc
    final = FitOptions(
        lam=best_frac * lmax, tol=options.tol, max_iter=options.max_iter
    )
    return fit(Xm, yv, final, weights=w), best_frac


def save_model(model, path):
    """Write a model as flat text: lambda, intercept, then beta, one per line.

    Values are written with shortest round-trip float formatting, so a
    save/load cycle is bitwise exact.
    """
    lines = [repr(model.lam), repr(model.intercept)]
    lines.extend(repr(float(b)) for b in model.beta)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    with open(path) as fh:
        values = [float(line) for line in fh.read().split()]
    if len(values) < 2:
        raise ValueError("model file %s is truncated" % path)
    return LinearModel(np.array(values[2:]), values[1], values[0])
