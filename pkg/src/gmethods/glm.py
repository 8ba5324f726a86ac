"""Linear and logistic maximum likelihood plus Wald / Rao score tests.

Fits are computed from scratch: the linear model by normal-equation solve
(Cholesky with a one-shot jitter retry), the logistic by Newton iteration
with step-halving.  Score tests for added covariates are evaluated at the
null fit, with the usual nuisance projection; a known-null variant skips the
projection for designs whose treatment probabilities are known exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats

from .data import Dataset
from .errors import ConvergenceError, EstimationError, SeparationError
from .features import eval_terms, history_cols

_COND_LIMIT = 1e12
_JITTER = 1e-10
_MAX_ITER = 100
_SCORE_TOL = 1e-8
_LOGLIK_TOL = 1e-10
_SEP_LIMIT = 30.0


def expit(b):
    """Inverse logit, overflow-safe over the whole float range."""
    b = np.asarray(b, dtype=float)
    out = np.empty_like(b)
    pos = b >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-b[pos]))
    eb = np.exp(b[~pos])
    out[~pos] = eb / (1.0 + eb)
    return out if out.ndim else float(out)


def logit(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DesignSpec:
    """An ordered list of feature terms (see features module for the grammar)."""

    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def p(self) -> int:
        return len(self.terms)

    def matrix(self, cols) -> np.ndarray:
        return eval_terms(self.terms, cols)


@dataclass(frozen=True)
class FittedGlm:
    family: str  # "normal" | "binomial"
    coef: np.ndarray
    dispersion: float
    vcov: np.ndarray
    converged: bool
    iterations: int
    loglik: float
    n: int


@dataclass(frozen=True)
class TestReport:
    """A test statistic with its reference distribution and decision."""

    statistic: float
    df: int | None  # chi-square df, or None for a standard-normal reference
    reference: str  # "chi2" | "normal"
    p_value: float
    level: float
    reject: bool
    note: str = ""

    @property
    def reject_at_05(self) -> bool:
        return self.p_value < 0.05

    def recomputed_p(self) -> float:
        if self.reference == "chi2":
            return float(stats.chi2.sf(self.statistic, self.df))
        return float(2.0 * stats.norm.sf(abs(self.statistic)))


def _report(statistic: float, df: int | None, reference: str, level: float,
            note: str = "") -> TestReport:
    if reference == "chi2":
        p = float(stats.chi2.sf(statistic, df)) if df and df > 0 else 1.0
    else:
        p = float(2.0 * stats.norm.sf(abs(statistic)))
    return TestReport(float(statistic), df, reference, p, level, p < level, note)


def _chol_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs for symmetric positive definite M, with jitter retry."""
    try:
        c = scipy.linalg.cho_factor(M, lower=True)
    except np.linalg.LinAlgError:
        jitter = _JITTER * (np.trace(M) / M.shape[0] + 1.0)
        try:
            c = scipy.linalg.cho_factor(M + jitter * np.eye(M.shape[0]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(f"singular normal equations: {exc}") from exc
    return scipy.linalg.cho_solve(c, rhs)


def _check_condition(XtX: np.ndarray) -> None:
    eig = np.linalg.eigvalsh(XtX)
    lo, hi = float(eig[0]), float(eig[-1])
    if hi <= 0 or lo <= 0 or hi / lo > _COND_LIMIT:
        raise EstimationError(
            f"rank deficiency: condition number of the normal equations "
            f"exceeds {_COND_LIMIT:g}"
        )


def _as_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def fit_linear(X: np.ndarray, y: np.ndarray) -> FittedGlm:
    """Gaussian MLE: normal-equation solve, dispersion = mean squared residual."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p:
        raise EstimationError(f"n={n} smaller than parameter count p={p}")
    XtX = X.T @ X
    _check_condition(XtX)
    coef = _chol_solve(XtX, X.T @ y)
    resid = y - X @ coef
    sigma2 = float(np.mean(resid**2))
    vcov = sigma2 * _chol_solve(XtX, np.eye(p))
    vcov = 0.5 * (vcov + vcov.T)
    if sigma2 > 0:
        loglik = -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)
    else:
        loglik = np.inf
    return FittedGlm("normal", coef, sigma2, vcov, True, 1, float(loglik), n)


def _binom_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(X: np.ndarray, y: np.ndarray) -> FittedGlm:
    """Bernoulli MLE by Newton iteration with step-halving."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p:
        raise EstimationError(f"n={n} smaller than parameter count p={p}")
    if np.any((np.abs(y) > 1e-9) & (np.abs(y - 1.0) > 1e-9)):
        raise EstimationError("logistic response must be 0/1")
    coef = np.zeros(p)
    eta = X @ coef
    ll = _binom_loglik(eta, y)
    for it in range(1, _MAX_ITER + 1):
        prob = expit(eta)
        score = X.T @ (y - prob)
        if np.max(np.abs(coef)) > _SEP_LIMIT:
            raise SeparationError(
                "separation detected: coefficient magnitude exceeded "
                f"{_SEP_LIMIT:g} while the likelihood was still climbing"
            )
        if np.max(np.abs(score)) < _SCORE_TOL:
            break
        w = prob * (1.0 - prob)
        H = X.T @ (X * w[:, None])
        step = _chol_solve(H, score)
        lam = 1.0
        for _ in range(40):
            trial = coef + lam * step
            eta_t = X @ trial
            ll_t = _binom_loglik(eta_t, y)
            if ll_t >= ll - 1e-12:
                break
            lam *= 0.5
        coef, eta = trial, eta_t
        if abs(ll_t - ll) < _LOGLIK_TOL * (abs(ll) + 1.0):
            ll = ll_t
            prob = expit(eta)
            score = X.T @ (y - prob)
            if np.max(np.abs(coef)) > _SEP_LIMIT:
                raise SeparationError(
                    "separation detected: coefficient magnitude exceeded "
                    f"{_SEP_LIMIT:g} while the likelihood was still climbing"
                )
            break
        ll = ll_t
    else:
        raise ConvergenceError(f"logistic fit did not converge in {_MAX_ITER} iterations")
    prob = expit(eta)
    w = prob * (1.0 - prob)
    H = X.T @ (X * w[:, None])
    vcov = _chol_solve(H, np.eye(p))
    vcov = 0.5 * (vcov + vcov.T)
    return FittedGlm("binomial", coef, 1.0, vcov, True, it, _binom_loglik(eta, y), n)


def wald_test(fit: FittedGlm, idx: list[int] | tuple[int, ...],
              level: float = 0.05, note: str = "") -> TestReport:
    """Joint chi-square test that the indexed coefficients are all zero."""
    idx = list(idx)
    c = fit.coef[idx]
    V = fit.vcov[np.ix_(idx, idx)]
    try:
        stat = float(c @ np.linalg.solve(V, c))
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"singular covariance block in Wald test: {exc}") from exc
    return _report(stat, len(idx), "chi2", level, note)


def score_test_added(
    X: np.ndarray,
    y: np.ndarray,
    Z: np.ndarray,
    family: str = "binomial",
    *,
    fit: FittedGlm | None = None,
    known_coef: np.ndarray | None = None,
    level: float = 0.05,
    note: str = "",
) -> TestReport:
    """Rao score test that the added columns Z enter with zero coefficient.

    Evaluated at the null fit of y on X.  With ``known_coef`` the null
    probabilities are taken as exactly known (no nuisance projection) —
    appropriate when treatment assignment probabilities come from a known
    randomization design.
    """
    Z = _as_matrix(Z)
    y = np.asarray(y, dtype=float)
    if family == "normal":
        if known_coef is not None:
            raise EstimationError("known-null score test is for binomial designs")
        nullfit = fit or fit_linear(X, y)
        X = _as_matrix(X)
        resid = y - X @ nullfit.coef
        sigma2 = nullfit.dispersion
        # Relative guard: an exact null fit leaves only solver rounding in
        # the residuals, and the statistic degenerates to 0/0.
        if sigma2 <= 1e-24 * (float(np.mean(y * y)) + 1.0):
            raise EstimationError("zero residual variance in the null fit")
        U = Z.T @ resid / sigma2
        XtX = X.T @ X
        V = (Z.T @ Z - Z.T @ X @ _chol_solve(XtX, X.T @ Z)) / sigma2
    else:
        X = _as_matrix(X)
        if known_coef is not None:
            prob = expit(X @ np.asarray(known_coef, dtype=float))
            w = prob * (1.0 - prob)
            U = Z.T @ (y - prob)
            V = Z.T @ (Z * w[:, None])
        else:
            nullfit = fit or fit_logistic(X, y)
            prob = expit(X @ nullfit.coef)
            w = prob * (1.0 - prob)
            U = Z.T @ (y - prob)
            XtWX = X.T @ (X * w[:, None])
            XtWZ = X.T @ (Z * w[:, None])
            V = Z.T @ (Z * w[:, None]) - XtWZ.T @ _chol_solve(XtWX, XtWZ)
    return _quadratic_report(U, V, level, note)


def _quadratic_report(U: np.ndarray, V: np.ndarray, level: float, note: str) -> TestReport:
    """U' V^+ U against chi-square(rank V); rank-0 collapses to statistic 0."""
    V = 0.5 * (V + V.T)
    q = V.shape[0]
    eigval, eigvec = np.linalg.eigh(V)
    top = float(eigval[-1]) if q else 0.0
    scale_u = float(np.max(np.abs(U))) if q else 0.0
    if top <= 0 or top < 1e-12 * max(1.0, scale_u**2):
        # Added directions carry no information (all-zero or duplicated
        # columns): by convention the statistic is 0.
        return _report(0.0, q, "chi2", level, note)
    keep = eigval > 1e-10 * top
    rank = int(np.sum(keep))
    proj = eigvec[:, keep].T @ U
    stat = float(np.sum(proj**2 / eigval[keep]))
    if rank < q and stat < 1e-8:
        stat = 0.0
    return _report(stat, rank, "chi2", level, note)


def robust_score_test(
    X: np.ndarray,
    y: np.ndarray,
    Z: np.ndarray,
    subjects: np.ndarray,
    *,
    fit: FittedGlm | None = None,
    known_coef: np.ndarray | None = None,
    level: float = 0.05,
    note: str = "",
) -> TestReport:
    """Score test of added columns with empirical within-subject covariance.

    For stacked per-occasion rows that are dependent within subject: the
    added-covariate score is projected against the null-model estimating
    equations, then its variance is estimated from per-subject score pieces
    rather than from the model.  Logistic null model.  With ``known_coef``
    the null probabilities are fixed (randomization design) and no nuisance
    projection is applied.
    """
    X = _as_matrix(X)
    Z = _as_matrix(Z)
    y = np.asarray(y, dtype=float)
    subjects = np.asarray(subjects, dtype=int)
    if known_coef is not None:
        prob = expit(X @ np.asarray(known_coef, dtype=float))
        eps = y - prob
        adj = Z
    else:
        nullfit = fit or fit_logistic(X, y)
        prob = expit(X @ nullfit.coef)
        w = prob * (1.0 - prob)
        eps = y - prob
        A = X.T @ (X * w[:, None])
        C = Z.T @ (X * w[:, None])
        B = _chol_solve(A, C.T).T  # q x p: projection of Z-score on X-score
        adj = Z - (X @ B.T)
    nsub = int(subjects.max()) + 1
    q = Z.shape[1]
    pieces = np.zeros((nsub, q))
    for j in range(q):
        pieces[:, j] = np.bincount(subjects, weights=adj[:, j] * eps, minlength=nsub)
    U = Z.T @ eps
    V = pieces.T @ pieces
    return _quadratic_report(U, V, level, note)


def pooled_rows(
    dataset: Dataset,
    terms: tuple[str, ...] | list[str],
    occasions: list[int] | None = None,
    extra: dict[str, np.ndarray] | None = None,
):
    """Stack person-occasions into one design.

    Returns (X, response, subjects, occasions_per_row).  Row order is
    occasion-major: all subjects at the first occasion, then the next.
    ``extra`` maps a column name to an (n,) array available at every
    occasion (e.g. a residual outcome ``h``).
    """
    occs = list(range(dataset.schema.K + 1)) if occasions is None else list(occasions)
    blocks, resp, subj, occ_ix = [], [], [], []
    n = dataset.n
    for m in occs:
        cols = history_cols(dataset.L, dataset.A, m, extra=extra)
        blocks.append(eval_terms(tuple(terms), cols))
        resp.append(dataset.A[:, m])
        subj.append(np.arange(n))
        occ_ix.append(np.full(n, m))
    return (
        np.vstack(blocks),
        np.concatenate(resp),
        np.concatenate(subj),
        np.concatenate(occ_ix),
    )
