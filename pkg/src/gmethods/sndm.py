"""Structural nested distribution models for the treatment-shift families.

A blip at occasion m maps the outcome quantile under "history then stop
treating" to the quantile under "history minus the last treatment, then
stop".  The families here are shift families built from per-occasion
cofactor terms c_j(l_bar_m, a_bar_{m-1}):

    additive:        y  ->  y + a_m * sum_j psi_j c_j
    multiplicative:  y  ->  y * exp(a_m * sum_j psi_j c_j)

Every term carries the a_m factor, so the blip is the identity at a_m = 0,
strictly increasing and smooth in y, and the identity for all arguments
iff psi = 0.  Blipping the observed outcome down through every occasion
yields the residual outcome H, independent of each A_m given history when
psi is the truth — the moment condition behind g-estimation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.optimize
from scipy import stats

from . import streams
from .data import Dataset, History, Regime, regime_values
from .errors import ConfigError, ConvergenceError, EstimationError
from .features import eval_terms, history_cols, term_bases
from .features import uses_covariates as _terms_use_covariates
from .gformula import RegimeDistribution
from .glm import (
    FittedGlm,
    TestReport,
    expit,
    fit_logistic,
    pooled_rows,
    score_test_added,
)

_FORBIDDEN_COFACTOR_BASES = {"y", "u", "h"}


@dataclass(frozen=True)
class BlipSpec:
    """A shift-family blip: per-component cofactor terms and optional psi."""

    family: str  # "additive" | "multiplicative"
    cofactors: tuple[str, ...]
    psi: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.family not in ("additive", "multiplicative"):
            raise ConfigError(f"unknown blip family {self.family!r}")
        if not self.cofactors:
            raise ConfigError("at least one cofactor term required")
        bad = term_bases(self.cofactors) & _FORBIDDEN_COFACTOR_BASES
        if bad:
            raise ConfigError(
                f"cofactors may only reference history before the current "
                f"treatment; found {sorted(bad)}"
            )
        if self.psi is not None:
            psi = tuple(float(v) for v in self.psi)
            if len(psi) != len(self.cofactors):
                raise ConfigError("psi length must match the cofactor count")
            object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "cofactors", tuple(self.cofactors))

    @property
    def dim(self) -> int:
        return len(self.cofactors)

    @property
    def uses_covariates(self) -> bool:
        return _terms_use_covariates(self.cofactors)

    def with_psi(self, psi) -> "BlipSpec":
        return replace(self, psi=tuple(np.atleast_1d(np.asarray(psi, float))))

    def require_psi(self) -> np.ndarray:
        if self.psi is None:
            raise ConfigError("blip has no psi attached; call with_psi first")
        return np.asarray(self.psi, dtype=float)


def additive_blip(*cofactors: str, psi=None) -> BlipSpec:
    spec = BlipSpec("additive", tuple(cofactors))
    return spec.with_psi(psi) if psi is not None else spec


def multiplicative_blip(*cofactors: str, psi=None) -> BlipSpec:
    spec = BlipSpec("multiplicative", tuple(cofactors))
    return spec.with_psi(psi) if psi is not None else spec


def cofactor_matrix(spec: BlipSpec, L: np.ndarray, A: np.ndarray, m: int) -> np.ndarray:
    """(n, dim) matrix of cofactor values at occasion m."""
    return eval_terms(spec.cofactors, history_cols(L, A, m))


def shift_basis(spec: BlipSpec, L: np.ndarray, A: np.ndarray,
                occasions=None) -> np.ndarray:
    """(n, dim) matrix S with S @ psi = total shift over the blipped occasions.

    ``occasions`` restricts which treatments the family acts on (default:
    all); treatments at other occasions are left as unmodeled context.
    """
    K = L.shape[1] - 1
    occs = range(K + 1) if occasions is None else occasions
    S = np.zeros((L.shape[0], spec.dim))
    for m in occs:
        S += A[:, m][:, None] * cofactor_matrix(spec, L, A, m)
    return S


def _hist_arrays(hist: History, a_m: float):
    L = np.asarray(hist.l_bar, dtype=float)[None, :]
    A = np.asarray(tuple(hist.a_bar_prev) + (float(a_m),), dtype=float)[None, :]
    return L, A


def _occasion_shift(spec: BlipSpec, L: np.ndarray, A: np.ndarray, m: int) -> np.ndarray:
    psi = spec.require_psi()
    return A[:, m] * (cofactor_matrix(spec, L, A, m) @ psi)


def blip(spec: BlipSpec, y: float, hist: History, a_m: float) -> float:
    """Apply the occasion-hist.m blip to a single outcome value."""
    L, A = _hist_arrays(hist, a_m)
    s = float(_occasion_shift(spec, L, A, hist.m)[0])
    return y + s if spec.family == "additive" else y * np.exp(s)


def blip_inverse(spec: BlipSpec, u: float, hist: History, a_m: float) -> float:
    L, A = _hist_arrays(hist, a_m)
    s = float(_occasion_shift(spec, L, A, hist.m)[0])
    return u - s if spec.family == "additive" else u * np.exp(-s)


@dataclass(frozen=True)
class BlipDownResult:
    """Residual outcomes H_m (blipped down from occasion m on) and the Jacobian."""

    h_per_occasion: np.ndarray  # (n, K+1); column m holds H_m
    h: np.ndarray  # (n,) = H_0
    jacobian: np.ndarray  # (n,) dH/dY, always > 0


def blip_down_arrays(spec: BlipSpec, L: np.ndarray, A: np.ndarray, Y: np.ndarray) -> BlipDownResult:
    psi = spec.require_psi()
    n, K1 = L.shape
    if spec.family == "multiplicative" and np.any(Y <= 0):
        raise EstimationError("multiplicative blip family requires positive outcomes")
    per = np.empty((n, K1))
    h = np.asarray(Y, dtype=float).copy()
    log_jac = np.zeros(n)
    for m in range(K1 - 1, -1, -1):
        s = A[:, m] * (cofactor_matrix(spec, L, A, m) @ psi)
        if spec.family == "additive":
            h = h + s
        else:
            h = h * np.exp(s)
            log_jac += s
        per[:, m] = h
    jac = np.ones(n) if spec.family == "additive" else np.exp(log_jac)
    return BlipDownResult(per, per[:, 0], jac)


def blip_down(spec: BlipSpec, dataset: Dataset) -> BlipDownResult:
    """H-recursion over every subject of a dataset."""
    return blip_down_arrays(spec, dataset.L, dataset.A, dataset.Y)


def blip_up(spec: BlipSpec, h: np.ndarray, L: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Invert the full H-recursion: recover outcomes from residual outcomes."""
    psi = spec.require_psi()
    total = shift_basis(spec, L, A) @ psi
    h = np.asarray(h, dtype=float)
    if spec.family == "additive":
        return h - total
    return h * np.exp(-total)


@dataclass(frozen=True)
class GEstimate:
    """g-estimation output: point estimate plus a test-inversion confidence set."""

    psi_hat: np.ndarray
    statistic_at_hat: float
    p_at_hat: float
    boundary: bool
    grid: np.ndarray  # (G, dim)
    grid_stats: np.ndarray
    grid_pvals: np.ndarray
    accepted: np.ndarray  # grid points not rejected at `level`
    resolution: tuple[int, ...]
    level: float
    note: str = ""

    @property
    def confidence_set(self) -> np.ndarray:
        return self.grid[self.accepted]

    def to_csv(self, path: str) -> None:
        import csv

        dim = self.grid.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"psi{j}" for j in range(dim)] + ["statistic", "p", "accept"])
            for g, s, p, a in zip(self.grid, self.grid_stats, self.grid_pvals, self.accepted):
                w.writerow([repr(float(v)) for v in g]
                           + [repr(float(s)), repr(float(p)), int(a)])


class _GEngine:
    """Shared machinery: pooled treatment model + score test at candidate psi."""

    def __init__(
        self,
        dataset: Dataset,
        blip_spec: BlipSpec,
        treatment_terms,
        qstar: Callable | None,
        alpha_known,
        occasions,
        level: float,
    ):
        self.dataset = dataset
        self.spec = blip_spec
        self.level = level
        self.occs = list(range(dataset.schema.K + 1)) if occasions is None else list(occasions)
        self.X, self.resp, self.subj, _ = pooled_rows(dataset, treatment_terms, self.occs)
        bad = (np.abs(self.resp) > 1e-9) & (np.abs(self.resp - 1.0) > 1e-9)
        if np.any(bad):
            raise EstimationError(
                "g-estimation needs binary treatments at the pooled occasions"
            )
        self.qstar = qstar
        self.C = [cofactor_matrix(blip_spec, dataset.L, dataset.A, m) for m in self.occs]
        self.S = shift_basis(blip_spec, dataset.L, dataset.A, self.occs)
        if alpha_known is not None:
            self.alpha = np.asarray(alpha_known, dtype=float)
            self.fit: FittedGlm | None = None
            self.note = ""
        else:
            self.alpha = None
            self.fit = fit_logistic(self.X, self.resp)
            self.note = ("treatment model estimated from the data; the test level "
                         "relies on its correct specification")

    def h_of(self, psi: np.ndarray) -> np.ndarray:
        Y = self.dataset.Y
        if self.spec.family == "additive":
            return Y + self.S @ psi
        if np.any(Y <= 0):
            raise EstimationError("multiplicative blip family requires positive outcomes")
        return Y * np.exp(self.S @ psi)

    def zmat(self, psi: np.ndarray) -> np.ndarray:
        h = self.h_of(psi)
        L, A = self.dataset.L, self.dataset.A
        if self.qstar is not None:
            blocks = [np.atleast_2d(np.asarray(self.qstar(h, L, A, m), dtype=float))
                      for m in self.occs]
            blocks = [b if b.shape[0] == len(h) else b.T for b in blocks]
        else:
            blocks = [h[:, None] * C for C in self.C]
        return np.vstack(blocks)

    def report(self, psi) -> TestReport:
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        Z = self.zmat(psi)
        if self.alpha is not None:
            return score_test_added(self.X, self.resp, Z, "binomial",
                                    known_coef=self.alpha, level=self.level,
                                    note=self.note)
        return score_test_added(self.X, self.resp, Z, "binomial",
                                fit=self.fit, level=self.level, note=self.note)

    def signed_score(self, psi_scalar: float) -> float:
        Z = self.zmat(np.array([psi_scalar]))
        if self.alpha is not None:
            prob = expit(self.X @ self.alpha)
        else:
            prob = expit(self.X @ self.fit.coef)
        return float(Z[:, 0] @ (self.resp - prob))


def g_test_at(
    dataset: Dataset,
    blip_spec: BlipSpec,
    psi,
    *,
    treatment_terms,
    qstar: Callable | None = None,
    alpha_known=None,
    occasions=None,
    level: float = 0.05,
) -> TestReport:
    """Score test that psi is the true blip parameter."""
    eng = _GEngine(dataset, blip_spec, treatment_terms, qstar, alpha_known,
                   occasions, level)
    return eng.report(psi)


def _grid(box, points) -> tuple[np.ndarray, tuple[int, ...]]:
    axes = [np.linspace(lo, hi, pts) for (lo, hi), pts in zip(box, points)]
    if len(axes) == 1:
        return axes[0][:, None], (points[0],)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh]), tuple(points)


def g_estimate(
    dataset: Dataset,
    blip_spec: BlipSpec,
    *,
    treatment_terms,
    psi_box,
    qstar: Callable | None = None,
    alpha_known=None,
    occasions=None,
    grid_points: int | tuple[int, ...] = 201,
    level: float = 0.05,
) -> GEstimate:
    """g-estimation: psi values whose residual outcome looks randomized.

    For each candidate psi the residual outcome H(psi) is tested as an added
    covariate in the pooled treatment model (score test); the estimate
    minimizes the statistic and the confidence set collects grid points not
    rejected at ``level``.  ``psi_box`` is (lo, hi) per component; the default
    q* pairs H with each cofactor of the blip family.  ``occasions`` limits
    both where the family acts and which treatments are score-tested; by
    default the family covers every occasion.
    """
    box = np.atleast_2d(np.asarray(psi_box, dtype=float))
    if box.shape != (blip_spec.dim, 2):
        raise ConfigError("psi_box must give (lo, hi) per blip component")
    points = ((grid_points,) * blip_spec.dim
              if isinstance(grid_points, int) else tuple(grid_points))
    eng = _GEngine(dataset, blip_spec, treatment_terms, qstar, alpha_known,
                   occasions, level)
    return _search(eng, blip_spec.dim, box, points, level)


def _search(eng, dim: int, box: np.ndarray, points: tuple[int, ...],
            level: float) -> GEstimate:
    """Grid the box, locate the score minimum, and invert the test.

    ``eng`` is any object with ``report(psi) -> TestReport``,
    ``signed_score(scalar)`` (used only for dim 1) and a ``note`` string.
    """
    grid, resolution = _grid(box, points)
    G = grid.shape[0]
    stats_arr = np.empty(G)
    pvals = np.empty(G)
    for i in range(G):
        rep = eng.report(grid[i])
        stats_arr[i] = rep.statistic
        pvals[i] = rep.p_value
    imin = int(np.argmin(stats_arr))
    boundary = False
    if dim == 1:
        psi_hat = _refine_scalar(eng, grid[:, 0], stats_arr, imin, box[0])
        if psi_hat is None:
            lo_edge = imin in (0, G - 1)
            lo = grid[max(imin - 1, 0), 0]
            hi = grid[min(imin + 1, G - 1), 0]
            res = scipy.optimize.minimize_scalar(
                lambda v: eng.report([v]).statistic, bounds=(lo, hi),
                method="bounded", options={"xatol": 1e-10},
            )
            psi_hat = np.array([float(res.x)])
            boundary = lo_edge
    else:
        order = np.argsort(stats_arr)
        starts = [grid[i] for i in order[:5]]
        best, best_val = None, np.inf
        for s in starts:
            res = scipy.optimize.minimize(
                lambda v: eng.report(np.clip(v, box[:, 0], box[:, 1])).statistic,
                s, method="Nelder-Mead",
                options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
            )
            if res.fun < best_val:
                best, best_val = np.clip(res.x, box[:, 0], box[:, 1]), res.fun
        psi_hat = np.asarray(best, dtype=float)
        edge = (np.abs(psi_hat - box[:, 0]) < 1e-9) | (np.abs(psi_hat - box[:, 1]) < 1e-9)
        boundary = bool(np.any(edge) and best_val > stats.chi2.ppf(0.5, dim))
    at_hat = eng.report(psi_hat)
    return GEstimate(
        psi_hat=np.atleast_1d(psi_hat),
        statistic_at_hat=at_hat.statistic,
        p_at_hat=at_hat.p_value,
        boundary=boundary,
        grid=grid,
        grid_stats=stats_arr,
        grid_pvals=pvals,
        accepted=pvals >= level,
        resolution=resolution,
        level=level,
        note=eng.note,
    )


def _refine_scalar(eng: _GEngine, grid1d, stats_arr, imin, bounds) -> np.ndarray | None:
    """Bisection on the signed score if it changes sign near the grid minimum."""
    G = len(grid1d)
    candidates = []
    for i in range(max(0, imin - 2), min(G - 1, imin + 2)):
        candidates.append((i, i + 1))
    for i, j in candidates:
        si, sj = eng.signed_score(grid1d[i]), eng.signed_score(grid1d[j])
        if si == 0.0:
            return np.array([grid1d[i]])
        if si * sj < 0:
            lo, hi, slo = grid1d[i], grid1d[j], si
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                sm = eng.signed_score(mid)
                if sm == 0.0 or (hi - lo) < 1e-12 * (1.0 + abs(mid)):
                    return np.array([mid])
                if slo * sm < 0:
                    hi = mid
                else:
                    lo, slo = mid, sm
            return np.array([0.5 * (lo + hi)])
    return None


@dataclass(frozen=True)
class SndmMle:
    """Maximum likelihood fit of the reparameterized model."""

    psi: np.ndarray
    h_mean: float
    h_sd: float
    phi: dict[int, np.ndarray]
    loglik: float
    converged: bool
    n_params: int


def _covariate_cols(L: np.ndarray, A: np.ndarray, m: int, h: np.ndarray) -> dict:
    cols = {f"l{j}": L[:, j] for j in range(m)}
    cols.update({f"a{j}": A[:, j] for j in range(m)})
    cols["a_prev"] = A[:, m - 1] if m >= 1 else np.zeros(L.shape[0])
    cols["h"] = h
    return cols


def _check_cov_terms(terms, m: int) -> None:
    for base in term_bases(terms):
        if base in ("h", "a_prev"):
            continue
        if base.startswith("l") and base != "lm" and int(base[1:]) < m:
            continue
        if base.startswith("a") and base != "a_prev" and base[1:].isdigit() and int(base[1:]) < m:
            continue
        raise ConfigError(
            f"covariate model at occasion {m} may only use strictly earlier "
            f"history and 'h'; got {base!r}"
        )


def sndm_mle(
    dataset: Dataset,
    blip_spec: BlipSpec,
    *,
    covariate_terms,
    psi_fixed=None,
    include_jacobian: bool = True,
    x0_psi=None,
    maxiter: int = 1000,
) -> SndmMle:
    """Maximize the reparameterized likelihood over (psi, eta, phi).

    The likelihood is the product of the residual-outcome density (normal,
    parameters eta), the change-of-variables factor dH/dY, and a logistic
    model per non-degenerate covariate occasion with terms over strictly
    earlier history plus the residual outcome 'h'.  ``covariate_terms`` is a
    dict occasion -> term tuple, or one tuple shared by all occasions.
    ``include_jacobian=False`` drops the dH/dY factor (diagnostic only: it
    biases the multiplicative family's fit).
    """
    L, A, Y = dataset.L, dataset.A, dataset.Y
    n, K1 = L.shape
    d = blip_spec.dim
    S = shift_basis(blip_spec, dataset.L, dataset.A)
    modeled = [m for m in range(K1) if np.ptp(L[:, m]) > 0]
    for m in modeled:
        col = L[:, m]
        if np.any((np.abs(col) > 1e-9) & (np.abs(col - 1.0) > 1e-9)):
            raise EstimationError("covariate models support binary columns only")
    if isinstance(covariate_terms, dict):
        terms_by_m = {m: tuple(covariate_terms[m]) for m in modeled}
    else:
        terms_by_m = {m: tuple(covariate_terms) for m in modeled}
    for m, terms in terms_by_m.items():
        _check_cov_terms(terms, m)
    sizes = [len(terms_by_m[m]) for m in modeled]
    if blip_spec.family == "multiplicative" and np.any(Y <= 0):
        raise EstimationError("multiplicative blip family requires positive outcomes")

    fixed = psi_fixed is not None
    psi_fix = np.atleast_1d(np.asarray(psi_fixed, dtype=float)) if fixed else None

    def unpack(x):
        k = 0
        if fixed:
            psi = psi_fix
        else:
            psi = x[:d]
            k = d
        mu, logsd = x[k], x[k + 1]
        k += 2
        phis = {}
        for m, sz in zip(modeled, sizes):
            phis[m] = x[k : k + sz]
            k += sz
        return psi, mu, logsd, phis

    def negll(x):
        psi, mu, logsd, phis = unpack(x)
        sd = np.exp(logsd)
        total_shift = S @ psi
        if blip_spec.family == "additive":
            h = Y + total_shift
            log_jac = 0.0
        else:
            h = Y * np.exp(total_shift)
            log_jac = float(np.sum(total_shift)) if include_jacobian else 0.0
        z = (h - mu) / sd
        ll = -0.5 * float(z @ z) - n * (logsd + 0.5 * np.log(2.0 * np.pi))
        if include_jacobian:
            ll += log_jac
        for m in modeled:
            X = eval_terms(terms_by_m[m], _covariate_cols(L, A, m, h))
            eta = X @ phis[m]
            ll += float(L[:, m] @ eta - np.sum(np.logaddexp(0.0, eta)))
        return -ll

    n_free = (0 if fixed else d) + 2 + sum(sizes)
    x0 = np.zeros(n_free)
    k = 0
    if not fixed:
        if x0_psi is not None:
            x0[:d] = np.atleast_1d(np.asarray(x0_psi, dtype=float))
        k = d
    x0[k] = float(np.mean(Y))
    x0[k + 1] = float(np.log(np.std(Y) + 1e-8))
    res = scipy.optimize.minimize(
        negll, x0, method="L-BFGS-B",
        options={"maxiter": maxiter, "maxfun": 5 * maxiter, "ftol": 1e-12, "gtol": 1e-9},
    )
    if not res.success and "ABNORMAL" not in str(res.message):
        raise ConvergenceError(f"likelihood maximization failed: {res.message}")
    psi, mu, logsd, phis = unpack(res.x)
    return SndmMle(
        psi=np.asarray(psi, dtype=float),
        h_mean=float(mu),
        h_sd=float(np.exp(logsd)),
        phi={m: np.asarray(v, dtype=float) for m, v in phis.items()},
        loglik=-float(res.fun),
        converged=bool(res.success),
        n_params=n_free,
    )


def sndm_lr_test(
    dataset: Dataset,
    blip_spec: BlipSpec,
    *,
    covariate_terms,
    psi_null=None,
    level: float = 0.05,
) -> TestReport:
    """Likelihood-ratio test of psi = psi_null (default 0) in the MLE."""
    d = blip_spec.dim
    psi_null = np.zeros(d) if psi_null is None else np.atleast_1d(np.asarray(psi_null, float))
    free = sndm_mle(dataset, blip_spec, covariate_terms=covariate_terms)
    null = sndm_mle(dataset, blip_spec, covariate_terms=covariate_terms,
                    psi_fixed=psi_null)
    lr = max(0.0, 2.0 * (free.loglik - null.loglik))
    p = float(stats.chi2.sf(lr, d))
    return TestReport(lr, d, "chi2", p, level, p < level)


def mc_regime_draws(
    blip_spec: BlipSpec,
    regime: Regime,
    *,
    K: int,
    h_samples: np.ndarray | None = None,
    h_law=None,
    covariate_models: tuple | None = None,
    draws: int | None = None,
    seed: int = 0,
) -> RegimeDistribution:
    """Monte Carlo standardized outcome law implied by a fitted blip model.

    Draw a residual outcome (step 1: the given empirical samples, or
    ``h_law``), roll covariates forward under the regime with models that may
    depend on 'h' (steps 2-4), then invert the H-recursion (step 5).  With
    ``draws=None`` the empirical h samples are used once each, in order.
    For a covariate-free blip under a static regime the covariate steps drop
    out and ``covariate_models`` may be omitted.
    """
    psi = blip_spec.require_psi()  # noqa: F841  (validates psi is attached)
    if draws is None:
        if h_samples is None:
            raise ConfigError("draws=None requires explicit h_samples")
        h = np.asarray(h_samples, dtype=float)
    else:
        rng = streams.substream(seed, "sndm-mc", regime.name, "h")
        if h_samples is not None:
            h = rng.choice(np.asarray(h_samples, dtype=float), size=draws)
        elif h_law is not None:
            h = h_law.sample(rng, draws)
        else:
            raise ConfigError("need h_samples or h_law")
    n = h.size
    if covariate_models is None:
        if blip_spec.uses_covariates:
            raise ConfigError(
                "blip cofactors reference covariate history; covariate models "
                "are required"
            )
        if regime.kind != "static":
            raise ConfigError("dynamic regimes require covariate models")
        L = np.zeros((n, K + 1))
        A = np.tile(np.asarray(regime.plan[: K + 1], dtype=float), (n, 1))
        return RegimeDistribution.from_samples(blip_up(blip_spec, h, L, A), regime.name)
    if len(covariate_models) != K + 1:
        raise ConfigError("one covariate model per occasion required")
    L = np.empty((n, K + 1))
    A = np.empty((n, K + 1))
    done = 0
    for b in range(streams.block_count(n)):
        rng = streams.substream(seed, "sndm-mc", regime.name, b)
        nb = min(streams.BLOCK, n - done)
        sl = slice(done, done + nb)
        for m in range(K + 1):
            cols = _covariate_cols(L[sl], A[sl], m, h[sl])
            L[sl, m] = covariate_models[m].sample(rng, cols, nb)
            A[sl, m] = regime_values(regime, L[sl, : m + 1], m)
        done += nb
    return RegimeDistribution.from_samples(blip_up(blip_spec, h, L, A), regime.name)


def empirical_static_survivor(
    dataset: Dataset,
    blip_spec: BlipSpec,
    plan,
) -> RegimeDistribution:
    """Plug-in standardized law under a static plan, for covariate-free blips.

    Each subject's residual outcome is pushed back up along the fixed plan;
    the returned samples give n^{-1} sum I{y_i > y} as the survivor estimate.
    """
    if blip_spec.uses_covariates:
        raise EstimationError(
            "blip cofactors reference covariate history; the empirical plug-in "
            "applies only to covariate-free blip families"
        )
    plan = np.asarray(plan, dtype=float)
    K = dataset.schema.K
    if plan.shape != (K + 1,):
        raise ConfigError(f"plan must assign all {K + 1} occasions")
    h = blip_down(blip_spec, dataset).h
    L = np.zeros((dataset.n, K + 1))
    A = np.tile(plan, (dataset.n, 1))
    y = blip_up(blip_spec, h, L, A)
    return RegimeDistribution.from_samples(y, f"static{tuple(plan)}")
