"""Direct effects: tests and estimation when part of treatment is held fixed.

Setting: each occasion's treatment is assigned to one of two arms — the
arm of interest (P) whose direct effect we study, and the remaining arm
(Z) whose observed values are "held fixed" analytically.  Holding Z fixed
is done by inverse-probability weighting with the Z-assignment laws, never
by conditioning on Z in a regression (conditioning opens covariate paths
and is exactly the mistake the naive approach makes).

Main entry points:

* ``direct_effect_gnull_test`` — two-occasion weighted independence test:
  under "A0 has no direct effect with A1 held fixed", the weighted
  transform t1(Y) t2(A1) / f(A1 | L, A0) is mean-independent of A0.
* ``naive_direct_effect_demo`` — the regression-flavored alternative built
  from a covariate model and a covariate-free blip family; shows how it
  rejects a true null when treatment effects are heterogeneous in a
  hidden cause.
* ``direct_effect_g_estimate`` — three-step weighted g-estimation of a
  direct-effect blip family, with within-subject-robust score tests.
* ``direct_effect_moment_check`` — the population moment characterization
  evaluated exactly on a joint table (or empirically on a large dataset).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .data import Dataset
from .errors import ConfigError, EstimationError, PositivityError
from .features import eval_terms, history_cols, term_bases
from .gformula import JointTable
from .glm import (
    TestReport,
    _report,
    expit,
    fit_linear,
    fit_logistic,
    robust_score_test,
    wald_test,
)
from .laws import BernoulliLogit, NormalLinear
from .sndm import BlipSpec, GEstimate, _search, g_test_at

WEIGHT_FLOOR = 1e-6

CONSERVATIVE_NOTE = (
    "conservative: inverse-probability weights use estimated treatment-law "
    "parameters"
)


@dataclass(frozen=True)
class SplitSchema:
    """Partition of the occasions into the studied arm (P) and the fixed arm (Z).

    This build assigns each occasion's scalar treatment wholly to one arm;
    a study with both arms active at one time point is encoded by giving
    each arm its own occasion.
    """

    p_occasions: tuple[int, ...]
    z_occasions: tuple[int, ...]

    def __post_init__(self) -> None:
        p, z = set(self.p_occasions), set(self.z_occasions)
        if p & z:
            raise ConfigError("an occasion cannot be in both arms")
        if not p:
            raise ConfigError("at least one occasion must carry the studied arm")
        object.__setattr__(self, "p_occasions", tuple(sorted(p)))
        object.__setattr__(self, "z_occasions", tuple(sorted(z)))

    def validate_for(self, K: int) -> None:
        every = set(self.p_occasions) | set(self.z_occasions)
        if every != set(range(K + 1)):
            raise ConfigError(
                f"split must cover occasions 0..{K} exactly; got {sorted(every)}"
            )


@dataclass(frozen=True)
class IpwWeights:
    """Per-subject assignment densities of the fixed arm, one per Z occasion.

    ``w_from(m)`` multiplies the factors at Z occasions >= m — the weight
    that converts an observed-data mean into a "Z held fixed" mean for a
    moment anchored at occasion m-1.
    """

    factors: dict[int, np.ndarray]
    alpha_source: str  # "design" | "estimated"

    def __post_init__(self) -> None:
        for k, f in self.factors.items():
            f = np.asarray(f, dtype=float)
            if not np.isfinite(f).all():
                raise EstimationError(f"non-finite assignment density at occasion {k}")
            if np.any(f < WEIGHT_FLOOR):
                raise PositivityError(
                    f"assignment density below {WEIGHT_FLOOR:g} at occasion {k}; "
                    "weighted moments are unstable (positivity)"
                )

    def w_from(self, m: int, n: int) -> np.ndarray:
        out = np.ones(n)
        for k, f in self.factors.items():
            if k >= m:
                out = out * f
        return out


def fit_z_laws(
    dataset: Dataset,
    split: SplitSchema,
    terms: tuple[str, ...] = ("1", "lm", "a_prev"),
    known: dict[int, object] | None = None,
):
    """One assignment law per Z occasion: known objects or fits from ``terms``.

    Binary columns get a logistic law, anything else a normal-linear law
    with the residual standard deviation plugged in.  Returns
    (laws, source) with source "design" only when every law was supplied.
    """
    split.validate_for(dataset.schema.K)
    known = dict(known or {})
    laws: dict[int, object] = {}
    estimated = False
    for k in split.z_occasions:
        if k in known:
            laws[k] = known[k]
            continue
        estimated = True
        cols = history_cols(dataset.L, dataset.A, k)
        X = eval_terms(terms, cols)
        a = dataset.A[:, k]
        if np.isin(np.unique(a), (0.0, 1.0)).all():
            fit = fit_logistic(X, a)
            laws[k] = BernoulliLogit(terms, tuple(fit.coef))
        else:
            fit = fit_linear(X, a)
            laws[k] = NormalLinear(terms, tuple(fit.coef),
                                   float(np.sqrt(fit.dispersion)))
    source = "estimated" if estimated else "design"
    return laws, source


def ipw_weights(dataset: Dataset, split: SplitSchema, z_laws: dict[int, object],
                source: str = "estimated") -> IpwWeights:
    """Evaluate each Z law at the observed assignments."""
    factors = {}
    for k in split.z_occasions:
        law = z_laws[k]
        cols = history_cols(dataset.L, dataset.A, k)
        a = dataset.A[:, k]
        if hasattr(law, "pmf"):
            factors[k] = np.asarray(law.pmf(a, cols), dtype=float)
        elif hasattr(law, "density"):
            factors[k] = np.asarray(law.density(a, cols), dtype=float)
        else:
            raise ConfigError(f"law for occasion {k} has neither pmf nor density")
    return IpwWeights(factors, source)


# ---------------------------------------------------------------------------
# Two-occasion weighted test of "no direct effect of the early treatment".
# ---------------------------------------------------------------------------


def direct_effect_gnull_test(
    dataset: Dataset,
    *,
    a1_law: object | None = None,
    a1_terms: tuple[str, ...] = ("1", "lm", "a0"),
    t1: Callable[[np.ndarray], np.ndarray] | None = None,
    t2: Callable[[np.ndarray], np.ndarray] | None = None,
    level: float = 0.05,
) -> TestReport:
    """Weighted independence test of the early treatment's direct effect.

    Forms script-W = t1(Y) t2(A1) / f(A1 | L, A0) and score-tests the A0
    slope in a linear model for script-W.  Weighting by the late-treatment
    assignment density removes the dependence that conditioning on A1
    would otherwise induce; any t2 with finite weighted expectation works
    (the default is the standard normal density, integrable for continuous
    A1).  The score is self-normalized (per-subject squared summands) —
    the weight ratio makes the variance of script-W depend on A0, so a
    homoskedastic variance would not hold the level.  With an estimated
    assignment law the test is conservative.
    """
    if dataset.schema.K != 1:
        raise ConfigError("direct_effect_gnull_test expects a two-occasion dataset")
    split = SplitSchema((0,), (1,))
    if a1_law is not None:
        laws, source = {1: a1_law}, "design"
    else:
        laws, source = fit_z_laws(dataset, split, a1_terms)
    w = ipw_weights(dataset, split, laws, source)
    w1 = w.factors[1]
    t1v = dataset.Y if t1 is None else np.asarray(t1(dataset.Y), dtype=float)
    a1 = dataset.A[:, 1]
    t2v = stats.norm.pdf(a1) if t2 is None else np.asarray(t2(a1), dtype=float)
    script = t1v * t2v / w1
    if not np.isfinite(script).all():
        raise EstimationError("weighted transform is non-finite")
    note = "known randomization design" if source == "design" else CONSERVATIVE_NOTE
    if np.ptp(script) == 0.0:
        return _report(0.0, 1, "chi2", level,
                       note=note + "; degenerate transform (constant)")
    a0 = dataset.A[:, 0]
    u = (script - script.mean()) * (a0 - a0.mean())
    ss = float(np.sum(u * u))
    if ss <= 0.0:
        return _report(0.0, 1, "chi2", level,
                       note=note + "; degenerate score (no variation)")
    chi = float(np.sum(u) / np.sqrt(ss))
    return _report(chi, None, "normal", level, note=note)


# ---------------------------------------------------------------------------
# The naive alternative and its failure mode.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NaiveDirectEffectReport:
    """Pieces of the regression-flavored direct-effect test.

    The naive null says: the late treatment's effect on the outcome is the
    same function of a1 everywhere (a covariate-free blip), AND the
    covariate is independent of the early treatment.  Rejecting requires
    rejecting both conjuncts (intersection-union), which keeps the naive
    test level-valid *as a test of its own parametric null* — the point is
    that its parametric null excludes the true direct-effect null whenever
    effects are heterogeneous, so it rejects a truth it cannot express.
    """

    covariate_test: TestReport  # logistic L ~ a0 slope
    gamma1_hat: float
    scan_grid: np.ndarray
    scan_pvals: np.ndarray
    scan_best_psi: float
    scan_max_p: float
    reduced_family_reject: bool
    naive_reject: bool
    level: float
    psi_full: np.ndarray | None = None
    constancy_spread: float = float("nan")


_FULL_FAMILY = BlipSpec("additive", ("1", "a0", "lm", "a0*lm"))


def naive_direct_effect_demo(
    dataset: Dataset,
    *,
    psi2_grid: np.ndarray | None = None,
    a1_alpha_known: tuple[float, ...] | None = None,
    a1_terms: tuple[str, ...] = ("1", "lm", "a0"),
    level: float = 0.05,
    fit_full: bool = False,
) -> NaiveDirectEffectReport:
    """Run the naive direct-effect analysis and report what it concludes.

    Branch 1 tests "covariate independent of early treatment" (logistic
    slope).  Branch 2 asks whether ANY covariate-free blip y + a1*psi2 is
    compatible with the data, by profiling the 4-df residual-randomization
    score over psi2 and keeping the largest p-value.  The naive analysis
    declares a direct effect when both branches reject.  ``fit_full``
    additionally fits the full 4-term family and evaluates how far the
    implied standardized effect is from constant in a0.
    """
    if dataset.schema.K != 1:
        raise ConfigError("naive_direct_effect_demo expects a two-occasion dataset")
    grid = (np.linspace(-3.0, 3.0, 41) if psi2_grid is None
            else np.asarray(psi2_grid, dtype=float))
    Xg = np.column_stack([np.ones(dataset.n), dataset.A[:, 0]])
    gfit = fit_logistic(Xg, dataset.L[:, 1])
    covariate_test = wald_test(gfit, (1,), level=level,
                               note="covariate-vs-early-treatment dependence")

    pvals = np.empty(len(grid))
    for i, p2 in enumerate(grid):
        rep = g_test_at(
            dataset, _FULL_FAMILY, [p2, 0.0, 0.0, 0.0],
            treatment_terms=a1_terms, alpha_known=a1_alpha_known,
            occasions=(1,), level=level,
        )
        pvals[i] = rep.p_value
    best = int(np.argmax(pvals))
    reduced_reject = bool(pvals[best] < level)
    naive_reject = bool(covariate_test.reject and reduced_reject)

    psi_full = None
    spread = float("nan")
    if fit_full:
        from .sndm import g_estimate

        est = g_estimate(
            dataset, _FULL_FAMILY,
            treatment_terms=a1_terms, alpha_known=a1_alpha_known,
            occasions=(1,), psi_box=[(-3.0, 3.0)] * 4, grid_points=5,
            level=level,
        )
        psi_full = est.psi_hat
        pl = expit(gfit.coef[0] + gfit.coef[1] * np.array([0.0, 1.0]))
        delta = (psi_full[0] + psi_full[1] * np.array([0.0, 1.0])
                 + (psi_full[2] + psi_full[3] * np.array([0.0, 1.0])) * pl)
        spread = float(abs(delta[1] - delta[0]))
    return NaiveDirectEffectReport(
        covariate_test=covariate_test,
        gamma1_hat=float(gfit.coef[1]),
        scan_grid=grid,
        scan_pvals=pvals,
        scan_best_psi=float(grid[best]),
        scan_max_p=float(pvals[best]),
        reduced_family_reject=reduced_reject,
        naive_reject=naive_reject,
        level=level,
        psi_full=psi_full,
        constancy_spread=spread,
    )


# ---------------------------------------------------------------------------
# Weighted g-estimation of a direct-effect blip family.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeSndmSpec:
    """Direct-effect blip family plus the studied-arm mean model.

    The blip shifts the outcome per unit of the studied-arm treatment; its
    cofactors may reference the fixed arm's treatments at ANY occasion
    (they are held fixed, so "future" Z values are legitimate effect
    modifiers) but only earlier studied-arm treatments and covariates.
    """

    blip: BlipSpec
    mean_terms: tuple[str, ...] = ("1",)
    qstar: Callable | None = None

    def validate_for(self, split: SplitSchema, K: int) -> None:
        split.validate_for(K)
        zset = set(split.z_occasions)
        for m in split.p_occasions:
            for base in term_bases(self.blip.cofactors):
                if base.startswith("l") and base != "lm" and int(base[1:]) <= m:
                    continue
                if base == "lm" or base == "a_prev":
                    continue
                if base.startswith("a") and base[1:].isdigit():
                    j = int(base[1:])
                    if j in zset or j < m:
                        continue
                raise ConfigError(
                    f"cofactor base {base!r} is not available at studied-arm "
                    f"occasion {m}: only covariates up to {m}, earlier "
                    f"treatments, and fixed-arm treatments are allowed"
                )


def _de_occ_cols(L: np.ndarray, A: np.ndarray, m: int) -> dict[str, np.ndarray]:
    cols = {f"l{j}": L[:, j] for j in range(L.shape[1])}
    cols.update({f"a{j}": A[:, j] for j in range(A.shape[1])})
    cols["lm"] = L[:, m]
    cols["a_prev"] = A[:, m - 1] if m >= 1 else np.zeros(L.shape[0])
    return cols


def de_cofactor_matrix(spec: DeSndmSpec, L: np.ndarray, A: np.ndarray, m: int) -> np.ndarray:
    return eval_terms(spec.blip.cofactors, _de_occ_cols(L, A, m))


def de_shift_basis(spec: DeSndmSpec, split: SplitSchema, L: np.ndarray,
                   A: np.ndarray) -> np.ndarray:
    """(n, dim) basis S with S @ psi = total studied-arm shift."""
    S = np.zeros((L.shape[0], spec.blip.dim))
    for m in split.p_occasions:
        S += A[:, m][:, None] * de_cofactor_matrix(spec, L, A, m)
    return S


def de_blip_down(spec: DeSndmSpec, split: SplitSchema, dataset: Dataset) -> np.ndarray:
    """Residual outcome H: observed Y with every studied-arm shift removed."""
    return _residual_rows(spec, split, dataset.L, dataset.A, dataset.Y)


class _DeEngine:
    """Pooled studied-arm rows, weights, and the robust score test at psi."""

    def __init__(self, dataset, split, spec, weights, p_alpha_known, level):
        self.dataset = dataset
        self.split = split
        self.spec = spec
        self.level = level
        occs = list(split.p_occasions)
        n = dataset.n
        blocks, resp = [], []
        wcols = []
        for m in occs:
            cols = history_cols(dataset.L, dataset.A, m)
            blocks.append(eval_terms(spec.mean_terms, cols))
            resp.append(dataset.A[:, m])
            wcols.append(weights.w_from(m + 1, n))
        self.X = np.vstack(blocks)
        self.resp = np.concatenate(resp)
        self.subj = np.tile(np.arange(n), len(occs))
        self.w = np.concatenate(wcols)
        bad = (np.abs(self.resp) > 1e-9) & (np.abs(self.resp - 1.0) > 1e-9)
        if np.any(bad):
            raise EstimationError("studied-arm treatments must be binary")
        self.C = [de_cofactor_matrix(spec, dataset.L, dataset.A, m) for m in occs]
        self.S = de_shift_basis(spec, split, dataset.L, dataset.A)
        self.occs = occs
        if p_alpha_known is not None:
            self.alpha = np.asarray(p_alpha_known, dtype=float)
            self.fit = None
        else:
            self.alpha = None
            self.fit = fit_logistic(self.X, self.resp)
        base = ("known randomization design" if p_alpha_known is not None
                and weights.alpha_source == "design" else CONSERVATIVE_NOTE)
        self.note = base

    def h_of(self, psi: np.ndarray) -> np.ndarray:
        Y = self.dataset.Y
        if self.spec.blip.family == "additive":
            return Y + self.S @ psi
        if np.any(Y <= 0):
            raise EstimationError("multiplicative blip family requires positive outcomes")
        return Y * np.exp(self.S @ psi)

    def zmat(self, psi: np.ndarray) -> np.ndarray:
        h = self.h_of(psi)
        if self.spec.qstar is not None:
            blocks = [np.atleast_2d(np.asarray(
                self.spec.qstar(h, self.dataset.L, self.dataset.A, m), dtype=float))
                for m in self.occs]
            blocks = [b if b.shape[0] == len(h) else b.T for b in blocks]
        else:
            blocks = [h[:, None] * C for C in self.C]
        return np.vstack(blocks) / self.w[:, None]

    def report(self, psi) -> TestReport:
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        Z = self.zmat(psi)
        if self.alpha is not None:
            return robust_score_test(self.X, self.resp, Z, self.subj,
                                     known_coef=self.alpha, level=self.level,
                                     note=self.note)
        return robust_score_test(self.X, self.resp, Z, self.subj,
                                 fit=self.fit, level=self.level, note=self.note)

    def signed_score(self, psi_scalar: float) -> float:
        Z = self.zmat(np.array([psi_scalar]))
        coef = self.alpha if self.alpha is not None else self.fit.coef
        return float(Z[:, 0] @ (self.resp - expit(self.X @ coef)))


def direct_effect_g_estimate(
    dataset: Dataset,
    split: SplitSchema,
    spec: DeSndmSpec,
    *,
    psi_box,
    z_laws: dict[int, object] | None = None,
    z_terms: tuple[str, ...] = ("1", "lm", "a_prev"),
    p_alpha_known: tuple[float, ...] | None = None,
    grid_points: int | tuple[int, ...] = 201,
    level: float = 0.05,
) -> GEstimate:
    """Three-step weighted g-estimation of the direct-effect blip parameter.

    Step 1 fits (or takes) the fixed-arm assignment laws and builds the
    per-occasion weights.  Step 2 fits the studied-arm mean model on pooled
    person-occasions (skipped when ``p_alpha_known`` is given).  Step 3, at
    each candidate psi, removes the studied-arm shifts from the outcome,
    weights the paired moment columns, and score-tests them with a
    within-subject-robust variance; the estimate and confidence set come
    from inverting that test over the grid.  The set is conservative when
    any law was estimated.
    """
    spec.validate_for(split, dataset.schema.K)
    dim = spec.blip.dim
    box = np.atleast_2d(np.asarray(psi_box, dtype=float))
    if box.shape != (dim, 2):
        raise ConfigError("psi_box must give (lo, hi) per blip component")
    points = (grid_points,) * dim if isinstance(grid_points, int) else tuple(grid_points)
    if split.z_occasions:
        known = z_laws or {}
        missing = [k for k in split.z_occasions if k not in known]
        if missing:
            fitted, source = fit_z_laws(dataset, split, z_terms, known=known)
            laws = fitted
        else:
            laws, source = known, "design"
        weights = ipw_weights(dataset, split, laws, source)
    else:
        weights = IpwWeights({}, "design")
    eng = _DeEngine(dataset, split, spec, weights, p_alpha_known, level)
    return _search(eng, dim, box, points, level)


# ---------------------------------------------------------------------------
# Exact moment characterization on a joint table.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeMomentReport:
    """Max within-cell spread of the weighted moment, per studied-arm occasion."""

    per_occasion: dict[int, float]
    cells_checked: dict[int, int]

    @property
    def worst(self) -> float:
        return max(self.per_occasion.values()) if self.per_occasion else 0.0


def _table_factor(table: JointTable, k: int) -> np.ndarray:
    """Exact f(a_k | l_bar_k, a_bar_{k-1}) for every table row."""
    cols = [table.l_col(j) for j in range(k + 1)] + [table.a_col(j) for j in range(k)]
    out = np.empty(table.cells.shape[0])
    for r in range(table.cells.shape[0]):
        vals = table.cells[r]
        num_idx = cols + [table.a_col(k)]
        num = _sum_match(table, num_idx, vals[num_idx])
        den = _sum_match(table, cols, vals[cols])
        out[r] = num / den if den > 0 else 0.0
    return out


def _sum_match(table: JointTable, idx, vals) -> float:
    mask = np.ones(table.cells.shape[0], dtype=bool)
    for i, v in zip(idx, vals):
        mask &= np.abs(table.cells[:, i] - v) <= 1e-9
    return float(table.probs[mask].sum())


def direct_effect_moment_check(
    source: JointTable | Dataset,
    split: SplitSchema,
    spec: DeSndmSpec,
    *,
    z_laws: dict[int, object] | None = None,
    t: Callable[[np.ndarray], np.ndarray] | None = None,
) -> DeMomentReport:
    """How far the weighted moment is from constant in the studied-arm treatment.

    At the true blip parameter, E[t(H) / W_{m+1} | history through occasion
    m] is the same at every level of A_m for each studied-arm occasion m.
    On a joint table everything — residual outcome, weights, conditional
    expectations — is computed by exact summation, so the deviation at the
    true parameter is numerically zero and grows with parameter error.  On
    a dataset the same quantity is estimated by within-cell averages
    (discrete histories required, ``z_laws`` supply the weights).
    """
    spec.blip.require_psi()
    if isinstance(source, JointTable):
        return _moment_check_table(source, split, spec, t)
    if z_laws is None and split.z_occasions:
        raise ConfigError("dataset mode needs the fixed-arm laws for weights")
    return _moment_check_data(source, split, spec, z_laws or {}, t)


def _residual_rows(spec: DeSndmSpec, split: SplitSchema, L, A, Y) -> np.ndarray:
    psi = spec.blip.require_psi()
    S = np.zeros((L.shape[0], spec.blip.dim))
    for m in split.p_occasions:
        S += A[:, m][:, None] * de_cofactor_matrix(spec, L, A, m)
    if spec.blip.family == "additive":
        return Y + S @ psi
    if np.any(Y <= 0):
        raise EstimationError("multiplicative blip family requires positive outcomes")
    return Y * np.exp(S @ psi)


def _moment_check_table(table: JointTable, split: SplitSchema, spec: DeSndmSpec,
                        t) -> DeMomentReport:
    K = table.schema.K
    split.validate_for(K)
    spec.validate_for(split, K)
    L = np.column_stack([table.cells[:, table.l_col(j)] for j in range(K + 1)])
    A = np.column_stack([table.cells[:, table.a_col(j)] for j in range(K + 1)])
    Y = table.cells[:, -1]
    h = _residual_rows(spec, split, L, A, Y)
    tv = h if t is None else np.asarray(t(h), dtype=float)
    factors = {k: _table_factor(table, k) for k in split.z_occasions}
    per, counted = {}, {}
    live = table.probs > 0.0
    for m in split.p_occasions:
        w = np.ones(len(tv))
        for k, f in factors.items():
            if k >= m + 1:
                if np.any(live & (f <= 0.0)):
                    raise PositivityError(
                        f"zero conditional assignment probability at occasion {k}"
                    )
                w = w * np.where(live, f, 1.0)
        key_cols = ([table.l_col(j) for j in range(m + 1)]
                    + [table.a_col(j) for j in range(m)])
        keys = np.round(table.cells[:, key_cols], 9)
        uniq = np.unique(keys, axis=0)
        worst, cells = 0.0, 0
        a_col = table.a_col(m)
        for u in uniq:
            in_cell = live & np.all(np.abs(keys - u) <= 1e-9, axis=1)
            means = []
            for a in np.unique(table.cells[in_cell, a_col]):
                sel = in_cell & (np.abs(table.cells[:, a_col] - a) <= 1e-9)
                mass = float(table.probs[sel].sum())
                if mass <= 0.0:
                    continue
                means.append(float(np.sum(table.probs[sel] * tv[sel] / w[sel]) / mass))
            if len(means) >= 2:
                cells += 1
                worst = max(worst, max(means) - min(means))
        per[m] = worst
        counted[m] = cells
    return DeMomentReport(per, counted)


def _moment_check_data(dataset: Dataset, split: SplitSchema, spec: DeSndmSpec,
                       z_laws: dict[int, object], t) -> DeMomentReport:
    K = dataset.schema.K
    split.validate_for(K)
    spec.validate_for(split, K)
    weights = ipw_weights(dataset, split, z_laws, "design") if split.z_occasions \
        else IpwWeights({}, "design")
    h = _residual_rows(spec, split, dataset.L, dataset.A, dataset.Y)
    tv = h if t is None else np.asarray(t(h), dtype=float)
    per, counted = {}, {}
    for m in split.p_occasions:
        w = weights.w_from(m + 1, dataset.n)
        hist = np.column_stack([dataset.L[:, : m + 1], dataset.A[:, :m]])
        keys = np.round(hist, 9)
        uniq = np.unique(keys, axis=0)
        worst, cells = 0.0, 0
        for u in uniq:
            in_cell = np.all(np.abs(keys - u) <= 1e-9, axis=1)
            means = []
            for a in np.unique(dataset.A[in_cell, m]):
                sel = in_cell & (np.abs(dataset.A[:, m] - a) <= 1e-9)
                if sel.sum() == 0:
                    continue
                means.append(float(np.mean(tv[sel] / w[sel])))
            if len(means) >= 2:
                cells += 1
                worst = max(worst, max(means) - min(means))
        per[m] = worst
        counted[m] = cells
    return DeMomentReport(per, counted)
