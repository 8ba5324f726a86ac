"""Tests of the joint null of no treatment effect in two-stage designs.

Four testing routes live here:

* ``naive_test`` — the standard regression Wald test of both treatment
  coefficients in a linear outcome model.  Invalid when an intermediate
  covariate is confounded with the outcome: it rejects the true null with
  probability tending to 1.  Provided as the cautionary baseline.
* ``parametric_null_check`` — the exact algebraic condition under which the
  linear-outcome + logistic-covariate pair can represent a null standardized
  mean.
* ``gnull_score_test`` — the randomization score test built from the known
  design means; valid regardless of the covariate process.
* ``pooled_g_test`` — the general person-occasion logistic score test: each
  subject contributes one Bernoulli row per occasion, and the test asks
  whether a chosen function of the outcome and history predicts treatment.

Also here: exact conditional-independence predicates on discrete joint
tables, used to cross-check the two equivalent statements of the null, and
a random-table generator for those checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Schema, constant, discrete
from .errors import ConfigError, EstimationError
from .features import eval_terms, history_cols
from .gformula import JointTable
from .glm import (
    TestReport,
    _report,
    fit_linear,
    fit_logistic,
    pooled_rows,
    score_test_added,
    wald_test,
)

ESTIMATED_DESIGN_NOTE = (
    "treatment model estimated from the data; the test level relies on its "
    "correct specification"
)


# ---------------------------------------------------------------------------
# The naive regression test and why it cannot be fixed parametrically.
# ---------------------------------------------------------------------------


def naive_test(dataset: Dataset, level: float = 0.05) -> TestReport:
    """2-df Wald test of both treatment coefficients in Y ~ 1 + a0 + l + a1.

    This is the test a routine analysis would run.  It conditions on the
    intermediate covariate, which opens a path between the early treatment
    and the outcome whenever a hidden cause drives both the covariate and
    the outcome — so it is *not* a valid test of "no treatment effect".
    """
    if dataset.schema.K != 1:
        raise ConfigError("naive_test expects a two-occasion dataset")
    X = np.column_stack([
        np.ones(dataset.n),
        dataset.A[:, 0],
        dataset.L[:, 1],
        dataset.A[:, 1],
    ])
    fit = fit_linear(X, dataset.Y)
    return wald_test(fit, (1, 3), level=level,
                     note="regression-adjusted test; invalid under confounded covariates")


def parametric_null_check(
    theta: np.ndarray, gamma: np.ndarray, tol: float = 1e-12
) -> tuple[bool, str]:
    """When is the standardized mean constant under these two working models?

    ``theta`` = (intercept, a0, l, a1) coefficients of the linear outcome
    model; ``gamma`` = (intercept, a0) coefficients of the logistic covariate
    model.  The plug-in standardized mean

        I(a0, a1) = th0 + th1 a0 + th3 a1 + th2 expit(g0 + g1 a0)

    is constant in (a0, a1) exactly when branch "i" (th1 = th2 = th3 = 0)
    or branch "ii" (th1 = th3 = g1 = 0) holds.  Returns (holds, branch)
    with branch in {"i", "ii", "i+ii", "none"}.
    """
    th = np.asarray(theta, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if th.shape != (4,) or g.shape != (2,):
        raise ConfigError("theta must have 4 coefficients and gamma 2")
    branch_i = max(abs(th[1]), abs(th[2]), abs(th[3])) <= tol
    branch_ii = max(abs(th[1]), abs(th[3]), abs(g[1])) <= tol
    if branch_i and branch_ii:
        return True, "i+ii"
    if branch_i:
        return True, "i"
    if branch_ii:
        return True, "ii"
    return False, "none"


# ---------------------------------------------------------------------------
# Randomization score test: uses the known design means, nothing else.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GnullScoreInputs:
    """Known design means of the two treatments in a randomized study.

    ``pi1`` is the (unconditional) design mean of A0.  ``pi2`` gives the
    design mean of A1 as a function of the observed past; it is either a
    law object exposing ``mean(cols)`` or ``prob(cols)``, or a
    (terms, coefs) pair defining a linear mean.
    """

    pi1: float
    pi2: object

    def pi2_values(self, dataset: Dataset) -> np.ndarray:
        cols = history_cols(dataset.L, dataset.A, 1)
        if hasattr(self.pi2, "mean"):
            return np.asarray(self.pi2.mean(cols), dtype=float)
        if hasattr(self.pi2, "prob"):
            return np.asarray(self.pi2.prob(cols), dtype=float)
        terms, coefs = self.pi2
        return eval_terms(tuple(terms), cols) @ np.asarray(coefs, dtype=float)

    @classmethod
    def from_scenario(cls, config) -> "GnullScoreInputs":
        """Pull the design means out of a scenario's treatment laws.

        The A0 mean is evaluated at an all-zero baseline history, so this
        is only exact when baseline covariates are degenerate at zero —
        true for every built-in two-occasion scenario.
        """
        a0_law, a1_law = config.a_laws[0], config.a_laws[1]
        zero = {k: np.zeros(1) for k in ("l0", "lm", "a_prev")}
        if hasattr(a0_law, "mean"):
            pi1 = float(a0_law.mean(zero)[0])
        elif hasattr(a0_law, "prob"):
            pi1 = float(a0_law.prob(zero)[0])
        else:
            raise ConfigError("cannot read a design mean off the A0 law")
        return cls(pi1=pi1, pi2=a1_law)


def gnull_score_test(
    dataset: Dataset, inputs: GnullScoreInputs, level: float = 0.05
) -> TestReport:
    """Score test of the joint null from the summands

        U_i = Y_i (A1_i - pi2(A0_i, L_i)) + Y_i (A0_i - pi1).

    Each summand has mean zero under the null because the treatment
    residuals are mean-zero given everything that precedes them; no model
    for the covariate or the outcome is involved.  The standardized sum
    is compared to a standard normal, two-sided.
    """
    if dataset.schema.K != 1:
        raise ConfigError("gnull_score_test expects a two-occasion dataset")
    p2 = inputs.pi2_values(dataset)
    U = dataset.Y * (dataset.A[:, 1] - p2) + dataset.Y * (dataset.A[:, 0] - inputs.pi1)
    ss = float(np.sum(U * U))
    if ss <= 0.0:
        raise EstimationError("sum of squared summands is zero (degenerate data)")
    chi = float(np.sum(U) / np.sqrt(ss))
    return _report(chi, None, "normal", level,
                   note="randomization score test with known design means")


# ---------------------------------------------------------------------------
# Pooled person-occasion score test.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GTestSpec:
    """Configuration of the pooled test.

    ``treatment_terms`` define the per-occasion logistic model for A_m given
    history.  ``q`` maps (y, cols, m) to the added regressor(s): any function
    of the outcome and the history strictly before A_m.  ``alpha_known``
    fixes the treatment-model coefficients (randomized designs); otherwise
    they are estimated by maximum likelihood on the pooled rows.
    """

    treatment_terms: tuple[str, ...]
    q: object = None
    alpha_known: tuple[float, ...] | None = None
    occasions: tuple[int, ...] | None = None

    def q_values(self, y: np.ndarray, cols: dict, m: int) -> np.ndarray:
        if self.q is None:
            return np.asarray(y, dtype=float)[:, None]
        out = np.asarray(self.q(y, cols, m), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape[0] != len(y):
            raise ConfigError("q must return one row per subject")
        return out


def pooled_g_test(dataset: Dataset, spec: GTestSpec, level: float = 0.05) -> TestReport:
    """Score test of "the outcome does not predict treatment at any occasion".

    Subjects are stacked as K+1 Bernoulli rows (one per occasion).  Under
    the joint null and sequential randomization, the added column Q_m =
    q(Y, history) has zero coefficient in the pooled treatment model, and
    the Rao score test of that zero is valid — each row behaves as an
    independent Bernoulli draw given its own history.
    """
    occs = list(spec.occasions) if spec.occasions is not None else list(
        range(dataset.schema.K + 1))
    for m in occs:
        vals = np.unique(dataset.A[:, m])
        if not np.isin(vals, (0.0, 1.0)).all():
            raise ConfigError(f"pooled test needs binary treatments; A{m} is not 0/1")
    X, resp, _, _ = pooled_rows(dataset, spec.treatment_terms, occs)
    qs = []
    for m in occs:
        cols = history_cols(dataset.L, dataset.A, m)
        qs.append(spec.q_values(dataset.Y, cols, m))
    Z = np.vstack(qs)
    if not np.isfinite(Z).all():
        raise ConfigError("q produced non-finite values")
    for j in range(Z.shape[1]):
        col = Z[:, j]
        if np.ptp(col) == 0.0 and col[0] != 0.0:
            raise EstimationError(
                "added column Q is a nonzero constant; it is confounded with "
                "the intercept and cannot be tested"
            )
    if spec.alpha_known is not None:
        alpha = np.asarray(spec.alpha_known, dtype=float)
        if alpha.shape != (X.shape[1],):
            raise ConfigError("alpha_known must match the treatment terms")
        return score_test_added(X, resp, Z, "binomial", known_coef=alpha,
                                level=level,
                                note="known randomization design")
    fit = fit_logistic(X, resp)
    return score_test_added(X, resp, Z, "binomial", fit=fit, level=level,
                            note=ESTIMATED_DESIGN_NOTE)


# ---------------------------------------------------------------------------
# Exact predicates on discrete joint tables (two-occasion shape).
#
# Columns of a K=1 table: (l0, a0, l1, a1, y).  All sums are literal.
# ---------------------------------------------------------------------------


def _mass(table: JointTable, idx: list[int], vals: list[float]) -> float:
    mask = np.ones(len(table.probs), dtype=bool)
    for i, v in zip(idx, vals):
        mask &= np.abs(table.cells[:, i] - v) <= 1e-9
    return float(table.probs[mask].sum())


def _cond_y_dist(table: JointTable, idx: list[int], vals: list[float]) -> np.ndarray | None:
    """P(Y = y | condition) over table.y_values, or None if the event is null."""
    denom = _mass(table, idx, vals)
    if denom <= 0.0:
        return None
    ycol = table.cells.shape[1] - 1
    out = np.array([
        _mass(table, idx + [ycol], vals + [y]) for y in table.y_values()
    ])
    return out / denom


def _levels(table: JointTable, col: int) -> np.ndarray:
    return np.unique(table.cells[:, col])


def predicate_y_indep_a1_given_past(table: JointTable, tol: float = 1e-10) -> bool:
    """Y independent of A1 given (L0, A0, L1), by direct summation."""
    if table.schema.K != 1:
        raise ConfigError("table predicates are defined for two-occasion tables")
    for l0 in _levels(table, 0):
        for a0 in _levels(table, 1):
            for l1 in _levels(table, 2):
                dists = []
                for a1 in _levels(table, 3):
                    d = _cond_y_dist(table, [0, 1, 2, 3], [l0, a0, l1, a1])
                    if d is not None:
                        dists.append(d)
                for d in dists[1:]:
                    if np.max(np.abs(d - dists[0])) > tol:
                        return False
    return True


def predicate_standardized_free_of_a0(table: JointTable, tol: float = 1e-10) -> bool:
    """The covariate-standardized outcome law does not depend on a0.

    For each a0: sum over covariate values of P(y | covs, a0) weighted by
    P(covs | a0), computed literally from the table.
    """
    if table.schema.K != 1:
        raise ConfigError("table predicates are defined for two-occasion tables")
    yvals = table.y_values()
    curves = []
    for a0 in _levels(table, 1):
        pa0 = _mass(table, [1], [a0])
        if pa0 <= 0.0:
            continue
        g = np.zeros(len(yvals))
        for l0 in _levels(table, 0):
            for l1 in _levels(table, 2):
                joint = _mass(table, [0, 1, 2], [l0, a0, l1])
                if joint <= 0.0:
                    continue
                w = joint / pa0
                d = _cond_y_dist(table, [0, 1, 2], [l0, a0, l1])
                g += w * d
        curves.append(g)
    for g in curves[1:]:
        if np.max(np.abs(g - curves[0])) > tol:
            return False
    return True


def predicate_y_indep_a0(table: JointTable, tol: float = 1e-10) -> bool:
    """Y independent of A0 marginally, by direct summation."""
    if table.schema.K != 1:
        raise ConfigError("table predicates are defined for two-occasion tables")
    dists = []
    for a0 in _levels(table, 1):
        d = _cond_y_dist(table, [1], [a0])
        if d is not None:
            dists.append(d)
    for d in dists[1:]:
        if np.max(np.abs(d - dists[0])) > tol:
            return False
    return True


def gnull_table_check(table: JointTable, tol: float = 1e-10) -> dict[str, bool]:
    """Evaluate both equivalent two-predicate statements of the null.

    The null of "no treatment effect of any kind" can be written as
    (conditional ⊥ of Y and A1 given the past) AND (standardized law free
    of a0), or equivalently with the second conjunct replaced by marginal
    independence of Y and A0.  Returns all three predicates plus the two
    conjunctions.
    """
    p2 = predicate_y_indep_a1_given_past(table, tol)
    p3 = predicate_standardized_free_of_a0(table, tol)
    p6 = predicate_y_indep_a0(table, tol)
    return {
        "y_indep_a1_given_past": p2,
        "standardized_free_of_a0": p3,
        "y_indep_a0": p6,
        "joint_with_standardized": p2 and p3,
        "joint_with_marginal": p2 and p6,
    }


def random_sequential_table(
    rng: np.random.Generator,
    *,
    l_levels: int = 2,
    a_levels: int = 2,
    y_levels: int = 3,
    y_parents: tuple[str, ...] = ("a0", "l1", "a1"),
) -> JointTable:
    """Random two-occasion joint table from Dirichlet-sampled factors.

    The factorization follows time order: P(a0) P(l1 | a0) P(a1 | a0, l1)
    P(y | parents).  Restricting ``y_parents`` plants structure: () makes
    every null predicate true by construction, while ("l1",) still carries
    an early-treatment effect along the a0 -> l1 -> y path.
    """
    bad = set(y_parents) - {"a0", "l1", "a1"}
    if bad:
        raise ConfigError(f"unknown y_parents {sorted(bad)}")
    a_vals = [float(v) for v in range(a_levels)]
    l_vals = [float(v) for v in range(l_levels)]
    y_vals = [float(v) for v in range(y_levels)]

    p_a0 = rng.dirichlet(np.ones(a_levels))
    p_l1 = {a0: rng.dirichlet(np.ones(l_levels)) for a0 in a_vals}
    p_a1 = {(a0, l1): rng.dirichlet(np.ones(a_levels))
            for a0 in a_vals for l1 in l_vals}

    def y_key(a0: float, l1: float, a1: float) -> tuple:
        ctx = {"a0": a0, "l1": l1, "a1": a1}
        return tuple(ctx[p] for p in y_parents)

    p_y: dict[tuple, np.ndarray] = {}
    cells, probs = [], []
    for i0, a0 in enumerate(a_vals):
        for i1, l1 in enumerate(l_vals):
            for i2, a1 in enumerate(a_vals):
                key = y_key(a0, l1, a1)
                if key not in p_y:
                    p_y[key] = rng.dirichlet(np.ones(y_levels))
                for iy, y in enumerate(y_vals):
                    cells.append((0.0, a0, l1, a1, y))
                    probs.append(p_a0[i0] * p_l1[a0][i1]
                                 * p_a1[(a0, l1)][i2] * p_y[key][iy])
    schema = Schema(
        (constant(), discrete(*l_vals)),
        (discrete(*a_vals), discrete(*a_vals)),
    )
    probs_arr = np.asarray(probs)
    return JointTable(schema, np.asarray(cells), probs_arr / probs_arr.sum())
