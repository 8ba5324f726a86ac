"""Token-based feature terms.

A term is a string naming one regressor column: either a base column ("1",
"u", "h", "y", "l0", "a2", "lm", "a_prev") or a product of bases joined with
"*" ("a0*l1").  Which bases are available depends on the calling context:

* ``history_cols``   — everything observable just before treatment m acts
  (covariates through m, treatments through m-1), used by treatment models
  and blip cofactors;
* ``row_cols``       — the full trajectory, used by outcome models;
* scenario laws add the hidden cause as ``u`` (or its residual-outcome alias
  ``h``).

"lm" is the current covariate at the context's occasion, "a_prev" the
previous treatment (zero at occasion 0).
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import ConfigError

Cols = Mapping[str, np.ndarray]


def history_cols(
    L: np.ndarray,
    A: np.ndarray,
    m: int,
    *,
    extra: Cols | None = None,
) -> dict[str, np.ndarray]:
    """Columns observable at occasion ``m`` before A_m is assigned."""
    n = L.shape[0]
    cols: dict[str, np.ndarray] = {}
    for j in range(m + 1):
        cols[f"l{j}"] = L[:, j]
    for j in range(m):
        cols[f"a{j}"] = A[:, j]
    cols["lm"] = L[:, m]
    cols["a_prev"] = A[:, m - 1] if m >= 1 else np.zeros(n)
    if extra:
        cols.update(extra)
    return cols


def row_cols(
    L: np.ndarray,
    A: np.ndarray,
    y: np.ndarray | None = None,
    *,
    extra: Cols | None = None,
) -> dict[str, np.ndarray]:
    """Columns of the complete trajectory (outcome models, diagnostics)."""
    cols: dict[str, np.ndarray] = {}
    for j in range(L.shape[1]):
        cols[f"l{j}"] = L[:, j]
    for j in range(A.shape[1]):
        cols[f"a{j}"] = A[:, j]
    if y is not None:
        cols["y"] = y
    if extra:
        cols.update(extra)
    return cols


def eval_term(term: str, cols: Cols) -> np.ndarray:
    """Evaluate one term to a column vector."""
    n = len(next(iter(cols.values())))
    out = np.ones(n)
    for base in term.split("*"):
        base = base.strip()
        if base == "1":
            continue
        if base not in cols:
            raise ConfigError(
                f"unknown feature term {base!r}; available: "
                f"{sorted(cols.keys()) + ['1']}"
            )
        out = out * np.asarray(cols[base], dtype=float)
    return out


def eval_terms(terms: tuple[str, ...] | list[str], cols: Cols) -> np.ndarray:
    """Stack terms into an (n, p) design matrix."""
    if not terms:
        raise ConfigError("empty term list")
    return np.column_stack([eval_term(t, cols) for t in terms])


def term_bases(terms) -> set[str]:
    bases: set[str] = set()
    for term in terms:
        for base in term.split("*"):
            base = base.strip()
            if base != "1":
                bases.add(base)
    return bases


def uses_covariates(terms) -> bool:
    """True if any term references an l-column (current or lagged)."""
    return any(b.startswith("l") for b in term_bases(terms))
