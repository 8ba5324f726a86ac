"""Data containers: schemas, trajectories, datasets, regimes, histories.

Occasions are indexed 0..K.  A subject's record is the time-ordered vector
(L_0, A_0, L_1, A_1, ..., L_K, A_K, Y); the virtual pre-study treatment
A_{-1} is identically 0.  All values are stored as float64; discreteness is
carried by kind metadata, not dtype.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigError, ValidationError

_LEVEL_TOL = 1e-9


@dataclass(frozen=True)
class VarKind:
    """Kind of one covariate or treatment column."""

    kind: str  # "binary" | "discrete" | "continuous"
    levels: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "binary":
            object.__setattr__(self, "levels", (0.0, 1.0))
        elif self.kind == "discrete":
            if not self.levels:
                raise ConfigError("discrete kind requires a level list")
            lv = tuple(sorted(float(v) for v in self.levels))
            if len(set(lv)) != len(lv):
                raise ConfigError("discrete levels must be distinct")
            object.__setattr__(self, "levels", lv)
        elif self.kind == "continuous":
            object.__setattr__(self, "levels", None)
        else:
            raise ConfigError(f"unknown variable kind {self.kind!r}")

    @property
    def is_discrete(self) -> bool:
        return self.kind != "continuous"


def binary() -> VarKind:
    return VarKind("binary")


def discrete(*levels: float) -> VarKind:
    return VarKind("discrete", tuple(levels))


def continuous() -> VarKind:
    return VarKind("continuous")


def constant() -> VarKind:
    """Degenerate placeholder column (always 0), e.g. an absent L_0."""
    return VarKind("discrete", (0.0,))


@dataclass(frozen=True)
class Schema:
    """Shapes and kinds for a K+1-occasion study; outcome is continuous."""

    covariates: tuple[VarKind, ...]
    treatments: tuple[VarKind, ...]

    def __post_init__(self) -> None:
        if len(self.covariates) == 0 or len(self.covariates) != len(self.treatments):
            raise ConfigError(
                "need one covariate kind and one treatment kind per occasion"
            )

    @property
    def K(self) -> int:
        return len(self.treatments) - 1

    def columns(self) -> list[str]:
        cols: list[str] = []
        for m in range(self.K + 1):
            cols += [f"L{m}", f"A{m}"]
        cols.append("Y")
        return cols

    def to_dict(self) -> dict:
        def enc(v: VarKind) -> dict:
            d: dict = {"kind": v.kind}
            if v.kind == "discrete":
                d["levels"] = list(v.levels or ())
            return d

        return {
            "covariates": [enc(v) for v in self.covariates],
            "treatments": [enc(v) for v in self.treatments],
        }

    @staticmethod
    def from_dict(d: dict) -> "Schema":
        def dec(e: dict) -> VarKind:
            return VarKind(e["kind"], tuple(e.get("levels", ()) or ()) or None)

        return Schema(
            tuple(dec(e) for e in d["covariates"]),
            tuple(dec(e) for e in d["treatments"]),
        )


@dataclass(frozen=True)
class Trajectory:
    """One subject's complete record."""

    l: tuple[float, ...]
    a: tuple[float, ...]
    y: float


@dataclass(frozen=True)
class History:
    """What is observable at occasion m just before A_m is assigned."""

    m: int
    l_bar: tuple[float, ...]
    a_bar_prev: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.l_bar) != self.m + 1 or len(self.a_bar_prev) != self.m:
            raise ValidationError(
                f"history at occasion {self.m} needs {self.m + 1} covariates "
                f"and {self.m} prior treatments"
            )


@dataclass(frozen=True)
class Dataset:
    """n subjects stored column-wise: L (n, K+1), A (n, K+1), Y (n,)."""

    schema: Schema
    L: np.ndarray
    A: np.ndarray
    Y: np.ndarray

    def __post_init__(self) -> None:
        L = np.ascontiguousarray(np.asarray(self.L, dtype=np.float64))
        A = np.ascontiguousarray(np.asarray(self.A, dtype=np.float64))
        Y = np.ascontiguousarray(np.asarray(self.Y, dtype=np.float64))
        if L.ndim == 1:
            L = L[:, None]
        if A.ndim == 1:
            A = A[:, None]
        for arr in (L, A, Y):
            arr.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def rows(self) -> Iterator[Trajectory]:
        for i in range(self.n):
            yield Trajectory(tuple(self.L[i]), tuple(self.A[i]), float(self.Y[i]))

    @staticmethod
    def from_rows(schema: Schema, rows: list[Trajectory]) -> "Dataset":
        L = np.array([r.l for r in rows], dtype=float)
        A = np.array([r.a for r in rows], dtype=float)
        Y = np.array([r.y for r in rows], dtype=float)
        return Dataset(schema, L, A, Y)


def _check_levels(tag: str, values: np.ndarray, kind: VarKind) -> None:
    if not kind.is_discrete:
        return
    levels = np.asarray(kind.levels, dtype=float)
    dist = np.min(np.abs(values[:, None] - levels[None, :]), axis=1)
    bad = np.nonzero(dist > _LEVEL_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"row {i}, column {tag}: level violation "
            f"(value {values[i]!r} not in {kind.levels})"
        )


def validate(dataset: Dataset) -> None:
    """Raise ValidationError naming the first offending row and column."""
    K = dataset.schema.K
    if dataset.L.shape != (dataset.n, K + 1) or dataset.A.shape != (dataset.n, K + 1):
        raise ValidationError(
            f"shape mismatch: schema has K={K} but arrays are "
            f"L{dataset.L.shape}, A{dataset.A.shape}"
        )
    if dataset.Y.shape != (dataset.n,):
        raise ValidationError(f"shape mismatch: Y has shape {dataset.Y.shape}")
    for m in range(K + 1):
        col = dataset.L[:, m]
        if not np.all(np.isfinite(col)):
            i = int(np.nonzero(~np.isfinite(col))[0][0])
            raise ValidationError(f"row {i}, column L{m}: non-finite value")
        _check_levels(f"L{m}", col, dataset.schema.covariates[m])
        col = dataset.A[:, m]
        if not np.all(np.isfinite(col)):
            i = int(np.nonzero(~np.isfinite(col))[0][0])
            raise ValidationError(f"row {i}, column A{m}: non-finite value")
        _check_levels(f"A{m}", col, dataset.schema.treatments[m])
    if not np.all(np.isfinite(dataset.Y)):
        i = int(np.nonzero(~np.isfinite(dataset.Y))[0][0])
        raise ValidationError(f"row {i}, column Y: non-finite outcome")


@dataclass(frozen=True)
class Regime:
    """A treatment plan: static values or a rule applied to covariate history."""

    kind: str  # "static" | "dynamic"
    plan: tuple[float, ...] = ()
    rule: Callable[[int, tuple[float, ...]], float] | None = None
    name: str = ""

    @staticmethod
    def static(plan: tuple[float, ...] | list[float], name: str = "") -> "Regime":
        plan = tuple(float(v) for v in plan)
        return Regime("static", plan, None, name or f"static{plan}")

    @staticmethod
    def dynamic(rule: Callable[[int, tuple[float, ...]], float], name: str = "") -> "Regime":
        return Regime("dynamic", (), rule, name or "dynamic")


def apply_regime(regime: Regime, hist: History) -> float:
    """Treatment the regime assigns at hist.m given covariate history."""
    if regime.kind == "static":
        if hist.m >= len(regime.plan):
            raise ConfigError(
                f"static plan of length {len(regime.plan)} has no entry "
                f"for occasion {hist.m}"
            )
        return float(regime.plan[hist.m])
    if regime.rule is None:
        raise ConfigError("dynamic regime has no rule")
    return float(regime.rule(hist.m, hist.l_bar))


def regime_values(regime: Regime, L_prefix: np.ndarray, m: int) -> np.ndarray:
    """Vectorized apply_regime over the rows of L_prefix (n, m+1)."""
    n = L_prefix.shape[0]
    if regime.kind == "static":
        if m >= len(regime.plan):
            raise ConfigError(
                f"static plan of length {len(regime.plan)} has no entry "
                f"for occasion {m}"
            )
        return np.full(n, float(regime.plan[m]))
    assert regime.rule is not None
    return np.array(
        [float(regime.rule(m, tuple(L_prefix[i, : m + 1]))) for i in range(n)]
    )


def write_csv(dataset: Dataset, path: str) -> None:
    """Write the flat (L0,A0,...,LK,AK,Y) layout."""
    cols = dataset.schema.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        K = dataset.schema.K
        for i in range(dataset.n):
            row: list[str] = []
            for m in range(K + 1):
                row.append(repr(float(dataset.L[i, m])))
                row.append(repr(float(dataset.A[i, m])))
            row.append(repr(float(dataset.Y[i])))
            w.writerow(row)


def read_csv(path: str, schema: Schema) -> Dataset:
    """Read a dataset written by write_csv; header must match the schema."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        expected = schema.columns()
        if header != expected:
            raise ValidationError(
                f"CSV header {header} does not match schema columns {expected}"
            )
        raw = [row for row in r if row]
    try:
        arr = np.array(raw, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"non-numeric cell in {path}: {exc}") from exc
    if arr.ndim != 2 or arr.shape[1] != len(expected):
        raise ValidationError(f"ragged CSV in {path}")
    K = schema.K
    L = arr[:, 0 : 2 * (K + 1) : 2]
    A = arr[:, 1 : 2 * (K + 1) : 2]
    Y = arr[:, -1]
    ds = Dataset(schema, L, A, Y)
    validate(ds)
    return ds
