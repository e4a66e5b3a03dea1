"""Fit/transform preprocessing stages composed into a reproducible pipeline.

Stage order is fixed: impute (median/mode) -> clip (3-sigma winsorizing) ->
one-hot encode -> standardize. Each stage is fitted once on training data
and replayed with frozen parameters on any table matching the input schema,
so held-out rows never leak into the fitted statistics.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SchemaError
from .tabular import MISSING, Column, ColumnKind, Table

STAGE_ORDER = ("impute", "clip", "encode", "scale")


@dataclass(frozen=True)
class ImputerState:
    medians: dict[str, float]
    modes: dict[str, str]


@dataclass(frozen=True)
class ColumnBounds:
    mean: float
    std: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ClipperState:
    bounds: dict[str, ColumnBounds]


@dataclass(frozen=True)
class EncoderState:
    #: per categorical column, the ordered (sorted) fit-time vocabulary
    vocabularies: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class ColumnScale:
    mean: float
    std: float


@dataclass(frozen=True)
class ScalerState:
    stats: dict[str, ColumnScale]


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class FittedPipeline:
    imputer: ImputerState
    clipper: ClipperState
    encoder: EncoderState
    scaler: ScalerState
    input_schema: tuple[tuple[str, str], ...]  # (name, kind) pairs
    feature_names: tuple[str, ...]


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def fit_imputer(table: Table) -> ImputerState:
    """Median per numeric column, mode (ties lexicographic) per categorical."""
    medians: dict[str, float] = {}
    modes: dict[str, str] = {}
    for col in table.columns:
        present = col.non_missing()
        if not present:
            raise DataError(f"column {col.name!r} has no non-missing values to fit")
        if col.kind is ColumnKind.NUMERIC:
            medians[col.name] = _median(present)
        else:
            counts = Counter(present)
            top = max(counts.values())
            modes[col.name] = min(c for c, n in counts.items() if n == top)
    return ImputerState(medians, modes)


def apply_imputer(state: ImputerState, table: Table) -> Table:
    out = []
    for col in table.columns:
        if col.kind is ColumnKind.NUMERIC:
            if col.name not in state.medians:
                raise SchemaError(f"column {col.name!r} was not seen at fit time")
            fill = state.medians[col.name]
        else:
            if col.name not in state.modes:
                raise SchemaError(f"column {col.name!r} was not seen at fit time")
            fill = state.modes[col.name]
        values = tuple(fill if v is MISSING else v for v in col.values)
        out.append(Column(col.name, col.kind, values))
    return Table(tuple(out), table.name)


def fit_clipper(table: Table) -> ClipperState:
    """Population mean/std per numeric column; bounds at mean +/- 3 std."""
    bounds: dict[str, ColumnBounds] = {}
    for col in table.columns:
        if col.kind is not ColumnKind.NUMERIC:
            continue
        vs = col.non_missing()
        if len(vs) != len(col.values):
            raise DataError(f"column {col.name!r} still has missing cells; impute first")
        arr = np.asarray(vs, dtype=np.float64)
        mean = float(arr.mean()) if arr.size else 0.0
        std = float(arr.std()) if arr.size else 0.0
        bounds[col.name] = ColumnBounds(mean, std, mean - 3 * std, mean + 3 * std)
    return ClipperState(bounds)


def apply_clipper(state: ClipperState, table: Table) -> Table:
    out = []
    for col in table.columns:
        if col.kind is not ColumnKind.NUMERIC:
            out.append(col)
            continue
        if col.name not in state.bounds:
            raise SchemaError(f"column {col.name!r} was not seen at fit time")
        b = state.bounds[col.name]
        values = tuple(min(max(v, b.lower), b.upper) for v in col.values)
        out.append(Column(col.name, col.kind, values))
    return Table(tuple(out), table.name)


def fit_encoder(table: Table) -> EncoderState:
    vocabularies: dict[str, tuple[str, ...]] = {}
    for col in table.columns:
        if col.kind is not ColumnKind.CATEGORICAL:
            continue
        vs = col.non_missing()
        if len(vs) != len(col.values):
            raise DataError(f"column {col.name!r} still has missing cells; impute first")
        vocabularies[col.name] = tuple(sorted(set(vs)))
    return EncoderState(vocabularies)


def apply_encoder(state: EncoderState, table: Table) -> Table:
    """Expand each categorical column into 0/1 indicator columns.

    Categories unseen at fit time yield an all-zero row rather than an
    error. Indicator columns are named ``<column>=<category>``.
    """
    out = []
    for col in table.columns:
        if col.kind is not ColumnKind.CATEGORICAL:
            out.append(col)
            continue
        if col.name not in state.vocabularies:
            raise SchemaError(f"column {col.name!r} was not seen at fit time")
        for cat in state.vocabularies[col.name]:
            values = tuple(1.0 if v == cat else 0.0 for v in col.values)
            out.append(Column(f"{col.name}={cat}", ColumnKind.NUMERIC, values))
    return Table(tuple(out), table.name)


def fit_scaler(table: Table) -> ScalerState:
    """Population mean/std per numeric column; std 0 is stored as-is."""
    stats: dict[str, ColumnScale] = {}
    for col in table.columns:
        if col.kind is not ColumnKind.NUMERIC:
            continue
        vs = col.non_missing()
        if len(vs) != len(col.values):
            raise DataError(f"column {col.name!r} still has missing cells; impute first")
        arr = np.asarray(vs, dtype=np.float64)
        stats[col.name] = ColumnScale(
            float(arr.mean()) if arr.size else 0.0,
            float(arr.std()) if arr.size else 0.0,
        )
    return ScalerState(stats)


def apply_scaler(state: ScalerState, table: Table) -> Table:
    out = []
    for col in table.columns:
        if col.kind is not ColumnKind.NUMERIC or col.name not in state.stats:
            out.append(col)
            continue
        s = state.stats[col.name]
        denom = s.std if s.std > 0 else 1.0
        values = tuple((v - s.mean) / denom for v in col.values)
        out.append(Column(col.name, col.kind, values))
    return Table(tuple(out), table.name)


def fit_pipeline(table: Table, order: tuple[str, ...] = STAGE_ORDER) -> FittedPipeline:
    """Fit all four stages in the fixed impute -> clip -> encode -> scale order.

    The scaler is fitted on the clipped numeric columns only; one-hot
    indicator columns stay 0/1 in the transformed matrix.
    """
    if tuple(order) != STAGE_ORDER:
        raise DataError(f"stage order must be {STAGE_ORDER}, got {tuple(order)}")
    imputer = fit_imputer(table)
    imputed = apply_imputer(imputer, table)
    clipper = fit_clipper(imputed)
    clipped = apply_clipper(clipper, imputed)
    encoder = fit_encoder(clipped)
    scaler = fit_scaler(clipped)

    schema = tuple((c.name, c.kind.value) for c in table.columns)
    names: list[str] = []
    for col in table.columns:
        if col.kind is ColumnKind.NUMERIC:
            names.append(col.name)
        else:
            names.extend(f"{col.name}={cat}" for cat in encoder.vocabularies[col.name])
    return FittedPipeline(imputer, clipper, encoder, scaler, schema, tuple(names))


def transform(pipeline: FittedPipeline, table: Table) -> FeatureMatrix:
    """Replay the fitted stages; returns a dense, missing-free float matrix."""
    schema = tuple((c.name, c.kind.value) for c in table.columns)
    if schema != pipeline.input_schema:
        raise SchemaError(
            "table schema does not match the fitted pipeline "
            f"(got {schema}, fitted {pipeline.input_schema})"
        )
    staged = apply_imputer(pipeline.imputer, table)
    staged = apply_clipper(pipeline.clipper, staged)
    staged = apply_encoder(pipeline.encoder, staged)
    staged = apply_scaler(pipeline.scaler, staged)

    n = staged.row_count
    matrix = np.empty((n, len(pipeline.feature_names)), dtype=np.float64)
    by_name = {c.name: c for c in staged.columns}
    for j, name in enumerate(pipeline.feature_names):
        matrix[:, j] = np.asarray(by_name[name].values, dtype=np.float64)
    return FeatureMatrix(matrix, pipeline.feature_names)


PIPELINE_FORMAT = "riskforge.pipeline/1"


def pipeline_to_doc(p: FittedPipeline) -> dict:
    return {
        "format": PIPELINE_FORMAT,
        "stage_order": list(STAGE_ORDER),
        "imputer": {"medians": dict(p.imputer.medians), "modes": dict(p.imputer.modes)},
        "clipper": {
            name: {"mean": b.mean, "std": b.std, "lower": b.lower, "upper": b.upper}
            for name, b in p.clipper.bounds.items()
        },
        "encoder": {name: list(vocab) for name, vocab in p.encoder.vocabularies.items()},
        "scaler": {
            name: {"mean": s.mean, "std": s.std} for name, s in p.scaler.stats.items()
        },
        "input_schema": [{"name": n, "kind": k} for n, k in p.input_schema],
        "feature_names": list(p.feature_names),
    }


def pipeline_from_doc(doc: dict) -> FittedPipeline:
    if doc.get("format") != PIPELINE_FORMAT:
        raise SchemaError(f"unsupported pipeline format {doc.get('format')!r}")
    return FittedPipeline(
        ImputerState(dict(doc["imputer"]["medians"]), dict(doc["imputer"]["modes"])),
        ClipperState(
            {
                name: ColumnBounds(b["mean"], b["std"], b["lower"], b["upper"])
                for name, b in doc["clipper"].items()
            }
        ),
        EncoderState({name: tuple(v) for name, v in doc["encoder"].items()}),
        ScalerState(
            {name: ColumnScale(s["mean"], s["std"]) for name, s in doc["scaler"].items()}
        ),
        tuple((e["name"], e["kind"]) for e in doc["input_schema"]),
        tuple(doc["feature_names"]),
    )
