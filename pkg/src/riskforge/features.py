"""Domain feature engineering on the merged raw table.

Recipes are applied in catalog order, so later recipes may consume the
outputs of earlier ones. All recipes are row-local: ratios, day-count to
year conversions, and threshold flags.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Union

from .errors import SchemaError
from .tabular import MISSING, Column, ColumnKind, Table

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class Ratio:
    numerator: str
    denominator: str


@dataclass(frozen=True)
class DaysToYears:
    """Convert a negative day-offset column (source-data convention) to years."""

    source: str


@dataclass(frozen=True)
class Flag:
    """0/1 indicator: 1 when ``<source> <op> <value>`` holds."""

    source: str
    op: str  # one of gt, ge, lt, le, eq
    value: float


_FLAG_OPS = {
    "gt": operator.gt,
    "ge": operator.ge,
    "lt": operator.lt,
    "le": operator.le,
    "eq": operator.eq,
}

RecipeKind = Union[Ratio, DaysToYears, Flag]


@dataclass(frozen=True)
class FeatureRecipe:
    name: str
    kind: RecipeKind

    @property
    def inputs(self) -> tuple[str, ...]:
        if isinstance(self.kind, Ratio):
            return (self.kind.numerator, self.kind.denominator)
        return (self.kind.source,)


@dataclass(frozen=True)
class FeatureCatalog:
    recipes: tuple[FeatureRecipe, ...]


def default_catalog() -> FeatureCatalog:
    """The shipped catalog, wired to the synthetic corpus column names."""
    return FeatureCatalog(
        (
            FeatureRecipe("CREDIT_TO_GOODS_RATIO", Ratio("amt_credit", "amt_goods_price")),
            FeatureRecipe("AGE_YEARS", DaysToYears("days_birth")),
            FeatureRecipe("YEARS_EMPLOYED", DaysToYears("days_employed")),
            FeatureRecipe("INCOME_TO_CREDIT_RATIO", Ratio("amt_income_total", "amt_credit")),
        )
    )


def _recipe_values(table: Table, recipe: FeatureRecipe) -> tuple:
    for name in recipe.inputs:
        if not table.has_column(name):
            raise SchemaError(f"recipe {recipe.name!r} needs unknown column {name!r}")
        if table.column(name).kind is not ColumnKind.NUMERIC:
            raise SchemaError(f"recipe {recipe.name!r} input {name!r} is not numeric")

    kind = recipe.kind
    if isinstance(kind, Ratio):
        num = table.column(kind.numerator).values
        den = table.column(kind.denominator).values
        return tuple(
            MISSING if a is MISSING or b is MISSING or b == 0 else a / b
            for a, b in zip(num, den)
        )
    if isinstance(kind, DaysToYears):
        src = table.column(kind.source).values
        return tuple(MISSING if v is MISSING else (-v) / DAYS_PER_YEAR for v in src)
    if isinstance(kind, Flag):
        if kind.op not in _FLAG_OPS:
            raise SchemaError(f"recipe {recipe.name!r} has unknown flag op {kind.op!r}")
        cmp = _FLAG_OPS[kind.op]
        src = table.column(kind.source).values
        return tuple(
            MISSING if v is MISSING else (1.0 if cmp(v, kind.value) else 0.0) for v in src
        )
    raise SchemaError(f"recipe {recipe.name!r} has unsupported kind {kind!r}")


def apply_recipes(table: Table, catalog: FeatureCatalog) -> Table:
    """Append one Numeric column per recipe; existing cells are untouched."""
    out = table
    for recipe in catalog.recipes:
        if out.has_column(recipe.name):
            raise SchemaError(f"recipe output {recipe.name!r} already exists")
        values = _recipe_values(out, recipe)
        out = out.with_columns([Column(recipe.name, ColumnKind.NUMERIC, values)])
    return out
