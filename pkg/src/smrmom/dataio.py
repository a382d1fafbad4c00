"""CSV ingestion of trial data and JSON persistence of fits."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import build_design
from .types import (
    DesignMatrix,
    FactorModel,
    FitResult,
    Hyperparameters,
    OutcomeMatrix,
    TreatmentAssignment,
)

FIT_SCHEMA_VERSION = 1


class CsvDataError(ValueError):
    """Invalid trial CSV; carries the offending row/column when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class FitFileError(ValueError):
    """Corrupt or incompatible fit file."""


@dataclass(frozen=True)
class CsvSchema:
    """Column declaration for a trial CSV."""

    covariates: tuple[str, ...]
    outcomes: tuple[str, ...]
    treatment: str
    outcome_kind: str = "continuous"
    standardize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.covariates or not self.outcomes:
            raise ValueError("schema needs at least one covariate and one outcome")


@dataclass(frozen=True)
class TrialDataset:
    covariate_names: tuple[str, ...]
    outcome_names: tuple[str, ...]
    treatment_name: str
    X: DesignMatrix
    t: TreatmentAssignment
    Y: OutcomeMatrix


def _parse_cell(text: str, row: int, column: str) -> float:
    if text is None or text.strip() == "":
        raise CsvDataError("missing value", row=row, column=column)
    try:
        return float(text)
    except ValueError:
        raise CsvDataError(f"non-numeric value {text!r}", row=row, column=column) from None


def _map_treatment(raw: np.ndarray, column: str) -> np.ndarray:
    """{0,1} or {-1,+1} codes onto +-1, with 1 always the test therapy."""
    values = set(np.unique(raw))
    if values <= {0.0, 1.0}:
        return raw * 2.0 - 1.0
    if values <= {-1.0, 1.0}:
        return raw.copy()
    bad = sorted(values - {-1.0, 0.0, 1.0})
    raise CsvDataError(
        f"treatment codes {bad} not mappable onto -1/+1", column=column
    )


def load_csv(path, schema: CsvSchema) -> TrialDataset:
    """Parse a trial CSV into typed matrices.

    Missing values are rejected, not imputed; every error names the row
    (1-based, excluding the header) and column it came from.
    """
    path = Path(path)
    if not path.exists():
        raise CsvDataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvDataError("empty file: header row required") from None
        header = [h.strip() for h in header]
        index = {name: i for i, name in enumerate(header)}
        declared = list(schema.covariates) + list(schema.outcomes) + [schema.treatment]
        for name in declared:
            if name not in index:
                raise CsvDataError("missing column", column=name)
        rows = list(reader)
    if not rows:
        raise CsvDataError("no data rows")

    def column(name: str) -> np.ndarray:
        j = index[name]
        out = np.empty(len(rows))
        for i, row in enumerate(rows):
            if j >= len(row):
                raise CsvDataError("missing value", row=i + 1, column=name)
            out[i] = _parse_cell(row[j], i + 1, name)
        return out

    raw_cov = np.column_stack([column(name) for name in schema.covariates])
    raw_out = np.column_stack([column(name) for name in schema.outcomes])
    treat = _map_treatment(column(schema.treatment), schema.treatment)

    if schema.outcome_kind == "binary":
        bad = np.argwhere(~np.isin(raw_out, (0.0, 1.0)))
        if bad.size:
            i, j = bad[0]
            raise CsvDataError(
                "binary outcome must be 0/1",
                row=int(i) + 1, column=schema.outcomes[int(j)],
            )
    X = build_design(raw_cov, standardize=schema.standardize)
    return TrialDataset(
        covariate_names=schema.covariates,
        outcome_names=schema.outcomes,
        treatment_name=schema.treatment,
        X=X,
        t=TreatmentAssignment(treat),
        Y=OutcomeMatrix(raw_out, schema.outcome_kind),
    )


def _hyper_to_dict(hyper: Hyperparameters) -> dict:
    return asdict(hyper)


def _hyper_from_dict(d: dict) -> Hyperparameters:
    return Hyperparameters(**d)


def save_fit(result: FitResult, path) -> None:
    """Persist a fit as versioned JSON; matrices keep full precision."""
    payload = {
        "version": FIT_SCHEMA_VERSION,
        "kind": result.kind,
        "A": result.model.A.tolist(),
        "B": result.model.B.tolist(),
        "Gamma": result.model.Gamma.tolist(),
        "D": None if result.D is None else np.asarray(result.D).tolist(),
        "hyper": _hyper_to_dict(result.hyper),
        "seed": result.seed,
        "trace": np.asarray(result.objective_trace).tolist(),
        "converged": bool(result.converged),
        "effect": np.asarray(result.effect).tolist(),
        "metadata": result.metadata,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_fit(path) -> FitResult:
    """Inverse of save_fit; round-trips matrices bitwise."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise FitFileError(f"no such fit file: {path}") from None
    except json.JSONDecodeError as exc:
        raise FitFileError(f"corrupt fit file: {exc}") from None
    version = payload.get("version")
    if version != FIT_SCHEMA_VERSION:
        raise FitFileError(
            f"unsupported fit schema version {version!r} (expected {FIT_SCHEMA_VERSION})"
        )
    try:
        model = FactorModel(
            A=np.asarray(payload["A"], dtype=float),
            B=np.asarray(payload["B"], dtype=float),
            Gamma=np.asarray(payload["Gamma"], dtype=float),
        )
        D = payload.get("D")
        return FitResult(
            model=model,
            effect=np.asarray(payload["effect"], dtype=float),
            objective_trace=np.asarray(payload["trace"], dtype=float),
            converged=bool(payload["converged"]),
            hyper=_hyper_from_dict(payload["hyper"]),
            kind=payload["kind"],
            seed=payload.get("seed"),
            D=None if D is None else np.asarray(D, dtype=float),
            metadata=payload.get("metadata") or {},
        )
    except (KeyError, TypeError) as exc:
        raise FitFileError(f"fit file missing required field: {exc}") from None
