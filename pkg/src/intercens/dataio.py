"""CSV ingestion and emission, fixture access, and run configuration.

The dataset schema is headered CSV with columns left, right, cens and then
one column per covariate; the literal string "Inf" encodes an infinite
right endpoint.  An explicit cens column is trusted verbatim (so external
fixtures load unchanged); without it the endpoint rule decides.  All writes
go through a temp-file rename so concurrent runs never interleave output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import warnings
from dataclasses import dataclass
from importlib import resources

from .model import CensorKind, DAYS_PER_MONTH, Dataset, Observation

__all__ = [
    "RawSurvivalRecord",
    "read_dataset",
    "write_dataset",
    "read_raw_records",
    "intervalize_right_censored",
    "ovarian_path",
    "load_ovarian",
    "atomic_write",
    "format_number",
    "parse_number",
    "canonical_config",
    "config_hash",
]

_RESERVED_COLUMNS = ("left", "right", "cens")


def format_number(x: float) -> str:
    """Shortest round-trip decimal form; 'Inf' for the infinite sentinel."""
    x = float(x)
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    if x == 0:
        return "0.0"
    return repr(x)


def parse_number(text: str) -> float:
    text = text.strip()
    if text in ("Inf", "inf", "+Inf"):
        return math.inf
    return float(text)


def atomic_write(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as handle:
        handle.write(text)
    os.replace(tmp, path)


def write_csv(path, header, rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write(path, buffer.getvalue())


def write_dataset(dataset: Dataset, path) -> None:
    header = ["left", "right", "cens", *dataset.covariate_names]
    rows = [
        [
            format_number(obs.left),
            format_number(obs.right),
            obs.kind.value,
            *(format_number(v) for v in obs.covariates),
        ]
        for obs in dataset.observations
    ]
    write_csv(path, header, rows)


def read_dataset(path, covariates: list[str] | None = None) -> Dataset:
    """Load a dataset CSV.

    ``covariates`` selects covariate columns by name; by default every
    column other than left/right/cens is used.  A missing cens column falls
    back to classification from the endpoints.
    """
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        fields = list(reader.fieldnames)
        for required in ("left", "right"):
            if required not in fields:
                raise ValueError(f"{path}: missing required column '{required}'")
        if covariates is None:
            covariates = [c for c in fields if c not in _RESERVED_COLUMNS]
        missing = [c for c in covariates if c not in fields]
        if missing:
            raise ValueError(f"{path}: covariate columns not found: {missing}")
        observations = []
        for line, row in enumerate(reader, start=2):
            try:
                left = parse_number(row["left"])
                right = parse_number(row["right"])
                kind = CensorKind(row["cens"].strip()) if "cens" in fields else None
                values = tuple(parse_number(row[c]) for c in covariates)
                observations.append(Observation(left, right, values, kind))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from exc
    return Dataset(tuple(observations), tuple(covariates))


@dataclass(frozen=True)
class RawSurvivalRecord:
    """Right-censored follow-up in days, as found in clinical exports."""

    time_days: float
    status: int
    covariates: tuple[float, ...] = ()


def read_raw_records(
    path, time_col: str = "time_days", status_col: str = "status", covariates=None
):
    """Read raw right-censored rows; returns (records, covariate names)."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        fields = list(reader.fieldnames or [])
        for required in (time_col, status_col):
            if required not in fields:
                raise ValueError(f"{path}: missing required column '{required}'")
        if covariates is None:
            covariates = [c for c in fields if c not in (time_col, status_col)]
        records = []
        for row in reader:
            records.append(
                RawSurvivalRecord(
                    time_days=parse_number(row[time_col]),
                    status=int(float(row[status_col])),
                    covariates=tuple(parse_number(row[c]) for c in covariates),
                )
            )
    return records, tuple(covariates)


def intervalize_right_censored(records, window: float, covariate_names=()) -> Dataset:
    """Convert days-scale right-censored records to assessment windows.

    Times convert to months at 30.4375 days per month.  Events land in the
    window of the periodic grid {window, 2*window, ...} that captured them
    (left-censored if before the first assessment); censored subjects keep
    only their last completed assessment.  Non-positive times are rejected
    with a warning naming the rows.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    observations = []
    rejected = []
    for index, record in enumerate(records):
        if record.time_days <= 0:
            rejected.append(index)
            continue
        months = record.time_days / DAYS_PER_MONTH
        if record.status == 1:
            if months <= window:
                obs = Observation(0.0, window, record.covariates, CensorKind.LEFT)
            else:
                k = math.ceil(months / window)
                obs = Observation(
                    (k - 1) * window, k * window, record.covariates, CensorKind.INTERVAL
                )
        else:
            k = math.floor(months / window)
            obs = Observation(k * window, math.inf, record.covariates, CensorKind.RIGHT)
        observations.append(obs)
    if rejected:
        warnings.warn(f"rejected rows with non-positive time: {rejected}", stacklevel=2)
    if not observations:
        raise ValueError("no usable records")
    return Dataset(tuple(observations), tuple(covariate_names))


def ovarian_path() -> str:
    """Filesystem path of the bundled intervalized ovarian fixture."""
    return str(resources.files("intercens.data").joinpath("ovarian.csv"))


def load_ovarian() -> Dataset:
    """The 26-row intervalized ovarian dataset with covariates (age, rx2).

    The cens column is trusted verbatim, including its two known quirks
    (a left-censored row with a positive stored left endpoint, and one
    event row labelled right-censored).  rx2 indicates treatment arm 2.
    """
    with open(ovarian_path(), newline="") as handle:
        reader = csv.DictReader(handle)
        observations = []
        for row in reader:
            observations.append(
                Observation(
                    parse_number(row["left"]),
                    parse_number(row["right"]),
                    (parse_number(row["age"]), 1.0 if row["rx"].strip() == "2" else 0.0),
                    CensorKind(row["cens"].strip()),
                )
            )
    return Dataset(tuple(observations), ("age", "rx2"))


def canonical_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_config(config).encode()).hexdigest()
