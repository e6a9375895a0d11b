"""Loading, validation and profiling of paired error/uncertainty data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import ConstantInputError, LoadError

_DIRECT_KEYS = ("E", "uE")
_COMPONENT_KEYS = ("R", "V", "uR", "uV")


@dataclass(frozen=True)
class Provenance:
    """How a dataset's errors and uncertainties were obtained."""

    source: str
    derivation: str  # "direct" (E, uE given) or "components" (from R, V, uR, uV)
    rows_read: int
    rows_rejected: int
    units: str = ""
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Dataset:
    """Immutable table of prediction errors, uncertainties and features.

    All columns share the same length M, errors are finite, uncertainties
    are strictly positive and finite, and feature columns are finite.
    Arrays are frozen after construction, so a dataset can be shared
    across any number of concurrent analyses.
    """

    errors: np.ndarray
    uncertainties: np.ndarray
    features: dict[str, np.ndarray] = field(default_factory=dict)
    provenance: Provenance = Provenance("memory", "direct", 0, 0)

    def __post_init__(self):
        e = _freeze(np.asarray(self.errors, dtype=float).ravel())
        u = _freeze(np.asarray(self.uncertainties, dtype=float).ravel())
        if e.size < 1:
            raise ValueError("dataset must contain at least one row")
        if u.size != e.size:
            raise ValueError(f"length mismatch: {e.size} errors vs {u.size} uncertainties")
        if not np.all(np.isfinite(e)):
            raise ValueError("errors contain non-finite values")
        if not (np.all(np.isfinite(u)) and np.all(u > 0.0)):
            raise ValueError("uncertainties must be finite and strictly positive")
        feats = {}
        for name, col in self.features.items():
            arr = _freeze(np.asarray(col, dtype=float).ravel())
            if arr.size != e.size:
                raise ValueError(f"feature {name!r} has length {arr.size}, expected {e.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"feature {name!r} contains non-finite values")
            feats[name] = arr
        object.__setattr__(self, "errors", e)
        object.__setattr__(self, "uncertainties", u)
        object.__setattr__(self, "features", feats)

    @property
    def size(self) -> int:
        return self.errors.size

    def feature(self, name: str) -> np.ndarray:
        try:
            return self.features[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}; available: {sorted(self.features)}") from None


@dataclass(frozen=True)
class StrataProfile:
    """Exact unique-value counts of one variable, sorted by value."""

    variable: str
    values: np.ndarray
    counts: np.ndarray

    @property
    def n_unique(self) -> int:
        return self.values.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _parse_cell(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def load_dataset(source: str | Path, mapping: Mapping[str, str],
                 features: Sequence[str] = (), units: str = "") -> Dataset:
    """Load a delimited text table into a validated dataset.

    Parameters
    ----------
    source : path
        Comma- or tab-delimited file with a header row; the delimiter is
        auto-detected from the header line.
    mapping : mapping
        Either {"E": col, "uE": col} for direct loading, or
        {"R": col, "V": col} with optional "uR"/"uV" entries, in which
        case E = R - V and uE = sqrt(uR^2 + uV^2) with absent components
        treated as zero.
    features : sequence of str
        Column names to carry along as named feature columns.
    units : str
        Opaque unit label stored in the provenance.

    Rows with a missing, unparsable or non-finite value in any mapped or
    feature column, or a non-positive derived uncertainty, are rejected
    and counted rather than imputed.
    """
    path = Path(source)
    direct = "E" in mapping or "uE" in mapping
    if direct:
        mixed = [k for k in _COMPONENT_KEYS if k in mapping]
        if mixed:
            raise LoadError(f"ambiguous mapping: direct (E, uE) mixed with component keys {mixed}")
        missing = [k for k in _DIRECT_KEYS if k not in mapping]
        if missing:
            raise LoadError(f"mapping must name both E and uE columns; missing {missing}")
        needed = {k: mapping[k] for k in _DIRECT_KEYS}
    else:
        missing = [k for k in ("R", "V") if k not in mapping]
        if missing:
            raise LoadError(f"mapping must name both R and V columns; missing {missing}")
        needed = {k: mapping[k] for k in _COMPONENT_KEYS if k in mapping}
    unknown = set(mapping) - set(_DIRECT_KEYS) - set(_COMPONENT_KEYS)
    if unknown:
        raise LoadError(f"unknown mapping keys {sorted(unknown)}")

    with open(path, newline="") as handle:
        header_line = handle.readline()
        if not header_line.strip():
            raise LoadError(f"{path}: empty input")
        delimiter = _sniff_delimiter(header_line)
        header = [cell.strip() for cell in next(csv.reader([header_line], delimiter=delimiter))]
        if len(set(header)) != len(header):
            dupes = sorted({name for name in header if header.count(name) > 1})
            raise LoadError(f"{path}: duplicate column names {dupes} in header")
        columns = {name: i for i, name in enumerate(header)}
        for role, col in list(needed.items()) + [(f, f) for f in features]:
            if col not in columns:
                raise LoadError(f"{path}: column {col!r} (for {role}) not found in header {header}")

        need_idx = {role: columns[col] for role, col in needed.items()}
        feat_idx = {name: columns[name] for name in features}
        rows_read = 0
        rejected = 0
        errors, uncertainties = [], []
        feat_values: dict[str, list[float]] = {name: [] for name in features}
        for row in csv.reader(handle, delimiter=delimiter):
            if not row or all(not cell.strip() for cell in row):
                continue
            rows_read += 1
            try:
                cells = {role: _parse_cell(row[i]) for role, i in need_idx.items()}
                feats = {name: _parse_cell(row[i]) for name, i in feat_idx.items()}
            except (ValueError, IndexError):
                rejected += 1
                continue
            if direct:
                e, u = cells["E"], cells["uE"]
            else:
                e = cells["R"] - cells["V"]
                u = math.hypot(cells.get("uR", 0.0), cells.get("uV", 0.0))
            if u <= 0.0:
                rejected += 1
                continue
            errors.append(e)
            uncertainties.append(u)
            for name, value in feats.items():
                feat_values[name].append(value)

    if not errors:
        raise LoadError(f"{path}: no usable rows ({rows_read} read, {rejected} rejected)")
    provenance = Provenance(
        source=str(path),
        derivation="direct" if direct else "components",
        rows_read=rows_read,
        rows_rejected=rejected,
        units=units,
    )
    return Dataset(np.array(errors), np.array(uncertainties),
                   {name: np.array(vals) for name, vals in feat_values.items()},
                   provenance)


def zscores(d: Dataset) -> np.ndarray:
    """Element-wise error over uncertainty, in dataset row order."""
    z = d.errors / d.uncertainties
    if not np.all(np.isfinite(z)):
        raise ValueError("z-scores overflow: errors too large relative to uncertainties")
    return z


def stratification_profile(values, variable: str = "value") -> StrataProfile:
    """Count occurrences of every distinct value, ascending.

    Repeated values (strata) are common after step-wise recalibration
    and make order-sensitive binning schemes unstable, so the profile is
    worth checking before any binned analysis.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("cannot profile an empty sequence")
    unique, counts = np.unique(arr, return_counts=True)
    return StrataProfile(variable, _freeze(unique), _freeze(counts))


def rank_correlation(a, b) -> float:
    """Spearman rank correlation with mid-ranks for ties.

    Raises ConstantInputError when either sequence is constant, where
    the coefficient is undefined.
    """
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least two pairs")
    rx = sps.rankdata(x, method="average")
    ry = sps.rankdata(y, method="average")
    if np.ptp(rx) == 0.0 or np.ptp(ry) == 0.0:
        raise ConstantInputError("rank correlation undefined for constant input")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
