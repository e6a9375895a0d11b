"""Synthetic datasets with known calibration properties.

These generators are the ground-truth oracles for the analysis code:
a calibrated dataset draws every error from a normal law whose scale is
exactly the stated uncertainty, so all z-score statistics have known
distributions.  Defects then introduce controlled miscalibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, Provenance
from .errors import SpecError
from .stats_core import substream

# substream tags used during generation
_U_STREAM = 0
_E_STREAM = 1
_SHUFFLE_STREAM = 2
_FEATURE_STREAM = 10


@dataclass(frozen=True)
class LogUniform:
    """Uncertainties log-uniform over [low, high]."""

    low: float
    high: float

    def __post_init__(self):
        if not 0.0 < self.low <= self.high:
            raise SpecError(f"log-uniform bounds must satisfy 0 < low <= high, got [{self.low}, {self.high}]")

    def draw(self, size, rng):
        return np.exp(rng.uniform(math.log(self.low), math.log(self.high), size))


@dataclass(frozen=True)
class Constant:
    """A single uncertainty value for every row."""

    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise SpecError(f"constant uncertainty must be positive, got {self.value}")

    def draw(self, size, rng):
        return np.full(size, self.value)


@dataclass(frozen=True)
class Strata:
    """K distinct uncertainty values with given weights.

    Rows are allocated to values by largest-remainder apportionment of
    the weights (so counts are exact, not multinomial) and then shuffled.
    """

    values: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.values) < 1:
            raise SpecError("strata law needs at least one value")
        if any(v <= 0.0 for v in self.values):
            raise SpecError("strata values must be positive")
        if len(set(self.values)) != len(self.values):
            raise SpecError("strata values must be distinct")
        if self.weights is not None:
            if len(self.weights) != len(self.values):
                raise SpecError("weights and values must have the same length")
            if any(w < 0.0 for w in self.weights) or sum(self.weights) <= 0.0:
                raise SpecError("weights must be non-negative with a positive sum")

    def draw(self, size, rng):
        k = len(self.values)
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, float)
        w = w / w.sum()
        quota = w * size
        counts = np.floor(quota).astype(int)
        remainder = size - counts.sum()
        if remainder > 0:
            counts[np.argsort(-(quota - counts), kind="stable")[:remainder]] += 1
        out = np.repeat(np.asarray(self.values, float), counts)
        return out[rng.permutation(size)]


@dataclass(frozen=True)
class NormalErrors:
    """Errors drawn from N(0, spread * u) for each row; spread 1 is calibrated."""

    spread: float = 1.0

    def __post_init__(self):
        if self.spread < 0.0:
            raise SpecError(f"error spread must be non-negative, got {self.spread}")


@dataclass(frozen=True)
class EnsembleErrors:
    """Errors and uncertainties as mean and standard error of n draws."""

    n: int

    def __post_init__(self):
        if self.n < 4:
            raise SpecError(f"ensemble size must be at least 4, got {self.n}")


@dataclass(frozen=True)
class UniformFeature:
    """Feature drawn uniformly on [low, high], independent of everything else."""

    name: str
    low: float = 0.0
    high: float = 1.0


@dataclass(frozen=True)
class LinkedFeature:
    """Feature deterministically tied to the uncertainty: offset + scale * u."""

    name: str
    offset: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class Defect:
    """Miscalibration on rows whose feature lies in [low, high].

    ``scale`` is the factor by which the stated uncertainty exceeds the
    true error dispersion on the affected rows.  With the default
    "uncertainty" target the stated u is multiplied by scale and errors
    are untouched; with the "dispersion" target the errors are divided
    by scale and u is untouched, which leaves the uncertainty column
    independent of the feature.  Both move the affected mean squared
    z-score to 1/scale^2.
    """

    feature: str
    low: float
    high: float
    scale: float
    target: str = "uncertainty"

    def __post_init__(self):
        if not self.scale > 0.0:
            raise SpecError(f"defect scale must be positive, got {self.scale}")
        if self.low > self.high:
            raise SpecError(f"empty defect interval [{self.low}, {self.high}]")
        if self.target not in ("uncertainty", "dispersion"):
            raise SpecError(f"unknown defect target {self.target!r}")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset: laws, features, defects, seed."""

    size: int
    uncertainty: LogUniform | Constant | Strata
    errors: NormalErrors | EnsembleErrors = NormalErrors()
    features: tuple = ()
    defects: tuple[Defect, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise SpecError(f"dataset size must be at least 1, got {self.size}")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate feature names in {names}")


def generate_calibrated(spec: SynthSpec) -> Dataset:
    """Dataset whose errors are exactly as dispersed as its uncertainties claim.

    The defect list must be empty; use :func:`generate` to apply defects.
    Deterministic for a fixed spec (including seed).
    """
    if spec.defects:
        raise SpecError("calibrated generation requires an empty defect list")
    u = np.asarray(spec.uncertainty.draw(spec.size, substream(spec.seed, _U_STREAM)), float)
    e_rng = substream(spec.seed, _E_STREAM)
    if isinstance(spec.errors, EnsembleErrors):
        e, u = _ensemble_rows(u, spec.errors.n, e_rng)
    else:
        e = spec.errors.spread * u * e_rng.standard_normal(spec.size)
    features = {}
    for i, recipe in enumerate(spec.features):
        if isinstance(recipe, UniformFeature):
            rng = substream(spec.seed, _FEATURE_STREAM + i)
            features[recipe.name] = rng.uniform(recipe.low, recipe.high, spec.size)
        elif isinstance(recipe, LinkedFeature):
            features[recipe.name] = recipe.offset + recipe.scale * u
        else:
            raise SpecError(f"unknown feature recipe {recipe!r}")
    provenance = Provenance("synthetic", "direct", spec.size, 0,
                            notes=(f"seed={spec.seed}",))
    return Dataset(e, u, features, provenance)


def generate(spec: SynthSpec) -> Dataset:
    """Generate a dataset and apply its defects in order."""
    d = generate_calibrated(replace(spec, defects=()))
    for defect in spec.defects:
        d = inject_miscalibration(d, defect)
    return d


def inject_miscalibration(d: Dataset, defect: Defect) -> Dataset:
    """Return a copy of ``d`` with one defect applied.

    Rows are selected by ``defect.feature`` falling inside the closed
    interval [low, high].  An empty selection returns the data unchanged
    with a warning note in the provenance.
    """
    feature = d.feature(defect.feature)
    mask = (feature >= defect.low) & (feature <= defect.high)
    note = (f"defect target={defect.target} scale={defect.scale} on "
            f"{defect.feature} in [{defect.low}, {defect.high}] ({int(mask.sum())} rows)")
    if not mask.any():
        provenance = replace(d.provenance, notes=d.provenance.notes + (note + " [empty selection, unchanged]",))
        return Dataset(d.errors, d.uncertainties, d.features, provenance)
    errors = np.array(d.errors)
    uncertainties = np.array(d.uncertainties)
    if defect.target == "uncertainty":
        uncertainties[mask] *= defect.scale
    else:
        errors[mask] /= defect.scale
    provenance = replace(d.provenance, notes=d.provenance.notes + (note,))
    return Dataset(errors, uncertainties, d.features, provenance)


def generate_ensemble_dataset(size: int, n: int, uncertainty, seed: int = 0) -> Dataset:
    """Dataset where E and u_E summarize n-member prediction ensembles.

    For each row, n values are drawn from N(0, s) with s taken from the
    uncertainty law; the error is their mean and the uncertainty the
    standard error of that mean.  The z-scores then follow a Student-t
    law with n - 1 degrees of freedom, so their variance should match
    (n - 1)/(n - 3) rather than 1.
    """
    spec = SynthSpec(size, uncertainty, EnsembleErrors(n), seed=seed)
    return generate_calibrated(spec)


def _ensemble_rows(scales, n, rng, chunk: int = 4096):
    m = scales.size
    e = np.empty(m)
    u = np.empty(m)
    for start in range(0, m, chunk):
        s = scales[start:start + chunk]
        draws = s[:, None] * rng.standard_normal((s.size, n))
        e[start:start + chunk] = draws.mean(axis=1)
        u[start:start + chunk] = draws.std(axis=1, ddof=1) / math.sqrt(n)
    return e, u


def write_dataset(d: Dataset, path) -> None:
    """Write a dataset in the same delimited format ``load_dataset`` reads.

    Values are written with full round-trip precision, so loading the
    file back reproduces the arrays bit-exactly.
    """
    names = list(d.features)
    with open(path, "w", newline="") as handle:
        handle.write(",".join(["E", "uE"] + names) + "\n")
        cols = [d.errors, d.uncertainties] + [d.features[n] for n in names]
        for row in zip(*cols):
            handle.write(",".join(repr(float(v)) for v in row) + "\n")


def spec_from_dict(data: dict) -> SynthSpec:
    """Build a SynthSpec from the JSON-friendly layout used by the CLI."""
    try:
        u = dict(data["uncertainty"])
        law = u.pop("law")
        if law == "loguniform":
            uncertainty = LogUniform(**u)
        elif law == "constant":
            uncertainty = Constant(**u)
        elif law == "strata":
            uncertainty = Strata(tuple(u["values"]),
                                 tuple(u["weights"]) if u.get("weights") else None)
        else:
            raise SpecError(f"unknown uncertainty law {law!r}")
        e = dict(data.get("errors", {"law": "normal"}))
        elaw = e.pop("law")
        if elaw == "normal":
            errors = NormalErrors(**e)
        elif elaw == "ensemble":
            errors = EnsembleErrors(**e)
        else:
            raise SpecError(f"unknown error law {elaw!r}")
        features = []
        for f in data.get("features", ()):
            f = dict(f)
            kind = f.pop("kind", "uniform")
            if kind == "uniform":
                features.append(UniformFeature(**f))
            elif kind == "linked":
                features.append(LinkedFeature(**f))
            else:
                raise SpecError(f"unknown feature kind {kind!r}")
        defects = tuple(Defect(**dict(f)) for f in data.get("defects", ()))
        return SynthSpec(size=int(data["size"]), uncertainty=uncertainty, errors=errors,
                         features=tuple(features), defects=defects,
                         seed=int(data.get("seed", 0)))
    except KeyError as exc:
        raise SpecError(f"synthetic spec is missing required key {exc}") from None
    except TypeError as exc:
        raise SpecError(f"malformed synthetic spec: {exc}") from None
