"""Validation pipeline orchestration, report structure and plot series.

A report is a deterministic key-value tree: re-running the pipeline
with an identical configuration (same input, same root seed) produces
byte-identical JSON.  Every verdict in the tree is recomputable from
the estimates stored next to it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binning import AUTO, equal_count_bins, resolve_bin_count, sliding_window, stratified_bins
from .dataset import Dataset, load_dataset, rank_correlation, stratification_profile, zscores
from .errors import ConstantInputError, UQCheckError
from .local_analysis import (KINDS, UNCERTAINTY, ZMS, acf, average_calibration_report,
                             conditioning_values, fraction_valid, lz_analysis,
                             reliability_diagram, reorder_perturbation)
from .stats_core import StatEstimate

EXIT_OK = 0
EXIT_ERROR = 1
# 2 is taken by command-line usage errors
EXIT_AVERAGE = 3
EXIT_CONSISTENCY = 4
EXIT_ADAPTIVITY = 5

SCHEMES = ("equal", "strata")
PLOT_KINDS = ("lz", "acf", "fv-summary", "homoscedasticity", "reliability", "all")

# stratification counts are embedded only for variables at most this stratified
_PROFILE_DETAIL_LIMIT = 200


@dataclass
class AnalysisConfig:
    """Everything run_validate needs: input, mapping, analyses, defaults."""

    input: str | Path | None = None
    mapping: dict = field(default_factory=dict)
    features: tuple[str, ...] = ()
    by: tuple[str, ...] = ()
    binning: tuple[str, ...] = ("equal",)
    bins: int | str = AUTO
    min_stratum: int = 100
    kinds: tuple[str, ...] = ("ZM", "ZMS")
    level: float = 0.95
    resamples: int = 1000
    perturb: bool = False
    permutations: int = 1000
    seed: int = 0
    units: str = ""
    out: str | Path | None = None

    def __post_init__(self):
        for scheme in self.binning:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown binning scheme {scheme!r}; expected one of {SCHEMES}")
        for kind in self.kinds:
            if kind not in KINDS:
                raise ValueError(f"unknown statistic kind {kind!r}; expected one of {KINDS}")
        if self.level <= 0.0 or self.level >= 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.resamples < 100:
            raise ValueError(f"resamples must be at least 100, got {self.resamples}")
        if self.permutations < 2:
            raise ValueError(f"permutations must be at least 2, got {self.permutations}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "input": str(self.input) if self.input is not None else None,
            "mapping": dict(self.mapping),
            "features": list(self.features),
            "by": list(self.by),
            "binning": list(self.binning),
            "bins": self.bins,
            "min_stratum": self.min_stratum,
            "kinds": list(self.kinds),
            "level": self.level,
            "resamples": self.resamples,
            "perturb": self.perturb,
            "permutations": self.permutations,
            "seed": self.seed,
            "units": self.units,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown configuration keys {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("features", "by", "binning", "kinds"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class ValidationReport:
    """The report tree plus the exit status derived from its verdicts."""

    data: dict

    @property
    def exit_code(self) -> int:
        return self.data["exit_code"]

    @property
    def verdicts(self) -> dict:
        return self.data["verdicts"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        return cls(json.loads(text))

    @classmethod
    def read(cls, path) -> "ValidationReport":
        return cls.from_json(Path(path).read_text())


def _est_dict(e: StatEstimate) -> dict:
    return {
        "value": e.value,
        "low": e.interval.low,
        "high": e.interval.high,
        "level": e.interval.level,
        "method": e.interval.method,
        "target": e.target,
        "valid": e.valid,
    }


def _profile_dict(values, name) -> dict:
    profile = stratification_profile(values, name)
    out = {"variable": name, "n_unique": profile.n_unique}
    if profile.n_unique <= _PROFILE_DETAIL_LIMIT:
        out["values"] = [float(v) for v in profile.values]
        out["counts"] = [int(c) for c in profile.counts]
    return out


def _correlation_entries(d: Dataset) -> list:
    columns = {name: d.features[name] for name in d.features}
    columns["abs_error"] = np.abs(d.errors)
    columns[UNCERTAINTY] = d.uncertainties
    names = list(columns)
    entries = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            entry = {"a": a, "b": b}
            try:
                entry["value"] = rank_correlation(columns[a], columns[b])
            except ConstantInputError as exc:
                entry["value"] = None
                entry["error"] = str(exc)
            entries.append(entry)
    return entries


def _build_partition(values, scheme, config, variable):
    if scheme == "equal":
        return equal_count_bins(values, config.bins, variable=variable)
    return stratified_bins(values, config.min_stratum, variable=variable)


def _lz_block(result, config) -> dict:
    summary = fraction_valid(result, coverage=config.level)
    rows = []
    for b, est in zip(result.partition.bins, result.estimates):
        row = {"representative": b.representative, "count": b.count}
        if est is None:
            row["estimate"] = None
        else:
            row["estimate"] = _est_dict(est)
        rows.append(row)
    block = {
        "kind": result.kind,
        "scheme": result.partition.scheme,
        "n_bins": result.partition.n_bins,
        "counted_bins": result.counted,
        "skipped_bins": list(result.skipped),
        "f_v": result.f_v,
        "fraction_valid": _est_dict(summary),
        "bins": rows,
    }
    series = result.series()
    try:
        series_acf = acf(series, level=config.level)
        block["acf"] = {
            "lags": [int(k) for k in series_acf.lags],
            "values": [float(v) for v in series_acf.values],
            "band": series_acf.band,
            "level": series_acf.level,
        }
    except UQCheckError as exc:
        block["acf"] = None
        block["acf_error"] = str(exc)
    return block


def _running_block(d: Dataset, variable: str) -> dict:
    values = conditioning_values(d, variable)
    z = zscores(d)
    window = max(2, d.size // 100)
    partition = sliding_window(values, window, variable=variable)
    series = []
    for b in partition.bins:
        zw = z[b.indices]
        series.append([b.representative, float(zw.mean()), float(np.mean(zw * zw))])
    return {"variable": variable, "window": window, "series": series}


def run_validate(config: AnalysisConfig, dataset: Dataset | None = None) -> ValidationReport:
    """Execute the full validation pipeline described by ``config``.

    Loads the dataset (unless one is passed directly), checks average
    calibration, runs the binned analyses for every conditioning
    variable and binning scheme, optionally the reordering perturbation
    study, and the reliability curve.  Analysis failures on individual
    variables are embedded in the report; only unusable input aborts.

    The exit code is 0 when every requested verdict passes, otherwise
    the code of the first failed target in report order (average
    calibration, consistency, then adaptivity per variable).
    """
    if dataset is None:
        if config.input is None:
            raise ValueError("config names no input file and no dataset was passed")
        feature_columns = tuple(dict.fromkeys(
            tuple(config.features) + tuple(v for v in config.by if v != UNCERTAINTY)))
        dataset = load_dataset(config.input, config.mapping, feature_columns, units=config.units)

    d = dataset
    profiles = [_profile_dict(d.uncertainties, UNCERTAINTY)]
    for name in d.features:
        profiles.append(_profile_dict(d.features[name], name))

    average = average_calibration_report(d, config.level, config.resamples, config.seed)
    average_block = {
        "mean": _est_dict(average.mean),
        "mean_squares": _est_dict(average.mean_squares),
        "variance": _est_dict(average.variance),
    }
    # the variance test is redundant with the mean-squares test once the
    # mean is checked, so the verdict rests on the first two
    average_pass = average.mean.valid and average.mean_squares.valid
    average_block["verdict"] = average_pass

    conditional_blocks = []
    verdict_by_variable: dict[str, bool | None] = {}
    for variable in config.by:
        values = conditioning_values(d, variable)
        block = {
            "variable": variable,
            "role": "consistency" if variable == UNCERTAINTY else "adaptivity",
            "schemes": [],
        }
        primary_verdict = None
        for scheme in config.binning:
            scheme_block = {"scheme": scheme, "analyses": []}
            try:
                partition = _build_partition(values, scheme, config, variable)
            except UQCheckError as exc:
                scheme_block["error"] = str(exc)
                block["schemes"].append(scheme_block)
                continue
            scheme_block["n_bins"] = partition.n_bins
            scheme_block["undersized"] = partition.undersized
            for kind in config.kinds:
                try:
                    result = lz_analysis(d, variable, partition, kind,
                                         config.level, config.resamples, config.seed)
                except UQCheckError as exc:
                    scheme_block["analyses"].append({"kind": kind, "error": str(exc)})
                    continue
                lz_block = _lz_block(result, config)
                if (config.perturb and scheme == "equal"):
                    perturbation = reorder_perturbation(
                        d, variable, config.bins, kind, config.permutations,
                        config.level, config.resamples, config.seed)
                    lz_block["perturbation"] = {
                        "n_perm": config.permutations,
                        "mean": perturbation.mean,
                        "spread": list(perturbation.spread),
                        "combined": list(perturbation.combined),
                    }
                scheme_block["analyses"].append(lz_block)
                if (primary_verdict is None and kind == ZMS
                        and scheme == config.binning[0]):
                    primary_verdict = lz_block["fraction_valid"]["valid"]
            block["schemes"].append(scheme_block)
        block["verdict"] = primary_verdict
        verdict_by_variable[variable] = primary_verdict
        conditional_blocks.append(block)

    running_blocks = [_running_block(d, v) for v in config.by]

    # the reliability curve is the u_E-conditional view; without that
    # conditioning variable the report reduces to average calibration
    reliability_block = None
    if UNCERTAINTY in config.by:
        n_rel = resolve_bin_count(config.bins, d.size)
        curve = reliability_diagram(d, min(n_rel, d.size))
        reliability_block = {
            "n_bins": curve.partition.n_bins,
            "bins": [
                {"rmv": float(rmv), "rmse": float(rmse), "rce": float(r), "count": b.count}
                for rmv, rmse, r, b in zip(curve.rmv, curve.rmse, curve.rce_values, curve.partition.bins)
            ],
            "global_rce": curve.global_rce,
        }

    consistency = verdict_by_variable.get(UNCERTAINTY)
    adaptivity = {v: verdict_by_variable[v] for v in config.by if v != UNCERTAINTY}
    first_failure = None
    exit_code = EXIT_OK
    if not average_pass:
        first_failure, exit_code = "average_calibration", EXIT_AVERAGE
    elif consistency is False:
        first_failure, exit_code = "consistency", EXIT_CONSISTENCY
    else:
        for variable, verdict in adaptivity.items():
            if verdict is False:
                first_failure, exit_code = f"adaptivity:{variable}", EXIT_ADAPTIVITY
                break

    data = {
        "config": config.to_dict(),
        "dataset": {
            "size": d.size,
            "source": d.provenance.source,
            "derivation": d.provenance.derivation,
            "rows_read": d.provenance.rows_read,
            "rows_rejected": d.provenance.rows_rejected,
            "units": d.provenance.units,
            "profiles": profiles,
            "rank_correlations": _correlation_entries(d),
        },
        "average_calibration": average_block,
        "conditional": conditional_blocks,
        "running": running_blocks,
        "reliability": reliability_block,
        "verdicts": {
            "average_calibration": average_pass,
            "consistency": consistency,
            "adaptivity": adaptivity,
            "first_failure": first_failure,
        },
        "exit_code": exit_code,
    }
    return ValidationReport(data)


def _write_rows(path: Path, header, rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, float):
                cells.append(repr(value))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def _lz_series_files(report, outdir) -> list[Path]:
    written = []
    for block in report.data["conditional"]:
        variable = block["variable"]
        for scheme_block in block["schemes"]:
            for analysis in scheme_block["analyses"]:
                if "error" in analysis:
                    continue
                rows = []
                for i, row in enumerate(analysis["bins"]):
                    est = row["estimate"]
                    if est is None:
                        continue
                    rows.append([i, row["representative"], row["count"], est["value"],
                                 est["low"], est["high"], int(est["valid"])])
                name = f"lz_{variable}_{scheme_block['scheme']}_{analysis['kind']}.csv"
                written.append(_write_rows(
                    outdir / name,
                    ["bin", "representative", "count", "value", "low", "high", "valid"],
                    rows))
    return written


def _acf_series_files(report, outdir) -> list[Path]:
    written = []
    for block in report.data["conditional"]:
        variable = block["variable"]
        for scheme_block in block["schemes"]:
            for analysis in scheme_block["analyses"]:
                if "error" in analysis or not analysis.get("acf"):
                    continue
                series = analysis["acf"]
                rows = [[lag, value, series["band"]]
                        for lag, value in zip(series["lags"], series["values"])]
                name = f"acf_{variable}_{scheme_block['scheme']}_{analysis['kind']}.csv"
                written.append(_write_rows(outdir / name, ["lag", "value", "band"], rows))
    return written


def _fv_summary_file(report, outdir) -> list[Path]:
    rows = []
    for block in report.data["conditional"]:
        variable = block["variable"]
        for scheme_block in block["schemes"]:
            for analysis in scheme_block.get("analyses", ()):
                if "error" in analysis:
                    continue
                fv = analysis["fraction_valid"]
                group = "nominal" if scheme_block["scheme"] == "equal" else "stratified"
                rows.append([variable, analysis["kind"], group,
                             fv["value"], fv["low"], fv["high"]])
                perturbation = analysis.get("perturbation")
                if perturbation:
                    rows.append([variable, analysis["kind"], "random-order",
                                 perturbation["mean"], perturbation["spread"][0],
                                 perturbation["spread"][1]])
                    rows.append([variable, analysis["kind"], "random-binomial",
                                 perturbation["mean"], perturbation["combined"][0],
                                 perturbation["combined"][1]])
    if not rows:
        return []
    return [_write_rows(outdir / "fv_summary.csv",
                        ["variable", "kind", "group", "value", "low", "high"], rows)]


def _running_files(report, outdir) -> list[Path]:
    written = []
    for block in report.data["running"]:
        rows = [[r, zm, zms] for r, zm, zms in block["series"]]
        name = f"running_{block['variable']}.csv"
        written.append(_write_rows(outdir / name,
                                   ["representative", "z_mean", "z_mean_squares"], rows))
    return written


def _reliability_file(report, outdir) -> list[Path]:
    block = report.data["reliability"]
    if not block:
        return []
    rows = [[i, b["rmv"], b["rmse"], b["rce"], b["count"]]
            for i, b in enumerate(block["bins"])]
    return [_write_rows(outdir / "reliability.csv",
                        ["bin", "rmv", "rmse", "rce", "count"], rows)]


def emit_plot_series(report: ValidationReport, kind: str, outdir) -> list[Path]:
    """Write tabular plot-series files for one panel family (or ``"all"``).

    Numeric cells use full round-trip precision, so re-parsing a file
    reproduces the corresponding report fields exactly.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    emitters = {
        "lz": [_lz_series_files],
        "acf": [_acf_series_files],
        "fv-summary": [_fv_summary_file],
        "homoscedasticity": [_running_files],
        "reliability": [_reliability_file],
    }
    selected = [fn for fns in emitters.values() for fn in fns] if kind == "all" else emitters[kind]
    written = []
    for fn in selected:
        written.extend(fn(report, outdir))
    return written


def emit_cloud_series(d: Dataset, variables, outdir) -> list[Path]:
    """Write the raw z-score clouds (z against each conditioning variable)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    z = zscores(d)
    written = []
    for variable in variables:
        values = conditioning_values(d, variable)
        rows = [[float(v), float(s)] for v, s in zip(values, z)]
        written.append(_write_rows(outdir / f"cloud_{variable}.csv", ["value", "z"], rows))
    return written


def render_plots(outdir) -> list[Path]:
    """Render PDF panels from the plot-series files in ``outdir``.

    Drawing is optional and isolated here: the analysis pipeline never
    imports a plotting backend.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    written = []
    for csv_path in sorted(outdir.glob("*.csv")):
        header, *rows = csv_path.read_text().strip().split("\n")
        columns = header.split(",")
        if not rows:
            continue
        table = {name: [] for name in columns}
        for line in rows:
            for name, cell in zip(columns, line.split(",")):
                try:
                    table[name].append(float(cell))
                except ValueError:
                    table[name].append(cell)
        fig, ax = plt.subplots(figsize=(5, 4))
        stem = csv_path.stem
        if stem.startswith("lz_"):
            x = table["representative"]
            ax.errorbar(x, table["value"],
                        yerr=[np.array(table["value"]) - np.array(table["low"]),
                              np.array(table["high"]) - np.array(table["value"])],
                        fmt="o", ms=3, lw=0.8)
            ax.axhline(0.0 if stem.endswith("_ZM") else 1.0, color="k", lw=0.8)
        elif stem.startswith("acf_"):
            ax.stem(table["lag"], table["value"])
            band = table["band"][0]
            ax.axhspan(-band, band, color="0.85")
        elif stem.startswith("running_"):
            ax.plot(table["representative"], table["z_mean"], label="mean")
            ax.plot(table["representative"], table["z_mean_squares"], label="mean squares")
            ax.axhline(0.0, color="k", lw=0.5)
            ax.axhline(1.0, color="k", lw=0.5, ls="--")
            ax.legend()
        elif stem.startswith("cloud_"):
            ax.plot(table["value"], table["z"], ".", ms=1, alpha=0.3)
        elif stem == "reliability":
            ax.plot(table["rmv"], table["rmse"], "o-", ms=3)
            lims = [min(table["rmv"]), max(table["rmv"])]
            ax.plot(lims, lims, "k--", lw=0.8)
            ax.set_xlabel("RMV")
            ax.set_ylabel("RMSE")
        elif stem == "fv_summary":
            labels = [f"{v}\n{k}/{g}" for v, k, g in
                      zip(table["variable"], table["kind"], table["group"])]
            ax.errorbar(range(len(labels)), table["value"],
                        yerr=[np.array(table["value"]) - np.array(table["low"]),
                              np.array(table["high"]) - np.array(table["value"])],
                        fmt="o", ms=3)
            ax.set_xticks(range(len(labels)), labels, fontsize=5, rotation=45)
        ax.set_title(stem)
        pdf = csv_path.with_suffix(".pdf")
        fig.savefig(pdf)
        plt.close(fig)
        written.append(pdf)
    return written
