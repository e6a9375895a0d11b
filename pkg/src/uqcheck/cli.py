"""Command-line interface: validate, synth, profile and plots subcommands."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import load_dataset, rank_correlation, stratification_profile
from .errors import ConstantInputError, UQCheckError
from .local_analysis import UNCERTAINTY
from .report import (EXIT_ERROR, PLOT_KINDS, AnalysisConfig, ValidationReport,
                     emit_cloud_series, emit_plot_series, render_plots, run_validate)
from .synth import generate, spec_from_dict, write_dataset


def _parse_mapping(text: str) -> dict:
    mapping = {}
    for item in text.split(","):
        if "=" not in item:
            raise click.UsageError(f"mapping entries look like KEY=column, got {item!r}")
        key, _, column = item.partition("=")
        mapping[key.strip()] = column.strip()
    return mapping


def _parse_names(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _bins_value(text: str):
    return text if text == "auto" else int(text)


@click.group()
def main():
    """Validate variance-based uncertainty estimates for regression models."""


@main.command()
@click.option("--input", "input_path", default=None, type=click.Path(), help="Delimited input table.")
@click.option("--map", "mapping", default=None, help="Column mapping, e.g. E=err,uE=sigma or R=ref,V=pred,uV=sigma.")
@click.option("--by", default=None, help="Comma-separated conditioning variables (use 'uncertainty' or 'uE' for u_E).")
@click.option("--bins", default=None, help="Equal-count bin count, or 'auto' for round(sqrt(M)).")
@click.option("--binning", "schemes", default=None, help="Comma-separated schemes: equal, strata.")
@click.option("--min-stratum", default=None, type=int, help="Minimum stratum size before merging [default: 100].")
@click.option("--kinds", default=None, help="Statistics to bin: ZM, ZMS, ZVAR [default: ZM,ZMS].")
@click.option("--level", default=None, type=float, help="Confidence-interval level [default: 0.95].")
@click.option("--boot", default=None, type=int, help="Bootstrap resamples per interval [default: 1000].")
@click.option("--perturb/--no-perturb", default=None, help="Run the row-reordering perturbation study.")
@click.option("--perms", default=None, type=int, help="Permutations for the perturbation study [default: 1000].")
@click.option("--seed", default=None, type=int, help="Root seed; fixes every random draw [default: 0].")
@click.option("--units", default=None, help="Opaque unit label recorded in the report.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON file with the same keys; flags override it.")
@click.option("--out", "out_dir", type=click.Path(), help="Directory for report.json and plot series.")
@click.option("--render/--no-render", default=False, help="Also render PDF panels (needs matplotlib).")
def validate(input_path, mapping, by, bins, schemes, min_stratum, kinds, level, boot,
             perturb, perms, seed, units, config_path, out_dir, render):
    """Run the full validation pipeline and exit 0 only if all targets pass."""
    try:
        base = {}
        if config_path:
            base = json.loads(Path(config_path).read_text())
        flags = {
            "input": input_path,
            "mapping": _parse_mapping(mapping) if mapping else None,
            "by": _parse_names(by) if by is not None else None,
            "bins": _bins_value(bins) if bins is not None else None,
            "binning": _parse_names(schemes) if schemes is not None else None,
            "min_stratum": min_stratum,
            "kinds": _parse_names(kinds) if kinds is not None else None,
            "level": level,
            "resamples": boot,
            "perturb": perturb,
            "permutations": perms,
            "seed": seed,
            "units": units,
        }
        merged = dict(base)
        merged.update({k: v for k, v in flags.items() if v is not None})
        if out_dir is not None:
            merged["out"] = out_dir
        config = AnalysisConfig.from_dict(merged)
        out_dir = config.out
        report = run_validate(config)
    except (UQCheckError, OSError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)

    verdicts = report.verdicts
    click.echo(f"average calibration: {'pass' if verdicts['average_calibration'] else 'FAIL'}")
    if verdicts["consistency"] is not None:
        click.echo(f"consistency: {'pass' if verdicts['consistency'] else 'FAIL'}")
    for variable, verdict in verdicts["adaptivity"].items():
        state = "pass" if verdict else ("FAIL" if verdict is False else "not assessed")
        click.echo(f"adaptivity[{variable}]: {state}")

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write(out / "report.json")
        emit_plot_series(report, "all", out)
        feature_columns = tuple(dict.fromkeys(
            tuple(config.features) + tuple(v for v in config.by if v != UNCERTAINTY)))
        if config.input:
            d = load_dataset(config.input, config.mapping, feature_columns, units=config.units)
            emit_cloud_series(d, config.by, out)
        if render:
            render_plots(out)
        click.echo(f"report written to {out / 'report.json'}")
    sys.exit(report.exit_code)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True), help="JSON synthetic-dataset spec.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output table path.")
@click.option("--seed", default=None, type=int, help="Override the spec's seed.")
def synth(spec_path, out_path, seed):
    """Generate a synthetic dataset from a JSON spec and write it as a table."""
    try:
        data = json.loads(Path(spec_path).read_text())
        if seed is not None:
            data["seed"] = seed
        spec = spec_from_dict(data)
        d = generate(spec)
        write_dataset(d, out_path)
    except (UQCheckError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"wrote {d.size} rows to {out_path}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--map", "mapping", required=True, help="Column mapping, as for validate.")
@click.option("--by", default="", help="Feature columns to profile alongside the uncertainty.")
def profile(input_path, mapping, by):
    """Print stratification profiles and rank correlations as JSON."""
    try:
        names = _parse_names(by)
        features = tuple(v for v in names if v != UNCERTAINTY)
        d = load_dataset(input_path, _parse_mapping(mapping), features)
        out = {"size": d.size, "rows_rejected": d.provenance.rows_rejected, "profiles": [], "rank_correlations": []}
        columns = {UNCERTAINTY: d.uncertainties}
        columns.update(d.features)
        for name, values in columns.items():
            profile = stratification_profile(values, name)
            out["profiles"].append({"variable": name, "n_unique": profile.n_unique})
        corr_columns = dict(d.features)
        corr_columns["abs_error"] = np.abs(d.errors)
        corr_columns[UNCERTAINTY] = d.uncertainties
        names = list(corr_columns)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                entry = {"a": a, "b": b}
                try:
                    entry["value"] = rank_correlation(corr_columns[a], corr_columns[b])
                except ConstantInputError as exc:
                    entry["value"] = None
                    entry["error"] = str(exc)
                out["rank_correlations"].append(entry)
    except (UQCheckError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(json.dumps(out, indent=2))


@main.command()
@click.option("--report", "report_path", required=True, type=click.Path(exists=True))
@click.option("--kind", default="all", show_default=True, help=f"One of {', '.join(PLOT_KINDS)}.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--render/--no-render", default=False, help="Also render PDF panels (needs matplotlib).")
def plots(report_path, kind, out_dir, render):
    """Emit plot-series files from a saved report."""
    try:
        report = ValidationReport.read(report_path)
        written = emit_plot_series(report, kind, out_dir)
        if render:
            written += render_plots(out_dir)
    except (UQCheckError, OSError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
