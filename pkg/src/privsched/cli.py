"""Command-line interface: validate configs, run experiments, sweep a
parameter, generate workload files, and describe result directories."""
from __future__ import annotations

import sys

import click

from .config import ConfigError, load_config
from .experiments import SWEEPABLE, run_experiment, sweep as run_sweep
from .rdp import DEFAULT_ALPHA_GRID
from .workload import (
    MicrobenchKnobs,
    TraceMappingParams,
    WeightedWorkloadParams,
    generate_microbenchmark,
    generate_weighted_two_category,
    map_trace,
    read_trace_csv,
    save_workload,
)


@click.group()
@click.version_option(package_name="privsched")
def main() -> None:
    """Privacy-budget scheduling toolkit."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
def validate(config_path: str) -> None:
    """Validate an experiment config; exit nonzero if invalid."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"ok: {len(cfg.schedulers)} scheduler(s), "
               f"{len(cfg.seeds)} seed(s), mode={cfg.mode}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", default=None,
              help="Override the config's output directory.")
@click.option("--no-figures", is_flag=True, help="Skip figure rendering.")
def run(config_path: str, output_dir: str | None, no_figures: bool) -> None:
    """Run every (scheduler x seed) cell and write the result tables."""
    try:
        cfg = load_config(config_path)
        rows = run_experiment(cfg, output_dir, figures=not no_figures)
    except (ConfigError, OSError, RuntimeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    outdir = output_dir or cfg.output_dir
    skipped = sum(1 for r in rows if r.status == "skipped")
    click.echo(f"wrote {len(rows)} row(s) to {outdir}/results.csv"
               + (f" ({skipped} skipped)" if skipped else ""))


@main.command(name="sweep")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--parameter", "-p", required=True,
              type=click.Choice(SWEEPABLE))
@click.option("--values", "-v", required=True,
              help="Comma-separated parameter values.")
@click.option("--output-dir", "-o", default=None)
@click.option("--no-figures", is_flag=True, help="Skip figure rendering.")
def sweep_cmd(config_path: str, parameter: str, values: str,
              output_dir: str | None, no_figures: bool) -> None:
    """Re-run an experiment across parameter values; emit sweep.csv."""
    parsed = []
    for raw in values.split(","):
        raw = raw.strip()
        if parameter == "T" and raw == "inf":
            parsed.append("inf")
        elif parameter in ("sigma_blocks", "sigma_alpha"):
            parsed.append(float(raw))
        else:
            parsed.append(int(raw))
    try:
        cfg = load_config(config_path)
        path = run_sweep(cfg, parameter, parsed, output_dir,
                         figures=not no_figures)
    except (ConfigError, OSError, RuntimeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {path}")


@main.command(name="gen-workload")
@click.option("--generator", "-g", required=True,
              type=click.Choice(["microbenchmark", "weighted_two_category",
                                 "trace"]))
@click.option("--seed", "-s", default=0, show_default=True)
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--n-tasks", default=100, show_default=True)
@click.option("--n-blocks", default=20, show_default=True,
              help="[microbenchmark] available block pool size.")
@click.option("--sigma-blocks", default=0.0, show_default=True)
@click.option("--sigma-alpha", default=0.0, show_default=True)
@click.option("--eps-min", default=0.1, show_default=True)
@click.option("--arrival-rate", default=2.0, show_default=True,
              help="[weighted_two_category] tasks per tick.")
@click.option("--trace-file", type=click.Path(exists=True),
              help="[trace] CSV with timestamp, machine_class, "
                   "memory_gb_hours, network_bytes columns.")
def gen_workload(generator: str, seed: int, out: str, n_tasks: int,
                 n_blocks: int, sigma_blocks: float, sigma_alpha: float,
                 eps_min: float, arrival_rate: float,
                 trace_file: str | None) -> None:
    """Generate a workload and save it as a JSON task file."""
    try:
        if generator == "microbenchmark":
            knobs = MicrobenchKnobs(
                n_tasks=n_tasks, n_blocks=n_blocks,
                sigma_blocks=sigma_blocks, sigma_alpha=sigma_alpha,
                eps_min=eps_min)
            tasks = generate_microbenchmark(knobs, seed)
        elif generator == "weighted_two_category":
            params = WeightedWorkloadParams(n_tasks=n_tasks,
                                            arrival_rate=arrival_rate)
            tasks = generate_weighted_two_category(params, seed)
        else:
            if not trace_file:
                raise click.ClickException(
                    "--trace-file is required for the trace generator")
            records = read_trace_csv(trace_file)
            tasks = map_trace(records, TraceMappingParams(), seed)
        save_workload(out, tasks, DEFAULT_ALPHA_GRID)
    except click.ClickException:
        raise
    except (OSError, RuntimeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(tasks)} task(s) to {out}")


@main.command(name="describe-result")
@click.argument("result_dir", type=click.Path(exists=True, file_okay=False))
def describe_result_cmd(result_dir: str) -> None:
    """Print a digest of a result directory."""
    from .reporting import describe_result

    try:
        click.echo(describe_result(result_dir))
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    sys.exit(main())
