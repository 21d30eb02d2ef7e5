"""Command-line front end.

Subcommands: run-full, run-2d, run-var, sweep, list-specs, rerun. Every run
writes a manifest before any output; rerunning from the manifest (or repeating
the same invocation) reproduces all output files byte-for-byte, independent of
``--jobs``.
"""

from __future__ import annotations

from pathlib import Path

import click

from . import __version__
from .config import (
    load_full_config,
    load_map2d_config,
    load_var_equity_config,
)
from .errors import ConfigError, LevcycleError
from .io import (
    read_manifest,
    write_manifest,
    write_sweep_sidecar,
    write_table,
)
from .sweep import builtin_specs, load_sweep_spec, sweep, sweep_spec_from_dict


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def _prepare_out(out: str | None, subcommand: str) -> Path:
    out_dir = Path(out) if out else Path(f"levcycle-{subcommand}")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _check_config_path(config: str | None) -> None:
    if config is not None and not Path(config).is_file():
        raise click.ClickException(f"config file not found: {config}")


common_options = [
    click.option("--seed", type=int, default=None, help="Master seed."),
    click.option("--T", "horizon", type=int, default=None, help="Horizon."),
    click.option("--out", type=click.Path(), default=None,
                 help="Output directory."),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                 default="csv", show_default=True),
    click.option("--figures/--no-figures", default=True, show_default=True,
                 help="Render figure.png alongside the output."),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@click.group()
@click.version_option(version=__version__, prog_name="levcycle")
def main() -> None:
    """Leverage-cycle simulation engine."""


@main.command("run-full")
@click.option("--config", type=click.Path(), default=None,
              help="TOML config; defaults reproduce the baseline setup.")
@click.option("--passive/--active", "passive", default=False,
              help="Disable leverage management (dB = 0 throughout).")
@click.option("--allocator", type=click.Choice(["softmax", "optimizer"]),
              default=None, help="Portfolio rule override.")
@add_options(common_options)
def cmd_run_full(config, passive, allocator, seed, horizon, out, fmt, figures):
    """Simulate the multi-asset model and write its panel series."""
    _check_config_path(config)
    overrides = {"seed": seed, "T": horizon, "allocator": allocator}
    if passive:
        overrides["active"] = False
    try:
        cfg = load_full_config(config, overrides)
    except (ConfigError, LevcycleError) as exc:
        raise _fail(exc)
    out_dir = _prepare_out(out, "run-full")
    write_manifest(out_dir, "run-full", cfg.to_sections(), cfg.seed,
                   __version__, fmt, figures)
    from .core_model import run_full

    result = run_full(cfg)
    write_table(out_dir, "series", result.columns(), result.rows(), fmt)
    if figures:
        from .figures import render_full_run

        render_full_run(result, out_dir)
    _report(result.status, result.n_rows, out_dir)


@main.command("run-2d")
@click.option("--config", type=click.Path(), default=None)
@click.option("--delta", type=float, default=None, help="Estimation memory.")
@click.option("--jitter", type=float, default=None,
              help="Multiplicative perturbation amplitude on z1.")
@click.option("--z1", "z1_0", type=float, default=None, help="Initial z1.")
@click.option("--z2", "z2_0", type=float, default=None, help="Initial z2.")
@add_options(common_options)
def cmd_run_2d(config, delta, jitter, z1_0, z2_0, seed, horizon, out, fmt,
               figures):
    """Iterate the constant-equity 2D map and export trajectory and prices."""
    _check_config_path(config)
    overrides = {"seed": seed, "T": horizon, "delta": delta, "jitter": jitter,
                 "z1_0": z1_0, "z2_0": z2_0}
    try:
        cfg = load_map2d_config(config, overrides)
    except (ConfigError, LevcycleError) as exc:
        raise _fail(exc)
    out_dir = _prepare_out(out, "run-2d")
    write_manifest(out_dir, "run-2d", cfg.to_sections(), cfg.seed,
                   __version__, fmt, figures)
    from .reduced_2d import run_2d

    result = run_2d(cfg)
    write_table(out_dir, "series", result.columns(), result.rows(), fmt)
    if figures:
        from .figures import render_map2d_run

        render_map2d_run(result, out_dir)
    _report("ok", result.n_rows, out_dir)


@main.command("run-var")
@click.option("--config", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["deterministic", "stochastic"]),
              default=None)
@click.option("--alpha", type=float, default=None, help="Risk parameter.")
@click.option("--delta", type=float, default=None, help="Estimation memory.")
@click.option("--b", type=float, default=None, help="Cyclicality exponent.")
@click.option("--xi", type=float, default=None, help="Redistribution rate.")
@click.option("--theta", type=float, default=None,
              help="Policy-rule aggressiveness (0 disables steering).")
@click.option("--no-policy", is_flag=True, default=False,
              help="Alias for --theta 0.")
@add_options(common_options)
def cmd_run_var(config, mode, alpha, delta, b, xi, theta, no_policy, seed,
                horizon, out, fmt, figures):
    """Simulate the variable-equity reduced model."""
    _check_config_path(config)
    if no_policy:
        theta = 0.0
    overrides = {"seed": seed, "T": horizon, "mode": mode, "alpha": alpha,
                 "delta": delta, "b": b, "xi": xi, "theta": theta}
    try:
        cfg = load_var_equity_config(config, overrides)
    except (ConfigError, LevcycleError) as exc:
        raise _fail(exc)
    out_dir = _prepare_out(out, "run-var")
    write_manifest(out_dir, "run-var", cfg.to_sections(), cfg.seed,
                   __version__, fmt, figures)
    from .var_equity import run_var_equity

    result = run_var_equity(cfg)
    write_table(out_dir, "series", result.columns(), result.rows(), fmt)
    if figures:
        from .figures import render_var_run

        render_var_run(result, out_dir)
    _report(result.status, result.n_rows, out_dir)


@main.command("sweep")
@click.argument("spec")
@click.option("--jobs", type=int, default=1, envvar="LEVCYCLE_JOBS",
              show_default=True, help="Worker processes (wall time only).")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_sweep(spec, jobs, seed, out, fmt, figures):
    """Run a grid sweep from a built-in name or a TOML spec file."""
    builtins = builtin_specs()
    try:
        if spec in builtins:
            sweep_spec = builtins[spec]
        elif Path(spec).is_file():
            sweep_spec = load_sweep_spec(spec)
        else:
            raise click.ClickException(
                f"{spec!r} is neither a built-in spec ({', '.join(sorted(builtins))}) "
                "nor a spec file")
        if seed is not None:
            sweep_spec.master_seed = seed
        sweep_spec.validate()
    except (ConfigError, LevcycleError) as exc:
        raise _fail(exc)
    out_dir = _prepare_out(out, "sweep")
    write_manifest(out_dir, "sweep", sweep_spec.to_dict(),
                   sweep_spec.master_seed, __version__, fmt, figures)
    write_sweep_sidecar(out_dir, sweep_spec.to_dict(), __version__)
    n_cells = (len(sweep_spec.axis_x.values)
               * (len(sweep_spec.axis_y.values) if sweep_spec.axis_y else 1))
    click.echo(f"sweeping {n_cells} cells x {sweep_spec.seeds} seeds", err=True)
    result = sweep(sweep_spec, jobs=jobs)
    write_table(out_dir, "heatmap", result.columns(), result.rows(), fmt)
    if figures:
        from .figures import render_sweep

        render_sweep(result, out_dir)
    click.echo(f"done: {n_cells} cells -> {out_dir}")


@main.command("list-specs")
def cmd_list_specs():
    """List the built-in sweep specifications."""
    for name, spec in sorted(builtin_specs().items()):
        ny = len(spec.axis_y.values) if spec.axis_y else 1
        grid = f"{len(spec.axis_x.values)}x{ny}"
        axes = spec.axis_x.name + (f",{spec.axis_y.name}" if spec.axis_y else "")
        click.echo(f"{name}: model={spec.model} grid={grid} ({axes}) "
                   f"seeds={spec.seeds} T={spec.T}")


@main.command("rerun")
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, envvar="LEVCYCLE_JOBS")
def cmd_rerun(manifest_path, out, jobs):
    """Reproduce a previous output directory from its manifest."""
    manifest = read_manifest(Path(manifest_path))
    sub = manifest.get("subcommand")
    fmt = manifest.get("format", "csv")
    figures = manifest.get("figures", True)
    config = manifest.get("config", {})
    out_dir = _prepare_out(out, f"rerun-{sub}")
    try:
        if sub == "run-full":
            cfg = load_full_config(data=config)
            write_manifest(out_dir, sub, cfg.to_sections(), cfg.seed,
                           __version__, fmt, figures)
            from .core_model import run_full

            result = run_full(cfg)
            write_table(out_dir, "series", result.columns(), result.rows(), fmt)
            if figures:
                from .figures import render_full_run
                render_full_run(result, out_dir)
            _report(result.status, result.n_rows, out_dir)
        elif sub == "run-2d":
            cfg = load_map2d_config(data=config)
            write_manifest(out_dir, sub, cfg.to_sections(), cfg.seed,
                           __version__, fmt, figures)
            from .reduced_2d import run_2d

            result = run_2d(cfg)
            write_table(out_dir, "series", result.columns(), result.rows(), fmt)
            if figures:
                from .figures import render_map2d_run
                render_map2d_run(result, out_dir)
            _report("ok", result.n_rows, out_dir)
        elif sub == "run-var":
            cfg = load_var_equity_config(data=config)
            write_manifest(out_dir, sub, cfg.to_sections(), cfg.seed,
                           __version__, fmt, figures)
            from .var_equity import run_var_equity

            result = run_var_equity(cfg)
            write_table(out_dir, "series", result.columns(), result.rows(), fmt)
            if figures:
                from .figures import render_var_run
                render_var_run(result, out_dir)
            _report(result.status, result.n_rows, out_dir)
        elif sub == "sweep":
            spec = sweep_spec_from_dict(_sweep_dict(config), source=manifest_path)
            write_manifest(out_dir, sub, spec.to_dict(), spec.master_seed,
                           __version__, fmt, figures)
            write_sweep_sidecar(out_dir, spec.to_dict(), __version__)
            result = sweep(spec, jobs=jobs)
            write_table(out_dir, "heatmap", result.columns(), result.rows(), fmt)
            if figures:
                from .figures import render_sweep
                render_sweep(result, out_dir)
            click.echo(f"done -> {out_dir}")
        else:
            raise click.ClickException(f"manifest has unknown subcommand {sub!r}")
    except (ConfigError, LevcycleError) as exc:
        raise _fail(exc)


def _sweep_dict(config: dict) -> dict:
    # manifest stores axis values explicitly; pass them through unchanged
    return config


def _report(status: str, rows: int, out_dir: Path) -> None:
    click.echo(f"{status}: {rows} rows -> {out_dir}")


if __name__ == "__main__":
    main()
