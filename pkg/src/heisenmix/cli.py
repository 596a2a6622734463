#!/usr/bin/env python3
"""
heisenmix - Mixed local/nonlocal operators on the Heisenberg group

Evaluate L u = alpha M+(D^2_H u) - beta (-Delta_H)^s u, solve Dirichlet problems,
search for barriers, measure oscillation decay and run the property suites.
Every command reads one run configuration and writes CSV/JSON results that embed it.
"""

import importlib.metadata
import os
from contextlib import contextmanager
from typing import Any, Dict, List, Optional

import numpy as np
import typer

from .core.barrier import barrier_decomposition, find_C, normalized_ball
from .core.configuration import Config, load_project_config
from .core.errors import ConfigurationError, DomainError, NumericalFailure
from .core.fields import FieldWithExterior
from .core.fracsublap import frac_sublap_many, tail_bound
from .core.functions import FUNCTION_SPECIFICATIONS, get_function_choices, get_function_description, parse_function
from .core.hgroup import GroupPoint
from .core.mixedop import local_term
from .core.output_management import (
    coordinate_columns,
    create_output_directory,
    field_rows,
    get_next_available_output_dir,
    json_line,
    write_csv,
    write_json,
)
from .core.probes import get_suite_choices, run_suites
from .core.regularity import contraction_rate, dyadic_profile, fit_holder
from .core.reporting import (
    console,
    display_barrier,
    display_bench,
    display_eval,
    display_functions,
    display_profile,
    display_solve_report,
    fail,
    format_number,
    progress_task,
    warn,
)
from .core.signal_handling import cleanup_on_exit, register_signal_handler, set_current_run
from .core.solver import check_viscosity_inequality, solve_dirichlet

app = typer.Typer(
    name="heisenmix",
    help="heisenmix - mixed local/nonlocal operators on the Heisenberg group",
    no_args_is_help=True,
    rich_markup_mode="rich"
)

EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Run configuration (JSON or YAML)")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory (default: next free runs, runs1, ...)")
THREADS_OPTION = typer.Option(None, "--threads", "-j", help="Worker threads; changes speed only, never results")


def _emit_error(payload: Dict[str, Any], message: str, code: int):
    typer.echo(json_line(payload))
    fail(message)
    raise typer.Exit(code)


@contextmanager
def handle_errors():
    """Map core failures to exit codes with a JSON description on stdout"""
    try:
        yield
    except ConfigurationError as e:
        _emit_error(e.to_dict(), f"Configuration error in {e.field}: {e.message}", EXIT_CONFIGURATION)
    except NumericalFailure as e:
        _emit_error(e.to_dict(), f"Numerical failure: {e.message}", EXIT_NUMERICAL)
    except DomainError as e:
        _emit_error({'error': 'domain', 'message': str(e)}, f"Invalid input: {e}", EXIT_CONFIGURATION)
    finally:
        cleanup_on_exit()


def _load(config_path: Optional[str], threads: Optional[int]) -> Config:
    config = load_project_config(config_path)
    if threads is not None:
        config.config['threads'] = threads
    config.validate()
    return config


def _prepare_output(config: Config, out: Optional[str]) -> str:
    output_dir = out or get_next_available_output_dir(config.get_output_dir())
    create_output_directory(output_dir)
    set_current_run(output_dir)
    return output_dir


def _written(paths: List[str]) -> None:
    for path in paths:
        console.print(f"[green]✅ Wrote {path}[/green]")


@app.command("eval")
def eval_command(
    config_path: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    threads: Optional[int] = THREADS_OPTION,
    seed: int = typer.Option(0, "--seed", help="Seed for eval.random_points"),
):
    """Evaluate L u at the configured points for a registry function"""
    with handle_errors():
        config = _load(config_path, threads)
        params = config.params()
        spec = config.quadrature()
        u = parse_function(config.get('eval.function'), 'eval.function')
        if u.sup_abs is None:
            raise ConfigurationError('eval.function', f"{u.name} is unbounded; the nonlocal term needs a bounded function")
        coords = config.eval_points(params.N, seed)
        output_dir = _prepare_output(config, out)

        with progress_task(f"Evaluating L at {coords.shape[0]} point(s)"):
            frac = frac_sublap_many(u, coords, params, spec, threads=config.get_threads())
            local = local_term(u, coords, params)
        values = local - params.beta * frac
        R = spec.resolved_tail_radius(params)
        bounds = np.array([tail_bound(R, params, u.sup_abs + abs(v)) for v in u.values(coords)])

        rows = [{'point': c.tolist(), 'L': float(L), 'local': float(loc), 'frac': float(fr), 'tail_bound': float(tb)}
                for c, L, loc, fr, tb in zip(coords, values, local, frac, bounds)]
        display_eval(rows)
        resolved = config.resolved()
        path = write_csv(
            os.path.join(output_dir, "eval.csv"),
            coordinate_columns(params.N) + ['L', 'local', 'frac_sublap', 'tail_bound'],
            np.column_stack([coords, values, local, frac, bounds]),
            resolved,
        )
        _written([path])


@app.command()
def solve(
    config_path: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    threads: Optional[int] = THREADS_OPTION,
    check: bool = typer.Option(False, "--check", help="Re-evaluate L u - f pointwise and test both viscosity inequalities"),
):
    """Solve L u = f in the gauge ball with u = g outside"""
    with handle_errors():
        config = _load(config_path, threads)
        problem = config.problem()
        grid = config.grid(problem.omega)
        settings = config.solver_settings()
        spec = config.solver_quadrature()
        n_threads = config.get_threads()
        output_dir = _prepare_output(config, out)
        resolved = config.resolved()

        if not grid.is_parabolic:
            console.print(f"[dim]Grid h_t / h_xy^2 = {grid.parabolic_ratio:.3g}[/dim]")
        with progress_task(f"Solving on {grid.interior.size} interior nodes ({settings['method']})") as update:
            u, report = solve_dirichlet(problem, grid, tol=settings['tol'], max_iter=settings['max_iter'],
                                        spec=spec, method=settings['method'], threads=n_threads,
                                        progress=update)
        display_solve_report(report)

        N = problem.params.N
        paths = [write_csv(os.path.join(output_dir, "solution.csv"), coordinate_columns(N) + ['u'],
                           field_rows(u), resolved)]
        payload: Dict[str, Any] = {'report': report, 'grid': grid.to_dict(), 'history': report.history}
        if check:
            with progress_task("Checking viscosity inequalities"):
                sub = check_viscosity_inequality(u, problem.f, problem.params, spec, 'sub', n_threads)
                sup = check_viscosity_inequality(u, problem.f, problem.params, spec, 'super', n_threads)
            payload['viscosity'] = {'sub': sub, 'super': sup}
            console.print(f"📊 worst violations: sub {sub.worst:.3e}, super {sup.worst:.3e}")
        paths.append(write_json(os.path.join(output_dir, "report.json"), payload, resolved))
        _written(paths)

        if not report.converged:
            raise NumericalFailure(f"solver stopped at {report.iterations} iterations with residual "
                                   f"{report.residual:.3g} > {settings['tol']:g}", report=report)


@app.command()
def barrier(
    config_path: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    threads: Optional[int] = THREADS_OPTION,
):
    """Find C with L phi_C <= target on the normalized ball and decompose L phi_C"""
    with handle_errors():
        config = _load(config_path, threads)
        params = config.params()
        spec = config.quadrature()
        settings = config.barrier_settings()
        omega = normalized_ball(settings['R'], params.N)
        point = omega.center if settings['point'] is None else GroupPoint.from_array(settings['point'])
        if point.N != params.N:
            raise ConfigurationError('barrier.point', f"expected {2 * params.N + 1} coordinates")
        output_dir = _prepare_output(config, out)

        with progress_task("Searching for the barrier constant") as update:
            certificate = find_C(params, omega, spec, target=settings['target'], C0=settings['C0'],
                                 C_max=settings['C_max'], bisection_steps=settings['bisection_steps'],
                                 threads=config.get_threads(), progress=update)
        with progress_task("Decomposing L phi_C"):
            decomposition = barrier_decomposition(certificate.C, point, params, spec, radius=omega.radius)
        display_barrier(certificate, decomposition)

        payload = {
            'domain': {'center': omega.center.to_list(), 'radius': omega.radius},
            'certificate': certificate,
            'decomposition': decomposition,
        }
        _written([write_json(os.path.join(output_dir, "barrier.json"), payload, config.resolved())])


@app.command()
def regularity(
    config_path: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    threads: Optional[int] = THREADS_OPTION,
):
    """Dyadic oscillation profile, Holder fit and contraction rate of a field"""
    with handle_errors():
        config = _load(config_path, threads)
        params = config.params()
        settings = config.regularity_settings(params.N)
        output_dir = _prepare_output(config, out)

        if settings['source'] == 'solve':
            problem = config.problem()
            grid = config.grid(problem.omega)
            solver = config.solver_settings()
            with progress_task("Solving for the profiled field") as update:
                u, report = solve_dirichlet(problem, grid, tol=solver['tol'], max_iter=solver['max_iter'],
                                            spec=config.solver_quadrature(), method=solver['method'],
                                            threads=config.get_threads(), progress=update)
            if not report.converged:
                warn(f"solver stopped with residual {report.residual:.3g}; profiling the last iterate")
        else:
            fn = parse_function(settings['source'], 'regularity.source')
            grid = config.grid(config.domain(params))
            u = FieldWithExterior.from_functions(grid, fn, fn, name=fn.name)

        profile = dyadic_profile(u, settings['k_max'], settings['radius'], settings['center'])
        fit = rate = None
        try:
            fit = fit_holder(profile, settings['min_nodes'])
        except DomainError as e:
            warn(f"no Hölder fit: {e}")
        try:
            rate = contraction_rate(profile)
        except DomainError as e:
            warn(f"no contraction rate: {e}")
        display_profile(profile, fit, rate)

        resolved = config.resolved()
        paths = [
            write_csv(os.path.join(output_dir, "profile.csv"), ['k', 'radius', 'osc', 'nodes'],
                      profile.rows(), resolved),
            write_json(os.path.join(output_dir, "fit.json"),
                       {'profile': profile, 'fit': fit, 'contraction': rate}, resolved),
        ]
        _written(paths)


@app.command()
def bench(
    config_path: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    threads: Optional[int] = THREADS_OPTION,
    seed: int = typer.Option(0, "--seed", help="Seed for the randomized suites"),
    suite: Optional[List[str]] = typer.Option(None, "--suite", "-s",
                                              help=f"Suite to run (repeatable): {', '.join(get_suite_choices())}"),
):
    """Run the randomized property suites"""
    with handle_errors():
        config = _load(config_path, threads)
        if suite:
            config.update({'bench': {'suites': list(suite)}})
        names = config.bench_suites()
        params = config.params()
        output_dir = _prepare_output(config, out)

        with progress_task(f"Running {len(names)} suite(s)", total=len(names)) as update:
            results = run_suites(names, seed, params, config.quadrature(), progress=update)
        display_bench(results)

        payload = {'seed': seed, 'results': results}
        _written([write_json(os.path.join(output_dir, "bench.json"), payload, config.resolved())])

        failed = [r.name for r in results if not r.passed]
        if failed:
            _emit_error({'error': 'probe', 'failed': failed}, f"Suites failed: {', '.join(failed)}", 1)


@app.command()
def init(
    path: str = typer.Argument("heisenmix.yaml", help="Where to write the configuration"),
    config_path: Optional[str] = CONFIG_OPTION,
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file"),
):
    """Write a run configuration with every key filled in (defaults merged with --config)"""
    with handle_errors():
        config = _load(config_path, None)
        if os.path.exists(path) and not force:
            raise ConfigurationError('path', f"{path} already exists; pass --force to overwrite")
        config.save(path)
        _written([path])
        console.print(f"\n[dim]💡 Run 'heisenmix solve --config {path}' to use it[/dim]")


@app.command()
def functions():
    """List the closed-form functions a configuration can name"""
    rows = []
    for name in get_function_choices():
        spec = FUNCTION_SPECIFICATIONS[name]
        usage = name if spec.parameter is None else f"{name}:{spec.parameter}"
        default = "" if spec.default is None else format_number(spec.default)
        rows.append((usage, default, get_function_description(name)))
    display_functions(rows)


@app.command()
def version():
    """Show version information"""
    try:
        package_version = importlib.metadata.version('heisenmix')
    except importlib.metadata.PackageNotFoundError:
        package_version = 'unknown'

    console.print(f"[bold blue]heisenmix v{package_version}[/bold blue]")
    console.print("Mixed local/nonlocal operators on the Heisenberg group")


@app.callback()
def main():
    """heisenmix - mixed local/nonlocal operators on the Heisenberg group

    Run 'heisenmix solve --config run.json' to solve a Dirichlet problem.
    """
    register_signal_handler()


if __name__ == "__main__":
    app()
