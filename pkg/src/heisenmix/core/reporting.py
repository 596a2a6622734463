"""
Reporting Module

Console output for heisenmix runs: status lines, result tables and progress spinners.
Library code only calls `warn`; everything else is used by the CLI.
"""

from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Tuple

from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import signal_handling


console = Console()
err_console = Console(stderr=True)


def warn(message: str) -> None:
    err_console.print(f"[yellow]⚠️  {message}[/yellow]")


def fail(message: str) -> None:
    err_console.print(f"[red]❌ {message}[/red]")


def format_number(value: float) -> str:
    """Compact display of a float; files keep full precision"""
    if value == 0:
        return "0"
    magnitude = abs(value)
    if magnitude >= 1e4 or magnitude < 1e-3:
        return f"{value:.4e}"
    return f"{value:.6g}"


@contextmanager
def progress_task(description: str, total: Optional[float] = None) -> Iterator:
    """Spinner with elapsed time; yields a callback (step, value) for the core loops"""
    with Progress(
        SpinnerColumn(),
        TextColumn(f"[bold blue]{description}"),
        TextColumn("[dim]{task.fields[status]}"),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
    ) as progress:
        signal_handling.set_current_progress(progress)
        task = progress.add_task(description, total=total, status="")

        def update(step: int, value: float) -> None:
            progress.update(task, status=f"step {step}  value {format_number(value)}")

        try:
            yield update
        finally:
            signal_handling.clear_current_progress()


def key_value_table(title: str, rows: Dict[str, Any]) -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green", justify="right")
    for key, value in rows.items():
        table.add_row(key, format_number(value) if isinstance(value, float) else str(value))
    return table


def display_eval(rows: List[Dict[str, Any]], out: Console = console) -> None:
    table = Table(title="Operator values", show_header=True, header_style="bold magenta")
    for column in ('point', 'L u', 'local', '(-Δ_H)^s u', 'tail bound'):
        table.add_column(column, justify="right" if column != 'point' else "left")
    for row in rows:
        table.add_row(
            ", ".join(format_number(v) for v in row['point']),
            format_number(row['L']),
            format_number(row['local']),
            format_number(row['frac']),
            format_number(row['tail_bound']),
        )
    out.print(table)


def display_solve_report(report, out: Console = console) -> None:
    status = "[green]✅ converged[/green]" if report.converged else f"[yellow]⚠️  {report.status}[/yellow]"
    out.print(key_value_table("Solve report", {
        'method': report.method,
        'iterations': report.iterations,
        'residual (sup)': float(report.residual),
        'tolerance': float(report.tolerance),
        'damping τ': float(report.damping),
    }))
    out.print(status)


def display_barrier(certificate, decomposition=None, out: Console = console) -> None:
    colour = "green" if certificate.satisfied else "red"
    out.print(Panel(
        f"C = [bold]{format_number(certificate.C)}[/bold]\n"
        f"certified max of L φ_C = [{colour}]{format_number(certificate.certified_max)}[/{colour}]"
        f" (target {format_number(certificate.target)})\n"
        f"lattice: {certificate.lattice_points} points, h = {format_number(certificate.spacing)}, "
        f"modulus ≈ {format_number(certificate.modulus)}",
        title="🧱 Barrier",
        border_style=colour,
    ))
    if decomposition is not None:
        table = Table(title="Decomposition of L φ_C", show_header=True, header_style="bold magenta")
        table.add_column("Term", style="cyan")
        table.add_column("Value", justify="right")
        for name, value in decomposition.rows():
            table.add_row(name, format_number(value))
        out.print(table)
        out.print(f"[dim]|total - direct| = {format_number(decomposition.discrepancy)}[/dim]")
        violations = decomposition.sign_violations
        if violations:
            listed = ", ".join(f"{name} annulus {k}: {format_number(v)}" for name, k, v in violations)
            out.print(f"[yellow]⚠️  positive T1/T2 partials: {listed}[/yellow]")
        else:
            out.print("[dim]T1 and T2 partials are non-positive on every annulus[/dim]")


def display_profile(profile, fit=None, rate=None, out: Console = console) -> None:
    table = Table(title="Dyadic oscillation profile", show_header=True, header_style="bold magenta")
    for column in ('k', 'radius', 'osc', 'nodes'):
        table.add_column(column, justify="right")
    for entry in profile.entries:
        table.add_row(str(entry.k), format_number(entry.radius), format_number(entry.osc), str(entry.nodes))
    out.print(table)
    if fit is not None:
        if fit.constant:
            out.print("[dim]📊 constant field: no Hölder fit[/dim]")
        else:
            out.print(f"📊 γ_fit = [bold]{fit.gamma:.4f}[/bold], C_fit = {format_number(fit.C_fit)}")
    if rate is not None:
        out.print(f"📊 worst contraction ratio {rate.worst_ratio:.4f} (δ = {rate.delta:.4f})")


def display_bench(results, out: Console = console) -> None:
    table = Table(title="Property suites", show_header=True, header_style="bold magenta")
    table.add_column("Suite", style="cyan")
    table.add_column("Result")
    table.add_column("Cases", justify="right")
    table.add_column("Worst error", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Time (s)", justify="right")
    for r in results:
        table.add_row(
            r.name,
            "[green]pass[/green]" if r.passed else "[red]FAIL[/red]",
            str(r.cases),
            format_number(r.worst),
            format_number(r.tolerance),
            f"{r.seconds:.2f}",
        )
    out.print(table)


def display_functions(rows: List[Tuple[str, str, str]], out: Console = console) -> None:
    table = Table(title="Closed-form functions", show_header=True, header_style="bold magenta")
    table.add_column("Name", style="cyan")
    table.add_column("Default", justify="right")
    table.add_column("Description", style="green")
    for usage, default, description in rows:
        table.add_row(usage, default, description)
    out.print(table)
    out.print("\n[dim]Name a function as 'name' or 'name:value', e.g. problem.g: tanh_x:2[/dim]")
