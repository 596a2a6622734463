"""
Signal Handling Module

Ctrl+C handling for long solves and searches: stop the active progress display,
report which run was interrupted, and exit without a traceback.
"""

import signal
import sys
from typing import Optional

from rich.console import Console

# Global state for the interrupt handler
current_progress = None
current_run: Optional[str] = None

INTERRUPT_EXIT_CODE = 130


def signal_handler(signum, frame):
    """Handle keyboard interrupts gracefully"""
    console = Console(stderr=True)
    console.print("\n[yellow]⚠️  Interrupt received, stopping...[/yellow]")

    if current_progress is not None:
        try:
            current_progress.stop()
        except Exception:
            pass

    if current_run:
        console.print(f"[dim]Partial output may remain in {current_run}[/dim]")
    console.print("[red]❌ Run cancelled by user[/red]")
    sys.exit(INTERRUPT_EXIT_CODE)


def register_signal_handler():
    """Register the handler for SIGINT"""
    signal.signal(signal.SIGINT, signal_handler)


def set_current_progress(progress_obj):
    global current_progress
    current_progress = progress_obj


def clear_current_progress():
    global current_progress
    current_progress = None


def set_current_run(run_dir: Optional[str]):
    """Remember the output directory being written"""
    global current_run
    current_run = run_dir


def cleanup_on_exit():
    clear_current_progress()
    set_current_run(None)
