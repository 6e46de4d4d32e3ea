"""Rich console output formatting."""

from collections.abc import Sequence
from pathlib import Path
from typing import TYPE_CHECKING

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

if TYPE_CHECKING:
    from src.models.records import RunSummary
    from src.tensor.gradcheck import GradCheckResult
    from src.training.compare import ComparisonReport


class RichOutput:
    """Rich console output formatting."""

    def __init__(self, console: Console | None = None) -> None:
        """Initialize with Rich console.

        Args:
            console: Rich Console instance.
        """
        self.console = console or Console()

    def print_gradcheck(self, results: Sequence["GradCheckResult"]) -> None:
        """Display one row per checked operation with its maximum relative error."""
        table = Table(title="Gradient Check")
        table.add_column("Operation", style="cyan")
        table.add_column("Max rel. error", justify="right")
        table.add_column("Tolerance", justify="right", style="dim")
        table.add_column("Status")

        for result in results:
            status = "[green]PASS[/green]" if result.passed else "[bold red]FAIL[/bold red]"
            table.add_row(
                result.name,
                f"{result.max_relative_error:.3e}",
                f"{result.tolerance:.0e}",
                status,
            )
        self.console.print(table)

    def print_run_summary(self, summary: "RunSummary", out_dir: Path | None = None) -> None:
        """Display the outcome of a training run.

        Args:
            summary: Run summary.
            out_dir: Where the run's files were written.
        """
        from src.utils.hashing import short_hash

        train = self._format_accuracy(summary.final_train_accuracy)
        panel_content = f"""
[bold]Method:[/bold] {summary.method}
[bold]Seed:[/bold] {summary.seed}
[bold]Epochs / steps:[/bold] {summary.epochs} / {summary.steps}
[bold]Config:[/bold] {short_hash(summary.config_hash) or "-"}

[bold]Final test accuracy:[/bold] [green]{self._format_accuracy(summary.final_test_accuracy)}[/green]
[bold]Final train accuracy:[/bold] {train}
[bold]Best test accuracy:[/bold] {self._format_accuracy(summary.best_test_accuracy)} [dim](epoch {summary.best_epoch})[/dim]
"""
        if out_dir is not None:
            panel_content += f"\n[dim]Output: {out_dir}[/dim]\n"
        self.console.print(Panel(panel_content, title="Training Complete"))

    def print_comparison(self, report: "ComparisonReport") -> None:
        """Display per-method mean and spread, then the ordering verdict.

        Args:
            report: Finished comparison.
        """
        table = Table(title=f"Test accuracy over seeds {', '.join(map(str, report.seeds))}")
        table.add_column("Method", style="cyan")
        table.add_column("Mean", justify="right", style="green")
        table.add_column("Std", justify="right")
        table.add_column("Runs", justify="right")
        table.add_column("Failed", justify="right", style="red")

        for method, stats in report.stats().items():
            mean = self._format_accuracy(stats.mean)
            std = "-" if stats.std is None else f"{stats.std * 100:.2f}"
            table.add_row(method, mean, std, str(len(stats.accuracies)), str(stats.failures))
        self.console.print(table)

        failed = [c for c in report.cells if not c.succeeded]
        if failed:
            self.console.print("\n[bold red]Failed runs:[/bold red]")
            for cell in failed[:10]:
                self.console.print(f"  - {cell.method} seed {cell.seed}: {cell.error}")

        checks = report.ordering()
        if not checks:
            self.console.print("\n[dim]Too few methods with results for an ordering verdict[/dim]")
            return
        self.console.print("\n[bold]Ordering:[/bold]")
        for check in checks:
            mark = "[green]ok[/green]" if check.holds else "[red]violated[/red]"
            self.console.print(f"  {check.upper} {check.relation} {check.lower}: {mark}")
        if report.verdict:
            self.print_success("Expected ordering holds")
        else:
            self.print_warning("Expected ordering does not hold")

    def print_issues(self, issues: Sequence[str]) -> None:
        """Display configuration issues as a list."""
        self.console.print("[bold red]Configuration issues:[/bold red]")
        for issue in issues:
            self.console.print(f"  - {issue}")

    def print_error(self, message: str, details: str | None = None) -> None:
        """Display error message.

        Args:
            message: Error message.
            details: Optional additional details.
        """
        self.console.print(f"[bold red]Error:[/bold red] {message}")
        if details:
            self.console.print(f"[dim]{details}[/dim]")

    def print_success(self, message: str) -> None:
        """Display success message."""
        self.console.print(f"[bold green]Success:[/bold green] {message}")

    def print_warning(self, message: str) -> None:
        """Display warning message."""
        self.console.print(f"[bold yellow]Warning:[/bold yellow] {message}")

    def create_progress_bar(self) -> Progress:
        """Create a Rich progress bar.

        Returns:
            Progress instance.
        """
        # ASCII spinner: the default braille frames fail on cp1252 consoles
        return Progress(
            SpinnerColumn(spinner_name="line"),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            TimeElapsedColumn(),
            console=self.console,
        )

    def _format_accuracy(self, accuracy: float | None) -> str:
        """Accuracy as a percentage, or '-' when absent."""
        if accuracy is None:
            return "-"
        return f"{accuracy * 100:.2f}%"
