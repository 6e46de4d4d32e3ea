"""Plain records shared by training, persistence and the CLI."""

from src.models.records import CompareCell, MetricsRecord, RunSummary

__all__ = ["CompareCell", "MetricsRecord", "RunSummary"]
