"""Command-line interface and JSON file formats."""
from .io import ParseError, Report, ValidationError, parse_instance, parse_report
from .main import main, run

__all__ = ["ParseError", "Report", "ValidationError", "main", "parse_instance", "parse_report",
           "run"]
