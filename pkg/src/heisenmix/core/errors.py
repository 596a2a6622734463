"""
Error Types Module

Exception hierarchy shared by the core modules and mapped to exit codes by the CLI.
"""

from typing import Any, Dict, Optional


class HeisenmixError(Exception):
    """Base class for all heisenmix failures"""


class DomainError(HeisenmixError, ValueError):
    """Mathematically invalid input (non-finite points, bad spectra, empty balls...)"""


class ConfigurationError(HeisenmixError):
    """Run configuration or quadrature setup that cannot be honoured"""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")

    def within(self, section: str) -> 'ConfigurationError':
        """Same error with the field name qualified by its config section"""
        return ConfigurationError(f"{section}.{self.field}", self.message)

    def to_dict(self) -> Dict[str, Any]:
        return {'error': 'configuration', 'field': self.field, 'message': self.message}


class NumericalFailure(HeisenmixError):
    """Iteration diverged, produced non-finite values, or could not reach its target"""

    def __init__(self, message: str, report: Optional[Any] = None):
        self.message = message
        self.report = report
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {'error': 'numerical', 'message': self.message}
        if self.report is not None:
            payload['report'] = self.report.to_dict() if hasattr(self.report, 'to_dict') else self.report
        return payload


class SearchExhausted(NumericalFailure):
    """find_C reached C_max without certifying the target"""
