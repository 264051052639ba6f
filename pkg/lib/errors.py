"""
Error hierarchy shared by the library, the services and the CLI.

Library code raises these; services turn them into (result, error) tuples;
the CLI prints them and exits with `exit_code`.
"""

from pathlib import Path
from typing import Optional


class FairshareError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class ConfigError(FairshareError):
    """Invalid experiment configuration."""

    exit_code = 2


class InvalidActionError(FairshareError):
    """An agent chose a band outside {0..N}."""

    def __init__(self, agent: int, action: int, num_bands: int):
        self.agent = agent
        self.action = action
        super().__init__(
            f"Agent {agent} chose invalid action {action} (valid: 0..{num_bands})"
        )


class ContractViolationError(FairshareError):
    """Inputs with inconsistent shapes."""


class NumericalFailureError(FairshareError):
    """Non-finite value produced inside the learning core."""

    exit_code = 3

    def __init__(self, layer: str, detail: str = "non-finite values"):
        self.layer = layer
        super().__init__(f"Numerical failure in {layer}: {detail}")


class InsufficientHistoryError(FairshareError):
    """A windowed metric was requested before the window is full."""


class VerificationError(FairshareError):
    """Stored artifacts disagree with a recomputation."""

    exit_code = 4

    def __init__(
        self, message: str, slot: Optional[int] = None, agent: Optional[int] = None
    ):
        self.slot = slot
        self.agent = agent
        location = []
        if slot is not None:
            location.append(f"slot {slot}")
        if agent is not None:
            location.append(f"agent {agent}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class ArtifactIOError(FairshareError):
    """Reading or writing a run artifact failed."""

    def __init__(self, path: Path, detail: str):
        self.path = path
        super().__init__(f"{path}: {detail}")


class CatalogError(FairshareError):
    """The run catalog could not be read or written, or has no such run."""


__all__ = [
    "FairshareError",
    "ConfigError",
    "InvalidActionError",
    "ContractViolationError",
    "NumericalFailureError",
    "InsufficientHistoryError",
    "VerificationError",
    "ArtifactIOError",
    "CatalogError",
]
