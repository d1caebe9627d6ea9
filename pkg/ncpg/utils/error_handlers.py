"""
Error types shared across the ncpg package.

Every failure raised by the numerical modules derives from NcpgError so the
verify pipeline can tell a broken identity (a failed check) from a broken
input (an error row) and the CLI can map configuration problems to exit code 2.
"""

from typing import Type

import numpy as np


class NcpgError(Exception):
    """Base class for all errors raised by ncpg."""


class InvalidInputError(NcpgError):
    """Input has the wrong shape, range or contents."""


class SingularityError(NcpgError):
    """An operator that must be invertible is numerically singular."""


class ResourceError(NcpgError):
    """A requested Fock space exceeds the dense-matrix cap."""


class AdaptednessError(NcpgError):
    """A process value is not measurable at the start of its interval."""


class UnsupportedExponentError(NcpgError):
    """The requested exponent is outside the range a norm is defined for."""


class ParityError(NcpgError):
    """An operator does not have the parity the calculus requires."""


class NovikovError(NcpgError):
    """A stochastic exponential series failed to converge within its cutoff."""


class DivergenceError(NcpgError):
    """A fixed-point iteration did not converge."""


class InvertibilityError(NcpgError):
    """A density or pairing matrix cannot be inverted."""


class AliasingError(NcpgError):
    """A lattice FFT grid is too small for the requested cutoff."""


class ConfigError(NcpgError):
    """A run configuration is malformed."""


def require(condition: bool, error_cls: Type[NcpgError], message: str) -> None:
    """
    Raises `error_cls(message)` unless `condition` holds.

    Args:
        condition: The precondition to check.
        error_cls: The NcpgError subclass to raise.
        message: Message naming the offending input.
    """
    if not condition:
        raise error_cls(message)


def ensure_finite(values, what: str) -> np.ndarray:
    """
    Converts `values` to a numpy array and rejects NaN or infinite entries.

    Args:
        values: Anything numpy can turn into an array.
        what: Name of the input, used in the error message.

    Returns:
        The array, unchanged apart from the conversion.
    """
    array = np.asarray(values)
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{what} contains non-finite entries")
    return array
