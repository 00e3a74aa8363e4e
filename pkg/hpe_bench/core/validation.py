"""Input validation utilities for HPE Bench."""

from __future__ import annotations

import math

import numpy as np

from hpe_bench.core.exceptions import ValidationError


def validate_positive(value: float, name: str) -> bool:
    """Validate that a scalar is finite and strictly positive.

    Args:
        value: Scalar to validate.
        name: Argument name used in the error message.

    Returns:
        True if valid.

    Raises:
        ValidationError: If value is not a finite positive number.
    """
    if not isinstance(value, (int, float, np.floating, np.integer)):
        raise ValidationError(f"{name} must be a number")

    if not math.isfinite(float(value)) or value <= 0:
        raise ValidationError(f"{name} must be a finite positive number, got {value}")

    return True


def validate_nonnegative(value: float, name: str) -> bool:
    """Validate that a scalar is finite and nonnegative.

    Args:
        value: Scalar to validate.
        name: Argument name used in the error message.

    Returns:
        True if valid.

    Raises:
        ValidationError: If value is negative or not finite.
    """
    if not isinstance(value, (int, float, np.floating, np.integer)):
        raise ValidationError(f"{name} must be a number")

    if not math.isfinite(float(value)) or value < 0:
        raise ValidationError(f"{name} must be finite and >= 0, got {value}")

    return True


def validate_open_unit(value: float, name: str) -> bool:
    """Validate that a scalar lies in the open interval (0, 1).

    Args:
        value: Scalar to validate.
        name: Argument name used in the error message.

    Returns:
        True if valid.

    Raises:
        ValidationError: If value is outside (0, 1).
    """
    if not isinstance(value, (int, float, np.floating)):
        raise ValidationError(f"{name} must be a number")

    if not 0.0 < value < 1.0:
        raise ValidationError(f"{name} must be in (0, 1), got {value}")

    return True


def validate_count(value: int, name: str, minimum: int = 1) -> bool:
    """Validate an integer count against a lower limit.

    Args:
        value: Integer to validate.
        name: Argument name used in the error message.
        minimum: Smallest admissible value.

    Returns:
        True if valid.

    Raises:
        ValidationError: If value is not an integer or is below minimum.
    """
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer")

    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")

    return True


def validate_dimension(x: np.ndarray, dimension: int, name: str = "x") -> bool:
    """Validate that a point is a flat vector of the expected length.

    Args:
        x: Point to validate.
        dimension: Expected number of entries.
        name: Argument name used in the error message.

    Returns:
        True if valid.

    Raises:
        ValidationError: If the shape does not match.
    """
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] != dimension:
        raise ValidationError(
            f"{name} must have shape ({dimension},), got {arr.shape}"
        )

    return True
