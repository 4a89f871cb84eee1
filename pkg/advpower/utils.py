# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np


# Define custom errors for external checks
class InvalidConfigError(ValueError):
    pass


class DataError(Exception):
    pass


class InvalidDatasetError(DataError):
    pass


class EmptySplitError(DataError):
    pass


class DataGenerationError(DataError):
    pass


class CheckpointError(DataError):
    pass


class MissingInputError(DataError):
    pass


class NumericalError(ArithmeticError):
    pass


class InfeasibleInstanceError(NumericalError):
    pass


class DegenerateDrawError(NumericalError):
    pass


class TrainingDivergedError(NumericalError):
    pass


class BudgetViolationError(AssertionError):
    pass


def check_unknown_keys(section, data, allowed):
    """Reject keys of a config mapping that are not fields of its section.

    Arguments:
        section (str): name of the config section, used in the message
        data (dict): user-provided mapping
        allowed (iterable): accepted key names

    Returns:
        Raises an InvalidConfigError on the first unknown key
    """
    if not isinstance(data, dict):
        raise InvalidConfigError(
            f"Config section '{section}' must be a mapping, got {type(data).__name__}."
        )
    unknown = sorted(set(data) - set(allowed))
    if len(unknown) > 0:
        raise InvalidConfigError(
            f"Unknown key(s) in config section '{section}': {unknown}. Valid keys: {sorted(allowed)}"
        )


def check_positive(name, value, allow_zero=False):
    if allow_zero:
        if not value >= 0:
            raise InvalidConfigError(
                f"Value passed to '{name}' must be nonnegative, got {value}."
            )
    elif not value > 0:
        raise InvalidConfigError(
            f"Value passed to '{name}' must be positive, got {value}."
        )


def check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"Value passed to '{name}' must be finite.")


def verify_array_shape(name, arr, shape):
    """Check an array against an expected shape. None entries match any length."""
    arr = np.asarray(arr)
    if arr.ndim != len(shape) or any(
        s is not None and a != s for a, s in zip(arr.shape, shape)
    ):
        raise ValueError(
            f"Value passed to '{name}' has shape {arr.shape}, expected {tuple(shape)}."
        )


def validate_power_records(powers, sum_powers, p_max, atol=1e-9):
    """Check the invariants of stored power labels.

    Arguments:
        powers (ndarray): (N, L, K) per-UE powers in mW
        sum_powers (ndarray): (N, L) stored per-cell sums in mW
        p_max (float): per-cell budget in mW
        atol (float): feasibility slack in mW

    Returns:
        Raises an InvalidDatasetError naming the first offending record
    """
    powers = np.asarray(powers)
    sum_powers = np.asarray(sum_powers)
    if np.any(powers < 0):
        n = int(np.argwhere(powers < 0)[0][0])
        raise InvalidDatasetError(f"Record {n} has a negative power label.")
    if np.any(powers.sum(axis=-1) > p_max + atol):
        n = int(np.argwhere(powers.sum(axis=-1) > p_max + atol)[0][0])
        raise InvalidDatasetError(
            f"Record {n} violates the per-cell budget of {p_max} mW."
        )
    if not np.array_equal(sum_powers, powers.sum(axis=-1)):
        n = int(np.argwhere(sum_powers != powers.sum(axis=-1))[0][0])
        raise InvalidDatasetError(
            f"Record {n} stores sums that differ from the sum of its powers."
        )
