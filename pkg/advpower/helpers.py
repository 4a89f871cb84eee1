# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

from hashlib import md5
import json
import os

import numpy as np


def _md5_int(text, hex_len=15):
    """Hash a string to a nonnegative integer using the leading hex digits of md5."""
    return int(md5(text.encode("utf-8")).hexdigest()[:hex_len], 16)


def _derive_seed(root, *labels):
    """Derive a labeled sub-seed from a root seed.

    Every random stream in the package is keyed by its label path, e.g.
    _derive_seed(seed, "sample", 12, "drop"), so results do not depend on the
    order in which streams are consumed.

    Arguments:
        root (int): root seed
        labels (str or int): label path identifying the stream

    Returns:
        (int): seed below 2**60
    """
    key = ":".join([str(int(root))] + [str(label) for label in labels])
    return _md5_int(key)


def _hash_dict(obj, hex_len=16):
    """Stable md5 hash of a JSON-serializable object."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return md5(text.encode("utf-8")).hexdigest()[:hex_len]


def _hash_arrays(*arrays, hex_len=16):
    """md5 hash over the raw bytes of one or more arrays."""
    h = md5()
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        h.update(str(arr.shape).encode("utf-8"))
        h.update(arr.tobytes())
    return h.hexdigest()[:hex_len]


def _format_values(values, digits):
    """Format a flat sequence of floats with a fixed number of significant digits."""
    return [f"{float(v):.{digits}g}" for v in np.ravel(values)]


def _quantize(values, digits):
    """Round an array to the given number of significant digits.

    The result is exactly what parsing _format_values(values, digits) returns, so
    quantized arrays survive a write and read bit-exactly.
    """
    values = np.asarray(values, dtype=np.float64)
    flat = [float(s) for s in _format_values(values, digits)]
    return np.array(flat, dtype=np.float64).reshape(values.shape)


def _code_version_hash():
    """md5 over the package's Python sources, in sorted path order."""
    root = os.path.dirname(os.path.abspath(__file__))
    h = md5()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in ("tests", "__pycache__"))
        for name in sorted(filenames):
            if name.endswith(".py"):
                path = os.path.join(dirpath, name)
                h.update(os.path.relpath(path, root).encode("utf-8"))
                with open(path, "rb") as f:
                    h.update(f.read())
    return h.hexdigest()[:16]
