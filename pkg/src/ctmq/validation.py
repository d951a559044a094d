"""Input validation and coercion for the estimator API and the CLI.

Complexity estimators consume binary strings.  Callers hold them as
python strings, bytes, sequences of 0/1 integers or numpy arrays; these
helpers normalise all of those forms to canonical ``"0101..."`` strings
with early, specific errors.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def as_bit_string(value, length: int | None = None) -> str:
    """Coerce one sample to a canonical binary string."""
    if isinstance(value, str):
        s = value
    elif isinstance(value, bytes):
        s = value.decode("ascii")
    elif isinstance(value, (Sequence, np.ndarray)):
        arr = np.asarray(value)
        if arr.ndim != 1:
            raise ValueError(f"expected a 1-d bit sequence, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("bit sequences may only contain 0 and 1")
        s = "".join("1" if b else "0" for b in arr.tolist())
    else:
        raise TypeError(f"cannot interpret {type(value).__name__} as a bit string")
    if set(s) - {"0", "1"}:
        raise ValueError(f"{s!r} is not a binary string")
    if length is not None and len(s) != length:
        raise ValueError(f"expected a string of length {length}, got {len(s)}")
    return s


def as_bit_strings(X, length: int | None = None) -> list[str]:
    """Coerce a collection of samples to canonical binary strings.

    Accepts an iterable of strings/bit sequences or a 2-d 0/1 array whose
    rows are the samples.  A bare string is rejected: one sample is almost
    never an iterable of its characters on purpose.
    """
    if isinstance(X, (str, bytes)):
        raise TypeError("pass a list of strings; a single string is one sample")
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [as_bit_string(row, length) for row in X]
    if isinstance(X, Iterable):
        return [as_bit_string(x, length) for x in X]
    raise TypeError(f"cannot interpret {type(X).__name__} as a batch of bit strings")
