"""Input validation helpers shared by every module.

The checks follow scikit-learn conventions: they return a cleaned float64
array and raise ``ValueError`` on contract violations.
"""

import numpy as np

NEG_TOL = -1e-12
SUM_TOL = 1e-9


def check_distribution(p, *, min_classes=2, name="p"):
    """Validate a probability vector and return it as a float64 array."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_classes:
        raise ValueError(f"{name} needs at least {min_classes} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < NEG_TOL:
        raise ValueError(f"{name} has a negative entry ({arr.min():.3g})")
    total = arr.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"{name} must sum to 1 (sums to {total!r})")
    return arr


def check_distributions(P, *, name="P"):
    """Batch version of :func:`check_distribution` for an (n, K) array."""
    arr = np.asarray(P, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError(f"{name} must have shape (n, K) with K >= 2, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.size and arr.min() < NEG_TOL:
        raise ValueError(f"{name} has a negative entry")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > SUM_TOL):
        raise ValueError(f"every row of {name} must sum to 1")
    return arr


def check_mode(k, n_classes):
    """Validate a 1-based mode index against the number of classes."""
    if isinstance(k, (bool, np.bool_)) or int(k) != k:
        raise ValueError(f"mode index must be an integer, got {k!r}")
    k = int(k)
    if not 1 <= k <= n_classes:
        raise ValueError(f"mode index {k} outside 1..{n_classes}")
    return k


def check_modes(ks, n_samples, n_classes):
    """Validate a vector of 1-based mode indices (one per sample)."""
    arr = np.asarray(ks)
    if arr.ndim == 0:
        arr = np.full(n_samples, int(arr))
    if arr.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} mode indices, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("mode indices must be integers")
        arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 1 or arr.max() > n_classes):
        raise ValueError(f"mode indices must lie in 1..{n_classes}")
    return arr.astype(np.int64)


def parse_vector(text):
    """Parse a comma-separated list of numbers, e.g. ``"0.2,0.5,0.3"``.

    Fractions such as ``"2/6"`` are accepted as well.
    """
    values = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        if "/" in tok:
            num, den = tok.split("/", 1)
            values.append(float(num) / float(den))
        else:
            values.append(float(tok))
    if not values:
        raise ValueError(f"no numbers found in {text!r}")
    return np.array(values, dtype=np.float64)
