"""Hot-loop kernels: compiled extension preferred, numpy fallback otherwise.

The skip-gram negative-sampling inner loop is the one genuinely scalar-hot
path in the package, so it exists twice: `skipgram_cy` (Cython) and
`skipgram_py` (pure numpy).  Both consume identical RNG streams and apply
updates in the same order, so trained vectors agree up to floating-point
reduction-order noise.  Set TOPFLOP_KERNEL=python or =cython to force a
backend; see benchmarks/bench_skipgram.py for a throughput comparison.
"""

import os

from . import skipgram_py

_BACKENDS = {"python": skipgram_py}

try:
    from . import skipgram_cy

    _BACKENDS["cython"] = skipgram_cy
except ImportError:
    skipgram_cy = None

_forced = os.environ.get("TOPFLOP_KERNEL", "").strip().lower()
if _forced and _forced not in _BACKENDS:
    raise ImportError(
        f"TOPFLOP_KERNEL={_forced!r} requested but only {sorted(_BACKENDS)} available"
    )

ACTIVE_BACKEND = _forced or ("cython" if "cython" in _BACKENDS else "python")


def get_backend(name=None):
    return _BACKENDS[name or ACTIVE_BACKEND]


def available_backends():
    return sorted(_BACKENDS)
