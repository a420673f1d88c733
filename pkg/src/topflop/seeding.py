"""Deterministic seed derivation.

Every command accepts one master seed.  All internal randomness (splits,
parameter init, SGD streams, dropout, random relevance baselines) is fed
from child seeds derived here, so a run is a pure function of its inputs
and the master seed.

Splitting rule: child = sha256("topflop:<master>:<tag>:<tag>...") taken as
a big-endian integer mod 2**63.  Changing any tag yields an independent
stream; the rule is stable across platforms and Python versions.
"""

import hashlib


def derive_seed(master, *tags):
    parts = ["topflop", str(int(master))] + [str(t) for t in tags]
    digest = hashlib.sha256(":".join(parts).encode("utf-8")).digest()
    value = int.from_bytes(digest[:8], "big") % (2**63)
    # a zero state would stall the xorshift kernel RNG
    return value or 1
