"""Deterministic seed derivation for replica and noise-role RNG streams.

Every stochastic component draws from a counter-based Philox generator whose
64-bit key is derived statelessly as

    seed = mix64(base ^ tag(role) ^ index)

where ``mix64`` is the SplitMix64 finalizer and ``tag`` hashes the role name
(FNV-1a).  Distinct (role, index) pairs map to distinct streams; the rule is
bit-exact and documented here so studies replay byte-identically.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

ROLE_W1 = "W1"
ROLE_W2 = "W2"
ROLE_MC = "MC"


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a stateless 64-bit mixing permutation."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def role_tag(role: str) -> int:
    """FNV-1a hash of the role name, used as a 64-bit stream tag."""
    h = 0xCBF29CE484222325
    for b in role.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def derive_seed(base: int, role: str, index: int) -> int:
    """Derive the stream seed for (base, role, index); stateless and bit-exact."""
    return mix64((base & _MASK64) ^ role_tag(role) ^ (index & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by a derived 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
