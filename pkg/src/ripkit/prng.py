"""Portable deterministic random number generation.

Mask sequences must be reproducible bit-for-bit across machines and
languages, so nothing here touches the platform RNG. The generator is
xoshiro256++ seeded through splitmix64, both fixed published algorithms;
per-chain seeds are derived from the master seed with SHA-256 so every
chain is independently replayable from its recorded 64-bit seed.
"""

from __future__ import annotations

import hashlib

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def splitmix64_stream(seed: int, n: int) -> list[int]:
    """First ``n`` outputs of splitmix64 starting from ``seed``."""
    out = []
    state = seed & _MASK64
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


class Xoshiro256pp:
    """xoshiro256++ with splitmix64 state expansion from a 64-bit seed."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        self._s = splitmix64_stream(seed, 4)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection on the 64-bit stream.

        Rejects draws below 2**64 mod n so the modulo is exactly uniform;
        for power-of-two n the threshold is zero and nothing is rejected.
        """
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def getstate(self) -> tuple[int, int, int, int]:
        return tuple(self._s)


def derive_chain_seed(master_seed: int, image_id: str, mask_size: int, run_index: int) -> int:
    """64-bit chain seed from the documented splitting scheme.

    SHA-256 over ``"<master>|<imageId>|<maskSize>|<runIndex>"`` (decimal
    integers, UTF-8), taking the first 8 digest bytes big-endian. Ablation
    variants of an entry intentionally share the chain seed so they see
    identical mask sequences, keeping the color comparison controlled.
    """
    material = f"{master_seed}|{image_id}|{mask_size}|{run_index}".encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big")
