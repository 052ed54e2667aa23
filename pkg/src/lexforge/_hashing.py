import hashlib

U64_MAX = (1 << 64) - 1


def hash64(data: bytes | str, seed: int | None = None) -> int:
    """Stable 64-bit hash, optionally keyed by an integer seed."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    key = b"" if seed is None else str(seed).encode("ascii")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8, key=key).digest(), "little")


def unit_hash(data: bytes | str, seed: int | None = None) -> float:
    """Map data to [0, 1) uniformly via hash64."""
    return hash64(data, seed) / 2.0**64


def derive_seed(seed: int, *parts) -> int:
    """Independent 63-bit child seed for a (seed, parts...) stream."""
    return hash64(":".join(str(p) for p in (seed, *parts))) >> 1
