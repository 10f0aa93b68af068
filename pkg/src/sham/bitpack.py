"""Fixed-width unsigned integer packing (MSB first, byte aligned at the end)."""

import math

import numpy as np


def width_for(n: int) -> int:
    """Bits needed for values in ``[0, n)``; at least one."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def pack_uint(values, width: int) -> bytes:
    values = np.asarray(values, dtype=np.uint64)
    if values.size and int(values.max()) >> width:
        raise ValueError(f"value does not fit in {width} bits")
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_uint(buf, width: int, count: int) -> np.ndarray:
    nbytes = packed_size(width, count)
    raw = np.frombuffer(bytes(buf[:nbytes]), dtype=np.uint8)
    if raw.size < nbytes:
        raise ValueError("packed array is truncated")
    bits = np.unpackbits(raw)[: width * count].reshape(count, width).astype(np.uint64)
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits * weights).sum(axis=1, dtype=np.uint64).astype(np.int64)


def packed_size(width: int, count: int) -> int:
    return -(-width * count // 8)
