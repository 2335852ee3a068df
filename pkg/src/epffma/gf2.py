"""Bit-packed GF(2) matrix algebra.

Rows are packed little-endian into uint64 words: column ``c`` lives in word
``c // 64`` at bit ``c % 64``.  All public operations work on logical bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD = 64


class SingularMatrixError(ValueError):
    """Raised when a GF(2) matrix that must be invertible is not."""

    def __init__(self, rank: int, size: int):
        super().__init__(f"matrix is singular over GF(2): rank {rank} < {size}")
        self.rank = rank
        self.size = size


def _pack(bits: np.ndarray) -> np.ndarray:
    rows, cols = bits.shape
    words = (cols + WORD - 1) // WORD
    padded = np.zeros((rows, words * WORD), dtype=np.uint8)
    padded[:, :cols] = bits
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64).reshape(rows, words)


def _unpack(data: np.ndarray, cols: int) -> np.ndarray:
    rows = data.shape[0]
    raw = np.ascontiguousarray(data).view(np.uint8).reshape(rows, -1)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :cols]


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """Dense GF(2) matrix with bit-packed rows."""

    rows: int
    cols: int
    data: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"BitMatrix needs rows, cols >= 1, got {self.rows}x{self.cols}")
        self.data.setflags(write=False)

    @classmethod
    def from_array(cls, bits) -> "BitMatrix":
        arr = np.asarray(bits)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array of bits")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("matrix entries must be 0 or 1")
        return cls(arr.shape[0], arr.shape[1], _pack(arr.astype(np.uint8)))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_array(np.eye(n, dtype=np.uint8))

    def to_array(self) -> np.ndarray:
        return _unpack(self.data, self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def take_rows(self, idx: Sequence[int]) -> "BitMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return BitMatrix(len(idx), self.cols, self.data[idx].copy())

    def take_cols(self, idx: Sequence[int]) -> "BitMatrix":
        return BitMatrix.from_array(self.to_array()[:, np.asarray(idx, dtype=np.int64)])

    def hstack(self, other: "BitMatrix") -> "BitMatrix":
        if self.rows != other.rows:
            raise ValueError("row count mismatch")
        return BitMatrix.from_array(np.hstack([self.to_array(), other.to_array()]))

    def rank(self) -> int:
        return _rank(self.data.copy(), self.cols)

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return gf2_mul(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.rows, self.cols, self.data.tobytes()))

    def __repr__(self) -> str:
        body = "\n".join("  " + "".join(map(str, r)) for r in self.to_array())
        return f"BitMatrix({self.rows}x{self.cols}\n{body})"


@dataclass(frozen=True, eq=False)
class ColumnPermutation:
    """Output column ``t`` takes input column ``perm[t]``."""

    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if not np.array_equal(np.sort(p), np.arange(len(p))):
            raise ValueError("perm must be a bijection on 0..n-1")
        p.setflags(write=False)
        object.__setattr__(self, "perm", p)

    def __len__(self):
        return len(self.perm)

    def __eq__(self, other):
        return isinstance(other, ColumnPermutation) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())

    def inverse(self) -> "ColumnPermutation":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return ColumnPermutation(inv)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.perm, np.arange(len(self.perm))))

    def apply(self, x):
        """Permute the last axis of an array, or the columns of a BitMatrix."""
        if isinstance(x, BitMatrix):
            return BitMatrix.from_array(x.to_array()[:, self.perm])
        return np.asarray(x)[..., self.perm]


def kronecker(kappa: int) -> BitMatrix:
    """The 2^kappa x 2^kappa matrix [[G, 0], [G, G]] built from the kernel [[1, 0], [1, 1]]."""
    return BitMatrix.from_array(kronecker_array(kappa))


def kronecker_array(kappa: int) -> np.ndarray:
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    kernel = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    g = kernel
    for _ in range(kappa - 1):
        g = np.kron(kernel, g)
    return g


def gf2_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    sel = a.to_array().astype(bool)
    out = np.zeros((a.rows, b.data.shape[1]), dtype=np.uint64)
    for i in range(a.rows):
        picked = b.data[sel[i]]
        if len(picked):
            out[i] = np.bitwise_xor.reduce(picked, axis=0)
    return BitMatrix(a.rows, b.cols, out)


def _rank(data: np.ndarray, cols: int) -> int:
    rows = data.shape[0]
    r = 0
    for c in range(cols):
        if r == rows:
            break
        w, bit = divmod(c, WORD)
        mask = np.uint64(1) << np.uint64(bit)
        hits = np.nonzero(data[r:, w] & mask)[0]
        if len(hits) == 0:
            continue
        p = r + hits[0]
        if p != r:
            data[[r, p]] = data[[p, r]]
        below = r + 1 + np.nonzero(data[r + 1:, w] & mask)[0]
        data[below] ^= data[r]
        r += 1
    return r


def gf2_invert(a: BitMatrix) -> BitMatrix:
    """Gauss-Jordan inverse over GF(2); raises SingularMatrixError with the rank reached."""
    if a.rows != a.cols:
        raise ValueError(f"cannot invert a non-square {a.rows}x{a.cols} matrix")
    n = a.rows
    aug = _pack(np.hstack([a.to_array(), np.eye(n, dtype=np.uint8)]))
    for c in range(n):
        w, bit = divmod(c, WORD)
        mask = np.uint64(1) << np.uint64(bit)
        hits = np.nonzero(aug[c:, w] & mask)[0]
        if len(hits) == 0:
            raise SingularMatrixError(_rank(a.data.copy(), n), n)
        p = c + hits[0]
        if p != c:
            aug[[c, p]] = aug[[p, c]]
        others = np.nonzero(aug[:, w] & mask)[0]
        others = others[others != c]
        aug[others] ^= aug[c]
    full = _unpack(aug, 2 * n)
    return BitMatrix.from_array(full[:, n:])


def systematic_transform(g_m1: BitMatrix, index_set: Iterable[int]) -> tuple[BitMatrix, ColumnPermutation]:
    """Bring the rows of the Kronecker matrix selected by ``index_set`` to [I | Q] form.

    Returns the systematic matrix and the column permutation that gathers the
    ``index_set`` columns (in order) into the leading identity block, followed
    by the remaining columns in ascending order.
    """
    idx = [int(i) for i in index_set]
    if len(idx) != g_m1.rows:
        raise ValueError(f"index set has {len(idx)} entries for {g_m1.rows} rows")
    if len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= g_m1.cols:
        raise ValueError("index set must hold distinct column indices")
    rank = g_m1.rank()
    if rank < g_m1.rows:
        raise SingularMatrixError(rank, g_m1.rows)
    g_aa = g_m1.take_cols(idx)
    left = gf2_invert(g_aa)
    normalized = left @ g_m1
    chosen = set(idx)
    perm = ColumnPermutation(np.array(idx + [c for c in range(g_m1.cols) if c not in chosen]))
    return perm.apply(normalized), perm


# Common polynomials, written without the leading x^C_L term.
DEFAULT_CRC_POLYS = {4: 0x3, 6: 0x03, 8: 0x07, 11: 0x385, 16: 0x1021, 24: 0x864CFB}


def _normalize_poly(poly: int, crc_len: int) -> int:
    top = 1 << crc_len
    if poly >= top:
        if poly >> crc_len != 1:
            raise ValueError(f"polynomial 0x{poly:x} does not have degree {crc_len}")
        poly ^= top
    if not poly & 1:
        raise ValueError(f"degenerate CRC polynomial 0x{poly:x}: constant term is zero")
    return poly


def crc_bits(payload, crc_len: int, poly: int | None = None) -> np.ndarray:
    """Bitwise CRC register (MSB first, zero init, no reflection, no final xor)."""
    if crc_len == 0:
        return np.zeros(0, dtype=np.uint8)
    poly = _normalize_poly(DEFAULT_CRC_POLYS[crc_len] if poly is None else poly, crc_len)
    top = 1 << (crc_len - 1)
    mask = (1 << crc_len) - 1
    reg = 0
    for b in np.asarray(payload, dtype=np.uint8):
        fb = ((reg & top) != 0) ^ int(b)
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly
    return np.array([(reg >> (crc_len - 1 - k)) & 1 for k in range(crc_len)], dtype=np.uint8)


def crc_generator(payload_len: int, crc_len: int, poly: int | None = None) -> BitMatrix:
    """Systematic ``payload_len x (payload_len + crc_len)`` CRC encoding matrix [I | P].

    Row ``i`` of P holds the CRC of the unit payload e_i; the map is linear
    because the register starts at zero.
    """
    if crc_len < 0:
        raise ValueError("crc_len must be >= 0")
    if payload_len < 1:
        raise ValueError("payload_len must be >= 1")
    eye = np.eye(payload_len, dtype=np.uint8)
    if crc_len == 0:
        return BitMatrix.from_array(eye)
    if poly is None:
        if crc_len not in DEFAULT_CRC_POLYS:
            raise ValueError(f"no default polynomial for crc_len={crc_len}")
        poly = DEFAULT_CRC_POLYS[crc_len]
    poly = _normalize_poly(poly, crc_len)
    parity = np.array([crc_bits(eye[i], crc_len, poly) for i in range(payload_len)])
    return BitMatrix.from_array(np.hstack([eye, parity]))
