"""Polarized element-pair codes: parameters, generators and the parallel-mode encoder.

Index conventions
-----------------
* *natural order* is the column order of the Kronecker matrix G^(kappa);
* *transmit order* is natural order pushed through ``spec.perm``: the M
  systematic positions come first (``v_tx[:M] == w``), then the R parity
  positions.

User ``j`` (0-based internally) owns EP rows ``j*B .. (j+1)*B - 1`` where
``B = K + crc_len``.  When ``n_eps`` exceeds ``J*B`` the trailing EP rows are
left unassigned; their systematic positions are always zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .gf2 import (
    DEFAULT_CRC_POLYS,
    BitMatrix,
    ColumnPermutation,
    crc_generator,
    kronecker_array,
    systematic_transform,
)


@dataclass(frozen=True)
class CodeParams:
    """Everything that defines an EP code except its index set."""

    kappa: int
    J: int
    K: int
    crc_len: int = 0
    crc_poly: int | None = None
    n_eps: int | None = None

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.J < 1 or self.K < 0 or self.crc_len < 0:
            raise ValueError("need J >= 1, K >= 0, crc_len >= 0")
        if self.crc_len and self.crc_poly is None:
            if self.crc_len not in DEFAULT_CRC_POLYS:
                raise ValueError(f"crc_len={self.crc_len} needs an explicit crc_poly")
            object.__setattr__(self, "crc_poly", DEFAULT_CRC_POLYS[self.crc_len])
        if self.n_eps is None:
            object.__setattr__(self, "n_eps", self.J * self.B)
        if self.n_eps < self.J * self.B:
            raise ValueError(f"n_eps={self.n_eps} cannot hold J*B={self.J * self.B} bits")
        if self.n_eps > self.m:
            raise ValueError(f"M={self.n_eps} exceeds m={self.m}")

    @property
    def m(self) -> int:
        return 1 << self.kappa

    @property
    def B(self) -> int:
        return self.K + self.crc_len

    @property
    def M(self) -> int:
        return self.n_eps

    @property
    def R(self) -> int:
        return self.m - self.n_eps

    @property
    def used(self) -> int:
        """Number of EPs that carry user bits (J*B)."""
        return self.J * self.B


@dataclass(frozen=True, eq=False)
class EpCodeSpec:
    """A constructed EP code: parameters plus the sorted index set A."""

    params: CodeParams
    A: tuple[int, ...]

    def __post_init__(self):
        a = tuple(sorted(int(i) for i in self.A))
        object.__setattr__(self, "A", a)
        if len(a) != self.params.M:
            raise ValueError(f"|A|={len(a)} but M={self.params.M}")
        if len(set(a)) != len(a) or (a and (a[0] < 0 or a[-1] >= self.params.m)):
            raise ValueError("A must hold distinct indices in 0..m-1")

    @classmethod
    def build(cls, params: CodeParams, A) -> "EpCodeSpec":
        return cls(params, tuple(A))

    def __getattr__(self, name):
        # forward kappa, J, K, m, B, M, R, ... to params
        if name.startswith("_") or name == "params":
            raise AttributeError(name)
        return getattr(self.params, name)

    # ----------------------------------------------------------------- matrices
    @cached_property
    def g_kron(self) -> np.ndarray:
        return kronecker_array(self.kappa)

    @cached_property
    def _systematic(self):
        if self.M == 0:
            raise ValueError("code has no EPs")
        g_m1 = BitMatrix.from_array(self.g_kron[list(self.A)])
        sym, perm = systematic_transform(g_m1, self.A)
        return g_m1, sym, perm

    @property
    def g_m1(self) -> BitMatrix:
        """Full-one (non-systematic) generator: rows A of G^(kappa)."""
        return self._systematic[0]

    @property
    def g_msym(self) -> BitMatrix:
        """Systematic generator [I | Q] in transmit order."""
        return self._systematic[1]

    @property
    def perm(self) -> ColumnPermutation:
        """Transmit position t holds natural column perm[t]."""
        if self.M == 0:
            return ColumnPermutation(np.arange(self.m))
        return self._systematic[2]

    @cached_property
    def g_crc(self) -> BitMatrix:
        """Block-diagonal per-user CRC encoder, (J*K) x M; unused EPs get zero columns."""
        one = crc_generator(self.K, self.crc_len, self.crc_poly).to_array()
        out = np.zeros((self.J * self.K, self.M), dtype=np.uint8)
        for j in range(self.J):
            out[j * self.K:(j + 1) * self.K, j * self.B:(j + 1) * self.B] = one
        return BitMatrix.from_array(out)

    @cached_property
    def g_full(self) -> BitMatrix:
        """CRC-aided systematic generator g_crc . g_msym mapping data bits to v."""
        return self.g_crc @ self.g_msym

    @cached_property
    def sym_array(self) -> np.ndarray:
        return self.g_msym.to_array()

    @cached_property
    def parity_rows(self) -> np.ndarray:
        """Q: the R parity columns of each EP row, shape (M, R)."""
        return np.ascontiguousarray(self.sym_array[:, self.M:])

    @cached_property
    def crc_parity(self) -> np.ndarray:
        """Per-user CRC parity block P (K x crc_len) so that crc = b . P."""
        if self.crc_len == 0:
            return np.zeros((self.K, 0), dtype=np.uint8)
        return crc_generator(self.K, self.crc_len, self.crc_poly).to_array()[:, self.K:]

    @cached_property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.m, dtype=bool)
        mask[list(self.A)] = False
        return mask

    # ------------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        p = self.params
        return {
            "kappa": p.kappa,
            "J": p.J,
            "K": p.K,
            "crc_len": p.crc_len,
            "crc_poly": p.crc_poly,
            "n_eps": p.n_eps,
            "A": list(self.A),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpCodeSpec":
        params = CodeParams(
            kappa=d["kappa"], J=d["J"], K=d["K"], crc_len=d.get("crc_len", 0),
            crc_poly=d.get("crc_poly"), n_eps=d.get("n_eps"),
        )
        return cls(params, tuple(d["A"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "EpCodeSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------- encoding
def assign_eps(spec: EpCodeSpec, j: int) -> list[int]:
    """EP rows owned by user ``j`` (1-based, as in the user numbering)."""
    if not 1 <= j <= spec.J:
        raise ValueError(f"user index {j} outside 1..{spec.J}")
    return list(range((j - 1) * spec.B, j * spec.B))


def _check_bits(bits, n: int) -> np.ndarray:
    b = np.asarray(bits)
    if b.shape[-1] != n:
        raise ValueError(f"expected {n} bits, got {b.shape[-1]}")
    if b.size and not np.isin(b, (0, 1)).all():
        raise ValueError("bit values must be 0 or 1")
    return b.astype(np.uint8)


def append_crc(spec: EpCodeSpec, bits) -> np.ndarray:
    """Data bits (..., K) -> block (..., B) with the per-user CRC appended."""
    b = _check_bits(bits, spec.K)
    if spec.crc_len == 0:
        return b.copy()
    crc = (b.astype(np.int64) @ spec.crc_parity) & 1
    return np.concatenate([b, crc.astype(np.uint8)], axis=-1)


def crc_ok(spec: EpCodeSpec, block) -> np.ndarray | bool:
    """True where the B-bit block(s) carry a consistent CRC."""
    blk = np.asarray(block, dtype=np.uint8)
    if spec.crc_len == 0:
        return np.ones(blk.shape[:-1], dtype=bool) if blk.ndim > 1 else True
    crc = (blk[..., :spec.K].astype(np.int64) @ spec.crc_parity) & 1
    ok = np.all(crc == blk[..., spec.K:], axis=-1)
    return ok if blk.ndim > 1 else bool(ok)


def encode_user(spec: EpCodeSpec, j: int, bits) -> np.ndarray:
    """Systematic CRC-aided output element c_j of user ``j`` (1-based), transmit order."""
    rows = assign_eps(spec, j)
    block = append_crc(spec, bits)
    c = np.zeros(spec.m, dtype=np.uint8)
    c[rows] = block
    if spec.R:
        c[spec.M:] = (block.astype(np.int64) @ spec.parity_rows[rows]) & 1
    return c


def encode_user_nonsystematic(spec: EpCodeSpec, j: int, bits) -> np.ndarray:
    """Switch-function encoder over the full-one generator G_M^1, natural order."""
    rows = assign_eps(spec, j)
    block = append_crc(spec, bits)
    g = spec.g_kron[[spec.A[r] for r in rows]]
    return ((block.astype(np.int64) @ g) & 1).astype(np.uint8)


def encode_frame(spec: EpCodeSpec, data) -> np.ndarray:
    """All users at once: data (J, K) -> output elements (J, m) in transmit order."""
    data = _check_bits(data, spec.K).reshape(spec.J, spec.K)
    blocks = append_crc(spec, data)
    c = np.zeros((spec.J, spec.m), dtype=np.uint8)
    for j in range(spec.J):
        c[j, j * spec.B:(j + 1) * spec.B] = blocks[j]
        if spec.R:
            c[j, spec.M:] = (blocks[j].astype(np.int64) @ spec.parity_rows[j * spec.B:(j + 1) * spec.B]) & 1
    return c


def ffsp_sum(elements) -> np.ndarray:
    """Component-wise GF(2) sum of output elements."""
    arr = [np.asarray(e, dtype=np.uint8) for e in elements]
    if not arr:
        raise ValueError("need at least one element")
    n = arr[0].shape
    if any(a.shape != n for a in arr):
        raise ValueError("output elements differ in length")
    return np.bitwise_xor.reduce(np.stack(arr), axis=0)


def pack_w(spec: EpCodeSpec, data) -> np.ndarray:
    """Per-user data bits (J, K) -> w = (b_1||crc_1, ..., b_J||crc_J, 0...) of length M."""
    data = _check_bits(data, spec.K).reshape(spec.J, spec.K)
    w = np.zeros(spec.M, dtype=np.uint8)
    w[:spec.used] = append_crc(spec, data).reshape(-1)
    return w


def unpack_w(spec: EpCodeSpec, w) -> np.ndarray:
    """w -> per-user blocks (J, B) including the CRC bits."""
    w = np.asarray(w, dtype=np.uint8)
    if w.shape[-1] != spec.M:
        raise ValueError(f"w must have length M={spec.M}")
    return w[..., :spec.used].reshape(*w.shape[:-1], spec.J, spec.B)


def permanently_zero(spec: EpCodeSpec, j: int) -> np.ndarray:
    """Mask of transmit positions that user ``j`` (1-based) never drives."""
    mask = np.zeros(spec.m, dtype=bool)
    mask[:spec.M] = True
    mask[assign_eps(spec, j)] = False
    return mask


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x = u . G^(kappa) over the last axis, by butterflies."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    half = n // 2
    while half >= 1:
        y = x.reshape(*x.shape[:-1], n // (2 * half), 2, half)
        y[..., 0, :] ^= y[..., 1, :]
        half //= 2
    return x
