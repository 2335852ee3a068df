"""Top-L smallest-sum flip sets by best-first expansion of a binary tree."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FlipSet:
    indices: tuple[int, ...]
    sum: float

    def __len__(self):
        return len(self.indices)


def top_l(l_abs, L: int) -> list[FlipSet]:
    """The ``L`` index subsets of ``l_abs`` with the smallest element sums, in order.

    Heap entries are ``(s, S)`` with ``S`` a tuple of positions in ascending
    sorted order of ``l_abs``.  Popping ``(s, S)`` with last position ``i``
    pushes ``S + (i+1,)`` and ``S[:-1] + (i+1,)``; every subset has exactly one
    parent, so nothing is generated twice.  Ties on ``s`` fall back to tuple
    order.
    """
    l_abs = np.asarray(l_abs, dtype=float)
    n = len(l_abs)
    if np.any(l_abs < 0):
        raise ValueError("top_l needs nonnegative weights")
    if L < 1:
        raise ValueError("L must be >= 1")
    if n < 63 and L > (1 << n):
        raise ValueError(f"L={L} exceeds the 2^{n} available subsets")
    order = np.argsort(l_abs, kind="stable")
    w = l_abs[order].tolist()
    heap = [(0.0, ())]
    out = []
    while len(out) < L:
        s, S = heapq.heappop(heap)
        out.append((s, S))
        i = S[-1] + 1 if S else 0
        if i < n:
            heapq.heappush(heap, (s + w[i], S + (i,)))
            if S:
                heapq.heappush(heap, (s + w[i] - w[i - 1], S[:-1] + (i,)))
    return [FlipSet(tuple(sorted(int(order[k]) for k in S)), s) for s, S in out]


def pm_exact(w_hat, llrs) -> float:
    """sum_i ln(1 + exp(-(1 - 2 w_i) l_i)): negative log posterior of ``w_hat``."""
    w_hat = np.asarray(w_hat)
    llrs = np.asarray(llrs, dtype=float)
    return float(np.sum(np.logaddexp(0.0, -(1.0 - 2.0 * w_hat) * llrs)))


def pm_shifted(w_hat, llrs) -> float:
    """PM relative to the hard decision: the sum of |l_i| over disagreeing bits."""
    w_hat = np.asarray(w_hat)
    llrs = np.asarray(llrs, dtype=float)
    hard = (llrs < 0).astype(w_hat.dtype)
    return float(np.sum(np.abs(llrs)[w_hat != hard]))


def pm_of(w_hat, llrs) -> tuple[float, float]:
    """(exact PM, shifted PM) of a candidate block."""
    return pm_exact(w_hat, llrs), pm_shifted(w_hat, llrs)
