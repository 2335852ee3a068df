"""Monte Carlo construction of the EP index set with a genie-aided SC decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .channel import LLR_MAX, PowerProfile, info_llrs, parity_llrs
from .epcode import CodeParams, EpCodeSpec, polar_transform

MIN_SAMPLES = 1000


@dataclass(frozen=True)
class BitChannelProfile:
    capacities: np.ndarray
    samples: int

    def count_above(self, thr: float = 0.99) -> int:
        return int(np.sum(self.capacities > thr))

    def count_below(self, thr: float = 0.01) -> int:
        return int(np.sum(self.capacities < thr))

    def best(self, M: int) -> tuple[int, ...]:
        """Indices of the M highest capacities; equal values prefer the lower index."""
        order = np.lexsort((np.arange(len(self.capacities)), -self.capacities))
        return tuple(sorted(int(i) for i in order[:M]))


def boxplus(a, b):
    """Exact check-node combination 2 atanh(tanh(a/2) tanh(b/2)), overflow-safe."""
    s = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def genie_sc(llr: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Decision LLR of every bit channel when SC is fed the true bits ``u``.

    ``llr`` and ``u`` have shape (samples, m) in natural order.
    """
    out = np.empty(llr.shape)

    def rec(l, uu, off):
        n = l.shape[1]
        if n == 1:
            out[:, off] = l[:, 0]
            return uu
        h = n // 2
        a, b = l[:, :h], l[:, h:]
        xl = rec(boxplus(a, b), uu[:, :h], off)
        right = np.clip(b + (1 - 2 * xl.astype(np.float64)) * a, -LLR_MAX, LLR_MAX)
        xr = rec(right, uu[:, h:], off + h)
        return np.concatenate([xl ^ xr, xr], axis=1)

    rec(np.asarray(llr, dtype=float), np.asarray(u, dtype=np.uint8), 0)
    return out


def c_bsc(llr_oriented) -> np.ndarray:
    """Capacity of the BSC with crossover 1 / (1 + lambda), lambda = exp(llr)."""
    p = expit(-np.asarray(llr_oriented, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return 1.0 - np.nan_to_num(h, nan=0.0)


def position_roles(params: CodeParams, A) -> np.ndarray:
    """Role of each natural position: 0 parity, 1 user information, 2 unassigned EP."""
    A = sorted(A)
    roles = np.zeros(params.m, dtype=np.int8)
    roles[A[:params.used]] = 1
    roles[A[params.used:]] = 2
    return roles


def polarization_weight_order(kappa: int) -> np.ndarray:
    """Channel-independent reliability (beta-expansion weight), larger is better."""
    m = 1 << kappa
    beta = 2 ** 0.25
    idx = np.arange(m)
    return np.array([sum(beta ** k for k in range(kappa) if (i >> k) & 1) for i in idx])


def simulate_llrs(params: CodeParams, roles: np.ndarray, p: PowerProfile, v: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Channel LLRs (natural order) for FFSP bits ``v`` under the given position roles."""
    S, m = v.shape
    sigma = np.sqrt(p.sigma2)
    llr = np.empty((S, m))
    info = roles == 1
    if info.any():
        y = p.amp_inf * (1.0 - 2.0 * v[:, info]) + sigma * rng.standard_normal((S, int(info.sum())))
        llr[:, info] = info_llrs(y, p.amp_inf, p.sigma2)
    known = roles == 2
    llr[:, known] = (1.0 - 2.0 * v[:, known]) * LLR_MAX
    par = roles == 0
    if par.any():
        J = params.J
        vp = v[:, par].astype(np.int64)
        others = rng.binomial(J - 1, 0.5, size=vp.shape)
        t = others + ((vp + others) & 1)
        y = p.amp_red * (J - 2 * t) + sigma * rng.standard_normal(vp.shape)
        llr[:, par] = parity_llrs(y, J, p.amp_red, p.sigma2)
    return llr


def bit_channel_capacities(params: CodeParams, A, p: PowerProfile, n_samples: int,
                           rng: np.random.Generator, batch: int = 1000) -> BitChannelProfile:
    """Sample-mean estimate of every bit-channel capacity for a fixed index set."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    roles = position_roles(params, A)
    acc = np.zeros(params.m)
    done = 0
    while done < n_samples:
        S = min(batch, n_samples - done)
        d = rng.integers(0, 2, size=(S, params.m), dtype=np.uint8)
        v = polar_transform(d)
        llr = simulate_llrs(params, roles, p, v, rng)
        dec = genie_sc(llr, d)
        acc += c_bsc(dec * (1.0 - 2.0 * d)).sum(axis=0)
        done += S
    return BitChannelProfile(np.clip(acc / n_samples, 0.0, 1.0), n_samples)


def construct_index_set(params: CodeParams, p: PowerProfile, n_samples: int,
                        rng: np.random.Generator, iterations: int = 2, initial=None,
                        min_samples: int = MIN_SAMPLES) -> tuple[tuple[int, ...], BitChannelProfile]:
    """Pick the M most reliable bit channels by Monte Carlo genie-aided SC.

    Which positions carry information (and hence which power factor they get)
    depends on A itself, so the estimate is refined ``iterations`` times
    starting from ``initial`` (default: polarization-weight ordering).
    """
    if n_samples < min_samples:
        raise ValueError(f"n_samples={n_samples} is below the minimum {min_samples}")
    if initial is None:
        pw = polarization_weight_order(params.kappa)
        initial = tuple(sorted(np.lexsort((np.arange(params.m), -pw))[:params.M].tolist()))
    A = tuple(sorted(int(i) for i in initial))
    profile = None
    for _ in range(max(iterations, 1)):
        profile = bit_channel_capacities(params, A, p, n_samples, rng)
        A = profile.best(params.M)
    return A, profile


def construct_spec(params: CodeParams, p: PowerProfile, n_samples: int, rng: np.random.Generator,
                   **kw) -> tuple[EpCodeSpec, BitChannelProfile]:
    A, profile = construct_index_set(params, p, n_samples, rng, **kw)
    return EpCodeSpec.build(params, A), profile
