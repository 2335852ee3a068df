"""Transmit chain, Gaussian MAC and the finite-field receive transform.

Signals are real-valued (BPSK on the real line) and the noise variance per
sample is ``sigma2 = N0 / 2``.  The CFSP alphabet is indexed by ``t``, the
number of users sending a 1 at a position: ``r = J - 2t`` with prior
``C(J, t) / 2^J`` and finite-field value ``v = t mod 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .epcode import EpCodeSpec, assign_eps, permanently_zero

LLR_MAX = 40.0


@dataclass(frozen=True)
class PowerProfile:
    p_avg: float
    n0: float
    mu_inf: float
    mu_red: float

    def __post_init__(self):
        if self.n0 <= 0 or self.p_avg <= 0:
            raise ValueError("p_avg and n0 must be positive")

    @property
    def sigma2(self) -> float:
        return self.n0 / 2.0

    @property
    def mu_pas(self) -> float:
        return self.mu_inf / self.mu_red if self.mu_red else math.inf

    @property
    def amp_inf(self) -> float:
        return math.sqrt(self.p_avg * self.mu_inf)

    @property
    def amp_red(self) -> float:
        return math.sqrt(self.p_avg * self.mu_red)

    @classmethod
    def from_pas(cls, spec, mu_pas: float, p_avg: float = 1.0, n0: float = 1.0) -> "PowerProfile":
        """Split power so that m = B*mu_inf + R*mu_red with mu_inf = mu_pas * mu_red."""
        if mu_pas <= 0:
            raise ValueError("mu_pas must be positive")
        m, B, R = spec.m, spec.B, spec.R
        if B == 0:
            return cls(p_avg, n0, 0.0, m / R)
        if R == 0:
            return cls(p_avg, n0, m / B, m / B / mu_pas)
        mu_red = m / (B * mu_pas + R)
        return cls(p_avg, n0, mu_pas * mu_red, mu_red)

    def mu_vector(self, spec, j: int) -> np.ndarray:
        """Per-position power factors of user ``j`` (1-based) in transmit order."""
        mu = np.zeros(spec.m)
        mu[assign_eps(spec, j)] = self.mu_inf
        mu[spec.M:] = self.mu_red
        return mu

    def check_constraint(self, spec, rel_tol: float = 1e-9) -> bool:
        total = spec.B * self.mu_inf + spec.R * self.mu_red
        return abs(total - spec.m) <= rel_tol * spec.m


def n0_for_ebn0(spec, ebn0_db: float, p_avg: float = 1.0) -> float:
    """N0 such that Eb/N0 matches, with Eb = m * p_avg / K per user."""
    eb = spec.m * p_avg / spec.K
    return eb / 10.0 ** (ebn0_db / 10.0)


def n0_for_bit_snr(spec, snr_db: float, p_avg: float = 1.0) -> float:
    """N0 for a per-information-bit SNR Eb / sigma^2, which sits 3 dB above Eb/N0."""
    eb = spec.m * p_avg / spec.K
    return 2.0 * eb / 10.0 ** (snr_db / 10.0)


def profile_for_ebn0(spec, ebn0_db: float, mu_pas: float, p_avg: float = 1.0) -> PowerProfile:
    return PowerProfile.from_pas(spec, mu_pas, p_avg, n0_for_ebn0(spec, ebn0_db, p_avg))


# ----------------------------------------------------------------- transmitter
def modulate(spec: EpCodeSpec, c, j: int, p: PowerProfile) -> np.ndarray:
    """F_F2C plus power allocation for user ``j`` (1-based)."""
    c = np.asarray(c)
    if c.shape[-1] != spec.m:
        raise ValueError(f"output element has length {c.shape[-1]}, expected m={spec.m}")
    x = 1.0 - 2.0 * c
    x[..., permanently_zero(spec, j)] = 0.0
    return np.sqrt(p.p_avg * p.mu_vector(spec, j)) * x


def cfsp(spec: EpCodeSpec, cs) -> np.ndarray:
    """Unscaled complex-field sum pattern r = sum_j x_j for output elements (J, m)."""
    cs = np.asarray(cs)
    r = np.zeros(cs.shape[:-2] + (spec.m,))
    for j in range(spec.J):
        x = 1.0 - 2.0 * cs[..., j, :]
        x[..., permanently_zero(spec, j + 1)] = 0.0
        r += x
    return r


def gmac_transmit(xs, p: PowerProfile, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Superpose power-allocated user signals and add N(0, N0/2) noise.

    Returns ``(y, noiseless)``.
    """
    xs = np.asarray(xs, dtype=float)
    clean = xs.sum(axis=-2)
    y = clean + rng.normal(0.0, math.sqrt(p.sigma2), size=clean.shape)
    return y, clean


# -------------------------------------------------------------------- receiver
def _log_prior(J: int) -> np.ndarray:
    t = np.arange(J + 1)
    return gammaln(J + 1) - gammaln(t + 1) - gammaln(J - t + 1) - J * math.log(2.0)


def parity_log_likelihoods(y, J: int, amp: float, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """log sum over even / odd t of P(t) * N(y; amp*(J-2t), sigma2), up to a shared constant."""
    y = np.asarray(y, dtype=float)
    t = np.arange(J + 1)
    pts = amp * (J - 2 * t)
    ll = _log_prior(J) - (y[..., None] - pts) ** 2 / (2.0 * sigma2)
    even = t % 2 == 0
    return logsumexp(ll[..., even], axis=-1), logsumexp(ll[..., ~even], axis=-1)


def parity_posteriors(y, J: int, p: PowerProfile) -> tuple[np.ndarray, np.ndarray]:
    """(P(v=0|y), P(v=1|y)) at a parity position."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("received values must be finite")
    l0, l1 = parity_log_likelihoods(y, J, p.amp_red, p.sigma2)
    norm = np.logaddexp(l0, l1)
    return np.exp(l0 - norm), np.exp(l1 - norm)


def parity_llrs(y, J: int, amp: float, sigma2: float) -> np.ndarray:
    l0, l1 = parity_log_likelihoods(y, J, amp, sigma2)
    return np.clip(l0 - l1, -LLR_MAX, LLR_MAX)


def info_llrs(y, amp: float, sigma2: float) -> np.ndarray:
    return np.clip(2.0 * np.asarray(y, dtype=float) * amp / sigma2, -LLR_MAX, LLR_MAX)


def init_llrs(y, spec: EpCodeSpec, p: PowerProfile) -> np.ndarray:
    """Channel LLRs ln P(v=0|y)/P(v=1|y) in transmit order.

    Unassigned EP positions are known zeros and get +LLR_MAX.
    """
    y = np.asarray(y, dtype=float)
    llr = np.empty(y.shape)
    u = spec.used
    llr[..., :u] = info_llrs(y[..., :u], p.amp_inf, p.sigma2)
    llr[..., u:spec.M] = LLR_MAX
    if spec.R:
        llr[..., spec.M:] = parity_llrs(y[..., spec.M:], spec.J, p.amp_red, p.sigma2)
    return llr
