"""Capacity of the cascaded BI-ASC / MI-NSC model and the PAS power split search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import logsumexp
from scipy.stats import norm

from .channel import PowerProfile, _log_prior


@dataclass(frozen=True)
class CapacityReport:
    c_bi: float
    p_e: float
    c_mi: float
    h_r: float
    c_tot: float


def binary_entropy(p) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.nan_to_num(h, nan=0.0)


def cfsp_entropy(J: int) -> float:
    """H(R) of the binomial CFSP symbol, in bits."""
    lp = _log_prior(J)
    return float(-np.sum(np.exp(lp) * lp) / math.log(2))


def symbol_error_rate(J: int, gamma: float) -> float:
    """Approximate C2F symbol error probability at SNR gamma = mu_red P / sigma^2."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    prior = np.exp(_log_prior(J))
    j = np.arange(J)
    shift = np.log((J + j + 1) / (J - j)) / (2 * math.sqrt(gamma))
    sg = math.sqrt(gamma)
    pe = 2 * np.sum(prior[:-1] * norm.sf(sg + shift)) + 2 * np.sum(prior[1:] * norm.sf(sg - shift))
    return float(min(max(pe, 0.0), 0.5))


def capacity_bi(J: int, gamma: float) -> tuple[float, float]:
    """(C_BI, p_e) with the BI-ASC treated as a BSC."""
    pe = symbol_error_rate(J, gamma)
    return float(1.0 - binary_entropy(pe)), pe


def _mixture_entropy(J: int, amp: float, sigma: float) -> float:
    """Differential entropy (bits) of the CFSP mixture observed in Gaussian noise."""
    lp = _log_prior(J)
    pts = amp * (J - 2 * np.arange(J + 1))
    keep = lp > math.log(1e-300)
    lp, pts = lp[keep], pts[keep]
    c = -0.5 * math.log(2 * math.pi * sigma * sigma)

    def integrand(y):
        logp = logsumexp(lp - (y - pts) ** 2 / (2 * sigma * sigma)) + c
        return -math.exp(logp) * logp

    centers = np.sort(pts)
    edges = [centers[0] - 12 * sigma]
    edges += list((centers[1:] + centers[:-1]) / 2)
    edges.append(centers[-1] + 12 * sigma)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-10, epsrel=1e-10, limit=200)
        total += val
    return total / math.log(2)


def capacity_mi(J: int, mu_red: float, p: PowerProfile) -> float:
    """I(r; y) of the MI-NSC with binomial inputs, by quadrature."""
    if p.n0 <= 0:
        raise ValueError("N0 must be positive")
    sigma = math.sqrt(p.sigma2)
    amp = math.sqrt(mu_red * p.p_avg)
    h_noise = 0.5 * math.log2(2 * math.pi * math.e * p.sigma2)
    return max(_mixture_entropy(J, amp, sigma) - h_noise, 0.0)


def gaussian_limit(J: int, mu_red: float, p: PowerProfile) -> float:
    return 0.5 * math.log2(1 + J * mu_red * p.p_avg / p.sigma2)


def capacity_total(spec, p: PowerProfile) -> float:
    """Gaussian-input total capacity of information and parity sections."""
    s = p.p_avg / p.sigma2
    info = spec.J * spec.K / 2 * math.log2(1 + p.mu_inf * s)
    parity = spec.R / 2 * math.log2(1 + spec.J * p.mu_red * s)
    return info + parity


def capacity_report(spec, p: PowerProfile) -> CapacityReport:
    gamma = p.mu_red * p.p_avg / p.sigma2
    c_bi, pe = capacity_bi(spec.J, gamma)
    return CapacityReport(c_bi, pe, capacity_mi(spec.J, p.mu_red, p), cfsp_entropy(spec.J),
                          capacity_total(spec, p))


# ------------------------------------------------------------ Monte Carlo terms
class McCapacity:
    """Discrete-input capacities estimated on one fixed set of noise draws.

    Reusing the draws (common random numbers) across power splits keeps the
    objective smooth in mu_pas, so the grid argmax is not driven by sampling
    noise.
    """

    def __init__(self, J: int, n_samples: int, rng: np.random.Generator):
        self.J = J
        self.z_info = rng.standard_normal(n_samples)
        self.t = rng.binomial(J, 0.5, n_samples)
        self.z_par = rng.standard_normal(n_samples)
        self._lp = _log_prior(J)
        self._levels = J - 2 * np.arange(J + 1)

    def bpsk(self, snr: float) -> float:
        """I(x; y) for equiprobable +-1 at SNR amp^2 / sigma^2."""
        a = math.sqrt(snr)
        return float(1.0 - np.mean(np.logaddexp(0.0, -2 * a * (a + self.z_info))) / math.log(2))

    def cfsp(self, snr: float) -> float:
        """I(r; y) for the binomial CFSP symbol at per-level SNR amp^2 / sigma^2."""
        a = math.sqrt(snr)
        y = a * (self.J - 2 * self.t) + self.z_par
        ll = self._lp - (y[:, None] - a * self._levels) ** 2 / 2
        h_y = -np.mean(logsumexp(ll, axis=1) - 0.5 * math.log(2 * math.pi)) / math.log(2)
        return float(h_y - 0.5 * math.log2(2 * math.pi * math.e))


def pas_objective(spec, p: PowerProfile, objective: str = "mc", mc: McCapacity | None = None) -> float:
    s = p.p_avg / p.sigma2
    if objective == "analytic":
        return capacity_total(spec, p)
    if objective == "mc":
        if mc is None:
            raise ValueError("the Monte Carlo objective needs an McCapacity instance")
        info = spec.J * spec.K * mc.bpsk(p.mu_inf * s)
        parity = spec.R * mc.cfsp(p.mu_red * s) if spec.R else 0.0
        return info + parity
    raise ValueError(f"unknown objective {objective!r}")


def optimize_pas(spec, grid, n0: float, p_avg: float = 1.0, objective: str = "mc",
                 n_samples: int = 10_000, rng: np.random.Generator | None = None):
    """Grid search over mu_pas under the power constraint.

    Returns ``(best_mu_pas, curve)`` where ``curve`` is a list of
    ``(mu_pas, objective_value)``; ties resolve to the smallest grid value.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty mu_pas grid")
    mc = None
    if objective == "mc":
        mc = McCapacity(spec.J, n_samples, rng if rng is not None else np.random.default_rng(0))
    curve = []
    for g in grid:
        p = PowerProfile.from_pas(spec, g, p_avg, n0)
        curve.append((g, pas_objective(spec, p, objective, mc)))
    vals = np.array([v for _, v in curve])
    order = np.lexsort((np.array(grid), -vals))
    return grid[order[0]], curve
