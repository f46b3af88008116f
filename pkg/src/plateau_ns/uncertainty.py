"""Evidence uncertainty from simulated compression sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .compression import log_sum_exp, log_widths
from .seeding import as_generator

# simulated (n_sim x n_steps) blocks are processed in chunks of this many cells
_BLOCK_CELLS = 2_000_000


@dataclass
class ErrorEstimate:
    log_Z_mean: float
    log_Z_sd: float
    samples: np.ndarray
    H: float = math.nan

    def report(self) -> str:
        lines = [
            f"log_Z_mean = {self.log_Z_mean!r}",
            f"log_Z_sd = {self.log_Z_sd!r}",
            f"H = {self.H!r}",
            f"n_sim = {self.samples.size}",
        ]
        return "\n".join(lines) + "\n"


def _log_t_draws(rng, counts, n_rows, shrinkage):
    if shrinkage == "beta":
        # t ~ Beta(n, 1)  <=>  log t = -E/n with E ~ Exp(1)
        draws = rng.standard_exponential((n_rows, counts.size))
        draws /= counts
        return np.negative(draws, out=draws)
    if shrinkage == "mean":
        return np.broadcast_to(-1.0 / counts, (n_rows, counts.size))
    raise ValueError(f"unknown shrinkage {shrinkage!r}")


def _log_Z_rows(log_t, log_like):
    # log_like is sorted, so the -inf points form a prefix
    k = int(np.searchsorted(log_like, -math.inf, side="right"))
    if k == log_like.size:
        return np.full(log_t.shape[0], -math.inf)
    log_X = np.cumsum(log_t, axis=1)
    if k > 0:
        prev = log_X[:, k - 1:-1]
    else:
        prev = np.concatenate((np.zeros((log_t.shape[0], 1)), log_X[:, :-1]), axis=1)
    terms = log_widths(prev, log_t[:, k:])
    terms += log_like[k:]
    return log_sum_exp(terms, axis=1)


def simulate_logZ(counts, log_like, n_sim: int = 1000, rng=None,
                  shrinkage: str = "beta", groups=None) -> ErrorEstimate:
    """Distribution of ``log Z`` over random compression sequences.

    Each simulation draws one shrinkage factor per dead point from
    ``Beta(n_i, 1)``, with ``n_i`` the dynamic live count, and evaluates the
    quadrature sum on the resulting volumes.

    Parameters
    ----------
    counts, log_like : arrays
        Aligned live counts and non-decreasing log-likelihoods.
    n_sim : int
        Number of simulated sequences, at least 2.
    rng : numpy Generator, int or None
    shrinkage : {"beta", "mean"}
        ``"mean"`` replaces every draw by its geometric mean ``-1/n`` and so
        reproduces the deterministic geometric estimate.
    groups : list of TieGroup, optional
        Draw one ``Beta(n_base + 1 - q, q)`` factor per tie group instead of
        per-point factors. Within a group the factor is spread evenly in
        ``log X``; only the group total affects the evidence.
    """
    if n_sim < 2:
        raise ValueError("n_sim must be at least 2")
    counts = np.asarray(counts, dtype=float).reshape(-1)
    ll = np.asarray(log_like, dtype=float).reshape(-1)
    if counts.size != ll.size:
        raise ValueError("counts and log_like must have the same length")
    rng = as_generator(rng)
    if ll.size == 0:
        samples = np.full(n_sim, -math.inf)
        return ErrorEstimate(-math.inf, 0.0, samples)

    rows_per_block = max(1, _BLOCK_CELLS // ll.size)
    out = []
    done = 0
    while done < n_sim:
        rows = min(rows_per_block, n_sim - done)
        if groups is None:
            log_t = _log_t_draws(rng, counts, rows, shrinkage)
        else:
            log_t = _group_log_t(rng, groups, ll.size, rows, shrinkage)
        out.append(_log_Z_rows(log_t, ll))
        done += rows
    samples = np.concatenate(out)
    return ErrorEstimate(float(np.mean(samples)), float(np.std(samples, ddof=1)), samples)


def _group_log_t(rng, groups, n_steps, rows, shrinkage):
    log_t = np.empty((rows, n_steps))
    for g in groups:
        a, b = g.n_base + 1 - g.size, g.size
        if shrinkage == "beta":
            total = np.log(rng.beta(a, b, size=rows))
        else:
            total = np.full(rows, math.log(a / (a + b)))
        idx = list(g.member_indices)
        log_t[:, idx] = (total / len(idx))[:, None]
    return log_t


def shannon_entropy(weights, log_like, log_Z: float, atol: float = 1e-9) -> float:
    """Relative entropy of the posterior from the prior, in nats."""
    w = np.asarray(weights, dtype=float)
    ll = np.asarray(log_like, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > atol:
        raise ValueError("weights must be non-negative and sum to 1")
    mask = w > 0
    return float(np.sum(w[mask] * (ll[mask] - log_Z)))


def classic_error(H: float, n_live: int) -> float:
    """``sqrt(H / n_live)``; only meaningful for a constant live count."""
    if H < 0:
        raise ValueError("H must be non-negative")
    return math.sqrt(H / n_live)


def block_moments(n: int, q: int) -> tuple:
    """Mean and sd of the group compression ``Beta(n + 1 - q, q)``."""
    m, v = beta_dist.stats(n + 1 - q, q, moments="mv")
    return float(m), math.sqrt(float(v))
