"""Prior-volume sequences and evidence quadrature with dynamic live counts."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from .run_record import RunRecord, StructureError, canonical_order, deserialize
from .seeding import as_generator


class CompressionMethod(str, enum.Enum):
    NAIVE_EXPONENTIAL = "naive_exponential"
    UNBIASED_LINEAR = "unbiased_linear"
    ARITHMETIC_PRODUCT = "arithmetic_product"
    GEOMETRIC_SUM = "geometric_sum"


DEFAULT_METHOD = CompressionMethod.GEOMETRIC_SUM


@dataclass
class VolumeSequence:
    """Per-step live counts, log prior volumes and log shell widths.

    ``log_w[i]`` is ``log(X[i-1] - X[i])`` with ``X[-1] = 1``; multiplying by
    the likelihood of the ``i``-th dead point gives its importance weight.
    """

    n_live: np.ndarray
    log_X: np.ndarray
    log_w: np.ndarray
    method: CompressionMethod = DEFAULT_METHOD

    def __len__(self):
        return self.n_live.size


@dataclass
class EvidenceResult:
    log_Z: float
    log_Z_sd: float
    weights: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    volumes: VolumeSequence | None = None
    log_like: np.ndarray | None = None

    def report(self) -> str:
        """Key-value text report."""
        lines = [f"log_Z = {self.log_Z!r}", f"log_Z_sd = {self.log_Z_sd!r}"]
        for key, value in self.diagnostics.items():
            lines.append(f"{key} = {value!r}")
        return "\n".join(lines) + "\n"

    def weights_table(self) -> str:
        """Delimited per-point table: index, logL, n_live, logX, weight."""
        rows = ["index,logL,n_live,logX,weight"]
        for i in range(self.weights.size):
            rows.append(
                f"{i},{float(self.log_like[i])!r},{int(self.volumes.n_live[i])},"
                f"{float(self.volumes.log_X[i])!r},{float(self.weights[i])!r}")
        return "\n".join(rows) + "\n"


def _method(method) -> CompressionMethod:
    try:
        return CompressionMethod(method)
    except ValueError:
        raise ValueError(f"unknown compression method {method!r}") from None


def log_step(counts, method=DEFAULT_METHOD) -> np.ndarray:
    """Log of the per-eviction shrinkage factor for each live count."""
    n = np.asarray(counts, dtype=float)
    method = _method(method)
    if method in (CompressionMethod.GEOMETRIC_SUM, CompressionMethod.NAIVE_EXPONENTIAL):
        return -1.0 / n
    if method is CompressionMethod.ARITHMETIC_PRODUCT:
        return np.log(n) - np.log1p(n)
    with np.errstate(divide="ignore"):
        return np.log1p(-1.0 / n)


def log_sum_exp(a, axis=None):
    """``log(sum(exp(a)))`` along ``axis``; all ``-inf`` gives ``-inf``."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.reshape(()))


def log_widths(log_X_prev, log_t):
    """``log(X_prev - X_prev * t)`` without forming the difference."""
    with np.errstate(divide="ignore"):
        return log_X_prev + np.log(-np.expm1(log_t))


def volume_sequence(counts, method=DEFAULT_METHOD) -> VolumeSequence:
    """Compress the prior volume once per dead point.

    Parameters
    ----------
    counts : sequence of int
        Live count at each eviction, as produced by :func:`assign_nlive`.
    method : CompressionMethod
        ``geometric_sum`` steps ``log X`` by ``-1/n``; ``arithmetic_product``
        multiplies ``X`` by ``n/(n+1)``; ``unbiased_linear`` by ``1 - 1/n``,
        which telescopes to ``1 - q/n`` over a tie group. ``naive_exponential``
        uses the geometric step and is meant for constant counts.
    """
    method = _method(method)
    n = np.asarray(counts, dtype=np.int64).reshape(-1)
    if n.size and n.min() < 1:
        raise ValueError("live counts must be >= 1")
    if n.size == 0:
        empty = np.empty(0)
        return VolumeSequence(n, empty, empty.copy(), method)
    lt = log_step(n, method)
    log_X = np.cumsum(lt)
    log_X_prev = np.concatenate(([0.0], log_X[:-1]))
    return VolumeSequence(n, log_X, log_widths(log_X_prev, lt), method)


def compression_factor(n: int, q: int, method=DEFAULT_METHOD) -> float:
    """Volume fraction kept after ``q`` of ``n`` live points sit on a plateau."""
    method = _method(method)
    if not 1 <= q <= n:
        raise ValueError(f"need 1 <= q <= n, got n={n}, q={q}")
    if method is CompressionMethod.NAIVE_EXPONENTIAL:
        return math.exp(-q / n)
    if method is CompressionMethod.UNBIASED_LINEAR:
        return 1.0 - q / n
    if method is CompressionMethod.ARITHMETIC_PRODUCT:
        return 1.0 - q / (n + 1)
    return math.exp(-math.fsum(1.0 / (n - i + 1) for i in range(1, q + 1)))


def assign_nlive(groups) -> np.ndarray:
    """Live count at each eviction: ``n_base, n_base-1, ...`` within a group."""
    counts = []
    for g in groups:
        if g.n_base - (g.size - 1) < 1:
            raise StructureError(
                f"tie group at level {g.level!r} claims {g.size} deaths "
                f"from {g.n_base} live points")
        counts.extend(range(g.n_base, g.n_base - g.size, -1))
    return np.asarray(counts, dtype=np.int64)


def naive_nlive(n_points: int, n_live: int) -> np.ndarray:
    """Constant live count, draining ``n_live..1`` over the last points."""
    return np.minimum(n_live, np.arange(n_points, 0, -1)).astype(np.int64)


def _diagnostics(log_like, counts):
    ll = np.asarray(log_like)
    if ll.size == 0:
        return {"tie_group_count": 0, "min_n_live": 0, "plateau_fraction_of_steps": 0.0}
    starts = np.flatnonzero(np.concatenate(([True], ll[1:] != ll[:-1])))
    sizes = np.diff(np.append(starts, ll.size))
    plateau_steps = int(sizes[sizes > 1].sum())
    return {
        "tie_group_count": int((sizes > 1).sum()),
        "min_n_live": int(np.min(counts)),
        "plateau_fraction_of_steps": plateau_steps / ll.size,
    }


def evidence_quadrature(log_like, volumes: VolumeSequence, final_live=None) -> EvidenceResult:
    """Riemann-sum evidence ``sum_i L_i (X_{i-1} - X_i)`` in log space.

    Parameters
    ----------
    log_like : array, non-decreasing
    volumes : VolumeSequence aligned with ``log_like``
    final_live : array of float, optional
        Log-likelihoods of live points left at termination. They are sorted
        and evicted one by one without replacement (counts ``m, m-1, ..., 1``),
        extending the same sequence.

    Returns
    -------
    EvidenceResult
        ``log_Z_sd`` is NaN; see :mod:`plateau_ns.uncertainty`.
    """
    ll = np.asarray(log_like, dtype=float).reshape(-1)
    if ll.size != len(volumes):
        raise StructureError(
            f"{ll.size} likelihoods but {len(volumes)} volume steps")
    if ll.size > 1 and np.any(ll[1:] < ll[:-1]):
        raise StructureError("log_like must be non-decreasing")
    if final_live is not None and len(final_live):
        tail = np.sort(np.asarray(final_live, dtype=float))
        if ll.size and tail[0] < ll[-1]:
            raise StructureError("final live points lie below the last dead point")
        counts = np.concatenate((volumes.n_live, np.arange(tail.size, 0, -1)))
        ll = np.concatenate((ll, tail))
        volumes = volume_sequence(counts, volumes.method)

    if ll.size == 0:
        return EvidenceResult(-math.inf, math.nan, np.empty(0),
                              _diagnostics(ll, [0]), volumes, ll)
    log_terms = ll + volumes.log_w
    finite = np.isfinite(ll)
    log_Z = float(log_sum_exp(log_terms[finite])) if finite.any() else -math.inf
    if math.isfinite(log_Z):
        weights = np.exp(log_terms - log_Z)
    else:
        weights = np.zeros(ll.size)
    return EvidenceResult(log_Z, math.nan, weights,
                          _diagnostics(ll, volumes.n_live), volumes, ll)


def evaluate(run: RunRecord, method=DEFAULT_METHOD, nlive: str = "modified",
             drop_final: bool = False, n_sim: int = 0, rng=None,
             merge_tol: float = 0.0) -> EvidenceResult:
    """Resum a run record into an evidence estimate.

    Parameters
    ----------
    nlive : {"modified", "naive"}
        ``modified`` evicts tie groups one by one with decreasing counts;
        ``naive`` uses ``n_live_target`` for every point except the final
        drain, which is what the original algorithm reports.
    drop_final : bool
        Discard the last ``n_live_target`` points (the live set at
        termination) instead of accounting for them.
    n_sim : int
        If at least 2, fill ``log_Z_sd`` by simulating compression sequences.
    """
    ordered, groups = canonical_order(run, merge_tol=merge_tol)
    if nlive == "modified":
        counts = assign_nlive(groups)
    elif nlive == "naive":
        counts = naive_nlive(len(ordered), ordered.meta.n_live_target)
    else:
        raise ValueError(f"nlive must be 'modified' or 'naive', not {nlive!r}")
    ll = ordered.log_like
    if drop_final:
        keep = max(len(ordered) - ordered.meta.n_live_target, 0)
        ll, counts = ll[:keep], counts[:keep]
    result = evidence_quadrature(ll, volume_sequence(counts, method))
    result.diagnostics["tie_group_count"] = sum(1 for g in groups if g.size > 1)
    # the final drain always reaches 1; report the minimum before it
    body = counts[:max(len(ordered) - ordered.meta.n_live_target, 0)]
    if body.size:
        result.diagnostics["min_n_live"] = int(body.min())
    if n_sim >= 2:
        from .uncertainty import simulate_logZ

        rng = as_generator(rng, ordered.meta.seed)
        est = simulate_logZ(counts, ll, n_sim, rng)
        result.log_Z_sd = est.log_Z_sd
    return result


def resum(path, method=DEFAULT_METHOD, births: str = "require", **kwargs) -> EvidenceResult:
    """Read a chain file and resum it with plateau-aware live counts."""
    return evaluate(deserialize(path, births=births), method=method, **kwargs)


# -- binomial versus beta compression --------------------------------------

def binom_beta_moments(n: int, q: int, prior: str = "flat") -> dict:
    """Mean and sd of the compression factor under the two plateau treatments.

    The beta treatment gives ``t ~ Beta(n+1-q, q)``. The binomial treatment
    with a flat prior on ``t`` gives ``Beta(n+1-q, q+1)``; with a prior
    proportional to ``1/(1-t)`` it coincides with the beta treatment.
    """
    if not 1 <= q <= n:
        raise ValueError(f"need 1 <= q <= n, got n={n}, q={q}")
    if prior not in ("flat", "logarithmic"):
        raise ValueError(f"prior must be 'flat' or 'logarithmic', not {prior!r}")
    a = n + 1 - q
    bm, bv = beta_dist.stats(a, q, moments="mv")
    b_binom = q + 1 if prior == "flat" else q
    nm, nv = beta_dist.stats(a, b_binom, moments="mv")
    return {
        "beta_mean": float(bm),
        "beta_sd": math.sqrt(float(bv)),
        "binom_mean": float(nm),
        "binom_sd": math.sqrt(float(nv)),
    }
