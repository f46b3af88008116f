"""Original and plateau-aware nested sampling with exact rejection sampling."""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .run_record import RunMeta, RunRecord
from .seeding import stream

logger = logging.getLogger(__name__)

DEFAULT_MAX_REJECTIONS = 10**7


class CapabilityError(NotImplementedError):
    """The model does not provide the requested analytic quantity."""


class ContourExhausted(RuntimeError):
    """No prior draw above the contour within the rejection budget."""

    def __init__(self, threshold, rejections):
        self.threshold = threshold
        self.rejections = rejections
        super().__init__(
            f"contour exhausted: no point with logL > {threshold!r} "
            f"after {rejections} rejections")


class LikelihoodModel:
    """Log-likelihood over the unit hypercube.

    Subclasses implement :meth:`log_like_many`. Analytic hooks
    (:meth:`exact_log_Z`, :meth:`x_of_lambda`, :meth:`generalized_inverse`)
    raise :class:`CapabilityError` unless overridden.
    """

    dimension = 1
    likelihood_id = "model"

    def log_like_many(self, coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_like(self, coords) -> float:
        x = np.asarray(coords, dtype=float).reshape(1, self.dimension)
        return float(self.log_like_many(x)[0])

    def exact_log_Z(self) -> float:
        raise CapabilityError(f"{self.likelihood_id} has no exact evidence")

    def x_of_lambda(self, lam: float) -> tuple:
        raise CapabilityError(f"{self.likelihood_id} has no analytic X(lambda)")

    def generalized_inverse(self, X: float) -> float:
        raise CapabilityError(f"{self.likelihood_id} has no generalized inverse")


@dataclass(frozen=True)
class StopCondition:
    """When to stop sampling.

    ``kind`` is ``fixed_iterations`` (stop once ``count`` points have died),
    ``remainder_fraction`` (stop once ``max live L * X < epsilon * Z``) or
    ``all_live_equal``. Every run also stops as soon as all live points share
    one likelihood value, since nothing can then be drawn above the contour
    without first evicting the whole live set.
    """

    kind: str = "remainder_fraction"
    count: int = 0
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("fixed_iterations", "remainder_fraction", "all_live_equal"):
            raise ValueError(f"unknown stop condition {self.kind!r}")
        if self.kind == "remainder_fraction" and not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.kind == "fixed_iterations" and self.count < 0:
            raise ValueError("iteration count must be non-negative")

    @classmethod
    def fixed_iterations(cls, count):
        return cls("fixed_iterations", count=int(count))

    @classmethod
    def remainder_fraction(cls, epsilon=1e-3):
        return cls("remainder_fraction", epsilon=float(epsilon))

    @classmethod
    def all_live_equal(cls):
        return cls("all_live_equal")


@dataclass(frozen=True)
class SamplerConfig:
    n_live: int = 500
    seed: int = 0
    stop: StopCondition = StopCondition()
    max_rejections_per_draw: int = DEFAULT_MAX_REJECTIONS

    def __post_init__(self):
        if self.n_live < 2:
            raise ValueError("n_live must be at least 2")
        if self.max_rejections_per_draw < 1:
            raise ValueError("max_rejections_per_draw must be positive")


class PriorStream:
    """A single stream of uniform prior draws, filtered by likelihood contour.

    Candidates are generated in chunks and evaluated vectorised, but consumed
    strictly in order: a constrained draw takes the first unused candidate
    with ``logL > threshold`` and discards the ones before it. Each candidate
    is used at most once, so accepted points are exact independent draws
    from the constrained prior, and the accepted sequence does not depend on
    the chunk size.
    """

    def __init__(self, model: LikelihoodModel, rng: np.random.Generator,
                 max_rejections: int = DEFAULT_MAX_REJECTIONS):
        self.model = model
        self.rng = rng
        self.max_rejections = max_rejections
        self.n_evaluated = 0
        self.n_rejected = 0
        self._x = np.empty((0, model.dimension))
        self._l = np.empty(0)
        self._ll = self._l
        self._pos = 0
        self._chunk = 256

    def _refill(self):
        x = self.rng.random((self._chunk, self.model.dimension))
        l = np.asarray(self.model.log_like_many(x), dtype=float)
        # a list is faster to scan element-wise, but only worth it for short chunks
        ll = l.tolist() if l.size <= 4096 else l
        self._x, self._l, self._ll, self._pos = x, l, ll, 0
        self.n_evaluated += x.shape[0]

    def take(self, n):
        """The next ``n`` candidates, unconstrained."""
        xs, ls = [], []
        while len(ls) < n:
            if self._pos >= self._l.size:
                self._refill()
            k = min(n - len(ls), self._l.size - self._pos)
            xs.extend(self._x[self._pos:self._pos + k].copy())
            ls.extend(self._l[self._pos:self._pos + k].tolist())
            self._pos += k
        return xs, ls

    def draw(self, threshold):
        """Next candidate with ``logL > threshold`` as ``(coords, logL)``."""
        rejected = 0
        while True:
            if self._pos >= self._l.size:
                self._refill()
            pos, ll = self._pos, self._ll
            stop = min(pos + 8, len(ll))
            while pos < stop and not ll[pos] > threshold:
                pos += 1
            if pos < stop:
                hit = pos
            else:
                tail = self._l[pos:] > threshold
                k = int(tail.argmax()) if tail.size else 0
                hit = pos + k if tail.size and tail[k] else None
            if hit is not None:
                rejected += hit - self._pos
                self._pos = hit + 1
                self.n_rejected += rejected
                if rejected > self.max_rejections:
                    raise ContourExhausted(threshold, rejected)
                self._adapt(rejected)
                return self._x[hit].copy(), float(ll[hit])
            rejected += len(ll) - self._pos
            self._pos = len(ll)
            if rejected > self.max_rejections:
                self.n_rejected += rejected
                raise ContourExhausted(threshold, rejected)
            self._chunk = min(self._chunk * 2, 1 << 22)

    def _adapt(self, rejected):
        target = 8 * (rejected + 1)
        if target > self._chunk:
            self._chunk = min(1 << 22, 1 << int(math.ceil(math.log2(target))))
        elif 64 * target < self._chunk:
            self._chunk = max(256, self._chunk // 2)


def sample_constrained(model: LikelihoodModel, threshold, rng,
                       max_rejections: int = DEFAULT_MAX_REJECTIONS):
    """One prior draw with ``logL > threshold`` (``None`` means unconstrained)."""
    prior = PriorStream(model, rng, max_rejections)
    if threshold is None:
        xs, ls = prior.take(1)
        return xs[0], ls[0]
    return prior.draw(threshold)


def _log_add(a, b):
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


def _sample(model: LikelihoodModel, config: SamplerConfig, modified: bool,
            progress_every: int = 0):
    """Shared loop. Returns ``(record, n_live_trace)``.

    The trace holds ``size(P)`` at every eviction, final drain included.
    """
    n = config.n_live
    prior = PriorStream(model, stream(config.seed, "prior"), config.max_rejections_per_draw)
    xs, ls = prior.take(n)
    # heap entries: (logL, insertion id, coords, birth)
    heap = [(ls[k], k, xs[k], -math.inf) for k in range(n)]
    heapq.heapify(heap)
    next_id = n
    live_max = max(ls)

    dead_l, dead_b, dead_x, trace = [], [], [], []
    log_X, log_Z = 0.0, -math.inf
    stop = config.stop
    log_eps = math.log(stop.epsilon) if stop.kind == "remainder_fraction" else None
    termination = None
    outer = 0

    while True:
        l_star = heap[0][0]
        if l_star == live_max:
            termination = "all_live_equal"
            break
        if stop.kind == "fixed_iterations" and len(dead_l) >= stop.count:
            termination = "max_iterations"
            break
        if log_eps is not None and live_max + log_X < log_eps + log_Z:
            termination = "evidence_remainder"
            break

        evicted = 0
        while heap and heap[0][0] == l_star and (modified or evicted == 0):
            l, _, x, b = heapq.heappop(heap)
            size = len(heap) + 1
            step = -1.0 / size
            if l != -math.inf:
                log_Z = _log_add(log_Z, l + log_X + math.log(-math.expm1(step)))
            log_X += step
            dead_l.append(l)
            dead_b.append(b)
            dead_x.append(x)
            trace.append(size)
            evicted += 1

        # the live set never empties here: a tie group spanning all live
        # points is caught by the all_live_equal check above
        for _ in range(evicted):
            x, l = prior.draw(l_star)
            heapq.heappush(heap, (l, next_id, x, l_star))
            next_id += 1
            if l > live_max:
                live_max = l

        outer += 1
        if progress_every and outer % progress_every == 0:
            logger.info("iteration=%d logL*=%r size(P)=%d log_Z=%r",
                        len(dead_l), l_star, len(heap), log_Z)

    while heap:
        l, _, x, b = heapq.heappop(heap)
        dead_l.append(l)
        dead_b.append(b)
        dead_x.append(x)
        trace.append(len(heap) + 1)

    meta = RunMeta(n_live_target=n, seed=config.seed,
                   likelihood_id=model.likelihood_id, termination=termination,
                   dimension=model.dimension)
    coords = np.array(dead_x).reshape(len(dead_x), model.dimension)
    record = RunRecord(np.array(dead_l), np.array(dead_b), coords, meta)
    logger.debug("finished: %d dead points, %d candidates evaluated, termination=%s",
                 len(dead_l), prior.n_evaluated, termination)
    return record, np.array(trace, dtype=np.int64)


def run_original(model: LikelihoodModel, config: SamplerConfig,
                 progress_every: int = 0) -> RunRecord:
    """Replace the single worst live point per iteration.

    Ties at the worst contour are broken by insertion order.
    """
    return _sample(model, config, modified=False, progress_every=progress_every)[0]


def run_modified(model: LikelihoodModel, config: SamplerConfig,
                 progress_every: int = 0) -> RunRecord:
    """Evict every live point at the worst contour, one by one, then refill.

    Between evictions the live set shrinks, so the volume is compressed with
    the current count; once the tie set is gone it is replenished with as
    many fresh points drawn above the contour.
    """
    return _sample(model, config, modified=True, progress_every=progress_every)[0]


def sample_with_trace(model, config, algorithm="modified", progress_every=0):
    """Run either algorithm and also return the live count at each eviction."""
    if algorithm not in ("original", "modified"):
        raise ValueError(f"algorithm must be 'original' or 'modified', not {algorithm!r}")
    return _sample(model, config, algorithm == "modified", progress_every)


class TieBreakModel(LikelihoodModel):
    """``L -> L + eps * u`` with ``u ~ U(0, 1)`` drawn afresh for every evaluation.

    The perturbation is applied to the likelihood itself, so zero-likelihood
    plateaus are broken too.
    """

    def __init__(self, base: LikelihoodModel, eps: float, rng: np.random.Generator):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.base = base
        self.eps = float(eps)
        self.rng = rng
        self.dimension = base.dimension
        self.likelihood_id = base.likelihood_id

    def log_like_many(self, coords):
        base = np.asarray(self.base.log_like_many(coords), dtype=float)
        labels = 1.0 - self.rng.random(base.shape)  # in (0, 1]
        return np.logaddexp(base, math.log(self.eps) + np.log(labels))

    def exact_log_Z(self):
        return self.base.exact_log_Z()


def tie_break_wrap(model: LikelihoodModel, eps: float, rng=None) -> TieBreakModel:
    if rng is None:
        rng = stream(0, "labels")
    return TieBreakModel(model, eps, rng)
