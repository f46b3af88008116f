"""Analytic test likelihoods, their prior-volume functions and exact evidences.

All levels ``lam`` are log-likelihood values. ``x_of_lambda`` returns the
pair ``(P(logL >= lam), P(logL > lam))``: the left and right limits of the
enclosed prior volume, which differ exactly at plateau levels.

Models are addressed by identifiers of the form ``name:key=value,...``, for
example ``wedding-cake:alpha=0.7,sigma=0.2,D=2``; see :func:`model_from_id`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, ndtr

from .samplers import CapabilityError, LikelihoodModel

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class ConvergenceError(RuntimeError):
    def __init__(self, achieved, requested):
        self.achieved = achieved
        super().__init__(
            f"quadrature error bound {achieved:.3g} exceeds requested {requested:.3g}")


def _format_id(name, params):
    body = ",".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in params.items())
    return f"{name}:{body}" if body else name


def _box_width(mu, d):
    """Length of ``{x in [0, 1] : |x - mu| < d}``."""
    return max(0.0, min(mu + d, 1.0) - max(mu - d, 0.0))


def _box_halfwidth(mu, X):
    """Inverse of :func:`_box_width` for ``0 <= X <= 1``."""
    near = min(mu, 1.0 - mu)
    if X <= 2 * near:
        return X / 2
    return X - near


# -- Gaussian profiles -------------------------------------------------------

class GaussianModel(LikelihoodModel):
    """Normal density with mean ``mu`` and width ``sigma`` in each coordinate."""

    def __init__(self, mu=0.5, sigma=0.1, D=1):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.mu, self.sigma, self.dimension = float(mu), float(sigma), int(D)
        self.likelihood_id = _format_id("gauss", {"mu": self.mu, "sigma": self.sigma,
                                                  "D": self.dimension})
        self._log_peak = -self.dimension * (math.log(self.sigma) + LOG_SQRT_2PI)

    def log_like_many(self, coords):
        x = np.asarray(coords, dtype=float).reshape(-1, self.dimension)
        z = (x - self.mu) / self.sigma
        return self._log_peak - 0.5 * np.sum(z * z, axis=1)

    @property
    def max_log_like(self):
        return self._log_peak

    def exact_log_Z(self):
        mass = ndtr((1 - self.mu) / self.sigma) - ndtr(-self.mu / self.sigma)
        return self.dimension * math.log(mass)

    def _require_1d(self):
        if self.dimension != 1:
            raise CapabilityError("X(lambda) is only implemented for D = 1")

    def _halfwidth(self, lam):
        if lam >= self._log_peak:
            return 0.0
        return self.sigma * math.sqrt(2 * (self._log_peak - lam))

    def x_of_lambda(self, lam):
        self._require_1d()
        X = 1.0 if lam == -math.inf else _box_width(self.mu, self._halfwidth(lam))
        return X, X

    def generalized_inverse(self, X):
        self._require_1d()
        d = _box_halfwidth(self.mu, X)
        return self._log_peak - 0.5 * (d / self.sigma) ** 2

    def volume_pieces(self):
        self._require_1d()
        near = min(self.mu, 1 - self.mu)
        return [b for b in (2 * near,) if 0 < b < 1]


@dataclass(frozen=True)
class PlateauGaussianParams:
    mu: float = 0.5
    sigma: float = 0.25
    L_P: float = 0.5

    def __post_init__(self):
        peak = 1.0 / (self.sigma * math.sqrt(2 * math.pi))
        if self.sigma <= 0 or not 0 < self.L_P < peak:
            raise ValueError("need sigma > 0 and 0 < L_P < peak of the profile")


def plateau_gaussian_log_like(x, params=PlateauGaussianParams(), plateau=True):
    """``log max(g(x), L_P)`` for the normal density ``g``; vectorised in ``x``."""
    x = np.asarray(x, dtype=float)
    log_g = (-0.5 * ((x - params.mu) / params.sigma) ** 2
             - math.log(params.sigma) - LOG_SQRT_2PI)
    if not plateau:
        return log_g
    return np.maximum(log_g, math.log(params.L_P))


class PlateauGaussianModel(LikelihoodModel):
    """One-dimensional Gaussian whose tails are flattened at ``L_P``."""

    dimension = 1

    def __init__(self, params=PlateauGaussianParams(), plateau=True):
        self.params = params
        self.plateau = bool(plateau)
        self._gauss = GaussianModel(params.mu, params.sigma, 1)
        self._log_LP = math.log(params.L_P)
        self.likelihood_id = _format_id("plateau-gauss", {
            "mu": float(params.mu), "sigma": float(params.sigma),
            "L_P": float(params.L_P), "plateau": int(self.plateau)})

    def log_like_many(self, coords):
        x = np.asarray(coords, dtype=float).reshape(-1)
        return plateau_gaussian_log_like(x, self.params, self.plateau)

    @property
    def max_log_like(self):
        return self._gauss.max_log_like

    @property
    def plateau_volume(self):
        """Prior mass strictly above the plateau level."""
        return self._gauss.x_of_lambda(self._log_LP)[1]

    def exact_log_Z(self):
        if not self.plateau:
            return self._gauss.exact_log_Z()
        d = self._gauss._halfwidth(self._log_LP)
        p = self.params
        lo, hi = max(p.mu - d, 0.0), min(p.mu + d, 1.0)
        core = ndtr((hi - p.mu) / p.sigma) - ndtr((lo - p.mu) / p.sigma)
        return math.log(core + p.L_P * (1.0 - (hi - lo)))

    def x_of_lambda(self, lam):
        if not self.plateau:
            return self._gauss.x_of_lambda(lam)
        if lam < self._log_LP:
            return 1.0, 1.0
        inner = self._gauss.x_of_lambda(lam)[1]
        if lam == self._log_LP:
            return 1.0, inner
        return inner, inner

    def generalized_inverse(self, X):
        if self.plateau and X >= self.plateau_volume:
            return self._log_LP
        return self._gauss.generalized_inverse(X)

    def volume_pieces(self):
        pieces = self._gauss.volume_pieces()
        if self.plateau:
            pieces.append(self.plateau_volume)
        return sorted(set(pieces))


# -- wedding cake --------------------------------------------------------------

@dataclass(frozen=True)
class WeddingCakeParams:
    alpha: float = 0.7
    sigma: float = 0.2
    D: int = 2

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sigma <= 0 or self.D < 1:
            raise ValueError("need sigma > 0 and D >= 1")


def wedding_cake_level(i, params: WeddingCakeParams):
    """Log-likelihood of tier ``i`` (tier 0 is the outermost shell)."""
    return -np.power(params.alpha, 2.0 * np.asarray(i) / params.D) / (8 * params.sigma ** 2)


def wedding_cake_tier(coords, params: WeddingCakeParams):
    """Tier index of each point; ``-1`` marks the exact centre."""
    x = np.asarray(coords, dtype=float).reshape(-1, params.D)
    r = np.max(np.abs(x - 0.5), axis=1)
    with np.errstate(divide="ignore"):
        y = params.D * np.log(2 * r) / math.log(params.alpha)
    tier = np.floor(y)
    tier[r == 0] = -1
    return tier.astype(np.int64)


def wedding_cake_log_like(coords, params: WeddingCakeParams = WeddingCakeParams()):
    """Tiered log-likelihood ``-alpha**(2 i / D) / (8 sigma**2)``, vectorised.

    ``i = floor(D log_alpha(2 r))`` with ``r`` the infinity-norm distance from
    the centre of the cube; the centre itself has log-likelihood 0.
    """
    x = np.asarray(coords, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[-1] != params.D:
        raise ValueError(f"expected {params.D} coordinates, got {x.shape[-1]}")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("coordinates must lie in the unit cube")
    tier = wedding_cake_tier(x, params)
    out = wedding_cake_level(np.maximum(tier, 0), params)
    out[tier < 0] = 0.0
    return out


class WeddingCakeModel(LikelihoodModel):
    """Concentric hypercubic plateaus of volume ``alpha**i (1 - alpha)``."""

    max_log_like = 0.0

    def __init__(self, params=WeddingCakeParams()):
        self.params = params
        self.dimension = params.D
        self.likelihood_id = _format_id("wedding-cake", {
            "alpha": float(params.alpha), "sigma": float(params.sigma), "D": params.D})

    def log_like_many(self, coords):
        return wedding_cake_log_like(coords, self.params)

    def level(self, i):
        return float(wedding_cake_level(i, self.params))

    def exact_log_Z(self):
        return wedding_cake_log_Z(self.params)

    def _first_tier_above(self, lam, strict):
        """Smallest tier index whose level is > lam (or >= lam)."""
        if lam < self.level(0) or (not strict and lam == self.level(0)):
            return 0
        p = self.params
        guess = 0.5 * p.D * math.log(-8 * p.sigma ** 2 * lam) / math.log(p.alpha)
        i = max(0, int(math.floor(guess)) - 2)
        while True:
            lvl = self.level(i)
            if lvl > lam or (not strict and lvl == lam):
                return i
            i += 1

    def x_of_lambda(self, lam):
        if lam == -math.inf:
            return 1.0, 1.0
        if lam >= 0.0:
            # only the measure-zero centre reaches 0
            return 0.0, 0.0
        a = self.params.alpha
        left = a ** self._first_tier_above(lam, strict=False)
        right = a ** self._first_tier_above(lam, strict=True)
        return left, right

    def generalized_inverse(self, X):
        if not 0 < X < 1:
            raise ValueError("X must lie in (0, 1)")
        a = self.params.alpha
        j = int(math.floor(math.log(X) / math.log(a)))
        while a ** (j + 1) > X:
            j += 1
        while j >= 0 and a ** j <= X:
            j -= 1
        return self.level(max(j, 0))

    def volume_pieces(self, tail=1e-300):
        a = self.params.alpha
        out, v = [], a
        while v > tail:
            out.append(v)
            v *= a
        return out


def _wc_log_terms(params, i):
    i = np.asarray(i, dtype=float)
    return (wedding_cake_level(i, params) + i * math.log(params.alpha)
            + math.log1p(-params.alpha))


def wedding_cake_log_Z(params: WeddingCakeParams = WeddingCakeParams(),
                       rel_tol: float = 1e-12, window: bool = False) -> float:
    """Log-evidence of the wedding cake from its tier series.

    The series ``sum_i exp(level_i) alpha**i (1 - alpha)`` is summed until the
    tail bound ``alpha**(k+1)`` falls below ``rel_tol`` times the partial sum.
    With ``window=True`` only terms around the peak of the summand are used;
    the window is widened until the omitted terms are provably below
    ``rel_tol`` of the windowed sum.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    log_a = math.log(params.alpha)
    log_tol = math.log(rel_tol)
    if not window:
        total, k, block = -math.inf, 0, 64
        while True:
            terms = _wc_log_terms(params, np.arange(k, k + block))
            total = float(np.logaddexp(total, logsumexp(terms)))
            k += block
            if k * log_a <= log_tol + total:
                return total
            block = min(block * 2, 1 << 16)

    # summand peaks where alpha**(2i/D) = 4 D sigma**2; width sqrt(D/2)/|log alpha|
    D, s = params.D, params.sigma
    centre = max(0.0, 0.5 * D * math.log(4 * D * s * s) / log_a)
    unit = math.sqrt(D / 2) / abs(log_a)
    half = 3 * unit + 1
    while True:
        lo = max(0, int(math.floor(centre - half)))
        hi = int(math.ceil(centre + half))
        terms = _wc_log_terms(params, np.arange(lo, hi + 1))
        total = float(logsumexp(terms))
        below = math.log(lo) + float(terms[0]) if lo > 0 else -math.inf
        above = (hi + 1) * log_a
        if float(np.logaddexp(below, above)) <= log_tol + total:
            return total
        half *= 2


# -- scenario constructions ----------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Plateau at the base (``L = 0`` on a fraction ``f``) or at the peak."""

    kind: str = "base_plateau"
    f: float = 2.0 / 3.0
    s: float | None = None
    cap_log_like: float = -2.21

    def __post_init__(self):
        if self.kind not in ("base_plateau", "peak_plateau"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not 0 < self.f < 1:
            raise ValueError("f must lie in (0, 1)")
        if self.s is not None and self.s <= 0:
            raise ValueError("s must be positive")

    @property
    def width(self):
        if self.s is not None:
            return self.s
        return 0.1 if self.kind == "base_plateau" else 0.075


class BasePlateauModel(LikelihoodModel):
    """``L(x) = exp(-x**2 / (2 s**2))`` on ``[0, 1-f)`` and zero on ``[1-f, 1]``."""

    dimension = 1
    max_log_like = 0.0

    def __init__(self, f=2.0 / 3.0, s=0.1):
        ScenarioSpec("base_plateau", f, s)
        self.f, self.s = float(f), float(s)
        self.edge = 1.0 - self.f
        self.likelihood_id = _format_id("scenario-base", {"f": self.f, "s": self.s})

    def log_like_many(self, coords):
        x = np.asarray(coords, dtype=float).reshape(-1)
        return np.where(x < self.edge, -0.5 * (x / self.s) ** 2, -np.inf)

    def exact_log_Z(self):
        return (math.log(self.s) + LOG_SQRT_2PI
                + math.log(ndtr(self.edge / self.s) - 0.5))

    def x_of_lambda(self, lam):
        if lam == -math.inf:
            return 1.0, self.edge
        if lam >= 0.0:
            return 0.0, 0.0
        X = min(self.s * math.sqrt(-2 * lam), self.edge)
        return X, X

    def generalized_inverse(self, X):
        if X >= self.edge:
            return -math.inf
        return -0.5 * (X / self.s) ** 2

    def volume_pieces(self):
        return [self.edge]


class PeakPlateauModel(LikelihoodModel):
    """Gaussian bump centred at 1/2, capped at ``cap_log_like``.

    The amplitude is chosen so that the capped region ``|x - 1/2| < f/2``
    holds a prior fraction ``f``.
    """

    dimension = 1

    def __init__(self, f=0.161, cap_log_like=-2.21, s=0.075):
        ScenarioSpec("peak_plateau", f, s, cap_log_like)
        if not math.isfinite(cap_log_like):
            raise ValueError("cap level must be finite")
        self.f, self.cap, self.s = float(f), float(cap_log_like), float(s)
        self.log_A = self.cap + 0.5 * (0.5 * self.f / self.s) ** 2
        self.likelihood_id = _format_id("scenario-peak", {
            "f": self.f, "cap": self.cap, "s": self.s})

    @property
    def max_log_like(self):
        return self.cap

    def log_like_many(self, coords):
        x = np.asarray(coords, dtype=float).reshape(-1)
        return np.minimum(self.log_A - 0.5 * ((x - 0.5) / self.s) ** 2, self.cap)

    def exact_log_Z(self):
        s = self.s
        tail = 2 * (ndtr(0.5 / s) - ndtr(0.5 * self.f / s))
        log_bump = self.log_A + math.log(s) + LOG_SQRT_2PI + math.log(tail)
        return float(np.logaddexp(math.log(self.f) + self.cap, log_bump))

    def x_of_lambda(self, lam):
        if lam > self.cap:
            return 0.0, 0.0
        if lam == self.cap:
            return self.f, 0.0
        d = self.s * math.sqrt(2 * (self.log_A - lam))
        X = min(2 * d, 1.0)
        return X, X

    def generalized_inverse(self, X):
        if X < self.f:
            return self.cap
        return self.log_A - 0.5 * (0.5 * X / self.s) ** 2

    def volume_pieces(self):
        return [self.f]


def scenario_model(spec: ScenarioSpec) -> LikelihoodModel:
    if spec.kind == "base_plateau":
        return BasePlateauModel(spec.f, spec.width)
    return PeakPlateauModel(spec.f, spec.cap_log_like, spec.width)


class ConstantModel(LikelihoodModel):
    """The same log-likelihood everywhere: one plateau covering the prior."""

    def __init__(self, log_c=0.0, D=1):
        self.log_c, self.dimension = float(log_c), int(D)
        self.max_log_like = self.log_c
        self.likelihood_id = _format_id("constant", {"log_c": self.log_c, "D": self.dimension})

    def log_like_many(self, coords):
        x = np.asarray(coords, dtype=float).reshape(-1, self.dimension)
        return np.full(x.shape[0], self.log_c)

    def exact_log_Z(self):
        return self.log_c

    def x_of_lambda(self, lam):
        if lam < self.log_c:
            return 1.0, 1.0
        if lam == self.log_c:
            return 1.0, 0.0
        return 0.0, 0.0

    def generalized_inverse(self, X):
        return self.log_c

    def volume_pieces(self):
        return []


# -- closed-form plateau effects ------------------------------------------------

def base_plateau_bias(f: float) -> float:
    """Log-evidence overestimate of naive compression through a base plateau."""
    if not 0 < f < 1:
        raise ValueError("f must lie in (0, 1)")
    return -math.log1p(-f) - f


def peak_plateau_deficit(f: float, max_log_like: float, deficient_log_Z: float) -> float:
    """``log(Z + f max L) - log Z`` for evidence ``Z`` missing a peak plateau."""
    if not 0 < f < 1:
        raise ValueError("f must lie in (0, 1)")
    if not math.isfinite(deficient_log_Z):
        raise ValueError("deficient_log_Z must be finite")
    return float(np.logaddexp(deficient_log_Z, math.log(f) + max_log_like)) - deficient_log_Z


# -- quadrature oracle ----------------------------------------------------------

def quadrature_evidence_oracle(model: LikelihoodModel, abs_tol: float = 1e-10) -> float:
    """Evidence ``int_0^1 exp(Lbar(X)) dX`` by adaptive quadrature in volume.

    The integral is split at the model's plateau edges; the region below
    ``X = abs_tol / (2 max L)`` is bounded rather than integrated, and its
    contribution estimated by the midpoint of those bounds.
    """
    if not hasattr(model, "volume_pieces"):
        raise CapabilityError(f"{model.likelihood_id} has no generalized inverse")
    max_L = math.exp(model.max_log_like)
    tail = 0.5 * abs_tol / max_L
    if isinstance(model, WeddingCakeModel):
        cuts = model.volume_pieces(tail)
    else:
        cuts = model.volume_pieces()
    edges = sorted({tail, 1.0, *(c for c in cuts if tail < c < 1.0)})
    budget = 0.5 * abs_tol / max(len(edges) - 1, 1)

    def integrand(X):
        return math.exp(model.generalized_inverse(X))

    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(integrand, a, b, epsabs=budget, epsrel=0.0, limit=200)
        total += val
        err += e
    # Lbar is non-increasing, so on [0, tail] it lies between Lbar(tail) and
    # max L; the midpoint is within abs_tol / 4 of the true contribution
    total += 0.5 * tail * (integrand(tail) + max_L)
    if err > 0.5 * abs_tol:
        raise ConvergenceError(err + 0.5 * abs_tol, abs_tol)
    return total


# -- model registry --------------------------------------------------------------

def _parse_id(likelihood_id):
    name, _, body = likelihood_id.partition(":")
    params = {}
    if body:
        for item in body.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed parameter {item!r} in {likelihood_id!r}")
            params[key.strip()] = value.strip()
    return name.strip(), params


_MODEL_KEYS = {
    "gauss": ("mu", "sigma", "D"),
    "plateau-gauss": ("mu", "sigma", "L_P", "plateau"),
    "wedding-cake": ("alpha", "sigma", "D"),
    "scenario-base": ("f", "s"),
    "scenario-peak": ("f", "cap", "s"),
    "constant": ("log_c", "D"),
}


def model_from_id(likelihood_id: str) -> LikelihoodModel:
    """Build a model from ``name:key=value,...``.

    Names and keys: ``gauss`` (mu, sigma, D), ``plateau-gauss`` (mu, sigma,
    L_P, plateau), ``wedding-cake`` (alpha, sigma, D), ``scenario-base``
    (f, s), ``scenario-peak`` (f, cap, s), ``constant`` (log_c, D). Omitted
    keys take their defaults.
    """
    name, raw = _parse_id(likelihood_id)
    if name not in _MODEL_KEYS:
        raise ValueError(f"unknown model {name!r}")
    unknown = sorted(set(raw) - set(_MODEL_KEYS[name]))
    if unknown:
        raise ValueError(f"unknown parameters {unknown} for model {name!r}")
    p = {k: float(v) for k, v in raw.items()}
    if name == "gauss":
        return GaussianModel(p.get("mu", 0.5), p.get("sigma", 0.1), int(p.get("D", 1)))
    if name == "plateau-gauss":
        params = PlateauGaussianParams(p.get("mu", 0.5), p.get("sigma", 0.25),
                                       p.get("L_P", 0.5))
        return PlateauGaussianModel(params, bool(p.get("plateau", 1)))
    if name == "wedding-cake":
        return WeddingCakeModel(WeddingCakeParams(p.get("alpha", 0.7), p.get("sigma", 0.2),
                                                  int(p.get("D", 2))))
    if name == "scenario-base":
        return BasePlateauModel(p.get("f", 2.0 / 3.0), p.get("s", 0.1))
    if name == "scenario-peak":
        return PeakPlateauModel(p.get("f", 0.161), p.get("cap", -2.21), p.get("s", 0.075))
    return ConstantModel(p.get("log_c", 0.0), int(p.get("D", 1)))
