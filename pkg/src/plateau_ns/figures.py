"""Figure data as delimited text tables.

Each figure is a list of panels ``(name, header, rows)``. :func:`render`
joins them into one stream, each panel introduced by a ``# panel: name``
line; :func:`write_panels` writes one CSV file per panel instead.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .compression import CompressionMethod, binom_beta_moments, compression_factor
from .ensemble import HEADER as MEMBER_HEADER
from .ensemble import EnsembleSpec, run_ensemble
from .samplers import SamplerConfig, StopCondition, sample_with_trace
from .testbeds import (PlateauGaussianModel, PlateauGaussianParams, WeddingCakeModel,
                       WeddingCakeParams, base_plateau_bias, quadrature_evidence_oracle,
                       scenario_model, ScenarioSpec)

FIGURES = (1, 2, 3, 4, 5)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(name, header, rows):
    return name, list(header), [[_cell(v) for v in r] for r in rows]


def fig1(grid=201, params=PlateauGaussianParams()):
    """Plateau-Gaussian: likelihood, prior law of L, X(L) and its generalized inverse."""
    plain = PlateauGaussianModel(params, plateau=False)
    flat = PlateauGaussianModel(params, plateau=True)
    x = np.linspace(0.0, 1.0, grid)
    like = _table("likelihood", ["x", "L_gauss", "L_plateau"],
                  zip(x, np.exp(plain.log_like_many(x)), np.exp(flat.log_like_many(x))))

    L_max = math.exp(flat.max_log_like)
    # include the plateau level itself so the jump in X shows as two limits
    levels = np.union1d(np.linspace(0.0, L_max, grid), [params.L_P])
    vol_rows, cdf_rows = [], []
    for L in levels:
        lam = math.log(L) if L > 0 else -math.inf
        left, right = flat.x_of_lambda(lam)
        vol_rows.append((L, left, right))
        # P(L_sample <= L) on both sides of a possible atom
        cdf_rows.append((L, 1.0 - left, 1.0 - right))
    prior_law = _table("prior_of_L", ["L", "cdf_below", "cdf_at"], cdf_rows)
    volume = _table("X_of_L", ["L", "X_left", "X_right"], vol_rows)

    X = np.linspace(0.0, 1.0, grid)[1:-1]
    inv = _table("generalized_inverse", ["X", "Lbar_plateau", "Lbar_gauss"],
                 ((v, math.exp(flat.generalized_inverse(v)),
                   math.exp(plain.generalized_inverse(v))) for v in X))
    return [like, prior_law, volume, inv]


def fig2(n=100):
    """Volume kept after q of n live points are evicted from a plateau."""
    rows = []
    for q in range(1, n + 1):
        rows.append((q,
                     compression_factor(n, q, CompressionMethod.NAIVE_EXPONENTIAL),
                     compression_factor(n, q, CompressionMethod.UNBIASED_LINEAR),
                     compression_factor(n, q, CompressionMethod.GEOMETRIC_SUM)))
    return [_table("compression", ["q", "naive", "unbiased", "geometric"], rows)]


def fig3(n=100, prior="flat"):
    """Mean and sd of the plateau compression, beta versus binomial treatment."""
    rows = []
    for q in range(1, n + 1):
        m = binom_beta_moments(n, q, prior)
        rows.append((q, m["beta_mean"], m["beta_sd"], m["binom_mean"], m["binom_sd"]))
    return [_table("moments", ["q", "beta_mean", "beta_sd", "binom_mean", "binom_sd"], rows)]


def fig4(runs=100, n_live=500, seed=0, jobs=1, n_sim=1000, f=2.0 / 3.0):
    """Repeated modified runs on the base-plateau scenario."""
    model = scenario_model(ScenarioSpec("base_plateau", f))
    exact = math.log(quadrature_evidence_oracle(model))
    spec = EnsembleSpec(model.likelihood_id, n_live, "modified", seed, runs, n_sim=n_sim)
    members = run_ensemble(spec, jobs)
    ref = _table("reference", ["exact_log_Z", "naive_bias"], [(exact, base_plateau_bias(f))])
    rows = [r.row().split(",") for r in members]
    return [ref, ("runs", MEMBER_HEADER.split(","), rows)]


def fig5(grid=101, n_live=100, seed=1, params=WeddingCakeParams()):
    """Wedding-cake surface on the first two coordinates and a live-count trace."""
    model = WeddingCakeModel(params)
    u = np.linspace(0.0, 1.0, grid)
    xx, yy = np.meshgrid(u, u, indexing="ij")
    pts = np.full((xx.size, params.D), 0.5)
    pts[:, 0] = xx.ravel()
    if params.D > 1:
        pts[:, 1] = yy.ravel()
    ll = model.log_like_many(pts)
    surface = _table("surface", ["x0", "x1", "logL"], zip(xx.ravel(), yy.ravel(), ll))
    record, trace = sample_with_trace(
        model, SamplerConfig(n_live, seed, StopCondition.remainder_fraction()), "modified")
    # dead points are recorded in eviction order, aligned with the trace
    live = _table("live_count", ["iteration", "logL", "n_live"],
                  zip(range(trace.size), record.log_like, trace))
    return [surface, live]


def figure(fig_id, **options):
    makers = {1: fig1, 2: fig2, 3: fig3, 4: fig4, 5: fig5}
    if fig_id not in makers:
        raise ValueError(f"unknown figure {fig_id!r}; choose from {FIGURES}")
    return makers[fig_id](**options)


def render(panels) -> str:
    out = []
    for name, header, rows in panels:
        out.append(f"# panel: {name}")
        out.append(",".join(header))
        out.extend(",".join(r) for r in rows)
        out.append("")
    return "\n".join(out)


def write_panels(panels, out_dir, prefix) -> list:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, header, rows in panels:
        path = os.path.join(out_dir, f"{prefix}_{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join([",".join(header), *(",".join(r) for r in rows)]) + "\n")
        paths.append(path)
    return paths
