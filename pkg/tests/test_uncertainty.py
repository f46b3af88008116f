import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateau_ns.compression import evaluate, evidence_quadrature, log_sum_exp, volume_sequence
from plateau_ns.run_record import canonical_order
from plateau_ns.samplers import SamplerConfig, run_modified, run_original
from plateau_ns.testbeds import GaussianModel, WeddingCakeModel
from plateau_ns.uncertainty import (block_moments, classic_error, shannon_entropy,
                                    simulate_logZ)

# KL divergence of the N(0.5, 0.1) posterior (truncated to [0, 1]) from the
# uniform prior, by 1-D quadrature
GAUSS_KL = 0.8836545666945164


@pytest.fixture(scope="module")
def gauss_run():
    rec = run_original(GaussianModel(0.5, 0.1), SamplerConfig(500, 21))
    res = evaluate(rec, nlive="naive")
    return rec, res


def test_constant_count_sd_matches_classic(gauss_run):
    rec, res = gauss_run
    est = simulate_logZ(res.volumes.n_live, res.log_like, 500, rng=1)
    H = shannon_entropy(res.weights, res.log_like, res.log_Z)
    classic = classic_error(H, 500)
    assert abs(est.log_Z_sd / classic - 1) < 0.2
    assert abs(est.log_Z_mean - res.log_Z) < est.log_Z_sd
    assert est.log_Z_sd == pytest.approx(np.std(est.samples, ddof=1), rel=1e-12)


def test_entropy_matches_analytic_kl(gauss_run):
    _, res = gauss_run
    H = shannon_entropy(res.weights, res.log_like, res.log_Z)
    assert abs(H / GAUSS_KL - 1) < 0.1


def test_mean_seam_is_exact():
    rec = run_modified(WeddingCakeModel(), SamplerConfig(100, 2))
    res = evaluate(rec)
    est = simulate_logZ(res.volumes.n_live, res.log_like, 3, shrinkage="mean")
    assert np.all(est.samples == res.log_Z)
    assert est.log_Z_sd == 0.0


def test_plateau_counts_increase_sd():
    rec = run_modified(WeddingCakeModel(), SamplerConfig(100, 3))
    res = evaluate(rec)
    dynamic = simulate_logZ(res.volumes.n_live, res.log_like, 4000, rng=5)
    constant = simulate_logZ(np.full(len(rec), 100), res.log_like, 4000, rng=5)
    assert res.volumes.n_live.min() < 100
    assert dynamic.log_Z_sd > constant.log_Z_sd


def test_inserting_a_single_live_point_step_increases_sd():
    ll = np.linspace(-20.0, 0.0, 300)
    counts = np.full(300, 50)
    base = simulate_logZ(counts, ll, 10_000, rng=7)
    for pos in (50, 150, 250):
        ll2 = np.insert(ll, pos, ll[pos])
        c2 = np.insert(counts, pos, 1)
        assert simulate_logZ(c2, ll2, 10_000, rng=7).log_Z_sd >= base.log_Z_sd


def test_block_mode_same_group_law():
    rec = run_modified(WeddingCakeModel(), SamplerConfig(50, 4))
    ordered, groups = canonical_order(rec)
    res = evaluate(rec)
    per_step = simulate_logZ(res.volumes.n_live, ordered.log_like, 4000, rng=1)
    block = simulate_logZ(res.volumes.n_live, ordered.log_like, 4000, rng=2, groups=groups)
    tol = 4 * math.hypot(per_step.log_Z_sd, block.log_Z_sd) / math.sqrt(4000)
    assert abs(per_step.log_Z_mean - block.log_Z_mean) < tol
    assert block.log_Z_sd == pytest.approx(per_step.log_Z_sd, rel=0.1)


def test_block_moments():
    m, sd = block_moments(100, 50)
    assert m == pytest.approx(51 / 101, rel=1e-14)
    # Beta(a, b) variance a b / ((a + b)^2 (a + b + 1))
    assert sd == pytest.approx(math.sqrt(51 * 50 / (101 ** 2 * 102)), rel=1e-12)


def test_simulate_rejects_small_n_sim():
    with pytest.raises(ValueError):
        simulate_logZ([10], [0.0], n_sim=1)
    with pytest.raises(ValueError):
        simulate_logZ([10, 10], [0.0], n_sim=5)


def test_seeded_simulation_reproducible():
    a = simulate_logZ([5, 4, 3, 2, 1], [0, 1, 2, 3, 4.0], 100, rng=3)
    b = simulate_logZ([5, 4, 3, 2, 1], [0, 1, 2, 3, 4.0], 100, rng=3)
    assert np.array_equal(a.samples, b.samples)


def test_minus_inf_prefix_ignored():
    ll = np.array([-math.inf, -math.inf, 0.0, 1.0])
    counts = np.array([4, 3, 2, 1])
    est = simulate_logZ(counts, ll, 2, shrinkage="mean")
    exact = evidence_quadrature(ll, volume_sequence(counts)).log_Z
    assert est.samples[0] == exact


def test_entropy_examples():
    assert shannon_entropy([0.25] * 4, [1.5] * 4, 1.5) == 0.0
    log_Z = float(log_sum_exp([0.0, 2.0]) + math.log(0.5))
    H = shannon_entropy([0.5, 0.5], [0.0, 2.0], log_Z)
    assert H == pytest.approx(0.5 * (0 - log_Z) + 0.5 * (2 - log_Z), rel=1e-15)
    assert H == pytest.approx(1 - log_Z, rel=1e-15)
    with pytest.raises(ValueError):
        shannon_entropy([0.5, 0.6], [0.0, 1.0], 0.0)


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=30), st.floats(-100, 100))
@settings(max_examples=50, deadline=None)
def test_entropy_shift_invariant(values, shift):
    ll = np.sort(np.array(values))
    res = evidence_quadrature(ll, volume_sequence(np.full(ll.size, 10)))
    a = shannon_entropy(res.weights, ll, res.log_Z)
    b = shannon_entropy(res.weights, ll + shift, res.log_Z + shift)
    assert b == pytest.approx(a, abs=1e-9)


def test_classic_error():
    assert classic_error(10, 100) == pytest.approx(0.31622776601683794, rel=1e-15)
    assert classic_error(0, 100) == 0.0
    with pytest.raises(ValueError):
        classic_error(-1, 10)


def test_classic_vs_simulated_constant_counts(gauss_run):
    _, res = gauss_run
    est = simulate_logZ(res.volumes.n_live, res.log_like, 1000, rng=11)
    H = shannon_entropy(res.weights, res.log_like, res.log_Z)
    assert abs(classic_error(H, 500) / est.log_Z_sd - 1) < 0.3


def test_error_report():
    est = simulate_logZ([3, 2, 1], [0.0, 1.0, 2.0], 10, rng=0)
    assert est.report().splitlines()[0].startswith("log_Z_mean = ")
