"""Acceptance criteria, each at its stated tolerance.

Each test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected in the terminal summary. The base-plateau ensembles (2000 runs plus
error simulations) are shared between criteria 1, 2 and 7 and take several
minutes on one core.
"""
import math

import numpy as np
import pytest

from plateau_ns.compression import (CompressionMethod, binom_beta_moments,
                                    compression_factor, evaluate, resum, volume_sequence)
from plateau_ns.ensemble import EnsembleSpec, run_ensemble
from plateau_ns.figures import fig2
from plateau_ns.run_record import canonical_order, serialize
from plateau_ns.samplers import SamplerConfig, run_modified, run_original, sample_with_trace
from plateau_ns.testbeds import (BasePlateauModel, ConstantModel, GaussianModel,
                                 PeakPlateauModel, PlateauGaussianModel, WeddingCakeModel,
                                 WeddingCakeParams, base_plateau_bias, peak_plateau_deficit,
                                 quadrature_evidence_oracle)

pytestmark = pytest.mark.slow

N_RUNS = 1000
N_LIVE = 500
F = 2.0 / 3.0


@pytest.fixture(scope="module")
def base_plateau_runs(tmp_path_factory):
    model = BasePlateauModel(F)
    exact = math.log(quadrature_evidence_oracle(model))
    chains = tmp_path_factory.mktemp("base_plateau_original")
    original = run_ensemble(EnsembleSpec(model.likelihood_id, N_LIVE, "original", 10_000,
                                         N_RUNS, out_dir=str(chains)))
    modified = run_ensemble(EnsembleSpec(model.likelihood_id, N_LIVE, "modified", 0,
                                         N_RUNS, n_sim=1000))
    return exact, original, modified, chains


def test_criterion_1_base_plateau_bias(base_plateau_runs, criterion):
    exact, original, modified, _ = base_plateau_runs
    orig = np.array([m.log_Z_naive for m in original])  # what original NS reports
    mod = np.array([m.log_Z for m in modified])
    bias = orig.mean() - exact
    sem_o = orig.std(ddof=1) / math.sqrt(N_RUNS)
    offset = mod.mean() - exact
    sem_m = mod.std(ddof=1) / math.sqrt(N_RUNS)
    ok = abs(bias - 0.432) <= 0.01 and abs(offset) <= 0.01
    criterion(1, ok, f"original bias {bias:.4f} (sem {sem_o:.4f}, target 0.432 +- 0.01, "
                     f"formula {base_plateau_bias(F):.4f}); modified offset {offset:+.4f} "
                     f"(sem {sem_m:.4f}, tolerance 0.01)")
    assert ok


def test_criterion_2_error_calibration(base_plateau_runs, criterion):
    exact, _, modified, _ = base_plateau_runs
    mod = np.array([m.log_Z for m in modified])
    sd = np.array([m.log_Z_sd for m in modified])
    coverage = np.mean(np.abs(mod - exact) <= sd)
    ratio = mod.std(ddof=1) / sd.mean()
    ok = abs(coverage - 0.68) <= 0.05 and abs(ratio - 1) <= 0.15
    criterion(2, ok, f"coverage {coverage:.3f} (target 0.68 +- 0.05); ensemble sd "
                     f"{mod.std(ddof=1):.4f} vs mean simulated sd {sd.mean():.4f} "
                     f"(ratio {ratio:.3f}, tolerance 15%)")
    assert ok


def test_criterion_3_wedding_cake(criterion):
    params = WeddingCakeParams(0.7, 0.2, 2)
    model = WeddingCakeModel(params)
    series = -1.3353019189627122  # 200-term series, tail below 1e-30
    n, runs = 100, 100
    values, trace_ok = [], True
    for k in range(runs):
        rec, trace = sample_with_trace(model, SamplerConfig(n, 5000 + k), "modified")
        values.append(evaluate(rec).log_Z)
        ordered, groups = canonical_order(rec)
        final_start = len(rec) - n
        inner = [g for g in groups if g.member_indices[-1] < final_start]
        dips = any(g.size > 1 for g in inner) and trace[:final_start].min() < n
        # each group starts from a full live set: the trace is back at n after refill
        recovers = all(trace[g.member_indices[0]] == n for g in inner)
        trace_ok &= bool(dips and recovers)
    values = np.array(values)
    err = abs(values.mean() - series)
    bound = 3 * values.std(ddof=1) / math.sqrt(runs)
    ok = err < bound and trace_ok
    criterion(3, ok, f"|mean - series| = {err:.4f} < {bound:.4f}; traces dip and recover: "
                     f"{trace_ok}")
    assert ok


def test_criterion_4_compression_identities(criterion):
    arith = CompressionMethod.ARITHMETIC_PRODUCT
    geo = CompressionMethod.GEOMETRIC_SUM
    worst_tel, worst_harm, bound_ok = 0.0, 0.0, True
    for n in (10, 37, 100, 500, 1000):
        for q in sorted({1, 2, n // 3, n // 2, n - 1, n}):
            counts = np.arange(n, n - q, -1)
            X = math.exp(volume_sequence(counts, arith).log_X[-1])
            worst_tel = max(worst_tel, abs(X / compression_factor(n, q, arith) - 1))
            harmonic = math.fsum(1.0 / k for k in range(n - q + 1, n + 1))
            worst_harm = max(worst_harm, abs(volume_sequence(counts, geo).log_X[-1] + harmonic))
    for n in range(10, 1001):
        for q in range(1, n // 2 + 1):
            if abs(compression_factor(n, q, geo) - (1 - q / n)) > q * q / (n * (n - q)):
                bound_ok = False
    rows = fig2()[0][2]
    naive_100, unbiased_100 = float(rows[99][1]), float(rows[99][2])
    fig_ok = abs(naive_100 - math.exp(-1)) < 1e-15 and unbiased_100 == 0.0
    ok = worst_tel < 1e-13 and worst_harm < 1e-13 and bound_ok and fig_ok
    criterion(4, ok, f"telescoping rel err {worst_tel:.1e}; harmonic err {worst_harm:.1e}; "
                     f"linear bound holds {bound_ok}; naive(100,100) {naive_100:.6f} vs "
                     f"unbiased {unbiased_100}")
    assert ok


def test_criterion_5_binomial_beta(criterion):
    n = 100
    diff = max(abs(binom_beta_moments(n, q)["beta_mean"] - binom_beta_moments(n, q)["binom_mean"])
               for q in range(1, n + 1))
    log_equal = all(binom_beta_moments(n, q, "logarithmic")["beta_mean"]
                    == binom_beta_moments(n, q, "logarithmic")["binom_mean"]
                    for q in range(1, n + 1))
    m = binom_beta_moments(n, 99)
    rel_beta, rel_binom = m["beta_sd"] / m["beta_mean"], m["binom_sd"] / m["binom_mean"]
    ok = diff <= 1 / (n + 1) and log_equal and rel_beta > 0.5 and rel_binom > 0.5
    criterion(5, ok, f"max |beta - binom| mean {diff:.5f} <= {1 / (n + 1):.5f}; "
                     f"log prior equal {log_equal}; relative sd at q=99 {rel_beta:.3f}, "
                     f"{rel_binom:.3f}")
    assert ok


def test_criterion_6_no_plateau_equivalence(tmp_path, criterion):
    model = GaussianModel()
    same = 0
    for seed in range(50):
        config = SamplerConfig(N_LIVE, seed)
        a = serialize(run_original(model, config), tmp_path / "a.csv")
        b = serialize(run_modified(model, config), tmp_path / "b.csv")
        same += a == b and (tmp_path / "a.csv.meta.json").read_bytes() == \
            (tmp_path / "b.csv.meta.json").read_bytes()
    ok = same == 50
    criterion(6, ok, f"{same}/50 seeds give byte-identical chain files")
    assert ok


def test_criterion_7_resummation(base_plateau_runs, tmp_path, criterion):
    exact, original, _, chains = base_plateau_runs
    fixtures = [GaussianModel(), PlateauGaussianModel(), WeddingCakeModel(),
                BasePlateauModel(), PeakPlateauModel(), ConstantModel(-0.3)]
    worst = 0.0
    for i, model in enumerate(fixtures):
        for runner in (run_original, run_modified):
            rec = runner(model, SamplerConfig(200, 40 + i))
            serialize(rec, tmp_path / "f.csv")
            for method in CompressionMethod:
                for nlive in ("modified", "naive"):
                    mem = evaluate(rec, method, nlive=nlive).log_Z
                    disk = resum(tmp_path / "f.csv", method, nlive=nlive).log_Z
                    worst = max(worst, abs(mem - disk))
    delta = np.array([resum(chains / f"run_{m.index:05d}.csv", nlive="naive").log_Z
                      - resum(chains / f"run_{m.index:05d}.csv").log_Z for m in original])
    orig_bias = np.mean([m.log_Z_naive for m in original]) - exact
    ok = worst <= 1e-12 and abs(delta.mean() - 0.432) <= 0.01
    criterion(7, ok, f"max |in-memory - resummed| {worst:.1e}; naive - modified resummation "
                     f"delta {delta.mean():.4f} (criterion 1 bias {orig_bias:.4f}, "
                     f"target 0.432 +- 0.01)")
    assert ok


def test_criterion_8_peak_plateau(criterion):
    model = PeakPlateauModel(0.161, -2.21, 0.075)
    Z = quadrature_evidence_oracle(model)
    exact = math.log(Z)
    predicted = peak_plateau_deficit(model.f, model.cap, math.log(Z - model.f * math.exp(model.cap)))
    runs = 100
    full, dropped = [], []
    for k in range(runs):
        rec = run_modified(model, SamplerConfig(N_LIVE, 7000 + k))
        full.append(evaluate(rec).log_Z)
        dropped.append(evaluate(rec, drop_final=True).log_Z)
    full, dropped = np.array(full), np.array(dropped)
    deficit = full - dropped
    err_a = abs(full.mean() - exact)
    tol_a = 3 * full.std(ddof=1) / math.sqrt(runs)
    err_b = abs(deficit.mean() - predicted)
    tol_b = 3 * deficit.std(ddof=1) / math.sqrt(runs)
    identity = peak_plateau_deficit(0.161, -2.21, -4.587)
    ok = err_a < tol_a and err_b < tol_b and abs(identity - 1.006) <= 0.001
    criterion(8, ok, f"(a) |mean - oracle| {err_a:.4f} < {tol_a:.4f}; (b) deficit "
                     f"{deficit.mean():.4f} vs predicted {predicted:.4f} (tolerance {tol_b:.4f}); "
                     f"(c) identity {identity:.4f}")
    assert ok
