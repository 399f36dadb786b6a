"""Acceptance criteria, each run at its stated size and tolerance.

Every check prints a single PASS/FAIL line (collected again in the terminal
summary). Criterion 6 is known not to hold for this implementation; it is run
unchanged and marked as an expected failure so the result stays visible.
"""

import math

import numpy as np
import pytest

from conftest import record
from emdscale.cli import main
from emdscale.emd import decompose
from emdscale.scaling import (
    baseline_compare,
    baseline_r2,
    bm_replicate_fits,
    fit_variance_scaling,
    generalized_hurst,
    monte_carlo_h,
    rescale_factor,
    scaling_points,
    unit_slope_intercept,
)
from emdscale.series import find_local_extrema, count_zero_crossings
from emdscale.synth import FbmSpec, derive_seed, generate_bm, generate_fbm, generate_fgn

SEED = 2026
REFERENCE_MEAN_H = {0.3: 0.26, 0.5: 0.49, 0.7: 0.70, 0.9: 0.90}


@pytest.mark.parametrize("hurst", sorted(REFERENCE_MEAN_H))
def test_c01_fbm_recovery(hurst):
    s = monte_carlo_h(hurst, 10_000, 30, derive_seed(SEED, int(hurst * 10)))
    ref = REFERENCE_MEAN_H[hurst]
    ok = abs(s.mean_h_star - ref) <= 0.05 and not s.failures
    record(1, ok, f"H={hurst}: <H*>={s.mean_h_star:.3f} (reference {ref:.2f} +/- 0.05), RMSE={s.rmse:.3f}")
    assert ok


def test_c02_low_h_bias():
    s = monte_carlo_h(0.1, 10_000, 30, derive_seed(SEED, 1))
    ok = 0.0 <= s.mean_h_star <= 0.12
    record(2, ok, f"H=0.1: <H*>={s.mean_h_star:.3f} (required in [0.00, 0.12])")
    assert ok


@pytest.mark.slow
def test_c03_long_series():
    s = monte_carlo_h(0.6, 100_000, 10, derive_seed(SEED, 6))
    ok = abs(s.mean_h_star - 0.6) <= 0.05
    record(3, ok, f"H=0.6, T=100000: <H*>={s.mean_h_star:.3f}, RMSE={s.rmse:.3f} (required 0.60 +/- 0.05)")
    assert ok


@pytest.mark.slow
def test_c04_dyadic_imf_count():
    counts = [decompose(generate_bm(2 ** 16, derive_seed(SEED + 4, i))).n_imfs for i in range(30)]
    mean = float(np.mean(counts))
    ok = 14 <= mean <= 19
    record(4, ok, f"Bm T=2^16: mean #IMFs={mean:.2f} over 30 paths (required in [14, 19])")
    assert ok


def _criterion5_inputs():
    """100 inputs: 40 fBm paths, 30 multi-tone signals, 30 ramps with noise."""
    rng = np.random.default_rng(SEED)
    out = []
    for i in range(40):
        h = float(rng.uniform(0.1, 0.9))
        n = int(rng.integers(500, 5001))
        out.append(("fbm", generate_fbm(FbmSpec(h, n, derive_seed(SEED + 5, i))).values))
    for _ in range(30):
        n = int(rng.integers(500, 5001))
        t = np.arange(n)
        x = sum(rng.uniform(0.1, 5) * np.sin(2 * np.pi * t / rng.uniform(4, n / 2) + rng.uniform(0, 2 * np.pi))
                for _ in range(int(rng.integers(1, 4))))
        out.append(("tone", x))
    for i in range(30):
        n = int(rng.integers(500, 5001))
        noise = generate_fbm(FbmSpec(0.5, n, derive_seed(SEED + 50, i))).values
        out.append(("ramp", rng.uniform(-2, 2) * np.arange(n) + rng.uniform(-100, 100) + noise))
    return out


@pytest.fixture(scope="module")
def suite5():
    return [(kind, x, decompose(x)) for kind, x in _criterion5_inputs()]


def test_c05_reconstruction(suite5):
    worst, bad_imfs = 0.0, 0
    for _, x, d in suite5:
        err = np.max(np.abs(d.reconstruct() - x)) / max(np.max(np.abs(x)), 1e-300)
        worst = max(worst, err)
        for imf in d.imfs:
            n_ext = sum(len(e) for e in find_local_extrema(imf.values))
            if abs(n_ext - count_zero_crossings(imf.values)) > 1:
                bad_imfs += 1
    ok = worst <= 1e-8 and bad_imfs == 0
    record(5, ok, f"100 inputs: max relative reconstruction error={worst:.2e}, IMFs violating the "
                  f"extrema/zero-crossing condition={bad_imfs}")
    assert ok


@pytest.mark.xfail(strict=True, reason="|IO| of fBm decompositions is of order 1e-2 to 1e-1; see decisions ledger")
def test_c06_orthogonality(suite5):
    ios = np.array([abs(d.io) for kind, _, d in suite5 if kind == "fbm"])
    ok = bool(np.all(ios < 1e-2))
    record(6, ok, f"fBm |IO|: max={ios.max():.2e}, median={np.median(ios):.2e}, "
                  f"{np.count_nonzero(ios >= 1e-2)}/{len(ios)} at or above 1e-2 (required all < 1e-2)")
    assert ok


@pytest.mark.slow
def test_c07_fgn_slope():
    slopes = []
    for i in range(10):
        d = decompose(generate_fgn(FbmSpec(0.7, 100_000, derive_seed(SEED + 7, i))))
        slopes.append(fit_variance_scaling(d).slope)
    slopes = np.array(slopes)
    ok = bool(np.all(np.abs(slopes + 0.6) <= 0.15))
    record(7, ok, f"fGn H=0.7: slopes in [{slopes.min():.3f}, {slopes.max():.3f}] (required -0.6 +/- 0.15 each)")
    assert ok


@pytest.mark.slow
def test_c08_baseline_self_consistency():
    n = 50_000
    fits = bm_replicate_fits(n, 100, SEED)
    x = generate_bm(n, derive_seed(SEED + 8, 0)).values
    bm = baseline_compare(decompose(x), 100, SEED, bm_fits=fits)
    # long-period cycle with variance comparable to the path's own
    t = np.arange(n)
    anomalous = x + 0.5 * np.std(x) * math.sqrt(2) * np.sin(2 * np.pi * t / 5000)
    an = baseline_compare(decompose(anomalous), 100, SEED, bm_fits=fits)
    ok = bm.mean_r2_bm >= 0.9 and bm.mean_r2_bm - an.mean_r2_bm >= 0.02 and not bm.failures
    record(8, ok, f"Bm <R2_Bm>={bm.mean_r2_bm:.3f} [p05 {bm.p05:.3f}, p95 {bm.p95:.3f}] (required >= 0.9); "
                  f"anomalous <R2_Bm>={an.mean_r2_bm:.3f} (required >= 0.02 lower)")
    assert ok


def test_c09_oracle_equivalence():
    rng = np.random.default_rng(SEED + 9)
    worst = 0.0
    for i in range(20):
        n = int(rng.integers(2000, 6000))
        dx = decompose(generate_fbm(FbmSpec(float(rng.uniform(0.2, 0.8)), n, derive_seed(SEED + 9, 2 * i))))
        db = decompose(generate_bm(n, derive_seed(SEED + 9, 2 * i + 1)))
        x_fit = fit_variance_scaling(dx)
        xp, xv = scaling_points(dx)
        bp, bv = scaling_points(db)
        # brute-force re-evaluation with plain Python loops
        num = sum(v / p for p, v in zip(xp, xv)) / len(xp)
        den = sum(v / p for p, v in zip(bp, bv)) / len(bp)
        c_oracle = num / den
        c0 = math.exp(sum(math.log(v) - math.log(p) for p, v in zip(bp, bv)) / len(bp))
        logs = [math.log(v) for v in xv]
        m = sum(logs) / len(logs)
        r2_oracle = 1 - (sum((lv - math.log(c_oracle * c0 * p)) ** 2 for lv, p in zip(logs, xp))
                         / sum((lv - m) ** 2 for lv in logs))
        c = rescale_factor(x_fit, db)
        r2 = baseline_r2(x_fit, c, unit_slope_intercept(bp, bv))
        worst = max(worst, abs(c - c_oracle) / abs(c_oracle), abs(r2 - r2_oracle) / max(abs(r2_oracle), 1e-300))
    ok = worst <= 1e-12
    record(9, ok, f"20 decomposition pairs: max relative deviation from loop oracle={worst:.2e} (required <= 1e-12)")
    assert ok


@pytest.mark.slow
def test_c10_generalized_hurst():
    hg_bm = generalized_hurst(generate_bm(100_000, derive_seed(SEED + 10, 0)))
    hgs = [generalized_hurst(generate_fbm(FbmSpec(0.3, 100_000, derive_seed(SEED + 10, i + 1)))) for i in range(10)]
    mean = float(np.mean(hgs))
    ok = 0.47 <= hg_bm <= 0.53 and abs(mean - 0.31) <= 0.05
    record(10, ok, f"Bm H_G={hg_bm:.3f} (required [0.47, 0.53]); fBm H=0.3 <H_G>={mean:.3f} (required 0.31 +/- 0.05)")
    assert ok


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c11_determinism(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    paths = []
    for k in range(2):
        x = np.exp(generate_bm(3000, derive_seed(SEED + 11, k)).values * 1e-3 + 3.0)
        p = data / f"s{k}.csv"
        p.write_text("price\n" + "".join(f"{v!r}\n" for v in x.tolist()))
        paths.append(str(p))
    commands = {
        "simulate": ["simulate", "--hurst", "0.3", "0.7", "--length", "2000", "--reps", "3", "--generalized",
                     "--seed", "11"],
        "baseline": ["baseline", paths[0], "--baseline-reps", "5", "--seed", "11"],
        "rank": ["rank", *paths, "--baseline-reps", "4", "--seed", "11", "--output-format", "text-table"],
    }
    mismatched = []
    for name, argv in commands.items():
        runs = []
        for r in range(2):
            out = tmp_path / f"{name}{r}"
            assert main(argv + ["-o", str(out)]) == 0
            runs.append(_tree_bytes(out))
        if runs[0] != runs[1] or not runs[0]:
            mismatched.append(name)
    ok = not mismatched
    record(11, ok, f"simulate/baseline/rank run twice with one seed: byte-identical outputs"
                   + (f" except {mismatched}" if mismatched else ""))
    assert ok
