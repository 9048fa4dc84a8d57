"""Acceptance criteria, one test per criterion at its stated tolerance.

Every test prints a single ``PASS`` or ``FAIL`` line with the measured
quantities and the wall time. Run directly (``python3 tests/test_acceptance.py``)
for the summary lines alone.
"""

from __future__ import annotations

import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import brute_twisted, random_function, rel_l2  # noqa: E402
from twistpar.cutoffs import annular_profile, bump_profile, make_vartheta, partition_check, vartheta  # noqa: E402
from twistpar.decompose import apply_decomposed, decay_report, decompose, grid_scale_range, reconstruct_symbol  # noqa: E402
from twistpar.grid import (  # noqa: E402
    GridFunction2D,
    GridGeometry,
    band_limited_random,
    forward_transform,
    inverse_transform,
    sample,
    translate,
)
from twistpar.harness.cli import main as cli_main  # noqa: E402
from twistpar.harness.config import ExponentTuple  # noqa: E402
from twistpar.harness.experiments import leibniz_check, prop1_probe, random_pairs, ratio_sweep, recover_symbol  # noqa: E402
from twistpar.operators import (  # noqa: E402
    ParaproductSpec,
    TwistedSymbol,
    apply_paraproduct,
    apply_spatial_multiplier,
    apply_symbol,
    apply_twisted_multiplier,
    cone_symbol,
    constant_symbol,
    default_scale_range,
    modulated_spatial_symbol,
    paraproduct_symbol,
)

EXPONENTS = ExponentTuple(3.0, 3.0, 1.5, 1.0)


@contextmanager
def criterion(number: int, title: str, budget: float, capsys=None):
    """Time a criterion body and print its verdict line past pytest's capture.

    The body yields a dict; set ``ok`` and ``detail`` in it.
    """
    state: dict = {"ok": False, "detail": ""}
    t0 = time.perf_counter()
    try:
        yield state
    finally:
        dt = time.perf_counter() - t0
        in_time = dt < budget
        verdict = "PASS" if state["ok"] and in_time else "FAIL"
        line = f"{verdict} criterion {number:2d} ({title}): {state['detail']}; {dt:.1f} s (budget {budget:g} s)"
        if capsys is not None:
            with capsys.disabled():
                print("\n" + line)
        else:
            print(line)
        state["line"] = line
        state["in_time"] = in_time


def check(state: dict) -> None:
    assert state["ok"] and state["in_time"], state["line"]


def random_symbol(rng: np.random.Generator) -> TwistedSymbol:
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    mu = rng.uniform(-1.5, 1.5, (4, 2))
    w = rng.uniform(0.5, 2.0, 4)

    def func(t1, t2):
        return sum(c[j] * np.exp(-w[j] * ((t1 - mu[j, 0]) ** 2 + (t2 - mu[j, 1]) ** 2)) for j in range(4))

    return TwistedSymbol(func, None, name="random")


def test_criterion_01_spectral_core(capsys):
    with criterion(1, "spectral core", 1.0, capsys) as st:
        worst_rt = worst_pl = 0.0
        rng = np.random.default_rng(1)
        for n in (16, 64, 128):
            geo = GridGeometry(n, 10.0)
            f = GridFunction2D(geo, rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            F = forward_transform(f)
            worst_rt = max(worst_rt, rel_l2(inverse_transform(F).values, f.values))
            space = np.sum(np.abs(f.values) ** 2) * geo.dx ** 2
            freq = np.sum(np.abs(F.values) ** 2) / geo.l ** 2
            worst_pl = max(worst_pl, abs(space - freq) / space)
        st["ok"] = worst_rt <= 1e-12 and worst_pl <= 1e-12
        st["detail"] = f"round trip {worst_rt:.2e}, Plancherel {worst_pl:.2e} (tol 1e-12)"
    check(st)


def test_criterion_02_cutoff_calculus(capsys):
    with criterion(2, "cutoff calculus", 1.0, capsys) as st:
        rng = np.random.default_rng(2)
        k_min, k_max = -4, 4
        taus = 2.0 ** rng.uniform(k_min, k_max, 10_000) * rng.choice([-1.0, 1.0], 10_000)
        rep = partition_check(make_vartheta(), k_min, k_max, taus)
        leak = 0.0
        for k in range(-6, 7):
            lo, hi = 2.0 ** (k - 1), 2.0 ** (k + 1)
            t = np.concatenate([np.linspace(0, lo, 4000), np.linspace(hi, 8 * hi, 4000)])
            leak = max(leak, float(np.max(np.abs(vartheta(np.ldexp(np.concatenate([t, -t]), -k))))))
        st["ok"] = rep.max_deviation <= 1e-12 and rep.valid_count == 10_000 and leak <= 1e-14
        st["detail"] = f"partition deviation {rep.max_deviation:.2e} over {rep.valid_count} samples, leakage {leak:.1e}"
    check(st)


def test_criterion_03_oracle_equivalence(capsys):
    with criterion(3, "oracle equivalence", 30.0, capsys) as st:
        geo = GridGeometry(16, 3.0)
        rng = np.random.default_rng(3)
        brute = 0.0
        for _ in range(10):
            m = random_symbol(rng)
            f, g = random_function(geo, rng), random_function(geo, rng)
            brute = max(brute, rel_l2(apply_twisted_multiplier(m, f, g).values, brute_twisted(m, f, g)))
        geo = GridGeometry(128, 16.0)
        lo, hi = default_scale_range(geo)
        lam = {k: complex(rng.standard_normal(), rng.standard_normal()) for k in range(lo, hi + 1)}
        spec = ParaproductSpec(bump_profile(1.0), annular_profile(1.0), lam)
        f = sample(band_limited_random(geo, (0.25, 1.0), 31), geo)
        g = sample(band_limited_random(geo, (0.25, 1.0), 32), geo)
        para = rel_l2(
            apply_paraproduct(spec, f, g, warn=False).values,
            apply_twisted_multiplier(paraproduct_symbol(spec), f, g).values,
        )
        st["ok"] = brute <= 1e-10 and para <= 1e-10
        st["detail"] = f"brute force {brute:.2e}, paraproduct vs induced symbol {para:.2e} (tol 1e-10)"
    check(st)


@pytest.fixture(scope="module")
def cone_decomposition():
    t0 = time.perf_counter()
    d = decompose(cone_symbol(1.0), grid_scale_range(GridGeometry(64, 16.0)), 16, with_error=False)
    return d, time.perf_counter() - t0


def test_criterion_04_decomposition_fidelity(cone_decomposition, capsys):
    d, setup = cone_decomposition
    with criterion(4, "decomposition fidelity", 120.0 - setup, capsys) as st:
        errs = {n: reconstruct_symbol(d.truncate(n, with_error=False))[1].sup_error for n in (2, 4, 8, 16)}
        seq = [errs[n] for n in (2, 4, 8, 16)]
        decreasing = all(b < a for a, b in zip(seq, seq[1:]))
        ratio_ok = errs[16] <= errs[4] / 100
        dec = decay_report(d, r_max=16)
        within = bool(np.all(dec.weighted <= 2 * dec.median))
        st["ok"] = decreasing and ratio_ok and within
        st["detail"] = (
            "errors " + ", ".join(f"n={n}: {e:.3g}" for n, e in errs.items())
            + f"; strictly decreasing {decreasing}; error(16)/error(4) = {errs[16] / errs[4]:.3g} (need <= 0.01)"
            + f"; decay max/median {dec.weighted.max() / dec.median:.3g} (need <= 2)"
        )
    check(st)


def test_criterion_05_operator_synthesis(cone_decomposition, capsys):
    d, setup = cone_decomposition
    with criterion(5, "operator-level synthesis", 120.0 - setup, capsys) as st:
        geo = GridGeometry(64, 16.0)
        d8 = d.truncate(8, with_error=False)
        m = cone_symbol(1.0)
        worst = 0.0
        for fg, gg in random_pairs(geo, 5, 5, (0.25, 1.0)):
            f, g = sample(fg, geo), sample(gg, geo)
            worst = max(worst, rel_l2(apply_decomposed(d8, f, g).values, apply_twisted_multiplier(m, f, g).values))
        st["ok"] = worst <= 1e-3
        st["detail"] = f"max relative L2 error {worst:.3g} over 5 pairs (tol 1e-3)"
    check(st)


def test_criterion_06_recovery(capsys):
    with criterion(6, "symbol recovery", 60.0, capsys) as st:
        geo = GridGeometry(64, 32.0)
        xi0, eta0 = (0.0, -0.4375), (0.0, 0.4375)
        rep = recover_symbol(cone_symbol(1.0), xi0, eta0, (0.5, 0.25, 0.125), geo)
        const = recover_symbol(constant_symbol(1.0), xi0, eta0, (0.5, 0.25, 0.125), geo)
        final = float(rep.rel_errors[-1])
        worst_const = float(const.errors.max())
        st["ok"] = rep.strictly_decreasing and final <= 0.05 and worst_const <= 1e-6
        st["detail"] = (
            "cone rel errors " + ", ".join(f"{e:.3g}" for e in rep.rel_errors)
            + f" (final <= 0.05); constant max error {worst_const:.1e} (tol 1e-6)"
        )
    check(st)


def test_criterion_07_prop1_probe(capsys):
    with criterion(7, "necessity probe", 180.0, capsys) as st:
        geo = GridGeometry(256, 4.0)
        one = prop1_probe(constant_symbol(1.0), EXPONENTS, (4.0, 8.0, 16.0), geo, probe=True)
        cone = prop1_probe(cone_symbol(1.0), EXPONENTS, (4.0, 8.0, 16.0), geo, probe=False)
        ok = one.exponent is not None and cone.exponent is not None and not one.dropped
        st["ok"] = ok and one.exponent >= 0.8 and cone.exponent <= 0.1
        st["detail"] = f"m=1 exponent {one.exponent:.3f} (>= 0.8); cone(1) exponent {cone.exponent:.3f} (<= 0.1)"
    check(st)


def test_criterion_08_leibniz(capsys):
    with criterion(8, "Leibniz identity", 30.0, capsys) as st:
        geo = GridGeometry(128, 16.0)
        lo, hi = default_scale_range(geo)
        spec = ParaproductSpec(bump_profile(1.0), annular_profile(1.0), {k: 1.0 for k in range(lo, hi + 1)})
        worst = 0.0
        for fg, gg in random_pairs(geo, 3, 8, (0.25, 1.0)):
            f, g = sample(fg, geo), sample(gg, geo)
            for s in (1, 2):
                worst = max(worst, leibniz_check(spec, f, g, s).rel_error)
        st["ok"] = worst <= 1e-8
        st["detail"] = f"max relative L2 error {worst:.2e} for s in {{1, 2}} (tol 1e-8)"
    check(st)


def test_criterion_09_theorem2_sweep(tmp_path, capsys):
    with criterion(9, "boundedness consistency", 300.0, capsys) as st:
        geo = GridGeometry(128, 16.0)
        pairs = random_pairs(geo, 20, 0, (0.25, 0.5), x_step=4)
        rep = ratio_sweep(cone_symbol(1.0), geo, EXPONENTS, pairs, (-2, -1, 0, 1, 2))
        args = ["--grid", "128,16", "--seed", "0", "ratio-sweep"]
        codes = [cli_main(["--out", str(tmp_path / d), *args]) for d in ("a", "b")]
        same = (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
        st["ok"] = rep.all_finite and len(rep.rows) == 100 and rep.spread <= 10 and codes == [0, 0] and same
        st["detail"] = f"{len(rep.rows)} ratios finite {rep.all_finite}, max/min {rep.spread:.3g} (<= 10); CSV rerun identical {same}"
    check(st)


def test_criterion_10_theorem3(capsys):
    with criterion(10, "spatial-symbol consistency", 180.0, capsys) as st:
        geo = GridGeometry(64, 16.0)
        amp = lambda x, y: 1 + 0.5 * np.sin(2 * np.pi * x / geo.l) * np.cos(2 * np.pi * y / geo.l)  # noqa: E731
        m = cone_symbol(1.0)
        sigma = modulated_spatial_symbol(amp, m)
        pairs = random_pairs(geo, 10, 10, (0.25, 1.0))
        rep = ratio_sweep(sigma, geo, EXPONENTS, pairs)
        f, g = (sample(p, geo) for p in pairs[0])
        v = (5 * geo.dx, 3 * geo.dx)
        eq_m = rel_l2(apply_symbol(m, translate(f, v), translate(g, v)).values, translate(apply_symbol(m, f, g), v).values)
        eq_s = rel_l2(
            apply_spatial_multiplier(sigma, translate(f, v), translate(g, v)).values,
            translate(apply_spatial_multiplier(sigma, f, g), v).values,
        )
        st["ok"] = rep.all_finite and rep.spread <= 10 and eq_m <= 1e-12 and eq_s > 1e-3
        st["detail"] = (
            f"ratios finite {rep.all_finite}, max/min {rep.spread:.3g} (<= 10); "
            f"translation defect T_m {eq_m:.1e}, T_sigma {eq_s:.3g}"
        )
    check(st)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:warnings"]))
