"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (also collected
into the terminal summary) and then asserts.  Sweeps honour QADD_WORKERS.
"""

import math
import time

import numpy as np
import pytest

from qadditivity import channels as ch
from qadditivity import cli
from qadditivity import conjectures as cj
from qadditivity import matcore as mc
from qadditivity import sweep as sw
from qadditivity.capacity import chi_star
from qadditivity.purity import nu_p, nu_p_depolarizing, s_min

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def all_flat(reports):
    return [r for rep in reports for r in rep.flatten()]


def sweep_stats(reports):
    flat = all_flat(reports)
    bad = [r for r in flat if not r.passed and not r.inconclusive]
    unsure = [r for r in flat if r.inconclusive]
    gaps = [r.gap for r in flat if not math.isnan(r.gap)]
    return flat, bad, unsure, min(gaps)


def test_criterion_01_cq_multiplicativity():
    t0 = time.perf_counter()
    rng = mc.SeededRng(101)
    omegas = [ch.random_channel(2, 2, rng) for _ in range(10)] + [ch.random_channel(3, 3, rng) for _ in range(10)]
    phis = [ch.random_cq(2, 2, rng) for _ in range(5)]
    worst_upper, worst_lower, count, bad = 0.0, 0.0, 0, []
    for p in (1.5, 2.0, 3.0):
        nu_phi = [nu_p(phi, p, restarts=32) for phi in phis]
        for i, om in enumerate(omegas):
            nu_om = nu_p(om, p, restarts=32)
            for j, phi in enumerate(phis):
                rep = cj.check_multiplicativity(om, phi, p, restarts=32, nu_omega=nu_om, nu_phi=nu_phi[j],
                                                seed=i * 10 + j)
                lower = rep.subreports[0]
                diff = abs(rep.lhs - rep.rhs)
                worst_upper, worst_lower = max(worst_upper, diff), min(worst_lower, lower.gap)
                count += 1
                if diff > 1e-4 or lower.gap < -1e-8:
                    bad.append((p, i, j, diff, lower.gap))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed <= 300
    record(1, ok, f"{count} CQ pairs, max |gap|={worst_upper:.2e}, min lower gap={worst_lower:.2e}, "
                  f"{elapsed:.0f}s")
    assert ok, bad[:5]


def test_criterion_02_qc_capacity_additivity():
    t0 = time.perf_counter()
    rng = mc.SeededRng(202)
    omegas = [ch.random_channel(2, 2, rng) for _ in range(10)]
    phis = [ch.random_qc(2, 2 + k, rng) for k in range(3)]
    ca = [chi_star(om) for om in omegas]
    cb = [chi_star(phi) for phi in phis]
    worst, worst_factor, bad = 0.0, max(c.duality_gap for c in ca + cb), []
    for i, om in enumerate(omegas):
        for j, phi in enumerate(phis):
            joint = chi_star(ch.tensor_channels(om, phi), init=cj.product_ensemble(ca[i], cb[j]))
            diff = abs(joint.chi_star - ca[i].chi_star - cb[j].chi_star)
            worst = max(worst, diff)
            if diff > 2e-3:
                bad.append((i, j, diff))
    elapsed = time.perf_counter() - t0
    ok = not bad and worst_factor <= 1e-4 and elapsed <= 600
    record(2, ok, f"30 QC pairs, max |chi gap|={worst:.2e} nats, max factor duality gap={worst_factor:.2e}, "
                  f"{elapsed:.0f}s")
    assert ok, bad[:5]


def _multiplicativity_sweep(seed, trials, p, family):
    return sw.run_sweep("multiplicativity", trials, seed, sw.SweepParams(p=p, family=family, restarts=32))


def test_criterion_03_qubit_p2():
    reps = _multiplicativity_sweep(303, 30, 2.0, "arbitrary")
    worst = max(abs(r.lhs - r.rhs) for r in reps)
    lower = min(r.subreports[0].gap for r in reps)
    ok = worst <= 1e-4 and lower >= -1e-8 and all(r.diagnostics["theorem"] == "qubit-p2" for r in reps)
    record(3, ok, f"30 qubit channels at p=2, max |gap|={worst:.2e}, min lower gap={lower:.2e}")
    assert ok


def test_criterion_04_translation_condition_scope():
    reps = []
    for p in (2.0, 3.0):
        for k, family in enumerate(("unital", "single_t")):
            reps += _multiplicativity_sweep(404 + 10 * k, 10, p, family)
    worst = max(abs(r.lhs - r.rhs) for r in reps)
    lower = min(r.subreports[0].gap for r in reps)
    ok = worst <= 1e-4 and lower >= -1e-8 and all(r.diagnostics["theorem"] is not None for r in reps)
    record(4, ok, f"20 channels x p in {{2,3}}, max |gap|={worst:.2e}, min lower gap={lower:.2e}")
    assert ok


def test_criterion_05_conjecture1_proved_cases():
    reps = sw.run_sweep("conjecture1", 1000, 505, sw.SweepParams(p=2.0, family="arbitrary"))
    for k, p in enumerate((3.0, 4.0)):
        reps += sw.run_sweep("conjecture1", 250, 515 + k, sw.SweepParams(p=p, family="condition"))
    flat, bad, unsure, min_gap = sweep_stats(reps)
    Ks = {r.diagnostics.get("K") for r in reps}
    ok = len(reps) == 1500 and not bad and not unsure and min_gap >= -1e-10
    record(5, ok, f"{len(reps)} instances (K in {sorted(k for k in Ks if k)}), violations={len(bad)}, "
                  f"inconclusive={len(unsure)}, min gap={min_gap:.2e}")
    assert ok


def test_criterion_06_lieb_ruskai():
    reps = sw.run_sweep("lieb-ruskai", 500, 606)
    flat, bad, unsure, min_gap = sweep_stats(reps)
    rng = mc.SeededRng(607)
    eq_err = 0.0
    for _ in range(10):
        K = int(rng.integers(1, 5))
        X = mc.random_psd(K, rng)
        for lam in (0.0, 1.0):
            for p in (1.5, 2.0, 3.0):
                rep = cj.check_lieb_ruskai(X, np.eye(K), lam, p)
                eq_err = max(eq_err, abs(rep.lhs - rep.rhs))
    ok = not bad and not unsure and eq_err <= 1e-10
    record(6, ok, f"500 instances ({len(flat)} incl. embedded checks), violations={len(bad)}, "
                  f"min gap={min_gap:.2e}, equality err={eq_err:.2e}")
    assert ok


def test_criterion_07_qc_identity():
    reps = sw.run_sweep("qc-identity", 200, 707)
    worst = max(abs(r.lhs - r.rhs) for r in reps)
    ok = len(reps) == 200 and worst <= 1e-8
    record(7, ok, f"200 instances, max |lhs-rhs|={worst:.2e}")
    assert ok


def test_criterion_08_derivative_and_entropy_bound():
    rng = mc.SeededRng(808)
    worst = 0.0
    for _ in range(100):
        rho = mc.random_density(int(rng.integers(2, 5)), rng)
        worst = max(worst, abs(mc.norm_derivative_at_one(rho, 1e-4) + mc.von_neumann_entropy(rho)))
    reps = sw.run_sweep("entropy-bound", 300, 809)
    flat, bad, unsure, min_gap = sweep_stats(reps)
    ok = worst <= 1e-3 and not bad and not unsure
    record(8, ok, f"max derivative err={worst:.2e} over 100 states; entropy bound 300 instances, "
                  f"violations={len(bad)}, min gap={min_gap:.2e}")
    assert ok


def test_criterion_09_unital_capacity_identity():
    rng = mc.SeededRng(909)
    worst = 0.0
    for _ in range(20):
        phi = ch.random_qubit_affine(rng, "unital")
        diff = abs(chi_star(phi).chi_star - (math.log(2) - s_min(phi, derivative_h=None).value))
        worst = max(worst, diff)
    ok = worst <= 1e-4
    record(9, ok, f"20 unital channels, max |chi* - (ln2 - S_min)|={worst:.2e}")
    assert ok


def test_criterion_10_depolarizing_closed_form():
    worst = 0.0
    for lam in (-0.3, 0.0, 0.25, 0.5, 0.75, 1.0):
        for p in (1.0, 1.5, 2.0, 3.0, 5.0):
            worst = max(worst, abs(nu_p(ch.depolarizing(lam), p).value - nu_p_depolarizing(lam, p)))
    ok = worst <= 1e-6
    record(10, ok, f"30 grid points, max err={worst:.2e}")
    assert ok


def test_criterion_11_block_machinery():
    reps = sw.run_sweep("block-decompose", 300, 1111)
    flat, bad, unsure, min_gap = sweep_stats(reps)
    expansions = [r for r in flat if r.check_name == "block-decompose/c-expansion"]
    ps = sorted({r.diagnostics["p"] for r in reps})
    worst = max(abs(r.lhs - r.rhs) for r in expansions)
    ok = not bad and len(expansions) == 300 and worst <= 1e-10 and ps == [2, 3, 4]
    record(11, ok, f"300 instances p in {ps}, failed sub-checks={len(bad)}, max expansion err={worst:.2e}")
    assert ok


def test_criterion_12_determinism():
    outputs = {}
    for check, trials, params in (("conjecture1", 40, sw.SweepParams(p=3.0)), ("qc-identity", 10, None),
                                  ("entropy-bound", 30, None)):
        for workers in (1, 2, 4):
            outputs.setdefault(check, set()).add(
                cli.render_reports(sw.run_sweep(check, trials, 1212, params, parallelism=workers), "csv"))
    ok = all(len(v) == 1 for v in outputs.values())
    record(12, ok, f"{len(outputs)} sweeps identical across parallelism 1/2/4")
    assert ok
