"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from gradcheck import ACTIVATIONS, random_net, relative_error
from symland import curves, experiments, topology
from symland.experiments import ExperimentConfig, circular_arc, linear_minimum_sampler, run
from symland.linalg import make_rng
from symland.models import NetworkSpec, ParameterPoint, fit_last_layer, forward_loss, train_with_halving
from symland.symmetry import rescale_action


def report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def test_criterion_1_linear_component_count():
    start = time.perf_counter()
    worst_flat, worst_ratio, bad_counts = 0.0, math.inf, []
    for l in (2, 3, 4):
        for h in (2, 3):
            rng = make_rng(1000 * l + h)
            net, sample = linear_minimum_sampler(l, h, rng)
            seen = {topology.component_index_linear(sample()[1], net) for _ in range(500)}
            if len(seen) != 2 ** (l - 1):
                bad_counts.append((l, h, len(seen)))
            ysq = net.y_sq_norm
            for _ in range(5):
                signs = tuple(int(s) for s in rng.choice([-1, 1], size=l - 1))
                _, w1 = sample(signs)
                _, w2 = sample(signs)
                prof = curves.loss_profile(net, curves.component_path(w1, w2, net), 101)
                worst_flat = max(worst_flat, float(prof.losses.max() - prof.losses.min()))
                other = list(signs)
                other[int(rng.integers(l - 1))] *= -1
                _, w3 = sample(other)
                b = curves.barrier(net, curves.linear_path(w1, w3), 1001).barrier
                worst_ratio = min(worst_ratio, b / ysq)
    elapsed = time.perf_counter() - start
    ok = not bad_counts and worst_flat < 1e-8 and worst_ratio > 0.01 and elapsed < 30
    report(
        "criterion 1 (linear components)", ok,
        f"count mismatches={bad_counts}, max path variation={worst_flat:.3g} (<1e-8), "
        f"min cross barrier/||Y||^2={worst_ratio:.4g} (>0.01), time={elapsed:.1f}s (<30)",
    )


def test_criterion_2_resnet_component_count():
    start = time.perf_counter()
    radii = (0.2, 0.25, 0.3, 0.35, 0.4)
    counts = {}
    for eps in (0.0, 1.0):
        net = NetworkSpec.resnet1d(1.0, 1.0, eps)
        pts = topology.sample_resnet1d_minimum(1.0, 1.0, eps)
        counts[eps] = [topology.count_components_numeric(pts, r, net, 0.5) for r in radii]
    elapsed = time.perf_counter() - start
    ok = counts[0.0] == [4] * len(radii) and counts[1.0] == [3] * len(radii) and elapsed < 10
    report("criterion 2 (resnet components)", ok, f"eps=0: {counts[0.0]}, eps=1: {counts[1.0]}, time={elapsed:.1f}s (<10)")


def test_criterion_3_permutation_alignment(tmp_path):
    rep = run(ExperimentConfig("align_demo", 3, "fast", tmp_path, {"n_pairs": "50"}))
    failures = next(a for a in rep.assertions if a.name == "alignment failures").measured
    report("criterion 3 (permutation alignment)", rep.passed and failures == 0 and rep.summary["pairs"] == 50,
           f"pairs={rep.summary['pairs']}, failures={failures:g}")


def test_criterion_4_unbounded_barrier():
    bs = (1.0, 10.0, 1e3, 1e6)
    rng = make_rng(4)
    net5 = experiments.fig4_network(rng, 0.01)
    w5, _ = train_with_halving(net5, None, 0.001, 2000, seed=4)
    w5 = fit_last_layer(net5, w5)
    cases = [(NetworkSpec.linear([[1.0]], [[1.0]], hidden=(1,)), ParameterPoint.of(1.0, 1.0), "scalar"),
             (net5, w5, "5-layer")]
    worst, certified = 0.0, True
    for net, w, _ in cases:
        for b in bs:
            pair = curves.construct_unbounded_pair(net, w, b)
            certified &= pair.certified_loss > b
            worst = max(worst, abs(pair.certified_loss - pair.closed_form_loss) / pair.closed_form_loss)
    scalar = cases[0]
    mid = forward_loss(scalar[0], scalar[1].lerp(rescale_action(4.0, 1.0, scalar[1]), 0.5))
    exact = abs(mid - 0.31640625)
    ok = certified and worst <= 1e-8 and exact <= 1e-12
    report("criterion 4 (unbounded barrier)", ok,
           f"all certified={certified}, max rel closed-form error={worst:.3g} (<=1e-8), |L_mid(m=4) - 0.31640625|={exact:.3g}")


def test_criterion_5_barrier_bound_sigmoid(tmp_path):
    start = time.perf_counter()
    rep = run(ExperimentConfig("fig3a", 5, "fast", tmp_path))
    elapsed = time.perf_counter() - start
    holds = rep.summary.get("holding", 0)
    ok = rep.passed and holds == 100 and rep.summary["instances"] == 100 and elapsed < 60
    report("criterion 5 (sigmoid barrier bound)", ok, f"holding={holds}/100, time={elapsed:.1f}s (<60)")


@pytest.mark.parametrize("vary", ["group", "minimum"])
def test_criterion_6_fig3bc(tmp_path, vary):
    rep = run(ExperimentConfig("fig3bc", 6, "fast", tmp_path, {"vary": vary}))
    s = rep.summary
    ok = (rep.passed and s["max_loss_gamma_b"] < s["max_loss_linear_b"]
          and s["max_loss_gamma_c"] < s["max_loss_linear_c"]
          and s["linear_barrier"]["c"] > s["linear_barrier"]["b"])
    report(f"criterion 6 (fig3 b-c, vary={vary})", ok,
           f"small: gamma {s['max_loss_gamma_b']:.3g} vs linear {s['max_loss_linear_b']:.3g}; "
           f"large: gamma {s['max_loss_gamma_c']:.3g} vs linear {s['max_loss_linear_c']:.3g}")


def test_criterion_7_arc_geometry():
    worst = 0.0
    for kappa in (0.1, 1.0, 10.0):
        for x in (0.1, 0.5, 0.9):
            chord = 2 * x / kappa
            measured = curves.curve_to_chord_deviation(circular_arc(kappa, chord, 1001))
            worst = max(worst, abs(measured - curves.dmax_bound(kappa, chord)))
    report("criterion 7 (arc deviation equals d_max)", worst <= 1e-6, f"max |measured - d_max|={worst:.3g} (<=1e-6)")


def test_criterion_7_first_order_approximation():
    # kappa d^2 / 8 against the exact d_max wherever kappa d / 2 <= 0.1
    worst = 0.0
    for kappa in (0.1, 1.0, 10.0):
        for x in (0.01, 0.05, 0.1):
            chord = 2 * x / kappa
            exact = curves.dmax_bound(kappa, chord)
            worst = max(worst, abs(kappa * chord**2 / 8 - exact) / exact)
    report("criterion 7 (first-order d_max)", worst <= 1e-3, f"max rel error={worst:.4g} (<=1e-3)")


def test_criterion_8_gradient_check():
    rng = make_rng(8)
    errs = []
    for i in range(50):
        net, w = random_net(rng, ACTIVATIONS[i % 3])
        errs.append(relative_error(net, w))
    report("criterion 8 (gradient check)", max(errs) < 1e-4, f"max rel error over 50 nets={max(errs):.3g} (<1e-4)")


def _tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(tmp_path):
    codes = []
    for name in ("a", "b"):
        res = subprocess.run([sys.executable, "-m", "symland", "verify", "--seed", "42", "--out", str(tmp_path / name)],
                             capture_output=True, text=True)
        codes.append(res.returncode)
    ta, tb = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    differing = sorted(k for k in set(ta) | set(tb) if ta.get(k) != tb.get(k))
    ok = codes == [0, 0] and not differing and len(ta) > 0
    report("criterion 9 (determinism)", ok, f"exit codes={codes}, files={len(ta)}, differing={differing}")
