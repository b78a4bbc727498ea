"""Acceptance suite: thirteen end-to-end checks, one printed line each.

Each test prints ``criterion NN PASS/FAIL <name>: <details>`` on the live
terminal (bypassing capture) and then asserts, so a red criterion is both
visible in the transcript and recorded by pytest.
"""

import math

import numpy as np
import pytest

from regfrac.analysis import (
    boundary_constant,
    boundary_representation_residual,
    decay_fit,
    frac_normal_derivative,
    green_bound_check,
    hardy_quotient,
    ibp_check,
    phi_bound_check,
    poincare_constant,
)
from regfrac.discretization import p1_basis
from regfrac.domain import Disk, DiskMesh, FracParams, graded_mesh, make_interval
from regfrac.gridfn import GridFunction
from regfrac.operators import PVQuadratureConfig, eval_pv, phi
from regfrac.solver import (
    MeasureData,
    _domain_quadrature,
    green_matrix,
    solve_classical,
    solve_very_weak,
    solve_weak_l2,
)

OM = make_interval(-1.0, 1.0)
DISK = Disk(center=(0.0, 0.0), radius=1.0)
ALPHAS = (0.6, 0.75, 0.9)


def getoor_constant(alpha: float) -> float:
    return (
        2.0**(2.0 * alpha)
        * math.gamma(alpha + 0.5)
        * math.gamma(alpha + 1.0)
        / math.gamma(0.5)
    )


def emit(capsys, num, name, passed, detail):
    line = f"criterion {num:02d} {'PASS' if passed else 'FAIL'} {name}: {detail}"
    with capsys.disabled():
        print(line)
    assert passed, line


def ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def ones2d(p):
    p = np.asarray(p, dtype=float)
    return 1.0 if p.ndim == 1 else np.ones(len(p))


def smooth_random(x, rng):
    c = rng.normal(size=4)
    x = np.asarray(x, dtype=float)
    return (c[0] * np.sin(np.pi * x) + c[1] * np.cos(2 * x) + c[2] * x**2
            + c[3]) * (1 - x**2)


@pytest.fixture(scope="module")
def mesh64():
    return graded_mesh(OM, 64, 2.0)


@pytest.fixture(scope="module")
def mesh128():
    return graded_mesh(OM, 128, 2.0)


@pytest.fixture(scope="module")
def mesh256():
    return graded_mesh(OM, 256, 2.0)


@pytest.fixture(scope="module")
def disk22():
    return DiskMesh(DISK, n=22, q=2.0, n_angles=44)


def test_criterion_01_constant_annihilation(capsys):
    rng = np.random.default_rng(11)
    worst = 0.0
    for alpha in ALPHAS:
        params = FracParams(alpha)
        xs = -0.999 + 1.998 * rng.random(50)
        for x in xs:
            pv, _ = eval_pv(ones, float(x), params, OM)
            worst = max(worst, abs(pv))
    emit(capsys, 1, "constant annihilation", worst <= 1e-10,
         f"max |operator(1)| = {worst:.2e} over 50 points x 3 orders (tol 1e-10)")


def test_criterion_02_getoor_calibration(capsys):
    xs = np.linspace(-0.9, 0.9, 9)
    coarse_cfg = PVQuadratureConfig(far_field_points_per_cell=2,
                                    richardson_levels=3)
    worst_fine, worst_coarse = 0.0, 0.0
    for alpha in ALPHAS:
        params = FracParams(alpha)
        target = getoor_constant(alpha)
        prof = lambda x: np.maximum(1.0 - np.asarray(x, dtype=float) ** 2,
                                    0.0) ** alpha
        for x in xs:
            full = lambda cfg: (
                eval_pv(prof, float(x), params, OM, cfg).value
                + prof(x) * phi(float(x), params, OM)
            )
            worst_fine = max(worst_fine,
                             abs(full(None) - target) / target)
            worst_coarse = max(worst_coarse,
                               abs(full(coarse_cfg) - target) / target)
    ok = worst_fine <= 5e-3 and worst_fine < worst_coarse
    emit(capsys, 2, "whole-space calibration", ok,
         f"max rel err {worst_fine:.2e} (tol 5e-3), coarse quadrature "
         f"{worst_coarse:.2e}")


def test_criterion_03_boundary_decay(capsys):
    targets = {0.6: (0.15, 0.25), 0.75: (0.45, 0.55), 0.9: (0.75, 0.85)}
    # grading adapted to the expected decay: the slowly decaying profile of
    # the smallest order needs a stronger boundary grading to be resolved
    gradings = {0.6: 3.0, 0.75: 2.0, 0.9: 2.0}
    results = []
    ok = True
    for alpha in ALPHAS:
        q = gradings[alpha]
        mesh = graded_mesh(OM, 256, q)
        rep = solve_classical(ones, mesh, params=FracParams(alpha))
        expo = rep.decay_fit[0]
        lo, hi = targets[alpha]
        ok = ok and lo <= expo <= hi
        results.append(f"a={alpha} (q={q}): {expo:.3f} in [{lo},{hi}]")
    emit(capsys, 3, "boundary decay exponents", ok, "; ".join(results))


def test_criterion_04_comparison_principle(capsys, mesh64):
    params = FracParams(0.75)
    rng = np.random.default_rng(4)
    n = mesh64.dof_count
    worst = 0.0
    for _ in range(200):
        f1 = rng.normal(size=n)
        f2 = f1 + rng.random(size=n)
        u1 = solve_weak_l2(f1, mesh64, params=params).solution.coeffs
        u2 = solve_weak_l2(f2, mesh64, params=params).solution.coeffs
        viol = max(0.0, float(np.max(u1 - u2))) / max(np.max(np.abs(u1)), 1e-300)
        worst = max(worst, viol)
    zero = np.max(np.abs(
        solve_weak_l2(np.zeros(n), mesh64, params=params).solution.coeffs))
    ok = worst <= 1e-9 and zero == 0.0
    emit(capsys, 4, "comparison principle", ok,
         f"worst ordering violation {worst:.2e} over 200 pairs (tol 1e-9), "
         f"zero data -> max |u| = {zero:.1e}")


def test_criterion_05_ibp_identities(capsys, mesh128, mesh256):
    params = FracParams(0.75)
    gaps = {}
    for mesh in (mesh128, mesh256):
        rng = np.random.default_rng(5)
        basis = p1_basis(mesh)
        worst = 0.0
        accepted = 0
        while accepted < 20:
            u = GridFunction(mesh, smooth_random(mesh.nodes, rng))
            v = GridFunction(mesh, smooth_random(mesh.nodes, rng))
            rep = ibp_check(u, v, mesh, basis, params)
            scale = max(abs(rep.lhs), abs(rep.bilinear), abs(rep.rhs))
            norm = math.sqrt(ibp_check(u, u, mesh, basis, params).bilinear
                             * ibp_check(v, v, mesh, basis, params).bilinear)
            if scale < 0.1 * norm:
                # a nearly orthogonal pair: all three values nearly cancel
                # and the relative comparison is meaningless; redraw
                continue
            accepted += 1
            worst = max(worst, rep.max_pairwise_gap / scale)
        gaps[mesh.dof_count] = worst
    g128, g256 = gaps[128], gaps[256]
    ok = g128 <= 1e-2 and g256 <= 0.5 * g128
    emit(capsys, 5, "integration-by-parts identities", ok,
         f"max rel gap {g128:.2e} at n=128 (tol 1e-2), "
         f"{g256:.2e} at n=256 (shrink {g128 / g256:.1f}x, need >= 2x)")


def test_criterion_06_norm_equivalence(capsys, mesh128, mesh256):
    params = FracParams(0.75)
    cp, ch = [], []
    for mesh in (mesh128, mesh256):
        basis = p1_basis(mesh)
        cp.append(poincare_constant(mesh, basis, params))
        ch.append(hardy_quotient(mesh, basis, params))
    drift_p = abs(cp[1] - cp[0]) / cp[0]
    drift_h = abs(ch[1] - ch[0]) / ch[0]
    wide = graded_mesh(make_interval(-2.0, 2.0), 128, 2.0)
    ratio = poincare_constant(wide, p1_basis(wide), params) / cp[0]
    law = 2.0 ** (2 * params.alpha)
    ok = (min(cp + ch) > 0 and drift_p < 0.25 and drift_h < 0.25
          and abs(ratio - law) <= 0.1 * law)
    emit(capsys, 6, "norm equivalence constants", ok,
         f"poincare {cp[0]:.4f} (drift {drift_p:.1%}), hardy {ch[0]:.4f} "
         f"(drift {drift_h:.1%}), dilation ratio {ratio:.3f} vs {law:.3f}")


def test_criterion_07_l2_bound(capsys, mesh64, mesh128):
    params = FracParams(0.75)
    cs = []
    for mesh in (mesh64, mesh128):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            f = lambda x, c=rng.normal(size=3): (
                c[0] * np.sin(2 * x) + c[1] * np.cos(5 * x) + c[2])
            rep = solve_weak_l2(f, mesh, params=params)
            worst = max(worst, rep.c_obs["energy_over_l2"])
        cs.append(worst)
    drift = abs(cs[1] - cs[0]) / cs[0]
    ok = all(math.isfinite(c) and c > 0 for c in cs) and drift <= 0.25
    emit(capsys, 7, "L2 data energy bound", ok,
         f"C_obs = {cs[0]:.4f} / {cs[1]:.4f} at n=64/128 (drift {drift:.1%})")


def test_criterion_08_measure_data(capsys, mesh64, mesh128, mesh256):
    params = FracParams(0.75)
    alpha = params.alpha
    cs = []
    for mesh in (mesh64, mesh128):
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(20):
            atoms = [(float(-0.95 + 1.9 * rng.random()), float(rng.random()))
                     for _ in range(rng.integers(1, 4))]
            c = rng.normal(size=2)
            mu = MeasureData(
                atoms,
                density=lambda x: c[0] + c[1] * np.cos(3 * x),
                mesh=mesh, params=params,
            )
            rep = solve_very_weak(mu, mesh, params=params)
            worst = max(worst, rep.c_obs["l1_over_weighted_mass"])
        cs.append(worst)
    drift = abs(cs[1] - cs[0]) / cs[0]
    # Dirac at 0: duality residual against the profile with known operator
    rep = solve_very_weak(MeasureData([(0.0, 1.0)]), mesh256, params=params)
    cg = getoor_constant(alpha)
    pts, wts = _domain_quadrature(mesh256)
    lxi = np.array([cg - (1 - x * x) ** alpha * phi(float(x), params, OM)
                    for x in pts])
    residual = abs(float(wts @ (rep.solution(pts) * lxi)) - 1.0)
    ok = drift <= 0.25 and residual <= 0.02
    emit(capsys, 8, "measure data stability", ok,
         f"C_obs = {cs[0]:.4f} / {cs[1]:.4f} (drift {drift:.1%}), "
         f"Dirac duality residual {residual:.4f} (tol 0.02)")


def test_criterion_09_green_kernel_bound(capsys, mesh64, mesh128):
    results = []
    ok = True
    for alpha in ALPHAS:
        params = FracParams(alpha)
        sups, syms = [], []
        for mesh in (mesh64, mesh128):
            G = green_matrix(mesh, params=params)
            ratio_sup, _ = green_bound_check(G, mesh, params)
            sups.append(ratio_sup)
            K = G.kernel()
            syms.append(np.max(np.abs(K - K.T)) / np.max(np.abs(K)))
        drift = sups[1] / sups[0]
        ok = ok and math.isfinite(sups[0]) and drift < 2.0 and max(syms) <= 1e-10
        results.append(f"a={alpha}: sup {sups[0]:.2f} drift {drift:.2f}x")
    emit(capsys, 9, "kernel two-sided bound", ok, "; ".join(results))


def test_criterion_10_phi_bounds(capsys, mesh64, mesh128):
    params = FracParams(0.75)
    params2 = FracParams(0.75, dim=2)
    pairs = [phi_bound_check(m, params) for m in (mesh64, mesh128)]
    disks = [phi_bound_check(DiskMesh(DISK, n=n, q=2.0, n_angles=2 * n), params2)
             for n in (6, 9)]
    (l1, h1), (l2, h2) = pairs
    (dl1, dh1), (dl2, dh2) = disks
    ok = (min(l1, l2, dl1, dl2) > 0 and max(h1, h2, dh1, dh2) < math.inf
          and abs(l2 - l1) <= 0.5 * l1 and abs(h2 - h1) <= 0.5 * h1
          and abs(dl2 - dl1) <= 0.5 * dl1 and abs(dh2 - dh1) <= 0.5 * dh1)
    emit(capsys, 10, "killing-tail bounds", ok,
         f"interval phi*rho^s in [{l1:.3f}, {h1:.3f}], "
         f"disk in [{dl1:.3f}, {dh1:.3f}], mesh-stable")


def test_criterion_11_boundary_representation(capsys, mesh128, mesh256):
    params = FracParams(0.75)
    rels = []
    for mesh in (mesh128, mesh256):
        basis = p1_basis(mesh)
        xi = solve_classical(ones, mesh, params=params).solution
        u1 = GridFunction(mesh, np.ones(mesh.dof_count), boundary_values=1.0)
        res = boundary_representation_residual(
            u1, lambda x: np.zeros_like(x), ones, xi, mesh, basis, params)
        rels.append(res / OM.diameter)  # identity scale: both sides -> |domain|
    ok = rels[1] <= 0.05 and rels[1] < rels[0]
    emit(capsys, 11, "boundary representation identity", ok,
         f"rel residual {rels[1]:.4f} at n=256 (tol 0.05), "
         f"{rels[0]:.4f} at n=128 (decreasing)")


def test_criterion_12_fractional_normal_derivative(capsys):
    params = FracParams(0.75)
    beta = params.beta
    f1 = lambda x: (1.0 - np.abs(np.asarray(x, dtype=float))) ** beta
    v1, conv = frac_normal_derivative(f1, 1.0, params, OM)
    model_err = abs(v1 + 1.0)
    f2 = lambda x: (1.0 - np.asarray(x, dtype=float) ** 2) ** beta
    v2, _ = frac_normal_derivative(f2, 1.0, params, OM)
    v12, _ = frac_normal_derivative(
        lambda x: 2.0 * f1(x) + 3.0 * f2(x), 1.0, params, OM)
    lin_err = abs(v12 - 2 * v1 - 3 * v2) / (abs(v1) + abs(v2))
    ok = model_err <= 1e-3 and conv and lin_err <= 1e-10
    emit(capsys, 12, "fractional normal derivative", ok,
         f"model profile err {model_err:.2e} (tol 1e-3), "
         f"linearity defect {lin_err:.2e} (tol 1e-10)")


def test_criterion_13_disk_smoke(capsys, disk22):
    params = FracParams(0.75, dim=2)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(10):
        r = 0.9 * math.sqrt(rng.random())
        th = 2 * math.pi * rng.random()
        pv, _ = eval_pv(ones2d, np.array([r * math.cos(th), r * math.sin(th)]),
                        params, DISK)
        worst = max(worst, abs(pv))
    rep = solve_classical(ones2d, disk22, params=params)
    u = rep.solution.coeffs
    rings = u[1:].reshape(disk22.n_rings, disk22.n_angles)
    prof = np.concatenate([[u[0]], rings.mean(axis=1)])
    positive = bool(np.all(u > 0))
    monotone = bool(np.all(np.diff(prof) <= 1e-12))
    viol = 0.0
    n = disk22.dof_count
    for _ in range(20):
        f1 = rng.normal(size=n)
        f2 = f1 + rng.random(size=n)
        u1 = solve_weak_l2(f1, disk22, params=params).solution.coeffs
        u2 = solve_weak_l2(f2, disk22, params=params).solution.coeffs
        viol = max(viol, max(0.0, float(np.max(u1 - u2)))
                   / max(np.max(np.abs(u1)), 1e-300))
    ok = worst <= 1e-8 and positive and monotone and viol <= 1e-9
    emit(capsys, 13, "disk smoke tier", ok,
         f"dofs={n}, |operator(1)| max {worst:.1e} (tol 1e-8), positive={positive}, "
         f"radially monotone={monotone}, comparison violation {viol:.1e}")
