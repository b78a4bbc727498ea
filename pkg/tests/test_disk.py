import math

import numpy as np
import pytest

from regfrac.disk_assembly import (
    domain_quadrature_disk,
    gagliardo_disk,
    load_disk,
    mass_disk,
    node_interp_weights,
)
from regfrac.domain import Disk, DiskMesh, FracParams
from regfrac.solver import solve_classical

DISK = Disk(center=(0.0, 0.0), radius=1.0)
P2 = FracParams(0.75, dim=2)

# energy of u(x) = 1 - |x|^2 under the regional form on the unit disk,
# alpha = 0.75; oracle: reduction to a radial double integral with the
# |r - rho|^{-1/2} diagonal handled by a square-root substitution
SMOOTH_ENERGY = 2.0717893526641293


def batched_ones(p):
    p = np.asarray(p, dtype=float)
    return 1.0 if p.ndim == 1 else np.ones(len(p))


@pytest.fixture(scope="module")
def mesh9():
    return DiskMesh(DISK, n=9, q=2.0, n_angles=18)


@pytest.fixture(scope="module")
def A9(mesh9):
    return gagliardo_disk(mesh9, P2)


class TestStiffness:
    def test_symmetric_spd(self, A9):
        assert np.max(np.abs(A9 - A9.T)) == 0.0
        assert np.linalg.eigvalsh(A9)[0] > 0

    def test_smooth_energy_converges(self, A9, mesh9):
        errs = []
        for mesh, A in ((DiskMesh(DISK, n=6, q=2.0, n_angles=12), None),
                        (mesh9, A9)):
            if A is None:
                A = gagliardo_disk(mesh, P2)
            pts = mesh.nodes
            u = 1.0 - (pts[:, 0] ** 2 + pts[:, 1] ** 2)
            errs.append(abs(u @ A @ u - SMOOTH_ENERGY) / SMOOTH_ENERGY)
        assert errs[1] < errs[0]
        assert errs[1] <= 0.02

    def test_disjoint_entry_matches_double_quadrature(self, A9, mesh9):
        # dofs on opposite sides of the disk: supports are disjoint, so the
        # entry reduces to -c int int  hat_u(x) hat_v(y) |x-y|^{-2-2a}
        m = mesh9.n_angles
        ku, au = 3, 0
        kv, av = 3, m // 2
        iu = mesh9.ring_angle_index(ku, au)
        iv = mesh9.ring_angle_index(kv, av)

        t = np.concatenate([[0.0], mesh9.radii, [DISK.radius]])
        dth = 2.0 * math.pi / m

        def hat_quad(k, a, order=12):
            xg, wg = np.polynomial.legendre.leggauss(order)
            lo, mid, hi = t[k - 1], t[k], t[k + 1]
            rs, rw, rv = [], [], []
            for p0, p1 in ((lo, mid), (mid, hi)):
                r = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * xg
                w = 0.5 * (p1 - p0) * wg
                hat = (r - lo) / (mid - lo) if p1 == mid else (hi - r) / (hi - mid)
                rs.append(r); rw.append(w); rv.append(hat)
            r = np.concatenate(rs); wr = np.concatenate(rw)
            hr = np.concatenate(rv)
            th0 = a * dth
            ths, thw, thv = [], [], []
            for p0, p1 in ((th0 - dth, th0), (th0, th0 + dth)):
                th = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * xg
                w = 0.5 * (p1 - p0) * wg
                hat = 1.0 - np.abs(th - th0) / dth
                ths.append(th); thw.append(w); thv.append(hat)
            th = np.concatenate(ths); wt = np.concatenate(thw)
            ht = np.concatenate(thv)
            rr = np.repeat(r, len(th)); tt = np.tile(th, len(r))
            ww = np.outer(wr * r * hr, wt * ht).ravel()
            return rr * np.cos(tt), rr * np.sin(tt), ww

        xu, yu, wu = hat_quad(ku, au)
        xv, yv, wv = hat_quad(kv, av)
        d2 = (xu[:, None] - xv[None, :]) ** 2 + (yu[:, None] - yv[None, :]) ** 2
        oracle = -P2.c_norm * float(wu @ d2 ** (-(1.0 + P2.alpha)) @ wv)
        assert A9[iu, iv] == pytest.approx(oracle, rel=1e-5)

    def test_rotation_invariance(self, A9, mesh9):
        # entries depend only on the angular offset
        m = mesh9.n_angles
        i1 = mesh9.ring_angle_index(2, 0)
        j1 = mesh9.ring_angle_index(4, 3)
        i2 = mesh9.ring_angle_index(2, 5)
        j2 = mesh9.ring_angle_index(4, 8)
        assert A9[i1, j1] == pytest.approx(A9[i2, j2], rel=1e-13)


class TestMassAndLoad:
    def test_quadrature_weights_integrate_area(self, mesh9):
        _, wts = domain_quadrature_disk(mesh9)
        assert wts.sum() == pytest.approx(math.pi, rel=1e-12)

    def test_load_of_one_matches_closed_form(self, mesh9):
        b = load_disk(batched_ones, mesh9)
        t = np.concatenate([[0.0], mesh9.radii, [DISK.radius]])
        m = mesh9.n_angles
        dth = 2.0 * math.pi / m
        # center hat: (t1 - r)/t1 over [0, t1], full angle
        center = 2.0 * math.pi * t[1] ** 2 / 6.0
        assert b[0] == pytest.approx(center, rel=1e-12)

        def radial_moment(lo, mid, hi):
            # int hat(r) r dr in closed form over both panels
            up = (mid**3 - lo**3) / 3.0 - lo * (mid**2 - lo**2) / 2.0
            up /= mid - lo
            dn = hi * (hi**2 - mid**2) / 2.0 - (hi**3 - mid**3) / 3.0
            dn /= hi - mid
            return up + dn

        for k in (1, 4, mesh9.n_rings):
            i = mesh9.ring_angle_index(k, 2)
            expected = radial_moment(t[k - 1], t[k], t[k + 1]) * dth
            assert b[i] == pytest.approx(expected, rel=1e-12)

    def test_mass_matrix_against_quadrature(self, mesh9):
        M = mass_disk(mesh9)
        assert np.max(np.abs(M - M.T)) == 0.0
        assert np.linalg.eigvalsh(M)[0] > 0
        # u^T M v equals the integral of the two nodal interpolants
        pts = mesh9.nodes
        u = np.cos(pts[:, 0])
        v = 1.0 + pts[:, 1] ** 2
        qpts, qwts = domain_quadrature_disk(mesh9, order=6)
        uu = np.zeros(len(qpts))
        vv = np.zeros(len(qpts))
        for i, p in enumerate(qpts):
            idx, w = node_interp_weights(mesh9, p)
            uu[i] = u[idx] @ w
            vv[i] = v[idx] @ w
        assert u @ M @ v == pytest.approx(float(qwts @ (uu * vv)), rel=1e-8)

    def test_interp_weights_partition_of_unity(self, mesh9):
        rng = np.random.default_rng(2)
        r_inner = mesh9.radii[-1]
        for _ in range(20):
            r = r_inner * math.sqrt(rng.random())
            th = 2 * math.pi * rng.random()
            _, w = node_interp_weights(mesh9, np.array([r * math.cos(th),
                                                        r * math.sin(th)]))
            assert w.sum() == pytest.approx(1.0, abs=1e-12)


class TestDiskSolve:
    def test_constant_data_positive_monotone_symmetric(self, mesh9):
        rep = solve_classical(batched_ones, mesh9, params=P2)
        u = rep.solution.coeffs
        assert np.all(u > 0)
        rings = u[1:].reshape(mesh9.n_rings, mesh9.n_angles)
        prof = np.concatenate([[u[0]], rings.mean(axis=1)])
        assert np.all(np.diff(prof) <= 1e-12)
        assert np.max(np.abs(rings - rings.mean(axis=1, keepdims=True))) <= 1e-12
