import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regfrac.domain import (
    Disk,
    FracParams,
    Interval,
    boundary_layer,
    graded_mesh,
    make_disk,
    make_interval,
    normalization_constant,
)


class TestFracParams:
    def test_beta_is_derived(self):
        p = FracParams(0.75)
        assert p.beta == pytest.approx(0.5)
        assert p.s == pytest.approx(1.5)

    def test_normalization_constant_1d(self):
        # c = 4^a Gamma(1/2+a) / (sqrt(pi) Gamma(1-a)/a), frozen reference
        # value computed from the Gamma-function formula by hand
        assert FracParams(0.75).c_norm == pytest.approx(0.29920671030107465, rel=1e-13)

    def test_normalization_constant_gamma_identity(self):
        # |Gamma(-a)| = Gamma(1-a)/a for a in (0,1)
        for a in (0.55, 0.6, 0.75, 0.9, 0.95):
            direct = 4**a * math.gamma(0.5 + a) / (
                math.sqrt(math.pi) * math.gamma(1 - a) / a
            )
            assert normalization_constant(a, 1) == pytest.approx(direct, rel=1e-13)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 0.3, 1.2, -0.75])
    def test_alpha_out_of_range_rejected(self, alpha):
        with pytest.raises(ValueError):
            FracParams(alpha)


class TestDomains:
    def test_interval_rho(self):
        om = make_interval(-1.0, 3.0)
        assert om.rho(-1.0) == 0.0
        assert om.rho(3.0) == 0.0
        assert om.rho(1.0) == pytest.approx(2.0)
        assert om.diameter == pytest.approx(4.0)

    def test_interval_requires_ordered_endpoints(self):
        with pytest.raises(ValueError):
            make_interval(2.0, 2.0)

    def test_disk_rho_and_contains(self):
        om = make_disk((1.0, -2.0), 2.0)
        assert om.rho(np.array([1.0, -2.0])) == pytest.approx(2.0)
        assert om.rho(np.array([3.0, -2.0])) == pytest.approx(0.0)
        assert om.contains([2.0, -2.0])
        assert not om.contains([4.0, -2.0])
        assert om.boundary_measure == pytest.approx(4.0 * math.pi)


class TestIntervalMesh:
    def test_uniform_when_q_is_one(self):
        m = graded_mesh(make_interval(0.0, 1.0), 9, 1.0)
        assert np.allclose(np.diff(m.all_nodes), 0.1)

    def test_nearest_node_distance(self):
        # first interior node sits at (L/2) * (2/(n+1))**q from the boundary
        om = make_interval(-1.0, 1.0)
        for n, q in [(9, 2.0), (31, 3.0), (64, 1.5)]:
            m = graded_mesh(om, n, q)
            expected = (2.0 / (n + 1)) ** q
            assert m.nodes[0] - om.a == pytest.approx(expected, rel=1e-12)

    def test_mesh_is_symmetric(self):
        m = graded_mesh(make_interval(-1.0, 1.0), 16, 2.5)
        assert np.allclose(m.nodes, -m.nodes[::-1], atol=1e-14)
        assert m.mirror_index(0) == m.dof_count - 1

    def test_nodes_strictly_increasing(self):
        m = graded_mesh(make_interval(0.0, 2.0), 40, 2.0)
        assert np.all(np.diff(m.all_nodes) > 0)
        assert m.dof_count == 40

    @given(
        n=st.integers(min_value=4, max_value=80),
        q=st.floats(min_value=1.0, max_value=4.0),
    )
    def test_grading_properties(self, n, q):
        m = graded_mesh(make_interval(0.0, 1.0), n, q)
        assert np.all(np.diff(m.all_nodes) > 0)
        assert m.all_nodes[0] == 0.0 and m.all_nodes[-1] == 1.0
        # grading never widens cells near the boundary beyond the middle ones
        assert m.h[0] <= m.h_max + 1e-15

    def test_json_round_trip(self):
        m = graded_mesh(make_interval(0.0, 1.0), 8, 2.0)
        d = json.loads(m.to_json())
        assert d["shape"] == "interval"
        assert d["params"] == {"a": 0.0, "b": 1.0}
        assert np.allclose(d["nodes"], m.nodes)
        assert d["grading_exponent"] == 2.0


class TestDiskMesh:
    def test_counts_and_center(self):
        m = graded_mesh(make_disk((0.0, 0.0), 1.0), 6, 2.0)
        assert m.dof_count == 1 + 6 * 12
        assert np.allclose(m.nodes[0], [0.0, 0.0])

    def test_radii_graded_toward_rim(self):
        m = graded_mesh(make_disk((0.0, 0.0), 1.0), 10, 2.0)
        gaps = np.diff(np.concatenate([m.radii, [1.0]]))
        assert np.all(gaps > 0)
        assert gaps[-1] < gaps[0]  # finer near the rim

    def test_all_nodes_interior(self):
        m = graded_mesh(make_disk((1.0, 1.0), 2.0), 5, 1.5)
        assert np.all(m.rho_nodes() > 0)

    def test_json(self):
        m = graded_mesh(make_disk((0.0, 0.0), 1.0), 5, 2.0)
        d = json.loads(m.to_json())
        assert d["shape"] == "disk"
        assert d["params"]["radius"] == 1.0


class TestBoundaryLayer:
    def test_partition(self):
        m = graded_mesh(make_interval(0.0, 1.0), 20, 2.0)
        bl = boundary_layer(m, 0.1)
        rho = m.rho_nodes()
        assert np.all(rho[bl.omega_delta_nodes] > 0.1)
        assert np.all(rho[bl.a_delta_nodes] < 0.1)
        assert len(bl.omega_delta_nodes) + len(bl.a_delta_nodes) == m.dof_count

    def test_delta_validation(self):
        m = graded_mesh(make_interval(0.0, 1.0), 10, 1.0)
        with pytest.raises(ValueError):
            boundary_layer(m, -0.5)
        with pytest.raises(ValueError):
            boundary_layer(m, 2.0)
