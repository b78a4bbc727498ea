"""Nodal grid functions over interval and disk meshes.

A :class:`GridFunction` stores coefficients of the nodal basis (values at
interior mesh nodes) plus an optional boundary trace.  Point evaluation is
basis interpolation; ``smooth()`` returns a C² cubic-spline reconstruction
through the same nodal values, which is what the pointwise-operator code
evaluates (a piecewise-linear interpolant has kinks at the nodes, where the
principal value of the operator does not exist for alpha > 1/2).
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .domain import DiskMesh, IntervalMesh, Mesh

__all__ = ["GridFunction"]


class GridFunction:
    """Coefficients over interior basis functions, with optional boundary trace."""

    def __init__(self, mesh: Mesh, coeffs, boundary_values=None):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.dof_count,):
            raise ValueError(
                f"coefficient length {coeffs.shape} != dof count {mesh.dof_count}"
            )
        self.mesh = mesh
        self.coeffs = coeffs
        if boundary_values is None:
            self.boundary_values = np.zeros(len(mesh.boundary_points))
        else:
            self.boundary_values = np.broadcast_to(
                np.asarray(boundary_values, dtype=float),
                (len(mesh.boundary_points),),
            ).copy()
        self._spline = None

    # -- evaluation ---------------------------------------------------------

    def __call__(self, points):
        """Piecewise-(bi)linear basis interpolation at the given points."""
        if isinstance(self.mesh, IntervalMesh):
            pts = np.asarray(points, dtype=float)
            vals = np.concatenate(
                [[self.boundary_values[0]], self.coeffs, [self.boundary_values[1]]]
            )
            return np.interp(pts, self.mesh.all_nodes, vals)
        return self._eval_disk(points)

    def _eval_disk(self, points):
        mesh: DiskMesh = self.mesh
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        cx, cy = mesh.domain.center
        dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
        r = np.hypot(dx, dy)
        th = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
        m = mesh.n_angles
        dth = 2.0 * np.pi / m
        ia = np.floor(th / dth).astype(int) % m
        lam = th / dth - np.floor(th / dth)  # angular barycentric coordinate
        # ring values table: row 0 = center (angular constant), rows 1..p =
        # rings, row p+1 = boundary trace sampled at the node angles
        p = mesh.n_rings
        ring_vals = np.empty((p + 2, m))
        ring_vals[0, :] = self.coeffs[0]
        ring_vals[1 : p + 1, :] = self.coeffs[1:].reshape(p, m)
        ring_vals[p + 1, :] = self._trace_at_angles(mesh.angles)
        r_knots = np.concatenate([[0.0], mesh.radii, [mesh.domain.radius]])
        ir = np.clip(np.searchsorted(r_knots, r, side="right") - 1, 0, p)
        mu = (r - r_knots[ir]) / (r_knots[ir + 1] - r_knots[ir])
        mu = np.clip(mu, 0.0, 1.0)
        v_lo = ring_vals[ir, ia] * (1 - lam) + ring_vals[ir, (ia + 1) % m] * lam
        v_hi = ring_vals[ir + 1, ia] * (1 - lam) + ring_vals[ir + 1, (ia + 1) % m] * lam
        out = v_lo * (1 - mu) + v_hi * mu
        return float(out[0]) if scalar else out

    def _trace_at_angles(self, angles):
        # boundary points are stored at uniform angles starting from 0
        mb = len(self.boundary_values)
        ab = 2.0 * np.pi * np.arange(mb + 1) / mb
        vb = np.concatenate([self.boundary_values, [self.boundary_values[0]]])
        return np.interp(np.mod(angles, 2.0 * np.pi), ab, vb)

    # -- smooth reconstruction (1D) -----------------------------------------

    def smooth(self) -> CubicSpline:
        """C² cubic spline through the nodal values (interval meshes only)."""
        if not isinstance(self.mesh, IntervalMesh):
            raise TypeError("smooth reconstruction is available on interval meshes")
        if self._spline is None:
            vals = np.concatenate(
                [[self.boundary_values[0]], self.coeffs, [self.boundary_values[1]]]
            )
            self._spline = CubicSpline(self.mesh.all_nodes, vals, bc_type="not-a-knot")
        return self._spline

    # -- algebra -------------------------------------------------------------

    def __add__(self, other):
        self._check_compatible(other)
        return GridFunction(
            self.mesh,
            self.coeffs + other.coeffs,
            self.boundary_values + other.boundary_values,
        )

    def __sub__(self, other):
        self._check_compatible(other)
        return GridFunction(
            self.mesh,
            self.coeffs - other.coeffs,
            self.boundary_values - other.boundary_values,
        )

    def __mul__(self, scalar):
        return GridFunction(
            self.mesh, self.coeffs * float(scalar), self.boundary_values * float(scalar)
        )

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if not isinstance(other, GridFunction) or other.mesh is not self.mesh:
            raise ValueError("grid functions must share the same mesh")
