"""Discrete operators: stiffness (Gagliardo form), collocation, mass, loads.

The P1 nodal basis over the mesh discretizes the zero-trace energy space.
On intervals every matrix entry is computed in closed form:

* the full-space Gagliardo form of zero extensions equals
  ``c/(s(s-1)) ∬ u'(sigma) v'(tau) |sigma-tau|^{1-s}`` (two integrations by
  parts), whose cell-pair integrals have an elementary second
  antiderivative;
* the regional form subtracts the complement-tail term
  ``∫ u v phi dx``, a polynomial-times-power integral;
* the collocation matrix applies the exact principal-value formula to the
  C² spline reconstruction of each nodal basis vector (the principal value
  of a raw P1 hat does not exist at its own kink for alpha > 1/2).

Disk meshes use tensor-Gauss cell-pair quadrature with a block-circulant
reduction over the angular direction (see ``disk_assembly``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve as dense_solve

from .domain import DiskMesh, FracParams, IntervalMesh, Mesh
from .funcexpr import Expr, evaluate
from .gridfn import GridFunction
from .powerint import (
    gauss_rule,
    pair_kernel_double_integral,
    poly_power_integral,
)

__all__ = [
    "Basis",
    "StiffnessMatrix",
    "CollocationMatrix",
    "assemble_gagliardo",
    "assemble_collocation",
    "mass_matrix",
    "hardy_weight_matrix",
    "load_l2",
    "load_measure",
    "export_matrix_text",
]


@dataclass(frozen=True)
class Basis:
    """Continuous piecewise-linear nodal hats vanishing on the boundary."""

    dof_count: int
    kind: str = "P1Hat"


def p1_basis(mesh: Mesh) -> Basis:
    return Basis(dof_count=mesh.dof_count)


@dataclass(frozen=True)
class StiffnessMatrix:
    entries: np.ndarray
    assembly_tolerance: float = 1e-12

    def __post_init__(self):
        A = self.entries
        if not np.all(np.isfinite(A)):
            raise FloatingPointError("non-finite stiffness entry")
        if np.max(np.abs(A - A.T)) > self.assembly_tolerance * np.max(np.abs(A)):
            raise FloatingPointError("stiffness matrix is not symmetric")


@dataclass(frozen=True)
class CollocationMatrix:
    entries: np.ndarray

    def __post_init__(self):
        bad = ~np.isfinite(self.entries)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise FloatingPointError(f"non-finite collocation entry at ({i}, {j})")


# ---------------------------------------------------------------------------
# weighted hat-product integrals (shared by the tail term and Hardy matrix)
# ---------------------------------------------------------------------------


def _hat_pair_power_integrals(z0, z1, zk, zk1, h, tref, sign, gamma, need):
    """Exact integrals of hat products against ``|x - tref|**gamma`` on [z0, z1].

    The two hats on cell [zk, zk1] are L = (zk1-x)/h and R = (x-zk)/h;
    returns (LL, LR, RR) integrals (skipping those not flagged in ``need``)
    with the weight ``t**gamma`` where ``t = sign*(x - tref)`` is the
    distance to the reference endpoint.
    """
    # substituting x = tref + sign*t gives
    # L = (zk1 - tref - sign t)/h and R = (tref - zk + sign t)/h
    l0, l1 = (zk1 - tref) / h, -sign / h
    r0, r1 = (tref - zk) / h, sign / h
    t0, t1 = sorted((sign * (z0 - tref), sign * (z1 - tref)))
    t0 = max(t0, 0.0)
    need_ll, need_lr, need_rr = need
    ll = (
        poly_power_integral((l0 * l0, 2 * l0 * l1, l1 * l1), gamma, t0, t1)
        if need_ll
        else 0.0
    )
    lr = (
        poly_power_integral((l0 * r0, l0 * r1 + l1 * r0, l1 * r1), gamma, t0, t1)
        if need_lr
        else 0.0
    )
    rr = (
        poly_power_integral((r0 * r0, 2 * r0 * r1, r1 * r1), gamma, t0, t1)
        if need_rr
        else 0.0
    )
    return ll, lr, rr


def _accumulate_weighted_products(mesh: IntervalMesh, gamma: float, pieces):
    """Assemble ``∫ hat_i hat_j w(x) dx`` where w is a sum of endpoint powers.

    ``pieces(k, z0, z1)`` yields ``(x0, x1, tref, sign)`` sub-pieces with the
    active weight ``(sign*(x-tref))**gamma`` on each.
    """
    n = mesh.dof_count
    z = mesh.all_nodes
    T = np.zeros((n, n))
    for k in range(n + 1):
        z0, z1, h = z[k], z[k + 1], mesh.h[k]
        iL, iR = k - 1, k  # interior dof indices of the two hats
        for x0, x1, tref, sign in pieces(k, z0, z1):
            if x1 <= x0:
                continue
            has_l, has_r = 0 <= iL < n, 0 <= iR < n
            ll, lr, rr = _hat_pair_power_integrals(
                x0, x1, z0, z1, h, tref, sign, gamma,
                (has_l, has_l and has_r, has_r),
            )
            if has_l:
                T[iL, iL] += ll
            if has_l and has_r:
                T[iL, iR] += lr
                T[iR, iL] += lr
            if has_r:
                T[iR, iR] += rr
    return T


# ---------------------------------------------------------------------------
# stiffness
# ---------------------------------------------------------------------------


def assemble_gagliardo(mesh: Mesh, basis: Basis, params: FracParams) -> StiffnessMatrix:
    """Stiffness matrix of the bilinear Gagliardo form over the domain."""
    if isinstance(mesh, IntervalMesh):
        return _gagliardo_interval(mesh, basis, params)
    if isinstance(mesh, DiskMesh):
        from .disk_assembly import gagliardo_disk

        return StiffnessMatrix(gagliardo_disk(mesh, params))
    raise TypeError(f"unsupported mesh {type(mesh)!r}")


def _gagliardo_interval(mesh, basis, params):
    s, c = params.s, params.c_norm
    n = basis.dof_count
    z = mesh.all_nodes
    h = mesh.h
    ncell = n + 1
    # derivative form of the full-space seminorm of zero extensions
    slopes = np.zeros((ncell, n))
    idx = np.arange(n)
    slopes[idx, idx] = 1.0 / h[:-1]
    slopes[idx + 1, idx] = -1.0 / h[1:]
    lo, hi = z[:-1], z[1:]
    kernel = pair_kernel_double_integral(
        lo[:, None], hi[:, None], lo[None, :], hi[None, :], 1.0 - s
    )
    A_full = (c / (s * (s - 1.0))) * (slopes.T @ kernel @ slopes)
    # regional correction: subtract ∫ hat_i hat_j phi(x) dx with
    # phi(x) = (c/s) [ (b-x)^{-s} + (x-a)^{-s} ]
    a, b = mesh.domain.a, mesh.domain.b

    def pieces(k, z0, z1):
        return [(z0, z1, a, 1.0), (z0, z1, b, -1.0)]

    T = (c / s) * _accumulate_weighted_products(mesh, -s, pieces)
    A = A_full - T
    return StiffnessMatrix(0.5 * (A + A.T))


def hardy_weight_matrix(mesh: IntervalMesh, basis: Basis, params: FracParams):
    """Weighted mass matrix ``W_ij = ∫ hat_i hat_j rho(x)^{-2a} dx``, exact."""
    if not isinstance(mesh, IntervalMesh):
        raise TypeError("Hardy weight matrix is implemented on intervals")
    a, b = mesh.domain.a, mesh.domain.b
    mid = 0.5 * (a + b)

    def pieces(k, z0, z1):
        out = []
        if z0 < mid:
            out.append((z0, min(z1, mid), a, 1.0))
        if z1 > mid:
            out.append((max(z0, mid), z1, b, -1.0))
        return out

    return _accumulate_weighted_products(mesh, -params.s, pieces)


# ---------------------------------------------------------------------------
# collocation
# ---------------------------------------------------------------------------


def assemble_collocation(
    mesh: Mesh,
    basis: Basis,
    params: FracParams,
    h_min_factor: float = 1.0,
) -> CollocationMatrix:
    """Pointwise-operator matrix ``L_ij = (regional op of basis_j)(x_i)``.

    Each nodal basis vector is reconstructed as a C² cubic spline and its
    principal value evaluated in closed form.  Rows at nodes closer to the
    boundary than ``h_min_factor * h_max`` fall back to the Galerkin
    representation ``(M^{-1} A)`` of the operator.
    """
    if not isinstance(mesh, IntervalMesh):
        raise NotImplementedError("collocation is implemented on interval meshes")
    s, c = params.s, params.c_norm
    n = basis.dof_count
    z = mesh.all_nodes
    x = mesh.nodes
    a, b = mesh.domain.a, mesh.domain.b
    E = np.zeros((n + 2, n))
    E[1:-1, :] = np.eye(n)
    spline = CubicSpline(z, E, bc_type="not-a-knot")
    C3, C2 = spline.c[0], spline.c[1]  # (ncells, n)
    gamma = 1.0 - s
    W = z[None, :] - x[:, None]  # (n, n+2)
    F0 = np.sign(W) * np.abs(W) ** (gamma + 1.0) / (gamma + 1.0)
    F1 = np.abs(W) ** (gamma + 2.0) / (gamma + 2.0)
    dF0 = np.diff(F0, axis=1)  # (n, ncells)
    dF1 = np.diff(F1, axis=1)
    V1 = dF1 + (x[:, None] - z[None, :-1]) * dF0
    I2 = V1 @ (6.0 * C3) + dF0 @ (2.0 * C2)  # (n, n)
    deriv = spline.derivative()
    da = deriv(a)  # (n,)
    db = deriv(b)
    A_ = x - a
    B_ = b - x
    L = c * (
        -db[None, :] * (B_ ** (1.0 - s))[:, None]
        + da[None, :] * (A_ ** (1.0 - s))[:, None]
        + I2
    ) / (s * (1.0 - s))
    phivec = c * (B_ ** (-s) + A_ ** (-s)) / s
    L[np.arange(n), np.arange(n)] -= phivec
    # Galerkin fallback rows near the boundary
    rho = mesh.rho_nodes()
    near = rho < h_min_factor * mesh.h_max
    if np.any(near):
        A = assemble_gagliardo(mesh, basis, params).entries
        M = mass_matrix(mesh, basis)
        L_gal = dense_solve(M, A, assume_a="pos")
        L[near, :] = L_gal[near, :]
    return CollocationMatrix(L)


# ---------------------------------------------------------------------------
# mass and loads
# ---------------------------------------------------------------------------


def mass_matrix(mesh: Mesh, basis: Basis) -> np.ndarray:
    """L² mass matrix of the nodal basis."""
    if isinstance(mesh, IntervalMesh):
        h = mesh.h
        n = basis.dof_count
        M = np.zeros((n, n))
        idx = np.arange(n)
        M[idx, idx] = (h[:-1] + h[1:]) / 3.0
        M[idx[:-1], idx[:-1] + 1] = h[1:-1] / 6.0
        M[idx[:-1] + 1, idx[:-1]] = h[1:-1] / 6.0
        return M
    if isinstance(mesh, DiskMesh):
        from .disk_assembly import mass_disk

        return mass_disk(mesh)
    raise TypeError(f"unsupported mesh {type(mesh)!r}")


def _eval_data(f, pts, domain):
    if isinstance(f, Expr):
        return evaluate(f, pts, domain)
    if isinstance(f, GridFunction):
        return f(pts)
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    raise TypeError(f"cannot evaluate data of type {type(f)!r}")


def load_l2(f, mesh: Mesh, basis: Basis, order: int = 8) -> np.ndarray:
    """Load vector ``b_i = ∫ f hat_i dx`` by per-cell Gauss quadrature."""
    if isinstance(mesh, IntervalMesh):
        xg, wg = gauss_rule(order)
        z = mesh.all_nodes
        mid = 0.5 * (z[1:] + z[:-1])
        half = 0.5 * mesh.h
        pts = mid[:, None] + half[:, None] * xg[None, :]  # (ncells, order)
        wts = half[:, None] * wg[None, :]
        vals = _eval_data(f, pts.ravel(), mesh.domain).reshape(pts.shape)
        lam = (pts - z[:-1, None]) / mesh.h[:, None]  # right-hat value
        n = basis.dof_count
        b = np.zeros(n)
        contrib_left = np.sum(wts * vals * (1.0 - lam), axis=1)  # dof k-1
        contrib_right = np.sum(wts * vals * lam, axis=1)  # dof k
        b += contrib_right[:-1]
        b += contrib_left[1:]
        return b
    if isinstance(mesh, DiskMesh):
        from .disk_assembly import load_disk

        return load_disk(lambda pts: _eval_data(f, pts, mesh.domain), mesh)
    raise TypeError(f"unsupported mesh {type(mesh)!r}")


def load_measure(mu, mesh: Mesh, basis: Basis) -> np.ndarray:
    """Load of a measure: atom weights times hat values, plus the density load."""
    b = np.zeros(basis.dof_count)
    for loc, w in mu.atoms:
        if isinstance(mesh, IntervalMesh):
            x = float(np.asarray(loc).reshape(()))
            if not mesh.domain.a < x < mesh.domain.b:
                raise ValueError(f"atom at {x} is not interior")
            e = np.zeros(basis.dof_count)
            k = np.searchsorted(mesh.all_nodes, x) - 1
            k = min(max(k, 0), len(mesh.h) - 1)
            lam = (x - mesh.all_nodes[k]) / mesh.h[k]
            if k - 1 >= 0:
                e[k - 1] = 1.0 - lam
            if k < basis.dof_count:
                e[k] = lam
            b += w * e
        else:
            # 2D: points are outside the dual of the energy space; atoms are
            # mollified over their containing cell via the interpolation
            # weights of the nodal basis
            pt = np.asarray(loc, dtype=float).reshape(2)
            if mesh.domain.rho(pt) <= 0:
                raise ValueError(f"atom at {pt} is not interior")
            from .disk_assembly import node_interp_weights

            idxs, wts = node_interp_weights(mesh, pt)
            b[idxs] += w * wts
    if getattr(mu, "density", None) is not None:
        b = b + load_l2(mu.density, mesh, basis)
    return b


def export_matrix_text(matrix: np.ndarray, path) -> None:
    """Write a dense matrix as a dimension header plus row-major values."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(format(v, ".17e") for v in row) + "\n")
