"""Matrix assembly on polar disk meshes.

The nodal basis is the tensor product of radial hats (knots at the ring
radii, plus a center profile that is constant in angle) and periodic
angular hats on the uniform angle grid — the same interpolation rule used
by :class:`~regfrac.gridfn.GridFunction` on a disk.

The quadratic-form matrix of the regional operator is the double integral

    B(u, v) = (c/2) ∬_{Ω×Ω} (u(X)-u(Y)) (v(X)-v(Y)) |X-Y|^{-2-2a} dX dY

assembled cell-pair by cell-pair in polar coordinates.  Rotational
invariance is exploited: only cell pairs with the first cell in sector 0
are integrated, and the ring-ring coupling is stored as a circulant symbol
``gen[k, l, dAngle]``.  Well-separated pairs use tensor Gauss quadrature
vectorized over the sector offset; touching and nearly-touching pairs are
handled by recursive subdivision of the parameter rectangles, with
mismatched Gauss orders at the recursion cap so sample points of the two
cells never coincide on the kernel diagonal.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import DiskMesh, FracParams
from .powerint import gauss_rule

__all__ = [
    "gagliardo_disk",
    "mass_disk",
    "load_disk",
    "domain_quadrature_disk",
    "node_interp_weights",
]


def _radial_knots(mesh: DiskMesh) -> np.ndarray:
    return np.concatenate([[0.0], mesh.radii, [mesh.domain.radius]])


def _gauss_on(lo: float, hi: float, order: int):
    xg, wg = gauss_rule(order)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + half * xg, half * wg


def _band_dofs(band: int, p: int):
    """Local dofs of a band cell: (ring index, local angle 0/1, is_center).

    Ring 0 denotes the center dof (angularly constant).  Band ``p`` touches
    the boundary where the basis vanishes, so it carries ring ``p`` only.
    """
    dofs = []
    if band == 0:
        dofs.append((0, 0, True))
        dofs.append((1, 0, False))
        dofs.append((1, 1, False))
    elif band == p:
        dofs.append((p, 0, False))
        dofs.append((p, 1, False))
    else:
        for ring in (band, band + 1):
            dofs.append((ring, 0, False))
            dofs.append((ring, 1, False))
    return dofs


def _dof_grid_values(band, p, t, r_pts, th_pts, dtheta):
    """(dof list, value matrix) for a band cell on a tensor (r, theta) grid.

    ``th_pts`` are local angles in [0, dtheta].  Values are flattened in
    C order over (r, theta).
    """
    lo, hi = t[band], t[band + 1]
    w = hi - lo
    up = (r_pts - lo) / w
    down = (hi - r_pts) / w
    a0 = (dtheta - th_pts) / dtheta
    a1 = th_pts / dtheta
    dofs = _band_dofs(band, p)
    vals = np.empty((len(dofs), len(r_pts) * len(th_pts)))
    for i, (ring, aloc, is_center) in enumerate(dofs):
        rad = down if (is_center or ring == band) else up
        ang = np.ones_like(th_pts) if is_center else (a0 if aloc == 0 else a1)
        vals[i] = np.outer(rad, ang).ravel()
    return dofs, vals


def _kernel(xr, xt, yr, yt, alpha):
    """|X-Y|^{-2-2a} in polar coordinates, broadcasting over inputs."""
    d2 = (xr - yr) ** 2 + 4.0 * xr * yr * np.sin(0.5 * (xt - yt)) ** 2
    return d2 ** (-(1.0 + alpha))


def gagliardo_disk(mesh: DiskMesh, params: FracParams) -> np.ndarray:
    if params.dim != 2:
        raise ValueError("disk assembly needs 2-dimensional parameters")
    p, m = mesh.n_rings, mesh.n_angles
    t = _radial_knots(mesh)
    dtheta = 2.0 * math.pi / m
    alpha = params.alpha
    order = 4

    # per-band tensor rule in (r, local theta) and local dof values
    band_rule = []
    for b in range(p + 1):
        rg, rw = _gauss_on(t[b], t[b + 1], order)
        tg, tw = _gauss_on(0.0, dtheta, order)
        wts = np.outer(rw * rg, tw).ravel()  # includes the r Jacobian
        rr = np.repeat(rg, len(tg))
        tt = np.tile(tg, len(rg))
        dofs, vals = _dof_grid_values(b, p, t, rg, tg, dtheta)
        band_rule.append((rr, tt, wts, dofs, vals))

    gen = np.zeros((p + 1, p + 1, m))
    near_offsets = (-2, -1, 0, 1, 2)

    for b1 in range(p + 1):
        xr, xt, w1, dofs1, B1 = band_rule[b1]
        for b2 in range(p + 1):
            yr, yt, w2, dofs2, B2 = band_rule[b2]
            if abs(b1 - b2) <= 1:
                sep = [d for d in range(m) if d not in
                       {off % m for off in near_offsets}]
            else:
                sep = list(range(m))
            if sep:
                deltas = np.asarray(sep)
                # kernel for all separated sector offsets at once
                K = _kernel(
                    xr[None, :, None],
                    xt[None, :, None],
                    yr[None, None, :],
                    yt[None, None, :] + deltas[:, None, None] * dtheta,
                    alpha,
                )
                # same-cell-side terms: sum the partner-cell kernel mass
                psi_x = np.einsum("dxy,y->x", K, w2)
                psi_y = np.einsum("dxy,x->y", K, w1)
                s_y = np.einsum("dxy,x->dy", K, w1)
                cross = np.einsum("ux,dxy,vy->uvd", B1 * w1, K, B2 * w2)
                for i, (ku, au, cu) in enumerate(dofs1):
                    for jj, (kv, av, cv) in enumerate(dofs1):
                        val = float(np.dot(w1 * B1[i] * B1[jj], psi_x))
                        gen[ku, kv, (av - au) % m] += val
                for i, (ku, au, cu) in enumerate(dofs2):
                    for jj, (kv, av, cv) in enumerate(dofs2):
                        if cu or cv:
                            # the center's angle index is 0 in every sector,
                            # so its slot depends on the offset
                            vals = (w2 * B2[i] * B2[jj]) @ s_y.T
                            gu = np.zeros(len(deltas), dtype=int) if cu \
                                else deltas + au
                            gv = np.zeros(len(deltas), dtype=int) if cv \
                                else deltas + av
                            np.add.at(gen[ku, kv], (gv - gu) % m, vals)
                        else:
                            val = float(np.dot(w2 * B2[i] * B2[jj], psi_y))
                            gen[ku, kv, (av - au) % m] += val
                for i, (ku, au, cu) in enumerate(dofs1):
                    gau = 0 if cu else au
                    for jj, (kv, av, cv) in enumerate(dofs2):
                        gav = np.zeros(len(deltas), dtype=int) if cv \
                            else deltas + av
                        vals = -cross[i, jj]
                        np.add.at(gen[ku, kv], (gav - gau) % m, vals)
                        np.add.at(gen[kv, ku], (gau - gav) % m, vals)
            if abs(b1 - b2) <= 1:
                for off in near_offsets:
                    _near_pair(gen, mesh, params, t, dtheta, b1, b2, off)

    c_half = 0.5 * params.c_norm
    A = _expand_circulant(gen * c_half, p, m)
    return 0.5 * (A + A.T)


def _near_pair(gen, mesh, params, t, dtheta, b1, b2, off):
    """Touching / nearly-touching cell pair via recursive subdivision."""
    p, m = mesh.n_rings, mesh.n_angles
    rect1 = (t[b1], t[b1 + 1], 0.0, dtheta)
    rect2 = (t[b2], t[b2 + 1], off * dtheta, (off + 1) * dtheta)
    # union of global dofs of both cells
    union = {}
    for band, sector in ((b1, 0), (b2, off)):
        for ring, aloc, is_center in _band_dofs(band, p):
            key = ("c",) if is_center else (ring, (sector + aloc) % m)
            union[key] = None
    union = list(union)
    nu = len(union)
    acc = np.zeros((nu, nu))
    _pair_recurse(acc, union, rect1, rect2, t, dtheta, m, params.alpha, 0)
    for i, du in enumerate(union):
        for j, dv in enumerate(union):
            ku, au = (0, 0) if du == ("c",) else du
            kv, av = (0, 0) if dv == ("c",) else dv
            gen[ku, kv, (av - au) % m] += acc[i, j]


def _global_dof_values(union, t, dtheta, m, r_pts, th_pts):
    """Values of global dofs at flattened tensor (r, theta) points."""
    rr = np.repeat(r_pts, len(th_pts))
    tt = np.tile(th_pts, len(r_pts))
    vals = np.empty((len(union), rr.size))
    for i, dof in enumerate(union):
        if dof == ("c",):
            vals[i] = np.clip((t[1] - rr) / t[1], 0.0, None)
        else:
            ring, a = dof
            lo, mid, hi = t[ring - 1], t[ring], t[ring + 1]
            rad = np.where(
                rr <= mid,
                np.clip((rr - lo) / (mid - lo), 0.0, None),
                np.clip((hi - rr) / (hi - mid), 0.0, None),
            )
            s = np.mod(tt - a * dtheta + math.pi, 2.0 * math.pi) - math.pi
            ang = np.clip(1.0 - np.abs(s) / dtheta, 0.0, None)
            vals[i] = rad * ang
    return rr, tt, vals


def _rect_geom(rect):
    r0, r1, t0, t1 = rect
    cr, ct = 0.5 * (r0 + r1), 0.5 * (t0 + t1)
    diam = math.hypot(r1 - r0, r1 * (t1 - t0))
    return cr, ct, diam


_MAX_DEPTH = 2


def _pair_recurse(acc, union, rect1, rect2, t, dtheta, m, alpha, depth):
    c1r, c1t, d1 = _rect_geom(rect1)
    c2r, c2t, d2 = _rect_geom(rect2)
    dist = math.sqrt(
        (c1r - c2r) ** 2 + 4 * c1r * c2r * math.sin(0.5 * (c1t - c2t)) ** 2
    )
    if dist >= 0.75 * (d1 + d2):
        _leaf(acc, union, rect1, rect2, t, dtheta, m, alpha, 3, 3)
        return
    if depth >= _MAX_DEPTH:
        # singular quadrature: the kernel's diagonal singularity is
        # integrable (the basis differences vanish linearly there), and a
        # polar substitution around it makes the radial integrand smooth
        _leaf_polar(acc, union, rect1, rect2, t, dtheta, m, alpha)
        return
    for sub1 in _split(rect1):
        for sub2 in _split(rect2):
            _pair_recurse(acc, union, sub1, sub2, t, dtheta, m, alpha, depth + 1)


def _leaf_polar(acc, union, rect1, rect2, t, dtheta, m, alpha,
                order_out=4, n_psi=4, n_tau=6):
    """Touching cell pair: tensor Gauss on the first cell, polar quadrature
    on the second about each outer point.

    Relative coordinates are scaled so arclength matches radius near the
    singularity; the radial map ``s = R tau^{1/(2-2a)}`` absorbs the
    ``s^{1-2a}`` profile of kernel times Jacobian times vanishing basis
    differences, leaving a smooth integrand.
    """
    kappa = 1.0 / (2.0 - 2.0 * alpha)
    r0, r1, t0, t1 = rect1
    rg, rw = _gauss_on(r0, r1, order_out)
    tg, tw = _gauss_on(t0, t1, order_out)
    w_out = np.outer(rw * rg, tw).ravel()
    _, _, Bx = _global_dof_values(union, t, dtheta, m, rg, tg)
    xr = np.repeat(rg, len(tg))
    xt = np.tile(tg, len(rg))

    xg_psi, wg_psi = gauss_rule(n_psi)
    xg_tau, wg_tau = gauss_rule(n_tau)
    tau = 0.5 + 0.5 * xg_tau
    wtau = 0.5 * wg_tau
    tau_pow = tau**kappa
    dtau = kappa * tau ** (kappa - 1.0)

    s0, s1, u0, u1 = rect2
    for ix in range(len(xr)):
        rx, tx = xr[ix], xt[ix]
        scale = max(rx, 1e-300)
        # corners of the second cell in scaled relative coordinates
        cs = [
            (s0 - rx, scale * (u0 - tx)),
            (s1 - rx, scale * (u0 - tx)),
            (s1 - rx, scale * (u1 - tx)),
            (s0 - rx, scale * (u1 - tx)),
        ]
        pts_e1 = []
        pts_e2 = []
        pts_w = []
        for k in range(4):
            px, py = cs[k]
            qx, qy = cs[(k + 1) % 4]
            nx_, ny_ = qy - py, px - qx  # inward normal times |PQ|
            h = nx_ * px + ny_ * py  # signed distance * |n|
            if abs(h) < 1e-30:
                continue  # outer point lies on this edge's line
            psi_p = math.atan2(py, px)
            dpsi = math.atan2(px * qy - py * qx, px * qx + py * qy)
            if abs(dpsi) < 1e-14:
                continue
            psi = psi_p + (0.5 * dpsi) * (xg_psi + 1.0)
            wpsi = (0.5 * dpsi) * wg_psi
            cpsi, spsi = np.cos(psi), np.sin(psi)
            R = h / (nx_ * cpsi + ny_ * spsi)
            s = R[:, None] * tau_pow[None, :]
            ww = (wpsi * R)[:, None] * (wtau * dtau)[None, :] * s
            pts_e1.append((s * cpsi[:, None]).ravel())
            pts_e2.append((s * spsi[:, None]).ravel())
            pts_w.append(ww.ravel())
        if not pts_w:
            continue
        e1 = np.concatenate(pts_e1)
        e2 = np.concatenate(pts_e2)
        win = np.concatenate(pts_w)
        yr = rx + e1
        yt = tx + e2 / scale
        K = _kernel(rx, tx, yr, yt, alpha)
        # physical Jacobians: r2 for the disk measure, 1/scale from the
        # arclength scaling of the relative angle
        wy = win * yr / scale
        _, _, By = _global_dof_values_at(union, t, dtheta, m, yr, yt)
        D = Bx[:, ix][:, None] - By
        acc += w_out[ix] * np.einsum("uy,vy,y->uv", D, D, K * wy)


def _global_dof_values_at(union, t, dtheta, m, rr, tt):
    """Like :func:`_global_dof_values` but for paired (r, theta) arrays."""
    vals = np.empty((len(union), rr.size))
    for i, dof in enumerate(union):
        if dof == ("c",):
            vals[i] = np.clip((t[1] - rr) / t[1], 0.0, None)
        else:
            ring, a = dof
            lo, mid, hi = t[ring - 1], t[ring], t[ring + 1]
            rad = np.where(
                rr <= mid,
                np.clip((rr - lo) / (mid - lo), 0.0, None),
                np.clip((hi - rr) / (hi - mid), 0.0, None),
            )
            s = np.mod(tt - a * dtheta + math.pi, 2.0 * math.pi) - math.pi
            ang = np.clip(1.0 - np.abs(s) / dtheta, 0.0, None)
            vals[i] = rad * ang
    return rr, tt, vals


def _split(rect):
    r0, r1, t0, t1 = rect
    rm, tm = 0.5 * (r0 + r1), 0.5 * (t0 + t1)
    return (
        (r0, rm, t0, tm),
        (r0, rm, tm, t1),
        (rm, r1, t0, tm),
        (rm, r1, tm, t1),
    )


def _leaf(acc, union, rect1, rect2, t, dtheta, m, alpha, o1, o2):
    r0, r1, t0, t1 = rect1
    rg1, rw1 = _gauss_on(r0, r1, o1)
    tg1, tw1 = _gauss_on(t0, t1, o1)
    w1 = np.outer(rw1 * rg1, tw1).ravel()
    xr, xt, Bx = _global_dof_values(union, t, dtheta, m, rg1, tg1)
    r0, r1, t0, t1 = rect2
    rg2, rw2 = _gauss_on(r0, r1, o2)
    tg2, tw2 = _gauss_on(t0, t1, o2)
    w2 = np.outer(rw2 * rg2, tw2).ravel()
    yr, yt, By = _global_dof_values(union, t, dtheta, m, rg2, tg2)
    K = _kernel(xr[:, None], xt[:, None], yr[None, :], yt[None, :], alpha)
    WK = np.outer(w1, w2) * K
    D = Bx[:, :, None] - By[:, None, :]
    acc += np.einsum("uxy,vxy,xy->uv", D, D, WK)


def _expand_circulant(gen, p, m):
    n = 1 + p * m
    A = np.empty((n, n))
    A[0, 0] = m * gen[0, 0, :].sum()
    for l in range(1, p + 1):
        cols = slice(1 + (l - 1) * m, 1 + l * m)
        A[0, cols] = gen[0, l, :].sum()
        A[cols, 0] = gen[l, 0, :].sum()
    a = np.arange(m)
    diff = (a[None, :] - a[:, None]) % m
    for k in range(1, p + 1):
        rows = slice(1 + (k - 1) * m, 1 + k * m)
        for l in range(1, p + 1):
            cols = slice(1 + (l - 1) * m, 1 + l * m)
            A[rows, cols] = gen[k, l][diff]
    return A


# ---------------------------------------------------------------------------
# mass, load, quadrature, point interpolation


def mass_disk(mesh: DiskMesh) -> np.ndarray:
    """Exact L² mass matrix of the tensor nodal basis."""
    p, m = mesh.n_rings, mesh.n_angles
    t = _radial_knots(mesh)
    dtheta = 2.0 * math.pi / m

    # radial hat products against the r Jacobian, rings 0..p (0 = center)
    R = np.zeros((p + 1, p + 1))
    for b in range(p + 1):  # band [t_b, t_{b+1}]
        lo, hi = t[b], t[b + 1]
        rg, rw = _gauss_on(lo, hi, 3)  # exact for cubic integrands
        w = hi - lo
        down = (hi - rg) / w
        up = (rg - lo) / w
        wr = rw * rg
        lo_ring, hi_ring = b, b + 1
        R[lo_ring, lo_ring] += np.dot(wr, down * down)
        if hi_ring <= p:
            R[lo_ring, hi_ring] += np.dot(wr, down * up)
            R[hi_ring, lo_ring] += np.dot(wr, down * up)
            R[hi_ring, hi_ring] += np.dot(wr, up * up)

    n = 1 + p * m
    M = np.zeros((n, n))
    M[0, 0] = 2.0 * math.pi * R[0, 0]
    a = np.arange(m)
    diff = (a[None, :] - a[:, None]) % m
    # periodic angular hat products
    C = np.zeros(m)
    C[0] = 2.0 * dtheta / 3.0
    C[1] = C[-1] = dtheta / 6.0
    for l in range(1, p + 1):
        cols = slice(1 + (l - 1) * m, 1 + l * m)
        M[0, cols] = R[0, l] * dtheta  # angular-constant against a hat
        M[cols, 0] = R[l, 0] * dtheta
        for k in range(1, p + 1):
            if R[k, l] != 0.0:
                rows = slice(1 + (k - 1) * m, 1 + k * m)
                M[rows, cols] = R[k, l] * C[diff]
    return M


def domain_quadrature_disk(mesh: DiskMesh, order: int = 4):
    """Tensor Gauss points (Cartesian) and weights covering the disk."""
    p, m = mesh.n_rings, mesh.n_angles
    t = _radial_knots(mesh)
    cx, cy = mesh.domain.center
    pts = []
    wts = []
    tg_ref, tw_ref = gauss_rule(order)
    dtheta = 2.0 * math.pi / m
    th_all = (
        (np.arange(m)[:, None] + 0.5) * dtheta
        + 0.5 * dtheta * tg_ref[None, :]
    ).ravel()
    tw_all = np.tile(0.5 * dtheta * tw_ref, m)
    cos_t, sin_t = np.cos(th_all), np.sin(th_all)
    for b in range(p + 1):
        rg, rw = _gauss_on(t[b], t[b + 1], order)
        w2 = np.outer(rw * rg, tw_all).ravel()
        rr = np.repeat(rg, th_all.size)
        pts.append(
            np.column_stack(
                [cx + rr * np.tile(cos_t, rg.size), cy + rr * np.tile(sin_t, rg.size)]
            )
        )
        wts.append(w2)
    return np.vstack(pts), np.concatenate(wts)


def load_disk(f_callable, mesh: DiskMesh, order: int = 4) -> np.ndarray:
    """Load vector ``b_u = ∫ f phi_u`` by per-cell tensor Gauss quadrature."""
    p, m = mesh.n_rings, mesh.n_angles
    t = _radial_knots(mesh)
    dtheta = 2.0 * math.pi / m
    cx, cy = mesh.domain.center
    b = np.zeros(mesh.dof_count)
    tg, tw = _gauss_on(0.0, dtheta, order)
    a0 = (dtheta - tg) / dtheta
    a1 = tg / dtheta
    sector_angles = np.arange(m) * dtheta
    th_all = sector_angles[:, None] + tg[None, :]  # (m, G)
    for band in range(p + 1):
        rg, rw = _gauss_on(t[band], t[band + 1], order)
        w = t[band + 1] - t[band]
        down = (t[band + 1] - rg) / w
        up = (rg - t[band]) / w
        # evaluate f on the full ring of this band at once
        rr = rg[:, None, None]
        xx = cx + rr * np.cos(th_all)[None, :, :]
        yy = cy + rr * np.sin(th_all)[None, :, :]
        fv = np.asarray(
            f_callable(np.column_stack([xx.ravel(), yy.ravel()])), dtype=float
        ).reshape(len(rg), m, len(tg))
        wgt = (rw * rg)[:, None, None] * tw[None, None, :]
        fw = fv * wgt
        if band == 0:
            b[0] += float(np.einsum("rjt,r->", fw, down))
            ring_lo = None
        else:
            ring_lo = band
        for ring, rad in ((ring_lo, down), (band + 1 if band < p else None, up)):
            if ring is None:
                continue
            base = 1 + (ring - 1) * m
            contrib0 = np.einsum("rjt,r,t->j", fw, rad, a0)
            contrib1 = np.einsum("rjt,r,t->j", fw, rad, a1)
            b[base : base + m] += contrib0
            b[base : base + m] += np.roll(contrib1, 1)
    return b


def node_interp_weights(mesh: DiskMesh, pt):
    """Indices and weights so that ``u(pt) = sum w_i coeffs[idx_i]``.

    The weights are the nodal basis values at ``pt``; points in the
    outermost band pick up only the ring-``p`` contribution (the trace part
    is zero for the homogeneous basis).
    """
    p, m = mesh.n_rings, mesh.n_angles
    t = _radial_knots(mesh)
    cx, cy = mesh.domain.center
    x, y = float(pt[0]), float(pt[1])
    r = math.hypot(x - cx, y - cy)
    if r > mesh.domain.radius:
        raise ValueError("point lies outside the disk")
    th = math.atan2(y - cy, x - cx) % (2.0 * math.pi)
    dtheta = 2.0 * math.pi / m
    ia = int(th // dtheta) % m
    lam = th / dtheta - math.floor(th / dtheta)
    band = int(np.clip(np.searchsorted(t, r, side="right") - 1, 0, p))
    mu = (r - t[band]) / (t[band + 1] - t[band])
    mu = min(max(mu, 0.0), 1.0)
    idx, wts = [], []
    if band == 0:
        idx.append(0)
        wts.append(1.0 - mu)
    else:
        base = 1 + (band - 1) * m
        idx += [base + ia, base + (ia + 1) % m]
        wts += [(1.0 - mu) * (1.0 - lam), (1.0 - mu) * lam]
    if band < p:
        base = 1 + band * m
        idx += [base + ia, base + (ia + 1) % m]
        wts += [mu * (1.0 - lam), mu * lam]
    return np.asarray(idx), np.asarray(wts)
