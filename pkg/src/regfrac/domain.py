"""Bounded domains, boundary-graded meshes and boundary-layer sets.

Supported domains are the 1D interval and the 2D disk.  Meshes are graded
toward the boundary because solutions of the censored-process Dirichlet
problem behave like ``rho(x)**beta`` with ``beta = 2*alpha - 1 < 1``, so a
uniform mesh loses accuracy in the boundary layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FracParams",
    "Domain",
    "Interval",
    "Disk",
    "Mesh",
    "IntervalMesh",
    "DiskMesh",
    "BoundaryLayer",
    "make_interval",
    "make_disk",
    "graded_mesh",
    "boundary_layer",
    "normalization_constant",
]


def normalization_constant(alpha: float, dim: int) -> float:
    """Normalization constant ``4**a * Gamma(N/2+a) / (pi**(N/2) |Gamma(-a)|)``."""
    return (
        4.0**alpha
        * math.gamma(dim / 2.0 + alpha)
        / (math.pi ** (dim / 2.0) * abs(math.gamma(-alpha)))
    )


@dataclass(frozen=True)
class FracParams:
    """Order parameter ``alpha`` with its derived quantities.

    ``beta = 2*alpha - 1`` is the boundary-decay exponent and ``c_norm`` the
    standard fractional-Laplacian normalization constant.  Both are derived
    on construction and cannot be set independently.
    """

    alpha: float
    dim: int = 1
    beta: float = field(init=False)
    c_norm: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(
                f"alpha must lie in the open interval (1/2, 1), got {self.alpha}"
            )
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "beta", 2.0 * self.alpha - 1.0)
        object.__setattr__(
            self, "c_norm", normalization_constant(self.alpha, self.dim)
        )

    @property
    def s(self) -> float:
        """Kernel exponent shorthand ``2*alpha``."""
        return 2.0 * self.alpha


class Domain:
    """Base class for bounded open domains with a distance function."""

    dim: int

    def rho(self, x):
        """Distance to the boundary; positive inside, zero on the boundary."""
        raise NotImplementedError

    def contains(self, x, closed: bool = True) -> bool:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def boundary_measure(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Domain):
    a: float
    b: float
    dim: int = field(default=1, init=False)

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"interval needs a < b, got a={self.a}, b={self.b}")

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.a, self.b - x)

    def contains(self, x, closed: bool = True) -> bool:
        x = float(np.asarray(x).reshape(()))
        if closed:
            return self.a <= x <= self.b
        return self.a < x < self.b

    @property
    def diameter(self) -> float:
        return self.b - self.a

    @property
    def boundary_measure(self) -> float:
        # counting measure on the two endpoints
        return 2.0


@dataclass(frozen=True)
class Disk(Domain):
    center: tuple[float, float]
    radius: float
    dim: int = field(default=2, init=False)

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"disk needs radius > 0, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt((x[..., 0] - self.center[0]) ** 2 + (x[..., 1] - self.center[1]) ** 2)
        return self.radius - r

    def contains(self, x, closed: bool = True) -> bool:
        x = np.asarray(x, dtype=float).reshape(2)
        r = math.hypot(x[0] - self.center[0], x[1] - self.center[1])
        if closed:
            return r <= self.radius
        return r < self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def boundary_measure(self) -> float:
        return 2.0 * math.pi * self.radius


def make_interval(a: float, b: float) -> Interval:
    return Interval(float(a), float(b))


def make_disk(center, radius: float) -> Disk:
    return Disk((float(center[0]), float(center[1])), float(radius))


class Mesh:
    """Base class for meshes: interior nodes plus weighted boundary nodes."""

    domain: Domain
    grading_exponent: float
    h_max: float

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes, shape ``(n,)`` in 1D or ``(n, 2)`` in 2D."""
        raise NotImplementedError

    @property
    def dof_count(self) -> int:
        return len(self.nodes)

    def rho_nodes(self) -> np.ndarray:
        return np.asarray(self.domain.rho(self.nodes), dtype=float)

    def to_json(self) -> str:
        raise NotImplementedError


class IntervalMesh(Mesh):
    """Interior nodes of an interval, graded symmetrically toward both ends.

    Node positions are images of uniform parameters under the odd map
    ``w -> sign(w) * (1 - (1 - |w|)**q)`` on [-1, 1], so with q = 1 the mesh
    is uniform and with q > 1 nodes accumulate at both endpoints with the
    nearest node at distance ``(L/2) * (2/(n+1))**q`` from the boundary.
    """

    def __init__(self, domain: Interval, n: int, q: float):
        if n < 4:
            raise ValueError(f"need n >= 4 interior nodes, got {n}")
        if q < 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {q}")
        self.domain = domain
        self.grading_exponent = float(q)
        mid = 0.5 * (domain.a + domain.b)
        half = 0.5 * (domain.b - domain.a)
        u = np.arange(0, n + 2, dtype=float) / (n + 1)
        w = 2.0 * u - 1.0
        g = np.sign(w) * (1.0 - (1.0 - np.abs(w)) ** q)
        pts = mid + half * g
        pts[0], pts[-1] = domain.a, domain.b  # pin endpoints exactly
        self.all_nodes = pts  # includes the two boundary points
        self._nodes = pts[1:-1]
        self.h = np.diff(pts)
        self.h_max = float(self.h.max())
        self.boundary_points = np.array([domain.a, domain.b])
        self.boundary_weights = np.array([1.0, 1.0])

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    def mirror_index(self, i: int) -> int:
        """Index of the node mirrored across the interval midpoint."""
        return self.dof_count - 1 - i

    def to_json(self) -> str:
        return json.dumps(
            {
                "shape": "interval",
                "params": {"a": self.domain.a, "b": self.domain.b},
                "nodes": self._nodes.tolist(),
                "grading_exponent": self.grading_exponent,
                "h_max": self.h_max,
            }
        )


class DiskMesh(Mesh):
    """Polar tensor mesh on a disk: radial layers graded toward the rim,
    uniform angles, plus a single node at the center.

    Interior degrees of freedom are the center node followed by the ring
    nodes ordered lexicographically in ``(r, theta)``.
    """

    def __init__(self, domain: Disk, n: int, q: float, n_angles: int | None = None):
        if n < 4:
            raise ValueError(f"need n >= 4 radial layers, got {n}")
        if q < 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {q}")
        self.domain = domain
        self.grading_exponent = float(q)
        p = n
        m = int(n_angles) if n_angles is not None else 2 * n
        if m < 8:
            raise ValueError(f"need at least 8 angular points, got {m}")
        R = domain.radius
        i = np.arange(1, p + 1, dtype=float)
        self.radii = R * (1.0 - (1.0 - i / (p + 1)) ** q)  # r_1 < ... < r_p < R
        self.n_rings = p
        self.n_angles = m
        self.angles = 2.0 * math.pi * np.arange(m) / m
        cx, cy = domain.center
        rr = np.repeat(self.radii, m)
        tt = np.tile(self.angles, p)
        ring_nodes = np.column_stack([cx + rr * np.cos(tt), cy + rr * np.sin(tt)])
        self._nodes = np.vstack([[[cx, cy]], ring_nodes])
        # cell diameters: radial extent and max arc length
        r_edges = np.concatenate([[0.0], self.radii, [R]])
        dr = np.diff(r_edges)
        arc = r_edges[1:] * (2.0 * math.pi / m)
        self.h_max = float(np.sqrt(dr**2 + arc**2).max())
        mb = max(m, 64)
        tb = 2.0 * math.pi * np.arange(mb) / mb
        self.boundary_points = np.column_stack(
            [cx + R * np.cos(tb), cy + R * np.sin(tb)]
        )
        self.boundary_weights = np.full(mb, 2.0 * math.pi * R / mb)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    def ring_angle_index(self, ring: int, angle: int) -> int:
        """Flat dof index of ring node (ring >= 1, angle modulo n_angles)."""
        return 1 + (ring - 1) * self.n_angles + (angle % self.n_angles)

    def to_json(self) -> str:
        return json.dumps(
            {
                "shape": "disk",
                "params": {
                    "center": list(self.domain.center),
                    "radius": self.domain.radius,
                },
                "nodes": self._nodes.tolist(),
                "grading_exponent": self.grading_exponent,
                "h_max": self.h_max,
            }
        )


@dataclass(frozen=True)
class BoundaryLayer:
    """Partition of mesh nodes into the interior core and the boundary strip."""

    delta: float
    omega_delta_nodes: np.ndarray  # indices with rho > delta
    a_delta_nodes: np.ndarray  # indices with rho < delta


def graded_mesh(domain: Domain, n: int, q: float, **kwargs) -> Mesh:
    """Build a boundary-graded mesh with ``n`` layers and grading exponent ``q``."""
    if isinstance(domain, Interval):
        return IntervalMesh(domain, n, q)
    if isinstance(domain, Disk):
        return DiskMesh(domain, n, q, **kwargs)
    raise TypeError(f"unsupported domain type {type(domain)!r}")


def boundary_layer(mesh: Mesh, delta: float) -> BoundaryLayer:
    """Split mesh nodes at distance ``delta`` from the boundary."""
    rho = mesh.rho_nodes()
    if not 0.0 < delta:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta >= rho.max():
        if delta > mesh.domain.diameter / 2.0:
            raise ValueError(
                f"delta={delta} exceeds the maximal interior distance"
            )
    omega = np.nonzero(rho > delta)[0]
    strip = np.nonzero(rho < delta)[0]
    return BoundaryLayer(float(delta), omega, strip)
