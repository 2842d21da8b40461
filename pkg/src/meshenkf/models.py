"""Lagrangian finite-difference solvers for two periodic 1-D testbeds.

BGM  (diffusive Burgers):        u_t + u u_z = nu u_zz            on [0, 1)
KSM  (Kuramoto-Sivashinsky):     u_t + nu u_zzzz + u_zz + u u_z = 0   on [0, 2*pi)

The mesh nodes move with the flow (dz/dt = u), so in advecting mode the
u-tendency is the material derivative (the advective term is carried by the
node motion itself).  With ``advect_nodes=False`` the full Eulerian right-hand
side is stepped on the fixed node set, which on a uniform mesh reproduces a
standard central-difference forward-Euler scheme.

Spatial derivatives use central stencils on the non-uniform periodic mesh:
three-point formulas for the first and second derivative, and for the fourth
derivative 24 times the fourth-order divided difference over five points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import (
    AdaptiveMesh,
    MeshTolerances,
    _gaps_ok,
    _mesh_unchecked,
    _remesh_arrays,
    GAP_RTOL,
)


class SolverBlowUpError(RuntimeError):
    """Non-finite physical values during time stepping."""

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"solver produced non-finite values at t={time:.6g}")


def _neighbors(z: np.ndarray, L: float):
    zm = np.roll(z, 1)
    zm[0] -= L
    zp = np.roll(z, -1)
    zp[-1] += L
    return zm, zp


def deriv1(z: np.ndarray, u: np.ndarray, L: float) -> np.ndarray:
    """du/dz by the three-point central formula on a non-uniform periodic mesh."""
    zm, zp = _neighbors(z, L)
    um = np.roll(u, 1)
    up = np.roll(u, -1)
    hm = z - zm
    hp = zp - z
    return (
        -hp / (hm * (hm + hp)) * um
        + (hp - hm) / (hm * hp) * u
        + hm / (hp * (hm + hp)) * up
    )


def deriv2(z: np.ndarray, u: np.ndarray, L: float) -> np.ndarray:
    """d2u/dz2, three-point Taylor formula for non-uniform spacing."""
    zm, zp = _neighbors(z, L)
    um = np.roll(u, 1)
    up = np.roll(u, -1)
    hm = z - zm
    hp = zp - z
    return 2.0 * (um / (hm * (hm + hp)) - u / (hm * hp) + up / (hp * (hm + hp)))


def deriv4(z: np.ndarray, u: np.ndarray, L: float) -> np.ndarray:
    """d4u/dz4 as 24 x the 4th divided difference over five periodic points."""
    n = z.size
    if n < 5:
        raise ValueError("fourth derivative needs at least 5 nodes")
    zz = np.empty((5, n))
    uu = np.empty((5, n))
    for row, shift in enumerate((2, 1, 0, -1, -2)):
        zz[row] = np.roll(z, shift)
        uu[row] = np.roll(u, shift)
    # periodic position adjustments across the seam
    zz[0, :2] -= L
    zz[1, :1] -= L
    zz[3, -1:] += L
    zz[4, -2:] += L
    dd = uu
    for order in range(1, 5):
        dd = (dd[1:] - dd[:-1]) / (zz[order:] - zz[:-order])
    return 24.0 * dd[0]


def bgm_initial_condition(z):
    return np.sin(2.0 * np.pi * z) + 0.5 * np.sin(np.pi * z)


def ksm_initial_condition(z):
    return -np.sin(2.0 * np.pi * z)


@dataclass(frozen=True)
class ModelSpec:
    """Which PDE to solve and with what numerical settings."""

    kind: str  # "bgm" | "ksm"
    viscosity: float
    dt: float
    tolerances: MeshTolerances
    initial_condition: Callable[[np.ndarray], np.ndarray]
    advect_nodes: bool = True

    def __post_init__(self):
        if self.kind not in ("bgm", "ksm"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not (self.dt > 0.0 and self.viscosity > 0.0):
            raise ValueError("dt and viscosity must be positive")


def bgm_spec(
    viscosity: float = 0.008,
    dt: float = 1e-3,
    delta1: float = 0.01,
    delta2: float = 0.02,
    domain_length: float = 1.0,
    initial_condition=bgm_initial_condition,
    advect_nodes: bool = True,
) -> ModelSpec:
    """Diffusive Burgers testbed with its standard parameter set."""
    tol = MeshTolerances(delta1, delta2, domain_length)
    return ModelSpec("bgm", viscosity, dt, tol, initial_condition, advect_nodes)


def ksm_spec(
    viscosity: float = 0.027,
    dt: float = 1e-5,
    delta1: float = 0.02 * np.pi,
    delta2: float = 0.04 * np.pi,
    domain_length: float = 2.0 * np.pi,
    initial_condition=ksm_initial_condition,
    advect_nodes: bool = True,
) -> ModelSpec:
    """Kuramoto-Sivashinsky testbed with its standard parameter set."""
    tol = MeshTolerances(delta1, delta2, domain_length)
    return ModelSpec("ksm", viscosity, dt, tol, initial_condition, advect_nodes)


@dataclass
class ModelState:
    """Adaptive mesh plus per-node velocities at model time t."""

    mesh: AdaptiveMesh
    u: np.ndarray
    t: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        self.u = u
        if u.shape != self.mesh.nodes.shape:
            raise ValueError("u must align 1:1 with mesh nodes")
        if not np.isfinite(u).all():
            raise ValueError("u must be finite")


def initial_state(spec: ModelSpec, node_count: int) -> ModelState:
    """Uniform mesh of node_count nodes with the IC evaluated at each node, t=0."""
    tol = spec.tolerances
    L = tol.domain_length
    spacing = L / node_count
    if not (
        tol.delta1 * (1.0 - GAP_RTOL) <= spacing <= tol.delta2 * (1.0 + GAP_RTOL)
    ):
        raise ValueError(
            f"node_count={node_count} gives spacing {spacing:.6g} outside "
            f"[{tol.delta1:.6g}, {tol.delta2:.6g}]"
        )
    z = np.arange(node_count) * spacing
    return ModelState(AdaptiveMesh(z, tol), spec.initial_condition(z), 0.0)


def _wrap_and_order(z: np.ndarray, u: np.ndarray, L: float):
    # common case first: nothing left the domain and order is intact
    if z[0] >= 0.0 and z[-1] < L and (np.diff(z) > 0.0).all():
        return z, u
    zw = np.mod(z, L)
    zw = np.where(zw >= L, zw - L, zw)
    order = np.argsort(zw, kind="stable")
    return zw[order], u[order]


def step(state: ModelState, spec: ModelSpec) -> ModelState:
    """One forward-Euler step of length dt.

    Advecting mode: update u by the material-derivative tendency, move the
    nodes with the updated velocity, wrap/re-sort, and remesh if the mesh has
    become invalid.  Non-advecting mode: step the Eulerian right-hand side on
    the fixed nodes.
    """
    tol = spec.tolerances
    L = tol.domain_length
    z = state.mesh.nodes
    u = state.u
    if spec.kind == "bgm":
        dudt = spec.viscosity * deriv2(z, u, L)
    else:
        dudt = -spec.viscosity * deriv4(z, u, L) - deriv2(z, u, L)
    if not spec.advect_nodes:
        dudt = dudt - u * deriv1(z, u, L)
    u_new = u + spec.dt * dudt
    t_new = state.t + spec.dt
    if not np.isfinite(u_new).all():
        raise SolverBlowUpError(t_new)
    if not spec.advect_nodes:
        return ModelState(state.mesh, u_new, t_new)
    z_new = z + spec.dt * u_new
    z_new, u_new = _wrap_and_order(z_new, u_new, L)
    if not _gaps_ok(z_new, tol):
        z_new, u_new, _ = _remesh_arrays(z_new, u_new, tol)
    return ModelState(_mesh_unchecked(z_new, tol), u_new, t_new)


def integrate(state: ModelState, spec: ModelSpec, duration: float) -> ModelState:
    """Repeated step() over a duration that must be divisible by dt."""
    if duration < 0.0:
        raise ValueError("duration must be >= 0")
    n = round(duration / spec.dt)
    if abs(n * spec.dt - duration) > 1e-9 * max(duration, spec.dt):
        raise ValueError(f"duration {duration!r} is not divisible by dt={spec.dt!r}")
    for _ in range(n):
        state = step(state, spec)
    return state
