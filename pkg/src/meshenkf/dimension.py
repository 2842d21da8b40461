"""Dimension matching and return around the analysis step.

Ensemble members live on meshes of different sizes; the analysis needs every
member expressed as a vector of one fixed length 2M.  Two schemes do this:

* fixed-reference ("hr"): project each member's values onto the M reference
  positions gamma; the position half of the state vector is the constant
  gamma and only values are updated.
* augmented-state ("hra"): fill every empty reference interval with a randomly
  placed ghost node so each member has exactly M (value, position) pairs; the
  analysis updates values and positions jointly, then ghosts are deleted.

Both matchings keep enough bookkeeping to map the analysed vector back onto a
model state (return_hr / return_hra).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    AdaptiveMesh,
    MeshStructureError,
    MeshTolerances,
    RemeshError,
    _gaps_ok,
    _mesh_unchecked,
    _remesh_arrays,
    wrap_into_domain,
)
from .models import ModelState

_MAX_GHOST_DRAWS = 10_000


@dataclass(frozen=True)
class ReferencePartition:
    """M equal intervals [gamma_i, gamma_i + delta) tiling [0, L)."""

    m: int
    delta: float
    domain_length: float

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("partition needs at least 2 intervals")
        if abs(self.m * self.delta - self.domain_length) > 1e-12 * self.domain_length:
            raise ValueError("M * delta must equal the domain length")

    @property
    def gamma(self) -> np.ndarray:
        return np.arange(self.m) * self.delta

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.delta


def reference_partition(tolerances: MeshTolerances) -> ReferencePartition:
    """The finest valid partition: interval width delta1."""
    m = round(tolerances.domain_length / tolerances.delta1)
    return ReferencePartition(m, tolerances.delta1, tolerances.domain_length)


@dataclass
class MatchedMember:
    """One member as an analysis-ready vector plus return bookkeeping.

    state_vector holds (values, positions), each of length M.  ghost_mask is
    True on slots not backed by an original node (interpolated entries for hr,
    inserted ghost nodes for hra).  origin_slot maps each original node to the
    slot it landed in; origin_mesh/origin_values snapshot the member.
    """

    scheme: str
    state_vector: np.ndarray
    ghost_mask: np.ndarray
    origin_slot: np.ndarray
    origin_mesh: AdaptiveMesh
    origin_values: np.ndarray
    time: float

    @property
    def m(self) -> int:
        return self.state_vector.size // 2

    def with_state_vector(self, state_vector: np.ndarray) -> "MatchedMember":
        """Same bookkeeping, new (e.g. analysed) vector."""
        return MatchedMember(
            self.scheme,
            state_vector,
            self.ghost_mask,
            self.origin_slot,
            self.origin_mesh,
            self.origin_values,
            self.time,
        )


def _slot_index(q: np.ndarray) -> np.ndarray:
    # floor(q), except that a node sitting exactly on an interval boundary can
    # quantize a hair below it (e.g. 0.58 / 0.01 = 57.999...); snap those up so
    # boundary-rational meshes do not produce false slot collisions
    slot = np.floor(q).astype(int)
    slot += (q - slot) > 1.0 - 1e-9
    return slot


def _occupancy(z: np.ndarray, slot: np.ndarray, m: int) -> np.ndarray:
    # each slot may hold at most one node; a valid mesh guarantees this
    # (gaps >= delta1 = interval width), so a collision means a broken input
    filled = np.zeros(m, dtype=bool)
    filled[slot] = True
    if filled.sum() != slot.size:
        raise MeshStructureError("two mesh nodes map to one reference interval")
    return filled


def match_hr(member: ModelState, partition: ReferencePartition) -> MatchedMember:
    """Project a member onto the reference positions gamma.

    A node lying in the shifted interval [gamma_i - delta/2, gamma_i + delta/2)
    donates its value to slot i (the first interval wraps around 0).  Empty
    slots get the unweighted mean of the two bracketing node values, or of the
    first and last values when gamma_i falls in the wrap segment.
    """
    z = member.mesh.nodes
    u = member.u
    m, delta = partition.m, partition.delta
    slot = _slot_index(z / delta + 0.5) % m
    filled = _occupancy(z, slot, m)

    values = np.empty(m)
    values[slot] = u
    empty = np.flatnonzero(~filled)
    if empty.size:
        g = empty * delta
        j = np.searchsorted(z, g, side="right") - 1
        interior = (j >= 0) & (j < z.size - 1)
        jc = np.clip(j, 0, z.size - 2)
        values[empty] = np.where(
            interior, 0.5 * (u[jc] + u[jc + 1]), 0.5 * (u[0] + u[-1])
        )

    state_vector = np.concatenate([values, partition.gamma])
    return MatchedMember(
        "hr", state_vector, ~filled, slot, member.mesh, u.copy(), member.t
    )


def _draw_ghost_position(
    lo: float, width: float, rng: np.random.Generator, spread_is_variance: bool
) -> float:
    mid = lo + 0.5 * width
    spread = 0.5 * width
    std = np.sqrt(spread) if spread_is_variance else spread
    for _ in range(_MAX_GHOST_DRAWS):
        g = rng.normal(mid, std)
        if lo <= g < lo + width:
            return g
    raise RuntimeError("ghost placement failed to land inside its interval")


def match_hra(
    member: ModelState,
    partition: ReferencePartition,
    rng: np.random.Generator,
    ghost_spread_is_variance: bool = False,
) -> MatchedMember:
    """Pad a member to M nodes by inserting one ghost per empty interval.

    Ghost locations are drawn from a Gaussian centred on the interval midpoint
    (spread parameter delta/2, a standard deviation unless
    ghost_spread_is_variance), redrawing until inside the interval.  Ghost
    values come from linear interpolation between the nearest filled
    neighbours; intervals are filled left to right, so a left neighbour can be
    an earlier ghost while right neighbours are always original nodes.
    """
    z = member.mesh.nodes
    u = member.u
    m, delta, L = partition.m, partition.delta, partition.domain_length
    slot = np.minimum(_slot_index(z / delta), m - 1)
    filled = _occupancy(z, slot, m)

    pos = np.empty(m)
    val = np.empty(m)
    pos[slot] = z
    val[slot] = u
    working = filled.copy()
    for i in np.flatnonzero(~filled):
        g = _draw_ghost_position(i * delta, delta, rng, ghost_spread_is_variance)
        jl = (i - 1) % m
        while not working[jl]:
            jl = (jl - 1) % m
        z_l = pos[jl] - (L if jl > i else 0.0)
        jr = (i + 1) % m
        while not working[jr]:
            jr = (jr + 1) % m
        z_r = pos[jr] + (L if jr < i else 0.0)
        a = g - z_l
        b = z_r - g
        pos[i] = g
        val[i] = (b * val[jl] + a * val[jr]) / (a + b)
        working[i] = True

    state_vector = np.concatenate([val, pos])
    return MatchedMember(
        "hra", state_vector, ~filled, slot, member.mesh, u.copy(), member.t
    )


def return_hr(updated: MatchedMember) -> ModelState:
    """Drop interpolated entries and carry updated values back to the member.

    Each original node gets the analysed value of the slot it donated to; node
    positions are the member's own pre-analysis positions, untouched.
    """
    if updated.scheme != "hr":
        raise ValueError("return_hr expects an hr-matched member")
    u_new = updated.state_vector[: updated.m][updated.origin_slot]
    return ModelState(updated.origin_mesh, u_new, updated.time)


def return_hra(updated: MatchedMember, tolerances: MeshTolerances) -> ModelState:
    """Rebuild a model state from an analysed augmented vector.

    Wrap positions into the domain, re-sort pairs, remesh if the update broke
    validity, then delete the ghost nodes (tracked by identity through the
    sort and remesh) and remesh once more if the deletions broke validity.
    """
    if updated.scheme != "hra":
        raise ValueError("return_hra expects an hra-matched member")
    m = updated.m
    u = updated.state_vector[:m].copy()
    z = wrap_into_domain(updated.state_vector[m:], tolerances.domain_length)
    order = np.argsort(z, kind="stable")
    z = z[order]
    u = u[order]
    ghost = updated.ghost_mask[order]

    if not _gaps_ok(z, tolerances):
        z, u, log = _remesh_arrays(z, u, tolerances)
        ghost = log.replay(ghost, fill=False)

    keep = ~ghost
    if keep.sum() < 2:
        raise RemeshError("ghost deletion left fewer than 2 nodes")
    z = z[keep]
    u = u[keep]
    if not _gaps_ok(z, tolerances):
        z, u, _ = _remesh_arrays(z, u, tolerances)
    return ModelState(_mesh_unchecked(z, tolerances), u, updated.time)
