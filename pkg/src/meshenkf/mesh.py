"""1-D periodic adaptive meshes: validity checks and insert/delete remeshing.

Nodes live on the periodic interval [0, L).  A mesh is *valid* when every gap,
including the wrap-around gap z_1 + L - z_N, lies in [delta1, delta2].
Remeshing restores validity with left-to-right sweeps: the right node of any
undersized pair is deleted, then every oversized gap receives a new node at its
midpoint whose value is the mean of the neighbouring values; sweeps repeat
until the mesh is valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative slack for gap comparisons.  The tests are nominally the exact
# non-strict inequalities delta1 <= gap <= delta2; the slack only absorbs
# representation error, so that e.g. a uniform 100-node mesh built with
# spacing 0.01 on L=1 counts as valid even though its float gaps differ from
# float(0.01) by one ulp either way.
GAP_RTOL = 1e-12

_MAX_REMESH_SWEEPS = 64


class MeshStructureError(ValueError):
    """Raised when a node list is not strictly increasing inside [0, L)."""


class RemeshError(RuntimeError):
    """Raised when validity cannot be enforced (fewer than 2 surviving nodes)."""


@dataclass(frozen=True)
class MeshTolerances:
    """Node proximity/separation tolerances on a periodic domain of length L.

    delta1: minimum allowed gap (node proximity tolerance)
    delta2: maximum allowed gap (node separation tolerance)

    Invariants: delta2/delta1 >= 2 and both tolerances divide L exactly
    (within 1e-12 relative).
    """

    delta1: float
    delta2: float
    domain_length: float

    def __post_init__(self):
        d1, d2, L = self.delta1, self.delta2, self.domain_length
        if not (d1 > 0.0 and d2 > 0.0 and L > 0.0):
            raise ValueError("tolerances and domain length must be positive")
        if d2 < 2.0 * d1 * (1.0 - GAP_RTOL):
            raise ValueError(f"delta2/delta1 = {d2 / d1:.6g} must be >= 2")
        for name, d in (("delta1", d1), ("delta2", d2)):
            n = round(L / d)
            if n < 1 or abs(n * d - L) > GAP_RTOL * L:
                raise ValueError(f"{name}={d!r} does not divide the domain length {L!r}")


@dataclass(frozen=True)
class AdaptiveMesh:
    """Strictly increasing node positions in [0, L) plus their tolerances."""

    nodes: np.ndarray
    tolerances: MeshTolerances

    def __post_init__(self):
        z = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", z)
        if z.ndim != 1 or z.size < 2 or not np.isfinite(z).all():
            raise MeshStructureError("nodes must be a finite 1-d array of length >= 2")
        L = self.tolerances.domain_length
        if z[0] < 0.0 or z[-1] >= L or not (np.diff(z) > 0.0).all():
            raise MeshStructureError("nodes must be strictly increasing inside [0, L)")

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def gaps(self) -> np.ndarray:
        """All n_nodes gaps, the periodic wrap gap z_1 + L - z_N last."""
        z = self.nodes
        return np.diff(z, append=z[0] + self.tolerances.domain_length)


def _mesh_unchecked(nodes: np.ndarray, tolerances: MeshTolerances) -> AdaptiveMesh:
    # Internal constructor for node arrays already known to be structurally
    # sound (remesh output, sorted step output); skips the __post_init__ scans.
    m = object.__new__(AdaptiveMesh)
    object.__setattr__(m, "nodes", nodes)
    object.__setattr__(m, "tolerances", tolerances)
    return m


def _gaps_ok(z: np.ndarray, tol: MeshTolerances) -> bool:
    g = np.diff(z, append=z[0] + tol.domain_length)
    return bool(
        g.min() >= tol.delta1 * (1.0 - GAP_RTOL)
        and g.max() <= tol.delta2 * (1.0 + GAP_RTOL)
    )


def is_valid(mesh: AdaptiveMesh) -> bool:
    """True iff every gap (wrap gap included) satisfies delta1 <= gap <= delta2."""
    return _gaps_ok(mesh.nodes, mesh.tolerances)


@dataclass
class RemeshLog:
    """Record of one remesh call.

    ``actions`` lists every event in application order as tuples
    ``("delete", index, position)`` / ``("insert", index, position)``, where a
    delete index refers to the node list entering its sweep and an insert index
    is the new node's position in the list after that sweep's insertions.
    """

    actions: list = field(default_factory=list)
    # one (deleted_indices, insert_before_indices) pair per sweep, kept so that
    # per-node companion arrays (e.g. ghost flags) can be mapped through the
    # same surgery via replay()
    sweeps: list = field(default_factory=list)

    @property
    def n_deleted(self) -> int:
        return sum(1 for a in self.actions if a[0] == "delete")

    @property
    def n_inserted(self) -> int:
        return sum(1 for a in self.actions if a[0] == "insert")

    def replay(self, companion: np.ndarray, fill) -> np.ndarray:
        """Apply the recorded deletions/insertions to a per-node companion array.

        Entries created by insertion receive ``fill``.
        """
        out = np.asarray(companion)
        for deleted, insert_before in self.sweeps:
            if deleted.size:
                out = np.delete(out, deleted)
            if insert_before.size:
                out = np.insert(out, insert_before, fill)
        return out


def _remesh_arrays(z, u, tol: MeshTolerances):
    """Remesh on raw arrays; requires sorted z (ties allowed) in [0, L)."""
    L = tol.domain_length
    lo = tol.delta1 * (1.0 - GAP_RTOL)
    hi = tol.delta2 * (1.0 + GAP_RTOL)
    log = RemeshLog()
    for _ in range(_MAX_REMESH_SWEEPS):
        if z.size >= 2 and _gaps_ok(z, tol):
            return z, u, log

        # Deletion sweep, left to right: the right node of an undersized pair
        # is dropped and the survivor keeps anchoring the comparison.  The
        # wrap pair (z_N, z_1) is checked last; its right node is z_1.
        drop = []
        last = 0
        for i in range(1, z.size):
            if z[i] - z[last] < lo:
                drop.append(i)
            else:
                last = i
        if z.size - len(drop) >= 2 and z[0] + L - z[last] < lo:
            drop.insert(0, 0)
        if z.size - len(drop) < 2:
            raise RemeshError(
                f"remesh left {z.size - len(drop)} node(s); cannot enforce validity"
            )
        deleted = np.asarray(sorted(drop), dtype=int)
        if deleted.size:
            log.actions.extend(("delete", int(i), float(z[i])) for i in deleted)
            z = np.delete(z, deleted)
            u = np.delete(u, deleted)

        # Insertion sweep: one midpoint per oversized gap (value = neighbour
        # mean); a gap much wider than delta2 is halved again on a later sweep.
        g = np.diff(z, append=z[0] + L)
        big = np.nonzero(g > hi)[0]
        before, pos, val = [], [], []
        for i in big:
            mid = z[i] + 0.5 * g[i]
            if i == z.size - 1:  # wrap gap; the midpoint may itself wrap
                v = 0.5 * (u[-1] + u[0])
                if mid >= L:
                    before.append(0)
                    pos.append(mid - L)
                else:
                    before.append(z.size)
                    pos.append(mid)
                val.append(v)
            else:
                before.append(i + 1)
                pos.append(mid)
                val.append(0.5 * (u[i] + u[i + 1]))
        insert_before = np.asarray(before, dtype=int)
        if insert_before.size:
            # final index = insertion slot + number of insertions further left
            # (slots are unique: one insertion per oversized gap)
            shift = (insert_before[:, None] > insert_before[None, :]).sum(axis=1)
            log.actions.extend(
                ("insert", int(b + s), float(p))
                for b, s, p in zip(insert_before, shift, pos)
            )
            z = np.insert(z, insert_before, pos)
            u = np.insert(u, insert_before, val)
        log.sweeps.append((deleted, insert_before))
        if not deleted.size and not insert_before.size:
            raise RemeshError("remesh made no progress on an invalid mesh")
    raise RemeshError("remesh failed to converge")


def remesh(mesh: AdaptiveMesh, values):
    """Enforce mesh validity; returns (new mesh, new values, RemeshLog).

    Deletions remove the right node of any pair closer than delta1; insertions
    place a node at the midpoint of any gap wider than delta2 with the mean of
    the neighbouring values.  An already-valid mesh comes back unchanged with
    an empty log.
    """
    u = np.asarray(values, dtype=float)
    if u.shape != mesh.nodes.shape:
        raise ValueError("values must align 1:1 with mesh nodes")
    z2, u2, log = _remesh_arrays(mesh.nodes.copy(), u.copy(), mesh.tolerances)
    return _mesh_unchecked(z2, mesh.tolerances), u2, log


def wrap_into_domain(position, L: float):
    """Map positions into [0, L) by periodicity (works on scalars and arrays)."""
    p = np.asarray(position, dtype=float)
    if not np.isfinite(p).all():
        raise ValueError("position must be finite")
    out = np.mod(p, L)
    # float rounding in mod can land exactly on L; fold it back
    out = np.where(out >= L, out - L, out)
    if np.isscalar(position) or getattr(position, "ndim", 0) == 0:
        return float(out)
    return out
