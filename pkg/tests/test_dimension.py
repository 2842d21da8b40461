"""Fixed-reference and augmented-state dimension matching round trips."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshenkf import (
    AdaptiveMesh,
    MatchedMember,
    MeshStructureError,
    MeshTolerances,
    ModelState,
    RemeshError,
    bgm_spec,
    initial_state,
    is_valid,
    match_hr,
    match_hra,
    reference_partition,
    remesh,
    return_hr,
    return_hra,
)
from meshenkf.dimension import ReferencePartition
from oracles import ghost_value_reference


def test_reference_partition_from_tolerances(bgm_tol):
    part = reference_partition(bgm_tol)
    assert part.m == 100
    assert part.delta == 0.01
    np.testing.assert_allclose(part.gamma, np.arange(100) * 0.01)
    np.testing.assert_allclose(part.midpoints, np.arange(100) * 0.01 + 0.005)


def test_reference_partition_must_tile_domain():
    with pytest.raises(ValueError):
        ReferencePartition(90, 0.01, 1.0)


def make_state(nodes, values, tol):
    return ModelState(AdaptiveMesh(np.asarray(nodes, float), tol), np.asarray(values, float), 0.0)


# ---------------------------------------------------------------- HR scheme


def test_match_hr_identity_on_reference_mesh(bgm_partition):
    """Nodes exactly at gamma donate their values slot for slot."""
    state = initial_state(bgm_spec(), 100)
    member = match_hr(state, bgm_partition)
    m = bgm_partition.m
    np.testing.assert_array_equal(member.state_vector[:m], state.u)
    np.testing.assert_array_equal(member.state_vector[m:], bgm_partition.gamma)
    assert not member.ghost_mask.any()
    assert member.scheme == "hr"


def test_match_hr_fills_empty_slots_with_bracket_means():
    tol = MeshTolerances(0.1, 0.2, 1.0)
    part = reference_partition(tol)
    z = [0.0, 0.15, 0.3, 0.45, 0.6, 0.78, 0.9]
    u = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]
    member = match_hr(make_state(z, u, tol), part)
    vals = member.state_vector[: part.m]
    # occupied slots: 0.15 -> slot 2, 0.3 -> 3, 0.45 -> 5, 0.6 -> 6, 0.78 -> 8
    assert vals[0] == 10.0 and vals[2] == 20.0 and vals[3] == 30.0
    assert vals[5] == 40.0 and vals[6] == 50.0 and vals[8] == 60.0 and vals[9] == 70.0
    # empty slots 1, 4, 7 take the mean of their bracketing node values
    assert vals[1] == pytest.approx(15.0)  # gamma=0.1 between 0.0 and 0.15
    assert vals[4] == pytest.approx(35.0)  # gamma=0.4 between 0.3 and 0.45
    assert vals[7] == pytest.approx(55.0)  # gamma=0.7 between 0.6 and 0.78
    assert member.ghost_mask[[1, 4, 7]].all()
    assert member.ghost_mask.sum() == 3


def test_match_hr_wrap_slot_mean():
    tol = MeshTolerances(0.1, 0.2, 1.0)
    part = reference_partition(tol)
    # leave gamma_0 = 0 empty: first node at 0.08 maps to slot 1
    z = [0.08, 0.2, 0.35, 0.5, 0.65, 0.8]
    u = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    member = match_hr(make_state(z, u, tol), part)
    vals = member.state_vector[: part.m]
    # gamma_0 lies in the wrap segment: mean of first and last node values
    assert vals[0] == pytest.approx(0.5 * (1.0 + 6.0))


def test_match_hr_collision_raises(bgm_partition, bgm_tol):
    # a structurally sound but gap-invalid mesh with two nodes in one slot
    state = make_state([0.1, 0.102, 0.5], [1.0, 2.0, 3.0], bgm_tol)
    with pytest.raises(MeshStructureError):
        match_hr(state, bgm_partition)


def test_return_hr_zero_update_is_identity(bgm_partition):
    spec = bgm_spec()
    state = initial_state(spec, 70)
    from meshenkf import integrate

    state = integrate(state, spec, 0.1)  # a mesh that has actually moved
    member = match_hr(state, bgm_partition)
    back = return_hr(member)
    np.testing.assert_array_equal(back.mesh.nodes, state.mesh.nodes)
    np.testing.assert_array_equal(back.u, state.u)
    assert back.t == state.t


def test_return_hr_carries_updated_values_to_origin_nodes():
    tol = MeshTolerances(0.1, 0.2, 1.0)
    part = reference_partition(tol)
    z = [0.0, 0.15, 0.3, 0.45, 0.6, 0.78, 0.9]
    u = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]
    state = make_state(z, u, tol)
    member = match_hr(state, part)
    bumped = member.state_vector.copy()
    bumped[: part.m] += 1.0
    back = return_hr(member.with_state_vector(bumped))
    np.testing.assert_array_equal(back.mesh.nodes, state.mesh.nodes)
    np.testing.assert_allclose(back.u, np.asarray(u) + 1.0)


def test_return_hr_rejects_wrong_scheme(bgm_partition):
    state = initial_state(bgm_spec(), 100)
    member = match_hra(state, bgm_partition, np.random.default_rng(0))
    with pytest.raises(ValueError):
        return_hr(member)


# --------------------------------------------------------------- HRA scheme


def test_match_hra_fills_every_interval(bgm_partition):
    spec = bgm_spec()
    state = initial_state(spec, 70)
    member = match_hra(state, bgm_partition, np.random.default_rng(3))
    m = bgm_partition.m
    pos, val = member.state_vector[m:], member.state_vector[:m]
    assert member.ghost_mask.sum() == m - 70
    # one node per interval, in place (snapped floor, as boundary-rational
    # positions quantize a hair low)
    from meshenkf.dimension import _slot_index

    slots = np.minimum(_slot_index(pos / bgm_partition.delta), m - 1)
    np.testing.assert_array_equal(np.sort(slots), np.arange(m))
    assert (np.diff(pos) > 0).all()
    # original nodes and values are embedded untouched
    keep = ~member.ghost_mask
    np.testing.assert_array_equal(pos[keep], state.mesh.nodes)
    np.testing.assert_array_equal(val[keep], state.u)


def test_match_hra_ghost_positions_within_their_intervals(bgm_partition):
    state = initial_state(bgm_spec(), 70)
    member = match_hra(state, bgm_partition, np.random.default_rng(11))
    m, d = bgm_partition.m, bgm_partition.delta
    pos = member.state_vector[m:]
    ghosts = np.flatnonzero(member.ghost_mask)
    for i in ghosts:
        k = int(pos[i] // d)
        assert k * d <= pos[i] < (k + 1) * d


def test_match_hra_ghost_values_interpolate_neighbours(bgm_partition):
    """A valid mesh never has two adjacent empty intervals, so every ghost
    sits between two original nodes and takes the linear-interpolant value."""
    state = initial_state(bgm_spec(), 70)
    member = match_hra(state, bgm_partition, np.random.default_rng(7))
    m = bgm_partition.m
    pos, val = member.state_vector[m:], member.state_vector[:m]
    gmask = member.ghost_mask
    for i in np.flatnonzero(gmask):
        assert not gmask[i - 1] and not gmask[(i + 1) % m]
        zl, ul = pos[i - 1], val[i - 1]
        zr, ur = pos[(i + 1) % m], val[(i + 1) % m]
        if i + 1 == m:  # right neighbour wraps
            zr += 1.0
        want = ghost_value_reference(pos[i], zl, ul, zr, ur)
        assert val[i] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_match_hra_deterministic_given_rng(bgm_partition):
    state = initial_state(bgm_spec(), 70)
    a = match_hra(state, bgm_partition, np.random.default_rng(42))
    b = match_hra(state, bgm_partition, np.random.default_rng(42))
    np.testing.assert_array_equal(a.state_vector, b.state_vector)


def test_match_hra_boundary_rational_mesh(bgm_partition):
    # nodes exactly on interval boundaries must not collide via float floor
    state = initial_state(bgm_spec(), 100)
    member = match_hra(state, bgm_partition, np.random.default_rng(0))
    assert member.ghost_mask.sum() == 0
    np.testing.assert_array_equal(member.state_vector[100:], state.mesh.nodes)


def test_match_hra_collision_raises(bgm_partition, bgm_tol):
    state = make_state([0.105, 0.108, 0.5], [1.0, 2.0, 3.0], bgm_tol)
    with pytest.raises(MeshStructureError):
        match_hra(state, bgm_partition, np.random.default_rng(0))


def test_return_hra_zero_update_without_ghosts_is_identity(bgm_partition):
    """With every interval occupied there are no ghosts, so the round trip
    reproduces the member bit for bit."""
    spec = bgm_spec()
    state = initial_state(spec, 100)
    member = match_hra(state, bgm_partition, np.random.default_rng(5))
    assert member.ghost_mask.sum() == 0
    back = return_hra(member, spec.tolerances)
    np.testing.assert_array_equal(back.mesh.nodes, state.mesh.nodes)
    np.testing.assert_array_equal(back.u, state.u)
    assert back.t == state.t


def test_return_hra_zero_update_yields_valid_state(bgm_partition):
    # ghost insertions usually violate the gap rules against a flanking
    # original, so a remesh pass may fire; the contract is a valid mesh with
    # the ghosts gone, not bitwise identity
    spec = bgm_spec()
    state = initial_state(spec, 70)
    member = match_hra(state, bgm_partition, np.random.default_rng(5))
    back = return_hra(member, spec.tolerances)
    assert is_valid(back.mesh)
    assert np.isfinite(back.u).all()
    assert back.t == state.t
    assert back.mesh.n_nodes < 100  # ghosts were not simply kept


def test_return_hra_ghost_deleted_even_after_migration(bgm_tol):
    """A ghost pushed into an occupied interval by the update still goes."""
    tol = MeshTolerances(0.1, 0.2, 1.0)
    part = reference_partition(tol)
    z = [0.0, 0.15, 0.3, 0.45, 0.6, 0.78, 0.9]
    u = [1.0] * 7
    member = match_hra(make_state(z, u, tol), part, np.random.default_rng(2))
    ghosts = np.flatnonzero(member.ghost_mask)
    assert ghosts.size == 3
    vec = member.state_vector.copy()
    m = part.m
    # drag one ghost into the interval of an original node, keeping the
    # array sorted to dodge an unrelated remesh
    g = ghosts[0]
    vec[m + g] = vec[m + g - 1] + 0.011
    back = return_hra(member.with_state_vector(vec), tol)
    # all three ghost positions are gone
    for gi in ghosts:
        assert vec[m + gi] not in back.mesh.nodes


def test_return_hra_remesh_error_when_too_few_originals():
    tol = MeshTolerances(0.1, 0.2, 1.0)
    part = reference_partition(tol)
    pos = np.arange(10) * 0.1 + 0.05
    vals = np.zeros(10)
    ghost = np.ones(10, dtype=bool)
    ghost[0] = False  # a single real node cannot make a mesh
    member = MatchedMember(
        "hra", np.concatenate([vals, pos]), ghost, np.arange(10), None, None, 0.0
    )
    with pytest.raises(RemeshError):
        return_hra(member, tol)


def test_return_hra_rejects_wrong_scheme(bgm_partition, bgm_tol):
    state = initial_state(bgm_spec(), 100)
    member = match_hr(state, bgm_partition)
    with pytest.raises(ValueError):
        return_hra(member, bgm_tol)


def test_return_hra_wraps_and_reorders_moved_nodes(bgm_partition):
    spec = bgm_spec()
    state = initial_state(spec, 70)
    member = match_hra(state, bgm_partition, np.random.default_rng(9))
    vec = member.state_vector.copy()
    m = bgm_partition.m
    vec[m:] += 1.27  # second half of the analysis shifts every node by a lap+
    back = return_hra(member.with_state_vector(vec), spec.tolerances)
    assert is_valid(back.mesh)
    assert (back.mesh.nodes >= 0).all() and (back.mesh.nodes < 1.0).all()


@given(st.integers(min_value=0, max_value=5_000))
def test_round_trip_zero_update_hr(seed):
    """Match/return with an untouched state vector reproduces the member."""
    spec = bgm_spec()
    part = reference_partition(spec.tolerances)
    g = np.random.default_rng(seed)
    z = np.sort(g.uniform(0.0, 1.0, size=int(g.integers(51, 100))))
    mesh, vals, _ = remesh(
        AdaptiveMesh(np.unique(z), spec.tolerances), g.standard_normal(np.unique(z).size)
    )
    state = ModelState(mesh, vals, 0.0)
    member = match_hr(state, part)
    back = return_hr(member)
    np.testing.assert_array_equal(back.mesh.nodes, state.mesh.nodes)
    np.testing.assert_array_equal(back.u, state.u)


@given(st.integers(min_value=0, max_value=5_000))
def test_round_trip_zero_update_hra_valid_output(seed):
    spec = bgm_spec()
    part = reference_partition(spec.tolerances)
    g = np.random.default_rng(seed)
    z = np.sort(g.uniform(0.0, 1.0, size=int(g.integers(51, 100))))
    mesh, vals, _ = remesh(
        AdaptiveMesh(np.unique(z), spec.tolerances), g.standard_normal(np.unique(z).size)
    )
    state = ModelState(mesh, vals, 0.0)
    member = match_hra(state, part, g)
    back = return_hra(member, spec.tolerances)
    assert is_valid(back.mesh)
    assert np.isfinite(back.u).all()
    assert back.t == state.t
