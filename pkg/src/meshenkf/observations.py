"""Noisy Eulerian observations of the truth and the two observation operators.

Observations are taken at fixed, regularly spaced locations in [0, L) and are
linear interpolations of the physical values plus Gaussian noise.  The two
operators differ only in which positions carry the interpolation: the fixed
reference positions gamma (projected state vectors) or the state vector's own
node positions (augmented state vectors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelState


def interp_periodic(x, nodes: np.ndarray, values: np.ndarray, L: float):
    """Piecewise-linear interpolation on a periodic domain.

    nodes must be strictly increasing in [0, L); query points in [0, L).
    Queries outside the node span wrap around the seam: left of nodes[0] the
    bracketing pair is (nodes[-1] - L, nodes[0]), right of nodes[-1] it is
    (nodes[-1], nodes[0] + L).
    """
    xq = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    j = np.searchsorted(nodes, xq, side="right") - 1
    wrap_left = j < 0
    jl = np.where(wrap_left, n - 1, j)
    zl = nodes[jl] - np.where(wrap_left, L, 0.0)
    jr = jl + 1
    wrap_right = jr == n
    jr = np.where(wrap_right, 0, jr)
    # when the query already wrapped left, the right bracket is nodes[0]
    # at its true position, not shifted by a period
    zr = nodes[jr] + np.where(wrap_right & ~wrap_left, L, 0.0)
    w = (xq - zl) / (zr - zl)
    out = (1.0 - w) * values[jl] + w * values[jr]
    if np.isscalar(x) or getattr(x, "ndim", 0) == 0:
        return float(out[0])
    return out


@dataclass(frozen=True)
class ObservationSet:
    """Observed values at fixed locations, with noise level sigma_o, at time tau."""

    locations: np.ndarray
    values: np.ndarray
    sigma_o: float
    time: float

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "values", vals)
        if locs.ndim != 1 or locs.shape != vals.shape:
            raise ValueError("locations and values must be aligned 1-d arrays")
        if locs.size >= 2 and not (np.diff(locs) > 0.0).all():
            raise ValueError("locations must be strictly increasing")
        if not self.sigma_o > 0.0:
            raise ValueError("sigma_o must be positive")

    @property
    def n_obs(self) -> int:
        return self.locations.size


def generate_observations(
    truth: ModelState, n_obs: int, sigma_o: float, rng: np.random.Generator
) -> ObservationSet:
    """Interpolate the truth at n_obs evenly spaced locations and add noise."""
    if n_obs < 1:
        raise ValueError("n_obs must be >= 1")
    L = truth.mesh.tolerances.domain_length
    locations = np.arange(n_obs) * (L / n_obs)
    clean = interp_periodic(locations, truth.mesh.nodes, truth.u, L)
    values = clean + sigma_o * rng.standard_normal(n_obs)
    return ObservationSet(locations, values, sigma_o, truth.t)


def observe_hr(state_vector: np.ndarray, partition, locations):
    """Predicted observations for a projected (fixed-reference) state vector.

    The first half of the vector holds the values; the interpolation runs on
    the fixed reference positions gamma.
    """
    m = partition.m
    return interp_periodic(
        locations, partition.gamma, state_vector[:m], partition.domain_length
    )


def observe_hra(state_vector: np.ndarray, partition, locations):
    """Predicted observations for an augmented state vector.

    The vector holds (values, positions); the interpolation runs on the
    vector's own position block, which must be strictly increasing.
    """
    m = partition.m
    return interp_periodic(
        locations, state_vector[m:], state_vector[:m], partition.domain_length
    )


def make_observation_operator(scheme: str, partition, locations):
    """h: state vector -> predicted observation vector, for the analysis step."""
    locs = np.asarray(locations, dtype=float)
    if scheme == "hr":
        return lambda x: observe_hr(x, partition, locs)
    if scheme == "hra":
        return lambda x: observe_hra(x, partition, locs)
    raise ValueError(f"no observation operator for scheme {scheme!r}")
