"""Stochastic (perturbed-observation) ensemble Kalman filter.

The analysis works on matched ensembles: every member is a vector of length
2M (values block then positions block).  Observations are perturbed per
member, the observation-error covariance is estimated from those same
perturbations, and the gain solve uses a linear solve rather than an explicit
inverse.  Multiplicative inflation scales the forecast anomalies before the
gain; adaptive additive jitter is applied to the values block afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dimension import MatchedMember, ReferencePartition
from .observations import ObservationSet

SCHEMES = ("hr", "hra")


class FilterDegeneracyError(RuntimeError):
    """Raised when the innovation covariance is singular (no usable update)."""


@dataclass(frozen=True)
class FilterConfig:
    """Ensemble size, inflation, jitter amplitude, and scheme selection."""

    n_ensemble: int
    inflation: float = 1.0
    jitter: float = 0.0
    scheme: str = "hra"
    rng_seed: int = 0
    jitter_range_per_member: bool = False
    ghost_spread_is_variance: bool = False

    def __post_init__(self):
        if self.n_ensemble < 2:
            raise ValueError("n_ensemble must be >= 2 (anomalies need a mean)")
        if not 0.0 <= self.jitter <= 1.0:
            raise ValueError("jitter must lie in [0, 1]")
        if self.inflation < 0.0:
            raise ValueError("inflation must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class MatchedEnsemble:
    """All members matched to a common length 2M, ready for the analysis."""

    members: list = field(default_factory=list)
    partition: ReferencePartition = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a matched ensemble needs at least 2 members")
        width = self.members[0].state_vector.size
        if any(mm.state_vector.size != width for mm in self.members):
            raise ValueError("members must share one state-vector length")

    @property
    def n_ensemble(self) -> int:
        return len(self.members)

    def as_matrix(self) -> np.ndarray:
        """Members as columns: 2M x n_ensemble."""
        return np.column_stack([mm.state_vector for mm in self.members])


def anomaly_matrix(E: np.ndarray) -> np.ndarray:
    """Columns (x_j - mean)/sqrt(Ne - 1) of a members-as-columns matrix.

    Rows that are constant across members (the hr position block, flat value
    regions) get anomalies forced to exactly 0.0, so downstream gain rows and
    covariance entries built from them are exact zeros and the corresponding
    state components pass through the analysis bitwise untouched.
    """
    ne = E.shape[1]
    X = (E - E.mean(axis=1, keepdims=True)) / np.sqrt(ne - 1.0)
    X[np.ptp(E, axis=1) == 0.0] = 0.0
    return X


def forecast_anomalies(ensemble: MatchedEnsemble, alpha: float = 1.0) -> np.ndarray:
    """Anomaly matrix of the ensemble, multiplied by the inflation alpha."""
    return alpha * anomaly_matrix(ensemble.as_matrix())


def perturb_observations(
    obs: ObservationSet, n_ensemble: int, rng: np.random.Generator
):
    """Per-member observation copies y + eps_j and the covariance they imply.

    Returns (Y_pert, R_e): Y_pert is n_obs x n_ensemble with columns y + eps_j,
    eps_j ~ N(0, sigma_o^2 I); R_e = Yo Yo^T where Yo stacks the eps_j columns
    scaled by 1/sqrt(n_ensemble - 1).
    """
    eps = obs.sigma_o * rng.standard_normal((obs.n_obs, n_ensemble))
    y_pert = obs.values[:, None] + eps
    yo = eps / np.sqrt(n_ensemble - 1.0)
    return y_pert, yo @ yo.T


def analysis(
    ensemble: MatchedEnsemble,
    obs: ObservationSet,
    config: FilterConfig,
    observe,
    rng: np.random.Generator | None = None,
) -> MatchedEnsemble:
    """One stochastic EnKF update of a matched ensemble.

    observe maps a state vector to the n_obs predicted observations.  The gain
    K = X Y^T (Y Y^T + R_e)^{-1} uses inflated state anomalies X and
    uninflated predicted-observation anomalies Y; each member is then moved by
    K times its own innovation against its perturbed observation copy.

    The caller normally passes the cycle's random stream; without one, a fresh
    stream seeded from config.rng_seed is used (so repeated calls with the
    same inputs repeat exactly).
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    E = ensemble.as_matrix()
    ne = E.shape[1]
    if ne != config.n_ensemble:
        raise ValueError("ensemble size does not match the filter config")

    X = config.inflation * anomaly_matrix(E)

    H = np.column_stack([observe(E[:, j]) for j in range(ne)])
    Y = anomaly_matrix(H)

    y_pert, r_e = perturb_observations(obs, ne, rng)

    s = Y @ Y.T + r_e
    try:
        # K = X Y^T S^{-1}  via  S^T K^T = Y X^T (S symmetric)
        k_gain = np.linalg.solve(s, Y @ X.T).T
    except np.linalg.LinAlgError as err:
        raise FilterDegeneracyError(
            "singular innovation covariance (collapsed ensemble and zero "
            "observation noise)"
        ) from err
    if not np.isfinite(k_gain).all():
        raise FilterDegeneracyError("non-finite Kalman gain")

    E_a = E + k_gain @ (y_pert - H)
    members = [
        mm.with_state_vector(E_a[:, j]) for j, mm in enumerate(ensemble.members)
    ]
    return MatchedEnsemble(members, ensemble.partition)


def pooled_value_range(ensemble: MatchedEnsemble) -> float:
    """max - min over the values blocks of every member, pooled together."""
    m = ensemble.members[0].m
    pooled = np.concatenate([mm.state_vector[:m] for mm in ensemble.members])
    return float(np.ptp(pooled))


def apply_jitter(
    member_vector: np.ndarray,
    alpha_j: float,
    rng: np.random.Generator,
    value_range: float,
) -> np.ndarray:
    """Add N(0, sigma_J^2) to the values block, sigma_J = alpha_J * value_range.

    The positions block is never touched; alpha_J = 0 (or a flat field) is the
    identity without consuming random draws.
    """
    if not 0.0 <= alpha_j <= 1.0:
        raise ValueError("alpha_J must lie in [0, 1]")
    sigma = alpha_j * value_range
    if sigma == 0.0:
        return member_vector
    out = member_vector.copy()
    m = member_vector.size // 2
    out[:m] += sigma * rng.standard_normal(m)
    return out


def jitter_ensemble(
    ensemble: MatchedEnsemble,
    alpha_j: float,
    rngs,
    range_per_member: bool = False,
) -> MatchedEnsemble:
    """Jitter every member, one random stream per member.

    The noise scale uses the pooled value range of the whole analysis
    ensemble; range_per_member switches to each member's own range.
    """
    if alpha_j == 0.0:
        return ensemble
    m = ensemble.members[0].m
    pooled = pooled_value_range(ensemble)
    members = []
    for mm, rng in zip(ensemble.members, rngs):
        r = float(np.ptp(mm.state_vector[:m])) if range_per_member else pooled
        members.append(
            mm.with_state_vector(apply_jitter(mm.state_vector, alpha_j, rng, r))
        )
    return MatchedEnsemble(members, ensemble.partition)
