"""Evaluation diagnostics on the fixed reference grid.

Everything here is a pure function: analysis-mean RMSE, first-derivative
RMSE, ensemble spread, the ensemble-fidelity triple (variance, kurtosis,
per-member RMSE of errors against the truth), and forecast covariance blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dimension import MatchedMember, ReferencePartition
from .enkf import MatchedEnsemble, forecast_anomalies
from .models import ModelState
from .observations import interp_periodic


def field_on_reference(member, partition: ReferencePartition) -> np.ndarray:
    """A member's values linearly interpolated onto the reference positions.

    Accepts a ModelState (its own mesh) or a MatchedMember (its state-vector
    value/position blocks).
    """
    if isinstance(member, ModelState):
        z, u = member.mesh.nodes, member.u
    elif isinstance(member, MatchedMember):
        m = member.m
        u, z = member.state_vector[:m], member.state_vector[m:]
    else:
        raise TypeError(f"cannot interpolate a {type(member).__name__}")
    return interp_periodic(partition.gamma, z, u, partition.domain_length)


def _member_fields(members, partition: ReferencePartition) -> np.ndarray:
    if isinstance(members, MatchedEnsemble):
        members = members.members
    return np.vstack([field_on_reference(mm, partition) for mm in members])


def analysis_mean_on_reference(members, partition: ReferencePartition) -> np.ndarray:
    """Pointwise ensemble mean on the reference positions.

    members may be a MatchedEnsemble or a list of ModelState / MatchedMember.
    """
    return _member_fields(members, partition).mean(axis=0)


def ensemble_spread(members, partition: ReferencePartition) -> float:
    """Root of the mean pointwise ensemble variance on the reference grid."""
    fields = _member_fields(members, partition)
    return float(np.sqrt(fields.var(axis=0, ddof=1).mean()))


def rmse(field: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared pointwise difference."""
    field = np.asarray(field, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if field.shape != truth.shape:
        raise ValueError("fields must have equal length")
    return float(np.sqrt(np.mean((field - truth) ** 2)))


def derivative_field(values: np.ndarray, partition: ReferencePartition) -> np.ndarray:
    """Periodic central differences (f_{i+1} - f_{i-1}) / (2 delta) on gamma."""
    f = np.asarray(values, dtype=float)
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * partition.delta)


@dataclass(frozen=True)
class EnsembleFidelity:
    """Averaged fidelity metrics of member-vs-truth error fields.

    kurtosis is the mean over the (member, time) terms whose spatial variance
    is nonzero; skipped counts the zero-variance terms left out (NaN when all
    terms are skipped).
    """

    sigma_ens: float
    k_ens: float
    rmse_ens: float
    kurtosis_terms_skipped: int
    kurtosis_terms_total: int


def ensemble_fidelity(
    errors: np.ndarray, rmse_conventional: bool = False
) -> EnsembleFidelity:
    """Fidelity triple from error fields d of shape (n_times, n_members, M).

    Per (member, time): spatial variance of d, spatial kurtosis (fourth
    central moment over squared variance), and (1/M) * sqrt(sum d^2) -- the
    1/M deliberately outside the root; rmse_conventional switches to
    sqrt(mean d^2).  Each is then averaged over times and members.
    """
    d = np.asarray(errors, dtype=float)
    if d.ndim != 3:
        raise ValueError("errors must have shape (n_times, n_members, M)")
    if not np.isfinite(d).all():
        raise ValueError("errors must be finite")
    m = d.shape[2]

    centred = d - d.mean(axis=2, keepdims=True)
    m2 = np.mean(centred**2, axis=2)
    m4 = np.mean(centred**4, axis=2)

    sigma_ens = float(m2.mean())

    nonzero = m2 > 0.0
    total = m2.size
    skipped = int(total - nonzero.sum())
    if skipped == total:
        k_ens = float("nan")
    else:
        k_ens = float((m4[nonzero] / m2[nonzero] ** 2).mean())

    if rmse_conventional:
        per_term = np.sqrt(np.mean(d**2, axis=2))
    else:
        per_term = np.sqrt(np.sum(d**2, axis=2)) / m
    rmse_ens = float(per_term.mean())

    return EnsembleFidelity(sigma_ens, k_ens, rmse_ens, skipped, total)


@dataclass(frozen=True)
class CovarianceBlocks:
    """The 2M x 2M forecast covariance X X^T split into its M x M blocks."""

    c_uu: np.ndarray
    c_uz: np.ndarray
    c_zz: np.ndarray

    @property
    def c_uz_diag(self) -> np.ndarray:
        return np.diag(self.c_uz).copy()


def covariance_blocks(
    ensemble: MatchedEnsemble, alpha: float = 1.0
) -> CovarianceBlocks:
    """Value-value, value-position and position-position covariance blocks.

    Built from the (optionally inflated) anomaly matrix; for hr ensembles the
    position anomalies are exactly zero, so c_uz and c_zz are exact zeros.
    """
    x = forecast_anomalies(ensemble, alpha)
    m = x.shape[0] // 2
    c = x @ x.T
    return CovarianceBlocks(c[:m, :m], c[:m, m:], c[m:, m:])


@dataclass(frozen=True)
class DiagnosticRecord:
    """Diagnostics of one ensemble snapshot at one assimilation time."""

    time: float
    phase: str  # "forecast" | "analysis"
    rmse_mean: float
    rmse_derivative: float
    spread: float
    per_member_errors: np.ndarray  # (n_members, M), member minus truth

    def __post_init__(self):
        finite = (
            np.isfinite(self.rmse_mean)
            and np.isfinite(self.rmse_derivative)
            and np.isfinite(self.spread)
            and np.isfinite(self.per_member_errors).all()
        )
        if not finite:
            raise ValueError("diagnostics must be finite")


def diagnose_snapshot(
    members,
    truth_on_gamma: np.ndarray,
    partition: ReferencePartition,
    time: float,
    phase: str,
) -> DiagnosticRecord:
    """All per-snapshot diagnostics of an ensemble against the truth."""
    fields = _member_fields(members, partition)
    mean_field = fields.mean(axis=0)
    return DiagnosticRecord(
        time=time,
        phase=phase,
        rmse_mean=rmse(mean_field, truth_on_gamma),
        rmse_derivative=rmse(
            derivative_field(mean_field, partition),
            derivative_field(truth_on_gamma, partition),
        ),
        spread=float(np.sqrt(fields.var(axis=0, ddof=1).mean())),
        per_member_errors=fields - truth_on_gamma,
    )
