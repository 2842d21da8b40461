"""Independent reference implementations used as test oracles.

Everything here deliberately takes a different route from the production
code: np.interp instead of the hand-rolled searchsorted interpolation, an
explicit matrix inverse with unnormalised covariance sums instead of the
anomaly-matrix linear solve, and plain Python loops for the fidelity
metrics.  Agreement between the two routes is the point of the tests that
use them.
"""

import numpy as np


def interp_reference(x, nodes, values, L):
    """Periodic piecewise-linear interpolation via np.interp(period=...)."""
    return np.interp(np.atleast_1d(x), nodes, values, period=L)


def enkf_reference(E, obs_values, eps, observe, alpha=1.0):
    """Dense stochastic-EnKF analysis with an explicit inverse.

    E: state matrix (members as columns); eps: the observation perturbation
    draws (n_obs x n_ensemble), which the caller reproduces from the same
    seeded stream the production analysis consumes.  Covariances are built
    from unnormalised anomaly sums divided by (Ne - 1).
    """
    ne = E.shape[1]
    H = np.column_stack([observe(E[:, j]) for j in range(ne)])
    A = E - E.mean(axis=1, keepdims=True)
    B = H - H.mean(axis=1, keepdims=True)
    c_xy = alpha * (A @ B.T) / (ne - 1.0)
    c_yy = (B @ B.T) / (ne - 1.0)
    r_e = (eps @ eps.T) / (ne - 1.0)
    k_gain = c_xy @ np.linalg.inv(c_yy + r_e)
    y_pert = obs_values[:, None] + eps
    return E + k_gain @ (y_pert - H), k_gain


def ghost_value_reference(g, z_l, u_l, z_r, u_r):
    """Linear interpolation between one left and one right neighbour."""
    return float(np.interp(g, [z_l, z_r], [u_l, u_r]))


def fidelity_reference(errors, conventional=False):
    """Loop implementation of the spatial-moment fidelity triple.

    Returns (sigma_ens, k_ens, rmse_ens, skipped, total) for error fields of
    shape (n_times, n_members, M).
    """
    nt, ne, m = errors.shape
    sig, kurt, per_term = [], [], []
    skipped = 0
    for t in range(nt):
        for i in range(ne):
            d = errors[t, i]
            mu = d.mean()
            m2 = ((d - mu) ** 2).mean()
            m4 = ((d - mu) ** 4).mean()
            sig.append(m2)
            if m2 > 0.0:
                kurt.append(m4 / m2**2)
            else:
                skipped += 1
            if conventional:
                per_term.append(np.sqrt((d**2).mean()))
            else:
                per_term.append(np.sqrt((d**2).sum()) / m)
    k_ens = float(np.mean(kurt)) if kurt else float("nan")
    return (
        float(np.mean(sig)),
        k_ens,
        float(np.mean(per_term)),
        skipped,
        nt * ne,
    )


def random_valid_mesh(rng, tol, max_nodes=200):
    """A random valid mesh built by remeshing random positions.

    Independent of the production remesher only in its *inputs*; validity of
    the output is what the tests then check against is_valid / _gaps_ok.
    """
    from meshenkf import AdaptiveMesh, remesh

    n = int(rng.integers(2, max_nodes))
    z = np.sort(rng.uniform(0.0, tol.domain_length, size=n))
    z = np.unique(z)
    if z.size < 2:
        z = np.array([0.0, tol.domain_length / 2.0])
    mesh = AdaptiveMesh(z, tol)
    mesh2, vals, _ = remesh(mesh, np.zeros(z.size))
    return mesh2
