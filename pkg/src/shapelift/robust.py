"""Outlier-robust fitting: truncated least squares via graduated
non-convexity.

The truncated loss min(r^2, cbar^2) is approached through a family of
surrogates controlled by mu: near mu = 0 the surrogate is almost convex,
as mu grows it converges to the truncated loss.  Each outer iteration
alternates a weighted certifiable solve (weights fixed) with a
closed-form weight update (variables fixed), then increases mu.  The
weight update is the exact minimizer of the Black-Rangarajan duality
form

    sum_i [ w_i r_i^2 + mu (1 - w_i) / (mu + w_i) * cbar^2 ]

over w_i in [0, 1].
"""

from dataclasses import dataclass, field
import numpy as np

from .certify import (CertifySettings, ExtractionDegenerateError,
                      ProjectionDegenerateError, solve_centered)
from .model import DeformableModel, Observation
from .preprocess import DegenerateWeightsError, eliminate_translation
from .sdp import SdpSettings


@dataclass
class GncSettings:
    """Parameters of the graduated non-convexity loop.

    cbar is the inlier residual cutoff, in the same units as the
    observation passed in; there is no sensible default, callers must
    choose it from their noise level (e.g. a small multiple of the
    expected inlier residual).

    alpha adds the coefficient-sparsity penalty to every weighted
    subproblem.  Early iterations scale all weights by a common small
    factor, which amplifies a fixed alpha relative to the data term and
    can starve the fit entirely; robust runs normally keep alpha = 0.
    """

    cbar: float
    alpha: float = 0.0
    mu0: float = 1e-4
    mu_factor: float = 2.0
    max_iter: int = 100
    conv_tol: float = 1e-10
    drop_tol: float = 1e-8

    def __post_init__(self):
        if not np.isfinite(self.cbar) or self.cbar <= 0:
            raise ValueError("cbar must be a positive finite number")


@dataclass
class GncState:
    """Iteration trace of the robust loop."""

    mu: float
    tau: int
    weights: np.ndarray
    objective_history: list = field(default_factory=list)
    cbar: float = 0.0
    status: str = ""


def residuals(model, obs, coeffs, rotation, translation):
    """Unweighted reprojection residual norms at a full solution."""
    shape = np.tensordot(coeffs, model.bases, axes=(0, 0))  # (3, N)
    proj = (rotation @ shape)[:2].T * np.array(obs.intrinsics)
    diff = obs.landmarks - proj - translation
    return np.linalg.norm(diff, axis=1)


def gnc_surrogate(r, mu, cbar):
    """Surrogate loss: r^2 inside, cbar^2 outside, smooth blend between.

    Converges pointwise to min(r^2, cbar^2) as mu -> infinity.
    """
    r = np.abs(np.asarray(r, dtype=float))
    r2 = r**2
    c2 = cbar**2
    lo = mu / (mu + 1.0) * c2
    hi = (mu + 1.0) / mu * c2
    mid = 2.0 * cbar * r * np.sqrt(mu * (mu + 1.0)) - mu * (c2 + r2)
    return np.where(r2 <= lo, r2, np.where(r2 >= hi, c2, mid))


def weight_update(r, mu, cbar):
    """Closed-form minimizer of the duality form at fixed residuals.

    w = 1 on [0, lo], 0 on [hi, inf), and cbar/r * sqrt(mu(mu+1)) - mu
    in between; continuous at both edges.
    """
    r = np.abs(np.asarray(r, dtype=float))
    r2 = r**2
    c2 = cbar**2
    lo = mu / (mu + 1.0) * c2
    hi = (mu + 1.0) / mu * c2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = cbar / r * np.sqrt(mu * (mu + 1.0)) - mu
    w = np.where(r2 <= lo, 1.0, np.where(r2 >= hi, 0.0, mid))
    return np.clip(w, 0.0, 1.0)


def gnc_objective(res, weights, mu, cbar, alpha=0.0, coeffs=None):
    """Black-Rangarajan objective at given residuals and weights."""
    res = np.asarray(res, dtype=float)
    weights = np.asarray(weights, dtype=float)
    c2 = cbar**2
    penalty = mu * (1.0 - weights) / (mu + weights) * c2
    total = float(np.sum(weights * res**2 + penalty))
    if alpha and coeffs is not None:
        total += alpha * float(np.sum(coeffs))
    return total


def shape_sharp(model, obs, settings, variant="reduced2",
                sdp_settings=None, cert_settings=None):
    """Robust reconstruction by GNC over certifiable weighted solves.

    Landmarks whose effective weight falls below settings.drop_tol are
    left out of the weighted subproblem (their residuals are still
    evaluated, so they can re-enter later).  Returns the last weighted
    solve's reconstruction carrying the final weights and the loop
    trace; a failed inner solve ends the loop with the best-so-far
    solution and certified=False diagnostics in the trace.
    """
    sdp_settings = sdp_settings or SdpSettings()
    cert_settings = cert_settings or CertifySettings()
    n = obs.n
    w = np.ones(n)
    mu = settings.mu0
    state = GncState(mu=mu, tau=0, weights=w.copy(), cbar=settings.cbar)
    recon = None
    f_prev = None
    status = "iter_limit"
    for tau in range(1, settings.max_iter + 1):
        eff = obs.weights * w
        keep = eff >= settings.drop_tol
        if keep.sum() < 4:  # too few points for a subproblem model
            if recon is None:
                raise DegenerateWeightsError("all landmark weights vanished")
            status = "weights_collapsed"
            break
        sub_obs = Observation(
            landmarks=obs.landmarks[keep],
            weights=eff[keep],
            intrinsics=obs.intrinsics,
            scale_z=obs.scale_z,
        )
        sub_model = DeformableModel(
            bases=model.bases[:, :, keep], scale_b=model.scale_b
        )
        prob = eliminate_translation(sub_model, sub_obs, settings.alpha)
        try:
            recon_tau = solve_centered(
                prob, variant=variant, sdp_settings=sdp_settings,
                cert_settings=cert_settings,
            )
        except (ExtractionDegenerateError, ProjectionDegenerateError) as e:
            status = f"solver_failure: {e}"
            break
        recon = recon_tau
        r = residuals(model, obs, recon.coeffs, recon.pose.rotation,
                      recon.pose.translation)
        w = weight_update(r, mu, settings.cbar)
        f_tau = gnc_objective(r, w, mu, settings.cbar, settings.alpha,
                              recon.coeffs)
        state.objective_history.append(f_tau)
        state.mu = mu
        state.tau = tau
        state.weights = w.copy()
        if f_prev is not None and abs(f_tau - f_prev) < settings.conv_tol:
            status = "converged"
            break
        f_prev = f_tau
        mu *= settings.mu_factor
    state.status = status
    if recon is None:
        raise RuntimeError(f"robust loop produced no solution ({status})")
    recon.weights = w.copy()
    recon.gnc = state
    if status.startswith("solver_failure") or status == "weights_collapsed":
        recon.certified = False
    return recon
