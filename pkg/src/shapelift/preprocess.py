"""Input conditioning: scale normalization and translation elimination.

The solver works on a translation-free problem.  For fixed weights the
optimal 2D translation has a closed form (the weighted centroid residual),
so the translation is eliminated by weighted centering of both landmarks
and basis shapes; it is recovered afterwards from the solved rotation and
coefficients.
"""

from dataclasses import dataclass
import numpy as np

from .model import DeformableModel, Observation, Pose, Reconstruction


class DegenerateWeightsError(ValueError):
    """All landmark weights are (numerically) zero."""


@dataclass
class CenteredProblem:
    """Translation-free weighted least-squares data.

    z_tilde[i] = sqrt(w_i) * (z_i - z_bar), shape (N, 2)
    b_tilde[k] = sqrt(w_i) * (B_ki - b_bar_k), shape (K, 3, N)
    z_bar, b_bar are the weighted means needed to undo the centering.
    alpha is the coefficient-sparsity penalty, intrinsics the camera
    scales (s_x, s_y) the residual rows are multiplied by.
    """

    z_tilde: np.ndarray
    b_tilde: np.ndarray
    weights: np.ndarray
    alpha: float
    z_bar: np.ndarray
    b_bar: np.ndarray
    intrinsics: tuple = (1.0, 1.0)

    @property
    def k(self):
        return self.b_tilde.shape[0]

    @property
    def n(self):
        return self.z_tilde.shape[0]


def normalize(model, obs):
    """Rescale landmarks and bases into solver units.

    Landmarks are divided by the camera scales and then by
    scale_z = max(1, max_i ||z_i||), which puts them inside the closed
    unit disk.  Each basis is multiplied by 1 / max(1, max_i ||B_ki||),
    so every basis column lies inside the unit ball.  The factors are
    recorded on the returned copies (scale_z as the divisor used,
    scale_b as the multiplier), and intrinsics become (1, 1).
    """
    sx, sy = obs.intrinsics
    z = obs.landmarks / np.array([sx, sy])
    norms = np.linalg.norm(z, axis=1)
    scale_z = max(1.0, norms.max())
    col_norms = np.linalg.norm(model.bases, axis=1)  # (K, N)
    scale_b = 1.0 / np.maximum(1.0, col_norms.max(axis=1))
    norm_obs = Observation(
        landmarks=z / scale_z,
        weights=obs.weights.copy(),
        intrinsics=(1.0, 1.0),
        scale_z=obs.scale_z * scale_z,
    )
    norm_model = DeformableModel(
        bases=model.bases * scale_b[:, None, None],
        scale_b=model.scale_b * scale_b,
    )
    return norm_model, norm_obs


def eliminate_translation(model, obs, alpha=0.0):
    """Build the translation-free problem by weighted centering.

    Centering with the weighted means is exact: for any fixed shape and
    rotation, the centered residual equals the translation-minimized
    residual of the full problem.
    """
    w = obs.weights
    wsum = w.sum()
    if wsum < 1e-12:  # near-zero mass makes the weighted means meaningless
        raise DegenerateWeightsError("sum of weights must be positive")
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError("alpha must be a nonnegative finite number")
    z_bar = (w @ obs.landmarks) / wsum  # (2,)
    b_bar = (model.bases @ w) / wsum  # (K, 3)
    sw = np.sqrt(w)
    z_tilde = sw[:, None] * (obs.landmarks - z_bar)
    b_tilde = sw[None, None, :] * (model.bases - b_bar[:, :, None])
    return CenteredProblem(
        z_tilde=z_tilde,
        b_tilde=b_tilde,
        weights=w.copy(),
        alpha=float(alpha),
        z_bar=z_bar,
        b_bar=b_bar,
        intrinsics=obs.intrinsics,
    )


def recover_translation(prob, coeffs, rotation):
    """Optimal translation for the given shape and rotation.

    t = z_bar - diag(s) P R (sum_k c_k b_bar_k), the stationary point of
    the full weighted objective in t.
    """
    shape_mean = np.tensordot(coeffs, prob.b_bar, axes=(0, 0))  # (3,)
    proj = (rotation @ shape_mean)[:2] * np.array(prob.intrinsics)
    return prob.z_bar - proj


def denormalize(recon, scale_z, scale_b, intrinsics=(1.0, 1.0)):
    """Map a solution on normalized data back to input units.

    Coefficients absorb both factors (c_k <- c_k * scale_z * scale_b_k),
    the translation is scaled back through the landmark normalization and
    camera scales, and the rotation is unchanged.  Bound and certificate
    quantities (f_lower, f_upper, eta) remain in normalized units.
    """
    sx, sy = intrinsics
    t = recon.pose.translation * scale_z * np.array([sx, sy])
    return Reconstruction(
        coeffs=recon.coeffs * scale_z * np.asarray(scale_b),
        pose=Pose(rotation=recon.pose.rotation.copy(), translation=t),
        f_lower=recon.f_lower,
        f_upper=recon.f_upper,
        eta=recon.eta,
        corank=recon.corank,
        certified=recon.certified,
        weights=None if recon.weights is None else recon.weights.copy(),
        gnc=recon.gnc,
    )
