"""Domain types and error metrics for weak-perspective shape recovery.

A deformable shape is a nonnegative combination of K basis shapes; an
observation is a set of N 2D landmarks produced by a weak-perspective
camera (per-axis scaling, rotation, 2D translation).  Rotations are
handled as 3x3 matrices everywhere; when a rotation is flattened to a
9-vector it is column-major, r = (col1, col2, col3).
"""

from dataclasses import dataclass, field
import numpy as np


def _as_float_array(x, name, shape=None):
    a = np.asarray(x, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass
class DeformableModel:
    """Basis shapes, stored as an array of shape (K, 3, N).

    scale_b holds the per-basis normalization multipliers applied to the
    raw bases (ones until `preprocess.normalize` has run); recovered
    coefficients must be divided back through it to reach input units.
    """

    bases: np.ndarray
    scale_b: np.ndarray = None

    def __post_init__(self):
        self.bases = _as_float_array(self.bases, "bases")
        if self.bases.ndim != 3 or self.bases.shape[1] != 3:
            raise ValueError(f"bases must have shape (K, 3, N), got {self.bases.shape}")
        if self.k < 1 or self.n < 4:
            raise ValueError("model needs at least one basis shape and four landmarks")
        if self.scale_b is None:
            self.scale_b = np.ones(self.k)
        self.scale_b = _as_float_array(self.scale_b, "scale_b", (self.k,))
        if np.any(self.scale_b <= 0):
            raise ValueError("scale_b entries must be positive")

    @property
    def k(self):
        return self.bases.shape[0]

    @property
    def n(self):
        return self.bases.shape[2]


@dataclass
class Observation:
    """2D landmarks with optional per-landmark weights and camera scales.

    intrinsics is the pair (s_x, s_y) of weak-perspective axis scalings.
    scale_z records the landmark normalization divisor (1 until
    `preprocess.normalize` has run).
    """

    landmarks: np.ndarray
    weights: np.ndarray = None
    intrinsics: tuple = (1.0, 1.0)
    scale_z: float = 1.0

    def __post_init__(self):
        self.landmarks = _as_float_array(self.landmarks, "landmarks")
        if self.landmarks.ndim != 2 or self.landmarks.shape[1] != 2:
            raise ValueError(f"landmarks must have shape (N, 2), got {self.landmarks.shape}")
        n = self.landmarks.shape[0]
        if self.weights is None:
            self.weights = np.ones(n)
        self.weights = _as_float_array(self.weights, "weights", (n,))
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if not np.any(self.weights > 0):
            raise ValueError("weights must not all be zero")
        sx, sy = float(self.intrinsics[0]), float(self.intrinsics[1])
        if not (np.isfinite(sx) and np.isfinite(sy)) or sx <= 0 or sy <= 0:
            raise ValueError("intrinsics must be positive and finite")
        self.intrinsics = (sx, sy)
        self.scale_z = float(self.scale_z)
        if not np.isfinite(self.scale_z) or self.scale_z <= 0:
            raise ValueError("scale_z must be positive and finite")

    @property
    def n(self):
        return self.landmarks.shape[0]


@dataclass
class Pose:
    """A rotation matrix and a 2D image-plane translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = _as_float_array(self.rotation, "rotation", (3, 3))
        self.translation = _as_float_array(self.translation, "translation", (2,))
        err = np.linalg.norm(self.rotation.T @ self.rotation - np.eye(3))
        if err > 1e-8:
            raise ValueError(f"rotation is not orthogonal (deviation {err:.2e})")
        det = np.linalg.det(self.rotation)
        if abs(det - 1.0) > 1e-8:
            raise ValueError(f"rotation must have determinant +1, got {det:.6f}")


@dataclass
class Reconstruction:
    """Solver output: shape coefficients, pose, and certificate data.

    f_lower is the relaxation bound, f_upper the objective of the rounded
    candidate, eta the relative suboptimality gap between them.  weights
    is populated by the robust solver; gnc carries its iteration state.
    """

    coeffs: np.ndarray
    pose: Pose
    f_lower: float
    f_upper: float
    eta: float
    corank: int
    certified: bool
    weights: np.ndarray = None
    gnc: object = field(default=None, repr=False)

    def __post_init__(self):
        self.coeffs = _as_float_array(self.coeffs, "coeffs")
        if self.coeffs.ndim != 1:
            raise ValueError("coeffs must be a vector")
        if np.any(self.coeffs < 0):
            raise ValueError("coeffs must be nonnegative")
        for name in ("f_lower", "f_upper", "eta"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            setattr(self, name, v)
        if self.f_lower > self.f_upper + 1e-6:
            raise ValueError("f_lower exceeds f_upper beyond tolerance")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        self.corank = int(self.corank)
        self.certified = bool(self.certified)
        if self.certified and self.corank != 1:
            raise ValueError("a certified solution must have corank 1")
        if self.weights is not None:
            self.weights = _as_float_array(self.weights, "weights")


def geodesic_rotation_error(r_a, r_b):
    """Angle in degrees of the relative rotation between two matrices."""
    r_a = _as_float_array(r_a, "r_a", (3, 3))
    r_b = _as_float_array(r_b, "r_b", (3, 3))
    c = (np.trace(r_a.T @ r_b) - 1.0) / 2.0
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def coeff_error(c_est, c_true):
    """Euclidean distance between coefficient vectors."""
    c_est = _as_float_array(c_est, "c_est")
    c_true = _as_float_array(c_true, "c_true")
    if c_est.shape != c_true.shape:
        raise ValueError("coefficient vectors must have matching length")
    return float(np.linalg.norm(c_est - c_true))


def shape_error(model, c_est, c_true):
    """Mean per-landmark 3D displacement of the reconstructed shape."""
    c_est = _as_float_array(c_est, "c_est", (model.k,))
    c_true = _as_float_array(c_true, "c_true", (model.k,))
    diff = np.tensordot(c_est - c_true, model.bases, axes=(0, 0))  # (3, N)
    return float(np.linalg.norm(diff, axis=0).mean())
