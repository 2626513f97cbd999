"""Shared helpers for the tests.

Oracles here are deliberately written against the math, not against the
library code paths they check: rotations come from the Rodrigues
formula (the package uses quaternions), objectives from direct loops.
"""

import numpy as np

from shapelift.model import DeformableModel, Observation
from shapelift.preprocess import eliminate_translation


def rotation_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    kx, ky, kz = axis
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + np.sin(angle) * cross + (1 - np.cos(angle)) * (cross @ cross)


def random_rotation(rng):
    return rotation_from_axis_angle(rng.standard_normal(3), rng.uniform(0.0, np.pi))


def x_vector(coeffs, rotation):
    """Stack (c, vec(R)) with the column-major layout the polynomials use."""
    rotation = np.asarray(rotation, dtype=float)
    r = rotation.reshape(9, order="F") if rotation.shape == (3, 3) else rotation
    return np.concatenate([np.asarray(coeffs, dtype=float), r])


def eval_monomials(exponents, x):
    """Evaluate a list of exponent tuples at the point x."""
    x = np.asarray(x, dtype=float)
    return np.array([np.prod(x ** np.asarray(e, dtype=float)) for e in exponents])


def full_objective(model, obs, coeffs, rotation, translation, alpha=0.0):
    """Weighted reprojection objective, computed with an explicit loop."""
    sx, sy = obs.intrinsics
    total = 0.0
    for i in range(obs.n):
        shape_i = sum(coeffs[k] * model.bases[k, :, i] for k in range(model.k))
        proj = rotation @ shape_i
        pred = np.array([sx * proj[0], sy * proj[1]]) + translation
        diff = obs.landmarks[i] - pred
        total += obs.weights[i] * float(diff @ diff)
    return total + alpha * float(np.sum(coeffs))


def make_instance(k, n, rng, noise=0.0, weights=None, coeffs=None,
                  translation=None):
    """Random model/observation pair consistent with a known (c, R, t)."""
    model = DeformableModel(bases=rng.standard_normal((k, 3, n)))
    c = rng.uniform(0.2, 0.9, k) if coeffs is None else np.asarray(coeffs, float)
    rot = random_rotation(rng)
    t = np.zeros(2) if translation is None else np.asarray(translation, float)
    shape = np.tensordot(c, model.bases, axes=(0, 0))
    z = (rot @ shape)[:2].T + t
    if noise:
        z = z + noise * rng.standard_normal((n, 2))
    obs = Observation(landmarks=z, weights=weights)
    return model, obs, c, rot, t


def random_centered(k, n, rng, alpha=0.0, noise=0.0, weights=None):
    """Random centered problem built through the real preprocessing path."""
    model, obs, c, rot, t = make_instance(k, n, rng, noise=noise,
                                          weights=weights)
    return eliminate_translation(model, obs, alpha), c, rot
