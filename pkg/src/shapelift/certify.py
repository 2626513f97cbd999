"""Candidate extraction, projection, and the global-optimality test.

When the relaxation is tight the optimal gram matrix S0 has a
one-dimensional null space spanned by the lifted monomial vector of the
minimizer.  Reading the leading entries of that null vector (after
normalizing the constant entry to 1) recovers the candidate; projecting
it onto the feasible set and comparing its objective against the bound
gives a posteriori optimality evidence:

    corank(S0) == 1  and  eta = (f_hat - gamma)/f_hat <= eta_tol
"""

from dataclasses import dataclass
import numpy as np

from . import poly, relax, sdp
from .model import Pose, Reconstruction
from .preprocess import recover_translation


class ExtractionDegenerateError(RuntimeError):
    """Null vector has (numerically) zero constant entry."""


class ProjectionDegenerateError(RuntimeError):
    """Candidate rotation block is rank deficient."""


@dataclass
class CertifySettings:
    corank_rel_tol: float = 1e-6
    eta_tol: float = 1e-3


@dataclass
class Certificate:
    corank: int
    eta: float
    certified: bool
    eigenvalues: np.ndarray  # smallest few eigenvalues of S0


def extract_candidate(gram, k):
    """Raw (c, r) read off the minimum-eigenvalue eigenvector of S0.

    The gram basis leads with [1, c_1..c_K, r_1..r_9], so after scaling
    the eigenvector to make its constant entry 1 the candidate sits in
    entries 1..K+9.  Raises if the constant entry is too small to divide
    by (happens when the null space does not look like a lifted point).
    """
    vals, vecs = np.linalg.eigh(gram)
    v = vecs[:, 0]
    if abs(v[0]) < 1e-6:
        raise ExtractionDegenerateError(
            f"constant entry of null vector is {v[0]:.2e}"
        )
    v = v / v[0]
    return v[1:k + 1].copy(), v[k + 1:k + 10].copy()


def project_coeffs(c_raw):
    """Clamp coefficients into [0, 1]."""
    return np.clip(np.asarray(c_raw, dtype=float), 0.0, 1.0)


def project_rotation(r_raw):
    """Nearest rotation matrix to the column-major 9-vector r_raw."""
    mat = np.asarray(r_raw, dtype=float).reshape(3, 3, order="F")
    u, s, vt = np.linalg.svd(mat)
    if s.min() <= 1e-12 * max(s.max(), 1.0):
        raise ProjectionDegenerateError(
            f"rotation block is rank deficient (singular values {s})"
        )
    return u @ np.diag([1.0, 1.0, np.linalg.det(u @ vt)]) @ vt


def certify(gamma, f_hat, gram, settings=None):
    """Optimality certificate from the solved gram matrix and bound."""
    settings = settings or CertifySettings()
    vals = np.linalg.eigvalsh(gram)
    thresh = settings.corank_rel_tol * max(vals.max(), 1.0)
    corank = int(np.sum(vals <= thresh))
    eta = max(0.0, (f_hat - gamma) / max(f_hat, 1e-12))
    return Certificate(
        corank=corank,
        eta=eta,
        certified=(corank == 1) and (eta <= settings.eta_tol),
        eigenvalues=vals[:3].copy(),
    )


def solve_centered(prob, variant="reduced2", sdp_settings=None,
                   cert_settings=None, so3_subset12=False):
    """Full certifiable solve of a centered problem.

    Builds the polynomial program, assembles and solves the chosen
    relaxation, rounds the candidate, evaluates the upper bound, and
    attaches the certificate plus the recovered translation.  An
    uncertified outcome is a normal return (certified=False); solver and
    extraction failures raise.
    """
    sdp_settings = sdp_settings or sdp.SdpSettings()
    prog = poly.build_program(prob, so3_subset12=so3_subset12)
    spec = relax.build_basis(prob.k, variant)
    problem = relax.assemble_sdp(prog, spec)
    sol = sdp.solve(problem, sdp_settings)
    gram = sol.gram_blocks[0]
    c_raw, r_raw = extract_candidate(gram, prob.k)
    coeffs = project_coeffs(c_raw)
    rotation = project_rotation(r_raw)
    f_hat = poly.objective_value(prob, coeffs, rotation)
    cert = certify(sol.gamma, f_hat, gram, cert_settings)
    translation = recover_translation(prob, coeffs, rotation)
    return Reconstruction(
        coeffs=coeffs,
        pose=Pose(rotation=rotation, translation=translation),
        f_lower=sol.gamma,
        f_upper=f_hat,
        eta=cert.eta,
        corank=cert.corank,
        certified=cert.certified,
    )
