"""Synthetic experiment harness: instance generation, trial loops,
and file formats.

Generation protocol: basis entries are i.i.d. standard normal,
coefficients uniform on [0, 1] (optionally only a leading support is
nonzero), the rotation is Haar-uniform via a normalized Gaussian
quaternion, the translation is zero, and noise is added per component.
Outliers replace landmarks with uniform draws from the disk whose
radius is the clean image extent, so after normalization they stay
inside the unit circle.  A config's seed fully determines the instance.
"""

from dataclasses import dataclass, replace, field
import csv
import json
import time
import numpy as np

from .certify import CertifySettings, solve_centered
from .model import (DeformableModel, Observation, Pose, Reconstruction,
                    coeff_error, geodesic_rotation_error, shape_error)
from .preprocess import denormalize, eliminate_translation, normalize
from .robust import GncSettings, shape_sharp
from .sdp import SdpSettings


class SchemaError(ValueError):
    """A data file does not match its documented layout."""


@dataclass
class SynthConfig:
    k: int = 5
    n: int = 100
    noise: float = 0.01
    outlier_rate: float = 0.0
    sparse_support: int = 0  # 0 = dense coefficients
    alpha: float = 0.01
    seed: int = 0
    intrinsics: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.k < 1 or self.n < 4:
            raise ValueError("k must be positive and n at least 4")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ValueError("outlier_rate must be in [0, 1)")
        if self.sparse_support < 0 or self.sparse_support > self.k:
            raise ValueError("sparse_support must be in 0..k")


@dataclass
class GroundTruth:
    coeffs: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    outlier_mask: np.ndarray


@dataclass
class TrialRecord:
    seed: int
    certified: bool
    corank: int
    eta: float
    coeff_err: float
    rot_err_deg: float
    shape_err: float
    solve_time: float
    gnc_iters: int
    outlier_precision: float = float("nan")
    outlier_recall: float = float("nan")
    outlier_f1: float = float("nan")


AGGREGATE_COLUMNS = ("solve_time", "corank", "eta", "coeff_err",
                     "rot_err_deg", "gnc_iters")


def rotation_from_quaternion(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def generate(cfg):
    """Deterministic synthetic instance for a config.

    Draw order is fixed (bases, coefficients, quaternion, noise,
    outlier indices, outlier positions) so a seed pins the instance.
    """
    rng = np.random.default_rng(cfg.seed)
    bases = rng.standard_normal((cfg.k, 3, cfg.n))
    coeffs = rng.uniform(0.0, 1.0, cfg.k)
    if cfg.sparse_support:
        coeffs[cfg.sparse_support:] = 0.0
    rotation = rotation_from_quaternion(rng.standard_normal(4))
    shape = np.tensordot(coeffs, bases, axes=(0, 0))
    clean = (rotation @ shape)[:2].T * np.array(cfg.intrinsics)
    landmarks = clean + cfg.noise * rng.standard_normal((cfg.n, 2))
    mask = np.zeros(cfg.n, dtype=bool)
    n_out = int(round(cfg.outlier_rate * cfg.n))
    if n_out:
        idx = rng.choice(cfg.n, size=n_out, replace=False)
        radius = max(1.0, float(np.linalg.norm(clean, axis=1).max()))
        rad = radius * np.sqrt(rng.uniform(0.0, 1.0, n_out))
        ang = rng.uniform(0.0, 2.0 * np.pi, n_out)
        landmarks[idx] = np.stack(
            [rad * np.cos(ang), rad * np.sin(ang)], axis=1
        )
        mask[idx] = True
    model = DeformableModel(bases=bases)
    obs = Observation(landmarks=landmarks, intrinsics=cfg.intrinsics)
    truth = GroundTruth(
        coeffs=coeffs,
        rotation=rotation,
        translation=np.zeros(2),
        outlier_mask=mask,
    )
    return model, obs, truth


def reconstruct(model, obs, alpha=0.01, variant="reduced2", robust=False,
                cbar=None, sdp_settings=None, cert_settings=None,
                gnc_settings=None, max_rescale=3):
    """Normalize, solve (plain or robust), and map back to input units.

    cbar is interpreted in input units (it is divided by the landmark
    normalization factor before the robust loop); an explicit
    gnc_settings overrides it and is taken in normalized units.

    Unit-disk landmark scaling does not by itself keep the true
    coefficients of the normalized problem below the bound c_k <= 1:
    projection only shrinks, so a basis whose longest column leaves the
    camera plane inflates the coefficient that basis needs.  When the
    solved coefficients press the bound, the landmarks are halved (still
    inside the unit disk) and the solve is repeated; alpha and cbar are
    shrunk with them so the rescaled problem is an exact
    reparameterization, which also transfers the certificate.
    """
    norm_model, norm_obs = normalize(model, obs)
    for attempt in range(max_rescale + 1):
        if robust:
            settings = gnc_settings
            if settings is None:
                if cbar is None:
                    raise ValueError("robust reconstruction needs cbar")
                settings = GncSettings(
                    cbar=cbar / norm_obs.scale_z,
                    alpha=alpha / 2.0 ** attempt,
                )
            else:
                settings = replace(
                    settings,
                    cbar=settings.cbar / 2.0 ** attempt,
                    alpha=settings.alpha / 2.0 ** attempt,
                )
            recon = shape_sharp(norm_model, norm_obs, settings,
                                variant=variant, sdp_settings=sdp_settings,
                                cert_settings=cert_settings)
        else:
            prob = eliminate_translation(
                norm_model, norm_obs, alpha / 2.0 ** attempt
            )
            recon = solve_centered(prob, variant=variant,
                                   sdp_settings=sdp_settings,
                                   cert_settings=cert_settings)
        if attempt == max_rescale or recon.coeffs.max(initial=0.0) < 0.999:
            break
        norm_obs = Observation(
            landmarks=norm_obs.landmarks / 2.0,
            weights=norm_obs.weights,
            intrinsics=(1.0, 1.0),
            scale_z=norm_obs.scale_z * 2.0,
        )
    return denormalize(recon, norm_obs.scale_z, norm_model.scale_b,
                       obs.intrinsics)


def run_trials(cfg, variant="reduced2", robust=False, trials=1, cbar=None,
               sdp_settings=None, cert_settings=None):
    """Seeded trial loop; returns per-trial records and the aggregates.

    Trial i uses seed cfg.seed + i.  For robust runs with no explicit
    cbar, the cutoff defaults to 5x the expected inlier residual norm,
    5 * noise * sqrt(2).
    """
    records = []
    for i in range(trials):
        cfg_i = replace(cfg, seed=cfg.seed + i)
        model, obs, truth = generate(cfg_i)
        trial_cbar = cbar
        if robust and trial_cbar is None:
            trial_cbar = 5.0 * np.sqrt(2.0) * max(cfg.noise, 1e-6)
        t0 = time.perf_counter()
        recon = reconstruct(
            model, obs, alpha=cfg_i.alpha, variant=variant, robust=robust,
            cbar=trial_cbar, sdp_settings=sdp_settings,
            cert_settings=cert_settings,
        )
        wall = time.perf_counter() - t0
        rec = TrialRecord(
            seed=cfg_i.seed,
            certified=recon.certified,
            corank=recon.corank,
            eta=recon.eta,
            coeff_err=coeff_error(recon.coeffs, truth.coeffs),
            rot_err_deg=geodesic_rotation_error(
                recon.pose.rotation, truth.rotation
            ),
            shape_err=shape_error(model, recon.coeffs, truth.coeffs),
            solve_time=wall,
            gnc_iters=recon.gnc.tau if recon.gnc is not None else 0,
        )
        if robust and truth.outlier_mask.any():
            pred = recon.weights < 0.5
            actual = truth.outlier_mask
            tp = float(np.sum(pred & actual))
            fp = float(np.sum(pred & ~actual))
            fn = float(np.sum(~pred & actual))
            prec = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            rec.outlier_precision = prec
            rec.outlier_recall = recall
            rec.outlier_f1 = (2 * prec * recall / (prec + recall)
                              if prec + recall else 0.0)
        records.append(rec)
    return records, aggregate(records)


def aggregate(records):
    """Mean and median of the benchmark statistics."""
    out = {"mean": {}, "median": {}}
    for col in AGGREGATE_COLUMNS:
        vals = np.array([float(getattr(r, col)) for r in records])
        out["mean"][col] = float(vals.mean())
        out["median"][col] = float(np.median(vals))
    return out


def write_trials_csv(records, agg, path):
    """Per-trial rows followed by mean and median rows."""
    cols = ["seed", "certified", "corank", "eta", "coeff_err",
            "rot_err_deg", "shape_err", "solve_time", "gnc_iters",
            "outlier_precision", "outlier_recall", "outlier_f1"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + cols)
        for r in records:
            writer.writerow(["trial"] + [getattr(r, c) for c in cols])
        for stat in ("mean", "median"):
            vals = {c: agg[stat][c] for c in AGGREGATE_COLUMNS}
            writer.writerow(
                [stat, ""] + [vals.get(c, "") for c in cols[1:]]
            )


def _expect(cond, msg):
    if not cond:
        raise SchemaError(msg)


def save_model(model, path):
    """Model file: {"k": K, "n": N, "bases": [K][N][3] floats}."""
    data = {
        "k": model.k,
        "n": model.n,
        "bases": model.bases.transpose(0, 2, 1).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_model(path):
    with open(path) as fh:
        data = json.load(fh)
    for key in ("k", "n", "bases"):
        _expect(key in data, f"{path}: missing field '{key}'")
    k, n = data["k"], data["n"]
    _expect(isinstance(k, int) and k >= 1, f"{path}: k must be a positive int")
    _expect(isinstance(n, int) and n >= 1, f"{path}: n must be a positive int")
    bases = data["bases"]
    _expect(isinstance(bases, list) and len(bases) == k,
            f"{path}: bases must be a list of length k={k}")
    arr = np.zeros((k, 3, n))
    for ki, basis in enumerate(bases):
        _expect(isinstance(basis, list) and len(basis) == n,
                f"{path}: bases[{ki}] must have length n={n}")
        for ni, point in enumerate(basis):
            _expect(isinstance(point, list) and len(point) == 3,
                    f"{path}: bases[{ki}][{ni}] must have length 3")
            arr[ki, :, ni] = point
    try:
        return DeformableModel(bases=arr)
    except ValueError as e:
        raise SchemaError(f"{path}: {e}") from e


def save_observation(obs, path):
    """Observation file: {"landmarks": [N][2], "weights"?: [N],
    "camera": {"sx": float, "sy": float}}."""
    data = {
        "landmarks": obs.landmarks.tolist(),
        "camera": {"sx": obs.intrinsics[0], "sy": obs.intrinsics[1]},
    }
    if not np.all(obs.weights == 1.0):
        data["weights"] = obs.weights.tolist()
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_observation(path):
    with open(path) as fh:
        data = json.load(fh)
    _expect("landmarks" in data, f"{path}: missing field 'landmarks'")
    lm = data["landmarks"]
    _expect(isinstance(lm, list) and lm, f"{path}: landmarks must be a "
            "nonempty list")
    for i, p in enumerate(lm):
        _expect(isinstance(p, list) and len(p) == 2,
                f"{path}: landmarks[{i}] must have length 2")
    cam = data.get("camera", {"sx": 1.0, "sy": 1.0})
    _expect(isinstance(cam, dict) and "sx" in cam and "sy" in cam,
            f"{path}: camera must carry sx and sy")
    weights = data.get("weights")
    if weights is not None:
        _expect(isinstance(weights, list) and len(weights) == len(lm),
                f"{path}: weights must match landmark count {len(lm)}")
    try:
        return Observation(
            landmarks=np.array(lm, dtype=float),
            weights=None if weights is None else np.array(weights),
            intrinsics=(cam["sx"], cam["sy"]),
        )
    except ValueError as e:
        raise SchemaError(f"{path}: {e}") from e


def save_result(recon, path):
    """Result file; R is stored row-major."""
    data = {
        "c": recon.coeffs.tolist(),
        "R": recon.pose.rotation.reshape(-1).tolist(),
        "t": recon.pose.translation.tolist(),
        "gamma": recon.f_lower,
        "f_hat": recon.f_upper,
        "eta": recon.eta,
        "corank": recon.corank,
        "certified": recon.certified,
    }
    if recon.weights is not None:
        data["weights"] = recon.weights.tolist()
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_result(path):
    with open(path) as fh:
        data = json.load(fh)
    for key in ("c", "R", "t", "gamma", "f_hat", "eta", "corank",
                "certified"):
        _expect(key in data, f"{path}: missing field '{key}'")
    _expect(isinstance(data["R"], list) and len(data["R"]) == 9,
            f"{path}: R must be a row-major list of 9 floats")
    weights = data.get("weights")
    try:
        return Reconstruction(
            coeffs=np.array(data["c"], dtype=float),
            pose=Pose(
                rotation=np.array(data["R"], dtype=float).reshape(3, 3),
                translation=np.array(data["t"], dtype=float),
            ),
            f_lower=data["gamma"],
            f_upper=data["f_hat"],
            eta=data["eta"],
            corank=data["corank"],
            certified=data["certified"],
            weights=None if weights is None else np.array(weights),
        )
    except ValueError as e:
        raise SchemaError(f"{path}: {e}") from e
