"""Synthetic leadfields and source-mislocalization perturbations.

Leadfields come from the potential of a current dipole in an infinite
homogeneous conductor, sampled on a spherical sensor layout and
average-referenced. This keeps the properties the filters care about
(full column rank, ill-conditioning for nearby sources) without a
realistic head model.
"""
import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (DegenerateLeadfield, InvalidSpectrum,
                     PerturbationEscapesHead, SourceOnSensor)

HEAD_RADIUS = 0.09  # m
CONDUCTIVITY = 0.33  # S/m
N_SENSORS = 128
MIN_SOURCE_SENSOR_DISTANCE = 1e-3  # m


@dataclass(frozen=True)
class SourceGeometry:
    """Dipole positions (m) and unit orientations, one row per source."""
    positions: np.ndarray
    orientations: np.ndarray
    head_radius: float = HEAD_RADIUS

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        ori = np.asarray(self.orientations, dtype=float).reshape(-1, 3)
        if pos.shape != ori.shape:
            raise ValueError("positions and orientations differ in length")
        if not np.allclose(np.linalg.norm(ori, axis=1), 1.0, rtol=0, atol=1e-10):
            raise ValueError("orientations must be unit vectors")
        if np.any(np.linalg.norm(pos, axis=1) >= self.head_radius):
            raise ValueError("source positions must lie inside the head radius")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orientations", ori)

    def __len__(self):
        return self.positions.shape[0]

    def subset(self, idx):
        return SourceGeometry(self.positions[idx], self.orientations[idx],
                              self.head_radius)


@dataclass(frozen=True)
class SensorArray:
    """Sensor positions on the sphere of radius ``radius``."""
    positions: np.ndarray
    radius: float = HEAD_RADIUS

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if not np.allclose(np.linalg.norm(pos, axis=1), self.radius,
                           rtol=0, atol=1e-9):
            raise ValueError("sensors must lie on the sphere of the given radius")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.shape[0]


def fibonacci_sensors(m=N_SENSORS, radius=HEAD_RADIUS):
    """Near-uniform ``m``-point layout on a sphere (golden-angle spiral)."""
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    rho = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return SensorArray(radius * pts, radius)


def _unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_geometry(n, rng, depth=(0.5, 0.8), head_radius=HEAD_RADIUS):
    """``n`` sources with radii drawn uniformly from ``depth`` (fractions of
    the head radius), uniform directions and uniform random orientations."""
    rng = np.random.default_rng(rng)
    lo, hi = depth
    if not 0 <= lo <= hi < 1:
        raise ValueError("depth must satisfy 0 <= lo <= hi < 1")
    radii = head_radius * rng.uniform(lo, hi, size=n)
    pos = _unit_vectors(rng, n) * radii[:, None]
    return SourceGeometry(pos, _unit_vectors(rng, n), head_radius)


def dipole_potential(positions, moments, sensor_positions, conductivity=CONDUCTIVITY):
    """Raw potential (no re-referencing), shape ``(n_sensors, n_sources)``.

    Each column is ``p . d / (4 pi sigma |d|^3)`` with ``d`` the vector from
    the dipole to the sensor.
    """
    d = sensor_positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(d, axis=2)
    return np.einsum("msk,sk->ms", d, moments) / (4.0 * np.pi * conductivity * dist ** 3)


def spherical_leadfield(geom, sensors, conductivity=CONDUCTIVITY, check_rank=True):
    """Average-referenced dipole leadfield, shape ``(m, n_sources)``.

    Raises
    ------
    SourceOnSensor
        A source lies within 1 mm of a sensor.
    DegenerateLeadfield
        The columns are numerically linearly dependent.
    """
    if conductivity <= 0:
        raise ValueError("conductivity must be positive")
    d = sensors.positions[:, None, :] - geom.positions[None, :, :]
    if len(geom) and np.min(np.linalg.norm(d, axis=2)) < MIN_SOURCE_SENSOR_DISTANCE:
        raise SourceOnSensor("a source lies within 1 mm of a sensor")
    L = dipole_potential(geom.positions, geom.orientations, sensors.positions,
                         conductivity)
    L = L - L.mean(axis=0, keepdims=True)
    if check_rank and len(geom) and linalg.rank_check(L) < len(geom):
        raise DegenerateLeadfield("leadfield columns are linearly dependent")
    return L


def _orthonormal(rng, n, k):
    Qm, Rm = np.linalg.qr(rng.standard_normal((n, k)))
    # sign fix makes the draw Haar-distributed
    return Qm * np.sign(np.diag(Rm))


def synthetic_leadfield(m, l, singular_values, seed=None):
    """``U diag(sigma) V^T`` with random orthonormal ``U`` (m x l) and ``V``."""
    s = np.asarray(singular_values, dtype=float)
    if s.shape != (l,) or l > m:
        raise InvalidSpectrum(f"need {l} singular values with l <= m={m}")
    if np.any(s <= 0) or np.any(np.diff(s) > 0):
        raise InvalidSpectrum("singular values must be positive and non-increasing")
    rng = np.random.default_rng(seed)
    U = _orthonormal(rng, m, l)
    V = _orthonormal(rng, l, l)
    return (U * s) @ V.T


def _rotate(vectors, axes, angles):
    # Rodrigues' rotation formula, row-wise
    cos, sin = np.cos(angles)[:, None], np.sin(angles)[:, None]
    cross = np.cross(axes, vectors)
    dot = np.sum(axes * vectors, axis=1, keepdims=True)
    return vectors * cos + cross * sin + axes * dot * (1.0 - cos)


def perturb_geometry(geom, max_shift=0.005, max_angle=np.pi / 32, seed=None):
    """Shift every source by U(-max_shift, max_shift) per axis and rotate its
    orientation by U(0, max_angle) about a random axis."""
    if max_shift < 0 or max_angle < 0:
        raise ValueError("perturbation bounds must be non-negative")
    rng = np.random.default_rng(seed)
    n = len(geom)
    shift = rng.uniform(-max_shift, max_shift, size=(n, 3))
    axes = _unit_vectors(rng, n)
    angles = rng.uniform(0.0, max_angle, size=n)
    pos = geom.positions + shift
    if np.any(np.linalg.norm(pos, axis=1) >= geom.head_radius):
        raise PerturbationEscapesHead("a shifted source left the head")
    ori = _rotate(geom.orientations, axes, angles)
    ori /= np.linalg.norm(ori, axis=1, keepdims=True)
    return SourceGeometry(pos, ori, geom.head_radius)


def geometry_to_dict(geom, sensors=None):
    out = {
        "positions": geom.positions.tolist(),
        "orientations": geom.orientations.tolist(),
        "head_radius": geom.head_radius,
    }
    if sensors is not None:
        out["sensors"] = sensors.positions.tolist()
    return out


def geometry_from_dict(d):
    """Inverse of :func:`geometry_to_dict`; returns ``(geometry, sensors)``,
    ``sensors`` being ``None`` when absent."""
    radius = d.get("head_radius", HEAD_RADIUS)
    geom = SourceGeometry(d["positions"], d["orientations"], radius)
    sensors = SensorArray(d["sensors"], radius) if "sensors" in d else None
    return geom, sensors


def save_geometry(path, geom, sensors=None):
    with open(path, "w") as f:
        json.dump(geometry_to_dict(geom, sensors), f, indent=2)


def load_geometry(path):
    with open(path) as f:
        return geometry_from_dict(json.load(f))
