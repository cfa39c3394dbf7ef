"""Pinhole cameras, projections, and the camera ring.

Conventions
-----------
World frame is right-handed with +z up. The subject is centered at the origin
and normalized so its bounding sphere has radius <= 1 (the data pipeline
enforces this).

A camera is ``CameraView(rotation R, translation tau, focal_length f)``. A
world point ``p`` maps to camera coordinates ``c = R @ p + tau`` with the
camera looking along +z, and to image coordinates

    uv = f * (c_x / c_z, c_y / c_z)        (perspective)
    uv = R[:2] @ p                         (orthographic)

uv units are meters on the virtual image plane; nothing is ever discretized to
pixels. The orthographic map deliberately ignores translation and focal
scaling: applying an orthonormal 2x3 matrix to i.i.d. standard normal vectors
leaves the per-component marginals standard normal, which is what the noise
projection relies on.

Ring cameras look at the origin from distance d, so tau = (0, 0, d) and the
camera-frame depth of any point in the unit ball stays within d +- 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadRing, ConventionViolation, NonPositiveDepth

TWO_PI = 2.0 * math.pi

# Elevation used when nothing else is specified; keeps cameras slightly above
# the horizontal plane, well away from the +-pi/2 look-at degeneracy.
DEFAULT_ELEVATION = 0.2


def _as_points(x, name: str = "positions") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim < 1 or a.shape[-1] != 3:
        raise ConventionViolation(f"{name} must have shape (..., 3), got {a.shape}")
    if not np.isfinite(a).all():
        raise ConventionViolation(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class CameraView:
    """Pinhole camera: world-to-camera rotation, translation, focal length."""

    rotation: np.ndarray
    translation: np.ndarray
    focal_length: float

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape != (3, 3):
            raise ConventionViolation(f"rotation must be 3x3, got {R.shape}")
        if t.shape != (3,):
            raise ConventionViolation(f"translation must be a 3-vector, got {t.shape}")
        if not (np.isfinite(R).all() and np.isfinite(t).all()):
            raise ConventionViolation("camera parameters must be finite")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise ConventionViolation("rotation is not orthonormal within 1e-9")
        if np.linalg.det(R) < 0.0:
            raise ConventionViolation("rotation must be right-handed (det = +1)")
        if not (float(self.focal_length) > 0.0 and math.isfinite(self.focal_length)):
            raise ConventionViolation("focal_length must be positive and finite")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "focal_length", float(self.focal_length))
        R.setflags(write=False)
        t.setflags(write=False)

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T tau)."""
        return -self.rotation.T @ self.translation

    @property
    def distance(self) -> float:
        """Distance from the camera center to the world origin."""
        return float(np.linalg.norm(self.position))


def camera_from_angles(azimuth: float, elevation: float, distance: float,
                       focal: float | None = None) -> CameraView:
    """Build a look-at camera on the viewing sphere.

    The camera sits at distance * (cos(el)cos(az), cos(el)sin(az), sin(el)),
    its forward axis points at the origin, and its up axis is world +z
    orthogonalized against forward. Degenerate at elevation = +-pi/2 where
    up and forward align.
    """
    if focal is None:
        focal = distance
    ce, se = math.cos(elevation), math.sin(elevation)
    if abs(ce) < 1e-9:
        raise BadRing("elevation = +-pi/2 makes the look-at up axis degenerate")
    position = distance * np.array(
        [ce * math.cos(azimuth), ce * math.sin(azimuth), se])
    forward = -position / np.linalg.norm(position)
    up = np.array([0.0, 0.0, 1.0]) - forward[2] * forward
    up /= np.linalg.norm(up)
    right = np.cross(up, forward)
    R = np.stack([right, up, forward])
    # -R @ position equals (0, 0, distance) analytically; set it exactly so the
    # origin projects to the image center without round-off.
    return CameraView(R, np.array([0.0, 0.0, float(distance)]), focal)


def make_camera_ring(n_views: int, elevation: float = DEFAULT_ELEVATION,
                     distance: float = 7.0, focal: float | None = None,
                     arc: float = TWO_PI) -> list[CameraView]:
    """Cameras at azimuths k * arc / n_views, shared elevation and distance.

    ``arc`` defaults to a full circle (even spread); e.g. two views separated
    by 120 degrees use arc = 4*pi/3. focal defaults to the camera distance,
    the convention under which the orthographic/perspective gap bound holds.
    """
    if n_views < 2:
        raise BadRing(f"a ring needs at least 2 views, got {n_views}")
    if not distance > 1.0:
        raise BadRing("camera distance must exceed the unit bounding sphere")
    if focal is not None and not focal > 0.0:
        raise BadRing("focal length must be positive")
    if not (0.0 < arc <= TWO_PI):
        raise BadRing(f"arc must lie in (0, 2*pi], got {arc}")
    return [camera_from_angles(k * arc / n_views, elevation, distance, focal)
            for k in range(n_views)]


def perspective_project(positions, view: CameraView) -> np.ndarray:
    """Pinhole projection uv = f * (c_x/c_z, c_y/c_z), c = R p + tau.

    Accepts any (..., 3) array (a Motion3D is (L, J, 3)). Raises
    NonPositiveDepth if any point lies at or behind the camera plane.
    """
    p = _as_points(positions)
    c = p @ view.rotation.T + view.translation
    z = c[..., 2]
    if z.size and z.min() <= 0.0:
        raise NonPositiveDepth(
            f"{int((z <= 0).sum())} point(s) at or behind the camera plane "
            f"(min depth {z.min():.3g})")
    return view.focal_length * c[..., :2] / z[..., None]


def perspective_jacobian(positions, view: CameraView) -> np.ndarray:
    """d uv / d p for each point: (..., 2, 3).

    With c = R p + tau, the chain rule gives
    J = f/c_z * (R[:2] - outer(c_xy / c_z, R[2])).
    """
    p = _as_points(positions)
    c = p @ view.rotation.T + view.translation
    z = c[..., 2]
    if z.size and z.min() <= 0.0:
        raise NonPositiveDepth("Jacobian undefined at or behind the camera plane")
    R = view.rotation
    scale = (view.focal_length / z)[..., None, None]
    return scale * (R[:2] - (c[..., :2, None] / z[..., None, None]) * R[2])


def orthographic_project(positions, view: CameraView) -> np.ndarray:
    """Rotation-only projection R[:2] @ p; translation and focal ignored."""
    p = _as_points(positions)
    return p @ view.rotation[:2].T


def project_noise(eps3d, views: list[CameraView]) -> list[np.ndarray]:
    """Orthographically project one 3D noise tensor into every view.

    If eps3d is i.i.d. standard normal, each returned view is i.i.d. standard
    2D normal in marginal (rows of R are orthonormal), while noises stay
    correlated across views because they share the one 3D draw.
    """
    eps = _as_points(eps3d, "eps3d")
    return [eps @ v.rotation[:2].T for v in views]


def _lookat_distance(view: CameraView) -> float:
    """Distance d for a camera that satisfies the look-at convention tau = (0,0,d)."""
    d = view.distance
    if np.abs(view.translation - np.array([0.0, 0.0, d])).max() > 1e-9 * max(1.0, d):
        raise ConventionViolation("camera does not look at the world origin")
    return d


def orthographic_perspective_gap(positions, view: CameraView) -> float:
    """Max-norm gap between orthographic and perspective projections.

    For a look-at camera at distance d > 1 with focal = d, the perspective
    image is R_xy p * d/(d + R_z p), so the deviation from R_xy p carries a
    factor |R_z p| / (d + R_z p). For points in the unit sphere
    (||p||_2 <= 1, hence |row . p| <= 1 for every rotation row) the gap is
    therefore at most 1/(d-1). Cube-bounded points with ||p||_inf <= 1 but
    ||p||_2 > 1 can exceed that bound near corners.
    """
    p = _as_points(positions)
    if p.size and np.abs(p).max() > 1.0:
        raise ConventionViolation("points must satisfy ||p||_inf <= 1")
    d = _lookat_distance(view)
    if not d > 1.0:
        raise ConventionViolation("camera distance must exceed 1")
    if abs(view.focal_length - d) > 1e-9 * d:
        raise ConventionViolation(
            f"gap convention requires focal = distance, got f={view.focal_length} d={d}")
    gap = orthographic_project(p, view) - perspective_project(p, view)
    return float(np.abs(gap).max()) if gap.size else 0.0
