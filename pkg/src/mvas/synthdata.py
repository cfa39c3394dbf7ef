"""Procedural 3D skeleton motions and their projected 2D training datasets.

Motions come from forward kinematics over a joint tree: every joint sits at
its parent plus bone_length times a unit direction, and the directions are
animated by sinusoids on their spherical angles. Bone lengths are therefore
exact at every frame by construction, and the ground truth is analytic.

Four families give the dataset distinct modes: walk-like (antiphase leg and
arm swings), swing-like (large slow arm arcs over a quiet lower body),
jump-like (synchronized vertical bounce with leg compression), and
orbiting-object (a gently swaying body plus a free auxiliary joint circling
it). "mixed" draws one of the first three per record, which is what makes
recall a meaningful metric: a sampler that collapses onto one family shows it.

A dataset record is the perspective projection of a fresh motion into one
random-yaw camera at fixed pitch and distance, stored as little-endian float32
alongside an all-ones confidence mask. The ground-truth 3D motions ride in a
separate sidecar file so evaluation can reach them while training never sees
them. All randomness derives from the manifest seed: record i consumes streams
seeded [seed, i, 0] (motion) and [seed, i, 1] (camera), so regeneration is
bit-identical and any record's camera can be re-derived without the file.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, BadFamily, CorruptChecksum, ShapeMismatch, VersionMismatch
from .geometry import camera_from_angles, perspective_project

TWO_PI = 2.0 * math.pi

DATA_MAGIC = b"MVASDATA"
DATA_VERSION = 1

FAMILIES = ("walk-like", "swing-like", "jump-like", "orbiting-object", "mixed")
_MIXABLE = ("walk-like", "swing-like", "jump-like")


# --- skeleton ----------------------------------------------------------------

@dataclass(frozen=True)
class Skeleton:
    """Joint tree. aux joints are free-floating (no parent, no bone)."""

    names: tuple
    parents: tuple
    bone_lengths: tuple
    aux: tuple = ()

    def __post_init__(self):
        n = len(self.names)
        if not (len(self.parents) == len(self.bone_lengths) == n):
            raise ShapeMismatch("names, parents, bone_lengths must align")
        if len(set(self.names)) != n:
            raise BadConfig("joint names must be unique")
        if self.parents[0] != -1:
            raise BadConfig("joint 0 must be the root (parent -1)")
        for j in range(1, n):
            if j in self.aux:
                if self.parents[j] != -1:
                    raise BadConfig(f"auxiliary joint {j} must have parent -1")
            elif not 0 <= self.parents[j] < j:
                raise BadConfig("parents must form a tree in topological order")
            elif not self.bone_lengths[j] > 0:
                raise BadConfig(f"bone length of joint {j} must be > 0")

    @property
    def J(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


_HUMANOID = (
    # name        parent        bone length (m)
    ("pelvis",    None,         0.0),
    ("spine",     "pelvis",     0.20),
    ("chest",     "spine",      0.20),
    ("head",      "chest",      0.25),
    ("l_shoulder", "chest",     0.20),
    ("l_elbow",   "l_shoulder", 0.28),
    ("l_wrist",   "l_elbow",    0.26),
    ("r_shoulder", "chest",     0.20),
    ("r_elbow",   "r_shoulder", 0.28),
    ("r_wrist",   "r_elbow",    0.26),
    ("l_hip",     "pelvis",     0.11),
    ("l_knee",    "l_hip",      0.38),
    ("l_ankle",   "l_knee",     0.38),
    ("r_hip",     "pelvis",     0.11),
    ("r_knee",    "r_hip",      0.38),
    ("r_ankle",   "r_knee",     0.38),
)


def default_skeleton(with_object: bool = False) -> Skeleton:
    """16-joint humanoid; with_object adds a 17th free joint (e.g., a ball)."""
    names = [row[0] for row in _HUMANOID]
    parents = [-1] + [names.index(row[1]) for row in _HUMANOID[1:]]
    bones = [row[2] for row in _HUMANOID]
    aux = ()
    if with_object:
        names.append("object")
        parents.append(-1)
        bones.append(0.0)
        aux = (16,)
    return Skeleton(tuple(names), tuple(parents), tuple(bones), aux)


# --- motion families ---------------------------------------------------------

@dataclass(frozen=True)
class MotionFamilyParams:
    family: str
    amplitude_range: tuple = (0.7, 1.3)
    frequency_range: tuple = (0.8, 1.6)   # Hz
    length_range: tuple = (32, 128)       # frames, inclusive
    fps: int = 20

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BadFamily(f"unknown family {self.family!r}; choose from {FAMILIES}")
        for name, (lo, hi) in (("amplitude_range", self.amplitude_range),
                               ("frequency_range", self.frequency_range),
                               ("length_range", self.length_range)):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise BadConfig(f"{name} must be a finite (lo, hi) with lo <= hi")
        if self.length_range[0] < 8:
            raise BadConfig("length_range minimum is 8 frames")
        if self.fps <= 0:
            raise BadConfig("fps must be positive")


_DEFAULT_RANGES = {
    "walk-like":       dict(amplitude_range=(0.7, 1.3), frequency_range=(0.8, 1.6)),
    "swing-like":      dict(amplitude_range=(0.8, 1.5), frequency_range=(0.3, 0.8)),
    "jump-like":       dict(amplitude_range=(0.7, 1.2), frequency_range=(0.5, 1.0)),
    "orbiting-object": dict(amplitude_range=(0.6, 1.2), frequency_range=(0.4, 1.0)),
    "mixed":           dict(),
}


def family_params(family: str, **overrides) -> MotionFamilyParams:
    if family not in FAMILIES:
        raise BadFamily(f"unknown family {family!r}; choose from {FAMILIES}")
    kw = dict(_DEFAULT_RANGES[family])
    kw.update(overrides)
    return MotionFamilyParams(family=family, **kw)


# Rest direction of each bone as spherical angles (polar from +z, azimuth).
_REST = {
    "spine": (0.0, 0.0), "chest": (0.0, 0.0), "head": (0.0, 0.0),
    "l_shoulder": (math.pi / 2, math.pi / 2), "r_shoulder": (math.pi / 2, -math.pi / 2),
    "l_elbow": (math.pi, 0.0), "l_wrist": (math.pi, 0.0),
    "r_elbow": (math.pi, 0.0), "r_wrist": (math.pi, 0.0),
    "l_hip": (math.pi / 2, math.pi / 2), "r_hip": (math.pi / 2, -math.pi / 2),
    "l_knee": (math.pi, 0.0), "l_ankle": (math.pi, 0.0),
    "r_knee": (math.pi, 0.0), "r_ankle": (math.pi, 0.0),
}

_PI = math.pi
# Per family: joint -> (polar amplitude, polar phase, azim amplitude, azim phase),
# all scaled by the motion's global amplitude draw.
_PATTERNS = {
    "walk-like": {
        "l_hip": (0.45, 0.0, 0.05, 0.0), "r_hip": (0.45, _PI, 0.05, _PI),
        "l_knee": (0.35, 0.9, 0.0, 0.0), "r_knee": (0.35, _PI + 0.9, 0.0, 0.0),
        "l_ankle": (0.25, 1.6, 0.0, 0.0), "r_ankle": (0.25, _PI + 1.6, 0.0, 0.0),
        "l_elbow": (0.40, _PI, 0.0, 0.0), "r_elbow": (0.40, 0.0, 0.0, 0.0),
        "l_wrist": (0.30, _PI + 0.6, 0.0, 0.0), "r_wrist": (0.30, 0.6, 0.0, 0.0),
        "spine": (0.04, 0.0, 0.06, 0.0), "chest": (0.04, 1.6, 0.06, 1.6),
        "head": (0.03, 0.0, 0.03, 0.0),
    },
    "swing-like": {
        "l_elbow": (0.90, 0.0, 0.15, 0.0), "r_elbow": (0.90, 0.0, 0.15, _PI),
        "l_wrist": (0.60, 0.7, 0.10, 0.0), "r_wrist": (0.60, 0.7, 0.10, _PI),
        "spine": (0.12, 0.0, 0.05, 0.0), "chest": (0.10, 0.3, 0.05, 0.3),
        "l_hip": (0.05, 0.0, 0.0, 0.0), "r_hip": (0.05, _PI, 0.0, 0.0),
        "l_knee": (0.05, 0.5, 0.0, 0.0), "r_knee": (0.05, 0.5, 0.0, 0.0),
    },
    "jump-like": {
        "l_knee": (0.55, 0.0, 0.0, 0.0), "r_knee": (0.55, 0.0, 0.0, 0.0),
        "l_hip": (0.35, _PI, 0.0, 0.0), "r_hip": (0.35, _PI, 0.0, 0.0),
        "l_ankle": (0.30, 0.4, 0.0, 0.0), "r_ankle": (0.30, 0.4, 0.0, 0.0),
        "l_elbow": (0.70, 0.5 * _PI, 0.10, 0.0), "r_elbow": (0.70, 0.5 * _PI, 0.10, 0.0),
        "l_wrist": (0.50, 0.5 * _PI + 0.5, 0.0, 0.0),
        "r_wrist": (0.50, 0.5 * _PI + 0.5, 0.0, 0.0),
        "spine": (0.08, _PI, 0.0, 0.0),
    },
    "orbiting-object": {
        "spine": (0.08, 0.0, 0.08, _PI / 3), "chest": (0.06, 0.4, 0.06, 0.4),
        "l_elbow": (0.15, 0.0, 0.0, 0.0), "r_elbow": (0.15, _PI, 0.0, 0.0),
        "l_hip": (0.05, 0.0, 0.0, 0.0), "r_hip": (0.05, _PI, 0.0, 0.0),
    },
}

# Root trajectory recipe per family: (bob amplitude, bob frequency multiple,
# lateral sway amplitude). Vertical bob runs at a multiple of the gait
# frequency (two footfalls per walk cycle).
_ROOT = {
    "walk-like": (0.03, 2.0, 0.03),
    "swing-like": (0.01, 1.0, 0.04),
    "jump-like": (0.12, 1.0, 0.005),
    "orbiting-object": (0.01, 1.0, 0.02),
}


def sample_motion3d(skel: Skeleton, fam: MotionFamilyParams, seed) -> np.ndarray:
    """One ground-truth motion: (L, J, 3), centered, inside the unit sphere."""
    rng = np.random.default_rng(seed)
    family = fam.family
    if family == "mixed":
        family = _MIXABLE[rng.integers(len(_MIXABLE))]
        base = family_params(family, length_range=fam.length_range, fps=fam.fps)
        amp_range, freq_range = base.amplitude_range, base.frequency_range
    else:
        amp_range, freq_range = fam.amplitude_range, fam.frequency_range
    if family == "orbiting-object" and not skel.aux:
        raise BadFamily("orbiting-object needs a skeleton with an auxiliary joint")

    L = int(rng.integers(fam.length_range[0], fam.length_range[1] + 1))
    A = rng.uniform(*amp_range)
    freq = rng.uniform(*freq_range)
    psi = rng.uniform(0.0, TWO_PI)
    t = np.arange(L) / fam.fps
    wave = TWO_PI * freq * t

    pattern = _PATTERNS[family]
    pos = np.zeros((L, skel.J, 3))
    bob_amp, bob_mult, sway_amp = _ROOT[family]
    pos[:, 0, 1] = A * sway_amp * np.sin(wave + psi)
    pos[:, 0, 2] = A * bob_amp * np.sin(bob_mult * (wave + psi))

    for j in range(1, skel.J):
        if j in skel.aux:
            continue
        name = skel.names[j]
        rest_polar, rest_azim = _REST[name]
        pamp, pph, aamp, aph = pattern.get(name, (0.0, 0.0, 0.0, 0.0))
        polar = rest_polar + A * pamp * np.sin(wave + psi + pph)
        azim = rest_azim + A * aamp * np.sin(wave + psi + aph)
        direction = np.stack([np.sin(polar) * np.cos(azim),
                              np.sin(polar) * np.sin(azim),
                              np.cos(polar)], axis=-1)
        pos[:, j] = pos[:, skel.parents[j]] + skel.bone_lengths[j] * direction

    for j in skel.aux:
        radius = A * rng.uniform(0.20, 0.35)
        rate = freq * rng.uniform(0.5, 0.9)
        tilt = rng.uniform(0.0, 0.6)
        phase0 = rng.uniform(0.0, TWO_PI)
        ang = TWO_PI * rate * t + phase0
        circle = np.stack([radius * np.cos(ang),
                           radius * np.sin(ang) * math.cos(tilt),
                           radius * np.sin(ang) * math.sin(tilt)], axis=-1)
        pos[:, j] = pos[:, skel.index("chest")] + circle

    body = [j for j in range(skel.J) if j not in skel.aux]
    pos -= pos[:, body].mean(axis=(0, 1))
    radius = np.linalg.norm(pos, axis=-1).max()
    if radius > 1.0:
        raise BadFamily(
            f"family parameters push the motion to radius {radius:.3f} > 1; "
            "reduce amplitudes to stay inside the unit bounding sphere")
    return pos


# --- dataset -----------------------------------------------------------------

@dataclass(frozen=True)
class CameraDistParams:
    pitch: float = 0.2
    distance: float = 7.0
    focal: float | None = None
    yaw_low: float = 0.0
    yaw_high: float = TWO_PI

    def __post_init__(self):
        if not self.distance > 1.0:
            raise BadConfig("camera distance must exceed the unit bounding sphere")
        if not self.yaw_low < self.yaw_high:
            raise BadConfig("yaw band must be nonempty")


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    count: int
    J: int
    fps: int
    family: str
    seed: int
    norm_mean: tuple            # (J, 2) flattened row-major
    norm_scale: float
    camera: CameraDistParams
    length_range: tuple
    aux: tuple

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("version", "count", "J", "fps", "family", "seed")}
        d["norm_scale"] = float(self.norm_scale)
        d["norm_mean"] = [float(x) for x in self.norm_mean]
        d["length_range"] = [int(x) for x in self.length_range]
        d["aux"] = [int(x) for x in self.aux]
        d["camera"] = {"pitch": self.camera.pitch, "distance": self.camera.distance,
                       "focal": self.camera.focal, "yaw_low": self.camera.yaw_low,
                       "yaw_high": self.camera.yaw_high}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        cam = CameraDistParams(**d["camera"])
        return cls(version=d["version"], count=d["count"], J=d["J"], fps=d["fps"],
                   family=d["family"], seed=d["seed"],
                   norm_mean=tuple(d["norm_mean"]), norm_scale=d["norm_scale"],
                   camera=cam, length_range=tuple(d["length_range"]),
                   aux=tuple(d["aux"]))


@dataclass
class BuiltDataset:
    manifest: DatasetManifest
    motions: list           # (L, J, 2) float64, exact projections
    confidences: list       # (L, J) float64
    motions3d: list         # (L, J, 3) float64, the sealed ground truth

    @property
    def norm_mean(self) -> np.ndarray:
        return np.asarray(self.manifest.norm_mean).reshape(self.manifest.J, 2)

    @property
    def norm_scale(self) -> float:
        return self.manifest.norm_scale


def record_camera_angles(seed: int, i: int, cam: CameraDistParams):
    """The yaw/pitch record i's camera uses; derivable without the file."""
    rng = np.random.default_rng([seed, i, 1])
    yaw = rng.uniform(cam.yaw_low, cam.yaw_high)
    return yaw, cam.pitch


def _normalization(motions) -> tuple:
    """Mean/scale as the float32-stored data will reproduce them."""
    stacked = np.concatenate([m.astype(np.float32).astype(np.float64)
                              for m in motions], axis=0)
    mean = stacked.mean(axis=0)
    scale = float(stacked.std()) or 1.0
    return mean, scale


def build_dataset(skel: Skeleton, fam: MotionFamilyParams, n: int,
                  cam: CameraDistParams | None = None, seed: int = 0) -> BuiltDataset:
    """n single-view projection records plus their sealed 3D ground truth."""
    if n < 1:
        raise BadConfig(f"n must be >= 1, got {n}")
    cam = cam or CameraDistParams()
    motions2d, confs, motions3d = [], [], []
    for i in range(n):
        X = sample_motion3d(skel, fam, [seed, i, 0])
        yaw, pitch = record_camera_angles(seed, i, cam)
        view = camera_from_angles(yaw, pitch, cam.distance, cam.focal)
        motions2d.append(perspective_project(X, view))
        confs.append(np.ones(X.shape[:2]))
        motions3d.append(X)
    mean, scale = _normalization(motions2d)
    manifest = DatasetManifest(
        version=DATA_VERSION, count=n, J=skel.J, fps=fam.fps, family=fam.family,
        seed=seed, norm_mean=tuple(mean.reshape(-1)), norm_scale=scale,
        camera=cam, length_range=tuple(fam.length_range), aux=skel.aux)
    return BuiltDataset(manifest, motions2d, confs, motions3d)


def corrupt_records(motions, confidences, noise_sigma: float,
                    dropout_prob: float, seed: int = 0):
    """Simulated pose-estimator error: positional noise + zero-confidence drops."""
    if noise_sigma < 0:
        raise BadConfig("noise_sigma must be >= 0")
    if not 0.0 <= dropout_prob < 1.0:
        raise BadConfig("dropout_prob must be in [0, 1)")
    rng = np.random.default_rng(seed)
    out_m, out_c = [], []
    for m, c in zip(motions, confidences):
        m = np.asarray(m, np.float64)
        noisy = m + noise_sigma * rng.standard_normal(m.shape) if noise_sigma else m.copy()
        keep = rng.uniform(size=m.shape[:2]) >= dropout_prob if dropout_prob else np.ones(m.shape[:2], bool)
        out_m.append(noisy)
        out_c.append(np.asarray(c, np.float64) * keep)
    return out_m, out_c


def apply_corruption(built: BuiltDataset, noise_sigma: float, dropout_prob: float,
                     seed: int = 0) -> BuiltDataset:
    """corrupt_records applied to a whole dataset, with stats recomputed.

    The manifest normalization stats must describe the stored records, so they
    are recomputed from the corrupted motions; the sealed 3D sidecar is
    untouched (it is ground truth, not an estimate).
    """
    motions, confs = corrupt_records(built.motions, built.confidences,
                                     noise_sigma, dropout_prob, seed)
    mean, scale = _normalization(motions)
    manifest = dataclasses.replace(
        built.manifest, norm_mean=tuple(mean.reshape(-1)), norm_scale=scale)
    return BuiltDataset(manifest, motions, confs, built.motions3d)


# --- file formats --------------------------------------------------------------

def _write_container(path, header: dict, arrays, confidences=None):
    """magic | version u32 | header_len u32 | JSON header | record blocks."""
    buf = io.BytesIO()
    buf.write(DATA_MAGIC)
    buf.write(np.uint32(DATA_VERSION).tobytes())
    hdr = json.dumps(header, sort_keys=True).encode()
    buf.write(np.uint32(len(hdr)).tobytes())
    buf.write(hdr)
    for i, a in enumerate(arrays):
        a32 = np.ascontiguousarray(a, dtype="<f4")
        buf.write(np.uint32(a32.shape[0]).tobytes())
        buf.write(a32.tobytes())
        if confidences is not None:
            buf.write(np.ascontiguousarray(confidences[i], dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _read_container(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16 or raw[:8] != DATA_MAGIC:
        raise VersionMismatch(f"{path} is not a motion dataset file")
    version = int(np.frombuffer(raw[8:12], "<u4")[0])
    if version != DATA_VERSION:
        raise VersionMismatch(f"dataset format version {version}, expected {DATA_VERSION}")
    hlen = int(np.frombuffer(raw[12:16], "<u4")[0])
    try:
        header = json.loads(raw[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptChecksum(f"unreadable dataset header in {path}") from e
    off = 16 + hlen
    J, coords = header["J"], header["coords"]
    with_conf = header["with_confidence"]
    arrays, confs = [], []
    for _ in range(header["count"]):
        if off + 4 > len(raw):
            raise CorruptChecksum(f"{path} truncated mid-record")
        L = int(np.frombuffer(raw[off:off + 4], "<u4")[0])
        off += 4
        nbytes = L * J * coords * 4
        cbytes = L * J * 4 if with_conf else 0
        if off + nbytes + cbytes > len(raw):
            raise CorruptChecksum(f"{path} truncated mid-record")
        arrays.append(np.frombuffer(raw[off:off + nbytes], "<f4")
                      .reshape(L, J, coords).astype(np.float64))
        off += nbytes
        if with_conf:
            confs.append(np.frombuffer(raw[off:off + cbytes], "<f4")
                         .reshape(L, J).astype(np.float64))
            off += cbytes
    if off != len(raw):
        raise CorruptChecksum(f"{path} has {len(raw) - off} trailing bytes")
    return header, arrays, confs


def save_dataset(path, built: BuiltDataset) -> None:
    header = built.manifest.to_dict()
    header.update(coords=2, with_confidence=True)
    _write_container(path, header, built.motions, built.confidences)


def save_sidecar(path, built: BuiltDataset) -> None:
    """The sealed ground-truth 3D motions; consumed only by evaluation."""
    header = built.manifest.to_dict()
    header.update(coords=3, with_confidence=False)
    _write_container(path, header, built.motions3d)


@dataclass
class LoadedDataset:
    manifest: DatasetManifest
    motions: list
    confidences: list

    @property
    def norm_mean(self) -> np.ndarray:
        return np.asarray(self.manifest.norm_mean).reshape(self.manifest.J, 2)

    @property
    def norm_scale(self) -> float:
        return self.manifest.norm_scale


def load_dataset(path) -> LoadedDataset:
    header, arrays, confs = _read_container(path)
    if header["coords"] != 2:
        raise VersionMismatch(f"{path} holds {header['coords']}-coordinate records, "
                              "expected a 2D dataset")
    for k in ("coords", "with_confidence"):
        header.pop(k)
    return LoadedDataset(DatasetManifest.from_dict(header), arrays, confs)


def load_sidecar(path) -> list:
    header, arrays, _ = _read_container(path)
    if header["coords"] != 3:
        raise VersionMismatch(f"{path} holds {header['coords']}-coordinate records, "
                              "expected a 3D sidecar")
    return arrays


def save_motions(path, motions, extra_header: dict | None = None) -> None:
    """A bare container of motion arrays (2 or 3 coords), e.g. sampler output."""
    motions = [np.asarray(m, np.float64) for m in motions]
    if not motions:
        raise BadConfig("save_motions needs at least one motion")
    coords = motions[0].shape[-1]
    if coords not in (2, 3) or any(m.ndim != 3 or m.shape[1:] != motions[0].shape[1:]
                                   for m in motions):
        raise ShapeMismatch("motions must share a (L, J, 2-or-3) layout")
    header = dict(extra_header or {})
    header.update(kind="motions", count=len(motions), J=int(motions[0].shape[1]),
                  coords=int(coords), with_confidence=False)
    _write_container(path, header, motions)


def load_motions(path) -> list:
    header, arrays, _ = _read_container(path)
    if header.get("kind") != "motions":
        raise VersionMismatch(f"{path} is not a motion container")
    return arrays


def write_manifest_text(path, manifest: DatasetManifest) -> None:
    """Human-readable flat key = value rendering of the manifest."""
    d = manifest.to_dict()
    cam = d.pop("camera")
    d.update({f"camera.{k}": v for k, v in cam.items()})
    with open(path, "w") as f:
        for k in sorted(d):
            v = d[k]
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            f.write(f"{k} = {v!r}\n" if isinstance(v, str) else f"{k} = {v}\n")


def audit(path) -> dict:
    """Recompute dataset statistics and check them against the stored header.

    Returns the audit report; raises CorruptChecksum when the stored
    normalization stats do not match the data.
    """
    ds = load_dataset(path)
    mean, scale = _normalization(ds.motions)
    stored_mean = ds.norm_mean.reshape(-1)
    mean_err = float(np.abs(mean.reshape(-1) - stored_mean).max())
    scale_err = abs(scale - ds.norm_scale)
    lengths = [m.shape[0] for m in ds.motions]
    report = {
        "count": len(ds.motions),
        "count_ok": len(ds.motions) == ds.manifest.count,
        "mean_error": mean_err,
        "scale_error": scale_err,
        "length_range_ok": (min(lengths) >= ds.manifest.length_range[0]
                            and max(lengths) <= ds.manifest.length_range[1]),
        "confidence_range_ok": all(((c >= 0) & (c <= 1)).all()
                                   for c in ds.confidences),
    }
    ok = (report["count_ok"] and mean_err < 1e-9 and scale_err < 1e-9
          and report["length_range_ok"] and report["confidence_range_ok"])
    if not ok:
        raise CorruptChecksum(f"dataset audit failed for {path}: {report}")
    return report
