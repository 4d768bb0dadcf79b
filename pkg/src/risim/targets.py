"""
Deterministic point-cloud stand-ins for extended targets.

Only surfaces facing the RIS are sampled, since back-facing parts return
nothing towards a quasi-monostatic feed. All generators place the cloud so
its centroid lands exactly on the requested ``center``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["sphere_cloud", "box_cloud", "humanoid_cloud", "make_cloud", "SHAPES", "PART_REFLECTIVITY"]


def _facing_basis(center: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(line of sight, horizontal, vertical) unit vectors for a target at ``center``."""
    los = np.array([center[0], center[1], 0.0])
    n = np.linalg.norm(los)
    los = los / n if n > 0 else np.array([1.0, 0.0, 0.0])
    up = np.array([0.0, 0.0, 1.0])
    horiz = np.cross(up, los)
    return los, horiz, up


def _recentre(points: np.ndarray, center) -> np.ndarray:
    return points - points.mean(axis=0) + np.asarray(center, float)


def sphere_cloud(center, radius: float, points: int = 30, seed: int = 0) -> np.ndarray:
    """Fibonacci lattice on the RIS-facing hemisphere, lightly jittered."""
    center = np.asarray(center, float)
    rng = np.random.default_rng(seed)
    n_full = 2 * points
    i = np.arange(n_full) + 0.5
    z = 1.0 - 2.0 * i / n_full
    golden = math.pi * (3.0 - math.sqrt(5.0))
    az = golden * i + rng.uniform(0.0, 2 * math.pi)
    rho = np.sqrt(1.0 - z * z)
    normals = np.stack([rho * np.cos(az), rho * np.sin(az), z], axis=-1)
    towards_ris = -center / np.linalg.norm(center)
    pts = center + radius * normals[normals @ towards_ris > 0]
    return _recentre(pts, center)


def box_cloud(center, size, points: int = 40, seed: int = 0) -> np.ndarray:
    """
    Axis-aligned box of ``size = (L, W, H)`` along (x, y, z); faces whose
    outward normal points towards the RIS are sampled on a jittered grid.
    """
    center = np.asarray(center, float)
    half = 0.5 * np.asarray(size, float)
    rng = np.random.default_rng(seed)
    to_ris = -center
    faces = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            face_center = center + normal * half
            if normal @ (-face_center) <= 0:
                continue
            others = [a for a in range(3) if a != axis]
            area = 4 * half[others[0]] * half[others[1]]
            faces.append((axis, sign, others, area))
    if not faces or not to_ris.any():
        raise ValueError("box has no RIS-facing face")
    total = sum(f[3] for f in faces)
    spacing = math.sqrt(total / points)
    out = []
    for axis, sign, (a, b), _ in faces:
        na = max(1, round(2 * half[a] / spacing))
        nb = max(1, round(2 * half[b] / spacing))
        ua = (np.arange(na) + 0.5) / na * 2 - 1
        ub = (np.arange(nb) + 0.5) / nb * 2 - 1
        ga, gb = np.meshgrid(ua, ub, indexing="ij")
        p = np.zeros((ga.size, 3))
        p[:, axis] = sign * half[axis]
        p[:, a] = ga.ravel() * half[a] + rng.uniform(-0.2, 0.2, ga.size) * spacing
        p[:, b] = gb.ravel() * half[b] + rng.uniform(-0.2, 0.2, ga.size) * spacing
        out.append(center + p)
    return _recentre(np.concatenate(out), center)


def _humanoid_parts(u: np.ndarray, v: np.ndarray, height: float, width: float, pose: str) -> dict:
    """Frontal silhouette masks; ``u`` horizontal from the body axis, ``v`` height above the feet."""
    torso_half = 0.36 * width
    head = (u / (0.065 * height)) ** 2 + ((v - 0.925 * height) / (0.065 * height)) ** 2 <= 1.0
    torso = (np.abs(u) <= torso_half) & (v >= 0.50 * height) & (v <= 0.83 * height)
    legs = (np.abs(np.abs(u) - 0.45 * torso_half) <= 0.12 * width) & (v < 0.50 * height)
    arm_w = 0.08 * width + 0.02
    left_arm = (u >= -torso_half - arm_w) & (u < -torso_half) & (v >= 0.46 * height) & (v <= 0.82 * height)
    if pose == "arm_extended":
        right_arm = (u > torso_half) & (u <= torso_half + 0.32 * height) & (np.abs(v - 0.80 * height) <= 0.025 * height + 0.01)
    else:
        right_arm = (u > torso_half) & (u <= torso_half + arm_w) & (v >= 0.46 * height) & (v <= 0.82 * height)
    return {"head": head, "torso": torso, "legs": legs, "arms": left_arm | right_arm}


# Relative reflectivity: the broad torso is the dominant specular return,
# limbs and head scatter less back towards the feed.
PART_REFLECTIVITY = {"torso": 1.0, "head": 0.6, "arms": 0.6, "legs": 0.6}


def _humanoid_mask(u, v, height, width, pose) -> np.ndarray:
    return np.logical_or.reduce(list(_humanoid_parts(u, v, height, width, pose).values()))


def humanoid_cloud(
    center,
    height: float = 1.8,
    width: float = 0.5,
    points: int = 50,
    seed: int = 0,
    pose: str = "standing",
) -> tuple[np.ndarray, np.ndarray]:
    """
    Frontal human silhouette sampled on a jittered grid.

    The silhouette lies in the plane facing the RIS through ``center``,
    with a shallow torso bulge towards the RIS. Returns ``(points, weights)``
    where weights follow `PART_REFLECTIVITY`.
    """
    if pose not in ("standing", "arm_extended"):
        raise ValueError(f"unknown pose {pose!r}")
    center = np.asarray(center, float)
    rng = np.random.default_rng(seed)
    # silhouette area from a fine raster sizes the sampling grid
    fine = 0.01
    uu, vv = np.meshgrid(np.arange(-height, height, fine), np.arange(0, height, fine), indexing="ij")
    area = _humanoid_mask(uu, vv, height, width, pose).sum() * fine * fine
    spacing = math.sqrt(area / points)
    gu = np.arange(-height, height, spacing) + 0.5 * spacing
    gv = np.arange(0, height, spacing) + 0.5 * spacing
    uu, vv = np.meshgrid(gu, gv, indexing="ij")
    parts = _humanoid_parts(uu, vv, height, width, pose)
    weight_grid = np.zeros(uu.shape)
    for name in ("legs", "arms", "head", "torso"):
        weight_grid = np.where(parts[name], PART_REFLECTIVITY[name], weight_grid)
    keep = weight_grid > 0
    u = uu[keep] + rng.uniform(-0.15, 0.15, keep.sum()) * spacing
    v = vv[keep] + rng.uniform(-0.15, 0.15, keep.sum()) * spacing
    torso_half = 0.36 * width
    bulge = np.where(np.abs(u) <= torso_half, 0.03 * (1.0 - (u / torso_half) ** 2), 0.0)
    los, horiz, up = _facing_basis(center)
    pts = u[:, None] * horiz + v[:, None] * up - bulge[:, None] * los
    return _recentre(pts, center), weight_grid[keep]


SHAPES = ("sphere", "box", "humanoid", "point")


def make_cloud(shape: str, center, seed: int = 0, **params) -> tuple[np.ndarray, np.ndarray]:
    """
    Dispatch on shape name -> ``(points, relative weights)``.

    ``point`` is a single scatterer at ``center``.
    """
    if shape == "humanoid":
        return humanoid_cloud(
            center, params.get("height", 1.8), params.get("width", 0.5), params.get("points", 50),
            seed, params.get("pose", "standing"),
        )
    if shape == "sphere":
        pts = sphere_cloud(center, params.get("radius", 0.15), params.get("points", 30), seed)
    elif shape == "box":
        pts = box_cloud(center, params.get("size", (0.5, 0.5, 0.5)), params.get("points", 40), seed)
    elif shape == "point":
        pts = np.asarray(center, float).reshape(1, 3)
    else:
        raise ValueError(f"unknown target shape {shape!r}; expected one of {list(SHAPES)}")
    return pts, np.ones(len(pts))
