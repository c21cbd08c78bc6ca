"""Procedural breast phantom: a hemisphere on a muscle slab filled with
priority-ordered analytic tissue regions.

Frame: x points medially (towards the sternum), y superiorly, z anteriorly
(out of the chest). The chest wall is the plane z = 0; the muscle slab
occupies -base_thickness <= z < 0 inside the cylinder r <= R.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidSpec
from .tissues import PropertyMap, TissueType, sample_patient_properties

# Lowest priority first; later regions override earlier ones.
PRIORITY = (
    TissueType.AdiposeTissue,
    TissueType.Muscle,
    TissueType.MammaryGland,
    TissueType.BreastLobule,
    TissueType.ConnectiveTissue,
    TissueType.Duct,
    TissueType.Nipple,
    TissueType.BloodVessel,
    TissueType.Skin,
    TissueType.Tumor,
)


@dataclass(frozen=True)
class TumorSpec:
    present: bool = False
    point: int = 3
    depth_m: float = 0.02
    radius_m: float = 0.01


@dataclass(frozen=True)
class PhantomSpec:
    radius_m: float = 0.09
    skin_thickness_m: float = 0.002
    base_thickness_m: float = 0.02
    lobule_count: tuple[int, int] = (8, 16)
    lobule_radius_m: tuple[float, float] = (0.006, 0.012)
    duct_radius_m: float = 0.0015
    connective_count: int = 10
    connective_radius_m: float = 0.001
    vessel_trees: int = 8
    vessel_radii_m: tuple[float, float, float] = (0.005, 0.004, 0.003)
    nipple_radius_m: float = 0.005
    tumor: TumorSpec = TumorSpec()
    seed: int = 0
    variability_default: float = 0.1
    variability: dict = field(default_factory=dict)
    frequency_hz: float = 1.5e9
    tissue_table: str | None = None
    # measurement layout: ring at cylindrical radius ring_fraction * R
    ring_fraction: float = 0.5
    first_point_deg: float = 0.0
    clockwise: bool = True

    def validate(self) -> None:
        R = self.radius_m
        if not R > 0:
            raise InvalidSpec("radius_m must be positive")
        if not 0 < self.skin_thickness_m < R / 4:
            raise InvalidSpec("skin_thickness_m must lie in (0, R/4)")
        if not self.base_thickness_m > 0:
            raise InvalidSpec("base_thickness_m must be positive")
        lo, hi = self.lobule_count
        if not 0 <= lo <= hi:
            raise InvalidSpec("lobule_count must be an ordered non-negative range")
        if not 0 <= self.ring_fraction < 1:
            raise InvalidSpec("ring_fraction must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        spreads = [self.variability_default, *self.variability.values()]
        if any(not 0 <= s < 1 for s in spreads):
            raise InvalidSpec("variability spreads must lie in [0, 1)")
        t = self.tumor
        if t.present:
            if not 0 <= t.point <= 8:
                raise InvalidSpec("tumor point must be in 0..8")
            if not 0 < t.radius_m < R:
                raise InvalidSpec(f"tumor radius {t.radius_m} must lie in (0, R={R})")
            center = tumor_center(self)
            if np.linalg.norm(center) + t.radius_m >= R or center[2] - t.radius_m < -self.base_thickness_m:
                raise InvalidSpec("tumor protrudes outside the phantom domain")

    def with_tumor(self, **kw) -> "PhantomSpec":
        return dataclasses.replace(self, tumor=dataclasses.replace(self.tumor, **kw))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhantomSpec":
        data = dict(data)
        if "tumor" in data and isinstance(data["tumor"], dict):
            data["tumor"] = TumorSpec(**data["tumor"])
        for key in ("lobule_count", "lobule_radius_m", "vessel_radii_m"):
            if key in data:
                data[key] = tuple(data[key])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidSpec(f"unknown phantom keys: {sorted(unknown)}")
        return cls(**data)


def measurement_points(R: float, ring_fraction: float = 0.5, first_point_deg: float = 0.0,
                       clockwise: bool = True) -> np.ndarray:
    """Nine measurement points on the dome: 0 at the apex, 1..8 every 45 deg
    on the ring at cylindrical radius ``ring_fraction * R``.

    Point 1 sits on the medial axis (+x) by default; numbering runs clockwise
    as seen by an observer facing the breast (looking along -z).
    """
    if R <= 0:
        raise InvalidSpec("R must be positive")
    rho = ring_fraction * R
    z = np.sqrt(R * R - rho * rho)
    sign = -1.0 if clockwise else 1.0
    phi = np.deg2rad(first_point_deg) + sign * np.deg2rad(45.0) * np.arange(8)
    ring = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), np.full(8, z)])
    return np.vstack([[0.0, 0.0, R], ring])


def tumor_center(spec: PhantomSpec) -> np.ndarray:
    pts = measurement_points(spec.radius_m, spec.ring_fraction, spec.first_point_deg, spec.clockwise)
    p = pts[spec.tumor.point]
    return p - spec.tumor.depth_m * p / np.linalg.norm(p)


# --- analytic primitives ----------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def contains(self, pts):
        d = pts - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple
    axes: tuple
    rotation: tuple = ((1.0, 0, 0), (0, 1.0, 0), (0, 0, 1.0))  # rows: local axes

    def contains(self, pts):
        local = (pts - np.asarray(self.center)) @ np.asarray(self.rotation).T
        return np.sum((local / np.asarray(self.axes)) ** 2, axis=1) <= 1.0


@dataclass(frozen=True)
class Capsule:
    a: tuple
    b: tuple
    radius: float

    def contains(self, pts):
        a, b = np.asarray(self.a), np.asarray(self.b)
        ab = b - a
        t = np.clip((pts - a) @ ab / max(ab @ ab, 1e-300), 0.0, 1.0)
        d = pts - (a + t[:, None] * ab)
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2


@dataclass(frozen=True)
class Dome:
    radius: float
    inner: float = 0.0  # > 0 turns the dome into a shell

    def contains(self, pts):
        r2 = np.einsum("ij,ij->i", pts, pts)
        return (pts[:, 2] >= 0) & (r2 <= self.radius ** 2) & (r2 >= self.inner ** 2)


@dataclass(frozen=True)
class Slab:
    radius: float
    thickness: float

    def contains(self, pts):
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        return (pts[:, 2] < 0) & (pts[:, 2] >= -self.thickness) & (r2 <= self.radius ** 2)


@dataclass(frozen=True)
class Region:
    tissue: TissueType
    shape: object
    dome_only: bool = True


@dataclass(frozen=True)
class BreastPhantom:
    spec: PhantomSpec
    regions: tuple
    properties: dict  # TissueType -> TissueProperties
    points: np.ndarray = field(compare=False)

    @property
    def radius(self) -> float:
        return self.spec.radius_m

    @property
    def base_thickness(self) -> float:
        return self.spec.base_thickness_m

    def inside(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return Dome(self.radius).contains(pts) | Slab(self.radius, self.base_thickness).contains(pts)

    def classify(self, pts) -> np.ndarray:
        """TissueType code per point; -1 outside the domain."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int8)
        inside = self.inside(pts)
        dome = inside & (pts[:, 2] >= 0)
        for region in self.regions:
            mask = region.shape.contains(pts)
            mask &= dome if region.dome_only else inside
            out[mask] = int(region.tissue)
        return out

    def region_properties(self, region: Region):
        return self.properties[region.tissue]

    def digest(self) -> str:
        payload = json.dumps(
            {"spec": self.spec.to_dict(), "regions": [
                [int(r.tissue), type(r.shape).__name__, repr(dataclasses.astuple(r.shape)), r.dome_only]
                for r in self.regions]},
            sort_keys=True, default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _frame_towards(direction):
    """Rotation whose third row is ``direction``."""
    w = _unit(direction)
    helper = np.array([1.0, 0, 0]) if abs(w[0]) < 0.9 else np.array([0, 1.0, 0])
    u = _unit(np.cross(helper, w))
    v = np.cross(w, u)
    return np.vstack([u, v, w])


def _tup(v):
    return tuple(float(x) for x in v)


def _vessel_tree(rng, spec, root_xy):
    R, H = spec.radius_m, spec.base_thickness_m
    r0, r1, r2 = spec.vessel_radii_m
    limit = 0.9 * R
    start = np.array([root_xy[0], root_xy[1], -0.5 * H])
    segments = []
    trunk_end = np.array([root_xy[0], root_xy[1], 0.25 * R])
    segments.append((start, trunk_end, r0))
    frontier = [(trunk_end, np.array([0.0, 0.0, 1.0]), 0.3 * R, r1)]
    for level in range(2):
        nxt = []
        for origin, direction, length, radius in frontier:
            az = rng.uniform(0, 2 * np.pi)
            frame = _frame_towards(direction)
            side = frame[0] * np.cos(az) + frame[1] * np.sin(az)
            for sign in (1.0, -1.0):
                tilt = np.deg2rad(rng.uniform(25, 45))
                d = _unit(np.cos(tilt) * direction + sign * np.sin(tilt) * side)
                step = length
                while np.linalg.norm(origin + step * d) > limit and step > 1e-4:
                    step *= 0.5
                end = origin + step * d
                end[2] = max(end[2], 0.02 * R)
                segments.append((origin, end, radius))
                nxt.append((end, d, 0.8 * length, r2))
        frontier = nxt if level == 0 else []
    return [Region(TissueType.BloodVessel, Capsule(_tup(a), _tup(b), float(r)), dome_only=False)
            for a, b, r in segments]


def build_phantom(spec: PhantomSpec, properties: PropertyMap | None = None) -> BreastPhantom:
    """Assemble the region list for ``spec``.

    Geometry draws come from ``SeedSequence([seed, 0])`` and property draws
    from ``SeedSequence([seed, 1])`` so the two are independent.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    R, H, t = spec.radius_m, spec.base_thickness_m, spec.skin_thickness_m
    pts = measurement_points(R, spec.ring_fraction, spec.first_point_deg, spec.clockwise)
    if properties is None:
        properties = sample_patient_properties(spec)

    regions = [
        Region(TissueType.AdiposeTissue, Dome(R)),
        Region(TissueType.Muscle, Slab(R, H), dome_only=False),
    ]
    gland_c = np.array([0.0, 0.0, 0.15 * R])
    gland_axes = np.array([0.62 * R, 0.62 * R, 0.55 * R])
    regions.append(Region(TissueType.MammaryGland, Ellipsoid(_tup(gland_c), _tup(gland_axes))))

    nipple_base = np.array([0.0, 0.0, R - 0.012])
    n_lobules = int(rng.integers(spec.lobule_count[0], spec.lobule_count[1] + 1))
    lobule_centers = []
    while len(lobule_centers) < n_lobules:
        u = rng.uniform(-1, 1, 3)
        if u @ u > 1:
            continue
        c = gland_c + 0.75 * gland_axes * u
        if c[2] < 0.1 * R:
            continue
        lobule_centers.append(c)
    for c in lobule_centers:
        size = rng.uniform(*spec.lobule_radius_m)
        axes = (0.6 * size, 0.6 * size, size)
        rot = _frame_towards(nipple_base - c)
        regions.append(Region(TissueType.BreastLobule,
                              Ellipsoid(_tup(c), axes, tuple(map(_tup, rot)))))
    for _ in range(spec.connective_count):
        u = rng.uniform(-1, 1, 3)
        u[2] = abs(u[2])
        start = gland_c + 0.5 * gland_axes * u
        end = (R - t) * _unit(start + rng.normal(0, 0.1 * R, 3) * np.array([1, 1, 0]))
        end[2] = max(end[2], 0.05 * R)
        regions.append(Region(TissueType.ConnectiveTissue,
                              Capsule(_tup(start), _tup(end), spec.connective_radius_m)))
    for c in lobule_centers:
        regions.append(Region(TissueType.Duct, Capsule(_tup(c), _tup(nipple_base), spec.duct_radius_m)))
    regions.append(Region(TissueType.Nipple, Capsule(_tup(nipple_base), (0.0, 0.0, R), spec.nipple_radius_m)))

    for _ in range(spec.vessel_trees):
        rho = 0.55 * R * np.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * np.pi)
        regions.extend(_vessel_tree(rng, spec, (rho * np.cos(phi), rho * np.sin(phi))))

    regions.append(Region(TissueType.Skin, Dome(R, R - t)))
    if spec.tumor.present:
        regions.append(Region(TissueType.Tumor, Ball(_tup(tumor_center(spec)), spec.tumor.radius_m)))

    order = {tissue: i for i, tissue in enumerate(PRIORITY)}
    regions.sort(key=lambda r: order[r.tissue])  # stable: keeps generation order within a tissue
    return BreastPhantom(spec=spec, regions=tuple(regions), properties=dict(properties), points=pts)
