"""Declarative run descriptions: JSON scenarios, builders and bundled presets.

A scenario is one UTF-8 JSON document describing geometry, vortices (explicit
and/or sampled), the balance policy, integrator and conformal-map parameters,
and output toggles. Building a scenario produces the ready-to-integrate
vortex system plus, for mesh geometry, the conformal atlas and transport
hooks.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import shapes
from .conformal import ConformalAtlas, build_atlas
from .dynamics import (
    CLOSED_SURFACE,
    DEFAULT_SELF_TERM_SIGN,
    PLANE,
    SPHERE,
    VortexSystem,
    make_rhs,
)
from .errors import ScenarioError, SurfVortError
from .integrator import IntegratorConfig, advection_for
from .mesh import TriangleMesh, face_areas, load_obj
from .numerics import normalize_rows
from .transport import M_TO_SPHERE, SurfaceLocation, mapped_position, position_of, sample_points

GEOMETRY_NAMES = {"plane": PLANE, "sphere": SPHERE, "mesh": CLOSED_SURFACE}


@dataclass(frozen=True)
class ConformalParams:
    delta: float = 0.1
    tol: float = 1e-3
    max_iters: int = 200


@dataclass(frozen=True)
class OutputSpec:
    trajectories: bool = True
    energy: bool = True
    sphere_map: bool = False
    factors: bool = False
    field_grid: dict | None = None


@dataclass(frozen=True)
class SamplerSpec:
    count: int
    seed: int
    strength: dict
    region: dict | None = None


@dataclass(frozen=True)
class Scenario:
    geometry: str
    mesh_path: str | None
    vortices: list[dict]
    samplers: list[SamplerSpec]
    balance_mode: str            # "none" | "reject" | "counter_vortex"
    counter_position: object | None
    integrator: IntegratorConfig
    conformal: ConformalParams
    self_term_sign: int
    outputs: OutputSpec
    diagnostics_every: int
    name: str = "scenario"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def parse_scenario(obj: dict, base_dir: str = ".", name: str = "scenario") -> Scenario:
    """Validate a raw scenario dict; raises :class:`ScenarioError` on problems."""
    _require(isinstance(obj, dict), "scenario must be a JSON object")

    geom_spec = obj.get("geometry")
    mesh_path = None
    if isinstance(geom_spec, str):
        _require(geom_spec in ("plane", "sphere"), f"unknown geometry {geom_spec!r}")
        geometry = GEOMETRY_NAMES[geom_spec]
    elif isinstance(geom_spec, dict) and "mesh" in geom_spec:
        geometry = CLOSED_SURFACE
        mesh_path = os.path.join(base_dir, geom_spec["mesh"])
        _require(os.path.exists(mesh_path), f"mesh file not found: {mesh_path}")
    else:
        raise ScenarioError("geometry must be 'plane', 'sphere' or {'mesh': path}")

    vortices = obj.get("vortices", [])
    _require(isinstance(vortices, list), "vortices must be a list")
    for v in vortices:
        _require(isinstance(v, dict) and "strength" in v, "each vortex needs a strength")
        _require(np.isfinite(float(v["strength"])), "vortex strength must be finite")

    raw_samplers = obj.get("samplers", [])
    if "sampler" in obj:
        raw_samplers = [obj["sampler"]] + list(raw_samplers)
    samplers = []
    for s in raw_samplers:
        _require(isinstance(s, dict) and "count" in s, "sampler needs a count")
        _require(int(s["count"]) >= 0, "sampler count must be >= 0")
        samplers.append(
            SamplerSpec(
                count=int(s["count"]),
                seed=int(s.get("seed", 0)),
                strength=s.get("strength", {"law": "constant", "value": 1.0}),
                region=s.get("region"),
            )
        )
    _require(vortices or samplers, "scenario defines no vortices")

    balance = obj.get("balance", "reject" if geometry == CLOSED_SURFACE else "none")
    counter_position = None
    if isinstance(balance, dict):
        _require("counter_vortex" in balance, "balance object must be {'counter_vortex': pos}")
        counter_position = balance["counter_vortex"]
        balance_mode = "counter_vortex"
    else:
        _require(balance in ("none", "reject"), f"unknown balance mode {balance!r}")
        balance_mode = balance

    integ = obj.get("integrator")
    _require(isinstance(integ, dict) and "dt" in integ and "steps" in integ,
             "integrator needs dt and steps")
    try:
        integrator = IntegratorConfig(
            dt=float(integ["dt"]),
            steps=int(integ["steps"]),
            scheme=integ.get("scheme", "rk4"),
            advection=advection_for(geometry),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    conf = obj.get("conformal", {})
    conformal = ConformalParams(
        delta=float(conf.get("delta", 0.1)),
        tol=float(conf.get("tol", 1e-3)),
        max_iters=int(conf.get("max_iters", 200)),
    )
    _require(conformal.delta > 0 and conformal.tol > 0 and conformal.max_iters > 0,
             "conformal parameters must be positive")

    sign = int(obj.get("self_term_sign", DEFAULT_SELF_TERM_SIGN))
    _require(sign in (-1, 1), "self_term_sign must be +1 or -1")

    out = obj.get("outputs", {})
    outputs = OutputSpec(
        trajectories=bool(out.get("trajectories", True)),
        energy=bool(out.get("energy", True)),
        sphere_map=bool(out.get("sphere_map", False)),
        factors=bool(out.get("factors", False)),
        field_grid=out.get("field_grid"),
    )
    diagnostics_every = int(obj.get("diagnostics_every", 1))
    _require(diagnostics_every >= 1, "diagnostics_every must be >= 1")

    return Scenario(
        geometry=geometry,
        mesh_path=mesh_path,
        vortices=list(vortices),
        samplers=samplers,
        balance_mode=balance_mode,
        counter_position=counter_position,
        integrator=integrator,
        conformal=conformal,
        self_term_sign=sign,
        outputs=outputs,
        diagnostics_every=diagnostics_every,
        name=name,
    )


def load_scenario(path: str | os.PathLike) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_scenario(obj, base_dir=os.path.dirname(os.path.abspath(str(path))), name=name)


# ---------------------------------------------------------------------------
# Building runnable state out of a scenario
# ---------------------------------------------------------------------------

@dataclass
class PreparedRun:
    scenario: Scenario
    system: VortexSystem
    atlas: ConformalAtlas | None = None
    mesh: TriangleMesh | None = None
    initial_locations: list[SurfaceLocation] = field(default_factory=list)

    def rhs(self):
        return make_rhs(self.system, atlas=self.atlas,
                        self_term_sign=self.scenario.self_term_sign)


def _strength_values(spec: dict, count: int, rng: np.random.Generator) -> np.ndarray:
    law = spec.get("law", "constant")
    if law == "constant":
        return np.full(count, float(spec.get("value", 1.0)))
    if law == "uniform":
        return rng.uniform(float(spec.get("low", -1.0)), float(spec.get("high", 1.0)), count)
    raise ScenarioError(f"unknown strength law {law!r}")


def _sample_plane(spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    region = spec.region or {"box": [-1.0, 1.0, -1.0, 1.0]}
    if "box" in region:
        x0, x1, y0, y1 = (float(v) for v in region["box"])
        x = rng.uniform(x0, x1, spec.count)
        y = rng.uniform(y0, y1, spec.count)
    elif "disk" in region:
        cx, cy = (float(v) for v in region["disk"]["center"])
        radius = float(region["disk"]["radius"])
        r = radius * np.sqrt(rng.random(spec.count))
        phi = 2.0 * np.pi * rng.random(spec.count)
        x, y = cx + r * np.cos(phi), cy + r * np.sin(phi)
    else:
        raise ScenarioError("plane sampler region must define 'box' or 'disk'")
    return np.stack([x, y, np.zeros(spec.count)], axis=1)


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Rotation matrix taking +z to `axis` (unit)."""
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, axis)
    c = float(z @ axis)
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _sample_sphere(spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.region is None:
        p = rng.normal(size=(spec.count, 3))
        return normalize_rows(p)
    if "cap" in spec.region:
        center = normalize_rows(np.asarray(spec.region["cap"]["center"], dtype=np.float64))
        angle = float(spec.region["cap"]["angle"])
        z = rng.uniform(np.cos(angle), 1.0, spec.count)
        phi = 2.0 * np.pi * rng.random(spec.count)
        s = np.sqrt(1.0 - z * z)
        local = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
        return local @ _rotation_to(center).T
    raise ScenarioError("sphere sampler region must be null or define 'cap'")


def _mesh_location(spec: dict, mesh: TriangleMesh) -> SurfaceLocation:
    """Resolve an explicit mesh vortex location spec."""
    if "triangle" in spec and "bary" in spec:
        s, t = (float(v) for v in spec["bary"])
        return SurfaceLocation(int(spec["triangle"]), s, t)
    if "nearest" in spec:
        anchor = np.asarray(spec["nearest"], dtype=np.float64)
        vid = int(np.argmin(np.linalg.norm(mesh.vertices - anchor, axis=1)))
        tri = int(np.nonzero((mesh.triangles == vid).any(axis=1))[0][0])
        corner = int(np.nonzero(mesh.triangles[tri] == vid)[0][0])
        s, t = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (0.0, 1.0)}[corner]
        return SurfaceLocation(tri, s, t)
    raise ScenarioError("mesh vortex needs 'triangle'+'bary' or 'nearest'")


def build_run(scenario: Scenario) -> PreparedRun:
    """Load geometry, build the atlas if needed and assemble the vortex system."""
    mesh = atlas = None
    if scenario.geometry == CLOSED_SURFACE:
        try:
            mesh = load_obj(scenario.mesh_path)
        except SurfVortError as exc:
            raise ScenarioError(f"cannot load mesh: {exc}") from exc
        atlas = build_atlas(
            mesh,
            delta=scenario.conformal.delta,
            tol=scenario.conformal.tol,
            max_iters=scenario.conformal.max_iters,
        )

    positions: list[np.ndarray] = []
    strengths: list[float] = []
    locations: list[SurfaceLocation] = []

    for v in scenario.vortices:
        w = float(v["strength"])
        if scenario.geometry == CLOSED_SURFACE:
            loc = _mesh_location(v, mesh)
            locations.append(loc)
            positions.append(normalize_rows(mapped_position(atlas, loc, M_TO_SPHERE)))
        else:
            pos = np.asarray(v.get("position"), dtype=np.float64)
            if scenario.geometry == PLANE:
                _require(pos.shape in ((2,), (3,)), "plane vortex position must be [x, y]")
                pos = np.array([pos[0], pos[1], 0.0])
            else:
                _require(pos.shape == (3,), "sphere vortex position must be [x, y, z]")
                pos = normalize_rows(pos)
            positions.append(pos)
        strengths.append(w)

    for spec in scenario.samplers:
        rng = np.random.default_rng(spec.seed)
        if scenario.geometry == PLANE:
            pts = _sample_plane(spec, rng)
        elif scenario.geometry == SPHERE:
            pts = _sample_sphere(spec, rng)
        else:
            locs = sample_points(atlas.sphere_mesh, face_areas(mesh), spec.count, spec.seed)
            locations.extend(locs)
            pts = normalize_rows(
                np.stack([position_of(atlas.sphere_mesh, loc) for loc in locs])
            ) if locs else np.zeros((0, 3))
        w = _strength_values(spec.strength, spec.count, rng)
        positions.extend(pts)
        strengths.extend(w.tolist())

    pos = np.array(positions)
    w = np.array(strengths, dtype=np.float64)
    total = math.fsum(w)
    unbalanced = abs(total) > 1e-12 * max(math.fsum(np.abs(w)), 1.0)
    if unbalanced and scenario.balance_mode == "reject":
        raise ScenarioError(f"total vorticity {total:g} must vanish (balance: reject)")
    if unbalanced and scenario.balance_mode == "counter_vortex":
        spec = scenario.counter_position
        if scenario.geometry == CLOSED_SURFACE:
            if isinstance(spec, dict):
                loc = _mesh_location(spec, mesh)
            else:
                loc = atlas.locator.locate(normalize_rows(np.asarray(spec, dtype=np.float64)))
            locations.append(loc)
            counter = normalize_rows(mapped_position(atlas, loc, M_TO_SPHERE))
        else:
            counter = np.asarray(spec, dtype=np.float64)
            if scenario.geometry == SPHERE:
                counter = normalize_rows(counter)
            elif counter.shape == (2,):
                counter = np.array([counter[0], counter[1], 0.0])
        pos = np.concatenate([pos, counter[None, :]])
        w = np.concatenate([w, [-total]])

    try:
        system = VortexSystem(scenario.geometry, pos, w)
    except SurfVortError as exc:
        raise ScenarioError(f"invalid vortex system: {exc}") from exc

    return PreparedRun(
        scenario=scenario,
        system=system,
        atlas=atlas,
        mesh=mesh,
        initial_locations=locations,
    )


# ---------------------------------------------------------------------------
# Bundled presets
# ---------------------------------------------------------------------------

def _ellipsoid_obj() -> TriangleMesh:
    return shapes.ellipsoid(1.0, 1.0, 1.5, subdivisions=4)


def _preset_mesh_common(vortices, samplers=None, balance="reject", dt=0.005, steps=400) -> dict:
    # sphericity tol sits above the 2562-vertex discretization floor (~2.4e-3)
    doc = {
        "geometry": {"mesh": "ellipsoid.obj"},
        "vortices": vortices,
        "integrator": {"dt": dt, "steps": steps},
        "conformal": {"delta": 0.1, "tol": 4e-3, "max_iters": 200},
        "outputs": {"trajectories": True, "energy": True},
        "diagnostics_every": 10,
        "balance": balance,
    }
    if samplers:
        doc["samplers"] = samplers
    return doc


def presets() -> dict[str, dict]:
    """Named scenario documents reproducing the bundled experiments."""
    sep = 0.05  # half-separation of the geodesic sphere pair (0.1 rad total)
    p1 = [float(np.cos(sep)), float(np.sin(sep)), 0.0]
    p2 = [float(np.cos(sep)), float(-np.sin(sep)), 0.0]

    docs: dict[str, dict] = {
        "kimura_plane": {
            "geometry": "plane",
            "vortices": [
                {"position": [1.0, 0.0], "strength": -1.0},
                {"position": [-1.0, 0.0], "strength": 1.0},
            ],
            "integrator": {"dt": 0.01, "steps": 1000},
            "outputs": {"trajectories": True, "energy": True},
        },
        "kimura_sphere": {
            "geometry": "sphere",
            "vortices": [
                {"position": p1, "strength": -1.0},
                {"position": p2, "strength": 1.0},
            ],
            "integrator": {"dt": 0.005, "steps": 1000},
            "outputs": {"trajectories": True, "energy": True},
        },
        "kimura_mesh": _preset_mesh_common(
            [
                {"nearest": [0.3, 0.0, 1.45], "strength": -1.0},
                {"nearest": [-0.3, 0.0, 1.45], "strength": 1.0},
            ],
            dt=0.005, steps=400,
        ),
        "leapfrog_plane": {
            "geometry": "plane",
            "vortices": [
                {"position": [0.0, 0.5], "strength": 1.0},
                {"position": [0.0, -0.5], "strength": -1.0},
                {"position": [-1.0, 0.5], "strength": 1.0},
                {"position": [-1.0, -0.5], "strength": -1.0},
            ],
            "integrator": {"dt": 0.005, "steps": 2000},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "leapfrog_sphere": {
            "geometry": "sphere",
            "vortices": [
                {"position": [float(np.cos(a)), 0.0, float(np.sin(a))], "strength": s}
                for a, s in ((0.25, 1.0), (-0.25, -1.0), (0.55, 1.0), (-0.55, -1.0))
            ],
            "integrator": {"dt": 0.005, "steps": 1500},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "leapfrog_mesh": _preset_mesh_common(
            [
                {"nearest": [1.0, 0.0, 0.55], "strength": 1.0},
                {"nearest": [1.0, 0.0, -0.55], "strength": -1.0},
                {"nearest": [0.9, -0.45, 0.55], "strength": 1.0},
                {"nearest": [0.9, -0.45, -0.55], "strength": -1.0},
            ],
            dt=0.004, steps=500,
        ),
        "random_cloud_plane": {
            "geometry": "plane",
            "sampler": {"count": 20, "seed": 11,
                        "strength": {"law": "uniform", "low": -1.0, "high": 1.0},
                        "region": {"box": [-1.0, 1.0, -1.0, 1.0]}},
            "integrator": {"dt": 0.002, "steps": 500},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "random_cloud_sphere": {
            "geometry": "sphere",
            "sampler": {"count": 20, "seed": 11,
                        "strength": {"law": "uniform", "low": -1.0, "high": 1.0}},
            "integrator": {"dt": 0.002, "steps": 500},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "random_cloud_mesh": _preset_mesh_common(
            [],
            samplers=[{"count": 20, "seed": 11,
                       "strength": {"law": "uniform", "low": -1.0, "high": 1.0}}],
            balance={"counter_vortex": {"nearest": [0.0, 0.0, -1.5]}},
            dt=0.002, steps=300,
        ),
        "taylor_plane": {
            "geometry": "plane",
            "samplers": [
                {"count": 60, "seed": 3, "strength": {"law": "constant", "value": 0.02},
                 "region": {"disk": {"center": [-0.55, 0.0], "radius": 0.4}}},
                {"count": 60, "seed": 4, "strength": {"law": "constant", "value": 0.02},
                 "region": {"disk": {"center": [0.55, 0.0], "radius": 0.4}}},
            ],
            "integrator": {"dt": 0.01, "steps": 400},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "taylor_sphere": {
            "geometry": "sphere",
            "samplers": [
                {"count": 60, "seed": 3, "strength": {"law": "constant", "value": 0.02},
                 "region": {"cap": {"center": [0.35, 0.0, 0.94], "angle": 0.3}}},
                {"count": 60, "seed": 4, "strength": {"law": "constant", "value": 0.02},
                 "region": {"cap": {"center": [-0.35, 0.0, 0.94], "angle": 0.3}}},
            ],
            "integrator": {"dt": 0.01, "steps": 400},
            "outputs": {"trajectories": True, "energy": True},
            "diagnostics_every": 10,
        },
        "taylor_mesh": _preset_mesh_common(
            [],
            samplers=[{"count": 120, "seed": 5,
                       "strength": {"law": "constant", "value": 0.01}}],
            balance={"counter_vortex": {"nearest": [0.0, 0.0, -1.5]}},
            dt=0.005, steps=200,
        ),
    }
    docs["random_cloud"] = docs["random_cloud_plane"]
    docs["taylor"] = docs["taylor_plane"]
    docs["leapfrog"] = docs["leapfrog_plane"]
    docs["kimura"] = docs["kimura_plane"]
    return docs


def materialize_preset(name: str, out_dir: str) -> str:
    """Write a preset scenario (plus its mesh asset, if any) into `out_dir`.

    Returns the path of the scenario JSON file.
    """
    docs = presets()
    if name not in docs:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(sorted(docs))}")
    os.makedirs(out_dir, exist_ok=True)
    doc = docs[name]
    geom = doc.get("geometry")
    if isinstance(geom, dict) and "mesh" in geom:
        from .mesh import save_obj

        mesh_file = os.path.join(out_dir, geom["mesh"])
        if not os.path.exists(mesh_file):
            save_obj(_ellipsoid_obj(), mesh_file)
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
