"""Scenario files: JSON schema, loading, validation and object construction."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .acoustics import CavitySpec, EvalGrid, Medium, Opening, SourceLayout, build_pathset
from .acoustics.plant import PLANT_MODES
from .errors import ScenarioError, VsbError
from .signals import SignalSpec

SCHEMA_VERSION = 1

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "name", "seed", "cavity", "opening", "primary",
                 "secondaries", "error_mics", "stimulus"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "sample_rate": {"type": "integer", "minimum": 1},
        "medium": {
            "type": "object", "additionalProperties": False,
            "properties": {"c0": _pos, "rho0": _pos},
        },
        "cavity": {
            "type": "object", "additionalProperties": False,
            "required": ["l_x", "l_y", "l_z"],
            "properties": {"l_x": _pos, "l_y": _pos, "l_z": _pos,
                           "n_max": {"type": "integer", "minimum": 0},
                           "m_max": {"type": "integer", "minimum": 0}},
        },
        "opening": {
            "type": "object", "additionalProperties": False,
            "required": ["center", "width", "height"],
            "properties": {"center": _vec3, "width": _pos, "height": _pos},
        },
        "primary": {
            "type": "object", "additionalProperties": False, "required": ["position"],
            "properties": {"position": _vec3, "strength": {"type": "number"}},
        },
        "equivalent_source": {"enum": ["plane", "modal"]},
        "secondaries": {"type": "array", "items": _vec3, "minItems": 1},
        "error_mics": {"type": "array", "items": _vec3, "minItems": 1},
        "monitor_mics": {"type": "array", "items": _vec3, "minItems": 1},
        "eval_grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "points": {"type": "array", "items": _vec3, "minItems": 1},
                "hemisphere": {
                    "type": "object", "additionalProperties": False,
                    "required": ["radius", "n_points"],
                    "properties": {"radius": _pos, "n_points": {"type": "integer", "minimum": 1}},
                },
            },
        },
        "plant": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(PLANT_MODES)},
                "taps": {"type": "integer", "minimum": 1},
                "secondary_model": {"enum": ["exact", "identified"]},
                "identification": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"duration": _pos, "taps": {"type": "integer", "minimum": 1},
                                   "step_fraction": _pos, "passes": {"type": "integer", "minimum": 1},
                                   "noise_spl": {"type": ["number", "null"]}},
                },
            },
        },
        "controller": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "taps": {"type": "integer", "minimum": 1},
                "step_size": {"type": "number", "minimum": 0},
                "step_fraction": _pos,
                "leakage": {"type": "number", "minimum": 0, "maximum": 1},
                "output_limit": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "stimulus": {
            "type": "object", "required": ["kind", "duration"],
            "properties": {
                "kind": {"enum": list(SignalSpec.KINDS)},
                "duration": _pos,
                "label": {"type": "string"},
            },
        },
        "simulation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "settle": {"type": "number", "minimum": 0},
                "background_spl": {"type": ["number", "null"]},
                "convergence_window": _pos,
                "snapshot_interval": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "reference_noise_rms": {"type": "number", "minimum": 0},
            },
        },
        "analysis": {
            "type": "object", "additionalProperties": False,
            "properties": {"weighting": {"enum": ["flat", "A"]}},
        },
        "sweep": {
            "type": "object", "additionalProperties": False, "required": ["frequencies"],
            "properties": {"frequencies": {"type": "array", "items": _pos, "minItems": 1}},
        },
        "optimal": {
            "type": "object", "additionalProperties": False,
            "properties": {"frequencies": {"type": "array", "items": _pos, "minItems": 1}},
        },
    },
}

DEFAULTS = {
    "sample_rate": 16000,
    "medium": {"c0": 343.0, "rho0": 1.21},
    "equivalent_source": "plane",
    "plant": {"mode": "analytic-freefield", "taps": 128, "secondary_model": "exact",
              "identification": {"duration": 30.0, "taps": 128, "step_fraction": 0.05,
                                 "passes": 1, "noise_spl": None}},
    "controller": {"taps": 128, "leakage": 0.0, "output_limit": None},
    "simulation": {"settle": 0.0, "background_spl": 40.0, "convergence_window": 0.5,
                   "snapshot_interval": None, "reference_noise_rms": 0.0},
    "analysis": {"weighting": "flat"},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    return ".".join(parts) if parts else "<root>"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def scenario_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


@dataclass
class Scenario:
    """A validated scenario with defaults filled in.

    ``raw`` is the document as written (plus any seed override) and is what the
    hash covers; ``cfg`` is the resolved configuration.
    """

    raw: dict
    cfg: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def name(self) -> str:
        return self.cfg["name"]

    @property
    def seed(self) -> int:
        return self.cfg["seed"]

    @property
    def hash(self) -> str:
        return scenario_hash(self.raw)

    @property
    def sample_rate(self) -> int:
        return self.cfg["sample_rate"]

    def provenance(self, backend: str) -> dict:
        return {"seed": self.seed, "scenario_hash": self.hash, "toolkit_version": __version__,
                "kernel_backend": backend}

    # --- object construction -------------------------------------------------

    @property
    def medium(self) -> Medium:
        return Medium(**self.cfg["medium"])

    @property
    def cavity(self) -> CavitySpec:
        return CavitySpec(**self.cfg["cavity"])

    @property
    def opening(self) -> Opening:
        return Opening(**self.cfg["opening"])

    @property
    def layout(self) -> SourceLayout:
        p = self.cfg["primary"]
        return SourceLayout(p["position"], self.cfg["secondaries"], self.opening,
                            q_p=p.get("strength", 1.0), cavity=self.cavity,
                            equivalent=self.cfg["equivalent_source"])

    @property
    def error_mics(self) -> np.ndarray:
        return np.asarray(self.cfg["error_mics"], dtype=float)

    @property
    def monitor_mics(self) -> np.ndarray:
        return np.asarray(self.cfg.get("monitor_mics", self.cfg["error_mics"]), dtype=float)

    def eval_grid(self) -> EvalGrid:
        g = self.cfg.get("eval_grid")
        if g is None:
            raise ScenarioError("eval_grid", "an evaluation grid is required for this operation")
        if "points" in g:
            return EvalGrid(g["points"])
        if "hemisphere" in g:
            h = g["hemisphere"]
            return EvalGrid.hemisphere(self.opening.center, h["radius"], h["n_points"])
        raise ScenarioError("eval_grid", "needs 'points' or 'hemisphere'")

    def pathset(self, mics=None):
        pl = self.cfg["plant"]
        mics = self.error_mics if mics is None else mics
        return build_pathset(self.layout, mics, pl["taps"], self.sample_rate, self.medium, pl["mode"])

    def stimulus_spec(self, frequency=None) -> SignalSpec:
        st = dict(self.cfg["stimulus"])
        kind = st.pop("kind")
        duration = st.pop("duration")
        st.pop("label", None)
        if frequency is not None:
            if kind != "tone":
                raise ScenarioError("stimulus.kind", "tonal sweeps need a 'tone' stimulus")
            st["frequency"] = frequency
        if kind == "bandlimited_wgn":
            st.setdefault("seed", self.seed)
        return SignalSpec(kind, st, duration, self.sample_rate)

    def stimulus_label(self) -> str:
        st = self.cfg["stimulus"]
        if "label" in st:
            return st["label"]
        if st["kind"] == "tone":
            return f"{st['frequency']:g} Hz tone"
        if st["kind"] == "bandlimited_wgn":
            return f"{st['low']:g}~{st['high']:g}Hz WGN"
        if st["kind"] == "wav_file":
            return Path(st["path"]).stem
        return st["kind"]


def parse_scenario(raw: dict, base_dir=None, seed=None) -> Scenario:
    """Validate ``raw`` against the schema and semantic rules; returns a :class:`Scenario`."""
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ScenarioError(_path(e), e.message)
    cfg = _merge(DEFAULTS, raw)
    ctrl = cfg["controller"]
    if ("step_size" in ctrl) == ("step_fraction" in ctrl):
        raise ScenarioError("controller", "exactly one of 'step_size' or 'step_fraction' is required")
    sc = Scenario(raw, cfg, Path(base_dir) if base_dir is not None else Path.cwd())
    _semantic_checks(sc)
    return sc


def _semantic_checks(sc: Scenario):
    """Construct every object once so geometric errors surface at load time."""
    checks = [
        ("medium", lambda: sc.medium),
        ("cavity", lambda: sc.cavity),
        ("opening", lambda: sc.opening),
        ("secondaries", lambda: sc.layout),
        ("stimulus", lambda: sc.stimulus_spec()),
    ]
    if "sweep" in sc.cfg:
        for i, f in enumerate(sc.cfg["sweep"]["frequencies"]):
            checks.append((f"sweep.frequencies.{i}", lambda f=f: sc.stimulus_spec(f)))
    for path, fn in checks:
        try:
            fn()
        except (VsbError, ValueError, KeyError) as exc:
            raise ScenarioError(path, str(exc)) from exc
    op = sc.opening
    cav = sc.cavity
    if abs(op.plane_y - cav.l_y) > 1e-9:
        raise ScenarioError("opening.center", f"opening must lie in the cavity front plane y={cav.l_y}")
    st = sc.cfg["stimulus"]
    if st["kind"] == "wav_file":
        p = Path(st["path"])
        p = p if p.is_absolute() else sc.base_dir / p
        if not p.exists():
            raise ScenarioError("stimulus.path", f"file not found: {p}")
    for key in ("error_mics", "monitor_mics"):
        pts = sc.cfg.get(key)
        if pts is None:
            continue
        for i, pt in enumerate(pts):
            if pt[1] <= op.plane_y:
                raise ScenarioError(f"{key}.{i}", f"point {pt} is not in front of the opening plane")
            if np.min(np.linalg.norm(np.asarray(sc.cfg["secondaries"]) - pt, axis=1)) < 1e-3:
                raise ScenarioError(f"{key}.{i}", f"point {pt} coincides with a secondary source")
    if "eval_grid" in sc.cfg:
        try:
            grid = sc.eval_grid()
        except VsbError as exc:
            raise ScenarioError("eval_grid", str(exc)) from exc
        if np.any(grid.points[:, 1] <= op.plane_y):
            raise ScenarioError("eval_grid", "grid points must lie in front of the opening plane")


def load_scenario(path, seed=None) -> Scenario:
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("<root>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    return parse_scenario(raw, base_dir=path.parent, seed=seed)


def jsonable(obj):
    """Recursively convert numpy types and non-finite floats for strict JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj
