"""Loading, validating and interpreting scenario files."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from jsonschema import Draft202012Validator

from . import geometry as geo
from .budgets import CalorimeterSpec, CloudSpec, ResonatorSpec
from .constants import constants, with_overrides
from .exclusion import CalorimeterExperiment, CloudExperiment, MechanicalExperiment, default_grid
from .schema import REQUIRED_TABLES, SCENARIO_SCHEMA

log = logging.getLogger(__name__)

_VALIDATOR = Draft202012Validator(SCENARIO_SCHEMA)


class ScenarioError(ValueError):
    """The scenario document is malformed or inconsistent."""


def bundled_scenarios():
    root = resources.files("cslbounds") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve(path_or_name) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    p = Path(path_or_name)
    if p.exists():
        return p
    if p.suffix == "" and p.name in bundled_scenarios():
        with resources.as_file(resources.files("cslbounds") / "scenarios" / f"{p.name}.toml") as q:
            return Path(q)
    raise FileNotFoundError(f"scenario file not found: {path_or_name}")


def _where(err):
    return "/".join(str(x) for x in err.absolute_path) or "<root>"


def _unknown_keys(err):
    extra = set(err.instance) - set(err.schema.get("properties", {}))
    return ", ".join(sorted(extra))


@dataclass
class Scenario:
    data: dict
    path: Path | None = None
    warnings: list = field(default_factory=list)

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path else Path.cwd()

    def table(self, name, default=None):
        return self.data.get(name, default)

    def require(self, *names):
        missing = [n for n in names if n not in self.data]
        if missing:
            raise ScenarioError(f"scenario lacks required table(s): {', '.join(missing)}")


def parse(text: str, *, strict=True, path=None, command=None) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path or '<scenario>'}: TOML syntax error: {exc}") from exc
    notes = []
    fatal = []
    for err in sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path)):
        if err.validator == "additionalProperties":
            msg = f"{_where(err)}: unknown key(s) {_unknown_keys(err)}"
            (fatal if strict else notes).append(msg)
        elif err.validator == "oneOf" and all(set(v) == {"required"} for v in err.validator_value):
            keys = " / ".join(k for v in err.validator_value for k in v["required"])
            fatal.append(f"{_where(err)}: give exactly one of {keys}")
        else:
            fatal.append(f"{_where(err)}: {err.message}")
    if fatal:
        raise ScenarioError(f"{path or '<scenario>'}: " + "; ".join(fatal))
    for n in notes:
        log.warning("ignoring %s", n)
    sc = Scenario(data, Path(path) if path else None, notes)
    if command is not None:
        sc.require(*REQUIRED_TABLES[command])
    return sc


def load(path_or_name, *, strict=True, command=None) -> Scenario:
    p = resolve(path_or_name)
    return parse(p.read_text(), strict=strict, path=p, command=command)


# -- builders -----------------------------------------------------------------

def physical_constants(sc: Scenario):
    over = sc.table("constants")
    return with_overrides(**over) if over else constants()


def rtol(sc: Scenario):
    return sc.table("quadrature", {}).get("rtol", 1e-6)


def workers(sc: Scenario):
    return sc.table("quadrature", {}).get("workers")


def build_distribution(t: dict):
    kind = t["type"]
    try:
        if kind == "point":
            return geo.Point(t["mass"])
        if kind == "sphere":
            m = t.get("mass") or t["density"] * 4.0 / 3.0 * math.pi * t["radius"] ** 3
            return geo.Sphere(m, t["radius"])
        if kind == "cuboid":
            m = t.get("mass") or t["density"] * t["lx"] * t["ly"] * t["lz"]
            return geo.Cuboid(m, t["lx"], t["ly"], t["lz"])
        if kind == "cylinder":
            m = t.get("mass") or t["density"] * math.pi * t["radius"] ** 2 * t["height"]
            return geo.Cylinder(m, t["radius"], t["height"], tuple(t.get("axis", (0, 0, 1))))
        if kind == "multilayer":
            layers = [tuple(x) for x in t["layers"]] * t.get("repeat", 1)
            return geo.Multilayer(t["lx"], t["ly"], tuple(layers))
        if kind == "union":
            return geo.Union(tuple((build_distribution(p["shape"]), tuple(p.get("offset", (0, 0, 0))))
                                   for p in t["parts"]))
    except ValueError as exc:
        raise ScenarioError(f"distribution ({kind}): {exc}") from exc
    raise ScenarioError(f"unknown distribution type {kind!r}")


def build_resonator(t: dict, mass=None):
    omega = t.get("omega") or 2 * math.pi * t["frequency"]
    m = t.get("mass", mass)
    if m is None:
        raise ScenarioError("resonator needs a mass (or a test-mass distribution to take it from)")
    if mass is not None and "mass" in t and not math.isclose(t["mass"], mass, rel_tol=1e-6):
        raise ScenarioError(f"resonator mass {t['mass']:g} kg disagrees with the test-mass "
                            f"distribution ({mass:g} kg)")
    try:
        return ResonatorSpec(m, omega, t["Q"], t["T"])
    except ValueError as exc:
        raise ScenarioError(f"resonator: {exc}") from exc


def build_calorimeter(t):
    return CalorimeterSpec(t["mass"], t["heat_leak_ceiling"])


def build_cloud(t, const):
    m = t.get("atom_mass") or t["atom_mass_amu"] * const.amu
    return CloudSpec(m, int(t["nucleons_per_atom"]), t["energy_rate_ceiling"])


def build_experiment(t: dict, const):
    label = t.get("label", t["kind"])
    kind = t["kind"]
    try:
        if kind == "calorimeter":
            return CalorimeterExperiment(build_calorimeter(t["calorimeter"]), label)
        if kind == "cloud":
            return CloudExperiment(build_cloud(t["cloud"], const), label)
        dist = build_distribution(t["distribution"])
        res = build_resonator(t["resonator"], mass=geo.total_mass(dist))
        if "excess_psd_ceiling" in t:
            ceiling = t["excess_psd_ceiling"]
        else:
            ceiling = t["excess_over_thermal"] * 4 * const.k_B * res.T * res.mass * res.omega / res.Q
        return MechanicalExperiment(res, dist, ceiling, label)
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"experiment {label!r}: {exc}") from exc


def overlays_for(sc: Scenario, label):
    """Reference overlays that apply to the experiment ``label``.

    An overlay without an ``experiment`` key applies to every experiment.
    """
    return [o for o in sc.table("overlay", []) if o.get("experiment", label) == label]


def build_grid(sc: Scenario, r_min=None, r_max=None, points=None):
    """r_C grid from the [grid] table, with command-line overrides."""
    g = dict(sc.table("grid", {}))
    if any(v is not None for v in (r_min, r_max, points)):
        g.pop("values", None)
        g.update({k: v for k, v in (("r_C_min", r_min), ("r_C_max", r_max), ("points", points))
                  if v is not None})
    if "values" in g:
        vals = list(g["values"])
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ScenarioError("grid.values must be strictly increasing")
        return vals
    lo, hi, n = g.get("r_C_min", 1e-9), g.get("r_C_max", 1e-4), g.get("points", 61)
    if not (lo > 0 and hi > 0 and n >= 1) or (n > 1 and hi <= lo):
        raise ScenarioError(f"invalid grid r_C_min={lo}, r_C_max={hi}, points={n}")
    if n == 1:
        return [lo]
    return default_grid(lo, hi, n).tolist()
