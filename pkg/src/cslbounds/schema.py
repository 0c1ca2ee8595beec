"""JSON Schema (draft 2020-12) for scenario files.

Scenario files are TOML. After parsing, the document is validated against
:data:`SCENARIO_SCHEMA`. Errors from ``additionalProperties`` are unknown
keys: fatal in strict mode, warnings in lenient mode. Every other
violation is fatal.
"""
from __future__ import annotations

POS = {"type": "number", "exclusiveMinimum": 0}
NONNEG = {"type": "number", "minimum": 0}
VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
LAYER = {"type": "array", "prefixItems": [POS, POS], "minItems": 2, "maxItems": 2}


def _shape(props, required, mass_or_density=False):
    body = {
        "properties": {"type": True, **props},
        "required": list(required),
        "additionalProperties": False,
    }
    if mass_or_density:
        body["properties"].update(mass=POS, density=POS)
        body["oneOf"] = [{"required": ["mass"]}, {"required": ["density"]}]
    return body


_SHAPES = {
    "point": _shape({"mass": POS}, ["mass"]),
    "sphere": _shape({"radius": POS}, ["radius"], mass_or_density=True),
    "cuboid": _shape({"lx": POS, "ly": POS, "lz": POS}, ["lx", "ly", "lz"], mass_or_density=True),
    "cylinder": _shape({"radius": POS, "height": POS, "axis": VEC3}, ["radius", "height"],
                       mass_or_density=True),
    "multilayer": _shape({"lx": POS, "ly": POS,
                          "layers": {"type": "array", "items": LAYER, "minItems": 1},
                          "repeat": {"type": "integer", "minimum": 1}},
                         ["lx", "ly", "layers"]),
    "union": _shape({"parts": {"type": "array", "minItems": 1, "items": {
        "type": "object",
        "properties": {"offset": VEC3, "shape": {"$ref": "#/$defs/distribution"}},
        "required": ["shape"],
        "additionalProperties": False,
    }}}, ["parts"]),
}

DISTRIBUTION = {
    "type": "object",
    "required": ["type"],
    "properties": {"type": {"enum": sorted(_SHAPES)}},
    "allOf": [
        {"if": {"properties": {"type": {"const": name}}}, "then": body}
        for name, body in _SHAPES.items()
    ],
}


def _table(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


RESONATOR = _table({"mass": POS, "omega": POS, "frequency": POS, "Q": {"type": "number", "minimum": 1},
                    "T": POS},
                   ["Q", "T"])
RESONATOR["oneOf"] = [{"required": ["omega"]}, {"required": ["frequency"]}]

CALORIMETER = _table({"mass": POS, "heat_leak_ceiling": POS}, ["mass", "heat_leak_ceiling"])
CLOUD = _table({"atom_mass": POS, "atom_mass_amu": POS,
                "nucleons_per_atom": {"type": "integer", "minimum": 1},
                "energy_rate_ceiling": POS},
               ["nucleons_per_atom", "energy_rate_ceiling"])
CLOUD["oneOf"] = [{"required": ["atom_mass"]}, {"required": ["atom_mass_amu"]}]

EXPERIMENT = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["mechanical", "calorimeter", "cloud"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": "mechanical"}}},
         "then": _table({"kind": True, "label": {"type": "string"}, "note": {"type": "string"},
                         "excess_psd_ceiling": POS, "excess_over_thermal": POS,
                         "resonator": RESONATOR, "distribution": {"$ref": "#/$defs/distribution"}},
                        ["resonator", "distribution"])
         | {"oneOf": [{"required": ["excess_psd_ceiling"]}, {"required": ["excess_over_thermal"]}]}},
        {"if": {"properties": {"kind": {"const": "calorimeter"}}},
         "then": _table({"kind": True, "label": {"type": "string"}, "note": {"type": "string"},
                         "calorimeter": CALORIMETER}, ["calorimeter"])},
        {"if": {"properties": {"kind": {"const": "cloud"}}},
         "then": _table({"kind": True, "label": {"type": "string"}, "note": {"type": "string"},
                         "cloud": CLOUD}, ["cloud"])},
    ],
}

GRID = _table({"r_C_min": POS, "r_C_max": POS, "points": {"type": "integer", "minimum": 1},
               "values": {"type": "array", "items": POS, "minItems": 1}})

OVERLAY = _table({
    "label": {"type": "string"},
    "experiment": {"type": "string"},
    "source": {"type": "string"},
    "note": {"type": "string"},
    "points": {"type": "array", "minItems": 1,
               "items": {"type": "array", "prefixItems": [POS, POS], "minItems": 2, "maxItems": 2}},
}, ["label", "points"])

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"distribution": DISTRIBUTION},
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "meta": _table({"label": {"type": "string"}, "description": {"type": "string"},
                        "provenance": {"type": "string"}}),
        "constants": _table({k: POS for k in ("hbar", "k_B", "G", "m_nucleon", "amu")}),
        "quadrature": _table({"rtol": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
                              "workers": {"type": "integer", "minimum": 1}}),
        "distribution": {"$ref": "#/$defs/distribution"},
        "grid": GRID,
        "collapse": _table({"lambda": NONNEG, "r_C": POS}),
        "dp": _table({"r_DP": POS, "a": POS, "rho": POS}, ["r_DP", "a"]),
        "resonator": RESONATOR,
        "noise": _table({"eta": NONNEG}),
        "calorimeter": CALORIMETER,
        "cloud": CLOUD,
        "experiment": {"type": "array", "items": EXPERIMENT, "minItems": 1},
        "overlay": {"type": "array", "items": OVERLAY},
        "envelope": _table({"curves": {"type": "array", "items": {"type": "string"}, "minItems": 1}}),
        "stack": _table({
            "density_a": POS, "density_b": POS, "lx": POS, "ly": POS,
            "n_pairs": {"type": "integer", "minimum": 1}, "r_C": POS,
            "d_min": POS, "d_max": POS,
            "objective": {"enum": ["eta_hat", "eta_hat_per_mass"]},
            "rel_tol": {"type": "number", "exclusiveMinimum": 0},
            "max_evals": {"type": "integer", "minimum": 2},
        }, ["density_a", "density_b", "lx", "ly", "n_pairs", "r_C", "d_min", "d_max"]),
        "simulation": _table({
            "S_ff_total": NONNEG, "eta": NONNEG, "dt": POS, "duration": POS,
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "x0": {"type": "number"}, "v0": {"type": "number"},
        }, ["dt", "duration"]),
        "psd": _table({"input": {"type": "string"},
                       "segment_length": {"type": "integer", "minimum": 2},
                       "overlap": {"type": "number", "minimum": 0, "maximum": 0.9},
                       "f_min": NONNEG, "f_max": POS},
                      ["segment_length"]),
        "output": _table({"path": {"type": "string"}}),
    },
}

#: Tables each subcommand needs; anything else present is allowed but unused.
REQUIRED_TABLES = {
    "eta": ("distribution",),
    "dp": ("distribution", "dp"),
    "noise": ("resonator",),
    "heat": ("collapse",),
    "exclude": ("experiment",),
    "envelope": (),
    "optimize-stack": ("stack",),
    "simulate": ("simulation", "resonator"),
    "psd": ("psd",),
}
