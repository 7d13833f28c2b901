"""JSON run configurations: validation, unit normalization and resolution.

A config is normalized to ``kappa = 1``: frequencies, rates, couplings and
drive strengths are divided by ``kappa`` and times are multiplied by it.
The *resolved* config has every derived quantity written out explicitly
(``gamma`` instead of ``Q_m``, absolute couplings, filled-in defaults) and
is itself a valid config that reproduces the same run.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import jsonschema

from .core import (OmitCoolError, ParameterError, SystemParams, Tone, ToneSet,
                   cascaded_tone_set, default_n_c_th)
from .dynamics import DynamicsControls
from .meanfield import DriveSpec

TASKS = ("spectrum", "rates", "evolve", "oracle-check", "sweep", "meanfield")
_OPTION_SCHEMA = {"spectrum": "spectrum_options", "rates": "rates_options",
                  "evolve": "evolve_options", "oracle-check": "oracle_options",
                  "sweep": "sweep_options", "meanfield": "meanfield_options"}
_MEANFIELD_KEYS = {"meanfield_damping": "damping", "meanfield_rtol": "rtol",
                   "meanfield_max_iter": "max_iter"}


class ConfigError(OmitCoolError):
    """Config file unreadable, schema-invalid or semantically inconsistent."""


def load_schema() -> dict:
    text = resources.files("omit_cool").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def recipe_names():
    folder = resources.files("omit_cool").joinpath("recipes")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def read_recipe(name) -> dict:
    name = name[:-5] if name.endswith(".json") else name
    path = resources.files("omit_cool").joinpath(f"recipes/{name}.json")
    if not path.is_file():
        raise ConfigError(f"no bundled recipe named {name!r}")
    return json.loads(path.read_text())


def _complex(v):
    return complex(v) if isinstance(v, (int, float)) else complex(v[0], v[1])


def _complex_json(z):
    return [z.real, z.imag]


def _validate(data, schema, ref=None):
    target = schema if ref is None else {"$ref": f"#/$defs/{ref}", "$defs": schema["$defs"]}
    validator = jsonschema.Draft202012Validator(target)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}")


@dataclass
class RunConfig:
    """A validated, normalized run description."""

    task: str
    params: SystemParams
    tones: ToneSet | None
    drives: list | None
    cascade: dict | None
    options: dict
    controls: DynamicsControls
    meanfield: dict
    output: str | None
    resolved: dict


def _resolve_system(sys_block):
    k = float(sys_block["kappa"])
    w = sys_block["omega_m"] / k
    wc = sys_block["omega_mc"] / k
    gamma = sys_block["gamma"] / k if "gamma" in sys_block else w / sys_block["Q_m"]
    gamma_c = sys_block["gamma_c"] / k if "gamma_c" in sys_block else wc / sys_block["Q_mc"]
    g = sys_block["g"] / k if "g" in sys_block else sys_block["g_over_omega_m"] * w
    g_c = sys_block["g_c"] / k if "g_c" in sys_block else sys_block["g_c_over_omega_mc"] * wc
    n_th = float(sys_block["n_th"])
    defaulted = "n_c_th" not in sys_block
    n_c_th = default_n_c_th(n_th, w, wc) if defaulted else float(sys_block["n_c_th"])
    params = SystemParams(omega_m=w, omega_mc=wc, kappa=1.0, gamma=gamma, gamma_c=gamma_c,
                          g=g, g_c=g_c, n_th=n_th, n_c_th=n_c_th)
    resolved = {"kappa": 1.0, "omega_m": w, "omega_mc": wc, "gamma": gamma, "gamma_c": gamma_c,
                "g": g, "g_c": g_c, "n_th": n_th, "n_c_th": n_c_th}
    return params, resolved, defaulted


def _resolve_tones(block, params, kappa):
    kind, body = next(iter(block.items()))
    if kind == "explicit":
        tones = ToneSet(tuple(Tone(_complex(t["alpha"]), t["delta_prime"] / kappa) for t in body))
        return tones, None, None, {"explicit": tones.to_list()}
    if kind == "cascaded":
        alphas = [_complex(a) for a in body["alphas"]]
        if "delta_0_prime" in body:
            d0 = body["delta_0_prime"] / kappa
            cascade = {"alphas": alphas, "delta_0_prime": d0}
            res = {"alphas": [_complex_json(a) for a in alphas], "delta_0_prime": d0}
        else:
            ratio = float(body["delta_0_prime_over_omega_m"])
            d0 = ratio * params.omega_m
            cascade = {"alphas": alphas, "delta_0_over_omega_m": ratio}
            res = {"alphas": [_complex_json(a) for a in alphas],
                   "delta_0_prime_over_omega_m": ratio}
        tones = cascaded_tone_set(d0, params.omega_mc, params.omega_m, alphas)
        return tones, None, cascade, {"cascaded": res}
    drives = [DriveSpec(d["omega_drive_detuning"] / kappa, _complex(d["strength"]) / kappa)
              for d in body]
    return None, drives, None, {"drives": [d.to_dict() for d in drives]}


def _resolve_options(task, opts, kappa, params, n_c_defaulted):
    o = copy.deepcopy(opts)
    if task == "spectrum":
        if "grid" in o:
            grid = [x / kappa for x in o["grid"]]
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError("spectrum grid must be strictly increasing")
            o["grid"] = grid
        else:
            o["omega_min"] /= kappa
            o["omega_max"] /= kappa
            if not o["omega_max"] > o["omega_min"]:
                raise ConfigError("omega_max must exceed omega_min")
    elif task == "evolve":
        o["t_end"] *= kappa
        if "output_stride" in o:
            o["output_stride"] *= kappa
        else:
            o["output_stride"] = o["t_end"] / 1000
        o["periodic_check"] = bool(o.get("periodic_check", False))
    elif task == "oracle-check":
        o["t_end"] *= kappa
        o["output_stride"] = o["output_stride"] * kappa if "output_stride" in o else o["t_end"] / 100
        if "max_step" in o:
            o["max_step"] *= kappa
        o.setdefault("occupations", [0.0, params.n_th, params.n_c_th])
    elif task == "sweep":
        axis = o["axis"]
        if isinstance(axis, dict):
            axis = dict(axis, start=axis["start"] / kappa, stop=axis["stop"] / kappa)
            axis.setdefault("spacing", "log")
            if not axis["stop"] > axis["start"] and axis["num"] > 1:
                raise ConfigError("sweep axis stop must exceed start")
        else:
            axis = [x / kappa for x in axis]
        o["axis"] = axis
        o["verify_points"] = [x / kappa for x in o.get("verify_points", [])]
        o.setdefault("mode", "rates-only")
        o.setdefault("with_control", True)
        o.setdefault("hold_quality", True)
        o.setdefault("scale_n_c_th", n_c_defaulted)
        o.setdefault("check_stability", o["kind"] == "cooling_limit")
    return o


def _resolve_numerics(block, kappa):
    block = dict(block or {})
    meanfield = {_MEANFIELD_KEYS[k]: block.pop(k) for k in list(block) if k in _MEANFIELD_KEYS}
    for key in ("max_step", "t_max"):
        if key in block:
            block[key] *= kappa
    names = {f.name for f in fields(DynamicsControls)}
    controls = DynamicsControls(**{k: v for k, v in block.items() if k in names})
    resolved = {k: v for k, v in controls.to_dict().items() if v is not None}
    resolved.update({f"meanfield_{k}": v for k, v in meanfield.items()})
    return controls, meanfield, resolved


def parse_config(data: dict) -> RunConfig:
    """Validate and normalize a config dictionary. Raises :class:`ConfigError`."""
    schema = load_schema()
    _validate(data, schema)
    task = data["task"]
    options = data.get("options", {})
    _validate(options, schema, _OPTION_SCHEMA[task])
    kappa = float(data["system"]["kappa"])
    try:
        params, sys_res, n_c_defaulted = _resolve_system(data["system"])
        tones, drives, cascade, tones_res = _resolve_tones(data["tones"], params, kappa)
        opts = _resolve_options(task, options, kappa, params, n_c_defaulted)
        controls, meanfield, num_res = _resolve_numerics(data.get("numerics"), kappa)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if task == "meanfield" and drives is None:
        raise ConfigError("task 'meanfield' needs a 'drives' tone block")
    if task == "sweep" and cascade is None:
        raise ConfigError("task 'sweep' needs a 'cascaded' tone block as template")
    resolved = {"task": task, "system": sys_res, "tones": tones_res, "options": opts,
                "numerics": num_res}
    if "description" in data:
        resolved["description"] = data["description"]
    return RunConfig(task=task, params=params, tones=tones, drives=drives, cascade=cascade,
                     options=opts, controls=controls, meanfield=meanfield,
                     output=data.get("output"), resolved=resolved)


def load_config(path_or_name) -> RunConfig:
    """Read a config file, falling back to a bundled recipe of that name."""
    path = Path(path_or_name)
    try:
        if path.is_file():
            data = json.loads(path.read_text())
        else:
            data = read_recipe(path.name)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data)
