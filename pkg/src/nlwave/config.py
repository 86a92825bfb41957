"""Experiment configuration: TOML sections, defaults, dotted overrides.

A run is described by five sections.  [model] picks the spin count, the
coupling-matrix builder, and the interaction strength; [state] picks the
initial wavefunction; [integrator] carries the step parameters;
[run] holds the output directory and the master seed; [experiment]
names the experiment and carries its private knobs.  Every key has a
default except model.q and experiment.name, unknown keys are rejected,
and the fully resolved configuration (what the manifest echoes) parses
back into the same values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import dynamics, spins
from .errors import ValidationError

_REQUIRED = object()

# key -> (type, default); _REQUIRED must be supplied by the user
_MODEL_KEYS = {
    "q": (int, _REQUIRED),
    "w": (float, 0.0),
    "k": (str, "flip"),
    "kappa": (float, 1.0),
    "shift": (float, -1.0),  # -1 resolves to q + 1
    "scale": (float, 1.0),
    "seed": (int, 7),
    "lam_min": (float, 0.5),
    "lam_max": (float, 2.0),
    "path": (str, ""),
}
_STATE_KEYS = {
    "kind": (str, "symmetric"),
    "f": (str, "s"),
    "g": (str, "s2"),
    "beta": (float, 0.1),
    "seed": (int, 1),
    "path": (str, ""),
}
_INTEGRATOR_KEYS = {
    "dt": (float, 5e-4),
    "steps": (int, 20000),
    "binding": (float, 50.0),
    "record_stride": (int, 10),
}
_RUN_KEYS = {
    "out": (str, "."),
    "seed": (int, 0),
}
_EXPERIMENT_KEYS = {
    "simulate": {"record_detm": (bool, False)},
    "diverge": {"index": (int, 0), "epsilon": (float, 1e-8)},
    "mlce": {"renorm_interval": (int, 10), "tail_fraction": (float, 0.2)},
    "wscan": {"w_min": (float, 0.0), "w_max": (float, 1.0), "points": (int, 11)},
    "dci-series": {},
    "theorem3": {},
    "wstar": {"w_max": (float, 50.0), "tol": (float, 1e-4),
              "grid_points": (int, 200)},
    "continuum": {
        "n_bodies": (int, 2),
        "mass": (float, 1.0),
        "spring": (float, 1.0),
        "w": (float, 0.0),
        "sigma": (float, 2.0),
        "epsilon": (float, 0.5),
        "degree_cap": (int, 8),
        "parity": (str, "even"),
        "s_value": (float, 0.0),
        "dump_operator": (bool, True),
    },
    "identities": {"seed": (int, 20260816), "trials": (int, 1000),
                   "max_size": (int, 8)},
}
EXPERIMENTS = tuple(sorted(_EXPERIMENT_KEYS))

_K_BUILDERS = ("flip", "identity", "random", "file")
_STATE_KINDS = ("symmetric", "random", "raw")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description; sections are plain dicts."""

    model: dict
    state: dict
    integrator: dict
    run: dict
    experiment: dict

    def sections(self) -> dict:
        return {
            "model": dict(self.model),
            "state": dict(self.state),
            "integrator": dict(self.integrator),
            "run": dict(self.run),
            "experiment": dict(self.experiment),
        }


def _coerce(section: str, key: str, want, raw):
    if want is float:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValidationError(
                f"[{section}] {key} wants a number, got {raw!r}"
            )
        value = float(raw)
        if not math.isfinite(value):
            raise ValidationError(f"[{section}] {key} must be finite, got {raw!r}")
        return value
    if want is int:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ValidationError(
                f"[{section}] {key} wants an integer, got {raw!r}"
            )
        return int(raw)
    if want is bool:
        if not isinstance(raw, bool):
            raise ValidationError(
                f"[{section}] {key} wants true or false, got {raw!r}"
            )
        return raw
    if not isinstance(raw, str):
        raise ValidationError(f"[{section}] {key} wants a string, got {raw!r}")
    return raw


def _resolve_section(name: str, table: dict, data: dict) -> dict:
    out = {}
    for key in data:
        if key not in table:
            raise ValidationError(f"[{name}] unknown key {key!r}")
    for key, (want, default) in table.items():
        if key in data:
            out[key] = _coerce(name, key, want, data[key])
        elif default is _REQUIRED:
            raise ValidationError(f"[{name}] missing required key {key!r}")
        else:
            out[key] = default
    return out


def _parse_override_value(want, text: str, path: str):
    if want is bool:
        if text in ("true", "false"):
            return text == "true"
        raise ValidationError(f"override {path} wants true or false, got {text!r}")
    try:
        if want is int:
            return int(text)
        if want is float:
            return float(text)
    except ValueError:
        raise ValidationError(
            f"override {path} wants a {want.__name__}, got {text!r}"
        ) from None
    return text


def _split_override(item: str):
    if "=" not in item:
        raise ValidationError(
            f"override {item!r} is not of the form section.key=value"
        )
    path, text = item.split("=", 1)
    if path.count(".") != 1:
        raise ValidationError(
            f"override path {path!r} is not of the form section.key"
        )
    section, key = path.split(".")
    return section, key, text


def apply_overrides(data: dict, overrides, experiment_name: str) -> dict:
    """Fold dotted --set pairs ("model.w=2.0") into the raw table."""
    tables = {
        "model": _MODEL_KEYS, "state": _STATE_KEYS,
        "integrator": _INTEGRATOR_KEYS, "run": _RUN_KEYS,
        "experiment": _EXPERIMENT_KEYS[experiment_name],
    }
    for item in overrides:
        section, key, text = _split_override(item)
        if section == "experiment" and key == "name":
            continue  # consumed during name resolution
        if section not in tables:
            raise ValidationError(f"override names unknown section {section!r}")
        if key not in tables[section]:
            raise ValidationError(f"override names unknown key [{section}] {key!r}")
        want = tables[section][key][0]
        data.setdefault(section, {})[key] = _parse_override_value(
            want, text, f"{section}.{key}"
        )
    return data


def parse_config(text: str, experiment: str = None,
                 overrides=()) -> RunConfig:
    """Resolve a config document against the schema and defaults."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config does not parse: {exc}") from None
    for section in data:
        if section not in ("model", "state", "integrator", "run", "experiment"):
            raise ValidationError(f"unknown section [{section}]")
        if not isinstance(data[section], dict):
            raise ValidationError(f"[{section}] must be a section, not a value")

    name = data.get("experiment", {}).get("name")
    if name is not None and not isinstance(name, str):
        raise ValidationError(f"[experiment] name wants a string, got {name!r}")
    for item in overrides:
        section, key, text_val = _split_override(item)
        if section == "experiment" and key == "name":
            name = text_val
    if experiment is not None:
        if name is not None and name != experiment:
            raise ValidationError(
                f"config names experiment {name!r} but {experiment!r} was requested"
            )
        name = experiment
    if name is None:
        raise ValidationError("[experiment] missing required key 'name'")
    if name not in _EXPERIMENT_KEYS:
        raise ValidationError(
            f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}"
        )

    data = apply_overrides(data, overrides, name)
    exp_data = dict(data.get("experiment", {}))
    exp_data.pop("name", None)
    exp = _resolve_section("experiment", _EXPERIMENT_KEYS[name], exp_data)
    exp["name"] = name

    model = _resolve_section("model", _MODEL_KEYS, data.get("model", {}))
    state = _resolve_section("state", _STATE_KEYS, data.get("state", {}))
    integ = _resolve_section("integrator", _INTEGRATOR_KEYS,
                             data.get("integrator", {}))
    run = _resolve_section("run", _RUN_KEYS, data.get("run", {}))

    if model["k"] not in _K_BUILDERS:
        raise ValidationError(
            f"[model] k must be one of {', '.join(_K_BUILDERS)}, got {model['k']!r}"
        )
    if model["k"] == "file" and not model["path"]:
        raise ValidationError("[model] k = 'file' needs a path")
    if model["shift"] == -1.0:
        model["shift"] = float(model["q"] + 1)
    if state["kind"] not in _STATE_KINDS:
        raise ValidationError(
            f"[state] kind must be one of {', '.join(_STATE_KINDS)}, "
            f"got {state['kind']!r}"
        )
    if state["kind"] == "raw" and not state["path"]:
        raise ValidationError("[state] kind = 'raw' needs a path")
    return RunConfig(model, state, integ, run, exp)


def load_config(path, experiment: str = None, overrides=()) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, experiment, overrides)


def render_config(cfg: RunConfig) -> str:
    """Emit the resolved config as a parseable TOML document."""
    lines = []
    for section, table in cfg.sections().items():
        lines.append(f"[{section}]")
        for key, val in table.items():
            if isinstance(val, bool):
                lines.append(f"{key} = {'true' if val else 'false'}")
            elif isinstance(val, int):
                lines.append(f"{key} = {val}")
            elif isinstance(val, float):
                lines.append(f"{key} = {val!r}")
            else:
                lines.append(f'{key} = "{val}"')
        lines.append("")
    return "\n".join(lines)


def build_model(cfg: RunConfig) -> spins.SpinModel:
    """Spin space, coupling matrix, and strength from the model section."""
    m = cfg.model
    space = spins.enumerate_configs(m["q"])
    if m["k"] == "flip":
        k = spins.build_k_flip_graph(space, m["kappa"], m["shift"])
    elif m["k"] == "identity":
        k = spins.build_k_identity(space, m["scale"])
    elif m["k"] == "random":
        k = spins.build_k_random_spd(space, m["seed"], m["lam_min"], m["lam_max"])
    else:
        k = spins.load_k_matrix(space, m["path"])
    return spins.SpinModel(space, k, m["w"])


def build_state(cfg: RunConfig, space: spins.SpinConfigSpace) -> spins.WaveState:
    s = cfg.state
    if s["kind"] == "symmetric":
        return spins.symmetric_state(space, s["f"], s["g"], s["beta"])
    if s["kind"] == "random":
        return spins.random_state(space, s["seed"])
    state = spins.read_state_text(s["path"])
    if state.q.shape[0] != space.size:
        raise ValidationError(
            f"state file holds {state.q.shape[0]} pairs, model wants {space.size}"
        )
    return state


def build_integrator(cfg: RunConfig) -> dynamics.IntegratorConfig:
    i = cfg.integrator
    return dynamics.IntegratorConfig(
        dt=i["dt"], steps=i["steps"], binding=i["binding"],
        record_stride=i["record_stride"],
    )
