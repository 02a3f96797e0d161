"""Run-configuration parsing: YAML with mandatory unit suffixes.

Physical quantities must carry a unit ("48.3 ms", "2 kHz", "54.7 deg");
bare numbers are rejected for them, unknown keys are rejected everywhere,
and every error message carries the line of the offending YAML node.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .noise import ChargeBurstModel, FluctuatorBath, StaticDisorder
from .spin import QuadrupoleGeometry, SpinSystem, quadrupole_frequency


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


# ---------------------------------------------------------------------------
# YAML tree with line information


@dataclass
class _Node:
    value: Any          # scalar, dict[str, _Node] or list[_Node]
    line: int


def _convert(node) -> _Node:
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = str(key_node.value)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
            out[key] = _convert(value_node)
        return _Node(out, line)
    if isinstance(node, yaml.SequenceNode):
        return _Node([_convert(v) for v in node.value], line)
    # scalar: resolve through SafeLoader for native ints/floats/bools/strings
    value = yaml.safe_load(node.value) if node.value != "" else None
    return _Node(value, line)


def _load_tree(text: str) -> _Node:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {exc}", mark.line + 1 if mark else None)
    if root is None:
        raise ConfigError("empty configuration")
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", root.start_mark.line + 1)
    return _convert(root)


# ---------------------------------------------------------------------------
# unit-aware scalars

_UNITS = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "mHz": 1e-3},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "min": 60.0},
    "angle": {"rad": 1.0, "deg": np.pi / 180.0},
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6},
    "gyromagnetic": {"Hz/T": 1.0, "kHz/T": 1e3, "MHz/T": 1e6},
    "efg": {"V/m^2": 1.0, "V/m2": 1.0},
    "area": {"m^2": 1.0, "m2": 1.0, "barn": 1e-28},
    "rate": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "1/s": 1.0},
}


def _parse_quantity(node: _Node, dimension: str) -> float:
    units = _UNITS[dimension]
    raw = node.value
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raise ConfigError(
            f"missing unit: expected a {dimension} like '1.0 {next(iter(units))}'", node.line
        )
    if not isinstance(raw, str):
        raise ConfigError(f"expected a {dimension} quantity string", node.line)
    parts = raw.split()
    if len(parts) != 2:
        raise ConfigError(
            f"cannot parse {raw!r}: use '<number> <unit>' with unit in {sorted(units)}", node.line
        )
    try:
        mag = float(parts[0])
    except ValueError:
        raise ConfigError(f"bad number in {raw!r}", node.line)
    if parts[1] not in units:
        raise ConfigError(
            f"unknown {dimension} unit {parts[1]!r} (allowed: {sorted(units)})", node.line
        )
    return mag * units[parts[1]]


def _parse_number(node: _Node, kind=float):
    v = node.value
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", node.line)
    if kind is int and int(v) != v:
        raise ConfigError(f"expected an integer, got {v!r}", node.line)
    return kind(v)


def _parse_str(node: _Node) -> str:
    if not isinstance(node.value, str):
        raise ConfigError(f"expected a string, got {node.value!r}", node.line)
    return node.value


class _Section:
    """Mapping accessor that records consumed keys and rejects leftovers."""

    def __init__(self, node: _Node, name: str):
        if not isinstance(node.value, dict):
            raise ConfigError(f"section {name!r} must be a mapping", node.line)
        self.node = node
        self.name = name
        self.mapping: dict[str, _Node] = node.value
        self.seen: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.mapping

    def get(self, key: str) -> _Node:
        self.seen.add(key)
        if key not in self.mapping:
            raise ConfigError(f"section {self.name!r} is missing required key {key!r}", self.node.line)
        return self.mapping[key]

    def opt(self, key: str) -> Optional[_Node]:
        self.seen.add(key)
        return self.mapping.get(key)

    def finish(self):
        unknown = set(self.mapping) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(
                f"unknown key {key!r} in section {self.name!r}", self.mapping[key].line
            )


# ---------------------------------------------------------------------------
# resolved configuration


@dataclass
class RunConfig:
    system: SpinSystem
    disorder: StaticDisorder
    baths: list
    burst: Optional[ChargeBurstModel]
    protocol: str
    protocol_params: dict
    ensemble: int
    realizations: int
    seed: int
    workers: int
    out_dir: str
    resolved: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        # output location is excluded: runs into different directories must
        # compare equal for the reproducibility-by-hash check
        hashed = {k: v for k, v in self.resolved.items() if k != "output"}
        blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_TRANSITIONS_3_2 = {"csqt": (1, 2), "ssqt_upper": (0, 1), "ssqt_lower": (2, 3)}

_PROTOCOLS = ("hahn", "phase_cycle", "multiquantum", "cpmg", "tspace")


def _parse_spin_i(node: _Node) -> float:
    v = node.value
    if isinstance(v, str):
        if "/" in v:
            num, den = v.split("/", 1)
            try:
                v = float(num) / float(den)
            except ValueError:
                raise ConfigError(f"cannot parse spin_i {node.value!r}", node.line)
        else:
            try:
                v = float(v)
            except ValueError:
                raise ConfigError(f"cannot parse spin_i {node.value!r}", node.line)
    if not isinstance(v, (int, float)):
        raise ConfigError("spin_i must be a half-integer", node.line)
    if abs(2 * v - round(2 * v)) > 1e-9 or round(2 * v) % 2 != 1 or v <= 0:
        raise ConfigError(
            f"spin_i must be a positive half-integer (1/2, 3/2, ...), got {v}", node.line
        )
    return float(v)


def _parse_transition(node: _Node, sys: SpinSystem) -> tuple[int, int]:
    v = node.value
    if isinstance(v, str):
        key = v.lower()
        if key not in _TRANSITIONS_3_2:
            raise ConfigError(
                f"unknown transition {v!r}; use one of {sorted(_TRANSITIONS_3_2)} or [i, j]",
                node.line,
            )
        if sys.spin_i != 1.5:
            raise ConfigError(
                f"named transition {v!r} is defined for spin 3/2 only; use [i, j]", node.line
            )
        return _TRANSITIONS_3_2[key]
    if isinstance(v, list) and len(v) == 2:
        i = _parse_number(v[0], int)
        j = _parse_number(v[1], int)
        if not (0 <= i < sys.dim and 0 <= j < sys.dim):
            raise ConfigError(f"transition indices ({i}, {j}) out of range", node.line)
        return (i, j)
    raise ConfigError("transition must be a name or a pair [i, j]", node.line)


def _parse_time_list(node: _Node) -> list[float]:
    if not isinstance(node.value, list) or not node.value:
        raise ConfigError("expected a non-empty list of times", node.line)
    return [_parse_quantity(n, "time") for n in node.value]


def _parse_system(sec: _Section) -> tuple[SpinSystem, dict]:
    spin_i = _parse_spin_i(sec.get("spin_i"))
    resolved: dict[str, Any] = {"spin_i": spin_i}

    has_nu0 = sec.has("nu0")
    has_gb = sec.has("gamma_n") or sec.has("b_z")
    if not has_nu0 and not has_gb:
        raise ConfigError("system needs nu0 or (gamma_n, b_z)", sec.node.line)
    nu0 = _parse_quantity(sec.get("nu0"), "frequency") if has_nu0 else None
    if has_gb:
        if not (sec.has("gamma_n") and sec.has("b_z")):
            raise ConfigError("gamma_n and b_z must be given together", sec.node.line)
        gamma_n = _parse_quantity(sec.get("gamma_n"), "gyromagnetic")
        b_z = _parse_quantity(sec.get("b_z"), "field")
        derived = gamma_n * b_z
        if nu0 is not None:
            if abs(nu0 - derived) > 1e-9 * max(abs(nu0), abs(derived), 1.0):
                raise ConfigError(
                    f"over-specified: nu0 = {nu0} Hz conflicts with gamma_n*b_z = {derived} Hz",
                    sec.get("nu0").line,
                )
        else:
            nu0 = derived
        resolved["gamma_n_Hz_per_T"] = gamma_n
        resolved["b_z_T"] = b_z

    has_nuq = sec.has("nu_q")
    has_geom = sec.has("geometry")
    nu_q = _parse_quantity(sec.get("nu_q"), "frequency") if has_nuq else None
    if has_geom:
        g = _Section(sec.get("geometry"), "system.geometry")
        v33 = _parse_quantity(g.get("v33"), "efg")
        q_moment = _parse_quantity(g.get("q_moment"), "area")
        theta = _parse_quantity(g.get("theta"), "angle")
        g.finish()
        geom = QuadrupoleGeometry(v33=v33, q_moment=q_moment, theta=theta)
        derived_q = quadrupole_frequency(geom)
        if nu_q is not None:
            if abs(nu_q - derived_q) > 1e-9 * max(abs(nu_q), abs(derived_q), 1.0):
                raise ConfigError(
                    f"over-specified: nu_q = {nu_q} Hz conflicts with the geometry value "
                    f"{derived_q} Hz",
                    sec.get("nu_q").line,
                )
        else:
            nu_q = derived_q
        resolved["geometry"] = {"v33_V_per_m2": v33, "q_moment_m2": q_moment, "theta_rad": theta}
    if nu_q is None:
        nu_q = 0.0
    nu_rf = (
        _parse_quantity(sec.opt("nu_rf"), "frequency") if sec.has("nu_rf") else nu0
    )
    sec.finish()
    try:
        sys = SpinSystem(spin_i, nu0=nu0, nu_q=nu_q, nu_rf=nu_rf)
    except ValueError as exc:
        raise ConfigError(str(exc), sec.node.line)
    resolved.update({"nu0_Hz": nu0, "nu_q_Hz": nu_q, "nu_rf_Hz": nu_rf})
    return sys, resolved


def _parse_bath(sec: _Section, target: str) -> FluctuatorBath:
    bath = FluctuatorBath(
        target=target,
        n_fluctuators=_parse_number(sec.get("n_fluctuators"), int),
        coupling=_parse_quantity(sec.get("coupling"), "frequency"),
        rate_min=_parse_quantity(sec.get("rate_min"), "rate"),
        rate_max=_parse_quantity(sec.get("rate_max"), "rate"),
    )
    sec.finish()
    return bath


def _parse_burst(sec: _Section) -> ChargeBurstModel:
    kwargs = dict(
        n_traps=_parse_number(sec.get("n_traps"), int),
        coupling_q=_parse_quantity(sec.get("coupling_q"), "frequency"),
        activation=_parse_number(sec.get("activation")),
        relax_rate=_parse_quantity(sec.get("relax_rate"), "rate"),
    )
    if sec.has("while_active_switch_rate"):
        kwargs["while_active_switch_rate"] = _parse_quantity(
            sec.opt("while_active_switch_rate"), "rate"
        )
    if sec.has("activation_light_and_bias"):
        kwargs["activation_light_and_bias"] = _parse_number(sec.opt("activation_light_and_bias"))
    sec.finish()
    try:
        return ChargeBurstModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), sec.node.line)


def _parse_alpha(node: Optional[_Node], default):
    if node is None:
        return default
    if isinstance(node.value, str):
        if node.value != "free":
            raise ConfigError(f"fit_alpha must be a number or 'free', got {node.value!r}", node.line)
        return "free"
    return _parse_number(node)


def _parse_protocol(sec: _Section, sys: SpinSystem) -> tuple[str, dict]:
    kind = _parse_str(sec.get("kind"))
    if kind not in _PROTOCOLS:
        raise ConfigError(f"unknown protocol kind {kind!r}; one of {_PROTOCOLS}", sec.get("kind").line)
    params: dict[str, Any] = {}
    if kind in ("hahn", "cpmg", "tspace"):
        params["transition"] = _parse_transition(sec.get("transition"), sys)
    if kind == "hahn":
        params["tau"] = _parse_time_list(sec.get("tau"))
        marker_node = sec.opt("marker")
        if marker_node is not None:
            m = _Section(marker_node, "protocol.marker")
            mkind = _parse_str(m.get("kind"))
            if mkind not in ("light", "light_and_bias"):
                raise ConfigError(f"marker kind must be light or light_and_bias, got {mkind!r}",
                                  m.get("kind").line)
            params["marker"] = (mkind, _parse_quantity(m.get("t_space"), "time"))
            m.finish()
        params["fit_alpha"] = _parse_alpha(sec.opt("fit_alpha"), 1.0)
    elif kind == "phase_cycle":
        params["init_level"] = _parse_number(sec.get("init_level"), int)
        params["tau1"] = _parse_quantity(sec.get("tau1"), "time")
        params["tau2"] = _parse_quantity(sec.get("tau2"), "time")
        n = sec.opt("n_phase_steps")
        params["n_phase_steps"] = _parse_number(n, int) if n is not None else 24
    elif kind == "multiquantum":
        params["init_level"] = _parse_number(sec.get("init_level"), int)
        params["tau"] = _parse_time_list(sec.get("tau"))
        n = sec.opt("n_phase_steps")
        params["n_phase_steps"] = _parse_number(n, int) if n is not None else 24
        params["fit_alpha"] = _parse_alpha(sec.opt("fit_alpha"), 1.0)
    elif kind == "cpmg":
        node = sec.get("n_list")
        if not isinstance(node.value, list) or not node.value:
            raise ConfigError("n_list must be a non-empty list of integers", node.line)
        params["n_list"] = [_parse_number(n, int) for n in node.value]
        params["total_times"] = _parse_time_list(sec.get("total_times"))
        params["fit_alpha"] = _parse_alpha(sec.opt("fit_alpha"), "free")
    elif kind == "tspace":
        params["t_space"] = _parse_time_list(sec.get("t_space"))
        params["tau"] = _parse_time_list(sec.get("tau"))
        bk = _parse_str(sec.get("burst_kind"))
        if bk not in ("light", "light_and_bias"):
            raise ConfigError(f"burst_kind must be light or light_and_bias, got {bk!r}",
                              sec.get("burst_kind").line)
        params["burst_kind"] = bk
        params["fit_alpha"] = _parse_alpha(sec.opt("fit_alpha"), 2.0)
    if kind in ("hahn", "cpmg", "tspace"):
        i, j = params["transition"]
        if abs(i - j) != 1:
            raise ConfigError(
                f"protocol {kind!r} drives a single-quantum transition; ({i}, {j}) is not adjacent",
                sec.node.line,
            )
    sec.finish()
    return kind, params


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a YAML run configuration."""
    root = _Section(_load_tree(text), "<root>")

    sys, resolved_system = _parse_system(_Section(root.get("system"), "system"))

    disorder_node = root.opt("disorder")
    if disorder_node is not None:
        d = _Section(disorder_node, "disorder")
        sigma0 = _parse_quantity(d.get("sigma_delta_nu0"), "frequency")
        sigmaq = _parse_quantity(d.get("sigma_nu_q"), "frequency")
        d.finish()
    else:
        sigma0 = sigmaq = 0.0

    baths: list[FluctuatorBath] = []
    burst: Optional[ChargeBurstModel] = None
    baths_node = root.opt("baths")
    if baths_node is not None:
        b = _Section(baths_node, "baths")
        if b.has("field"):
            baths.append(_parse_bath(_Section(b.opt("field"), "baths.field"), "field"))
        if b.has("quadrupole"):
            baths.append(
                _parse_bath(_Section(b.opt("quadrupole"), "baths.quadrupole"), "quadrupole")
            )
        if b.has("charge_burst"):
            burst = _parse_burst(_Section(b.opt("charge_burst"), "baths.charge_burst"))
        b.finish()

    ex = _Section(root.get("execution"), "execution")
    ensemble = _parse_number(ex.get("ensemble"), int)
    realizations = _parse_number(ex.opt("realizations"), int) if ex.has("realizations") else 1
    seed_node = ex.get("seed")
    seed = _parse_number(seed_node, int)
    workers = _parse_number(ex.opt("workers"), int) if ex.has("workers") else 1
    ex.finish()
    if ensemble < 1:
        raise ConfigError("ensemble must be >= 1", ex.node.line)
    if realizations < 1:
        raise ConfigError("realizations must be >= 1", ex.node.line)
    if workers < 1:
        raise ConfigError("workers must be >= 1", ex.node.line)

    out_dir = "out"
    out_node = root.opt("output")
    if out_node is not None:
        o = _Section(out_node, "output")
        if o.has("dir"):
            out_dir = _parse_str(o.opt("dir"))
        o.finish()

    kind, params = _parse_protocol(_Section(root.get("protocol"), "protocol"), sys)
    root.finish()

    try:
        disorder = StaticDisorder(sigma0, sigmaq, ensemble_size=ensemble)
    except ValueError as exc:
        raise ConfigError(str(exc))

    resolved = {
        "system": resolved_system,
        "disorder": {"sigma_delta_nu0_Hz": sigma0, "sigma_nu_q_Hz": sigmaq},
        "baths": [
            {
                "target": b_.target,
                "n_fluctuators": b_.n_fluctuators,
                "coupling_Hz": b_.coupling,
                "rate_min_Hz": b_.rate_min,
                "rate_max_Hz": b_.rate_max,
            }
            for b_ in baths
        ],
        "charge_burst": None
        if burst is None
        else {
            "n_traps": burst.n_traps,
            "coupling_q_Hz": burst.coupling_q,
            "activation": burst.activation,
            "activation_light_and_bias": burst.activation_light_and_bias,
            "relax_rate_Hz": burst.relax_rate,
            "while_active_switch_rate_Hz": burst.while_active_switch_rate,
        },
        "protocol": {"kind": kind, **_jsonable(params)},
        "execution": {
            "ensemble": ensemble,
            "realizations": realizations,
            "seed": seed,
            "workers": workers,
        },
        "output": {"dir": out_dir},
    }
    return RunConfig(
        system=sys,
        disorder=disorder,
        baths=baths,
        burst=burst,
        protocol=kind,
        protocol_params=params,
        ensemble=ensemble,
        realizations=realizations,
        seed=seed,
        workers=workers,
        out_dir=out_dir,
        resolved=resolved,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def serialize_resolved(config: RunConfig) -> str:
    """Round-trippable YAML rendering of the resolved configuration."""
    r = config.resolved
    doc = {
        "system": {
            "spin_i": _spin_str(r["system"]["spin_i"]),
            "nu0": f"{r['system']['nu0_Hz']!r} Hz",
            "nu_q": f"{r['system']['nu_q_Hz']!r} Hz",
            "nu_rf": f"{r['system']['nu_rf_Hz']!r} Hz",
        },
        "disorder": {
            "sigma_delta_nu0": f"{r['disorder']['sigma_delta_nu0_Hz']!r} Hz",
            "sigma_nu_q": f"{r['disorder']['sigma_nu_q_Hz']!r} Hz",
        },
        "execution": dict(r["execution"]),
        "output": dict(r["output"]),
        "protocol": _protocol_yaml(config),
    }
    baths = {}
    for b in config.baths:
        baths[b.target if b.target != "quadrupole" else "quadrupole"] = {
            "n_fluctuators": b.n_fluctuators,
            "coupling": f"{b.coupling!r} Hz",
            "rate_min": f"{b.rate_min!r} Hz",
            "rate_max": f"{b.rate_max!r} Hz",
        }
    if config.burst is not None:
        bu = config.burst
        baths["charge_burst"] = {
            "n_traps": bu.n_traps,
            "coupling_q": f"{bu.coupling_q!r} Hz",
            "activation": bu.activation,
            "relax_rate": f"{bu.relax_rate!r} Hz",
            "while_active_switch_rate": f"{bu.while_active_switch_rate!r} Hz",
        }
        if bu.activation_light_and_bias is not None:
            baths["charge_burst"]["activation_light_and_bias"] = bu.activation_light_and_bias
    if baths:
        doc["baths"] = baths
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def _spin_str(spin_i: float) -> str:
    return f"{int(round(2 * spin_i))}/2"


def _protocol_yaml(config: RunConfig) -> dict:
    p = config.protocol_params
    out: dict[str, Any] = {"kind": config.protocol}
    for key, value in p.items():
        if key in ("tau", "total_times", "t_space"):
            out[key] = [f"{t!r} s" for t in value]
        elif key in ("tau1", "tau2"):
            out[key] = f"{value!r} s"
        elif key == "marker" and value is not None:
            out["marker"] = {"kind": value[0], "t_space": f"{value[1]!r} s"}
        elif key == "transition":
            out[key] = list(value)
        else:
            out[key] = value
    return out
