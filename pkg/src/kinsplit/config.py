"""Scenario files: TOML with documented keys only.

A scenario fixes the entropy, basis, grids, property-P parameters, the
reference state and the initial data, plus scheme, oracle and study options.
Unknown keys and out-of-range values are rejected at load time with the
offending line and key in the message.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import PRESETS, PolyBasis, PropertyPParams, from_monomials, preset
from .dual_field import DualField, XGrid
from .entropy import EntropyParams
from .vquad import VQuadrature, build_quadrature


class ConfigError(ValueError):
    """Scenario parse or validation failure; carries the key and line if known."""
    exit_code = 1

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key, self.line = key, line

    def as_dict(self) -> dict:
        return {"error": "ConfigError", "message": str(self), "key": self.key, "line": self.line}


# section -> {key: (type, default)}; None default means required
_NUM = (int, float)
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "": {"name": (str, "scenario"), "seed": (int, 0)},
    "entropy": {"p": (_NUM, 9 / 8), "c_bar": (_NUM, None)},
    "basis": {"preset": (str, None), "d": (int, 1), "monomials": (list, None)},
    "grid": {"L": (_NUM, 1.0), "N": (int, 64), "d_x": (int, 1)},
    "quad": {"r_factor": (_NUM, 1.5), "panels": (int, 16), "nodes_per_panel": (int, 6)},
    "propertyP": {"R": (_NUM, None), "delta1": (_NUM, None), "r": (_NUM, None),
                  "delta2": (_NUM, None), "check": (bool, True), "stride": (int, 1)},
    "reference": {"gamma": (list, None)},
    "initial": {"preset": (str, "sin-perturb"), "base": (list, None),
                "amplitude": (list, None), "wavenumber": (list, None), "delta1": (_NUM, None)},
    "scheme": {"variant": (str, "transport_projection"), "h": (_NUM, 0.01), "T": (_NUM, 0.2),
               "tol_proj": (_NUM, 1e-10), "eps_gram": (_NUM, 1e-12)},
    "oracle": {"N": (int, 256), "dt": (_NUM, None), "cfl": (_NUM, 0.4)},
    "study": {"h_list": (list, [0.02, 0.01, 0.005, 0.0025]), "cloud_size": (int, 2000),
              "oracle": (bool, True)},
    "outputs": {"state_stride": (int, 10), "ledger": (str, "ledger.json"),
                "moments": (str, "moments.csv"), "states": (str, "state_{n:05d}.csv"),
                "report": (str, "report.json"), "oracle": (str, "oracle.csv"),
                "abort": (str, "abort.json")},
}
INITIAL_PRESETS = ("sin-perturb", "constant")


def _line_of(text: str, section: str, key: str) -> int | None:
    """Best-effort line lookup for ``key`` inside ``[section]``."""
    current = ""
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1)
            continue
        m = re.match(r"^([A-Za-z0-9_.\-\"]+)\s*=", line)
        if not m:
            continue
        full = m.group(1).replace('"', "")
        dotted = f"{current}.{full}" if current else full
        if dotted == (f"{section}.{key}" if section else key):
            return num
    return None


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    entropy: EntropyParams
    basis: PolyBasis
    grid: XGrid
    quad_spec: dict
    guard: PropertyPParams
    guard_on: bool
    guard_stride: int
    lbar: np.ndarray
    initial: dict
    scheme: dict
    oracle: dict
    study: dict
    outputs: dict
    source: str = field(default="<memory>", compare=False)

    @property
    def R_quad(self) -> float:
        return self.quad_spec["r_factor"] * self.guard.R

    def quadrature(self) -> VQuadrature:
        return build_quadrature(self.basis.d, self.R_quad, self.quad_spec["panels"],
                                self.quad_spec["nodes_per_panel"])

    def problem(self):
        from .scheme import Problem
        return Problem(self.entropy, self.basis, self.grid, self.quadrature(), self.lbar)

    def scheme_config(self, h: float | None = None, ledger_on: bool = True):
        from .scheme import SchemeConfig
        s = self.scheme
        return SchemeConfig(variant=s["variant"], h=float(h if h is not None else s["h"]), T=float(s["T"]),
                            guard=self.guard if self.guard_on else None, tol_proj=s["tol_proj"],
                            eps_gram=s["eps_gram"], ledger_on=ledger_on, guard_stride=self.guard_stride,
                            initial_delta1=self.initial["delta1"])

    def initial_coeffs(self, grid: XGrid | None = None) -> np.ndarray:
        """Initial coefficients per grid point, shape (P, k)."""
        grid = grid or self.grid
        ini = self.initial
        base = np.asarray(ini["base"], float)
        pts = grid.points
        if ini["preset"] == "constant":
            return np.tile(base, (grid.size, 1))
        amp = np.asarray(ini["amplitude"], float)
        kw = np.asarray(ini["wavenumber"], float)
        phase = 2 * np.pi * pts[:, :1] * kw[None, :] / grid.L
        return base[None, :] + amp[None, :] * np.sin(phase)

    def initial_field(self) -> DualField:
        return DualField.from_points(self.grid, self.basis, self.initial_coeffs())


def _check_type(value, typ, key, line):
    if typ is _NUM:
        ok = isinstance(value, _NUM) and not isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise ConfigError(f"expected {getattr(typ, '__name__', 'number')}, got {type(value).__name__}",
                          key, line)


def _flatten(data: dict, text: str) -> dict[str, dict]:
    out: dict[str, dict] = {sec: {} for sec in SCHEMA}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError("unknown section", key, _line_of(text, "", key) or _section_line(text, key))
            for sub, v in value.items():
                if isinstance(v, dict):
                    raise ConfigError("nested tables are not supported", f"{key}.{sub}", _line_of(text, key, sub))
                if sub not in SCHEMA[key]:
                    raise ConfigError("unknown key", f"{key}.{sub}", _line_of(text, key, sub))
                out[key][sub] = v
        else:
            if key not in SCHEMA[""]:
                raise ConfigError("unknown key", key, _line_of(text, "", key))
            out[""][key] = value
    return out


def _section_line(text: str, section: str) -> int | None:
    for num, raw in enumerate(text.splitlines(), 1):
        if re.match(rf"^\[\s*{re.escape(section)}\s*\]", raw.strip()):
            return num
    return None


def _resolve(raw: dict[str, dict], text: str) -> dict[str, dict]:
    res = {}
    for sec, keys in SCHEMA.items():
        res[sec] = {}
        for key, (typ, default) in keys.items():
            dotted = f"{sec}.{key}" if sec else key
            if key in raw[sec]:
                val = raw[sec][key]
                _check_type(val, typ, dotted, _line_of(text, sec, key))
            else:
                val = default
            res[sec][key] = val
    return res


def _require(res, sec, key, text):
    if res[sec][key] is None:
        raise ConfigError("missing required key", f"{sec}.{key}", _section_line(text, sec))


def _vector(res, sec, key, k, text, integer=False) -> list:
    vals = res[sec][key]
    line = _line_of(text, sec, key)
    if not isinstance(vals, list) or len(vals) != k:
        raise ConfigError(f"expected a list of {k} numbers", f"{sec}.{key}", line)
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, int if integer else _NUM):
            raise ConfigError("list entries must be " + ("integers" if integer else "numbers"),
                              f"{sec}.{key}", line)
    return [int(v) if integer else float(v) for v in vals]


def parse_scenario(text: str, source: str = "<memory>") -> Scenario:
    """Parse and validate scenario text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(err))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"parse error: {err}", None, line) from err
    res = _resolve(_flatten(data, text), text)

    def wrap(fn, sec, key=None):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError, IndexError, KeyError) as err:
            dotted = f"{sec}.{key}" if key else sec
            raise ConfigError(str(err), dotted, _line_of(text, sec, key) if key else _section_line(text, sec)) \
                from err

    ent = res["entropy"]
    entropy = wrap(lambda: EntropyParams(float(ent["p"]),
                                         None if ent["c_bar"] is None else float(ent["c_bar"])), "entropy", "p")

    bas = res["basis"]
    if (bas["preset"] is None) == (bas["monomials"] is None):
        raise ConfigError("give exactly one of basis.preset and basis.monomials", "basis",
                          _section_line(text, "basis"))
    if bas["preset"] is not None:
        if bas["preset"] not in PRESETS:
            raise ConfigError(f"unknown basis preset (known: {', '.join(PRESETS)})", "basis.preset",
                              _line_of(text, "basis", "preset"))
        basis = preset(bas["preset"])
    else:
        basis = wrap(lambda: from_monomials(bas["d"], [list(e) if isinstance(e, list) else [e]
                                                       for e in bas["monomials"]]), "basis", "monomials")
    k = basis.k

    gr = res["grid"]
    grid = wrap(lambda: XGrid(gr["d_x"], float(gr["L"]), gr["N"]), "grid", "N")

    qd = res["quad"]
    for key in ("r_factor", "panels", "nodes_per_panel"):
        if not qd[key] > 0:
            raise ConfigError("must be positive", f"quad.{key}", _line_of(text, "quad", key))
    if qd["r_factor"] < 1:
        raise ConfigError("quadrature box must contain the property-P ball (r_factor >= 1)", "quad.r_factor",
                          _line_of(text, "quad", "r_factor"))

    pp = res["propertyP"]
    for key in ("R", "delta1", "r", "delta2"):
        _require(res, "propertyP", key, text)
    guard = wrap(lambda: PropertyPParams(float(pp["R"]), float(pp["delta1"]), float(pp["r"]),
                                         float(pp["delta2"])), "propertyP")
    if pp["stride"] < 1:
        raise ConfigError("must be at least 1", "propertyP.stride", _line_of(text, "propertyP", "stride"))

    _require(res, "reference", "gamma", text)
    lbar = np.array(_vector(res, "reference", "gamma", k, text))

    ini = dict(res["initial"])
    if ini["preset"] not in INITIAL_PRESETS:
        raise ConfigError(f"unknown initial preset (known: {', '.join(INITIAL_PRESETS)})", "initial.preset",
                          _line_of(text, "initial", "preset"))
    ini["base"] = lbar.tolist() if ini["base"] is None else _vector(res, "initial", "base", k, text)
    if ini["preset"] == "sin-perturb":
        for key in ("amplitude", "wavenumber"):
            _require(res, "initial", key, text)
        ini["amplitude"] = _vector(res, "initial", "amplitude", k, text)
        ini["wavenumber"] = _vector(res, "initial", "wavenumber", k, text, integer=True)
    if ini["delta1"] is not None and not ini["delta1"] > 0:
        raise ConfigError("must be positive", "initial.delta1", _line_of(text, "initial", "delta1"))

    sch = dict(res["scheme"])
    if sch["variant"] not in ("transport_projection", "bgk"):
        raise ConfigError("variant must be 'transport_projection' or 'bgk'", "scheme.variant",
                          _line_of(text, "scheme", "variant"))
    if not 0 < sch["h"] <= 1:
        raise ConfigError("h must lie in (0, 1]", "scheme.h", _line_of(text, "scheme", "h"))
    if sch["variant"] == "bgk" and not sch["h"] < 1:
        raise ConfigError("the BGK variant needs h < 1", "scheme.h", _line_of(text, "scheme", "h"))
    if not sch["T"] > 0:
        raise ConfigError("T must be positive", "scheme.T", _line_of(text, "scheme", "T"))

    orc = dict(res["oracle"])
    if orc["N"] % grid.N != 0 or orc["N"] % 2:
        raise ConfigError("oracle N must be an even multiple of grid N", "oracle.N", _line_of(text, "oracle", "N"))
    if not 0 < orc["cfl"] <= 0.4:
        raise ConfigError("cfl must lie in (0, 0.4]", "oracle.cfl", _line_of(text, "oracle", "cfl"))
    vmax = qd["r_factor"] * guard.R
    dx_o = float(gr["L"]) / orc["N"]
    if orc["dt"] is None:
        orc["dt"] = orc["cfl"] * dx_o / vmax
    elif not 0 < orc["dt"] <= orc["cfl"] * dx_o / vmax * (1 + 1e-12):
        raise ConfigError(f"dt violates the CFL bound {orc['cfl']}*dx/v_max = {orc['cfl'] * dx_o / vmax:.6g}",
                          "oracle.dt", _line_of(text, "oracle", "dt"))

    st = dict(res["study"])
    st["h_list"] = [float(h) for h in st["h_list"]] if all(
        isinstance(h, _NUM) and not isinstance(h, bool) for h in st["h_list"]) else None
    if not st["h_list"]:
        raise ConfigError("h_list must be a non-empty list of numbers", "study.h_list",
                          _line_of(text, "study", "h_list"))
    if st["cloud_size"] < 1:
        raise ConfigError("must be positive", "study.cloud_size", _line_of(text, "study", "cloud_size"))

    out = dict(res["outputs"])
    if out["state_stride"] < 1:
        raise ConfigError("must be at least 1", "outputs.state_stride", _line_of(text, "outputs", "state_stride"))

    return Scenario(name=res[""]["name"], seed=res[""]["seed"], entropy=entropy, basis=basis, grid=grid,
                    quad_spec={k_: qd[k_] for k_ in ("r_factor", "panels", "nodes_per_panel")},
                    guard=guard, guard_on=pp["check"], guard_stride=pp["stride"], lbar=lbar, initial=ini,
                    scheme=sch, oracle=orc, study=st, outputs=out, source=source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read scenario file: {err.strerror}", None, None) from err
    return parse_scenario(text, str(path))
