"""Declarative scenario files.

A scenario is one UTF-8 JSON document.  Everything is validated, and every
referenced file is read, before any task runs; unknown keys are rejected
with their key path.  See ``README.md`` for the full schema.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import BoundaryWarning, DQLabError, ValidationError
from .kernels import TimeGrid, TimeSeries, TwoTimeKernel, enforce_window
from .probes import ProbeModel
from .waveforms import WAVEFORMS

TASKS = (
    "sum_covariance",
    "commutators",
    "psd_check",
    "snr",
    "sql_dql_curves",
    "stationary_spectrum",
    "memoryless_optimize",
    "stationary_optimize",
    "quadrature_bounds",
)


class ScenarioIOError(DQLabError, OSError):
    """A scenario or a file it references could not be read."""


@dataclass(frozen=True, eq=False)
class Task:
    name: str
    options: dict


@dataclass(frozen=True, eq=False)
class SpectrumSpec:
    model: str
    params: dict

    def __call__(self, omegas):
        w = np.asarray(omegas, dtype=float)
        scale = self.params.get("scale", 1.0)
        if self.model == "white":
            return np.full(w.shape, scale * self.params["level"], dtype=complex)
        if self.model == "lorentzian":
            lam, var = self.params["rate"], self.params["variance"]
            return (scale * 2 * lam * var / (lam ** 2 + w ** 2)).astype(complex)
        raise ValidationError(f"unknown spectrum model {self.model!r}")


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: TimeGrid
    hbar: float
    seed: int
    output_dir: str
    probe: ProbeModel | None
    pin_boundary: bool
    rigidity: Any            # None | TimeSeries | TwoTimeKernel
    meter_noise: dict | None
    thermal: Any             # None | float | SpectrumSpec | TwoTimeKernel
    signal: TimeSeries | None
    filters: list
    tasks: list
    source: Path | None = None
    digest: str = ""
    warnings: list = field(default_factory=list)


# -- low-level validation helpers -------------------------------------------

def _check_keys(obj, allowed, path, required=()):
    if not isinstance(obj, dict):
        raise ValidationError(f"expected an object, got {type(obj).__name__}", path)
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"unknown key {key!r}", path)
    for key in required:
        if key not in obj:
            raise ValidationError(f"missing required key {key!r}", path)


def _number(obj, key, path, default=None, positive=False, nonneg=False):
    if key not in obj:
        if default is None:
            raise ValidationError(f"missing required key {key!r}", path)
        return float(default)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ValidationError(f"{key!r} must be a finite number", path)
    if positive and not value > 0:
        raise ValidationError(f"{key!r} must be positive", path)
    if nonneg and value < 0:
        raise ValidationError(f"{key!r} must be non-negative", path)
    return float(value)


def _join(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _read_csv_column(path: Path, column: str, where: str) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ScenarioIOError(f"{where}: cannot read {path}: {exc}") from exc
    if not rows or column not in rows[0]:
        raise ValidationError(f"column {column!r} not found in {path}", where)
    try:
        return np.array([float(r[column]) for r in rows])
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry in {path}: {exc}", where) from exc


def _read_kernel(path: Path, grid: TimeGrid, where: str) -> TwoTimeKernel:
    try:
        if path.suffix == ".npy":
            values = np.load(path)
        else:
            values = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ScenarioIOError(f"{where}: cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"cannot parse kernel file {path}: {exc}", where) from exc
    return TwoTimeKernel(grid, values)


# -- component parsers -------------------------------------------------------

def _parse_grid(obj, path="grid") -> TimeGrid:
    _check_keys(obj, {"t_start", "t_end", "n"}, path, required=("t_start", "t_end", "n"))
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError("'n' must be an integer", path)
    try:
        return TimeGrid(_number(obj, "t_start", path), _number(obj, "t_end", path), n)
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def parse_series(spec, grid: TimeGrid, path: str, base: Path) -> TimeSeries:
    """Number (constant), inline array, built-in waveform, or CSV column."""
    if isinstance(spec, bool):
        raise ValidationError("expected a number, array or object", path)
    if isinstance(spec, (int, float)):
        return TimeSeries.constant(grid, float(spec))
    if isinstance(spec, list):
        if len(spec) != grid.n:
            raise ValidationError(f"inline series has {len(spec)} samples, grid has {grid.n}", path)
        try:
            return TimeSeries(grid, np.array(spec, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"invalid inline series: {exc}", path) from None
    if not isinstance(spec, dict):
        raise ValidationError("expected a number, array or object", path)
    if "file" in spec:
        _check_keys(spec, {"file", "column"}, path, required=("file", "column"))
        values = _read_csv_column(base / spec["file"], spec["column"], path)
        if values.size != grid.n:
            raise ValidationError(f"file series has {values.size} samples, grid has {grid.n}", path)
        return TimeSeries(grid, values)
    if "waveform" not in spec:
        raise ValidationError("series object needs 'waveform' or 'file'", path)
    name = spec["waveform"]
    if name not in WAVEFORMS:
        raise ValidationError(f"unknown waveform {name!r} (known: {', '.join(WAVEFORMS)})", path)
    func, params = WAVEFORMS[name]
    _check_keys(spec, {"waveform", *params}, path)
    kwargs = {p: _number(spec, p, path) for p in params if p in spec}
    for p in ("sigma", "duration"):
        if p in kwargs and not kwargs[p] > 0:
            raise ValidationError(f"{p!r} must be positive", path)
    return TimeSeries(grid, func(grid.times, **kwargs))


def parse_spectrum(spec, path: str) -> SpectrumSpec:
    if not isinstance(spec, dict) or "model" not in spec:
        raise ValidationError("spectrum must be an object with a 'model'", path)
    model = spec["model"]
    if model == "white":
        _check_keys(spec, {"model", "level", "scale"}, path, required=("level",))
        params = {"level": _number(spec, "level", path)}
    elif model == "lorentzian":
        _check_keys(spec, {"model", "variance", "rate", "scale"}, path, required=("variance", "rate"))
        params = {"variance": _number(spec, "variance", path, nonneg=True),
                  "rate": _number(spec, "rate", path, positive=True)}
    else:
        raise ValidationError(f"unknown spectrum model {model!r} (known: white, lorentzian)", path)
    params["scale"] = _number(spec, "scale", path, default=1.0)
    return SpectrumSpec(model, params)


def _parse_probe(obj, grid, base, path="probe"):
    _check_keys(obj, {"kind", "mass", "omega0", "gamma", "kernel_file", "pin_boundary"}, path,
                required=("kind",))
    kind = obj["kind"]
    pin = obj.get("pin_boundary", False)
    if not isinstance(pin, bool):
        raise ValidationError("'pin_boundary' must be true or false", path)
    if kind == "custom":
        if "kernel_file" not in obj:
            raise ValidationError("custom probe needs 'kernel_file'", path)
        for key in ("mass", "omega0", "gamma"):
            if key in obj:
                raise ValidationError(f"{key!r} does not apply to a custom probe", path)
        return ProbeModel("custom", kernel=_read_kernel(base / obj["kernel_file"], grid, path)), pin
    if kind not in ("free_mass", "damped_oscillator"):
        raise ValidationError(f"unknown probe kind {kind!r}", path)
    if "kernel_file" in obj:
        raise ValidationError("'kernel_file' only applies to custom probes", path)
    mass = _number(obj, "mass", path, positive=True)
    if kind == "free_mass":
        for key in ("omega0", "gamma"):
            if key in obj:
                raise ValidationError(f"{key!r} does not apply to a free mass", path)
        return ProbeModel("free_mass", mass=mass), pin
    return ProbeModel("damped_oscillator", mass=mass,
                      omega0=_number(obj, "omega0", path, nonneg=True),
                      gamma=_number(obj, "gamma", path, nonneg=True)), pin


def _parse_rigidity(obj, grid, base, path="rigidity"):
    _check_keys(obj, {"profile", "kernel_file"}, path)
    if ("profile" in obj) == ("kernel_file" in obj):
        raise ValidationError("rigidity needs exactly one of 'profile' or 'kernel_file'", path)
    if "profile" in obj:
        return parse_series(obj["profile"], grid, _join(path, "profile"), base)
    return _read_kernel(base / obj["kernel_file"], grid, path)


def _parse_meter_noise(obj, grid, base, path="meter_noise"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValidationError("meter_noise must be an object with a 'type'", path)
    kind = obj["type"]
    if kind == "memoryless":
        _check_keys(obj, {"type", "S_xx", "S_FF", "S_xF"}, path, required=("S_FF",))
        out = {"type": kind}
        out["S_FF"] = parse_series(obj["S_FF"], grid, _join(path, "S_FF"), base)
        out["S_xF"] = parse_series(obj.get("S_xF", 0.0), grid, _join(path, "S_xF"), base)
        sxx = obj.get("S_xx", "minimum_uncertainty")
        if sxx == "minimum_uncertainty":
            out["S_xx"] = None
        else:
            out["S_xx"] = parse_series(sxx, grid, _join(path, "S_xx"), base)
        if not np.all(out["S_FF"].values > 0):
            raise ValidationError("S_FF(t) must be positive everywhere", _join(path, "S_FF"))
        if out["S_xx"] is not None and not np.all(out["S_xx"].values > 0):
            raise ValidationError("S_xx(t) must be positive everywhere", _join(path, "S_xx"))
        return out
    if kind == "stationary":
        _check_keys(obj, {"type", "S_xx", "S_FF", "S_xF"}, path, required=("S_xx", "S_FF"))
        out = {"type": kind}
        for key in ("S_xx", "S_FF", "S_xF"):
            if key in obj:
                out[key] = parse_spectrum(obj[key], _join(path, key))
            else:
                out[key] = None
        return out
    if kind == "explicit":
        _check_keys(obj, {"type", "B_xx", "B_FF", "B_xF"}, path, required=("B_xx", "B_FF", "B_xF"))
        out = {"type": kind}
        for key in ("B_xx", "B_FF", "B_xF"):
            out[key] = _read_kernel(base / obj[key], grid, _join(path, key))
        return out
    raise ValidationError(f"unknown meter noise type {kind!r} (known: memoryless, stationary, explicit)", path)


def _parse_thermal(obj, grid, base, path="thermal"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValidationError("thermal must be an object with a 'type'", path)
    kind = obj["type"]
    if kind == "zero":
        _check_keys(obj, {"type"}, path)
        return None
    if kind == "white":
        _check_keys(obj, {"type", "level"}, path, required=("level",))
        return _number(obj, "level", path, nonneg=True)
    if kind == "spectrum":
        _check_keys(obj, {"type", "spectrum"}, path, required=("spectrum",))
        return parse_spectrum(obj["spectrum"], _join(path, "spectrum"))
    if kind == "explicit":
        _check_keys(obj, {"type", "kernel_file"}, path, required=("kernel_file",))
        return _read_kernel(base / obj["kernel_file"], grid, path)
    raise ValidationError(f"unknown thermal type {kind!r}", path)


TASK_OPTIONS = {
    "sum_covariance": {"write_matrix"},
    "commutators": set(),
    "psd_check": {"require_pass"},
    "snr": set(),
    "sql_dql_curves": {"omega_min", "omega_max", "points", "source"},
    "stationary_spectrum": {"margin"},
    "memoryless_optimize": {"filter", "trials", "amplitude"},
    "stationary_optimize": {"omega", "budgets", "budget_units", "K"},
    "quadrature_bounds": {"omega0", "H", "env_c", "env_s"},
}


def _parse_task(obj, path):
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict) or "name" not in obj:
        raise ValidationError("task must be a name or an object with 'name'", path)
    name = obj["name"]
    if name not in TASKS:
        raise ValidationError(f"unknown task {name!r} (known: {', '.join(TASKS)})", path)
    _check_keys(obj, {"name", *TASK_OPTIONS[name]}, path)
    return Task(name, {k: v for k, v in obj.items() if k != "name"})


def _validate_task_inputs(sc: Scenario, task: Task, path: str, base: Path) -> Task:
    """Check required inputs and normalize task options."""
    opts = dict(task.options)
    name = task.name
    noise = sc.meter_noise

    def need(cond, what):
        if not cond:
            raise ValidationError(f"task {name!r} requires {what}", path)

    if name in ("sum_covariance", "commutators", "psd_check", "snr", "sql_dql_curves",
                "stationary_spectrum", "memoryless_optimize", "stationary_optimize"):
        need(sc.probe is not None, "a probe")
    if name in ("sum_covariance", "psd_check", "snr", "stationary_spectrum"):
        need(noise is not None, "meter_noise")
    if name == "snr":
        need(sc.signal is not None, "a signal")
        need(bool(sc.filters), "at least one filter")
    if name == "stationary_spectrum":
        need(noise is not None and noise["type"] == "stationary", "stationary meter_noise")
        margin = opts.get("margin", 4)
        need(isinstance(margin, int) and not isinstance(margin, bool) and 4 <= margin < sc.grid.n // 4,
             "an integer 'margin' between 4 and n/4")
        opts["margin"] = margin
    if name == "psd_check":
        req = opts.get("require_pass", False)
        need(isinstance(req, bool), "a boolean 'require_pass'")
        opts["require_pass"] = req
    if name == "sum_covariance":
        wm = opts.get("write_matrix", True)
        need(isinstance(wm, bool), "a boolean 'write_matrix'")
        opts["write_matrix"] = wm
    if name == "memoryless_optimize":
        need(bool(sc.filters), "a filter")
        need(noise is not None and noise["type"] == "memoryless", "memoryless meter_noise (for S_FF)")
        idx = opts.get("filter", 0)
        need(isinstance(idx, int) and not isinstance(idx, bool) and 0 <= idx < len(sc.filters),
             "a valid 'filter' index")
        trials = opts.get("trials", 1000)
        need(isinstance(trials, int) and not isinstance(trials, bool) and trials >= 0,
             "a non-negative integer 'trials'")
        opts["filter"], opts["trials"] = idx, trials
        opts["amplitude"] = _number(opts, "amplitude", path, default=0.1, positive=True)
    if name == "sql_dql_curves":
        source = opts.get("source", "analytic" if sc.probe is not None and sc.probe.kind != "custom"
                          else "kernel")
        need(source in ("analytic", "kernel"), "'source' of 'analytic' or 'kernel'")
        need(not (source == "analytic" and sc.probe.kind == "custom"),
             "source 'kernel' for a custom probe")
        opts["source"] = source
        if source == "analytic":
            points = opts.get("points", 256)
            need(isinstance(points, int) and not isinstance(points, bool) and points >= 2,
                 "an integer 'points' >= 2")
            opts["points"] = points
            opts["omega_min"] = _number(opts, "omega_min", path,
                                        default=2 * np.pi / sc.grid.duration, positive=True)
            opts["omega_max"] = _number(opts, "omega_max", path, default=0.3 / sc.grid.dt, positive=True)
            need(opts["omega_max"] > opts["omega_min"], "omega_max > omega_min")
        else:
            for key in ("omega_min", "omega_max", "points"):
                need(key not in opts, f"no {key!r} with source 'kernel' (DFT frequencies are used)")
    if name == "stationary_optimize":
        need(sc.probe.kind != "custom", "a named probe model (closed-form response spectrum)")
        default_omega = sc.probe.omega0 if sc.probe.kind == "damped_oscillator" and sc.probe.omega0 > 0 else None
        if "omega" not in opts and default_omega is None:
            raise ValidationError("task 'stationary_optimize' requires 'omega'", path)
        opts["omega"] = _number(opts, "omega", path, default=default_omega)
        budgets = opts.get("budgets")
        need(isinstance(budgets, list) and budgets and all(
            isinstance(b, (int, float)) and not isinstance(b, bool) and b > 0 for b in budgets),
            "a non-empty list of positive 'budgets'")
        opts["budgets"] = [float(b) for b in budgets]
        units = opts.get("budget_units", "absolute")
        need(units in ("absolute", "dql"), "'budget_units' of 'absolute' or 'dql'")
        opts["budget_units"] = units
        k = opts.get("K", [0.0, 0.0])
        need(isinstance(k, list) and len(k) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in k),
            "'K' as [re, im]")
        opts["K"] = complex(k[0], k[1])
    if name == "quadrature_bounds":
        for key in ("omega0", "env_c", "env_s"):
            if key not in opts:
                raise ValidationError(f"task 'quadrature_bounds' requires {key!r}", path)
        opts["omega0"] = _number(opts, "omega0", path, positive=True)
        if "H" in opts:
            opts["H"] = _number(opts, "H", path, nonneg=True)
        else:
            need(sc.probe is not None and sc.probe.kind == "damped_oscillator",
                 "'H' or a damped-oscillator probe")
            opts["H"] = sc.probe.friction
        opts["env_c"] = parse_series(opts["env_c"], sc.grid, _join(path, "env_c"), base)
        opts["env_s"] = parse_series(opts["env_s"], sc.grid, _join(path, "env_s"), base)
        need(opts["omega0"] * sc.grid.duration >= 20, "omega0 * window >= 20")
    return Task(name, opts)


TOP_KEYS = {"grid", "hbar", "seed", "output_dir", "probe", "rigidity", "meter_noise", "thermal",
            "signal", "filters", "tasks", "description"}


def scenario_digest(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_scenario(raw: dict, base: Path | str = ".", source: Path | None = None) -> Scenario:
    base = Path(base)
    _check_keys(raw, TOP_KEYS, "$", required=("grid",))
    grid = _parse_grid(raw["grid"])
    hbar = _number(raw, "hbar", "$", default=1.0, positive=True)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("'seed' must be a non-negative integer", "$")
    out_dir = raw.get("output_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ValidationError("'output_dir' must be a non-empty string", "$")
    if "description" in raw and not isinstance(raw["description"], str):
        raise ValidationError("'description' must be a string", "$")
    probe, pin = (None, False)
    if "probe" in raw:
        probe, pin = _parse_probe(raw["probe"], grid, base)
    rigidity = _parse_rigidity(raw["rigidity"], grid, base) if "rigidity" in raw else None
    noise = _parse_meter_noise(raw["meter_noise"], grid, base) if "meter_noise" in raw else None
    thermal = _parse_thermal(raw["thermal"], grid, base) if "thermal" in raw else None
    caught = []
    signal = None
    if "signal" in raw:
        signal = parse_series(raw["signal"], grid, "signal", base)
        if not enforce_window(signal.values):
            caught.append("signal is not negligible near the window edges")
    filters_raw = raw.get("filters", [])
    if not isinstance(filters_raw, list):
        raise ValidationError("'filters' must be an array", "$")
    filters = []
    for i, f in enumerate(filters_raw):
        series = parse_series(f, grid, f"filters[{i}]", base)
        if not enforce_window(series.values):
            caught.append(f"filters[{i}] is not negligible near the window edges")
        filters.append(series)
    tasks_raw = raw.get("tasks", [])
    if not isinstance(tasks_raw, list):
        raise ValidationError("'tasks' must be an array", "$")
    tasks = [_parse_task(t, f"tasks[{i}]") for i, t in enumerate(tasks_raw)]
    sc = Scenario(grid, hbar, seed, out_dir, probe, pin, rigidity, noise, thermal, signal, filters,
                  tasks, source, scenario_digest(raw), caught)
    tasks = [_validate_task_inputs(sc, t, f"tasks[{i}]", base) for i, t in enumerate(tasks)]
    object.__setattr__(sc, "tasks", tasks)
    for msg in caught:
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
    return sc


def load_scenario(path) -> Scenario:
    """Read, parse and fully validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioIOError(f"cannot read scenario {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                              str(path)) from None
    return parse_scenario(raw, path.parent, path)
