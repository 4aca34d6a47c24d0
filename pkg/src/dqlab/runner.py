"""Execute the tasks of a validated scenario and write the result bundle."""

from __future__ import annotations

import json
import math
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._config import hbar_context
from .analysis import (
    QuadratureSpec,
    narrowband_bound,
    output_commutator_residual,
    snr,
    stationary_sum_spectrum,
    sum_noise_commutator_routes,
    sum_noise_covariance,
    filtered_variance,
)
from .exceptions import DQLabError, NumericalError, SNRDivergence
from .kernels import TimeSeries, TwoTimeKernel, kernel_to_spectrum
from .noise import (
    MemorylessNoise,
    NoiseCovariances,
    check_uncertainty_block,
    check_uncertainty_memoryless,
    memoryless_covariances,
    stationary_covariances,
    thermal_covariance,
    uncertainty_margin_memoryless,
)
from .optimize import memoryless_optimize, memoryless_verify, stationary_optimize
from .probes import BOUNDARY_MARGIN, pin_boundary, rigidity_kernel
from .scenario import Scenario

MANIFEST = "manifest.json"


class TaskError(DQLabError):
    """Wraps a failure inside one task, keeping the original as ``cause``."""

    def __init__(self, task: str, cause: Exception):
        self.task = task
        self.cause = cause
        super().__init__(f"task {task!r} failed: {cause}")


# -- deterministic writers ---------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


# -- shared model construction ----------------------------------------------

class _Model:
    """Lazily built kernels shared by the tasks of one run."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.grid = sc.grid
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def chi_inv(self) -> TwoTimeKernel:
        def build():
            k = self.sc.probe.response(self.grid)
            return pin_boundary(k) if self.sc.pin_boundary else k
        return self._get("chi_inv", build)

    @property
    def K(self) -> TwoTimeKernel:
        return self._get("K", lambda: rigidity_kernel(self.sc.rigidity, self.grid))

    @property
    def chiK_inv(self) -> TwoTimeKernel:
        return self._get("chiK", lambda: self.chi_inv + self.K)

    @property
    def memoryless(self) -> MemorylessNoise | None:
        spec = self.sc.meter_noise
        if spec is None or spec["type"] != "memoryless":
            return None

        def build():
            h = self.sc.hbar
            sff, sxf = spec["S_FF"], spec["S_xF"]
            sxx = spec["S_xx"]
            if sxx is None:
                sxx = TimeSeries(self.grid, (sxf.values ** 2 + h * h / 4) / sff.values)
            return MemorylessNoise(sxx, sff, sxf)
        return self._get("memoryless", build)

    @property
    def noise(self) -> NoiseCovariances:
        def build():
            spec = self.sc.meter_noise
            if spec["type"] == "memoryless":
                cov = memoryless_covariances(self.memoryless)
                return NoiseCovariances(cov.B_xx, cov.B_FF, cov.B_xF, self.K)
            if spec["type"] == "stationary":
                cov = stationary_covariances(spec["S_xx"], spec["S_FF"],
                                             spec["S_xF"] or (lambda w: np.zeros(w.shape)),
                                             None, self.grid)
                return NoiseCovariances(cov.B_xx, cov.B_FF, cov.B_xF, self.K)
            return NoiseCovariances(spec["B_xx"], spec["B_FF"], spec["B_xF"], self.K)
        return self._get("noise", build)

    @property
    def B_TT(self) -> TwoTimeKernel:
        return self._get("B_TT", lambda: thermal_covariance(self.sc.thermal, self.grid))

    @property
    def B_sum(self) -> TwoTimeKernel:
        return self._get("B_sum", lambda: sum_noise_covariance(self.noise, self.chiK_inv))


# -- tasks -------------------------------------------------------------------

def _task_sum_covariance(m: _Model, opts, out: Path):
    b = m.B_sum
    files = []
    if opts["write_matrix"]:
        header = ["t"] + [f"b{j}" for j in range(m.grid.n)]
        rows = ([t, *row] for t, row in zip(m.grid.times, b.values))
        write_csv(out / "sum_covariance.csv", header, rows)
        files.append("sum_covariance.csv")
    return files


def _task_commutators(m: _Model, opts, out: Path):
    routes = sum_noise_commutator_routes(m.chi_inv, m.K)
    residual = output_commutator_residual(m.chi_inv, m.K)
    write_json(out / "commutators.json", {
        "sum_noise_routes_relative_error": routes.relative_error,
        "output_commutator_relative_residual": residual,
        "direct_norm": routes.direct.norm(),
        "tolerance": 1e-12,
        "passed": bool(routes.relative_error <= 1e-12 and residual <= 1e-12),
    })
    return ["commutators.json"]


def _task_psd_check(m: _Model, opts, out: Path):
    report = check_uncertainty_block(m.noise, m.sc.hbar)
    result = {"block": report.to_dict()}
    mem = m.memoryless
    if mem is not None:
        ok = check_uncertainty_memoryless(mem, hbar=m.sc.hbar)
        margin = uncertainty_margin_memoryless(mem, m.sc.hbar)
        result["pointwise"] = {"passed": bool(ok.all()), "failing_samples": int((~ok).sum()),
                               "min_margin": float(margin.min())}
    result["passed"] = report.passed and result.get("pointwise", {}).get("passed", True)
    write_json(out / "psd_check.json", result)
    if opts["require_pass"] and not result["passed"]:
        raise NumericalError(f"uncertainty relation violated (min eigenvalue "
                             f"{report.min_eigenvalue:.3e}, norm {report.matrix_norm:.3e})")
    return ["psd_check.json"]


def _task_snr(m: _Model, opts, out: Path):
    rows = []
    for i, phi in enumerate(m.sc.filters):
        proj = phi.dot(m.sc.signal)
        var = filtered_variance(m.B_sum, phi) + filtered_variance(m.B_TT, phi)
        try:
            value, divergent = snr(m.sc.signal, phi, m.B_sum, m.B_TT), False
        except SNRDivergence:
            value, divergent = math.inf, True
        rows.append([i, proj, var, value, divergent])
    write_csv(out / "snr.csv", ["filter", "projection", "variance", "snr", "divergent"], rows)
    return ["snr.csv"]


def _task_sql_dql(m: _Model, opts, out: Path):
    h = m.sc.hbar
    if opts["source"] == "analytic":
        w = np.geomspace(opts["omega_min"], opts["omega_max"], opts["points"])
        chi = m.sc.probe.response_spectrum(w)
    else:
        spec = kernel_to_spectrum(m.chi_inv.interior(BOUNDARY_MARGIN))
        keep = spec.omegas > 0
        w, chi = spec.omegas[keep], spec.values[keep]
    rows = zip(w, chi.real, chi.imag, h * np.abs(chi), h * np.abs(chi.imag))
    write_csv(out / "sql_dql.csv", ["omega", "chi_re", "chi_im", "sql", "dql"], rows)
    return ["sql_dql.csv"]


def _task_stationary_spectrum(m: _Model, opts, out: Path):
    margin = opts["margin"]
    noise = m.noise
    parts = [kernel_to_spectrum(k.interior(margin))
             for k in (noise.B_xx, noise.B_FF, noise.B_xF, m.chiK_inv, m.B_sum)]
    sxx, sff, sxf, chik, direct = parts
    closed = stationary_sum_spectrum(sxx, sff, sxf, chik)
    keep = direct.omegas >= 0
    d, c = direct.values.real[keep], closed.values.real[keep]
    scale = np.maximum(np.abs(c), 1e-300)
    rows = zip(direct.omegas[keep], d, c, np.abs(d - c) / scale)
    write_csv(out / "stationary_spectrum.csv", ["omega", "time_domain", "closed_form", "rel_diff"],
              rows)
    return ["stationary_spectrum.csv"]


def _task_memoryless_optimize(m: _Model, opts, out: Path):
    phi = m.sc.filters[opts["filter"]]
    sff = m.sc.meter_noise["S_FF"]
    opt = memoryless_optimize(phi, m.chi_inv, sff, m.sc.hbar)
    report = memoryless_verify(opt, phi, m.chi_inv, sff, trials=opts["trials"], seed=m.sc.seed,
                               amplitude=opts["amplitude"], hbar=m.sc.hbar)
    rows = zip(m.grid.times, phi.values, opt.psi.values, sff.values, opt.S_xF_opt.values,
               opt.S_xx_opt.values, opt.degenerate)
    write_csv(out / "memoryless_optimum.csv",
              ["t", "phi", "psi", "S_FF", "S_xF", "S_xx", "degenerate"], rows)
    doc = report.to_dict()
    doc.update(achieved_variance=opt.achieved_variance, n_degenerate=opt.n_degenerate,
               filter=opts["filter"])
    write_json(out / "memoryless_verify.json", doc)
    return ["memoryless_optimum.csv", "memoryless_verify.json"]


def _task_stationary_optimize(m: _Model, opts, out: Path):
    h = m.sc.hbar
    omega, k = opts["omega"], opts["K"]
    chi = complex(m.sc.probe.response_spectrum(np.array([omega]))[0])
    chik = chi + k
    dql = h * abs(chi.imag)
    rows = []
    for b in opts["budgets"]:
        budget = b * dql if opts["budget_units"] == "dql" else b
        r = stationary_optimize(chik, k, budget, omega, h)
        rows.append([budget, r.min_sum_spectrum, r.dql, r.S_xx, r.S_xF.real, r.S_xF.imag,
                     r.feasible, r.residual, r.min_sum_spectrum - r.dql])
    write_csv(out / "stationary_optimize.csv",
              ["S_FF", "min_sum_spectrum", "dql", "S_xx", "S_xF_re", "S_xF_im", "feasible",
               "residual", "excess"], rows)
    return ["stationary_optimize.csv"]


def _task_quadrature_bounds(m: _Model, opts, out: Path):
    spec = QuadratureSpec(opts["omega0"], opts["env_c"], opts["env_s"], opts["H"])
    bound = narrowband_bound(spec, m.sc.hbar)
    row = [opts["omega0"], opts["omega0"] * m.grid.duration, opts["H"], bound.exact, bound.approx,
           bound.rel_error, bound.commutator_exact, bound.commutator_approx, bound.degenerate]
    write_csv(out / "quadrature_bounds.csv",
              ["omega0", "omega0_T", "H", "exact", "approx", "rel_error", "commutator_exact",
               "commutator_approx", "degenerate"], [row])
    return ["quadrature_bounds.csv"]


TASK_RUNNERS = {
    "sum_covariance": _task_sum_covariance,
    "commutators": _task_commutators,
    "psd_check": _task_psd_check,
    "snr": _task_snr,
    "sql_dql_curves": _task_sql_dql,
    "stationary_spectrum": _task_stationary_spectrum,
    "memoryless_optimize": _task_memoryless_optimize,
    "stationary_optimize": _task_stationary_optimize,
    "quadrature_bounds": _task_quadrature_bounds,
}


def run(sc: Scenario, out_dir=None) -> dict:
    """Run every task in order, writing results and ``manifest.json`` to ``out_dir``.

    A failing task stops the run: the manifest is still written, with the
    completed tasks and the failure, and :class:`TaskError` is raised.
    """
    out = Path(out_dir if out_dir is not None else sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "artifact": "dqlab",
        "version": __version__,
        "scenario_sha256": sc.digest,
        "hbar": sc.hbar,
        "seed": sc.seed,
        "status": "ok",
        "tasks": [],
        "warnings": list(sc.warnings),
    }
    model = _Model(sc)
    failure = None
    with hbar_context(sc.hbar):
        for task in sc.tasks:
            entry = {"name": task.name, "status": "running", "files": []}
            manifest["tasks"].append(entry)
            start = time.perf_counter()
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                try:
                    entry["files"] = TASK_RUNNERS[task.name](model, task.options, out)
                    entry["status"] = "ok"
                except (DQLabError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
                    entry["status"] = "failed"
                    entry["error"] = f"{type(exc).__name__}: {exc}"
                    failure = TaskError(task.name, exc)
            entry["seconds"] = time.perf_counter() - start
            manifest["warnings"].extend(f"{task.name}: {w.message}" for w in caught)
            if failure is not None:
                manifest["status"] = "failed"
                break
    write_json(out / MANIFEST, manifest)
    if failure is not None:
        raise failure
    return manifest
