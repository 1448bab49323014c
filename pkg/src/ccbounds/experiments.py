"""Sweep experiments for the two builtin examples.

An :class:`ExperimentSpec` names an example (``"sphere"`` or ``"sinusoid"``),
one swept parameter with its grid, and the fixed parameters. Running it
evaluates both bounds and a Monte-Carlo estimate of the estimator's WMSE at
every grid point and writes a CSV (with a ``#`` JSON header) plus a JSON
summary next to it.

Sphere parameters: ``H`` (rows, default ``I_3``), ``sigma2``, ``rho``,
``phi1``, ``phi2``, ``L`` (i.i.d. copies of ``x``). Weighting is ``I``.

Sinusoid parameters: ``l1``, ``L``, ``sigma2``, ``c``, ``angle_A``,
``omega``. Weighting is ``diag(1, 1, 0)`` (amplitude only). The sweep
``inv_sigma2`` sets ``sigma2 = 1 / value``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import estimators as est
from . import manifold as mf
from .diagnostics import bias_report, check_c_unbiasedness, check_x_unbiasedness
from .errors import CCBoundsError, InvalidInputError, SpecError
from .models import ComplexSinusoidModel, LinearGaussianModel
from .montecarlo import TrialConfig, run_trials

PI = np.pi
ORDER_RTOL = 1e-9
CROSSING_RTOL = 0.05

SPHERE_DEFAULTS = {"H": np.eye(3).tolist(), "sigma2": 16.0, "rho": 1.0,
                   "phi1": 0.2 * PI, "phi2": 0.45 * PI, "L": 1}
SINUSOID_DEFAULTS = {"l1": 1, "L": 15, "sigma2": 16.0, "c": 0.2,
                     "angle_A": 0.3 * PI, "omega": 0.9 * PI}
SWEEPS = {"sphere": {"phi1", "phi2", "rho", "L", "sigma2", "inv_sigma2"},
          "sinusoid": {"angle_A", "l1", "L", "sigma2", "inv_sigma2", "c", "omega"}}
INT_PARAMS = {"L", "l1"}
ESTIMATORS = {"cml", "ccrb_efficient", "lu_efficient"}
CASE2_H = np.vstack([np.eye(3), [[0.9, 0.9, 0.6]]]).tolist()

BASE_COLUMNS = ["sweep_value", "wmse_cml", "wmse_stderr", "ccrb_wmse", "lu_ccrb"]
DIAG_COLUMNS = ["bias_1", "bias_1_stderr", "DU_11", "DU_11_stderr",
                "c_bias_norm", "c_bias_max_z", "x_unbiased", "c_unbiased"]
TAIL_COLUMNS = ["trials", "seed"]


@dataclass
class ExperimentSpec:
    example: str
    sweep: str
    grid: list
    fixed: dict = field(default_factory=dict)
    id: str = "custom"
    trials: int = 10_000
    seed: int = 0
    workers: int = 1
    estimator: str = "cml"
    diagnostics: bool = False
    out: str | None = None

    def config(self) -> dict:
        """Reproducibility record (``workers`` and ``out`` do not affect results)."""
        d = dataclasses.asdict(self)
        d.pop("workers")
        d.pop("out")
        d["fixed"] = self.params_with_defaults()
        return d

    def params_with_defaults(self) -> dict:
        base = SPHERE_DEFAULTS if self.example == "sphere" else SINUSOID_DEFAULTS
        return {**base, **self.fixed}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise SpecError("spec must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        try:
            spec = cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.example not in SWEEPS:
            raise SpecError(f"example must be one of {sorted(SWEEPS)}")
        if self.sweep not in SWEEPS[self.example]:
            raise SpecError(f"sweep {self.sweep!r} not available for {self.example}")
        if self.estimator not in ESTIMATORS:
            raise SpecError(f"estimator must be one of {sorted(ESTIMATORS)}")
        try:
            grid = np.asarray(self.grid, dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpecError("grid must be a list of numbers") from exc
        if grid.ndim != 1 or grid.size == 0:
            raise SpecError("grid must be a nonempty list")
        if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
            raise SpecError("grid must be finite and strictly increasing")
        if self.sweep in INT_PARAMS and np.any(grid != np.round(grid)):
            raise SpecError(f"{self.sweep} grid must hold integers")
        allowed = set(SPHERE_DEFAULTS if self.example == "sphere" else SINUSOID_DEFAULTS)
        unknown = set(self.fixed) - allowed
        if unknown:
            raise SpecError(f"unknown fixed parameters: {sorted(unknown)}")
        for name, val, least in (("trials", self.trials, 2), ("workers", self.workers, 1)):
            if not isinstance(val, int) or isinstance(val, bool) or val < least:
                raise SpecError(f"{name} must be an integer >= {least}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SpecError("seed must be an unsigned 64-bit integer")
        for value in grid:
            try:
                Scenario.build(self.example, self.point_params(value))
            except SpecError:
                raise
            except (CCBoundsError, ValueError) as exc:
                raise SpecError(f"invalid parameters at {self.sweep}={value}: {exc}") from exc

    def point_params(self, value) -> dict:
        p = self.params_with_defaults()
        if self.sweep == "inv_sigma2":
            if value <= 0:
                raise SpecError("inv_sigma2 must be positive")
            p["sigma2"] = 1.0 / value
        elif self.sweep in INT_PARAMS:
            p[self.sweep] = int(round(value))
        else:
            p[self.sweep] = float(value)
        return p


@dataclass
class Scenario:
    """Model, constraint set, true parameter and weighting at one point."""

    model: object
    cs: mf.ConstraintSet
    theta: np.ndarray
    W: np.ndarray
    params: dict

    @classmethod
    def build(cls, example: str, p: dict) -> "Scenario":
        if example == "sphere":
            H = np.asarray(p["H"], dtype=float)
            if H.ndim != 2 or H.shape[1] != 3:
                raise SpecError("H must be an N x 3 matrix")
            if int(p["L"]) < 1:
                raise SpecError("L must be >= 1")
            model = LinearGaussianModel(H, p["sigma2"]).stacked(int(p["L"]))
            cs = mf.sphere(p["rho"])
            theta = mf.sphere_point(p["rho"], p["phi1"], p["phi2"])
            W = np.eye(3)
        elif example == "sinusoid":
            model = ComplexSinusoidModel(int(p["l1"]), int(p["L"]), p["sigma2"])
            cs = mf.amplitude(p["c"])
            A = p["c"] * np.exp(1j * p["angle_A"])
            theta = np.array([A.real, A.imag, float(est.wrap_angle(p["omega"]))])
            W = np.diag([1.0, 1.0, 0.0])
        else:
            raise SpecError(f"unknown example {example!r}")
        ok, resid = mf.validate_feasible(cs, theta)
        if not ok:
            raise SpecError(f"fixed point is infeasible (residual {resid:.3g})")
        mf.null_space_basis(cs, theta)  # raises on singular charts
        return cls(model, cs, theta, W, p)

    def bounds(self) -> bd.BoundReport:
        nb = mf.null_space_basis(self.cs, self.theta)
        V = mf.basis_derivatives(self.cs, self.theta, nb)
        return bd.bound_report(self.model.fim(self.theta), nb.U, V.V, self.W)

    def estimator(self, kind: str = "cml") -> est.Estimator:
        if kind == "ccrb_efficient":
            return est.make_ccrb_efficient(self.theta, self.model, self.cs)
        if kind == "lu_efficient":
            return est.make_lu_efficient(self.theta, self.model, self.cs, self.W)
        if isinstance(self.model, LinearGaussianModel):
            return est.make_cml_sphere(self.model.H, self.params["rho"])
        return est.make_cml_sinusoid(self.model, self.params["c"])


def evaluate_point(spec: ExperimentSpec, value, seed: int) -> dict:
    """One CSV row (as a dict) for grid value ``value``."""
    sc = Scenario.build(spec.example, spec.point_params(value))
    rep = sc.bounds()
    if rep.lu_ccrb > rep.ccrb_wmse * (1 + ORDER_RTOL) + 1e-300:
        raise InvalidInputError(
            f"order relation violated at {spec.sweep}={value}: "
            f"lu_ccrb={rep.lu_ccrb} > ccrb_wmse={rep.ccrb_wmse}")
    batch = run_trials(sc.model, sc.theta, sc.estimator(spec.estimator), sc.W,
                       TrialConfig(seed, spec.trials, spec.workers))
    row = {"sweep_value": float(value), "wmse_cml": batch.wmse,
           "wmse_stderr": batch.wmse_stderr, "ccrb_wmse": rep.ccrb_wmse,
           "lu_ccrb": rep.lu_ccrb}
    if spec.diagnostics:
        r = bias_report(batch, rep.U, rep.V, sc.W)
        xc = check_x_unbiasedness(r, rep.U)
        cc = check_c_unbiasedness(r, rep.U, rep.V, sc.W)
        row.update(bias_1=r.bias[0], bias_1_stderr=r.bias_se[0],
                   DU_11=r.DU[0, 0], DU_11_stderr=r.DU_se[0, 0],
                   c_bias_norm=r.c_cond1_residual, c_bias_max_z=cc.z1,
                   x_unbiased=int(xc.passed), c_unbiased=int(cc.passed))
    row.update(trials=spec.trials, seed=seed, failures=batch.failures)
    return row


def columns(spec: ExperimentSpec) -> list:
    return BASE_COLUMNS + (DIAG_COLUMNS if spec.diagnostics else []) + TAIL_COLUMNS


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def render_csv(spec: ExperimentSpec, rows: list) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(spec.config(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = columns(spec)
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def crossings(rows: list) -> dict:
    """Smallest grid value where the WMSE is within 5% of each bound."""
    out = {}
    for key in ("ccrb_wmse", "lu_ccrb"):
        out[key] = next((r["sweep_value"] for r in rows
                         if r[key] > 0 and abs(r["wmse_cml"] - r[key]) / r[key] < CROSSING_RTOL),
                        None)
    return out


def run_experiment(spec: ExperimentSpec, out: str | Path | None = None) -> tuple[list, dict]:
    """Run every grid point and optionally write ``out`` (CSV) and its ``.json`` summary.

    Returns
    -------
    rows : list of dict
    summary : dict
    """
    spec.validate()
    out = out if out is not None else spec.out
    if out is not None:
        out = Path(out)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.touch()
        except OSError as exc:
            raise SpecError(f"cannot write {out}: {exc}") from exc
    t0 = time.perf_counter()
    rows = [evaluate_point(spec, v, (spec.seed + i) % 2**64)
            for i, v in enumerate(spec.grid)]
    summary = {
        "config": spec.config(),
        "workers": spec.workers,
        "wall_time_s": time.perf_counter() - t0,
        "rows": len(rows),
        "failures": sum(r["failures"] for r in rows),
        "crossings": crossings(rows),
        "order_relation_holds": all(r["lu_ccrb"] <= r["ccrb_wmse"] * (1 + ORDER_RTOL)
                                    for r in rows),
    }
    if out is not None:
        out.write_text(render_csv(spec, rows))
        out.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return rows, summary


# ---------------------------------------------------------------------------
# builtin figure specs


def _pi_grid(lo, hi, n):
    return [float(v) for v in np.linspace(lo, hi, n) * PI]


_PHI1 = _pi_grid(0.0, 1.875, 16)
_PHI2 = _pi_grid(0.05, 0.95, 10)
_ANGLE = _pi_grid(-1.0, 0.875, 16)

BUILTINS = {
    "fig1": dict(example="sphere", sweep="phi1", grid=_PHI1, diagnostics=True),
    "fig1b": dict(example="sphere", sweep="phi2", grid=_PHI2, diagnostics=True),
    "fig2": dict(example="sphere", sweep="phi1", grid=_PHI1),
    "fig2b": dict(example="sphere", sweep="phi2", grid=_PHI2),
    "fig3": dict(example="sphere", sweep="rho",
                 grid=[0.25, 0.5, 1, 2, 4, 8, 9, 16, 32, 40, 64, 128]),
    "fig4": dict(example="sphere", sweep="L", fixed={"H": CASE2_H},
                 grid=[1, 2, 3, 5, 8, 10, 16, 20, 30, 50, 100, 150, 200, 250, 300, 500, 1000]),
    "fig5": dict(example="sinusoid", sweep="angle_A", grid=_ANGLE, diagnostics=True),
    "fig6": dict(example="sinusoid", sweep="l1",
                 grid=[-200, -150, -100, -50, -30, -20, -10, -7, -5, -3, 0,
                       3, 5, 10, 20, 30, 50, 100, 150, 200]),
    "fig7": dict(example="sinusoid", sweep="inv_sigma2",
                 grid=[float(v) for v in 10.0 ** np.arange(-1.5, 3.01, 0.25)]),
    "fig7b": dict(example="sinusoid", sweep="inv_sigma2", fixed={"c": 0.5},
                  grid=[float(v) for v in 10.0 ** np.arange(-1.5, 3.01, 0.25)]),
    "fig8": dict(example="sinusoid", sweep="L", fixed={"c": 1.0}, trials=1000,
                 grid=[2, 3, 5, 8, 10, 15, 20, 30, 50, 80, 100, 150, 200, 250,
                       300, 350, 400, 450, 500, 600]),
}


def builtin_spec(fig_id: str, **overrides) -> ExperimentSpec:
    """Builtin spec by id; ``overrides`` replace top-level spec fields."""
    if fig_id not in BUILTINS:
        raise SpecError(f"unknown figure {fig_id!r}; choose from {sorted(BUILTINS)}")
    d = {"id": fig_id, **BUILTINS[fig_id]}
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.from_dict(d)


SCENARIOS = {
    "sphere": ("sphere", {}),
    "sphere-case2": ("sphere", {"H": CASE2_H}),
    "sinusoid": ("sinusoid", {}),
}


def scenario_bounds(name: str, **params) -> dict:
    """Both bounds for a named builtin scenario, as a JSON-ready dict."""
    if name not in SCENARIOS:
        raise SpecError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    example, fixed = SCENARIOS[name]
    base = SPHERE_DEFAULTS if example == "sphere" else SINUSOID_DEFAULTS
    unknown = set(params) - set(base)
    if unknown:
        raise SpecError(f"unknown parameters: {sorted(unknown)}")
    p = {**base, **fixed, **params}
    try:
        sc = Scenario.build(example, p)
    except (CCBoundsError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from exc
    out = sc.bounds().as_dict()
    out.update(scenario=name, params=p, theta=sc.theta.tolist())
    return out
