"""Seeded parameter sweeps, log-log rate fits and CSV/JSON emission.

An experiment is a named cell function evaluated over one sweep axis and a
number of replications.  Every cell gets a seed derived from the base seed and
its labels only, so results do not depend on evaluation order or on how many
worker processes are used.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .approx import MLSConfig, mls_evaluate
from .discrepancy import dual_slab_witness, iso_lower_search, kappa_sum, local_discrepancy
from .ellipsoid import PolySemiaxes
from .errors import ConfigError, DegenerateInput
from .lattice import (
    fundamental_domain_diameter,
    hyperplane_section_witness,
    lll_reduce,
    minkowski_lower_bound,
    random_rank1_lattice,
    sandwich_bounds,
    scaled_integer_lattice,
    spectral_test,
)
from .pointset import (
    DistortionQuery,
    covering_radius,
    distortion_estimate,
    distortion_integral,
    planted_hole_points,
    sample_uniform,
    uniform_samples,
)
from .recovery import (
    GaussianInfo,
    section_radius_shape,
    kernel_basis,
    recovery_error_experiment,
    section_radius_exact_p2,
    section_radius_lower,
    success_rate,
)
from .rng import RngStream


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    point_count: int


def rate_fit(pairs: Sequence[tuple[float, float]], log_x: bool = True, log_y: bool = True) -> RateFit:
    """Ordinary least squares of ``y`` on ``x`` after the requested log transforms."""
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    x, y = data[:, 0], data[:, 1]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("non-finite values")
    if (log_x and np.any(x <= 0)) or (log_y and np.any(y <= 0)):
        raise DegenerateInput("log transform needs positive values")
    if log_x:
        x = np.log(x)
    if log_y:
        y = np.log(y)
    if len(np.unique(x)) < 2:
        raise DegenerateInput("need at least two distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    if ss_tot <= 1e-300:
        slope = 0.0
        intercept = float(y.mean())
    return RateFit(float(slope), float(intercept), r2, len(x))


def derive_seed(base: int, *labels) -> int:
    """Stable 64-bit seed from the base seed and the cell labels."""
    text = json.dumps([int(base), *[str(v) for v in labels]], separators=(",", ":"))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


# experiment catalogue


@dataclass(frozen=True)
class Recipe:
    """Sweep axis, required parameters, defaults and fit columns of one experiment."""

    axis: str
    required: tuple
    defaults: dict
    cell: Callable
    fit_y: str | None = None
    fit_x: Callable | None = None


def _distortion_rate(p, n, seed):
    stream = RngStream(seed)
    P = sample_uniform(p["dim"], n, stream.child(0))
    est = distortion_estimate(P, DistortionQuery(p["gamma"], p["samples"], stream.child(1).seed))
    return {"distortion": est.value, "stderr": est.stderr}


def _covering_rate(p, n, seed):
    P = sample_uniform(p["dim"], n, RngStream(seed))
    cr = covering_radius(P, p["resolution"])
    return {"covering_radius": cr.estimate, "upper_bound": cr.upper_bound, "n_over_log_n": n / math.log(n)}


def _cohort_limit(p, n, seed):
    stream = RngStream(seed)
    P = sample_uniform(p["dim"], n, stream.child(0))
    est = distortion_integral(P, p["gamma"], uniform_samples(p["dim"], p["samples"], stream.child(1)))
    return {"integral": est.value, "scaled": n ** (p["gamma"] / p["dim"]) * est.value}


def _spectral_audit(p, index, seed):
    L, _ = random_rank1_lattice(RngStream(seed), p["max_dim"], p["max_n"])
    sigma = spectral_test(L)
    bound = minkowski_lower_bound(L.dim, L.n)
    diam = fundamental_domain_diameter(lll_reduce(L))
    slab = dual_slab_witness(L)
    witness = max(hyperplane_section_witness(L).fraction, slab_fraction(slab, L))
    lower, _ = sandwich_bounds(sigma, L.dim)
    return {
        "n": L.n,
        "dim": L.dim,
        "generator": " ".join(str(v) for v in L.generator),
        "sigma": sigma,
        "minkowski_bound": bound,
        "minkowski_violation": int(sigma < bound * (1 - 1e-12)),
        "diameter": diam,
        "diameter_violation": int(diam > L.dim * 2 ** (L.dim - 1) * sigma * (1 + 1e-12)),
        "witness": witness,
        "witness_violation": int(witness < lower - 1e-9),
    }


def slab_fraction(slab, L) -> float:
    """Discrepancy value of an empty slab: its volume inside the cube."""
    return local_discrepancy(L.point_set(), slab).value


def _iso_witness(p, n, seed):
    stream = RngStream(seed)
    if p["kind"] == "grid":
        m = max(1, round(n ** (1.0 / p["dim"])))
        P = scaled_integer_lattice(m, p["dim"]).point_set()
    elif p["kind"] == "random":
        P = sample_uniform(p["dim"], n, stream.child(0))
    else:
        raise ValueError(f"unknown point kind {p['kind']!r}")
    w = iso_lower_search(P, p["budget"], stream.child(1), p["volume_samples"])
    return {"points": len(P), "discrepancy": w.value, "family": type(w.set).__name__}


def _recovery_phase(p, n, seed):
    return {"success": success_rate(p["m"], n, p["s"], p["trials"], RngStream(seed))}


def _recovery_rate(p, n, seed):
    E = PolySemiaxes(p["lam"], p["m"]).ellipsoid(p["p"])
    stats = recovery_error_experiment(E, n, p["trials"], p["decoder"], RngStream(seed))
    return {"max_error": stats.max, "mean_error": stats.mean}


def _section_radius(p, n, seed):
    E = PolySemiaxes(p["lam"], p["m"]).ellipsoid(p["p"])
    V = kernel_basis(GaussianInfo(n, p["m"], seed))
    radius = section_radius_exact_p2(E, V) if E.p == 2 else section_radius_lower(E, V, rng=RngStream(seed).child(1))
    shape = section_radius_shape(E.semiaxes, n)
    return {"radius": radius, "gelfand": float(E.semiaxes[n]) if n < E.m else 0.0, "shape": shape, "ratio": radius / shape}


def _mls_rate(p, m, seed):
    axis = np.arange(m) / (m - 1)
    X = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    Y = RngStream(seed).generator().random((p["samples"], 2))
    f = lambda Z: np.sin(2 * np.pi * Z[:, 0]) * np.cos(2 * np.pi * Z[:, 1])
    values = mls_evaluate(f(X), X, Y, MLSConfig(p["degree"], p["scale_multiplier"]))
    return {"points": m * m, "sup_error": float(np.max(np.abs(values - f(Y))))}


def _planted_hole(p, n, seed):
    stream = RngStream(seed)
    P = planted_hole_points(p["dim"], n, p["beta"], stream.child(0))
    est = distortion_estimate(P, DistortionQuery(p["gamma"], p["samples"], stream.child(1).seed))
    return {"distortion": est.value, "stderr": est.stderr}


def _kappa_gap(p, d, seed):
    _, gap = kappa_sum(d)
    log_kappa = gap + 1.5 * (2 * math.pi) ** (1 / 3) * d ** (2 / 3)
    return {"log_kappa": log_kappa, "log_gap": gap, "scaled_gap": abs(gap) / d ** (1 / 3)}


EXPERIMENTS: dict[str, Recipe] = {
    "distortion_rate": Recipe("n", ("dim", "gamma", "n"), {"samples": 1 << 15}, _distortion_rate, "distortion"),
    "covering_rate": Recipe("n", ("dim", "n"), {"resolution": 513}, _covering_rate, "covering_radius", lambda r: r["n_over_log_n"]),
    "cohort_limit": Recipe("n", ("dim", "gamma", "n"), {"samples": 1 << 15}, _cohort_limit, "integral"),
    "spectral_audit": Recipe("index", ("count",), {"max_dim": 4, "max_n": 10_000}, _spectral_audit),
    "iso_witness": Recipe("n", ("dim", "n", "kind"), {"budget": 400, "volume_samples": 1 << 14}, _iso_witness, "discrepancy", lambda r: r["points"]),
    "recovery_phase": Recipe("n", ("m", "s", "n"), {"trials": 100}, _recovery_phase),
    "recovery_rate": Recipe("n", ("lam", "p", "m", "n"), {"trials": 20, "decoder": "l1"}, _recovery_rate, "max_error"),
    "section_radius": Recipe("n", ("lam", "m", "n"), {"p": 2.0}, _section_radius, "radius"),
    "mls_rate": Recipe("m", ("m",), {"degree": 2, "scale_multiplier": 2.0, "samples": 4000}, _mls_rate, "sup_error", lambda r: r["points"]),
    "planted_hole": Recipe("n", ("dim", "gamma", "beta", "n"), {"samples": 1 << 15}, _planted_hole, "distortion"),
    "kappa_gap": Recipe("d", ("d",), {}, _kappa_gap),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    base_seed: int = 0
    replications: int = 1
    output: str = "results.csv"
    check: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Any) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("", "config must be a JSON object")
        name = data.get("experiment")
        if name not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
        spec = EXPERIMENTS[name]
        params = data.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("parameters", "must be an object")
        for key in spec.required:
            if key not in params:
                raise ConfigError(f"parameters.{key}", "required key missing")
        if spec.axis in params and not isinstance(params[spec.axis], list):
            raise ConfigError(f"parameters.{spec.axis}", "sweep axis must be a list")
        seeds = data.get("seeds", {})
        if not isinstance(seeds, dict):
            raise ConfigError("seeds", "must be an object")
        base = seeds.get("base", 0)
        reps = seeds.get("replications", 1)
        if not isinstance(base, int) or base < 0:
            raise ConfigError("seeds.base", "must be a non-negative integer")
        if not isinstance(reps, int) or reps < 1:
            raise ConfigError("seeds.replications", "must be an integer >= 1")
        output = data.get("output", f"{name}.csv")
        if not isinstance(output, str) or not output:
            raise ConfigError("output", "must be a non-empty path")
        check = data.get("check", {})
        if not isinstance(check, dict):
            raise ConfigError("check", "must be an object")
        if "slope" in check and not (isinstance(check["slope"], list) and len(check["slope"]) == 2):
            raise ConfigError("check.slope", "must be [low, high]")
        return cls(name, {**spec.defaults, **params}, base, reps, output, check)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def points(self) -> list:
        spec = EXPERIMENTS[self.experiment]
        if spec.axis == "index":
            return list(range(int(self.parameters["count"])))
        return list(self.parameters[spec.axis])


class RunResult(NamedTuple):
    records: list
    summary: dict
    csv_text: str
    json_text: str


def _run_cell(args):
    name, params, point, rep, seed = args
    row = {"experiment": name, EXPERIMENTS[name].axis: point, "replication": rep, "seed": seed}
    try:
        row.update(EXPERIMENTS[name].cell(params, point, seed))
        row["error"] = ""
    except Exception as exc:  # recorded per row so a sweep survives a bad cell
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _cells(config: ExperimentConfig) -> list:
    cells = []
    seen = set()
    for point in config.points():
        for rep in range(config.replications):
            seed = derive_seed(config.base_seed, config.experiment, point, rep)
            if seed in seen:
                raise RuntimeError("derived seed collision within a run")
            seen.add(seed)
            cells.append((config.experiment, config.parameters, point, rep, seed))
    return cells


def run(config: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Evaluate every (sweep point, replication) cell and summarize."""
    cells = _cells(config)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    summary = summarize(config, records)
    return RunResult(records, summary, to_csv(records), json.dumps(summary, indent=2, sort_keys=True) + "\n")


def summarize(config: ExperimentConfig, records: list) -> dict:
    spec = EXPERIMENTS[config.experiment]
    ok = [r for r in records if not r["error"]]
    summary: dict = {
        "experiment": config.experiment,
        "parameters": config.parameters,
        "base_seed": config.base_seed,
        "replications": config.replications,
        "rows": len(records),
        "failed_rows": len(records) - len(ok),
    }
    if spec.fit_y is not None:
        groups: dict = {}
        for r in ok:
            x = spec.fit_x(r) if spec.fit_x else r[spec.axis]
            groups.setdefault(x, []).append(r[spec.fit_y])
        pairs = [(x, float(np.mean(v))) for x, v in sorted(groups.items())]
        try:
            summary["fit"] = rate_fit(pairs, True, True)._asdict()
        except DegenerateInput as exc:
            summary["fit"] = None
            summary["fit_error"] = str(exc)
    if config.experiment == "spectral_audit":
        for key in ("minkowski_violation", "diameter_violation", "witness_violation"):
            summary[key + "s"] = int(sum(r[key] for r in ok))
    if config.experiment == "cohort_limit":
        summary["mean_scaled"] = float(np.mean([r["scaled"] for r in ok])) if ok else None
    if config.experiment == "kappa_gap":
        summary["max_scaled_gap"] = float(max(r["scaled_gap"] for r in ok)) if ok else None
    if config.experiment == "section_radius":
        summary["gelfand_violations"] = int(sum(r["radius"] < r["gelfand"] * (1 - 1e-9) for r in ok))
    summary["check"] = evaluate_check(config, summary)
    return summary


def evaluate_check(config: ExperimentConfig, summary: dict) -> dict:
    """Compare the summary with the config's ``check`` block; no block passes trivially."""
    failures = []
    check = config.check
    if summary["failed_rows"]:
        failures.append(f"{summary['failed_rows']} rows failed")
    if "slope" in check:
        fit = summary.get("fit")
        lo, hi = check["slope"]
        if not fit or not lo <= fit["slope"] <= hi:
            failures.append(f"slope {fit and fit['slope']} outside [{lo}, {hi}]")
    for key, limit in check.items():
        if key.startswith("max_") and key[4:] in summary:
            value = summary[key[4:]]
            if value is None or value > limit:
                failures.append(f"{key[4:]} = {value} exceeds {limit}")
    return {"passed": not failures, "failures": failures}


def to_csv(records: list) -> str:
    """Header from the union of keys in first-seen order; floats in round-trip form."""
    columns: list = []
    for r in records:
        for k in r:
            if k not in columns:
                columns.append(k)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([_cell_text(r.get(c, "")) for c in columns])
    return out.getvalue()


def _cell_text(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_outputs(result: RunResult, config: ExperimentConfig, out_dir: str | None) -> tuple[str, str]:
    path = config.output if out_dir is None else os.path.join(out_dir, os.path.basename(config.output))
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(result.csv_text)
    summary_path = os.path.splitext(path)[0] + ".summary.json"
    with open(summary_path, "w") as fh:
        fh.write(result.json_text)
    return path, summary_path


def read_csv_columns(text: str, x: str, y: str) -> list:
    """``(x, y)`` pairs from a CSV, skipping rows with an error or a blank value."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or x not in reader.fieldnames or y not in reader.fieldnames:
        raise ConfigError(x if reader.fieldnames is None or x not in reader.fieldnames else y, "column not found")
    pairs = []
    for row in reader:
        if row.get("error") or row[x] == "" or row[y] == "":
            continue
        pairs.append((float(row[x]), float(row[y])))
    return pairs
