"""Experiment runner and command-line front end.

Drives the convergence study from a JSON config (sampler, target
measure, cost, noise models, T grid, seeds), writes one CSV row per
(model, T, seed) cell, fits log-log slopes, and renders static SVG
panels. Subcommands expose the library operations for one-off use.
"""

import argparse
import hashlib
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CostSpec, DiscreteMeasure, SamplerSpec, cost_vector, derive_seed, draw
from .hardness import KnapsackInstance, QuadratureSpec, exact_knapsack_volume, knapsack_volume_via_ot
from .noise import MarginalModel, marginal_lipschitz, utilities_values_probs
from .solver import SolverConfig, averaged_sgd, dual_objective_estimate, finite_sample_reference

CONFIG_VERSION = 1
CSV_HEADER = "model,T,seed,subopt,potgap,ms"
TIMING_MODES = ("zero", "measured")

_CLOSED_FORM_KINDS = ("exponential", "uniform")


# ------------------------------------------------------------------- config

def _resolve_measure(obj, sampler: SamplerSpec) -> DiscreteMeasure:
    if not isinstance(obj, dict):
        raise ValueError("config field 'measure' must be a JSON object")
    if "random_atoms" not in obj:
        return DiscreteMeasure.from_json(obj)
    ra = obj["random_atoms"]
    if not isinstance(ra, dict):
        raise ValueError("measure.random_atoms must be a JSON object")
    for field in ("count", "box", "seed"):
        if field not in ra:
            raise ValueError(f"measure.random_atoms is missing field '{field}'")
    count, box = int(ra["count"]), float(ra["box"])
    if count < 1:
        raise ValueError("measure.random_atoms field 'count' must be >= 1")
    if not box > 0.0:
        raise ValueError("measure.random_atoms field 'box' must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(ra["seed"]))))
    atoms = rng.uniform(-box, box, size=(count, int(sampler.d)))
    return DiscreteMeasure(atoms, np.full(count, 1.0 / count))


def _parse_models(entries):
    if not isinstance(entries, list) or not entries:
        raise ValueError("config field 'models' must be a nonempty list")
    out, tags = [], set()
    for i, entry in enumerate(entries):
        if entry == "none":
            tag, model = "none", None
        elif isinstance(entry, dict):
            model = MarginalModel.from_json(entry)
            tag = str(entry.get("tag", model.kind))
        else:
            raise ValueError(f"config field 'models' entry {i} must be 'none' or a model object")
        if tag in tags:
            raise ValueError(f"config field 'models' has a duplicate tag '{tag}'")
        tags.add(tag)
        out.append((tag, model))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Declarative description of one convergence experiment.

    Parameters
    ----------
    sampler : SamplerSpec
        Source distribution; per-cell streams are derived from its seed.
    measure : DiscreteMeasure
        Target measure (a random-atoms stanza is resolved at parse time).
    cost : CostSpec
        Ground cost.
    models : tuple
        Pairs of (tag, MarginalModel or None), one per series.
    t_grid : tuple of int
        Strictly increasing iteration budgets.
    seeds : tuple of int
        Replication seeds.
    multiplier : int
        Reference sample size as a multiple of T.
    eps_bar : float
        Oracle accuracy budget for kinds without a closed form.
    timing : str
        'zero' writes 0.0 in the CSV ms column so equal configs give
        byte-identical output; 'measured' records wall time.
    out_dir : str
        Default output directory.
    """

    sampler: SamplerSpec
    measure: DiscreteMeasure
    cost: CostSpec
    models: tuple
    t_grid: tuple
    seeds: tuple
    multiplier: int = 10
    eps_bar: float = 0.1
    timing: str = "zero"
    out_dir: str = "results"

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ValueError("config must be a JSON object")
        if obj.get("version") != CONFIG_VERSION:
            raise ValueError(f"config field 'version' must be {CONFIG_VERSION}")
        for field in ("sampler", "measure", "cost", "models", "t_grid", "seeds"):
            if field not in obj:
                raise ValueError(f"config is missing field '{field}'")
        sampler = SamplerSpec.from_json(obj["sampler"])
        measure = _resolve_measure(obj["measure"], sampler)
        cost = CostSpec.from_json(obj["cost"])
        models = _parse_models(obj["models"])
        t_grid = obj["t_grid"]
        if (not isinstance(t_grid, list) or not t_grid
                or any(int(t) != t or t < 1 for t in t_grid)
                or any(b <= a for a, b in zip(t_grid, t_grid[1:]))):
            raise ValueError("config field 't_grid' must be a strictly increasing list of positive integers")
        seeds = obj["seeds"]
        if not isinstance(seeds, list) or not seeds or any(int(s) != s for s in seeds):
            raise ValueError("config field 'seeds' must be a nonempty list of integers")
        multiplier = obj.get("multiplier", 10)
        if int(multiplier) != multiplier or multiplier < 1:
            raise ValueError("config field 'multiplier' must be a positive integer")
        eps_bar = float(obj.get("eps_bar", 0.1))
        if not eps_bar >= 0.0:
            raise ValueError("config field 'eps_bar' must be nonnegative")
        timing = obj.get("timing", "zero")
        if timing not in TIMING_MODES:
            raise ValueError(f"config field 'timing' must be one of {TIMING_MODES}")
        return cls(sampler, measure, cost, models,
                   tuple(int(t) for t in t_grid), tuple(int(s) for s in seeds),
                   int(multiplier), eps_bar, timing, str(obj.get("out_dir", "results")))

    def to_json(self) -> dict:
        entries = []
        for tag, model in self.models:
            if model is None:
                entries.append("none")
            elif tag == model.kind:
                entries.append(model.to_json())
            else:
                entries.append({**model.to_json(), "tag": tag})
        return {
            "version": CONFIG_VERSION,
            "sampler": self.sampler.to_json(),
            "measure": self.measure.to_json(),
            "cost": self.cost.to_json(),
            "models": entries,
            "t_grid": list(self.t_grid),
            "seeds": list(self.seeds),
            "multiplier": self.multiplier,
            "eps_bar": self.eps_bar,
            "timing": self.timing,
            "out_dir": self.out_dir,
        }


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ConvergenceRecord:
    """One experiment cell: how far a run of length T landed from the
    finite-sample optimum, in value (subopt) and in potential (potgap)."""

    model: str
    T: int
    seed: int
    subopt: float
    potgap: float
    ms: float

    def __post_init__(self):
        if self.potgap < 0.0:
            raise ValueError("potgap must be nonnegative")
        if self.T < 1:
            raise ValueError("T must be a positive iteration count")


def records_to_csv(records, timing: str = "zero") -> str:
    if timing not in TIMING_MODES:
        raise ValueError(f"timing must be one of {TIMING_MODES}")
    lines = [CSV_HEADER]
    for r in records:
        ms = 0.0 if timing == "zero" else float(r.ms)
        lines.append(f"{r.model},{r.T},{r.seed},{repr(float(r.subopt))},"
                     f"{repr(float(r.potgap))},{repr(ms)}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- runner

def _cell_stream_spec(config: ExperimentConfig, T: int, seed: int) -> SamplerSpec:
    # all models in a (T, seed) cell share one sample path
    child = derive_seed(config.sampler.seed, T, seed)
    sp = config.sampler
    if sp.kind == "empirical":
        return SamplerSpec("empirical", points=sp.points, weights=sp.weights, seed=child)
    return SamplerSpec(sp.kind, d=sp.d, seed=child)


def _run_cell(config: ExperimentConfig, tag: str, model, T: int, seed: int) -> ConvergenceRecord:
    spec = _cell_stream_spec(config, T, seed)
    nu, c = config.measure, config.cost
    t0 = time.perf_counter()
    if model is None:
        # continuity clause: suboptimality is stated at the under-average
        scfg = SolverConfig(T=T, rule="lipschitz", eps_bar=0.0, tikhonov=1e-8)
        phi_out, bar_avg, _ = averaged_sgd(spec, nu, c, None, scfg)
    else:
        eps_bar = 0.0 if model.kind in _CLOSED_FORM_KINDS else config.eps_bar
        lips = marginal_lipschitz(model)
        rule = "smooth" if lips is not None else "lipschitz"
        scfg = SolverConfig(T=T, rule=rule, eps_bar=eps_bar, L=lips)
        _, phi_out, _ = averaged_sgd(spec, nu, c, model, scfg)
        bar_avg = phi_out
    value, phi_star, _ = finite_sample_reference(
        spec, nu, c, model, T, eps_bar=config.eps_bar, multiplier=config.multiplier)
    X = draw(spec, config.multiplier * T)
    estimate, _ = dual_objective_estimate(phi_out, nu, c, model, X)
    gauge = bar_avg - bar_avg.mean()
    ms = (time.perf_counter() - t0) * 1000.0
    return ConvergenceRecord(tag, T, seed, float(value - estimate),
                             float(np.sum((gauge - phi_star) ** 2)), ms)


def _cell_worker(payload):
    config = ExperimentConfig.from_json(json.loads(payload["config"]))
    tag = payload["tag"]
    model = dict(config.models)[tag]
    rec = _run_cell(config, tag, model, payload["T"], payload["seed"])
    return {"model": rec.model, "T": rec.T, "seed": rec.seed,
            "subopt": rec.subopt, "potgap": rec.potgap, "ms": rec.ms}


def _manifest_line(rec: ConvergenceRecord) -> str:
    return json.dumps({"model": rec.model, "T": rec.T, "seed": rec.seed,
                       "subopt": rec.subopt, "potgap": rec.potgap, "ms": rec.ms},
                      sort_keys=True)


def run_convergence_experiment(config: ExperimentConfig, out_dir=None,
                               workers: int = 1, resume: bool = False):
    """Run every (model, T, seed) cell and write records.csv.

    Parameters
    ----------
    config : ExperimentConfig
        What to run; all randomness derives from its seeds.
    out_dir : path-like, optional
        Output directory (defaults to the config's own).
    workers : int
        Process count for independent cells; 1 runs inline.
    resume : bool
        Reuse finished cells from an existing manifest.jsonl written by
        an interrupted run of the same config.

    Returns
    -------
    (records, csv_path)
        Records in canonical order (config model order, then T, then
        seed) and the path of the CSV they were written to.

    Completed cells are appended to manifest.jsonl as they finish, so a
    failed run leaves a resumable trail.
    """
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    manifest = out / "manifest.jsonl"
    done = {}
    if resume and manifest.exists():
        lines = manifest.read_text().splitlines()
        if not lines or json.loads(lines[0]).get("config_hash") != digest:
            raise ValueError("manifest in the output directory belongs to a different config")
        for line in lines[1:]:
            d = json.loads(line)
            done[(d["model"], d["T"], d["seed"])] = ConvergenceRecord(
                d["model"], d["T"], d["seed"], d["subopt"], d["potgap"], d["ms"])
        mode = "a"
    else:
        mode = "w"
    cells = [(tag, model, T, seed)
             for tag, model in config.models
             for T in config.t_grid
             for seed in config.seeds]
    pending = [cell for cell in cells if (cell[0], cell[2], cell[3]) not in done]
    with manifest.open(mode) as mf:
        if mode == "w":
            mf.write(json.dumps({"config_hash": digest, "version": CONFIG_VERSION}) + "\n")
            mf.flush()
        if workers <= 1:
            for tag, model, T, seed in pending:
                rec = _run_cell(config, tag, model, T, seed)
                done[(tag, T, seed)] = rec
                mf.write(_manifest_line(rec) + "\n")
                mf.flush()
        elif pending:
            blob = json.dumps(config.to_json())
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_cell_worker,
                                       {"config": blob, "tag": tag, "T": T, "seed": seed})
                           for tag, _, T, seed in pending]
                for fut in as_completed(futures):
                    d = fut.result()
                    rec = ConvergenceRecord(d["model"], d["T"], d["seed"],
                                            d["subopt"], d["potgap"], d["ms"])
                    done[(rec.model, rec.T, rec.seed)] = rec
                    mf.write(_manifest_line(rec) + "\n")
                    mf.flush()
    records = [done[(tag, T, seed)] for tag, _, T, seed in cells]
    csv_path = out / "records.csv"
    csv_path.write_text(records_to_csv(records, timing=config.timing))
    return records, csv_path


# -------------------------------------------------------------------- slope

def fit_slope(records, field: str = "subopt"):
    """Least-squares slope of log mean value against log T.

    Parameters
    ----------
    records : list of ConvergenceRecord
        Must all carry the same model tag.
    field : str
        'subopt' or 'potgap'.

    Returns
    -------
    (slope, r2)

    T values whose mean is nonpositive are dropped with a warning; at
    least three distinct T values must survive.
    """
    tags = {r.model for r in records}
    if len(tags) != 1:
        raise ValueError("fit_slope needs records from exactly one model")
    by_t = {}
    for r in records:
        by_t.setdefault(r.T, []).append(float(getattr(r, field)))
    ts, means = [], []
    for T in sorted(by_t):
        mean = float(np.mean(by_t[T]))
        if mean > 0.0:
            ts.append(T)
            means.append(mean)
        else:
            warnings.warn(f"dropping nonpositive mean {field} at T={T}")
    if len(ts) < 3:
        raise ValueError("need at least 3 distinct T values with positive means")
    x = np.log(np.asarray(ts, dtype=float))
    y = np.log(np.asarray(means))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    ss_tot = float(total @ total)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(r2)


# -------------------------------------------------------------------- plots

_PALETTE = ("#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#d68910", "#17202a")
_PANELS = (("subopt", "mean suboptimality"), ("potgap", "mean squared potential gap"))
_X0, _X1, _Y0, _Y1 = 70.0, 610.0, 40.0, 430.0


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _text(x, y, s, anchor="middle", size=11, color="#333333", extra=""):
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="{size}" fill="{color}"{extra}>{s}</text>')


def _series_for_panel(records, field):
    order = []
    for r in records:
        if r.model not in order:
            order.append(r.model)
    series, dropped = [], []
    for tag in order:
        pts = []
        for T in sorted({r.T for r in records if r.model == tag}):
            vals = [getattr(r, field) for r in records if r.model == tag and r.T == T]
            mean = float(np.mean(vals))
            if mean > 0.0:
                pts.append((T, mean))
        if pts:
            series.append((tag, pts))
        else:
            dropped.append(tag)
    return series, dropped


def _svg_log_panel(series, title, ylabel) -> str:
    xs = [t for _, pts in series for t, _ in pts]
    ys = [v for _, pts in series for _, v in pts]
    xlo, xhi = math.floor(math.log10(min(xs))), math.ceil(math.log10(max(xs)))
    ylo, yhi = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
    if xhi == xlo:
        xhi = xlo + 1
    if yhi == ylo:
        yhi = ylo + 1

    def px(v):
        return _X0 + (math.log10(v) - xlo) / (xhi - xlo) * (_X1 - _X0)

    def py(v):
        return _Y1 - (math.log10(v) - ylo) / (yhi - ylo) * (_Y1 - _Y0)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="640" height="480" viewBox="0 0 640 480">',
        '<rect x="0" y="0" width="640" height="480" fill="#ffffff"/>',
        _text(0.5 * (_X0 + _X1), 24.0, title, size=15, color="#111111"),
    ]
    for k in range(xlo, xhi + 1):
        x = px(10.0 ** k)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(_Y0)}" x2="{_fmt(x)}" y2="{_fmt(_Y1)}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(_text(x, 452.0, f"1e{k}"))
    for k in range(ylo, yhi + 1):
        y = py(10.0 ** k)
        parts.append(f'<line x1="{_fmt(_X0)}" y1="{_fmt(y)}" x2="{_fmt(_X1)}" y2="{_fmt(y)}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(_text(62.0, y + 4.0, f"1e{k}", anchor="end"))
    parts.append(f'<rect x="{_fmt(_X0)}" y="{_fmt(_Y0)}" width="{_fmt(_X1 - _X0)}" '
                 f'height="{_fmt(_Y1 - _Y0)}" fill="none" stroke="#333333" stroke-width="1"/>')
    for i, (tag, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_fmt(px(t))},{_fmt(py(v))}" for t, v in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{coords}"/>')
        for t, v in pts:
            parts.append(f'<circle cx="{_fmt(px(t))}" cy="{_fmt(py(v))}" r="3" fill="{color}"/>')
        ly = _Y0 + 16.0 + 18.0 * i
        lx = _X1 - 150.0
        parts.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4.0)}" x2="{_fmt(lx + 26.0)}" '
                     f'y2="{_fmt(ly - 4.0)}" stroke="{color}" stroke-width="2.5"/>')
        parts.append(_text(lx + 32.0, ly, tag, anchor="start", size=12))
    parts.append(_text(0.5 * (_X0 + _X1), 472.0, "T"))
    parts.append(_text(16.0, 0.5 * (_Y0 + _Y1), ylabel,
                       extra=f' transform="rotate(-90 {_fmt(16.0)} {_fmt(0.5 * (_Y0 + _Y1))})"'))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(records, out_dir):
    """Write log-log SVG panels (subopt vs T, potgap vs T), one series
    per model. Returns the list of written paths; panels or series with
    no positive means are omitted with a printed notice."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for field, ylabel in _PANELS:
        series, dropped = _series_for_panel(records, field)
        for tag in dropped:
            print(f"plot panel '{field}': series '{tag}' omitted (no positive means)")
        if not series:
            print(f"plot panel '{field}' omitted: no positive means to plot")
            continue
        svg = _svg_log_panel(series, f"convergence: {field} vs T", ylabel)
        path = out / f"convergence_{field}.svg"
        path.write_text(svg)
        paths.append(str(path))
    return paths


# ---------------------------------------------------------------------- CLI

def _load_input(path: str):
    raw = sys.stdin.read() if path == "-" else Path(path).read_text()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"input is not valid JSON: {exc}") from exc


def _require(obj, field, ctx="input"):
    if not isinstance(obj, dict):
        raise ValueError(f"{ctx} must be a JSON object")
    if field not in obj:
        raise ValueError(f"{ctx} is missing field '{field}'")
    return obj[field]


def _optional_model(obj):
    entry = obj.get("model")
    return None if entry is None else MarginalModel.from_json(entry)


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def _cmd_probs(args) -> int:
    obj = _load_input(args.infile)
    model = MarginalModel.from_json(_require(obj, "model"))
    u = np.asarray(_require(obj, "u"), dtype=float)
    vals, P = utilities_values_probs(u[None, :], model, eps=args.eps)
    _print_json({"p": P[0].tolist(), "value": float(vals[0])})
    return 0


def _cmd_transform(args) -> int:
    obj = _load_input(args.infile)
    nu = DiscreteMeasure.from_json(_require(obj, "measure"))
    c = CostSpec.from_json(_require(obj, "cost"))
    model = _optional_model(obj)
    phi = np.asarray(_require(obj, "phi"), dtype=float)
    if phi.shape != (nu.n_atoms,):
        raise ValueError("input field 'phi' must have one entry per measure atom")
    u = phi - cost_vector(_require(obj, "x"), nu.atoms, c)
    vals, P = utilities_values_probs(u[None, :], model, eps=args.eps)
    _print_json({"value": float(vals[0]), "p": P[0].tolist()})
    return 0


def _cmd_solve(args) -> int:
    obj = _load_input(args.infile)
    spec = SamplerSpec.from_json(_require(obj, "sampler"))
    nu = DiscreteMeasure.from_json(_require(obj, "measure"))
    c = CostSpec.from_json(_require(obj, "cost"))
    model = _optional_model(obj)
    sd = _require(obj, "solver")
    T = int(_require(sd, "T", "input field 'solver'"))
    lips = sd.get("L")
    if lips is None and sd.get("rule") == "smooth" and model is not None:
        lips = marginal_lipschitz(model)
    eps_bar = sd.get("eps_bar")
    if eps_bar is None:
        eps_bar = 0.1 if model is not None and model.kind not in _CLOSED_FORM_KINDS else 0.0
    config = SolverConfig(
        T=T, rule=sd.get("rule", "lipschitz"), eps_bar=float(eps_bar), L=lips,
        M=sd.get("M"), tikhonov=float(sd.get("tikhonov", 0.0)),
        seed=args.seed, theorem_variant=bool(sd.get("theorem_variant", False)),
        log_every=sd.get("log_every"))
    _, _, trace = averaged_sgd(spec, nu, c, model, config)
    csv = trace.to_csv(timing=args.timing)
    if args.out is None:
        sys.stdout.write(csv)
    else:
        Path(args.out).write_text(csv)
    return 0


def _cmd_reference(args) -> int:
    obj = _load_input(args.infile)
    spec = SamplerSpec.from_json(_require(obj, "sampler"))
    if args.seed is not None:
        spec = SamplerSpec(spec.kind, d=spec.d, seed=args.seed,
                           points=spec.points, weights=spec.weights)
    nu = DiscreteMeasure.from_json(_require(obj, "measure"))
    c = CostSpec.from_json(_require(obj, "cost"))
    model = _optional_model(obj)
    value, phi, info = finite_sample_reference(
        spec, nu, c, model, int(_require(obj, "T")),
        eps_bar=float(obj.get("eps_bar", 0.1)), multiplier=int(obj.get("multiplier", 10)))
    _print_json({"value": float(value), "phi": phi.tolist(), "info": info})
    return 0


def _cmd_volume(args) -> int:
    obj = _load_input(args.infile)
    inst = KnapsackInstance(np.asarray(_require(obj, "w"), dtype=float),
                            float(_require(obj, "b")), p=float(obj.get("p", 2.0)))
    delta = float(args.tol) if args.tol is not None else float(_require(obj, "delta"))
    qd = _require(obj, "quadrature")
    kind = _require(qd, "kind", "input field 'quadrature'")
    seed = args.seed if args.seed is not None else qd.get("seed")
    quad = QuadratureSpec(kind, m=qd.get("m"), n=qd.get("n"), seed=seed)
    t_hat = knapsack_volume_via_ot(inst, delta, quad)
    exact = exact_knapsack_volume(inst)
    calls = 2 * (math.ceil(math.log2(1.0 / delta)) + 1)
    if quad.kind == "grid":
        qstr = f"grid:m={quad.m}"
    else:
        qstr = f"monte-carlo:n={quad.n}:seed={0 if quad.seed is None else quad.seed}"
    wstr = " ".join(repr(float(v)) for v in inst.w)
    print("w,b,exact_volume,t_hat,delta,quadrature,oracle_calls")
    print(f"{wstr},{repr(inst.b)},{'' if exact is None else repr(exact)},"
          f"{repr(float(t_hat))},{repr(delta)},{qstr},{calls}")
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(_load_input(args.config))
    out_dir = args.out if args.out is not None else config.out_dir
    records, csv_path = run_convergence_experiment(
        config, out_dir=out_dir, workers=args.workers, resume=args.resume)
    slopes = {}
    for tag, _ in config.models:
        subset = [r for r in records if r.model == tag]
        entry = {}
        for field, _label in _PANELS:
            try:
                slope, r2 = fit_slope(subset, field=field)
                entry[field] = {"slope": slope, "r2": r2}
            except ValueError:
                entry[field] = None
        slopes[tag] = entry
    out = Path(out_dir)
    (out / "slopes.json").write_text(json.dumps(slopes, indent=2) + "\n")
    emit_plots(records, out)
    print(f"wrote {len(records)} records to {csv_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sdot", description="semi-discrete transport toolkit command line")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probs", help="choice probabilities for a utility vector")
    p.add_argument("--in", dest="infile", default="-", help="input JSON path, - for stdin")
    p.add_argument("--eps", type=float, default=1e-9,
                   help="accuracy for model kinds solved by bisection")
    p.set_defaults(func=_cmd_probs)

    p = sub.add_parser("transform", help="smoothed transform value at one point")
    p.add_argument("--in", dest="infile", default="-")
    p.add_argument("--eps", type=float, default=1e-9,
                   help="accuracy for model kinds solved by bisection")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("solve", help="averaged stochastic ascent, trace CSV out")
    p.add_argument("--in", dest="infile", default="-")
    p.add_argument("--seed", type=int, default=None, help="override the sampler seed")
    p.add_argument("--timing", choices=TIMING_MODES, default="zero",
                   help="zero the wall-time column for reproducible output")
    p.add_argument("--out", default=None, help="write the CSV here instead of stdout")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("reference", help="finite-sample reference value and potential")
    p.add_argument("--in", dest="infile", default="-")
    p.add_argument("--seed", type=int, default=None, help="override the sampler seed")
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("volume", help="knapsack polytope volume via transport")
    p.add_argument("--in", dest="infile", default="-")
    p.add_argument("--tol", type=float, default=None,
                   help="override the binary search tolerance delta")
    p.add_argument("--seed", type=int, default=None,
                   help="override the monte-carlo quadrature seed")
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser("experiment", help="run a convergence experiment from a config")
    p.add_argument("--config", required=True, help="experiment config JSON path")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--workers", type=int, default=1, help="parallel cell workers")
    p.add_argument("--resume", action="store_true",
                   help="reuse finished cells from an existing manifest")
    p.set_defaults(func=_cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
