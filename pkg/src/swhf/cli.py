"""Command-line drivers.

Every command is a pure function of the resolved configuration and seed:
CSV numbers use 17 significant digits, rows follow input order and each
CSV starts with a ``# config-sha256:`` comment line.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import config as cfg
from .control import ControlProblem, SolverOptions, Variant, gamma_study, solve
from .energy import HamiltonianSpec
from .errors import ConfigError, DegenerateNoiseError, SwhfError
from .flow import FlowConfig, Scheme, integrate
from .graph import Graph, check_density, load_graph, theta_connected_components
from .noise import WienerPath, WongZakaiPath, sample_wiener
from .schrodinger import preset_spec
from .studies import wz_study

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STOPPED = 0, 2, 3, 4
CHUNK = 16  # ensemble members per task; fixed so output never depends on --threads


class NumericalFailure(Exception):
    """Wraps an error raised while a configured run was executing."""

    def __init__(self, cause):
        super().__init__(str(cause))
        self.cause = cause


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")


def write_csv(path: Path, digest: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config-sha256: {digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


# ---------------------------------------------------------------------------
# value parsing


def parse_vector(value, name, n=None):
    """Vector from a list, a comma-separated string, or a JSON/TOML/text file."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip()
        p = Path(text)
        if not text.startswith("[") and "," not in text and p.is_file():
            raw = p.read_text(encoding="utf-8")
            if p.suffix.lower() == ".toml":
                doc = tomli.loads(raw)
                value = doc.get(name.split(".")[-1], next(iter(doc.values()), None))
            elif raw.lstrip().startswith(("[", "{")):
                value = json.loads(raw)
                if isinstance(value, dict):
                    value = value.get(name.split(".")[-1], next(iter(value.values()), None))
            else:
                value = raw.replace("\n", " ").replace(",", " ").split()
        elif text.startswith("["):
            value = json.loads(text)
        else:
            value = [s for s in text.replace(",", " ").split() if s]
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(f"field {name} is not a numeric vector", [name]) from None
    if n is not None and arr.shape != (n,):
        raise ConfigError(f"field {name} must have {n} entries, got {arr.size}", [name])
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"field {name} must be finite", [name])
    return arr


def parse_list(value, name):
    arr = parse_vector(value, name)
    if arr is None or arr.size == 0:
        raise ConfigError(f"field {name} must be a non-empty list", [name])
    return arr


def _graph(doc) -> Graph:
    section = cfg.get(doc, "graph")
    if not section:
        raise ConfigError("a graph is required (--graph or [graph])", ["graph"])
    try:
        if "file" in section:
            if not Path(section["file"]).is_file():
                raise ConfigError(f"graph file {section['file']!r} does not exist", ["graph.file"])
            return load_graph(section["file"])
        return load_graph({"nodes": section.get("nodes"), "edges": section.get("edges", [])})
    except ConfigError:
        raise
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid graph: {exc}", ["graph"]) from None


def _seed(doc, needed: bool):
    seed = cfg.get(doc, "noise.seed", cfg.get(doc, "seed"))
    if seed is None:
        if needed:
            raise ConfigError("a seed is required for stochastic runs (--seed)", ["seed"])
        return None
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {seed!r}", ["seed"]) from None
    if seed < 0:
        raise ConfigError("seed must be non-negative", ["seed"])
    return seed


def _positive(doc, dotted, default, kind=float):
    value = cfg.get(doc, dotted, default)
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field {dotted} has an invalid value {value!r}", [dotted]) from None
    if not value > 0:
        raise ConfigError(f"field {dotted} must be positive", [dotted])
    return value


def _hamiltonian(doc, n, nls: bool) -> HamiltonianSpec:
    kinds = {k: cfg.get(doc, f"hamiltonian.{k}") for k in ("theta", "theta_tilde")}
    kinds = {k: v for k, v in kinds.items() if v is not None}
    if nls:
        preset = cfg.get(doc, "nls.preset")
        if preset is None:
            raise ConfigError("nls needs a preset (--preset)", ["nls.preset"])
        w = cfg.get(doc, "nls.w")
        return preset_spec(
            preset,
            n,
            v=parse_vector(cfg.get(doc, "nls.v"), "nls.v", n),
            w=None if w is None else np.asarray(w, dtype=float),
            sigma=parse_vector(cfg.get(doc, "nls.sigma"), "nls.sigma", n),
            **kinds,
        )
    section = cfg.get(doc, "hamiltonian", {})
    return HamiltonianSpec.from_mapping(section, n)


# ---------------------------------------------------------------------------
# simulate / nls


@dataclass
class SimulationJob:
    graph: Graph
    spec: HamiltonianSpec
    flow: FlowConfig
    rho0: np.ndarray
    S0: np.ndarray
    seed: int | None
    paths: int
    delta: float | None
    dt_w: float | None
    nls: bool
    require_global: bool = False
    extra: dict = field(default_factory=dict)


def _build_simulation(doc, nls, require_global=False) -> SimulationJob:
    g = _graph(doc)
    spec = _hamiltonian(doc, g.n, nls)
    h = _positive(doc, "numerics.h", None)
    T = _positive(doc, "numerics.T", 1.0)
    scheme = cfg.get(doc, "numerics.scheme", "heun")
    try:
        flow = FlowConfig(
            h=h,
            T=T,
            scheme=Scheme.parse(scheme),
            rho_min=_positive(doc, "numerics.rho_min", 1e-8),
            S_max=_positive(doc, "numerics.S_max", 1e8),
            store_every=_positive(doc, "numerics.store_every", 10, int),
        )
        flow.n_steps
    except ValueError as exc:
        raise ConfigError(str(exc), ["numerics"]) from None
    rho0 = parse_vector(cfg.get(doc, "initial.rho0"), "initial.rho0", g.n)
    if rho0 is None:
        rho0 = np.full(g.n, 1.0 / g.n)
    try:
        check_density(rho0, g.n, interior=True)
    except ValueError as exc:
        raise ConfigError(f"initial.rho0: {exc}", ["initial.rho0"]) from None
    S0 = parse_vector(cfg.get(doc, "initial.S0"), "initial.S0", g.n)
    S0 = np.zeros(g.n) if S0 is None else S0
    noisy = spec.has_noise
    seed = _seed(doc, noisy)
    paths = _positive(doc, "noise.paths", 1, int)
    delta = cfg.get(doc, "noise.delta")
    if flow.scheme is Scheme.WONG_ZAKAI and noisy:
        delta = _positive(doc, "noise.delta", None)
    dt_w = cfg.get(doc, "noise.dt")
    if noisy:
        dt_w = _positive(doc, "noise.dt", delta if flow.scheme is Scheme.WONG_ZAKAI else h)
    return SimulationJob(g, spec, flow, rho0, S0, seed, paths if noisy else 1, delta, dt_w, nls, require_global)


def _noise_for(job: SimulationJob, members):
    if not job.spec.has_noise:
        return None
    rows = [sample_wiener(job.seed, job.flow.T, job.dt_w, member=k).values for k in members]
    wiener = WienerPath(job.seed, job.flow.T, job.dt_w, np.vstack(rows), tuple(members))
    if job.flow.scheme is Scheme.WONG_ZAKAI:
        return WongZakaiPath(wiener, float(job.delta))
    return wiener


def _run_chunk(job: SimulationJob, members):
    noise = _noise_for(job, members)
    rho0 = np.broadcast_to(job.rho0, (len(members), job.graph.n))
    return integrate(job.flow, job.spec, job.graph, rho0, job.S0, noise)


def run_simulation(job: SimulationJob, out_dir: Path, digest: str, executor, out_name=None):
    members = list(range(job.paths))
    chunks = [members[i : i + CHUNK] for i in range(0, len(members), CHUNK)]
    try:
        trajs = list(executor.map(lambda c: _run_chunk(job, c), chunks))
    except (SwhfError, ArithmeticError, ValueError) as exc:
        raise NumericalFailure(exc) from exc
    n = job.graph.n
    header = ["t", "path"] + [f"rho_{i + 1}" for i in range(n)] + [f"S_{i + 1}" for i in range(n)]
    if job.nls:
        header += [f"abs_u_{i + 1}" for i in range(n)] + [f"phase_{i + 1}" for i in range(n)]
    header += ["H0", "H1", "stopped"]
    rows, summary = [], []
    for chunk, traj in zip(chunks, trajs):
        for p, member in enumerate(chunk):
            tau = traj.tau[p]
            for k, t in enumerate(traj.times):
                rho, S = traj.rho[k, p], traj.S[k, p]
                row = [t, str(member), *rho, *S]
                if job.nls:
                    row += [*np.sqrt(np.maximum(rho, 0.0)), *np.angle(np.exp(1j * S))]
                row += [traj.H0[k, p], traj.H1[k, p], "1" if tau <= t + 1e-12 else "0"]
                rows.append(row)
            summary.append({
                "path": member,
                "tau": None if not np.isfinite(tau) else float(tau),
                "stopped": bool(traj.stopped[p]),
                "reason": traj.reason[p],
                "min_rho": float(traj.min_rho[p]),
                "H0_final": float(traj.H0[-1, p]),
                "H1_final": float(traj.H1[-1, p]),
            })
    name = out_name or "trajectory.csv"
    write_csv(out_dir / name, digest, header, rows)
    n_stopped = sum(s["stopped"] for s in summary)
    write_json(out_dir / "summary.json", {
        "config_hash": digest,
        "seed": job.seed,
        "paths": summary,
        "stopped": n_stopped,
        "min_rho": min(s["min_rho"] for s in summary),
    })
    print(f"wrote {out_dir / name} and {out_dir / 'summary.json'} ({n_stopped} of {len(summary)} paths stopped)")
    if job.require_global and n_stopped:
        return EXIT_STOPPED
    return EXIT_OK


# ---------------------------------------------------------------------------
# control / gamma-study


def _build_control(doc, variant=None) -> tuple[ControlProblem, SolverOptions]:
    g = _graph(doc)
    try:
        rho_a = check_density(parse_vector(cfg.require(doc, "control.rho_a"), "control.rho_a", g.n), g.n)
        rho_b = check_density(parse_vector(cfg.require(doc, "control.rho_b"), "control.rho_b", g.n), g.n)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"control densities: {exc}", ["control.rho_a", "control.rho_b"]) from None
    M = _positive(doc, "numerics.M", 100, int)
    variant = Variant.parse(variant or cfg.get(doc, "control.variant", "additive"))
    sigma = parse_vector(cfg.get(doc, "control.sigma"), "control.sigma", g.n)
    epsilon = float(cfg.get(doc, "control.epsilon", 0.0))
    delta = cfg.get(doc, "noise.delta")
    kw = dict(variant=variant, sigma=sigma, epsilon=epsilon)
    try:
        if delta is not None:
            seed = _seed(doc, True)
            delta = _positive(doc, "noise.delta", None)
            dt_w = _positive(doc, "noise.dt", delta)
            problem = ControlProblem.with_noise(g, rho_a, rho_b, M, seed=seed, delta=delta, dt_w=dt_w, **kw)
        else:
            problem = ControlProblem(g, rho_a, rho_b, M, **kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"control problem: {exc}", ["control"]) from None
    opts = {"raise_on_failure": True}
    tol = cfg.get(doc, "numerics.tol_gap")
    if tol is not None:
        tol = _positive(doc, "numerics.tol_gap", None)
        opts.update(tol_gap_abs=tol, tol_gap_rel=tol)
    if cfg.get(doc, "numerics.max_iter") is not None:
        opts["max_iter"] = _positive(doc, "numerics.max_iter", None, int)
    return problem, SolverOptions(**opts)


def run_control(problem, opts, out_dir: Path, digest: str, out_name=None):
    try:
        sol = solve(problem, opts)
    except (SwhfError, ArithmeticError, ValueError) as exc:
        raise NumericalFailure(exc) from exc
    g = problem.graph
    payload = sol.to_dict()
    payload.update(config_hash=digest, variant=problem.variant.value, M=problem.M,
                   S_start=sol.S_start, S_end=sol.S_end)
    name = out_name or "solution.json"
    write_json(out_dir / name, payload)
    header = (["t"] + [f"rho_{i + 1}" for i in range(g.n)]
              + [f"m_{int(i) + 1}_{int(j) + 1}" for i, j in g.edges] + [f"S_{i + 1}" for i in range(g.n)])
    rows = []
    for k in range(problem.M + 1):
        row = [k * problem.h, *sol.rho[k]]
        row += [*sol.m[k], *sol.S[k]] if k < problem.M else [""] * (g.n_edges + g.n)
        rows.append(row)
    write_csv(out_dir / "paths.csv", digest, header, rows)
    print(f"action {fmt(sol.action)}  gap {fmt(sol.gap)}  residual {fmt(sol.residual)}")
    return EXIT_OK


def run_gamma(problem, opts, eps, out_dir: Path, digest: str, executor):
    try:
        rows = gamma_study(problem, eps, opts, executor=executor)
    except (SwhfError, ArithmeticError, ValueError) as exc:
        raise NumericalFailure(exc) from exc
    dist = [d for e, _, d in rows if e > 0]
    monotone = bool(all(b < a for a, b in zip(dist, dist[1:])))
    write_csv(out_dir / "gamma_study.csv", digest, ["eps", "action", "distance"], rows)
    write_json(out_dir / "gamma_study.json", {
        "config_hash": digest,
        "rows": [{"eps": e, "action": a, "distance": d} for e, a, d in rows],
        "monotone_decrease": monotone,
    })
    for e, a, d in rows:
        print(f"eps {fmt(e)}  action {fmt(a)}  distance {fmt(d)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wz-study / components


def run_wz(job: SimulationJob, deltas, substeps, out_dir: Path, digest: str, executor):
    if job.seed is None:
        raise ConfigError("wz-study needs a seed", ["seed"])
    try:
        study = wz_study(job.spec, job.graph, job.rho0, job.S0, seed=job.seed, n_seeds=job.paths, deltas=deltas,
                         dt_w=job.dt_w, substeps=substeps, T=job.flow.T, executor=executor)
    except (SwhfError, ArithmeticError) as exc:
        raise NumericalFailure(exc) from exc
    write_csv(out_dir / "wz_study.csv", digest, ["delta", "error", "stopped_paths"], study.rows())
    write_json(out_dir / "wz_study.json", {
        "config_hash": digest,
        "rows": [{"delta": d, "error": e, "stopped_paths": s} for d, e, s in study.rows()],
        "monotone_decrease": study.monotone,
    })
    for d, e, _ in study.rows():
        print(f"delta {fmt(d)}  error {fmt(e)}")
    print("monotone decrease" if study.monotone else "not monotone")
    return EXIT_OK


def run_components(doc, out_dir: Path, digest: str):
    g = _graph(doc)
    rho = parse_vector(cfg.get(doc, "components.rho", cfg.get(doc, "initial.rho0")), "components.rho", g.n)
    if rho is None:
        raise ConfigError("components needs a density (--rho)", ["components.rho"])
    tol = float(cfg.get(doc, "components.tol", 0.0))
    try:
        check_density(rho, g.n)
        blocks = theta_connected_components(g, rho, tol)
    except ValueError as exc:
        raise ConfigError(f"components: {exc}", ["components"]) from None
    blocks = [[i + 1 for i in b] for b in blocks]
    write_json(out_dir / "components.json", {"config_hash": digest, "tol": tol, "components": blocks})
    print(json.dumps(blocks))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed of the noise")
    p.add_argument("--out-dir", help="directory for output artifacts (default: current)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for independent tasks")
    return p


def _flow_flags(p):
    p.add_argument("--graph", help="graph JSON file")
    p.add_argument("--spec", help="Hamiltonian file with [h0] and [h1] tables")
    p.add_argument("--scheme", choices=["wong-zakai", "wz", "heun", "ito-euler", "ito"])
    p.add_argument("--dt", type=float, help="time step h")
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--seeds", type=int, help="number of ensemble paths")
    p.add_argument("--wz-delta", type=float, help="Wong-Zakai interpolation width")
    p.add_argument("--dt-w", type=float, help="Brownian grid spacing")
    p.add_argument("--rho0", help="initial density (comma list or file)")
    p.add_argument("--S0", help="initial potential (comma list or file)")
    p.add_argument("--store-every", type=int)
    p.add_argument("--out", help="output file name inside --out-dir")


def _control_flags(p):
    p.add_argument("--graph", help="graph JSON file")
    p.add_argument("--rho-a", help="initial density")
    p.add_argument("--rho-b", help="terminal density")
    p.add_argument("--sigma-potential", help="noise potential of the additive variant")
    p.add_argument("--epsilon", type=float, help="noise strength of the special variant")
    p.add_argument("--variant", choices=["additive", "special"])
    p.add_argument("--M", type=int, help="number of time intervals")
    p.add_argument("--wz-delta", type=float, help="Wong-Zakai interpolation width")
    p.add_argument("--dt-w", type=float, help="Brownian grid spacing")
    p.add_argument("--tol-gap", type=float, help="duality-gap tolerance (absolute and relative)")
    p.add_argument("--max-iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="swhf", parents=[common],
                                     description="Stochastic Wasserstein Hamiltonian flows on graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="integrate the Hamiltonian flow")
    _flow_flags(sim)
    sim.add_argument("--require-global", action="store_true", help="exit 4 when any path stops before T")

    nls = sub.add_parser("nls", parents=[common], help="simulate a Schrodinger preset")
    _flow_flags(nls)
    nls.add_argument("--preset", choices=["common-noise", "logarithmic", "dispersion"])
    nls.add_argument("--sigma", help="noise potential (comma list or file)")
    nls.add_argument("--require-global", action="store_true")

    ctl = sub.add_parser("control", parents=[common], help="solve the transport control problem")
    _control_flags(ctl)
    ctl.add_argument("--out", help="solution file name inside --out-dir")

    wz = sub.add_parser("wz-study", parents=[common], help="Wong-Zakai convergence table")
    _flow_flags(wz)
    wz.add_argument("--preset", choices=["common-noise", "logarithmic", "dispersion"])
    wz.add_argument("--sigma", help="noise potential for a preset")
    wz.add_argument("--deltas", help="decreasing list of widths")
    wz.add_argument("--substeps", type=int, help="Wong-Zakai steps per interval")

    gam = sub.add_parser("gamma-study", parents=[common], help="actions of the special variant as eps shrinks")
    _control_flags(gam)
    gam.add_argument("--eps", help="list of eps values")

    comp = sub.add_parser("components", parents=[common], help="theta-connected components of a density")
    comp.add_argument("--graph", help="graph JSON file")
    comp.add_argument("--rho", help="density (comma list or file)")
    comp.add_argument("--tol", type=float)
    return parser


def _spec_file(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"spec file {path!r} does not exist", ["--spec"])
    text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text) if p.suffix.lower() == ".json" else tomli.loads(text)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"spec file {path!r}: {exc}", ["--spec"]) from None
    return doc.get("hamiltonian", doc)


def resolve(args) -> dict:
    """Merge the config file with command-line overrides."""
    doc = cfg.load_document(args.config)
    a = vars(args)
    ov = {
        "seed": a.get("seed"),
        "output.dir": a.get("out_dir"),
        "numerics.scheme": a.get("scheme"),
        "numerics.h": a.get("dt"),
        "numerics.T": a.get("T"),
        "numerics.store_every": a.get("store_every"),
        "numerics.M": a.get("M"),
        "numerics.tol_gap": a.get("tol_gap"),
        "numerics.max_iter": a.get("max_iter"),
        "numerics.substeps": a.get("substeps"),
        "noise.paths": a.get("seeds"),
        "noise.delta": a.get("wz_delta"),
        "noise.dt": a.get("dt_w"),
        "initial.rho0": a.get("rho0"),
        "initial.S0": a.get("S0"),
        "nls.preset": a.get("preset"),
        "nls.sigma": a.get("sigma"),
        "control.rho_a": a.get("rho_a"),
        "control.rho_b": a.get("rho_b"),
        "control.sigma": a.get("sigma_potential"),
        "control.epsilon": a.get("epsilon"),
        "control.variant": a.get("variant"),
        "study.deltas": a.get("deltas"),
        "study.eps": a.get("eps"),
        "components.rho": a.get("rho"),
        "components.tol": a.get("tol"),
    }
    if a.get("seed") is not None:
        ov["noise.seed"] = a["seed"]
    if a.get("graph"):
        doc = dict(doc)
        doc["graph"] = {"file": str(Path(a["graph"]).resolve())}
    if a.get("spec"):
        doc = dict(doc)
        doc["hamiltonian"] = _spec_file(a["spec"])
    return cfg.merge_overrides(doc, ov)


def _dispatch(args, doc, out_dir: Path, digest: str, executor) -> int:
    cmd = args.command
    if cmd in ("simulate", "nls"):
        job = _build_simulation(doc, cmd == "nls", args.require_global)
        return run_simulation(job, out_dir, digest, executor, args.out)
    if cmd == "control":
        problem, opts = _build_control(doc)
        return run_control(problem, opts, out_dir, digest, args.out)
    if cmd == "gamma-study":
        problem, opts = _build_control(doc, "special")
        eps = parse_list(cfg.get(doc, "study.eps", [0.2, 0.1, 0.05]), "study.eps")
        if np.any(eps < 0):
            raise ConfigError("eps values must be non-negative", ["study.eps"])
        try:
            problem.replace(epsilon=float(eps.max())).reweighting()
        except DegenerateNoiseError as exc:
            raise NumericalFailure(exc) from exc
        return run_gamma(problem, opts, eps, out_dir, digest, executor)
    if cmd == "wz-study":
        nls = cfg.get(doc, "nls.preset") is not None
        doc = cfg.merge_overrides(doc, {"numerics.scheme": "heun"})
        deltas = parse_list(cfg.get(doc, "study.deltas", [2.0**-k for k in range(4, 9)]), "study.deltas")
        # the Heun reference runs on the Brownian grid itself
        if cfg.get(doc, "noise.dt") is None:
            doc = cfg.merge_overrides(doc, {"noise.dt": float(deltas.min()) / 32})
        doc = cfg.merge_overrides(doc, {"numerics.h": cfg.get(doc, "noise.dt")})
        job = _build_simulation(doc, nls)
        substeps = _positive(doc, "numerics.substeps", 2, int)
        try:
            deltas = np.asarray(deltas, dtype=float)
            for d in deltas:
                WongZakaiPath(sample_wiener(0, job.flow.T, job.dt_w), float(d))
        except ValueError as exc:
            raise ConfigError(f"study.deltas: {exc}", ["study.deltas"]) from None
        return run_wz(job, deltas, substeps, out_dir, digest, executor)
    if cmd == "components":
        return run_components(doc, out_dir, digest)
    raise ConfigError(f"unknown command {cmd!r}", ["command"])


def _report(exc, code, out_dir):
    cause = exc.cause if isinstance(exc, NumericalFailure) else exc
    payload = {"exit_code": code, "error": type(cause).__name__, "message": str(cause)}
    for attr in ("fields", "time", "step", "path", "gap", "residual", "iterations", "interval"):
        if getattr(cause, attr, None) is not None:
            payload[attr] = getattr(cause, attr)
    text = json.dumps(_jsonable(payload), sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None and out_dir.is_dir():
        (out_dir / "error.json").write_text(text + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = None
    try:
        doc = resolve(args)
        out_dir = Path(cfg.get(doc, "output.dir") or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        digest = cfg.config_hash({k: v for k, v in doc.items() if k != "output"}, args.command)
        threads = args.threads
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be positive", ["--threads"])
        with (ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else nullcontext(_Serial())) as ex:
            return _dispatch(args, doc, out_dir, digest, ex)
    except NumericalFailure as exc:
        _report(exc, EXIT_NUMERIC, out_dir)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, OSError) as exc:
        _report(exc, EXIT_CONFIG, out_dir)
        return EXIT_CONFIG


class _Serial:
    def map(self, fn, items):
        return map(fn, items)


if __name__ == "__main__":
    sys.exit(main())
