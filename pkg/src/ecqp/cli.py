"""Batch benchmark and reproduction harness.

Subcommands: sweep (iterations vs conditioning scatter for the selected
solvers over random instances), compare (per-conditioning-bin maximum
iteration table across all methods), worstcase (per-iteration residual
curves on the sharp construction), diagnose (spectral diagnostics and
eigenvalue scatter for one instance), sdp (synthetic interior-point Newton
subproblems), solve (one problem file).

CSV is the source of truth; SVG output is a convenience rendering with one
marker per CSV data row.  Every run is reproducible from its seed and
flags; a key=value config file can stand in for any flag.  Exit codes:
0 all solves converged, 2 some hit the iteration cap, 1 usage/runtime
error.  Worker-pool size comes from --threads or ECQP_THREADS; parallel
and serial runs emit identical CSVs (time columns excepted).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import diagnostics, krylov, linalg, precond, problem, svgplot
from .admm import AdmmOperator
from .krylov import KrylovConfig
from .problem import spectral_constants
from .sdpnewton import SdpAdmmOperator, synthetic_newton

ALL_SOLVERS = ("admm", "sor2", "admm_gmres", "admm_gmres_r5", "admm_gmres_r10",
               "admm_gmres_r25", "blkdiag", "constr1", "constr2", "hss")
COMPARE_SOLVERS = ("admm", "blkdiag", "constr1", "constr2", "hss",
                   "admm_gmres", "admm_gmres_r5", "admm_gmres_r10", "admm_gmres_r25")
KAPPA_BINS = ((0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0), (8.0, 10.0))


@dataclass
class ExperimentConfig:
    command: str
    n: int = 200
    m: int = 0             # 0 = sample uniformly from {1..n}
    l: int = 0             # 0 = sample uniformly from {1..m}
    s_min: float = 0.0
    s_max: float = 2.0
    count: int = 50
    seed: int = 0
    tol: float = 1e-6
    max_iters: int = 1000
    admm_max_iters: int = 0  # 0 = same as max_iters
    solvers: tuple[str, ...] = ("admm", "admm_gmres")
    restart: int = 25
    kappa: float = 1e4
    kappas: tuple[float, ...] = (1e2, 1e4, 1e6)
    s: float = 1.0
    out_csv: str = ""
    out_svg: str = ""
    threads: int = 0
    problem_file: str = ""

    def validate(self):
        if self.count < 1 or self.n < 1 or self.seed < 0:
            raise ValueError("count and n must be >= 1, seed >= 0")
        if not (0 <= self.s_min <= self.s_max):
            raise ValueError("need 0 <= s-min <= s-max")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol must be > 0 and max-iters >= 1")
        for name in self.solvers:
            if name not in ALL_SOLVERS:
                raise ValueError(f"unknown solver {name!r}; choices: {ALL_SOLVERS}")

    @property
    def admm_cap(self) -> int:
        return self.admm_max_iters if self.admm_max_iters > 0 else self.max_iters

    @property
    def nthreads(self) -> int:
        if self.threads > 0:
            return self.threads
        return int(os.environ.get("ECQP_THREADS", "1"))


def _fmt_num(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_num(v) for v in row])


class _Instance:
    """Per-instance lazy caches shared across solvers."""

    def __init__(self, prob):
        self.prob = prob
        self.constants = spectral_constants(prob)
        self._op = None
        self._ws = None

    @property
    def op(self) -> AdmmOperator:
        if self._op is None:
            self._op = AdmmOperator(self.prob, constants=self.constants)
        return self._op

    @property
    def ws(self) -> precond.SaddleWorkspace:
        if self._ws is None:
            self._ws = precond.SaddleWorkspace(self.prob, constants=self.constants)
        return self._ws


def make_instance(cfg: ExperimentConfig, i: int):
    """Deterministic instance i: dims and conditioning from one seed stream,
    matrix draws from a second."""
    rng = linalg.make_rng([cfg.seed, i, 0])
    s = float(rng.uniform(cfg.s_min, cfg.s_max))
    m = cfg.m if cfg.m > 0 else int(rng.integers(1, cfg.n + 1))
    l = cfg.l if cfg.l > 0 else int(rng.integers(1, m + 1))
    prob = problem.random_problem(cfg.n, m, l, s, seed=[cfg.seed, i, 1])
    return prob, s


def run_solver(name: str, inst: _Instance, cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    if name == "admm":
        _, rep = inst.op.solve(tol=cfg.tol, max_iters=cfg.admm_cap)
    elif name == "sor2":
        _, rep = inst.op.solve_sor(2.0, tol=cfg.tol, max_iters=cfg.admm_cap)
    elif name.startswith("admm_gmres"):
        restart = int(name.rsplit("_r", 1)[1]) if "_r" in name else None
        kcfg = KrylovConfig(tol=cfg.tol, max_iters=cfg.max_iters, restart=restart)
        _, rep = krylov.admm_gmres(inst.op, kcfg, gate="saddle")
    elif name in precond.SOLVERS:
        _, _, _, rep = precond.SOLVERS[name](inst.ws, tol=cfg.tol,
                                             max_iters=cfg.max_iters)
    else:
        raise ValueError(f"unknown solver {name!r}")
    cpu = time.perf_counter() - t0
    final = rep.final_saddle
    if final is None:
        final = float(rep.residual_history[-1])
    return {"solver": name, "iterations": rep.iterations, "status": rep.status,
            "final_residual": final, "cpu_s": cpu}


SWEEP_HEADER = ["index", "n", "m", "l", "s", "kappa", "beta", "delta", "delta_lb",
                "kappa_X", "nu", "solver", "iterations", "status",
                "final_residual", "cpu_s"]


def _sweep_instance(args) -> list[list]:
    cfg, i, with_diag = args
    prob, s = make_instance(cfg, i)
    inst = _Instance(prob)
    beta = inst.op.beta
    if with_diag:
        drep = diagnostics.diagnose(prob, constants=inst.constants)
        diag = [drep.delta, drep.delta_lb, drep.kappa_X, drep.nu]
    else:
        diag = [float("nan")] * 4
    base = [i, prob.n, prob.m, prob.l, s, inst.constants.kappa, beta, *diag]
    rows = []
    for name in cfg.solvers:
        r = run_solver(name, inst, cfg)
        rows.append(base + [r["solver"], r["iterations"], r["status"],
                            r["final_residual"], r["cpu_s"]])
    return rows


def _map_instances(cfg: ExperimentConfig, worker, payloads: list):
    if cfg.nthreads > 1:
        import multiprocessing as mp
        method = "fork" if "fork" in mp.get_all_start_methods() else "spawn"
        with get_context(method).Pool(cfg.nthreads) as pool:
            return pool.map(worker, payloads)
    return [worker(p) for p in payloads]


def cmd_sweep(cfg: ExperimentConfig, with_diag: bool = True) -> int:
    payloads = [(cfg, i, with_diag) for i in range(cfg.count)]
    per_instance = _map_instances(cfg, _sweep_instance, payloads)
    rows = [row for rows in per_instance for row in rows]
    if cfg.out_csv:
        write_csv(cfg.out_csv, SWEEP_HEADER, rows)
    if cfg.out_svg:
        _sweep_svg(cfg, rows)
    bad = sum(1 for r in rows if r[13] != "converged")
    print(f"sweep: {cfg.count} instances x {len(cfg.solvers)} solvers, "
          f"{bad} non-converged runs")
    return 2 if bad else 0


def _sweep_svg(cfg: ExperimentConfig, rows: list[list]) -> None:
    series = []
    markers = {"admm": "circle", "admm_gmres": "cross"}
    for name in cfg.solvers:
        pts = [(r[5], r[12]) for r in rows if r[11] == name and r[13] == "converged"]
        if pts:
            series.append(svgplot.Series(
                name=name, x=[p[0] for p in pts], y=[p[1] for p in pts],
                marker=markers.get(name, "circle")))
    kappas = sorted({r[5] for r in rows if r[5] > 0})
    ref = []
    if kappas:
        kgrid = np.geomspace(max(min(kappas), 1.0 + 1e-9), max(kappas), 64)
        ref = [svgplot.RefLine("10 sqrt(k)", kgrid, 10 * np.sqrt(kgrid)),
               svgplot.RefLine("6 k^(1/4)", kgrid, 6 * kgrid ** 0.25,
                               color="#bb7722")]
    svgplot.svg_plot(cfg.out_svg, series, ref, title="iterations to tol vs conditioning",
                     xlabel="kappa", ylabel="iterations", xlog=True, ylog=True)


def cmd_compare(cfg: ExperimentConfig) -> int:
    payloads = [(cfg, i, False) for i in range(cfg.count)]
    per_instance = _map_instances(cfg, _sweep_instance, payloads)
    rows = [row for rows in per_instance for row in rows]
    header = ["bin_lo", "bin_hi", "trials", "solver", "converged",
              "max_iterations", "max_cpu_s", "over_cap"]
    out = []
    printed = [f"{'solver':>16} | " + " | ".join(
        f"({lo:g},{hi:g}]" for lo, hi in KAPPA_BINS)]
    cells: dict[str, list[str]] = {name: [] for name in cfg.solvers}
    edges = [hi for _lo, hi in KAPPA_BINS[:-1]]
    binned: list[list[list]] = [[] for _ in KAPPA_BINS]
    for r in rows:
        logk = np.log10(max(r[5], 1e-300))
        binned[int(np.searchsorted(edges, logk, side="left"))].append(r)
    for (lo, hi), in_bin in zip(KAPPA_BINS, binned):
        trials = len({r[0] for r in in_bin})
        for name in cfg.solvers:
            sub = [r for r in in_bin if r[11] == name]
            conv = [r for r in sub if r[13] == "converged"]
            over = len(sub) - len(conv)
            max_it = max((r[12] for r in conv), default=0)
            max_cpu = max((r[15] for r in sub), default=0.0)
            out.append([lo, hi, trials, name, len(conv), max_it, max_cpu, over])
            cells[name].append(f">cap({over})" if over else str(max_it))
    for name in cfg.solvers:
        printed.append(f"{name:>16} | " + " | ".join(f"{c:>8}" for c in cells[name]))
    print("\n".join(printed))
    if cfg.out_csv:
        write_csv(cfg.out_csv, header, out)
    bad = sum(1 for r in rows if r[13] != "converged")
    return 2 if bad else 0


def cmd_worstcase(cfg: ExperimentConfig) -> int:
    m = cfg.m if cfg.m > 0 else 64
    prob = problem.worst_case_problem(m, cfg.kappa, seed=cfg.seed)
    op = AdmmOperator(prob)
    a = (np.sqrt(cfg.kappa) - 1) / (np.sqrt(cfg.kappa) + 1)
    _, rep_admm = op.solve(tol=cfg.tol, max_iters=cfg.admm_cap)
    _, rep_sor = op.solve_sor(2.0, tol=cfg.tol, max_iters=cfg.admm_cap)
    _, rep_g = krylov.admm_gmres(op, KrylovConfig(tol=cfg.tol, max_iters=cfg.max_iters))
    hists = {"admm": rep_admm.m_metric_history, "sor2": rep_sor.m_metric_history,
             "admm_gmres": rep_g.m_metric_history}
    kmax = max(len(h) for h in hists.values())
    theory = hists["admm_gmres"][0] * a ** np.arange(kmax, dtype=np.float64)
    header = ["iteration", "admm", "sor2", "admm_gmres", "worst_case_rate"]
    rows = []
    for k in range(kmax):
        row = [k]
        for name in ("admm", "sor2", "admm_gmres"):
            h = hists[name]
            row.append(float(h[k]) if k < len(h) else float("nan"))
        row.append(float(theory[k]))
        rows.append(row)
    if cfg.out_csv:
        write_csv(cfg.out_csv, header, rows)
    if cfg.out_svg:
        series = [svgplot.Series(name, np.arange(len(h)), h, marker="line")
                  for name, h in hists.items()]
        ref = [svgplot.RefLine("rate bound", np.arange(kmax), theory)]
        svgplot.svg_plot(cfg.out_svg, series, ref, title=f"m={m} kappa={cfg.kappa:g}",
                         xlabel="iteration", ylabel="fixed-point residual", ylog=True)
    k0, k1 = 10, min(40, len(rep_g.m_metric_history) - 1)
    rate_g = diagnostics.fit_geometric_rate(rep_g.m_metric_history, k0, k1)
    rate_s = diagnostics.fit_geometric_rate(rep_sor.m_metric_history, k0,
                                            min(40, len(rep_sor.m_metric_history) - 1))
    print(f"worstcase m={m} kappa={cfg.kappa:g}: rate(admm_gmres)={rate_g:.6f} "
          f"rate(sor2)={rate_s:.6f} bound={(np.sqrt(cfg.kappa) - 1) / (np.sqrt(cfg.kappa) + 1):.6f}")
    return 0


def cmd_diagnose(cfg: ExperimentConfig) -> int:
    if cfg.problem_file:
        prob = problem.load_problem(cfg.problem_file)
    else:
        prob, _ = make_instance(cfg, 0)
    rep = diagnostics.diagnose(prob)
    header = ["kappa", "beta", "normK", "delta", "delta_lb", "kappa_X", "nu"]
    row = [rep.kappa, rep.beta, rep.norm_K, rep.delta, rep.delta_lb,
           rep.kappa_X, rep.nu]
    print(", ".join(f"{h}={_fmt_num(v)}" for h, v in zip(header, row)))
    if cfg.out_csv:
        write_csv(cfg.out_csv, header, [row])
        stem, ext = os.path.splitext(cfg.out_csv)
        eig_rows = [[float(w.real), float(w.imag)] for w in rep.eigenvalues]
        write_csv(stem + "_eigs" + (ext or ".csv"), ["re", "im"], eig_rows)
    if cfg.out_svg:
        th = np.linspace(0, 2 * np.pi, 181)
        series = [svgplot.Series("eigenvalues", rep.eigenvalues.real,
                                 rep.eigenvalues.imag, marker="cross")]
        ref = [svgplot.RefLine("disk boundary", rep.disk_radius * np.cos(th),
                               rep.disk_radius * np.sin(th))]
        svgplot.svg_plot(cfg.out_svg, series, ref, title="spectrum of the core matrix",
                         xlabel="Re", ylabel="Im")
    return 0


def cmd_sdp(cfg: ExperimentConfig) -> int:
    n = cfg.n  # order of the semidefinite cone for this subcommand
    sd = n * (n + 1) // 2
    m = cfg.m if cfg.m > 0 else min(2 * n, sd)
    header = ["kappa", "n", "m", "solver", "iterations", "status",
              "final_residual", "cpu_s"]
    rows = []
    any_bad = False
    for kappa in cfg.kappas:
        sp = synthetic_newton(n, m, kappa, seed=cfg.seed)
        op = SdpAdmmOperator(sp)
        runs = []
        t0 = time.perf_counter()
        _, rep = op.solve(tol=cfg.tol, max_iters=cfg.admm_cap)
        runs.append(("admm", rep, time.perf_counter() - t0))
        t0 = time.perf_counter()
        _, rep = krylov.admm_gmres(op, KrylovConfig(tol=cfg.tol, max_iters=cfg.max_iters),
                                   gate="saddle")
        runs.append(("admm_gmres", rep, time.perf_counter() - t0))
        t0 = time.perf_counter()
        _, rep = krylov.admm_gmres(op, KrylovConfig(tol=cfg.tol, max_iters=cfg.max_iters,
                                                    restart=cfg.restart), gate="saddle")
        runs.append((f"admm_gmres_r{cfg.restart}", rep, time.perf_counter() - t0))
        for name, rep, cpu in runs:
            final = rep.final_saddle if rep.final_saddle is not None else \
                float(rep.residual_history[-1])
            rows.append([kappa, n, m, name, rep.iterations, rep.status, final, cpu])
            any_bad = any_bad or rep.status != "converged"
            print(f"sdp kappa={kappa:g} {name}: {rep.iterations} iters "
                  f"({rep.status}), residual {final:.2e}")
    if cfg.out_csv:
        write_csv(cfg.out_csv, header, rows)
    return 2 if any_bad else 0


def cmd_solve(cfg: ExperimentConfig) -> int:
    prob = problem.load_problem(cfg.problem_file)
    inst = _Instance(prob)
    name = cfg.solvers[0]
    if name == "admm":
        _, rep = inst.op.solve(tol=cfg.tol, max_iters=cfg.admm_cap)
    elif name == "sor2":
        _, rep = inst.op.solve_sor(2.0, tol=cfg.tol, max_iters=cfg.admm_cap)
    elif name.startswith("admm_gmres"):
        restart = int(name.rsplit("_r", 1)[1]) if "_r" in name else None
        _, rep = krylov.admm_gmres(inst.op, KrylovConfig(tol=cfg.tol,
                                                         max_iters=cfg.max_iters,
                                                         restart=restart),
                                   gate="saddle")
    else:
        _, _, _, rep = precond.SOLVERS[name](inst.ws, tol=cfg.tol,
                                             max_iters=cfg.max_iters)
    final = rep.final_saddle if rep.final_saddle is not None else \
        float(rep.residual_history[-1])
    print(f"{name}: {rep.iterations} iterations ({rep.status}), "
          f"final saddle residual {final:.3e}")
    if cfg.out_csv:
        rows = []
        mh = rep.m_metric_history
        for k, r in enumerate(rep.residual_history):
            is_saddle = rep.metric == "saddle_rel"
            rows.append([k,
                         float(r) if is_saddle else float("nan"),
                         float(mh[k]) if mh is not None and k < len(mh)
                         else (float("nan") if is_saddle else float(r))])
        write_csv(cfg.out_csv, ["iteration", "saddle_residual", "m_metric_residual"],
                  rows)
    return 0 if rep.status == "converged" else 2


def load_config_file(path: str) -> dict[str, str]:
    """key=value lines mirroring the long flags; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


_COERCE = {
    "n": int, "m": int, "l": int, "count": int, "seed": int, "max_iters": int,
    "admm_max_iters": int, "restart": int, "threads": int,
    "s_min": float, "s_max": float, "s": float, "tol": float, "kappa": float,
    "kappas": lambda v: tuple(float(t) for t in v.split(",")),
    "solvers": lambda v: tuple(t.strip() for t in v.split(",") if t.strip()),
    "out_csv": str, "out_svg": str, "problem_file": str,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecqp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, solvers_default, n_default=200):
        p.add_argument("--config", default="", help="key=value file mirroring the flags")
        p.add_argument("--n", type=int, default=n_default)
        p.add_argument("--m", type=int, default=0, help="0 samples m from {1..n}")
        p.add_argument("--l", type=int, default=0, help="0 samples l from {1..m}")
        p.add_argument("--s-min", type=float, default=0.0)
        p.add_argument("--s-max", type=float, default=2.0)
        p.add_argument("--count", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--max-iters", type=int, default=1000)
        p.add_argument("--admm-max-iters", type=int, default=0,
                       help="cap for plain ADMM/SOR; 0 uses --max-iters")
        p.add_argument("--solvers", default=",".join(solvers_default),
                       help=f"comma list from {ALL_SOLVERS}")
        p.add_argument("--restart", type=int, default=25)
        p.add_argument("--kappa", type=float, default=1e4)
        p.add_argument("--kappas", default="1e2,1e4,1e6")
        p.add_argument("--out-csv", default="")
        p.add_argument("--out-svg", default="")
        p.add_argument("--threads", type=int, default=0,
                       help="0 reads ECQP_THREADS (default 1)")

    add_common(sub.add_parser("sweep", help="iterations vs kappa over random instances"),
               ("admm", "admm_gmres"))
    add_common(sub.add_parser("compare", help="per-bin max iterations across methods"),
               COMPARE_SOLVERS)
    add_common(sub.add_parser("worstcase", help="residual curves on the sharp instance"),
               ("admm", "sor2", "admm_gmres"))
    pdiag = sub.add_parser("diagnose", help="spectral diagnostics for one instance")
    add_common(pdiag, ("admm",))
    pdiag.add_argument("--problem", dest="problem_file", default="",
                       help="diagnose this problem file instead of a random instance")
    add_common(sub.add_parser("sdp", help="synthetic Newton subproblem benchmark"),
               ("admm", "admm_gmres"), n_default=30)
    psolve = sub.add_parser("solve", help="solve one problem file")
    add_common(psolve, ("admm_gmres",))
    psolve.add_argument("problem_file", help="problem file in the text format")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Merge precedence: explicit CLI flag > config file > parser default."""
    base_argv = [args.command] + ([args.problem_file] if args.command == "solve" else [])
    defaults = vars(build_parser().parse_args(base_argv))
    actual = vars(args)
    file_vals: dict = {}
    if actual.get("config"):
        for key, sval in load_config_file(actual["config"]).items():
            if key not in _COERCE:
                raise ValueError(f"unknown config key {key!r}")
            file_vals[key] = _COERCE[key](sval)
    cfg = ExperimentConfig(command=args.command)
    for key, coerce in _COERCE.items():
        if key not in actual:
            continue
        val = actual[key]
        if val == defaults.get(key) and key in file_vals:
            val = file_vals[key]
        if isinstance(val, str) and key in ("solvers", "kappas"):
            val = coerce(val)
        setattr(cfg, key, val)
    cfg.validate()
    return cfg


COMMANDS = {
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "worstcase": cmd_worstcase,
    "diagnose": cmd_diagnose,
    "sdp": cmd_sdp,
    "solve": cmd_solve,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
