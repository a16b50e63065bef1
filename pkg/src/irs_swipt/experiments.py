"""Seeded Monte Carlo sweeps over network parameters, with persistence and figure tables.

Every (sweep point, trial) pair draws one channel realization that all
requested schemes share.  A scheme that is infeasible on a realization keeps
a null rate in the raw records and counts as rate 0 in every average.
"""

import csv
import dataclasses
import io
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import feasibility as fz
from . import hybrid, tdma
from .channel import FadingParams, Geometry, sample_channels
from .metrics import HYBRID_FAMILY, SCHEMES, TDMA_FAMILY, NoiseAndPower, constraint_residuals
from .settings import AlgorithmSettings

SCHEMA_VERSION = 1
RECORD_COLUMNS = ("point_id", "trial", "scheme", "feasible", "sum_rate_bps_hz", "min_eh_slack",
                  "iters", "wall_ms", "flags")
FIGURES = ("rate_vs_N", "rate_vs_dT", "rate_vs_E", "time_fractions", "ps_ratios")
WORKERS_ENV = "IRS_SWIPT_WORKERS"
_AXES = {"rate_vs_N": "N_total", "rate_vs_dT": "d_T", "rate_vs_E": "E_uW"}


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


@dataclass
class ExperimentConfig:
    """Sweep definition.  Defaults: 23 dBm per Tx, 0.5e-8 W per noise type, 70% EH efficiency."""

    N_total: list = field(default_factory=lambda: [10])
    d_T: list = field(default_factory=lambda: [0.0])
    E_uW: list = field(default_factory=lambda: [0.5])
    K: int = 2
    M: int = 2
    deployment: str = "distributed"
    d_R: float = 6.0
    d_I: float = 1.0
    P_dBm: float = 23.0
    sigma_ant_sq: float = 0.5e-8
    sigma_proc_sq: float = 0.5e-8
    zeta: float = 0.7
    fading: dict = field(default_factory=dict)
    trials: int = 20
    seed: int = 0
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    algorithm: dict = field(default_factory=dict)
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        self.N_total = [int(n) for n in _as_list(self.N_total)]
        self.d_T = [float(d) for d in _as_list(self.d_T)]
        self.E_uW = [float(e) for e in _as_list(self.E_uW)]
        self.schemes = [s.strip() for s in (self.schemes.split(",") if isinstance(self.schemes, str)
                                            else self.schemes)]
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if not (self.N_total and self.d_T and self.E_uW):
            raise ValueError("every sweep axis needs at least one value")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ValueError(f"schemes must be a nonempty subset of {SCHEMES}, got {bad or 'none'}")
        if any(e < 0 for e in self.E_uW):
            raise ValueError("EH requirements must be nonnegative")
        # fail early on bad geometry / fading / algorithm keys
        for p in self.points():
            self.geometry(p)
        self.fading_params()
        self.settings()

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must hold a mapping")
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    def points(self):
        """Sweep points in a fixed order; the index is the point id."""
        return [{"N_total": n, "d_T": d, "E_uW": e}
                for n, d, e in itertools.product(self.N_total, self.d_T, self.E_uW)]

    def geometry(self, point):
        return Geometry(K=self.K, d_T=point["d_T"], d_R=self.d_R, d_I=self.d_I,
                        deployment=self.deployment, N_total=point["N_total"])

    def fading_params(self):
        return FadingParams(**self.fading)

    def noise(self, point):
        P = 10 ** (self.P_dBm / 10) / 1000
        return NoiseAndPower.uniform(self.K, P=P, sigma_ant_sq=self.sigma_ant_sq,
                                     sigma_proc_sq=self.sigma_proc_sq, zeta=self.zeta,
                                     E=point["E_uW"] * 1e-6)

    def settings(self):
        return AlgorithmSettings.from_dict(self.algorithm)


def trial_seed(base_seed, point_id, trial):
    """64-bit seed mixed from (base, point, trial) with numpy's SeedSequence."""
    ss = np.random.SeedSequence([int(base_seed), int(point_id), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


class _Infeasible(Exception):
    """No feasible starting point for this scheme on this realization."""


def _record(point_id, trial, seed, scheme, point, sol=None, report=None, wall=0.0, flags=()):
    feasible = sol is not None and report is not None and report.feasible
    rec = {"point_id": point_id, "trial": trial, "seed": seed, "scheme": scheme, **point,
           "feasible": bool(feasible),
           "sum_rate_bps_hz": float(sol.sum_rate) if feasible else None,
           "min_eh_slack": float(report.eh) if report is not None else None,
           "min_residual": float(report.worst) if report is not None else None,
           "energy_w": [float(q) for q in report.energy] if report is not None else None,
           "tau": [float(t) for t in sol.tau] if sol is not None else None,
           "rho": [float(r) for r in sol.rho] if sol is not None and sol.rho is not None else None,
           "iters": int(sol.iterations) if sol is not None else 0,
           "trace": [float(x) for x in sol.trace] if sol is not None else None,
           "wall_ms": 1000.0 * wall,
           "flags": sorted(set(flags) | set(sol.flags if sol is not None else ()))}
    return rec


def _run_family(solvers, requested, channels, noise, point_id, trial, seed, point):
    """Run ``solvers`` in order, keeping results visible to later solvers; record requested ones."""
    out, done = [], {}
    for name, fn in solvers:
        t0 = time.perf_counter()
        flags = []
        try:
            sol = fn(done)
        except _Infeasible:
            sol, flags = None, ["infeasible"]
        except Exception as exc:  # one bad trial must not stop the sweep
            sol, flags = None, [f"error:{type(exc).__name__}"]
        wall = time.perf_counter() - t0
        done[name] = sol
        if name not in requested:
            continue
        if sol is None:
            out.append(_record(point_id, trial, seed, name, point, wall=wall, flags=flags))
            continue
        rep = constraint_residuals(name, channels, sol, noise)
        out.append(_record(point_id, trial, seed, name, point, sol, rep, wall, flags))
    return out, done


def run_trial(config, point_id, trial):
    """All requested schemes on one channel realization; returns record dicts in scheme order."""
    return solve_trial(config, point_id, trial)[0]


def solve_trial(config, point_id, trial):
    """Like ``run_trial`` but also returns ``{scheme: SchemeSolution or None}`` for requested schemes."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    point = config.points()[point_id]
    seed = trial_seed(config.seed, point_id, trial)
    channels = sample_channels(seed, config.geometry(point), config.fading_params(), config.M)
    noise = config.noise(point)
    settings = config.settings()
    rng = np.random.default_rng([seed, 1])
    records, solutions = [], {}

    want = set(config.schemes)
    if want & set(HYBRID_FAMILY):
        t0 = time.perf_counter()
        rep = fz.hybrid_feasibility(channels, noise, rng, settings)
        feas_wall = time.perf_counter() - t0

        def need(report):
            if not report.feasible:
                raise _Infeasible()

        def ps(done):
            need(rep)
            return hybrid.ao_solve(channels, noise, fz.ps_initial_point(rep, channels, noise), "ps", settings)

        def ts(done):
            need(rep)
            return hybrid.ao_solve(channels, noise, fz.ts_initial_point(rep, channels, noise, rng), "ts", settings)

        def hyb(done):
            need(rep)
            starts = []
            if settings.hybrid_init in ("baseline", "both"):
                starts += [s for s in (done.get("ps"), done.get("ts")) if s is not None]
            if settings.hybrid_init in ("constructed", "both") or not starts:
                starts.append(fz.hybrid_initial_point(rep, channels, noise, rng).to_solution(
                    "hybrid", settings.tau_zero_tol))
            runs = [hybrid.ao_solve(channels, noise, s, "hybrid", settings) for s in starts]
            return max(runs, key=lambda s: s.sum_rate)

        solvers = [("ps", ps), ("ts", ts), ("hybrid", hyb)]
        if "hybrid" not in want or settings.hybrid_init == "constructed":
            solvers = [s for s in solvers if s[0] in want]
        recs, done = _run_family(solvers, want, channels, noise, point_id, trial, seed, point)
        solutions.update({k: v for k, v in done.items() if k in want})
        for r in recs:
            r["wall_ms"] += 1000.0 * feas_wall
            r["flags"] = sorted(set(r["flags"]) | set(rep.flags))
        records += recs

    if want & set(TDMA_FAMILY):
        t0 = time.perf_counter()
        rep_t = fz.tdma_feasibility(channels, noise, rng, settings)
        feas_wall = time.perf_counter() - t0

        def td(done):
            if not rep_t.feasible:
                raise _Infeasible()
            return tdma.ao_solve_tdma(channels, noise, fz.tdma_initial_point(rep_t, channels, noise),
                                      "tdma", settings)

        def tdd(done):
            if done.get("tdma") is None:
                raise _Infeasible()
            return tdma.ao_solve_tdma(channels, noise, done["tdma"], "tdma_d", settings)

        recs, done = _run_family([("tdma", td), ("tdma_d", tdd)], want, channels, noise, point_id, trial,
                                 seed, point)
        solutions.update({k: v for k, v in done.items() if k in want})
        for r in recs:
            r["wall_ms"] += 1000.0 * feas_wall
            r["flags"] = sorted(set(r["flags"]) | set(rep_t.flags))
        records += recs
    order = {s: n for n, s in enumerate(config.schemes)}
    return sorted(records, key=lambda r: order[r["scheme"]]), solutions


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def record_row(rec):
    """``records.csv`` row: every column except ``wall_ms`` is deterministic."""
    vals = dict(rec, flags=";".join(rec["flags"]), wall_ms=round(rec["wall_ms"], 3))
    return [_fmt(vals[c]) for c in RECORD_COLUMNS]


def _workers(config):
    env = os.environ.get(WORKERS_ENV)
    n = int(env) if env else int(config.workers)
    return max(1, n)


def iter_trials(config):
    """Yield record lists for every (point, trial) in deterministic order."""
    jobs = [(p, t) for p in range(len(config.points())) for t in range(config.trials)]
    workers = _workers(config)
    if workers == 1:
        for p, t in jobs:
            yield run_trial(config, p, t)
        return
    cfg = config.to_dict()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order, so the single writer stays ordered
        yield from pool.map(run_trial, itertools.repeat(cfg), *zip(*jobs))


def run_experiment(config, out_dir=None, progress=None):
    """Run the sweep, write ``records.csv``, ``details.jsonl`` and ``summary.json``.

    Returns ``(records, summary)``.
    """
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    with open(out / "records.csv", "w", newline="") as fcsv, open(out / "details.jsonl", "w") as fjs:
        writer = csv.writer(fcsv, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for recs in iter_trials(config):
            for r in recs:
                writer.writerow(record_row(r))
                fjs.write(json.dumps(r, sort_keys=True) + "\n")
            fcsv.flush()
            fjs.flush()
            records += recs
            if progress:
                progress(recs)
    summary = summarize(records, config)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records, summary


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def summarize(records, config=None):
    """Per point and scheme: mean rate (infeasible counted as 0), feasible fraction, mean tau and rho."""
    groups = {}
    for r in records:
        groups.setdefault((r["point_id"], r["scheme"]), []).append(r)
    points = {}
    for (pid, scheme), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        entry = points.setdefault(str(pid), {"params": {k: rs[0][k] for k in ("N_total", "d_T", "E_uW")},
                                             "schemes": {}})
        ok = [r for r in rs if r["feasible"]]
        entry["schemes"][scheme] = {
            "trials": len(rs),
            "mean_sum_rate": _mean([r["sum_rate_bps_hz"] if r["feasible"] else 0.0 for r in rs]),
            "feasible_fraction": len(ok) / len(rs),
            "mean_tau": list(np.mean([r["tau"] for r in ok], axis=0)) if ok else None,
            "mean_rho": (list(np.mean([r["rho"] for r in ok], axis=0))
                         if ok and all(r["rho"] is not None for r in ok) else None),
            "mean_iters": _mean([r["iters"] for r in ok]),
            "flag_counts": {f: sum(f in r["flags"] for r in rs)
                            for f in sorted({f for r in rs for f in r["flags"]})},
        }
    return {"schema_version": SCHEMA_VERSION,
            "config": config.to_dict() if config is not None else None,
            "points": points}


def load_records(records_dir):
    """Records from ``details.jsonl`` (the full-fidelity twin of ``records.csv``)."""
    path = Path(records_dir) / "details.jsonl"
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def figure_table(records, figure):
    """Rows ``(curve, x, mean, count)`` sorted by curve then x.

    Rate figures average over all trials with infeasible ones at 0; the
    time-fraction and PS-ratio figures average over feasible trials only
    and use the sweep axis with the most distinct values as ``x``.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    if not records:
        return []
    if figure in _AXES:
        axis = _AXES[figure]
    else:
        axis = max(("N_total", "d_T", "E_uW"), key=lambda a: len({r[a] for r in records}))
    others = [a for a in ("N_total", "d_T", "E_uW") if a != axis and len({r[a] for r in records}) > 1]
    cells = {}
    for r in records:
        tag = "".join(f" {a}={r[a]:g}" for a in others)
        if figure in _AXES:
            cells.setdefault((r["scheme"] + tag, r[axis]), []).append(
                r["sum_rate_bps_hz"] if r["feasible"] else 0.0)
        elif not r["feasible"]:
            continue
        elif figure == "time_fractions":
            for j, t in enumerate(r["tau"]):
                cells.setdefault((f"{r['scheme']} tau{j}{tag}", r[axis]), []).append(t)
        elif r["rho"] is not None and r["scheme"] in ("hybrid", "ps"):
            cells.setdefault((f"{r['scheme']} rho{tag}", r[axis]), []).append(float(np.mean(r["rho"])))
    return [(c, x, float(np.mean(v)), len(v)) for (c, x), v in sorted(cells.items())]


def emit_figure_data(records, figure, out_dir, plot=True):
    """Write ``fig_<figure>.csv`` (canonical) and, optionally, ``fig_<figure>.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = figure_table(records, figure)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("curve", "x", "mean", "count"))
    for c, x, m, n in rows:
        w.writerow((c, _fmt(float(x)), _fmt(m), n))
    (out / f"fig_{figure}.csv").write_text(buf.getvalue())
    paths = [out / f"fig_{figure}.csv"]
    if plot and rows:
        paths.append(_plot(rows, figure, out / f"fig_{figure}.png"))
    return paths


def _plot(rows, figure, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for curve in sorted({r[0] for r in rows}):
        pts = [(x, m) for c, x, m, _ in rows if c == curve]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=curve)
    ylabel = {"time_fractions": "time fraction", "ps_ratios": "PS ratio"}.get(figure, "sum rate (bps/Hz)")
    xlabel = {"rate_vs_N": "N", "rate_vs_dT": "d_T (m)", "rate_vs_E": "E (uW)"}.get(figure, "sweep value")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def feasibility_check(config):
    """Feasibility-only pass: per point, fraction of trials each family can serve."""
    rows = []
    settings = config.settings()
    fams = [f for f, members in (("hybrid", HYBRID_FAMILY), ("tdma", TDMA_FAMILY))
            if set(members) & set(config.schemes)]
    for pid, point in enumerate(config.points()):
        counts = {f: 0 for f in fams}
        for t in range(config.trials):
            seed = trial_seed(config.seed, pid, t)
            ch = sample_channels(seed, config.geometry(point), config.fading_params(), config.M)
            noise = config.noise(point)
            rng = np.random.default_rng([seed, 1])
            if "hybrid" in counts:
                counts["hybrid"] += fz.hybrid_feasibility(ch, noise, rng, settings).feasible
            if "tdma" in counts:
                counts["tdma"] += fz.tdma_feasibility(ch, noise, rng, settings).feasible
        rows.append({"point_id": pid, **point, **{f: counts[f] / config.trials for f in fams}})
    return rows
