"""Seeded experiment runner: regret curves, diagnostics, and output files."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import AgentConfig, RunResult, episode_count_bound, run_agent
from .envs import build_env

OPTIMISM_TOL = 1e-3
CSV_COLUMNS = ("t", "cumulative_reward", "regret", "episode_index")


class ConfigError(ValueError):
    pass


def default_checkpoints(T: int) -> list:
    out, p = [], 1
    while p <= T:
        out.append(p)
        p *= 2
    if out[-1] != T:
        out.append(T)
    return out


def regret_at(run: RunResult, t: int) -> float:
    return run.regret_at(t)


@dataclass
class ExperimentConfig:
    env: dict
    agent: dict
    seeds: list
    checkpoints: list | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not isinstance(self.env, dict) or not ("file" in self.env or "name" in self.env):
            raise ConfigError("env needs a 'file' or a 'name'")
        if "seed" in self.agent:
            raise ConfigError("agent.seed is set per run from 'seeds'")
        try:
            self.agent_config(self.seeds[0])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad agent spec: {exc}") from exc
        T = self.horizon
        if self.checkpoints is None:
            self.checkpoints = default_checkpoints(T)
        cps = [int(t) for t in self.checkpoints]
        if cps != sorted(cps) or len(set(cps)) != len(cps):
            raise ConfigError("checkpoints must be strictly increasing")
        if cps and (cps[0] < 0 or cps[-1] > T):
            raise ConfigError(f"checkpoints must lie in [0, {T}]")
        self.checkpoints = cps

    @property
    def horizon(self) -> int:
        return int(self.agent["horizon"])

    def agent_config(self, seed: int) -> AgentConfig:
        return AgentConfig(seed=int(seed), **self.agent)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"env", "agent", "seeds", "checkpoints", "output_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"env", "agent", "seeds"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls.from_dict(d)
        if cfg.env.get("file") and not os.path.isabs(cfg.env["file"]):
            cfg.env = dict(cfg.env, file=str(path.parent / cfg.env["file"]))
        return cfg

    def to_dict(self) -> dict:
        return {"env": self.env, "agent": self.agent, "seeds": list(self.seeds),
                "checkpoints": list(self.checkpoints), "output_dir": self.output_dir}


# diagnostics ---------------------------------------------------------------

def visit_ratio_sum(run: RunResult) -> float:
    """Sum over episodes and pairs of v_k / max{N_k, 1}."""
    return float(sum(np.sum(e.visits / np.maximum(e.n_start, 1)) for e in run.episodes))


def run_diagnostics(run: RunResult) -> dict:
    S, A, T = run.num_states, run.num_actions, run.horizon
    cfg = run.config
    m = run.num_episodes
    bound = episode_count_bound(S, A, T) if T >= S * A else math.inf
    vr = visit_ratio_sum(run)
    vr_bound = math.sqrt(8.0 * S * A * T)
    optimism_checked = optimism_violations = 0
    if cfg.kind == "regal_c" and cfg.H >= run.span_star:
        for e in run.episodes:
            if e.truth_in_set:
                optimism_checked += 1
                if e.gain < run.lambda_star - OPTIMISM_TOL:
                    optimism_violations += 1
    good = sum(e.truth_in_set for e in run.episodes)
    doubling = 0
    for e in run.episodes:
        if np.any(e.visits > np.maximum(e.n_start, 1)):
            doubling += 1
    bookkeeping = int(sum(e.length for e in run.episodes) != T
                      or any(int(e.visits.sum()) != e.length for e in run.episodes)
                      or any(a.t_k + a.length != b.t_k for a, b in zip(run.episodes, run.episodes[1:])))
    return {
        "episodes": m, "episode_count_bound": bound, "episode_bound_ok": m <= bound,
        "visit_ratio_sum": vr, "visit_ratio_bound": vr_bound, "visit_ratio_ok": vr <= vr_bound,
        "optimism_checked": optimism_checked, "optimism_violations": optimism_violations,
        "good_episodes": good, "bad_episodes": m - good,
        "doubling_violations": doubling, "bookkeeping_errors": bookkeeping,
    }


# output --------------------------------------------------------------------

def write_curve_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t, cum, reg, k in rows:
            w.writerow((t, repr(cum), repr(reg), k))


def read_curve_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(int(t), float(c), float(g), int(k)) for t, c, g, k in r]


def write_episodes_jsonl(path, run: RunResult):
    with open(path, "w") as fh:
        for e in run.episodes:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def _aggregate(regrets: np.ndarray):
    """Mean and population standard deviation per checkpoint (rows are seeds)."""
    return regrets.mean(axis=0).tolist(), regrets.std(axis=0).tolist()


@dataclass
class ExperimentSummary:
    config: dict
    checkpoints: list
    seeds: list
    regret: dict  # seed -> regrets at checkpoints
    mean: list
    std: list
    lambda_star: float
    span_star: float
    episode_counts: list
    diagnostics: dict
    runs: list = field(default_factory=list, repr=False)

    @property
    def failures(self) -> list:
        d, out = self.diagnostics, []
        if d["episode_bound_failures"]:
            out.append(f"episode-count bound exceeded on {d['episode_bound_failures']} run(s)")
        if d["visit_ratio_failures"]:
            out.append(f"visit-ratio bound exceeded on {d['visit_ratio_failures']} run(s)")
        if d["optimism_violations"]:
            out.append(f"{d['optimism_violations']} optimism violation(s)")
        if d["doubling_violations"] or d["bookkeeping_errors"]:
            out.append("episode bookkeeping inconsistent")
        if d["membership_rate"] < d["membership_required"]:
            out.append(f"truth in confidence set at only {d['membership_rate']:.4f} of episode starts")
        return out

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "config": self.config, "checkpoints": self.checkpoints, "seeds": self.seeds,
            "regret": {str(s): v for s, v in self.regret.items()},
            "mean": self.mean, "std": self.std,
            "lambda_star": self.lambda_star, "span_star": self.span_star,
            "episode_counts": self.episode_counts,
            "episode_stats": {"mean": float(np.mean(self.episode_counts)),
                              "min": int(min(self.episode_counts)),
                              "max": int(max(self.episode_counts))},
            "diagnostics": self.diagnostics,
        }

    def mean_at(self, t: int) -> float:
        return self.mean[self.checkpoints.index(t)]


def _one_run(args):
    env_spec, agent_cfg = args
    return run_agent(build_env(env_spec), agent_cfg)


def _workers() -> int:
    raw = os.environ.get("REGAL_WORKERS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"REGAL_WORKERS must be an integer, got {raw!r}") from None
        return max(n, 1)
    return os.cpu_count() or 1


def run_all(cfg: ExperimentConfig, workers: int | None = None, record_sets: bool = False) -> list:
    """RunResults in seed order."""
    build_env(cfg.env)  # fail early on bad environments
    jobs = []
    for s in cfg.seeds:
        ac = cfg.agent_config(s)
        ac.record_sets = record_sets
        jobs.append((cfg.env, ac))
    workers = _workers() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_one_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(_one_run, jobs))


def summarize(cfg: ExperimentConfig, runs: list) -> ExperimentSummary:
    cps = cfg.checkpoints
    curves = {s: r.regret_curve(cps) for s, r in zip(cfg.seeds, runs)}
    regrets = np.array([[row[2] for row in curves[s]] for s in cfg.seeds]).reshape(len(runs), len(cps))
    mean, std = _aggregate(regrets)
    diags = [run_diagnostics(r) for r in runs]
    starts = sum(d["episodes"] for d in diags)
    good = sum(d["good_episodes"] for d in diags)
    delta = runs[0].config.delta
    summary = {
        "runs": len(runs),
        "episode_bound_failures": sum(not d["episode_bound_ok"] for d in diags),
        "episode_bound_margin": min(d["episode_count_bound"] - d["episodes"] for d in diags),
        "visit_ratio_failures": sum(not d["visit_ratio_ok"] for d in diags),
        "visit_ratio_max": max(d["visit_ratio_sum"] / d["visit_ratio_bound"] for d in diags),
        "optimism_checked": sum(d["optimism_checked"] for d in diags),
        "optimism_violations": sum(d["optimism_violations"] for d in diags),
        "good_episodes": good, "bad_episodes": starts - good,
        "membership_rate": good / starts,
        "membership_required": 1.0 - delta,
        "doubling_violations": sum(d["doubling_violations"] for d in diags),
        "bookkeeping_errors": sum(d["bookkeeping_errors"] for d in diags),
    }
    config = cfg.to_dict()
    config.pop("output_dir")  # where results go does not change them
    return ExperimentSummary(
        config=config, checkpoints=list(cps), seeds=list(cfg.seeds),
        regret={s: [row[2] for row in curves[s]] for s in cfg.seeds},
        mean=mean, std=std, lambda_star=runs[0].lambda_star, span_star=runs[0].span_star,
        episode_counts=[r.num_episodes for r in runs], diagnostics=summary, runs=runs)


def write_outputs(summary: ExperimentSummary, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s, run in zip(summary.seeds, summary.runs):
        write_curve_csv(out / f"seed_{s}.csv", run.regret_curve(summary.checkpoints))
        write_episodes_jsonl(out / f"seed_{s}_episodes.jsonl", run)
    path = out / "summary.json"
    path.write_text(json.dumps(summary.to_dict(), indent=1, sort_keys=True) + "\n")
    return path


def reaggregate(out_dir) -> bool:
    """Recompute mean and std from the per-seed CSVs and compare with summary.json exactly."""
    out = Path(out_dir)
    summary = json.loads((out / "summary.json").read_text())
    rows = []
    for s in summary["seeds"]:
        curve = read_curve_csv(out / f"seed_{s}.csv")
        if [r[0] for r in curve] != summary["checkpoints"]:
            return False
        rows.append([r[2] for r in curve])
    mean, std = _aggregate(np.array(rows).reshape(len(rows), len(summary["checkpoints"])))
    return mean == summary["mean"] and std == summary["std"]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentSummary:
    runs = run_all(cfg, workers)
    summary = summarize(cfg, runs)
    if cfg.output_dir:
        write_outputs(summary, cfg.output_dir)
        if not reaggregate(cfg.output_dir):
            raise RuntimeError("summary does not match per-seed CSVs")
    return summary


# plotting ------------------------------------------------------------------

def write_plot(summary_path, out_prefix=None):
    """Write ``<prefix>.dat`` (t, mean, std) and a standalone ``<prefix>.svg`` of mean regret vs t."""
    summary_path = Path(summary_path)
    d = json.loads(summary_path.read_text())
    ts, mean, std = d["checkpoints"], d["mean"], d["std"]
    prefix = Path(out_prefix) if out_prefix else summary_path.with_name("regret")
    dat = prefix.with_suffix(".dat")
    with open(dat, "w") as fh:
        fh.write("# t mean_regret std_regret\n")
        for t, m, s in zip(ts, mean, std):
            fh.write(f"{t} {m!r} {s!r}\n")
    svg = prefix.with_suffix(".svg")
    svg.write_text(_svg_chart(ts, mean))
    return dat, svg


def _svg_chart(ts, ys, width=640, height=400, pad=50) -> str:
    x0, x1 = min(ts), max(ts)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(t):
        return pad + (t - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    pts = " ".join(f"{px(t):.2f},{py(y):.2f}" for t, y in zip(ts, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts}"/>\n'
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">t</text>\n'
        f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
        f'text-anchor="middle">mean regret</text>\n'
        f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0}</text>\n'
        f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x1}</text>\n'
        f'<text x="{pad - 5}" y="{pad}" font-size="10" text-anchor="end">{y1:.3g}</text>\n'
        f'<text x="{pad - 5}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.3g}</text>\n'
        "</svg>\n"
    )
