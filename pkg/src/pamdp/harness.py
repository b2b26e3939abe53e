"""Experiment driver: seeded training, exploration-free evaluation, grid
sweeps, CSV logging and summary statistics.

Determinism contract: one run = one (config, seed) pair, driven by a single
RNG stream keyed by the seed alone (PCG64 over SeedSequence(seed)), so the
same pair always yields byte-identical CSV logs and adding more seeds to a
config never perturbs existing runs. Logs are appended line by line and
flushed, so a crashed run leaves a valid CSV plus a meta file that records
how far it was supposed to go.

Config files are flat ``key = value`` text; unknown keys are errors. All
numbers written to CSVs use shortest round-trip float formatting so every
summary is recomputable from the raw logs.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .agent import AgentConfig, PADDPGAgent, PDQNAgent
from .checkpoint import load_checkpoint, save_checkpoint
from .envs import make_env, platform_default_passthrough
from .replay import Transition, finalize_episode

ALGORITHMS = ("pdqn-joint", "pdqn-separate", "pdqn-multipass", "paddpg")
ENV_IDS = ("platform", "bandit", "chain")

TRAIN_HEADER = ["seed", "episode", "return", "steps", "epsilon", "q_loss", "actor_loss"]
EVAL_HEADER = ["seed", "episode", "return", "steps"]
SUMMARY_HEADER = ["algorithm", "env", "n_seeds", "mean", "std", "stderr"]


@dataclass
class RunConfig:
    env: str = "platform"
    algorithm: str = "pdqn-multipass"
    episodes: int = 1000
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str = "runs/out"
    eval_episodes: int = 1000
    max_episode_steps: int = 500

    gamma: float = 0.9
    batch_size: int = 128
    replay_capacity: int = 10000
    initial_fill: int = 128
    lr_q: float = 1e-3
    lr_actor: float = 1e-4
    tau_q: float = 0.1
    tau_actor: float = 0.001
    clip_grad: float = 10.0
    hidden: tuple[int, ...] = (128,)
    activation: str = "relu"
    leaky_slope: float = 0.01
    mixed_targets: bool = False
    beta_mix: float = 0.25
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_horizon: int = 0  # 0 -> first 10% of the episode budget
    ou_theta: float = 0.15
    ou_sigma: float = 0.0001
    ou_mu: float = 0.0
    ou_dt: float = 1.0

    sweep_seeds: int = 5
    env_overrides: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in ENV_IDS:
            raise ValueError(f"unknown env {self.env!r}; expected one of {ENV_IDS}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if self.episodes < 0 or self.eval_episodes < 1 or self.max_episode_steps < 1:
            raise ValueError("episode counts out of range")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.epsilon_horizon < 0 or self.sweep_seeds < 1:
            raise ValueError("epsilon_horizon and sweep_seeds must be non-negative")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        self.seeds = tuple(int(s) for s in self.seeds)
        self.hidden = tuple(int(h) for h in self.hidden)
        # constructing the agent config validates the shared hyperparameters
        self.agent_config()

    def agent_config(self) -> AgentConfig:
        horizon = self.epsilon_horizon or max(1, self.episodes // 10)
        return AgentConfig(
            gamma=self.gamma,
            batch_size=self.batch_size,
            replay_capacity=self.replay_capacity,
            initial_fill=self.initial_fill,
            lr_q=self.lr_q,
            lr_actor=self.lr_actor,
            tau_q=self.tau_q,
            tau_actor=self.tau_actor,
            clip_grad=self.clip_grad,
            hidden=self.hidden,
            activation=self.activation,
            leaky_slope=self.leaky_slope,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_horizon=horizon,
            ou_theta=self.ou_theta,
            ou_sigma=self.ou_sigma,
            ou_mu=self.ou_mu,
            ou_dt=self.ou_dt,
            mixed_targets=self.mixed_targets,
            beta_mix=self.beta_mix,
        )


_SWEEPABLE = ("lr_q", "lr_actor", "tau_q", "tau_actor", "batch_size", "hidden")
_PLATFORM_FLOAT = ("length", "enemy_speed", "enemy_inset")
_PLATFORM_PAIRS = ("run_law", "hop_law", "leap_law")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


# every accepted top-level config key and how its value is parsed
CONFIG_KEYS = {
    "env": str,
    "algorithm": str,
    "episodes": int,
    "seeds": _parse_int_tuple,
    "out_dir": str,
    "eval_episodes": int,
    "max_episode_steps": int,
    "gamma": float,
    "batch_size": int,
    "replay_capacity": int,
    "initial_fill": int,
    "lr_q": float,
    "lr_actor": float,
    "tau_q": float,
    "tau_actor": float,
    "clip_grad": float,
    "hidden": _parse_int_tuple,
    "activation": str,
    "leaky_slope": float,
    "mixed_targets": _parse_bool,
    "beta_mix": float,
    "epsilon_start": float,
    "epsilon_end": float,
    "epsilon_horizon": int,
    "ou_theta": float,
    "ou_sigma": float,
    "ou_mu": float,
    "ou_dt": float,
}


def parse_config_text(text: str) -> RunConfig:
    """Parse the flat ``key = value`` format; unknown keys raise."""
    kwargs: dict = {}
    overrides: dict = {}
    grid: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        try:
            if key.startswith("platform."):
                sub = key.removeprefix("platform.")
                overrides[sub] = _parse_platform_override(sub, raw)
            elif key.startswith("sweep."):
                sub = key.removeprefix("sweep.")
                if sub == "seeds":
                    kwargs["sweep_seeds"] = int(raw)
                elif sub in _SWEEPABLE:
                    grid[sub] = _parse_grid_values(sub, raw)
                else:
                    raise ValueError(f"unknown sweep key {sub!r}")
            elif key in CONFIG_KEYS:
                kwargs[key] = CONFIG_KEYS[key](raw)
            else:
                raise ValueError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    cfg = RunConfig(**kwargs)
    cfg.env_overrides = overrides
    cfg.grid = grid
    return cfg


def _parse_platform_override(sub: str, raw: str):
    if sub in _PLATFORM_FLOAT:
        return float(raw)
    if sub in _PLATFORM_PAIRS:
        a, b = (float(v) for v in raw.split(","))
        return (a, b)
    if sub == "platforms":
        spans = []
        for chunk in raw.split(","):
            a, b = (float(v) for v in chunk.split(":"))
            spans.append((a, b))
        return tuple(spans)
    raise ValueError(f"unknown platform key {sub!r}")


def _parse_grid_values(key: str, raw: str):
    if key == "hidden":
        return tuple(
            tuple(int(v) for v in cell.split(",") if v.strip())
            for cell in raw.split("|")
        )
    if key == "batch_size":
        return tuple(int(v) for v in raw.split(","))
    return tuple(float(v) for v in raw.split(","))


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def seed_stream(seed: int) -> np.random.Generator:
    """The documented per-seed stream: PCG64 keyed by SeedSequence(seed)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def build_agent(cfg: RunConfig, space, rng: np.random.Generator):
    passthrough = None
    if cfg.env == "platform":
        passthrough = platform_default_passthrough(space)
    if cfg.algorithm == "paddpg":
        return PADDPGAgent(space, cfg.agent_config(), rng, passthrough)
    variant = cfg.algorithm.removeprefix("pdqn-")
    return PDQNAgent(space, variant, cfg.agent_config(), rng, passthrough)


def _fmt(value) -> str:
    # shortest round-trip formatting; plain float first so numpy scalars
    # cannot leak their repr into the CSVs
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def run_episode(env, agent, rng, explore: bool, max_steps: int):
    """One rollout. Returns (undiscounted return, steps, transitions)."""
    s = env.reset()
    transitions = []
    total = 0.0
    for _ in range(max_steps):
        action = agent.select_action(s, explore, rng)
        s_next, r, terminal = env.step(action.k, action.x_k)
        transitions.append(Transition(s, action.k, action.emitted, r, s_next, terminal))
        total += r
        s = s_next
        if terminal:
            break
    return total, len(transitions), transitions


def train_seed(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    """Train one seed; writes train_seed<seed>.csv and checkpoint, returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"train_seed{seed}.csv")
    ckpt_path = os.path.join(out_dir, f"checkpoint_seed{seed}.ckpt")
    meta_path = os.path.join(out_dir, f"meta_seed{seed}.json")

    rng = seed_stream(seed)
    env = make_env(cfg.env, cfg.env_overrides)
    agent = build_agent(cfg, env.spec, rng)

    meta = {
        "seed": seed,
        "episodes_planned": cfg.episodes,
        "algorithm": cfg.algorithm,
        "env": cfg.env,
        "status": "running",
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)

    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRAIN_HEADER) + "\n")
        fh.flush()
        for episode in range(cfg.episodes):
            eps = agent.begin_episode(episode)
            s = env.reset()
            transitions = []
            total = 0.0
            q_losses, a_losses = [], []
            for _ in range(cfg.max_episode_steps):
                action = agent.select_action(s, True, rng)
                s_next, r, terminal = env.step(action.k, action.x_k)
                transitions.append(
                    Transition(s, action.k, action.emitted, r, s_next, terminal)
                )
                total += r
                losses = agent.update_from_replay(rng)
                if losses is not None:
                    q_losses.append(losses[0])
                    a_losses.append(losses[1])
                s = s_next
                if terminal:
                    break
            finalize_episode(agent.replay, transitions, agent, cfg.beta_mix)
            record = EpisodeRecord(
                seed=seed,
                episode=episode,
                ret=total,
                steps=len(transitions),
                epsilon=eps,
                q_loss=float(np.mean(q_losses)) if q_losses else float("nan"),
                actor_loss=float(np.mean(a_losses)) if a_losses else float("nan"),
            )
            fh.write(",".join(_fmt(v) for v in record.row()) + "\n")
            fh.flush()

    save_checkpoint(
        ckpt_path,
        agent,
        cfg.algorithm,
        cfg.env,
        cfg.env_overrides,
        meta={"seed": seed, "episodes_trained": cfg.episodes},
        rng_state=rng.bit_generator.state,
    )
    meta["status"] = "complete"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    return {"csv": csv_path, "checkpoint": ckpt_path, "meta": meta_path}


def train(cfg: RunConfig) -> list[dict]:
    """Train every configured seed; returns the per-seed artifact paths."""
    return [train_seed(cfg, seed, cfg.out_dir) for seed in cfg.seeds]


@dataclass
class EpisodeRecord:
    """One training-log row; losses are nan for episodes with no updates."""

    seed: int
    episode: int
    ret: float
    steps: int
    epsilon: float
    q_loss: float
    actor_loss: float

    def row(self) -> list:
        return [self.seed, self.episode, self.ret, self.steps, self.epsilon,
                self.q_loss, self.actor_loss]


@dataclass
class EvalSummary:
    algorithm: str
    env: str
    per_seed_means: tuple[float, ...]
    mean: float
    std: float
    stderr: float

    @property
    def n_seeds(self) -> int:
        return len(self.per_seed_means)


def summarize(values) -> tuple[float, float, float]:
    """Sample mean, sample std (n-1 denominator, 0 for n=1), stderr."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("nothing to summarize")
    mean = float(values.mean())
    std = 0.0 if values.size == 1 else float(values.std(ddof=1))
    return mean, std, std / math.sqrt(values.size)


def format_summary(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.3f}"


def smooth(series, window: int):
    """Trailing moving average; the first points average their prefix."""
    series = np.asarray(list(series), dtype=np.float64)
    if series.size == 0:
        raise ValueError("cannot smooth an empty series")
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(series)])
    out = np.empty_like(series)
    for i in range(series.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def evaluate_checkpoint(ckpt_path: str, episodes: int, out_csv: str | None = None,
                        eval_seed: int = 0):
    """Greedy rollouts (epsilon 0, no noise) from a checkpointed agent.

    Returns (per-episode returns, steps, header). The stream seeding only
    matters for stochastic environments; greedy action selection draws no
    random numbers.
    """
    agent, header = load_checkpoint(ckpt_path)
    env = make_env(header["env_id"], header["env_overrides"])
    rng = seed_stream(eval_seed)
    seed = header["meta"].get("seed", 0)
    returns, steps = [], []
    rows = []
    for episode in range(episodes):
        total, n, _ = run_episode(env, agent, rng, False, 10**6)
        returns.append(total)
        steps.append(n)
        rows.append([seed, episode, total, n])
    if out_csv is not None:
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(EVAL_HEADER) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    return returns, steps, header


def evaluate_run(cfg: RunConfig, episodes: int | None = None,
                 out_dir: str | None = None) -> EvalSummary:
    """Evaluate every seed checkpoint of a finished run and aggregate."""
    episodes = episodes or cfg.eval_episodes
    out_dir = out_dir or cfg.out_dir
    means = []
    for seed in cfg.seeds:
        ckpt = os.path.join(out_dir, f"checkpoint_seed{seed}.ckpt")
        out_csv = os.path.join(out_dir, f"eval_seed{seed}.csv")
        returns, _, _ = evaluate_checkpoint(ckpt, episodes, out_csv)
        means.append(float(np.mean(returns)))
    mean, std, stderr = summarize(means)
    summary = EvalSummary(cfg.algorithm, cfg.env, tuple(means), mean, std, stderr)
    write_summary_csv(os.path.join(out_dir, "summary.csv"), [summary])
    return summary


def write_summary_csv(path: str, summaries: list[EvalSummary]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_HEADER) + "\n")
        for s in summaries:
            row = [s.algorithm, s.env, s.n_seeds, s.mean, s.std, s.stderr]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# -- hyperparameter sweeps ----------------------------------------------


def expand_grid(cfg: RunConfig) -> tuple[list[dict], list[tuple[dict, str]]]:
    """Cells of the config's grid, split into (valid, rejected-with-reason).

    The learning-rate and Polyak constraints mirror the search space the
    defaults came from: lr_actor <= lr_q and tau_actor <= tau_q.
    """
    if not cfg.grid:
        raise ValueError("config defines no sweep.* grid values")
    keys = sorted(cfg.grid)
    valid, rejected = [], []
    for combo in itertools.product(*(cfg.grid[k] for k in keys)):
        cell = dict(zip(keys, combo))
        lr_q = cell.get("lr_q", cfg.lr_q)
        lr_actor = cell.get("lr_actor", cfg.lr_actor)
        tau_q = cell.get("tau_q", cfg.tau_q)
        tau_actor = cell.get("tau_actor", cfg.tau_actor)
        if lr_actor > lr_q:
            rejected.append((cell, f"lr_actor {lr_actor} > lr_q {lr_q}"))
        elif tau_actor > tau_q:
            rejected.append((cell, f"tau_actor {tau_actor} > tau_q {tau_q}"))
        else:
            valid.append(cell)
    if not valid:
        raise ValueError("every grid cell violates the sweep constraints")
    return valid, rejected


def _cell_name(cell: dict) -> str:
    parts = []
    for key in sorted(cell):
        value = cell[key]
        if isinstance(value, tuple):
            value = "x".join(str(v) for v in value)
        parts.append(f"{key}={value}")
    return "_".join(parts) or "base"


def sweep(cfg: RunConfig) -> list[dict]:
    """Train and evaluate each valid grid cell; rank by mean eval return."""
    valid, rejected = expand_grid(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if rejected:
        with open(os.path.join(cfg.out_dir, "rejected_cells.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write("cell,reason\n")
            for cell, reason in rejected:
                fh.write(f"{_cell_name(cell)},{reason}\n")
    results = []
    for cell in valid:
        name = _cell_name(cell)
        cell_dir = os.path.join(cfg.out_dir, name)
        cell_cfg = replace(
            cfg,
            out_dir=cell_dir,
            seeds=cfg.seeds[: cfg.sweep_seeds],
            grid={},
            **cell,
        )
        train(cell_cfg)
        summary = evaluate_run(cell_cfg)
        results.append(
            {"cell": name, "mean": summary.mean, "std": summary.std,
             "stderr": summary.stderr, "n_seeds": summary.n_seeds, **{
                 k: (v if not isinstance(v, tuple) else "x".join(map(str, v)))
                 for k, v in cell.items()}}
        )
    results.sort(key=lambda r: r["mean"], reverse=True)
    for rank, row in enumerate(results, start=1):
        row["rank"] = rank
    header = ["rank", "cell", "n_seeds", "mean", "std", "stderr"]
    extra = sorted({k for r in results for k in r} - set(header))
    with open(os.path.join(cfg.out_dir, "sweep_results.csv"), "w",
              encoding="utf-8", newline="") as fh:
        cols = header + extra
        fh.write(",".join(cols) + "\n")
        for row in results:
            fh.write(",".join(_fmt(row.get(c, "")) for c in cols) + "\n")
    return results


def sweep_report(out_dir: str) -> list[dict]:
    """Read back a sweep directory and return the ranked rows."""
    rows = read_csv(os.path.join(out_dir, "sweep_results.csv"))
    rows.sort(key=lambda r: int(r["rank"]))
    return rows
