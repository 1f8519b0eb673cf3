"""Teacher datasets: scripted self-play replays on disk, plus the loader that
re-simulates them into training windows.

A dataset directory holds one replay JSONL per game and an index.json with
tier/outcome metadata. Trajectories are regenerated from the action stream
(the engine is bit-deterministic), so the on-disk size stays tiny.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensor as T
from ..env import constants as C
from ..env.replay import read_replay, rerun, write_replay
from ..env.script import ARCHETYPES, play_scripted_match
from ..env.stats import extract_statistic
from ..env.types import Observation, StatisticZ, StructuredAction
from ..net import ObsBatch

INDEX_NAME = "index.json"
TIERS = ("full", "winners")

# desk-scale analog of the small/medium/large replay-count ablation
ABLATION_SIZES = {"small": 200, "medium": 800, "large": 4000}


def _one_game(args) -> dict:
    out_dir, seed, i, mix, variants, max_steps = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
    a0 = mix[int(rng.integers(0, len(mix)))]
    a1 = mix[int(rng.integers(0, len(mix)))]
    variant = variants[int(rng.integers(0, len(variants)))]
    game_seed = int(rng.integers(0, 2**31))
    game = play_scripted_match(a0, a1, game_seed, variant, max_steps=max_steps)
    fname = f"game_{i:05d}.jsonl"
    write_replay(Path(out_dir) / fname, game, meta={"archetypes": [a0, a1]})
    return {
        "file": fname,
        "seed": game_seed,
        "variant": variant,
        "archetypes": [a0, a1],
        "winner": game.outcome.winner,
        "end_step": game.outcome.end_step,
    }


def generate_dataset(out_dir, n_games: int, seed: int, tier: str = "full",
                     mix: tuple[str, ...] = ARCHETYPES,
                     variants: tuple[str, ...] = C.TRAIN_VARIANTS,
                     max_steps: int = C.MAX_STEPS, workers: int = 1) -> dict:
    """Self-play among archetypes; the winners tier keeps only winning sides."""
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {TIERS}")
    for a in mix:
        if a not in ARCHETYPES:
            raise ValueError(f"unknown archetype {a!r} in mix")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(out_dir), seed, i, tuple(mix), tuple(variants), max_steps)
            for i in range(n_games)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            games = list(ex.map(_one_game, jobs, chunksize=8))
    else:
        games = [_one_game(j) for j in jobs]
    for g in games:
        if tier == "winners":
            g["kept_sides"] = [] if g["winner"] is None else [g["winner"]]
        else:
            g["kept_sides"] = [0, 1]
    index = {
        "format": "gridleague-dataset-v1",
        "seed": seed,
        "tier": tier,
        "mix": list(mix),
        "variants": list(variants),
        "n_games": n_games,
        "games": games,
    }
    (out_dir / INDEX_NAME).write_text(json.dumps(index, indent=1) + "\n")
    return index


def load_index(dataset_dir) -> dict:
    path = Path(dataset_dir) / INDEX_NAME
    index = json.loads(path.read_text())
    if index.get("format") != "gridleague-dataset-v1":
        raise ValueError(f"{path}: not a dataset index")
    return index


@dataclass
class Trajectory:
    observations: list[Observation]
    actions: list[StructuredAction]
    z: StatisticZ
    archetype: str
    game_file: str
    side: int


def load_trajectory(dataset_dir, entry: dict, side: int) -> Trajectory:
    """Re-simulate one game and capture the given side's decisions."""
    header, events = read_replay(Path(dataset_dir) / entry["file"])
    obs_list: list[Observation] = []
    act_list: list[StructuredAction] = []

    def hook(step, player, obs, action):
        if player == side:
            obs_list.append(obs)
            act_list.append(action)

    rerun(header, events, on_decision=hook)
    z = extract_statistic(events, side)
    return Trajectory(observations=obs_list, actions=act_list, z=z,
                      archetype=entry["archetypes"][side],
                      game_file=entry["file"], side=side)


@dataclass
class Window:
    observations: list[Observation]
    actions: list[StructuredAction]
    z: StatisticZ
    step_mask: np.ndarray       # 0 on padding past the episode end
    h0: np.ndarray | None = None
    c0: np.ndarray | None = None


def cut_windows(traj: Trajectory, window: int) -> list[Window]:
    """Fixed-length windows; the terminal-truncated tail is noop-padded and
    masked out of the loss."""
    out = []
    n = len(traj.observations)
    for start in range(0, n, window):
        obs = traj.observations[start : start + window]
        acts = traj.actions[start : start + window]
        mask = np.ones(window, dtype=np.float32)
        if len(obs) < window:
            pad = window - len(obs)
            mask[len(obs):] = 0.0
            obs = obs + [obs[-1]] * pad
            acts = acts + [StructuredAction.noop()] * pad
        out.append(Window(observations=obs, actions=acts, z=traj.z, step_mask=mask))
    return out


class WindowLoader:
    """Streams shuffled teacher-forced windows with stored recurrent states.

    Per macro-batch: sample game sides, re-simulate, run the current net over
    each episode (no grad) to record the state at every window start, then
    shuffle windows into training batches.
    """

    def __init__(self, dataset_dir, window: int = 16, batch_windows: int = 16,
                 games_per_macrobatch: int = 8, seed: int = 0,
                 holdout_fraction: float = 0.05):
        self.dir = Path(dataset_dir)
        self.index = load_index(dataset_dir)
        self.window = window
        self.batch_windows = batch_windows
        self.games_per_macrobatch = games_per_macrobatch
        self.rng = np.random.default_rng(seed)
        sides = []
        for gi, entry in enumerate(self.index["games"]):
            for side in entry["kept_sides"]:
                sides.append((gi, side))
        if not sides:
            raise ValueError(f"{dataset_dir}: dataset has no kept trajectories")
        games = sorted({gi for gi, _ in sides})
        n_hold = max(1, int(len(games) * holdout_fraction)) if holdout_fraction else 0
        hold_games = set(games[-n_hold:]) if n_hold else set()
        self.train_sides = [s for s in sides if s[0] not in hold_games]
        self.holdout_sides = [s for s in sides if s[0] in hold_games]

    def sample_trajectories(self, k: int, sides=None) -> list[Trajectory]:
        pool = sides if sides is not None else self.train_sides
        picks = [pool[int(self.rng.integers(0, len(pool)))] for _ in range(k)]
        return [load_trajectory(self.dir, self.index["games"][gi], side)
                for gi, side in picks]

    def _annotate_states(self, net, trajs: list[Trajectory],
                         windows_per_traj: list[list[Window]]) -> None:
        """Batched no-grad pass over the episodes; stores h/c at window starts."""
        live = list(range(len(trajs)))
        h, c = net.initial_state(len(trajs))
        t = 0
        while live:
            for ti in live:
                widx, off = divmod(t, self.window)
                if off == 0 and widx < len(windows_per_traj[ti]):
                    windows_per_traj[ti][widx].h0 = h[ti].copy()
                    windows_per_traj[ti][widx].c0 = c[ti].copy()
            obs, zs, forced, idxs = [], [], [], []
            for ti in live:
                if t < len(trajs[ti].observations):
                    obs.append(trajs[ti].observations[t])
                    zs.append(trajs[ti].z)
                    forced.append(trajs[ti].actions[t])
                    idxs.append(ti)
            if not obs:
                break
            batch = ObsBatch(obs, zs, dtype=net.dtype)
            sel = np.array(idxs)
            with T.no_grad():
                out = net.step(batch, (h[sel], c[sel]), mode="teacher", forced=forced)
            h[sel] = out.state[0].data
            c[sel] = out.state[1].data
            live = [ti for ti in live if t + 1 < len(trajs[ti].observations)]
            t += 1

    def macrobatches(self, net):
        """Endless stream of batch lists; each inner list is ready to train on."""
        while True:
            trajs = self.sample_trajectories(self.games_per_macrobatch)
            windows_per_traj = [cut_windows(tr, self.window) for tr in trajs]
            self._annotate_states(net, trajs, windows_per_traj)
            wins = [w for ws in windows_per_traj for w in ws]
            order = self.rng.permutation(len(wins))
            batches = []
            for i in range(0, len(wins) - self.batch_windows + 1, self.batch_windows):
                batches.append([wins[j] for j in order[i : i + self.batch_windows]])
            if batches:
                yield batches
