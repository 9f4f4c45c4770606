"""Run orchestration: the training loop, greedy evaluation, and run artifacts.

A run directory holds manifest.json (the fully resolved configuration, seed,
and code hash), per-episode metrics.csv, episode summaries as JSON lines,
optional per-slot and trajectory CSVs, and checkpoints.  Identical
(config, seed, code) triples produce byte-identical metrics files.
"""

import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..config import build_env, code_version, validate_config
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.policy import ActorCritic
from ..rng import STREAM_EXPLORATION, STREAM_POLICY_INIT, substream
from .agents import AGENT_SPECS, PpoAgent, baseline_agent
from .necsa import NecsaShaper
from .ppo import NecsaConfig, PpoConfig, PpoUpdater, RolloutBuffer, Transition

FINAL_WINDOW = 50


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _row(*values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


def ppo_config_from(config: dict) -> PpoConfig:
    rl = config["rl"]
    return PpoConfig(
        clip_epsilon=rl["clip_epsilon"],
        discount=rl["discount"],
        gae_lambda=rl["gae_lambda"],
        epochs=rl["epochs"],
        batch_size=rl["batch_size"],
        critic_weight=rl["critic_weight"],
        entropy_weight=rl["entropy_weight"],
        learning_rate=rl["learning_rate"],
        episodes=rl["episodes"],
        necsa=NecsaConfig(
            bins=rl["necsa"]["bins"],
            order=rl["necsa"]["order"],
            weight=rl["necsa"]["weight"],
        ),
    )


def build_agent(config: dict, env, seed: int):
    kind = config["rl"]["agent"]
    spec = AGENT_SPECS.get(kind)
    if spec is None:
        raise ValueError(f"unknown agent kind {kind!r}")
    nn_cfg = config["nn"]
    init_rng = substream(seed, STREAM_POLICY_INIT)
    return baseline_agent(
        kind,
        obs_dim=env.observation_dim,
        irs_elements=env.geometry.size,
        init_rng=init_rng,
        hidden=nn_cfg["hidden"],
        log_std_init=nn_cfg["log_std_init"],
        bptt_chunk=nn_cfg["bptt_chunk"],
    )


def write_manifest(out_dir: Path, config: dict, seed: int):
    manifest = {
        "config": config,
        "seed": seed,
        "agent": config["rl"]["agent"],
        "code_version": code_version(),
        "package_version": __version__,
        "hyperparameter_ledger": {"rl": config["rl"], "nn": config["nn"]},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


METRICS_HEADER = (
    "episode,cumulative_reward,{rates},cumulative_energy,sum_f_t,mean_penalty\n"
)
SLOTS_HEADER = "episode,t,served_user,rate_bps,energy_j,jain,reward,f_t,los,violated\n"
TRAJECTORY_HEADER = "episode,t,x,y,z,ax,ay,az,energy_joules,violated\n"


class RunWriter:
    """Owns the metric files of one run directory."""

    def __init__(self, out_dir: Path, users: int, log_slots: bool, log_trajectory: bool,
                 metrics_name: str = "metrics.csv"):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        rates = ",".join(f"avg_rate_user{i}" for i in range(users))
        self.metrics = open(out_dir / metrics_name, "w", newline="")
        self.metrics.write(METRICS_HEADER.format(rates=rates))
        self.episodes = open(out_dir / "episodes.jsonl", "w", newline="")
        self.slots = None
        self.trajectory = None
        if log_slots:
            self.slots = open(out_dir / "slots.csv", "w", newline="")
            self.slots.write(SLOTS_HEADER)
        if log_trajectory:
            self.trajectory = open(out_dir / "trajectory.csv", "w", newline="")
            self.trajectory.write(TRAJECTORY_HEADER)

    def slot(self, record):
        if self.slots is not None:
            self.slots.write(
                _row(
                    record.episode, record.t, record.served_user, record.rate_bps,
                    record.energy_j, record.jain, record.reward, record.f_t,
                    record.los, record.violated,
                )
            )
        if self.trajectory is not None:
            x, y, z = record.uav_position
            ax, ay, az = record.displacement
            self.trajectory.write(
                _row(record.episode, record.t, x, y, z, ax, ay, az,
                     record.energy_j, record.violated)
            )

    def episode(self, index: int, reward: float, rates: list, energy: float,
                sum_f: float, mean_penalty: float):
        self.metrics.write(
            _row(index, reward, *rates, energy, sum_f, mean_penalty)
        )
        self.episodes.write(
            json.dumps(
                {
                    "episode": index,
                    "cumulative_reward": reward,
                    "avg_rate_per_user": rates,
                    "cumulative_energy": energy,
                    "sum_f_t": sum_f,
                },
                sort_keys=True,
            )
            + "\n"
        )

    def close(self):
        for handle in (self.metrics, self.episodes, self.slots, self.trajectory):
            if handle is not None:
                handle.close()


def _run_episode(env, agent, explore_rng, writer, episode_stats, greedy,
                 trainer_hooks=None):
    """One episode; trainer_hooks, when given, handles buffering and updates."""
    obs = env.reset()
    agent.reset()
    total_reward = 0.0
    total_energy = 0.0
    sum_f = 0.0
    penalties = []
    done = False
    while not done:
        if trainer_hooks is not None:
            trainer_hooks.before_step(agent)
        action, log_prob, value = agent.act(obs, explore_rng, greedy=greedy)
        next_obs, breakdown, done = env.step(action)
        record = env.last_slot
        writer.slot(record)
        total_reward += breakdown.reward
        total_energy += breakdown.energy
        sum_f += record.f_t
        penalties.append(breakdown.penalty)
        if trainer_hooks is not None:
            trainer_hooks.after_step(obs, action, log_prob, value, breakdown,
                                     next_obs, done)
        obs = next_obs
    rates = [float(r) for r in env.per_user_average_rates()]
    mean_penalty = float(np.mean(penalties)) if penalties else 0.0
    stats = {
        "reward": float(total_reward),
        "rates": rates,
        "energy": float(total_energy),
        "sum_f": float(sum_f),
        "mean_penalty": mean_penalty,
    }
    episode_stats.append(stats)
    return stats["reward"], rates, stats["energy"], stats["sum_f"], mean_penalty


class _TrainerHooks:
    def __init__(self, buffer, updater, shaper, batch_size):
        self.buffer = buffer
        self.updater = updater
        self.shaper = shaper
        self.batch_size = batch_size
        self.need_segment = True
        self.update_stats = []

    def begin_episode(self):
        self.need_segment = True
        if self.shaper is not None:
            self.shaper.begin_episode()

    def before_step(self, agent):
        if self.need_segment:
            self.buffer.begin_segment(agent.state_arrays())
            self.need_segment = False

    def after_step(self, obs, action, log_prob, value, breakdown, next_obs, done):
        raw = breakdown.reward
        revised = raw
        if self.shaper is not None:
            revised = self.shaper.revise(next_obs, raw)
        self.buffer.add(
            Transition(
                state=np.array(obs),
                action=np.array(action),
                log_prob=log_prob,
                value=value,
                raw_reward=raw,
                revised_reward=revised,
                next_state=np.array(next_obs),
                done=done,
            )
        )
        if len(self.buffer) >= self.batch_size:
            self.update_stats.append(self.updater.update(self.buffer))
            self.buffer.clear()
            self.need_segment = True

    def end_episode(self):
        if self.shaper is not None:
            self.shaper.end_episode()


def train(config: dict, out_dir, seed: int, env_factory=None, debug: bool = False) -> dict:
    """Full training run per the declared agent kind; returns a summary dict."""
    validate_config(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = config["rl"]["agent"]
    spec = AGENT_SPECS.get(kind)
    if spec is None:
        raise ValueError(f"unknown agent kind {kind!r}; choose from {sorted(AGENT_SPECS)}")
    if env_factory is None:
        env = build_env(config, seed, phase_control=spec.phase_control)
    else:
        env = env_factory(config, seed, spec.phase_control)
    agent = build_agent(config, env, seed)
    explore_rng = substream(seed, STREAM_EXPLORATION)
    ppo_cfg = ppo_config_from(config)

    hooks = None
    if spec.trainable:
        shaper = None
        if spec.use_necsa:
            shaper = NecsaShaper(
                bins=ppo_cfg.necsa.bins,
                order=ppo_cfg.necsa.order,
                weight=ppo_cfg.necsa.weight,
                discount=ppo_cfg.discount,
            )
        updater = PpoUpdater(agent.policy, ppo_cfg, debug=debug)
        hooks = _TrainerHooks(RolloutBuffer(), updater, shaper, ppo_cfg.batch_size)

    write_manifest(out_dir, config, seed)
    writer = RunWriter(
        out_dir,
        users=config["env"]["users"],
        log_slots=config["env"]["log_slots"],
        log_trajectory=config["env"]["log_trajectory"],
    )
    episode_stats = []
    checkpoint_every = config["rl"]["checkpoint_every"]
    try:
        for episode in range(ppo_cfg.episodes):
            if hooks is not None:
                hooks.begin_episode()
            reward, rates, energy, sum_f, mean_penalty = _run_episode(
                env, agent, explore_rng, writer, episode_stats,
                greedy=False, trainer_hooks=hooks,
            )
            if hooks is not None:
                hooks.end_episode()
            writer.episode(episode, reward, rates, energy, sum_f, mean_penalty)
            if (
                spec.trainable
                and checkpoint_every
                and (episode + 1) % checkpoint_every == 0
            ):
                _save_agent(out_dir / "checkpoints" / f"ep_{episode + 1:06d}", agent, config)
    except Exception:
        writer.close()
        raise
    writer.close()
    if spec.trainable:
        _save_agent(out_dir / "checkpoints" / "final", agent, config)
    summary = summarize(episode_stats)
    if hooks is not None:
        summary["updates_run"] = len(hooks.update_stats)
        summary["buffer_leftover"] = len(hooks.buffer)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def summarize(episode_stats, window: int = FINAL_WINDOW) -> dict:
    if not episode_stats:
        return {"episodes": 0}
    rewards = [s["reward"] for s in episode_stats]
    energies = [s["energy"] for s in episode_stats]
    rates = np.array([s["rates"] for s in episode_stats])
    tail = min(window, len(rewards))
    return {
        "episodes": len(rewards),
        "final_window": tail,
        "final_window_mean_reward": float(np.mean(rewards[-tail:])),
        "final_window_mean_energy": float(np.mean(energies[-tail:])),
        "final_window_mean_rate_per_user": np.mean(rates[-tail:], axis=0).tolist(),
        "mean_reward": float(np.mean(rewards)),
        "mean_energy": float(np.mean(energies)),
    }


def _save_agent(directory, agent: PpoAgent, config: dict):
    hyperparams = {
        "agent": agent.spec.kind,
        "architecture": agent.policy.architecture(),
        "nn": config["nn"],
        "rl": config["rl"],
    }
    save_checkpoint(
        directory,
        [(name, param.value) for name, param in agent.policy.named_params()],
        step=0,
        hyperparams=hyperparams,
    )


def agent_from_checkpoint(path) -> PpoAgent:
    manifest, arrays = load_checkpoint(path)
    hp = manifest["hyperparams"]
    arch = hp["architecture"]
    policy = ActorCritic(
        np.random.default_rng(0),
        obs_dim=arch["obs_dim"],
        action_dim=arch["action_dim"],
        hidden=arch["hidden"],
        mogrifier_rounds=arch["mogrifier_rounds"],
        bptt_chunk=arch["bptt_chunk"],
    )
    policy.load_state(arrays)
    spec = AGENT_SPECS[hp["agent"]]
    return PpoAgent(policy, spec)


def evaluate(config: dict, out_dir, seed: int, episodes: int,
             checkpoint=None, agent_kind: str = None) -> dict:
    """Greedy-policy evaluation over a number of fresh episodes."""
    validate_config(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if checkpoint is not None:
        agent = agent_from_checkpoint(checkpoint)
        spec = agent.spec
    else:
        kind = agent_kind or config["rl"]["agent"]
        spec = AGENT_SPECS[kind]
        if spec.trainable:
            raise ValueError(f"agent kind {kind!r} needs --checkpoint for evaluation")
        agent = baseline_agent(kind)
    env = build_env(config, seed, phase_control=spec.phase_control)
    if spec.trainable:
        if agent.policy.obs_dim != env.observation_dim:
            raise ValueError(
                f"checkpoint expects {agent.policy.obs_dim}-dim observations but the "
                f"configured environment produces {env.observation_dim}"
            )
        if agent.policy.action_dim != env.action_dim:
            raise ValueError(
                f"checkpoint expects {agent.policy.action_dim}-dim actions but the "
                f"configured environment takes {env.action_dim}"
            )
    else:
        agent.action_dim = env.action_dim
    explore_rng = substream(seed, STREAM_EXPLORATION)
    writer = RunWriter(
        out_dir,
        users=config["env"]["users"],
        log_slots=config["env"]["log_slots"],
        log_trajectory=True,
        metrics_name="eval_metrics.csv",
    )
    episode_stats = []
    try:
        for episode in range(episodes):
            reward, rates, energy, sum_f, mean_penalty = _run_episode(
                env, agent, explore_rng, writer, episode_stats, greedy=True
            )
            writer.episode(episode, reward, rates, energy, sum_f, mean_penalty)
    finally:
        writer.close()
    summary = summarize(episode_stats, window=max(episodes, 1))
    summary["episodes"] = len(episode_stats)
    (out_dir / "eval_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
