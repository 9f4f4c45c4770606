"""Clipped-surrogate policy optimization over recurrent rollouts.

The buffer stores transitions in collection order, split into segments that
each start at an episode boundary or at a buffer boundary mid-episode; every
segment carries the recurrent state it started from so updates can replay
sequences exactly as collected.  When the buffer reaches the configured batch
size the trainer snapshots the current policy's log-probs, computes
advantages, and runs K epochs of full-batch gradient steps.
"""

from dataclasses import dataclass, field

import numpy as np

from ..nn import tensor as T
from ..nn.optim import Adam
from ..nn.policy import ActorCritic
from ..nn.tensor import Tensor


class NumericAbort(RuntimeError):
    """Raised when a loss goes non-finite; carries a batch diagnostic dump."""

    def __init__(self, message, dump):
        super().__init__(message)
        self.dump = dump


@dataclass(frozen=True)
class NecsaConfig:
    bins: int = 5
    order: int = 1
    weight: float = 0.2


@dataclass(frozen=True)
class PpoConfig:
    clip_epsilon: float = 0.02
    discount: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 10
    batch_size: int = 1024
    critic_weight: float = 0.5
    entropy_weight: float = 0.01
    learning_rate: float = 3e-4
    episodes: int = 3000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    necsa: NecsaConfig = field(default_factory=NecsaConfig)

    def __post_init__(self):
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    log_prob: float
    value: float
    raw_reward: float
    revised_reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class Segment:
    start: int
    length: int
    h0: np.ndarray
    c0: np.ndarray
    done: bool  # episode ended inside this segment


class RolloutBuffer:
    def __init__(self):
        self.transitions = []
        self.segments = []

    def __len__(self):
        return len(self.transitions)

    def begin_segment(self, lstm_state):
        h, c = lstm_state
        self.segments.append(Segment(len(self.transitions), 0, h.copy(), c.copy(), False))

    def add(self, transition: Transition):
        if not self.segments:
            raise RuntimeError("begin_segment() must be called before add()")
        self.transitions.append(transition)
        seg = self.segments[-1]
        seg.length += 1
        if transition.done:
            seg.done = True

    def clear(self):
        self.transitions = []
        self.segments = []


def gae_advantages(rewards, values, dones, gamma, lam):
    """Advantages and value targets from one reward/value trace.

    `values` has one extra trailing entry: the bootstrap value of the state
    after the final transition.  Terminal steps gate the bootstrap off.
    Returns (advantages, returns) with returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    n = rewards.shape[0]
    if values.shape[0] != n + 1 or dones.shape[0] != n:
        raise ValueError("gae_advantages: length mismatch")
    advantages = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * nonterminal - values[t]
        carry = delta + gamma * lam * nonterminal * carry
        advantages[t] = carry
    return advantages, advantages + values[:-1]


def normalize_advantages(advantages):
    """Zero-mean unit-variance rescaling of a batch of advantages."""
    advantages = np.asarray(advantages, dtype=float)
    centered = advantages - advantages.mean()
    std = centered.std()
    if std < 1e-300:
        return np.zeros_like(centered)
    return centered / std


def ppo_loss(new_log_probs, old_log_probs, advantages, values, returns,
             entropy, config: PpoConfig):
    """Scalar loss: clipped actor surrogate + weighted critic MSE - entropy bonus.

    Tensor inputs stay in the graph; array inputs are treated as constants.
    """
    new_log_probs = new_log_probs if isinstance(new_log_probs, Tensor) else Tensor(new_log_probs)
    values = values if isinstance(values, Tensor) else Tensor(values)
    entropy = entropy if isinstance(entropy, Tensor) else Tensor(entropy)
    old = Tensor(np.asarray(old_log_probs, dtype=float))
    adv = Tensor(np.asarray(advantages, dtype=float))
    ret = Tensor(np.asarray(returns, dtype=float))
    ratio = T.exp(T.sub(new_log_probs, old))
    clipped = T.clip(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon)
    surrogate = T.minimum(T.mul(ratio, adv), T.mul(clipped, adv))
    actor = T.neg(T.mean_all(surrogate))
    critic = T.mean_all(T.mul(0.5, T.square(T.sub(ret, values))))
    return T.add(
        T.add(actor, T.mul(config.critic_weight, critic)),
        T.mul(-config.entropy_weight, entropy),
    )


class PaddedBatch:
    """Segments stacked into (T_max, B, ...) arrays with a validity mask."""

    def __init__(self, buffer: RolloutBuffer, obs_dim: int, action_dim: int, hidden: int):
        segments = buffer.segments
        self.batch = len(segments)
        self.t_max = max(s.length for s in segments)
        self.total = len(buffer.transitions)
        b, tm = self.batch, self.t_max
        self.obs = np.zeros((tm, b, obs_dim))
        self.actions = np.zeros((tm, b, action_dim))
        self.mask = np.zeros((tm, b))
        self.flat_index = np.full((tm, b), -1, dtype=int)
        self.h0 = np.zeros((b, hidden))
        self.c0 = np.zeros((b, hidden))
        for s_idx, seg in enumerate(segments):
            self.h0[s_idx] = seg.h0
            self.c0[s_idx] = seg.c0
            for t in range(seg.length):
                tr = buffer.transitions[seg.start + t]
                self.obs[t, s_idx] = tr.state
                self.actions[t, s_idx] = tr.action
                self.mask[t, s_idx] = 1.0
                self.flat_index[t, s_idx] = seg.start + t

    def scatter(self, per_step_values) -> np.ndarray:
        """Map a (T_max, B) stack back to a flat (N,) buffer-ordered array."""
        flat = np.zeros(self.total)
        for t in range(self.t_max):
            for s in range(self.batch):
                idx = self.flat_index[t, s]
                if idx >= 0:
                    flat[idx] = per_step_values[t][s]
        return flat


class PpoUpdater:
    """Runs the K-epoch update on a full buffer."""

    def __init__(self, policy: ActorCritic, config: PpoConfig, debug: bool = False):
        self.policy = policy
        self.config = config
        self.optimizer = Adam(
            policy.params(),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
        )
        self.debug = debug
        self.last_diagnostics = None

    # -- replay machinery ----------------------------------------------------

    def _replay_log_probs(self, batch: PaddedBatch) -> np.ndarray:
        """Fresh log-probs of the stored actions under the current policy."""
        with T.no_grad():
            state = (Tensor(batch.h0), Tensor(batch.c0))
            per_step = []
            for t in range(batch.t_max):
                obs_t = Tensor(batch.obs[t])
                mean, state = self.policy.actor_step(obs_t, state)
                logp = self.policy.log_prob(mean, Tensor(batch.actions[t]))
                per_step.append(logp.value)
        return batch.scatter(per_step)

    def _actor_surrogate(self, batch: PaddedBatch, old_flat, adv_flat):
        """Masked surrogate sum over the padded batch, in the graph."""
        chunk = self.policy.bptt_chunk
        state = (Tensor(batch.h0), Tensor(batch.c0))
        surr_sum = Tensor(0.0)
        ratios = []
        eps = self.config.clip_epsilon
        for t in range(batch.t_max):
            if chunk > 0 and t > 0 and t % chunk == 0:
                state = (state[0].detach(), state[1].detach())
            obs_t = Tensor(batch.obs[t])
            mean, state = self.policy.actor_step(obs_t, state)
            logp = self.policy.log_prob(mean, Tensor(batch.actions[t]))
            old_t = np.where(batch.flat_index[t] >= 0, old_flat[batch.flat_index[t]], 0.0)
            adv_t = np.where(batch.flat_index[t] >= 0, adv_flat[batch.flat_index[t]], 0.0)
            ratio = T.exp(T.sub(logp, Tensor(old_t)))
            clipped = T.clip(ratio, 1.0 - eps, 1.0 + eps)
            surr = T.minimum(T.mul(ratio, Tensor(adv_t)), T.mul(clipped, Tensor(adv_t)))
            surr_sum = T.add(surr_sum, T.sum_all(T.mul(surr, Tensor(batch.mask[t]))))
            if self.debug:
                ratios.append(ratio.value.copy())
        return surr_sum, ratios

    # -- the update ------------------------------------------------------------

    def update(self, buffer: RolloutBuffer) -> dict:
        cfg = self.config
        batch = PaddedBatch(
            buffer, self.policy.obs_dim, self.policy.action_dim, self.policy.hidden
        )
        n = batch.total

        rewards = np.array([tr.revised_reward for tr in buffer.transitions])
        values = np.array([tr.value for tr in buffer.transitions])
        dones = np.array([tr.done for tr in buffer.transitions])
        last = buffer.transitions[-1]
        if last.done:
            bootstrap = 0.0
        else:
            with T.no_grad():
                bootstrap = float(self.policy.value(Tensor(last.next_state.reshape(1, -1))).value[0])
        advantages, returns = gae_advantages(
            rewards, np.append(values, bootstrap), dones, cfg.discount, cfg.gae_lambda
        )
        adv_flat = normalize_advantages(advantages)

        # Snapshot of the pre-update policy, taken immediately before the epochs.
        old_flat = self._replay_log_probs(batch)

        obs_flat = np.stack([tr.state for tr in buffer.transitions])
        stats = {}
        diag_ratios = []
        for epoch in range(cfg.epochs):
            self.optimizer.zero_grad()
            surr_sum, ratios = self._actor_surrogate(batch, old_flat, adv_flat)
            actor_loss = T.mul(-1.0 / n, surr_sum)
            value_pred = self.policy.value(Tensor(obs_flat))
            critic_loss = T.mean_all(T.mul(0.5, T.square(T.sub(Tensor(returns), value_pred))))
            entropy = self.policy.entropy()
            loss = T.add(
                T.add(actor_loss, T.mul(cfg.critic_weight, critic_loss)),
                T.mul(-cfg.entropy_weight, entropy),
            )
            if not np.isfinite(loss.value):
                T.clear_tape()
                raise NumericAbort(
                    f"non-finite loss at epoch {epoch}",
                    dump={
                        "epoch": epoch,
                        "actor_loss": float(actor_loss.value),
                        "critic_loss": float(critic_loss.value),
                        "rewards": rewards.tolist(),
                        "advantages": adv_flat.tolist(),
                        "returns": returns.tolist(),
                        "old_log_probs": old_flat.tolist(),
                    },
                )
            T.backward(loss)
            self.optimizer.step()
            if epoch == 0:
                stats["actor_loss"] = float(actor_loss.value)
                stats["critic_loss"] = float(critic_loss.value)
                stats["entropy"] = float(entropy.value)
            if self.debug:
                diag_ratios.append([r for r in ratios])
        if self.debug:
            self.last_diagnostics = {
                "ratios_per_epoch": diag_ratios,
                "mask": batch.mask.copy(),
                "flat_index": batch.flat_index.copy(),
                "advantages": adv_flat.copy(),
                "old_log_probs": old_flat.copy(),
                "normalized_adv_mean": float(adv_flat.mean()),
                "normalized_adv_var": float(adv_flat.var()),
            }
        return stats
