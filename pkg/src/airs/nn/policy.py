"""Recurrent Gaussian actor and feedforward critic.

Actor: dense trunk with tanh, a mogrifier LSTM, a tanh-squashed mean head,
and one state-independent learnable log-std per action dimension (clamped to
[-5, 1]).  Critic: two tanh layers to a scalar value.  All math is float64;
rollouts run under no_grad, updates replay stored sequences with gradients.
"""

import math

import numpy as np

from . import tensor as T
from .layers import Dense, MogrifierLstm
from .tensor import Tensor

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
_LOG_2PI = math.log(2.0 * math.pi)


class ActorCritic:
    def __init__(
        self,
        rng,
        obs_dim: int,
        action_dim: int,
        hidden: int = 64,
        mogrifier_rounds: int = 5,
        log_std_init: float = -0.5,
        bptt_chunk: int = 16,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.hidden = hidden
        self.mogrifier_rounds = mogrifier_rounds
        self.bptt_chunk = bptt_chunk
        self.trunk = Dense(rng, obs_dim, hidden, "actor.trunk")
        self.cell = MogrifierLstm(rng, hidden, hidden, mogrifier_rounds, "actor.lstm")
        self.mean_head = Dense(rng, hidden, action_dim, "actor.mean")
        self.log_std = Tensor(np.full(action_dim, log_std_init), requires_grad=True)
        self.v1 = Dense(rng, obs_dim, hidden, "critic.l1")
        self.v2 = Dense(rng, hidden, hidden, "critic.l2")
        self.v3 = Dense(rng, hidden, 1, "critic.out")

    # -- parameter plumbing --------------------------------------------------

    def named_params(self):
        out = (
            self.trunk.params()
            + self.cell.params()
            + self.mean_head.params()
            + [("actor.log_std", self.log_std)]
            + self.v1.params()
            + self.v2.params()
            + self.v3.params()
        )
        return out

    def params(self):
        return [p for _, p in self.named_params()]

    def load_state(self, state: dict):
        for name, param in self.named_params():
            if name not in state:
                raise KeyError(f"checkpoint is missing parameter {name}")
            arr = state[name]
            if arr.shape != param.value.shape:
                raise ValueError(
                    f"parameter {name} has shape {arr.shape}, expected {param.value.shape}"
                )
            param.value = arr.astype(np.float64)

    def architecture(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "hidden": self.hidden,
            "mogrifier_rounds": self.mogrifier_rounds,
            "bptt_chunk": self.bptt_chunk,
        }

    # -- forward pieces --------------------------------------------------------

    def initial_state(self, batch: int = 1):
        return self.cell.initial_state(batch)

    def actor_step(self, obs: Tensor, state):
        """One recurrent step; returns (mean (B,A), new_state)."""
        x = T.tanh(self.trunk(obs))
        h, c = self.cell(x, state)
        mean = T.tanh(self.mean_head(h))
        return mean, (h, c)

    def value(self, obs: Tensor) -> Tensor:
        """Critic value, shape (B,)."""
        z = T.tanh(self.v1(obs))
        z = T.tanh(self.v2(z))
        return T.reshape(self.v3(z), (-1,))

    def clamped_log_std(self) -> Tensor:
        return T.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def log_prob(self, mean: Tensor, actions: Tensor) -> Tensor:
        """Diagonal Gaussian log density of `actions`, shape (B,)."""
        log_std = self.clamped_log_std()
        inv_std = T.exp(T.neg(log_std))
        z = T.mul(T.sub(actions, mean), inv_std)
        quad = T.sum_axis(T.square(z), axis=1)
        norm = T.sum_all(log_std)
        const = 0.5 * self.action_dim * _LOG_2PI
        return T.sub(T.mul(-0.5, quad), T.add(norm, Tensor(const)))

    def entropy(self) -> Tensor:
        """Entropy of the (state-independent) Gaussian, a scalar tensor."""
        return T.add(T.sum_all(self.clamped_log_std()),
                     Tensor(0.5 * self.action_dim * (1.0 + _LOG_2PI)))

    # -- rollout-time API -------------------------------------------------------

    def act(self, obs: np.ndarray, state, rng, greedy: bool = False):
        """Sample (or take the mean of) one action.

        Returns (action, log_prob, value, new_state) as plain numpy/floats.
        """
        with T.no_grad():
            obs_t = Tensor(obs.reshape(1, -1))
            mean, new_state = self.actor_step(obs_t, state)
            value = float(self.value(obs_t).value[0])
            mu = mean.value[0]
            log_std = np.clip(self.log_std.value, LOG_STD_MIN, LOG_STD_MAX)
            std = np.exp(log_std)
            if greedy:
                action = mu.copy()
            else:
                action = mu + std * rng.standard_normal(self.action_dim)
            z = (action - mu) / std
            log_prob = float(
                -0.5 * np.sum(z**2) - np.sum(log_std) - 0.5 * self.action_dim * _LOG_2PI
            )
        return action, log_prob, value, new_state

    def state_values(self, state):
        h, c = state
        return h.value.copy(), c.value.copy()
