"""Soft actor-critic with explicit value and target-value networks.

The original-variant parameter sets: a state-value net, its Polyak-
averaged target, twin soft-Q nets taking (state, action), and a
tanh-squashed Gaussian policy trained by reparameterization. Gradients
are analytic (see mlp) and the tests check every one of them against
central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import NormBounds
from .mlp import Adam, Mlp

LOG_2PI = float(np.log(2.0 * np.pi))
SQUASH_EPS = 1e-6


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; carries the offending batch for diagnosis."""

    def __init__(self, message: str, batch: dict | None = None):
        super().__init__(message)
        self.batch = batch


@dataclass(frozen=True)
class SacHyperParams:
    lr_v: float = 0.002
    lr_q: float = 0.002
    lr_pi: float = 0.002
    discount: float = 0.99
    tau: float = 0.005
    alpha: float = 0.2
    batch: int = 256
    buffer_capacity: int = 100_000
    hidden: tuple = (64, 64)
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    total_steps: int = 20_000
    warmup_steps: int = 1_000
    updates_per_step: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.batch <= 0 or self.buffer_capacity <= 0:
            raise ValueError("batch and buffer capacity must be positive")
        if self.updates_per_step <= 0:
            raise ValueError("updates_per_step must be positive")
        if self.log_std_min >= self.log_std_max:
            raise ValueError("log_std bounds out of order")


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s, a, r, s_next, done) -> None:
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
            "indices": idx,
        }


class GaussianPolicy:
    """Tanh-squashed diagonal Gaussian with clamped log-std heads."""

    def __init__(self, state_dim: int, action_dim: int, hidden,
                 log_std_min: float, log_std_max: float,
                 rng: np.random.Generator | None = None,
                 activation: str = "relu"):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.log_std_min = log_std_min
        self.log_std_max = log_std_max
        self.net = Mlp([state_dim, *hidden, 2 * action_dim], activation, rng)

    def heads(self, s: np.ndarray):
        out = self.net.forward(s)
        mu = out[:, :self.action_dim]
        ls_raw = out[:, self.action_dim:]
        return mu, ls_raw, np.clip(ls_raw, self.log_std_min, self.log_std_max)

    def deterministic(self, s: np.ndarray) -> np.ndarray:
        mu, _, _ = self.heads(np.atleast_2d(s))
        return np.tanh(mu)


def _squashed_log_prob(eps: np.ndarray, log_std: np.ndarray,
                       a: np.ndarray) -> np.ndarray:
    """log pi(a|s) including the tanh change-of-variables correction."""
    per_dim = (-0.5 * eps * eps - log_std - 0.5 * LOG_2PI
               - np.log(1.0 - a * a + SQUASH_EPS))
    return per_dim.sum(axis=1)


def sample_action(policy: GaussianPolicy, s: np.ndarray, eps: np.ndarray,
                  deterministic: bool = False):
    """Draw a = tanh(mu + sigma*eps); returns (action, log_prob)."""
    single = np.asarray(s).ndim == 1
    s2 = np.atleast_2d(s)
    eps2 = np.atleast_2d(eps)
    mu, _, ls = policy.heads(s2)
    if deterministic:
        eps2 = np.zeros_like(mu)
    a = np.tanh(mu + np.exp(ls) * eps2)
    logp = _squashed_log_prob(eps2, ls, a)
    if single:
        return a[0], float(logp[0])
    return a, logp


class SacAgent:
    def __init__(self, state_dim: int, action_dim: int, hp: SacHyperParams,
                 rng: np.random.Generator | None = None):
        self.hp = hp
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.rng = rng or np.random.default_rng(hp.seed)
        hidden = list(hp.hidden)
        self.policy = GaussianPolicy(state_dim, action_dim, hidden,
                                     hp.log_std_min, hp.log_std_max, self.rng)
        self.q1 = Mlp([state_dim + action_dim, *hidden, 1], rng=self.rng)
        self.q2 = Mlp([state_dim + action_dim, *hidden, 1], rng=self.rng)
        self.value = Mlp([state_dim, *hidden, 1], rng=self.rng)
        self.value_target = self.value.copy()
        self.opt_policy = Adam(self.policy.net.param_list())
        self.opt_q1 = Adam(self.q1.param_list())
        self.opt_q2 = Adam(self.q2.param_list())
        self.opt_value = Adam(self.value.param_list())

    # ----- acting

    def act(self, s_vec: np.ndarray, deterministic: bool = False) -> np.ndarray:
        eps = self.rng.standard_normal(self.action_dim)
        a, _ = sample_action(self.policy, s_vec, eps, deterministic)
        return a

    # ----- targets

    def value_targets(self, s: np.ndarray, eps: np.ndarray | None = None) -> np.ndarray:
        """Soft state-value sample: min twin Q at a fresh policy action
        minus the scaled log-likelihood."""
        if eps is None:
            eps = self.rng.standard_normal((s.shape[0], self.action_dim))
        a, logp = sample_action(self.policy, s, eps)
        xq = np.concatenate([s, a], axis=1)
        qmin = np.minimum(self.q1.forward(xq), self.q2.forward(xq))[:, 0]
        return qmin - self.hp.alpha * logp

    def q_backup(self, rewards: np.ndarray, next_states: np.ndarray,
                 dones: np.ndarray) -> np.ndarray:
        """Bellman target r + discount * V_target(s'); dones mask bootstrap."""
        v_next = self.value_target.forward(next_states)[:, 0]
        return rewards + self.hp.discount * (1.0 - dones) * v_next

    # ----- losses with analytic gradients

    @staticmethod
    def _mse_loss_grads(net: Mlp, x: np.ndarray, targets: np.ndarray):
        out, cache = net.forward_cache(x)
        resid = out[:, 0] - targets
        loss = 0.5 * float(np.mean(resid * resid))
        d_out = (resid / resid.shape[0])[:, None]
        grads, _ = net.backward(cache, d_out)
        return loss, grads

    def value_loss_grads(self, s: np.ndarray, targets: np.ndarray):
        return self._mse_loss_grads(self.value, s, targets)

    def q_loss_grads(self, which: int, s: np.ndarray, a: np.ndarray,
                     targets: np.ndarray):
        net = self.q1 if which == 1 else self.q2
        return self._mse_loss_grads(net, np.concatenate([s, a], axis=1), targets)

    def policy_loss_grads(self, s: np.ndarray, eps: np.ndarray):
        """Reparameterized objective mean(alpha*log pi - min Q) and its
        gradient w.r.t. the policy parameters."""
        bsz = s.shape[0]
        adim = self.action_dim
        alpha = self.hp.alpha
        out, cache = self.policy.net.forward_cache(s)
        mu = out[:, :adim]
        ls_raw = out[:, adim:]
        ls = np.clip(ls_raw, self.hp.log_std_min, self.hp.log_std_max)
        sigma = np.exp(ls)
        u = mu + sigma * eps
        a = np.tanh(u)
        one_m_a2 = 1.0 - a * a
        logp = (-0.5 * eps * eps - ls - 0.5 * LOG_2PI
                - np.log(one_m_a2 + SQUASH_EPS)).sum(axis=1)

        xq = np.concatenate([s, a], axis=1)
        q1v, c1 = self.q1.forward_cache(xq)
        q2v, c2 = self.q2.forward_cache(xq)
        take1 = (q1v <= q2v).astype(np.float64)
        qmin = np.minimum(q1v, q2v)
        loss = float(np.mean(alpha * logp - qmin[:, 0]))

        _, dx1 = self.q1.backward(c1, -take1 / bsz)
        _, dx2 = self.q2.backward(c2, -(1.0 - take1) / bsz)
        d_action = (dx1 + dx2)[:, self.state_dim:]

        # d/du of the tanh correction term in log pi
        corr = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS)
        d_u = (alpha / bsz) * corr + d_action * one_m_a2
        d_mu = d_u
        d_ls = -alpha / bsz + d_u * sigma * eps
        active = ((ls_raw > self.hp.log_std_min)
                  & (ls_raw < self.hp.log_std_max)).astype(np.float64)
        d_head = np.concatenate([d_mu, d_ls * active], axis=1)
        grads, _ = self.policy.net.backward(cache, d_head)
        return loss, grads

    # ----- one gradient step per network

    def update_value(self, s: np.ndarray, targets: np.ndarray) -> float:
        loss, grads = self.value_loss_grads(s, targets)
        self.opt_value.step(self.value.param_list(), grads, self.hp.lr_v)
        return loss

    def update_q(self, which: int, s: np.ndarray, a: np.ndarray,
                 targets: np.ndarray) -> float:
        net = self.q1 if which == 1 else self.q2
        opt = self.opt_q1 if which == 1 else self.opt_q2
        loss, grads = self.q_loss_grads(which, s, a, targets)
        opt.step(net.param_list(), grads, self.hp.lr_q)
        return loss

    def update_policy(self, s: np.ndarray, eps: np.ndarray | None = None) -> float:
        if eps is None:
            eps = self.rng.standard_normal((s.shape[0], self.action_dim))
        loss, grads = self.policy_loss_grads(s, eps)
        self.opt_policy.step(self.policy.net.param_list(), grads, self.hp.lr_pi)
        return loss

    def soft_update_target(self, tau: float | None = None) -> None:
        """Polyak blend: target <- tau*online + (1-tau)*target."""
        t = self.hp.tau if tau is None else tau
        for pt, po in zip(self.value_target.param_list(),
                          self.value.param_list()):
            pt[...] = t * po + (1.0 - t) * pt

    def update(self, batch: dict) -> dict:
        s = batch["states"]
        targets = self.value_targets(s)
        v_loss = self.update_value(s, targets)
        y = self.q_backup(batch["rewards"], batch["next_states"], batch["dones"])
        q1_loss = self.update_q(1, s, batch["actions"], y)
        q2_loss = self.update_q(2, s, batch["actions"], y)
        pi_loss = self.update_policy(s)
        self.soft_update_target()
        return {"value": v_loss, "q1": q1_loss, "q2": q2_loss, "policy": pi_loss}


@dataclass
class TrainResult:
    agent: SacAgent
    curve: list          # (global_step, episode_index, episode_reward)
    hp: SacHyperParams


def train(env, hp: SacHyperParams) -> TrainResult:
    """Algorithm: interleave environment steps with one gradient pass per
    step after a uniform-random warmup. Fully seeded; single-threaded."""
    rng = np.random.default_rng(hp.seed)
    agent = SacAgent(env.state_dim, env.action_dim, hp, rng)
    buffer = ReplayBuffer(hp.buffer_capacity, env.state_dim, env.action_dim)
    obs = env.reset_vec()
    episode = 0
    ep_reward = 0.0
    curve: list[tuple] = []
    for step in range(hp.total_steps):
        if step < hp.warmup_steps:
            a = rng.uniform(-1.0, 1.0, env.action_dim)
        else:
            a = agent.act(obs)
        nxt, r, done = env.step_vec((a + 1.0) / 2.0)
        # episode ends are timeouts, not terminal states: keep bootstrapping
        buffer.add(obs, a, r, nxt, 0.0)
        ep_reward += r
        obs = nxt
        if done:
            curve.append((step, episode, ep_reward))
            episode += 1
            ep_reward = 0.0
            obs = env.reset_vec()
        if step >= hp.warmup_steps and len(buffer) >= hp.batch:
            for _ in range(hp.updates_per_step):
                batch = buffer.sample(hp.batch, rng)
                losses = agent.update(batch)
                if not all(np.isfinite(v) for v in losses.values()):
                    raise TrainingDiverged(
                        f"non-finite loss at step {step}: {losses}", batch=batch
                    )
    return TrainResult(agent=agent, curve=curve, hp=hp)


# ---------------------------------------------------------------------------
# deployable policies


@dataclass(frozen=True)
class FixedPolicy:
    """Constant-action baseline (actions in [0, 1] per component)."""

    a01: tuple
    name: str

    def action01(self, state_vec) -> np.ndarray:
        return np.array(self.a01, dtype=np.float64)


LOW_PRESET = FixedPolicy((0.0, 0.0, 0.0), "low")
HIGH_PRESET = FixedPolicy((1.0, 1.0, 1.0), "high")


def preset_policy(name: str) -> FixedPolicy:
    presets = {"low": LOW_PRESET, "high": HIGH_PRESET}
    if name not in presets:
        raise ValueError(f"unknown policy preset {name!r}")
    return presets[name]


@dataclass
class TrainedPolicy:
    """A frozen policy bundled with its normalization bounds."""

    policy: GaussianPolicy
    bounds: NormBounds
    hyperparams: dict
    seed: int
    name: str = "checkpoint"

    def action01(self, state_vec) -> np.ndarray:
        a = self.policy.deterministic(state_vec)[0]
        return (a + 1.0) / 2.0


def save_policy_checkpoint(path: str | Path, agent: SacAgent,
                           bounds: NormBounds, seed: int) -> None:
    pol = agent.policy
    doc = {
        "version": 1,
        "layer_sizes": pol.net.layer_sizes,
        "activation": pol.net.activation,
        "weights": [w.tolist() for w in pol.net.weights],
        "biases": [b.tolist() for b in pol.net.biases],
        "log_std_min": pol.log_std_min,
        "log_std_max": pol.log_std_max,
        "norm_bounds": bounds.to_dict(),
        "hyperparams": asdict(agent.hp),
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_policy_checkpoint(path: str | Path) -> TrainedPolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    sizes = doc["layer_sizes"]
    action_dim = sizes[-1] // 2
    pol = GaussianPolicy(sizes[0], action_dim, sizes[1:-1],
                         doc["log_std_min"], doc["log_std_max"],
                         activation=doc["activation"])
    pol.net.weights = [np.array(w) for w in doc["weights"]]
    pol.net.biases = [np.array(b) for b in doc["biases"]]
    return TrainedPolicy(
        policy=pol,
        bounds=NormBounds.from_dict(doc["norm_bounds"]),
        hyperparams=doc["hyperparams"],
        seed=doc["seed"],
    )
