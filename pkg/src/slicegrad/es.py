"""Evolution strategies on top of the gradient estimators.

The search distribution is a diagonal Gaussian N(mu, sigma^2 I) with fixed
sigma.  Each iteration draws popsize/2 antithetic pairs from the chosen
estimator's sampling distribution (per-dimension scheme), scores them, forms
the importance-weighted gradient and takes an ascent step on mu.
Evaluation always samples from the search distribution itself (the
stretched Beta for BRG, the Gaussian otherwise), on a stream
of its own, so turning it on or off leaves training untouched.

Also here: a small tanh MLP policy and a batched cart-pole swing-up task.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import distributions as dist
from .errors import ConfigError, DomainError, NumericalError
from .estimators import EstimatorKind, Kind, PhiOracle, antithetic_reflect, draw, pair_contributions
from .streams import substream

__all__ = [
    "ESConfig",
    "Policy",
    "Episode",
    "AdamState",
    "mlp_forward",
    "mlp_forward_batch",
    "param_count",
    "adam_step",
    "cartpole_swingup_batch",
    "cartpole_swingup_episode",
    "CartPoleObjective",
    "SphereObjective",
    "es_train",
    "TrainingLog",
    "LOG_COLUMNS",
]

LOG_COLUMNS = ("iter", "mean_train_reward", "eval_reward", "grad_variance", "elapsed_ms")
_ES_KINDS = (Kind.GLR_mu, Kind.SLRG, Kind.TRRG, Kind.BRG)

# cart-pole constants
GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
POLE_LENGTH = 0.5
FORCE_SCALE = 10.0
DT = 0.02
HORIZON = 1000
X_PENALTY = 0.01
ACTION_PENALTY = 0.001
INIT_NOISE = 0.05
TRACK_LIMIT = 2.4


def param_count(sizes):
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


@dataclass
class Policy:
    """Fully connected tanh network; weights stored layer by layer (W row-major, then b)."""

    sizes: tuple = (5, 10, 1)
    w: np.ndarray = None

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ConfigError("policy needs at least an input and an output layer")
        n = param_count(self.sizes)
        if self.w is None:
            self.w = np.zeros(n)
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (n,):
            raise DomainError(f"policy {self.sizes} has {n} parameters, got {self.w.shape}")

    @property
    def n_params(self):
        return param_count(self.sizes)


def _layers(sizes, W):
    W = np.asarray(W, dtype=float)
    if W.shape[-1] != param_count(sizes):
        raise DomainError(f"expected {param_count(sizes)} parameters, got {W.shape[-1]}")
    out, off = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        Wl = W[:, off:off + a * b].reshape(-1, a, b)
        off += a * b
        out.append((Wl, W[:, off:off + b]))
        off += b
    return out


def _forward(layers, h):
    for Wl, bl in layers:
        h = np.tanh(np.matmul(h[:, None, :], Wl)[:, 0, :] + bl)
    return h


def mlp_forward_batch(sizes, W, S):
    """Forward pass for n networks at once: W is (n, n_params), S is (n, input)."""
    h = np.asarray(S, dtype=float)
    if h.shape[-1] != sizes[0]:
        raise DomainError(f"state has length {h.shape[-1]}, policy expects {sizes[0]}")
    return _forward(_layers(sizes, np.atleast_2d(W)), h)


def mlp_forward(policy, state):
    state = np.asarray(state, dtype=float)
    out = mlp_forward_batch(policy.sizes, policy.w[None, :], state.reshape(1, -1))
    return out[0]


@dataclass(frozen=True)
class Episode:
    cumulative_reward: float
    steps: int


def cartpole_swingup_batch(sizes, W, init, horizon=HORIZON):
    """Run one episode per row of W; ``init`` holds (x, xdot, theta, thetadot) starts.

    The cart stops dead at the walls x = +-2.4.
    Returns (cumulative rewards, steps).  A row whose state stops being
    finite or exceeds 1e6 in magnitude is frozen with what it has earned.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n = W.shape[0]
    x, xd, th, thd = (np.array(col, dtype=float) for col in np.asarray(init, dtype=float).T)
    total = np.zeros(n)
    steps = np.zeros(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    m_tot = CART_MASS + POLE_MASS
    pml = POLE_MASS * POLE_LENGTH
    layers = _layers(sizes, W)
    obs = np.empty((n, 5))
    for _ in range(horizon):
        c, s = np.cos(th), np.sin(th)
        obs[:, 0], obs[:, 1], obs[:, 2], obs[:, 3], obs[:, 4] = x, xd, c, s, thd
        a = _forward(layers, obs)[:, 0]
        r = c - X_PENALTY * x * x - ACTION_PENALTY * a * a
        total = np.where(alive, total + r, total)
        steps = steps + alive
        force = FORCE_SCALE * a
        tmp = (force + pml * thd * thd * s) / m_tot
        thacc = (GRAVITY * s - c * tmp) / (POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * c * c / m_tot))
        xacc = tmp - pml * thacc * c / m_tot
        xd = xd + DT * xacc
        x = x + DT * xd
        # inelastic walls at the track ends
        hit = np.abs(x) > TRACK_LIMIT
        if hit.any():
            x = np.clip(x, -TRACK_LIMIT, TRACK_LIMIT)
            xd = np.where(hit, 0.0, xd)
        thd = thd + DT * thacc
        th = th + DT * thd
        with np.errstate(invalid="ignore"):
            ok = np.isfinite(x) & np.isfinite(th) & (np.abs(x) < 1e6) & (np.abs(thd) < 1e6)
        if not ok.all():
            alive &= ok
            x, xd, th, thd = (np.where(ok, v, 0.0) for v in (x, xd, th, thd))
        if not alive.any():
            break
    return total, steps


def _initial_states(rng, n):
    init = INIT_NOISE * rng.standard_normal((n, 4))
    init[:, 2] += math.pi
    return init


def cartpole_swingup_episode(policy, rng, horizon=HORIZON):
    """One swing-up episode from the hanging position (small random start offset)."""
    if policy.sizes[0] != 5 or policy.sizes[-1] != 1:
        raise DomainError("cart-pole policy must map 5 observations to 1 action")
    total, steps = cartpole_swingup_batch(policy.sizes, policy.w[None, :],
                                          _initial_states(rng, 1), horizon)
    return Episode(float(total[0]), int(steps[0]))


class CartPoleObjective:
    """phi(w): summed swing-up reward of the policy with parameters w."""

    def __init__(self, sizes=(5, 10, 1), horizon=HORIZON, episodes=1):
        self.sizes = tuple(sizes)
        self.horizon = int(horizon)
        self.episodes = int(episodes)
        self.dim = param_count(self.sizes)

    def evaluate(self, W, rng):
        W = np.atleast_2d(W)
        n = W.shape[0]
        Wr = np.repeat(W, self.episodes, axis=0)
        total, _ = cartpole_swingup_batch(self.sizes, Wr, _initial_states(rng, n * self.episodes),
                                          self.horizon)
        return total.reshape(n, self.episodes).mean(axis=1)


class SphereObjective:
    """phi(w) = -sum((w - center)^2) + noise_sigma * N(0, 1)."""

    def __init__(self, dim, center=0.0, noise_sigma=0.0):
        self.dim = int(dim)
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (self.dim,)).copy()
        self.noise_sigma = float(noise_sigma)

    def evaluate(self, W, rng):
        W = np.atleast_2d(W)
        val = -((W - self.center) ** 2).sum(axis=1)
        if self.noise_sigma > 0:
            val = val + self.noise_sigma * rng.standard_normal(W.shape[0])
        return val


class _OracleObjective:
    def __init__(self, phi, dim):
        self.phi = phi
        self.dim = dim

    def evaluate(self, W, rng):
        if self.phi.noisy:
            return self.phi(W, rng.standard_normal(W.shape[0]))
        return self.phi(W)


@dataclass
class AdamState:
    params: np.ndarray
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.m is None:
            self.m = np.zeros_like(self.params)
        if self.v is None:
            self.v = np.zeros_like(self.params)


def adam_step(state, grad, lr, beta1=0.99, beta2=0.999, eps_hat=1e-8):
    """One bias-corrected Adam descent step; returns a new AdamState."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.params.shape:
        raise DomainError("gradient and parameter shapes differ")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    params = state.params - lr * m_hat / (np.sqrt(v_hat) + eps_hat)
    return AdamState(params, m, v, t)


@dataclass
class ESConfig:
    popsize: int = 32
    sigma: float = 0.5
    lr: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.99
    beta2: float = 0.999
    eps_hat: float = 1e-8
    estimator: EstimatorKind = field(default_factory=lambda: EstimatorKind(Kind.GLR_mu))
    reward_normalize: bool = True
    iterations: int = 200
    eval_every: int = 10
    eval_samples: int = 32
    eval_mode: str = "sample"
    episodes_per_sample: int = 1
    seed: int = 0
    timing: bool = False

    def __post_init__(self):
        if not isinstance(self.estimator, EstimatorKind):
            self.estimator = EstimatorKind.parse(str(self.estimator))
        if self.estimator.tag not in _ES_KINDS:
            raise ConfigError(f"ES needs a mu-gradient estimator (glr, slrg, trrg, brg), got {self.estimator}")
        if self.popsize < 2 or self.popsize % 2:
            raise ConfigError("popsize must be even and >= 2")
        if not self.sigma > 0 or not self.lr > 0:
            raise ConfigError("sigma and lr must be positive")
        self.optimizer = str(self.optimizer).lower()
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("optimizer must be sgd or adam")
        if self.eval_mode not in ("sample", "mean"):
            raise ConfigError("eval_mode must be 'sample' or 'mean'")
        for name in ("iterations", "eval_every", "eval_samples", "episodes_per_sample"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def from_mapping(cls, values):
        """Build from string key/value pairs (config file or CLI)."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in kinds:
                raise ConfigError(f"unknown ES option {key!r}")
            typ = kinds[key]
            raw = str(raw).strip()
            if typ is bool:
                if raw.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ConfigError(f"{key} expects a boolean, got {raw!r}")
                kw[key] = raw.lower() in ("1", "true", "yes", "on")
            elif typ is int:
                kw[key] = int(raw)
            elif typ is float:
                kw[key] = float(raw)
            elif key == "estimator":
                kw[key] = EstimatorKind.parse(raw)
            else:
                kw[key] = raw
        return cls(**kw)


@dataclass
class TrainingLog:
    rows: list
    mu: np.ndarray

    @property
    def eval_iters(self):
        return [r[0] for r in self.rows if not math.isnan(r[2])]

    @property
    def eval_rewards(self):
        return [r[2] for r in self.rows if not math.isnan(r[2])]

    @property
    def grad_variances(self):
        return [r[3] for r in self.rows if not math.isnan(r[3])]

    def to_csv(self, out=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for it, tr, ev, gv, ms in self.rows:
            w.writerow([it] + ["" if math.isnan(v) else repr(float(v)) for v in (tr, ev, gv)]
                       + [repr(float(ms))])
        text = buf.getvalue()
        if out is not None:
            if hasattr(out, "write"):
                out.write(text)
            else:
                with open(out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
        return text


def _as_objective(objective, dim):
    if hasattr(objective, "evaluate"):
        return objective
    if isinstance(objective, PhiOracle):
        if dim is None:
            raise ConfigError("dim is required with a bare PhiOracle objective")
        return _OracleObjective(objective, dim)
    raise ConfigError("objective must be a PhiOracle or have an evaluate(W, rng) method")


def es_train(cfg, objective, dim=None, mu0=None):
    """Run ES; returns a TrainingLog with one row per iteration (row 0 is the start).

    ``grad_variance`` is the summed per-coordinate variance of the pair
    contributions divided by the number of pairs, the same statistic the
    estimators report.
    """
    obj = _as_objective(objective, dim)
    dim = int(getattr(obj, "dim", dim))
    mu = np.zeros(dim) if mu0 is None else np.array(mu0, dtype=float)
    train_rng = substream(cfg.seed, "es", "train")
    reward_rng = substream(cfg.seed, "es", "train-reward")
    eval_rng = substream(cfg.seed, "es", "eval")
    adam = AdamState(mu.copy())
    pairs = cfg.popsize // 2
    nan = math.nan

    def evaluate():
        if cfg.eval_mode == "mean":
            return float(obj.evaluate(mu[None, :], eval_rng)[0])
        if cfg.estimator.beta_base:
            spec = dist.DistSpec(dist.DistTag.SymBeta, dist.SymBetaParams.matched(cfg.estimator.param))
            eps = dist.sample(spec, dist.draw_uniforms(spec, eval_rng, (cfg.eval_samples, dim)))
        else:
            eps = eval_rng.standard_normal((cfg.eval_samples, dim))
        X = mu + cfg.sigma * eps
        return float(obj.evaluate(X, eval_rng).mean())

    start = time.perf_counter()
    stamp = lambda: (time.perf_counter() - start) * 1e3 if cfg.timing else 0.0
    rows = [(0, nan, evaluate(), nan, stamp())]
    for it in range(1, cfg.iterations + 1):
        d = draw(cfg.estimator, train_rng, pairs, mu, cfg.sigma)
        X = np.concatenate([d.x, antithetic_reflect(d.x, mu)], axis=0)
        f = np.asarray(obj.evaluate(X, reward_rng), dtype=float)
        mean_reward = float(f.mean())
        if cfg.reward_normalize:
            f = f / max(float(f.std(ddof=1)), 1e-8)
        c = pair_contributions(d.w, d.parity, f[:pairs], f[pairs:])
        grad = c.mean(axis=0)
        gvar = float(c.var(axis=0, ddof=1).sum() / pairs) if pairs > 1 else nan
        if cfg.optimizer == "adam":
            adam = adam_step(AdamState(mu, adam.m, adam.v, adam.t), -grad, cfg.lr,
                             cfg.beta1, cfg.beta2, cfg.eps_hat)
            mu = adam.params
        else:
            mu = mu + cfg.lr * grad
        if not np.all(np.isfinite(mu)) or np.max(np.abs(mu)) > 1e6:
            raise NumericalError(f"ES diverged at iteration {it} (|mu| > 1e6)")
        ev = evaluate() if it % cfg.eval_every == 0 else nan
        rows.append((it, mean_reward, ev, gvar, stamp()))
    return TrainingLog(rows, mu)
