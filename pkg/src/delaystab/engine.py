"""Delayed SGD on a :class:`~delaystab.problem.QuadraticProblem`.

The update at step ``t >= D`` is

    w_{t+1} = w_t - eta * g(w_{t - tau_t}; batch_t)

with ``w_0 = ... = w_D`` and ``D`` the largest delay the schedule can
produce.  Delays are injected logically; no workers are simulated.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, Sample
from .problem import QuadraticProblem

DIVERGENCE_NORM = 1e12


class DivergenceError(FloatingPointError):
    def __init__(self, iteration: int, norm: float):
        self.iteration = iteration
        self.norm = norm
        super().__init__(f"iterate diverged at t={iteration} (|w|={norm:.3g})")


@dataclass(frozen=True)
class FixedDelay:
    tau: int

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("delay must be nonnegative")

    @property
    def max_delay(self) -> int:
        return self.tau

    def sequence(self, T: int) -> np.ndarray:
        """Delay used at each step t = 0..T-1 (entries before the first update are unused)."""
        return np.full(T, self.tau, dtype=np.int64)

    def describe(self) -> dict:
        return {"kind": "fixed", "tau": self.tau}


@dataclass(frozen=True)
class RandomDelay:
    """tau_t uniform on {0, ..., tau_bar}, drawn from its own seeded stream."""

    tau_bar: int
    seed: int = 0

    def __post_init__(self):
        if self.tau_bar < 1:
            raise ValueError("tau_bar must be a positive integer")

    @property
    def max_delay(self) -> int:
        return self.tau_bar

    def sequence(self, T: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.integers(0, self.tau_bar + 1, size=T, dtype=np.int64)

    def describe(self) -> dict:
        return {"kind": "random", "tau_bar": self.tau_bar, "distribution": "uniform-0-to-tau_bar", "seed": self.seed}


@dataclass(frozen=True)
class RunConfig:
    eta: float
    T: int
    batch_size: int = 1
    w0: np.ndarray | None = None
    sampler_seed: int = 0
    full_batch: bool = False
    record_stride: int | None = None
    record_start: bool = False
    noise_samples: int = 200
    track_drift: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class Trajectory:
    w_final: np.ndarray
    T: int
    max_delay: int
    checkpoints: np.ndarray
    iterates: np.ndarray
    train_loss: np.ndarray
    index_digest: str
    noise_mean: float
    noise_stderr: float
    noise_count: int
    drift_max: float = float("nan")
    schedule: dict = field(default_factory=dict)


def draw_indices(seed: int, n: int, T: int, batch_size: int) -> np.ndarray:
    """Sample indices for every step, shape (T, batch_size); row t feeds step t."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=(T, batch_size), dtype=np.int64)


def _checkpoint_times(T: int, stride: int | None, start: bool, D: int) -> np.ndarray:
    ts = set(range(stride, T + 1, stride)) if stride else set()
    if start:
        ts.add(D)
    return np.array(sorted(ts), dtype=np.int64)


def _digest(arr: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(arr).tobytes(), digest_size=8).hexdigest()


def run(problem: QuadraticProblem, schedule, config: RunConfig, *,
        indices: np.ndarray | None = None, delays: np.ndarray | None = None) -> Trajectory:
    """Run delayed SGD for ``config.T`` iterations.

    ``indices`` (shape (T, batch)) and ``delays`` (shape (T,)) override the
    seeded streams; twin runs use this to share randomness.
    """
    T = config.T
    D = schedule.max_delay
    if T <= D:
        raise ValueError(f"T={T} must exceed the maximum delay {D}")
    if delays is None:
        delays = schedule.sequence(T)
    if np.any(delays[D:] < 0) or np.any(delays[D:] > D):
        raise ValueError("delay sequence outside [0, max_delay]")
    if config.full_batch:
        indices = None
    elif indices is None:
        indices = draw_indices(config.sampler_seed, problem.n, T, config.batch_size)
    elif indices.shape[0] < T:
        raise ValueError("index array shorter than T")

    X, y, ridge, eta = problem.X, problem.y, problem.ridge, config.eta
    d = problem.d
    w0 = np.zeros(d) if config.w0 is None else np.array(config.w0, dtype=np.float64)
    hist = np.tile(w0, (D + 1, 1))  # slot t % (D+1) holds w_t

    ckpt_t = _checkpoint_times(T, config.record_stride, config.record_start, D)
    ckpt_w = np.empty((ckpt_t.size, d))
    k_ckpt = 0
    while k_ckpt < ckpt_t.size and ckpt_t[k_ckpt] <= D:
        ckpt_w[k_ckpt] = w0
        k_ckpt += 1

    n_steps = T - D
    noise_every = max(1, n_steps // max(config.noise_samples, 1)) if config.noise_samples else 0
    noise = []
    drift_max = 0.0

    # single-sample dense steps skip fancy indexing (the common, hot case)
    scalar_path = problem.explicit and not config.full_batch and indices.shape[1] == 1
    if scalar_path:
        flat_idx = indices[:, 0].tolist()
    delay_list = delays.tolist()
    w = w0.copy()
    for t in range(D, T):
        w_stale = hist[(t - delay_list[t]) % (D + 1)]
        if scalar_path:
            i = flat_idx[t]
            xi = X[i]
            g = xi * (xi.dot(w_stale) - y[i])
            if ridge:
                g += ridge * w_stale
        elif config.full_batch:
            g = problem.full_gradient(w_stale)
        else:
            idx = indices[t]
            Xb = X[idx]
            g = np.asarray(Xb.T @ (Xb @ w_stale - y[idx])).ravel() / idx.size
            if ridge:
                g += ridge * w_stale
        if noise_every and (t - D) % noise_every == 0:
            noise.append(float(np.linalg.norm(g - problem.full_gradient(w_stale))))
        if config.track_drift and delay_list[t] != D:
            drift = problem.matvec(w_stale - hist[(t - D) % (D + 1)])
            drift_max = max(drift_max, float(np.linalg.norm(drift)))
        w = w - eta * g
        sq = w.dot(w)
        if not sq <= DIVERGENCE_NORM**2:
            raise DivergenceError(t + 1, math.sqrt(sq) if math.isfinite(sq) else float("inf"))
        hist[(t + 1) % (D + 1)] = w
        if k_ckpt < ckpt_t.size and ckpt_t[k_ckpt] == t + 1:
            ckpt_w[k_ckpt] = w
            k_ckpt += 1

    noise_arr = np.array(noise)
    m = noise_arr.size
    return Trajectory(
        w_final=w,
        T=T,
        max_delay=D,
        checkpoints=ckpt_t,
        iterates=ckpt_w,
        train_loss=np.array([problem.empirical_loss(v) for v in ckpt_w]),
        index_digest=_digest(indices[D:T]) if indices is not None else "full-batch",
        noise_mean=float(noise_arr.mean()) if m else float("nan"),
        noise_stderr=float(noise_arr.std(ddof=1) / math.sqrt(m)) if m > 1 else float("nan"),
        noise_count=m,
        drift_max=drift_max if config.track_drift else float("nan"),
        schedule=schedule.describe(),
    )


def generalization_error(train: QuadraticProblem, test: Dataset | QuadraticProblem, w) -> float:
    """Test empirical loss minus train empirical loss (ridge excluded from both)."""
    if isinstance(test, Dataset):
        if test.n == 0:
            raise ValueError("empty test set")
        test = QuadraticProblem(test)
    if test.d != train.d:
        raise ValueError(f"dimension mismatch: train d={train.d}, test d={test.d}")
    return test.empirical_loss(w) - train.empirical_loss(w)


@dataclass
class TwinRun:
    """Coupled runs on S and S^(i) sharing sample indices and delays.

    ``e_norms[k]`` / ``e_weighted_norms[k]`` are |e_t| and |sqrt(A) e_t| at
    ``checkpoints[k]`` (the weighted norm is NaN outside the explicit regime).
    """

    replaced_index: int
    replacement: Sample
    w: np.ndarray
    w_prime: np.ndarray
    checkpoints: np.ndarray
    e_norms: np.ndarray
    e_weighted_norms: np.ndarray
    loss_gap: float
    first_hit: int | None
    trajectory: Trajectory
    trajectory_prime: Trajectory

    @property
    def e(self) -> np.ndarray:
        return self.w - self.w_prime

    @property
    def s(self) -> np.ndarray:
        return self.w + self.w_prime


def twin_run(problem: QuadraticProblem, replaced_index: int, replacement: Sample | tuple,
             schedule, config: RunConfig, *, indices: np.ndarray | None = None) -> TwinRun:
    if config.full_batch:
        raise ValueError("twin runs need stochastic sampling")
    if isinstance(replacement, tuple):
        replacement = Sample.from_dense(replacement[0], replacement[1])
    neighbour = problem.replace_sample(replaced_index, replacement)
    T, D = config.T, schedule.max_delay
    if indices is None:
        indices = draw_indices(config.sampler_seed, problem.n, T, config.batch_size)
    delays = schedule.sequence(T)
    traj = run(problem, schedule, config, indices=indices, delays=delays)
    traj_p = run(neighbour, schedule, replace(config, noise_samples=0), indices=indices, delays=delays)

    e = traj.iterates - traj_p.iterates
    e_norms = np.linalg.norm(e, axis=1)
    if problem.explicit:
        e_w = np.sqrt(np.maximum(np.einsum("kd,kd->k", e, e @ problem.A), 0.0))
    else:
        e_w = np.full(e_norms.shape, np.nan)

    hits = np.flatnonzero((indices[D:T] == replaced_index).any(axis=1))
    first_hit = int(hits[0]) + D if hits.size else None
    gap = problem.sample_loss(traj_p.w_final, replaced_index) - problem.sample_loss(traj.w_final, replaced_index)
    return TwinRun(replaced_index, replacement, traj.w_final, traj_p.w_final, traj.checkpoints,
                   e_norms, e_w, gap, first_hit, traj, traj_p)
