"""The dynamical hypothesis space: flow models, loss, and training.

A model realizes F(x) = terminal(flow(x)) with the terminal drawn from a
fixed invariant family (sum / mean / max) and the flow a schedule of
equivariant layers.  Training is deterministic full-batch gradient
descent with momentum on all schedule parameters through the discrete
adjoint; durations and the terminal stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .flows import Schedule, flow_backward, integrate
from .layers import random_layer
from .rng import substream
from .targets import TargetFunction

DIVERGENCE_LIMIT = 1e8


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"training diverged at iteration {iteration} (loss {loss:.3e})")
        self.iteration = iteration
        self.loss = loss


def _terminal_sum(y):
    return np.sum(y, axis=-1)


def _terminal_sum_grad(y):
    return np.ones_like(y)


def _terminal_mean(y):
    return np.mean(y, axis=-1)


def _terminal_mean_grad(y):
    return np.full_like(y, 1.0 / y.shape[-1])


def _terminal_max(y):
    return np.max(y, axis=-1)


def _terminal_max_grad(y):
    g = np.zeros_like(y)
    np.put_along_axis(g, np.argmax(y, axis=-1)[..., None], 1.0, axis=-1)
    return g


TERMINALS: dict[str, tuple[Callable, Callable]] = {
    "sum": (_terminal_sum, _terminal_sum_grad),
    "mean": (_terminal_mean, _terminal_mean_grad),
    "max": (_terminal_max, _terminal_max_grad),
}


@dataclass(frozen=True)
class Model:
    """schedule + invariant terminal; output F(x) = terminal(flow(x))."""

    schedule: Schedule
    terminal: str = "sum"

    def __post_init__(self) -> None:
        if self.terminal not in TERMINALS:
            raise ValueError(f"unknown terminal {self.terminal!r}")

    @property
    def group_spec(self) -> str:
        return self.schedule.group_spec

    @property
    def n(self) -> int:
        return self.schedule.n


def build_model(
    family: str,
    dims: int | Sequence[int],
    layer_count: int,
    seed: int = 0,
    activation: str = "tanh",
    terminal: str = "sum",
    duration: float = 1.0,
    steps_per_unit_time: int = 1,
    init_scale: float = 0.5,
    method: str = "euler",
) -> Model:
    """A model with ``layer_count`` segments of fixed duration, with
    parameters drawn uniformly from [-init_scale, init_scale]."""
    rng = substream(seed, "init", family)
    segments = tuple(
        (random_layer(family, dims, rng, activation=activation, scale=init_scale), duration)
        for _ in range(layer_count)
    )
    schedule = Schedule(segments, steps_per_unit_time=steps_per_unit_time, method=method)
    return Model(schedule=schedule, terminal=terminal)


def forward(model: Model, x: np.ndarray | Sequence[float]) -> np.ndarray:
    """terminal(integrate(schedule, x)); batched over leading axes."""
    x = np.asarray(x, dtype=float)
    if model.schedule.segments:
        y = integrate(model.schedule, x).y
    else:
        y = x
    return TERMINALS[model.terminal][0](y)


def loss(model: Model, target: TargetFunction, X: np.ndarray) -> tuple[float, float]:
    """Mean squared error and relative error sqrt(mse)/rms(target)."""
    X = np.asarray(X, dtype=float)
    pred = forward(model, X)
    truth = target(X)
    mse = float(np.mean((pred - truth) ** 2))
    rms = float(np.sqrt(np.mean(truth**2)))
    rel = float(np.sqrt(mse) / rms) if rms > 0 else float("inf")
    return mse, rel


@dataclass(frozen=True)
class TrainConfig:
    kappa: float = 1.0
    train_samples: int = 4096
    test_samples: int = 10_000
    learning_rate: float = 1e-2
    momentum: float = 0.9
    iterations: int = 5000
    seed: int = 0
    log_every: int = 100

    def __post_init__(self) -> None:
        if self.train_samples < 1 or self.test_samples < 1 or self.iterations < 0:
            raise ValueError("counts must be positive")
        for v in (self.kappa, self.learning_rate, self.momentum):
            if not np.isfinite(v):
                raise ValueError("non-finite hyperparameter")


@dataclass
class HistoryRow:
    iteration: int
    train_loss: float
    test_loss: float
    rel_err: float

    def as_csv(self) -> str:
        return f"{self.iteration},{self.train_loss!r},{self.test_loss!r},{self.rel_err!r}"


def _model_with_thetas(model: Model, thetas: list[np.ndarray]) -> Model:
    # replace() skips make_layer validation; the trainer only moves finite
    # parameters, and divergence is caught by the loss guard
    segments = tuple(
        (replace(layer, theta=tuple(theta)), tau)
        for (layer, tau), theta in zip(model.schedule.segments, thetas)
    )
    return Model(
        schedule=replace(model.schedule, segments=segments),
        terminal=model.terminal,
    )


def fit_arrays(
    model: Model,
    X: np.ndarray,
    y: np.ndarray,
    X_test: np.ndarray | None = None,
    y_test: np.ndarray | None = None,
    learning_rate: float = 1e-2,
    momentum: float = 0.9,
    iterations: int = 5000,
    log_every: int = 100,
) -> tuple[Model, list[HistoryRow]]:
    """Full-batch gradient descent with momentum on the schedule parameters.

    Deterministic given its inputs; the loss is the discrete L2 error on
    the provided samples.  Divergence (loss above 1e8 or non-finite)
    aborts with a diagnostic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sched = model.schedule
    term_fn, term_grad = TERMINALS[model.terminal]
    thetas = [np.array(layer.theta, dtype=float) for layer, _ in sched.segments]
    velocity = [np.zeros_like(th) for th in thetas]
    history: list[HistoryRow] = []
    batch = X.shape[0]

    y_rms = float(np.sqrt(np.mean(np.asarray(y_test if y_test is not None else y) ** 2)))

    def test_metrics(m: Model) -> tuple[float, float]:
        if X_test is None:
            return float("nan"), float("nan")
        pred = forward(m, X_test)
        mse = float(np.mean((pred - y_test) ** 2))
        rel = float(np.sqrt(mse) / y_rms) if y_rms > 0 else float("inf")
        return mse, rel

    current = _model_with_thetas(model, thetas)
    for it in range(iterations):
        sched_it = current.schedule
        res = integrate(sched_it, X, record=True)
        pred = term_fn(res.y)
        resid = pred - y
        train_loss = float(np.mean(resid**2))
        if not np.isfinite(train_loss) or train_loss > DIVERGENCE_LIMIT:
            raise TrainingDivergedError(it, train_loss)
        if it % log_every == 0:
            test_loss, rel = test_metrics(current)
            history.append(HistoryRow(it, train_loss, test_loss, rel))
        cot = (2.0 / batch) * resid[..., None] * term_grad(res.y)
        grads, _ = flow_backward(sched_it, res.trajectory, cot)
        for th, vel, g in zip(thetas, velocity, grads):
            vel *= momentum
            vel -= learning_rate * g
            th += vel
        current = _model_with_thetas(model, thetas)

    pred = forward(current, X)
    train_loss = float(np.mean((pred - y) ** 2))
    test_loss, rel = test_metrics(current)
    history.append(HistoryRow(iterations, train_loss, test_loss, rel))
    return current, history


def sample_domain(n: int, count: int, kappa: float, seed: int, label: str) -> np.ndarray:
    """Uniform samples from the cube [-kappa, kappa]^n."""
    rng = substream(seed, "samples", label)
    return rng.uniform(-kappa, kappa, size=(count, n))


def train(
    model: Model, target: TargetFunction, config: TrainConfig
) -> tuple[Model, list[HistoryRow]]:
    """Train against a registered target on the cube [-kappa, kappa]^n.

    Train and test sets come from disjoint substreams of the config seed,
    so identical configs reproduce identical histories bit for bit.
    """
    n = model.n
    if target.n != n:
        raise ValueError("target degree does not match model")
    X = sample_domain(n, config.train_samples, config.kappa, config.seed, "train")
    X_test = sample_domain(n, config.test_samples, config.kappa, config.seed, "test")
    return fit_arrays(
        model,
        X,
        target(X),
        X_test,
        target(X_test),
        learning_rate=config.learning_rate,
        momentum=config.momentum,
        iterations=config.iterations,
        log_every=config.log_every,
    )
