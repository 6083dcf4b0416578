"""Scikit-learn style front end for the flow models.

``FlowRegressor`` duck-types the sklearn estimator protocol (``fit`` /
``predict`` / ``score`` / ``get_params`` / ``set_params``) without
depending on sklearn, so it can sit inside pipelines, grid searches and
cross-validation from the wider ecosystem.
"""

from __future__ import annotations

import inspect

import numpy as np

from .models import Model, build_model, fit_arrays, forward
from .validation import check_array, check_consistent_length, check_vector


class FlowRegressor:
    """Invariant scalar regressor built from an equivariant flow.

    Parameters
    ----------
    family : layer family tag (see eqflow.layers.CATALOG)
    n : input degree (for grid families pass ``dims`` instead)
    dims : grid shape for conv/product families, optional
    layer_count : number of residual layers (schedule segments)
    activation : relu | tanh | sigmoid
    terminal : sum | mean | max (fixed, not trained)
    learning_rate, momentum, iterations : gradient descent settings
    steps_per_unit_time : substeps per unit duration (1 = plain ResNet)
    init_scale : parameters start uniform in [-init_scale, init_scale]
    seed : controls initialization only; fitting itself is deterministic
    """

    def __init__(
        self,
        family: str = "conv1",
        n: int = 3,
        dims: tuple[int, ...] | None = None,
        layer_count: int = 20,
        activation: str = "tanh",
        terminal: str = "sum",
        learning_rate: float = 1e-2,
        momentum: float = 0.9,
        iterations: int = 5000,
        steps_per_unit_time: int = 1,
        init_scale: float = 0.5,
        log_every: int = 100,
        seed: int = 0,
    ):
        self.family = family
        self.n = n
        self.dims = dims
        self.layer_count = layer_count
        self.activation = activation
        self.terminal = terminal
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.iterations = iterations
        self.steps_per_unit_time = steps_per_unit_time
        self.init_scale = init_scale
        self.log_every = log_every
        self.seed = seed

    # -- sklearn protocol ---------------------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "FlowRegressor":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for FlowRegressor")
            setattr(self, key, value)
        return self

    # -- fitting ------------------------------------------------------------

    def _build(self) -> Model:
        dims = self.dims if self.dims is not None else self.n
        return build_model(
            self.family,
            dims,
            self.layer_count,
            seed=self.seed,
            activation=self.activation,
            terminal=self.terminal,
            steps_per_unit_time=self.steps_per_unit_time,
            init_scale=self.init_scale,
        )

    def fit(self, X, y, X_val=None, y_val=None) -> "FlowRegressor":
        X = check_array(X)
        y = check_vector(y)
        check_consistent_length(X, y)
        model = self._build()
        if X.shape[1] != model.n:
            raise ValueError(f"X has {X.shape[1]} features, model expects {model.n}")
        if X_val is not None:
            X_val = check_array(X_val, "X_val")
            y_val = check_vector(y_val, "y_val")
            check_consistent_length(X_val, y_val)
        self.model_, self.history_ = fit_arrays(
            model,
            X,
            y,
            X_val,
            y_val,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            iterations=self.iterations,
            log_every=self.log_every,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise RuntimeError("this FlowRegressor is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, fit saw {self.n_features_in_}")
        return forward(self.model_, X)

    def score(self, X, y) -> float:
        """Coefficient of determination R^2, the sklearn convention."""
        y = check_vector(y)
        pred = self.predict(X)
        check_consistent_length(np.atleast_2d(pred).T, y)
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    def relative_error(self, X, y) -> float:
        """sqrt(MSE) / rms(y), the error measure used by the experiments."""
        y = check_vector(y)
        pred = self.predict(X)
        return float(np.sqrt(np.mean((pred - y) ** 2)) / np.sqrt(np.mean(y**2)))
