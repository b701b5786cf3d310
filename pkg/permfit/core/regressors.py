"""
Reference regressors: affine least squares (OLS) and a ReLU multilayer perceptron.

Both expose the same fit/predict contract so the permutation engine can refit
either one on every permuted sample with identical hyperparameters.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionMismatch, DivergedTraining
from .models import Dataset

logger = logging.getLogger(__name__)

OLS = "ols"
MLP = "mlp"
MODEL_KINDS = (OLS, MLP)


@dataclass(frozen=True)
class RegressorSpec:
    """A model class plus its training configuration. OLS ignores every mlp_* field."""
    kind: str = OLS
    mlp_layers: Tuple[int, ...] = (30, 30, 30)
    mlp_epochs: int = 500
    mlp_learning_rate: float = 0.01
    # Fixed for both reference regressors
    activation: str = field(default="relu", init=False)
    loss: str = field(default="squared_error", init=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"Unknown model kind '{self.kind}', expected one of {MODEL_KINDS}.")
        object.__setattr__(self, "mlp_layers", tuple(int(w) for w in self.mlp_layers))
        if self.kind == MLP:
            if not self.mlp_layers or any(w < 1 for w in self.mlp_layers):
                raise ConfigError(f"Hidden layer widths must be positive, got {self.mlp_layers}.")
            if int(self.mlp_epochs) != self.mlp_epochs or self.mlp_epochs < 1:
                raise ConfigError(f"mlp_epochs must be a positive integer, got {self.mlp_epochs}.")
            if not self.mlp_learning_rate > 0:
                raise ConfigError(f"mlp_learning_rate must be positive, got {self.mlp_learning_rate}.")

    def describe(self) -> str:
        if self.kind == OLS:
            return "OLS"
        widths = ",".join(str(w) for w in self.mlp_layers)
        return f"MLP({widths})"

    def to_dict(self) -> dict:
        if self.kind == OLS:
            return {"kind": OLS}
        return {"kind": MLP, "mlp_layers": list(self.mlp_layers),
                "mlp_epochs": self.mlp_epochs, "mlp_learning_rate": self.mlp_learning_rate}


@dataclass(frozen=True, eq=False)
class FittedModel:
    """
    A trained member of the model class.
    OLS parameters are [intercept, beta_1..beta_d]. MLP parameters are the
    weights and biases of every layer, flattened layer by layer (W then b).
    """
    kind: str
    parameters: np.ndarray
    n_features: int
    layer_sizes: Tuple[int, ...] = ()
    x_mean: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None
    y_mean: float = 0.0
    y_scale: float = 1.0
    initial_loss: float = float("nan")
    final_loss: float = float("nan")

    @property
    def intercept(self) -> float:
        if self.kind != OLS:
            raise AttributeError("Only OLS models have a single intercept.")
        return float(self.parameters[0])

    @property
    def coefficients(self) -> np.ndarray:
        if self.kind != OLS:
            raise AttributeError("Only OLS models have linear coefficients.")
        return self.parameters[1:]


# --- Ordinary least squares ---

def ols_fit(data: Dataset) -> FittedModel:
    """
    Minimum-norm least-squares fit of [1 | X] theta ~ y.
    Uses a complete orthogonal factorization with column pivoting (LAPACK gelsy),
    so rank-deficient designs resolve to the minimum-norm solution instead of failing.
    """
    design = np.column_stack([np.ones(data.n), data.predictors])
    cond = np.finfo(np.float64).eps * max(design.shape)
    theta, _, rank, _ = scipy.linalg.lstsq(design, data.responses, cond=cond,
                                           lapack_driver="gelsy", check_finite=False)
    if rank < design.shape[1]:
        logger.debug(f"Rank-deficient design (rank {rank} < {design.shape[1]}); using minimum-norm solution.")
    return FittedModel(kind=OLS, parameters=np.asarray(theta, dtype=np.float64), n_features=data.d)


# --- Multilayer perceptron ---

def _layer_shapes(layer_sizes: Tuple[int, ...]) -> List[Tuple[int, int]]:
    return [(layer_sizes[i], layer_sizes[i + 1]) for i in range(len(layer_sizes) - 1)]


def n_parameters(layer_sizes: Tuple[int, ...]) -> int:
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in _layer_shapes(layer_sizes))


def _unpack(parameters: np.ndarray, layer_sizes: Tuple[int, ...]) -> List[Tuple[np.ndarray, np.ndarray]]:
    layers = []
    offset = 0
    for fan_in, fan_out in _layer_shapes(layer_sizes):
        W = parameters[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = parameters[offset:offset + fan_out]
        offset += fan_out
        layers.append((W, b))
    if offset != parameters.size:
        raise DimensionMismatch(f"Expected {offset} parameters for layers {layer_sizes}, got {parameters.size}.")
    return layers


def init_parameters(layer_sizes: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    chunks = []
    for fan_in, fan_out in _layer_shapes(layer_sizes):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _forward(layers, X: np.ndarray):
    """Returns the network output and the (input, pre-activation) pair of every layer."""
    cache = []
    a = X
    z = X
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        cache.append((a, z))
        if i < len(layers) - 1:
            a = np.maximum(z, 0.0)
    return z[:, 0], cache


def mlp_loss_and_gradient(parameters: np.ndarray, layer_sizes: Tuple[int, ...],
                          X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error of the network on (X, y) and its gradient by backpropagation."""
    layers = _unpack(parameters, layer_sizes)
    out, cache = _forward(layers, X)
    residual = out - y
    loss = float(np.mean(residual ** 2))

    grads = [None] * len(layers)
    delta = (2.0 / X.shape[0]) * residual[:, None]
    for i in range(len(layers) - 1, -1, -1):
        a_in, _ = cache[i]
        W, _ = layers[i]
        grads[i] = (a_in.T @ delta, delta.sum(axis=0))
        if i > 0:
            _, z_prev = cache[i - 1]
            delta = (delta @ W.T) * (z_prev > 0.0)

    flat = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])
    return loss, flat


def _standardize_columns(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return mean, scale


def mlp_fit(data: Dataset, spec: RegressorSpec, fit_rng: np.random.Generator) -> FittedModel:
    """
    Trains the network by full-batch gradient descent for exactly spec.mlp_epochs steps.
    Predictors and responses are standardized internally; predict() undoes it.
    Deterministic given (data, spec, fit_rng state).
    """
    if spec.kind != MLP:
        raise ConfigError(f"mlp_fit needs an MLP spec, got '{spec.kind}'.")
    layer_sizes = (data.d,) + spec.mlp_layers + (1,)

    x_mean, x_scale = _standardize_columns(data.predictors)
    y_mean, y_scale = _standardize_columns(data.responses)
    X = (data.predictors - x_mean) / x_scale
    y = (data.responses - y_mean) / y_scale

    parameters = init_parameters(layer_sizes, fit_rng)
    initial_loss = None
    for epoch in range(spec.mlp_epochs):
        loss, grad = mlp_loss_and_gradient(parameters, layer_sizes, X, y)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergedTraining(f"Training loss became non-finite at epoch {epoch}.")
        if initial_loss is None:
            initial_loss = loss
        parameters = parameters - spec.mlp_learning_rate * grad

    final_loss, _ = mlp_loss_and_gradient(parameters, layer_sizes, X, y)
    if not np.isfinite(final_loss):
        raise DivergedTraining(f"Training loss became non-finite after {spec.mlp_epochs} epochs.")

    return FittedModel(kind=MLP, parameters=parameters, n_features=data.d, layer_sizes=layer_sizes,
                       x_mean=x_mean, x_scale=x_scale, y_mean=float(y_mean), y_scale=float(y_scale),
                       initial_loss=initial_loss, final_loss=final_loss)


# --- Shared contract ---

def fit(data: Dataset, spec: RegressorSpec, fit_rng: Optional[np.random.Generator] = None) -> FittedModel:
    """Fits the model class described by spec. fit_rng is only consumed by the MLP."""
    if spec.kind == OLS:
        return ols_fit(data)
    if fit_rng is None:
        raise ConfigError("MLP training needs a random stream for weight initialization.")
    return mlp_fit(data, spec, fit_rng)


def predict(model: FittedModel, predictors) -> np.ndarray:
    X = np.asarray(predictors, dtype=np.float64)
    if X.ndim == 1 and model.n_features == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"Model was trained on {model.n_features} predictors, got shape {X.shape}.")

    if model.kind == OLS:
        return model.parameters[0] + X @ model.parameters[1:]

    x_mean = model.x_mean if model.x_mean is not None else 0.0
    x_scale = model.x_scale if model.x_scale is not None else 1.0
    out, _ = _forward(_unpack(model.parameters, model.layer_sizes), (X - x_mean) / x_scale)
    return model.y_mean + model.y_scale * out
