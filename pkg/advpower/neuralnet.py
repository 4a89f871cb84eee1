# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Dense feedforward power-allocation networks with reverse-mode gradients and Adam.

A model maps the 2KL raw UE coordinates (m) of the network to the K powers of one cell
plus their sum (mW). Input standardization and output scaling are fixed affine stages
inside the model, so input gradients are per meter and outputs are in mW. The last
layer is a frozen sum head [I_K | 1], so output K+1 always equals the sum of the first
K outputs and only the layers before it are trained.
"""

from dataclasses import asdict, dataclass, fields
import json

from more_itertools import chunked
import numpy as np
import pandas as pd
from tqdm import tqdm

from . import helpers
from .utils import (
    CheckpointError,
    InvalidConfigError,
    TrainingDivergedError,
    check_finite,
    check_positive,
    check_unknown_keys,
)

CHECKPOINT_FORMAT = "advpower-checkpoint"
ACTIVATIONS = ("elu", "linear")

# Hidden widths before the K-wide elu layer and the frozen sum head.
ARCHITECTURES = {
    "M1": (64, 32, 32, 32),
    "M2": (512, 256, 128, 128),
}


@dataclass(frozen=True)
class LayerSpec:
    """Dense layer width and activation. Frozen layers are sum heads."""

    width: int
    activation: str = "elu"
    trainable: bool = True

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1:
            raise ValueError(
                f"Value passed to 'width' must be a positive integer, got {self.width}."
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"Value passed to 'activation' must be one of {ACTIVATIONS}."
            )


@dataclass(frozen=True)
class TrainConfig:
    """Adam and early-stopping settings."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        check_positive("learning_rate", self.learning_rate)
        check_positive("adam_eps", self.adam_eps)
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidConfigError(
                    f"Value passed to '{name}' must lie in (0, 1), got {getattr(self, name)}."
                )
        for name in ("batch_size", "max_epochs", "patience"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidConfigError(
                    f"Value passed to '{name}' must be a positive integer, got {value}."
                )
        check_positive("seed", self.seed, allow_zero=True)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        check_unknown_keys("train", data, [f.name for f in fields(cls)])
        return cls(**data)


class ModelParams:
    """Layer stack, weights and the fixed input/output affines of one per-cell model.

    Arguments:
        layers (list): LayerSpecs from the first hidden layer to the output layer
        weights (list): (in, out) weight matrices
        biases (list): (out,) bias vectors
        input_mean (ndarray): (2KL,) position mean subtracted from inputs
        input_std (ndarray): (2KL,) position std dividing inputs
        output_scale (ndarray): (K+1,) scale of the outputs, Pmax for power models
        output_offset (ndarray): (K+1,) offset added after scaling
        cell_index (int): cell whose powers the model predicts
        arch (str): architecture tag
        config_hash (str): hash of the NetworkConfig the model was built for
    """

    def __init__(
        self,
        layers,
        weights,
        biases,
        input_mean,
        input_std,
        output_scale,
        output_offset,
        cell_index=0,
        arch="custom",
        config_hash="",
    ):
        self.layers = list(layers)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.input_mean = np.asarray(input_mean, dtype=np.float64)
        self.input_std = np.asarray(input_std, dtype=np.float64)
        self.output_scale = np.asarray(output_scale, dtype=np.float64)
        self.output_offset = np.asarray(output_offset, dtype=np.float64)
        self.cell_index = int(cell_index)
        self.arch = arch
        self.config_hash = config_hash
        self._check_dims()

    def _check_dims(self):
        in_dim = self.input_dim
        for i, (spec, w, b) in enumerate(zip(self.layers, self.weights, self.biases)):
            if w.shape != (in_dim, spec.width) or b.shape != (spec.width,):
                raise ValueError(
                    f"Layer {i} has weights {w.shape} and biases {b.shape}, "
                    f"expected {(in_dim, spec.width)} and {(spec.width,)}."
                )
            in_dim = spec.width
        if self.input_std.shape != (self.input_dim,) or np.any(self.input_std <= 0):
            raise ValueError("Input std must be positive with one entry per input.")
        shapes = (self.output_scale.shape, self.output_offset.shape)
        if shapes != ((in_dim,), (in_dim,)):
            raise ValueError("Output affine must have one entry per output.")

    @property
    def input_dim(self):
        return len(self.input_mean)

    @property
    def output_dim(self):
        return self.layers[-1].width

    @property
    def n_powers(self):
        """K, the number of power outputs before the sum output."""
        return self.output_dim - 1

    @property
    def n_trainable(self):
        return sum(
            w.size + b.size
            for spec, w, b in zip(self.layers, self.weights, self.biases)
            if spec.trainable
        )

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return ModelParams(
            self.layers,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.input_mean.copy(),
            self.input_std.copy(),
            self.output_scale.copy(),
            self.output_offset.copy(),
            cell_index=self.cell_index,
            arch=self.arch,
            config_hash=self.config_hash,
        )

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return False
        arrays = ("input_mean", "input_std", "output_scale", "output_offset")
        return (
            self.layers == other.layers
            and self.cell_index == other.cell_index
            and self.arch == other.arch
            and self.config_hash == other.config_hash
            and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
            and all(np.array_equal(u, v) for u, v in zip(self.weights, other.weights))
            and all(np.array_equal(u, v) for u, v in zip(self.biases, other.biases))
        )

    def model_hash(self):
        return helpers._hash_arrays(
            *self.weights,
            *self.biases,
            self.input_mean,
            self.input_std,
            self.output_scale,
            self.output_offset,
        )

    def to_checkpoint(self, path):
        """Write a '#' JSON header line, then every weight and bias in long form.

        The table has columns array, row, col and value. Biases are stored as row 0 and
        values carry 17 significant digits, so a reload is bit-exact.
        """
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": 2,
            "arch": self.arch,
            "cell_index": self.cell_index,
            "config_hash": self.config_hash,
            "input_dim": self.input_dim,
            "layers": [asdict(spec) for spec in self.layers],
            "input_mean": [float(v) for v in self.input_mean],
            "input_std": [float(v) for v in self.input_std],
            "output_scale": [float(v) for v in self.output_scale],
            "output_offset": [float(v) for v in self.output_offset],
        }
        frames = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            frames.append(_long_form(f"W{i}", w))
            frames.append(_long_form(f"b{i}", b[None, :]))
        with open(path, "w") as f:
            f.write("# " + json.dumps(header, sort_keys=True) + "\n")
            pd.concat(frames, ignore_index=True).to_csv(
                f, index=False, float_format="%.17g"
            )

    @staticmethod
    def from_checkpoint(path):
        with open(path) as f:
            first = f.readline()
        try:
            header = json.loads(first[1:]) if first.startswith("#") else None
        except json.JSONDecodeError:
            header = None
        if not isinstance(header, dict):
            raise CheckpointError(f"{path} does not start with a checkpoint header.")
        if header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not an {CHECKPOINT_FORMAT} file.")
        try:
            table = pd.read_csv(path, comment="#", float_precision="round_trip")
            groups = dict(tuple(table.groupby("array", sort=False)))
        except (pd.errors.EmptyDataError, KeyError):
            raise CheckpointError(f"{path} has no parameter table.")
        layers = [LayerSpec(**spec) for spec in header["layers"]]
        weights, biases = [], []
        in_dim = header["input_dim"]
        for i, spec in enumerate(layers):
            try:
                weights.append(_from_long_form(groups[f"W{i}"], (in_dim, spec.width)))
                biases.append(_from_long_form(groups[f"b{i}"], (1, spec.width))[0])
            except (KeyError, ValueError, IndexError):
                raise CheckpointError(f"{path} has missing or malformed layer {i}.")
            in_dim = spec.width
        return ModelParams(
            layers,
            weights,
            biases,
            header["input_mean"],
            header["input_std"],
            header["output_scale"],
            header["output_offset"],
            cell_index=header["cell_index"],
            arch=header["arch"],
            config_hash=header["config_hash"],
        )


def _long_form(name, arr):
    rows, cols = np.indices(arr.shape)
    return pd.DataFrame(
        {
            "array": name,
            "row": rows.ravel(),
            "col": cols.ravel(),
            "value": arr.ravel(),
        }
    )


def _from_long_form(group, shape):
    if len(group) != shape[0] * shape[1]:
        raise ValueError(f"Expected {shape[0] * shape[1]} entries, got {len(group)}.")
    arr = np.full(shape, np.nan)
    arr[group["row"].to_numpy(), group["col"].to_numpy()] = group["value"].to_numpy()
    if np.isnan(arr).any():
        raise ValueError("Parameter table has repeated or missing entries.")
    return arr


def _sum_head(width_in):
    return np.hstack([np.eye(width_in), np.ones((width_in, 1))])


def _glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def build_model(
    input_dim,
    layers,
    seed,
    input_mean=None,
    input_std=None,
    output_scale=1.0,
    output_offset=0.0,
    cell_index=0,
    arch="custom",
    config_hash="",
):
    """Glorot-uniform initialized model for an arbitrary layer stack.

    Trainable layers get Glorot-uniform weights and zero biases. A frozen layer must
    be one wider than its input and is set to the sum head [I | 1] with zero bias.

    Arguments:
        input_dim (int): number of raw inputs
        layers (list): LayerSpecs
        seed (int): initialization seed
        input_mean (ndarray, optional): defaults to zeros
        input_std (ndarray, optional): defaults to ones
        output_scale (float or ndarray): output scale
        output_offset (float or ndarray): output offset
        cell_index (int): cell the model predicts
        arch (str): architecture tag
        config_hash (str): NetworkConfig hash

    Returns:
        (ModelParams): the initialized model
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    in_dim = input_dim
    for spec in layers:
        if spec.trainable:
            weights.append(_glorot_uniform(rng, in_dim, spec.width))
        else:
            if spec.width != in_dim + 1:
                raise ValueError(
                    f"Frozen sum head must have width {in_dim + 1}, got {spec.width}."
                )
            weights.append(_sum_head(in_dim))
        biases.append(np.zeros(spec.width))
        in_dim = spec.width
    return ModelParams(
        layers,
        weights,
        biases,
        np.zeros(input_dim) if input_mean is None else input_mean,
        np.ones(input_dim) if input_std is None else input_std,
        np.broadcast_to(np.asarray(output_scale, dtype=np.float64), (in_dim,)).copy(),
        np.broadcast_to(np.asarray(output_offset, dtype=np.float64), (in_dim,)).copy(),
        cell_index=cell_index,
        arch=arch,
        config_hash=config_hash,
    )


def arch_layers(arch, n_ues, hidden=None):
    """Layer stack of an architecture: hidden elu layers, K-wide elu, frozen sum head."""
    arch = arch.upper()
    if hidden is None:
        if arch not in ARCHITECTURES:
            raise ValueError(
                f"Value passed to 'arch' must be one of {sorted(ARCHITECTURES)}."
            )
        hidden = ARCHITECTURES[arch]
    return (
        [LayerSpec(w, "elu") for w in hidden]
        + [LayerSpec(n_ues, "elu")]
        + [LayerSpec(n_ues + 1, "linear", trainable=False)]
    )


def build_arch(arch, config, stats, cell_index, seed, hidden=None):
    """Model of architecture M1 or M2 for one cell.

    Arguments:
        arch (str): "M1" or "M2"
        config (NetworkConfig): network constants
        stats (NormalizationStats): input standardization and power scale
        cell_index (int): cell the model predicts
        seed (int): initialization seed
        hidden (tuple, optional): replace the hidden widths, e.g. for reduced tests

    Returns:
        (ModelParams): the initialized model
    """
    return build_model(
        config.input_dim,
        arch_layers(arch, config.n_ues, hidden),
        seed,
        input_mean=stats.mean,
        input_std=stats.std,
        output_scale=stats.power_scale,
        cell_index=cell_index,
        arch=arch.upper(),
        config_hash=config.config_hash(),
    )


def _elu(t):
    return np.where(t >= 0, t, np.expm1(np.minimum(t, 0.0)))


def _elu_grad(t):
    # right derivative at 0
    return np.where(t >= 0, 1.0, np.exp(np.minimum(t, 0.0)))


def _forward_cache(model, x):
    """Head output before the output affine, with layer inputs and pre-activations."""
    h = (x - model.input_mean) / model.input_std
    acts, pres = [h], []
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        s = h @ w + b
        pres.append(s)
        h = _elu(s) if spec.activation == "elu" else s
        acts.append(h)
    return h, acts, pres


def _backward(model, acts, pres, grad_head, params=True):
    """Backpropagate a gradient at the head output.

    Returns:
        (tuple): weight and bias gradients (None for frozen layers) and the gradient
            with respect to the standardized input
    """
    n = len(model.layers)
    grads_w, grads_b = [None] * n, [None] * n
    delta = grad_head
    for i in reversed(range(n)):
        if model.layers[i].activation == "elu":
            delta = delta * _elu_grad(pres[i])
        if params and model.layers[i].trainable:
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
    return grads_w, grads_b, delta


def _as_batch(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    check_finite(name, x)
    return np.atleast_2d(x), x.ndim == 1


def forward(model, x):
    """All K+1 outputs in mW for one input or a batch of inputs.

    Arguments:
        model (ModelParams): the model
        x (ndarray): (2KL,) or (N, 2KL) raw positions in meters

    Returns:
        (ndarray): (K+1,) or (N, K+1) outputs
    """
    batch, single = _as_batch(x)
    head, _, _ = _forward_cache(model, batch)
    out = head * model.output_scale + model.output_offset
    return out[0] if single else out


def predict_powers(model, x, clamp=True):
    """First K outputs in mW, clamped below at 0 unless clamp is False."""
    powers = forward(model, x)[..., : model.n_powers]
    return np.maximum(powers, 0.0) if clamp else powers


def _scaled_targets(model, targets):
    return (np.atleast_2d(targets) - model.output_offset) / model.output_scale


def evaluate_loss(model, x, targets):
    """Mean squared error over all K+1 outputs in output-scaled units."""
    batch, _ = _as_batch(x)
    head, _, _ = _forward_cache(model, batch)
    return float(np.mean((head - _scaled_targets(model, targets)) ** 2))


def param_gradients(model, x, targets):
    """Loss and exact gradients of the scaled MSE with respect to the parameters.

    Arguments:
        model (ModelParams): the model
        x (ndarray): (N, 2KL) raw positions, N >= 1
        targets (ndarray): (N, K+1) targets in mW, K powers and their sum

    Returns:
        (tuple): loss, weight gradients and bias gradients (None for frozen layers)
    """
    batch, _ = _as_batch(x)
    if len(batch) == 0:
        raise ValueError("Value passed to 'x' must be a nonempty batch.")
    head, acts, pres = _forward_cache(model, batch)
    residual = head - _scaled_targets(model, targets)
    loss = float(np.mean(residual**2))
    grads_w, grads_b, _ = _backward(model, acts, pres, 2.0 * residual / residual.size)
    return loss, grads_w, grads_b


def input_gradient(model, x):
    """Gradient of the summed first K outputs (mW) with respect to raw inputs (m).

    Arguments:
        model (ModelParams): the model
        x (ndarray): (2KL,) or (N, 2KL) raw positions

    Returns:
        (ndarray): gradients in mW per meter with the shape of x
    """
    batch, single = _as_batch(x)
    head, acts, pres = _forward_cache(model, batch)
    grad_head = np.zeros_like(head)
    grad_head[:, : model.n_powers] = model.output_scale[: model.n_powers]
    _, _, grad_z = _backward(model, acts, pres, grad_head, params=False)
    grad_x = grad_z / model.input_std
    return grad_x[0] if single else grad_x


def _adam_update(param, grad, m, v, step, tc):
    m *= tc.beta1
    m += (1 - tc.beta1) * grad
    v *= tc.beta2
    v += (1 - tc.beta2) * grad**2
    m_hat = m / (1 - tc.beta1**step)
    v_hat = v / (1 - tc.beta2**step)
    param -= tc.learning_rate * m_hat / (np.sqrt(v_hat) + tc.adam_eps)


def train(model, train_split, val_split, tc, disable_tqdm=True):
    """Adam on the scaled MSE with validation-based early stopping.

    The shuffle order is drawn from (tc.seed, "shuffle", cell_index). Training stops
    once the validation loss has not improved for tc.patience epochs, and the snapshot
    with the lowest validation loss is returned.

    Arguments:
        model (ModelParams): initial model, not modified
        train_split (tuple): (x, targets) arrays, x in meters and targets in mW
        val_split (tuple): (x, targets) arrays
        tc (TrainConfig): optimizer settings
        disable_tqdm (bool): disable the epoch progress bar

    Returns:
        (tuple): best model and a history DataFrame with columns epoch, train_loss,
            val_loss and best_val_loss
    """
    x, y = (np.asarray(a, dtype=np.float64) for a in train_split)
    x_val, y_val = (np.asarray(a, dtype=np.float64) for a in val_split)
    if len(x) == 0 or len(x_val) == 0:
        raise ValueError("Training and validation splits must be nonempty.")
    check_finite("train_split", x)
    check_finite("val_split", x_val)

    model = model.copy()
    rng = np.random.default_rng(
        helpers._derive_seed(tc.seed, "shuffle", model.cell_index)
    )
    trainable = [i for i, spec in enumerate(model.layers) if spec.trainable]
    moments = {
        i: [np.zeros_like(model.weights[i]) for _ in range(2)]
        + [np.zeros_like(model.biases[i]) for _ in range(2)]
        for i in trainable
    }

    best_model, best_loss = model.copy(), np.inf
    stall = 0
    step = 0
    history = []
    for epoch in tqdm(range(1, tc.max_epochs + 1), desc="train", disable=disable_tqdm):
        for batch in chunked(rng.permutation(len(x)), tc.batch_size):
            idx = np.asarray(batch)
            loss, grads_w, grads_b = param_gradients(model, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"Training loss became {loss} at epoch {epoch}, step {step + 1}."
                )
            step += 1
            for i in trainable:
                m_w, v_w, m_b, v_b = moments[i]
                _adam_update(model.weights[i], grads_w[i], m_w, v_w, step, tc)
                _adam_update(model.biases[i], grads_b[i], m_b, v_b, step, tc)

        train_loss = evaluate_loss(model, x, y)
        val_loss = evaluate_loss(model, x_val, y_val)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingDivergedError(
                f"Loss became non-finite at epoch {epoch}: train {train_loss}, val {val_loss}."
            )
        if val_loss < best_loss:
            best_model, best_loss = model.copy(), val_loss
            stall = 0
        else:
            stall += 1
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "best_val_loss": best_loss,
            }
        )
        if stall >= tc.patience:
            break

    return best_model, pd.DataFrame(history)


def train_cells(
    arch, config, stats, train_sets, val_sets, tc, hidden=None, disable_tqdm=True
):
    """Build and train one model per cell.

    Cell j is initialized from (tc.seed, "init", j) and trained on train_sets[j].

    Arguments:
        arch (str): "M1" or "M2"
        config (NetworkConfig): network constants
        stats (NormalizationStats): train-split statistics
        train_sets (list): per-cell (x, targets) training pairs
        val_sets (list): per-cell (x, targets) validation pairs
        tc (TrainConfig): optimizer settings
        hidden (tuple, optional): replace the hidden widths
        disable_tqdm (bool): disable the progress bars

    Returns:
        (tuple): list of models and list of history DataFrames, indexed by cell
    """
    models, histories = [], []
    for cell in range(config.n_cells):
        init = build_arch(
            arch,
            config,
            stats,
            cell,
            helpers._derive_seed(tc.seed, "init", cell),
            hidden=hidden,
        )
        model, history = train(
            init, train_sets[cell], val_sets[cell], tc, disable_tqdm=disable_tqdm
        )
        history.insert(0, "cell", cell)
        models.append(model)
        histories.append(history)
    return models, histories
