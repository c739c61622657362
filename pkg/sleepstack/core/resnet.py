"""
Residual 1D ConvNet driven by a declarative architecture table

The table (sleepstack/data/architecture.csv) lists one row per layer with its
output width, channels, parameter count, kernel size and input layer names.
The model is wired from the table alone and checks every row's shape and
parameter count while it is built.
"""

import csv
import hashlib
import io
import logging
import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .errors import BadInputWidth, ShapeMismatch, UsageError

logger = logging.getLogger(__name__)

ARCHITECTURE_CSV = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data", "architecture.csv")
CSV_COLUMNS = ["name", "kind", "width", "channels", "params", "kernel", "inputs"]


@dataclass(frozen=True)
class LayerRow:
    name: str
    kind: str
    width: int
    channels: int
    params: int
    kernel: Optional[int]
    inputs: Tuple[str, ...]


@dataclass(frozen=True)
class ArchitectureSpec:
    rows: Tuple[LayerRow, ...]

    @classmethod
    def load(cls, path: Optional[str] = None) -> "ArchitectureSpec":
        with open(path or ARCHITECTURE_CSV, "r", encoding="utf-8", newline="") as f:
            return cls.from_csv_text(f.read())

    @classmethod
    def from_csv_text(cls, text: str) -> "ArchitectureSpec":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != CSV_COLUMNS:
            raise UsageError(f"Architecture table columns must be {','.join(CSV_COLUMNS)}")
        rows = []
        for record in reader:
            rows.append(
                LayerRow(
                    name=record["name"],
                    kind=record["kind"],
                    width=int(record["width"]),
                    channels=int(record["channels"]),
                    params=int(record["params"]),
                    kernel=int(record["kernel"]) if record["kernel"] else None,
                    inputs=tuple(n for n in record["inputs"].split(";") if n),
                )
            )
        if not rows or rows[0].kind != "InputLayer":
            raise UsageError("Architecture table must start with an InputLayer row")
        return cls(rows=tuple(rows))

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow(
                [r.name, r.kind, r.width, r.channels, r.params,
                 "" if r.kernel is None else r.kernel, ";".join(r.inputs)]
            )
        return out.getvalue()

    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).digest()

    def row(self, name: str) -> LayerRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def input_width(self) -> int:
        return self.rows[0].width

    @property
    def num_classes(self) -> int:
        return self.rows[-1].width

    def with_classes(self, num_classes: int) -> "ArchitectureSpec":
        """Same network with the output layer resized"""
        last = self.rows[-1]
        if last.kind != "Dense":
            raise UsageError("Architecture table must end with a Dense row")
        features = self.row(last.inputs[0]).width
        dense = replace(last, width=num_classes, params=features * num_classes + num_classes)
        return ArchitectureSpec(rows=self.rows[:-1] + (dense,))

    def conv_counts(self) -> Tuple[int, int]:
        """(body convolutions with kernel > 1, 1x1 shortcut convolutions)"""
        convs = [r for r in self.rows if r.kind == "Conv1D"]
        shortcut = sum(1 for r in convs if r.kernel == 1)
        return len(convs) - shortcut, shortcut


class Layer:
    """One table row; caches what backward needs only in training mode"""

    def __init__(self, row: LayerRow):
        self.row = row
        self.name = row.name
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def forward(self, inputs: List[np.ndarray], train: bool, rng) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> List[np.ndarray]:
        raise NotImplementedError

    def state(self) -> Dict[str, np.ndarray]:
        """Non-trainable tensors that belong in a checkpoint"""
        return {}

    def param_count(self) -> int:
        tensors = list(self.params.values()) + list(self.state().values())
        return int(sum(t.size for t in tensors))

    def clear(self) -> None:
        pass


class InputLayer(Layer):
    def forward(self, inputs, train, rng):
        return inputs[0]

    def backward(self, grad):
        return []


class Conv1DLayer(Layer):
    def __init__(self, row: LayerRow, in_channels: int, rng: np.random.Generator):
        super().__init__(row)
        kernel = row.kernel
        weight_count = kernel * in_channels * row.channels
        if row.params == weight_count:
            self.has_bias = False
        elif row.params == weight_count + row.channels:
            self.has_bias = True
        else:
            raise ShapeMismatch(
                f"{row.name}: {row.params} params fit neither {weight_count} nor {weight_count + row.channels}"
            )
        self.params["weights"] = nn.he_normal(
            rng, (kernel, in_channels, row.channels), fan_in=kernel * in_channels
        )
        if self.has_bias:
            self.params["bias"] = np.zeros(row.channels)
        self._x = None

    def forward(self, inputs, train, rng):
        x = inputs[0]
        if train:
            self._x = x
        return nn.conv1d_forward(x, self.params["weights"], self.params.get("bias"))

    def backward(self, grad):
        grad_x, grad_w, grad_b = nn.conv1d_backward(
            self._x, self.params["weights"], grad, has_bias=self.has_bias
        )
        self.grads["weights"] = grad_w
        if self.has_bias:
            self.grads["bias"] = grad_b
        return [grad_x]

    def clear(self):
        self._x = None


class BatchNormLayer(Layer):
    def __init__(self, row: LayerRow, epsilon: float, momentum: float):
        super().__init__(row)
        self.norm = nn.NormState.fresh(row.channels, epsilon=epsilon, momentum=momentum)
        self._cache = None

    def forward(self, inputs, train, rng):
        y, self.norm, cache = nn.batchnorm_forward(inputs[0], self.norm, train)
        if train:
            self._cache = cache
        return y

    def backward(self, grad):
        return [nn.batchnorm_backward(grad, self._cache)]

    def state(self):
        return self.norm.tensors()

    def clear(self):
        self._cache = None


class ScaleLayer(Layer):
    def __init__(self, row: LayerRow):
        super().__init__(row)
        self.params["gamma"] = np.ones(row.channels)
        self.params["beta"] = np.zeros(row.channels)
        self._x = None

    def forward(self, inputs, train, rng):
        if train:
            self._x = inputs[0]
        return nn.scale_forward(inputs[0], self.params["gamma"], self.params["beta"])

    def backward(self, grad):
        grad_x, grad_gamma, grad_beta = nn.scale_backward(self._x, self.params["gamma"], grad)
        self.grads["gamma"] = grad_gamma
        self.grads["beta"] = grad_beta
        return [grad_x]

    def clear(self):
        self._x = None


class ActivationLayer(Layer):
    def __init__(self, row: LayerRow):
        super().__init__(row)
        self._x = None

    def forward(self, inputs, train, rng):
        if train:
            self._x = inputs[0]
        return nn.relu(inputs[0])

    def backward(self, grad):
        return [nn.relu_backward(self._x, grad)]

    def clear(self):
        self._x = None


class DropoutLayer(Layer):
    def __init__(self, row: LayerRow, keep_prob: float):
        super().__init__(row)
        self.keep_prob = keep_prob
        self._mask = None

    def forward(self, inputs, train, rng):
        y, mask = nn.dropout(inputs[0], self.keep_prob, train, rng)
        if train:
            self._mask = mask
        return y

    def backward(self, grad):
        return [nn.dropout_backward(self._mask, grad)]

    def clear(self):
        self._mask = None


class AddLayer(Layer):
    def forward(self, inputs, train, rng):
        return nn.residual_add(inputs[0], inputs[1])

    def backward(self, grad):
        return [grad, grad]


class MaxPoolingLayer(Layer):
    def __init__(self, row: LayerRow):
        super().__init__(row)
        self._argmax = None
        self._width = None

    def forward(self, inputs, train, rng):
        y, argmax = nn.maxpool_forward(inputs[0])
        if train:
            self._argmax, self._width = argmax, inputs[0].shape[1]
        return y

    def backward(self, grad):
        return [nn.maxpool_backward(self._argmax, grad, self._width)]

    def clear(self):
        self._argmax = None


class FlattenLayer(Layer):
    def __init__(self, row: LayerRow):
        super().__init__(row)
        self._shape = None

    def forward(self, inputs, train, rng):
        x = inputs[0]
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return [grad.reshape(self._shape)]


class DenseLayer(Layer):
    def __init__(self, row: LayerRow, features: int, rng: np.random.Generator):
        super().__init__(row)
        self.params["weights"] = nn.he_normal(rng, (features, row.width), fan_in=features)
        self.params["bias"] = np.zeros(row.width)
        self._x = None

    def forward(self, inputs, train, rng):
        if train:
            self._x = inputs[0]
        return nn.dense_forward(inputs[0], self.params["weights"], self.params["bias"])

    def backward(self, grad):
        grad_x, grad_w, grad_b = nn.dense_backward(self._x, self.params["weights"], grad)
        self.grads["weights"] = grad_w
        self.grads["bias"] = grad_b
        return [grad_x]

    def clear(self):
        self._x = None


def _expected_shape(row: LayerRow, input_shapes: List[Tuple[int, int]]) -> Tuple[int, int]:
    """(width, channels) a row must produce given its inputs"""
    width, channels = input_shapes[0] if input_shapes else (row.width, row.channels)
    if row.kind == "Conv1D":
        return width, row.channels
    if row.kind == "MaxPooling1D":
        return width // 2, channels
    if row.kind == "Add":
        if input_shapes[0] != input_shapes[1]:
            raise ShapeMismatch(f"{row.name}: inputs have shapes {input_shapes}")
        return width, channels
    if row.kind == "Flatten":
        return width * channels, 0
    if row.kind == "Dense":
        return row.width, 0
    return width, channels


class Model:
    """Wired layer graph in table order, with a softmax after the last row"""

    def __init__(self, spec: ArchitectureSpec, layers: Dict[str, Layer]):
        self.spec = spec
        self.layers = layers
        self.shapes: Dict[str, Tuple[int, int]] = {}
        self.training_metadata: Dict[str, object] = {}

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def _prepare_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[1] != self.spec.input_width or x.shape[2] != self.spec.rows[0].channels:
            raise BadInputWidth(
                f"Model expects inputs of width {self.spec.input_width}, got shape {x.shape}"
            )
        return x

    def forward_logits(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
        trace: bool = False,
    ) -> np.ndarray:
        """Logits of shape (batch, num_classes); trace records each row's output shape"""
        outputs: Dict[str, np.ndarray] = {}
        for row in self.spec.rows:
            inputs = [outputs[n] for n in row.inputs] if row.inputs else [self._prepare_input(x)]
            out = self.layers[row.name].forward(inputs, train, rng)
            outputs[row.name] = out
            if trace:
                self.shapes[row.name] = (out.shape[1], out.shape[2] if out.ndim == 3 else 0)
        return outputs[self.spec.rows[-1].name]

    def forward(self, x: np.ndarray, train: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Class probabilities of shape (batch, num_classes)"""
        return nn.softmax(self.forward_logits(x, train=train, rng=rng))

    def backward(self, grad_logits: np.ndarray) -> None:
        """Backpropagate from the logits; fills every layer's grads"""
        grads: Dict[str, np.ndarray] = {self.spec.rows[-1].name: grad_logits}
        for row in reversed(self.spec.rows):
            grad = grads.pop(row.name)
            layer = self.layers[row.name]
            for name, g in zip(row.inputs, layer.backward(grad)):
                grads[name] = g if name not in grads else grads[name] + g
            layer.clear()

    def parameters(self) -> Dict[str, np.ndarray]:
        """Trainable tensors keyed 'layer/param', in table order"""
        return {
            f"{row.name}/{key}": value
            for row in self.spec.rows
            for key, value in self.layers[row.name].params.items()
        }

    def gradients(self) -> Dict[str, np.ndarray]:
        return {
            f"{row.name}/{key}": value
            for row in self.spec.rows
            for key, value in self.layers[row.name].grads.items()
        }

    def tensors(self) -> Dict[str, np.ndarray]:
        """Every persisted tensor (trainable and normalization state), in table order"""
        named = {}
        for row in self.spec.rows:
            layer = self.layers[row.name]
            for key, value in list(layer.params.items()) + list(layer.state().items()):
                named[f"{row.name}/{key}"] = value
        return named

    def param_report(self) -> List[Tuple[str, int]]:
        return [(row.name, self.layers[row.name].param_count()) for row in self.spec.rows]

    def predict_proba(self, x: np.ndarray, batch_size: int = 128) -> np.ndarray:
        """EVAL-mode probabilities for (n, width) inputs, in fixed-size chunks"""
        x = np.asarray(x)
        chunks = [
            self.forward(x[i:i + batch_size].astype(np.float64))
            for i in range(0, x.shape[0], batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.num_classes))
        return np.concatenate(chunks, axis=0)

    def predict(self, x: np.ndarray, batch_size: int = 128) -> np.ndarray:
        return np.argmax(self.predict_proba(x, batch_size), axis=1)


def build_model(
    num_classes: int,
    rng: np.random.Generator,
    spec: Optional[ArchitectureSpec] = None,
    keep_prob: float = 0.5,
    bn_epsilon: float = 1e-5,
    bn_momentum: float = 0.99,
) -> Model:
    """
    Wire a model from the architecture table

    Args:
        num_classes: Output width of the final dense layer
        rng: Generator for weight initialization
        spec: Architecture table, the bundled one by default
        keep_prob: Dropout keep probability
        bn_epsilon: Normalization variance floor
        bn_momentum: Running-average momentum of the normalization layers

    Returns:
        A model whose every row matches the table's shape and parameter count
    """
    spec = (spec or ArchitectureSpec.load()).with_classes(num_classes)
    shapes: Dict[str, Tuple[int, int]] = {}
    layers: Dict[str, Layer] = {}

    for row in spec.rows:
        input_shapes = [shapes[n] for n in row.inputs]
        in_channels = input_shapes[0][1] if input_shapes else row.channels
        if row.kind == "InputLayer":
            layer: Layer = InputLayer(row)
        elif row.kind == "Conv1D":
            layer = Conv1DLayer(row, in_channels, rng)
        elif row.kind == "BatchNorm":
            layer = BatchNormLayer(row, bn_epsilon, bn_momentum)
        elif row.kind == "Scale":
            layer = ScaleLayer(row)
        elif row.kind == "Activation":
            layer = ActivationLayer(row)
        elif row.kind == "Dropout":
            layer = DropoutLayer(row, keep_prob)
        elif row.kind == "Add":
            layer = AddLayer(row)
        elif row.kind == "MaxPooling1D":
            layer = MaxPoolingLayer(row)
        elif row.kind == "Flatten":
            layer = FlattenLayer(row)
        elif row.kind == "Dense":
            layer = DenseLayer(row, input_shapes[0][0], rng)
        else:
            raise UsageError(f"{row.name}: unknown layer kind '{row.kind}'")

        shape = _expected_shape(row, input_shapes)
        if shape != (row.width, row.channels):
            raise ShapeMismatch(
                f"{row.name}: table says ({row.width}, {row.channels}), wiring gives {shape}"
            )
        if layer.param_count() != row.params:
            raise ShapeMismatch(
                f"{row.name}: table says {row.params} params, layer has {layer.param_count()}"
            )
        shapes[row.name] = shape
        layers[row.name] = layer

    body, shortcut = spec.conv_counts()
    logger.debug(f"Built model: {body} body convolutions, {shortcut} shortcut convolutions")
    model = Model(spec, layers)
    model.training_metadata = {
        "keep_prob": keep_prob,
        "bn_epsilon": bn_epsilon,
        "bn_momentum": bn_momentum,
    }
    return model


def count_parameters(report: Sequence[Tuple[str, int]]) -> int:
    return sum(count for _, count in report)
