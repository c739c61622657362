"""
Differentiable layer kernels for 1D signals

Activations are float64 arrays shaped (batch, width, channels); dense inputs
are (batch, features). Every forward returns what its backward needs, and no
kernel keeps hidden state.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import (
    BatchTooSmall,
    ChannelMismatch,
    NonFiniteLogit,
    ShapeMismatch,
    WidthTooSmall,
)

logger = logging.getLogger(__name__)


def same_padding(kernel_size: int) -> Tuple[int, int]:
    """(left, right) zero padding that preserves width; the extra sample goes right"""
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


# convolution
def conv1d_forward(
    x: np.ndarray, weights: np.ndarray, bias: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    SAME, stride-1 convolution

    Args:
        x: (batch, width, in_channels)
        weights: (kernel_size, in_channels, out_channels)
        bias: (out_channels,) or None

    Returns:
        (batch, width, out_channels)
    """
    kernel_size, in_channels, out_channels = weights.shape
    if x.shape[2] != in_channels:
        raise ChannelMismatch(
            f"Convolution expects {in_channels} input channels, got {x.shape[2]}"
        )
    batch, width, _ = x.shape
    left, right = same_padding(kernel_size)
    padded = np.pad(x, ((0, 0), (left, right), (0, 0)))
    y = np.zeros((batch, width, out_channels))
    for k in range(kernel_size):
        y += padded[:, k:k + width, :] @ weights[k]
    if bias is not None:
        y += bias
    return y


def conv1d_backward(
    x: np.ndarray, weights: np.ndarray, grad_y: np.ndarray, has_bias: bool = True
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Gradients (input, weights, bias) of conv1d_forward"""
    kernel_size, in_channels, out_channels = weights.shape
    if x.shape[2] != in_channels or grad_y.shape[2] != out_channels:
        raise ChannelMismatch("Convolution gradient shapes do not match the weights")
    batch, width, _ = x.shape
    left, right = same_padding(kernel_size)
    padded = np.pad(x, ((0, 0), (left, right), (0, 0)))
    grad_padded = np.zeros_like(padded)
    grad_w = np.empty_like(weights)
    flat_grad = grad_y.reshape(-1, out_channels)
    for k in range(kernel_size):
        grad_padded[:, k:k + width, :] += grad_y @ weights[k].T
        grad_w[k] = padded[:, k:k + width, :].reshape(-1, in_channels).T @ flat_grad
    grad_b = grad_y.sum(axis=(0, 1)) if has_bias else None
    return grad_padded[:, left:left + width, :], grad_w, grad_b


# pooling
def maxpool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Size-2, stride-2 max pooling; an odd trailing sample is dropped

    Returns:
        (pooled, argmax) where argmax holds the winning input position,
        the earlier one on ties
    """
    batch, width, channels = x.shape
    if width < 2:
        raise WidthTooSmall(f"Max pooling needs width >= 2, got {width}")
    out_width = width // 2
    pairs = x[:, : 2 * out_width, :].reshape(batch, out_width, 2, channels)
    offset = np.argmax(pairs, axis=2)
    argmax = 2 * np.arange(out_width)[None, :, None] + offset
    y = np.take_along_axis(pairs, offset[:, :, None, :], axis=2)[:, :, 0, :]
    return y, argmax


def maxpool_backward(argmax: np.ndarray, grad_y: np.ndarray, input_width: int) -> np.ndarray:
    """Route each output gradient to its winning input position"""
    batch, out_width, channels = grad_y.shape
    grad_x = np.zeros((batch, input_width, channels))
    np.put_along_axis(grad_x, argmax, grad_y, axis=1)
    return grad_x


# batch normalization
@dataclass
class NormState:
    """Per-channel statistics of one normalization layer"""

    running_mean: np.ndarray
    running_var: np.ndarray
    batch_mean: np.ndarray
    batch_var: np.ndarray
    epsilon: float = 1e-5
    momentum: float = 0.99

    @classmethod
    def fresh(cls, channels: int, epsilon: float = 1e-5, momentum: float = 0.99) -> "NormState":
        return cls(
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            batch_mean=np.zeros(channels),
            batch_var=np.ones(channels),
            epsilon=epsilon,
            momentum=momentum,
        )

    def tensors(self) -> Dict[str, np.ndarray]:
        return {
            "running_mean": self.running_mean,
            "running_var": self.running_var,
            "batch_mean": self.batch_mean,
            "batch_var": self.batch_var,
        }


@dataclass
class NormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    train: bool


def batchnorm_forward(
    x: np.ndarray, state: NormState, train: bool
) -> Tuple[np.ndarray, NormState, NormCache]:
    """
    Normalize per channel without affine

    TRAIN uses batch statistics over (batch, width) and returns a state with
    updated running averages; EVAL uses the running statistics.
    """
    if train:
        if x.shape[0] < 2:
            raise BatchTooSmall(f"Batch normalization needs batch >= 2, got {x.shape[0]}")
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        m = state.momentum
        state = NormState(
            running_mean=m * state.running_mean + (1.0 - m) * mean,
            running_var=m * state.running_var + (1.0 - m) * var,
            batch_mean=mean,
            batch_var=var,
            epsilon=state.epsilon,
            momentum=state.momentum,
        )
    else:
        mean, var = state.running_mean, state.running_var
    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    x_hat = (x - mean) * inv_std
    return x_hat, state, NormCache(x_hat=x_hat, inv_std=inv_std, train=train)


def batchnorm_backward(grad_y: np.ndarray, cache: NormCache) -> np.ndarray:
    """Input gradient of batchnorm_forward"""
    if not cache.train:
        return grad_y * cache.inv_std
    n = grad_y.shape[0] * grad_y.shape[1]
    sum_grad = grad_y.sum(axis=(0, 1))
    sum_grad_xhat = (grad_y * cache.x_hat).sum(axis=(0, 1))
    return (cache.inv_std / n) * (n * grad_y - sum_grad - cache.x_hat * sum_grad_xhat)


# scale
def scale_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    if x.shape[-1] != gamma.shape[0]:
        raise ChannelMismatch(f"Scale has {gamma.shape[0]} channels, input has {x.shape[-1]}")
    return gamma * x + beta


def scale_backward(
    x: np.ndarray, gamma: np.ndarray, grad_y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (input, gamma, beta)"""
    if x.shape[-1] != gamma.shape[0]:
        raise ChannelMismatch(f"Scale has {gamma.shape[0]} channels, input has {x.shape[-1]}")
    axes = tuple(range(x.ndim - 1))
    return grad_y * gamma, (x * grad_y).sum(axis=axes), grad_y.sum(axis=axes)


# activation
def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return grad_y * (x > 0)


def dropout(
    x: np.ndarray, keep_prob: float, train: bool, rng: Optional[np.random.Generator]
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Inverted dropout

    Returns:
        (output, mask); the mask is None when the op is the identity
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if not train or keep_prob == 1.0:
        return x, None
    mask = (rng.random(x.shape) < keep_prob) / keep_prob
    return x * mask, mask


def dropout_backward(mask: Optional[np.ndarray], grad_y: np.ndarray) -> np.ndarray:
    return grad_y if mask is None else grad_y * mask


def residual_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeMismatch(f"Cannot add tensors of shape {a.shape} and {b.shape}")
    return a + b


# dense
def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """logits = x W + b for x of shape (batch, features)"""
    if x.shape[-1] != weights.shape[0]:
        raise ShapeMismatch(
            f"Dense layer expects {weights.shape[0]} inputs, got {x.shape[-1]}"
        )
    return x @ weights + bias


def dense_backward(
    x: np.ndarray, weights: np.ndarray, grad_y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (input, weights, bias)"""
    if x.shape[-1] != weights.shape[0] or grad_y.shape[-1] != weights.shape[1]:
        raise ShapeMismatch("Dense gradient shapes do not match the weights")
    return grad_y @ weights.T, x.T @ grad_y, grad_y.sum(axis=0)


# loss
def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def weighted_softmax_ce(
    logits: np.ndarray, labels, class_weights: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Class-weighted softmax cross-entropy

    For one example, loss = -w[label] * ln p[label] and the gradient is
    w[label] * (p - onehot(label)). A batch (2-D logits) returns the mean
    loss and the gradient of that mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteLogit("Logits contain NaN or infinity")
    single = logits.ndim == 1
    logits2 = logits[None, :] if single else logits
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    batch = logits2.shape[0]
    rows = np.arange(batch)

    shifted = logits2 - logits2.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted[rows, labels] - log_norm
    w = np.asarray(class_weights, dtype=np.float64)[labels]

    probs = softmax(logits2)
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad *= w[:, None]

    if single:
        return float(-w[0] * log_p[0]), grad[0]
    return float(np.mean(-w * log_p)), grad / batch


# optimizer
@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState
) -> AdamState:
    """One bias-corrected Adam update, applied to params in place"""
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeMismatch(f"Gradient for {name} has shape {grad.shape}, expected {param.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param)
            v = np.zeros_like(param)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return state
