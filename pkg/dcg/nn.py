"""Feed-forward MLPs over flat float64 parameter vectors.

Parameters are laid out layer by layer, weights before bias, weights
row-major with shape ``(n_out, n_in)`` so that ``y = W x + b``. Every
function accepts either a single parameter vector of shape ``(P,)`` or a
stack of vectors of shape ``(..., P)``; a stack evaluates one network per
leading row through broadcasting matmuls. Inputs are ``(in,)``, ``(n, in)``
or ``(..., n, in)``.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DimensionMismatchError

RELU = 'relu'
TANH_SCALED = 'tanh_scaled'
IDENTITY = 'identity'


@dataclass(frozen=True)
class MlpArch:
    layer_sizes: tuple
    output_activation: str = IDENTITY
    output_bound: float = 1.0
    hidden_activation: str = RELU

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, 'layer_sizes', sizes)
        object.__setattr__(self, 'output_bound', float(self.output_bound))
        if len(sizes) < 2:
            raise ValueError('an MLP needs at least an input and an output layer')
        if any(n < 1 for n in sizes):
            raise ValueError(f'layer sizes must be positive, got {sizes}')
        if self.hidden_activation != RELU:
            raise ValueError(f'unsupported hidden activation {self.hidden_activation!r}')
        if self.output_activation not in (TANH_SCALED, IDENTITY):
            raise ValueError(f'unsupported output activation {self.output_activation!r}')
        if self.output_activation == TANH_SCALED and not self.output_bound > 0:
            raise ValueError('tanh_scaled output requires a positive bound')

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    @property
    def layers(self):
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def param_count(self):
        return sum((n_in + 1) * n_out for n_in, n_out in self.layers)

    def describe(self):
        output = self.output_activation
        if output == TANH_SCALED:
            output = f'{output}:{self.output_bound!r}'
        layers = ','.join(str(n) for n in self.layer_sizes)
        return f'layers={layers};hidden={self.hidden_activation};output={output}'

    @classmethod
    def from_description(cls, text):
        fields = dict(part.split('=', 1) for part in text.strip().split(';'))
        output, _, bound = fields['output'].partition(':')
        return cls(
            layer_sizes=tuple(int(n) for n in fields['layers'].split(',')),
            output_activation=output,
            output_bound=float(bound) if bound else 1.0,
            hidden_activation=fields.get('hidden', RELU),
        )


def layer_views(arch, params):
    """Split flat parameters into ``[(W, b), ...]`` per layer."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape[-1] != arch.param_count:
        raise DimensionMismatchError(
            f'expected {arch.param_count} parameters, got {params.shape[-1]}'
        )
    lead = params.shape[:-1]
    views = []
    offset = 0
    for n_in, n_out in arch.layers:
        weights = params[..., offset:offset + n_in * n_out].reshape(lead + (n_out, n_in))
        offset += n_in * n_out
        bias = params[..., offset:offset + n_out]
        offset += n_out
        views.append((weights, bias))
    return views


def mlp_init(arch, seed):
    """Fan-in uniform weights in ``[-1/sqrt(n_in), 1/sqrt(n_in)]``, zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for n_in, n_out in arch.layers:
        limit = 1.0 / math.sqrt(n_in)
        chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return np.concatenate(chunks)


def _prepare_inputs(arch, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != arch.input_size:
        raise DimensionMismatchError(
            f'expected input of size {arch.input_size}, got shape {x.shape}'
        )
    single = x.ndim == 1
    if single:
        x = x[None, :]
    return x, single


def _forward(arch, views, x):
    activations = [x]
    pre_activations = []
    h = x
    last = len(views) - 1
    for i, (weights, bias) in enumerate(views):
        z = h @ np.swapaxes(weights, -1, -2) + bias[..., None, :]
        pre_activations.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
        elif arch.output_activation == TANH_SCALED:
            h = arch.output_bound * np.tanh(z)
        else:
            h = z
        activations.append(h)
    return activations, pre_activations


def mlp_forward(arch, params, inputs):
    views = layer_views(arch, params)
    x, single = _prepare_inputs(arch, inputs)
    activations, _ = _forward(arch, views, x)
    out = activations[-1]
    return out[..., 0, :] if single else out


def mlp_backward(arch, params, inputs, output_grad):
    """Gradients of ``<output, output_grad>`` summed over the input batch.

    Returns ``(param_grad, input_grad)``; ``param_grad`` has the leading
    shape of the (broadcast) network stack, ``input_grad`` the shape of
    ``inputs``.
    """
    return _backward(arch, params, inputs, output_grad, with_params=True)


def input_gradient(arch, params, inputs, output_grad):
    """Input half of :func:`mlp_backward`, skipping the weight gradients."""
    return _backward(arch, params, inputs, output_grad, with_params=False)[1]


def _backward(arch, params, inputs, output_grad, with_params):
    views = layer_views(arch, params)
    x, single = _prepare_inputs(arch, inputs)
    g = np.asarray(output_grad, dtype=np.float64)
    if single:
        g = g[..., None, :]
    if g.shape[-1] != arch.output_size:
        raise DimensionMismatchError(
            f'expected output gradient of size {arch.output_size}, got shape {g.shape}'
        )
    activations, pre_activations = _forward(arch, views, x)
    if g.shape != activations[-1].shape:
        raise DimensionMismatchError(
            f'output gradient shape {g.shape} does not match output shape {activations[-1].shape}'
        )

    if arch.output_activation == TANH_SCALED:
        g = g * arch.output_bound * (1.0 - np.tanh(pre_activations[-1]) ** 2)

    layer_grads = []
    for i in reversed(range(len(views))):
        weights, _ = views[i]
        if with_params:
            grad_w = np.swapaxes(g, -1, -2) @ activations[i]
            layer_grads.append((grad_w, g.sum(axis=-2)))
        g = g @ weights
        if i > 0:
            g = g * (pre_activations[i - 1] > 0.0)
    input_grad = g[..., 0, :] if single else g
    if not with_params:
        return None, input_grad

    chunks = []
    for grad_w, grad_b in reversed(layer_grads):
        lead = np.broadcast_shapes(grad_w.shape[:-2], grad_b.shape[:-1])
        chunks.append(np.broadcast_to(grad_w, lead + grad_w.shape[-2:]).reshape(lead + (-1,)))
        chunks.append(np.broadcast_to(grad_b, lead + grad_b.shape[-1:]))
    return np.concatenate(chunks, axis=-1), input_grad


def population_policy(arch, genotypes):
    """Policy callable evaluating network ``i`` of ``genotypes`` on observation row ``i``."""
    genotypes = np.asarray(genotypes, dtype=np.float64)

    def act(observations):
        return mlp_forward(arch, genotypes, observations[:, None, :])[:, 0, :]

    return act


def input_weight_mask(arch, columns):
    """Boolean mask over parameters selecting first-layer weights of ``columns``."""
    mask = np.zeros(arch.param_count, dtype=bool)
    n_in, n_out = arch.layers[0]
    weights = mask[:n_in * n_out].reshape(n_out, n_in)
    weights[:, list(columns)] = True
    return mask


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, learning_rate, **kwargs):
        shape = np.shape(params)
        return cls(np.zeros(shape), np.zeros(shape), learning_rate=learning_rate, **kwargs)


def adam_step(state, params, grad):
    """One bias-corrected Adam descent step. Pure: returns ``(params, state)``."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or state.first_moment.shape != params.shape:
        raise DimensionMismatchError(
            f'Adam shapes disagree: params {params.shape}, grad {grad.shape}, '
            f'moments {state.first_moment.shape}'
        )
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, first_moment=m, second_moment=v, step_count=t)
