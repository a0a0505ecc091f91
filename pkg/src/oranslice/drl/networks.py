"""Small fully connected tanh networks with explicit reverse-mode gradients."""
from __future__ import annotations

import numpy as np

N_ACTIONS = 3
STATE_DIM = 24
HIDDEN_LAYERS = 5
HIDDEN_UNITS = 30


def layer_sizes(n_in=STATE_DIM, n_out=N_ACTIONS, hidden_layers=HIDDEN_LAYERS, hidden_units=HIDDEN_UNITS):
    return [n_in] + [hidden_units] * hidden_layers + [n_out]


def _orthogonal(n_in, n_out, gain, rng):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    w = q if n_in >= n_out else q.T
    return gain * w[:n_in, :n_out]


def init_mlp(sizes, rng, hidden_gain=1.0, out_gain=0.01):
    """Orthogonal weights (row-major ``in x out``), zero biases."""
    params = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = out_gain if i == len(sizes) - 2 else hidden_gain
        params.append((_orthogonal(a, b, gain, rng), np.zeros(b)))
    return params


def mlp_forward(params, x):
    """Return output and the per-layer activations needed by backprop."""
    acts = [x]
    h = x
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def mlp_backward(params, acts, dout):
    grads = [None] * len(params)
    g = dout
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        grads[i] = (acts[i].T @ g, g.sum(axis=0))
        if i:
            g = (g @ w.T) * (1.0 - acts[i] ** 2)
    return grads


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(z):
    return np.exp(log_softmax(z))


def check_state(params, state):
    x = np.asarray(state, dtype=float)
    n_in = params[0][0].shape[0]
    if x.shape[-1] != n_in or x.ndim not in (1, 2):
        raise ValueError(f"state has shape {x.shape}, network expects (..., {n_in})")
    return x


def policy_forward(params, state):
    """Action probabilities for one state (vector) or a batch (rows)."""
    x = check_state(params, state)
    z, _ = mlp_forward(params, np.atleast_2d(x))
    p = softmax(z)
    return p[0] if x.ndim == 1 else p


def value_forward(params, state):
    x = check_state(params, state)
    v, _ = mlp_forward(params, np.atleast_2d(x))
    v = v[:, 0]
    return float(v[0]) if x.ndim == 1 else v


def flatten(params):
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in params])


def unflatten(vec, like):
    out, k = [], 0
    for w, b in like:
        nw, nb = w.size, b.size
        out.append((vec[k:k + nw].reshape(w.shape), vec[k + nw:k + nw + nb].copy()))
        k += nw + nb
    return out


def shapes(params):
    return [(tuple(w.shape), tuple(b.shape)) for w, b in params]
