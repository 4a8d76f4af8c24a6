"""Shared test utilities: the dual-route gradient check used by unit and
acceptance tests, and small synthetic batch builders."""

import numpy as np

from steplab import model as M
from steplab import tape


def mae_value(params, config, xs, ys):
    """Mean absolute error over a batch, via the plain-numpy forward route."""
    total = 0.0
    for x, y in zip(xs, ys):
        total += abs(M.predict(params, config, x) - y)
    return total / len(xs)


def analytic_mae_grads(params, config, xs, ys):
    """Gradient of the batch MAE through the tape route, in flat() order."""
    node_params, leaves = M.wrap_params(params)
    per_sample = []
    for x, y in zip(xs, ys):
        pred = M.forward_graph(node_params, config, x)
        per_sample.append((pred - tape.Node([[float(y)]])).absval())
    loss = tape.add_n(per_sample).scale(1.0 / len(per_sample))
    tape.backward(loss)
    return [leaf.grad.copy() for leaf in leaves], loss.value[0, 0]


def gradcheck_mae(params, config, xs, ys, eps=1e-5):
    """Max relative disagreement between the tape gradient and the
    central-difference oracle run on the independent numpy forward:
    max |analytic - fd| / max(1, |fd|)."""
    analytic, _ = analytic_mae_grads(params, config, xs, ys)
    flat = params.flat()
    fd = tape.fd_gradient(lambda: mae_value(params, config, xs, ys), flat, eps=eps)
    worst = 0.0
    for a, f in zip(analytic, fd):
        err = np.abs(a - f) / np.maximum(1.0, np.abs(f))
        worst = max(worst, float(err.max()))
    return worst


def safe_targets(params, config, xs, margin=0.7):
    """Targets offset from the current predictions so every residual stays
    bounded away from the MAE kink during finite differencing."""
    return [M.predict(params, config, x) - margin for x in xs]


def random_batch(rng, n, length, input_size):
    return [rng.uniform(0.0, 1.0, size=(length, input_size)) for _ in range(n)]


def count_local_maxima(x):
    """Naive strict-local-maximum scan, the generator's counting oracle."""
    x = np.asarray(x, dtype=np.float64)
    return int(np.sum((x[1:-1] > x[:-2]) & (x[1:-1] > x[2:])))
