"""Reverse-mode tape in action.

Builds a small computation -- an affine map, a tanh, a softmax-weighted
average, an absolute error -- backpropagates through it, and compares every
analytic gradient against central finite differences. The same machinery
drives full LSTM training in steplab.train.

Run: python demos/tape_gradients.py [--seed N]
"""

import argparse

import numpy as np

from steplab.tape import Node, add_rowvec, backward, fd_gradient


def build_loss(w, b, v, x, target):
    """loss = | softmax((x W^T + b^T) v) . ((x W^T + b^T) v) - target |."""
    wn, bn, vn = Node(w), Node(b), Node(v)
    hidden = add_rowvec(Node(x).matmul(wn.transpose()), bn.transpose())
    scores = hidden.tanh().matmul(vn)              # (L, 1)
    weights = scores.softmax()                     # simplex over timesteps
    pooled = weights.transpose().matmul(scores)
    err = (pooled - Node(np.array([[target]]))).absval()
    return err, (wn, bn, vn)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    L, d, h = 6, 3, 4
    x = rng.normal(size=(L, d))
    w = rng.normal(size=(h, d))
    b = rng.normal(size=(h, 1))
    v = rng.normal(size=(h, 1))
    target = 2.5

    loss, leaves = build_loss(w, b, v, x, target)
    backward(loss)
    analytic = [leaf.grad.copy() for leaf in leaves]

    def loss_value():
        node, _ = build_loss(w, b, v, x, target)
        return float(node.value[0, 0])

    numeric = fd_gradient(loss_value, [w, b, v])

    print(f"loss value: {loss.value[0, 0]:.6f}")
    for name, a, n in zip("wbv", analytic, numeric):
        err = np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n)))
        print(f"grad {name}: shape {a.shape}, max rel err vs FD = {err:.2e}")
    worst = max(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n)))
                for a, n in zip(analytic, numeric))
    print("agreement within 1e-6:", worst < 1e-6)


if __name__ == "__main__":
    main()
