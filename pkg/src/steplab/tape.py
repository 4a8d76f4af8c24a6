"""Dense float64 matrix kernels and a reverse-mode differentiation tape.

Matrices are plain numpy 2-D float64 arrays in row-major order. Every kernel
validates shapes and raises ShapeError naming both operand shapes on mismatch.
The tape is define-by-run: each forward pass builds a fresh graph of Node
objects; backward() walks it once in reverse topological order. Gradients
accumulate additively, so a node feeding several consumers receives the sum of
their contributions. Leaf gradients persist across backward calls until
zero_grads() is invoked; intermediate gradients are reset at the start of each
backward pass.

Nothing here is thread-safe. A graph must be built and differentiated on a
single thread.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# A Matrix is a 2-D float64 ndarray. Scalars are carried as 1x1 matrices.
Matrix = np.ndarray


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(value) -> Matrix:
    """Coerce to a 2-D float64 array, rejecting anything of other rank."""
    a = np.asarray(value, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# plain-array kernels


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product. a (n,k) @ b (k,m) -> (n,m)."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    return a @ b


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function, elementwise. Saturates cleanly at +-inf."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax of a length-L vector: subtracts the max before exp."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"softmax expects a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


# ---------------------------------------------------------------------------
# tape


class Node:
    """One value in a define-by-run graph.

    value is a Matrix; grad has the same shape and accumulates d(root)/d(value)
    during backward(). Leaves are constructed directly; interior nodes carry a
    closure that routes their accumulated gradient to their parents.
    """

    __slots__ = ("value", "grad", "_parents", "_backprop")

    def __init__(self, value):
        self.value = as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self._parents: tuple[Node, ...] = ()
        self._backprop: Callable[[np.ndarray], None] | None = None

    @classmethod
    def from_op(cls, value, parents: tuple["Node", ...],
                backprop: Callable[[np.ndarray], None]) -> "Node":
        """Register the result of a custom operation.

        backprop receives the node's accumulated gradient and must add the
        corresponding contributions into each parent's .grad buffer. This is
        the extension point used for fused operations.
        """
        node = cls(value)
        node._parents = parents
        node._backprop = backprop
        return node

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    # -- arithmetic ---------------------------------------------------------

    def _require_same_shape(self, other: "Node", op: str) -> None:
        if self.value.shape != other.value.shape:
            raise ShapeError(
                f"{op}: operand shapes differ, {self.value.shape} vs {other.value.shape}")

    def __add__(self, other: "Node") -> "Node":
        self._require_same_shape(other, "add")
        def backprop(up):
            self.grad += up
            other.grad += up
        return Node.from_op(self.value + other.value, (self, other), backprop)

    def __sub__(self, other: "Node") -> "Node":
        self._require_same_shape(other, "sub")
        def backprop(up):
            self.grad += up
            other.grad -= up
        return Node.from_op(self.value - other.value, (self, other), backprop)

    def __mul__(self, other: "Node") -> "Node":
        """Hadamard product."""
        self._require_same_shape(other, "hadamard")
        def backprop(up):
            self.grad += up * other.value
            other.grad += up * self.value
        return Node.from_op(self.value * other.value, (self, other), backprop)

    def scale(self, k: float) -> "Node":
        k = float(k)
        def backprop(up):
            self.grad += k * up
        return Node.from_op(self.value * k, (self,), backprop)

    def matmul(self, other: "Node") -> "Node":
        if self.value.shape[1] != other.value.shape[0]:
            raise ShapeError(
                f"matmul: inner dimensions differ, {self.value.shape} @ {other.value.shape}")
        def backprop(up):
            self.grad += up @ other.value.T
            other.grad += self.value.T @ up
        return Node.from_op(self.value @ other.value, (self, other), backprop)

    # -- elementwise nonlinearities ------------------------------------------

    def sigmoid(self) -> "Node":
        out = sigmoid(self.value)
        def backprop(up):
            self.grad += up * (out * (1.0 - out))
        return Node.from_op(out, (self,), backprop)

    def tanh(self) -> "Node":
        out = np.tanh(self.value)
        def backprop(up):
            self.grad += up * (1.0 - out * out)
        return Node.from_op(out, (self,), backprop)

    def absval(self) -> "Node":
        # Subgradient convention: d|x|/dx = 0 at x = 0 (np.sign(0) == 0).
        sign = np.sign(self.value)
        def backprop(up):
            self.grad += up * sign
        return Node.from_op(np.abs(self.value), (self,), backprop)

    # -- structural ops -------------------------------------------------------

    def transpose(self) -> "Node":
        def backprop(up):
            self.grad += up.T
        return Node.from_op(self.value.T, (self,), backprop)

    def sum_rows(self) -> "Node":
        """Column-wise sum over rows: (L,H) -> (1,H)."""
        def backprop(up):
            self.grad += up  # broadcasts the (1,H) gradient over all L rows
        return Node.from_op(self.value.sum(axis=0, keepdims=True), (self,), backprop)

    def slice_rows(self, start: int, stop: int) -> "Node":
        n = self.value.shape[0]
        if not (0 <= start < stop <= n):
            raise ShapeError(f"slice_rows [{start}:{stop}] out of range for {self.value.shape}")
        def backprop(up):
            self.grad[start:stop] += up
        return Node.from_op(self.value[start:stop].copy(), (self,), backprop)

    def softmax(self) -> "Node":
        """Softmax along a single column or row vector, shape preserved."""
        shp = self.value.shape
        if 1 not in shp:
            raise ShapeError(f"softmax node expects a vector shape, got {shp}")
        w = softmax(self.value.ravel()).reshape(shp)
        def backprop(up):
            # d softmax: w * (up - <w, up>)
            dot = float((w * up).sum())
            self.grad += w * (up - dot)
        return Node.from_op(w, (self,), backprop)


def concat_cols(a: Node, b: Node) -> Node:
    """Column concatenation: (n,p) | (n,q) -> (n,p+q)."""
    if a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(
            f"concat_cols: row counts differ, {a.value.shape} vs {b.value.shape}")
    p = a.value.shape[1]
    def backprop(up):
        a.grad += up[:, :p]
        b.grad += up[:, p:]
    return Node.from_op(np.hstack([a.value, b.value]), (a, b), backprop)


def add_rowvec(a: Node, row: Node) -> Node:
    """Broadcast-add a (1,H) row vector over every row of a (L,H) matrix."""
    if row.value.shape != (1, a.value.shape[1]):
        raise ShapeError(
            f"add_rowvec: expected row shape (1,{a.value.shape[1]}), got {row.value.shape}")
    def backprop(up):
        a.grad += up
        row.grad += up.sum(axis=0, keepdims=True)
    return Node.from_op(a.value + row.value, (a, row), backprop)


def add_n(nodes: Sequence[Node]) -> Node:
    """Sum of same-shaped nodes."""
    if not nodes:
        raise ShapeError("add_n of an empty sequence")
    shp = nodes[0].value.shape
    for n in nodes[1:]:
        if n.value.shape != shp:
            raise ShapeError(f"add_n: operand shapes differ, {shp} vs {n.value.shape}")
    total = nodes[0].value.copy()
    for n in nodes[1:]:
        total += n.value
    def backprop(up):
        for n in nodes:
            n.grad += up
    return Node.from_op(total, (tuple(nodes)), backprop)


def _topo_order(root: Node) -> list[Node]:
    """Iterative post-order over parents; children appear before consumers."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Reverse-mode sweep from a scalar (1x1) root.

    Resets intermediate gradients, seeds the root with 1, then routes each
    node's accumulated gradient to its parents exactly once. Leaf gradients
    are never reset here, so repeated calls accumulate; call zero_grads()
    between batches.
    """
    if root.value.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar (1,1) root, got {root.value.shape}")
    order = _topo_order(root)
    for node in order:
        if node._parents:
            node.grad[...] = 0.0
    root.grad += 1.0
    for node in reversed(order):
        if node._parents:
            node._backprop(node.grad)


def zero_grads(nodes: Sequence[Node]) -> None:
    for n in nodes:
        n.zero_grad()


def fd_gradient(f: Callable[[], float], params: Sequence[np.ndarray],
                eps: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient oracle.

    f() must evaluate the objective at the current contents of params; each
    entry is perturbed in place by +-eps and restored. Independent of the tape
    on purpose: this is the reference route for gradient checks.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grads = []
    for p in params:
        if not isinstance(p, np.ndarray) or p.dtype != np.float64:
            raise TypeError("fd_gradient params must be float64 ndarrays")
        g = np.zeros_like(p)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps
            fp = f()
            flat_p[i] = orig - eps
            fm = f()
            flat_p[i] = orig
            flat_g[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads
