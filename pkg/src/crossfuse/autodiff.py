"""Minimal define-by-run reverse-mode autodiff over dense float64 matrices.

Every value on the tape is a 2-D ``numpy.ndarray`` of dtype float64; scalars
are 1x1 matrices.  A :class:`Tape` is built fresh for each forward pass and
consumed by :meth:`Tape.backward`.

    >>> tape = Tape()
    >>> w = tape.param([[3.0]], name="w")
    >>> loss = scale(sum_squares(w), 0.5)
    >>> grads = tape.backward(loss)
    >>> float(grads["w"][0, 0])
    3.0
"""
from __future__ import annotations

import weakref
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DimensionError, ParameterError

LOG_FLOOR = 1e-12


def as_matrix(value) -> np.ndarray:
    """Coerce ``value`` to a 2-D float64 array (copying only when needed)."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ContractError(f"expected a matrix, got array with ndim={arr.ndim}")
    return arr


class Var:
    """A node on a :class:`Tape`."""

    __slots__ = ("_tape", "index", "value", "grad", "op", "parents",
                 "requires_grad", "name", "_backward")

    def __init__(self, tape, index, value, op, parents, requires_grad,
                 backward=None, name=None):
        # weak link: a strong one would make every tape a reference cycle that
        # only the cyclic GC can reclaim, and tapes hold large arrays
        self._tape = weakref.ref(tape)
        self.index = index
        self.value = value
        self.grad = None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self.name = name
        self._backward = backward

    @property
    def tape(self) -> "Tape":
        tape = self._tape()
        if tape is None:
            raise ContractError("the tape this variable was recorded on no longer exists")
        return tape

    @property
    def shape(self):
        return self.value.shape

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Var{label} #{self.index} op={self.op} shape={self.shape}>"


class Tape:
    """Ordered record of the operations of one forward pass.

    Nodes are appended in creation order, so every parent index is smaller
    than its child's index and reverse insertion order is a valid
    reverse-topological order.
    """

    def __init__(self):
        self.nodes: list[Var] = []

    def __len__(self):
        return len(self.nodes)

    def _push(self, value, op, parents=(), requires_grad=False,
              backward=None, name=None) -> Var:
        var = Var(self, len(self.nodes), value, op, tuple(parents),
                  requires_grad, backward if requires_grad else None, name)
        self.nodes.append(var)
        return var

    def param(self, value, name=None) -> Var:
        """Leaf that receives a gradient."""
        return self._push(as_matrix(value), "param", requires_grad=True, name=name)

    def constant(self, value, name=None) -> Var:
        """Leaf treated as fixed data (no gradient is propagated into it)."""
        return self._push(as_matrix(value), "const", name=name)

    def params(self) -> list[Var]:
        return [v for v in self.nodes if v.op == "param"]

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        """Populate ``grad`` on every node and return named parameter grads.

        Nodes the loss does not depend on end up with an all-zero gradient.
        """
        if loss.tape is not self:
            raise ContractError("loss variable belongs to a different tape")
        if loss.shape != (1, 1):
            raise ContractError(f"backward needs a 1x1 loss, got shape {loss.shape}")

        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.index] = np.ones((1, 1))
        for node in reversed(self.nodes[: loss.index + 1]):
            g = grads[node.index]
            if g is None or node._backward is None:
                continue
            for parent_index, pg in zip(node.parents, node._backward(g)):
                if pg is None or not self.nodes[parent_index].requires_grad:
                    continue
                if grads[parent_index] is None:
                    grads[parent_index] = pg
                else:
                    grads[parent_index] = grads[parent_index] + pg

        for node, g in zip(self.nodes, grads):
            node.grad = np.zeros_like(node.value) if g is None else g
        return {v.name: v.grad for v in self.nodes if v.op == "param" and v.name}


def _lift(x, like: Var) -> Var:
    if isinstance(x, Var):
        if x.tape is not like.tape:
            raise ContractError("operands live on different tapes")
        return x
    return like.tape.constant(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a Var")


def _record(op: str, value: np.ndarray, inputs: Sequence[Var],
            backward: Callable[[np.ndarray], tuple]) -> Var:
    tape = inputs[0].tape
    needs = any(v.requires_grad for v in inputs)
    return tape._push(value, op, [v.index for v in inputs], needs, backward)


def _pair(a, b) -> tuple[Var, Var]:
    tape = _tape_of(a, b)
    a = a if isinstance(a, Var) else tape.constant(a)
    b = b if isinstance(b, Var) else tape.constant(b)
    _lift(b, a)
    return a, b


# ---------------------------------------------------------------- primitives

def matmul(a, b) -> Var:
    a, b = _pair(a, b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value

    def backward(g):
        return (g @ bv.T if a.requires_grad else None,
                av.T @ g if b.requires_grad else None)

    return _record("matmul", av @ bv, [a, b], backward)


def spmm(matrix, x: Var) -> Var:
    """Constant (sparse or dense) matrix times a Var."""
    if matrix.shape[1] != x.shape[0]:
        raise DimensionError("spmm", matrix.shape, x.shape)
    value = matrix @ x.value
    if sp.issparse(value):
        value = value.toarray()
    value = np.asarray(value, dtype=np.float64)
    mt = matrix.T

    def backward(g):
        out = mt @ g
        return (np.asarray(out.toarray() if sp.issparse(out) else out),)

    return _record("spmm", value, [x], backward)


def add_bias(x: Var, bias) -> Var:
    """Add a 1 x d row vector to every row of an n x d matrix."""
    x, bias = _pair(x, bias)
    if bias.shape[0] != 1 or bias.shape[1] != x.shape[1]:
        raise DimensionError("add_bias", x.shape, bias.shape)

    def backward(g):
        return g, g.sum(axis=0, keepdims=True)

    return _record("add_bias", x.value + bias.value, [x, bias], backward)


def add(a, b) -> Var:
    a, b = _pair(a, b)
    if a.shape != b.shape:
        raise DimensionError("add", a.shape, b.shape)
    return _record("add", a.value + b.value, [a, b], lambda g: (g, g))


def sub(a, b) -> Var:
    a, b = _pair(a, b)
    if a.shape != b.shape:
        raise DimensionError("sub", a.shape, b.shape)
    return _record("sub", a.value - b.value, [a, b], lambda g: (g, -g))


def scale(x: Var, factor: float) -> Var:
    factor = float(factor)
    return _record("scale", x.value * factor, [x], lambda g: (g * factor,))


def relu(x: Var) -> Var:
    mask = x.value > 0
    return _record("relu", np.where(mask, x.value, 0.0), [x],
                   lambda g: (g * mask,))


def sigmoid(x: Var) -> Var:
    # split on sign so exp never overflows
    v = x.value
    e = np.exp(-np.abs(v))
    out = np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record("sigmoid", out, [x], lambda g: (g * out * (1.0 - out),))


def softmax_rows(values: np.ndarray) -> np.ndarray:
    """Numerically guarded row-wise softmax of a plain array."""
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def row_softmax(x: Var) -> Var:
    out = softmax_rows(x.value)

    def backward(g):
        return ((g - (g * out).sum(axis=1, keepdims=True)) * out,)

    return _record("row_softmax", out, [x], backward)


def transpose(x: Var) -> Var:
    return _record("transpose", x.value.T.copy(), [x], lambda g: (g.T,))


def concat_cols(xs: Sequence[Var]) -> Var:
    xs = list(xs)
    if not xs:
        raise ContractError("concat_cols needs at least one operand")
    rows = xs[0].shape[0]
    if any(v.shape[0] != rows for v in xs):
        raise DimensionError("concat_cols", *(v.shape for v in xs))
    bounds = np.cumsum([0] + [v.shape[1] for v in xs])

    def backward(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _record("concat_cols", np.hstack([v.value for v in xs]), xs, backward)


def total(x: Var) -> Var:
    """Sum of all entries, as a 1x1 Var."""
    shape = x.shape
    return _record("total", np.array([[x.value.sum()]]), [x],
                   lambda g: (np.full(shape, g[0, 0]),))


def sum_squares(x: Var) -> Var:
    """Squared Frobenius norm."""
    v = x.value
    return _record("sum_squares", np.array([[np.sum(v * v)]]), [x],
                   lambda g: (2.0 * g[0, 0] * v,))


def kl_div(target, q: Var) -> Var:
    """KL(target || q) summed over all entries; ``target`` is held fixed.

    Both arguments are floored at 1e-12 inside the log.  Entries with a zero
    target contribute nothing.
    """
    p = as_matrix(target.value if isinstance(target, Var) else target)
    if p.shape != q.shape:
        raise DimensionError("kl_div", p.shape, q.shape)
    qv = q.value
    q_floor = np.maximum(qv, LOG_FLOOR)
    active = p > 0
    terms = np.where(active, p * (np.log(np.maximum(p, LOG_FLOOR)) - np.log(q_floor)), 0.0)
    live = qv > LOG_FLOOR

    def backward(g):
        return (np.where(live, -p / q_floor, 0.0) * g[0, 0],)

    return _record("kl_div", np.array([[terms.sum()]]), [q], backward)


def student_t(h: Var, centers) -> Var:
    """Student-t (one degree of freedom) soft assignment of rows to centers.

    Row i of the result is proportional to ``1 / (1 + |h_i - c_k|^2)``.
    """
    h, centers = _pair(h, centers)
    if h.shape[1] != centers.shape[1]:
        raise DimensionError("student_t", h.shape, centers.shape)
    hv, cv = h.value, centers.value
    diff = hv[:, None, :] - cv[None, :, :]
    kernel = 1.0 / (1.0 + np.einsum("ikd,ikd->ik", diff, diff))
    norm = kernel.sum(axis=1, keepdims=True)
    out = kernel / norm

    def backward(g):
        g_kernel = (g - (g * out).sum(axis=1, keepdims=True)) / norm
        g_dist = -g_kernel * kernel * kernel
        pull = 2.0 * g_dist[:, :, None] * diff
        return (pull.sum(axis=1) if h.requires_grad else None,
                -pull.sum(axis=0) if centers.requires_grad else None)

    return _record("student_t", out, [h, centers], backward)


# ------------------------------------------------------------ initialisation

def xavier_init(rows: int, cols: int, seed=None) -> np.ndarray:
    """Glorot-uniform matrix with bound ``sqrt(6 / (rows + cols))``.

    ``seed`` may be an int or a ``numpy.random.Generator`` (which is advanced).
    """
    if rows < 1 or cols < 1:
        raise ContractError(f"xavier_init needs positive dimensions, got ({rows}, {cols})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


# ----------------------------------------------------------------- optimiser

class Adam:
    """Adam with bias correction, updating a dict of named arrays in place."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        for name, g in grads.items():
            if name not in params:
                raise ContractError(f"gradient for unknown parameter {name!r}")
            if params[name].shape != g.shape:
                raise DimensionError(f"adam[{name}]", params[name].shape, g.shape)
            if name in self.m and self.m[name].shape != g.shape:
                raise DimensionError(f"adam-state[{name}]", self.m[name].shape, g.shape)

        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        # bias correction folded into the step size and epsilon:
        #   m_hat / (sqrt(v_hat) + eps) == m / (sqrt(v) + eps * c2) * c2 / c1
        c1 = 1.0 - b1 ** t
        c2 = np.sqrt(1.0 - b2 ** t)
        step = self.lr * c2 / c1
        eps = self.eps * c2
        for name, g in grads.items():
            m = self.m.get(name)
            v = self.v.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                v = self.v[name] = np.zeros_like(g)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            denom = np.sqrt(v)
            denom += eps
            np.divide(m, denom, out=denom)
            denom *= step
            params[name] -= denom
        return params
