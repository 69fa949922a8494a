"""Dense tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Operations in :mod:`attnmorph.engine.ops`
link their output to the inputs that produced it; :func:`backward` records the
reachable graph into a :class:`Tape` (a topologically ordered list of nodes) and
replays it in reverse, accumulating ``dloss/dnode`` into every node that
requires a gradient.
"""

import contextlib

import numpy as np

from ..errors import InputError, StateError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (evaluation mode)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    """An n-dimensional real array that can take part in differentiation.

    Parameters
    ----------
    values : array_like
        Initial values. Copied into a contiguous array of ``dtype``.
    requires_grad : bool
        Whether gradients should be accumulated into this tensor.
    dtype : numpy dtype, optional
        Floating dtype; float64 unless ``values`` is already float32.
    """

    def __init__(self, values, requires_grad=False, dtype=None):
        if dtype is None:
            dtype = values.dtype if isinstance(values, np.ndarray) and values.dtype == np.float32 else np.float64
        self.data = np.array(values, dtype=dtype, copy=True, order="C")
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._parents = ()
        self._backward = None
        self._tape = None
        self.op = "leaf"

    @classmethod
    def _result(cls, data, parents, backward_fn, op):
        # Wrap an op output without copying; link it into the graph when needed.
        out = cls.__new__(cls)
        out.data = np.ascontiguousarray(data)
        out._grad = None
        out._tape = None
        out.op = op
        track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward_fn if track else None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def values(self):
        """Flat row-major view of the data."""
        return self.data.ravel()

    @property
    def grad(self):
        if not self.requires_grad:
            return None
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        if value is None:
            self._grad = None
            return
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise InputError(f"grad shape {value.shape} does not match tensor shape {self.data.shape}")
        self._grad = value.copy()

    def zero_grad(self):
        if self.requires_grad:
            self._grad = np.zeros_like(self.data)

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise InputError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # Arithmetic sugar; see ops for the definitions.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sum(self):
        from . import ops
        return ops.total(self)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


class Tape:
    """Topologically ordered record of the graph that produced ``loss``.

    Every node appears after all nodes it was computed from, so replaying the
    record in reverse visits each node only after all of its consumers.
    """

    def __init__(self, loss):
        self.loss = loss
        self.nodes = self._trace(loss)
        self.consumed = False

    @staticmethod
    def _trace(root):
        order, seen = [], set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self):
        if self.consumed:
            raise StateError("backward already ran on this tape; call reset() first")
        loss = self.loss
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = node.grad + g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
        self.consumed = True

    def reset(self):
        """Zero every gradient on the tape and allow another backward pass."""
        for node in self.nodes:
            node.zero_grad()
        self.consumed = False


def backward(loss):
    """Populate ``grad`` on every tensor that ``loss`` depends on.

    Raises
    ------
    InputError
        If ``loss`` is not a single-element tensor.
    StateError
        If ``loss`` has already been back-propagated and its tape not reset.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        shape = loss.shape if isinstance(loss, Tensor) else type(loss).__name__
        raise InputError(f"backward needs a scalar loss, got {shape}")
    if not loss.requires_grad:
        raise InputError("loss does not depend on any tensor that requires grad")
    if loss._tape is None:
        loss._tape = Tape(loss)
    loss._tape.backward()
    return loss._tape
