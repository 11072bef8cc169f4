"""Dense float32 tensor with tape-based reverse-mode gradients.

Values are stored as C-contiguous (row-major) float32 arrays.  Reductions
and the finite-difference checker accumulate in float64.  Gradients are
accumulated into ``.grad`` by :meth:`DiffTensor.backward`; the tape is a
per-output list of parent tensors plus a backward closure, built only while
gradients are globally enabled (see :func:`no_grad`).
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericError(ValueError):
    """Non-finite values reached an operation that requires finite input."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class DiffTensor:
    __slots__ = ("data", "grad", "requires_grad", "op_name", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: Sequence["DiffTensor"] = (),
        _backward: Callable[[np.ndarray], None] | None = None,
        op_name: str = "leaf",
        validate: bool = True,
    ):
        arr = np.asarray(data, dtype=np.float32)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        if validate and not np.isfinite(arr).all():
            raise NumericError(f"non-finite values in tensor for op '{op_name}'")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self.op_name = op_name
        self._parents = tuple(_parents) if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    # -- introspection -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "DiffTensor":
        return DiffTensor(self.data, requires_grad=False, validate=False, op_name="detach")

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"DiffTensor(shape={self.shape}, op={self.op_name}, requires_grad={self.requires_grad})"

    # -- gradient machinery -------------------------------------------------

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != tensor shape {self.data.shape} (op {self.op_name})"
            )
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None, free_graph: bool = True) -> None:
        """Reverse-mode sweep seeding ``grad`` (ones for a scalar output).

        ``free_graph`` drops the tape afterwards so intermediate buffers can
        be reclaimed between training steps.
        """
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.size != 1:
                raise DimensionError("backward() without gradient requires a scalar output")
            grad = np.ones_like(self.data)
        # iterative topological order (children after parents)
        topo: list[DiffTensor] = []
        visited: set[int] = set()
        stack: list[tuple[DiffTensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        self.accumulate_grad(np.asarray(grad, dtype=np.float32))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        if free_graph:
            for node in topo:
                if node is not self or node._backward is not None:
                    node._parents = ()
                    node._backward = None


def tensor(data, requires_grad: bool = False) -> DiffTensor:
    """Leaf constructor; validates finiteness."""
    return DiffTensor(data, requires_grad=requires_grad)


def make_op(
    data: np.ndarray,
    parents: Iterable[DiffTensor],
    backward: Callable[[np.ndarray], None],
    op_name: str,
) -> DiffTensor:
    """Wrap an op result: grad flows if any parent requires it."""
    parents = tuple(parents)
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    return DiffTensor(
        data,
        requires_grad=needs,
        _parents=parents if needs else (),
        _backward=backward if needs else None,
        op_name=op_name,
        validate=False,
    )


def check_finite(arr: np.ndarray, op_name: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite input to {op_name}")
