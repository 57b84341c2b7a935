"""Dense 64-bit tensor with define-by-run reverse-mode differentiation.

A forward pass records, on every result that depends on a ``requires_grad``
input, its parents and a closure mapping the output adjoint to parent adjoints.
:class:`ComputeGraph` replays those closures once, in reverse topological order,
and then releases the graph; a second backward over the same graph is rejected.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Iterator, Sequence

import numpy as np

from contracts.errors import ContractError, GraphError, NumericError

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

# Per-thread (per-context) switch; worker threads start with recording enabled.
_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference on frozen networks)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor:
    """n-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op", "_spent")

    def __init__(self, data: np.ndarray | Sequence[float] | float, requires_grad: bool = False, name: str = "") -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = "leaf"
        self._spent = False

    # -- construction -------------------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{op}: produced non-finite values")
        out = cls.__new__(cls)
        out.data = data if data.dtype == np.float64 else data.astype(np.float64)
        out.grad = None
        out.name = ""
        out._op = op
        out._spent = False
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @classmethod
    def zeros(cls, *dims: int, requires_grad: bool = False, name: str = "") -> Tensor:
        return cls(np.zeros(dims), requires_grad=requires_grad, name=name)

    @classmethod
    def ones(cls, *dims: int, requires_grad: bool = False, name: str = "") -> Tensor:
        return cls(np.ones(dims), requires_grad=requires_grad, name=name)

    # -- introspection ------------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    shape = dims

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward is None and not self._spent

    @property
    def op(self) -> str:
        return self._op

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got dims {self.dims}")
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate ``grad`` of every requires_grad leaf with d(self)/d(leaf)."""
        ComputeGraph(self).backward()

    # -- operators (thin wrappers over autodiff.ops) ------------------------

    def __add__(self, other: Tensor | float) -> Tensor:
        from autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Tensor | float) -> Tensor:
        from autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Tensor | float) -> Tensor:
        from autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from autodiff import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from autodiff import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from autodiff import ops

        return ops.matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(dims={self.dims}, op={self._op}{flag})"


class ComputeGraph:
    """Topologically ordered record of the operations that produced *root*."""

    def __init__(self, root: Tensor) -> None:
        self.root = root
        self.nodes = self._topological(root)

    @staticmethod
    def _topological(root: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        root = self.root
        if root._spent or any(node._spent for node in self.nodes):
            raise GraphError("backward called twice on the same graph; run a new forward pass first")
        if root.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got dims {root.dims}")
        if not root.requires_grad:
            raise ContractError("loss does not depend on any tensor that requires grad")
        if not np.all(np.isfinite(root.data)):
            raise NumericError("backward: loss is not finite")

        adjoints: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            grad = adjoints.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = grad.copy() if node.grad is None else node.grad + grad
                    if not np.all(np.isfinite(node.grad)):
                        raise NumericError(f"backward: non-finite gradient for {node.name or 'leaf'}")
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                adjoints[key] = adjoints[key] + parent_grad if key in adjoints else parent_grad

        for node in self.nodes:
            if node._backward is not None:
                node._spent = True
                node._backward = None
                node._parents = ()
