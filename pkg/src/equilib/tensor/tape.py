"""Reverse-mode differentiation tape.

Every primitive states its backward rule in terms of other primitives, so a
vector-Jacobian product taken with ``create_graph=True`` is itself recorded and
can be differentiated again.
"""

from __future__ import annotations

import threading
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from equilib.errors import NonFiniteError, NotAncestorError, ShapeMismatchError


class Variable:
    """A value on (or off) the tape."""

    __slots__ = ("value", "requires_grad", "node", "name")

    def __init__(
        self,
        value: Any,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.node: Node | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def detach(self) -> Variable:
        return Variable(self.value, requires_grad=False, name=self.name)

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Variable(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # Arithmetic dispatches to the primitives in ``ops``.
    def __add__(self, other: Any) -> Variable:
        return _ops().add(self, other)

    def __radd__(self, other: Any) -> Variable:
        return _ops().add(other, self)

    def __sub__(self, other: Any) -> Variable:
        return _ops().sub(self, other)

    def __rsub__(self, other: Any) -> Variable:
        return _ops().sub(other, self)

    def __mul__(self, other: Any) -> Variable:
        return _ops().mul(self, other)

    def __rmul__(self, other: Any) -> Variable:
        return _ops().mul(other, self)

    def __truediv__(self, other: Any) -> Variable:
        return _ops().div(self, other)

    def __neg__(self) -> Variable:
        return _ops().neg(self)

    def __pow__(self, exponent: float) -> Variable:
        return _ops().power(self, exponent)


def _ops():
    from equilib.tensor import ops

    return ops


class Context:
    """Per-record storage handed from ``forward`` to ``backward``."""

    __slots__ = ("inputs", "attrs", "saved", "output", "keeps_output")

    def __init__(self, inputs: tuple[Variable, ...], attrs: dict[str, Any]) -> None:
        self.inputs = inputs
        self.attrs = attrs
        self.saved: tuple[Variable | np.ndarray, ...] = ()
        self.output: Variable | None = None
        self.keeps_output = False

    def save(self, *items: Variable | np.ndarray) -> None:
        self.saved = self.saved + tuple(items)

    def save_output(self) -> None:
        self.keeps_output = True

    def saved_nbytes(self) -> int:
        total = 0
        for item in self.saved:
            total += item.value.nbytes if isinstance(item, Variable) else item.nbytes
        if self.keeps_output and self.output is not None:
            total += self.output.value.nbytes
        return total


@dataclass(slots=True, eq=False)
class Node:
    """One recorded operation."""

    function: type[Function]
    ctx: Context
    inputs: tuple[Variable, ...]
    index: int = -1


class Function:
    """Base class for differentiable primitives."""

    name: ClassVar[str] = "function"

    @staticmethod
    def forward(ctx: Context, *values: np.ndarray, **attrs: Any) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Variable, **attrs: Any) -> Variable:
        ctx = Context(inputs, attrs)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            value = cls.forward(ctx, *(v.value for v in inputs), **attrs)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(
                f"Non-finite values produced by {cls.name}",
                hint="Check input scales, kernel initialization and batch-norm eps.",
            )
        tape = current_tape()
        tracked = tape.recording and any(v.requires_grad for v in inputs)
        out = Variable(value, requires_grad=tracked)
        if tracked:
            if ctx.keeps_output:
                ctx.output = out
            tape.record(Node(function=cls, ctx=ctx, inputs=inputs), out)
        return out


class Tape:
    """Records operations and accounts for the activations they keep.

    Records are never released before the tape itself is discarded, so
    ``peak_bytes`` is the byte total of everything saved while it was active.
    """

    def __init__(self, retain: bool = True) -> None:
        self.nodes: list[Node] = []
        self.recording = True
        self.retain = retain
        self.record_count = 0
        self.saved_bytes = 0
        self.peak_bytes = 0
        self.saved_count = 0

    def record(self, node: Node, output: Variable) -> None:
        node.index = self.record_count
        self.record_count += 1
        output.node = node
        self.saved_bytes += node.ctx.saved_nbytes()
        self.saved_count += len(node.ctx.saved) + int(node.ctx.keeps_output)
        self.peak_bytes = max(self.peak_bytes, self.saved_bytes)
        if self.retain:
            self.nodes.append(node)

    def __enter__(self) -> Tape:
        _stack().append(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()


_local = threading.local()


def _stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        # The ambient tape only counts; graphs stay alive through their Variables.
        stack = [Tape(retain=False)]
        _local.stack = stack
    return stack


def current_tape() -> Tape:
    return _stack()[-1]


@contextmanager
def recording(enabled: bool) -> Iterator[Tape]:
    tape = current_tape()
    previous = tape.recording
    tape.recording = enabled
    try:
        yield tape
    finally:
        tape.recording = previous


@contextmanager
def no_grad() -> Iterator[Tape]:
    with recording(False) as tape:
        yield tape


def is_recording() -> bool:
    return current_tape().recording


def _walk(
    outputs: Sequence[Variable], stop_ids: set[int]
) -> tuple[list[Variable], set[int]]:
    """Topological order (parents first) of everything reachable from outputs."""

    visited: set[int] = set()
    order: list[Variable] = []
    stack: list[tuple[Variable, bool]] = [(v, False) for v in reversed(outputs)]
    while stack:
        var, expanded = stack.pop()
        if expanded:
            order.append(var)
            continue
        if id(var) in visited:
            continue
        visited.add(id(var))
        stack.append((var, True))
        if var.node is None or id(var) in stop_ids:
            continue
        for parent in reversed(var.node.inputs):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order, visited


def _as_variable(value: Variable | np.ndarray | float) -> Variable:
    if isinstance(value, Variable):
        return value
    return Variable(value)


def backward(
    outputs: Sequence[Variable],
    cotangents: Sequence[Variable | np.ndarray | float],
    wrt: Sequence[Variable],
    *,
    create_graph: bool = False,
    stop: Sequence[Variable] = (),
    allow_unused: bool = False,
) -> list[Variable]:
    """Pull cotangents on ``outputs`` back to ``wrt``.

    Traversal does not continue past any variable in ``stop``.
    """

    seeds: dict[int, Variable] = {}
    for output, cotangent in zip(outputs, cotangents, strict=True):
        seed = _as_variable(cotangent)
        if seed.shape != output.shape:
            raise ShapeMismatchError(
                f"Cotangent shape {seed.shape} does not match output shape {output.shape}"
            )
        seeds[id(output)] = seed if id(output) not in seeds else seeds[id(output)] + seed

    stop_ids = {id(v) for v in stop}
    live_outputs = [o for o in outputs if o.requires_grad]
    order, reachable = _walk(live_outputs, stop_ids)
    for target in wrt:
        if id(target) in reachable or any(target is o for o in outputs):
            continue
        if not allow_unused:
            raise NotAncestorError(
                f"Requested gradient for {target!r}, which is not an ancestor of the output",
                hint="Make sure the variable requires grad and was used while recording.",
            )

    grads: dict[int, Variable] = dict(seeds)
    with recording(create_graph):
        for var in reversed(order):
            if var.node is None or id(var) in stop_ids:
                continue
            grad_out = grads.get(id(var))
            if grad_out is None:
                continue
            node = var.node
            input_grads = node.function.backward(node.ctx, grad_out)
            for parent, parent_grad in zip(node.inputs, input_grads, strict=True):
                if parent_grad is None or not parent.requires_grad:
                    continue
                existing = grads.get(id(parent))
                grads[id(parent)] = (
                    parent_grad if existing is None else existing + parent_grad
                )

    results: list[Variable] = []
    for target in wrt:
        found = grads.get(id(target))
        results.append(found if found is not None else Variable(np.zeros(target.shape)))
    return results


def vjp(
    output: Variable,
    cotangent: Variable | np.ndarray,
    wrt: Sequence[Variable],
    create_graph: bool = False,
) -> list[Variable]:
    """Return ``v^T J`` for every variable in ``wrt``."""

    return backward([output], [cotangent], wrt, create_graph=create_graph)


def grad(
    loss: Variable,
    params: Sequence[Variable],
    create_graph: bool = False,
) -> list[Variable]:
    """Gradient of a scalar with respect to ``params``."""

    if loss.value.size != 1:
        raise ShapeMismatchError(
            f"grad() needs a scalar output, got shape {loss.shape}",
            hint="Use vjp() with an explicit cotangent for non-scalar outputs.",
        )
    return vjp(loss, np.ones(loss.shape), params, create_graph=create_graph)
