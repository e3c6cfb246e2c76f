"""
Tensors and the Gradient Tape

A Tensor wraps a numpy array. When a Tape is active on the current thread,
every op whose inputs require gradients appends an OpRecord (inputs, output,
backward rule) to it. Records are appended in execution order, which is a
topological order, so backward() walks them in reverse exactly once.

Outside a Tape nothing is recorded: inference costs no bookkeeping.

Usage:
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        loss = (x * x).sum()
    backward(loss, tape)
    x.grad   # -> 2 * x
"""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from rashvit.src.errors import NonScalarLossError

# Per-thread stack of active tapes; a tape is confined to the thread that opened it
_local = threading.local()


def _tape_stack() -> List["Tape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    """The innermost tape opened on this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    Dense N-d array with optional gradient participation.

    Attributes:
        data: Row-major numpy array (float32 by default, float64 for checks)
        requires_grad: Whether ops on this tensor are recorded
        grad: Gradient filled in by backward()
        name: Optional parameter path, e.g. "stage2.block0.shsa.Wq"
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        array = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float32)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    # ------------------------------------------------------------------
    # array-like properties
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    # ------------------------------------------------------------------
    # operator sugar (implemented in ops)
    # ------------------------------------------------------------------

    def __add__(self, other):
        from rashvit.src.diffcore import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from rashvit.src.diffcore import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from rashvit.src.diffcore import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from rashvit.src.diffcore import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from rashvit.src.diffcore import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from rashvit.src.diffcore import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from rashvit.src.diffcore import ops
        return ops.div(self, other)

    def __neg__(self):
        from rashvit.src.diffcore import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from rashvit.src.diffcore import ops
        return ops.matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        from rashvit.src.diffcore import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from rashvit.src.diffcore import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from rashvit.src.diffcore import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class OpRecord:
    """One recorded op: output = op(*inputs), with its vector-Jacobian rule."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class Tape:
    """
    Ordered record of the ops of one forward pass.

    Use as a context manager; records are only collected while it is open.
    """

    def __init__(self):
        self.records: List[OpRecord] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def op_counts(self) -> Dict[str, int]:
        """Histogram of recorded op names."""
        counts: Dict[str, int] = {}
        for record in self.records:
            counts[record.op] = counts.get(record.op, 0) + 1
        return counts


def emit(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, rule: BackwardRule) -> Tensor:
    """
    Wrap an op result in a Tensor and record it on the active tape.

    The output dtype is the common dtype of the inputs.
    """
    dtype = np.result_type(*[t.dtype for t in inputs])
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(np.asarray(out_data, dtype=dtype), requires_grad=track)
    if track:
        tape.records.append(OpRecord(op, tuple(inputs), out, rule))
    return out


def backward(
    loss: Tensor,
    tape: Tape,
    wrt: Optional[Sequence[Tensor]] = None,
) -> List[np.ndarray]:
    """
    Reverse-mode sweep over the tape.

    Sets .grad on every leaf tensor that requires gradients and took part in
    the pass. Tensors listed in `wrt` always receive a gradient, zero when
    the loss does not depend on them.

    Args:
        loss: Scalar tensor produced on `tape`
        tape: Tape recorded during the forward pass
        wrt: Tensors whose gradients to return (in order)

    Returns:
        Gradients for `wrt` (empty list when wrt is None)

    Raises:
        NonScalarLossError: If loss has more than one element
    """
    if loss.size != 1:
        raise NonScalarLossError(f"loss must be scalar, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}
    produced = {id(r.output) for r in tape.records}

    for record in reversed(tape.records):
        upstream = grads.pop(id(record.output), None)
        if upstream is None:
            continue
        input_grads = record.backward(upstream)
        for tensor, grad in zip(record.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            grad = np.asarray(grad, dtype=tensor.dtype)
            if grad.shape != tensor.shape:
                grad = grad.reshape(tensor.shape)
            key = id(tensor)
            if key not in produced:
                leaves[key] = tensor
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad

    for key, tensor in leaves.items():
        tensor.grad = grads[key]

    if loss.requires_grad and id(loss) not in produced:
        loss.grad = np.ones_like(loss.data)

    results = []
    for tensor in wrt or []:
        grad = grads.get(id(tensor))
        if grad is None or id(tensor) in produced:
            grad = tensor.grad if id(tensor) in leaves else np.zeros_like(tensor.data)
        tensor.grad = grad
        results.append(grad)
    return results
