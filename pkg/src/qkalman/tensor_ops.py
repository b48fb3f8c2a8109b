"""Dense complex linear algebra plus a lazy operator tree for multi-qubit unitaries.

Conventions used throughout the package:

* Wire 0 is the MOST significant qubit. A basis state |q0 q1 ... q_{n-1}>
  has flat index q0*2^(n-1) + q1*2^(n-2) + ... + q_{n-1}. Ancilla
  registers are always prepended most-significant, so the state
  |0^a>|j> of an (a+s)-qubit register has flat index j.
* Operators are trees. The only execution primitive is application to a
  statevector; nothing above ``DENSE_THRESHOLD`` qubits is ever
  materialized as a dense matrix.
* ``Product((A, B))`` means the matrix product A @ B, i.e. B is applied
  first. ``Select(u0, u1)`` is |0><0| (x) u0 + |1><1| (x) u1 with the
  control on wire 0. ``Extend`` embeds a child operator on an explicit
  wire list, identity elsewhere. ``ProjectorPhase(phi, wires)`` is
  exp(i*phi*(2P - I)) where P projects onto |0...0> of the named wires;
  with an empty wire set it degenerates to the global phase exp(i*phi).

Statevector application is vectorized over a trailing batch axis, which
is also how dense blocks and small materializations are computed (apply
the tree to a batch of basis columns).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalFailureError

DENSE_THRESHOLD = 10  # qubits; above this, operators stay lazy


# ---------------------------------------------------------------------------
# dense-matrix helpers
# ---------------------------------------------------------------------------

def as_matrix(data) -> np.ndarray:
    """Coerce to a 2-D complex ndarray and insist on finite entries."""
    m = np.atleast_2d(np.asarray(data, dtype=complex))
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NumericalFailureError("matrix contains non-finite entries")
    return m


def frobenius_norm(m) -> float:
    """sqrt of the sum of squared entry moduli."""
    return float(np.linalg.norm(as_matrix(m)))


def svd(m):
    """Singular value decomposition M = W diag(S) Vh.

    Returns
    -------
    (W, S, Vh) with S descending. Raises NumericalFailureError if the
    underlying iteration does not converge.
    """
    m = as_matrix(m)
    try:
        w, s, vh = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"SVD did not converge: {exc}") from exc
    return w, s, vh


def basis_state(nqubits: int, index: int) -> np.ndarray:
    psi = np.zeros(2**nqubits, dtype=complex)
    psi[index] = 1.0
    return psi


# ---------------------------------------------------------------------------
# operator tree
# ---------------------------------------------------------------------------

class QOperator:
    """Base class; every node knows its qubit count and is unitary."""

    @property
    def nqubits(self) -> int:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Dense(QOperator):
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        n = int(m.shape[0]).bit_length() - 1
        if m.shape[0] != m.shape[1] or m.shape[0] != 2**n:
            raise DimensionError(f"dense operator must be 2^k square, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_nqubits", n)

    @property
    def nqubits(self):
        return self._nqubits


@dataclass(frozen=True, eq=False)
class Product(QOperator):
    """Matrix product of children; children[-1] is applied first."""

    children: tuple

    def __post_init__(self):
        kids = tuple(self.children)
        if not kids:
            raise DimensionError("Product needs at least one child")
        n = kids[0].nqubits
        if any(c.nqubits != n for c in kids):
            raise DimensionError("Product children must share a qubit count")
        object.__setattr__(self, "children", kids)

    @property
    def nqubits(self):
        return self.children[0].nqubits


@dataclass(frozen=True, eq=False)
class Adjoint(QOperator):
    child: QOperator

    @property
    def nqubits(self):
        return self.child.nqubits


@dataclass(frozen=True, eq=False)
class Select(QOperator):
    """|0><0| (x) u0 + |1><1| (x) u1, control on wire 0 (most significant)."""

    u0: QOperator
    u1: QOperator

    def __post_init__(self):
        if self.u0.nqubits != self.u1.nqubits:
            raise DimensionError("Select branches must share a qubit count")

    @property
    def nqubits(self):
        return self.u0.nqubits + 1


@dataclass(frozen=True, eq=False)
class Extend(QOperator):
    """Child operator on wires[i] (child wire i -> global wire), identity elsewhere."""

    child: QOperator
    total: int
    wires: tuple

    def __post_init__(self):
        wires = tuple(int(w) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        if len(wires) != self.child.nqubits:
            raise DimensionError("Extend wires must match the child qubit count")
        if len(set(wires)) != len(wires):
            raise DimensionError("Extend wires must be distinct")
        if wires and (min(wires) < 0 or max(wires) >= self.total):
            raise DimensionError("Extend wires out of range")
        if self.total < self.child.nqubits:
            raise DimensionError("Extend cannot shrink an operator")

    @property
    def nqubits(self):
        return self.total


@dataclass(frozen=True, eq=False)
class ProjectorPhase(QOperator):
    """exp(i*phi*(2P - I)) with P = |0..0><0..0| on the named wires."""

    phi: float
    total: int
    wires: tuple = field(default=())

    def __post_init__(self):
        wires = tuple(int(w) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        if len(set(wires)) != len(wires):
            raise DimensionError("ProjectorPhase wires must be distinct")
        if wires and (min(wires) < 0 or max(wires) >= self.total):
            raise DimensionError("ProjectorPhase wires out of range")

    @property
    def nqubits(self):
        return self.total


def identity_op(nqubits: int) -> QOperator:
    """Identity on n qubits, represented without a dense matrix."""
    return Extend(Dense(np.eye(1)), nqubits, ())


def adjoint(op: QOperator) -> QOperator:
    """Rewrite the tree so the adjoint is pushed down to the leaves."""
    if isinstance(op, Dense):
        return Dense(op.matrix.conj().T)
    if isinstance(op, Product):
        return Product(tuple(adjoint(c) for c in reversed(op.children)))
    if isinstance(op, Adjoint):
        return op.child
    if isinstance(op, Select):
        return Select(adjoint(op.u0), adjoint(op.u1))
    if isinstance(op, Extend):
        return Extend(adjoint(op.child), op.total, op.wires)
    if isinstance(op, ProjectorPhase):
        return ProjectorPhase(-op.phi, op.total, op.wires)
    raise TypeError(f"unknown operator node {type(op).__name__}")


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def _apply_batch(op: QOperator, arr: np.ndarray) -> np.ndarray:
    """Apply op to arr of shape (2**op.nqubits, batch)."""
    if isinstance(op, Dense):
        return op.matrix @ arr
    if isinstance(op, Product):
        for child in reversed(op.children):
            arr = _apply_batch(child, arr)
        return arr
    if isinstance(op, Adjoint):
        return _apply_batch(adjoint(op.child), arr)
    if isinstance(op, Select):
        half = arr.shape[0] // 2
        out = np.empty_like(arr)
        out[:half] = _apply_batch(op.u0, arr[:half])
        out[half:] = _apply_batch(op.u1, arr[half:])
        return out
    if isinstance(op, Extend):
        n, k, batch = op.total, op.child.nqubits, arr.shape[1]
        if k == 0:
            scalar = _apply_batch(op.child, np.ones((1, 1), dtype=complex))[0, 0]
            return arr * scalar
        tensor = arr.reshape((2,) * n + (batch,))
        moved = np.moveaxis(tensor, op.wires, range(k))
        rest_shape = moved.shape[k:]
        flat = moved.reshape(2**k, -1)
        flat = _apply_batch(op.child, flat)
        moved = flat.reshape((2,) * k + rest_shape)
        tensor = np.moveaxis(moved, range(k), op.wires)
        return tensor.reshape(2**n, batch)
    if isinstance(op, ProjectorPhase):
        n, batch = op.total, arr.shape[1]
        out = arr * np.exp(-1j * op.phi)
        tensor = out.reshape((2,) * n + (batch,))
        idx = [slice(None)] * (n + 1)
        for w in op.wires:
            idx[w] = 0
        tensor[tuple(idx)] *= np.exp(2j * op.phi)
        return tensor.reshape(2**n, batch)
    raise TypeError(f"unknown operator node {type(op).__name__}")


def apply(op: QOperator, psi: np.ndarray) -> np.ndarray:
    """Apply a QOperator to a statevector.

    The tree is traversed without materializing any unitary; cost is
    O(depth * 2^n) per Dense/structural node touched.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2**op.nqubits,):
        raise DimensionError(
            f"state has {psi.shape}, operator acts on {2**op.nqubits} amplitudes"
        )
    return _apply_batch(op, psi.reshape(-1, 1))[:, 0]


def materialize(op: QOperator, threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Full dense matrix of op; refuses above the qubit threshold."""
    if op.nqubits > threshold:
        raise DimensionError(
            f"refusing to materialize {op.nqubits} qubits (threshold {threshold})"
        )
    eye = np.eye(2**op.nqubits, dtype=complex)
    return _apply_batch(op, eye)


def materialize_block(op: QOperator, rows, cols) -> np.ndarray:
    """Entries <row_i| U |col_j>, computed by applying op to basis columns."""
    rows = list(rows)
    cols = list(cols)
    dim = 2**op.nqubits
    if rows and (min(rows) < 0 or max(rows) >= dim):
        raise DimensionError("row index out of range")
    if cols and (min(cols) < 0 or max(cols) >= dim):
        raise DimensionError("column index out of range")
    basis = np.zeros((dim, len(cols)), dtype=complex)
    for j, c in enumerate(cols):
        basis[c, j] = 1.0
    image = _apply_batch(op, basis)
    return image[rows, :]


def compact_operator(op: QOperator, threshold: int = DENSE_THRESHOLD) -> QOperator:
    """Materialize every subtree at or below the threshold into one Dense leaf.

    Semantically a no-op (same unitary); collapses long Product chains
    that act on few qubits, which is what makes the 14-qubit filter step
    cheap. Adjoint nodes are rewritten away on the way down.
    """
    if isinstance(op, Adjoint):
        return compact_operator(adjoint(op.child), threshold)
    if op.nqubits <= threshold:
        if isinstance(op, Dense):
            return op
        return Dense(materialize(op, threshold))
    if isinstance(op, Product):
        return Product(tuple(compact_operator(c, threshold) for c in op.children))
    if isinstance(op, Select):
        return Select(
            compact_operator(op.u0, threshold), compact_operator(op.u1, threshold)
        )
    if isinstance(op, Extend):
        return Extend(compact_operator(op.child, threshold), op.total, op.wires)
    return op


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def unitarity_residual(op: QOperator, nstates: int = 16, seed: int = 0) -> float:
    """max over random states of || U^dag U psi - psi ||_2."""
    rng = np.random.Generator(np.random.Philox(seed))
    dim = 2**op.nqubits
    worst = 0.0
    adj = adjoint(op)
    for _ in range(nstates):
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        back = apply(adj, apply(op, psi))
        worst = max(worst, float(np.linalg.norm(back - psi)))
    return worst


def op_stats(op: QOperator) -> dict:
    """Operation counts used by the per-run report: depth and node tallies."""
    counts = {"dense": 0, "product": 0, "select": 0, "extend": 0,
              "projector_phase": 0, "adjoint": 0}

    def walk(node):
        kind = type(node).__name__.lower()
        key = {"dense": "dense", "product": "product", "select": "select",
               "extend": "extend", "projectorphase": "projector_phase",
               "adjoint": "adjoint"}[kind]
        counts[key] += 1
        if isinstance(node, Product):
            return 1 + max(walk(c) for c in node.children)
        if isinstance(node, Select):
            return 1 + max(walk(node.u0), walk(node.u1))
        if isinstance(node, (Adjoint, Extend)):
            child = node.child
            return 1 + walk(child)
        return 1

    depth = walk(op)
    return {"qubits": op.nqubits, "depth": depth, **counts}
