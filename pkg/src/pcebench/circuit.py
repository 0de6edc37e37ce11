"""Circuit IR, random Clifford circuits, mirroring and global folding."""

from __future__ import annotations

import functools

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .pauli import (
    CliffordTableau,
    PauliString,
    conjugate_local,
    local_table,
    matrix_key,
)

ONE_QUBIT_CLIFFORDS = ("H", "S", "SDG", "X", "Y", "Z")
TWO_QUBIT_CLIFFORDS = ("CX", "CZ", "SWAP")
ROTATIONS = ("RX", "RY", "RZ")
# CY only appears when controlled Paulis are expanded for simulation.
_ARITY = {
    **{k: 1 for k in ONE_QUBIT_CLIFFORDS + ROTATIONS},
    "CX": 2, "CY": 2, "CZ": 2, "SWAP": 2,
    "MEASURE": 1, "RESET": 1,
}
GATE_KINDS = tuple(_ARITY) + ("CPAULI", "CHANNEL")
NON_UNITARY = ("MEASURE", "RESET", "CHANNEL")

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CY": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, -1j], [0, 0, 1j, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_INVERSE = {"S": "SDG", "SDG": "S"}
_CONTROLLED = {"X": "CX", "Y": "CY", "Z": "CZ"}


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """``exp(-i angle P / 2)`` for ``P`` the rotation axis."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise ValueError(f"{kind} is not a rotation")


def is_clifford_angle(angle: float) -> bool:
    k = angle / (math.pi / 2)
    return abs(k - round(k)) < 1e-9


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    pauli: PauliString | None = None
    label: str | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if kind == "CPAULI":
            if len(self.qubits) != 1 or self.pauli is None:
                raise ValueError("CPAULI needs one control and a data Pauli")
            if not self.pauli.is_hermitian or self.pauli.weight == 0:
                raise ValueError("CPAULI Pauli must be Hermitian and non-identity")
        elif kind == "CHANNEL":
            if not self.qubits or not self.label:
                raise ValueError("CHANNEL needs a label and at least one qubit")
        elif len(self.qubits) != _ARITY[kind]:
            raise ValueError(f"{kind} takes {_ARITY[kind]} qubit(s), got {len(self.qubits)}")
        if len(set(self.operands)) != len(self.operands):
            raise ValueError(f"repeated operand in {self}")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError("rotation angle must be finite")
        elif self.angle is not None:
            raise ValueError(f"{kind} takes no angle")

    @property
    def operands(self) -> tuple[int, ...]:
        """Every qubit the gate touches."""
        if self.kind == "CPAULI":
            return self.qubits + tuple(self.pauli.qubits())
        return self.qubits

    @property
    def is_unitary(self) -> bool:
        return self.kind not in NON_UNITARY

    @property
    def is_clifford(self) -> bool:
        if self.kind in ROTATIONS:
            return is_clifford_angle(self.angle)
        return self.is_unitary

    def matrix(self) -> np.ndarray:
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        if self.kind in ROTATIONS:
            return rotation_matrix(self.kind, self.angle)
        raise ValueError(f"{self.kind} has no small dense matrix")

    def inverse(self) -> "Gate":
        if not self.is_unitary:
            raise ValueError(f"{self.kind} has no inverse")
        if self.kind in ROTATIONS:
            return replace(self, angle=-self.angle)
        return replace(self, kind=_INVERSE.get(self.kind, self.kind))

    def expand(self) -> list["Gate"]:
        """Split a controlled Pauli into controlled single-qubit Paulis.

        A negative sign becomes a trailing Z on the control; expanded pieces
        keep the CPAULI semantics, every other gate maps to itself.
        """
        if self.kind != "CPAULI":
            return [self]
        c = self.qubits[0]
        out = [Gate(_CONTROLLED[self.pauli.char(q)], (c, q)) for q in self.pauli.qubits()]
        if self.pauli.sign < 0:
            out.append(Gate("Z", (c,), label="sign"))
        return out

    def to_text(self) -> str:
        if self.kind == "CPAULI":
            return f"CPAULI {self.qubits[0]} {self.pauli}"
        if self.kind == "CHANNEL":
            return "CHANNEL " + self.label + " " + " ".join(map(str, self.qubits))
        text = self.kind + " " + " ".join(map(str, self.qubits))
        if self.angle is not None:
            text += " " + repr(float(self.angle))
        return text

    def __str__(self) -> str:
        return self.to_text()


def gate_table(gate: Gate) -> dict | None:
    """Local conjugation table of a unitary gate, ``None`` if non-Clifford."""
    return _kind_table(gate.kind, gate.angle)


@functools.lru_cache(maxsize=4096)
def _kind_table(kind: str, angle: float | None) -> dict | None:
    if kind in ROTATIONS and not is_clifford_angle(angle):
        return None
    m = rotation_matrix(kind, angle) if kind in ROTATIONS else _FIXED[kind]
    return local_table(matrix_key(m))


def conjugate_by_gate(gate: Gate, p: PauliString) -> PauliString:
    """``G p G^dagger`` for a Clifford gate on the full register."""
    if gate.kind == "CHANNEL":
        return p
    if gate.kind == "CPAULI":
        for piece in gate.expand():
            p = conjugate_by_gate(piece, p)
        return p
    if not gate.is_clifford:
        raise ValueError(f"{gate} is not a Clifford gate")
    return conjugate_local(p, gate_table(gate), gate.qubits)


@dataclass(frozen=True)
class Circuit:
    n_data: int
    n_ancilla: int = 0
    gates: tuple[Gate, ...] = ()
    label: str = ""
    seed: int | None = None
    depth: int | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "notes", tuple(self.notes))
        if self.n_data < 1 or self.n_ancilla < 0:
            raise ValueError("need n_data >= 1 and n_ancilla >= 0")
        total = self.n_qubits
        for g in self.gates:
            for q in g.operands:
                if not 0 <= q < total:
                    raise ValueError(f"operand {q} of {g} outside 0..{total - 1}")
            if g.kind == "CPAULI":
                if g.pauli.n != self.n_data:
                    raise ValueError("CPAULI Pauli must span the data register")
                if g.qubits[0] < self.n_data:
                    raise ValueError("CPAULI control must be an ancilla")

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_ancilla

    def __len__(self) -> int:
        return len(self.gates)

    def with_gates(self, gates: Iterable[Gate], **changes) -> "Circuit":
        return replace(self, gates=tuple(gates), **changes)

    def is_clifford(self) -> bool:
        return all(g.is_clifford or not g.is_unitary for g in self.gates)

    def is_unitary(self) -> bool:
        return all(g.is_unitary for g in self.gates)

    def measured_qubits(self) -> list[int]:
        return [g.qubits[0] for g in self.gates if g.kind == "MEASURE"]

    def with_measurements(self) -> "Circuit":
        """Append Z measurements on every qubit (data first, then ancillas)."""
        extra = [Gate("MEASURE", (q,)) for q in range(self.n_qubits)]
        return self.with_gates(self.gates + tuple(extra))

    def to_text(self) -> str:
        header = f"qubits={self.n_data} ancillas={self.n_ancilla}"
        if self.seed is not None:
            header += f" seed={self.seed}"
        if self.depth is not None:
            header += f" depth={self.depth}"
        if self.label:
            header += f" label={self.label}"
        lines = [header] + [f"# {note}" for note in self.notes]
        lines += [g.to_text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.rstrip("\n") for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty circuit text")
        meta = dict(tok.split("=", 1) for tok in lines[0].split())
        n_data = int(meta["qubits"])
        notes, gates = [], []
        for ln in lines[1:]:
            if ln.startswith("#"):
                notes.append(ln[2:] if ln.startswith("# ") else ln[1:])
                continue
            gates.append(_parse_gate(ln, n_data))
        return cls(
            n_data=n_data,
            n_ancilla=int(meta.get("ancillas", 0)),
            gates=tuple(gates),
            label=meta.get("label", ""),
            seed=int(meta["seed"]) if "seed" in meta else None,
            depth=int(meta["depth"]) if "depth" in meta else None,
            notes=tuple(notes),
        )


def _parse_gate(line: str, n_data: int) -> Gate:
    parts = line.split()
    kind = parts[0].upper()
    if kind == "CPAULI":
        pauli = PauliString.from_label(parts[2])
        if pauli.n != n_data:
            raise ValueError(f"CPAULI Pauli {parts[2]} does not span {n_data} data qubits")
        return Gate("CPAULI", (int(parts[1]),), pauli=pauli)
    if kind == "CHANNEL":
        return Gate("CHANNEL", tuple(int(q) for q in parts[2:]), label=parts[1])
    if kind in ROTATIONS:
        return Gate(kind, (int(parts[1]),), angle=float(parts[2]))
    return Gate(kind, tuple(int(q) for q in parts[1:]))


# ---------------------------------------------------------------------------
# Tableaux, propagation, ideal values


def clifford_tableau_of(c: Circuit) -> CliffordTableau:
    """Tableau of the whole circuit acting on all ``n_qubits``."""
    n = c.n_qubits
    images_x = [PauliString.single(n, q, "X") for q in range(n)]
    images_z = [PauliString.single(n, q, "Z") for q in range(n)]
    for g in c.gates:
        if g.kind in ("MEASURE", "RESET"):
            raise ValueError("tableau undefined for non-unitary circuits")
        images_x = [conjugate_by_gate(g, p) for p in images_x]
        images_z = [conjugate_by_gate(g, p) for p in images_z]
    return CliffordTableau(n, tuple(images_x), tuple(images_z))


def ideal_zero_state_expectation(c: Circuit, observable: PauliString) -> int:
    """``<0|U^dag O U|0>`` for a Clifford circuit and Hermitian Pauli ``O``.

    Returns -1, 0 or +1.  ``O`` acts on the data register.
    """
    n = c.n_qubits
    o = observable.embed(n, range(observable.n)) if observable.n != n else observable
    # Heisenberg picture: walk the inverse circuit.
    for g in reversed(c.gates):
        if not g.is_unitary:
            continue
        o = conjugate_by_gate(g.inverse(), o)
    if o.x:
        return 0
    return o.sign


def inverse_circuit(c: Circuit) -> Circuit:
    if not c.is_unitary():
        raise ValueError("cannot invert a circuit with measurements, resets or channels")
    return c.with_gates(g.inverse() for g in reversed(c.gates))


def mirror(c: Circuit) -> Circuit:
    """``c`` followed by its gate-wise inverse."""
    if not c.is_unitary():
        raise ValueError("mirror needs a measurement-free unitary payload")
    inv = [g.inverse() for g in reversed(c.gates)]
    return c.with_gates(c.gates + tuple(inv), label=(c.label + "-mirror").lstrip("-"))


def fold_global(c: Circuit, scale: float) -> Circuit:
    """Global unitary folding ``U -> U (U^dag U)^k`` plus a partial fold.

    With ``G`` gates, ``k = floor((scale - 1) / 2)`` full folds are applied and
    the trailing ``r = round((scale - 1 - 2k) G / 2)`` gates are folded once
    more (their inverse followed by themselves), so the result has
    ``G (1 + 2k) + 2r`` gates.
    """
    if scale < 1:
        raise ValueError(f"scale factor must be >= 1, got {scale}")
    if not c.is_unitary():
        raise ValueError("fold_global needs a measurement-free unitary payload")
    gates = list(c.gates)
    count = len(gates)
    inv = [g.inverse() for g in reversed(gates)]
    k = int(math.floor((scale - 1) / 2 + 1e-12))
    r = int(math.floor((scale - 1 - 2 * k) * count / 2 + 0.5 + 1e-9))
    r = min(r, count)
    out = list(gates)
    for _ in range(k):
        out += inv + gates
    if r:
        tail = gates[count - r:]
        out += [g.inverse() for g in reversed(tail)] + tail
    return c.with_gates(out)


# ---------------------------------------------------------------------------
# Random Clifford circuits


def random_clifford_circuit(n: int, depth: int, rng: np.random.Generator, seed: int | None = None) -> Circuit:
    """Layered random Clifford circuit.

    Each layer draws a subset size uniformly from ``1..n`` and a random subset
    of that size, pairs the shuffled subset into two-qubit gates (CX or CZ)
    and puts a random one-qubit Clifford on the leftover qubit, if any.
    """
    if n < 1 or depth < 1:
        raise ValueError("need n >= 1 and depth >= 1")
    gates = []
    for _ in range(depth):
        size = int(rng.integers(1, n + 1))
        subset = [int(q) for q in rng.permutation(n)[:size]]
        while len(subset) >= 2:
            a, b = subset.pop(), subset.pop()
            gates.append(Gate(("CX", "CZ")[int(rng.integers(2))], (a, b)))
        if subset:
            gates.append(Gate(ONE_QUBIT_CLIFFORDS[int(rng.integers(len(ONE_QUBIT_CLIFFORDS)))], (subset[0],)))
    return Circuit(
        n_data=n,
        gates=tuple(gates),
        label="random-clifford",
        seed=seed,
        depth=depth,
        notes=("layer rule: subset size ~ U{1..n}; disjoint pairs -> CX/CZ; leftover -> 1q Clifford",),
    )


# ---------------------------------------------------------------------------
# Tableau synthesis


def tableau_to_gates(t: CliffordTableau, offset: int = 0) -> list[Gate]:
    """Synthesize a gate list (H, S, SDG, CX, SWAP, Paulis) realizing ``t``.

    Sweeps the qubits in order: the current images of ``X_i`` and ``Z_i`` are
    reduced to ``X_i`` and ``Z_i`` with gates that leave earlier qubits alone.
    The reducing circuit ``V`` satisfies ``V U = I``; the returned list is
    ``V^dagger``.  ``offset`` shifts every qubit index.
    """
    n = t.n
    xs = list(t.images_x)
    zs = list(t.images_z)
    reducer: list[Gate] = []

    def apply(g: Gate) -> None:
        reducer.append(g)
        for lst in (xs, zs):
            for j in range(len(lst)):
                lst[j] = conjugate_by_gate(g, lst[j])

    for i in range(n):
        # Image of X_i -> X_i.
        a = xs[i]
        for q in range(i, n):
            ch = a.char(q)
            if ch == "Z":
                apply(Gate("H", (q,)))
            elif ch == "Y":
                apply(Gate("SDG", (q,)))
        a = xs[i]
        support = [q for q in range(i, n) if a.char(q) != "I"]
        pivot = support[0]
        for q in support[1:]:
            apply(Gate("CX", (pivot, q)))
        if pivot != i:
            apply(Gate("SWAP", (pivot, i)))
        # Image of Z_i -> Z_i while keeping X_i fixed.
        apply(Gate("H", (i,)))
        b = zs[i]
        if b.char(i) == "Y":
            apply(Gate("SDG", (i,)))
        b = zs[i]
        for q in range(i + 1, n):
            ch = b.char(q)
            if ch == "Z":
                apply(Gate("H", (q,)))
            elif ch == "Y":
                apply(Gate("SDG", (q,)))
        b = zs[i]
        for q in range(i + 1, n):
            if b.char(q) != "I":
                apply(Gate("CX", (i, q)))
        apply(Gate("H", (i,)))
    for i in range(n):
        flip_x = xs[i].phase == 2
        flip_z = zs[i].phase == 2
        if flip_x and flip_z:
            apply(Gate("Y", (i,)))
        elif flip_x:
            apply(Gate("Z", (i,)))
        elif flip_z:
            apply(Gate("X", (i,)))
    out = [g.inverse() for g in reversed(reducer)]
    if offset:
        out = [replace(g, qubits=tuple(q + offset for q in g.qubits)) for g in out]
    return out


def expand_gates(gates: Sequence[Gate]) -> list[Gate]:
    out = []
    for g in gates:
        out += g.expand()
    return out
