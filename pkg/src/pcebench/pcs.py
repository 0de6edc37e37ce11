"""Pauli check pairs, multi-layer sandwiches and the Markov error model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import ROTATIONS, Circuit, Gate, conjugate_by_gate
from .pauli import PauliString, commutes

SCOPES = ("clifford_only", "full_circuit")
_AXIS = {"RX": "X", "RY": "Y", "RZ": "Z"}


class CheckNotFound(LookupError):
    """No left check exists for a requested right check."""

    def __init__(self, right: PauliString, where: str = "payload"):
        super().__init__(f"no Pauli check pair for right={right} through the {where}")
        self.right = right


@dataclass(frozen=True)
class CheckPair:
    right: PauliString
    left: PauliString

    def __str__(self) -> str:
        return f"R={self.right}, L={self.left}"


def propagate(right: PauliString, gates: Sequence[Gate]) -> PauliString | None:
    """Push ``right`` forward through ``gates``; ``None`` if a rotation blocks it.

    Clifford gates conjugate exactly.  A non-Clifford rotation
    ``exp(-i theta P / 2)`` lets the current string through only if it
    commutes with ``P``.  This is sufficient for ``L U R = U`` but not
    necessary, so ``None`` is conservative.
    """
    p = right
    for g in gates:
        if g.kind in ("MEASURE", "RESET"):
            raise ValueError("payload must not contain measurements or resets")
        if g.kind == "CHANNEL":
            continue
        if g.kind in ROTATIONS and not g.is_clifford:
            axis = PauliString.single(p.n, g.qubits[0], _AXIS[g.kind])
            if not commutes(p, axis):
                return None
            continue
        p = conjugate_by_gate(g, p)
    return p


def find_check_pair(payload: Circuit, right: PauliString) -> CheckPair | None:
    """Left partner ``L = U R U^dagger`` of ``right``, or ``None`` when not found."""
    if payload.n_ancilla:
        raise ValueError("payload must act on data qubits only")
    if right.n != payload.n_data:
        raise ValueError(f"right check has {right.n} qubits, payload has {payload.n_data}")
    if not right.is_hermitian or right.weight == 0:
        raise ValueError(f"right check {right} must be a Hermitian non-identity Pauli")
    left = propagate(right, payload.gates)
    if left is None:
        return None
    return CheckPair(right, left)


def z_rights(n: int, m: int) -> list[PauliString]:
    """Single-qubit Z rights on the lowest-index qubits ``0..m-1``."""
    if m > n:
        raise ValueError(f"only {n} single-qubit Z checks exist, asked for {m}")
    return [PauliString.single(n, q, "Z") for q in range(m)]


def x_rights(n: int, m: int) -> list[PauliString]:
    if m > n:
        raise ValueError(f"only {n} single-qubit X checks exist, asked for {m}")
    return [PauliString.single(n, q, "X") for q in range(m)]


def _gf2_rank(vectors: Sequence[int]) -> int:
    basis: list[int] = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def search_rights(payload: Circuit, count: int, max_weight: int | None = None) -> list[PauliString]:
    """Greedy search for ``count`` independent, mutually commuting rights.

    Candidates are tried in order: single-qubit Z on increasing qubits, other
    Z-type strings by weight, then all remaining strings by weight.  A
    candidate is taken when it passes through the payload and keeps the set
    independent and commuting.
    """
    n = payload.n_data
    max_weight = n if max_weight is None else max_weight
    chosen: list[PauliString] = []

    def candidates():
        for w in range(1, max_weight + 1):
            for qs in itertools.combinations(range(n), w):
                yield PauliString(n, 0, sum(1 << q for q in qs))
        for w in range(1, max_weight + 1):
            for qs in itertools.combinations(range(n), w):
                for kinds in itertools.product("XYZ", repeat=w):
                    if all(k == "Z" for k in kinds):
                        continue
                    p = PauliString.identity(n)
                    for q, k in zip(qs, kinds):
                        p = p * PauliString.single(n, q, k)
                    yield p.unsigned()

    for cand in candidates():
        if len(chosen) == count:
            break
        if not all(commutes(cand, c) for c in chosen):
            continue
        vecs = [c.x | (c.z << n) for c in chosen] + [cand.x | (cand.z << n)]
        if _gf2_rank(vecs) < len(vecs):
            continue
        if find_check_pair(payload, cand) is not None:
            chosen.append(cand)
    if len(chosen) < count:
        raise CheckNotFound(PauliString.identity(n), f"payload (found {len(chosen)} of {count})")
    return chosen


@dataclass(frozen=True)
class SandwichPlan:
    """Layers of checks around a payload.

    Layer ``j`` (0-based) uses ancilla ``n_data + ancilla_map[j]``; layer 0 is
    innermost.  With ``scope="clifford_only"`` the optional ``prefix`` (e.g. a
    state preparation) runs unprotected before the sandwich; with
    ``"full_circuit"`` everything in ``payload`` is protected.
    """

    payload: Circuit
    layers: tuple[CheckPair, ...] = ()
    ancilla_map: tuple[int, ...] | None = None
    scope: str = "full_circuit"
    prefix: Circuit | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.ancilla_map is None:
            object.__setattr__(self, "ancilla_map", tuple(range(len(self.layers))))
        if len(self.ancilla_map) != len(self.layers) or len(set(self.ancilla_map)) != len(self.layers):
            raise ValueError("need exactly one distinct ancilla per layer")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")

    @classmethod
    def from_rights(cls, payload: Circuit, rights: Sequence[PauliString], **kw) -> "SandwichPlan":
        pairs = []
        for r in rights:
            pair = find_check_pair(payload, r)
            if pair is None:
                raise CheckNotFound(r)
            pairs.append(pair)
        return cls(payload, tuple(pairs), **kw)

    def manifest(self) -> list[str]:
        lines = [f"scope={self.scope} layers={len(self.layers)}"]
        lines += [f"layer {j + 1}: {pair}" for j, pair in enumerate(self.layers)]
        return lines


def build_sandwich(plan: SandwichPlan, max_ancillas: int = 16, measure: bool = True,
                   validate: bool = True) -> Circuit:
    """Emit the checked circuit with Z measurements on all qubits.

    Per layer: ancilla prepared with H, controlled-R before the payload,
    controlled-L after it, then H and a Z measurement on the ancilla.  Shots
    with all-zero ancilla bits pass post-selection.
    """
    payload = plan.payload
    n = payload.n_data
    m = len(plan.layers)
    if m > max_ancillas:
        raise ValueError(f"{m} layers exceed the ancilla budget of {max_ancillas}")
    for pair in plan.layers if validate else ():
        left = propagate(pair.right, payload.gates)
        if left is None or left != pair.left:
            raise ValueError(f"invalid check pair {pair}")
    n_anc = max(plan.ancilla_map) + 1 if m else 0
    anc = [n + a for a in plan.ancilla_map]
    gates: list[Gate] = []
    if plan.prefix is not None:
        if plan.prefix.n_data != n or plan.prefix.n_ancilla:
            raise ValueError("prefix must act on the payload's data register")
        gates += plan.prefix.gates
    gates += [Gate("H", (a,)) for a in anc]
    for j in reversed(range(m)):
        gates.append(Gate("CPAULI", (anc[j],), pauli=plan.layers[j].right))
    gates += payload.gates
    for j in range(m):
        gates.append(Gate("CPAULI", (anc[j],), pauli=plan.layers[j].left))
    gates += [Gate("H", (a,)) for a in anc]
    out = Circuit(
        n_data=n,
        n_ancilla=n_anc,
        gates=tuple(gates),
        label=payload.label,
        seed=payload.seed,
        depth=payload.depth,
        notes=payload.notes + tuple(plan.manifest()),
    )
    return out.with_measurements() if measure else out


def max_checks(n_qubits: int, basis: str = "z_basis") -> int:
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    if basis == "z_basis":
        return n_qubits
    if basis == "arbitrary":
        return 2 * n_qubits
    raise ValueError(f"unknown basis {basis!r}")


# ---------------------------------------------------------------------------
# Markov error model


@dataclass(frozen=True)
class MarkovModel:
    """Per-check transition probabilities over (detected, undetected, ok)."""

    epsilon: float
    t_d: float = 0.0
    t_u: float = 0.0
    t_ok: float = 1.0

    def __post_init__(self):
        for v in (self.epsilon, self.t_d, self.t_u, self.t_ok):
            if not 0 <= v <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.t_d + self.t_u + self.t_ok > 1 + 1e-12:
            raise ValueError("t_d + t_u + t_ok must not exceed 1")

    def transition_matrix(self) -> np.ndarray:
        return np.array([
            [1.0, 0.5, self.t_d],
            [0.0, 0.5, self.t_u],
            [0.0, 0.0, self.t_ok],
        ])

    def initial_state(self) -> np.ndarray:
        return np.array([0.0, self.epsilon, 1.0 - self.epsilon])


def markov_logical_error(model: MarkovModel, m: int) -> float:
    """Undetected-error probability among non-detected runs after ``m`` checks."""
    if m < 0:
        raise ValueError("check count must be >= 0")
    pi = model.initial_state()
    t = model.transition_matrix()
    for _ in range(m):
        pi = t @ pi
    denom = pi[1] + pi[2]
    return float(pi[1] / denom) if denom > 0 else 0.0


def perfect_check_logical_error(epsilon: float, m: int) -> float:
    """Closed form ``eps / (2^m (1 - eps) + eps)`` for ideal checks."""
    return epsilon / (2.0 ** m * (1.0 - epsilon) + epsilon)
