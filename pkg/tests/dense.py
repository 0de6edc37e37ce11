"""Brute-force dense-matrix oracles used by the tests."""

import numpy as np

from pcebench.circuit import Circuit, Gate


def _bits(i, n):
    return [(i >> (n - 1 - q)) & 1 for q in range(n)]


def _index(bits):
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def embed(u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Full ``2^n`` matrix of a ``k``-qubit gate; qubit 0 is the most significant bit."""
    d = 1 << n
    k = len(qubits)
    full = np.zeros((d, d), dtype=complex)
    for col in range(d):
        bits = _bits(col, n)
        sub_in = _index([bits[q] for q in qubits])
        for sub_out in range(1 << k):
            amp = u[sub_out, sub_in]
            if amp == 0:
                continue
            out = list(bits)
            for j, q in enumerate(qubits):
                out[q] = (sub_out >> (k - 1 - j)) & 1
            full[_index(out), col] += amp
    return full


def gate_unitary(g: Gate, n: int) -> np.ndarray:
    if g.kind == "CPAULI":
        c = g.qubits[0]
        p = g.pauli.embed(n, range(g.pauli.n)).to_matrix()
        proj1 = embed(np.diag([0, 1]), [c], n)
        return (np.eye(1 << n) - proj1) + proj1 @ p
    return embed(g.matrix(), g.qubits, n)


def circuit_unitary(c: Circuit) -> np.ndarray:
    n = c.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for g in c.gates:
        if g.kind in ("MEASURE", "CHANNEL"):
            continue
        u = gate_unitary(g, n) @ u
    return u


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1
    return psi
