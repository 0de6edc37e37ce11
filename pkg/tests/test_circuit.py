import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcebench.circuit import (
    Circuit,
    Gate,
    clifford_tableau_of,
    fold_global,
    ideal_zero_state_expectation,
    inverse_circuit,
    mirror,
    random_clifford_circuit,
)
from pcebench.pauli import PauliString

from dense import circuit_unitary, zero_state


def _mixed_circuit():
    return Circuit(
        n_data=3, n_ancilla=1,
        gates=(Gate("H", (0,)), Gate("CX", (0, 1)), Gate("RZ", (2,), angle=0.3),
               Gate("CPAULI", (3,), pauli=PauliString.from_label("-XZY")),
               Gate("CHANNEL", (0, 1), label="shadow"), Gate("MEASURE", (0,))),
        label="demo", seed=5, depth=2, notes=("hello",),
    )


def test_text_round_trip():
    c = _mixed_circuit()
    back = Circuit.from_text(c.to_text())
    assert back == c
    assert back.to_text() == c.to_text()


def test_rejects_bad_gates():
    with pytest.raises(ValueError):
        Gate("CX", (0, 0))
    with pytest.raises(ValueError):
        Gate("RZ", (0,))
    with pytest.raises(ValueError):
        Circuit(n_data=2, gates=(Gate("H", (2,)),))
    with pytest.raises(ValueError):
        Circuit(n_data=2, n_ancilla=1, gates=(Gate("CPAULI", (1,), pauli=PauliString.from_label("XX")),))


@given(st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_tableau_matches_dense(n, depth, seed):
    c = random_clifford_circuit(n, depth, np.random.default_rng(seed))
    u = circuit_unitary(c)
    t = clifford_tableau_of(c)
    for q in range(n):
        for kind in "XZ":
            p = PauliString.single(n, q, kind)
            assert np.allclose(t.conjugate(p).to_matrix(), u @ p.to_matrix() @ u.conj().T)


@given(st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_ideal_expectation_matches_dense(n, depth, seed):
    c = random_clifford_circuit(n, depth, np.random.default_rng(seed))
    psi = circuit_unitary(c) @ zero_state(n)
    z = PauliString(n, 0, (1 << n) - 1)
    exact = np.real(psi.conj() @ z.to_matrix() @ psi)
    assert ideal_zero_state_expectation(c, z) == pytest.approx(exact, abs=1e-9)


def test_mirror_is_identity(rng):
    c = random_clifford_circuit(4, 10, rng)
    m = mirror(c)
    assert np.allclose(circuit_unitary(m), np.eye(16))
    assert ideal_zero_state_expectation(m, PauliString.from_label("ZZZZ")) == 1
    assert np.allclose(circuit_unitary(inverse_circuit(c)) @ circuit_unitary(c), np.eye(16))


@pytest.mark.parametrize("scale,expected", [(1, 10), (3, 30), (5, 50), (2, 20), (1.5, 16), (2.4, 24)])
def test_fold_gate_counts(scale, expected, rng):
    c = random_clifford_circuit(3, 40, rng)
    c = c.with_gates(c.gates[:10])
    assert len(fold_global(c, scale)) == expected


@pytest.mark.parametrize("scale", [1, 1.5, 2, 3, 3.7, 5])
def test_fold_preserves_unitary(scale):
    c = Circuit(n_data=2, gates=(Gate("H", (0,)), Gate("RY", (1,), angle=0.4), Gate("CX", (0, 1)),
                                Gate("S", (1,)), Gate("RZ", (0,), angle=1.1)))
    assert np.allclose(circuit_unitary(fold_global(c, scale)), circuit_unitary(c))


def test_fold_rejects_scale_below_one():
    with pytest.raises(ValueError):
        fold_global(Circuit(n_data=1, gates=(Gate("H", (0,)),)), 0.5)


def test_random_circuit_is_seeded():
    a = random_clifford_circuit(5, 20, np.random.default_rng(3))
    b = random_clifford_circuit(5, 20, np.random.default_rng(3))
    assert a == b and a.is_clifford()
