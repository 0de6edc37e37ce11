import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcebench.pauli import (
    CliffordTableau,
    PauliString,
    commutes,
    enumerate_single_qubit_cliffords,
    multiply,
    random_clifford,
)
from pcebench.circuit import Circuit, clifford_tableau_of, tableau_to_gates

from dense import circuit_unitary


@st.composite
def paulis(draw, n=None):
    n = n if n is not None else draw(st.integers(1, 3))
    return PauliString(n, draw(st.integers(0, (1 << n) - 1)), draw(st.integers(0, (1 << n) - 1)),
                       draw(st.integers(0, 3)))


@st.composite
def pauli_pairs(draw):
    n = draw(st.integers(1, 3))
    return draw(paulis(n)), draw(paulis(n))


def test_label_round_trip():
    for label in ["XIZY", "-ZZ", "+iX", "-iYI"]:
        p = PauliString.from_label(label)
        assert PauliString.from_label(str(p)) == p


def test_qubit_zero_is_leftmost():
    p = PauliString.from_label("XI")
    x = np.array([[0, 1], [1, 0]])
    assert np.allclose(p.to_matrix(), np.kron(x, np.eye(2)))
    assert p.char(0) == "X" and p.char(1) == "I"


@given(pauli_pairs())
def test_product_matches_dense(pq):
    p, q = pq
    assert np.allclose(multiply(p, q).to_matrix(), p.to_matrix() @ q.to_matrix())


@given(pauli_pairs())
def test_commutation_matches_dense(pq):
    p, q = pq
    a, b = p.to_matrix(), q.to_matrix()
    assert commutes(p, q) == np.allclose(a @ b, b @ a)


@given(paulis())
def test_hermitian_flag(p):
    m = p.to_matrix()
    assert p.is_hermitian == np.allclose(m, m.conj().T)


def test_single_qubit_clifford_group_has_24_elements():
    group = enumerate_single_qubit_cliffords()
    assert len(group) == 24
    assert len({t.key() for t in group}) == 24
    assert all(t.is_valid() for t in group)


def _dense(t: CliffordTableau) -> np.ndarray:
    return circuit_unitary(Circuit(n_data=t.n, gates=tuple(tableau_to_gates(t))))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_random_clifford_conjugation_matches_dense(n, rng):
    for _ in range(5):
        t = random_clifford(n, rng)
        assert t.is_valid()
        u = _dense(t)
        for label in itertools.product("IXYZ", repeat=n):
            p = PauliString.from_label("".join(label))
            assert np.allclose(t.conjugate(p).to_matrix(), u @ p.to_matrix() @ u.conj().T)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_inverse_and_synthesis(n, rng):
    for _ in range(5):
        t = random_clifford(n, rng)
        assert t.then(t.inverse()).key() == CliffordTableau.identity(n).key()
        assert clifford_tableau_of(Circuit(n_data=n, gates=tuple(tableau_to_gates(t)))).key() == t.key()


def test_random_single_qubit_clifford_is_uniform():
    rng = np.random.default_rng(7)
    keys = {t.key(): i for i, t in enumerate(enumerate_single_qubit_cliffords())}
    draws = 24 * 400
    counts = np.bincount([keys[random_clifford(1, rng).key()] for _ in range(draws)], minlength=24)
    expected = draws / 24
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 23 degrees of freedom; 49.7 is the 0.999 quantile.
    assert chi2 < 49.7
