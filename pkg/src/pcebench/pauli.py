"""Signed Pauli strings, Clifford tableaux and uniform Clifford sampling.

Conventions used everywhere in the package:

* Qubit ``j`` is bit ``j`` of the ``x``/``z`` masks and the ``j``-th character
  of a text label (qubit 0 leftmost).  Dense matrices use qubit 0 as the
  leftmost Kronecker factor.
* A :class:`PauliString` is ``i**phase`` times a tensor product of the
  literal matrices I, X, Y, Z.  With this convention ``X @ Z == -iY`` and
  ``Z @ X == iY``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_PREFIX_PHASE = {"+": 0, "+i": 1, "-": 2, "-i": 3, "": 0, "i": 1}

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
_SINGLE = {(0, 0): _I2, (1, 0): _X2, (1, 1): _Y2, (0, 1): _Z2}


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class PauliString:
    n: int
    x: int
    z: int
    phase: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError(f"bit masks exceed {self.n} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    # construction -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse ``[+|-|+i|-i]`` followed by characters from ``IXYZ``."""
        label = label.strip()
        body_start = 0
        while body_start < len(label) and label[body_start] in "+-i":
            body_start += 1
        prefix, body = label[:body_start], label[body_start:]
        if prefix not in _PREFIX_PHASE:
            raise ValueError(f"bad Pauli sign prefix {prefix!r}")
        x = z = 0
        for q, ch in enumerate(body.upper()):
            if ch == "X":
                x |= 1 << q
            elif ch == "Z":
                z |= 1 << q
            elif ch == "Y":
                x |= 1 << q
                z |= 1 << q
            elif ch != "I":
                raise ValueError(f"bad Pauli character {ch!r} in {label!r}")
        return cls(len(body), x, z, _PREFIX_PHASE[prefix])

    @classmethod
    def single(cls, n: int, qubit: int, kind: str, phase: int = 0) -> "PauliString":
        if not 0 <= qubit < n:
            raise ValueError(f"qubit {qubit} out of range for n={n}")
        bit = 1 << qubit
        x = bit if kind in "XY" else 0
        z = bit if kind in "ZY" else 0
        return cls(n, x, z, phase)

    @classmethod
    def from_xz_form(cls, n: int, x: int, z: int, exponent: int) -> "PauliString":
        """Build ``i**exponent * X^x Z^z`` (X block written to the left)."""
        return cls(n, x, z, (exponent - _popcount(x & z)) % 4)

    # views --------------------------------------------------------------
    @property
    def xz_exponent(self) -> int:
        # Y = i X Z, so the literal form picks up one factor of i per Y.
        return (self.phase + _popcount(self.x & self.z)) % 4

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ValueError(f"{self} is not Hermitian")
        return 1 if self.phase == 0 else -1

    def char(self, qubit: int) -> str:
        xb = (self.x >> qubit) & 1
        zb = (self.z >> qubit) & 1
        return "IXZY"[xb + 2 * zb]

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, 0)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.n, self.x, self.z, phase)

    def qubits(self) -> list[int]:
        return [q for q in range(self.n) if (self.support >> q) & 1]

    def is_z_type(self) -> bool:
        return self.x == 0

    def __str__(self) -> str:
        return _PHASE_PREFIX[self.phase] + "".join(self.char(q) for q in range(self.n))

    def body(self) -> str:
        return "".join(self.char(q) for q in range(self.n))

    def to_matrix(self) -> np.ndarray:
        mat = np.array([[1.0 + 0j]])
        for q in range(self.n):
            mat = np.kron(mat, _SINGLE[((self.x >> q) & 1, (self.z >> q) & 1)])
        return (1j ** self.phase) * mat

    # algebra ------------------------------------------------------------
    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def __neg__(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, self.phase + 2)

    def tensor(self, other: "PauliString") -> "PauliString":
        """``self`` on the low qubits, ``other`` on the following ones."""
        return PauliString(
            self.n + other.n,
            self.x | (other.x << self.n),
            self.z | (other.z << self.n),
            self.phase + other.phase,
        )

    def embed(self, n: int, qubits: Sequence[int]) -> "PauliString":
        """Place this string on ``qubits`` of an ``n``-qubit register."""
        if len(qubits) != self.n:
            raise ValueError("qubit list length must equal Pauli size")
        x = z = 0
        for j, q in enumerate(qubits):
            x |= ((self.x >> j) & 1) << q
            z |= ((self.z >> j) & 1) << q
        return PauliString(n, x, z, self.phase)

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        x = z = 0
        for j, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << j
            z |= ((self.z >> q) & 1) << j
        return PauliString(len(qubits), x, z, self.phase)


def _check_sizes(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise ValueError(f"Pauli size mismatch: {p.n} vs {q.n}")


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Signed product ``p @ q``."""
    _check_sizes(p, q)
    # (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^{|z1 & x2|} X^{x1^x2} Z^{z1^z2}
    exponent = p.xz_exponent + q.xz_exponent + 2 * _popcount(p.z & q.x)
    return PauliString.from_xz_form(p.n, p.x ^ q.x, p.z ^ q.z, exponent)


def symplectic_product(p: PauliString, q: PauliString) -> int:
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) & 1


def commutes(p: PauliString, q: PauliString) -> bool:
    _check_sizes(p, q)
    return symplectic_product(p, q) == 0


# ---------------------------------------------------------------------------
# Clifford tableaux


@dataclass(frozen=True)
class CliffordTableau:
    """Images of ``X_i`` and ``Z_i`` under ``P -> U P U^dagger``."""

    n: int
    images_x: tuple[PauliString, ...]
    images_z: tuple[PauliString, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("tableau needs at least one qubit")
        if len(self.images_x) != self.n or len(self.images_z) != self.n:
            raise ValueError("tableau needs n images for X and for Z")
        for img in self.images_x + self.images_z:
            if img.n != self.n:
                raise ValueError("tableau image has wrong size")

    @classmethod
    def identity(cls, n: int) -> "CliffordTableau":
        return cls(
            n,
            tuple(PauliString.single(n, q, "X") for q in range(n)),
            tuple(PauliString.single(n, q, "Z") for q in range(n)),
        )

    def is_valid(self) -> bool:
        """Hermitian images with the canonical commutation pattern."""
        for img in self.images_x + self.images_z:
            if not img.is_hermitian or (img.x | img.z) == 0:
                return False
        for i in range(self.n):
            for j in range(self.n):
                expected = 1 if i == j else 0
                if symplectic_product(self.images_x[i], self.images_z[j]) != expected:
                    return False
                if j > i:
                    if symplectic_product(self.images_x[i], self.images_x[j]):
                        return False
                    if symplectic_product(self.images_z[i], self.images_z[j]):
                        return False
        return True

    def conjugate(self, p: PauliString) -> PauliString:
        return conjugate(self, p)

    def then(self, other: "CliffordTableau") -> "CliffordTableau":
        """Tableau of ``other.U @ self.U`` (apply ``self`` first)."""
        if other.n != self.n:
            raise ValueError("tableau size mismatch")
        return CliffordTableau(
            self.n,
            tuple(other.conjugate(img) for img in self.images_x),
            tuple(other.conjugate(img) for img in self.images_z),
        )

    def inverse(self) -> "CliffordTableau":
        n = self.n
        new_x = []
        new_z = []
        for target in (PauliString.single(n, q, k) for k in "XZ" for q in range(n)):
            # Expand the target in the symplectic basis formed by the images.
            x = z = 0
            for j in range(n):
                if symplectic_product(target, self.images_z[j]):
                    x |= 1 << j
                if symplectic_product(self.images_x[j], target):
                    z |= 1 << j
            pre = PauliString(n, x, z, 0)
            image = self.conjugate(pre)
            if (image.x, image.z) != (target.x, target.z) or not image.is_hermitian:
                raise ValueError("tableau is not a valid Clifford")
            if image.phase != 0:
                pre = -pre
            (new_x if target.x else new_z).append(pre)
        return CliffordTableau(n, tuple(new_x), tuple(new_z))

    def key(self) -> tuple:
        return tuple((p.x, p.z, p.phase) for p in self.images_x + self.images_z)

    def __str__(self) -> str:
        xs = ",".join(str(p) for p in self.images_x)
        zs = ",".join(str(p) for p in self.images_z)
        return f"X->[{xs}];Z->[{zs}]"


def conjugate(t: CliffordTableau, p: PauliString) -> PauliString:
    """``U p U^dagger`` for the Clifford ``U`` described by ``t``."""
    if t.n != p.n:
        raise ValueError(f"size mismatch: tableau {t.n}, Pauli {p.n}")
    result = PauliString(p.n, 0, 0, p.xz_exponent)
    for q in range(p.n):
        if (p.x >> q) & 1:
            result = multiply(result, t.images_x[q])
    for q in range(p.n):
        if (p.z >> q) & 1:
            result = multiply(result, t.images_z[q])
    return result


# ---------------------------------------------------------------------------
# Gate-level conjugation tables

def dense_to_pauli(mat: np.ndarray, atol: float = 1e-9) -> PauliString | None:
    """Decompose a matrix proportional to a Pauli, or return ``None``."""
    dim = mat.shape[0]
    k = int(round(math.log2(dim)))
    for x in range(dim):
        for z in range(dim):
            cand = PauliString(k, x, z, 0).to_matrix()
            coeff = np.trace(cand.conj().T @ mat) / dim
            if abs(coeff) > atol:
                for ph in range(4):
                    if abs(coeff - 1j ** ph) < 1e-7 and np.allclose(
                        (1j ** ph) * cand, mat, atol=1e-7
                    ):
                        return PauliString(k, x, z, ph)
                return None
    return None


@functools.lru_cache(maxsize=None)
def local_table(matrix_key: tuple) -> dict | None:
    """Conjugation table of a small unitary, keyed by its entries.

    Entry ``(x_loc, z_loc)`` holds ``(x', z', e')`` with
    ``U X^x Z^z U^dag = i^e' X^x' Z^z'`` on the local register, or the
    whole table is ``None`` when the unitary is not Clifford.
    """
    dim = int(round(math.sqrt(len(matrix_key))))
    u = np.array(matrix_key, dtype=complex).reshape(dim, dim)
    k = int(round(math.log2(dim)))
    table = {}
    for x in range(dim):
        for z in range(dim):
            p = PauliString.from_xz_form(k, x, z, 0)
            img = dense_to_pauli(u @ p.to_matrix() @ u.conj().T)
            if img is None:
                return None
            table[(x, z)] = (img.x, img.z, img.xz_exponent)
    return table


def matrix_key(u: np.ndarray) -> tuple:
    return tuple(np.round(u.ravel(), 12).tolist())


def conjugate_local(p: PauliString, table: dict, qubits: Sequence[int]) -> PauliString:
    """Conjugate ``p`` by a gate acting on ``qubits`` given its local table."""
    xl = zl = 0
    mask = 0
    for j, q in enumerate(qubits):
        xl |= ((p.x >> q) & 1) << j
        zl |= ((p.z >> q) & 1) << j
        mask |= 1 << q
    if xl == 0 and zl == 0:
        return p
    nx, nz, e = table[(xl, zl)]
    x = p.x & ~mask
    z = p.z & ~mask
    for j, q in enumerate(qubits):
        x |= ((nx >> j) & 1) << q
        z |= ((nz >> j) & 1) << q
    return PauliString.from_xz_form(p.n, x, z, p.xz_exponent + e)


# ---------------------------------------------------------------------------
# Uniform random Clifford sampling


def _vec(p: PauliString) -> int:
    return p.x | (p.z << p.n)


def _sp(u: int, v: int, n: int) -> int:
    mask = (1 << n) - 1
    ux, uz = u & mask, u >> n
    vx, vz = v & mask, v >> n
    return (_popcount(ux & vz) + _popcount(uz & vx)) & 1


def _random_combination(basis: Sequence[int], rng: np.random.Generator, nonzero: bool) -> int:
    while True:
        bits = rng.integers(0, 2, size=len(basis))
        v = 0
        for b, vec in zip(bits, basis):
            if b:
                v ^= vec
        if v or not nonzero:
            return v


def _symplectic_basis(vectors: Iterable[int], n: int) -> list[int]:
    """Extract a symplectic basis ``[a1, b1, a2, b2, ...]`` of the span."""
    pool = [v for v in vectors if v]
    out: list[int] = []
    while pool:
        a = pool.pop(0)
        partner = next((i for i, v in enumerate(pool) if _sp(a, v, n)), None)
        if partner is None:
            continue
        b = pool.pop(partner)
        out += [a, b]
        projected = []
        for v in pool:
            v ^= (a if _sp(v, b, n) else 0) ^ (b if _sp(v, a, n) else 0)
            if v:
                projected.append(v)
        pool = projected
    return out


def random_clifford(n: int, rng: np.random.Generator) -> CliffordTableau:
    """Draw a tableau uniformly from the n-qubit Clifford group (mod phase).

    Builds the symplectic part one anticommuting pair at a time: the image of
    ``X_k`` is uniform over nonzero vectors in the symplectic complement of
    the pairs already chosen, the image of ``Z_k`` is uniform over the vectors
    of that complement with unit symplectic product against it.  Signs are
    drawn uniformly afterwards.
    """
    if n < 1:
        raise ValueError("random_clifford needs n >= 1")
    mask = (1 << n) - 1
    complement = [1 << j for j in range(2 * n)]
    vx: list[int] = []
    vz: list[int] = []
    for _ in range(n):
        a = _random_combination(complement, rng, nonzero=True)
        b = _random_combination(complement, rng, nonzero=False)
        if not _sp(a, b, n):
            # Toggle by a fixed partner of `a`; this maps the commuting half
            # onto the anticommuting half bijectively.
            t = next(v for v in complement if _sp(a, v, n))
            b ^= t
        vx.append(a)
        vz.append(b)
        projected = []
        for v in complement:
            v ^= (a if _sp(v, b, n) else 0) ^ (b if _sp(v, a, n) else 0)
            projected.append(v)
        complement = _symplectic_basis(projected, n)
    signs = rng.integers(0, 2, size=2 * n)

    def to_pauli(v: int, s: int) -> PauliString:
        x, z = v & mask, v >> n
        # Hermitian literal form: phase 0 or 2.
        return PauliString(n, x, z, 2 * int(s))

    images_x = tuple(to_pauli(v, s) for v, s in zip(vx, signs[:n]))
    images_z = tuple(to_pauli(v, s) for v, s in zip(vz, signs[n:]))
    return CliffordTableau(n, images_x, images_z)


def enumerate_single_qubit_cliffords() -> list[CliffordTableau]:
    """All 24 single-qubit Clifford tableaux (brute force over image pairs)."""
    out = []
    for xa in ("X", "Y", "Z"):
        for za in ("X", "Y", "Z"):
            if xa == za:
                continue
            for sx in (0, 2):
                for sz in (0, 2):
                    out.append(
                        CliffordTableau(
                            1,
                            (PauliString.from_label(xa).with_phase(sx),),
                            (PauliString.from_label(za).with_phase(sz),),
                        )
                    )
    return out
