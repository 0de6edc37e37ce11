"""Monte-Carlo simulation of circuits under stochastic Pauli noise.

``run_shots`` splits a circuit at its last non-Clifford gate.  Noise inside
the non-Clifford prefix is simulated as explicit statevector trajectories
(shots that drew identical prefix errors share one trajectory), noise in the
Clifford suffix is tracked as Pauli frames vectorized over shots.  Pauli
noise pushed through Clifford gates stays Pauli, so the measured bits are the
noiseless bits of the trajectory XOR the X part of the final frame; the
output distribution is identical to per-shot statevector trajectories.

``density_matrix_reference`` is the exact mixed-state oracle for small
registers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .circuit import Circuit, Gate, gate_table
from .noise import ChannelSpec, NoiseModel
from .pauli import PauliString

MAX_QUBITS = 24
MAX_DENSITY_QUBITS = 10
CHUNK = 10_000

_PAULI_1Q = {
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.diag([1, -1]).astype(complex),
    3: np.array([[0, -1j], [1j, 0]], dtype=complex),
}


class PostSelectionStarved(RuntimeError):
    """Raised when no shot survives post-selection."""


@dataclass(frozen=True)
class ShotRecord:
    data_bits: str
    ancilla_bits: str
    trajectory_seed: tuple[int, int]


class ShotRecords:
    """Shot outcomes stored column-wise.

    ``data`` and ``ancilla`` are ``(shots, k)`` uint8 arrays whose columns
    follow ``data_qubits`` / ``ancilla_qubits`` (measurement order).
    Indexing yields :class:`ShotRecord` values.
    """

    def __init__(self, data, ancilla, data_qubits, ancilla_qubits, master_seed: int):
        self.data = np.asarray(data, dtype=np.uint8)
        self.ancilla = np.asarray(ancilla, dtype=np.uint8)
        self.data_qubits = list(data_qubits)
        self.ancilla_qubits = list(ancilla_qubits)
        self.master_seed = master_seed

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> ShotRecord:
        return ShotRecord(
            "".join(map(str, self.data[i])),
            "".join(map(str, self.ancilla[i])),
            (self.master_seed, int(i) % len(self)),
        )

    def __iter__(self) -> Iterator[ShotRecord]:
        return (self[i] for i in range(len(self)))

    def kept_mask(self) -> np.ndarray:
        if self.ancilla.shape[1] == 0:
            return np.ones(len(self), dtype=bool)
        return ~self.ancilla.any(axis=1)


@dataclass(frozen=True)
class ExpectationEstimate:
    value: float
    kept_shots: int
    total_shots: int
    std_error: float

    @property
    def keep_rate(self) -> float:
        return self.kept_shots / self.total_shots


# ---------------------------------------------------------------------------
# compilation


class _Op:
    __slots__ = ("qubits", "matrix", "lut", "p", "noise_kind", "noise_qubits")

    def __init__(self, qubits, matrix, lut, p, noise_kind, noise_qubits):
        self.qubits = qubits
        self.matrix = matrix
        self.lut = lut
        self.p = p
        self.noise_kind = noise_kind
        self.noise_qubits = noise_qubits


@functools.lru_cache(maxsize=4096)
def _piece_lut(kind: str, angle: float | None, w: int) -> np.ndarray | None:
    table = gate_table(Gate(kind, tuple(range(w)), angle=angle))
    return _frame_lut(table, w) if table is not None else None


def _frame_lut(table: dict, w: int) -> np.ndarray:
    lut = np.zeros(1 << (2 * w), dtype=np.uint8)
    mask = (1 << w) - 1
    for code in range(1 << (2 * w)):
        x, z = code & mask, code >> w
        if x == 0 and z == 0:
            continue
        nx, nz, _ = table[(x, z)]
        lut[code] = nx | (nz << w)
    return lut


def _gate_noise(g: Gate, noise: NoiseModel, n_data: int) -> float:
    if g.label == "sign":
        return 0.0
    if not noise.noisy_checks and any(q >= n_data for q in g.qubits):
        return 0.0
    if len(g.qubits) == 1:
        return noise.rate_1q(g.qubits[0])
    return noise.rate_2q(*g.qubits)


def _compile(c: Circuit, noise: NoiseModel) -> tuple[list[_Op], list[int]]:
    measured: list[int] = []
    touched: set[int] = set()
    ops: list[_Op] = []
    for g in c.gates:
        if g.kind == "MEASURE":
            q = g.qubits[0]
            if q in measured:
                raise ValueError(f"qubit {q} measured twice")
            measured.append(q)
            continue
        if any(q in measured for q in g.operands):
            raise ValueError("only terminal measurements are supported")
        if g.kind == "RESET":
            if g.qubits[0] in touched:
                raise ValueError("RESET is only supported on fresh qubits")
            continue
        touched.update(g.operands)
        if g.kind == "CHANNEL":
            spec: ChannelSpec | None = noise.channel(g.label)
            if spec is not None and spec.p > 0:
                ops.append(_Op(g.qubits, None, None, spec.p, spec.kind, g.qubits))
            continue
        for piece in g.expand():
            lut = _piece_lut(piece.kind, piece.angle, len(piece.qubits))
            p = _gate_noise(piece, noise, c.n_data)
            ops.append(_Op(piece.qubits, piece.matrix(), lut, p, "depolarizing", piece.qubits))
    return ops, measured


# ---------------------------------------------------------------------------
# dense helpers


def _apply(psi: np.ndarray, u: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    k = len(qubits)
    if k == 1:
        q = qubits[0]
        shape = psi.shape
        left = math.prod(shape[:q])
        return (u @ psi.reshape(left, 2, -1)).reshape(shape)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def _apply_pauli_index(psi: np.ndarray, qubits: Sequence[int], idx: int) -> np.ndarray:
    """Apply the Pauli with local index ``idx`` (x bits low, z bits high) on ``qubits`` axes."""
    w = len(qubits)
    x, z = idx & ((1 << w) - 1), idx >> w
    psi = psi.copy()
    for j, q in enumerate(qubits):
        xb, zb = (x >> j) & 1, (z >> j) & 1
        if not (xb or zb):
            continue
        lo = [slice(None)] * psi.ndim
        hi = [slice(None)] * psi.ndim
        lo[q], hi[q] = 0, 1
        a, b = psi[tuple(lo)].copy(), psi[tuple(hi)].copy()
        if xb and zb:  # Y: |0> -> i|1>, |1> -> -i|0>
            a, b = -1j * b, 1j * a
        elif xb:
            a, b = b, a
        else:
            b = -b
        psi[tuple(lo)], psi[tuple(hi)] = a, b
    return psi


def _draw_pauli_indices(rng: np.random.Generator, kind: str, w: int, size: int) -> np.ndarray:
    if kind == "depolarizing":
        return rng.integers(1, 1 << (2 * w), size=size, dtype=np.int64)
    if kind == "bitflip":
        return rng.integers(1, 1 << w, size=size, dtype=np.int64)
    if kind == "global_depolarizing":
        return rng.integers(0, 1 << (2 * w), size=size, dtype=np.int64)
    raise ValueError(f"unknown noise kind {kind!r}")


def _sample_outcomes(psi: np.ndarray, measured: Sequence[int], count: int, rng: np.random.Generator) -> np.ndarray:
    n = psi.ndim
    probs = np.abs(psi) ** 2
    unmeasured = tuple(q for q in range(n) if q not in measured)
    if unmeasured:
        probs = probs.sum(axis=unmeasured)
    kept = sorted(measured)
    probs = np.transpose(probs, [kept.index(q) for q in measured]).ravel()
    probs = probs / probs.sum()
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
    idx = np.minimum(idx, len(probs) - 1)
    k = len(measured)
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# shot simulation


def _master_seed(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def _run_chunk(ops: list[_Op], split: int, n: int, measured: list[int], shots: int,
               rng: np.random.Generator) -> np.ndarray:
    errors: list[tuple[np.ndarray, np.ndarray] | None] = [None] * len(ops)
    noisy = [i for i, op in enumerate(ops) if op.p > 0]
    rows = max(1, (1 << 21) // shots)
    for start in range(0, len(noisy), rows):
        part = noisy[start:start + rows]
        rates = np.array([ops[i].p for i in part])
        hit_rows, hit_cols = np.nonzero(rng.random((len(part), shots)) < rates[:, None])
        bounds = np.searchsorted(hit_rows, np.arange(len(part) + 1))
        for r, i in enumerate(part):
            hits = hit_cols[bounds[r]:bounds[r + 1]]
            if hits.size:
                op = ops[i]
                errors[i] = (hits, _draw_pauli_indices(rng, op.noise_kind, len(op.noise_qubits), hits.size))

    prefix = [i for i in range(split) if errors[i] is not None]
    keys = np.zeros((shots, len(prefix)), dtype=np.int64)
    for col, i in enumerate(prefix):
        hits, idx = errors[i]
        keys[hits, col] = idx
    if prefix:
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
    else:
        uniq, inverse = keys[:1], np.zeros(shots, dtype=np.int64)

    bits = np.zeros((shots, len(measured)), dtype=np.uint8)
    # Trajectories are evolved together as a batch, in blocks bounded in memory.
    block = max(1, (1 << 22) >> n)
    for start in range(0, len(uniq), block):
        keyblock = uniq[start:start + block]
        psi = np.zeros((len(keyblock),) + (2,) * n, dtype=complex)
        psi[(slice(None),) + (0,) * n] = 1.0
        col = 0
        for i, op in enumerate(ops):
            if op.matrix is not None:
                psi = _apply(psi, op.matrix, [q + 1 for q in op.qubits])
            if i < split and errors[i] is not None:
                column = keyblock[:, col]
                for idx in np.unique(column[column != 0]):
                    sel = np.flatnonzero(column == idx)
                    psi[sel] = _apply_pauli_index(psi[sel], [q + 1 for q in op.noise_qubits], int(idx))
                col += 1
        for off in range(len(keyblock)):
            members = np.flatnonzero(inverse == start + off)
            bits[members] = _sample_outcomes(psi[off], measured, members.size, rng)

    if split < len(ops) and measured:
        fx = np.zeros((n, shots), dtype=np.uint8)
        fz = np.zeros((n, shots), dtype=np.uint8)
        for i in range(split, len(ops)):
            op = ops[i]
            if op.lut is not None and (fx[list(op.qubits)].any() or fz[list(op.qubits)].any()):
                w = len(op.qubits)
                code = np.zeros(shots, dtype=np.uint8)
                for j, q in enumerate(op.qubits):
                    code |= fx[q] << j
                    code |= fz[q] << (w + j)
                new = op.lut[code]
                for j, q in enumerate(op.qubits):
                    fx[q] = (new >> j) & 1
                    fz[q] = (new >> (w + j)) & 1
            if errors[i] is not None:
                hits, idx = errors[i]
                w = len(op.noise_qubits)
                for j, q in enumerate(op.noise_qubits):
                    fx[q, hits] ^= ((idx >> j) & 1).astype(np.uint8)
                    fz[q, hits] ^= ((idx >> (w + j)) & 1).astype(np.uint8)
        bits ^= fx[measured].T
    return bits


def run_shots(c: Circuit, noise: NoiseModel, shots: int, rng) -> ShotRecords:
    """Simulate ``shots`` noisy executions of ``c``.

    ``rng`` is a ``numpy.random.Generator`` (one integer is drawn from it as
    the master seed) or an integer master seed.  Shots are processed in fixed
    chunks of ``CHUNK``; chunk ``k`` uses the stream
    ``SeedSequence(master, spawn_key=(k,))``, so chunks are independent and
    the result does not depend on the order in which chunks run.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = c.n_qubits
    if n > MAX_QUBITS:
        raise MemoryError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit statevector cap")
    noise = noise.resolve(n)
    ops, measured = _compile(c, noise)
    split = 0
    for i, op in enumerate(ops):
        if op.matrix is not None and op.lut is None:
            split = i + 1
    master = _master_seed(rng)
    chunks = []
    for k, start in enumerate(range(0, shots, CHUNK)):
        size = min(CHUNK, shots - start)
        chunk_rng = np.random.default_rng(np.random.SeedSequence(master, spawn_key=(k,)))
        chunks.append(_run_chunk(ops, split, n, measured, size, chunk_rng))
    bits = np.concatenate(chunks, axis=0)
    data_cols = [j for j, q in enumerate(measured) if q < c.n_data]
    anc_cols = [j for j, q in enumerate(measured) if q >= c.n_data]
    return ShotRecords(
        bits[:, data_cols], bits[:, anc_cols],
        [measured[j] for j in data_cols], [measured[j] for j in anc_cols],
        master,
    )


def _records_arrays(records):
    if isinstance(records, ShotRecords):
        return records.data, records.ancilla, records.data_qubits
    recs = list(records)
    if not recs:
        raise ValueError("no shot records")
    data = np.array([[int(b) for b in r.data_bits] for r in recs], dtype=np.uint8)
    anc = np.array([[int(b) for b in r.ancilla_bits] for r in recs], dtype=np.uint8).reshape(len(recs), -1)
    return data, anc, list(range(data.shape[1]))


def expectation_z_basis(records, observable: PauliString, post_select: bool = True) -> ExpectationEstimate:
    """Mean of ``(-1)^(parity on the observable's support)`` over kept shots."""
    if observable.x:
        raise ValueError("observable must be diagonal (I/Z only)")
    data, anc, data_qubits = _records_arrays(records)
    cols = []
    for q in observable.qubits():
        if q not in data_qubits:
            raise ValueError(f"observable touches unmeasured data qubit {q}")
        cols.append(data_qubits.index(q))
    total = data.shape[0]
    kept = ~anc.any(axis=1) if (post_select and anc.shape[1]) else np.ones(total, dtype=bool)
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise PostSelectionStarved(f"post-selection kept 0 of {total} shots")
    parity = data[kept][:, cols].sum(axis=1) & 1 if cols else np.zeros(n_kept, dtype=np.int64)
    values = (1.0 - 2.0 * parity) * observable.sign
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(n_kept)) if n_kept >= 2 else math.inf
    return ExpectationEstimate(mean, n_kept, total, std_error)


# ---------------------------------------------------------------------------
# exact density-matrix reference


class DensityResult:
    """Exact pre-measurement state of a circuit with its measured qubits."""

    def __init__(self, rho: np.ndarray, n_data: int, n_qubits: int, measured: list[int]):
        self.rho = rho
        self.n_data = n_data
        self.n_qubits = n_qubits
        self.measured = measured

    @property
    def matrix(self) -> np.ndarray:
        d = 1 << self.n_qubits
        return self.rho.reshape(d, d)

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.trace(m @ m)))

    def _projector_diag(self) -> np.ndarray:
        diag = np.ones((2,) * self.n_qubits)
        for q in self.measured:
            if q >= self.n_data:
                idx = [slice(None)] * self.n_qubits
                idx[q] = 1
                diag[tuple(idx)] = 0.0
        return diag.ravel()

    def keep_probability(self) -> float:
        return float(np.real(np.diag(self.matrix) @ self._projector_diag()))

    def expectation(self, observable: PauliString, post_select: bool = True) -> float:
        op = observable.embed(self.n_qubits, range(observable.n)).to_matrix()
        m = self.matrix
        if post_select:
            proj = self._projector_diag()
            m = proj[:, None] * m * proj[None, :]
        norm = float(np.real(np.trace(m)))
        if norm <= 0:
            raise PostSelectionStarved("post-selection probability is zero")
        return float(np.real(np.trace(op @ m))) / norm

    def outcome_probabilities(self) -> np.ndarray:
        probs = np.real(np.diag(self.matrix)).reshape((2,) * self.n_qubits)
        unmeasured = tuple(q for q in range(self.n_qubits) if q not in self.measured)
        if unmeasured:
            probs = probs.sum(axis=unmeasured)
        kept = sorted(self.measured)
        return np.transpose(probs, [kept.index(q) for q in self.measured]).ravel()


def _rho_apply(rho: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    rho = _apply(rho, u, qubits)
    return _apply(rho, u.conj(), [q + n for q in qubits])


def _twirl_all(rho: np.ndarray, qubits: Sequence[int], n: int, paulis: Sequence[int]) -> np.ndarray:
    """Apply ``rho -> mean_P P rho P`` qubit by qubit over ``paulis`` (codes)."""
    for q in qubits:
        acc = rho.copy()
        for code in paulis:
            acc = acc + _rho_apply(rho, _PAULI_1Q[code], [q], n)
        rho = acc / (1 + len(paulis))
    return rho


def _rho_noise(rho: np.ndarray, qubits: Sequence[int], p: float, kind: str, n: int) -> np.ndarray:
    if p == 0:
        return rho
    w = len(qubits)
    if kind == "global_depolarizing":
        mixed = _twirl_all(rho, qubits, n, (1, 2, 3))
        return (1 - p) * rho + p * mixed
    if kind == "depolarizing":
        full = (4 ** w) * _twirl_all(rho, qubits, n, (1, 2, 3))
        return (1 - p) * rho + p * (full - rho) / (4 ** w - 1)
    if kind == "bitflip":
        full = (2 ** w) * _twirl_all(rho, qubits, n, (1,))
        return (1 - p) * rho + p * (full - rho) / (2 ** w - 1)
    raise ValueError(f"unknown noise kind {kind!r}")


def density_matrix_reference(c: Circuit, noise: NoiseModel) -> DensityResult:
    """Exact noisy evolution of ``c`` from ``|0...0>`` (at most 10 qubits)."""
    n = c.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise MemoryError(f"density reference capped at {MAX_DENSITY_QUBITS} qubits, got {n}")
    noise = noise.resolve(n)
    ops, measured = _compile(c, noise)
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0
    for op in ops:
        if op.matrix is not None:
            rho = _rho_apply(rho, op.matrix, op.qubits, n)
        rho = _rho_noise(rho, op.noise_qubits, op.p, op.noise_kind, n)
    return DensityResult(rho, c.n_data, n, measured)
