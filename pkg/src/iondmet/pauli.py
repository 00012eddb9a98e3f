"""Pauli strings, real-weighted Pauli sums and their expectation values.

Qubit ``j`` is the ``j``-th letter of a string and the ``j``-th character of
a bitstring; in a statevector it occupies bit ``n - 1 - j`` of the index
(qubit 0 is the most significant bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import kernels

MAX_QUBITS = 16
LETTERS = "IXYZ"

# (a, b) -> (phase, product) for single-qubit Paulis
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliString:
    letters: str

    def __post_init__(self):
        if not isinstance(self.letters, str) or not self.letters:
            raise PauliError("a Pauli string needs at least one letter")
        if len(self.letters) > MAX_QUBITS:
            raise PauliError(f"{len(self.letters)} qubits exceeds the {MAX_QUBITS}-qubit cap")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise PauliError(f"invalid Pauli letters {sorted(bad)}")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def from_sparse(cls, n: int, ops: Mapping[int, str]) -> "PauliString":
        """``from_sparse(2, {0: "X", 1: "Y"})`` is ``XY``."""
        letters = ["I"] * n
        for q, p in ops.items():
            letters[q] = p
        return cls("".join(letters))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def masks(self) -> tuple[int, int, int]:
        """Return ``(xmask, zmask, n_y)`` with qubit ``j`` on bit ``n-1-j``."""
        n = self.n_qubits
        x = z = ny = 0
        for j, p in enumerate(self.letters):
            bit = 1 << (n - 1 - j)
            if p in "XY":
                x |= bit
            if p in "ZY":
                z |= bit
            if p == "Y":
                ny += 1
        return x, z, ny

    def commutes_with(self, other: "PauliString") -> bool:
        _check_lengths(self, other)
        anti = sum(1 for a, b in zip(self.letters, other.letters)
                   if a != "I" and b != "I" and a != b)
        return anti % 2 == 0

    def to_matrix(self) -> np.ndarray:
        m = np.ones((1, 1), dtype=complex)
        for p in self.letters:
            m = np.kron(m, _SINGLE[p])
        return m

    def __str__(self) -> str:
        return self.letters


def _check_lengths(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise PauliError(f"length mismatch: {a.n_qubits} vs {b.n_qubits}")


def pauli_mul(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product ``a·b`` as ``(phase, string)`` with phase in {±1, ±i}."""
    _check_lengths(a, b)
    phase: complex = 1
    out = []
    for x, y in zip(a.letters, b.letters):
        ph, p = _MUL[(x, y)]
        phase *= ph
        out.append(p)
    return complex(phase), PauliString("".join(out))


def _as_string(p) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


class PauliSum:
    """Real-weighted sum of Pauli strings plus a constant offset.

    Terms are merged on construction, zero coefficients dropped and the
    iteration order is lexicographic in the letters.
    """

    def __init__(self, terms: Mapping | Iterable = (), constant: float = 0.0,
                 n_qubits: int | None = None, tol: float = 0.0):
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[PauliString, float] = {}
        const = float(constant)
        for p, c in items:
            p = _as_string(p)
            c = float(c)
            if not math.isfinite(c):
                raise PauliError(f"non-finite coefficient for {p}")
            if n_qubits is None:
                n_qubits = p.n_qubits
            elif p.n_qubits != n_qubits:
                raise PauliError(f"term {p} has {p.n_qubits} qubits, expected {n_qubits}")
            if p.is_identity:
                const += c
            else:
                merged[p] = merged.get(p, 0.0) + c
        if n_qubits is None:
            raise PauliError("cannot infer qubit count of an empty PauliSum; pass n_qubits")
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise PauliError(f"qubit count {n_qubits} outside [1, {MAX_QUBITS}]")
        self.n_qubits = n_qubits
        self.constant = const
        self.terms = {p: merged[p] for p in sorted(merged) if abs(merged[p]) > tol}

    def __repr__(self):
        return f"PauliSum({dict((str(k), v) for k, v in self.terms.items())}, constant={self.constant})"

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return (self.n_qubits == other.n_qubits and self.constant == other.constant
                and self.terms == other.terms)

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def coefficient(self, p) -> float:
        p = _as_string(p)
        if p.is_identity:
            return self.constant
        return self.terms.get(p, 0.0)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise PauliError("qubit count mismatch")
        return PauliSum(list(self.terms.items()) + list(other.terms.items()),
                        self.constant + other.constant, self.n_qubits)

    def __mul__(self, s: float) -> "PauliSum":
        return PauliSum({p: c * s for p, c in self.terms.items()}, self.constant * s, self.n_qubits)

    __rmul__ = __mul__

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other * -1.0

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        m = self.constant * np.eye(dim, dtype=complex)
        for p, c in self.terms.items():
            m += c * p.to_matrix()
        return m

    def kernel_arrays(self):
        """Pack the terms as mask arrays for the expectation kernel."""
        n = len(self.terms)
        xm = np.empty(n, dtype=np.int64)
        zm = np.empty(n, dtype=np.int64)
        ny = np.empty(n, dtype=np.int64)
        co = np.empty(n, dtype=np.float64)
        for k, (p, c) in enumerate(self.terms.items()):
            xm[k], zm[k], ny[k] = p.masks()
            co[k] = c
        return xm, zm, ny, co

    # text format: "<coeff> <letters>" per line, '#' starts a comment
    def to_text(self, header: str | None = None) -> str:
        lines = []
        if header:
            lines.extend("# " + h for h in header.splitlines())
        lines.append(f"{self.constant:.10g} {'I' * self.n_qubits}")
        for p, c in self.terms.items():
            lines.append(f"{c:.10g} {p.letters}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        terms = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise PauliError(f"line {lineno}: expected '<coeff> <letters>', got {raw!r}")
            try:
                c = float(parts[0])
            except ValueError:
                raise PauliError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
            terms.append((PauliString(parts[1]), c))
        if not terms:
            raise PauliError("no terms found")
        return cls(terms)


def _amplitudes(psi) -> np.ndarray:
    return np.ascontiguousarray(getattr(psi, "amplitudes", psi), dtype=complex)


def string_expectation(p: PauliString, psi) -> complex:
    amps = _amplitudes(psi)
    x, z, ny = p.masks()
    return kernels.pauli_expectation(
        amps, np.array([x]), np.array([z]), np.array([ny]), np.array([1.0]))


def expectation(op: PauliSum, psi, imag_tol: float = 1e-10) -> float:
    """``<psi|op|psi>`` including the constant offset."""
    amps = _amplitudes(psi)
    if amps.size != 2 ** op.n_qubits:
        raise PauliError(f"state has {amps.size} amplitudes, operator acts on {op.n_qubits} qubits")
    if not op.terms:
        return op.constant * float(np.vdot(amps, amps).real)
    val = kernels.pauli_expectation(amps, *op.kernel_arrays())
    if abs(val.imag) > imag_tol:
        raise PauliError(f"non-Hermitian expectation (imaginary part {val.imag:.3e})")
    return float(val.real) + op.constant * float(np.vdot(amps, amps).real)


def commutator_expectation(h: PauliSum, p, psi) -> float:
    """Energy gradient ``(i/2)<psi|[P, H]|psi>`` of ``exp(-i tau P / 2)`` at tau = 0."""
    p = _as_string(p)
    if p.n_qubits != h.n_qubits:
        raise PauliError("generator and operator act on different qubit counts")
    terms = []
    for q, c in h.terms.items():
        if p.commutes_with(q):
            continue
        phase, r = pauli_mul(p, q)
        # [P, Q] = 2 P Q for anticommuting strings; i * phase is real
        terms.append((r, (1j * phase).real * c))
    if not terms:
        return 0.0
    acc = PauliSum(terms, 0.0, h.n_qubits)
    return expectation(acc, psi)
