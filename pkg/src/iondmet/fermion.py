"""Two-qubit sector map onto two electrons in four spin-orbitals.

Spin-orbitals are ordered (1a, 1b, 2a, 2b) -> modes 0..3.  Qubit 0 picks the
orbital of the alpha electron and qubit 1 that of the beta electron, with
``|0>`` meaning orbital 1:

    |q0 q1>  ->  a+_{(q0+1)a} a+_{(q1+1)b} |vac>

Jordan-Wigner signs follow the mode order.  A Fock basis index stores the
occupation of mode ``k`` in bit ``k``.

RDM index conventions: ``one_rdm[q, p] = <a+_p a_q>`` and
``two_rdm[q, p, s, r] = <a+_p a+_r a_s a_q>``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.linalg import polar

from .pauli import PauliString, PauliSum, string_expectation
from .statevector import StateVector

N_MODES = 4
N_ELEC = 2
MODE_NAMES = ("1a", "1b", "2a", "2b")
EXPECTATION_LABELS = ("XX", "YY", "ZZ", "XZ", "ZX", "XI", "IX", "ZI", "IZ")
# Pauli strings whose expectations vanish for real two-qubit states
_IMAG_LABELS = ("XY", "YX", "YZ", "ZY", "YI", "IY")

# published to 8 decimals; the polar factor restores exact orthogonality
PUBLISHED_C = np.array([[0.70710679, 0.70710677], [-0.70710677, 0.70710679]])
DEFAULT_C = polar(PUBLISHED_C)[0]


class EncodingError(ValueError):
    pass


# ---------------------------------------------------------------- Fock space

@lru_cache(maxsize=None)
def annihilators(n_modes: int = N_MODES) -> tuple[np.ndarray, ...]:
    """Dense matrices of ``a_k`` with Jordan-Wigner signs (16x16 by default)."""
    dim = 2 ** n_modes
    ops = []
    for k in range(n_modes):
        a = np.zeros((dim, dim))
        for i in range(dim):
            if i >> k & 1:
                sign = -1.0 if bin(i & ((1 << k) - 1)).count("1") % 2 else 1.0
                a[i ^ (1 << k), i] = sign
        a.setflags(write=False)
        ops.append(a)
    return tuple(ops)


def creators(n_modes: int = N_MODES) -> tuple[np.ndarray, ...]:
    return tuple(a.T for a in annihilators(n_modes))


def number_operator() -> np.ndarray:
    return sum(c @ a for c, a in zip(creators(), annihilators()))


@lru_cache(maxsize=None)
def embedding() -> np.ndarray:
    """16x4 isometry taking qubit amplitudes to Fock amplitudes."""
    cr = creators()
    vac = np.zeros(2 ** N_MODES)
    vac[0] = 1.0
    e = np.zeros((2 ** N_MODES, 4))
    for q0 in (0, 1):
        for q1 in (0, 1):
            alpha, beta = 2 * q0, 1 + 2 * q1
            e[:, 2 * q0 + q1] = cr[alpha] @ (cr[beta] @ vac)
    e.setflags(write=False)
    return e


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** N_MODES,):
            raise EncodingError("a Fock state has 16 amplitudes")
        if abs(np.vdot(amps, amps).real - 1) > 1e-10:
            raise EncodingError("Fock state not normalized")
        object.__setattr__(self, "amplitudes", amps)

    def configurations(self, tol: float = 1e-14) -> dict[str, complex]:
        """Nonzero amplitudes keyed by occupation string in mode order."""
        out = {}
        for i, c in enumerate(self.amplitudes):
            if abs(c) > tol:
                occ = "".join("1" if i >> k & 1 else "0" for k in range(N_MODES))
                out[occ] = complex(c)
        return out


def _amps(psi) -> np.ndarray:
    a = np.asarray(getattr(psi, "amplitudes", psi), dtype=complex)
    if a.shape != (4,):
        raise EncodingError("expected a two-qubit state")
    return a


def decode_state(psi) -> FockState:
    return FockState(embedding() @ _amps(psi))


# ---------------------------------------------------------------- RDMs

@dataclass
class RdmPair:
    one_rdm: np.ndarray
    two_rdm: np.ndarray

    def __post_init__(self):
        self.one_rdm = np.asarray(self.one_rdm, dtype=complex)
        self.two_rdm = np.asarray(self.two_rdm, dtype=complex)
        if self.one_rdm.shape != (N_MODES,) * 2 or self.two_rdm.shape != (N_MODES,) * 4:
            raise EncodingError("RDM shapes must be 4x4 and 4x4x4x4")

    def pair_matrix(self) -> np.ndarray:
        """16x16 matrix ``M[(p,r),(q,s)] = <a+_p a+_r a_s a_q>``."""
        return self.two_rdm.transpose(1, 3, 0, 2).reshape(16, 16)

    @staticmethod
    def two_rdm_from_pair_matrix(m: np.ndarray) -> np.ndarray:
        return np.asarray(m).reshape(4, 4, 4, 4).transpose(2, 0, 3, 1)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("one_rdm 4 4\n")
        for row in self.one_rdm:
            buf.write(" ".join(_fmt(v) for v in row) + "\n")
        buf.write("two_rdm 4 4 4 4\n")
        for row in self.two_rdm.reshape(16, 16):
            buf.write(" ".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RdmPair":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        try:
            i1 = next(i for i, r in enumerate(rows) if r[0] == "one_rdm")
            i2 = next(i for i, r in enumerate(rows) if r[0] == "two_rdm")
        except StopIteration:
            raise EncodingError("missing one_rdm/two_rdm section") from None
        d = np.array([[complex(v) for v in r] for r in rows[i1 + 1:i1 + 5]])
        p = np.array([[complex(v) for v in r] for r in rows[i2 + 1:i2 + 17]])
        return cls(d, p.reshape(4, 4, 4, 4))


def _fmt(v: complex) -> str:
    if v.imag == 0:
        return f"{v.real:.12g}"
    return f"{v.real:.12g}{v.imag:+.12g}j"


def build_rdms(f: FockState) -> RdmPair:
    v = f.amplitudes
    an, cr = annihilators(), creators()
    d = np.empty((4, 4), dtype=complex)
    p = np.empty((4,) * 4, dtype=complex)
    av = [a @ v for a in an]
    for q in range(4):
        for pp in range(4):
            d[q, pp] = np.vdot(av[pp], av[q])
    # <a+_p a+_r a_s a_q> = <(a_r a_p) v | (a_s a_q) v>
    pair = {(x, y): an[x] @ av[y] for x in range(4) for y in range(4)}
    for q in range(4):
        for pp in range(4):
            for s in range(4):
                for r in range(4):
                    p[q, pp, s, r] = np.vdot(pair[(r, pp)], pair[(s, q)])
    return RdmPair(d, p)


def trace_down(two_rdm: np.ndarray, n_elec: int = N_ELEC) -> np.ndarray:
    return np.einsum("qprr->qp", np.asarray(two_rdm)) / (n_elec - 1)


def electron_count(d: np.ndarray, orbitals) -> float:
    d = np.asarray(d)
    return float(sum(d[k, k].real for k in orbitals))


# ---------------------------------------------------------------- Pauli <-> RDM

def fock_operator_to_pauli(op: np.ndarray, tol: float = 1e-13) -> PauliSum:
    """Qubit form of a Fock-space operator restricted to the encoded sector."""
    e = embedding()
    m = e.T @ op @ e
    terms = []
    for a in "IXYZ":
        for b in "IXYZ":
            ps = PauliString(a + b)
            c = np.trace(ps.to_matrix() @ m) / 4
            if abs(c.imag) > 1e-12:
                raise EncodingError("operator is not Hermitian on the sector")
            terms.append((ps, c.real))
    return PauliSum(terms, n_qubits=2, tol=tol)


@lru_cache(maxsize=None)
def _rdm_map() -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Affine map: flattened (D, P) = const + A @ expectations.

    Built from the 16 Pauli components of each RDM element; the six strings
    with an odd number of Y are kept so the map is exact for complex states.
    """
    labels = EXPECTATION_LABELS + _IMAG_LABELS
    an, cr = annihilators(), creators()
    ops = [cr[p] @ an[q] for q in range(4) for p in range(4)]
    ops += [cr[p] @ cr[r] @ an[s] @ an[q]
            for q in range(4) for p in range(4) for s in range(4) for r in range(4)]
    e = embedding()
    const = np.empty(len(ops), dtype=complex)
    a = np.empty((len(ops), len(labels)), dtype=complex)
    mats = [PauliString(lab).to_matrix() for lab in labels]
    for k, op in enumerate(ops):
        m = e.T @ op @ e
        const[k] = np.trace(m) / 4
        for j, pm in enumerate(mats):
            a[k, j] = np.trace(pm @ m) / 4
    return const, a, labels


def _normalize_labels(expectations: Mapping[str, float]) -> dict[str, float]:
    aliases = {"X0": "XI", "X1": "IX", "Z0": "ZI", "Z1": "IZ", "Y0": "YI", "Y1": "IY"}
    return {aliases.get(k, k): float(v) for k, v in expectations.items()}


def pauli_to_rdms(expectations: Mapping[str, float]) -> RdmPair:
    """RDMs from the nine real-state Pauli expectations.

    Labels may be two-letter strings (``XI``) or ``X0``-style.  Odd-Y
    expectations default to 0 and may be supplied explicitly.
    """
    ex = _normalize_labels(expectations)
    missing = [lab for lab in EXPECTATION_LABELS if lab not in ex]
    if missing:
        raise EncodingError(f"missing expectation values {missing}")
    for lab, v in ex.items():
        if not -1 - 1e-12 <= v <= 1 + 1e-12:
            raise EncodingError(f"expectation {lab}={v} outside [-1, 1]")
    const, a, labels = _rdm_map()
    vec = const + a @ np.array([ex.get(lab, 0.0) for lab in labels])
    return RdmPair(vec[:16].reshape(4, 4), vec[16:].reshape(4, 4, 4, 4))


def rdms_to_pauli(rdms: RdmPair) -> dict[str, float]:
    """Least-squares inverse of :func:`pauli_to_rdms` (exact on its range)."""
    const, a, labels = _rdm_map()
    vec = np.concatenate([rdms.one_rdm.reshape(-1), rdms.two_rdm.reshape(-1)])
    sol, *_ = np.linalg.lstsq(a, vec - const, rcond=None)
    return {lab: float(v.real) for lab, v in zip(labels, sol) if lab in EXPECTATION_LABELS}


def state_expectations(psi) -> dict[str, float]:
    amps = _amps(psi)
    return {lab: float(string_expectation(PauliString(lab), amps).real) for lab in EXPECTATION_LABELS}


# ---------------------------------------------------------------- orbitals and entropy

@dataclass(frozen=True)
class MoCoefficients:
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (2, 2):
            raise EncodingError("C must be 2x2")
        if not np.allclose(c.T @ c, np.eye(2), atol=1e-10, rtol=0):
            raise EncodingError("C is not orthogonal")
        object.__setattr__(self, "c", c)

    def spin_orbital_rotation(self) -> np.ndarray:
        """4x4 rotation in (1a, 1b, 2a, 2b) order, same C for both spins."""
        u = np.zeros((4, 4))
        for sigma in (0, 1):
            for m in (0, 1):
                for k in (0, 1):
                    u[2 * m + sigma, 2 * k + sigma] = self.c[m, k]
        return u


DEFAULT_MO = MoCoefficients(DEFAULT_C)


def rotate_one_rdm(d: np.ndarray, mo: MoCoefficients = DEFAULT_MO) -> np.ndarray:
    u = mo.spin_orbital_rotation()
    return u.T @ np.asarray(d) @ u


def fragment_number_operator(mo: MoCoefficients = DEFAULT_MO) -> PauliSum:
    """Qubit operator counting electrons in the rotated orbital 1 (both spins)."""
    u = mo.spin_orbital_rotation()
    an, cr = annihilators(), creators()
    op = np.zeros((16, 16))
    for sigma in (0, 1):
        k = sigma  # rotated orbital 1 has spin-orbitals 0 and 1
        a_k = sum(u[m, k] * an[m] for m in range(4))
        op = op + a_k.T @ a_k
    return fock_operator_to_pauli(op)


def shannon(p, base: float = 2.0) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / math.log(base))


def entropy_mo(psi) -> float:
    """Entropy of the diagonal occupation distribution of the encoded state."""
    return shannon(np.abs(_amps(psi)) ** 2)


def entropy_fragment_bath(psi, mo: MoCoefficients = DEFAULT_MO) -> float:
    """Entropy of the fragment's reduced state after rotating orbitals by C.

    Each rotated amplitude ``c'_ij`` puts the alpha electron in orbital i and
    the beta electron in orbital j, so the four fragment occupations
    (none, a, b, ab) are distinct and the fragment RDM is diagonal.
    """
    c = _amps(psi).reshape(2, 2)
    rotated = mo.c.T @ c @ mo.c
    return shannon(np.abs(rotated.reshape(-1)) ** 2)
