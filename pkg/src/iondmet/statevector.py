"""Exact statevector simulation of standard and trapped-ion native circuits.

Standard gates: RX, RY, RZ (``exp(-i sigma theta / 2)``), H, S, SDG, CNOT.
Native gates: ``R_phi(theta) = exp(-i sigma_phi theta / 2)`` with
``sigma_phi = cos(phi) X + sin(phi) Y`` and the Molmer-Sorensen type
``MS(phi, phi', theta) = exp(-i sigma_phi sigma_phi' theta / 2)``.  A native
circuit also carries a virtual-Z frame (per-qubit RZ applied last) and
classical XOR fixups that act on measured bits only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .pauli import MAX_QUBITS

NORM_TOL = 1e-10

STANDARD_1Q = ("RX", "RY", "RZ", "H", "S", "SDG")
STANDARD_2Q = ("CNOT",)
ROTATIONS = ("RX", "RY", "RZ")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])


class CircuitError(ValueError):
    pass


class StateVector:
    """Normalized amplitudes of an ``n``-qubit pure state (read-only)."""

    __slots__ = ("amplitudes", "n")

    def __init__(self, amplitudes, check: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        n = int(round(math.log2(amps.size))) if amps.size else -1
        if n < 1 or 2 ** n != amps.size:
            raise CircuitError(f"{amps.size} amplitudes is not a power of two >= 2")
        if n > MAX_QUBITS:
            raise CircuitError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        if check:
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise CircuitError(f"state not normalized (norm^2 = {norm:.12g})")
        amps.setflags(write=False)
        self.amplitudes = amps
        self.n = n

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        amps = np.zeros(2 ** n, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self):
        return f"StateVector(n={self.n}, amplitudes={np.round(self.amplitudes, 6)})"


# ---------------------------------------------------------------- gates

@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind in STANDARD_1Q:
            need = 1
        elif kind in STANDARD_2Q:
            need = 2
        else:
            raise CircuitError(f"unsupported gate kind {self.kind!r}")
        if len(self.qubits) != need:
            raise CircuitError(f"{kind} acts on {need} qubit(s), got {self.qubits}")
        if need == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError("CNOT control and target coincide")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{kind} needs a finite angle")
        elif self.angle is not None:
            raise CircuitError(f"{kind} takes no angle")

    def matrix(self) -> np.ndarray:
        k = self.kind
        if k == "RX":
            return rot(_X, self.angle)
        if k == "RY":
            return rot(_Y, self.angle)
        if k == "RZ":
            return rot(_Z, self.angle)
        if k == "H":
            return _H
        if k == "S":
            return _S
        if k == "SDG":
            return _S.conj()
        return _CNOT


def rot(pauli: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-i theta P / 2)`` for an involutory ``P``."""
    dim = pauli.shape[0]
    return math.cos(theta / 2) * np.eye(dim, dtype=complex) - 1j * math.sin(theta / 2) * pauli


def sigma(phi: float) -> np.ndarray:
    return math.cos(phi) * _X + math.sin(phi) * _Y


@dataclass(frozen=True)
class NativeGate:
    """``R`` on ``qubits=(q,)`` with ``phi``/``theta``, or ``MS`` on two qubits
    with ``phi``/``phi2``/``theta``."""

    kind: str
    qubits: tuple[int, ...]
    phi: float
    theta: float
    phi2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind == "R":
            if len(self.qubits) != 1 or self.phi2 is not None:
                raise CircuitError("R gate takes one qubit and one axis angle")
        elif self.kind == "MS":
            if len(self.qubits) != 2 or self.phi2 is None:
                raise CircuitError("MS gate takes two qubits and two axis angles")
            if self.qubits[0] == self.qubits[1]:
                raise CircuitError("MS qubits coincide")
        else:
            raise CircuitError(f"unsupported native gate {self.kind!r}")
        for a in (self.phi, self.theta, self.phi2 if self.phi2 is not None else 0.0):
            if not math.isfinite(a):
                raise CircuitError("native gate angles must be finite")

    @classmethod
    def r(cls, q: int, phi: float, theta: float) -> "NativeGate":
        return cls("R", (q,), phi, theta)

    @classmethod
    def ms(cls, q0: int, q1: int, phi0: float, phi1: float, theta: float) -> "NativeGate":
        return cls("MS", (q0, q1), phi0, theta, phi1)

    def matrix(self) -> np.ndarray:
        if self.kind == "R":
            return rot(sigma(self.phi), self.theta)
        return rot(np.kron(sigma(self.phi), sigma(self.phi2)), self.theta)


@dataclass(frozen=True)
class Fixup:
    """After measurement, XOR the bit of ``source`` onto ``target``."""

    source: int
    target: int

    def __post_init__(self):
        if self.source == self.target:
            raise CircuitError("fixup source and target coincide")


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    measure_prep: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        _check_qubits(self.n_qubits, [*self.gates, *self.measure_prep])

    def all_gates(self) -> list[Gate]:
        return [*self.gates, *self.measure_prep]

    def then(self, other: "Circuit") -> "Circuit":
        """Concatenate; ``self``'s measurement prep becomes ordinary gates."""
        if other.n_qubits != self.n_qubits:
            raise CircuitError("qubit count mismatch")
        return Circuit(self.n_qubits, self.all_gates() + list(other.gates), list(other.measure_prep))

    def counts(self) -> dict[str, int]:
        out = {"1q": 0, "2q": 0}
        for g in self.all_gates():
            out["2q" if len(g.qubits) == 2 else "1q"] += 1
        return out


@dataclass
class NativeCircuit:
    n_qubits: int
    gates: list[NativeGate] = field(default_factory=list)
    classical_fixups: list[Fixup] = field(default_factory=list)
    frame: tuple[float, ...] | None = None

    def __post_init__(self):
        _check_qubits(self.n_qubits, self.gates)
        for f in self.classical_fixups:
            for q in (f.source, f.target):
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"fixup references qubit {q} outside 0..{self.n_qubits - 1}")
        if self.frame is None:
            self.frame = (0.0,) * self.n_qubits
        self.frame = tuple(float(a) for a in self.frame)
        if len(self.frame) != self.n_qubits:
            raise CircuitError("frame length differs from qubit count")

    def counts(self) -> dict[str, int]:
        out = {"1q": 0, "2q": 0}
        for g in self.gates:
            out["2q" if g.kind == "MS" else "1q"] += 1
        return out


def _check_qubits(n: int, gates) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise CircuitError(f"qubit count {n} outside [1, {MAX_QUBITS}]")
    for g in gates:
        for q in g.qubits:
            if not 0 <= q < n:
                raise CircuitError(f"{g.kind} on qubit {q} outside 0..{n - 1}")


# ---------------------------------------------------------------- simulation

def apply_matrix(amps: np.ndarray, n: int, qubits: Sequence[int], u: np.ndarray) -> np.ndarray:
    if len(qubits) == 1:
        return kernels.apply_1q(amps, n, qubits[0], u)
    return kernels.apply_2q(amps, n, qubits[0], qubits[1], u)


def _gate_list(circuit):
    if isinstance(circuit, Circuit):
        return circuit.all_gates()
    gates = list(circuit.gates)
    return gates


def run(circuit: Circuit | NativeCircuit, initial: StateVector | None = None) -> StateVector:
    """Apply every gate as an exact unitary.  Fixups are not applied here."""
    n = circuit.n_qubits
    state = StateVector.zero(n) if initial is None else initial
    if state.n != n:
        raise CircuitError(f"state has {state.n} qubits, circuit {n}")
    amps = np.array(state.amplitudes)
    for g in _gate_list(circuit):
        amps = apply_matrix(amps, n, g.qubits, g.matrix())
    if isinstance(circuit, NativeCircuit):
        for q, a in enumerate(circuit.frame):
            if a:
                amps = kernels.apply_1q(amps, n, q, rot(_Z, a))
    return StateVector(amps)


def unitary(circuit: Circuit | NativeCircuit) -> np.ndarray:
    """Dense unitary of the circuit (columns are images of basis states)."""
    n = circuit.n_qubits
    cols = []
    for i in range(2 ** n):
        e = np.zeros(2 ** n, dtype=complex)
        e[i] = 1
        cols.append(run(circuit, StateVector(e)).amplitudes)
    return np.array(cols).T


def bitstrings(n: int) -> list[str]:
    return [format(i, f"0{n}b") for i in range(2 ** n)]


def apply_fixups(bits: str, fixups: Sequence[Fixup]) -> str:
    b = list(bits)
    for f in fixups:
        if b[f.source] == "1":
            b[f.target] = "0" if b[f.target] == "1" else "1"
    return "".join(b)


def _fixup_permutation(n: int, fixups) -> np.ndarray:
    return np.array([int(apply_fixups(s, fixups), 2) for s in bitstrings(n)])


def distribution_vector(circuit, initial: StateVector | None = None) -> np.ndarray:
    probs = run(circuit, initial).probabilities()
    fixups = getattr(circuit, "classical_fixups", ())
    if fixups:
        out = np.zeros_like(probs)
        np.add.at(out, _fixup_permutation(circuit.n_qubits, fixups), probs)
        probs = out
    return probs


def exact_distribution(circuit, initial: StateVector | None = None) -> dict[str, float]:
    """Outcome probabilities after measurement and classical fixups."""
    probs = distribution_vector(circuit, initial)
    total = probs.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise CircuitError(f"probabilities sum to {total}")
    return {s: float(p) for s, p in zip(bitstrings(circuit.n_qubits), probs)}


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit readout flips: ``p01`` reads a 0 as 1, ``p10`` a 1 as 0.

    Scalars apply to every qubit.  ``depolarizing`` is the probability that a
    two-qubit gate is followed by a uniformly random two-qubit Pauli.
    """

    p01: float | tuple[float, ...] = 0.0
    p10: float | tuple[float, ...] = 0.0
    depolarizing: float = 0.0

    def __post_init__(self):
        for p in (*np.atleast_1d(self.p01), *np.atleast_1d(self.p10)):
            if not 0.0 <= p < 0.5:
                raise CircuitError(f"readout flip probability {p} outside [0, 0.5)")
        if not 0.0 <= self.depolarizing <= 1.0:
            raise CircuitError("depolarizing probability outside [0, 1]")

    def flips(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        p01 = np.broadcast_to(np.asarray(self.p01, dtype=float), (n,)).copy()
        p10 = np.broadcast_to(np.asarray(self.p10, dtype=float), (n,)).copy()
        return p01, p10

    @property
    def is_ideal(self) -> bool:
        p01, p10 = self.flips(1) if np.ndim(self.p01) == 0 and np.ndim(self.p10) == 0 else (
            np.atleast_1d(self.p01), np.atleast_1d(self.p10))
        return not (np.any(p01) or np.any(p10) or self.depolarizing)


NOISELESS = NoiseModel()


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class Histogram:
    counts: dict[str, int]
    shots: int
    basis_label: str = ""

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise CircuitError("negative count")
        if sum(self.counts.values()) != self.shots:
            raise CircuitError("counts do not sum to shots")
        widths = {len(k) for k in self.counts}
        if len(widths) > 1:
            raise CircuitError("bitstrings of unequal width")

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.counts)))

    def frequencies(self) -> np.ndarray:
        n = self.n_qubits
        v = np.zeros(2 ** n)
        for k, c in self.counts.items():
            v[int(k, 2)] += c
        return v / self.shots

    @classmethod
    def from_vector(cls, counts_vec, basis_label: str = "") -> "Histogram":
        counts_vec = np.asarray(counts_vec)
        n = int(round(math.log2(counts_vec.size)))
        counts = {s: int(c) for s, c in zip(bitstrings(n), counts_vec)}
        return cls(counts, int(counts_vec.sum()), basis_label)


def _depolarized_distribution(circuit, noise: NoiseModel, rng, initial) -> np.ndarray:
    """Mixture over Pauli insertions after each two-qubit gate (exact when small)."""
    p = noise.depolarizing
    gates = _gate_list(circuit)
    two_q = [i for i, g in enumerate(gates) if len(g.qubits) == 2]
    paulis = [np.kron(a, b) for a in (np.eye(2), _X, _Y, _Z) for b in (np.eye(2), _X, _Y, _Z)]
    n = circuit.n_qubits
    fix = _fixup_permutation(n, getattr(circuit, "classical_fixups", ()))

    def dist_for(pattern):
        amps = np.array((StateVector.zero(n) if initial is None else initial).amplitudes)
        k = 0
        for i, g in enumerate(gates):
            amps = apply_matrix(amps, n, g.qubits, g.matrix())
            if k < len(two_q) and two_q[k] == i:
                if pattern[k]:
                    amps = apply_matrix(amps, n, g.qubits, paulis[pattern[k]])
                k += 1
        if isinstance(circuit, NativeCircuit):
            for q, a in enumerate(circuit.frame):
                amps = kernels.apply_1q(amps, n, q, rot(_Z, a))
        probs = np.abs(amps) ** 2
        out = np.zeros_like(probs)
        np.add.at(out, fix, probs)
        return out

    import itertools
    if len(two_q) <= 3:
        total = np.zeros(2 ** n)
        for pattern in itertools.product(range(16), repeat=len(two_q)):
            w = 1.0
            for e in pattern:
                w *= (1 - p + p / 16) if e == 0 else p / 16
            if w > 0:
                total += w * dist_for(pattern)
        return total
    # Monte-Carlo average over error patterns for deeper circuits
    n_traj = 2000
    total = np.zeros(2 ** n)
    for _ in range(n_traj):
        hit = rng.random(len(two_q)) < p
        pattern = np.where(hit, rng.integers(0, 16, len(two_q)), 0)
        total += dist_for(pattern)
    return total / n_traj


def sample(circuit, shots: int, noise: NoiseModel = NOISELESS, seed=None,
           basis_label: str = "", initial: StateVector | None = None) -> Histogram:
    """Multinomial draw from the exact distribution, then readout flips."""
    if shots < 1:
        raise CircuitError("shots must be >= 1")
    rng = make_rng(seed)
    n = circuit.n_qubits
    if noise.depolarizing > 0:
        probs = _depolarized_distribution(circuit, noise, rng, initial)
    else:
        probs = distribution_vector(circuit, initial)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    counts = rng.multinomial(shots, probs)
    p01, p10 = noise.flips(n)
    if np.any(p01) or np.any(p10):
        outcomes = np.repeat(np.arange(2 ** n), counts)
        bits = (outcomes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        u = rng.random(bits.shape)
        flip = np.where(bits == 0, u < p01[None, :], u < p10[None, :])
        bits = bits ^ flip
        outcomes = bits @ (1 << (n - 1 - np.arange(n)))
        counts = np.bincount(outcomes, minlength=2 ** n)
    return Histogram.from_vector(counts, basis_label)


# ---------------------------------------------------------------- text format

def _q(tok: str) -> int:
    if not tok.lower().startswith("q"):
        raise CircuitError(f"expected qubit token like q0, got {tok!r}")
    return int(tok[1:])


def circuit_to_text(circuit: Circuit | NativeCircuit, digits: int = 12) -> str:
    fmt = lambda a: f"{a:.{digits}g}"
    lines = [f"QUBITS {circuit.n_qubits}"]
    if isinstance(circuit, Circuit):
        for part, gates in (("", circuit.gates), ("MEASURE", circuit.measure_prep)):
            if part and gates:
                lines.append(part)
            for g in gates:
                qs = " ".join(f"q{q}" for q in g.qubits)
                lines.append(f"{g.kind} {qs}" + (f" {fmt(g.angle)}" if g.angle is not None else ""))
    else:
        for g in circuit.gates:
            if g.kind == "R":
                lines.append(f"R q{g.qubits[0]} {fmt(g.phi)} {fmt(g.theta)}")
            else:
                lines.append(f"MS q{g.qubits[0]} q{g.qubits[1]} {fmt(g.phi)} {fmt(g.phi2)} {fmt(g.theta)}")
        for q, a in enumerate(circuit.frame):
            if a:
                lines.append(f"VZ q{q} {fmt(a)}")
        for f in circuit.classical_fixups:
            lines.append(f"FIXUP q{f.source} -> q{f.target}")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit | NativeCircuit:
    n = None
    std: list[Gate] = []
    prep: list[Gate] = []
    native: list[NativeGate] = []
    fixups: list[Fixup] = []
    frame: dict[int, float] = {}
    in_measure = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0].upper()
        try:
            if head == "QUBITS":
                n = int(tok[1])
            elif head == "MEASURE":
                in_measure = True
            elif head == "FIXUP":
                if len(tok) != 4 or tok[2] != "->":
                    raise CircuitError("FIXUP syntax is 'FIXUP qA -> qB'")
                fixups.append(Fixup(_q(tok[1]), _q(tok[3])))
            elif head == "R":
                native.append(NativeGate.r(_q(tok[1]), float(tok[2]), float(tok[3])))
            elif head == "MS":
                native.append(NativeGate.ms(_q(tok[1]), _q(tok[2]), float(tok[3]), float(tok[4]), float(tok[5])))
            elif head == "VZ":
                frame[_q(tok[1])] = frame.get(_q(tok[1]), 0.0) + float(tok[2])
            elif head in STANDARD_1Q or head in STANDARD_2Q:
                nq = 2 if head in STANDARD_2Q else 1
                qs = tuple(_q(t) for t in tok[1:1 + nq])
                angle = float(tok[1 + nq]) if head in ROTATIONS else None
                (prep if in_measure else std).append(Gate(head, qs, angle))
            else:
                raise CircuitError(f"unknown instruction {head!r}")
        except (IndexError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
    if (std or prep) and (native or fixups or frame):
        raise CircuitError("mixed standard and native instructions")
    if n is None:
        qs = [q for g in [*std, *prep, *native] for q in g.qubits]
        qs += [q for f in fixups for q in (f.source, f.target)]
        n = max(qs) + 1 if qs else 1
    if native or fixups or frame:
        return NativeCircuit(n, native, fixups, tuple(frame.get(q, 0.0) for q in range(n)))
    return Circuit(n, std, prep)
