"""Qubit coupled-cluster ansatz: mean-field product states, generator
screening and variational minimization."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .pauli import PauliError, PauliString, PauliSum, commutator_expectation, expectation
from .statevector import Circuit, Gate, StateVector, make_rng

FD_STEP = 1e-6
DEFAULT_STARTS = 8
MAX_ITER = 500


@dataclass(frozen=True)
class MeanFieldParams:
    theta: tuple[float, ...]
    phi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "phi", tuple(float(p) for p in self.phi))
        if len(self.theta) != len(self.phi):
            raise ValueError("theta and phi lengths differ")
        if not all(math.isfinite(a) for a in (*self.theta, *self.phi)):
            raise ValueError("mean-field angles must be finite")

    @property
    def n_qubits(self) -> int:
        return len(self.theta)

    def vector(self) -> np.ndarray:
        return np.array([*self.theta, *self.phi])

    @classmethod
    def from_vector(cls, v) -> "MeanFieldParams":
        n = len(v) // 2
        return cls(tuple(v[:n]), tuple(v[n:]))


@dataclass(frozen=True)
class AnsatzSpec:
    mf: MeanFieldParams
    generators: tuple[PauliString, ...] = ()
    tau: tuple[float, ...] = ()

    def __post_init__(self):
        gens = tuple(g if isinstance(g, PauliString) else PauliString(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if len(gens) != len(self.tau):
            raise ValueError("one amplitude per generator required")
        for g in gens:
            if g.n_qubits != self.mf.n_qubits:
                raise PauliError(f"generator {g} does not match {self.mf.n_qubits} qubits")

    @property
    def n_params(self) -> int:
        return 2 * self.mf.n_qubits + len(self.tau)

    def vector(self) -> np.ndarray:
        return np.array([*self.mf.vector(), *self.tau])

    def with_vector(self, v) -> "AnsatzSpec":
        n = self.mf.n_qubits
        return AnsatzSpec(MeanFieldParams.from_vector(v[:2 * n]), self.generators, tuple(v[2 * n:]))

    def to_text(self) -> str:
        f = lambda xs: " ".join(f"{x:.9g}" for x in xs)
        lines = [f"n_qubits {self.mf.n_qubits}", f"theta {f(self.mf.theta)}", f"phi {f(self.mf.phi)}"]
        lines += [f"generator {g.letters} {t:.9g}" for g, t in zip(self.generators, self.tau)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AnsatzSpec":
        theta = phi = None
        gens, taus = [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            key, vals = line[0], line[1:]
            if key == "theta":
                theta = [float(v) for v in vals]
            elif key == "phi":
                phi = [float(v) for v in vals]
            elif key == "generator":
                gens.append(PauliString(vals[0]))
                taus.append(float(vals[1]))
            elif key != "n_qubits":
                raise ValueError(f"unknown ansatz field {key!r}")
        if theta is None or phi is None:
            raise ValueError("ansatz text lacks theta/phi")
        return cls(MeanFieldParams(theta, phi), tuple(gens), tuple(taus))


@dataclass
class ScreeningReport:
    candidates: list[tuple[PauliString, float]]
    flip_index_groups: dict[tuple[int, ...], list[PauliString]] = field(default_factory=dict)

    def top_group(self, rel_tol: float = 1e-9) -> list[PauliString]:
        """All candidates tied (within ``rel_tol``) with the largest magnitude."""
        if not self.candidates:
            return []
        best = self.candidates[0][1]
        return [p for p, g in self.candidates if abs(g - best) <= rel_tol * max(best, 1e-300)]


@dataclass
class OptResult:
    """Optimizer output; unpacks as ``(params, energy)``."""

    params: object
    energy: float
    converged: bool
    n_iter: int
    message: str = ""

    def __iter__(self):
        yield self.params
        yield self.energy


# ---------------------------------------------------------------- states

def _qubit_state(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def mean_field_state(mf: MeanFieldParams) -> StateVector:
    amps = np.ones(1, dtype=complex)
    for t, p in zip(mf.theta, mf.phi):
        amps = np.kron(amps, _qubit_state(t, p))
    return StateVector(amps)


def apply_generator(amps: np.ndarray, p: PauliString, tau: float) -> np.ndarray:
    """``exp(-i tau P / 2)`` applied to raw amplitudes."""
    x, z, ny = p.masks()
    idx = np.arange(amps.size)
    signs = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
    p_amps = np.empty_like(amps)
    p_amps[idx ^ x] = (1j) ** ny * signs * amps
    return math.cos(tau / 2) * amps - 1j * math.sin(tau / 2) * p_amps


def ansatz_state(spec: AnsatzSpec) -> StateVector:
    amps = np.array(mean_field_state(spec.mf).amplitudes)
    # first generator acts first on the reference
    for g, t in zip(spec.generators, spec.tau):
        amps = apply_generator(amps, g, t)
    return StateVector(amps)


def energy(h: PauliSum, spec: AnsatzSpec) -> float:
    return expectation(h, ansatz_state(spec))


def mean_field_energy(h: PauliSum, mf: MeanFieldParams) -> float:
    """Closed form for product states: each string factorizes over qubits."""
    th = np.array(mf.theta)
    ph = np.array(mf.phi)
    local = {
        "I": np.ones_like(th),
        "X": np.sin(th) * np.cos(ph),
        "Y": np.sin(th) * np.sin(ph),
        "Z": np.cos(th),
    }
    e = h.constant
    for p, c in h.items():
        term = c
        for j, letter in enumerate(p.letters):
            if letter != "I":
                term *= local[letter][j]
        e += term
    return float(e)


# ---------------------------------------------------------------- optimization

def _central_grad(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        g[k] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _lbfgs(f, x0, ftol, gtol, maxiter):
    res = minimize(f, x0, jac=lambda x: _central_grad(f, x), method="L-BFGS-B",
                   options={"ftol": ftol, "gtol": gtol, "maxiter": maxiter})
    return res


def optimize_mean_field(h: PauliSum, starts: int = DEFAULT_STARTS, seed=0,
                        ftol: float = 1e-12, gtol: float = 1e-8,
                        maxiter: int = MAX_ITER) -> OptResult:
    """Multi-start minimization of the product-state energy over all angles."""
    if starts < 1:
        raise ValueError("starts must be >= 1")
    n = h.n_qubits
    rng = make_rng(seed)
    f = lambda v: mean_field_energy(h, MeanFieldParams.from_vector(v))
    best = None
    for _ in range(starts):
        x0 = np.concatenate([rng.uniform(0, math.pi, n), rng.uniform(0, 2 * math.pi, n)])
        res = _lbfgs(f, x0, ftol, gtol, maxiter)
        if best is None or res.fun < best.fun:
            best = res
    return OptResult(MeanFieldParams.from_vector(best.x), float(best.fun),
                     bool(best.success), int(best.nit), str(best.message))


def vqe_minimize(h: PauliSum, spec0: AnsatzSpec, ftol: float = 1e-8, gtol: float = 1e-6,
                 maxiter: int = MAX_ITER, restarts: int = 0, seed=0) -> OptResult:
    """Quasi-Newton minimization of the exact ansatz energy over all angles.

    ``restarts`` adds random perturbations of ``spec0`` as extra starts.
    """
    f = lambda v: energy(h, spec0.with_vector(v))
    x0 = spec0.vector()
    best = _lbfgs(f, x0, ftol, gtol, maxiter)
    rng = make_rng(seed)
    for _ in range(restarts):
        res = _lbfgs(f, x0 + rng.normal(0, 0.3, x0.size), ftol, gtol, maxiter)
        if res.fun < best.fun:
            best = res
    return OptResult(spec0.with_vector(best.x), float(best.fun),
                     bool(best.success), int(best.nit), str(best.message))


# ---------------------------------------------------------------- screening

def odd_y_strings(n: int):
    """All strings with an odd number of Y letters, in lexicographic order."""
    for letters in itertools.product("IXYZ", repeat=n):
        if letters.count("Y") % 2 == 1:
            yield PauliString("".join(letters))


def flip_index(p: PauliString) -> tuple[int, ...]:
    return tuple(j for j, c in enumerate(p.letters) if c in "XY")


def screen_generators(h: PauliSum, mf: MeanFieldParams, max_qubits: int = 8) -> ScreeningReport:
    """Rank odd-Y strings by ``|dE/dtau|`` at ``tau = 0``.

    Equal magnitudes (to 12 decimals) are ordered lexicographically.
    """
    n = h.n_qubits
    if n > max_qubits:
        raise ValueError(f"exhaustive screening limited to {max_qubits} qubits")
    psi = mean_field_state(mf)
    scored = [(p, abs(commutator_expectation(h, p, psi))) for p in odd_y_strings(n)]
    scored.sort(key=lambda pg: (-round(pg[1], 12), pg[0].letters))
    groups: dict[tuple[int, ...], list[PauliString]] = {}
    for p, _ in scored:
        groups.setdefault(flip_index(p), []).append(p)
    return ScreeningReport(scored, groups)


# ---------------------------------------------------------------- circuits

def exponential_gadget(p: PauliString, tau: float) -> list[Gate]:
    """Basis change, CNOT ladder, ``RZ(tau)`` on the last support qubit, unroll."""
    support = [j for j, c in enumerate(p.letters) if c != "I"]
    if not support:
        return []
    pre, post = [], []
    for j in support:
        c = p.letters[j]
        if c == "X":
            pre.append(Gate("H", (j,)))
            post.append(Gate("H", (j,)))
        elif c == "Y":
            pre.append(Gate("RX", (j,), math.pi / 2))
            post.append(Gate("RX", (j,), -math.pi / 2))
    ladder = [Gate("CNOT", (a, b)) for a, b in zip(support, support[1:])]
    return [*pre, *ladder, Gate("RZ", (support[-1],), tau), *reversed(ladder), *post]


def mean_field_gates(mf: MeanFieldParams) -> list[Gate]:
    gates = []
    for j, (t, p) in enumerate(zip(mf.theta, mf.phi)):
        gates.append(Gate("RY", (j,), t))
        gates.append(Gate("RZ", (j,), p))
    return gates


def build_ansatz_circuit(spec: AnsatzSpec) -> Circuit:
    gates = mean_field_gates(spec.mf)
    for g, t in zip(spec.generators, spec.tau):
        gates += exponential_gadget(g, t)
    return Circuit(spec.mf.n_qubits, gates)


__all__ = [
    "AnsatzSpec", "MeanFieldParams", "OptResult", "ScreeningReport",
    "ansatz_state", "apply_generator", "build_ansatz_circuit", "energy",
    "exponential_gadget", "flip_index", "mean_field_energy", "mean_field_state",
    "odd_y_strings", "optimize_mean_field", "screen_generators", "vqe_minimize",
]
