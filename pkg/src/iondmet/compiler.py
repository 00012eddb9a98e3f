"""Standard-gate to trapped-ion native-gate compilation and optimization.

Transpilation tracks a per-qubit virtual-Z frame: ``RZ``, ``S`` and ``SDG``
only update the frame, and every later equatorial rotation is emitted with
its axis shifted by minus the frame.  The leftover frame is stored on the
native circuit so unitaries agree with the input up to global phase.

Optimization fuses single-qubit runs and then tries a fixed list of
rewrites on the last two-qubit gate before measurement.  A rewrite is kept
only if the measured distribution (after classical fixups) is unchanged to
``1e-12``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Mapping, Sequence

import numpy as np

from .statevector import (
    Circuit, CircuitError, Fixup, Gate, NativeCircuit, NativeGate, exact_distribution,
    rot, sigma, total_variation,
)

HALF_PI = math.pi / 2
TWO_PI = 2 * math.pi
EXACT_TOL = 1e-12
ANGLE_EPS = 1e-12
BASES = ("ZZ", "XZ", "ZX", "XX", "YY")

_Z = np.diag([1.0 + 0j, -1.0])


def _wrap(a: float) -> float:
    """Map an axis angle into [0, 2 pi)."""
    w = math.fmod(a, TWO_PI)
    if w < 0:
        w += TWO_PI
    return 0.0 if abs(w - TWO_PI) < ANGLE_EPS else w


# ---------------------------------------------------------------- measurement prep

def measure_prep(basis: str) -> list[Gate]:
    """Basis-change suffix: Z none, X ``H``, Y ``SDG`` then ``H``."""
    gates = []
    for q, letter in enumerate(basis.upper()):
        if letter == "X":
            gates.append(Gate("H", (q,)))
        elif letter == "Y":
            gates += [Gate("SDG", (q,)), Gate("H", (q,))]
        elif letter != "Z":
            raise CircuitError(f"unknown measurement basis letter {letter!r}")
    return gates


def with_basis(c: Circuit, basis: str) -> Circuit:
    if len(basis) != c.n_qubits:
        raise CircuitError("basis label length differs from qubit count")
    return Circuit(c.n_qubits, list(c.all_gates()), measure_prep(basis))


# ---------------------------------------------------------------- transpile

def _single_native(g: Gate, frame: list[float]) -> list[NativeGate]:
    q = g.qubits[0]
    k = g.kind
    if k == "RZ":
        frame[q] += g.angle
        return []
    if k == "S":
        frame[q] += HALF_PI
        return []
    if k == "SDG":
        frame[q] -= HALF_PI
        return []
    if k == "RX":
        return [NativeGate.r(q, -frame[q], g.angle)]
    if k == "RY":
        return [NativeGate.r(q, HALF_PI - frame[q], g.angle)]
    if k == "H":
        frame[q] += math.pi
        return [NativeGate.r(q, HALF_PI - frame[q], HALF_PI)]
    raise CircuitError(f"unsupported gate kind {k!r}")


def _ms(q0: int, q1: int, phi0: float, phi1: float, theta: float, frame) -> NativeGate:
    return NativeGate.ms(q0, q1, phi0 - frame[q0], phi1 - frame[q1], theta)


def _cnot_native(c: int, t: int, frame) -> list[NativeGate]:
    return [
        NativeGate.r(c, HALF_PI - frame[c], HALF_PI),
        _ms(c, t, 0.0, 0.0, HALF_PI, frame),
        NativeGate.r(c, -frame[c], -HALF_PI),
        NativeGate.r(t, -frame[t], -HALF_PI),
        NativeGate.r(c, HALF_PI - frame[c], -HALF_PI),
    ]


def _zz_native(a: int, b: int, alpha: float, frame) -> list[NativeGate]:
    """``exp(-i alpha Z_a Z_b / 2)`` as one MS between Y quarter turns."""
    out = []
    for q in (a, b):
        out.append(NativeGate.r(q, HALF_PI - frame[q], -HALF_PI))
    out.append(_ms(a, b, 0.0, 0.0, alpha, frame))
    for q in (a, b):
        out.append(NativeGate.r(q, HALF_PI - frame[q], HALF_PI))
    return out


def transpile(c: Circuit, merge_zz: bool = True) -> NativeCircuit:
    """Rewrite into ``R_phi(theta)`` and ``MS`` gates plus a final Z frame.

    With ``merge_zz`` a ``CNOT(a,b) RZ_b(alpha) CNOT(a,b)`` window becomes a
    single MS of angle ``alpha`` instead of two maximally entangling ones.
    """
    gates = c.all_gates()
    frame = [0.0] * c.n_qubits
    out: list[NativeGate] = []
    i = 0
    while i < len(gates):
        g = gates[i]
        if (merge_zz and g.kind == "CNOT" and i + 2 < len(gates)
                and gates[i + 1].kind == "RZ" and gates[i + 1].qubits[0] == g.qubits[1]
                and gates[i + 2].kind == "CNOT" and gates[i + 2].qubits == g.qubits):
            out += _zz_native(*g.qubits, gates[i + 1].angle, frame)
            i += 3
            continue
        if g.kind == "CNOT":
            out += _cnot_native(*g.qubits, frame)
        else:
            out += _single_native(g, frame)
        i += 1
    return NativeCircuit(c.n_qubits, out, [], tuple(frame))


# ---------------------------------------------------------------- single-qubit algebra

def decompose_1q(u: np.ndarray) -> tuple[float, float, float]:
    """Return ``(alpha, phi, theta)`` with ``u ~ RZ(alpha) R_phi(theta)``, ``theta`` in [0, pi]."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    a, b = u[0, 0], u[1, 0]
    theta = 2 * math.atan2(abs(b), abs(a))
    if abs(b) < 1e-14:
        return _norm_alpha(-2 * np.angle(a)), 0.0, 0.0
    if abs(a) < 1e-14:
        return 0.0, _wrap(np.angle(b) + HALF_PI), math.pi
    alpha = -2 * np.angle(a)
    phi = np.angle(b) + HALF_PI - alpha / 2
    return _norm_alpha(alpha), _wrap(phi), theta


def _norm_alpha(a: float) -> float:
    # RZ is 4 pi periodic but only the 2 pi class matters up to global phase
    return _wrap(a)


def _r_matrix(g: NativeGate) -> np.ndarray:
    return rot(sigma(g.phi), g.theta)


def _shift_after(gates: list[NativeGate], start: int, q: int, alpha: float) -> None:
    """Move ``RZ_q(alpha)`` from position ``start`` to the end of ``gates``."""
    for k in range(start, len(gates)):
        g = gates[k]
        if q not in g.qubits:
            continue
        if g.kind == "R":
            gates[k] = replace(g, phi=_wrap(g.phi - alpha))
        elif g.qubits[0] == q:
            gates[k] = replace(g, phi=_wrap(g.phi - alpha))
        else:
            gates[k] = replace(g, phi2=_wrap(g.phi2 - alpha))


def fuse_single_qubit(nc: NativeCircuit) -> NativeCircuit:
    """Merge each run of single-qubit gates into at most one ``R`` gate.

    The Z part of every merged run is pushed to the end of the circuit.
    """
    gates = list(nc.gates)
    frame = list(nc.frame)
    out: list[NativeGate] = []
    pending: dict[int, np.ndarray] = {}

    def flush(q, start):
        u = pending.pop(q, None)
        if u is None:
            return
        alpha, phi, theta = decompose_1q(u)
        if theta > ANGLE_EPS:
            out.append(NativeGate.r(q, phi, theta))
        if abs(alpha) > ANGLE_EPS:
            _shift_after(gates, start, q, alpha)
            frame[q] += alpha

    idx = -1
    while idx + 1 < len(gates):
        idx += 1
        g = gates[idx]
        if g.kind == "R":
            q = g.qubits[0]
            pending[q] = _r_matrix(g) @ pending.get(q, np.eye(2))
        else:
            for q in g.qubits:
                flush(q, idx)
            out.append(gates[idx])
    for q in sorted(pending):
        flush(q, len(gates))
    return NativeCircuit(nc.n_qubits, out, list(nc.classical_fixups),
                         tuple(_wrap(f) for f in frame))


def pulse_form(nc: NativeCircuit) -> NativeCircuit:
    """Express every single-qubit rotation as one or two quarter-turn pulses."""
    gates = list(nc.gates)
    frame = list(nc.frame)
    out = []
    for idx, g in enumerate(gates):
        if g.kind != "R" or abs(g.theta - HALF_PI) < ANGLE_EPS:
            out.append(g)
            continue
        q = g.qubits[0]
        beta = math.pi - g.theta
        m = rot(sigma(0.0), HALF_PI) @ rot(_Z, beta) @ rot(sigma(0.0), HALF_PI)
        alpha_m, phi_m, theta_m = decompose_1q(m)
        phi1 = _wrap(g.phi - phi_m)
        phi2 = _wrap(phi1 - beta)
        out += [NativeGate.r(q, phi1, HALF_PI), NativeGate.r(q, phi2, HALF_PI)]
        # R_phi2 R_phi1 = RZ(alpha_m - beta) R_phi(theta); undo the extra Z
        resid = _wrap(alpha_m - beta)
        if abs(resid) > ANGLE_EPS and abs(resid - TWO_PI) > ANGLE_EPS:
            _shift_after(gates, idx + 1, q, -resid)
            frame[q] -= resid
    return NativeCircuit(nc.n_qubits, out, list(nc.classical_fixups),
                         tuple(_wrap(f) for f in frame))


# ---------------------------------------------------------------- MS rewrites

def _last_ms(gates: Sequence[NativeGate]) -> int | None:
    for k in range(len(gates) - 1, -1, -1):
        if gates[k].kind == "MS":
            return k
    return None


def _candidates(nc: NativeCircuit, k: int):
    """Yield ``(rule, gates, fixups)`` replacements for the MS at index ``k``."""
    ms = nc.gates[k]
    before, after = list(nc.gates[:k]), list(nc.gates[k + 1:])
    fix = list(nc.classical_fixups)
    q0, q1 = ms.qubits
    axes = {q0: ms.phi, q1: ms.phi2}
    yield "drop", before + after, fix
    for a, b in ((q0, q1), (q1, q0)):
        for sgn in (1, -1):
            rb = NativeGate.r(b, axes[b], sgn * ms.theta)
            ra = NativeGate.r(a, axes[a], sgn * ms.theta)
            yield "local", before + [rb] + after, fix
            yield "local+xor", before + [rb] + after, [Fixup(a, b)] + fix
            yield "input+xor", before + [ra] + after, [Fixup(a, b)] + fix
            flip = NativeGate.r(b, 0.0, math.pi)
            yield "input+flip+xor", before + [ra, flip] + after, [Fixup(a, b)] + fix


def _dist_vec(nc: NativeCircuit) -> np.ndarray:
    d = exact_distribution(nc)
    return np.array([d[k] for k in sorted(d)])


def eliminate_trailing_ms(nc: NativeCircuit, basis: str | None = None) -> tuple[NativeCircuit, str | None]:
    """Try each rewrite on the last MS if only single-qubit gates follow it.

    The rewrite patterns contain equatorial quarter turns only, so an MS
    touching a qubit measured in Y (whose prep carries a phase gate) is left
    alone.
    """
    k = _last_ms(nc.gates)
    if k is None:
        return nc, None
    if basis and any(basis[q].upper() == "Y" for q in nc.gates[k].qubits):
        return nc, None
    target = _dist_vec(nc)
    for rule, gates, fix in _candidates(nc, k):
        cand = NativeCircuit(nc.n_qubits, gates, fix, nc.frame)
        if np.max(np.abs(_dist_vec(cand) - target)) <= EXACT_TOL:
            return cand, rule
    return nc, None


def _normalize_ms(nc: NativeCircuit) -> NativeCircuit:
    """Wrap axes and make every MS angle non-negative."""
    out = []
    for g in nc.gates:
        if g.kind == "MS":
            phi, theta = g.phi, g.theta
            if theta < 0:
                phi, theta = phi + math.pi, -theta
            out.append(NativeGate.ms(*g.qubits, _wrap(phi), _wrap(g.phi2), theta))
        else:
            out.append(g)
    return NativeCircuit(nc.n_qubits, out, list(nc.classical_fixups), nc.frame)


def optimize(nc: NativeCircuit, basis: str | None = None, pulses: bool = True,
             report: "CompileReport | None" = None) -> NativeCircuit:
    """Fuse single-qubit gates and remove two-qubit gates before measurement.

    ``basis`` labels the measurement prep already present in ``nc``; it
    gates which qubits the MS rewrites may touch.  With ``pulses`` every single-qubit rotation is
    finally written as quarter-turn pulses.
    """
    target = _dist_vec(nc)
    cur = fuse_single_qubit(_normalize_ms(nc))
    rules = []
    while True:
        nxt, rule = eliminate_trailing_ms(cur, basis)
        if rule is None:
            break
        rules.append(rule)
        cur = fuse_single_qubit(nxt)
    if pulses:
        cur = pulse_form(cur)
    cur = _normalize_ms(cur)
    drift = float(np.max(np.abs(_dist_vec(cur) - target)))
    if drift > 1e-10:
        raise CircuitError(f"optimization changed the distribution by {drift:.2e}")
    if report is not None:
        report.rules_fired += rules
        report.basis = basis or report.basis
    return cur


# ---------------------------------------------------------------- rounding

def _q3(x: float) -> float:
    return float(Decimal(repr(float(x))).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


def quantize_params(nc: NativeCircuit) -> NativeCircuit:
    """Round every angle half-to-even to three decimals."""
    out = []
    for g in nc.gates:
        if g.kind == "R":
            out.append(NativeGate.r(g.qubits[0], _q3(g.phi), _q3(g.theta)))
        else:
            out.append(NativeGate.ms(*g.qubits, _q3(g.phi), _q3(g.phi2), _q3(g.theta)))
    return NativeCircuit(nc.n_qubits, out, list(nc.classical_fixups),
                         tuple(_q3(f) for f in nc.frame))


# ---------------------------------------------------------------- equivalence

@dataclass
class EquivalenceReport:
    distances: dict[str, float]
    tol: float

    @property
    def passed(self) -> bool:
        return all(d < self.tol for d in self.distances.values())

    @property
    def worst(self) -> float:
        return max(self.distances.values(), default=0.0)


def equivalence_check(a, b, bases: Sequence[str] | None = None, tol: float = 1e-3) -> EquivalenceReport:
    """Total-variation distance of exact distributions, per basis.

    ``a`` and ``b`` are circuits already ending in their measurement prep
    (compared once under the label ``"-"``) or mappings basis -> circuit.
    Standard circuits without prep may be given with ``bases``.
    """
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        keys = bases or sorted(set(a) & set(b))
        d = {k: total_variation(exact_distribution(a[k]), exact_distribution(b[k])) for k in keys}
        return EquivalenceReport(d, tol)
    if bases:
        if not (isinstance(a, Circuit) and isinstance(b, Circuit)):
            raise CircuitError("basis expansion needs standard circuits")
        d = {k: total_variation(exact_distribution(with_basis(a, k)),
                                exact_distribution(with_basis(b, k))) for k in bases}
        return EquivalenceReport(d, tol)
    return EquivalenceReport({"-": total_variation(exact_distribution(a), exact_distribution(b))}, tol)


# ---------------------------------------------------------------- driver

@dataclass
class CompileReport:
    basis: str = ""
    input_counts: dict[str, int] = field(default_factory=dict)
    transpiled_counts: dict[str, int] = field(default_factory=dict)
    output_counts: dict[str, int] = field(default_factory=dict)
    rules_fired: list[str] = field(default_factory=list)
    rounded: bool = False
    tv_after_rounding: float = 0.0

    def to_text(self) -> str:
        c = lambda d: f"1q={d.get('1q', 0)} 2q={d.get('2q', 0)}"
        return "\n".join([
            f"basis {self.basis}",
            f"input {c(self.input_counts)}",
            f"transpiled {c(self.transpiled_counts)}",
            f"output {c(self.output_counts)}",
            f"rules {','.join(self.rules_fired) or 'none'}",
            f"rounded {'yes' if self.rounded else 'no'}",
            f"tv_after_rounding {self.tv_after_rounding:.3e}",
        ]) + "\n"


def compile_circuit(c: Circuit, basis: str, rounding: bool = True,
                    pulses: bool = True) -> tuple[NativeCircuit, NativeCircuit, CompileReport]:
    """Transpile ``c`` measured in ``basis``; return (pre, post, report)."""
    full = with_basis(c, basis)
    pre = transpile(full)
    report = CompileReport(basis=basis, input_counts=full.counts(), transpiled_counts=pre.counts())
    post = optimize(pre, basis, pulses=pulses, report=report)
    if rounding:
        rounded = quantize_params(post)
        report.rounded = True
        report.tv_after_rounding = total_variation(exact_distribution(post), exact_distribution(rounded))
        post = rounded
    report.output_counts = post.counts()
    return pre, post, report


# ---------------------------------------------------------------- reference circuits

def preopt_reference(params: Sequence[float], basis: str | None = None) -> Circuit:
    """Pre-optimization ansatz circuit from a row of seven listed angles.

    Gate order per qubit follows the column labels:
    q0 ``RZ RY`` then ``H``; q1 ``RZ RY RX``; the CNOT-RZ-CNOT window; then
    ``H`` on q0 and the closing ``RX`` on q1.
    """
    rz00, ry01, rz10, ry11, rx12, rz13, rx14 = params
    gates = [
        Gate("RZ", (0,), rz00), Gate("RY", (0,), ry01), Gate("H", (0,)),
        Gate("RZ", (1,), rz10), Gate("RY", (1,), ry11), Gate("RX", (1,), rx12),
        Gate("CNOT", (0, 1)), Gate("RZ", (1,), rz13), Gate("CNOT", (0, 1)),
        Gate("H", (0,)), Gate("RX", (1,), rx14),
    ]
    c = Circuit(2, gates)
    return with_basis(c, basis) if basis else c


def postopt_reference(params: Sequence[float], basis: str) -> NativeCircuit:
    """Post-optimization circuit for ZZ, XZ (ZX) or XX from the eight listed axis angles.

    Each entry is a quarter-turn pulse axis.  ZZ: a pulse pair on q1 copied
    onto q0 by XOR.  XZ: one pulse on q0 and a pair on q1.  XX: as XZ plus
    an XOR from q0 onto q1.
    """
    zz, zz_, xz0, xz1, xz1_, xx0, xx1, xx1_ = params
    r = lambda q, phi: NativeGate.r(q, phi, HALF_PI)
    b = basis.upper()
    if b == "ZZ":
        return NativeCircuit(2, [r(1, zz), r(1, zz_)], [Fixup(1, 0)])
    if b == "XZ":
        return NativeCircuit(2, [r(0, xz0), r(1, xz1), r(1, xz1_)])
    if b == "ZX":
        return NativeCircuit(2, [r(1, xz0), r(0, xz1), r(0, xz1_)])
    if b == "XX":
        return NativeCircuit(2, [r(0, xx0), r(1, xx1), r(1, xx1_)], [Fixup(0, 1)])
    raise CircuitError(f"no listed post-optimization circuit for basis {basis!r}")


def two_qubit_angles(nc: NativeCircuit) -> list[float]:
    return [g.theta for g in nc.gates if g.kind == "MS"]
