import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from iondmet.statevector import (
    Circuit, CircuitError, Fixup, Gate, Histogram, NativeCircuit, NativeGate, NoiseModel, StateVector,
    circuit_to_text, exact_distribution, make_rng, parse_circuit, run, sample, unitary,
)

from conftest import X, Y, Z, dense_pauli, random_state

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
CNOT01 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def embed(u, qubits, n):
    """Dense operator for ``u`` on ``qubits`` via explicit basis-state action."""
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    k = len(qubits)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub = int("".join(str(bits[q]) for q in qubits), 2)
        for new in range(2 ** k):
            amp = u[new, sub]
            if amp == 0:
                continue
            nb = list(bits)
            for i, q in enumerate(qubits):
                nb[q] = (new >> (k - 1 - i)) & 1
            out[int("".join(map(str, nb)), 2), col] += amp
    return out


@st.composite
def circuits(draw, native=False):
    n = draw(st.integers(1, 4))
    angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
    gates = []
    for _ in range(draw(st.integers(0, 10))):
        two = n > 1 and draw(st.booleans())
        if two:
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            gates.append(NativeGate.ms(a, b, draw(angle), draw(angle), draw(angle)) if native
                         else Gate("CNOT", (a, b)))
        else:
            q = draw(st.integers(0, n - 1))
            if native:
                gates.append(NativeGate.r(q, draw(angle), draw(angle)))
            else:
                kind = draw(st.sampled_from(["RX", "RY", "RZ", "H", "S", "SDG"]))
                gates.append(Gate(kind, (q,), draw(angle) if kind.startswith("R") else None))
    return NativeCircuit(n, gates) if native else Circuit(n, gates)


def oracle_matrix(g):
    m = {"H": H, "S": np.diag([1, 1j]), "SDG": np.diag([1, -1j]), "CNOT": CNOT01}
    if g.kind in m:
        return m[g.kind]
    if g.kind in ("RX", "RY", "RZ"):
        return expm(-0.5j * g.angle * {"RX": X, "RY": Y, "RZ": Z}[g.kind])
    sig = lambda phi: math.cos(phi) * X + math.sin(phi) * Y
    if g.kind == "R":
        return expm(-0.5j * g.theta * sig(g.phi))
    return expm(-0.5j * g.theta * np.kron(sig(g.phi), sig(g.phi2)))


@given(st.one_of(circuits(), circuits(native=True)), st.integers(0, 2**32 - 1))
def test_run_matches_dense_product(c, seed):
    psi = random_state(np.random.default_rng(seed), c.n_qubits)
    u = np.eye(2 ** c.n_qubits, dtype=complex)
    for g in c.gates:
        u = embed(oracle_matrix(g), g.qubits, c.n_qubits) @ u
    out = run(c, StateVector(psi)).amplitudes
    assert np.allclose(out, u @ psi, atol=1e-12)
    assert np.vdot(out, out).real == pytest.approx(1.0, abs=1e-10)


@given(circuits(), circuits())
def test_concatenation_equals_sequential(a, b):
    if a.n_qubits != b.n_qubits:
        b = Circuit(a.n_qubits, [g for g in b.gates if max(g.qubits) < a.n_qubits])
    seq = run(b, run(a))
    assert np.allclose(run(a.then(b)).amplitudes, seq.amplitudes, atol=1e-12)


def test_hadamard_on_zero():
    out = run(Circuit(1, [Gate("H", (0,))]))
    assert np.allclose(out.amplitudes, [1 / math.sqrt(2)] * 2)


def test_ms_quarter_turn_on_zero():
    out = run(NativeCircuit(2, [NativeGate.ms(0, 1, 0, 0, math.pi / 2)]))
    assert np.allclose(out.amplitudes, np.array([1, 0, 0, -1j]) / math.sqrt(2))


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, math.pi])
def test_ms_series_expansion(theta):
    xx = dense_pauli("XX")
    series = sum(np.linalg.matrix_power(-0.5j * theta * xx, k) / math.factorial(k) for k in range(30))
    assert np.allclose(NativeGate.ms(0, 1, 0, 0, theta).matrix(), series, atol=1e-12)


def test_ms_axes_definition():
    phi, phi2 = 0.3, 1.9
    s = lambda p: math.cos(p) * X + math.sin(p) * Y
    want = expm(-1j * np.kron(s(phi), s(phi2)) * math.pi / 4)
    assert np.allclose(NativeGate.ms(0, 1, phi, phi2, math.pi / 2).matrix(), want, atol=1e-12)


def test_r_quarter_turn_definition():
    s = math.cos(0.7) * X + math.sin(0.7) * Y
    assert np.allclose(NativeGate.r(0, 0.7, math.pi / 2).matrix(), expm(-1j * s * math.pi / 4))


def test_distributions_trivial():
    assert exact_distribution(Circuit(2)) == {"00": 1.0, "01": 0.0, "10": 0.0, "11": 0.0}
    bell = Circuit(2, [Gate("H", (0,)), Gate("CNOT", (0, 1))])
    d = exact_distribution(bell)
    assert d["00"] == pytest.approx(0.5) and d["11"] == pytest.approx(0.5)


def test_fixups_act_on_distribution_not_state():
    c = NativeCircuit(2, [NativeGate.r(0, 0.0, math.pi)], [Fixup(0, 1)])
    assert np.allclose(run(c).probabilities(), [0, 0, 1, 0])
    assert exact_distribution(c)["11"] == pytest.approx(1.0)


def test_frame_is_a_final_z_rotation():
    c = NativeCircuit(1, [NativeGate.r(0, 0.0, 0.4)], frame=(0.9,))
    want = expm(-0.45j * Z) @ NativeGate.r(0, 0.0, 0.4).matrix()
    assert np.allclose(unitary(c), want, atol=1e-12)


def test_validation_errors():
    with pytest.raises(CircuitError):
        Circuit(2, [Gate("H", (2,))])
    with pytest.raises(CircuitError):
        Gate("RX", (0,))
    with pytest.raises(CircuitError):
        Gate("CNOT", (1, 1))
    with pytest.raises(CircuitError):
        StateVector([1.0, 1.0])
    with pytest.raises(CircuitError):
        NoiseModel(0.6, 0.0)
    with pytest.raises(CircuitError):
        sample(Circuit(1), 0)


def test_sampling_noise_free_and_deterministic():
    h = sample(Circuit(2), 1000, seed=1)
    assert h.counts["00"] == 1000 and h.shots == 1000
    bell = Circuit(2, [Gate("H", (0,)), Gate("CNOT", (0, 1))])
    assert sample(bell, 500, seed=7).counts == sample(bell, 500, seed=7).counts


def test_bell_sampling_within_binomial_bound():
    bell = Circuit(2, [Gate("H", (0,)), Gate("CNOT", (0, 1))])
    shots = 100_000
    h = sample(bell, shots, seed=3)
    sd = math.sqrt(shots * 0.25)
    assert abs(h.counts["00"] - shots / 2) < 5 * sd
    assert h.counts["01"] == h.counts["10"] == 0


def test_readout_flip_rate():
    shots = 200_000
    one = Circuit(1, [Gate("RX", (0,), math.pi)])
    h = sample(one, shots, NoiseModel(0.0, 0.02), seed=5)
    sd = math.sqrt(shots * 0.02 * 0.98)
    assert abs(h.counts["0"] - 0.02 * shots) < 5 * sd


def test_histogram_invariants():
    with pytest.raises(CircuitError):
        Histogram({"0": 3, "1": 1}, 5)
    h = Histogram.from_vector([1, 0, 2, 1], "ZZ")
    assert h.shots == 4 and np.allclose(h.frequencies(), [0.25, 0, 0.5, 0.25])


def test_rng_is_counter_based():
    assert type(make_rng(0).bit_generator).__name__ == "Philox"


def test_depolarizing_one_gate_matches_mixture():
    c = NativeCircuit(2, [NativeGate.ms(0, 1, 0, 0, math.pi / 2)])
    h = sample(c, 200_000, NoiseModel(depolarizing=1.0), seed=2)
    # a uniformly random Pauli after the gate leaves the four outcomes uniform
    assert np.allclose(h.frequencies(), 0.25, atol=0.01)


@given(st.one_of(circuits(), circuits(native=True)))
def test_text_roundtrip(c):
    back = parse_circuit(circuit_to_text(c, 17))
    assert np.allclose(unitary(back), unitary(c), atol=1e-12)


def test_text_format_examples():
    c = parse_circuit("RX q0 1.571\nCNOT q0 q1\n")
    assert isinstance(c, Circuit) and c.n_qubits == 2
    n = parse_circuit("MS q0 q1 0.0 0.0 1.571\nFIXUP q0 -> q1\n")
    assert isinstance(n, NativeCircuit) and n.classical_fixups == [Fixup(0, 1)]
    with pytest.raises(CircuitError):
        parse_circuit("FIXUP q0 q1\n")
