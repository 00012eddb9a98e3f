import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import R_ALL, X, Y, Z
from iondmet.compiler import (
    BASES, compile_circuit, decompose_1q, equivalence_check, fuse_single_qubit, optimize,
    postopt_reference, preopt_reference, pulse_form, quantize_params, transpile, two_qubit_angles,
    with_basis,
)
from iondmet.data import reference
from iondmet.pipeline import reference_spec
from iondmet.qcc import build_ansatz_circuit
from iondmet.statevector import (
    Circuit, CircuitError, Gate, NativeCircuit, NativeGate, exact_distribution, total_variation, unitary,
)

angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@st.composite
def std_circuits(draw, n_max=3):
    n = draw(st.integers(1, n_max))
    gates = []
    for _ in range(draw(st.integers(0, 8))):
        if n > 1 and draw(st.booleans()):
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            gates.append(Gate("CNOT", (a, b)))
        else:
            q = draw(st.integers(0, n - 1))
            kind = draw(st.sampled_from(["RX", "RY", "RZ", "H", "S", "SDG"]))
            gates.append(Gate(kind, (q,), draw(angle) if kind.startswith("R") else None))
    return Circuit(n, gates)


def phase_distance(u, v):
    """min over global phase of the max-entry difference."""
    k = np.vdot(v.ravel(), u.ravel())
    ph = k / abs(k) if abs(k) > 1e-12 else 1.0
    return np.max(np.abs(u - ph * v))


def r_oracle(phi, theta):
    axis = math.cos(phi) * X + math.sin(phi) * Y
    return expm(-0.5j * theta * axis)


def ansatz(r):
    return build_ansatz_circuit(reference_spec(r))


@given(std_circuits())
def test_transpile_preserves_unitary(c):
    assert phase_distance(unitary(transpile(c)), unitary(c)) < 1e-9


@given(std_circuits())
def test_fuse_and_pulses_preserve_unitary(c):
    nc = transpile(c)
    fused = fuse_single_qubit(nc)
    assert phase_distance(unitary(fused), unitary(c)) < 1e-9
    pulsed = pulse_form(fused)
    assert phase_distance(unitary(pulsed), unitary(c)) < 1e-9
    for g in pulsed.gates:
        if g.kind == "R":
            assert g.theta == pytest.approx(math.pi / 2, abs=1e-12)


@given(std_circuits())
def test_fusion_leaves_no_adjacent_single_qubit_pair(c):
    fused = fuse_single_qubit(transpile(c))
    last = {}
    for g in fused.gates:
        if g.kind == "R":
            assert last.get(g.qubits[0]) != "R"
        for q in g.qubits:
            last[q] = g.kind


@given(angle, angle, angle)
def test_decompose_1q_roundtrip(a, phi, theta):
    u = expm(-0.5j * a * Z) @ r_oracle(phi, theta)
    alpha, p, t = decompose_1q(u)
    assert 0 <= t <= math.pi + 1e-12
    rebuilt = expm(-0.5j * alpha * Z) @ r_oracle(p, t)
    assert phase_distance(rebuilt, u) < 1e-9


@pytest.mark.parametrize("r", R_ALL)
@pytest.mark.parametrize("basis", ["ZZ", "XZ", "ZX", "XX"])
def test_non_y_bases_need_no_two_qubit_gate(r, basis):
    pre, post, rep = compile_circuit(ansatz(r), basis)
    assert pre.counts()["2q"] >= 1
    assert two_qubit_angles(post) == []
    assert rep.tv_after_rounding <= 1e-3
    assert equivalence_check(with_basis(ansatz(r), basis), post).worst <= 1e-3


@pytest.mark.parametrize("r", R_ALL)
def test_yy_keeps_one_ms_matching_listed_angle(r):
    _, post, _ = compile_circuit(ansatz(r), "YY")
    angles = two_qubit_angles(post)
    assert len(angles) == 1
    assert abs(angles[0] - reference()[r].yy_theta) <= 0.001 + 1e-12
    assert equivalence_check(with_basis(ansatz(r), "YY"), post).worst <= 1e-3


@pytest.mark.parametrize("r", R_ALL)
@pytest.mark.parametrize("basis", BASES)
def test_listed_preopt_circuit_agrees(r, basis):
    ref = preopt_reference(reference()[r].preopt, basis)
    assert equivalence_check(with_basis(ansatz(r), basis), ref).worst <= 1e-3


def _postopt_cases():
    for r in R_ALL:
        for b in ("ZZ", "XZ", "ZX", "XX"):
            marks = [pytest.mark.xfail(strict=True, reason="listed XX circuit at R=1.3 is 1.5e-3 off")] \
                if (r, b) == (1.3, "XX") else []
            yield pytest.param(r, b, marks=marks)


@pytest.mark.parametrize("r,basis", list(_postopt_cases()))
def test_listed_postopt_circuit_agrees(r, basis):
    ref = postopt_reference(reference()[r].postopt, basis)
    assert equivalence_check(with_basis(ansatz(r), basis), ref).worst <= 1e-3


def test_zx_is_xz_with_qubits_swapped():
    p = reference()[1.1].postopt
    a, b = exact_distribution(postopt_reference(p, "XZ")), exact_distribution(postopt_reference(p, "ZX"))
    assert all(a[k] == pytest.approx(b[k[::-1]], abs=1e-15) for k in a)
    with pytest.raises(CircuitError):
        postopt_reference(p, "YY")


@given(std_circuits(n_max=2))
def test_optimize_keeps_distribution(c):
    for basis in ("Z" * c.n_qubits, "X" * c.n_qubits, "Y" * c.n_qubits):
        full = with_basis(c, basis)
        post = optimize(transpile(full), basis)
        assert total_variation(exact_distribution(full), exact_distribution(post)) < 1e-9


def test_quantize_half_even():
    nc = NativeCircuit(2, [NativeGate.r(0, 0.0005, 0.0015), NativeGate.ms(0, 1, 1.2345, 2.0004, 0.0025)],
                       frame=(0.1235, 0.0))
    q = quantize_params(nc)
    assert (q.gates[0].phi, q.gates[0].theta) == (0.0, 0.002)
    assert (q.gates[1].phi, q.gates[1].phi2, q.gates[1].theta) == (1.234, 2.0, 0.002)
    assert q.frame == (0.124, 0.0)


def test_equivalence_check_detects_difference():
    a = NativeCircuit(1, [NativeGate.r(0, 0.0, math.pi / 2)])
    b = NativeCircuit(1, [])
    rep = equivalence_check(a, b)
    assert not rep.passed and rep.worst == pytest.approx(0.5)
    assert equivalence_check(a, a).worst == 0.0
    c = Circuit(1, [Gate("H", (0,)), Gate("S", (0,))])
    rep = equivalence_check(c, Circuit(1, [Gate("H", (0,))]), bases=["Z", "X"])
    assert rep.distances["Z"] == pytest.approx(0.0) and rep.distances["X"] == pytest.approx(0.5)


def test_with_basis_validates():
    with pytest.raises(CircuitError):
        with_basis(Circuit(2, []), "Z")
    with pytest.raises(CircuitError):
        with_basis(Circuit(1, []), "W")


def test_report_text():
    _, _, rep = compile_circuit(ansatz(1.0), "ZZ")
    text = rep.to_text()
    assert "basis ZZ" in text and "output 1q=" in text and "2q=0" in text.splitlines()[3]
    assert rep.rules_fired
