import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iondmet.data import reference
from iondmet.dmet import fragment_energy_from_expression
from iondmet.fermion import (
    DEFAULT_MO, EXPECTATION_LABELS, EncodingError, MoCoefficients, RdmPair, build_rdms, decode_state,
    electron_count, entropy_fragment_bath, entropy_mo, fragment_number_operator, pauli_to_rdms,
    rdms_to_pauli, rotate_one_rdm, state_expectations, trace_down,
)
from iondmet.pauli import expectation
from iondmet.pipeline import fragment_problem, reference_spec
from iondmet.qcc import AnsatzSpec, MeanFieldParams, ansatz_state
from iondmet.statevector import StateVector

from conftest import R_ALL, random_state

seeds = st.integers(0, 2**32 - 1)


def ladder():
    """Jordan-Wigner annihilators over 4 modes; mode k is bit k of the index."""
    out = []
    for k in range(4):
        a = np.zeros((16, 16))
        for idx in range(16):
            if idx >> k & 1:
                sign = (-1) ** bin(idx & ((1 << k) - 1)).count("1")
                a[idx ^ (1 << k), idx] = sign
        out.append(a)
    return out


A = ladder()
C = [a.T for a in A]
VAC = np.eye(16)[0]


def encode(psi2):
    """|q0 q1> -> a+_{2 q0} a+_{1 + 2 q1} |vac>."""
    v = np.zeros(16, dtype=complex)
    for q0 in (0, 1):
        for q1 in (0, 1):
            v += psi2[2 * q0 + q1] * (C[2 * q0] @ C[1 + 2 * q1] @ VAC)
    return v


def oracle_rdms(v):
    d = np.array([[np.vdot(v, C[p] @ A[q] @ v) for p in range(4)] for q in range(4)])
    p2 = np.zeros((4,) * 4, dtype=complex)
    for q in range(4):
        for p in range(4):
            for s in range(4):
                for r in range(4):
                    p2[q, p, s, r] = np.vdot(v, C[p] @ C[r] @ A[s] @ A[q] @ v)
    return d, p2


def exact_state(r):
    return ansatz_state(reference_spec(r))


def test_decode_basis_states():
    for bits in ("00", "01", "10", "11"):
        f = decode_state(StateVector.basis(bits))
        assert np.allclose(f.amplitudes, encode(StateVector.basis(bits).amplitudes))
        n = sum(np.vdot(f.amplitudes, C[k] @ A[k] @ f.amplitudes).real for k in range(4))
        assert n == pytest.approx(2.0)


@given(seeds)
def test_rdms_vs_ladder_oracle(seed):
    psi = random_state(np.random.default_rng(seed), 2)
    rd = build_rdms(decode_state(psi))
    d, p = oracle_rdms(encode(psi))
    assert np.allclose(rd.one_rdm, d, atol=1e-12)
    assert np.allclose(rd.two_rdm, p, atol=1e-12)
    assert np.trace(rd.one_rdm).real == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(rd.one_rdm, rd.one_rdm.conj().T, atol=1e-14)
    # <a+_p a+_r a_s a_q>: antisymmetric under p<->r and under q<->s
    assert np.allclose(rd.two_rdm, -rd.two_rdm.transpose(0, 3, 2, 1), atol=1e-14)
    assert np.allclose(rd.two_rdm, -rd.two_rdm.transpose(2, 1, 0, 3), atol=1e-14)
    assert np.allclose(trace_down(rd.two_rdm), rd.one_rdm, atol=1e-12)


def test_single_determinant_idempotent():
    d = build_rdms(decode_state(StateVector.basis("01"))).one_rdm
    assert np.allclose(d @ d, d, atol=1e-12)


@given(seeds)
def test_pauli_map_matches_state_rdms_for_real_states(seed):
    psi = random_state(np.random.default_rng(seed), 2).real
    psi /= np.linalg.norm(psi)
    ex = state_expectations(psi)
    got = pauli_to_rdms(ex)
    want = build_rdms(decode_state(psi))
    assert np.allclose(got.one_rdm, want.one_rdm, atol=1e-12)
    assert np.allclose(got.two_rdm, want.two_rdm, atol=1e-12)
    back = rdms_to_pauli(got)
    assert all(back[k] == pytest.approx(ex[k], abs=1e-12) for k in EXPECTATION_LABELS)


def test_pauli_map_single_configuration():
    ex = dict.fromkeys(EXPECTATION_LABELS, 0.0) | {"ZI": 1.0, "IZ": 1.0, "ZZ": 1.0}
    rd = pauli_to_rdms(ex)
    assert np.allclose(rd.one_rdm, build_rdms(decode_state(StateVector.basis("00"))).one_rdm)
    assert np.allclose(rd.one_rdm @ rd.one_rdm, rd.one_rdm)


def test_pauli_map_errors_and_aliases():
    ex = state_expectations(exact_state(1.1))
    with pytest.raises(EncodingError):
        pauli_to_rdms({k: v for k, v in ex.items() if k != "YY"})
    with pytest.raises(EncodingError):
        pauli_to_rdms(ex | {"XX": 1.5})
    alias = {"X0": ex["XI"], "X1": ex["IX"], "Z0": ex["ZI"], "Z1": ex["IZ"]}
    alias |= {k: ex[k] for k in ("XX", "YY", "ZZ", "XZ", "ZX")}
    assert np.allclose(pauli_to_rdms(alias).two_rdm, pauli_to_rdms(ex).two_rdm)


def test_trace_down_zero():
    assert np.all(trace_down(np.zeros((4,) * 4)) == 0)


@pytest.mark.parametrize("r", R_ALL)
def test_electron_counts(r):
    d = build_rdms(decode_state(exact_state(r))).one_rdm
    assert electron_count(rotate_one_rdm(d), [0, 1]) == pytest.approx(1.0, abs=1e-6)
    assert expectation(fragment_number_operator(), exact_state(r)) == pytest.approx(1.0, abs=1e-6)
    assert electron_count(d, range(4)) == pytest.approx(2.0, abs=1e-12)
    assert electron_count(np.zeros((4, 4)), [0]) == 0


def test_energy_at_r07_via_rdms():
    ex = rdms_to_pauli(build_rdms(decode_state(exact_state(0.7))))
    assert fragment_energy_from_expression(fragment_problem(0.7), ex) == pytest.approx(-0.460015, abs=1e-5)


@given(seeds)
def test_sign_soundness_energy_back_map(seed):
    psi = random_state(np.random.default_rng(seed), 2)
    fp = fragment_problem(1.3)
    via_rdm = fragment_energy_from_expression(fp, rdms_to_pauli(build_rdms(decode_state(psi))))
    assert via_rdm == pytest.approx(expectation(fp.energy_expression, psi), abs=1e-10)


def test_entropy_trivial_and_bounds():
    psi = ansatz_state(AnsatzSpec(MeanFieldParams((math.pi, math.pi), (0, 0)), ("XY",), (0.0,)))
    assert entropy_mo(psi) == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_entropy_bounds(seed):
    psi = random_state(np.random.default_rng(seed), 2)
    for s in (entropy_mo(psi), entropy_fragment_bath(psi)):
        assert -1e-12 <= s <= 2 + 1e-12


def _von_neumann_qubit0(psi):
    m = np.asarray(psi).reshape(2, 2)
    w = np.linalg.eigvalsh(m @ m.conj().T)
    return -sum(x * math.log2(x) for x in w if x > 1e-15)


@given(seeds)
def test_entropy_mo_bounds_entanglement(seed):
    psi = random_state(np.random.default_rng(seed), 2)
    assert entropy_mo(psi) >= _von_neumann_qubit0(psi) - 1e-10


@pytest.mark.parametrize("r", R_ALL)
def test_entropy_mo_equals_entanglement_for_ansatz_states(r):
    # the ansatz state is Schmidt-diagonal in the computational basis
    psi = exact_state(r).amplitudes
    assert entropy_mo(psi) == pytest.approx(_von_neumann_qubit0(psi), abs=1e-9)


@pytest.mark.parametrize("bits", ["00", "01", "10", "11"])
def test_entropy_mo_zero_on_basis_states(bits):
    assert entropy_mo(StateVector.basis(bits)) == 0.0


@pytest.mark.parametrize("r,mo,fb", [(0.7, 0.01510, 1.99602), (1.1, 0.06500, 1.97788), (1.6, 0.23556, 1.89011)])
def test_entropies_match_published(r, mo, fb):
    psi = exact_state(r)
    assert entropy_mo(psi) == pytest.approx(mo, abs=5e-4)
    assert entropy_fragment_bath(psi) == pytest.approx(fb, abs=5e-4)
    assert reference()[r].entropies[:2] == (mo, fb)


def test_fragment_bath_entropy_vs_partial_trace(rng):
    """Fragment RDM from an explicit Fock-space orbital rotation and partial trace."""
    psi = random_state(rng, 2)
    u = DEFAULT_MO.spin_orbital_rotation()
    v = encode(psi)
    # rotated occupations: fragment modes are the rotated orbital 1 (spin-orbitals 0, 1)
    b = [sum(u[m, k] * A[m] for m in range(4)) for k in range(4)]
    frag_probs = []
    for na in (0, 1):
        for nb in (0, 1):
            proj = np.eye(16)
            for mode, occ in ((0, na), (1, nb)):
                n_op = b[mode].T @ b[mode]
                proj = proj @ (n_op if occ else np.eye(16) - n_op)
            frag_probs.append(np.vdot(v, proj @ v).real)
    p = np.array(frag_probs)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    want = -sum(x * math.log2(x) for x in p if x > 1e-15)
    assert entropy_fragment_bath(psi) == pytest.approx(want, abs=1e-10)


def test_mo_coefficients_validation():
    with pytest.raises(EncodingError):
        MoCoefficients(np.array([[1.0, 0.1], [0.0, 1.0]]))
    assert np.allclose(DEFAULT_MO.c.T @ DEFAULT_MO.c, np.eye(2), atol=1e-15)


def test_rdm_text_roundtrip():
    rd = build_rdms(decode_state(exact_state(1.3)))
    back = RdmPair.from_text(rd.to_text())
    assert np.allclose(back.two_rdm, rd.two_rdm, rtol=1e-11, atol=1e-13)
    assert back.to_text() == rd.to_text()
