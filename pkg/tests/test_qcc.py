import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from iondmet.data import reference
from iondmet.pauli import PauliString, PauliSum, commutator_expectation, expectation
from iondmet.pipeline import reference_spec
from iondmet.qcc import (
    AnsatzSpec, MeanFieldParams, ansatz_state, build_ansatz_circuit, energy, mean_field_energy,
    mean_field_state, odd_y_strings, optimize_mean_field, screen_generators, vqe_minimize,
)
from iondmet.statevector import run

from conftest import R_ALL, dense_pauli

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def dense_product(theta, phi):
    v = np.ones(1, dtype=complex)
    for t, p in zip(theta, phi):
        v = np.kron(v, [math.cos(t / 2), complex(math.cos(p), math.sin(p)) * math.sin(t / 2)])
    return v


def random_h(rng, n):
    terms = {"".join(t): c for t, c in zip(itertools.product("IXYZ", repeat=n), rng.normal(size=4 ** n))}
    return PauliSum(terms, n_qubits=n)


def test_mean_field_state_trivial():
    assert np.allclose(mean_field_state(MeanFieldParams((0, 0), (0, 0))).amplitudes, [1, 0, 0, 0])
    psi = mean_field_state(MeanFieldParams((math.pi,) * 2, (0.3, -1.0)))
    assert abs(psi.amplitudes[3]) == pytest.approx(1.0)
    assert expectation(PauliSum({"ZI": 1.0}), psi) == pytest.approx(-1.0)


@given(st.lists(st.tuples(angles, angles), min_size=1, max_size=4), st.integers(0, 2**32 - 1))
def test_mean_field_state_and_energy_vs_dense(tp, seed):
    theta, phi = zip(*tp)
    mf = MeanFieldParams(theta, phi)
    assert np.allclose(mean_field_state(mf).amplitudes, dense_product(theta, phi), atol=1e-12)
    h = random_h(np.random.default_rng(seed), len(theta))
    assert mean_field_energy(h, mf) == pytest.approx(expectation(h, mean_field_state(mf)), abs=1e-10)


def test_optimize_mean_field_trivial():
    res = optimize_mean_field(PauliSum({"ZI": 1.0, "IZ": 1.0}), seed=1)
    assert res.energy == pytest.approx(-2.0, abs=1e-9)
    assert np.allclose(np.cos(res.params.theta), -1, atol=1e-4)
    const = optimize_mean_field(PauliSum({}, 0.37, n_qubits=2), starts=2)
    assert const.energy == pytest.approx(0.37)


def test_optimize_mean_field_vs_grid_oracle():
    h = reference()[1.1].hamiltonian()
    res = optimize_mean_field(h, seed=4)
    # real product states suffice here (no Y terms); a dense theta grid bounds the optimum
    g = np.linspace(0, 2 * math.pi, 721)
    t0, t1 = np.meshgrid(g, g, indexing="ij")
    best = min(mean_field_energy(h, MeanFieldParams((a, b), (0, 0)))
               for a, b in zip(t0.ravel()[::7], t1.ravel()[::7]))
    assert res.energy <= best + 1e-9
    assert res.energy == pytest.approx(best, abs=2e-3)
    # refine around the grid minimum with a fine local grid
    a0 = res.params.theta
    fine = min(mean_field_energy(h, MeanFieldParams((a0[0] + d0, a0[1] + d1), res.params.phi))
               for d0 in np.linspace(-1e-3, 1e-3, 21) for d1 in np.linspace(-1e-3, 1e-3, 21))
    assert res.energy <= fine + 1e-12


@pytest.mark.parametrize("r", R_ALL)
def test_screening_top_group(r):
    p = reference()[r]
    rep = screen_generators(p.hamiltonian(), MeanFieldParams(p.theta, p.phi))
    top = rep.top_group()
    assert {g.letters for g in top} == {"XY", "YX"}
    assert rep.candidates[0][0].letters == "XY"
    assert rep.candidates[0][1] == pytest.approx(p.coefficients[1], abs=1e-8)


def test_screening_diagonal_h_gives_zero():
    h = PauliSum({"ZZ": 1.0, "ZI": -0.3})
    mf = optimize_mean_field(h, seed=2).params
    rep = screen_generators(h, mf)
    assert all(g == pytest.approx(0, abs=1e-7) for _, g in rep.candidates)
    # exactly zero on the basis state the optimizer approaches
    rep = screen_generators(h, MeanFieldParams((math.pi, 0.0), (0.2, 0.9)))
    assert all(g == pytest.approx(0, abs=1e-15) for _, g in rep.candidates)


@given(st.integers(0, 2**32 - 1))
def test_screening_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    h = random_h(rng, 3)
    mf = MeanFieldParams(rng.uniform(0, math.pi, 3), rng.uniform(0, 2 * math.pi, 3))
    psi = dense_product(mf.theta, mf.phi)
    hm = h.to_matrix()
    brute = []
    for letters in itertools.product("IXYZ", repeat=3):
        s = "".join(letters)
        if s.count("Y") % 2:
            pm = dense_pauli(s)
            brute.append((abs((0.5j * np.vdot(psi, (pm @ hm - hm @ pm) @ psi)).real), s))
    rep = screen_generators(h, mf)
    got = [g for _, g in rep.candidates]
    assert np.allclose(got, sorted((b for b, _ in brute), reverse=True), atol=1e-12)
    assert len(rep.candidates) == len(brute) == len(list(odd_y_strings(3)))


@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    h = random_h(rng, 2)
    mf = MeanFieldParams(rng.uniform(0, math.pi, 2), rng.uniform(0, 2 * math.pi, 2))
    p = PauliString("XY")
    f = lambda t: energy(h, AnsatzSpec(mf, (p,), (t,)))
    fd = (f(1e-6) - f(-1e-6)) / 2e-6
    assert commutator_expectation(h, p, mean_field_state(mf)) == pytest.approx(fd, abs=1e-6)


def test_zero_amplitude_equals_mean_field():
    p = reference()[1.0]
    mf = MeanFieldParams(p.theta, p.phi)
    spec = AnsatzSpec(mf, ("XY",), (0.0,))
    assert energy(p.hamiltonian(), spec) == pytest.approx(mean_field_energy(p.hamiltonian(), mf), abs=1e-14)


def test_phi_shift_invariance(rng):
    h = random_h(rng, 2)
    spec = AnsatzSpec(MeanFieldParams((0.3, 2.0), (0.5, -1.2)), ("XY",), (0.4,))
    shifted = AnsatzSpec(MeanFieldParams((0.3, 2.0), (0.5 + 2 * math.pi, -1.2)), ("XY",), (0.4,))
    assert energy(h, spec) == pytest.approx(energy(h, shifted), abs=1e-12)


def _same_up_to_phase(a, b, tol):
    k = np.argmax(np.abs(b))
    ph = a[k] / b[k]
    return abs(abs(ph) - 1) < tol and np.allclose(a, ph * b, atol=tol)


def test_circuit_without_generators_is_mean_field():
    mf = MeanFieldParams((0.7, 2.1), (1.1, -0.4))
    out = run(build_ansatz_circuit(AnsatzSpec(mf))).amplitudes
    assert _same_up_to_phase(out, mean_field_state(mf).amplitudes, 1e-12)


@given(st.tuples(angles, angles, angles, angles, angles), st.sampled_from(["XY", "YX", "XZ", "YZ", "ZY", "XX"]))
def test_circuit_matches_matrix_exponential(a, gen):
    t0, t1, p0, p1, tau = a
    mf = MeanFieldParams((t0, t1), (p0, p1))
    want = expm(-0.5j * tau * dense_pauli(gen)) @ dense_product(mf.theta, mf.phi)
    out = run(build_ansatz_circuit(AnsatzSpec(mf, (gen,), (tau,)))).amplitudes
    assert _same_up_to_phase(out, want, 1e-10)
    assert _same_up_to_phase(ansatz_state(AnsatzSpec(mf, (gen,), (tau,))).amplitudes, want, 1e-12)


def test_circuit_energy_r10():
    spec = reference_spec(1.0)
    psi = run(build_ansatz_circuit(spec))
    assert expectation(reference()[1.0].hamiltonian(), psi) == pytest.approx(-1.68623718, abs=1e-6)


@pytest.mark.parametrize("r,want", [(0.7, -2.09372986), (1.3, -1.44376730)])
def test_vqe_examples(r, want):
    p = reference()[r]
    h = p.hamiltonian()
    mf = optimize_mean_field(h, seed=0).params
    res = vqe_minimize(h, AnsatzSpec(mf, ("XY",), (0.0,)), ftol=1e-15, gtol=1e-10)
    assert res.energy == pytest.approx(want, abs=1e-6)
    assert res.energy >= np.linalg.eigvalsh(h.to_matrix())[0] - 1e-9
    assert res.energy == pytest.approx(np.linalg.eigvalsh(h.to_matrix())[0], abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_variational_bound(seed):
    rng = np.random.default_rng(seed)
    h = random_h(rng, 2)
    spec0 = AnsatzSpec(MeanFieldParams(rng.uniform(0, 3, 2), rng.uniform(0, 6, 2)), ("XY",), (0.1,))
    res = vqe_minimize(h, spec0, maxiter=50)
    assert res.energy >= np.linalg.eigvalsh(h.to_matrix())[0] - 1e-9


def test_optimizer_iteration_cap_is_flagged():
    h = reference()[1.1].hamiltonian()
    spec0 = AnsatzSpec(MeanFieldParams((1.0, 2.0), (0.3, 0.1)), ("XY",), (0.5,))
    res = vqe_minimize(h, spec0, maxiter=1)
    assert not res.converged
    params, e = res
    assert e == res.energy and params is res.params


def test_spec_text_roundtrip():
    spec = AnsatzSpec(MeanFieldParams((math.pi, 0.123456789012), (0.5, 2.0)), ("XY",), (0.0743662,))
    text = spec.to_text()
    back = AnsatzSpec.from_text(text)
    assert back.to_text() == text
    assert np.allclose(back.vector(), spec.vector(), rtol=1e-8)
    with pytest.raises(ValueError):
        AnsatzSpec(MeanFieldParams((0, 0), (0, 0)), ("XY",), ())
