"""Density matrix embedding: bath orbitals, embedding Hamiltonians, fragment
energies and the chemical-potential loop.

Closed-shell conventions.  Orbital quantities (``h``, ``g``, mean-field
coefficients, ``d_env``) are spatial and ``d_env`` is the per-spin
environment density ``sum_{r in env} C_pr C_qr``.  The environment potential

    V_pq = sum_rs [2 (pq|rs) - (ps|rq)] d_env_rs

is the spin-orbital expression ``sum [(pq|rs) - (ps|rq)] D_rs`` summed over
spins.  Correlated RDMs passed to the energy routines are spin-orbital
:class:`RdmPair`-style arrays with mode ``2p + sigma`` (alpha = 0, beta = 1),
matching :mod:`iondmet.fermion`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .pauli import PauliSum


class DmetError(RuntimeError):
    pass


class DmetConvergenceError(DmetError):
    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


# ---------------------------------------------------------------- data types

@dataclass
class IntegralSet:
    h: np.ndarray
    g: np.ndarray
    e_nuc: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.h.shape[0]
        if self.h.shape != (n, n) or self.g.shape != (n,) * 4:
            raise DmetError("integral shapes inconsistent")
        if not np.allclose(self.h, self.h.T, atol=1e-12):
            raise DmetError("one-electron integrals not symmetric")
        g = self.g
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=1e-12):
                raise DmetError("two-electron integrals lack 8-fold symmetry")

    @property
    def n_orbitals(self) -> int:
        return self.h.shape[0]

    def to_text(self) -> str:
        n = self.n_orbitals
        lines = [f"L {n}", f"e_nuc {self.e_nuc:.17g}"]
        for p in range(n):
            for q in range(p, n):
                if self.h[p, q]:
                    lines.append(f"h {p} {q} {self.h[p, q]:.17g}")
        for p, q, r, s in _unique_quadruples(n):
            v = self.g[p, q, r, s]
            if v:
                lines.append(f"g {p} {q} {r} {s} {v:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IntegralSet":
        n = None
        e_nuc = 0.0
        hs, gs = [], []
        for raw in text.splitlines():
            tok = raw.split("#", 1)[0].split()
            if not tok:
                continue
            if tok[0] == "L":
                n = int(tok[1])
            elif tok[0] == "e_nuc":
                e_nuc = float(tok[1])
            elif tok[0] == "h":
                hs.append((int(tok[1]), int(tok[2]), float(tok[3])))
            elif tok[0] == "g":
                gs.append((*map(int, tok[1:5]), float(tok[5])))
            else:
                raise DmetError(f"unknown integral record {tok[0]!r}")
        if n is None:
            raise DmetError("integral file lacks an 'L' record")
        h = np.zeros((n, n))
        for p, q, v in hs:
            h[p, q] = h[q, p] = v
        g = np.zeros((n,) * 4)
        for p, q, r, s, v in gs:
            for a, b, c, d in _equivalent(p, q, r, s):
                g[a, b, c, d] = v
        return cls(h, g, e_nuc)


def _equivalent(p, q, r, s):
    return {(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
            (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)}


def _unique_quadruples(n):
    for p in range(n):
        for q in range(p, n):
            for r in range(n):
                for s in range(r, n):
                    if (p, q) <= (r, s):
                        yield p, q, r, s


@dataclass
class MeanFieldReference:
    mo_coeff: np.ndarray
    n_occ: int

    def __post_init__(self):
        self.mo_coeff = np.asarray(self.mo_coeff, dtype=float)
        c = self.mo_coeff
        if not np.allclose(c.T @ c, np.eye(c.shape[1]), atol=1e-10):
            raise DmetError("mean-field orbitals are not orthonormal")

    def density(self) -> np.ndarray:
        """Per-spin 1-RDM of the occupied orbitals."""
        return env_density_matrix(self, range(self.n_occ))


@dataclass
class FragmentProblem:
    hamiltonian: PauliSum
    energy_expression: PauliSum
    number_operator: PauliSum
    r: float | None = None
    comment: str = ""

    def __post_init__(self):
        n = {self.hamiltonian.n_qubits, self.energy_expression.n_qubits, self.number_operator.n_qubits}
        if len(n) != 1:
            raise DmetError("fragment operators act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    def to_text(self) -> str:
        head = [f"R {self.r}" if self.r is not None else "R none", f"n_qubits {self.n_qubits}"]
        if self.comment:
            head.append(self.comment)
        parts = ["\n".join("# " + h for h in head)]
        for name in ("hamiltonian", "energy_expression", "number_operator"):
            parts.append(f"[{name}]\n" + getattr(self, name).to_text())
        return "\n".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "FragmentProblem":
        r = None
        comment = []
        sections: dict[str, list[str]] = {}
        current = None
        for line in text.splitlines():
            s = line.strip()
            if current is None and s.startswith("#"):
                body = s[1:].strip()
                if body.startswith("R "):
                    v = body.split()[1]
                    r = None if v == "none" else float(v)
                elif not body.startswith("n_qubits"):
                    comment.append(body)
            elif s.startswith("[") and s.endswith("]"):
                current = s[1:-1]
                sections[current] = []
            elif current is not None:
                sections[current].append(line)
        try:
            ops = {k: PauliSum.from_text("\n".join(sections[k]))
                   for k in ("hamiltonian", "energy_expression", "number_operator")}
        except KeyError as exc:
            raise DmetError(f"fragment file lacks section {exc}") from None
        return cls(**ops, r=r, comment="\n".join(comment))


@dataclass
class DmetConfig:
    n_total: float
    a: float = 1.0
    tol: float = 1e-5
    max_iter: int = 100
    n_fragments: int = 1
    secant: bool = True

    def __post_init__(self):
        if self.a <= 0:
            raise DmetError("step a must be positive")
        if self.tol <= 0 or self.max_iter < 1 or self.n_fragments < 1:
            raise DmetError("invalid loop controls")


# ---------------------------------------------------------------- orbitals

def env_density_matrix(mf: MeanFieldReference, env_orbitals) -> np.ndarray:
    cols = list(env_orbitals)
    c = mf.mo_coeff[:, cols]
    return c @ c.T


@dataclass
class BathOrbitals:
    """Columns of ``rotation`` are ordered fragment, bath, core (occupied), virtual."""

    rotation: np.ndarray
    n_frag: int
    n_bath: int
    n_core: int
    n_virt: int
    singular_values: np.ndarray

    @property
    def embedding(self) -> np.ndarray:
        return self.rotation[:, :self.n_frag + self.n_bath]

    @property
    def core(self) -> np.ndarray:
        k = self.n_frag + self.n_bath
        return self.rotation[:, k:k + self.n_core]


def build_bath(mf_1rdm: np.ndarray, fragment_indices: Sequence[int],
               threshold: float = 1e-13, degeneracy_tol: float = 1e-10) -> BathOrbitals:
    """Bath from the SVD of the environment-by-fragment block of a per-spin 1-RDM."""
    d = np.asarray(mf_1rdm, dtype=float)
    n = d.shape[0]
    if not np.allclose(d, d.T, atol=1e-10):
        raise DmetError("1-RDM not symmetric")
    if not np.allclose(d @ d, d, atol=1e-8):
        warnings.warn("mean-field 1-RDM is not idempotent; proceeding", stacklevel=2)
    frag = list(fragment_indices)
    env = [i for i in range(n) if i not in set(frag)]
    rot = np.zeros((n, n))
    rot[frag, range(len(frag))] = 1.0
    if not env:
        return BathOrbitals(rot, len(frag), 0, 0, 0, np.zeros(0))
    u, s, _ = np.linalg.svd(d[np.ix_(env, frag)], full_matrices=True)
    keep = s > threshold
    # a degenerate cluster straddling the threshold is kept whole
    for i in np.flatnonzero(keep):
        keep |= np.isclose(s, s[i], atol=degeneracy_tol, rtol=0)
    nb = int(keep.sum())
    bath = u[:, :len(s)][:, keep]
    rest = np.concatenate([u[:, len(s):], u[:, :len(s)][:, ~keep]], axis=1)
    d_rest = rest.T @ d[np.ix_(env, env)] @ rest
    w, v = np.linalg.eigh(d_rest)
    order = np.argsort(-w)
    w, v = w[order], v[:, order]
    rest = rest @ v
    n_core = int((w > 0.5).sum())
    rot[np.ix_(env, range(len(frag), len(frag) + nb))] = bath
    rot[np.ix_(env, range(len(frag) + nb, n))] = rest
    return BathOrbitals(rot, len(frag), nb, n_core, n - len(frag) - nb - n_core, s)


# ---------------------------------------------------------------- embedding Hamiltonian

def env_potential(g: np.ndarray, d_env: np.ndarray) -> np.ndarray:
    return 2 * np.einsum("pqrs,rs->pq", g, d_env) - np.einsum("psrq,rs->pq", g, d_env)


def transform_two_body(g: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("pqrs,pi,qj,rk,sl->ijkl", g, c, c, c, c, optimize=True)


@dataclass
class EmbeddingHamiltonian:
    """Spatial one-/two-body integrals over fragment+bath orbitals.

    ``h1`` contains the bare one-electron part plus the environment
    potential and the ``-dmu`` shift on fragment diagonals.  The operator is
    ``sum h1_pq E_pq + 1/2 sum g2_pqrs a+_p a+_r a_s a_q`` (spin summed).
    """

    h1: np.ndarray
    g2: np.ndarray
    n_frag: int
    n_elec: int
    dmu: float = 0.0
    h_bare: np.ndarray | None = None
    v_env: np.ndarray | None = None
    g_full: np.ndarray | None = None

    @property
    def n_orbitals(self) -> int:
        return self.h1.shape[0]


def build_embedding_hamiltonian(ints: IntegralSet, d_env: np.ndarray, orbitals: np.ndarray,
                                n_frag: int, dmu: float = 0.0, n_elec: int | None = None,
                                interacting_bath: bool = False) -> EmbeddingHamiltonian:
    """``orbitals`` holds fragment then bath columns in the original basis.

    The two-body part acts on fragment orbitals only unless
    ``interacting_bath`` is set.
    """
    c = np.asarray(orbitals, dtype=float)
    if c.shape[0] != ints.n_orbitals or d_env.shape != (ints.n_orbitals,) * 2:
        raise DmetError("dimension mismatch between integrals, d_env and orbitals")
    n_emb = c.shape[1]
    h_bare = c.T @ ints.h @ c
    v_env = c.T @ env_potential(ints.g, d_env) @ c
    g_emb = transform_two_body(ints.g, c)
    g2 = g_emb.copy()
    if not interacting_bath:
        mask = np.zeros((n_emb,) * 4, dtype=bool)
        mask[:n_frag, :n_frag, :n_frag, :n_frag] = True
        g2[~mask] = 0.0
    h1 = h_bare + v_env
    h1[range(n_frag), range(n_frag)] -= dmu
    if n_elec is None:
        n_elec = 2 * n_frag
    return EmbeddingHamiltonian(h1, g2, n_frag, n_elec, dmu, h_bare, v_env, g_emb)


# ---------------------------------------------------------------- exact solver

@lru_cache(maxsize=8)
def _sparse_annihilators(n_modes: int):
    dim = 2 ** n_modes
    idx = np.arange(dim)
    ops = []
    for k in range(n_modes):
        occ = (idx >> k) & 1 == 1
        src = idx[occ]
        sign = 1 - 2 * (np.bitwise_count(src & ((1 << k) - 1)) & 1).astype(np.int64)
        ops.append(sp.csr_matrix((sign.astype(float), (src ^ (1 << k), src)), shape=(dim, dim)))
    return tuple(ops)


def fock_hamiltonian(h1: np.ndarray, g2: np.ndarray, const: float = 0.0) -> sp.csr_matrix:
    """Spin-orbital Fock-space matrix, mode ``2p + sigma``."""
    n = h1.shape[0]
    m = 2 * n
    a = _sparse_annihilators(m)
    ad = [x.T.tocsr() for x in a]
    dim = 2 ** m
    ham = sp.identity(dim, format="csr") * const
    for p in range(n):
        for q in range(n):
            if h1[p, q]:
                for s in (0, 1):
                    ham = ham + h1[p, q] * (ad[2 * p + s] @ a[2 * q + s])
    nz = np.argwhere(np.abs(g2) > 0)
    for p, q, r, s in nz:
        v = 0.5 * g2[p, q, r, s]
        for s1 in (0, 1):
            for s2 in (0, 1):
                P, R = 2 * p + s1, 2 * r + s2
                S, Q = 2 * s + s2, 2 * q + s1
                if P == R or S == Q:
                    continue
                ham = ham + v * (ad[P] @ ad[R] @ a[S] @ a[Q])
    return ham.tocsr()


@dataclass
class FciSolution:
    energy: float
    vector: np.ndarray          # full Fock-space amplitudes
    n_modes: int

    def rdms(self) -> tuple[np.ndarray, np.ndarray]:
        """Spin-orbital ``D[q,p] = <a+_p a_q>`` and ``P[q,p,s,r] = <a+_p a+_r a_s a_q>``."""
        m = self.n_modes
        a = _sparse_annihilators(m)
        v = self.vector
        av = [x @ v for x in a]
        d = np.array([[np.vdot(av[p], av[q]) for p in range(m)] for q in range(m)])
        pair = [[a[x] @ av[y] for y in range(m)] for x in range(m)]
        flat = np.array([pair[x][y] for x in range(m) for y in range(m)])
        # M[(r,p),(s,q)] = <(a_r a_p) v | (a_s a_q) v>
        gram = flat.conj() @ flat.T
        g4 = gram.reshape(m, m, m, m)            # [r, p, s, q]
        p4 = g4.transpose(3, 1, 2, 0)            # [q, p, s, r]
        return d, p4


def solve_fci(h1: np.ndarray, g2: np.ndarray, n_elec: int, const: float = 0.0,
              sz: int | None = 0) -> FciSolution:
    """Lowest state of the embedded Hamiltonian in the ``n_elec`` sector."""
    n = h1.shape[0]
    m = 2 * n
    ham = fock_hamiltonian(h1, g2, const)
    idx = np.arange(2 ** m)
    n_tot = np.bitwise_count(idx).astype(int)
    sel = n_tot == n_elec
    if sz is not None:
        # alpha modes are the even ones (bits 0, 2, ...)
        alpha = np.bitwise_count(idx & int("01" * n, 2)).astype(int)
        sel &= (2 * alpha - n_tot) == 2 * sz
    basis = idx[sel]
    if basis.size == 0:
        raise DmetError("empty particle-number sector")
    sub = ham[basis][:, basis].toarray()
    w, v = np.linalg.eigh(sub)
    vec = np.zeros(2 ** m)
    vec[basis] = v[:, 0]
    return FciSolution(float(w[0]), vec, m)


# ---------------------------------------------------------------- energies

def _spin_sum(d_so: np.ndarray, p_so: np.ndarray, n: int):
    d = np.zeros((n, n), dtype=complex)
    p = np.zeros((n,) * 4, dtype=complex)
    for s in (0, 1):
        d += d_so[s::2, s::2]
        for t in (0, 1):
            # P[q,p,s,r] with (p,q) spin s and (r,s) spin t
            p += p_so[s::2, s::2, t::2, t::2]
    return d, p


def fragment_energy_from_rdms(ints_or_emb, d_env, rdms, fragment_indices,
                              orbitals: np.ndarray | None = None) -> float:
    """Fragment energy: rows ``p`` in the fragment only.

    ``ints_or_emb`` is either an :class:`EmbeddingHamiltonian` (its bare
    one-body part, environment potential and full two-body integrals are
    used) or an :class:`IntegralSet` with ``orbitals`` spanning the
    embedding space.  ``rdms`` is ``(D, P)`` over spin-orbitals or an object
    with ``one_rdm``/``two_rdm``.
    """
    if hasattr(rdms, "one_rdm"):
        d_so, p_so = rdms.one_rdm, rdms.two_rdm
    else:
        d_so, p_so = rdms
    if isinstance(ints_or_emb, EmbeddingHamiltonian):
        h, v, g = ints_or_emb.h_bare, ints_or_emb.v_env, ints_or_emb.g_full
    else:
        c = np.eye(ints_or_emb.n_orbitals) if orbitals is None else np.asarray(orbitals)
        h = c.T @ ints_or_emb.h @ c
        v = c.T @ env_potential(ints_or_emb.g, d_env) @ c
        g = transform_two_body(ints_or_emb.g, c)
    n = h.shape[0]
    if np.asarray(d_so).shape != (2 * n, 2 * n):
        raise DmetError("RDM dimension does not match the embedding space")
    d, p = _spin_sum(np.asarray(d_so), np.asarray(p_so), n)
    e = 0.0
    for a in fragment_indices:
        e += np.sum((h[a, :] + 0.5 * v[a, :]) * d[:, a])
        e += 0.5 * np.einsum("qrs,qsr->", g[a], p[:, a, :, :])
    return float(np.real(e))


def fragment_energy_from_expression(fp: FragmentProblem, expectations: Mapping[str, float]) -> float:
    """Evaluate the per-atom energy expression on Pauli expectation values."""
    aliases = {"X0": "XI", "X1": "IX", "Z0": "ZI", "Z1": "IZ", "Y0": "YI", "Y1": "IY"}
    ex = {aliases.get(k, k): float(v) for k, v in expectations.items()}
    e = fp.energy_expression.constant
    for p, c in fp.energy_expression.items():
        if p.letters not in ex:
            raise DmetError(f"missing expectation for {p.letters}")
        e += c * ex[p.letters]
    return float(e)


def dmet_total_energy(fragment_energies: Sequence[float], e_nuc: float = 0.0) -> float:
    return float(math.fsum(fragment_energies) + e_nuc)


# ---------------------------------------------------------------- chemical potential

@dataclass
class LoopResult:
    dmu: float
    fragment_energies: list[float]
    trace: list[tuple[float, float]]      # (dmu, N_fragment) per evaluation
    iterations: int
    secant_used: bool = False
    payload: object = None


def chemical_potential_loop(solver: Callable[[float], tuple[float, Sequence[float], object]],
                            cfg: DmetConfig, dmu0: float = 0.0) -> LoopResult:
    """Adjust ``dmu`` until the fragment electron count matches ``cfg.n_total``.

    ``solver(dmu)`` returns ``(N_A, [E_A ...], payload)`` for one fragment;
    equivalent fragments are replicated ``cfg.n_fragments`` times.  Fixed-point step
    ``dmu <- dmu - a (N_fragment - N_total)``; once the residual changes sign
    without shrinking (oscillation) a secant step takes over.
    """
    trace = []
    dmu = dmu0
    secant_used = False
    prev = None
    for it in range(cfg.max_iter + 1):
        n_a, energies, payload = solver(dmu)
        n_frag = cfg.n_fragments * n_a
        trace.append((dmu, n_frag))
        resid = n_frag - cfg.n_total
        if abs(resid) < cfg.tol:
            return LoopResult(dmu, list(energies) * cfg.n_fragments, trace, it, secant_used, payload)
        if it == cfg.max_iter:
            break
        step = -cfg.a * resid
        if prev is not None:
            pdmu, presid = prev
            oscillating = presid * resid < 0 and abs(resid) >= 0.5 * abs(presid)
            if cfg.secant and (secant_used or oscillating) and resid != presid:
                secant_used = True
                step = -resid * (dmu - pdmu) / (resid - presid)
        prev = (dmu, resid)
        dmu = dmu + step
    raise DmetConvergenceError(
        f"chemical potential loop did not converge in {cfg.max_iter} iterations "
        f"(residual {trace[-1][1] - cfg.n_total:.3e})", trace)


# ---------------------------------------------------------------- toy system

def hubbard_ring(n_sites: int, t: float = 1.0, t2: float = 0.0, u: float = 4.0) -> IntegralSet:
    """Ring with nearest (``t``) and next-nearest (``t2``) hopping, on-site ``u``."""
    h = np.zeros((n_sites, n_sites))
    for i in range(n_sites):
        for k, amp in ((1, t), (2, t2)):
            j = (i + k) % n_sites
            if j != i and amp:
                h[i, j] -= amp
                h[j, i] -= amp
    g = np.zeros((n_sites,) * 4)
    for i in range(n_sites):
        g[i, i, i, i] = u
    return IntegralSet(h, g, 0.0)


def core_mean_field(ints: IntegralSet, n_elec: int) -> MeanFieldReference:
    """Occupy the lowest eigenvectors of the one-electron Hamiltonian."""
    if n_elec % 2:
        raise DmetError("closed-shell reference needs an even electron count")
    _, c = np.linalg.eigh(ints.h)
    return MeanFieldReference(c, n_elec // 2)


@dataclass
class ToyDmet:
    """Single-fragment DMET driver for translationally equivalent fragments."""

    ints: IntegralSet
    n_elec: int
    fragment: Sequence[int]
    interacting_bath: bool = False
    mf: MeanFieldReference = field(init=False)
    bath: BathOrbitals = field(init=False)
    d_env: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mf = core_mean_field(self.ints, self.n_elec)
        self.bath = build_bath(self.mf.density(), self.fragment)
        k = self.bath.n_frag + self.bath.n_bath
        self.d_env = env_density_matrix(MeanFieldReference(self.bath.rotation, 0),
                                        range(k, k + self.bath.n_core))

    @property
    def n_emb_elec(self) -> int:
        return self.n_elec - 2 * self.bath.n_core

    def embedded(self, dmu: float) -> EmbeddingHamiltonian:
        return build_embedding_hamiltonian(self.ints, self.d_env, self.bath.embedding,
                                           self.bath.n_frag, dmu, self.n_emb_elec,
                                           self.interacting_bath)

    def solve(self, dmu: float):
        emb = self.embedded(dmu)
        sol = solve_fci(emb.h1, emb.g2, emb.n_elec)
        d, p = sol.rdms()
        frag = range(self.bath.n_frag)
        n_a = float(sum(d[2 * a + s, 2 * a + s].real for a in frag for s in (0, 1)))
        e_a = fragment_energy_from_rdms(emb, self.d_env, (d, p), frag)
        return n_a, [e_a], sol

    def run(self, cfg: DmetConfig, dmu0: float = 0.0) -> LoopResult:
        return chemical_potential_loop(self.solve, cfg, dmu0)
