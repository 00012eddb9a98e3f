"""Reference tables shipped as plain text under ``iondmet/data``.

Every file is listed with its SHA-256 in ``data/SHA256SUMS``; loading verifies
the digest so edited tables are caught early.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Mapping

from .pauli import PauliSum

R_VALUES = (0.7, 1.0, 1.1, 1.3, 1.6)
CHEMICAL_ACCURACY = 1.5936e-3


class DataError(RuntimeError):
    pass


def _read(name: str) -> str:
    return resources.files("iondmet").joinpath("data", name).read_text()


@lru_cache(maxsize=None)
def checksums() -> Mapping[str, str]:
    out = {}
    for line in _read("SHA256SUMS").splitlines():
        if line.strip():
            digest, name = line.split()
            out[name] = digest
    return MappingProxyType(out)


def load_table(name: str, verify: bool = True) -> dict[float, tuple[float, ...]]:
    """Rows keyed by their first column (bond length)."""
    text = _read(name)
    if verify:
        want = checksums().get(name)
        got = hashlib.sha256(text.encode()).hexdigest()
        if want != got:
            raise DataError(f"checksum mismatch for {name}")
    rows = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            vals = [float(v) for v in line.split()]
            rows[vals[0]] = tuple(vals[1:])
    return rows


def pauli_sum_two_qubit(const: float, x: float, z: float, xx: float, zz: float,
                        xz: float, yy: float = 0.0) -> PauliSum:
    """``const + x(XI+IX) + z(ZI+IZ) + xx XX + zz ZZ + xz(XZ+ZX) + yy YY``."""
    return PauliSum({"XI": x, "IX": x, "ZI": z, "IZ": z, "XX": xx, "ZZ": zz,
                     "XZ": xz, "ZX": xz, "YY": yy}, const, n_qubits=2)


@dataclass(frozen=True)
class ReferencePoint:
    r: float
    e_hf: float
    e_fci: float
    e_qcc_exact: float
    e_hw: float
    e_hw_err: float
    e_hw_purified: float
    e_hw_purified_err: float
    coefficients: tuple[float, ...]          # a..f
    listing: tuple[float, ...]               # const, X, Z, XX, ZZ, XZ
    expression: tuple[float, ...]            # X, Z, XX, ZZ, XZ, const
    theta: tuple[float, float]
    phi: tuple[float, float]
    tau: float
    gradient: float
    e_qcc: float
    preopt: tuple[float, ...]
    postopt: tuple[float, ...]
    yy_theta: float
    entropies: tuple[float, ...] | None      # mo, fb, mo_exp, fb_exp

    def hamiltonian(self, source: str = "table") -> PauliSum:
        """Embedding Hamiltonian from the 8-decimal table or the 6-decimal listing."""
        if source == "table":
            a, b, c, d, e, f = self.coefficients
            return pauli_sum_two_qubit(a, d, e, b, c, f)
        if source == "listing":
            const, x, z, xx, zz, xz = self.listing
            return pauli_sum_two_qubit(const, x, z, xx, zz, xz)
        raise ValueError(f"unknown Hamiltonian source {source!r}")

    def energy_expression(self) -> PauliSum:
        x, z, xx, zz, xz, const = self.expression
        return pauli_sum_two_qubit(const, x, z, xx, zz, xz)


@dataclass(frozen=True)
class ReferenceData:
    points: Mapping[float, ReferencePoint]

    def __getitem__(self, r: float) -> ReferencePoint:
        for key, p in self.points.items():
            if math.isclose(key, r, abs_tol=1e-9):
                return p
        raise KeyError(f"no reference data at R={r}")

    def __iter__(self):
        return iter(self.points.values())

    @property
    def r_values(self) -> tuple[float, ...]:
        return tuple(self.points)


@lru_cache(maxsize=1)
def reference() -> ReferenceData:
    energies = load_table("energies.txt")
    coeffs = load_table("hamiltonian_coefficients.txt")
    listing = load_table("hamiltonian_listing.txt")
    expr = load_table("energy_expressions.txt")
    qcc = load_table("qcc_parameters.txt")
    pre = load_table("native_preopt.txt")
    post = load_table("native_postopt.txt")
    yy = load_table("yy_theta.txt")
    ent = load_table("entropies.txt")
    points = {}
    for r in sorted(energies):
        q = qcc[r]
        points[r] = ReferencePoint(
            r, *energies[r], coefficients=coeffs[r], listing=listing[r], expression=expr[r],
            theta=(q[0], q[1]), phi=(q[2], q[3]), tau=q[4], gradient=q[5], e_qcc=q[6],
            preopt=pre[r], postopt=post[r], yy_theta=yy[r][0], entropies=ent.get(r))
    return ReferenceData(MappingProxyType(points))


def write_checksums(directory) -> None:
    """Regenerate ``SHA256SUMS`` (maintenance helper)."""
    from pathlib import Path

    d = Path(directory)
    lines = []
    for p in sorted(d.glob("*.txt")):
        lines.append(f"{hashlib.sha256(p.read_bytes()).hexdigest()} {p.name}")
    (d / "SHA256SUMS").write_text("\n".join(lines) + "\n")
