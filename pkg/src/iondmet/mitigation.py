"""Readout correction, McWeeny purification of the pair density and
bootstrap error bars for measured fragment energies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dmet import DmetError, FragmentProblem, fragment_energy_from_expression
from .fermion import EXPECTATION_LABELS, N_ELEC, RdmPair, pauli_to_rdms, rdms_to_pauli, trace_down
from .statevector import Histogram, NoiseModel, make_rng

DEFAULT_EPS = 1e-2
DEFAULT_RESAMPLES = 500
GRID_POINTS = 41


class PurificationError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------- SPAM

@dataclass(frozen=True)
class ConfusionModel:
    """Per-qubit readout flips; ``p01`` reads a prepared 0 as 1."""

    p01: tuple[float, ...]
    p10: tuple[float, ...]

    def __post_init__(self):
        p01 = tuple(float(p) for p in np.atleast_1d(self.p01))
        p10 = tuple(float(p) for p in np.atleast_1d(self.p10))
        if len(p01) != len(p10):
            raise ValueError("p01 and p10 must have one entry per qubit")
        for p in (*p01, *p10):
            if not 0.0 <= p < 0.5:
                raise ValueError(f"flip probability {p} outside [0, 0.5)")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @classmethod
    def uniform(cls, n: int, p01: float, p10: float) -> "ConfusionModel":
        return cls((p01,) * n, (p10,) * n)

    @classmethod
    def from_noise(cls, noise: NoiseModel, n: int) -> "ConfusionModel":
        return cls(*noise.flips(n))

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    def matrix(self) -> np.ndarray:
        """Column-stochastic ``C[observed, true]``; qubit 0 is the leading bit."""
        c = np.ones((1, 1))
        for a, b in zip(self.p01, self.p10):
            c = np.kron(c, np.array([[1 - a, b], [a, 1 - b]]))
        return c

    def apply(self, probs) -> np.ndarray:
        return self.matrix() @ np.asarray(probs, dtype=float)


@dataclass
class SpamResult:
    probabilities: np.ndarray
    raw: np.ndarray            # before clipping
    clipped: bool


def spam_correct(h: Histogram | np.ndarray, m: ConfusionModel, clip: bool = True) -> SpamResult:
    freq = h.frequencies() if isinstance(h, Histogram) else np.asarray(h, dtype=float)
    if freq.size != 2 ** m.n_qubits:
        raise ValueError("histogram width does not match the confusion model")
    raw = np.linalg.solve(m.matrix(), freq)
    clipped = bool(np.any(raw < 0) or np.any(raw > 1))
    out = raw
    if clip and clipped:
        out = np.clip(raw, 0.0, None)
        out = out / out.sum()
    return SpamResult(out, raw, clipped)


# ---------------------------------------------------------------- expectations

def _parities(n: int) -> np.ndarray:
    """``bits[k, j]`` is qubit j of outcome k (qubit 0 leading)."""
    k = np.arange(2 ** n)
    return (k[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def basis_expectations(probs, basis: str) -> dict[str, float]:
    """Every Pauli readable from one measurement basis (e.g. ``XZ`` gives XZ, XI, IZ)."""
    n = len(basis)
    signs = 1 - 2 * _parities(n)
    p = np.asarray(probs, dtype=float)
    out = {}
    for mask in range(1, 2 ** n):
        sel = [j for j in range(n) if mask >> (n - 1 - j) & 1]
        label = "".join(basis[j] if j in sel else "I" for j in range(n))
        out[label] = float(p @ np.prod(signs[:, sel], axis=1))
    return out


def pooled_expectations(per_basis: Mapping[str, tuple[np.ndarray, int]]) -> dict[str, float]:
    """Combine bases; strings seen in several circuits are shot-weighted averages."""
    acc: dict[str, list[float]] = {}
    for basis, (probs, shots) in per_basis.items():
        for lab, v in basis_expectations(probs, basis).items():
            s = acc.setdefault(lab, [0.0, 0.0])
            s[0] += shots * v
            s[1] += shots
    return {lab: s / w for lab, (s, w) in acc.items()}


def _corrected(h: Histogram, m: ConfusionModel | None) -> np.ndarray:
    return h.frequencies() if m is None else spam_correct(h, m).probabilities


def histogram_expectations(hists: Mapping[str, Histogram],
                           confusion: ConfusionModel | None = None) -> dict[str, float]:
    """The nine real-state expectations; odd-Y strings read from a YY circuit are dropped."""
    pooled = pooled_expectations({b: (_corrected(h, confusion), h.shots) for b, h in hists.items()})
    return {lab: v for lab, v in pooled.items() if lab in EXPECTATION_LABELS}


# ---------------------------------------------------------------- purification

@dataclass
class PurificationResult:
    two_rdm: np.ndarray
    n_iter: int
    residuals: list[float] = field(default_factory=list)

    def __iter__(self):
        yield self.two_rdm
        yield self.n_iter


def _residual(p: np.ndarray) -> float:
    return abs(np.trace(p @ p - p))


def mcweeny_purify(two_rdm: np.ndarray, eps: float = DEFAULT_EPS, max_iter: int = 100,
                   n_elec: int = N_ELEC) -> PurificationResult:
    """Cubic McWeeny map on the pair matrix scaled to unit trace.

    At least one step is always taken; iteration stops once
    ``|Tr(P^2 - P)| < eps``.
    """
    if n_elec != 2:
        raise DmetError("purification applies to two-electron systems only")
    m = RdmPair(np.zeros((4, 4)), two_rdm).pair_matrix()
    if not np.allclose(m, m.conj().T, atol=1e-10):
        raise DmetError("pair matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - n_elec * (n_elec - 1)) > 0.5:
        raise DmetError(f"pair-matrix trace {tr:.4f} inconsistent with two electrons")
    p = m / tr
    residuals = [_residual(p)]
    for it in range(1, max_iter + 1):
        p2 = p @ p
        p = 3 * p2 - 2 * p2 @ p
        p = (p + p.conj().T) / 2
        residuals.append(_residual(p))
        if residuals[-1] < eps:
            break
    else:
        raise PurificationError(f"no convergence in {max_iter} iterations", residuals[-1])
    # rescale to the pair count; idempotent P has unit trace
    out = p * (n_elec * (n_elec - 1)) / max(np.trace(p).real, 1e-300)
    return PurificationResult(RdmPair.two_rdm_from_pair_matrix(out), it, residuals)


def purified_energy(two_rdm: np.ndarray, fp: FragmentProblem) -> float:
    d = trace_down(two_rdm)
    ex = rdms_to_pauli(RdmPair(d, two_rdm))
    return fragment_energy_from_expression(fp, ex)


def energy_from_expectations(ex: Mapping[str, float], fp: FragmentProblem, purify: bool = False,
                             eps: float = DEFAULT_EPS) -> float:
    if not purify:
        return fragment_energy_from_expression(fp, ex)
    clipped = {k: min(1.0, max(-1.0, float(v))) for k, v in ex.items()}
    p = mcweeny_purify(pauli_to_rdms(clipped).two_rdm, eps).two_rdm
    return purified_energy(p, fp)


# ---------------------------------------------------------------- bootstrap

@dataclass
class BootstrapResult:
    mean: float
    sigma: float
    resamples: int
    energies: np.ndarray

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def bootstrap(hists: Mapping[str, Histogram], fp: FragmentProblem,
              resamples: int = DEFAULT_RESAMPLES, purify: bool = False, seed=0,
              confusion: ConfusionModel | None = None, eps: float = DEFAULT_EPS) -> BootstrapResult:
    """Redraw every histogram at its own size and recompute the energy.

    Each resample gets its own stream spawned from ``seed``.
    """
    if not hists:
        raise ValueError("no histograms")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    for b, h in hists.items():
        if h.shots < 1:
            raise ValueError(f"zero-shot histogram for basis {b}")
    bases = sorted(hists)
    freqs = {b: hists[b].frequencies() for b in bases}
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(resamples)
    energies = np.empty(resamples)
    for k, ss in enumerate(streams):
        rng = make_rng(ss)
        redrawn = {b: Histogram.from_vector(rng.multinomial(hists[b].shots, freqs[b]), b)
                   for b in bases}
        ex = histogram_expectations(redrawn, confusion)
        energies[k] = energy_from_expectations(ex, fp, purify, eps)
    sigma = float(np.std(energies, ddof=1)) if resamples > 1 else 0.0
    return BootstrapResult(float(np.mean(energies)), sigma, resamples, energies)


# ---------------------------------------------------------------- sweeps

@dataclass
class Landscape:
    x: np.ndarray
    y: np.ndarray
    error_mha: np.ndarray            # shape (len(y), len(x)); NaN where unphysical
    threshold_mha: float = 1.5936

    def within(self) -> np.ndarray:
        return self.error_mha < self.threshold_mha

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "abs_error_mHa"])
        for i, yv in enumerate(self.y):
            for j, xv in enumerate(self.x):
                e = self.error_mha[i, j]
                w.writerow([f"{xv:.6f}", f"{yv:.6f}", "nan" if math.isnan(e) else f"{e:.6f}"])
        return buf.getvalue()


def _safe_energy(ex, fp, eps) -> float:
    if any(abs(v) > 1 for v in ex.values()):
        return math.nan
    try:
        return energy_from_expectations(ex, fp, True, eps)
    except (PurificationError, DmetError):
        return math.nan


def sweep_purification_landscape(fp: FragmentProblem, exact: Mapping[str, float],
                                 span: float = 0.4, points: int = GRID_POINTS,
                                 eps: float = DEFAULT_EPS) -> Landscape:
    """Purified-energy error over (<XZ>+<ZX>, <XI>+<IX>) with the rest held exact.

    Each swept sum is split equally between its two strings; the reference
    is the energy of the exact expectations.
    """
    ex0 = {lab: float(exact[lab]) for lab in EXPECTATION_LABELS}
    e_ideal = fragment_energy_from_expression(fp, ex0)
    x0 = ex0["XZ"] + ex0["ZX"]
    y0 = ex0["XI"] + ex0["IX"]
    xs = x0 + np.linspace(-span, span, points)
    ys = y0 + np.linspace(-span, span, points)
    err = np.empty((points, points))
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            ex = dict(ex0, XZ=xv / 2, ZX=xv / 2, XI=yv / 2, IX=yv / 2)
            err[i, j] = abs(_safe_energy(ex, fp, eps) - e_ideal) * 1e3
    return Landscape(xs, ys, err)


@dataclass
class YYSweep:
    yy: np.ndarray
    unpurified: np.ndarray
    purified: np.ndarray

    def window(self, reference: float, center: float, tol: float = 1.5936e-3) -> tuple[float, float]:
        """Edges of the connected in-band stretch of the sweep containing ``center``.

        Returns the last swept values still within ``tol`` of ``reference``
        on either side; NaN when ``center`` itself is out of band.
        """
        ok = np.abs(self.purified - reference) < tol
        i = int(np.argmin(np.abs(self.yy - center)))
        if not ok[i]:
            return math.nan, math.nan
        lo = hi = i
        while lo > 0 and ok[lo - 1]:
            lo -= 1
        while hi < ok.size - 1 and ok[hi + 1]:
            hi += 1
        return float(self.yy[lo]), float(self.yy[hi])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["yy", "E_unpurified", "E_purified"])
        for a, b, c in zip(self.yy, self.unpurified, self.purified):
            w.writerow([f"{a:.6f}", f"{b:.6f}", "nan" if math.isnan(c) else f"{c:.6f}"])
        return buf.getvalue()


def sweep_yy(fp: FragmentProblem, exact: Mapping[str, float],
             values: Sequence[float] | None = None, eps: float = DEFAULT_EPS) -> YYSweep:
    ys = np.linspace(-0.5, 0.5, 201) if values is None else np.asarray(values, dtype=float)
    base = {lab: float(exact[lab]) for lab in EXPECTATION_LABELS}
    unp = np.array([fragment_energy_from_expression(fp, dict(base, YY=v)) for v in ys])
    pur = np.array([_safe_energy(dict(base, YY=v), fp, eps) for v in ys])
    return YYSweep(ys, unp, pur)


__all__ = [
    "BootstrapResult", "ConfusionModel", "Landscape", "PurificationError", "PurificationResult",
    "SpamResult", "YYSweep", "basis_expectations", "bootstrap", "energy_from_expectations",
    "histogram_expectations", "mcweeny_purify", "pooled_expectations", "purified_energy",
    "spam_correct", "sweep_purification_landscape", "sweep_yy",
]
