"""End-to-end runs over bond lengths: VQE, compiled measurement circuits,
sampling, mitigation and table output."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .compiler import BASES, compile_circuit, equivalence_check, two_qubit_angles, with_basis
from .data import CHEMICAL_ACCURACY, R_VALUES, reference
from .dmet import DmetConfig, FragmentProblem, LoopResult, ToyDmet, fragment_energy_from_expression, hubbard_ring
from .fermion import EXPECTATION_LABELS, entropy_fragment_bath, entropy_mo, fragment_number_operator, state_expectations
from .mitigation import (
    DEFAULT_EPS, DEFAULT_RESAMPLES, ConfusionModel, bootstrap, energy_from_expectations,
    histogram_expectations, pooled_expectations, sweep_purification_landscape, sweep_yy,
)
from .qcc import (
    AnsatzSpec, MeanFieldParams, ansatz_state, build_ansatz_circuit, optimize_mean_field,
    screen_generators, vqe_minimize,
)
from .statevector import NOISELESS, Histogram, NoiseModel, circuit_to_text, distribution_vector, sample

GENERATOR = "XY"
ENERGY_FMT = "{:.6f}"


def _key(r: float) -> int:
    return int(round(r * 1000))


# ---------------------------------------------------------------- problem setup

def fragment_problem(r: float) -> FragmentProblem:
    p = reference()[r]
    return FragmentProblem(p.hamiltonian(), p.energy_expression(), fragment_number_operator(), p.r)


def reference_spec(r: float, tau: float | None = None) -> AnsatzSpec:
    p = reference()[r]
    return AnsatzSpec(MeanFieldParams(p.theta, p.phi), (GENERATOR,), (p.tau if tau is None else tau,))


@dataclass
class VqeSummary:
    r: float
    e_mean_field: float
    generator: str
    gradient: float
    energy: float
    reference_energy: float
    spec: AnsatzSpec

    @property
    def error(self) -> float:
        return self.energy - self.reference_energy


def cmd_vqe(r: float, seed=0, n_generators: int = 1) -> VqeSummary:
    """Mean-field optimum, gradient screening, then joint minimization."""
    h = reference()[r].hamiltonian()
    mf = optimize_mean_field(h, seed=seed)
    screen = screen_generators(h, mf.params)
    chosen = screen.candidates[:n_generators]
    spec0 = AnsatzSpec(mf.params, tuple(g for g, _ in chosen), (0.0,) * len(chosen))
    if chosen:
        res = vqe_minimize(h, spec0, ftol=1e-15, gtol=1e-10)
        spec, e = res.params, res.energy
    else:
        spec, e = spec0, mf.energy
    gen = chosen[0][0].letters if chosen else ""
    grad = chosen[0][1] if chosen else 0.0
    return VqeSummary(r, mf.energy, gen, grad, e, reference()[r].e_qcc, spec)


# ---------------------------------------------------------------- curve

@dataclass
class RunConfig:
    r_values: tuple[float, ...] = R_VALUES
    shots: int = 5000
    seed: int = 0
    noise: NoiseModel = NOISELESS
    purify: bool = True
    resamples: int = DEFAULT_RESAMPLES
    out: Path | None = None
    exact: bool = False
    fresh_vqe: bool = False
    eps: float = DEFAULT_EPS
    jobs: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.resamples < 1:
            raise ValueError("resamples must be >= 1")
        known = [r for r in self.r_values if not any(math.isclose(r, k) for k in R_VALUES)]
        if known:
            raise ValueError(f"no reference data for R={known}")


@dataclass
class CurvePoint:
    r: float
    e_hf: float
    e_fci: float
    e_theory: float
    e_exp: float
    sigma_exp: float
    e_purified: float
    sigma_purified: float
    expectations: dict[str, float] = field(default_factory=dict)

    def within(self, e: float) -> bool:
        return abs(e - self.e_fci) < CHEMICAL_ACCURACY

    def row(self) -> list[str]:
        f = ENERGY_FMT.format
        return [f"{self.r:.2f}", f(self.e_hf), f(self.e_fci), f(self.e_theory), f(self.e_exp),
                f(self.sigma_exp), f(self.e_purified), f(self.sigma_purified),
                str(int(self.within(self.e_exp))), str(int(self.within(self.e_purified)))]


CURVE_HEADER = ["R", "E_HF", "E_FCI", "E_T", "E_exp", "sigma_exp", "E_purified", "sigma_purified",
                "exp_within_chem_acc", "purified_within_chem_acc"]


def measurement_circuits(spec: AnsatzSpec, rounding: bool = True) -> dict:
    """Optimized native circuit per basis (ZX compiled on its own)."""
    c = build_ansatz_circuit(spec)
    return {b: compile_circuit(c, b, rounding=rounding)[1] for b in BASES}


def run_point(r: float, cfg: RunConfig) -> CurvePoint:
    ref = reference()[r]
    fp = fragment_problem(r)
    spec = cmd_vqe(r, cfg.seed).spec if cfg.fresh_vqe else reference_spec(r)
    e_theory = fragment_energy_from_expression(fp, state_expectations(ansatz_state(spec)))
    circuits = measurement_circuits(spec, rounding=not cfg.exact)
    if cfg.exact:
        pooled = pooled_expectations({b: (distribution_vector(c), 1) for b, c in circuits.items()})
        ex = {k: v for k, v in pooled.items() if k in EXPECTATION_LABELS}
        e_exp = energy_from_expectations(ex, fp)
        e_pur = energy_from_expectations(ex, fp, cfg.purify, cfg.eps)
        return CurvePoint(r, ref.e_hf, ref.e_fci, e_theory, e_exp, 0.0, e_pur, 0.0, ex)
    hists = {}
    for i, b in enumerate(BASES):
        ss = np.random.SeedSequence([cfg.seed, _key(r), i])
        hists[b] = sample(circuits[b], cfg.shots, cfg.noise, seed=ss, basis_label=b)
    conf = None if _readout_free(cfg.noise) else ConfusionModel.from_noise(cfg.noise, 2)
    ex = histogram_expectations(hists, conf)
    e_exp = energy_from_expectations(ex, fp)
    e_pur = energy_from_expectations(ex, fp, cfg.purify, cfg.eps)
    bseed = np.random.SeedSequence([cfg.seed, _key(r), 1000])
    b_raw = bootstrap(hists, fp, cfg.resamples, False, bseed, conf, cfg.eps)
    sig_pur = 0.0
    if cfg.purify:
        sig_pur = bootstrap(hists, fp, cfg.resamples, True, bseed, conf, cfg.eps).sigma
    return CurvePoint(r, ref.e_hf, ref.e_fci, e_theory, e_exp, b_raw.sigma, e_pur, sig_pur, ex)


def _readout_free(noise: NoiseModel) -> bool:
    p01, p10 = noise.flips(2)
    return not (np.any(p01) or np.any(p10))


def curve_csv(points: Sequence[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for p in points:
        w.writerow(p.row())
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cmd_curve(cfg: RunConfig) -> list[CurvePoint]:
    """All requested bond lengths; with ``cfg.out`` writes per-R files then ``curve.csv``."""
    rs = list(cfg.r_values)
    if cfg.jobs > 1 and len(rs) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            points = list(pool.map(run_point, rs, [cfg] * len(rs)))
    else:
        points = [run_point(r, cfg) for r in rs]
    if cfg.out is not None:
        out = Path(cfg.out)
        for p in points:
            _atomic_write(out / f"curve_R{p.r:.2f}.csv", curve_csv([p]))
        _atomic_write(out / "curve.csv", curve_csv(points))
    return points


# ---------------------------------------------------------------- other commands

@dataclass
class EntropyResult:
    r: float
    mo: float
    fragment_bath: float
    reference: tuple[float, ...] | None


def cmd_entropy(r: float, tau: float | None = None) -> EntropyResult:
    psi = ansatz_state(reference_spec(r, tau))
    return EntropyResult(r, entropy_mo(psi), entropy_fragment_bath(psi), reference()[r].entropies)


@dataclass
class CompileOutput:
    pre: object
    post: object
    report: object
    tv: float
    passed: bool
    two_qubit_angles: list[float]

    def to_text(self) -> str:
        return "\n".join([
            "[pre]", circuit_to_text(self.pre, 6).rstrip(),
            "[post]", circuit_to_text(self.post, 6).rstrip(),
            "[report]", self.report.to_text().rstrip(),
            f"tv {self.tv:.3e}",
            f"equivalent {'yes' if self.passed else 'no'}",
            f"ms_angles {' '.join(f'{a:.3f}' for a in self.two_qubit_angles) or 'none'}",
        ]) + "\n"


def cmd_compile(r: float, basis: str, tol: float = 1e-3) -> CompileOutput:
    c = build_ansatz_circuit(reference_spec(r))
    pre, post, report = compile_circuit(c, basis)
    eq = equivalence_check(with_basis(c, basis), post, tol=tol)
    return CompileOutput(pre, post, report, eq.worst, eq.passed, two_qubit_angles(post))


def toy_fixture(fragment: Sequence[int] = (0,)) -> ToyDmet:
    """Six-site ring, six electrons, next-nearest hopping so the bath is nontrivial."""
    return ToyDmet(hubbard_ring(6, 1.0, 0.2, 4.0), 6, list(fragment))


def cmd_dmet_toy(a: float = 1.0, tol: float = 1e-5, fragment: Sequence[int] = (0,),
                 max_iter: int = 100) -> LoopResult:
    toy = toy_fixture(fragment)
    n_frag = 6 // len(fragment)
    return toy.run(DmetConfig(6, a=a, tol=tol, max_iter=max_iter, n_fragments=n_frag))


def exact_expectations(r: float) -> dict[str, float]:
    return state_expectations(ansatz_state(reference_spec(r)))


def cmd_purify_sweep(r: float, kind: str = "yy", eps: float = DEFAULT_EPS,
                     points: int | None = None) -> str:
    fp = fragment_problem(r)
    ex = exact_expectations(r)
    if kind == "yy":
        vals = None if points is None else np.linspace(-0.5, 0.5, points)
        return sweep_yy(fp, ex, vals, eps).to_csv()
    if kind == "landscape":
        return sweep_purification_landscape(fp, ex, points=points or 41, eps=eps).to_csv()
    raise ValueError(f"unknown sweep {kind!r}")


__all__ = [
    "CURVE_HEADER", "CompileOutput", "CurvePoint", "EntropyResult", "RunConfig", "VqeSummary",
    "cmd_compile", "cmd_curve", "cmd_dmet_toy", "cmd_entropy", "cmd_purify_sweep", "cmd_vqe",
    "curve_csv", "exact_expectations", "fragment_problem", "measurement_circuits", "reference_spec",
    "run_point", "toy_fixture",
]
