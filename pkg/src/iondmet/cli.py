"""``ion-dmet`` command line."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .compiler import BASES
from .data import R_VALUES, reference
from .mitigation import DEFAULT_EPS, DEFAULT_RESAMPLES
from .pipeline import (
    RunConfig, _atomic_write, cmd_compile, cmd_curve, cmd_dmet_toy, cmd_entropy, cmd_purify_sweep,
    cmd_vqe, curve_csv,
)
from .statevector import NoiseModel


def _noise(text: str) -> NoiseModel:
    try:
        p01, p10 = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--noise expects p01,p10") from None
    try:
        return NoiseModel(p01, p10)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _r_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _atomic_write(Path(out) / name, text)
        print(f"wrote {Path(out) / name}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--r", type=_r_list, default=R_VALUES,
                        help="comma-separated bond lengths in angstrom (default: all five)")
    common.add_argument("--shots", type=int, default=5000, help="shots per measurement basis")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--noise", type=_noise, default=NoiseModel(), metavar="P01,P10",
                        help="readout flip probabilities")
    common.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    common.add_argument("--exact", action="store_true", help="use exact distributions, no sampling")
    common.add_argument("--out", type=Path, default=None, metavar="DIR")

    ap = argparse.ArgumentParser(prog="ion-dmet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("vqe", parents=[common], help="mean-field, screening and VQE per R")
    c = sub.add_parser("curve", parents=[common], help="full pipeline, CSV per R")
    c.add_argument("--no-purify", action="store_true")
    c.add_argument("--fresh-vqe", action="store_true", help="optimize instead of using listed parameters")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--eps", type=float, default=DEFAULT_EPS)
    e = sub.add_parser("entropy", parents=[common], help="MO and fragment-bath entropies")
    e.add_argument("--tau", type=float, default=None, help="override the generator amplitude")
    k = sub.add_parser("compile", parents=[common], help="native circuits for one basis")
    k.add_argument("--basis", choices=BASES, default="ZZ")
    d = sub.add_parser("dmet-toy", parents=[common], help="chemical-potential loop on a Hubbard ring")
    d.add_argument("--a", type=float, default=1.0, help="fixed-point step size")
    d.add_argument("--tol", type=float, default=1e-5)
    d.add_argument("--fragment", type=lambda s: tuple(int(v) for v in s.split(",")), default=(0,))
    s = sub.add_parser("purify-sweep", parents=[common], help="purification error scans")
    s.add_argument("--kind", choices=("yy", "landscape"), default="yy")
    s.add_argument("--eps", type=float, default=DEFAULT_EPS)
    s.add_argument("--points", type=int, default=None)
    return ap


def _vqe(args) -> int:
    lines = ["R,generator,gradient,E_MF,E_QCC,E_ref,error"]
    for r in args.r:
        v = cmd_vqe(r, args.seed)
        lines.append(f"{r:.2f},{v.generator},{v.gradient:.8f},{v.e_mean_field:.6f},"
                     f"{v.energy:.8f},{v.reference_energy:.8f},{v.error:.2e}")
    _emit("\n".join(lines) + "\n", args.out, "vqe.csv")
    return 0


def _curve(args) -> int:
    cfg = RunConfig(r_values=args.r, shots=args.shots, seed=args.seed, noise=args.noise,
                    purify=not args.no_purify, resamples=args.resamples, out=args.out,
                    exact=args.exact, fresh_vqe=args.fresh_vqe, eps=args.eps, jobs=args.jobs)
    points = cmd_curve(cfg)
    if args.out is None:
        sys.stdout.write(curve_csv(points))
    else:
        print(f"wrote {Path(args.out) / 'curve.csv'}")
    return 0


def _entropy(args) -> int:
    lines = ["R,S_MO,S_FB,S_MO_ref,S_FB_ref"]
    for r in args.r:
        e = cmd_entropy(r, args.tau)
        ref = e.reference or (float("nan"),) * 2
        lines.append(f"{r:.2f},{e.mo:.5f},{e.fragment_bath:.5f},{ref[0]:.5f},{ref[1]:.5f}")
    _emit("\n".join(lines) + "\n", args.out, "entropy.csv")
    return 0


def _compile(args) -> int:
    ok = True
    for r in args.r:
        res = cmd_compile(r, args.basis)
        ok &= res.passed
        _emit(f"# R {r:.2f}\n" + res.to_text(), args.out, f"compile_{args.basis}_R{r:.2f}.txt")
    return 0 if ok else 1


def _dmet_toy(args) -> int:
    res = cmd_dmet_toy(args.a, args.tol, args.fragment)
    lines = ["iteration,dmu,N_fragments"]
    lines += [f"{i},{mu:.10f},{n:.10f}" for i, (mu, n) in enumerate(res.trace)]
    lines.append(f"# converged dmu={res.dmu:.10f} iterations={res.iterations} "
                 f"secant={'yes' if res.secant_used else 'no'} E={sum(res.fragment_energies):.6f}")
    _emit("\n".join(lines) + "\n", args.out, "dmet_toy.csv")
    return 0


def _sweep(args) -> int:
    for r in args.r:
        text = cmd_purify_sweep(r, args.kind, args.eps, args.points)
        _emit(text, args.out, f"purify_{args.kind}_R{r:.2f}.csv")
    return 0


COMMANDS = {"vqe": _vqe, "curve": _curve, "entropy": _entropy, "compile": _compile,
            "dmet-toy": _dmet_toy, "purify-sweep": _sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for r in args.r:
            reference()[r]
    except KeyError as exc:
        print(f"ion-dmet: {exc.args[0]}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"ion-dmet: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
