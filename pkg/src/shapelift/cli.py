"""Command line interface.

Subcommands: synth (emit a synthetic instance), reconstruct (solve a
model/observation pair), bench (seeded trial loop with aggregate table).
Exit codes: 0 on success, 2 when --require-cert is set and the solution
is not certified, 1 on any error (bad input, solver failure).
"""

import argparse
import json
import sys

import numpy as np

from . import bench
from .certify import CertifySettings
from .relax import assemble_sdp, build_basis
from .sdp import SdpSettings

VARIANTS = {"full": "full2", "reduced": "reduced2"}


class _Parser(argparse.ArgumentParser):
    # usage problems are ordinary input errors -> exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="shapelift")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate an instance")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--sparse-support", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", required=True, help="output model JSON")
    p.add_argument("--obs", required=True, help="output observation JSON")
    p.add_argument("--truth", help="optional ground-truth JSON")

    p = sub.add_parser("reconstruct", help="solve an instance")
    p.add_argument("--model", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--variant", choices=sorted(VARIANTS), default="reduced")
    p.add_argument("--robust", action="store_true")
    p.add_argument("--cbar", type=float,
                   help="inlier residual cutoff in input units; required "
                        "with --robust")
    p.add_argument("--out", help="result JSON path")
    p.add_argument("--sdp-tol", type=float, default=1e-8)
    p.add_argument("--sdp-max-iter", type=int, default=100)
    p.add_argument("--require-cert", action="store_true",
                   help="exit 2 if the result is not certified")
    p.add_argument("--dump-sdp", help="write the assembled SDP as text")

    p = sub.add_parser("bench", help="seeded benchmark trials")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--sparse-support", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--robust", action="store_true")
    p.add_argument("--cbar", type=float)
    p.add_argument("--variant", choices=sorted(VARIANTS), default="reduced")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="write per-trial records and aggregates")
    p.add_argument("--sdp-tol", type=float, default=1e-8)
    p.add_argument("--sdp-max-iter", type=int, default=100)
    return parser


def cmd_synth(args):
    cfg = bench.SynthConfig(
        k=args.K, n=args.N, noise=args.noise, outlier_rate=args.outliers,
        sparse_support=args.sparse_support, alpha=args.alpha,
        seed=args.seed,
    )
    model, obs, truth = bench.generate(cfg)
    bench.save_model(model, args.model)
    bench.save_observation(obs, args.obs)
    if args.truth:
        with open(args.truth, "w") as fh:
            json.dump({
                "c": truth.coeffs.tolist(),
                "R": truth.rotation.reshape(-1).tolist(),
                "t": truth.translation.tolist(),
                "outliers": np.where(truth.outlier_mask)[0].tolist(),
            }, fh)
    print(f"wrote {args.model} and {args.obs} "
          f"(K={cfg.k}, N={cfg.n}, noise={cfg.noise})")
    return 0


def cmd_reconstruct(args):
    if args.robust and args.cbar is None:
        print("error: --robust requires --cbar", file=sys.stderr)
        return 1
    model = bench.load_model(args.model)
    obs = bench.load_observation(args.obs)
    sdp_settings = SdpSettings(tol=args.sdp_tol, max_iter=args.sdp_max_iter)
    if args.dump_sdp:
        from .poly import build_program
        from .preprocess import eliminate_translation, normalize

        nm, no = normalize(model, obs)
        prob = eliminate_translation(nm, no, args.alpha)
        prog = build_program(prob)
        spec = build_basis(model.k, VARIANTS[args.variant])
        bench_problem = assemble_sdp(prog, spec)
        from .relax import dump_sdp

        dump_sdp(bench_problem, args.dump_sdp)
    recon = bench.reconstruct(
        model, obs, alpha=args.alpha, variant=VARIANTS[args.variant],
        robust=args.robust, cbar=args.cbar, sdp_settings=sdp_settings,
        cert_settings=CertifySettings(),
    )
    if args.out:
        bench.save_result(recon, args.out)
    print(f"certified={recon.certified} corank={recon.corank} "
          f"eta={recon.eta:.3e} gamma={recon.f_lower:.6e} "
          f"f_hat={recon.f_upper:.6e}")
    if args.out:
        print(f"result written to {args.out}")
    if args.require_cert and not recon.certified:
        return 2
    return 0


def cmd_bench(args):
    cfg = bench.SynthConfig(
        k=args.K, n=args.N, noise=args.noise, outlier_rate=args.outliers,
        sparse_support=args.sparse_support, alpha=args.alpha,
        seed=args.seed,
    )
    sdp_settings = SdpSettings(tol=args.sdp_tol, max_iter=args.sdp_max_iter)
    records, agg = bench.run_trials(
        cfg, variant=VARIANTS[args.variant], robust=args.robust,
        trials=args.trials, cbar=args.cbar, sdp_settings=sdp_settings,
    )
    certified = sum(r.certified for r in records)
    print(f"trials={len(records)} certified={certified}")
    header = f"{'statistic':12s}" + "".join(
        f"{c:>14s}" for c in bench.AGGREGATE_COLUMNS
    )
    print(header)
    for stat in ("mean", "median"):
        row = f"{stat:12s}" + "".join(
            f"{agg[stat][c]:14.6g}" for c in bench.AGGREGATE_COLUMNS
        )
        print(row)
    if args.csv:
        bench.write_trials_csv(records, agg, args.csv)
        print(f"csv written to {args.csv}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "reconstruct": cmd_reconstruct,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as e:  # all solver/input failures -> exit 1
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
