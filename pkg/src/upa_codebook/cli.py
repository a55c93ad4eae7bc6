"""Command-line front end.

Subcommands: ``design``, ``pattern``, ``simulate``, ``compare``, ``verify``.
Results go to ``--out`` (or stdout when it is omitted); stderr carries
progress and one-line summaries only.

Exit codes: 0 success, 1 verification failed, 2 invalid configuration,
3 infeasible codebook size, 4 unreadable codebook file, 5 codebooks built for
different arrays.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from dataclasses import replace

from .array import UpaConfig
from .codebook import Sweep, baseline_allones, baseline_kp_dft, design_codebook, pattern_report
from .config import ConfigError, RunConfig, SimulationConfig, load_config
from .ideal import CodebookConfig, InfeasibleConfig
from .sim import ChannelScenario, paired_difference, simulate, summarize, write_rate_table
from .storage import CodebookFileError, read_codebook, write_codebook
from .verify import run_checks

logger = logging.getLogger("upa_codebook")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_CORRUPT = 4
EXIT_MISMATCH = 5


class MismatchedArrays(ValueError):
    pass


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        return
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        yield fh


def _load(args) -> RunConfig | None:
    cfg = load_config(args.config) if getattr(args, "config", None) else None
    if cfg is None:
        return None
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if getattr(args, "stride", None) is not None:
        over["sweep"] = Sweep.strided(args.stride)
    if getattr(args, "requantize_shift", False):
        over["requantize_shift"] = True
    return replace(cfg, **over)


def cmd_design(args) -> int:
    run = _load(args)
    cfg = run.codebook
    if run.kind == "proposed":
        cb = design_codebook(run.upa, cfg, run.sweep, seed=run.seed, workers=run.workers,
                             quantize=run.quantize, requantize_shift=run.requantize_shift,
                             checkpoint=args.checkpoint)
    elif run.kind == "allones":
        cb = replace(baseline_allones(run.upa, cfg.q_h, cfg.q_v, run.workers), seed=run.seed)
    else:
        cb = replace(baseline_kp_dft(run.upa, cfg.q_h, cfg.q_v), seed=run.seed)
    out_dir = args.out or run.output_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "codebook.json")
    write_codebook(cb, path)
    with open(os.path.join(out_dir, "build_stats.json"), "w") as fh:
        json.dump(cb.stats, fh, indent=1)
        fh.write("\n")
    logger.info("wrote %s (%s, mean gain %.4f)", path, cb.kind, cb.stats["mean_gain"])
    return EXIT_OK


def cmd_pattern(args) -> int:
    cb = read_codebook(args.codebook)
    report = pattern_report(cb, args.grid_res)
    with _output(args.out) as fh:
        report.to_csv(fh)
    logger.info("mean gain %.4f, min gain %.4g over %d directions",
                report.mean_gain, report.min_gain, report.gain.size)
    return EXIT_OK


def _sim_setup(args):
    run = _load(args)
    scenario = run.scenario if run else ChannelScenario()
    sim = run.simulation if run else SimulationConfig()
    seed = args.seed if args.seed is not None else (run.seed if run else 0)
    workers = args.workers if args.workers is not None else (run.workers if run else 1)
    if args.realizations is not None:
        sim = replace(sim, n_realizations=args.realizations)
    codebooks = {}
    for path in args.codebooks:
        cb = read_codebook(path)
        name = cb.kind
        n = 2
        while name in codebooks:
            name = f"{cb.kind}_{n}"
            n += 1
        codebooks[name] = cb
    if len({cb.upa for cb in codebooks.values()}) > 1:
        raise MismatchedArrays("codebooks were built for different array configurations")
    return codebooks, scenario, sim, seed, workers


def cmd_simulate(args) -> int:
    codebooks, scenario, sim, seed, workers = _sim_setup(args)
    samples = simulate(codebooks, scenario, sim.snr_db, sim.n_realizations, seed,
                       sim.tau_t, workers)
    rows = []
    for name, cb in codebooks.items():
        rows += summarize(samples[name], name, sim.snr_db, cb.q_h, cb.q_v)
    with _output(args.out) as fh:
        write_rate_table(rows, fh)
    logger.info("simulated %d realizations x %d SNR points for %d codebook(s)",
                sim.n_realizations, len(sim.snr_db), len(codebooks))
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.codebooks) != 2:
        raise ConfigError("compare needs exactly two codebook files")
    codebooks, scenario, sim, seed, workers = _sim_setup(args)
    (name_a, _), (name_b, _) = codebooks.items()
    samples = simulate(codebooks, scenario, sim.snr_db, sim.n_realizations, seed,
                       sim.tau_t, workers)
    diffs = paired_difference(samples[name_a], samples[name_b], sim.snr_db)
    with _output(args.out) as fh:
        fh.write("snr_db,codebook_a,codebook_b,mean_diff,stderr,z\n")
        for d in diffs:
            fh.write("%r,%s,%s,%r,%r,%r\n" % (d.snr_db, name_a, name_b, d.mean_diff,
                                              d.stderr, d.z))
    logger.info("%s minus %s: min z = %.2f", name_a, name_b, min(d.z for d in diffs))
    return EXIT_OK


def cmd_verify(args) -> int:
    run = _load(args)
    upa = run.upa if run else UpaConfig(12, 6)
    cfg = run.codebook if run else CodebookConfig(8, 8)
    seed = args.seed if args.seed is not None else (run.seed if run else 0)
    results = run_checks(upa, cfg, seed, args.tolerance_scale)
    with _output(args.out) as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict()) + "\n")
    failed = [r.name for r in results if not r.passed]
    logger.info("%d/%d checks passed%s", len(results) - len(failed), len(results),
                f"; failed: {', '.join(failed)}" if failed else "")
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upa-codebook", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="build a codebook from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: [run] output_dir)")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stride", type=int, help="evaluate every k-th candidate")
    p.add_argument("--requantize-shift", action="store_true",
                   help="requantize analog phases after phase shifting")
    p.add_argument("--checkpoint", help="resumable sweep state file")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("pattern", help="best-beam gain over a departure-angle grid")
    p.add_argument("codebook")
    p.add_argument("--out")
    p.add_argument("--grid-res", type=int, default=200)
    p.set_defaults(func=cmd_pattern)

    for name, func, helptext in (("simulate", cmd_simulate, "rate table per codebook"),
                                 ("compare", cmd_compare, "paired rate difference of two codebooks")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("codebooks", nargs="+")
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--realizations", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="check numerical identities")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply every tolerance (0 forces failure)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except InfeasibleConfig as exc:
        logger.error("%s", exc)
        return EXIT_INFEASIBLE
    except CodebookFileError as exc:
        logger.error("%s", exc)
        return EXIT_CORRUPT
    except MismatchedArrays as exc:
        logger.error("%s", exc)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
