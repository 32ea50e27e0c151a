"""Command-line interface: ``laav segment | synth | bench-noise | eval``.

Exit codes: 0 success, 2 input or parse error, 3 numeric or degeneracy
failure, 4 voting did not converge after the maximum number of trials.
Errors are reported on stderr as a single ``laav: error: <Kind>: <message>``
line.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import dataio
from .bench import bench_noise, summarise
from .dataio import NoiseSpec, SceneSpec, add_noise, standard_suite, synth_scene
from .errors import LaavError, ParseError
from .numerics import derive_seed
from .pipeline import PipelineConfig, dump_stages, metrics_for, segment

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOCONV = 0, 2, 3, 4

# flag dest -> type, for values read from --config files
_CONFIG_KEYS = {
    "input": str,
    "output": str,
    "truth": str,
    "motions": int,
    "seed": int,
    "sigma": str,
    "reps": int,
    "r1": float,
    "r2": float,
    "lambda_vote": float,
    "lambda_affinity": float,
    "alpha": float,
    "m": int,
    "rv_init": str,
    "stage_dump": str,
    "features": str,
    "frames": int,
    "kinds": str,
}


class CliInputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laav", description="Motion segmentation of feature trajectories.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value file; command-line flags take precedence")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--output", default=None)

    def pipeline_flags(sp):
        sp.add_argument("--motions", type=int, default=None, help="number of motions C")
        sp.add_argument("--r1", type=float, default=None)
        sp.add_argument("--r2", type=float, default=None)
        sp.add_argument("--lambda-vote", type=float, default=None)
        sp.add_argument("--lambda-affinity", type=float, default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--m", type=int, default=None)
        sp.add_argument("--rv-init", choices=("atoms", "random"), default=None)

    sp = sub.add_parser("segment", help="label the trajectories of one file")
    common(sp)
    pipeline_flags(sp)
    sp.add_argument("--input", default=None)
    sp.add_argument("--sigma", default=None, help="noise added before segmenting")
    sp.add_argument("--stage-dump", default=None, metavar="DIR")
    sp.add_argument("--metrics", default=None, help="also write metrics to this file")

    sp = sub.add_parser("synth", help="write a synthetic scene with ground truth")
    common(sp)
    sp.add_argument("--motions", type=int, default=None)
    sp.add_argument("--features", default=None, help="comma-separated features per motion")
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--kinds", default=None, help="comma-separated motion kinds")
    sp.add_argument("--sigma", default=None)

    sp = sub.add_parser("bench-noise", help="accuracy and convergence across noise levels")
    common(sp)
    pipeline_flags(sp)
    sp.add_argument("--input", default=None, help="scene file; default is the standard synthetic suite")
    sp.add_argument("--sigma", default=None, help="comma-separated noise levels (default 0,0.5,1,2)")
    sp.add_argument("--reps", type=int, default=None)

    sp = sub.add_parser("eval", help="score a labels file against ground truth")
    common(sp)
    sp.add_argument("--input", default=None, help="labels file")
    sp.add_argument("--truth", default=None, help="trajectory file with ground truth")
    sp.add_argument("--motions", type=int, default=None)
    return p


def _read_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", line=n)
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ParseError(f"unknown key {key!r}", line=n)
            try:
                out[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise ParseError(f"bad value for {key}: {value!r}", line=n) from None
    return out


def _merge_config(args):
    if not args.config:
        return args
    for key, value in _read_config(args.config).items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _floats(text, name):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliInputError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _pipeline_config(args, num_motions: int) -> PipelineConfig:
    cfg = PipelineConfig(num_motions=num_motions, seed=args.seed or 0)
    atoms = cfg.atoms
    if args.r1 is not None or args.r2 is not None:
        atoms = replace(atoms, r1=args.r1 if args.r1 is not None else atoms.r1, r2=args.r2 if args.r2 is not None else atoms.r2)
    rv = cfg.rv
    for flag, field in (("lambda_vote", "lambda_vote"), ("alpha", "alpha"), ("m", "m")):
        if getattr(args, flag) is not None:
            rv = replace(rv, **{field: getattr(args, flag)})
    voting = cfg.voting
    if args.lambda_affinity is not None:
        voting = replace(voting, lambda_affinity=args.lambda_affinity)
    return replace(cfg, atoms=atoms, rv=rv, voting=voting, rv_init=args.rv_init or "atoms")


def _need(value, flag):
    if value is None:
        raise CliInputError(f"{flag} is required")
    return value


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_segment(args) -> int:
    traj = dataio.load_trajectories(_need(args.input, "--input"))
    C = args.motions or traj.num_motions
    if not C:
        raise CliInputError("number of motions unknown: pass --motions or set C in the file")
    cfg = _pipeline_config(args, C)
    if args.sigma:
        cfg = replace(cfg, noise=NoiseSpec(float(args.sigma), derive_seed(cfg.seed, "noise")))
    result = segment(traj, cfg)
    out = _need(args.output, "--output")
    dataio.save_labeling(result.labeling, out)
    if args.stage_dump:
        dump_stages(result, args.stage_dump)
    metrics = dataio.format_metrics(metrics_for(result, traj, cfg.seed))
    sys.stdout.write(metrics)
    if args.metrics:
        _write_text(args.metrics, metrics)
    if not result.converged:
        return _fail(EXIT_NOCONV, "NoConvergence", f"voting did not converge in {cfg.rv.max_trials} trials")
    return EXIT_OK


def cmd_synth(args) -> int:
    C = _need(args.motions, "--motions")
    feats = tuple(int(x) for x in _floats(_need(args.features, "--features"), "features"))
    if len(feats) == 1 and C > 1:
        feats = feats * C
    kinds = tuple(k.strip() for k in args.kinds.split(",")) if args.kinds else ()
    spec = SceneSpec(C, feats, _need(args.frames, "--frames"), kinds, seed=args.seed or 0)
    traj = synth_scene(spec)
    if args.sigma:
        traj = add_noise(traj, NoiseSpec(float(args.sigma), derive_seed(spec.seed, "noise")))
    dataio.save_trajectories(traj, _need(args.output, "--output"))
    return EXIT_OK


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def cmd_bench_noise(args) -> int:
    sigmas = _floats(args.sigma, "sigma") if args.sigma is not None else [0.0, 0.5, 1.0, 2.0]
    reps = args.reps if args.reps is not None else 50
    if args.input:
        scenes = [dataio.load_trajectories(args.input)]
    else:
        scenes = [synth_scene(s) for s in standard_suite(args.seed or 0)]
    C = args.motions or 0
    cfg = _pipeline_config(args, C)
    rows = bench_noise(scenes, sigmas, reps, cfg)
    head = ["record", "arm", "sigma", "rep", "scene", "accuracy", "accuracy_std", "iterations", "converged"]
    lines = ["\t".join(head)]
    for r in rows:
        lines.append("\t".join(_cell(x) for x in ("run", r.arm, r.sigma, r.rep, r.scene, r.accuracy, "", r.iterations, r.converged)))
    for s in summarise(rows):
        lines.append(
            "\t".join(
                _cell(x)
                for x in ("summary", s.arm, s.sigma, "all", "all", s.mean_accuracy, s.std_accuracy, s.median_iterations, s.convergence_rate)
            )
        )
    _write_text(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    lab = dataio.load_labeling(_need(args.input, "--input"))
    traj = dataio.load_trajectories(_need(args.truth, "--truth"))
    if traj.ground_truth is None:
        raise CliInputError("truth file carries no ground-truth labels")
    if len(lab) != traj.feature_count:
        raise CliInputError(f"labels cover {len(lab)} features, truth has {traj.feature_count}")
    C = args.motions or traj.num_motions
    err = dataio.misclassification_error(lab, traj.ground_truth, C)
    metrics = {
        "error_total": err,
        "error_2motion": err if C == 2 else float("nan"),
        "error_3motion": err if C == 3 else float("nan"),
        "iterations": 0,
        "converged": True,
        "seed": args.seed or 0,
    }
    _write_text(args.output, dataio.format_metrics(metrics))
    return EXIT_OK


COMMANDS = {"segment": cmd_segment, "synth": cmd_synth, "bench-noise": cmd_bench_noise, "eval": cmd_eval}


def _fail(code: int, kind: str, exc) -> int:
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"laav: error: {kind}: {msg}\n")
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        args = _merge_config(args)
        return COMMANDS[args.command](args)
    except (ParseError, CliInputError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, exc)
    except LaavError as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, exc)
    except ValueError as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
