"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 any other failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__, bvh, dsp, pipeline, styletx
from .errors import PhysioSynthError, ValidationError
from .scenario import load_profile, load_scenario


def _parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _cmd_synth(args) -> int:
    profile = load_profile(args.profile)
    scenario = load_scenario(args.scenario)
    weights = pipeline.load_weight_set(args.weights) if args.weights else None
    manifest = pipeline.RunManifest(profile, scenario, seed=args.seed,
                                    base_dir=str(Path(args.scenario).resolve().parent))
    bundle = pipeline.run_synthesis(manifest, weights)
    pipeline.write_bundle(bundle, args.out)
    return 0


def _cmd_style(args) -> int:
    target = bvh.read_bvh(args.target)
    source = bvh.read_bvh(args.style_source)
    ref = bvh.read_bvh(args.style_ref)
    out = styletx.transfer_style(target, source, ref, strict=args.strict)
    bvh.save_bvh(out, _parent(args.out))
    return 0


def _cmd_train(args) -> int:
    w = pipeline.train_task(args.task, args.data, seed=args.seed, epochs=args.epochs)
    w.save(_parent(args.out))
    return 0


def _cmd_make_data(args) -> int:
    table = pipeline.load_direction_table(args.table)
    coords = pipeline.load_emotion_coords(args.coords)
    pipeline.make_training_set(table, coords, args.out, count=args.count, seed=args.seed)
    return 0


def _cmd_eval(args) -> int:
    weights = pipeline.load_weight_set(args.weights)
    table = pipeline.load_direction_table(args.table)
    coords = pipeline.load_emotion_coords(args.coords)
    report = pipeline.eval_directions(weights, table, coords, seed=args.seed)
    _parent(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")
    print(f"mismatches {report['n_mismatched']}/{report['n_cells']} "
          f"error rate {report['error_rate']:.4f}")
    return 0


def _cmd_features(args) -> int:
    ch = pipeline.channel_from_csv(args.inp)
    rows = dsp.window_feature_vector(ch.samples, ch.sample_rate, args.window,
                                     args.overlap, args.variant)
    names = list(dsp.FEATURES_6 if args.variant == 6 else dsp.FEATURES_13)
    hop = int(round(args.window * ch.sample_rate * (1 - args.overlap))) / ch.sample_rate
    with open(_parent(args.out), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start"] + names)
        for k, r in enumerate(rows):
            w.writerow([f"{k * hop:.6f}"] + [f"{r[n]:.9g}" for n in names])
    return 0


def _cmd_correlate(args) -> int:
    t_ref, ref = pipeline.read_series_csv(args.reference)
    if args.signal == "value":
        t_m, meas = pipeline.read_series_csv(args.measured)
    else:
        ch = pipeline.channel_from_csv(args.measured)
        if args.signal == "ecg":
            t_m = t_ref[(t_ref > 2.0) & (t_ref < ch.duration - 2.0)]
            meas = pipeline.instantaneous_hr(ch, t_m)
        else:
            t_m, meas = pipeline.extracted_rr(ch)
    r = pipeline.correlate_series(t_ref, ref, t_m, meas)
    print(f"pearson_r {r:.6f}")
    if args.out:
        _parent(args.out).write_text(json.dumps({"pearson_r": r}, indent=2) + "\n",
                                  encoding="utf-8")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad arguments are invalid input, not a runtime failure
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="physiosynth",
                                description="Synthetic ECG, BP, respiration and SCR.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="synthesize a scenario into a CSV bundle")
    s.add_argument("--profile", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--weights", help="directory with hr.json, rr.json, scr.json")
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("style", help="spectral style transfer between BVH clips")
    s.add_argument("--target", required=True)
    s.add_argument("--style-source", required=True)
    s.add_argument("--style-ref", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--strict", action="store_true",
                   help="fail on all-zero target channels")
    s.set_defaults(func=_cmd_style)

    s = sub.add_parser("train", help="train one emotion model")
    s.add_argument("--task", choices=pipeline.TASKS, required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=None)
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("make-data", help="write synthetic training sets")
    s.add_argument("--table", default=None)
    s.add_argument("--coords", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=100, help="rows per emotion")
    s.set_defaults(func=_cmd_make_data)

    s = sub.add_parser("eval-directions", help="compare feature directions with the table")
    s.add_argument("--weights", required=True)
    s.add_argument("--table", default=None)
    s.add_argument("--coords", default=None)
    s.add_argument("--report", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("features", help="windowed statistical features of a channel CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--variant", type=int, choices=(6, 13), default=6)
    s.add_argument("--window", type=float, default=6.0)
    s.add_argument("--overlap", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_features)

    s = sub.add_parser("correlate", help="Pearson r of a reference series vs a measured one")
    s.add_argument("--reference", required=True, help="t,value CSV (e.g. commanded HR)")
    s.add_argument("--measured", required=True)
    s.add_argument("--signal", choices=("value", "ecg", "resp"), default="value",
                   help="how to read --measured: a t,value series, or a raw channel "
                        "to extract HR (ecg) or breathing rate (resp) from")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_correlate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PhysioSynthError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
