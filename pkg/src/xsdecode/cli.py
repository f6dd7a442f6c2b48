"""Command-line driver.

Subcommands:
  synth      generate a synthetic multi-subject dataset and save it
  ingest     convert epoched tensor files into the dataset format
  evaluate   run the LOSO table (plus within-subject k-fold column)
  weights    estimate importance weights for one held-out subject
  permcheck  label-permutation null of the evaluation pipeline

Every run prints a resolved-configuration block first, so logs are
self-describing. All outputs are deterministic functions of the flags.
"""

import argparse
import os
import sys

import numpy as np

from . import io as dio
from . import synth
from .data import fingerprint, pool
from .decoders import METHODS, DecoderSpec
from .evaluation import loso, permutation_check
from .report import render_results_figure, render_weights_figure
from .shift import ShiftOptions, estimate_weights
from .stacking import build_second_level, fit_first_level

__all__ = ["main"]


def _echo_config(args, extra=None):
    print("resolved configuration:")
    skip = {"func"}
    for key in sorted(vars(args)):
        if key not in skip:
            print("  %s=%s" % (key, getattr(args, key)))
    for key, value in (extra or {}).items():
        print("  %s=%s" % (key, value))
    sys.stdout.flush()


def _parse_clip(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("--clip wants 'LO,HI', got %r" % text)
    lo, hi = float(parts[0]), float(parts[1])
    return lo, hi


def _with_suffix(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def cmd_synth(args):
    config = synth.SynthConfig(
        n_subjects=args.subjects, trials_per_subject=args.trials, d=args.dim,
        mu=args.mu, sigma=args.sigma, gamma=args.gamma, tau=args.tau,
        seed=args.seed)
    dataset, params = synth.generate(config)
    digest = dio.save_dataset(
        dataset, args.out,
        metadata={"generator": "synth",
                  "mu": args.mu, "sigma": args.sigma,
                  "gamma": args.gamma, "tau": args.tau, "seed": args.seed})
    dio.save_subject_params(params, os.path.join(args.out, "params"))
    extra = {"fingerprint": digest}
    try:
        bayes = [synth.bayes_accuracy(p, config) for p in params]
        extra["bayes_accuracy_mean"] = repr(float(np.mean(bayes)))
    except ValueError as exc:
        extra["bayes_accuracy_mean"] = "unavailable (%s)" % exc
    _echo_config(args, extra)
    print("wrote dataset with %d subjects to %s" % (dataset.n_subjects, args.out))
    return 0


def cmd_ingest(args):
    names = sorted(n for n in os.listdir(args.tensor_dir)
                   if n.endswith(".tensor"))
    if not names:
        raise FileNotFoundError("no .tensor files in %s" % args.tensor_dir)
    subjects = []
    channels = timepoints = None
    for name in names:
        tensor = dio.load_tensor(os.path.join(args.tensor_dir, name))
        subjects.append(dio.vectorize(tensor, args.decimate))
        channels = tensor.n_channels
        timepoints = tensor.n_timepoints // args.decimate
    from .data import MultiSubjectDataset

    dataset = MultiSubjectDataset(subjects)
    digest = dio.save_dataset(
        dataset, args.out, channels=channels, timepoints=timepoints,
        metadata={"generator": "ingest", "decimate": args.decimate,
                  "epoch_window": "as epoched by producer (not re-windowed)"})
    _echo_config(args, {"d": dataset.d, "fingerprint": digest})
    print("ingested %d subjects to %s" % (dataset.n_subjects, args.out))
    return 0


def cmd_evaluate(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValueError("unknown method %r, expected one of %s"
                             % (m, ",".join(METHODS)))
    clip_lo, clip_hi = _parse_clip(args.clip)
    dataset = dio.load_dataset(args.data)
    shift_options = ShiftOptions(clip_lo=clip_lo, clip_hi=clip_hi,
                                 space=args.shift_space)
    specs = [DecoderSpec(m, k=args.k, shift_options=shift_options,
                         lambda_mode=args.lambda_mode, seed=args.seed)
             for m in methods]
    out_txt = args.out_txt or _with_suffix(args.out_csv, ".txt")
    out_fig = args.out_fig or _with_suffix(args.out_csv, ".png")
    _echo_config(args, {"standardize": not args.no_standardize,
                        "resolved_out_txt": out_txt,
                        "resolved_out_fig": out_fig,
                        "fingerprint": fingerprint(dataset)})
    table = loso(dataset, specs, seed=args.seed,
                 standardize=not args.no_standardize)
    with open(args.out_csv, "w") as fh:
        fh.write(table.to_csv_text())
    with open(out_txt, "w") as fh:
        fh.write(table.to_txt_text())
    render_results_figure(table, out_fig)
    mean = table.mean_row()
    for m in methods:
        if m in mean:
            print("mean %s accuracy: %.4f" % (m, mean[m]))
    failures = sum(len(v) for v in table.errors.values())
    if failures:
        print("%d cells failed; see %s" % (failures, out_txt))
    print("wrote %s, %s, %s" % (args.out_csv, out_txt, out_fig))
    return 0


def cmd_weights(args):
    clip_lo, clip_hi = _parse_clip(args.clip)
    dataset = dio.load_dataset(args.data)
    if args.target_subject not in dataset.subject_ids:
        raise ValueError("subject %d not in dataset (has %s)"
                         % (args.target_subject,
                            ",".join(str(s) for s in dataset.subject_ids)))
    train = dataset.without([args.target_subject])
    held = dataset.subject(args.target_subject)
    options = ShiftOptions(clip_lo=clip_lo, clip_hi=clip_hi,
                           space=args.shift_space)
    train_std, (held_std,), _, _ = dio.standardize(train, [held])
    if args.shift_space == "second_level":
        bank = fit_first_level(train_std, k=args.k, seed=args.seed)
        X_source = build_second_level(bank, train_std, mode="train").features
        X_target = build_second_level(bank, held_std.features, mode="test").features
    else:
        X_source = pool(train_std)[0].X
        X_target = held_std.features
    iw = estimate_weights(X_source, X_target, options, seed=args.seed)
    out_fig = _with_suffix(args.out, ".png")
    _echo_config(args, {"resolved_out_fig": out_fig,
                        "fingerprint": fingerprint(dataset)})
    with open(args.out, "w") as fh:
        fh.write("trial_index,weight\n")
        for i, w in enumerate(iw.weights):
            fh.write("%d,%s\n" % (i, repr(float(w))))
    render_weights_figure(iw, out_fig)
    for key, value in sorted(iw.summary().items()):
        print("%s=%s" % (key, value))
    print("wrote %s, %s" % (args.out, out_fig))
    return 0


def cmd_permcheck(args):
    dataset = dio.load_dataset(args.data)
    if args.method not in METHODS:
        raise ValueError("unknown method %r, expected one of %s"
                         % (args.method, ",".join(METHODS)))
    spec = DecoderSpec(args.method, k=args.k, seed=args.seed)
    _echo_config(args, {"fingerprint": fingerprint(dataset)})
    nulls = permutation_check(dataset, spec, args.n_perm, seed=args.seed)
    for i, acc in enumerate(nulls):
        print("permutation %d: %.4f" % (i, acc))
    print("null mean: %.4f over %d permutations" % (float(np.mean(nulls)),
                                                    len(nulls)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xsdecode",
        description="cross-subject decoding experiments "
                    "(pooling, stacking, importance weighting)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--dim", type=int, default=60)
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="convert epoched tensors to a dataset")
    p.add_argument("--tensor-dir", required=True)
    p.add_argument("--decimate", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("evaluate", help="run the accuracy table")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--methods", default="single,pool,sg,sg_cs")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--lambda-mode", choices=("fixed", "cv"), default="fixed")
    p.add_argument("--shift-space", choices=ShiftOptions.SPACES,
                   default="second_level")
    p.add_argument("--clip", default="0.1,10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-txt", default=None,
                   help="default: out-csv with .txt suffix")
    p.add_argument("--out-fig", default=None,
                   help="default: out-csv with .png suffix")
    p.add_argument("--no-standardize", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("weights", help="importance weights for one subject")
    p.add_argument("--data", required=True)
    p.add_argument("--target-subject", type=int, required=True)
    p.add_argument("--shift-space", choices=ShiftOptions.SPACES,
                   default="second_level")
    p.add_argument("--clip", default="0.1,10")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="weights CSV path")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("permcheck", help="label-permutation null check")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="pool")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--n-perm", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_permcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
