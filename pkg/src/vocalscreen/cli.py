"""Command-line entry point: ``vocalscreen <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
Options may also come from a flat ``key = value`` file given with
``--config``; flags on the command line take precedence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, VocalScreenError

log = logging.getLogger("vocalscreen")

# options that name files read by the command: their content, not their path, is hashed
INPUT_KEYS = ("metadata", "features", "rankings", "model", "wav")
UNHASHED_KEYS = ("out", "out_dir", "threads", "config", "verbose", "func", "command")


class UsageError(Exception):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- configuration ------------------------------------------------------------------

def read_config(path):
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(args) -> str:
    """Digest of the effective configuration: option values plus the
    contents of input files; output locations and thread count excluded."""
    doc = {}
    for key, val in sorted(vars(args).items()):
        if key in UNHASHED_KEYS or callable(val):
            continue
        if key in INPUT_KEYS and val:
            val = _file_digest(val) if os.path.isfile(val) else str(val)
        doc[key] = val
    doc["version"] = __version__
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def stamp(args) -> str:
    return f"vocalscreen {__version__} config_hash={args.config_hash} seed={args.seed}"


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- shared loaders -----------------------------------------------------------------

def _load_features(args):
    from .dysphonia import read_feature_csv
    if not args.features or not os.path.isfile(args.features):
        raise InputError(f"feature file not found: {args.features}")
    fm = read_feature_csv(args.features)
    fm = fm.filter_cohort(getattr(args, "cohort", "all"))
    if len(fm) == 0:
        raise InputError(f"no rows for cohort {args.cohort!r}")
    bad = sorted(set(fm.labels) - {"PD", "HC"})
    if bad:
        raise InputError(f"feature file has labels {bad}; expected PD/HC")
    return fm


def _subset_from_rankings(args, n_features):
    """Feature indices chosen by --rankings/--algorithm/--n-features (all if none)."""
    if not getattr(args, "rankings", None):
        return None
    from .fselect import read_ranking_csv
    ranks = read_ranking_csv(args.rankings)
    if args.algorithm not in ranks:
        raise InputError(f"{args.rankings} has no {args.algorithm} ranking")
    k = args.n_features or n_features
    order = ranks[args.algorithm].order
    if k > len(order):
        raise InputError(f"{k} features requested, ranking has {len(order)}")
    return np.sort(order[:k])


# -- subcommands --------------------------------------------------------------------

def cmd_synth(args):
    from .audio_io import MetadataRow, save_wav, write_metadata
    from .synthvoice import SynthSpec, parse_spec, synthesize
    spec = parse_spec(args.spec, replace(SynthSpec(), seed=args.seed))
    if args.duration is not None:
        spec = replace(spec, duration=args.duration)
    rec = synthesize(spec, id=args.id, label=args.label,
                     age=args.age, sex=args.sex)
    save_wav(rec, args.out)
    meta = args.metadata or str(Path(args.out).with_suffix(".csv"))
    write_metadata([MetadataRow(rec.id, os.path.basename(args.out), rec.label, rec.age, rec.sex)], meta)
    log.info("wrote %s and %s", args.out, meta)


def cmd_synth_cohort(args):
    from .audio_io import MetadataRow, save_wav, write_metadata
    from .synthvoice import HC_DEFAULT, PD_DEFAULT, parse_spec, synth_cohort
    out = _out_dir(args.out_dir)
    members = synth_cohort(args.n, parse_spec(args.pd_spec, PD_DEFAULT),
                           parse_spec(args.hc_spec, HC_DEFAULT), seed=args.seed,
                           spread=args.spread)
    rows = []
    for m in members:
        name = f"{m.recording.id}.wav"
        save_wav(m.recording, out / name)
        rows.append(MetadataRow(m.recording.id, name, m.recording.label, m.recording.age, m.recording.sex))
    write_metadata(rows, out / "metadata.csv")
    log.info("wrote %d recordings to %s", len(rows), out)


def _gated_recordings(args):
    from .audio_io import gate_recording, load_recording, read_metadata, trim_phonation
    if not args.metadata or not os.path.isfile(args.metadata):
        raise InputError(f"metadata file not found: {args.metadata}")
    rows = read_metadata(args.metadata)
    recs, rejected = [], 0
    for row in rows:
        try:
            rec = load_recording(row)
        except (VocalScreenError, FileNotFoundError) as exc:
            log.warning("%s: rejected (%s)", row.id, exc)
            rejected += 1
            continue
        gate = gate_recording(rec, args.min_duration)
        if not gate.accepted:
            log.warning("%s: rejected (%s)", row.id, gate.reason)
            rejected += 1
            continue
        recs.append(trim_phonation(rec))
    log.info("%d recordings accepted, %d rejected", len(recs), rejected)
    if not recs:
        raise InputError("no usable recordings")
    return recs


def cmd_extract(args):
    from .dysphonia import extract_matrix, write_feature_csv
    recs = _gated_recordings(args)
    fm = extract_matrix(recs, threads=args.threads)
    if len(fm) == 0:
        raise InputError("no recording produced features")
    write_feature_csv(fm, args.out, stamp(args))
    log.info("wrote %d x %d feature matrix to %s", len(fm), fm.values.shape[1], args.out)


def cmd_pitch(args):
    from .audio_io import load_wav, resample
    from .pitch import estimate_f0
    rec = resample(load_wav(args.wav))
    c = estimate_f0(rec, args.f0_min, args.f0_max, threshold=args.threshold)
    with open(args.out, "w") as fh:
        fh.write(f"# {stamp(args)}\n")
        fh.write("time_s,f0_hz,strength\n")
        for t, f, s in zip(c.times, c.f0, c.strength):
            fh.write(f"{t:.3f},{repr(float(f))},{repr(float(s))}\n")


def cmd_stats(args):
    from .eval import (age_association, jackknife_correlations, ks_test, mann_whitney,
                       normalized_mi, write_scatter_csv)
    fm = _load_features(args)
    out = _out_dir(args.out_dir)
    y = fm.y
    from .classify import fit_medians, impute
    X = impute(fm.values, fit_medians(fm.values))
    jk = jackknife_correlations(X, y, reps=args.reps, seed=args.seed)
    with open(out / "stats.csv", "w") as fh:
        fh.write(f"# {stamp(args)}\n")
        fh.write("feature_index,feature_name,pearson_mean,pearson_sd,normalized_mi,"
                 "mwu_u,mwu_p,ks_d,ks_p\n")
        for j in list(jk.order) + list(np.flatnonzero(jk.undefined)):
            u, pu = mann_whitney(X[y == 1, j], X[y == 0, j])
            d, pk = ks_test(X[y == 1, j], X[y == 0, j])
            fh.write(f"{j},{fm.names[j]},{repr(float(jk.mean[j]))},{repr(float(jk.sd[j]))},"
                     f"{repr(normalized_mi(X[:, j], y))},{repr(u)},{repr(pu)},{repr(d)},{repr(pk)}\n")
    hc = np.flatnonzero(y == 0)
    if len(hc):
        top = list(jk.order[:args.top])
        res, dropped = age_association(X[hc], [fm.ages[i] for i in hc], top)
        if dropped:
            log.info("age association: %d controls without age dropped", dropped)
        with open(out / "age_association.csv", "w") as fh:
            fh.write(f"# {stamp(args)}\n")
            fh.write("feature_index,feature_name,pearson_r,n\n")
            for j, r, n in res:
                fh.write(f"{j},{fm.names[j]},{repr(r)},{n}\n")
        for j in top:
            write_scatter_csv(X[hc], [fm.ids[i] for i in hc], [fm.ages[i] for i in hc], j,
                              fm.names[j], out / f"age_scatter_{j:03d}.csv", stamp(args))


def _select(args, fm, out, prefix=""):
    from .fselect import ALGORITHMS, selection_protocol, write_ranking_csv, write_tally_csv
    tallies, final = selection_protocol(fm.values, fm.y, seed=args.seed, reps=args.reps,
                                        folds=args.folds, top_k=args.top_k)
    write_ranking_csv(list(final.values()), fm.names, out / f"{prefix}rankings.csv", stamp(args))
    for alg, tally in tallies.items():
        write_tally_csv(tally, fm.names, out / f"{prefix}tally_{alg}.csv", stamp(args))
    return final


def cmd_select(args):
    fm = _load_features(args)
    _select(args, fm, _out_dir(args.out_dir))


def cmd_train(args):
    from .classify import fit_medians, impute, rf_train
    fm = _load_features(args)
    cols = _subset_from_rankings(args, fm.values.shape[1])
    cols = np.arange(fm.values.shape[1]) if cols is None else cols
    X = fm.values[:, cols]
    med = fit_medians(X)
    model = rf_train(impute(X, med), fm.y, n_trees=args.n_trees, mtry=args.mtry,
                     seed=args.seed, threads=args.threads)
    model.medians = med
    model.meta = {"features": [int(c) for c in cols], "names": [fm.names[c] for c in cols],
                  "config_hash": args.config_hash, "seed": args.seed}
    with open(args.out, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")


def cmd_predict(args):
    from .classify import ForestModel, impute, rf_predict
    if not os.path.isfile(args.model):
        raise InputError(f"model file not found: {args.model}")
    with open(args.model) as fh:
        model = ForestModel.from_json(fh.read())
    from .dysphonia import read_feature_csv
    fm = read_feature_csv(args.features)
    names = model.meta.get("names")
    if names:
        missing = [n for n in names if n not in fm.names]
        if missing:
            raise InputError(f"feature file lacks {len(missing)} model features, e.g. {missing[0]}")
        cols = [fm.names.index(n) for n in names]
    else:
        cols = list(range(fm.values.shape[1]))
    X = fm.values[:, cols]
    if model.medians is not None:
        X = impute(X, model.medians)
    cls, prob, tie = rf_predict(model, X)
    with open(args.out, "w") as fh:
        fh.write(f"# {stamp(args)}\n")
        fh.write("id,predicted,probability_pd,tie\n")
        for i, rid in enumerate(fm.ids):
            fh.write(f"{rid},{'PD' if cls[i] else 'HC'},{repr(float(prob[i]))},{int(tie[i])}\n")


def _cv_kwargs(args):
    return dict(reps=args.reps, folds=args.folds, seed=args.seed, grouping=args.grouping,
                n_trees=args.n_trees, mtry=args.mtry, threads=args.threads)


def _groups(args, fm):
    if args.grouping != "participant":
        return None
    # ids of the form <participant>_<take>; the part before the last '_' names the participant
    return np.array([rid.rsplit("_", 1)[0] for rid in fm.ids])


def cmd_eval(args):
    from .eval import cross_validate, summary_table, write_json
    fm = _load_features(args)
    cols = _subset_from_rankings(args, fm.values.shape[1])
    rep = cross_validate(fm.values, fm.y, features=cols, model=args.model_type,
                         groups=_groups(args, fm), config={"cohort": args.cohort},
                         **_cv_kwargs(args))
    doc = rep.to_dict()
    doc.update(config_hash=args.config_hash, seed=args.seed, version=__version__,
               summary=summary_table({args.model_type: rep}))
    write_json(doc, args.out)


def _sizes(args, n_features):
    if args.sizes:
        return args.sizes
    from .eval import DEFAULT_SIZES
    sizes = [s for s in DEFAULT_SIZES if s <= n_features]
    if n_features not in sizes:
        sizes.append(n_features)
    return sizes


def cmd_sweep(args):
    from .eval import feature_sweep, write_sweep_csv
    from .fselect import read_ranking_csv
    fm = _load_features(args)
    if not args.rankings or not os.path.isfile(args.rankings):
        raise InputError(f"ranking file not found: {args.rankings}")
    ranks = read_ranking_csv(args.rankings)
    res = feature_sweep(fm.values, fm.y, ranks, _sizes(args, fm.values.shape[1]),
                        groups=_groups(args, fm), **_cv_kwargs(args))
    write_sweep_csv(res, args.out, stamp(args))


def _pipeline_section(args, fm, out, prefix):
    from .eval import cross_validate, feature_sweep, summary_table, write_sweep_csv
    final = _select(args, fm, out, prefix)
    sizes = _sizes(args, fm.values.shape[1])
    kw = _cv_kwargs(args)
    groups = _groups(args, fm)
    sweep = feature_sweep(fm.values, fm.y, final, sizes, groups=groups, **kw)
    write_sweep_csv(sweep, out / f"{prefix}sweep.csv", stamp(args))
    # best (algorithm, size) by mean balanced accuracy; ties go to fewer features
    best = max(sweep, key=lambda k: (sweep[k].aggregate["balanced_accuracy"]["mean"], -k[1]))
    cols = final[best[0]].order[:best[1]]
    reports = {"RF": sweep[best]}
    reports["NB"] = cross_validate(fm.values, fm.y, features=cols, model="nb", groups=groups, **kw)
    reports["random"] = cross_validate(fm.values, fm.y, features=cols, model="random",
                                       groups=groups, **kw)
    return {
        "rows": len(fm), "pd": int(fm.y.sum()), "hc": int(len(fm) - fm.y.sum()),
        "best": {"algorithm": best[0], "n_features": best[1],
                 "features": [fm.names[int(c)] for c in cols]},
        "summary": summary_table(reports),
        "aggregate": {k: r.aggregate for k, r in reports.items()},
        "sweep": {f"{a}:{s}": r.aggregate for (a, s), r in sweep.items()},
    }


def cmd_pipeline(args):
    from .eval import write_json
    out = _out_dir(args.out_dir)
    if args.metadata and not args.features:
        from .dysphonia import extract_matrix, write_feature_csv
        fm_all = extract_matrix(_gated_recordings(args), threads=args.threads)
        args.features = str(out / "features.csv")
        write_feature_csv(fm_all, args.features, stamp(args))
    cohorts = ["all", "female", "male"] if args.cohort == "split" else [args.cohort]
    doc = {"config_hash": args.config_hash, "seed": args.seed, "version": __version__,
           "config": {k: v for k, v in sorted(vars(args).items())
                      if k not in UNHASHED_KEYS and k not in INPUT_KEYS and not callable(v)},
           "cohorts": {}}
    for cohort in cohorts:
        args.cohort = cohort
        fm = _load_features(args)
        prefix = "" if len(cohorts) == 1 else f"{cohort}_"
        doc["cohorts"][cohort] = _pipeline_section(args, fm, out, prefix)
    write_json(doc, out / "report.json")


# -- parser -----------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="vocalscreen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vocalscreen {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="key = value file of option defaults")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.set_defaults(func=func)
        return sp

    def features(sp):
        sp.add_argument("--features", help="feature matrix CSV")
        sp.add_argument("--cohort", choices=("all", "female", "male"), default="all")

    def cv(sp):
        sp.add_argument("--reps", type=int, default=10)
        sp.add_argument("--folds", type=int, default=10)
        sp.add_argument("--grouping", choices=("recording", "participant"), default="recording")
        sp.add_argument("--n-trees", type=int, default=500)
        sp.add_argument("--mtry", type=int, default=None)

    def subset(sp):
        sp.add_argument("--rankings", help="ranking CSV from 'select'")
        sp.add_argument("--algorithm", default="Ensemble",
                        choices=("mRMR", "GSO", "RELIEF", "LASSO", "Ensemble"))
        sp.add_argument("--n-features", type=int, default=None)

    sp = add("synth", cmd_synth, "synthesize one phonation")
    sp.add_argument("--spec", default="", help="e.g. 'f0=120,jitter=2,shimmer=6,hnr=10'")
    sp.add_argument("--duration", type=float, default=None)
    sp.add_argument("--id", default="synth")
    sp.add_argument("--label", choices=("PD", "HC"), default="HC")
    sp.add_argument("--age", type=float, default=None)
    sp.add_argument("--sex", choices=("F", "M", "Unknown"), default="Unknown")
    sp.add_argument("--out", required=True, help="output WAV")
    sp.add_argument("--metadata", help="metadata CSV to write (default: next to the WAV)")

    sp = add("synth-cohort", cmd_synth_cohort, "synthesize PD-like and HC-like cohorts")
    sp.add_argument("--n", type=int, default=100, help="recordings per class")
    sp.add_argument("--pd-spec", default="")
    sp.add_argument("--hc-spec", default="")
    sp.add_argument("--spread", type=float, default=0.25)
    sp.add_argument("--out-dir", required=True)

    sp = add("extract", cmd_extract, "compute the feature matrix")
    sp.add_argument("--metadata", required=True)
    sp.add_argument("--min-duration", type=float, default=2.0)
    sp.add_argument("--out", required=True)

    sp = add("pitch", cmd_pitch, "F0 contour of one WAV")
    sp.add_argument("--wav", required=True)
    sp.add_argument("--f0-min", type=float, default=70.0)
    sp.add_argument("--f0-max", type=float, default=400.0)
    sp.add_argument("--threshold", type=float, default=0.3)
    sp.add_argument("--out", required=True)

    sp = add("stats", cmd_stats, "correlations, mutual information, rank tests, age association")
    features(sp)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--out-dir", required=True)

    sp = add("select", cmd_select, "feature-selection protocol")
    features(sp)
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--top-k", type=int, default=100)
    sp.add_argument("--out-dir", required=True)

    sp = add("train", cmd_train, "train a Random Forest")
    features(sp)
    subset(sp)
    sp.add_argument("--n-trees", type=int, default=500)
    sp.add_argument("--mtry", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = add("predict", cmd_predict, "apply a trained forest")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "balanced cross-validation")
    features(sp)
    cv(sp)
    subset(sp)
    sp.add_argument("--model-type", choices=("rf", "nb", "random"), default="rf")
    sp.add_argument("--out", required=True)

    sp = add("sweep", cmd_sweep, "accuracy versus number of selected features")
    features(sp)
    cv(sp)
    sp.add_argument("--rankings", required=True)
    sp.add_argument("--sizes", type=_ints, default=None)
    sp.add_argument("--out", required=True)

    sp = add("pipeline", cmd_pipeline, "select, sweep and cross-validate end to end")
    sp.add_argument("--features", help="feature matrix CSV (or give --metadata)")
    sp.add_argument("--metadata", help="extract features from these recordings first")
    sp.add_argument("--min-duration", type=float, default=2.0)
    sp.add_argument("--cohort", choices=("all", "female", "male", "split"), default="all")
    cv(sp)
    sp.add_argument("--top-k", type=int, default=100)
    sp.add_argument("--sizes", type=_ints, default=None)
    sp.add_argument("--out-dir", required=True)
    return p


def _scan_config(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _convert(act, key, text):
    if isinstance(act, argparse._StoreTrueAction):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"config key {key}: expected true/false, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    try:
        val = act.type(text) if act.type else text
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"config key {key}: {exc}") from exc
    if act.choices and val not in act.choices:
        raise UsageError(f"config key {key}: {text!r} not in {list(act.choices)}")
    return val


def parse_args(argv):
    argv = list(argv)
    parser = build_parser()
    choices = parser._subparsers._group_actions[0].choices
    cfg_path = _scan_config(argv)
    command = next((a for a in argv if a in choices), None)
    if cfg_path and command:
        if not os.path.isfile(cfg_path):
            raise UsageError(f"config file not found: {cfg_path}")
        sub = choices[command]
        known = {a.dest: a for a in sub._actions}
        cfg = read_config(cfg_path)
        unknown = sorted(set(cfg) - set(known) | {k for k in cfg if k in ("help", "config")})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {k: _convert(known[k], k, v) for k, v in cfg.items()}
        sub.set_defaults(**defaults)
        for a in sub._actions:
            if a.dest in defaults:
                a.required = False
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    args.config_hash = config_hash(args)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"vocalscreen: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except VocalScreenError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        log.error("%s", exc)
        return 2
    except FloatingPointError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
