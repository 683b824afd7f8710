"""Command-line entry point: ``chomp <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChompError, ConfigError, FormatError
from .synth import derive_seed

RUN_MANIFEST = "run_manifest.json"
ALIGNMENT_DIR = "alignment"
VOLATILE_KEYS = ("started_at", "wall_time_s")  # excluded when comparing runs


def _csv(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out: Path, args, config: dict, seeds: dict, t_start: float, inputs=(), outputs=()) -> None:
    target = out if out.suffix == "" else out.parent
    manifest = {
        "command": args.command,
        "argv": list(args.argv),
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t_start)),
        "wall_time_s": round(time.time() - t_start, 3),
    }
    name = RUN_MANIFEST if out.suffix == "" else f"{out.stem}.{RUN_MANIFEST}"
    _dump_json(manifest, target / name)


def _write_report(report: dict, path: Path) -> None:
    from .reporting import render

    _dump_json(report, path)
    path.with_suffix(".txt").write_text(render(report), encoding="utf-8")


# --- subcommands -----------------------------------------------------------------------------


def cmd_synth(args) -> dict:
    from .io import save_recording
    from .synth import generate_alignment_recording, generate_corpus

    seed = derive_seed(args.seed, "synth")
    out = Path(args.out)
    kw = dict(duration=args.duration, asymmetry_db=args.asymmetry_db, units=tuple(_csv(args.units)),
              clock_offset=args.clock_offset)
    recs = generate_corpus(args.subjects, args.foods, seed, out_dir=out, **kw)
    if args.clock_offset:
        for sid in sorted({r.subject_id for r in recs}):
            rec = generate_alignment_recording(args.clock_offset, seed, sid)
            save_recording(rec, out / ALIGNMENT_DIR / sid)
    return {"config": {**kw, "units": list(kw["units"]), "subjects": args.subjects, "foods": args.foods},
            "seeds": {"synth": seed}, "outputs": [out]}


def cmd_sync(args) -> dict:
    from .io import load_recording, save_recording
    from .sync import align_recording, estimate_recording_offset

    rec = load_recording(args.recording)
    est = estimate_recording_offset(load_recording(args.alignment), max_lag=args.max_lag, sigma=args.sigma)
    aligned = align_recording(rec, est)
    extra = dict(aligned.extra, sync_peak=repr(est.peak_value), sync_lag=str(est.lag_index))
    save_recording(replace(aligned, extra=extra), args.out)
    print(f"offset {est.offset:+.6f} s (lag {est.lag_index} samples)")
    return {"config": {"max_lag": args.max_lag, "sigma": args.sigma, "offset": est.offset},
            "inputs": [args.recording, args.alignment], "outputs": [args.out]}


def _load_corpus(root: Path):
    from .io import iter_session_dirs, load_recording

    dirs = iter_session_dirs(root)
    if not dirs:
        raise FormatError(f"{root}: no session directories")
    align_root = root / ALIGNMENT_DIR
    alignments = {}
    if align_root.is_dir():
        for d in iter_session_dirs(align_root):
            rec = load_recording(d)
            alignments[rec.subject_id] = rec
    return [load_recording(d) for d in dirs], alignments


def cmd_preprocess(args) -> dict:
    from .dataset import windows_to_set
    from .pipeline import prepare_recording, recording_windows

    root = Path(args.inp)
    recs, alignments = _load_corpus(root)
    kinds = _csv(args.units)
    collected: dict = {}
    for rec in sorted(recs, key=lambda r: r.session_id):
        prepared = prepare_recording(rec, kinds, alignments.get(rec.subject_id))
        for k, ws in recording_windows(prepared, kinds).items():
            collected.setdefault(k, []).extend(ws)
    ws = windows_to_set(collected)
    ws.save(args.out, "windows")
    print(f"{len(ws)} windows x {len(ws.units)} units -> {args.out}")
    return {"config": {"units": kinds, "aligned_subjects": sorted(alignments)}, "inputs": [root],
            "outputs": [args.out]}


def cmd_scalogram(args) -> dict:
    from .dataset import SensorSet
    from .pipeline import build_scalogram_set

    ws = SensorSet.load(args.inp, "windows", _csv(args.unit) if args.unit else None)
    sc = build_scalogram_set(ws)
    sc.save(args.out, "scalograms")
    shapes = {k.value: list(a.shape[1:]) for k, a in sc.arrays.items()}
    print(f"{len(sc)} scalograms: " + ", ".join(f"{k} {tuple(v)}" for k, v in shapes.items()))
    return {"config": {"units": list(shapes), "shapes": shapes}, "inputs": [args.inp], "outputs": [args.out]}


def _rf_config(args):
    from .baseline import RfConfig

    return RfConfig(n_estimators=args.n_estimators, seed=args.rf_seed)


def _baseline_report(args) -> dict:
    from .dataset import SensorSet
    from .pipeline import run_baseline_protocol

    ws = SensorSet.load(args.inp, "windows", [args.unit])
    seed = derive_seed(args.seed, "eval")
    rep = run_baseline_protocol(ws, args.unit, args.protocol, _rf_config(args), seed)
    return {"protocol": args.protocol, "model": "baseline", "unit": args.unit, "results": {args.unit: rep.as_dict()}}


def cmd_baseline(args) -> dict:
    report = _baseline_report(args)
    _write_report(report, Path(args.report))
    print(f"{args.unit} baseline {args.protocol}: median F1 {report['results'][args.unit]['median_f1']:.4f}")
    return {"config": {"unit": args.unit, "protocol": args.protocol, "n_estimators": args.n_estimators,
                       "rf_seed": args.rf_seed},
            "seeds": {"eval": derive_seed(args.seed, "eval")}, "inputs": [args.inp], "outputs": [args.report]}


def _train_config(args):
    from .model import TrainConfig

    return TrainConfig(max_epochs_single=args.max_epochs, max_epochs_fusion=args.max_epochs_fusion,
                       patience=args.patience, seed=derive_seed(args.seed, "train"))


def cmd_train(args) -> dict:
    import torch

    from .dataset import SensorSet
    from .evaluation import Fold
    from .model import train_fusion, train_single
    from .model.checkpoint import save_checkpoint
    from .pipeline import fold_sets

    if bool(args.unit) == bool(args.fuse):
        raise ConfigError("give exactly one of --unit or --fuse")
    units = _csv(args.fuse) if args.fuse else [args.unit]
    data = SensorSet.load(args.data, "scalograms", units)
    cfg = _train_config(args)
    split_seed = derive_seed(args.seed, "eval")
    out = Path(args.out)
    if args.protocol == "none":
        idx = np.arange(len(data))
        folds = [(Fold("all", idx, idx[:0]), data, data.subset(idx[:0]))]
    else:
        folds = list(fold_sets(data, args.protocol, split_seed))
    summary = {}
    for fold, train, _ in folds:
        torch.manual_seed(cfg.seed)
        train = train.standardized()
        singles = []
        for u in units:
            res = train_single(train.inputs([u])[0], train.labels, u, cfg)
            singles.append(res.model)
            if not args.fuse:
                model, hist = res.model, res.history
        if args.fuse:
            res = train_fusion(train.inputs(units), train.labels, units, singles, cfg)
            model, hist = res.model, res.history
        meta = {"fold": fold.key, "protocol": args.protocol, "units": units, "seed": cfg.seed,
                "best_epoch": res.best_epoch, "best_val_loss": res.best_val_loss, "epochs_run": res.epochs_run,
                "history": hist, "test_window_ids": [str(w) for w in data.meta.window_ids[fold.test]]}
        save_checkpoint(model, out / f"fold_{fold.key}", meta)
        summary[fold.key] = {"best_epoch": res.best_epoch, "epochs_run": res.epochs_run}
        print(f"fold {fold.key}: best epoch {res.best_epoch} of {res.epochs_run}")
    _dump_json({"protocol": args.protocol, "units": units, "fuse": bool(args.fuse), "data": str(args.data),
                "split_seed": split_seed, "folds": sorted(summary)}, out / "training.json")
    return {"config": {"units": units, "fuse": bool(args.fuse), "protocol": args.protocol,
                       "train": asdict(cfg), "folds": summary},
            "seeds": {"train": cfg.seed, "split": split_seed}, "inputs": [args.data], "outputs": [out]}


def _model_report(args) -> dict:
    from .dataset import SensorSet
    from .evaluation import aggregate, score_fold
    from .model.checkpoint import load_checkpoint
    from .model.training import predict
    from .pipeline import fold_sets, protocol_notes

    ckpt = Path(args.model)
    info_path = ckpt / "training.json"
    if not info_path.exists():
        raise FormatError(f"{ckpt}: not a training output (no training.json)")
    info = json.loads(info_path.read_text())
    if info["protocol"] != args.protocol:
        raise ConfigError(f"checkpoints were trained for {info['protocol']}, not {args.protocol}")
    data = SensorSet.load(args.data or info["data"], "scalograms", info["units"])
    reports = []
    for fold, _, test in fold_sets(data, args.protocol, info["split_seed"]):
        model, meta = load_checkpoint(ckpt / f"fold_{fold.key}")
        if meta["test_window_ids"] != [str(w) for w in test.meta.window_ids]:
            raise ConfigError(f"fold {fold.key}: test windows differ from the ones held out in training")
        test = test.standardized()
        xs = test.inputs(info["units"])
        preds = predict(model, xs if info["fuse"] else xs[0])
        reports.append(score_fold(preds, test.labels, fold.key))
    name = "fusion" if info["fuse"] else info["units"][0]
    rep = aggregate(reports, protocol_notes(data.meta, args.protocol))
    return {"protocol": args.protocol, "model": name, "units": info["units"], "results": {name: rep.as_dict()}}


def cmd_eval(args) -> dict:
    if bool(args.model) == bool(args.baseline):
        raise ConfigError("give exactly one of --model or --baseline")
    if args.baseline:
        if not args.unit or not args.data:
            raise ConfigError("--baseline needs --unit and --data (a windows directory)")
        args.inp = args.data
        report = _baseline_report(args)
    else:
        report = _model_report(args)
    _write_report(report, Path(args.report))
    for name, rep in report["results"].items():
        print(f"{name} {args.protocol}: median F1 {rep['median_f1']:.4f} ({rep['q1']:.4f}-{rep['q3']:.4f})")
    return {"config": {"protocol": args.protocol, "baseline": args.baseline},
            "inputs": [args.model or args.data], "outputs": [args.report]}


def cmd_simulate(args) -> dict:
    from .cspsim import SimConfig, diagnose, monte_carlo

    cfg = SimConfig(mus=tuple(args.mu), sigma=args.sigma, error_rate=args.error, durations=tuple(args.durations),
                    n_draws=args.draws, windows_per_minute=args.windows_per_minute,
                    seed=derive_seed(args.seed, "cspsim"))
    rep = monte_carlo(cfg)
    diag = diagnose(rep)
    report = {**rep.as_dict(), "diagnosis": diag.as_dict()}
    if args.out:
        _write_report(report, Path(args.out))
    from .reporting import render

    sys.stdout.write(render(report))
    return {"config": report["config"], "seeds": {"cspsim": cfg.seed}, "outputs": [args.out] if args.out else []}


def cmd_report(args) -> dict:
    from .reporting import render

    path = Path(args.inp)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    text = render(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return {"config": {}, "inputs": [path], "outputs": [args.out] if args.out else []}


# --- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chomp", description="Chewing-side detection pipeline.")
    p.add_argument("--version", action="version", version=f"chomp {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--seed", type=int, default=0, help="single source of randomness")
        sp.add_argument("--threads", type=int, default=None, help="cap on compute threads")
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic corpus")
    sp.add_argument("--subjects", type=int, required=True)
    sp.add_argument("--foods", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--duration", type=float, default=30.0, help="session length in seconds")
    sp.add_argument("--asymmetry-db", type=float, default=6.0)
    sp.add_argument("--units", default="mic,bone,imu,pressure,ppg")
    sp.add_argument("--clock-offset", type=float, default=0.0,
                    help="right-minus-left clock offset; also writes alignment recordings")

    sp = add("sync", cmd_sync, "align a recording with its alignment-signal recording")
    sp.add_argument("--recording", required=True)
    sp.add_argument("--alignment", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-lag", type=float, default=2.0)
    sp.add_argument("--sigma", type=float, default=2.0)

    sp = add("preprocess", cmd_preprocess, "filter and window a corpus")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--units", default="mic,bone,imu,ppg,pressure")

    sp = add("scalogram", cmd_scalogram, "CWT log-power scalograms of windows")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--unit", default=None, help="unit or comma list (default: all in the input)")

    def rf_flags(sp):
        sp.add_argument("--n-estimators", type=int, default=100)
        sp.add_argument("--rf-seed", type=int, default=42)

    sp = add("baseline", cmd_baseline, "feature + random forest baseline under LOSO/LOFO")
    sp.add_argument("--unit", required=True)
    sp.add_argument("--protocol", choices=("lofo", "loso"), required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--report", required=True)
    rf_flags(sp)

    sp = add("train", cmd_train, "train per-fold CNN checkpoints")
    sp.add_argument("--unit", default=None)
    sp.add_argument("--fuse", default=None, help="comma list of units to fuse")
    sp.add_argument("--protocol", choices=("lofo", "loso", "none"), required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-epochs", type=int, default=100)
    sp.add_argument("--max-epochs-fusion", type=int, default=30)
    sp.add_argument("--patience", type=int, default=20)

    sp = add("eval", cmd_eval, "score checkpoints or the baseline per fold")
    sp.add_argument("--protocol", choices=("lofo", "loso"), required=True)
    sp.add_argument("--model", default=None)
    sp.add_argument("--baseline", action="store_true")
    sp.add_argument("--unit", default=None)
    sp.add_argument("--data", default=None)
    sp.add_argument("--report", required=True)
    rf_flags(sp)

    sp = add("simulate", cmd_simulate, "Monte Carlo chewing-side-preference diagnosis")
    sp.add_argument("--mu", type=_floats, default=[0.60, 0.65, 0.70])
    sp.add_argument("--error", type=float, default=0.046)
    sp.add_argument("--sigma", type=float, default=0.05)
    sp.add_argument("--durations", type=_floats, default=[1.0, 5.0, 15.0])
    sp.add_argument("--draws", type=int, default=10_000)
    sp.add_argument("--windows-per-minute", type=int, default=59)
    sp.add_argument("--out", default=None)

    sp = add("report", cmd_report, "render a JSON report as text")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", default=None)
    return p


def _manifest_dir(args, outcome: dict) -> Path | None:
    outs = [Path(o) for o in outcome.get("outputs", []) if o]
    return outs[0] if outs else None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 for --help/--version
        return int(exc.code or 0)
    args.argv = argv
    if args.threads:
        import torch

        torch.set_num_threads(args.threads)
    t_start = time.time()
    try:
        outcome = args.func(args)
    except ChompError as exc:
        print(f"chomp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"chomp {args.command}: IOError: {exc}", file=sys.stderr)
        return 1
    target = _manifest_dir(args, outcome)
    if target is not None:
        _write_manifest(target, args, outcome.get("config", {}), outcome.get("seeds", {"base": args.seed}),
                        t_start, outcome.get("inputs", ()), outcome.get("outputs", ()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
