"""Command-line surface: dataset generation, training, sampling, evaluation.

Subcommands
    gen-data   build a synthetic 2D dataset (+ sealed 3D sidecar + manifest)
    train      train the denoiser on a dataset, write checkpoint + loss curve
    sample     generate motions from a checkpoint (mas | sds | ancestral2d)
    eval       score generated motions against a reference dataset
    ablate     sweep one sampler knob and emit a table of metric rows

Configuration precedence is CLI flag > config file > built-in default. Config
files are YAML mappings whose keys are the flag names with underscores;
nested mappings flatten with underscores (``sds: {step_size: 0.1}`` means
``sds_step_size``). Unknown keys are rejected with the offending field named,
and YAML syntax errors are reported with their line and column.

Every command writes a run manifest JSON beside its outputs: the resolved
config, seeds, package/format versions, input and output content hashes, and
wall time — enough to re-execute the run and get byte-identical outputs.

Exit codes are 0 on success and a distinct nonzero code per error class (see
EXIT_CODES); failures print one machine-parsable line to stderr of the form
``mvas-error: code=<n> class=<Name> message="..."``.

The MVAS_DATA_DIR environment variable sets the directory that default output
paths land in (default: current directory).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import __version__
from . import diffusion as dfn
from . import errors as err
from . import evaluation as ev
from . import synthdata as sd
from .denoiser import (
    CHECKPOINT_VERSION,
    Architecture,
    TrainConfig,
    build_denoiser,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .mas import MasConfig, mas_sample
from .sds import SdsConfig, sds_generate

EXIT_CODES = {
    err.BadConfig: 2,
    OSError: 3,
    err.VersionMismatch: 4,
    err.CorruptChecksum: 5,
    err.ShapeMismatch: 6,
    err.InsufficientSamples: 7,
    err.NonFiniteState: 8,
    err.DegenerateGeometry: 9,
    err.MissingTrace: 10,
    err.DataEmpty: 11,
    err.EmptyBatch: 12,
    err.NonFiniteLoss: 13,
    err.DivergedTriangulation: 14,
    err.TooShort: 15,
    err.BadFamily: 16,
    err.BadArchitecture: 17,
    err.StepOutOfRange: 18,
    err.NonPositiveDepth: 19,
    err.BadRing: 20,
    err.ConventionViolation: 21,
}

_SWEEP_PRESETS = {
    "views": (2, 3, 5, 9),
    "steps": (20, 50, 100),
    "distance": (2.0, 3.0, 7.0, 30.0),
}


def _data_dir() -> str:
    return os.environ.get("MVAS_DATA_DIR", ".")


def _hash_file(path) -> str:
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_manifest(path, command: str, config: dict, seeds: dict,
                        inputs: list, outputs: list, wall_time: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "versions": {
            "package": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "dataset_format": sd.DATA_VERSION,
            "checkpoint_format": CHECKPOINT_VERSION,
        },
        "inputs": {str(p): _hash_file(p) for p in inputs},
        "outputs": {str(p): _hash_file(p) for p in outputs},
        "wall_time_s": round(wall_time, 3),
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# --- config resolution ---------------------------------------------------------

def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}".replace("-", "_")
        if isinstance(v, dict):
            out.update(_flatten(v, key + "_"))
        else:
            out[key] = v
    return out


def _load_config_file(path, allowed: set) -> dict:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise err.BadConfig(f"config {path}: invalid YAML{where}: {e.args[0] if e.args else e}")
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise err.BadConfig(f"config {path}: top level must be a mapping, got {type(raw).__name__}")
    flat = _flatten(raw)
    unknown = sorted(set(flat) - allowed)
    if unknown:
        raise err.BadConfig(f"config {path}: unknown field '{unknown[0]}' "
                            f"(allowed: {', '.join(sorted(allowed))})")
    return flat


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    cli = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config, set(defaults)))
    cfg.update(cli)  # argparse.SUPPRESS keeps unspecified flags out of vars()
    return cfg


def _jsonable(v):
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# --- gen-data -------------------------------------------------------------------

GEN_DEFAULTS = {
    "out": None, "count": 1000, "family": "mixed", "seed": 0,
    "with_object": False, "noise_sigma": 0.0, "dropout": 0.0,
    "pitch": 0.2, "distance": 7.0, "focal": None,
    "yaw_low": 0.0, "yaw_high": 2.0 * np.pi,
    "min_frames": 32, "max_frames": 128,
}


def cmd_gen_data(args) -> int:
    t0 = time.monotonic()
    cfg = _resolve(args, GEN_DEFAULTS)
    out = cfg["out"] or os.path.join(_data_dir(), "dataset.mvd")
    skel = sd.default_skeleton(with_object=cfg["with_object"])
    fam = sd.family_params(cfg["family"],
                           length_range=(cfg["min_frames"], cfg["max_frames"]))
    cam = sd.CameraDistParams(pitch=cfg["pitch"], distance=cfg["distance"],
                              focal=cfg["focal"], yaw_low=cfg["yaw_low"],
                              yaw_high=cfg["yaw_high"])
    built = sd.build_dataset(skel, fam, cfg["count"], cam, seed=cfg["seed"])
    if cfg["noise_sigma"] > 0 or cfg["dropout"] > 0:
        built = sd.apply_corruption(built, cfg["noise_sigma"], cfg["dropout"],
                                    seed=cfg["seed"])
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    sidecar, mtext = out + ".3d", out + ".manifest"
    sd.save_dataset(out, built)
    sd.save_sidecar(sidecar, built)
    sd.write_manifest_text(mtext, built.manifest)
    report = sd.audit(out)
    _write_run_manifest(out + ".run.json", "gen-data",
                        {k: _jsonable(v) for k, v in cfg.items()},
                        {"master": cfg["seed"]}, [], [out, sidecar, mtext],
                        time.monotonic() - t0)
    print(f"wrote {out} ({report['count']} records, J={built.manifest.J}), "
          f"sidecar and manifest alongside; audit ok")
    return 0


# --- train -----------------------------------------------------------------------

TRAIN_DEFAULTS = {
    "data": None, "out": None, "steps": 3000, "learning_rate": 2e-3,
    "batch_size": 16, "seed": 0, "diffusion_steps": 100,
    "hidden": 192, "layers": 4, "radius": 4, "temb": 16, "resume": None,
}


def cmd_train(args) -> int:
    t0 = time.monotonic()
    cfg = _resolve(args, TRAIN_DEFAULTS)
    if not cfg["data"]:
        raise err.BadConfig("train requires --data")
    out = cfg["out"] or os.path.join(_data_dir(), "model.ckpt")
    ds = sd.load_dataset(cfg["data"])
    sched = dfn.cosine_schedule(cfg["diffusion_steps"])
    if cfg["resume"]:
        d = load_checkpoint(cfg["resume"], sched)
    else:
        arch = Architecture(hidden=cfg["hidden"], layers=cfg["layers"],
                            context_radius=cfg["radius"], temb_dim=cfg["temb"])
        d = build_denoiser(ds.manifest.J, arch, seed=cfg["seed"])
    tc = TrainConfig(learning_rate=cfg["learning_rate"], steps=cfg["steps"],
                     batch_size=cfg["batch_size"], seed=cfg["seed"])
    d, losses = train(d, ds, tc, sched)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    save_checkpoint(d, out)
    curve = out + ".loss.csv"
    with open(curve, "w") as f:
        f.write("step,loss\n")
        start = d.trained_steps - len(losses)
        for i, v in enumerate(losses):
            f.write(f"{start + i + 1},{float(v)!r}\n")
    inputs = [cfg["data"]] + ([cfg["resume"]] if cfg["resume"] else [])
    _write_run_manifest(out + ".run.json", "train",
                        {k: _jsonable(v) for k, v in cfg.items()},
                        {"master": cfg["seed"]}, inputs, [out, curve],
                        time.monotonic() - t0)
    print(f"wrote {out} (trained_steps={d.trained_steps}); "
          f"loss {losses[:20].mean():.4f} -> {losses[-20:].mean():.4f}")
    return 0


# --- sample ----------------------------------------------------------------------

SAMPLE_DEFAULTS = {
    "checkpoint": None, "method": "mas", "n": 10, "out": None, "frames": 64,
    "seed": 0, "views": 5, "elevation": 0.2, "distance": 7.0, "focal": None,
    "x0_clamp": 8.0, "no_3d_noise": False, "keep_trace": False,
    "jobs": 1, "json": False,
    "sds_iterations": 200, "sds_step_size": 0.05, "sds_init_scale": 0.5,
}

_WORKER: dict = {}


def _sample_one(model, cfg: dict, index: int):
    """One generated motion; the seed is derived from (master seed, index) so
    results are independent of --jobs and of completion order."""
    master = cfg["seed"]
    seed = (list(master) if isinstance(master, (list, tuple)) else [master]) + [index]
    T = model.schedule_T
    if cfg["method"] == "mas":
        mc = MasConfig(n_views=cfg["views"], elevation=cfg["elevation"],
                       camera_distance=cfg["distance"], focal=cfg["focal"],
                       T=T, seed=seed, x0_clamp=cfg["x0_clamp"],
                       keep_history=cfg["keep_trace"],
                       shared_noise=not cfg["no_3d_noise"])
        X, trace = mas_sample(model, cfg["frames"], mc)
        return X, trace
    if cfg["method"] == "sds":
        sc = SdsConfig(iterations=cfg["sds_iterations"],
                       step_size=cfg["sds_step_size"],
                       init_scale=cfg["sds_init_scale"],
                       elevation=cfg["elevation"], camera_distance=cfg["distance"],
                       focal=cfg["focal"], T=T, seed=seed)
        return sds_generate(model, cfg["frames"], sc), None
    if cfg["method"] == "ancestral2d":
        sched = dfn.cosine_schedule(T)
        return dfn.ancestral_sample_2d(model, cfg["frames"], sched, seed), None
    raise err.BadConfig(f"unknown method {cfg['method']!r}")


def _worker_init(ckpt_path):
    _WORKER["model"] = load_checkpoint(ckpt_path)


def _worker_run(task):
    cfg, index = task
    X, _ = _sample_one(_WORKER["model"], cfg, index)
    return index, X


def generate_motions(model, cfg: dict) -> tuple[list, list]:
    """The sample loop shared by cmd_sample and cmd_ablate (single process)."""
    motions, traces = [], []
    for i in range(cfg["n"]):
        X, trace = _sample_one(model, cfg, i)
        motions.append(X)
        traces.append(trace)
    return motions, traces


def _save_motion(path, motion, as_json: bool):
    if as_json:
        with open(path + ".json", "w") as f:
            json.dump(motion.tolist(), f)
        return path + ".json"
    sd.save_motions(path, [motion])
    return path


def cmd_sample(args) -> int:
    t0 = time.monotonic()
    cfg = _resolve(args, SAMPLE_DEFAULTS)
    if not cfg["checkpoint"]:
        raise err.BadConfig("sample requires --checkpoint")
    if cfg["n"] < 1 or cfg["jobs"] < 1:
        raise err.BadConfig("n and jobs must be >= 1")
    if cfg["keep_trace"] and cfg["method"] != "mas":
        raise err.BadConfig("--keep-trace only applies to method=mas")
    out_dir = cfg["out"] or os.path.join(_data_dir(), "samples")
    os.makedirs(out_dir, exist_ok=True)
    model = load_checkpoint(cfg["checkpoint"])
    ext = ".mv2" if cfg["method"] == "ancestral2d" else ".mv3"

    outputs = []
    if cfg["jobs"] > 1 and cfg["n"] > 1 and not cfg["keep_trace"]:
        tasks = [(cfg, i) for i in range(cfg["n"])]
        with ProcessPoolExecutor(max_workers=cfg["jobs"], initializer=_worker_init,
                                 initargs=(cfg["checkpoint"],)) as pool:
            results = dict(pool.map(_worker_run, tasks))
        motions = [results[i] for i in range(cfg["n"])]
        traces = [None] * cfg["n"]
    else:
        motions, traces = generate_motions(model, cfg)

    for i, (X, trace) in enumerate(zip(motions, traces)):
        base = os.path.join(out_dir, f"sample_{i:05d}{ext}")
        outputs.append(_save_motion(base, X, cfg["json"]))
        if trace is not None and cfg["keep_trace"]:
            tpath = os.path.join(out_dir, f"sample_{i:05d}.trace.npz")
            np.savez(tpath, xs=np.stack(trace.xs),
                     residual_rms=trace.residual_rms,
                     triang_iters=trace.triang_iters,
                     fallback_points=trace.fallback_points,
                     clamp_counts=trace.clamp_counts,
                     eps3d_init=trace.eps3d_init,
                     eps3d_steps=trace.eps3d_steps)
            outputs.append(tpath)

    _write_run_manifest(os.path.join(out_dir, "run_manifest.json"), "sample",
                        {k: _jsonable(v) for k, v in cfg.items()},
                        {"master": cfg["seed"],
                         "per_sample": [[cfg["seed"], i] for i in range(cfg["n"])]},
                        [cfg["checkpoint"]], outputs, time.monotonic() - t0)
    print(f"wrote {cfg['n']} {cfg['method']} samples to {out_dir}")
    return 0


# --- eval ------------------------------------------------------------------------

EVAL_DEFAULTS = {
    "generated": None, "reference": None, "out": None, "repeats": 10, "k": 3,
    "side_view": False, "seed": 0, "pair_count": 1000, "json": False,
    "pitch": 0.2, "distance": 7.0, "focal": None, "two_d": False,
}


def _load_generated(path) -> list:
    """A motion container file, or a directory of sample_*.mv3/.mv2/.json."""
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path)
                       if n.endswith((".mv2", ".mv3", ".mv2.json", ".mv3.json")))
        if not names:
            raise err.InsufficientSamples(f"no motion files in {path}")
        out = []
        for n in names:
            full = os.path.join(path, n)
            if n.endswith(".json"):
                with open(full) as f:
                    out.append(np.asarray(json.load(f), np.float64))
            else:
                out.extend(sd.load_motions(full))
        return out
    return sd.load_motions(path)


def _eval_report(gen, ref_ds, cfg: dict) -> ev.MetricsReport:
    yaw_band = ev.SIDE_VIEW_BAND if cfg["side_view"] else ev.FULL_YAW_BAND
    common = dict(repeats=cfg["repeats"], k=cfg["k"], seed=cfg["seed"],
                  pair_count=cfg["pair_count"])
    if cfg["two_d"]:
        return ev.evaluate_2d(gen, ref_ds.motions, ref_ds.norm_mean,
                              ref_ds.norm_scale, **common)
    return ev.evaluate_projected(gen, ref_ds.motions, ref_ds.norm_mean,
                                 ref_ds.norm_scale, yaw_band=yaw_band,
                                 pitch=cfg["pitch"], distance=cfg["distance"],
                                 focal=cfg["focal"], **common)


def cmd_eval(args) -> int:
    t0 = time.monotonic()
    cfg = _resolve(args, EVAL_DEFAULTS)
    if not cfg["generated"] or not cfg["reference"]:
        raise err.BadConfig("eval requires --generated and --reference")
    gen = _load_generated(cfg["generated"])
    first_dim = gen[0].shape[-1]
    if cfg["two_d"] != (first_dim == 2):
        raise err.ShapeMismatch(
            f"generated motions have {first_dim} coordinates; "
            f"{'drop' if first_dim == 3 else 'pass'} --two-d")
    ref_ds = sd.load_dataset(cfg["reference"])
    report = _eval_report(gen, ref_ds, cfg)
    out = cfg["out"] or os.path.join(_data_dir(), "eval_report.json")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    inputs = [cfg["reference"]] + (
        [cfg["generated"]] if os.path.isfile(cfg["generated"]) else [])
    _write_run_manifest(out + ".run.json", "eval",
                        {k: _jsonable(v) for k, v in cfg.items()},
                        {"master": cfg["seed"]}, inputs, [out],
                        time.monotonic() - t0)
    print(json.dumps(report.to_dict(), sort_keys=True) if cfg["json"]
          else report.to_text())
    return 0


# --- ablate ----------------------------------------------------------------------

ABLATE_DEFAULTS = {
    "checkpoint": None, "data": None, "axis": "views", "values": None,
    "n": 200, "frames": 64, "repeats": 10, "k": 3, "seed": 0, "out": None,
    "views": 5, "elevation": 0.2, "distance": 7.0, "focal": None,
    "x0_clamp": 8.0, "json": False,
}


def ablation_rows(cfg: dict) -> list:
    """One (value, MetricsReport) row per sweep value; shared reference data."""
    axis = cfg["axis"]
    if axis not in _SWEEP_PRESETS:
        raise err.BadConfig(f"axis must be one of {sorted(_SWEEP_PRESETS)}, got {axis!r}")
    values = cfg["values"] or _SWEEP_PRESETS[axis]
    if axis == "steps" and "{T}" not in cfg["checkpoint"]:
        raise err.BadConfig("a steps sweep needs --checkpoint containing '{T}' "
                            "(one checkpoint per diffusion-step count)")
    ref_ds = sd.load_dataset(cfg["data"])
    rows = []
    for j, v in enumerate(values):
        scfg = dict(cfg, method="mas", no_3d_noise=False, keep_trace=False,
                    sds_iterations=0, seed=[cfg["seed"], j])
        if axis == "views":
            scfg["views"] = int(v)
        elif axis == "distance":
            scfg["distance"] = float(v)
        ckpt = cfg["checkpoint"].replace("{T}", str(int(v))) if axis == "steps" \
            else cfg["checkpoint"]
        model = load_checkpoint(ckpt)
        motions, _ = generate_motions(model, scfg)
        ecfg = dict(cfg, side_view=False, two_d=False, pair_count=1000,
                    pitch=0.2, seed=[cfg["seed"], j, 1])
        ecfg["distance"], ecfg["focal"] = 7.0, None  # evaluation rig stays fixed
        rows.append((v, _eval_report(motions, ref_ds, ecfg)))
    return rows


def cmd_ablate(args) -> int:
    t0 = time.monotonic()
    cfg = _resolve(args, ABLATE_DEFAULTS)
    if not cfg["checkpoint"] or not cfg["data"]:
        raise err.BadConfig("ablate requires --checkpoint and --data")
    if cfg["values"]:
        cfg["values"] = [float(x) for x in str(cfg["values"]).split(",")]
    rows = ablation_rows(cfg)
    out = cfg["out"] or os.path.join(_data_dir(), f"ablation_{cfg['axis']}.json")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    table = [{"axis": cfg["axis"], "value": _jsonable(v), **r.to_dict()}
             for v, r in rows]
    with open(out, "w") as f:
        json.dump(table, f, indent=2, sort_keys=True)
        f.write("\n")
    inputs = [cfg["data"]] + ([cfg["checkpoint"]]
                              if os.path.isfile(cfg["checkpoint"]) else [])
    _write_run_manifest(out + ".run.json", "ablate",
                        {k: _jsonable(v) for k, v in cfg.items()},
                        {"master": cfg["seed"]}, inputs, [out],
                        time.monotonic() - t0)
    if cfg["json"]:
        print(json.dumps(table, sort_keys=True))
    else:
        print(f"{cfg['axis']:>10}  " + ev.MetricsReport.header())
        for v, r in rows:
            print(f"{v!s:>10}  " + r.to_row())
    return 0


# --- parser ----------------------------------------------------------------------

def _add(p, name, default, **kw):
    """Flag with argparse.SUPPRESS default so config-file values can fill in."""
    if isinstance(default, bool):
        p.add_argument(name, action="store_true", default=argparse.SUPPRESS, **kw)
    else:
        kw.setdefault("type", type(default) if default is not None else str)
        p.add_argument(name, default=argparse.SUPPRESS, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mvas",
        description="3D motion generation by multi-view ancestral sampling "
                    "of a 2D motion diffusion model.")
    ap.add_argument("--version", action="version", version=f"mvas {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="build a synthetic 2D dataset")
    g.add_argument("--config", help="YAML config file")
    _add(g, "--out", None, help="dataset path (default $MVAS_DATA_DIR/dataset.mvd)")
    _add(g, "--count", 1000, type=int)
    _add(g, "--family", "mixed", choices=sd.FAMILIES)
    _add(g, "--seed", 0, type=int)
    _add(g, "--with-object", False, help="17th free-floating object joint")
    _add(g, "--noise-sigma", 0.0, type=float)
    _add(g, "--dropout", 0.0, type=float)
    _add(g, "--pitch", 0.2, type=float)
    _add(g, "--distance", 7.0, type=float)
    _add(g, "--focal", None, type=float)
    _add(g, "--yaw-low", 0.0, type=float)
    _add(g, "--yaw-high", 2.0 * np.pi, type=float)
    _add(g, "--min-frames", 32, type=int)
    _add(g, "--max-frames", 128, type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the denoiser")
    t.add_argument("--config", help="YAML config file")
    _add(t, "--data", None, help="dataset path")
    _add(t, "--out", None, help="checkpoint path (default $MVAS_DATA_DIR/model.ckpt)")
    _add(t, "--steps", 3000, type=int)
    _add(t, "--learning-rate", 2e-3, type=float)
    _add(t, "--batch-size", 16, type=int)
    _add(t, "--seed", 0, type=int)
    _add(t, "--diffusion-steps", 100, type=int)
    _add(t, "--hidden", 192, type=int)
    _add(t, "--layers", 4, type=int)
    _add(t, "--radius", 4, type=int)
    _add(t, "--temb", 16, type=int)
    _add(t, "--resume", None, help="continue training from this checkpoint")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="generate motions from a checkpoint")
    s.add_argument("--config", help="YAML config file")
    _add(s, "--checkpoint", None)
    _add(s, "--method", "mas", choices=("mas", "sds", "ancestral2d"))
    _add(s, "--n", 10, type=int)
    _add(s, "--out", None, help="output dir (default $MVAS_DATA_DIR/samples)")
    _add(s, "--frames", 64, type=int)
    _add(s, "--seed", 0, type=int)
    _add(s, "--views", 5, type=int)
    _add(s, "--elevation", 0.2, type=float)
    _add(s, "--distance", 7.0, type=float)
    _add(s, "--focal", None, type=float)
    _add(s, "--x0-clamp", 8.0, type=float)
    _add(s, "--no-3d-noise", False,
         help="independent per-view noise (mode-collapse ablation)")
    _add(s, "--keep-trace", False, help="write per-sample trace .npz files")
    _add(s, "--jobs", 1, type=int, help="parallel sample workers")
    _add(s, "--json", False, help="write motions as lossless JSON text")
    _add(s, "--sds-iterations", 200, type=int)
    _add(s, "--sds-step-size", 0.05, type=float)
    _add(s, "--sds-init-scale", 0.5, type=float)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="score generated motions against a dataset")
    e.add_argument("--config", help="YAML config file")
    _add(e, "--generated", None, help="motion container file or sample dir")
    _add(e, "--reference", None, help="reference dataset path")
    _add(e, "--out", None, help="report path (default $MVAS_DATA_DIR/eval_report.json)")
    _add(e, "--repeats", 10, type=int)
    _add(e, "--k", 3, type=int)
    _add(e, "--side-view", False, help="restrict yaw to the side-view band")
    _add(e, "--seed", 0, type=int)
    _add(e, "--pair-count", 1000, type=int)
    _add(e, "--json", False, help="print the report as JSON")
    _add(e, "--pitch", 0.2, type=float)
    _add(e, "--distance", 7.0, type=float)
    _add(e, "--focal", None, type=float)
    _add(e, "--two-d", False, help="generated motions are 2D (ancestral2d)")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="sweep one sampler knob, emit a metrics table")
    a.add_argument("--config", help="YAML config file")
    _add(a, "--checkpoint", None,
         help="checkpoint path; for --axis steps use a '{T}' placeholder")
    _add(a, "--data", None, help="reference dataset path")
    _add(a, "--axis", "views", choices=sorted(_SWEEP_PRESETS))
    _add(a, "--values", None, help="comma-separated sweep values (default preset)")
    _add(a, "--n", 200, type=int, help="samples per sweep value")
    _add(a, "--frames", 64, type=int)
    _add(a, "--repeats", 10, type=int)
    _add(a, "--k", 3, type=int)
    _add(a, "--seed", 0, type=int)
    _add(a, "--out", None)
    _add(a, "--views", 5, type=int)
    _add(a, "--elevation", 0.2, type=float)
    _add(a, "--distance", 7.0, type=float)
    _add(a, "--focal", None, type=float)
    _add(a, "--x0-clamp", 8.0, type=float)
    _add(a, "--json", False)
    a.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tuple(EXIT_CODES) as e:
        cls = next(c for c in type(e).mro() if c in EXIT_CODES)
        code = EXIT_CODES[cls]
        msg = str(e).replace('"', "'")
        print(f'mvas-error: code={code} class={type(e).__name__} message="{msg}"',
              file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
