"""Command-line entry point: ``spsl <command> ...``.

Every command writes its outputs under ``--out-dir`` (CSV for tables, PNG for
images) and prints a short summary. Errors exit with status 2 and a one-line
message; a failed numeric check exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from spsl import checks
from spsl import net as _net
from spsl.exceptions import SPSLError
from spsl.experiments import (
    ExperimentConfig,
    ablation_matrix,
    depth_sweep,
    evaluate,
    load_dataset,
    phase_fingerprint,
    recipe_groups,
)
from spsl.io import load_checkpoint, read_image, save_checkpoint, write_image, write_rows_csv, write_spectrum_csv
from spsl.spectral import PHASE_MODES, amplitude_only_image, dft2, luminance, make_rgbp, phase_only_image, to_polar
from spsl.synth import CorpusConfig, build_corpus, load_manifest, texture_stack
from spsl.upsample import UP_KINDS, fig1_sweep

logger = logging.getLogger("spsl")


# --------------------------------------------------------------------------- config plumbing


def _load_config(arg: str | None) -> dict:
    if not arg:
        return {}
    text = arg if arg.lstrip()[:1] in ("{", "[") else Path(arg).read_text()
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise SPSLError("--config must hold a JSON object")
    return doc


def _corpus_config(args, cfg: dict, **defaults) -> CorpusConfig:
    doc = dict(defaults)
    doc.update(cfg.get("corpus", {}))
    if args.seed is not None:
        doc["seed"] = args.seed
    for key in ("n_per_class", "size"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "cross_distribution", False):
        doc["cross_distribution"] = True
    return CorpusConfig.from_dict(doc)


def _experiment_config(args, cfg: dict) -> ExperimentConfig:
    doc = {k: v for k, v in cfg.items() if k != "corpus"}
    for key in ("max_epochs", "batch_size", "phase_mode"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    exp = ExperimentConfig.from_dict(doc)
    exp.corpus = _corpus_config(args, cfg, **asdict(exp.corpus))
    return exp


def _dataset(args, exp: ExperimentConfig):
    if getattr(args, "corpus", None):
        return load_dataset(load_manifest(args.corpus))
    return load_dataset(exp.corpus)


def _seeds(args) -> list[int]:
    if args.seeds:
        return args.seeds
    base = args.seed or 0
    return [base, base + 1, base + 2]


# --------------------------------------------------------------------------- commands


def cmd_corpus_build(args, cfg, out: Path) -> int:
    corpus_cfg = _corpus_config(args, cfg)
    root = out / "corpus"
    manifest = build_corpus(corpus_cfg, root)
    print(f"wrote {len(manifest.entries)} images and manifest.json to {root}")
    return 0


def cmd_spectrum_decompose(args, cfg, out: Path) -> int:
    image = read_image(args.image)
    plane = luminance(image) if image.ndim == 3 else image
    if image.ndim == 3 and image.shape[-1] == 4:
        raise SPSLError("RGBA input is not supported; pass an RGB or grayscale image")
    grid = dft2(plane)
    amp, phase = to_polar(grid)
    stem = Path(args.image).stem
    write_spectrum_csv(out / f"{stem}_spectrum.csv", grid)
    log_amp = np.log1p(np.fft.fftshift(amp))
    write_image(out / f"{stem}_amplitude.png", log_amp / max(log_amp.max(), 1e-300))
    write_image(out / f"{stem}_phase.png", (np.fft.fftshift(phase) + np.pi) / (2 * np.pi))
    write_image(out / f"{stem}_phase_only.png", phase_only_image(plane, args.mode))
    write_image(out / f"{stem}_amplitude_only.png", amplitude_only_image(plane))
    if image.ndim == 3:
        write_image(out / f"{stem}_rgbp.png", make_rgbp(image, args.mode))
    print(f"{stem}: {plane.shape[0]}x{plane.shape[1]} spectrum and maps written to {out}")
    return 0


def cmd_fig1_sweep(args, cfg, out: Path) -> int:
    if args.corpus:
        from spsl.synth import load_images

        images = load_images(load_manifest(args.corpus))[0]
    else:
        images = texture_stack(args.n_images, args.size, args.seed or 0)
    for kind in args.kind:
        rep = fig1_sweep(images, kind, args.max_t, phase_mode=args.phase_mode, domain=args.domain)
        rep.to_csv(out / f"fig1_{kind}.csv")
        ratios = [p / a if a else float("inf") for _, p, _, a, _ in rep.rows()[1:]]
        print(f"{kind}: phase_mean={[round(v, 5) for v in rep.phase_mean]} "
              f"phase/amp={[round(r, 3) for r in ratios]}")
    return 0


def cmd_verify(args, cfg, out: Path) -> int:
    fn = checks.CHECKS[args.what]
    kwargs = {"seed": args.seed or 0}
    if args.trials is not None and args.what != "counts":
        kwargs["trials"] = args.trials
    res = fn(**kwargs)
    print(res.line())
    write_rows_csv(out / f"verify_{args.what}.csv", ["check", "trials", "worst", "tolerance", "passed"],
                   [[res.name, res.trials, repr(res.worst), res.tolerance, res.passed]])
    return 0 if res.passed else 1


def cmd_train(args, cfg, out: Path) -> int:
    exp = _experiment_config(args, cfg)
    data = _dataset(args, exp)
    seed = args.seed or 0
    phase = not args.rgb
    blocks = args.blocks or (_net.SHALLOW_BLOCKS if args.profile == "shallow"
                             else tuple(range(1, _net.N_BACKBONE_BLOCKS + 1)))
    net = _net.build_net(4 if phase else 3, blocks, exp.width)
    X = {s: data.inputs(s, phase, exp.phase_mode) for s in ("train", "val")}
    res = _net.train(net, exp.train_config(seed), X["train"], data.labels["train"], X["val"], data.labels["val"])
    header = {
        "config": net.to_dict(), "config_hash": net.hash(), "experiment_hash": exp.hash(),
        "corpus_hash": data.corpus_hash, "seed": seed, "phase": phase, "phase_mode": exp.phase_mode,
        "best_epoch": res.best_epoch,
    }
    save_checkpoint(out / "checkpoint.bin", res.params, header)
    write_rows_csv(out / "train_log.csv", ["epoch", "train_loss", "val_loss", "lr"],
                   [[e.epoch, repr(e.train_loss), repr(e.val_loss), repr(e.lr)] for e in res.log])
    last = res.log[-1]
    print(f"trained {net.profile} ({'RGBP' if phase else 'RGB'}) for {len(res.log)} epochs; "
          f"best epoch {res.best_epoch}, final val loss {last.val_loss:.4f}")
    return 0


def cmd_eval(args, cfg, out: Path) -> int:
    params, header = load_checkpoint(args.checkpoint)
    net = _net.NetConfig.from_dict(header["config"])
    data = _dataset(args, _experiment_config(args, cfg))
    if args.split not in data.images:
        raise SPSLError(f"corpus has no {args.split!r} split")
    X = data.inputs(args.split, bool(header.get("phase")), header.get("phase_mode", "abs-phase"))
    tags = {"split": args.split, "config_hash": header.get("config_hash"), "seed": header.get("seed"),
            "corpus_hash": data.corpus_hash, "cross_distribution": data.cross_distribution}
    rep = evaluate(net, params, X, data.labels[args.split], tags)
    rows = [["acc", rep.acc], ["auc", "" if rep.auc is None else rep.auc], ["n_samples", rep.n_samples]]
    rows += [[f"recall_{c}", v] for c, v in rep.recall.items()]
    rows += [[k, v] for k, v in tags.items()]
    write_rows_csv(out / f"metrics_{args.split}.csv", ["metric", "value"], rows)
    print(f"{args.split}: acc={rep.acc:.4f} auc={rep.auc if rep.auc is None else round(rep.auc, 4)}")
    return 0


def cmd_ablate(args, cfg, out: Path) -> int:
    exp = _experiment_config(args, cfg)
    data = _dataset(args, exp)
    result = ablation_matrix(data, _seeds(args), exp)
    result.to_csv(out / "ablation.csv")
    for c in result.cells:
        print(f"{c.name:13s} cross AUC {c.cross_auc:.4f} +- {c.cross_auc_std:.4f}   in AUC {c.in_auc:.4f}")
    for name, ok in result.checks().items():
        print(f"{name}: {'yes' if ok else 'no'}")
    print("evaluation: held-out resampling kernel (cross-distribution split)")
    return 0


def cmd_depth_sweep(args, cfg, out: Path) -> int:
    exp = _experiment_config(args, cfg)
    data = _dataset(args, exp)
    result = depth_sweep(data, args.depths, _seeds(args), exp, phase=not args.rgb)
    result.to_csv(out / "depth_sweep.csv")
    for d, _, rf, a, b in result.aggregates():
        print(f"depth {d} rf {rf}: in AUC {a:.4f} cross AUC {b:.4f}")
    return 0


def cmd_fingerprint(args, cfg, out: Path) -> int:
    if args.corpus:
        data = load_dataset(load_manifest(args.corpus))
    else:
        data = load_dataset(_corpus_config(args, cfg))
    result = phase_fingerprint(recipe_groups(data, include_pristine=args.include_pristine), args.mode)
    result.to_csv(out / "fingerprint.csv")
    for name, fp in result.fingerprints.items():
        write_image(out / f"fingerprint_{name}.png", np.fft.fftshift(fp))
    print(f"groups {result.counts}; distinguishability {result.score:.4f}")
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global random seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default: current)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file or inline JSON object")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="spsl", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def corpus_opts(sp, cross=False):
        sp.add_argument("--corpus", help="corpus directory or manifest.json (default: build in memory)")
        sp.add_argument("--n-per-class", type=int, dest="n_per_class")
        sp.add_argument("--size", type=int)
        if cross:
            sp.add_argument("--cross-distribution", action="store_true", dest="cross_distribution")

    def train_opts(sp):
        sp.add_argument("--max-epochs", type=int, dest="max_epochs")
        sp.add_argument("--batch-size", type=int, dest="batch_size")
        sp.add_argument("--phase-mode", choices=PHASE_MODES, dest="phase_mode")

    corpus = sub.add_parser("corpus", help="synthetic corpus tools", parents=[common])
    csub = corpus.add_subparsers(dest="action", required=True)
    cb = csub.add_parser("build", help="write PNG images and manifest.json", parents=[common])
    cb.add_argument("--n-per-class", type=int, dest="n_per_class")
    cb.add_argument("--size", type=int)
    cb.add_argument("--cross-distribution", action="store_true", dest="cross_distribution")
    cb.set_defaults(func=cmd_corpus_build)

    spec = sub.add_parser("spectrum", help="spectral decomposition of one image", parents=[common])
    ssub = spec.add_subparsers(dest="action", required=True)
    sd = ssub.add_parser("decompose", help="amplitude, phase and phase-only maps", parents=[common])
    sd.add_argument("image")
    sd.add_argument("--mode", choices=PHASE_MODES, default="abs-phase")
    sd.set_defaults(func=cmd_spectrum_decompose)

    fig = sub.add_parser("fig1", help="phase/amplitude divergence under repeated up-sampling", parents=[common])
    fsub = fig.add_subparsers(dest="action", required=True)
    fs = fsub.add_parser("sweep", help="sweep t = 0..max-t", parents=[common])
    fs.add_argument("--corpus")
    fs.add_argument("--kind", nargs="+", choices=UP_KINDS, default=["bilinear"])
    fs.add_argument("--max-t", type=int, default=5, dest="max_t")
    fs.add_argument("--n-images", type=int, default=1000, dest="n_images")
    fs.add_argument("--size", type=int, default=64)
    fs.add_argument("--phase-mode", choices=PHASE_MODES, default="unit-amplitude", dest="phase_mode")
    fs.add_argument("--domain", choices=("spatial", "spectrum"), default="spatial")
    fs.set_defaults(func=cmd_fig1_sweep)

    ver = sub.add_parser("verify", help="randomized numeric checks", parents=[common])
    ver.add_argument("what", choices=sorted(checks.CHECKS))
    ver.add_argument("--trials", type=int)
    ver.set_defaults(func=cmd_verify)

    tr = sub.add_parser("train", help="train one classifier", parents=[common])
    corpus_opts(tr, cross=True)
    train_opts(tr)
    tr.add_argument("--profile", choices=("shallow", "deep"), default="shallow")
    tr.add_argument("--blocks", type=int, nargs="+", help="explicit backbone blocks, overrides --profile")
    tr.add_argument("--rgb", action="store_true", help="RGB input instead of RGBP")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint on a corpus split", parents=[common])
    corpus_opts(ev, cross=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", choices=("train", "val", "test"), default="test")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="RGB/RGBP x deep/shallow matrix", parents=[common])
    corpus_opts(ab)
    train_opts(ab)
    ab.add_argument("--seeds", type=int, nargs="+")
    ab.set_defaults(func=cmd_ablate)

    ds = sub.add_parser("depth-sweep", help="AUC against network depth", parents=[common])
    corpus_opts(ds)
    train_opts(ds)
    ds.add_argument("--depths", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    ds.add_argument("--seeds", type=int, nargs="+")
    ds.add_argument("--rgb", action="store_true")
    ds.set_defaults(func=cmd_depth_sweep)

    fp = sub.add_parser("fingerprint", help="mean phase-only image per recipe kind", parents=[common])
    corpus_opts(fp)
    fp.add_argument("--mode", choices=PHASE_MODES, default="abs-phase")
    fp.add_argument("--include-pristine", action="store_true", dest="include_pristine")
    fp.set_defaults(func=cmd_fingerprint)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", None), ("out_dir", "."), ("config", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg, out)
    except (SPSLError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"spsl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
