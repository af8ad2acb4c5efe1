"""Command-line front end: ``postal-hw <command> [options] [inputs]``.

Exit status: 0 on success, 1 when some batch items failed (the batch still
completes), 2 on invalid configuration or input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import beta_elliptic as be
from . import corpus, envelope, imaging, pnm, svg, synth, trajectory
from .config import PipelineConfig, documented_keys
from .errors import ConfigError, InvalidInputError, NotFoundError
from .matcher import TemplateStore, TrajectoryGraph, classify
from .pipeline import model_trace, trace_word

log = logging.getLogger("postal_hw")

IMAGE_SUFFIXES = (".pgm", ".pbm", ".png")


class Batch:
    """Per-item failure bookkeeping for batch commands."""

    def __init__(self):
        self.failed = []

    def fail(self, name, exc):
        log.error("%s: %s", name, exc)
        self.failed.append(name)

    @property
    def status(self):
        return 1 if self.failed else 0


def collect(inputs, suffixes):
    """(path, sample id) for files and directory trees, in sorted order."""
    out = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            files = sorted(f for f in p.rglob("*") if f.is_file() and _suffix(f) in suffixes)
            out.extend((f, _stem(f.relative_to(p))) for f in files)
        elif p.is_file():
            out.append((p, _stem(Path(p.name))))
        else:
            raise InvalidInputError(f"{p}: no such file or directory")
    return out


def _suffix(path):
    name = path.name
    for s in (".model.json",):
        if name.endswith(s):
            return s
    return path.suffix


def _stem(rel):
    name = rel.name
    suf = _suffix(rel)
    return (rel.parent / name[: len(name) - len(suf)]).as_posix()


def _target(out, sample_id, suffix):
    path = Path(out) / (sample_id + suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.jobs is not None:
        cfg.set("jobs", args.jobs)
    if args.verbose:
        cfg.set("verbosity", min(3, cfg["verbosity"] + args.verbose))
    return cfg


def _start(args, cfg, command):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_header.txt").write_text(cfg.header(command))
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_synth(args, cfg):
    out = _start(args, cfg, "synth")
    scfg = cfg.synth_config()
    params = cfg.word_params()
    corpus.write_corpus(out / "corpus", scfg, "test")
    corpus.write_corpus(out / "train", scfg, "train", n=cfg["synth.n_train"])
    store, fitted = corpus.learn_store(scfg, params, cfg["jobs"], cfg["synth.n_train"])
    store.save(out / "templates", fitted)
    n_env = cfg["synth.n_envelopes"]
    if n_env:
        vocab = synth.template_models(scfg.n_templates)
        env_dir = out / "envelopes"
        env_dir.mkdir(exist_ok=True)
        for i in range(n_env):
            img, gt = synth.random_envelope(scfg, synth.derive_seed(scfg.seed, "envelope", i), vocab)
            pnm.write_pgm(env_dir / f"env{i:04d}.pgm", pnm.to_gray(img))
            lines = [f"{kind} {b[0]} {b[1]} {b[2]} {b[3]}" for b, kind in gt.layout]
            (env_dir / f"env{i:04d}.layout").write_text("\n".join(lines) + "\n")
    log.info("corpus written to %s", out)
    return 0


def cmd_preprocess(args, cfg):
    out = _start(args, cfg, "preprocess")
    batch = Batch()
    lp = cfg.layout_params()
    params = cfg.word_params()
    for path, sid in collect(args.inputs, IMAGE_SUFFIXES):
        try:
            img = pnm.read_image(path)
            if args.envelope:
                layout, clean = envelope.analyze_envelope(img, lp)
                _target(out, sid, ".layout.txt").write_text("\n".join(layout.records()) + "\n")
                svg.layout_svg(clean, layout.regions()).save(_target(out, sid, ".layout.svg"))
            else:
                sk = imaging.preprocess_word(img, params.diacritic_ratio)
                pnm.write_pbm(_target(out, sid, ".skel.pbm"), sk)
        except (InvalidInputError, NotFoundError, OSError, ValueError) as exc:
            batch.fail(sid, exc)
    return batch.status


def cmd_recover(args, cfg):
    out = _start(args, cfg, "recover")
    batch = Batch()
    params = cfg.word_params()
    for path, sid in collect(args.inputs, IMAGE_SUFFIXES):
        try:
            img = pnm.read_image(path)
            sk = imaging.preprocess_word(img, params.diacritic_ratio)
            tr = trace_word(sk, params)
            if len(tr) == 0:
                log.warning("%s: no ink; writing an empty trace", sid)
            trajectory.write_trace(_target(out, sid, ".trace"), tr, header=[f"source {path.name}"])
            if args.svg:
                svg.trace_svg(tr, sk).save(_target(out, sid, ".trace.svg"))
        except (InvalidInputError, OSError, ValueError) as exc:
            batch.fail(sid, exc)
    return batch.status


def cmd_fit(args, cfg):
    out = _start(args, cfg, "fit")
    batch = Batch()
    params = cfg.word_params()
    report = []
    for path, sid in collect(args.inputs, (".trace",)):
        try:
            tr = trajectory.read_trace(path)
            if len(tr) < 2:
                log.warning("%s: empty trace skipped", sid)
                report.append(f"{sid} skipped 0 nan")
                continue
            rs, vp, model, spans, snr = model_trace(tr, params)
            be.save_model(_target(out, sid, ".model.json"), model, meta={"source": path.name, "snr_db": snr})
            report.append(f"{sid} ok {len(model)} {snr!r}")
            if args.svg:
                fitted = be.superpose(vp.t, [s.beta for s in model.strokes])
                bumps = [be.beta_eval(vp.t, s.beta) for s in model.strokes]
                svg.velocity_svg(vp.t, vp.v, fitted, bumps).save(_target(out, sid, ".velocity.svg"))
        except Exception as exc:        # fit failures are recorded, the batch goes on
            batch.fail(sid, exc)
            report.append(f"{sid} failed 0 nan")
    (out / "fit_report.txt").write_text("".join(line + "\n" for line in report))
    return batch.status


def _load_store(path):
    if not path:
        raise ConfigError("--store is required")
    return TemplateStore.load(path)


def _truth_label(path):
    try:
        return str(json.loads(Path(path).read_text()).get("meta", {}).get("label", "-"))
    except (OSError, ValueError):
        return "-"


def cmd_match(args, cfg):
    out = _start(args, cfg, "match")
    store = _load_store(args.store)
    params = cfg.word_params()
    batch = Batch()
    rows = []
    chosen = {}
    for path, sid in collect(args.inputs, IMAGE_SUFFIXES + (".model.json",)):
        if sid not in chosen or _suffix(chosen[sid]) == ".model.json":
            chosen[sid] = path          # an image wins over its generating model
    for sid in sorted(chosen):
        path = chosen[sid]
        try:
            sibling = path.with_name(_stem(Path(path.name)) + ".model.json")
            truth = _truth_label(sibling) if sibling.exists() else "-"
            if path == sibling:
                graph = TrajectoryGraph.from_model(be.load_model(path))
            else:
                r = corpus._model_image((sid, truth, pnm.read_image(path), params))
                if r.error:
                    raise InvalidInputError(r.error)
                graph = r.graph
            label, dist, margin = classify(graph, store, symmetric=cfg["matcher.symmetric"])
            rows.append(f"{sid} {label} {truth} {dist.value!r} {margin!r}")
        except (InvalidInputError, OSError, ValueError) as exc:
            batch.fail(sid, exc)
            rows.append(f"{sid} - - nan nan")
    (out / "match_report.txt").write_text("".join(r + "\n" for r in rows))
    return batch.status


def cmd_evaluate(args, cfg):
    out = _start(args, cfg, "evaluate")
    store = _load_store(args.store)
    root = Path(args.inputs[0]) if args.inputs else None
    if root is None or not root.is_dir():
        raise InvalidInputError("evaluate needs a corpus directory")
    named = []
    for sid, label, _ in corpus.read_manifest(root):
        named.append((sid, label, pnm.read_image(root / f"{sid}.pgm")))
    report, _ = corpus.evaluate(named, store, cfg.word_params(), cfg["jobs"],
                                symmetric=cfg["matcher.symmetric"], timings=args.timings)
    (out / "eval_report.txt").write_text(report.to_text())
    (out / "eval_report.json").write_text(report.to_json() + "\n")
    log.info("accuracy %.4f over %d samples", report.accuracy, report.n_samples)
    return 0 if all(r[1] != "-" for r in report.rows) else 1


def cmd_plot(args, cfg):
    out = _start(args, cfg, "plot")
    batch = Batch()
    for path, sid in collect(args.inputs, (".trace", ".model.json")):
        try:
            if _suffix(path) == ".trace":
                svg.trace_svg(trajectory.read_trace(path)).save(_target(out, sid, ".trace.svg"))
                continue
            model = be.load_model(path)
            total = sum(be.arc_length(s) for s in model.strokes)
            rec = be.reconstruct(model, max(64, int(total) * 2))
            bumps = [be.beta_eval(rec.t, s.beta) for s in model.strokes]
            svg.velocity_svg(rec.t, rec.v, None, bumps).save(_target(out, sid, ".velocity.svg"))
            pts = rec.points - rec.points.min(axis=0) + 2
            g = TrajectoryGraph(np.array([s.midpoint() for s in model.strokes]) - rec.points.min(axis=0) + 2)
            svg.trace_svg(trajectory.OrderedTrace(pts, []), graph=g).save(_target(out, sid, ".model.svg"))
        except (InvalidInputError, OSError, ValueError) as exc:
            batch.fail(sid, exc)
    return batch.status


COMMANDS = {
    "synth": (cmd_synth, "generate templates, a labelled word corpus and envelopes"),
    "preprocess": (cmd_preprocess, "skeletonize word images, or analyse envelope layouts"),
    "recover": (cmd_recover, "recover pen order from word images (.trace files)"),
    "fit": (cmd_fit, "fit Beta-elliptic models to traces (.model.json files)"),
    "match": (cmd_match, "classify word images or models against a template store"),
    "evaluate": (cmd_evaluate, "recognition accuracy over a labelled corpus"),
    "plot": (cmd_plot, "SVG plots of traces and models"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="postal-hw", description=__doc__.splitlines()[0],
                                     epilog="configuration keys:\n" + documented_keys(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name != "synth":
            p.add_argument("inputs", nargs="*")
        if name in ("match", "evaluate"):
            p.add_argument("--store", help="template store directory")
        if name in ("recover", "fit"):
            p.add_argument("--svg", action="store_true", help="also write SVG plots")
        if name == "preprocess":
            p.add_argument("--envelope", action="store_true", help="inputs are whole envelopes")
        if name == "evaluate":
            p.add_argument("--timings", action="store_true",
                           help="add wall-clock timings to the report (not reproducible)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        logging.getLogger().setLevel([logging.ERROR, logging.WARNING, logging.INFO, logging.DEBUG][cfg["verbosity"]])
        fn = COMMANDS[args.command][0]
        if args.command != "synth" and not args.inputs:
            raise InvalidInputError(f"{args.command}: no inputs given")
        t0 = time.perf_counter()
        status = fn(args, cfg)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return status
    except (ConfigError, InvalidInputError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
