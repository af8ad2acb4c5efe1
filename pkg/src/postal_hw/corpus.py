"""Synthetic word corpora, template learning and recognition evaluation.

On disk a corpus is ``<root>/<label>/<instance>.pgm`` with sibling ``.trace``
(ground-truth pen path in pixel coordinates) and ``.model.json`` (generating
model), plus ``<root>/truth.manifest`` listing ``sample_id<TAB>label<TAB>seed``.
"""
from __future__ import annotations

import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import pnm
from .beta_elliptic import save_model
from .errors import ConfigError, InvalidInputError, PipelineError
from .matcher import TemplateStore, classify
from .pipeline import WordParams, model_trace, preprocess, trace_word, word_graph
from .synth import SynthConfig, derive_seed, gen_word, raster_offset, rasterize, template_models
from .trajectory import OrderedTrace, write_trace

log = logging.getLogger(__name__)

N_TRAIN = 10        # renderings per label used to learn its templates (first one noiseless)


@dataclass(frozen=True)
class Item:
    sample_id: str
    label: str
    seed: int
    noise_sigma: float


def plan_items(cfg, split="test", n=None):
    """Deterministic item list for a split: 'test' instances or 'train' renderings."""
    if cfg.n_instances < 1 or cfg.n_templates < 1:
        raise ConfigError("corpus needs at least one label and one instance")
    n = cfg.n_instances if n is None else n
    items = []
    for label in template_models(cfg.n_templates):
        for i in range(n):
            sigma = cfg.noise_sigma
            if split == "train" and i == 0:
                sigma = 0.0
            seed = derive_seed(cfg.seed, label, split, i)
            items.append(Item(f"{label}/{i:03d}", label, seed, sigma))
    return items


def render_item(item, cfg, models=None):
    """(gray image, ground truth, pixel-space trajectory) of one item."""
    models = models or template_models(cfg.n_templates)
    wcfg = SynthConfig(seed=item.seed, stroke_width=cfg.stroke_width, resolution=cfg.resolution,
                       noise_sigma=item.noise_sigma, n_templates=cfg.n_templates,
                       n_instances=cfg.n_instances, point_spacing=cfg.point_spacing)
    gt = gen_word(models[item.label], wcfg, seed=item.seed, label=item.label)
    mask = rasterize(gt.trajectory, wcfg)
    off = raster_offset(gt.trajectory.points, cfg.stroke_width)
    traj = OrderedTrace(gt.trajectory.points + off, list(gt.trajectory.breaks))
    gray = np.where(mask, 0, 255).astype(np.uint8)
    return gray, gt, traj


def write_corpus(root, cfg, split="test", n=None):
    root = Path(root)
    models = template_models(cfg.n_templates)
    items = plan_items(cfg, split, n)
    lines = []
    for item in items:
        gray, gt, traj = render_item(item, cfg, models)
        stem = root / item.sample_id
        stem.parent.mkdir(parents=True, exist_ok=True)
        pnm.write_pgm(stem.with_suffix(".pgm"), gray)
        write_trace(stem.with_suffix(".trace"), traj,
                    header=[f"label {item.label}", f"seed {item.seed}", f"noise_sigma {item.noise_sigma!r}"])
        save_model(stem.with_suffix(".model.json"), gt.model,
                   meta={"label": item.label, "seed": item.seed})
        lines.append(f"{item.sample_id}\t{item.label}\t{item.seed}")
    (root / "truth.manifest").write_text("\n".join(lines) + "\n")
    return items


def read_manifest(root):
    path = Path(root) / "truth.manifest"
    if not path.exists():
        raise InvalidInputError(f"{root}: missing truth.manifest")
    rows = []
    for line in path.read_text().splitlines():
        if line.strip():
            sid, label, seed = line.split("\t")
            rows.append((sid, label, int(seed)))
    if not rows:
        raise InvalidInputError(f"{root}: empty corpus")
    return rows


# --------------------------------------------------------------------------
# per-item work (module level so it can be shipped to worker processes)
# --------------------------------------------------------------------------

@dataclass
class ItemResult:
    sample_id: str
    label: str
    stage: str                  # stage that failed, or "done"
    model: object = None
    graph: object = None
    snr: float | None = None
    predicted: str | None = None
    distance: float | None = None
    margin: float | None = None
    error: str | None = None
    timings: dict = field(default_factory=dict)


STAGES = ("preprocess", "recover", "fit")


def _model_image(args):
    sample_id, label, img, params = args
    timings = {}
    stage = STAGES[0]
    try:
        t = time.perf_counter()
        sk = preprocess(img, params)
        timings[stage] = time.perf_counter() - t
        stage = "recover"
        t = time.perf_counter()
        tr = trace_word(sk, params)
        if len(tr) < 2:
            raise InvalidInputError("no ink left after preprocessing")
        timings[stage] = time.perf_counter() - t
        stage = "fit"
        t = time.perf_counter()
        rs, vp, model, spans, snr = model_trace(tr, params)
        graph = word_graph(model, rs, vp, spans, params)
        timings[stage] = time.perf_counter() - t
    except Exception as exc:            # per-item isolation: record and go on
        log.warning("%s: %s failed: %s", sample_id, stage, exc)
        return ItemResult(sample_id, label, stage, error=f"{type(exc).__name__}: {exc}", timings=timings)
    return ItemResult(sample_id, label, "done", model, graph, snr, timings=timings)


def _map(fn, args, jobs):
    if jobs <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args, chunksize=4))


def model_images(named_images, params=WordParams(), jobs=1):
    """named_images: [(sample_id, label, image)] -> [ItemResult] in input order."""
    return _map(_model_image, [(s, l, img, params) for s, l, img in named_images], jobs)


def learn_store(cfg, params=WordParams(), jobs=1, n_train=N_TRAIN):
    """Template store from training renderings of each vocabulary model.

    Returns (store, {label: [fitted models]}) so the store can be saved.
    """
    models = template_models(cfg.n_templates)
    named = []
    for item in plan_items(cfg, "train", n_train):
        gray, _, _ = render_item(item, cfg, models)
        named.append((item.sample_id, item.label, gray))
    store, fitted = TemplateStore(), {}
    for r in model_images(named, params, jobs):
        if r.error:
            continue
        store.add(r.label, r.graph, source=r.sample_id)
        fitted.setdefault(r.label, []).append(r.model)
    missing = [lab for lab in models if lab not in store.entries]
    if missing:
        raise PipelineError(f"no usable training rendering for {missing}")
    return store, fitted


@dataclass
class EvalReport:
    n_samples: int
    stage_ok: dict
    accuracy: float
    confusions: list                    # [(truth, predicted, count)]
    rows: list                          # [(sample_id, predicted, truth, distance, margin)]
    snr_db: dict = field(default_factory=dict)
    timings: dict | None = None

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True, allow_nan=True)

    def to_text(self):
        lines = [f"{sid} {pred} {truth} {dist!r} {margin!r}" for sid, pred, truth, dist, margin in self.rows]
        lines.append(f"# samples {self.n_samples}")
        lines.append("# stage_ok " + " ".join(f"{k}={v}" for k, v in self.stage_ok.items()))
        lines.append(f"# accuracy {self.accuracy!r}")
        for truth, pred, c in self.confusions:
            lines.append(f"# confusion {truth} {pred} {c}")
        return "\n".join(lines) + "\n"


def evaluate(named_images, store, params=WordParams(), jobs=1, symmetric=False, timings=False):
    """Recognize every (sample_id, truth, image) against the store."""
    if not named_images:
        raise InvalidInputError("empty corpus")
    results = model_images(named_images, params, jobs)
    t1 = time.perf_counter()
    rows, conf = [], Counter()
    for r in results:
        if r.error:
            rows.append((r.sample_id, "-", r.label, float("nan"), float("nan")))
            continue
        pred, dist, margin = classify(r.graph, store, symmetric=symmetric)
        r.predicted, r.distance, r.margin = pred, dist.value, margin
        rows.append((r.sample_id, pred, r.label, dist.value, margin))
        if pred != r.label:
            conf[(r.label, pred)] += 1
    t2 = time.perf_counter()
    n = len(results)
    fitted = [r for r in results if not r.error]
    failed = Counter(r.stage for r in results if r.error)
    stage_ok, alive = {}, n
    for st in STAGES:
        alive -= failed.get(st, 0)
        stage_ok[st] = alive
    stage_ok["match"] = len(fitted)
    snrs = np.array([r.snr for r in fitted], dtype=float)
    correct = sum(1 for r in fitted if r.predicted == r.label)
    report = EvalReport(
        n_samples=n,
        stage_ok=stage_ok,
        accuracy=correct / n,
        confusions=[(a, b, c) for (a, b), c in sorted(conf.items())],
        rows=rows,
        snr_db={"min": float(snrs.min()) if snrs.size else float("nan"),
                "median": float(np.median(snrs)) if snrs.size else float("nan")},
        timings=_timing_summary(results, t2 - t1) if timings else None,
    )
    return report, results


def _timing_summary(results, match_time):
    out = Counter()
    for r in results:
        out.update(r.timings)
    out["match"] = match_time
    return dict(sorted(out.items()))
