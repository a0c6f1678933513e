"""Training and evaluation orchestration for COGS and CFQ.

A run is described by a flat :class:`RunConfig`.  ``train`` runs strong,
weak (hard EM) or retrain supervision for a fixed number of steps with no
early stopping, logging one JSON record per evaluation point, and writes a
checkpoint directory holding the parameters plus everything needed to
evaluate it later (vocabularies, config, alignment cache, primitive frames).

Dataset layout under the data directory (``data_dir`` or ``$LAGR_DATA_DIR``)::

    cogs/{train,dev,test,gen,...}.tsv
    cfq/dataset.jsonl
    cfq/splits/{split}.json       {"trainIdxs": [...], "devIdxs": [...], "testIdxs": [...]}
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cfq as cfq_mod
from . import cogs as cogs_mod
from .alignment import AlignmentCache, AlignmentConfig, aligned_ids, load_alignment_dump, weak_train_step
from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import EncoderConfig, Vocab
from .graphs import LabelVocab, alignment_of, apply_alignment, pad_to_slots, strip_nulls
from .heads import decode_graph
from .isomorphism import graph_isomorphic
from .model import Batch, LagrModel
from .optim import Adam, NonFiniteGradientError, grad_clip

log = logging.getLogger(__name__)

DATASETS = ("cogs", "cfq")
SUPERVISION = ("strong", "weak", "retrain")
DEFAULT_LAYERS = {"cogs": 1, "cfq": 2}
DEFAULT_THRESHOLD = {"cogs": 0.95, "cfq": 0.995}
GEN_DEV = "gen_dev"


class TrainingDiverged(RuntimeError):
    """Loss or gradients became non-finite; the state was dumped before aborting."""


# -- configuration ------------------------------------------------------------------------


@dataclass
class RunConfig:
    dataset: str = "cogs"
    split: str = ""  # COGS: training file stem (default "train"); CFQ: split file (default "random_split")
    supervision: str = "strong"
    data_dir: str = ""
    # encoder
    d: int = 64
    enc_layers: int = 2
    heads: int = 4
    ff: int = 256
    dropout: float = 0.1
    encoder_mode: str = "shared"
    max_len: int = 128
    layers: int = 0  # graph layers L; 0 picks the dataset default
    # optimisation
    batch_size: int = 32
    lr: float = 1e-3
    warmup: int = 0
    train_steps: int = 1000
    max_grad_norm: float = 1.0
    # alignment inference
    k: int = 1
    sigma: float = 0.0
    cache_enabled: bool = False
    include_noiseless: bool = False
    # bookkeeping
    seed: int = 0
    restart_threshold: float = 0.0  # 0 picks the dataset default
    max_restarts: int = 0
    eval_every: int = 1000
    eval_split: str = "dev"
    max_train_examples: int = 0
    max_eval_examples: int = 0
    out_dir: str = "runs/default"
    metrics_path: str = ""
    checkpoint_every: int = 0
    alignments: str = ""

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.supervision not in SUPERVISION:
            raise ValueError(f"supervision must be one of {SUPERVISION}, got {self.supervision!r}")
        if not self.split:
            self.split = "train" if self.dataset == "cogs" else "random_split"
        if self.layers == 0:
            self.layers = DEFAULT_LAYERS[self.dataset]
        if self.restart_threshold == 0:
            self.restart_threshold = DEFAULT_THRESHOLD[self.dataset]
        if not 0 < self.restart_threshold <= 1:
            raise ValueError(f"restart_threshold must be in (0, 1], got {self.restart_threshold}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.batch_size < 1 or self.train_steps < 0 or self.layers < 1:
            raise ValueError("batch_size and layers must be positive and train_steps non-negative")
        if self.supervision == "strong" and self.dataset == "cfq":
            raise ValueError("CFQ has no gold alignments; use supervision=weak or retrain")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")

    @property
    def encoder(self):
        return EncoderConfig(d=self.d, layers=self.enc_layers, heads=self.heads, ff=self.ff,
                             dropout=self.dropout, mode=self.encoder_mode, max_len=self.max_len)

    @property
    def alignment(self):
        return AlignmentConfig(k=self.k, sigma=self.sigma, cache_enabled=self.cache_enabled,
                               include_noiseless=self.include_noiseless)

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """Content hash of the settings that affect results (paths excluded)."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("out_dir", "metrics_path", "data_dir")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _coerce(text, kind):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return kind(text)


def parse_config(text, **overrides):
    """:class:`RunConfig` from flat ``key = value`` lines (``#`` starts a comment)."""
    kinds = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(val, kinds[key])
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides):
    return parse_config(Path(path).read_text(), **overrides)


def resolve_data_dir(cfg_or_dir=""):
    path = cfg_or_dir.data_dir if isinstance(cfg_or_dir, RunConfig) else cfg_or_dir
    path = path or os.environ.get("LAGR_DATA_DIR", "")
    if not path:
        raise FileNotFoundError("no dataset root: set data_dir in the config or LAGR_DATA_DIR")
    return Path(path)


def blob_hash(data):
    """Git blob object id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def dataset_hash(paths):
    lines = sorted(f"{Path(p).name} {blob_hash(Path(p).read_bytes())}" for p in paths)
    return hashlib.sha1("\n".join(lines).encode()).hexdigest()


# -- examples and tasks --------------------------------------------------------------------


@dataclass
class Item:
    """One example with everything the training loop and evaluator need."""

    id: str
    tokens: tuple
    ref: str
    tag: str = ""
    graph: object = None  # gold MR graph
    gold: object = None  # gold aligned graph, when alignments are known
    target: object = None  # unaligned, null-padded target
    token_ids: np.ndarray = None
    s_ids: np.ndarray = None
    e_ids: np.ndarray = None
    z_ids: np.ndarray = None
    xi_ids: np.ndarray = None


def sample_gen_dev(examples, n=1000, seed=0):
    """Uniform sample of ``n`` examples without replacement, and the remainder.

    Both parts keep the original order.
    """
    examples = list(examples)
    if n > len(examples):
        raise ValueError(f"cannot sample {n} examples from a split of {len(examples)}")
    picked = set(np.random.default_rng(seed).choice(len(examples), size=n, replace=False).tolist())
    sample = [ex for i, ex in enumerate(examples) if i in picked]
    rest = [ex for i, ex in enumerate(examples) if i not in picked]
    return sample, rest


def _stack_layers(g, layers):
    if layers == g.layers:
        return g
    from .graphs import NULL, AlignedGraph

    return AlignedGraph(g.n, layers, g.z + (NULL,) * (g.n * (layers - g.layers)), dict(g.edges))


class CogsTask:
    name = "cogs"

    def __init__(self, cfg, data_dir):
        self.cfg = cfg
        self.root = Path(data_dir) / "cogs"
        self.frames = {}

    def _path(self, name):
        path = self.root / f"{name}.tsv"
        if not path.exists():
            raise FileNotFoundError(f"COGS split file not found: {path}")
        return path

    def load(self, split, seed=0):
        """Raw examples and the files they came from; ``gen_dev`` samples 1000 from ``gen``."""
        name = "gen" if split == GEN_DEV else split
        path = self._path(name)
        stats = Counter()
        examples = list(cogs_mod.read_cogs_tsv(path, stats, prefix=name))
        if stats["malformed"]:
            log.warning("%s: %d malformed lines skipped", path, stats["malformed"])
        if split == GEN_DEV:
            examples, _ = sample_gen_dev(examples, min(1000, len(examples)), seed)
        return examples, [path]

    def load_train(self):
        return self.load(self.cfg.split)

    def item(self, ex, layers, strict=True):
        it = Item(ex.id, tuple(ex.tokens), ex.lf, ex.tag)
        try:
            gold = _stack_layers(cogs_mod.graph_of(ex), layers)
        except cogs_mod.LogicalFormError:
            if strict:
                raise
            return it
        it.gold = gold
        it.graph = strip_nulls(gold)
        it.target = pad_to_slots(it.graph, gold.n, layers)
        return it

    def fit(self, raw):
        self.frames = cogs_mod.build_primitive_frames(raw)

    def predict(self, g):
        mr = strip_nulls(g)
        try:
            return cogs_mod.serialize_lf(mr, self.frames), mr
        except (ValueError, KeyError) as exc:
            log.debug("cannot serialize prediction: %s", exc)
            return "", mr

    def correct(self, item, text, mr):
        return cogs_mod.exact_match(text, item.ref)


class CfqTask:
    name = "cfq"

    def __init__(self, cfg, data_dir):
        self.cfg = cfg
        self.root = Path(data_dir) / "cfq"
        self._records = None
        self.frames = {}

    def _dataset(self):
        path = self.root / "dataset.jsonl"
        if not path.exists():
            raise FileNotFoundError(f"CFQ dataset file not found: {path}")
        if self._records is None:
            self._records = {ex.id: ex for ex in cfq_mod.read_cfq_jsonl(path)}
        return path, self._records

    def load(self, split, seed=0):
        path, records = self._dataset()
        split_path = self.root / "splits" / f"{self.cfg.split}.json"
        if not split_path.exists():
            raise FileNotFoundError(f"CFQ split file not found: {split_path}")
        parts = cfq_mod.read_split(split_path)
        name = "dev" if split == GEN_DEV else split
        if name not in parts:
            raise KeyError(f"split {name!r} not in {split_path} (have {sorted(parts)})")
        missing = [i for i in parts[name] if i not in records]
        if missing:
            raise KeyError(f"{len(missing)} indices of {split_path}:{name} are not in the dataset, e.g. {missing[0]}")
        return [records[i] for i in parts[name]], [path, split_path]

    def load_train(self):
        return self.load("train")

    def item(self, ex, layers, strict=True):
        it = Item(ex.id, ex.tokens, ex.sparql, ex.split)
        try:
            graph = cfq_mod.sparql_to_graph(ex.sparql)
            cfq_mod.check_slot_budget(graph, len(ex.tokens), layers)
        except ValueError:
            if strict:
                raise
            return it
        it.graph = graph
        it.target = pad_to_slots(graph, len(ex.tokens), layers)
        return it

    def fit(self, raw):
        pass

    def predict(self, g):
        mr = strip_nulls(g)
        try:
            return cfq_mod.graph_to_sparql(mr), mr
        except (ValueError, KeyError) as exc:
            log.debug("cannot reconstruct SPARQL: %s", exc)
            return "", mr

    def correct(self, item, text, mr):
        return item.graph is not None and graph_isomorphic(mr, item.graph)


def make_task(cfg, data_dir=None):
    root = data_dir if data_dir is not None else resolve_data_dir(cfg)
    return (CogsTask if cfg.dataset == "cogs" else CfqTask)(cfg, root)


# -- model state ----------------------------------------------------------------------------


@dataclass
class State:
    cfg: RunConfig
    task: object
    vocab: Vocab
    node_vocab: LabelVocab
    edge_vocab: LabelVocab
    model: LagrModel
    data_hash: str = ""
    cache: AlignmentCache = field(default_factory=AlignmentCache)

    def encode(self, items):
        for it in items:
            it.token_ids = np.asarray(self.vocab.encode(it.tokens), dtype=np.int64)
            if it.target is not None and self._in_vocab(it.target):
                it.s_ids, it.e_ids = it.target.to_ids(self.node_vocab, self.edge_vocab)
            if it.gold is not None and it.s_ids is not None:
                it.z_ids, it.xi_ids = it.gold.to_ids(self.node_vocab, self.edge_vocab)
        return items

    def _in_vocab(self, target):
        return all(l in self.node_vocab for l in target.s) and all(
            l in self.edge_vocab for l in target.edges.values())

    def meta(self, step):
        return {
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.hash(),
            "dataset_hash": self.data_hash,
            "seed": self.cfg.seed,
            "step": step,
            "vocab": self.vocab.itos,
            "node_vocab": self.node_vocab.to_list(),
            "edge_vocab": self.edge_vocab.to_list(),
            "frames": self.task.frames,
            "cache": self.cache.to_json(),
        }

    def save(self, path, step):
        save_checkpoint(path, self.model.state_dict(), self.meta(step))
        return Path(path)


def build_state(cfg, train_items, task, data_hash=""):
    vocab = Vocab.from_corpus(it.tokens for it in train_items)
    node_labels, edge_labels = set(), set()
    for it in train_items:
        node_labels.update(it.target.s)
        edge_labels.update(it.target.edges.values())
    node_vocab = LabelVocab.from_labels(node_labels)
    edge_vocab = LabelVocab.from_labels(edge_labels)
    model = LagrModel(len(vocab), cfg.encoder, cfg.layers, len(node_vocab), len(edge_vocab), seed=cfg.seed)
    return State(cfg, task, vocab, node_vocab, edge_vocab, model, data_hash)


def load_state(ckpt, data_dir=None):
    """Rebuild model, vocabularies and task from a checkpoint directory."""
    params, meta = load_checkpoint(ckpt)
    cfg = RunConfig(**meta["config"])
    if data_dir:
        cfg.data_dir = str(data_dir)
    task = make_task(cfg, resolve_data_dir(cfg))
    task.frames = meta.get("frames", {})
    vocab = Vocab.from_list(meta["vocab"])
    node_vocab = LabelVocab.from_list(meta["node_vocab"])
    edge_vocab = LabelVocab.from_list(meta["edge_vocab"])
    model = LagrModel(len(vocab), cfg.encoder, cfg.layers, len(node_vocab), len(edge_vocab), seed=cfg.seed)
    try:
        model.load_state_dict(params)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"checkpoint {ckpt} does not match its vocabularies/config: {exc}") from None
    state = State(cfg, task, vocab, node_vocab, edge_vocab, model, meta.get("dataset_hash", ""))
    state.cache = AlignmentCache.from_json(meta.get("cache", {}))
    return state, meta


# -- evaluation ---------------------------------------------------------------------------------


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def predict_items(state, items, batch_size=64):
    """Decode every item; returns ``[(text, mr_graph, aligned_graph)]`` in order."""
    out = []
    max_len = state.cfg.max_len
    for chunk in _batches(items, batch_size):
        fits = [it for it in chunk if len(it.tokens) <= max_len]
        decoded = {}
        if fits:
            batch = Batch(fits, state.cfg.layers, with_targets=False)
            node_logp, edge_logp = state.model(batch.ids, batch.lengths, train=False)
            for b, it in enumerate(fits):
                nl, el = batch.example_view(node_logp.data, edge_logp.data, b)
                g = decode_graph(nl, el, len(it.tokens), state.cfg.layers, state.node_vocab, state.edge_vocab)
                decoded[id(it)] = g
        for it in chunk:
            g = decoded.get(id(it))
            if g is None:
                log.warning("example %s has %d tokens (> max_len %d); counted as wrong",
                            it.id, len(it.tokens), max_len)
                out.append(("", None, None))
            else:
                out.append((*state.task.predict(g), g))
    return out


def accuracy(state, items):
    if not items:
        return float("nan"), []
    preds = predict_items(state, items)
    hits = [mr is not None and state.task.correct(it, text, mr) for it, (text, mr, _) in zip(items, preds)]
    return sum(hits) / len(hits), hits


def _eval_items(state, split, seed):
    raw, paths = state.task.load(split, seed)
    if state.cfg.max_eval_examples:
        raw = raw[: state.cfg.max_eval_examples]
    items = [state.task.item(ex, state.cfg.layers, strict=False) for ex in raw]
    return state.encode(items), paths


def evaluate(ckpt, split, data_dir=None, predictions=None):
    """Accuracy report of a checkpoint on a split; writes one prediction per line."""
    state, meta = load_state(ckpt, data_dir)
    items, paths = _eval_items(state, split, meta.get("seed", 0))
    acc, hits = accuracy(state, items)
    preds = predict_items(state, items)
    pred_path = Path(predictions) if predictions else Path(ckpt) / f"predictions-{split}.txt"
    pred_path.write_text("".join(text + "\n" for text, _, _ in preds))
    report = {
        "split": split,
        "n": len(items),
        "accuracy": acc,
        "metric": "exact_match" if state.cfg.dataset == "cogs" else "graph_accuracy",
        "seed": meta.get("seed"),
        "config_hash": meta.get("config_hash"),
        "dataset_hash": meta.get("dataset_hash"),
        "eval_dataset_hash": dataset_hash(paths),
        "predictions": str(pred_path),
    }
    if state.cfg.dataset == "cogs":
        totals, correct = Counter(), Counter()
        for it, ok in zip(items, hits):
            totals[it.tag] += 1
            correct[it.tag] += ok
        report["cases"] = {tag: correct[tag] / totals[tag] for tag in sorted(totals)}
    return report


# -- training -------------------------------------------------------------------------------------


@dataclass
class RunResult:
    seed: int
    train_acc: float
    dev_acc: float
    checkpoint: Path
    metrics: list
    alignments: Path | None = None
    status: str = "done"


class MetricsLog:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")
        self.records = []
        self._last_step = -1

    def write(self, record):
        if record["step"] < self._last_step:
            raise ValueError("metrics steps must be non-decreasing")
        self._last_step = record["step"]
        self.records.append(record)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _alignment_key(a, s, e):
    z, xi = aligned_ids(a, s, e)
    return z.tobytes() + xi.tobytes()


def _load_train(cfg, task):
    raw, paths = task.load_train()
    if cfg.max_train_examples:
        raw = raw[: cfg.max_train_examples]
    task.fit(raw)
    items, skipped = [], Counter()
    for ex in raw:
        try:
            it = task.item(ex, cfg.layers)
        except ValueError as exc:
            skipped[type(exc).__name__] += 1
            log.warning("training example %s skipped: %s", ex.id, exc)
            continue
        if cfg.supervision == "strong" and it.gold is None:
            raise ValueError(f"example {ex.id} has no gold alignment; strong supervision impossible")
        if len(it.tokens) > cfg.max_len:
            raise ValueError(f"training example {ex.id} has {len(it.tokens)} tokens > max_len {cfg.max_len}")
        items.append(it)
    if not items:
        raise ValueError("no usable training examples")
    return items, paths, skipped


def train(cfg, alignments=None):
    """Run one training job and return its :class:`RunResult`.

    ``alignments`` (example id -> :class:`Alignment`) turns the run into a
    retrain: the dumped alignments define the aligned targets, then training
    proceeds exactly as in strong mode.
    """
    t0 = time.time()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    task = make_task(cfg)
    items, paths, skipped = _load_train(cfg, task)
    state = build_state(cfg, items, task, dataset_hash(paths))
    state.encode(items)

    if cfg.supervision == "retrain":
        if alignments is None:
            if not cfg.alignments:
                raise ValueError("retrain needs an alignment dump")
            alignments = load_alignment_dump(cfg.alignments)
        _set_targets_from_alignments(items, alignments)

    dev_items = []
    if cfg.eval_split:
        try:
            dev_items, dev_paths = _eval_items(state, cfg.eval_split, cfg.seed)
        except (FileNotFoundError, KeyError) as exc:
            log.warning("no dev evaluation: %s", exc)

    metrics = MetricsLog(cfg.metrics_path or out_dir / "metrics.jsonl")
    opt = Adam(state.model.parameters(), lr=cfg.lr, warmup=cfg.warmup, total_steps=cfg.train_steps)
    acfg = cfg.alignment
    rng_dropout = np.random.default_rng([cfg.seed, 1])
    rng_noise = np.random.default_rng([cfg.seed, 2])
    rng_order = np.random.default_rng([cfg.seed, 3])

    order, pos, epoch = np.arange(0), 0, 0
    epoch_keys, prev_keys = {}, None
    changed = None
    losses, scores = [], []

    def record(step):
        train_acc, _ = accuracy(state, items)
        dev_acc = accuracy(state, dev_items)[0] if dev_items else None
        rec = {
            "step": step,
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else None,
            "train_acc": train_acc,
            "dev_acc": dev_acc,
            "wall_time": round(time.time() - t0, 3),
        }
        if cfg.supervision == "weak":
            rec["j_mean"] = float(np.mean(scores)) if scores else None
            rec["j_min"] = float(np.min(scores)) if scores else None
            rec["changed_frac"] = changed
        metrics.write(rec)
        losses.clear()
        scores.clear()
        log.info("step %d  loss %s  train %.4f  dev %s", step, rec["loss"], train_acc, dev_acc)
        return rec

    last = None
    for step in range(1, cfg.train_steps + 1):
        if pos >= len(order):
            if epoch_keys and cfg.supervision == "weak":
                if prev_keys is not None:
                    common = [k for k in epoch_keys if k in prev_keys]
                    changed = sum(epoch_keys[k] != prev_keys[k] for k in common) / max(1, len(common))
                prev_keys, epoch_keys = epoch_keys, {}
            order, pos = rng_order.permutation(len(items)), 0
            epoch += 1
        chunk = [items[i] for i in order[pos:pos + cfg.batch_size]]
        pos += cfg.batch_size
        batch = Batch(chunk, cfg.layers)
        try:
            if cfg.supervision == "weak":
                loss, selected = weak_train_step(batch, state.model, acfg, opt, state.cache, rng_noise,
                                                 cfg.max_grad_norm or None, rng_dropout)
                for it in chunk:
                    if it.id in selected:
                        epoch_keys[it.id] = _alignment_key(selected[it.id].a, it.s_ids, it.e_ids)
                        scores.append(selected[it.id].score)
            else:
                loss = _strong_step(batch, state.model, opt, cfg.max_grad_norm, rng_dropout)
        except NonFiniteGradientError as exc:
            _dump_diverged(state, out_dir, step)
            raise TrainingDiverged(f"step {step}: {exc}") from exc
        if not np.isfinite(loss):
            _dump_diverged(state, out_dir, step)
            raise TrainingDiverged(f"step {step}: loss is {loss}")
        losses.append(loss)
        if step % cfg.eval_every == 0 or step == cfg.train_steps:
            last = record(step)
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            state.save(out_dir / f"checkpoint-{step}", step)
    if last is None:
        last = record(cfg.train_steps)

    ckpt = state.save(out_dir / "checkpoint", cfg.train_steps)
    dump = None
    if cfg.supervision == "weak":
        dump = out_dir / "alignments.jsonl"
        state.cache.dump_jsonl(dump)
    report = {
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "dataset_hash": state.data_hash,
        "train_acc": last["train_acc"],
        "dev_acc": last["dev_acc"],
        "steps": cfg.train_steps,
        "skipped": dict(skipped),
        "wall_time": round(time.time() - t0, 3),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    return RunResult(cfg.seed, last["train_acc"], last["dev_acc"], ckpt, metrics.records, dump)


def _strong_step(batch, model, opt, max_grad_norm, rng):
    for b, it in enumerate(batch.examples):
        batch.set_target(b, it.z_ids, it.xi_ids)
    node_logp, edge_logp = model(batch.ids, batch.lengths, train=True, rng=rng)
    loss = batch.loss(node_logp, edge_logp)
    opt.zero_grad()
    loss.backward()
    if max_grad_norm:
        grad_clip(opt.params, max_grad_norm)
    opt.step()
    return loss.item()


def _dump_diverged(state, out_dir, step):
    path = out_dir / f"diverged-{step}"
    log.error("training diverged at step %d; state dumped to %s", step, path)
    state.save(path, step)


def _set_targets_from_alignments(items, alignments):
    if not alignments:
        raise ValueError("alignment dump is empty")
    missing = [it.id for it in items if it.id not in alignments]
    if missing:
        raise ValueError(f"{len(missing)} training examples have no alignment, e.g. {missing[0]!r}")
    for it in items:
        a = alignments[it.id].a
        if len(a) != len(it.s_ids):
            raise ValueError(f"alignment for {it.id!r} has {len(a)} slots, target has {len(it.s_ids)}")
        it.z_ids, it.xi_ids = aligned_ids(a, it.s_ids, it.e_ids)


def retrain(alignment_dump, cfg):
    """Strong-mode training from fresh initialisation on dumped alignments."""
    alignments = load_alignment_dump(alignment_dump) if not isinstance(alignment_dump, dict) else alignment_dump
    return train(cfg.replace(supervision="retrain", alignments=str(alignment_dump)
                             if not isinstance(alignment_dump, dict) else ""), alignments)


def gold_alignments(cfg):
    """Example id -> gold :class:`Alignment` for a dataset with aligned gold graphs."""
    from .alignment import Alignment

    task = make_task(cfg)
    items, _, _ = _load_train(cfg, task)
    out = {}
    for it in items:
        if it.gold is None:
            raise ValueError(f"example {it.id} has no gold alignment")
        _, a = alignment_of(it.gold)
        out[it.id] = Alignment(a, float("nan"))
    return out


def alignment_agreement(cfg, alignments):
    """Fraction of training examples whose dumped alignment rebuilds the gold aligned graph."""
    task = make_task(cfg)
    items, _, _ = _load_train(cfg, task)
    hits = [it.id in alignments and apply_alignment(it.target, alignments[it.id].a) == it.gold
            for it in items if it.gold is not None]
    return sum(hits) / len(hits) if hits else float("nan")


# -- restarts -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    action: str  # accept | relaunch | fail
    next_seed: int | None = None


def restart_policy(train_acc, cfg, attempt=0):
    """Accept at or above the threshold, else relaunch with seed + 1 until restarts run out."""
    if train_acc >= cfg.restart_threshold:
        return Decision("accept")
    if attempt < cfg.max_restarts:
        return Decision("relaunch", cfg.seed + 1)
    return Decision("fail")


@dataclass
class RestartReport:
    status: str
    result: RunResult | None
    attempts: list  # [(seed, train_acc)]

    def summary(self):
        tried = ", ".join(f"seed {s}: {a:.4f}" for s, a in self.attempts)
        return f"{self.status} after {len(self.attempts)} attempt(s) ({tried})"


def run_with_restarts(cfg, train_fn=None):
    train_fn = train_fn or train
    attempts = []
    attempt = 0
    base_out = Path(cfg.out_dir)
    while True:
        run_cfg = cfg.replace(out_dir=str(base_out / f"seed-{cfg.seed}")) if cfg.max_restarts else cfg
        result = train_fn(run_cfg)
        attempts.append((cfg.seed, result.train_acc))
        decision = restart_policy(result.train_acc, cfg, attempt)
        if decision.action == "accept":
            return RestartReport("accepted", result, attempts)
        if decision.action == "fail":
            report = RestartReport("failed", result, attempts)
            log.error("run failed: %s", report.summary())
            return report
        log.info("train accuracy %.4f < %.4f; relaunching with seed %d",
                 result.train_acc, cfg.restart_threshold, decision.next_seed)
        cfg = cfg.replace(seed=decision.next_seed)
        attempt += 1
