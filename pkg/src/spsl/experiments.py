"""Trained comparisons on the synthetic corpus.

The cross-distribution corpus mode holds one resampling kernel out of training
and uses it for every forged test sample; "cross" AUC always refers to that
held-out-kernel test split, "in" AUC to the validation split, whose kernels match
training.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from spsl import net as _net
from spsl.io import to_uint8
from spsl.exceptions import InvalidConfigError, InvalidInputError, SPSLError
from spsl.metrics import MetricsReport, auc_roc
from spsl.spectral import PHASE_MODES, make_rgbp_batch, phase_only_batch
from spsl.synth import PRISTINE, SPLITS, CorpusConfig, CorpusManifest, config_hash, load_images, synthesize

logger = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    """Corpus plus training settings shared by every trained cell."""

    corpus: CorpusConfig = field(
        default_factory=lambda: CorpusConfig(n_per_class=300, size=64, cross_distribution=True)
    )
    max_epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 2e-3
    patience: int = 5
    phase_mode: str = "abs-phase"
    width: float = 1.0

    def __post_init__(self):
        if isinstance(self.corpus, dict):
            self.corpus = CorpusConfig.from_dict(self.corpus)
        if self.phase_mode not in PHASE_MODES:
            raise InvalidConfigError(f"unknown phase mode {self.phase_mode!r}")
        if self.max_epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0 or self.patience < 1:
            raise InvalidConfigError("max_epochs, batch_size, patience and learning_rate must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def train_config(self, seed: int) -> _net.TrainConfig:
        return _net.TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=seed,
        )


# --------------------------------------------------------------------------- data


@dataclass
class Dataset:
    images: dict[str, np.ndarray]
    labels: dict[str, np.ndarray]
    entries: dict[str, list]
    corpus_hash: str
    cross_distribution: bool
    _rgbp: dict = field(default_factory=dict, repr=False)

    def inputs(self, split: str, phase: bool, mode: str = "abs-phase") -> np.ndarray:
        if not phase:
            return self.images[split]
        key = (split, mode)
        if key not in self._rgbp:
            self._rgbp[key] = make_rgbp_batch(self.images[split], mode)
        return self._rgbp[key]


def load_dataset(source) -> Dataset:
    """Images and labels per split from a ``CorpusConfig`` (built in memory) or a manifest on disk.

    In-memory samples are quantized to 8 bits exactly as the PNG writer does.
    """
    if isinstance(source, CorpusConfig):
        parts = {s: ([], [], []) for s in SPLITS}
        for entry, image in synthesize(source):
            img, lab, ent = parts[entry.split]
            img.append(to_uint8(image) / 255.0)
            lab.append(entry.y)
            ent.append(entry)
        images = {s: np.stack(p[0]) for s, p in parts.items() if p[0]}
        labels = {s: np.array(p[1], dtype=int) for s, p in parts.items() if p[0]}
        entries = {s: p[2] for s, p in parts.items() if p[0]}
        return Dataset(images, labels, entries, config_hash(asdict(source)), source.cross_distribution)
    if isinstance(source, CorpusManifest):
        images, labels, entries = {}, {}, {}
        for s in SPLITS:
            if source.split(s):
                images[s], labels[s], entries[s] = load_images(source, s)
        return Dataset(images, labels, entries, config_hash(source.params),
                       bool(source.params.get("cross_distribution", False)))
    raise InvalidInputError(f"cannot load a dataset from {type(source).__name__}")


def _require_splits(data: Dataset, splits=SPLITS) -> None:
    for s in splits:
        if s not in data.images or len(np.unique(data.labels[s])) < 2:
            raise InvalidInputError(f"corpus split {s!r} is missing or has a single class")


# --------------------------------------------------------------------------- train / evaluate


def evaluate(config: _net.NetConfig, params: dict, X, y, tags: dict | None = None) -> MetricsReport:
    proba = _net.predict_proba(config, params, X)
    return MetricsReport.from_probabilities(proba, y, tags)


@dataclass
class CellRun:
    cell: str
    seed: int
    net: _net.NetConfig
    result: _net.TrainResult
    in_auc: float
    cross_auc: float


def run_cell(data: Dataset, settings: ExperimentConfig, phase: bool, blocks, seed: int, cell: str) -> CellRun:
    """Train one configuration on the train split and score val (in) and test (cross)."""
    net = _net.build_net(4 if phase else 3, blocks, settings.width)
    X = {s: data.inputs(s, phase, settings.phase_mode) for s in SPLITS}
    try:
        res = _net.train(net, settings.train_config(seed), X["train"], data.labels["train"],
                         X["val"], data.labels["val"])
    except SPSLError as exc:
        exc.cell = cell
        exc.args = (f"cell {cell}, seed {seed}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    p_val = _net.predict_proba(net, res.params, X["val"])[:, 1]
    p_test = _net.predict_proba(net, res.params, X["test"])[:, 1]
    in_auc = auc_roc(p_val, data.labels["val"])
    cross_auc = auc_roc(p_test, data.labels["test"])
    logger.info("%s seed %d: in %.4f cross %.4f (best epoch %d)", cell, seed, in_auc, cross_auc, res.best_epoch)
    return CellRun(cell, seed, net, res, in_auc, cross_auc)


# --------------------------------------------------------------------------- ablation


@dataclass(frozen=True)
class AblationCell:
    phase: bool
    shallow: bool
    cross_auc: float
    cross_auc_std: float
    in_auc: float
    in_auc_std: float
    cross_per_seed: tuple[float, ...]
    in_per_seed: tuple[float, ...]

    @property
    def name(self) -> str:
        return f"{'RGBP' if self.phase else 'RGB'}/{'shallow' if self.shallow else 'deep'}"


ABLATION_ORDER = ((False, False), (True, False), (False, True), (True, True))


@dataclass
class AblationResult:
    cells: list[AblationCell]
    seeds: tuple[int, ...]
    config_hash: str
    corpus_hash: str

    def cell(self, phase: bool, shallow: bool) -> AblationCell:
        return next(c for c in self.cells if c.phase == phase and c.shallow == shallow)

    def checks(self) -> dict[str, bool]:
        """Directional outcomes on the seed-mean cross AUC."""
        m = {(c.phase, c.shallow): c.cross_auc for c in self.cells}
        best = max(m.values())
        return {
            "phase_helps_deep": m[(True, False)] > m[(False, False)],
            "phase_helps_shallow": m[(True, True)] > m[(False, True)],
            "spsl_is_max": m[(True, True)] == best,
        }

    @property
    def directional_pass(self) -> bool:
        return all(self.checks().values())

    def rows(self) -> list[list]:
        out = []
        for c in self.cells:
            out.append([
                "on" if c.phase else "off", "on" if c.shallow else "off", c.name,
                f"{c.cross_auc:.6f}", f"{c.cross_auc_std:.6f}", f"{c.in_auc:.6f}", f"{c.in_auc_std:.6f}",
                " ".join(map(str, self.seeds)), " ".join(f"{v:.6f}" for v in c.cross_per_seed),
                self.config_hash,
            ])
        return out

    HEADER = ["phase", "shallow", "cell", "cross_auc_mean", "cross_auc_std", "in_auc_mean",
              "in_auc_std", "seeds", "cross_auc_per_seed", "config_hash"]

    def to_csv(self, path=None) -> str:
        return _csv(self.HEADER, self.rows(), path)


def ablation_matrix(data: Dataset, seeds=(0, 1, 2), settings: ExperimentConfig | None = None,
                    runs: list | None = None) -> AblationResult:
    """RGB/RGBP x deep/shallow, each trained once per seed; mean and std of the AUCs."""
    settings = settings or ExperimentConfig()
    if not data.cross_distribution:
        raise InvalidInputError("the ablation needs a cross-distribution corpus (held-out test kernel)")
    _require_splits(data)
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise InvalidInputError("need at least one seed")
    cells = []
    for phase, shallow in ABLATION_ORDER:
        blocks = _net.SHALLOW_BLOCKS if shallow else tuple(range(1, _net.N_BACKBONE_BLOCKS + 1))
        name = f"{'RGBP' if phase else 'RGB'}/{'shallow' if shallow else 'deep'}"
        cross, inn = [], []
        for seed in seeds:
            run = run_cell(data, settings, phase, blocks, seed, name)
            if runs is not None:
                runs.append(run)
            cross.append(run.cross_auc)
            inn.append(run.in_auc)
        cells.append(AblationCell(phase, shallow, float(np.mean(cross)), float(np.std(cross)),
                                  float(np.mean(inn)), float(np.std(inn)), tuple(cross), tuple(inn)))
    return AblationResult(cells, seeds, settings.hash(), data.corpus_hash)


# --------------------------------------------------------------------------- depth sweep


@dataclass
class DepthSweepResult:
    rows_: list[tuple]
    config_hash: str
    phase: bool

    HEADER = ["depth", "seed", "rf", "in_auc", "cross_auc", "config_hash"]

    def aggregates(self) -> list[tuple]:
        out = []
        for d in sorted({r[0] for r in self.rows_}):
            sel = [r for r in self.rows_ if r[0] == d]
            out.append((d, "mean", sel[0][2], float(np.mean([r[3] for r in sel])),
                        float(np.mean([r[4] for r in sel]))))
        return out

    def rows(self) -> list[list]:
        body = [list(r) for r in self.rows_] + [list(r) for r in self.aggregates()]
        return [[d, s, rf, f"{a:.6f}", f"{b:.6f}", self.config_hash] for d, s, rf, a, b in body]

    def to_csv(self, path=None) -> str:
        return _csv(self.HEADER, self.rows(), path)


def depth_sweep(data: Dataset, depths=(2, 3, 4, 5, 6), seeds=(0, 1, 2),
                settings: ExperimentConfig | None = None, phase: bool = True) -> DepthSweepResult:
    """Train ``depth_blocks(d)`` nets for each depth and seed; record rf and both AUCs."""
    settings = settings or ExperimentConfig()
    _require_splits(data)
    depths = [int(d) for d in depths]
    if not depths or min(depths) < 1:
        raise InvalidConfigError("depths must be >= 1")
    rows = []
    for d in depths:
        blocks = _net.depth_blocks(d)
        rf = _net.receptive_field(_net.build_net(4 if phase else 3, blocks, settings.width)).head.size
        for seed in seeds:
            run = run_cell(data, settings, phase, blocks, int(seed), f"depth{d}")
            rows.append((d, int(seed), rf, run.in_auc, run.cross_auc))
    return DepthSweepResult(rows, settings.hash(), phase)


# --------------------------------------------------------------------------- fingerprints

MIN_GROUP = 10


@dataclass
class FingerprintResult:
    fingerprints: dict[str, np.ndarray]
    inter: dict[tuple[str, str], float]
    intra: dict[str, float]
    counts: dict[str, int]
    mode: str

    @property
    def score(self) -> float:
        """Mean inter-group distance over mean intra-group (split-half) distance."""
        intra = float(np.mean(list(self.intra.values())))
        inter = float(np.mean(list(self.inter.values())))
        return float("inf") if intra == 0 else inter / intra

    def rows(self) -> list[list]:
        out = [["inter", a, b, f"{v:.8f}"] for (a, b), v in sorted(self.inter.items())]
        out += [["intra", g, g, f"{v:.8f}"] for g, v in sorted(self.intra.items())]
        out.append(["score", "", "", f"{self.score:.8f}"])
        return out

    def to_csv(self, path=None) -> str:
        return _csv(["kind", "group_a", "group_b", "value"], self.rows(), path)


def phase_fingerprint(groups: dict[str, np.ndarray], mode: str = "abs-phase") -> FingerprintResult:
    """Per-group mean phase-only image and a separability score.

    Intra-group distance is the L2 distance between the fingerprints of the even-
    and odd-indexed halves of a group; inter-group distance is the L2 distance
    between full-group fingerprints.
    """
    if len(groups) < 2:
        raise InvalidInputError("need at least two groups")
    fps, intra, counts = {}, {}, {}
    for name, imgs in groups.items():
        imgs = np.asarray(imgs, dtype=float)
        if len(imgs) < MIN_GROUP:
            raise InvalidInputError(f"group {name!r} has {len(imgs)} samples; need >= {MIN_GROUP}")
        maps = phase_only_batch(imgs, mode)
        fps[name] = maps.mean(axis=0)
        intra[name] = float(np.linalg.norm(maps[0::2].mean(axis=0) - maps[1::2].mean(axis=0)))
        counts[name] = len(imgs)
    names = sorted(fps)
    inter = {
        (a, b): float(np.linalg.norm(fps[a] - fps[b]))
        for i, a in enumerate(names) for b in names[i + 1:]
    }
    return FingerprintResult(fps, inter, intra, counts, mode)


def recipe_groups(data: Dataset, splits=SPLITS, include_pristine: bool = False) -> dict[str, np.ndarray]:
    """Group corpus images by up-sampling kernel (and optionally the pristine class)."""
    out: dict[str, list] = {}
    for s in splits:
        if s not in data.images:
            continue
        for img, e in zip(data.images[s], data.entries[s]):
            if e.group == PRISTINE and not include_pristine:
                continue
            out.setdefault(e.group, []).append(img)
    return {k: np.stack(v) for k, v in sorted(out.items())}


# --------------------------------------------------------------------------- helpers


def _csv(header, rows, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
