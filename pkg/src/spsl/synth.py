"""Synthetic pristine/forged image corpus.

Pristine images are procedural textures. Forged images pass an elliptical,
feathered region of a texture through a decimate/up-sample chain and blend it
back. Both classes go through the same block-cosine compression levels, so the
resampling trace is the only systematic class difference.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from spsl.exceptions import InvalidConfigError, InvalidInputError
from spsl.spectral import idft2_batch
from spsl.upsample import UP_KINDS, ResampleChain

logger = logging.getLogger(__name__)

TEXTURE_KINDS = ("fractal", "gradient-speckle", "mosaic")
TEXTURE_SIZES = (32, 64, 128)
COMPRESSION_STEPS = {"none": 0.0, "light": 4 / 255, "heavy": 16 / 255}
# standard JPEG luminance table scaled so the DC entry is 1; the level's step multiplies it
QUANT_WEIGHTS = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=float,
) / 16.0
QUANT_WEIGHTS.setflags(write=False)
SPLITS = ("train", "val", "test")
PRISTINE, FORGED = "pristine", "forged"


# --------------------------------------------------------------------------- textures


@dataclass(frozen=True)
class TextureSpec:
    kind: str = "fractal"
    size: int = 64
    seed: int = 0
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise InvalidInputError(f"unknown texture kind {self.kind!r}; choose from {TEXTURE_KINDS}")
        if self.size not in TEXTURE_SIZES:
            raise InvalidInputError(f"unsupported size {self.size}; choose from {TEXTURE_SIZES}")
        if not 0.5 <= self.alpha <= 2.0:
            raise InvalidInputError("alpha must lie in [0.5, 2]")


@lru_cache(maxsize=8)
def _radial_frequency(n: int) -> np.ndarray:
    f = np.fft.fftfreq(n) * n
    r = np.hypot(f[:, None], f[None, :])
    r.setflags(write=False)
    return r


def fractal_field(n: int, alpha: float, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    """``count`` zero-mean fields with amplitude ``1/f**alpha`` and uniform random phase."""
    r = _radial_frequency(n)
    amp = np.zeros_like(r)
    amp[r > 0] = r[r > 0] ** -alpha
    phase = rng.uniform(-np.pi, np.pi, size=(count, n, n))
    fields = idft2_batch(amp * np.exp(1j * phase)).real
    return fields / fields.std(axis=(1, 2), keepdims=True)


def _fit_unit(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def _fractal(spec: TextureSpec, rng) -> np.ndarray:
    base, *own = fractal_field(spec.size, spec.alpha, rng, count=4)
    tint = rng.uniform(0.6, 1.0, size=3)
    chans = [tint[c] * base + 0.35 * own[c] for c in range(3)]
    return _fit_unit(np.stack(chans, axis=-1))


def _gradient_speckle(spec: TextureSpec, rng) -> np.ndarray:
    n = spec.size
    theta = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:n, 0:n] / (n - 1)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min())
    c0, c1 = rng.uniform(0.1, 0.9, size=(2, 3))
    img = c0 + ramp[..., None] * (c1 - c0)
    speckle = fractal_field(n, spec.alpha, rng, count=1)[0]
    grain = rng.gamma(8.0, 1 / 8.0, size=(n, n))
    img = img * grain[..., None] + 0.08 * speckle[..., None]
    return np.clip(img, 0.0, 1.0)


def _mosaic(spec: TextureSpec, rng) -> np.ndarray:
    n = spec.size
    tile = int(rng.choice([8, 16]))
    cells = n // tile
    colors = rng.uniform(0.15, 0.85, size=(cells, cells, 3))
    img = np.kron(colors, np.ones((tile, tile, 1)))
    detail = fractal_field(n, spec.alpha, rng, count=3)
    img = img + 0.06 * np.moveaxis(detail, 0, -1)
    return np.clip(img, 0.0, 1.0)


_GENERATORS = {"fractal": _fractal, "gradient-speckle": _gradient_speckle, "mosaic": _mosaic}


def gen_texture(spec: TextureSpec) -> np.ndarray:
    """Deterministic ``(size, size, 3)`` texture in [0, 1]."""
    rng = np.random.default_rng(spec.seed)
    return _GENERATORS[spec.kind](spec, rng)


def radial_log_slope(plane: np.ndarray) -> float:
    """Least-squares slope of log radially-averaged amplitude against log frequency."""
    n = plane.shape[0]
    amp = np.abs(np.fft.fft2(plane - plane.mean()))
    r = np.rint(_radial_frequency(n)).astype(int)
    radii = np.arange(1, n // 2)
    prof = np.array([amp[r == k].mean() for k in radii])
    return float(np.polyfit(np.log(radii), np.log(prof), 1)[0])


# --------------------------------------------------------------------------- forgeries


def elliptical_mask(
    size: int,
    center: tuple[float, float],
    axes: tuple[float, float],
    feather: float = 4.0,
) -> np.ndarray:
    """Soft ellipse: 1 well inside, smooth ramp of ``feather`` pixels, exactly 0 outside."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    d = np.sqrt(((yy - center[0]) / axes[0]) ** 2 + ((xx - center[1]) / axes[1]) ** 2)
    # signed distance in pixels (approximate), positive inside
    inside = (1.0 - d) * min(axes)
    t = np.clip(inside / max(feather, 1e-9), 0.0, 1.0)
    return t * t * (3 - 2 * t)


def random_mask(size: int, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    axes = tuple(float(a) for a in rng.uniform(0.22, 0.38, size=2) * size)
    center = tuple(float(c) for c in rng.uniform(0.4, 0.6, size=2) * size)
    feather = float(rng.uniform(3.0, 6.0))
    params = {"center": list(center), "axes": list(axes), "feather": feather}
    return elliptical_mask(size, center, axes, feather), params


@dataclass(frozen=True)
class ForgeryRecipe:
    chain: ResampleChain
    mask: np.ndarray = field(repr=False)
    compression: str = "none"

    def __post_init__(self):
        if self.compression not in COMPRESSION_STEPS:
            raise InvalidInputError(f"unknown compression level {self.compression!r}")
        m = np.asarray(self.mask)
        if m.ndim != 2 or m.min() < 0 or m.max() > 1:
            raise InvalidInputError("mask must be a 2D array with values in [0, 1]")

    @property
    def is_forgery(self) -> bool:
        return len(self.chain) > 0 and float(np.max(self.mask)) > 0


def apply_forgery(image, recipe: ForgeryRecipe) -> tuple[np.ndarray, str]:
    image = np.asarray(image, dtype=float)
    mask = np.asarray(recipe.mask, dtype=float)
    if mask.shape != image.shape[:2]:
        raise InvalidInputError(f"mask shape {mask.shape} does not match image {image.shape[:2]}")
    resampled = recipe.chain(image)
    if resampled.shape != image.shape:
        raise InvalidInputError(
            f"chain {recipe.chain.describe()} changes shape {image.shape} -> {resampled.shape}"
        )
    m = mask[..., None] if image.ndim == 3 else mask
    out = m * resampled + (1.0 - m) * image
    out = compress_block(out, recipe.compression)
    return out, FORGED if recipe.is_forgery else PRISTINE


@lru_cache(maxsize=4)
def dct_matrix(n: int = 8) -> np.ndarray:
    """Orthonormal DCT-II matrix; rows are basis vectors."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    m[0] /= np.sqrt(2.0)
    m.setflags(write=False)
    return m


def compress_block(image, level: str = "light", block: int = 8) -> np.ndarray:
    """Quantize 8x8 block cosine coefficients and clamp to [0, 1].

    Coefficient ``(u, v)`` is quantized with ``step * QUANT_WEIGHTS[u, v]``, where
    ``step`` is the level's scalar. A flat step adds blocking noise to rough
    textures instead of removing their fine detail.
    """
    if level not in COMPRESSION_STEPS:
        raise InvalidInputError(f"unknown compression level {level!r}")
    image = np.asarray(image, dtype=float)
    h, w = image.shape[:2]
    if block != 8:
        raise InvalidInputError("only 8x8 blocks are supported")
    if h % block or w % block:
        raise InvalidInputError(f"image dims {h}x{w} not divisible by {block}")
    step = COMPRESSION_STEPS[level]
    if step == 0:
        return image.copy()
    squeeze = image.ndim == 2
    x = image[..., None] if squeeze else image
    c = x.shape[-1]
    d = dct_matrix(block)
    blocks = x.reshape(h // block, block, w // block, block, c)
    coef = np.einsum("ki,aibjc,lj->akblc", d, blocks, d)
    q = step * QUANT_WEIGHTS[None, :, None, :, None]
    coef = np.round(coef / q) * q
    rec = np.einsum("ki,akblc,lj->aibjc", d, coef, d).reshape(h, w, c)
    rec = np.clip(rec, 0.0, 1.0)
    return rec[..., 0] if squeeze else rec


def psnr(a, b) -> float:
    mse = float(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2))
    return float("inf") if mse == 0 else 10 * np.log10(1.0 / mse)


# --------------------------------------------------------------------------- corpus


@dataclass
class CorpusConfig:
    n_per_class: int = 2000
    size: int = 64
    texture_kinds: tuple[str, ...] = TEXTURE_KINDS
    kernels: tuple[str, ...] = ("nearest", "bilinear", "bicubic")
    chain_lengths: tuple[int, ...] = (1, 2, 3)
    compression_levels: tuple[str, ...] = ("none", "light", "heavy")
    split_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    cross_distribution: bool = False
    train_kernels: tuple[str, ...] = ("bilinear", "nearest")
    test_kernels: tuple[str, ...] = ("bicubic",)
    seed: int = 0

    def __post_init__(self):
        for name in ("texture_kinds", "kernels", "chain_lengths", "compression_levels",
                     "split_fractions", "train_kernels", "test_kernels"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.n_per_class < 3:
            raise InvalidConfigError("n_per_class must be >= 3")
        if self.size not in TEXTURE_SIZES:
            raise InvalidConfigError(f"size must be one of {TEXTURE_SIZES}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise InvalidConfigError("split fractions must sum to 1")
        for k in self.kernels + self.train_kernels + self.test_kernels:
            if k not in UP_KINDS or k == "zero-insert":
                raise InvalidConfigError(f"unsupported forgery kernel {k!r}")
        if self.cross_distribution and set(self.train_kernels) & set(self.test_kernels):
            raise InvalidConfigError("cross-distribution kernels must not overlap")
        if not self.kernels or not self.train_kernels or not self.test_kernels:
            raise InvalidConfigError("kernel lists must be non-empty")
        for lvl in self.compression_levels:
            if lvl not in COMPRESSION_STEPS:
                raise InvalidConfigError(f"unknown compression level {lvl!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def kernels_for(self, split: str) -> tuple[str, ...]:
        if not self.cross_distribution:
            return self.kernels
        return self.test_kernels if split == "test" else self.train_kernels


@dataclass
class ManifestEntry:
    id: int
    path: str
    label: str
    split: str
    seed: int
    compression: str
    texture: dict
    recipe: dict | None

    @property
    def y(self) -> int:
        return int(self.label == FORGED)

    @property
    def group(self) -> str:
        """Recipe kind used for grouping: the up-sampling kernel, or 'pristine'."""
        return self.recipe["kernel"] if self.recipe else PRISTINE


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    seed: int
    params: dict
    root: Path | None = None

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def kernels_in(self, split: str) -> set[str]:
        return {e.recipe["kernel"] for e in self.split(split) if e.recipe}

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "params": self.params,
            "entries": [asdict(e) for e in self.entries],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def validate(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("duplicate ids in manifest")
        for e in self.entries:
            if e.split not in SPLITS:
                raise InvalidInputError(f"entry {e.id}: unknown split {e.split!r}")
            if e.label == FORGED and not e.recipe:
                raise InvalidInputError(f"entry {e.id}: forged entry without recipe")
        for s in SPLITS:
            part = self.split(s)
            if not part:
                continue
            frac = sum(e.label == FORGED for e in part) / len(part)
            if abs(frac - 0.5) > 0.01:
                raise InvalidInputError(f"split {s} is unbalanced ({frac:.3f} forged)")


def _sample_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([global_seed, index]).generate_state(1, np.uint64)[0])


def _split_sizes(n: int, fractions) -> list[int]:
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return [n_train, n_val, n - n_train - n_val]


def synthesize(config: CorpusConfig):
    """Yield ``(entry, image)`` pairs in id order. Entry paths are relative to the corpus root."""
    sizes = _split_sizes(config.n_per_class, config.split_fractions)
    next_id = 0
    for split, n_split in zip(SPLITS, sizes):
        kernels = config.kernels_for(split)
        combos = [(k, t) for t in config.chain_lengths for k in kernels]
        for label in (PRISTINE, FORGED):
            for i in range(n_split):
                seed = _sample_seed(config.seed, next_id)
                rng = np.random.default_rng(seed)
                tex = TextureSpec(
                    kind=config.texture_kinds[next_id % len(config.texture_kinds)],
                    size=config.size,
                    seed=int(rng.integers(2**63)),
                    alpha=float(np.round(rng.uniform(0.5, 2.0), 6)),
                )
                image = gen_texture(tex)
                if label == PRISTINE:
                    level = config.compression_levels[i % len(config.compression_levels)]
                    recipe_doc = None
                    out = compress_block(image, level)
                else:
                    kernel, t = combos[i % len(combos)]
                    level = config.compression_levels[(i // len(combos)) % len(config.compression_levels)]
                    mask, mask_params = random_mask(config.size, rng)
                    chain = ResampleChain.decoder(kernel, 2, t)
                    out, got = apply_forgery(image, ForgeryRecipe(chain, mask, level))
                    assert got == FORGED
                    recipe_doc = {"kernel": kernel, "t": t, "chain": chain.describe(), "mask": mask_params}
                entry = ManifestEntry(
                    id=next_id,
                    path=f"{split}/{label}/{next_id:04d}.png",
                    label=label,
                    split=split,
                    seed=seed,
                    compression=level,
                    texture=asdict(tex),
                    recipe=recipe_doc,
                )
                next_id += 1
                yield entry, out


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=list).encode()).hexdigest()[:16]


def build_corpus(config: CorpusConfig, out_dir) -> CorpusManifest:
    """Write all images and ``manifest.json`` under ``out_dir``."""
    from spsl.io import write_image

    root = Path(out_dir)
    entries = []
    for entry, image in synthesize(config):
        path = root / entry.path
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            write_image(path, image)
        except OSError as exc:
            raise OSError(f"failed to write {path}: {exc}") from exc
        entries.append(entry)
    params = asdict(config)
    manifest = CorpusManifest(entries=entries, seed=config.seed, params=params, root=root)
    manifest.validate()
    (root / "manifest.json").write_text(manifest.to_json())
    logger.info("wrote %d images to %s", len(entries), root)
    return manifest


def load_manifest(path) -> CorpusManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    doc = json.loads(path.read_text())
    entries = [ManifestEntry(**e) for e in doc["entries"]]
    return CorpusManifest(entries=entries, seed=doc["seed"], params=doc["params"], root=path.parent)


def load_images(manifest: CorpusManifest, split: str | None = None):
    """Return ``(images, labels, entries)`` for a split (or everything)."""
    from spsl.io import read_image

    entries = manifest.entries if split is None else manifest.split(split)
    if manifest.root is None:
        raise InvalidInputError("manifest has no root directory")
    images = np.stack([read_image(manifest.root / e.path) for e in entries]) if entries else np.empty((0,))
    labels = np.array([e.y for e in entries], dtype=int)
    return images, labels, entries


def texture_stack(n: int, size: int = 64, seed: int = 0, kinds=TEXTURE_KINDS) -> np.ndarray:
    """``n`` pristine textures cycling through ``kinds`` with alpha drawn from [0.5, 2]."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    out = np.empty((n, size, size, 3))
    for i in range(n):
        rng = np.random.default_rng(_sample_seed(seed, i))
        spec = TextureSpec(kinds[i % len(kinds)], size, int(rng.integers(2**63)),
                           float(np.round(rng.uniform(0.5, 2.0), 6)))
        out[i] = gen_texture(spec)
    return out
