"""Up-sampling operators and the frequency-domain checks built on them.

Component counting follows the polynomial reading of the item counts: a spectrum
with terms at degrees ``S`` convolved with a kernel with terms at degrees ``T``
has terms at the Minkowski sum ``S + T``. ``coefficient_supports`` builds those
sequences explicitly so the closed-form counts can be checked constructively.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from spsl.exceptions import InvalidInputError
from spsl.spectral import (
    dft1,
    dft2_batch,
    idft1,
    idft2_batch,
    luminance,
    minmax_normalize,
    phase_only_batch,
    to_polar,
)

UP_KINDS = ("zero-insert", "nearest", "bilinear", "bicubic")
KINDS = UP_KINDS + ("decimate",)


# --------------------------------------------------------------------------- 1D


def upsample_zero_insert(signal, factor: int = 2) -> np.ndarray:
    """Place ``x[n]`` at index ``factor*n`` and zeros everywhere else."""
    x = np.asarray(signal)
    if x.ndim != 1:
        raise InvalidInputError("expected a 1D signal")
    if factor < 2:
        raise InvalidInputError("up-sampling factor must be >= 2")
    out = np.zeros(x.size * factor, dtype=x.dtype)
    out[::factor] = x
    return out


def verify_duplication(signal) -> float:
    """Max deviation from ``Xup[u] = X[u mod N] / 2`` for zero-insert up-sampling by 2."""
    x = np.asarray(signal, dtype=float)
    X = dft1(x)
    Xup = dft1(upsample_zero_insert(x, 2))
    u = np.arange(Xup.size)
    return float(np.max(np.abs(Xup - 0.5 * X[u % x.size])))


def count_significant(spectrum, epsilon: float = 1e-3) -> int:
    """Number of coefficients with modulus above ``epsilon`` times the largest modulus."""
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    mod = np.abs(np.asarray(spectrum))
    top = mod.max() if mod.size else 0.0
    if top == 0:
        return 0
    return int(np.count_nonzero(mod > epsilon * top))


@dataclass(frozen=True)
class ComponentCountModel:
    N: int
    k: int
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.N < 1:
            raise InvalidInputError("N must be >= 1")
        if not 0 <= self.k <= self.N - 1:
            raise InvalidInputError(f"k must lie in [0, N-1], got k={self.k}, N={self.N}")
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be positive")


@dataclass(frozen=True)
class ComponentCounts:
    X_A: int
    X_P: int
    X_A_up: int
    X_P_up: int
    Y_A: int
    Y_A_up: int
    Y_AP: int
    Y_AP_up: int


def predicted_counts(model: ComponentCountModel, y_a_up: str = "labeled") -> ComponentCounts:
    """Closed-form item counts before/after up-sampling and after one convolution.

    The up-sampled amplitude-path count after convolution is ambiguous: its label
    says ``2N`` items while its indices run to ``2N+k-1``. ``y_a_up`` selects
    ``"labeled"`` (2N) or ``"indexed"`` (2N+k).
    """
    N, k = model.N, model.k
    if y_a_up == "labeled":
        ya_up = 2 * N
    elif y_a_up == "indexed":
        ya_up = 2 * N + k
    else:
        raise InvalidInputError(f"y_a_up must be 'labeled' or 'indexed', got {y_a_up!r}")
    return ComponentCounts(
        X_A=k + 1,
        X_P=N,
        X_A_up=2 * (k + 1),
        X_P_up=2 * N,
        Y_A=N + k,
        Y_A_up=ya_up,
        Y_AP=2 * N - 1,
        Y_AP_up=3 * N - 1,
    )


def component_signal(N: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """A real length-``N`` signal whose DFT has exactly ``k + 1`` non-zero coefficients.

    Uses DC, the Nyquist bin when ``k + 1`` is even, and conjugate pairs for the rest.
    """
    ComponentCountModel(N, k)
    n_items = k + 1
    use_nyquist = n_items % 2 == 0
    n_pairs = (n_items - 1 - int(use_nyquist)) // 2
    if use_nyquist and N % 2:
        raise InvalidInputError("an even number of components in a real signal needs even N")
    if n_pairs > (N - 1) // 2:
        raise InvalidInputError("not enough conjugate pairs for this k")
    X = np.zeros(N, dtype=complex)
    X[0] = rng.uniform(0.5, 1.0)
    if use_nyquist:
        X[N // 2] = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0)
    bins = rng.choice(np.arange(1, (N + 1) // 2), size=n_pairs, replace=False)
    for b in bins:
        c = rng.uniform(0.2, 1.0) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        X[b] = c
        X[N - b] = np.conj(c)
    return idft1(X).real


def phase_only_signal(signal) -> np.ndarray:
    """Inverse transform of ``exp(j*phase)`` of a 1D signal's spectrum."""
    _, phase = to_polar(dft1(signal))
    return idft1(np.exp(1j * phase)).real


def coefficient_supports(model: ComponentCountModel, rng: np.random.Generator) -> ComponentCounts:
    """Count items by explicitly multiplying random coefficient sequences.

    Amplitude terms occupy degrees ``0..k``, phase terms ``0..N-1``, up-sampling
    duplicates a sequence at offset ``N``, and the kernel is a generic ``N``-term
    sequence. Products are linear convolutions of the coefficient vectors. Terms are
    positive so no product coefficient can cancel below the threshold.
    """
    N, k, eps = model.N, model.k, model.epsilon

    def terms(n):
        return rng.uniform(0.5, 1.5, n)

    amp = terms(k + 1)
    pha = terms(N)
    kernel = terms(N)
    amp_up = np.concatenate([amp, np.zeros(N - k - 1), amp])
    pha_up = np.concatenate([pha, pha])

    def items(seq):
        return count_significant(seq, eps)

    return ComponentCounts(
        X_A=items(amp),
        X_P=items(pha),
        X_A_up=items(amp_up),
        X_P_up=items(pha_up),
        Y_A=items(np.convolve(amp, kernel)),
        Y_A_up=items(np.convolve(amp_up, kernel)),
        Y_AP=items(np.convolve(_pad(amp, N) + pha, kernel)),
        Y_AP_up=items(np.convolve(_pad(amp_up, 2 * N) + pha_up, kernel)),
    )


def _pad(seq: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=seq.dtype)
    out[: seq.size] = seq
    return out


def convolve_circular(signal, kernel) -> np.ndarray:
    """Direct circular convolution; the kernel is zero-padded to the signal length."""
    x = np.asarray(signal)
    c = np.asarray(kernel)
    if c.size == 0:
        raise InvalidInputError("empty kernel")
    if x.ndim != 1 or c.ndim != 1:
        raise InvalidInputError("signal and kernel must be 1D")
    if c.size > x.size:
        raise InvalidInputError("kernel longer than signal")
    out = np.zeros(x.size, dtype=np.result_type(x, c, float))
    for m, cm in enumerate(c):
        out += cm * np.roll(x, m)
    return out


def check_distributive(f, g, h) -> float:
    """Max deviation between ``(f+g) * h`` and ``f*h + g*h`` under circular convolution."""
    f, g, h = (np.asarray(a, dtype=float) for a in (f, g, h))
    n = max(f.size, g.size, h.size)
    f, g = _pad(f, n), _pad(g, n)
    lhs = convolve_circular(f + g, h)
    rhs = convolve_circular(f, h) + convolve_circular(g, h)
    return float(np.max(np.abs(lhs - rhs)))


# --------------------------------------------------------------------------- 2D


def _keys_cubic(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    return np.where(
        t <= 1,
        (a + 2) * t**3 - (a + 3) * t**2 + 1,
        np.where(t < 2, a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a, 0.0),
    )


@lru_cache(maxsize=128)
def resample_matrix(kind: str, factor: int, n: int) -> np.ndarray:
    """1D operator mapping ``n`` samples to the resampled length.

    Interpolating kinds use half-pixel alignment and clamp-to-edge borders.
    """
    if kind == "decimate":
        m = np.zeros((-(-n // factor), n))
        m[np.arange(m.shape[0]), np.arange(0, n, factor)] = 1.0
        return m
    out_n = n * factor
    m = np.zeros((out_n, n))
    o = np.arange(out_n)
    if kind == "zero-insert":
        m[o[::factor], o[::factor] // factor] = 1.0
        return m
    if kind == "nearest":
        m[o, o // factor] = 1.0
        return m
    src = (o + 0.5) / factor - 0.5
    base = np.floor(src).astype(int)
    if kind == "bilinear":
        taps = [(0, 1 - (src - base)), (1, src - base)]
    elif kind == "bicubic":
        taps = [(d, _keys_cubic(src - (base + d))) for d in (-1, 0, 1, 2)]
    else:
        raise InvalidInputError(f"unknown resample kind {kind!r}")
    for d, w in taps:
        np.add.at(m, (o, np.clip(base + d, 0, n - 1)), w)
    return m


@dataclass(frozen=True)
class ResampleOp:
    kind: str
    factor: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown resample kind {self.kind!r}; choose from {KINDS}")
        if self.factor < 2:
            raise InvalidInputError("resample factor must be >= 2")

    def __call__(self, image) -> np.ndarray:
        """Resample an ``(H, W)``, ``(H, W, C)`` or ``(n, H, W, C)`` array."""
        x = np.asarray(image, dtype=float)
        if x.ndim == 2:
            h_ax, w_ax = 0, 1
        elif x.ndim == 3:
            h_ax, w_ax = 0, 1
        elif x.ndim == 4:
            h_ax, w_ax = 1, 2
        else:
            raise InvalidInputError(f"cannot resample array of shape {x.shape}")
        mh = resample_matrix(self.kind, self.factor, x.shape[h_ax])
        mw = resample_matrix(self.kind, self.factor, x.shape[w_ax])
        x = np.moveaxis(np.tensordot(mh, x, axes=([1], [h_ax])), 0, h_ax)
        x = np.moveaxis(np.tensordot(mw, x, axes=([1], [w_ax])), 0, w_ax)
        return x

    def describe(self) -> str:
        return f"{self.kind}x{self.factor}"


@dataclass(frozen=True)
class ResampleChain:
    ops: tuple[ResampleOp, ...] = field(default_factory=tuple)

    def __call__(self, image) -> np.ndarray:
        x = np.asarray(image, dtype=float)
        for op in self.ops:
            x = op(x)
        return x

    def __len__(self):
        return len(self.ops)

    def __add__(self, other: "ResampleChain") -> "ResampleChain":
        return ResampleChain(self.ops + other.ops)

    def __mul__(self, times: int) -> "ResampleChain":
        return ResampleChain(self.ops * times)

    def describe(self) -> str:
        return "+".join(op.describe() for op in self.ops) or "identity"

    @classmethod
    def round_trip(cls, kind: str, factor: int = 2, times: int = 1) -> "ResampleChain":
        """Up-sample by ``factor`` with ``kind`` and decimate back, ``times`` times."""
        return cls((ResampleOp(kind, factor), ResampleOp("decimate", factor))) * times

    @classmethod
    def decoder(cls, kind: str, factor: int = 2, times: int = 1) -> "ResampleChain":
        """Decimate then up-sample with ``kind``, ``times`` times (a decoder surrogate)."""
        return cls((ResampleOp("decimate", factor), ResampleOp(kind, factor))) * times


# --------------------------------------------------------------------------- sweep


@dataclass
class SpectralDiffReport:
    kind: str
    t: list[int]
    phase_mean: list[float]
    phase_var: list[float]
    amp_mean: list[float]
    amp_var: list[float]
    n_images: int

    def rows(self) -> list[tuple]:
        return list(zip(self.t, self.phase_mean, self.phase_var, self.amp_mean, self.amp_var))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "phase_mean", "phase_var", "amp_mean", "amp_var"])
        for t, pm, pv, am, av in self.rows():
            writer.writerow([t, repr(pm), repr(pv), repr(am), repr(av)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _divergence_maps(planes: np.ndarray, domain: str, phase_mode: str) -> tuple[np.ndarray, np.ndarray]:
    """(phase map, amplitude map) on the original grid, both scaled to [0, 1]."""
    spectrum = dft2_batch(planes)
    amplitude, phase = to_polar(spectrum)
    if domain == "spectrum":
        size = planes.shape[-1] * planes.shape[-2]
        return (phase + np.pi) / (2 * np.pi), minmax_normalize(np.log1p(amplitude * size))
    amp_only = minmax_normalize(idft2_batch(amplitude.astype(complex)).real)
    return phase_only_batch(planes, phase_mode), amp_only


def fig1_sweep(
    corpus: Iterable[np.ndarray] | np.ndarray,
    kind: str = "bilinear",
    max_t: int = 5,
    phase_mode: str = "unit-amplitude",
    domain: str = "spatial",
    batch_size: int = 256,
) -> SpectralDiffReport:
    """Phase/amplitude map divergence as a function of cumulative up-sampling.

    Step ``t`` applies ``t`` rounds of (up-sample x2 with ``kind``, decimate x2) so
    every map lives on the original grid. For each image the mean and variance of
    ``|map_t - map_0|`` over pixels are taken, then averaged over the corpus.

    ``domain="spatial"`` compares the phase-only reconstruction (amplitude
    discarded) with the amplitude-only reconstruction (phase discarded).
    ``domain="spectrum"`` compares the phase grid scaled from (-pi, pi] and the
    min-max scaled log-amplitude grid. Images must share one shape. Nearest and
    zero-insert round trips are exact identities, so their rows stay at zero.
    """
    if kind not in UP_KINDS:
        raise InvalidInputError(f"sweep kind must be one of {UP_KINDS}")
    if domain not in ("spatial", "spectrum"):
        raise InvalidInputError("domain must be 'spatial' or 'spectrum'")
    if max_t < 0:
        raise InvalidInputError("max_t must be >= 0")
    images = np.asarray(list(corpus) if not isinstance(corpus, np.ndarray) else corpus, dtype=float)
    if len(images) == 0:
        raise InvalidInputError("empty corpus")
    if images.ndim not in (3, 4):
        raise InvalidInputError(f"corpus must stack to (n, H, W[, C]), got {images.shape}")
    step = ResampleChain.round_trip(kind, 2, 1)
    n = len(images)
    sums = np.zeros((max_t + 1, 4))
    for start in range(0, n, batch_size):
        planes = luminance(images[start : start + batch_size])
        p0, a0 = _divergence_maps(planes, domain, phase_mode)
        cur = planes
        for t in range(1, max_t + 1):
            cur = step(cur[..., None])[..., 0]
            pt, at = _divergence_maps(cur, domain, phase_mode)
            dp, da = np.abs(pt - p0), np.abs(at - a0)
            sums[t] += [
                dp.mean(axis=(1, 2)).sum(),
                dp.var(axis=(1, 2)).sum(),
                da.mean(axis=(1, 2)).sum(),
                da.var(axis=(1, 2)).sum(),
            ]
    avg = sums / n
    return SpectralDiffReport(
        kind=kind,
        t=list(range(max_t + 1)),
        phase_mean=avg[:, 0].tolist(),
        phase_var=avg[:, 1].tolist(),
        amp_mean=avg[:, 2].tolist(),
        amp_var=avg[:, 3].tolist(),
        n_images=n,
    )


__all__ = [
    "ComponentCountModel",
    "ComponentCounts",
    "ResampleChain",
    "ResampleOp",
    "SpectralDiffReport",
    "check_distributive",
    "coefficient_supports",
    "component_signal",
    "convolve_circular",
    "count_significant",
    "fig1_sweep",
    "phase_only_signal",
    "predicted_counts",
    "resample_matrix",
    "upsample_zero_insert",
    "verify_duplication",
]
