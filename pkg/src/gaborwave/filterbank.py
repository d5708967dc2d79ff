"""Parametric band-pass filters and their time-frequency diagnostics.

Three families share one parameterization, a pair of -3 dB cutoff
frequencies (f1, f2) in cycles/sample:

* sinc        — difference of two scaled sinc low-pass kernels, rectangular
                frequency response, optionally Hamming-windowed;
* gabor-real  — Gaussian envelope times cos(2 pi f0 t);
* gabor-complex — Gaussian envelope times exp(i 2 pi f0 t), whose spectrum
                is a single Gaussian lobe at +f0 (an approximately analytic
                band-pass).

For the Gabor families the envelope width follows from the band edges:
sigma = A / (pi (f2 - f1)) with A = sqrt(3 ln 10 / 10), which places the
Gaussian frequency response exactly at -3 dB on f1 and f2.

Kernels are sampled at integer instants symmetric about t = 0 (odd tap
count), preserving the even/odd symmetry of the real/imaginary parts. No
amplitude renormalization is applied beyond the analytic 1/(sqrt(2 pi)
sigma) envelope factor, so the -3 dB calibration stays meaningful. All
frequencies are normalized (Nyquist = 0.5); Hz enters only at I/O
boundaries. Sampling runs through the autodiff primitives, so kernels built
from tracked tensors are differentiable down to the raw cutoff parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import autodiff as ad
from .autodiff import CTensor, ctensor
from .errors import DimensionError, NumericError, ParameterError

# sqrt(3 ln 10 / 10): scales half-bandwidth into the Gaussian's sigma so the
# band edges land at -3 dB.
BANDWIDTH_TO_SIGMA = math.sqrt(3.0 * math.log(10.0) / 10.0)

# Lower bound of the time-variance * frequency-variance product; equality is
# attained only by Gaussian-envelope (Gabor) shapes.
TIME_FREQ_BOUND = 1.0 / (16.0 * math.pi ** 2)

MIN_BAND = 0.001  # cycles/sample; keeps sigma finite for any raw parameters
_F1_CEIL = 0.5 - 3.0 * MIN_BAND
_MEL_LOW_HZ = 30.0


class FilterFamily(str, Enum):
    SINC = "sinc"
    GABOR_REAL = "gabor-real"
    GABOR_COMPLEX = "gabor-complex"


@dataclass(frozen=True)
class Cutoffs:
    """Band edges in cycles/sample, 0 < f1 < f2 <= 0.5."""

    f1: float
    f2: float

    def __post_init__(self):
        if not (0.0 < self.f1 < self.f2 <= 0.5):
            raise ParameterError(
                f"cutoffs must satisfy 0 < f1 < f2 <= 0.5, got ({self.f1}, {self.f2})"
            )

    @property
    def bandwidth(self) -> float:
        return self.f2 - self.f1

    @property
    def center(self) -> float:
        return 0.5 * (self.f1 + self.f2)


@dataclass(frozen=True)
class GaborParams:
    """Gaussian envelope spread (samples) and center frequency (cycles/sample)."""

    sigma: float
    f0: float


@dataclass(frozen=True)
class SampledFilter:
    family: FilterFamily
    taps: int
    coeffs: CTensor  # length == taps, center index (taps-1)/2 is t = 0

    @property
    def center_index(self) -> int:
        return (self.taps - 1) // 2


@dataclass(frozen=True)
class LocalizationReport:
    e_time: float   # samples
    e_freq: float   # cycles/sample
    v_time: float   # samples^2
    v_freq: float   # (cycles/sample)^2

    @property
    def product(self) -> float:
        return self.v_time * self.v_freq


def _check_taps(taps: int):
    if not isinstance(taps, (int, np.integer)) or taps < 3 or taps % 2 == 0:
        raise ParameterError(f"taps must be an odd integer >= 3, got {taps}")


def cutoffs_to_gabor(c: Cutoffs) -> GaborParams:
    """Envelope spread and center frequency implied by the band edges."""
    if c.f2 <= c.f1:
        raise ParameterError(f"need f2 > f1, got ({c.f1}, {c.f2})")
    return GaborParams(sigma=BANDWIDTH_TO_SIGMA / (math.pi * (c.f2 - c.f1)),
                       f0=0.5 * (c.f1 + c.f2))


def _tap_grid(taps: int) -> np.ndarray:
    half = (taps - 1) // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def gabor_kernel(f1: CTensor, f2: CTensor, taps: int) -> CTensor:
    """Complex Gabor kernels for per-filter cutoff vectors; shape [n, taps].

    Differentiable with respect to f1/f2 when those are tracked tensors.
    """
    _check_taps(taps)
    grid = ctensor(_tap_grid(taps))
    n = f1.shape[0]
    bw = ad.sub(f2, f1)
    sigma = ad.cmul(BANDWIDTH_TO_SIGMA / math.pi, ad.rrecip(bw))
    f0 = ad.cmul(0.5, ad.add(f1, f2))
    sig_col = ad.reshape(sigma, (n, 1))
    f0_col = ad.reshape(f0, (n, 1))
    # envelope: exp(-t^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)
    inv_sig = ad.rrecip(sig_col)
    t_over_sig = ad.cmul(inv_sig, grid)
    envelope = ad.cmul(
        ad.cmul(1.0 / math.sqrt(2.0 * math.pi), inv_sig),
        ad.rexp(ad.cmul(-0.5, ad.cmul(t_over_sig, t_over_sig))),
    )
    phase = ad.cmul(2.0 * math.pi, ad.cmul(f0_col, grid))
    return ad.make_complex(ad.cmul(envelope, ad.rcos(phase)),
                           ad.cmul(envelope, ad.rsin(phase)))


def gabor_real_kernel(f1: CTensor, f2: CTensor, taps: int) -> CTensor:
    """Real part of the complex Gabor kernel (cosine-modulated Gaussian)."""
    z = gabor_kernel(f1, f2, taps)
    return ad.cmul(ad.add(z, ad.conj(z)), 0.5)


def hamming_window(taps: int) -> np.ndarray:
    j = np.arange(taps, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * math.pi * j / (taps - 1))


def sinc_kernel(f1: CTensor, f2: CTensor, taps: int, windowed: bool = True) -> CTensor:
    """Band-pass sinc kernels 2 f2 sinc(2 pi f2 t) - 2 f1 sinc(2 pi f1 t)."""
    _check_taps(taps)
    grid = ctensor(_tap_grid(taps))
    n = f1.shape[0]
    f1c = ad.reshape(f1, (n, 1))
    f2c = ad.reshape(f2, (n, 1))

    def lowpass(fc):
        arg = ad.cmul(2.0 * math.pi, ad.cmul(fc, grid))
        return ad.cmul(ad.cmul(2.0, fc), ad.rsinc(arg))

    h = ad.sub(lowpass(f2c), lowpass(f1c))
    if windowed:
        h = ad.cmul(h, ctensor(hamming_window(taps)))
    return ad.make_complex(h, ad.cmul(h, 0.0))


_KERNEL_FNS = {
    FilterFamily.SINC: lambda f1, f2, taps: sinc_kernel(f1, f2, taps, windowed=True),
    FilterFamily.GABOR_REAL: gabor_real_kernel,
    FilterFamily.GABOR_COMPLEX: gabor_kernel,
}


def kernel_for_family(family: FilterFamily, f1: CTensor, f2: CTensor, taps: int,
                      windowed: bool = True) -> CTensor:
    if family is FilterFamily.SINC:
        return sinc_kernel(f1, f2, taps, windowed=windowed)
    return _KERNEL_FNS[family](f1, f2, taps)


def _single(c: Cutoffs) -> tuple[CTensor, CTensor]:
    return ctensor(np.array([c.f1])), ctensor(np.array([c.f2]))


def sample_gabor(c: Cutoffs, taps: int) -> SampledFilter:
    f1, f2 = _single(c)
    coeffs = gabor_kernel(f1, f2, taps)
    return SampledFilter(FilterFamily.GABOR_COMPLEX, taps,
                         ctensor(coeffs.re[0], coeffs.im[0]))


def sample_gabor_real(c: Cutoffs, taps: int) -> SampledFilter:
    f1, f2 = _single(c)
    coeffs = gabor_real_kernel(f1, f2, taps)
    return SampledFilter(FilterFamily.GABOR_REAL, taps,
                         ctensor(coeffs.re[0], coeffs.im[0]))


def sample_sinc(c: Cutoffs, taps: int, windowed: bool = True) -> SampledFilter:
    f1, f2 = _single(c)
    coeffs = sinc_kernel(f1, f2, taps, windowed=windowed)
    return SampledFilter(FilterFamily.SINC, taps,
                         ctensor(coeffs.re[0], coeffs.im[0]))


def sample_family(family: FilterFamily, c: Cutoffs, taps: int,
                  windowed: bool = True) -> SampledFilter:
    if family is FilterFamily.SINC:
        return sample_sinc(c, taps, windowed=windowed)
    if family is FilterFamily.GABOR_REAL:
        return sample_gabor_real(c, taps)
    return sample_gabor(c, taps)


def gabor_frequency_response(c: Cutoffs, freqs) -> np.ndarray:
    """Analytic Gaussian magnitude response exp(-2 pi^2 sigma^2 (f - f0)^2)."""
    p = cutoffs_to_gabor(c)
    f = np.asarray(freqs, dtype=np.float64)
    return np.exp(-2.0 * math.pi ** 2 * p.sigma ** 2 * (f - p.f0) ** 2)


def localization_and_spread(s: SampledFilter, dft_size: int) -> LocalizationReport:
    """Center-of-mass and variance of |g|^2 in time and of |DFT g|^2 in frequency.

    The time side sums over the integer tap grid; the frequency side uses a
    zero-padded DFT over the full grid including negative frequencies, so a
    real filter's symmetric spectrum reports e_freq near 0 while a complex
    one reports e_freq near its center frequency. Values are raw discrete
    sums, with no leakage correction for short kernels.
    """
    if dft_size < 8 * s.taps:
        raise ParameterError(
            f"dft_size {dft_size} too small for taps {s.taps}; need >= {8 * s.taps}"
        )
    g = s.coeffs.numpy()
    p_time = g.real ** 2 + g.imag ** 2
    norm_t = p_time.sum()
    if norm_t == 0.0:
        raise NumericError("all-zero filter has no localization")
    t = _tap_grid(s.taps)
    e_time = float((t * p_time).sum() / norm_t)
    v_time = float(((t - e_time) ** 2 * p_time).sum() / norm_t)

    spec = np.fft.fft(g, n=dft_size)
    p_freq = spec.real ** 2 + spec.imag ** 2
    f = np.fft.fftfreq(dft_size)  # cycles/sample in [-0.5, 0.5)
    norm_f = p_freq.sum()
    e_freq = float((f * p_freq).sum() / norm_f)
    v_freq = float(((f - e_freq) ** 2 * p_freq).sum() / norm_f)
    return LocalizationReport(e_time=e_time, e_freq=e_freq,
                              v_time=v_time, v_freq=v_freq)


def compose_wide_band(target: Cutoffs, n_sub: int, taps: int,
                      grid_points: int = 512) -> tuple[SampledFilter, np.ndarray, np.ndarray]:
    """Tile a wide band with contiguous complex Gabor sub-filters and sum them.

    Returns the summed kernel, the frequency grid over [f1, f2], and the
    summed analytic magnitude response on that grid. A single wide Gaussian
    droops toward the band edges; the tiled sum holds the pass-band up.
    """
    if n_sub < 1:
        raise ParameterError(f"n_sub must be >= 1, got {n_sub}")
    _check_taps(taps)
    edges = np.linspace(target.f1, target.f2, n_sub + 1)
    grid = np.linspace(target.f1, target.f2, grid_points)
    total = np.zeros(taps, dtype=np.complex128)
    response = np.zeros(grid_points)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sub = Cutoffs(float(lo), float(hi))
        total += sample_gabor(sub, taps).coeffs.numpy()
        response += gabor_frequency_response(sub, grid)
    summed = SampledFilter(FilterFamily.GABOR_COMPLEX, taps, ctensor(total))
    return summed, grid, response


def mel_from_hz(f_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def hz_from_mel(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def init_cutoffs_mel(n_filters: int, sample_rate: float) -> list[Cutoffs]:
    """Contiguous band edges equally spaced in mel between 30 Hz and Nyquist."""
    if n_filters < 1:
        raise ParameterError(f"n_filters must be >= 1, got {n_filters}")
    nyquist_hz = sample_rate / 2.0
    mel_edges = np.linspace(mel_from_hz(_MEL_LOW_HZ), mel_from_hz(nyquist_hz),
                            n_filters + 1)
    hz_edges = hz_from_mel(mel_edges)
    hz_edges[-1] = nyquist_hz  # kill round-trip rounding at the top edge
    norm = hz_edges / sample_rate
    return [Cutoffs(float(lo), float(hi)) for lo, hi in zip(norm[:-1], norm[1:])]


def learnable_cutoffs(raw: CTensor) -> tuple[CTensor, CTensor]:
    """Map unconstrained raw pairs [n, 2] to valid cutoff vectors (f1, f2).

    f1 = min_band + |raw1|, soft-clipped below 0.5 - 3 min_band;
    f2 = f1 + min_band + |raw2|, soft-clipped below Nyquist. Total on any
    input, differentiable except on the |.| kinks, slope 1 (up to sign)
    away from the clip zones.
    """
    if raw.ndim != 2 or raw.shape[1] != 2:
        raise DimensionError(f"raw parameters must have shape [n, 2], got {raw.shape}")
    r1 = ad.sslice(raw, (slice(None), 0))
    r2 = ad.sslice(raw, (slice(None), 1))
    f1 = ad.soft_clip_below(ad.add(MIN_BAND, ad.rabs(r1)), _F1_CEIL, MIN_BAND)
    f2 = ad.soft_clip_below(ad.add(f1, ad.add(MIN_BAND, ad.rabs(r2))), 0.5, MIN_BAND)
    return f1, f2


def resolve_cutoffs(raw: np.ndarray) -> list[Cutoffs]:
    """Plain-array version of learnable_cutoffs for inspection and export."""
    f1, f2 = learnable_cutoffs(ctensor(np.asarray(raw, dtype=np.float64)))
    return [Cutoffs(float(a), float(b)) for a, b in zip(f1.re, f2.re)]


def _soft_clip_inverse(y: float, hi: float, margin: float) -> float:
    j = hi - margin
    if y <= j:
        return y
    frac = (y - j) / margin
    return j - margin * math.log1p(-frac)


def cutoffs_to_raw(cutoffs: list[Cutoffs]) -> np.ndarray:
    """Invert learnable_cutoffs so a front end can start from given bands.

    Targets outside the representable region are pulled inside it: f1 is
    floored at min_band, and an f2 at Nyquist maps deep into the saturation
    zone (resolved value within 1e-12 of 0.5).
    """
    raw = np.zeros((len(cutoffs), 2))
    for i, c in enumerate(cutoffs):
        t1 = min(max(c.f1, MIN_BAND), _F1_CEIL - 1e-12)
        v1 = _soft_clip_inverse(t1, _F1_CEIL, MIN_BAND)
        raw[i, 0] = v1 - MIN_BAND
        f1 = t1  # below the clip junction for every sane bank, so exact
        t2 = min(c.f2, 0.5 - 1e-12)
        t2 = max(t2, f1 + MIN_BAND)
        v2 = _soft_clip_inverse(t2, 0.5, MIN_BAND)
        raw[i, 1] = max(v2 - f1 - MIN_BAND, 0.0)
    return raw
