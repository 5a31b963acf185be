"""Short time Fourier transform with a periodic Hamming window and weighted overlap-add synthesis.

Spectra are stored frequency first, shape (F, N, M), because the extraction works bin by bin.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .exceptions import SignalTooShortError
from .signal_io import MultichannelWave

logger = logging.getLogger(__name__)

WINDOWS = ('hamming',)


@dataclass(frozen=True)
class StftConfig:
    frame_size: int = 4096
    hop: Optional[int] = None
    window: str = 'hamming'

    def __post_init__(self):
        if self.frame_size < 2 or self.frame_size % 2:
            raise ValueError('frame_size must be a positive even number, got {}'.format(self.frame_size))
        if self.hop is None:
            object.__setattr__(self, 'hop', self.frame_size // 2)
        if not 0 < self.hop <= self.frame_size:
            raise ValueError('hop must be in (0, frame_size], got {}'.format(self.hop))
        if self.window not in WINDOWS:
            raise ValueError('unsupported window {!r}, choose from {}'.format(self.window, WINDOWS))

    @property
    def num_bins(self):
        return self.frame_size // 2 + 1

    def analysis_window(self):
        # get_window gives the periodic (DFT-even) form by default
        return get_window(self.window, self.frame_size)

    def num_frames(self, num_samples):
        """Frames needed to cover num_samples, the tail being zero padded to a frame boundary."""
        if num_samples < self.frame_size:
            raise SignalTooShortError('signal of {} samples is shorter than one frame ({})'.format(
                num_samples, self.frame_size))
        return -(-(num_samples - self.frame_size) // self.hop) + 1


@dataclass(frozen=True)
class SpectralTensor:
    """Complex time-frequency data, shape (F, N, M).
       config is None for data created directly in the time-frequency domain; those can't be synthesized.
       num_samples is the length of the analyzed signal, used to trim the synthesis."""
    data: np.ndarray
    sample_rate: int = 16000
    config: Optional[StftConfig] = None
    num_samples: Optional[int] = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError('spectral data must have shape (F, N, M), got {}'.format(data.shape))
        data = data.astype(complex, copy=False)
        if not np.all(np.isfinite(data)):
            raise ValueError('spectral data must be finite')
        if self.config is not None and data.shape[0] != self.config.num_bins:
            raise ValueError('{} bins do not match frame size {}'.format(data.shape[0], self.config.frame_size))
        object.__setattr__(self, 'data', data)

    @property
    def num_bins(self):
        return self.data.shape[0]

    @property
    def num_frames(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def with_data(self, data):
        """Same metadata, new coefficients."""
        return SpectralTensor(data, self.sample_rate, self.config, self.num_samples)


def analyze(wave, config=None):
    """Windowed one-sided DFT of every frame of every channel."""
    if config is None:
        config = StftConfig()
    num_samples = wave.num_samples
    num_frames = config.num_frames(num_samples)
    padded_length = (num_frames - 1) * config.hop + config.frame_size
    padded = np.zeros((padded_length, wave.channels))
    padded[:num_samples] = wave.samples
    # (frames, channels, frame_size)
    frames = sliding_window_view(padded, config.frame_size, axis=0)[::config.hop]
    spectrum = np.fft.rfft(frames * config.analysis_window(), axis=-1)
    logger.debug('analyzed %d samples x %d channels into %d frames', num_samples, wave.channels, num_frames)
    return SpectralTensor(spectrum.transpose(2, 0, 1), wave.sample_rate, config, num_samples)


def synthesize(spec):
    """Weighted overlap-add inverse of analyze. Returns a MultichannelWave."""
    config = spec.config
    if config is None:
        raise ValueError('spectrum has no STFT configuration and cannot be synthesized')
    window = config.analysis_window()
    num_frames = spec.num_frames
    padded_length = (num_frames - 1) * config.hop + config.frame_size
    # (frames, channels, frame_size)
    frames = np.fft.irfft(spec.data.transpose(1, 2, 0), n=config.frame_size, axis=-1) * window
    output = np.zeros((padded_length, spec.channels))
    norm = np.zeros(padded_length)
    for n in range(num_frames):
        start = n * config.hop
        output[start:start + config.frame_size] += frames[n].T
        norm[start:start + config.frame_size] += window ** 2
    output /= np.maximum(norm, np.finfo(float).tiny)[:, None]
    num_samples = spec.num_samples if spec.num_samples is not None else padded_length
    return MultichannelWave(spec.sample_rate, output[:num_samples])
