"""Reading and writing multichannel WAV files.

Only 16-bit PCM and 32-bit IEEE float containers are supported. The sample data itself is
decoded by scipy.io.wavfile; the chunk layout is checked here first because scipy quietly
returns fewer samples for a truncated data chunk.
"""
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .exceptions import WaveFileNotFoundError, UnsupportedWaveFormatError, TruncatedWaveError, WaveWriteError

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# (format tag, bits per sample) pairs we know how to read
SUPPORTED_CODECS = {(WAVE_FORMAT_PCM, 16): 'pcm16', (WAVE_FORMAT_IEEE_FLOAT, 32): 'float32'}
PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class MultichannelWave:
    """Time domain signal. samples has shape (num_samples, channels)."""
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValueError('samples must have shape (num_samples, channels), got {}'.format(samples.shape))
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError('sample_rate must be a positive integer, got {}'.format(self.sample_rate))
        if not np.all(np.isfinite(samples)):
            raise ValueError('samples must be finite')
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))
        object.__setattr__(self, 'samples', samples)

    @property
    def channels(self):
        return self.samples.shape[1]

    @property
    def num_samples(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        """Length in seconds."""
        return self.num_samples / self.sample_rate

    def channel(self, index):
        return self.samples[:, index]


def _inspect_riff(path):
    """Walk the RIFF chunks of path. Returns the codec name ('pcm16' or 'float32')."""
    size = os.path.getsize(path)
    fmt = None
    has_data = False
    with open(path, 'rb') as fid:
        head = fid.read(12)
        if len(head) < 12:
            raise TruncatedWaveError('{}: file ends inside the RIFF header'.format(path))
        if head[:4] != b'RIFF' or head[8:12] != b'WAVE':
            raise UnsupportedWaveFormatError('{}: not a RIFF/WAVE file'.format(path))
        pos = 12
        while pos + 8 <= size:
            fid.seek(pos)
            chunk_id, chunk_size = struct.unpack('<4sI', fid.read(8))
            body = pos + 8
            if body + chunk_size > size:
                raise TruncatedWaveError('{}: {!r} chunk declares {} bytes but only {} remain'.format(
                    path, chunk_id.decode('latin-1'), chunk_size, size - body))
            if chunk_id == b'fmt ':
                if chunk_size < 16:
                    raise UnsupportedWaveFormatError('{}: fmt chunk is only {} bytes'.format(path, chunk_size))
                tag, channels, rate, _, _, bits = struct.unpack('<HHIIHH', fid.read(16))
                if tag == WAVE_FORMAT_EXTENSIBLE and chunk_size >= 40:
                    # sub-format GUID starts 8 bytes into the extension, its first 2 bytes are the real tag
                    extension = fid.read(24)
                    tag = struct.unpack('<H', extension[8:10])[0]
                fmt = (tag, bits)
            elif chunk_id == b'data':
                if fmt is None:
                    raise UnsupportedWaveFormatError('{}: data chunk before fmt chunk'.format(path))
                has_data = True
            pos = body + chunk_size + (chunk_size & 1)
    if fmt is None or not has_data:
        raise TruncatedWaveError('{}: missing {} chunk'.format(path, 'fmt' if fmt is None else 'data'))
    if fmt not in SUPPORTED_CODECS:
        raise UnsupportedWaveFormatError('{}: format tag {:#06x} with {} bits per sample is not supported, '
                                         'only 16 bit PCM and 32 bit float'.format(path, fmt[0], fmt[1]))
    return SUPPORTED_CODECS[fmt]


def read_wave(path):
    """Read a WAV file. PCM samples are scaled by 1/32768, float samples are returned as stored."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise WaveFileNotFoundError('no such wave file: {}'.format(path))
    codec = _inspect_riff(path)
    rate, data = wavfile.read(path)
    if codec == 'pcm16':
        samples = data.astype(float) / PCM16_SCALE
    else:
        samples = data.astype(float)
    logger.debug('read %s: %s, %d Hz, shape %s', path, codec, rate, samples.shape)
    return MultichannelWave(rate, samples)


def write_wave(path, wave, format='float32'):
    """Write wave to path as 'float32' or 'pcm16'.
       Returns the number of samples that had to be clipped to [-1, 1] (always 0 for float32)."""
    path = os.fspath(path)
    clipped = 0
    if format == 'float32':
        data = wave.samples.astype(np.float32)
    elif format == 'pcm16':
        samples = wave.samples
        clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
        if clipped:
            logger.warning('%s: clipped %d samples outside [-1, 1]', path, clipped)
        data = np.clip(np.round(np.clip(samples, -1.0, 1.0) * PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise ValueError("format must be 'pcm16' or 'float32', got {!r}".format(format))
    try:
        wavfile.write(path, wave.sample_rate, data)
    except OSError as exc:
        raise WaveWriteError('cannot write {}: {}'.format(path, exc)) from exc
    logger.debug('wrote %s: %s, %d Hz, shape %s', path, format, wave.sample_rate, data.shape)
    return clipped
