"""Synthetic mixtures with known ground truth.

A scene is one spherical super-Gaussian target plus a Gaussian background made of rank one
interferers and uncorrelated sensor noise. In instantaneous mode the mixing is drawn independently
per frequency bin and everything lives in the time-frequency domain; in convolutive mode the
sources are filtered in the time domain by random exponentially decaying FIR filters.
Powers are set analytically so that at channel 1
    SINR = sigma_T^2 / (Q sigma_I^2 + sigma_w^2)
with sigma_T^2 = 1.
"""
import logging
import os
import struct
from dataclasses import dataclass, asdict, fields
from typing import Union

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import NotPositiveDefiniteError, SingularBackgroundError, SceneFormatError
from .hermitian import (cholesky, eig_hermitian, conj_transpose, solve_upper_triangular,
                        apply_inverse_hermitian_transpose)
from .signal_io import MultichannelWave, read_wave, write_wave
from .stft import SpectralTensor, StftConfig, analyze
from .util import read_key_values, write_key_values

logger = logging.getLogger(__name__)

TARGET_MODELS = ('laplace_modulated', 'gauss_timevarying')
MIXING_MODES = ('instantaneous', 'convolutive')
TENSOR_MAGIC = b'FIV1'
TENSOR_HEADER = struct.Struct('<4sIII')

# log10 of the gauss_timevarying envelope power is uniform on this range
GAUSS_ENVELOPE_DECADES = (-2.0, 2.0)


@dataclass(frozen=True)
class SceneSpec:
    num_channels: int = 4
    num_bins: int = 64
    num_frames: int = 500
    sample_rate: int = 16000
    target_model: str = 'gauss_timevarying'
    num_interferers: int = 10
    input_sinr_db: float = 5.0
    uncorrelated_noise_fraction: float = 0.01
    seed: int = 0
    mixing: str = 'instantaneous'
    filter_length: int = 256

    def __post_init__(self):
        if self.num_channels < 1 or self.num_bins < 1:
            raise ValueError('num_channels and num_bins must be positive')
        if self.num_frames < self.num_channels:
            raise ValueError('need at least as many frames ({}) as channels ({})'.format(
                self.num_frames, self.num_channels))
        if self.target_model not in TARGET_MODELS:
            raise ValueError('target_model must be one of {}, got {!r}'.format(TARGET_MODELS, self.target_model))
        if self.mixing not in MIXING_MODES:
            raise ValueError('mixing must be one of {}, got {!r}'.format(MIXING_MODES, self.mixing))
        if self.num_interferers < 0:
            raise ValueError('num_interferers must be nonnegative')
        if not 0.0 <= self.uncorrelated_noise_fraction <= 1.0:
            raise ValueError('uncorrelated_noise_fraction must be in [0, 1]')
        if self.num_interferers == 0 and self.uncorrelated_noise_fraction != 1.0:
            raise ValueError('without interferers the whole background is uncorrelated noise, '
                             'uncorrelated_noise_fraction must be 1')
        if self.mixing == 'convolutive':
            if self.num_bins < 2:
                raise ValueError('convolutive scenes need at least 2 bins')
            if self.filter_length < 1:
                raise ValueError('filter_length must be positive')

    @property
    def stft_config(self):
        """STFT matching num_bins, only meaningful for convolutive scenes."""
        return StftConfig(frame_size=2 * (self.num_bins - 1))

    @property
    def num_samples(self):
        config = self.stft_config
        return (self.num_frames - 1) * config.hop + config.frame_size

    @property
    def duration(self):
        """Seconds of signal the scene stands for."""
        return self.num_samples / self.sample_rate

    @property
    def background_power(self):
        return 10.0 ** (-self.input_sinr_db / 10.0)

    @property
    def noise_power(self):
        return self.uncorrelated_noise_fraction * self.background_power

    @property
    def interferer_power(self):
        """Channel 1 power of each interferer."""
        if self.num_interferers == 0:
            return 0.0
        return (1.0 - self.uncorrelated_noise_fraction) * self.background_power / self.num_interferers

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, adict):
        names = {f.name for f in fields(cls)}
        unknown = set(adict) - names
        if unknown:
            raise SceneFormatError('unknown scene parameters: {}'.format(', '.join(sorted(unknown))))
        return cls(**adict)


@dataclass(frozen=True)
class GroundTruthScene:
    """A mixture with its additive components and their true per-bin covariances.
       mixture, target and background are SpectralTensors (instantaneous) or MultichannelWaves
       (convolutive). Covariances have shape (F, M, M); for convolutive scenes they are the
       narrowband approximations at the STFT bins."""
    spec: SceneSpec
    mixture: Union[SpectralTensor, MultichannelWave]
    target: Union[SpectralTensor, MultichannelWave]
    background: Union[SpectralTensor, MultichannelWave]
    target_covariance: np.ndarray
    background_covariance: np.ndarray

    @property
    def is_spectral(self):
        return isinstance(self.mixture, SpectralTensor)

    @property
    def seed(self):
        return self.spec.seed

    def _channel(self, component, index=0):
        if isinstance(component, SpectralTensor):
            return component.data[:, :, index]
        return component.channel(index)

    @property
    def target_image(self):
        """Target contribution at channel 1."""
        return self._channel(self.target)

    @property
    def background_image(self):
        return self._channel(self.background)

    @property
    def reference(self):
        """Unprocessed channel 1 of the mixture."""
        return self._channel(self.mixture)

    def spectrum(self):
        """The mixture in the time-frequency domain."""
        if self.is_spectral:
            return self.mixture
        return analyze(self.mixture, self.spec.stft_config)


def _complex_normal(rng, shape):
    """Circular complex Gaussian with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _unit_sphere(rng, shape):
    """Vectors along the last axis drawn uniformly on the complex unit sphere."""
    vectors = _complex_normal(rng, shape)
    return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)


def gauss_envelope_mean():
    """Mean of 10^u for u uniform on GAUSS_ENVELOPE_DECADES."""
    low, high = GAUSS_ENVELOPE_DECADES
    return (10.0 ** high - 10.0 ** low) / ((high - low) * np.log(10.0))


def target_envelope(rng, size, model):
    """Per-frame amplitude g_n with E[g^2] = 1."""
    if model == 'laplace_modulated':
        return rng.exponential(1.0, size) / np.sqrt(2.0)
    power = 10.0 ** rng.uniform(*GAUSS_ENVELOPE_DECADES, size) / gauss_envelope_mean()
    return np.sqrt(power)


def _instantaneous_scene(spec, rng):
    F, N, M = spec.num_bins, spec.num_frames, spec.num_channels
    steering = _unit_sphere(rng, (F, M))
    source = target_envelope(rng, N, spec.target_model)[None, :] * _complex_normal(rng, (F, N))
    target_scale = 1.0 / np.mean(np.abs(steering[:, 0]) ** 2)
    target = np.sqrt(target_scale) * source[:, :, None] * steering[:, None, :]
    target_cov = target_scale * steering[:, :, None] * np.conj(steering[:, None, :])

    background = np.sqrt(spec.noise_power) * _complex_normal(rng, (F, N, M))
    background_cov = np.tile(spec.noise_power * np.eye(M, dtype=complex), (F, 1, 1))
    for _ in range(spec.num_interferers):
        direction = _unit_sphere(rng, (F, M))
        scale = spec.interferer_power / np.mean(np.abs(direction[:, 0]) ** 2)
        background += np.sqrt(scale) * _complex_normal(rng, (F, N))[:, :, None] * direction[:, None, :]
        background_cov += scale * direction[:, :, None] * np.conj(direction[:, None, :])

    def tensor(data):
        return SpectralTensor(data, spec.sample_rate)
    return GroundTruthScene(spec, tensor(target + background), tensor(target), tensor(background),
                            target_cov, background_cov)


def decaying_filters(rng, channels, length):
    """Random FIR filters (channels, length) with an exponentially decaying envelope, scaled so
       the channel 1 filter has unit energy."""
    decay = np.exp(-np.arange(length) / max(length / 4.0, 1.0))
    filters = rng.standard_normal((channels, length)) * decay
    return filters / np.linalg.norm(filters[0])


def _narrowband(filters, frame_size):
    """Frequency responses (F, M) of the filters at the STFT bin frequencies."""
    oversample = -(-filters.shape[1] // frame_size)
    responses = np.fft.rfft(filters, n=oversample * frame_size, axis=1)[:, ::oversample]
    return responses.T


def _convolutive_scene(spec, rng):
    M, L = spec.num_channels, spec.num_samples
    config = spec.stft_config
    window_energy = np.sum(config.analysis_window() ** 2)

    def image(source, filters):
        return fftconvolve(source[:, None], filters.T, axes=0)[:L]

    def outer(responses):
        return responses[:, :, None] * np.conj(responses[:, None, :])

    blocks = -(-L // config.hop)
    envelope = np.repeat(target_envelope(rng, blocks, spec.target_model), config.hop)[:L]
    filters = decaying_filters(rng, M, spec.filter_length)
    target = image(envelope * rng.standard_normal(L), filters)
    target_cov = window_energy * outer(_narrowband(filters, config.frame_size))

    background = np.sqrt(spec.noise_power) * rng.standard_normal((L, M))
    background_cov = np.tile(window_energy * spec.noise_power * np.eye(M, dtype=complex), (config.num_bins, 1, 1))
    for _ in range(spec.num_interferers):
        filters = decaying_filters(rng, M, spec.filter_length)
        background += np.sqrt(spec.interferer_power) * image(rng.standard_normal(L), filters)
        background_cov += window_energy * spec.interferer_power * outer(_narrowband(filters, config.frame_size))

    def wave(samples):
        return MultichannelWave(spec.sample_rate, samples)
    return GroundTruthScene(spec, wave(target + background), wave(target), wave(background),
                            target_cov, background_cov)


def generate_scene(spec):
    """Draw a scene. The result depends only on spec, the seed included."""
    rng = np.random.default_rng(spec.seed)
    if spec.mixing == 'instantaneous':
        scene = _instantaneous_scene(spec, rng)
    else:
        scene = _convolutive_scene(spec, rng)
    logger.debug('generated %s scene: %d channels, %d interferers, SINR %.1f dB, seed %d', spec.mixing,
                 spec.num_channels, spec.num_interferers, spec.input_sinr_db, spec.seed)
    return scene


def max_sinr_filters(target_cov, background_cov):
    """Top generalized eigenvector of (target + background, background) per bin, shape (F, M).
       Computed by whitening with the Cholesky factor of the background covariance."""
    try:
        factor = cholesky(background_cov)
    except NotPositiveDefiniteError as exc:
        raise SingularBackgroundError('background covariance of bin {} is singular'.format(exc.bin)) from exc
    mixture_cov = target_cov + background_cov
    left = apply_inverse_hermitian_transpose(factor, mixture_cov)
    whitened = conj_transpose(apply_inverse_hermitian_transpose(factor, conj_transpose(left)))
    _, vectors = eig_hermitian(whitened)
    return solve_upper_triangular(factor, vectors[..., :, 0])


def oracle_max_sinr(scene):
    """The max-SINR beamformer built from the true covariances, in microphone coordinates."""
    return max_sinr_filters(scene.target_covariance, scene.background_covariance)


def sinr_per_bin(filters, target_cov, background_cov):
    """w^H S w / w^H B w for every bin."""
    def quad(cov):
        return np.real(np.einsum('fm,fmk,fk->f', np.conj(filters), cov, filters))
    return quad(target_cov) / quad(background_cov)


def apply_filters(filters, spec):
    """Beamformer output w_f^H x_fn, shape (F, N)."""
    data = spec.data if isinstance(spec, SpectralTensor) else np.asarray(spec)
    return np.einsum('fm,fnm->fn', np.conj(filters), data)


def write_tensor(path, data):
    """Store a complex (F, N, M) array: magic, three little-endian uint32 dims, then interleaved
       real and imaginary float64 values in C order."""
    data = np.asarray(data, dtype=complex)
    if data.ndim != 3:
        raise ValueError('tensor must have 3 dimensions, got shape {}'.format(data.shape))
    with open(path, 'wb') as fid:
        fid.write(TENSOR_HEADER.pack(TENSOR_MAGIC, *data.shape))
        fid.write(np.ascontiguousarray(data).view(np.float64).astype('<f8').tobytes())


def read_tensor(path):
    with open(path, 'rb') as fid:
        head = fid.read(TENSOR_HEADER.size)
        if len(head) < TENSOR_HEADER.size:
            raise SceneFormatError('{}: file too short for a tensor header'.format(path))
        magic, *shape = TENSOR_HEADER.unpack(head)
        if magic != TENSOR_MAGIC:
            raise SceneFormatError('{}: bad magic {!r}'.format(path, magic))
        body = fid.read()
    expected = 16 * int(np.prod(shape))
    if len(body) != expected:
        raise SceneFormatError('{}: expected {} bytes of data for shape {}, found {}'.format(
            path, expected, tuple(shape), len(body)))
    return np.frombuffer(body, dtype='<f8').astype(float).view(complex).reshape(shape)


COMPONENTS = ('mixture', 'target', 'background')


def save_scene(scene, directory):
    """Write spec.txt, the three components (.fiv or float32 .wav) and both covariances."""
    os.makedirs(directory, exist_ok=True)
    write_key_values(os.path.join(directory, 'spec.txt'), scene.spec.to_dict())
    for name in COMPONENTS:
        component = getattr(scene, name)
        if scene.is_spectral:
            write_tensor(os.path.join(directory, name + '.fiv'), component.data)
        else:
            write_wave(os.path.join(directory, name + '.wav'), component, format='float32')
    write_tensor(os.path.join(directory, 'target_covariance.fiv'), scene.target_covariance)
    write_tensor(os.path.join(directory, 'background_covariance.fiv'), scene.background_covariance)
    logger.info('saved scene to %s', directory)


def load_scene(directory):
    spec_path = os.path.join(directory, 'spec.txt')
    if not os.path.isfile(spec_path):
        raise SceneFormatError('{} is not a scene directory, spec.txt is missing'.format(directory))
    try:
        spec = SceneSpec.from_dict(read_key_values(spec_path))
    except (TypeError, ValueError) as exc:
        raise SceneFormatError('{}: {}'.format(spec_path, exc)) from exc
    spectral = spec.mixing == 'instantaneous'
    components = {}
    for name in COMPONENTS:
        path = os.path.join(directory, name + ('.fiv' if spectral else '.wav'))
        if not os.path.isfile(path):
            raise SceneFormatError('scene file {} is missing'.format(path))
        components[name] = SpectralTensor(read_tensor(path), spec.sample_rate) if spectral else read_wave(path)
    covariances = [read_tensor(os.path.join(directory, name + '_covariance.fiv')) for name in ('target', 'background')]
    return GroundTruthScene(spec, components['mixture'], components['target'], components['background'], *covariances)
