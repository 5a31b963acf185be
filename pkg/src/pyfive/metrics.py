"""Scale invariant separation metrics against known target and background images.

Signals may be real (time domain) or complex (time-frequency domain); complex signals are
compared as real vectors of twice the length, so the inner product is Re<e, s>.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import LengthMismatchError
from .signal_io import MultichannelWave

logger = logging.getLogger(__name__)

DB_CAP = 300.0
METRIC_COLUMNS = ['scene_id', 'algorithm', 'iterations', 'si_sdr', 'si_sir', 'delta_si_sdr', 'delta_si_sir', 'success']


@dataclass(frozen=True)
class MetricReport:
    si_sdr_db: float
    si_sir_db: float
    delta_si_sdr_db: float
    delta_si_sir_db: float

    def as_row(self, scene_id, algorithm, iterations):
        return {'scene_id': scene_id, 'algorithm': algorithm, 'iterations': iterations,
                'si_sdr': self.si_sdr_db, 'si_sir': self.si_sir_db,
                'delta_si_sdr': self.delta_si_sdr_db, 'delta_si_sir': self.delta_si_sir_db,
                'success': success(self)}


def _as_real(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.concatenate([x.real.ravel(), x.imag.ravel()])
    return x.astype(float).ravel()


def _pair(estimate, *references):
    arrays = [np.asarray(estimate)] + [np.asarray(ref) for ref in references]
    if any(array.shape != arrays[0].shape for array in arrays):
        raise LengthMismatchError('signals have different shapes: {}'.format([array.shape for array in arrays]))
    return [_as_real(array) for array in arrays]


def ratio_db(numerator, denominator):
    """10 log10(numerator / denominator) clipped to [-DB_CAP, DB_CAP]."""
    if denominator <= 0.0:
        return DB_CAP if numerator > 0.0 else -DB_CAP
    if numerator <= 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(numerator / denominator), -DB_CAP, DB_CAP))


def si_sdr(estimate, reference):
    """Scale invariant signal to distortion ratio in dB."""
    e, s = _pair(estimate, reference)
    energy = s @ s
    if energy == 0.0:
        raise ValueError('reference signal is all zero')
    projection = (e @ s) / energy * s
    distortion = e - projection
    return ratio_db(projection @ projection, distortion @ distortion)


def si_sir(estimate, target_image, background_image):
    """Target to background ratio of the estimate after a joint least squares fit onto the
       target and background images."""
    e, t, b = _pair(estimate, target_image, background_image)
    if not np.any(t) or not np.any(b):
        raise ValueError('target and background images must be nonzero')
    (alpha, beta), *_ = np.linalg.lstsq(np.stack([t, b], axis=1), e, rcond=None)
    return ratio_db(alpha ** 2 * (t @ t), beta ** 2 * (b @ b))


def _interior(signal, margin):
    if margin and len(signal) > 2 * margin:
        return signal[margin:len(signal) - margin]
    return signal


def evaluate_extraction(scene, extracted):
    """SI-SDR and SI-SIR of extracted and of the unprocessed channel 1, with the improvements.
       extracted is (F, N) for spectral scenes and a time signal for the others; in the time domain
       one frame is dropped at each end of all signals."""
    if isinstance(extracted, MultichannelWave):
        extracted = extracted.channel(0)
    extracted = np.asarray(extracted)
    target, background, reference = scene.target_image, scene.background_image, scene.reference
    if not scene.is_spectral:
        if extracted.ndim != 1:
            raise LengthMismatchError('expected a single channel signal, got shape {}'.format(extracted.shape))
        margin = scene.spec.stft_config.frame_size
        extracted, target, background, reference = (_interior(x, margin) for x in
                                                    (extracted, target, background, reference))
    if extracted.shape != target.shape:
        raise LengthMismatchError('extracted signal has shape {}, scene has {}'.format(extracted.shape, target.shape))
    sdr = si_sdr(extracted, target)
    sir = si_sir(extracted, target, background)
    input_sdr = si_sdr(reference, target)
    input_sir = si_sir(reference, target, background)
    logger.debug('SI-SDR %.2f dB (input %.2f), SI-SIR %.2f dB (input %.2f)', sdr, input_sdr, sir, input_sir)
    return MetricReport(sdr, sir, sdr - input_sdr, sir - input_sir)


def success(report, threshold_db=1.0):
    """Did the extraction improve the SIR by at least threshold_db?"""
    return bool(report.delta_si_sir_db >= threshold_db)
