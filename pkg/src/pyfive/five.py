"""Fast independent vector extraction.

The input is pre-whitened once. Each iteration then builds, for every frequency bin, the
covariance of the whitened input weighted by phi(r_n), where r_n is the magnitude of the current
target estimate in frame n, and takes its smallest eigenpair (lambda, r) to get the new demixing
vector w = lambda^(-1/2) r. This is iterative max-SINR beamforming with the weighted covariance
as the background estimate, and it is a majorization-minimization scheme for the negative
log-likelihood computed by evaluate_nll, which therefore never increases.
"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .exceptions import NotPositiveDefiniteError, RankDeficientCovarianceError, DegenerateCovarianceError
from .hermitian import (cholesky, eig_hermitian, conj_transpose, solve_upper_triangular,
                        apply_inverse_hermitian_transpose)
from .stft import SpectralTensor, StftConfig, analyze, synthesize
from .signal_io import MultichannelWave
from .util import write_csv_report

logger = logging.getLogger(__name__)

CONTRAST_KINDS = ('laplace', 'gauss')
REPORT_COLUMNS = ['iteration', 'nll', 'head_residual', 'wall_time_ms']


@dataclass(frozen=True)
class ContrastModel:
    """Source model G and its weight phi = G'(r) / 2r.
       laplace: G(r) = r, phi(r) = 1 / 2r.
       gauss (time-varying): G(r) = 2F log r, phi(r) = F / r^2.
       num_bins (F) may be left None and filled in with bind() once the data is known."""
    kind: str = 'gauss'
    num_bins: Optional[int] = None

    def __post_init__(self):
        if self.kind not in CONTRAST_KINDS:
            raise ValueError('contrast must be one of {}, got {!r}'.format(CONTRAST_KINDS, self.kind))
        if self.num_bins is not None and self.num_bins < 1:
            raise ValueError('num_bins must be positive')

    def bind(self, num_bins):
        if self.num_bins is None:
            return replace(self, num_bins=num_bins)
        return self

    def _bins(self):
        if self.num_bins is None:
            raise ValueError('the gauss contrast needs num_bins, call bind() first')
        return self.num_bins

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == 'laplace':
            return 1.0 / (2.0 * r)
        return self._bins() / r ** 2

    def contrast(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == 'laplace':
            return r
        return 2.0 * self._bins() * np.log(r)


@dataclass(frozen=True)
class FiveConfig:
    contrast: ContrastModel = field(default_factory=ContrastModel)
    max_iterations: int = 3
    regularization: float = 1e-10
    activity_floor: float = 1e-12
    nll_monitoring: bool = True
    tolerance: Optional[float] = None  # early stop on max_f |w_new - w_old|
    reference_channel: int = 0

    def __post_init__(self):
        if isinstance(self.contrast, str):
            object.__setattr__(self, 'contrast', ContrastModel(self.contrast))
        if self.max_iterations < 1:
            raise ValueError('max_iterations must be at least 1, got {}'.format(self.max_iterations))
        if self.regularization < 0:
            raise ValueError('regularization must be nonnegative')
        if self.activity_floor <= 0:
            raise ValueError('activity_floor must be positive')
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError('tolerance must be positive')
        if self.reference_channel < 0:
            raise ValueError('reference_channel must be nonnegative')


@dataclass
class DemixingState:
    """Everything an iteration needs, in whitened coordinates.
       whiteners (F, M, M): upper triangular Q_f with C_f = Q_f^H Q_f
       demixing (F, M): w_f
       activity (N,): r_n of the current estimate
       background (F, M, M-1): J_f, the eigenvectors of the weighted covariance not used for w_f
       covariance (F, M, M): the weighted covariance that produced demixing (None initially)"""
    whiteners: np.ndarray
    demixing: np.ndarray
    activity: np.ndarray
    background: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None
    iteration: int = 0

    def extracted(self, whitened):
        """s_fn = w_f^H x_fn, shape (F, N)."""
        return demix(self.demixing, _data(whitened))

    def filters(self):
        """Demixing vectors for the unwhitened microphone signals, Q_f^{-1} w_f."""
        return solve_upper_triangular(self.whiteners, self.demixing)


@dataclass
class IterationRecord:
    iteration: int
    nll: float
    head_residual: float
    wall_time_ms: float


@dataclass
class ExtractionReport:
    records: List[IterationRecord] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False

    @property
    def nll(self):
        return np.array([record.nll for record in self.records])

    @property
    def head_residuals(self):
        return np.array([record.head_residual for record in self.records])

    @property
    def cumulative_ms(self):
        return np.cumsum([record.wall_time_ms for record in self.records])

    def is_monotone(self, slack=1e-9):
        """Is the NLL sequence non-increasing, allowing slack relative to the previous value?"""
        nll = self.nll
        return bool(np.all(nll[1:] <= nll[:-1] + slack * np.abs(nll[:-1])))

    def rows(self):
        return [{column: getattr(record, column) for column in REPORT_COLUMNS} for record in self.records]

    def to_csv(self, path, header=None):
        return write_csv_report(path, self.rows(), REPORT_COLUMNS, header=header)


def _data(spec):
    return spec.data if isinstance(spec, SpectralTensor) else np.asarray(spec)


def demix(demixing, data):
    """w_f^H x_fn for demixing (F, M) and data (F, N, M)."""
    return np.einsum('fm,fnm->fn', np.conj(demixing), data)


def sample_covariance(data):
    """(1/N) sum_n x_fn x_fn^H per bin, shape (F, M, M)."""
    data = _data(data)
    return np.swapaxes(data, 1, 2) @ np.conj(data) / data.shape[1]


def prewhiten(spec, regularization=1e-10):
    """Whiten every bin: x~ = Q^{-H} x with (1/N) sum x x^H = Q^H Q.
       Bins whose covariance can't be factored are loaded with regularization * trace / M once.
       Returns (whitened SpectralTensor, whiteners of shape (F, M, M))."""
    data = spec.data
    num_bins, num_frames, channels = data.shape
    if num_frames < channels:
        raise RankDeficientCovarianceError('{} frames are not enough to whiten {} channels'.format(
            num_frames, channels))
    cov = sample_covariance(data)
    try:
        whiteners = cholesky(cov)
    except NotPositiveDefiniteError:
        loaded = cov.copy()
        failing = []
        for f in range(num_bins):
            try:
                cholesky(cov[f])
            except NotPositiveDefiniteError:
                failing.append(f)
                loading = regularization * np.real(np.trace(cov[f])) / channels
                loaded[f] += loading * np.eye(channels)
        logger.warning('covariance not positive definite in %d bins, diagonal loading applied', len(failing))
        try:
            whiteners = cholesky(loaded)
        except NotPositiveDefiniteError as exc:
            raise RankDeficientCovarianceError('covariance of bin {} is rank deficient even after loading'.format(
                exc.bin)) from exc
    whitened = apply_inverse_hermitian_transpose(whiteners, np.swapaxes(data, 1, 2))
    return spec.with_data(np.swapaxes(whitened, 1, 2)), whiteners


def weighted_covariance(whitened, activity, contrast, f=None, activity_floor=1e-12):
    """V_f = (1/N) sum_n phi(max(r_n, floor)) x_fn x_fn^H. All bins (F, M, M) when f is None."""
    data = _data(whitened)
    weights = contrast.weight(np.maximum(np.asarray(activity, dtype=float), activity_floor))
    if f is not None:
        data = data[f:f + 1]
    num_frames = data.shape[1]
    cov = (np.swapaxes(data, 1, 2) * weights[None, None, :]) @ np.conj(data) / num_frames
    return cov[0] if f is not None else cov


def update_activity(extracted):
    """r_n = sqrt(sum_f |s_fn|^2)."""
    return np.sqrt(np.sum(np.abs(extracted) ** 2, axis=0))


def initial_state(whitened, whiteners, reference_channel=0):
    """Start from the whitened reference channel: w_f = e_ref, J_f = the other unit vectors."""
    data = _data(whitened)
    num_bins, _, channels = data.shape
    if reference_channel >= channels:
        raise ValueError('reference channel {} but only {} channels'.format(reference_channel, channels))
    eye = np.eye(channels, dtype=complex)
    demixing = np.tile(eye[reference_channel], (num_bins, 1))
    background = np.tile(np.delete(eye, reference_channel, axis=1), (num_bins, 1, 1))
    activity = update_activity(data[:, :, reference_channel])
    return DemixingState(whiteners, demixing, activity, background)


def five_iteration(state, whitened, contrast, regularization=1e-10, activity_floor=1e-12):
    """One sweep over all bins: new w_f from the smallest eigenpair of V_f, then new activity."""
    cov = weighted_covariance(whitened, state.activity, contrast, activity_floor=activity_floor)
    channels = cov.shape[-1]
    values, vectors = eig_hermitian(cov)
    smallest = values[:, -1]
    threshold = regularization * np.real(np.trace(cov, axis1=1, axis2=2)) / channels
    degenerate = ~(smallest > threshold)
    if np.any(degenerate):
        bins = np.nonzero(degenerate)[0]
        logger.warning('weighted covariance degenerate in bins %s, retrying with diagonal loading', bins.tolist())
        cov[bins] += threshold[bins, None, None] * np.eye(channels)
        values[bins], vectors[bins] = eig_hermitian(cov[bins])
        smallest = values[:, -1]
        # loading shifts every eigenvalue by exactly the threshold, so an exactly singular bin comes back
        # at the threshold; only a negative eigenvalue is rejected
        still = bins[~(smallest[bins] > 0)]
        if len(still):
            raise DegenerateCovarianceError('bin {}: smallest eigenvalue {} of the weighted covariance after '
                                            'loading'.format(still[0], smallest[still[0]]))
    demixing = vectors[:, :, -1] / np.sqrt(smallest)[:, None]
    activity = update_activity(demix(demixing, _data(whitened)))
    return DemixingState(state.whiteners, demixing, activity, vectors[:, :, :-1], cov, state.iteration + 1)


def _basis(demixing, background):
    """[w_f, J_f], shape (F, M, M). The demixing matrix W_f is its conjugate transpose."""
    return np.concatenate([demixing[..., :, None], background], axis=-1)


def evaluate_nll(state, whitened, contrast, activity_floor=1e-12):
    """Negative log-likelihood with background covariance B_f = I:
         -2N sum_f log|det W_f| + sum_n G(r_n) + sum_fn |J_f^H x_fn|^2
       where W_f = [w_f, J_f]^H maps the unwhitened input, so log|det Q_f| enters once."""
    if state.background is None:
        raise ValueError('state has no background basis J')
    data = _data(whitened)
    num_frames = data.shape[1]
    _, logdet = np.linalg.slogdet(_basis(state.demixing, state.background))
    whitener_logdet = np.sum(np.log(np.real(np.diagonal(state.whiteners, axis1=1, axis2=2))), axis=1)
    activity = np.maximum(state.activity, activity_floor)
    background = data @ np.conj(state.background)
    return float(-2.0 * num_frames * np.sum(logdet - whitener_logdet)
                 + np.sum(contrast.contrast(activity))
                 + np.sum(np.abs(background) ** 2))


def head_system_residual(demixing, background, cov, data_cov):
    """Frobenius norm of [w, J]^H [V w, C J] - I, per bin when given stacks."""
    basis = _basis(demixing, background)
    rhs = np.concatenate([(cov @ demixing[..., :, None]), data_cov @ background], axis=-1)
    product = conj_transpose(basis) @ rhs
    return np.linalg.norm(product - np.eye(basis.shape[-1]), axis=(-2, -1))


def head_residual(state, whitened, contrast, activity_floor=1e-12):
    """Largest residual over bins of the stationarity system, V_f rebuilt from the state's activity."""
    cov = weighted_covariance(whitened, state.activity, contrast, activity_floor=activity_floor)
    return float(np.max(head_system_residual(state.demixing, state.background, cov, sample_covariance(whitened))))


def head_candidates(cov, whitener=None):
    """All M solutions of the stationarity system, one per eigenpair of the whitened V.
       Returns a list of (w, J) ordered by descending eigenvalue, so the last one is the minimizer.
       With a whitener Q the solutions are for the unwhitened problem: w = lambda^{-1/2} Q^{-1} r_k."""
    cov = np.asarray(cov, dtype=complex)
    if whitener is not None:
        left = apply_inverse_hermitian_transpose(whitener, cov)
        cov = conj_transpose(apply_inverse_hermitian_transpose(whitener, conj_transpose(left)))
    values, vectors = eig_hermitian(cov)
    candidates = []
    for k in range(cov.shape[-1]):
        w = vectors[..., :, k] / np.sqrt(values[..., k])[..., None]
        J = np.delete(vectors, k, axis=-1)
        if whitener is not None:
            w = solve_upper_triangular(whitener, w)
            J = solve_upper_triangular(whitener, J)
        candidates.append((w, J))
    return candidates


def majorizer(demixing, background, cov, data_cov, num_frames):
    """The surrogate minimized by every iteration, constants dropped:
         -2N log|det W| + N w^H V w + N tr(J^H C J), summed over bins."""
    _, logdet = np.linalg.slogdet(_basis(demixing, background))
    quad = np.real(np.einsum('...m,...mk,...k->...', np.conj(demixing), cov, demixing))
    trace = np.real(np.trace(conj_transpose(background) @ data_cov @ background, axis1=-2, axis2=-1))
    return float(np.sum(-2.0 * num_frames * logdet + num_frames * quad + num_frames * trace))


def project_back(extracted, original_spec, reference_channel=0, activity_floor=1e-12):
    """Rescale each bin by the least squares fit of the extracted signal to the reference channel."""
    reference = _data(original_spec)[:, :, reference_channel]
    if reference.shape != extracted.shape:
        raise ValueError('extracted shape {} does not match spectrum {}'.format(extracted.shape, reference.shape))
    power = np.sum(np.abs(extracted) ** 2, axis=1)
    cross = np.sum(reference * np.conj(extracted), axis=1)
    scale = np.ones(len(power), dtype=complex)
    ok = power >= activity_floor
    scale[ok] = cross[ok] / power[ok]
    return extracted * scale[:, None]


class Extractor:
    """Runs the extraction on one spectrum. The whitening is done once in the constructor."""

    def __init__(self, spec, config=None, verbose=False):
        self.config = config if config is not None else FiveConfig()
        self.verbose = verbose
        self.spec = spec
        self.contrast = self.config.contrast.bind(spec.num_bins)
        start = time.perf_counter()
        self.whitened, self.whiteners = prewhiten(spec, self.config.regularization)
        self.state = initial_state(self.whitened, self.whiteners, self.config.reference_channel)
        self.setup_ms = 1000.0 * (time.perf_counter() - start)
        self.report = ExtractionReport()

    def _log(self, msg, *args):
        if self.verbose:
            logger.info(msg, *args)
        else:
            logger.debug(msg, *args)

    def _record(self, state, wall_time_ms):
        nll = head = float('nan')
        if self.config.nll_monitoring:
            nll = evaluate_nll(state, self.whitened, self.contrast, self.config.activity_floor)
            head = head_residual(state, self.whitened, self.contrast, self.config.activity_floor)
        record = IterationRecord(state.iteration, nll, head, wall_time_ms)
        self._log('iteration %d nll %.12g head residual %.3g (%.2f ms)', state.iteration, nll, head, wall_time_ms)
        return record

    def iterate(self):
        """Yield (state, record) for the initial estimate and after every iteration."""
        config = self.config
        record = self._record(self.state, self.setup_ms)
        self.report.records.append(record)
        yield self.state, record
        for _ in range(config.max_iterations):
            start = time.perf_counter()
            new_state = five_iteration(self.state, self.whitened, self.contrast,
                                       config.regularization, config.activity_floor)
            elapsed = 1000.0 * (time.perf_counter() - start)
            change = np.max(np.linalg.norm(new_state.demixing - self.state.demixing, axis=1))
            self.state = new_state
            self.report.iterations_run = new_state.iteration
            record = self._record(new_state, elapsed)
            self.report.records.append(record)
            yield new_state, record
            if config.tolerance is not None and change < config.tolerance:
                self._log('converged after %d iterations, max filter change %.3g', new_state.iteration, change)
                self.report.converged = True
                break

    def run(self):
        for _ in self.iterate():
            pass
        return self.report

    def extracted(self):
        """Current estimate in whitened scale, shape (F, N)."""
        return self.state.extracted(self.whitened)

    def projected(self):
        """Current estimate rescaled onto the reference channel."""
        return project_back(self.extracted(), self.spec, self.config.reference_channel, self.config.activity_floor)

    def filters(self):
        return self.state.filters()


def extract_spectrum(spec, config=None, verbose=False):
    """Extraction in the time-frequency domain. Returns (projected estimate (F, N), report, final state)."""
    extractor = Extractor(spec, config, verbose=verbose)
    report = extractor.run()
    return extractor.projected(), report, extractor.state


def extract(wave, stft_config=None, five_config=None, verbose=False):
    """analyze, extract, project back onto the reference channel, synthesize.
       Returns (single channel MultichannelWave, ExtractionReport)."""
    if stft_config is None:
        stft_config = StftConfig()
    spec = analyze(wave, stft_config)
    projected, report, _ = extract_spectrum(spec, five_config, verbose=verbose)
    output = synthesize(spec.with_data(projected[:, :, None]))
    logger.info('extracted %d channels, %d bins, %d frames in %d iterations', spec.channels, spec.num_bins,
                spec.num_frames, report.iterations_run)
    return output, report
