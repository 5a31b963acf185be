"""Command line front end: pyfive {extract, simulate, evaluate, bench}.

Options can also come from a key = value file given with --config; options on the command line
win over the file. FIVE_THREADS caps the number of worker threads used by bench.
Exit status is 0 on success, 1 for bad usage or parameters and 2 when processing fails.
"""
import logging
import os
import sys
import time
from argparse import ArgumentParser
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
from tqdm import tqdm

from .exceptions import FiveError
from .five import ContrastModel, FiveConfig, Extractor, CONTRAST_KINDS, extract, extract_spectrum, project_back
from .metrics import METRIC_COLUMNS, evaluate_extraction
from .sample_scenes import get_scene_fun
from .scene import (SceneSpec, TARGET_MODELS, MIXING_MODES, generate_scene, save_scene, load_scene,
                    oracle_max_sinr, apply_filters, read_tensor, write_tensor)
from .signal_io import read_wave, write_wave
from .stft import StftConfig, synthesize
from .util import read_key_values, write_csv_report, worker_count

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ['seed', 'iteration', 'runtime_per_second', 'cumulative_ms', 'nll', 'delta_si_sdr']
# argparse attributes that are not part of the run configuration
NOT_CONFIG = ('func', 'config')
# options every subcommand needs, from the command line or the --config file
REQUIRED = {'extract': ('input', 'output'), 'simulate': ('output',), 'evaluate': ('input', 'extracted', 'report'),
            'bench': ('report',)}


def _common_options():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--config', help='file of key = value lines giving option defaults')
    parser.add_argument('--verbose', action='store_true', help='log every iteration')
    return parser


def _stft_options():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--frame-size', type=int, default=4096, help='STFT frame size in samples')
    parser.add_argument('--hop', type=int, default=None, help='STFT hop in samples, half the frame size by default')
    return parser


def _five_options():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--contrast', choices=CONTRAST_KINDS, default='gauss', help='source model')
    parser.add_argument('--iterations', type=int, default=3, help='number of iterations')
    parser.add_argument('--tolerance', type=float, default=None,
                        help='stop early once no demixing vector moves more than this')
    parser.add_argument('--regularization', type=float, default=1e-10, help='diagonal loading factor')
    return parser


def _scene_options():
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--channels', type=int, default=4, help='number of microphones')
    parser.add_argument('--interferers', type=int, default=10, help='number of interfering sources')
    parser.add_argument('--sinr-db', type=float, default=5.0, help='input SINR at channel 1')
    parser.add_argument('--bins', type=int, default=64, help='frequency bins')
    parser.add_argument('--frames', type=int, default=500, help='time frames')
    parser.add_argument('--sample-rate', type=int, default=16000)
    parser.add_argument('--mixing', choices=MIXING_MODES, default='instantaneous')
    parser.add_argument('--target-model', choices=TARGET_MODELS, default='gauss_timevarying')
    parser.add_argument('--noise-fraction', type=float, default=0.01,
                        help='share of the background power that is uncorrelated noise')
    parser.add_argument('--filter-length', type=int, default=256, help='FIR length for convolutive mixing')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--scenes', type=int, default=1, help='number of scenes, seeds counting up from --seed')
    return parser


def build_parser():
    """Returns the top level parser and a dict of the subcommand parsers."""
    parser = ArgumentParser(prog='pyfive', description='Blind extraction of one source from a multichannel mixture')
    subparsers = parser.add_subparsers(dest='command', required=True)
    common, stft, five, scene = _common_options(), _stft_options(), _five_options(), _scene_options()

    extract_parser = subparsers.add_parser('extract', parents=[common, stft, five],
                                           help='extract the dominant source from a WAV file or scene directory')
    extract_parser.add_argument('--input', help='WAV file or scene directory')
    extract_parser.add_argument('--output', help='output WAV (or .fiv for spectral scenes)')
    extract_parser.add_argument('--format', choices=['float32', 'pcm16'], default='float32',
                                help='output WAV sample format')
    extract_parser.add_argument('--report', help='per-iteration CSV report')
    extract_parser.set_defaults(func=cmd_extract)

    simulate_parser = subparsers.add_parser('simulate', parents=[common, scene],
                                            help='write synthetic scenes with ground truth')
    simulate_parser.add_argument('--output', help='scene directory')
    simulate_parser.add_argument('--scene', help='name of a canned scene, overrides the scene options')
    simulate_parser.set_defaults(func=cmd_simulate)

    evaluate_parser = subparsers.add_parser('evaluate', parents=[common], help='score an extracted signal')
    evaluate_parser.add_argument('--input', help='scene directory')
    evaluate_parser.add_argument('--extracted', help='extracted WAV or .fiv file')
    evaluate_parser.add_argument('--report', help='CSV file the metric rows are appended to')
    evaluate_parser.add_argument('--algorithm', default='five', help='label for the algorithm column')
    evaluate_parser.add_argument('--iterations', type=int, default=3, help='value for the iterations column')
    evaluate_parser.add_argument('--oracle', action='store_true', help='also score the max-SINR oracle beamformer')
    evaluate_parser.set_defaults(func=cmd_evaluate)

    bench_parser = subparsers.add_parser('bench', parents=[common, five, scene],
                                         help='convergence curves: runtime, NLL and SI-SDR gain per iteration')
    bench_parser.add_argument('--report', help='CSV output')
    bench_parser.add_argument('--threads', type=int, default=None, help='worker threads, capped by FIVE_THREADS')
    bench_parser.set_defaults(func=cmd_bench)
    return parser, subparsers.choices


def parse_args(argv=None):
    parser, subparsers = build_parser()
    pre = ArgumentParser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_key_values(known.config)
        known_dests = set()
        for sub in subparsers.values():
            dests = {action.dest for action in sub._actions}
            known_dests |= dests
            sub.set_defaults(**{key: value for key, value in values.items() if key in dests})
        unknown = set(values) - known_dests
        if unknown:
            raise ValueError('{}: unknown options {}'.format(known.config, ', '.join(sorted(unknown))))
    args = parser.parse_args(argv)
    missing = [name for name in REQUIRED[args.command] if getattr(args, name) is None]
    if missing:
        raise ValueError('{}: missing required options {}'.format(
            args.command, ', '.join('--' + name for name in missing)))
    return args


def resolved_config(args):
    """Every option with its final value, for report headers."""
    return {key: value for key, value in vars(args).items() if key not in NOT_CONFIG}


def five_config_from_args(args):
    return FiveConfig(contrast=ContrastModel(args.contrast), max_iterations=args.iterations,
                      regularization=args.regularization, tolerance=args.tolerance)


def scene_spec_from_args(args, seed=None):
    return SceneSpec(num_channels=args.channels, num_bins=args.bins, num_frames=args.frames,
                     sample_rate=args.sample_rate, target_model=args.target_model,
                     num_interferers=args.interferers, input_sinr_db=args.sinr_db,
                     uncorrelated_noise_fraction=args.noise_fraction,
                     seed=args.seed if seed is None else seed, mixing=args.mixing, filter_length=args.filter_length)


def _write_report(report, args):
    if args.report:
        report.to_csv(args.report, header=resolved_config(args))
        logger.info('wrote report %s', args.report)


def cmd_extract(args):
    five_config = five_config_from_args(args)
    if os.path.isdir(args.input):
        scene = load_scene(args.input)
        if scene.is_spectral:
            projected, report, _ = extract_spectrum(scene.mixture, five_config, verbose=args.verbose)
            write_tensor(args.output, projected[:, :, None])
            logger.info('wrote %s', args.output)
            _write_report(report, args)
            return 0
        wave, stft_config = scene.mixture, scene.spec.stft_config
    else:
        wave, stft_config = read_wave(args.input), StftConfig(args.frame_size, args.hop)
    args.frame_size, args.hop = stft_config.frame_size, stft_config.hop
    output, report = extract(wave, stft_config, five_config, verbose=args.verbose)
    write_wave(args.output, output, format=args.format)
    logger.info('wrote %s', args.output)
    _write_report(report, args)
    return 0


def cmd_simulate(args):
    seeds = range(args.seed, args.seed + args.scenes)
    for seed in seeds:
        if args.scene:
            scene = get_scene_fun(args.scene)(seed)
        else:
            scene = generate_scene(scene_spec_from_args(args, seed))
        directory = args.output if args.scenes == 1 else os.path.join(args.output, 'seed_{}'.format(seed))
        save_scene(scene, directory)
    return 0


def _read_extracted(path):
    if path.endswith('.fiv'):
        return read_tensor(path)[:, :, 0]
    return read_wave(path).channel(0)


def oracle_estimate(scene):
    """Output of the oracle beamformer projected back onto channel 1, in the scene's domain."""
    spectrum = scene.spectrum()
    projected = project_back(apply_filters(oracle_max_sinr(scene), spectrum), spectrum)
    if scene.is_spectral:
        return projected
    return synthesize(spectrum.with_data(projected[:, :, None])).channel(0)


def cmd_evaluate(args):
    scene = load_scene(args.input)
    scene_id = os.path.basename(os.path.normpath(args.input))
    metrics = evaluate_extraction(scene, _read_extracted(args.extracted))
    rows = [metrics.as_row(scene_id, args.algorithm, args.iterations)]
    logger.info('%s: SI-SDR %.2f dB (gain %.2f), SI-SIR %.2f dB (gain %.2f)', scene_id, metrics.si_sdr_db,
                metrics.delta_si_sdr_db, metrics.si_sir_db, metrics.delta_si_sir_db)
    if args.oracle:
        rows.append(evaluate_extraction(scene, oracle_estimate(scene)).as_row(scene_id, 'oracle', 0))
    write_csv_report(args.report, rows, METRIC_COLUMNS, header=resolved_config(args), append=True)
    return 0


def bench_scene(spec, five_config):
    """Rows of (seed, iteration, runtime, nll, SI-SDR gain) for one scene.
       Runtime counts the STFT, the whitening and the iterations, not the monitoring."""
    scene = generate_scene(spec)
    start = time.perf_counter()
    spectrum = scene.spectrum()
    analysis_ms = 1000.0 * (time.perf_counter() - start)
    extractor = Extractor(spectrum, five_config)
    rows = []
    cumulative = analysis_ms
    for state, record in extractor.iterate():
        cumulative += record.wall_time_ms
        projected = project_back(state.extracted(extractor.whitened), spectrum)
        if scene.is_spectral:
            estimate = projected
        else:
            estimate = synthesize(spectrum.with_data(projected[:, :, None])).channel(0)
        metrics = evaluate_extraction(scene, estimate)
        rows.append({'seed': spec.seed, 'iteration': record.iteration,
                     'runtime_per_second': cumulative / 1000.0 / spec.duration, 'cumulative_ms': cumulative,
                     'nll': record.nll, 'delta_si_sdr': metrics.delta_si_sdr_db})
    return rows


def cmd_bench(args):
    five_config = five_config_from_args(args)
    specs = [scene_spec_from_args(args, seed) for seed in range(args.seed, args.seed + args.scenes)]
    rows = []
    with ThreadPoolExecutor(max_workers=worker_count(args.threads)) as pool:
        futures = [pool.submit(bench_scene, spec, five_config) for spec in specs]
        for future in tqdm(as_completed(futures), total=len(futures), desc='bench', disable=len(futures) < 2):
            rows.extend(future.result())
    rows.sort(key=lambda row: (row['seed'], row['iteration']))
    write_csv_report(args.report, rows, BENCH_COLUMNS, header=resolved_config(args))
    final = {row['seed']: row['delta_si_sdr'] for row in rows}
    logger.info('%d scenes, median final SI-SDR gain %.2f dB', len(specs), float(np.median(list(final.values()))))
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage
        return 0 if not exc.code else 1
    except (ValueError, OSError) as exc:
        logger.error('%s', exc)
        return 1
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.func(args)
    except ValueError as exc:
        logger.error('%s', exc)
        return 1
    except (FiveError, OSError) as exc:
        logger.error('%s', exc)
        return 2


if __name__ == '__main__':
    sys.exit(main())
