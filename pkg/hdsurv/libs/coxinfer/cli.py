#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Command line entry points: fit, infer, simulate and bench qp
"""

from __future__ import print_function, division, absolute_import

import os
import re
import sys
import logging
import argparse

import numpy as np
import pandas as pd

from hdsurv.libs.coxinfer import __version__
from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import config as config_utils
from hdsurv.libs.coxinfer.core import data, inference, lasso, manifest, methods, simulation
from hdsurv.libs.coxinfer.core.kernel import CoxKernel

logger = logging.getLogger(consts.LIB_ID)

TERM_REGEX = re.compile(
    r'\s*([+-])?\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_.]*)\s*')


class ContrastParseError(ValueError):
    pass


def parse_contrast(text, labels):
    """
    Parses "2*x1 - x3 = 0.5" into a loading vector over labels and the hypothesized value (0 when omitted)
    :param text: str
    :param labels: list(str)
    :return: tuple(np.ndarray, float)
    """

    labels = list(labels)
    left, _, right = text.partition('=')
    try:
        a0 = float(right) if right.strip() else 0.0
    except ValueError:
        raise ContrastParseError('Invalid right hand side in contrast "{}"'.format(text))

    loading = np.zeros(len(labels))
    position = 0
    left = left.strip()
    if not left:
        raise ContrastParseError('Empty contrast "{}"'.format(text))
    while position < len(left):
        match = TERM_REGEX.match(left, position)
        if not match or match.end() == position or (position and not match.group(1)):
            raise ContrastParseError('Cannot parse contrast "{}" at "{}"'.format(text, left[position:]))
        sign, coefficient, label = match.groups()
        if label not in labels:
            raise ContrastParseError('Unknown covariate "{}" in contrast "{}"'.format(label, text))
        value = float(coefficient) if coefficient else 1.0
        loading[labels.index(label)] += -value if sign == '-' else value
        position = match.end()

    return loading, a0


def parse_list(text, cast=str):
    return [cast(item.strip()) for item in text.split(',') if item.strip()]


def _jobs(threads):
    return -1 if not threads else threads


# ================================================================================================================
# PARSER
# ================================================================================================================

def _add_data_arguments(parser):
    parser.add_argument('csv', help='Survival data CSV with a header row')
    parser.add_argument('--time-col', default='time')
    parser.add_argument('--status-col', default='status')
    parser.add_argument('--standardize', choices=consts.StandardizeModes.ALL, default=consts.StandardizeModes.NONE)
    parser.add_argument('--lambda', dest='lam', type=float, default=None, help='Fixed lasso penalty (default: CV)')
    parser.add_argument('--lambda-folds', type=int, default=consts.LAMBDA_FOLDS)
    parser.add_argument('--cv-loss', choices=consts.CvLosses.ALL, default=consts.CvLosses.HELDOUT)


def _add_common_arguments(parser):
    parser.add_argument('--seed', type=int, default=consts.DEFAULT_SEED)
    parser.add_argument('--threads', type=int, default=None, help='Parallel workers (default: logical cores)')
    parser.add_argument('--output', default='.', help='Output folder')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='coxinfer', description='Debiased lasso inference for high-dimensional Cox models')
    parser.add_argument('--version', action='version', version=__version__.get_version())
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    fit_parser = subparsers.add_parser('fit', help='Lasso fit with cross-validated penalty')
    _add_data_arguments(fit_parser)
    fit_parser.add_argument('--folds', type=int, default=None, help='Alias of --lambda-folds')
    _add_common_arguments(fit_parser)

    infer_parser = subparsers.add_parser('infer', help='Debiased lasso inference')
    _add_data_arguments(infer_parser)
    infer_parser.add_argument('--gamma', type=float, default=None, help='Fixed Theta tuning (default: CV)')
    infer_parser.add_argument('--folds', type=int, default=consts.GAMMA_FOLDS, help='Folds of the gamma CV')
    infer_parser.add_argument('--alpha', type=float, default=consts.CI_ALPHA)
    infer_parser.add_argument('--threshold-alpha', type=float, default=consts.THRESHOLD_ALPHA)
    infer_parser.add_argument(
        '--threshold-denominator', choices=consts.ThresholdDenominators.ALL,
        default=consts.ThresholdDenominators.SQRT_DIAG)
    infer_parser.add_argument(
        '--contrast', action='append', default=list(), help='Linear hypothesis such as "x2-x3=0" (repeatable)')
    infer_parser.add_argument(
        '--joint', action='append', default=list(), help='Comma separated covariates tested jointly (repeatable)')
    infer_parser.add_argument('--compare-mple', action='store_true', help='Add an unpenalized MPLE column set')
    infer_parser.add_argument('--export-theta', action='store_true', help='Write Theta as CSV with a JSON sidecar')
    _add_common_arguments(infer_parser)

    simulate_parser = subparsers.add_parser('simulate', help='Replicated simulation study')
    simulate_parser.add_argument(
        'config', help='Scenario TOML file or bundled preset ({})'.format(', '.join(config_utils.presets())))
    simulate_parser.add_argument('--replications', '--reps', type=int, default=None)
    simulate_parser.add_argument('--alpha', type=float, default=None)
    simulate_parser.add_argument('--methods', type=parse_list, default=None, help='Comma separated method ids')
    simulate_parser.add_argument(
        '--methods-path', action='append', default=list(), help='Folder with extra estimation methods')
    simulate_parser.add_argument('--decompose', action='store_true', help='Run the error decomposition instead')
    _add_common_arguments(simulate_parser)
    simulate_parser.set_defaults(seed=None)

    bench_parser = subparsers.add_parser('bench', help='Timing harness')
    bench_subparsers = bench_parser.add_subparsers(dest='bench_command')
    bench_subparsers.required = True
    qp_parser = bench_subparsers.add_parser('qp', help='Time the Theta construction')
    qp_parser.add_argument('--p', type=lambda text: parse_list(text, int), default=[20, 100, 200])
    qp_parser.add_argument(
        '--gamma', type=lambda text: parse_list(text, float), default=[0.3, 1.0, 2.0],
        help='Multiples of sqrt(log p / n)')
    qp_parser.add_argument('-n', type=int, default=500)
    qp_parser.add_argument('--repeats', type=int, default=consts.BENCH_REPEATS)
    _add_common_arguments(qp_parser)

    return parser


# ================================================================================================================
# COMMANDS
# ================================================================================================================

def _load(args, run_manifest):
    with run_manifest.stage('load'):
        dataset = data.load_csv(args.csv, time_col=args.time_col, status_col=args.status_col)
        run_manifest.add_input(args.csv)
        transformed, scaling = data.standardize(dataset, args.standardize)
    return dataset, transformed, scaling


def _configuration(args):
    return dict(sorted(vars(args).items()))


def cmd_fit(args):
    folds = args.folds or args.lambda_folds
    run_manifest = manifest.RunManifest('fit', _configuration(args), seeds={'folds': args.seed})
    dataset, transformed, scaling = _load(args, run_manifest)
    kernel = CoxKernel(transformed)

    curve = None
    lam = args.lam
    if lam is None:
        with run_manifest.stage('cv_lambda'):
            grid = lasso.lambda_grid(transformed, kernel=kernel)
            curve = lasso.cv_lambda(
                transformed, grid, fold_count=folds, seed=args.seed, cv_loss=args.cv_loss,
                n_jobs=_jobs(args.threads))
            lam = curve.chosen_lambda
    with run_manifest.stage('fit_lasso'):
        fit = lasso.fit_lasso(transformed, lam, kernel=kernel)

    document = fit.as_dict(labels=dataset.labels)
    document['beta_original'] = dict(zip(dataset.labels, scaling.to_original(fit.beta).tolist()))
    document['scaling'] = scaling.as_dict()
    document['standardize'] = args.standardize
    document['cv'] = curve.as_dict() if curve else None

    os.makedirs(args.output, exist_ok=True)
    manifest.write_json(os.path.join(args.output, 'fit.json'), document, run_manifest)
    run_manifest.write(args.output)
    logger.info('Lasso fit: {}'.format(fit))

    return consts.ExitCodes.OK


def _mple_table(dataset, transformed, scaling, alpha):
    fit = lasso.fit_mple(transformed)
    if fit.covariance is None or not fit.converged:
        raise exceptions.SolverError('MPLE did not produce a usable covariance')
    return inference.wald_table(
        dataset.labels, fit.beta, np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None)), alpha=alpha, scaling=scaling)


def _tests(args, result, dataset, scaling):
    tests = list()
    for text in args.contrast:
        loading, a0 = parse_contrast(text, dataset.labels)
        test = inference.wald_test(
            result.b, result.theta, result.n, scaling.loading_to_transformed(loading), a0=a0, alpha=args.alpha)
        document = test.as_dict()
        document.update({'hypothesis': text, 'loading': loading.tolist()})
        tests.append(document)

    for text in args.joint:
        names = parse_list(text)
        unknown = [name for name in names if name not in dataset.labels]
        if unknown or not names:
            raise ContrastParseError('Unknown covariates {} in --joint "{}"'.format(unknown, text))
        A = np.zeros((len(names), dataset.p))
        for row, name in enumerate(names):
            A[row, dataset.labels.index(name)] = 1.0
        test = inference.chisq_test(
            result.b, result.theta, result.n, scaling.loading_to_transformed(A), alpha=args.alpha)
        document = test.as_dict()
        document.update({'hypothesis': '{} = 0'.format(','.join(names)), 'loading': A.tolist()})
        tests.append(document)

    return tests


def cmd_infer(args):
    run_manifest = manifest.RunManifest(
        'infer', _configuration(args), seeds={'lambda_folds': args.seed, 'gamma_folds': args.seed})
    dataset, transformed, scaling = _load(args, run_manifest)

    context = methods.MethodContext(
        alpha=args.alpha, lam=args.lam, lambda_folds=args.lambda_folds, gamma=args.gamma, gamma_folds=args.folds,
        threshold_alpha=args.threshold_alpha, denominator=args.threshold_denominator, cv_loss=args.cv_loss,
        seed=args.seed, n_jobs=_jobs(args.threads))
    with run_manifest.stage('debiased_inference'):
        run = methods.run_debiased(transformed, context)
    result = run.inference

    # tests are parsed before any output is written so a bad hypothesis leaves no partial results
    with run_manifest.stage('tests'):
        tests = _tests(args, result, dataset, scaling)

    table = inference.report_table(result, dataset.labels, scaling=scaling)
    os.makedirs(args.output, exist_ok=True)
    manifest.write_csv(os.path.join(args.output, 'coefficients.csv'), table.to_frame(), run_manifest)
    manifest.write_json(os.path.join(args.output, 'coefficients.json'), {
        'alpha': table.alpha, 'rows': table.rows}, run_manifest)
    manifest.write_json(os.path.join(args.output, 'infer.json'), {
        'lambda': run.fit.lam,
        'lambda_cv': run.lambda_curve.as_dict() if run.lambda_curve else None,
        'gamma': run.theta.gamma,
        'gamma_cv': run.gamma_curve.as_dict() if run.gamma_curve else None,
        'ridge': run.theta.ridge,
        'theta_max_row_kkt': run.theta.max_row_kkt,
        'theta_asymmetry': run.theta.asymmetry(),
        'lasso': run.fit.as_dict(labels=dataset.labels),
        'standardize': args.standardize,
        'scaling': scaling.as_dict(),
    }, run_manifest)
    if tests:
        manifest.write_json(os.path.join(args.output, 'tests.json'), {'tests': tests}, run_manifest)

    if args.compare_mple:
        try:
            with run_manifest.stage('mple'):
                mple_table = _mple_table(dataset, transformed, scaling, args.alpha)
        except (exceptions.SolverError, exceptions.InferenceError) as exc:
            logger.warning('MPLE comparison skipped: {}'.format(exc))
        else:
            comparison = table.to_frame().merge(
                mple_table.to_frame(), on='label', suffixes=('_qp', '_mple'), sort=False)
            manifest.write_csv(os.path.join(args.output, 'comparison.csv'), comparison, run_manifest)

    if args.export_theta:
        frame = pd.DataFrame(run.theta.matrix, index=list(dataset.labels), columns=list(dataset.labels))
        frame.index.name = 'label'
        manifest.write_csv(os.path.join(args.output, 'theta.csv'), frame.reset_index(), run_manifest)
        sidecar = run.theta.sidecar()
        sidecar.update({'labels': list(dataset.labels), 'standardize': args.standardize})
        manifest.write_json(os.path.join(args.output, 'theta.json'), sidecar, run_manifest)

    run_manifest.write(args.output)
    print(table.sorted_by_p_value().to_frame().to_string(index=False))

    return consts.ExitCodes.OK


def cmd_simulate(args):
    config = config_utils.load_config(
        args.config, replications=args.replications, seed=args.seed, alpha=args.alpha,
        methods=tuple(args.methods) if args.methods else None)
    factory = methods.create_factory(paths=args.methods_path)
    run_manifest = manifest.RunManifest(
        'simulate', {'scenario': config.as_dict(), 'decompose': args.decompose, 'methods_path': args.methods_path},
        seeds={'replications': config.seed})
    if os.path.isfile(args.config):
        run_manifest.add_input(args.config)
    os.makedirs(args.output, exist_ok=True)

    if args.decompose:
        with run_manifest.stage('decomposition'):
            summary = simulation.run_decomposition(config, n_jobs=_jobs(args.threads))
        manifest.write_json(os.path.join(args.output, 'decomposition.json'), summary.as_dict(), run_manifest)
        manifest.write_csv(os.path.join(args.output, 'decomposition.csv'), summary.to_frame(), run_manifest)
    else:
        with run_manifest.stage('replications'):
            summaries = simulation.run_sweep(config, n_jobs=_jobs(args.threads), factory=factory)
        manifest.write_json(os.path.join(args.output, 'summary.json'), {
            'summaries': [summary.as_dict() for summary in summaries]}, run_manifest)
        frame = simulation.summaries_frame(summaries)
        manifest.write_csv(os.path.join(args.output, 'summary.csv'), frame, run_manifest)
        print(frame.to_string(index=False))
        joint = simulation.tests_frame(summaries)
        if joint is not None:
            manifest.write_csv(os.path.join(args.output, 'tests.csv'), joint, run_manifest)
            print(joint.to_string(index=False))

    run_manifest.write(args.output)

    return consts.ExitCodes.OK


def cmd_bench(args):
    run_manifest = manifest.RunManifest('bench qp', _configuration(args), seeds={'datasets': args.seed})
    with run_manifest.stage('bench'):
        frame = simulation.bench_theta(args.p, args.gamma, n=args.n, repeats=args.repeats, seed=args.seed)
    os.makedirs(args.output, exist_ok=True)
    manifest.write_csv(os.path.join(args.output, 'bench.csv'), frame, run_manifest)
    run_manifest.write(args.output)
    print(frame.to_string(index=False))

    return consts.ExitCodes.OK


COMMANDS = {'fit': cmd_fit, 'infer': cmd_infer, 'simulate': cmd_simulate, 'bench': cmd_bench}


def main(argv=None):
    """
    Runs the command line and returns the exit code: 2 parse errors and missing files, 3 invalid data or
    configuration, 4 solver failures, 5 quadratic programming failures
    :param argv: list(str) or None
    :return: int
    """

    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return COMMANDS[args.command](args)
    except ContrastParseError as exc:
        logger.error(str(exc))
        return consts.ExitCodes.PARSE
    except (IOError, OSError) as exc:
        logger.error(str(exc))
        return consts.ExitCodes.PARSE
    except exceptions.CoxInferError as exc:
        logger.error('{}: {}'.format(exc.__class__.__name__, exc))
        return exc.exit_code


if __name__ == '__main__':
    sys.exit(main())
