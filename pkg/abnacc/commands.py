from abc import ABC, abstractmethod
import logging

import numpy as np

from boundary import (
    BoundaryCase,
    boundary_curve,
    boundary_sweep,
    gram_matrix,
    kernel_family,
    martinet_closed_form
)
from errors import (
    AbnaccError,
    AssumptionFailure,
    CoefficientError,
    DegenerateFitError,
    InsufficientDataError,
    error_map
)
from geometry import adjoint_along, check_assumptions, reference_trajectory
from operators import eig_inequality_check, operator_conjugate_time
from reachset import (
    adapted_projection,
    empirical_envelope,
    fit_contact,
    local_min_xn,
    sample_affine,
    sample_sr,
    sector_sweep
)
from report_mgr import ReportMgr
from secondvar import (
    RestrictionMode,
    calibrate_coefficients,
    conjugate_time_search,
    form_at
)
from utils import Utils

logger = logging.getLogger(__name__)

# exit codes of the pipeline
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ASSUMPTION = 2

# neighbourhood of (T, 0) of the positivity check and its tolerance
POSITIVITY_RADIUS = 0.1
POSITIVITY_TOL = 1e-6

class Command(ABC):

    """
    Definition of the interface for abnacc commands.

    """

    @abstractmethod
    def execute(self, listener):
        """
        Definition of the command contract.

        :listener: Listener to report the command events.

        """
        pass

class PipelineState:

    """
    Implementation of the intermediate results shared by the commands of one
    run: trajectories, assumption reports, coefficients and conjugate times.

    """

    def __init__(self, config, report_mgr, listener):
        """
        Initialize the state internal data.

        :config: The SystemConfig.
        :report_mgr: The ReportMgr of the output directory.
        :listener: Listener to report the stage events.

        """
        self.config = config
        self.report_mgr = report_mgr
        self.listener = listener
        self.system = config.system()

        self.__trajectories = {}
        self.__reports = {}
        self.__coefficients = None
        self.__calibration = None
        self.__control_times = None
        self.__operator_times = None

    def progress(self, stage):
        def report(done, total):
            self.listener.on_stage_progress(stage, done, total)
        return report

    def gate(self, horizon):
        """
        Run the assumption gate on [0, horizon].

        :horizon: Final time of the checked trajectory.
        :returns: The passing AssumptionReport.

        """
        if horizon not in self.__reports:
            cfg = self.config
            traj = reference_trajectory(self.system, cfg.x0, horizon, cfg.trajectory_grid)
            self.__reports[horizon] = check_assumptions(
                traj, self.system, cfg.assumption_tol, cfg.rank_tol
            )

        report = self.__reports[horizon]
        if not report.passed:
            raise AssumptionFailure(report)

        return report

    def trajectory(self, horizon):
        """
        Get the reference trajectory with its adjoint at a horizon.

        :returns: The TrajectoryData.

        """
        if horizon not in self.__trajectories:
            cfg = self.config
            traj = reference_trajectory(self.system, cfg.x0, horizon, cfg.trajectory_grid)
            self.__trajectories[horizon] = adjoint_along(traj, self.system, cfg.rank_tol)

        return self.__trajectories[horizon]

    def coefficients(self):
        """
        Get the coefficient field: the configured one, or the one calibrated
        from the Hessian at the configured horizon for three-dimensional
        systems.

        :returns: (CoefficientField, calibration residual or None).

        """
        if self.__coefficients is None:
            cfg = self.config
            field_ = cfg.coefficient_field()

            if field_ is None:
                if cfg.dimension != 3:
                    raise CoefficientError(error_map['coefficient'].format(
                        'no coefficients configured for n = {}'.format(cfg.dimension)
                    ))

                stage = 'Calibrating coefficients'
                self.listener.on_stage_start(stage)
                traj, qfd = form_at(self.system, cfg.x0, cfg.horizon, cfg.trajectory_grid,
                                    cfg.control_grid, cfg.rank_tol)
                field_, self.__calibration = calibrate_coefficients(qfd, traj, self.system)
                self.listener.on_stage_finish(stage)

            self.__coefficients = field_

        return self.__coefficients, self.__calibration

    def conjugate_times(self):
        """
        Get the conjugate times of both routes.

        :returns: Dictionary with the 'control' and 'operator' results.

        """
        return {'control': self.control_times(), 'operator': self.operator_times()}

    def control_times(self):
        """
        Get t_cc and t_c from the restricted Hessian, computed once per run.

        :returns: Dictionary 't_cc', 't_c' -> ConjugateTimeResult.

        """
        if self.__control_times is None:
            cfg = self.config
            self.gate(cfg.scan_max)

            control = {}
            for mode, key in ((RestrictionMode.FREE, 't_cc'), (RestrictionMode.FIXED, 't_c')):
                stage = 'Scanning {} ({})'.format(key, mode.value)
                self.listener.on_stage_start(stage)
                control[key] = conjugate_time_search(
                    self.system, cfg.x0, mode, cfg.scan_max,
                    tol=cfg.conjugate_tol,
                    m=cfg.control_grid,
                    samples=cfg.trajectory_grid,
                    assumption_tol=cfg.assumption_tol,
                    rank_tol=cfg.rank_tol,
                    progress=self.progress(stage)
                )
                self.listener.on_stage_finish(stage)

            self.__control_times = control

        return self.__control_times

    def operator_times(self):
        """
        Get t_cc and t_c from the operators D2 and D1, computed once per run.

        :returns: Dictionary 't_cc', 't_c' -> ConjugateTimeResult, or None
                  without coefficients.

        """
        cfg = self.config
        if cfg.coefficient_field() is None and cfg.dimension != 3:
            return None

        if self.__operator_times is None:
            coeffs, _ = self.coefficients()
            operator = {}
            for which, key in (('D2', 't_cc'), ('D1', 't_c')):
                stage = 'Scanning {} ({})'.format(key, which)
                self.listener.on_stage_start(stage)
                operator[key] = operator_conjugate_time(
                    coeffs, which, cfg.scan_max,
                    tol=cfg.conjugate_tol,
                    grid=cfg.operator_grid,
                    progress=self.progress(stage)
                )
                self.listener.on_stage_finish(stage)

            self.__operator_times = operator

        return self.__operator_times

class PipelineCmd(Command):

    """
    Implementation of the common part of the pipeline commands: the shared
    state, the error translation and the report writing.

    """

    name = ''

    def __init__(self, config, out_dir, report_mgr=None, state=None):
        """
        Initialize the command internal data.

        :config: The SystemConfig.
        :out_dir: Output directory.
        :report_mgr: Report manager instance.
        :state: PipelineState shared with other commands.

        """
        super().__init__()

        self.config = config
        self.report_mgr = ReportMgr(out_dir) if not report_mgr else report_mgr
        self.state = state

    def execute(self, listener):
        """
        Run the command and write report.json.

        :listener: Event listener to propagate the command events.
        :returns: The exit code.

        """
        if self.state is None:
            self.state = PipelineState(self.config, self.report_mgr, listener)

        try:
            results = self.run(self.state, listener)
        except AssumptionFailure as err:
            logger.error('%s', err)
            self.report_mgr.write_report(self.name, self.config, {
                'status': 'assumption_failure',
                'assumptions': err.report.to_dict()
            })
            listener.on_error(str(err))
            return EXIT_ASSUMPTION
        except AbnaccError as err:
            logger.error('%s', err)
            self.report_mgr.write_report(self.name, self.config, {
                'status': 'failure',
                'error': str(err)
            })
            listener.on_error(str(err))
            return EXIT_FAILURE

        results['status'] = 'ok'
        self.report_mgr.write_report(self.name, self.config, results)

        return EXIT_OK

    @abstractmethod
    def run(self, state, listener):
        """
        Compute the results of the command.

        :state: The PipelineState.
        :listener: Event listener.
        :returns: Dictionary of results.

        """
        pass # pragma: no cover

class CheckAssumptionsCmd(PipelineCmd):

    """
    Implementation of 'check-assumptions' command: verification of H0..H4
    along the reference trajectory.

    """

    name = 'check-assumptions'

    def run(self, state, listener):
        stage = 'Checking assumptions'
        listener.on_stage_start(stage)
        report = state.gate(state.config.horizon)
        listener.on_stage_finish(stage)

        listener.on_result(self.name, 'H0..H4 hold on [0, {}]'.format(state.config.horizon))

        return {'assumptions': report.to_dict(), 'horizon': state.config.horizon}

class ConjugateTimesCmd(PipelineCmd):

    """
    Implementation of 'conjugate-times' command: t_cc and t_c from the
    Hessian of the end-point mapping and, when coefficients are available,
    from the operators D2 and D1.

    """

    name = 'conjugate-times'

    def run(self, state, listener):
        cfg = state.config
        times = state.conjugate_times()
        control, operator = times['control'], times['operator']

        results = {
            't_cc': Utils.conjugate_value(control['t_cc']),
            't_c': Utils.conjugate_value(control['t_c']),
            'scan_max': cfg.scan_max,
            'control_route': {k: v.to_dict() for k, v in control.items()},
            'operator_route': None
        }

        free, fixed = control['t_cc'], control['t_c']
        state.report_mgr.write_csv(
            'spectrum.csv',
            ('T', 'lambda_min_free', 'lambda_min_fixed'),
            zip(free.horizons, free.values, fixed.values)
        )

        if operator is not None:
            results['operator_route'] = {k: v.to_dict() for k, v in operator.items()}
            results['agreement'] = {
                key: self._agreement(control[key], operator[key], cfg.conjugate_tol)
                for key in ('t_cc', 't_c')
            }
            results['eigenvalue_lemma'] = self._lemma(state, operator['t_c'])

        listener.on_result(self.name, 't_cc = {}, t_c = {} (scan up to {})'.format(
            results['t_cc'], results['t_c'], cfg.scan_max
        ))

        return results

    @staticmethod
    def _agreement(control, operator, tol):
        if control.found != operator.found:
            return {'agree': False, 'difference': 'inf'}
        if not control.found:
            return {'agree': True, 'difference': 0.0}

        diff = abs(control.estimate - operator.estimate)
        return {'agree': bool(diff <= 20.0 * tol), 'difference': diff}

    @staticmethod
    def _lemma(state, t_c):
        """
        lambda_1 nonincreasing over the scan and lambda_1 > 2 mu_1 / T^2 below t_c.

        """
        cfg = state.config
        coeffs, _ = state.coefficients()

        rows = []
        for horizon in t_c.horizons:
            if t_c.found and horizon >= t_c.bracket_low:
                break
            lam, mu, ok = eig_inequality_check(coeffs, horizon, cfg.operator_grid)
            rows.append({'T': horizon, 'lambda1': lam, 'mu1': mu, 'holds': ok})

        lam = np.array([r['lambda1'] for r in rows])
        return {
            'rows': rows,
            'inequality': all(r['holds'] for r in rows),
            'nonincreasing': bool(np.all(np.diff(lam) <= 0.0))
        }

class BoundaryCmd(PipelineCmd):

    """
    Implementation of 'boundary' command: the contact coefficient A_T and the
    predicted boundary curves of the accessibility sets.

    """

    name = 'boundary'

    # half width of the sampled x1 window, relative to T
    curve_window = 0.25
    sweep_points = 16

    def run(self, state, listener):
        cfg = state.config
        horizon = cfg.horizon
        state.gate(horizon)

        coeffs, residual = state.coefficients()

        stage = 'Solving kernel BVP'
        listener.on_stage_start(stage)
        family = kernel_family(coeffs, horizon, cfg.operator_grid)
        gram = gram_matrix(coeffs, horizon, cfg.operator_grid, family)
        listener.on_stage_finish(stage)

        coefficient = float(gram[0, 0])
        results = {
            'T': horizon,
            'A_T': coefficient,
            'gram': gram,
            'bvp_residual': max(j.residual for j in family),
            'coefficients': coeffs.to_dict(),
            'calibration_residual': residual
        }

        if cfg.preset == 'martinet':
            exact, branch = martinet_closed_form(cfg.params['alpha'], horizon)
            results['closed_form'] = {
                'A_T': exact,
                'abs_error': abs(coefficient - exact),
                'branch_2': branch
            }

        results['sweep'] = self._sweep(state, coeffs, listener)

        window = (horizon * (1.0 - self.curve_window), horizon * (1.0 + self.curve_window))
        curves = [
            boundary_curve(coefficient, horizon, window, case, profile=family[0])
            for case in (BoundaryCase.AFFINE, BoundaryCase.SR)
        ]
        results['curves'] = [c.to_dict() for c in curves]
        state.report_mgr.write_csv(
            'curve.csv',
            ('case', 'x1', 'xn'),
            ((c.case.value, x1, xn) for c in curves for x1, xn in c.rows())
        )

        listener.on_result(self.name, 'A_T = {:.10g} at T = {}'.format(coefficient, horizon))

        return results

    def _sweep(self, state, coeffs, listener):
        """
        A_T on horizons strictly below t_c (or scan_max when there is none).

        """
        cfg = state.config
        operator = state.operator_times()
        t_c, t_cc = operator['t_c'], operator['t_cc']

        upper = t_c.bracket_low if t_c.found else cfg.scan_max
        horizons = upper * np.arange(1, self.sweep_points + 1) / (self.sweep_points + 1)

        stage = 'Sweeping A_T'
        listener.on_stage_start(stage)
        sweep = boundary_sweep(coeffs, horizons, t_cc.estimate, cfg.operator_grid)
        listener.on_stage_finish(stage)

        return sweep.to_dict()

class SampleCmd(PipelineCmd):

    """
    Implementation of 'sample' command: Monte Carlo clouds of the affine and
    sub-Riemannian accessibility sets, their envelopes and contact fits.

    """

    name = 'sample'

    def run(self, state, listener):
        cfg = state.config
        horizon = cfg.horizon
        state.gate(horizon)
        traj = state.trajectory(horizon)
        system = state.system

        kernel, coefficient = None, None
        try:
            coeffs, _ = state.coefficients()
            family = kernel_family(coeffs, horizon, cfg.operator_grid)
            kernel = Utils.kernel_target(family[0])
            coefficient = family[0].energy()
        except CoefficientError as err:
            logger.warning('no kernel family for the affine cloud: %s', err)

        stage = 'Sampling affine cloud'
        listener.on_stage_start(stage)
        affine = sample_affine(system, cfg.x0, horizon, cfg.eta, cfg.samples, cfg.seed,
                               kernel=kernel, workers=cfg.threads,
                               progress=state.progress(stage))
        listener.on_stage_finish(stage)

        stage = 'Sampling SR cloud'
        listener.on_stage_start(stage)
        sr = sample_sr(system, cfg.x0, horizon, cfg.sr_alpha, cfg.samples, cfg.seed,
                       workers=cfg.threads, progress=state.progress(stage))
        listener.on_stage_finish(stage)

        window = Utils.window(horizon, cfg.eta)
        results = {'window': window, 'A_T': coefficient}
        rows = []
        for cloud in (affine, sr):
            projected = adapted_projection(cloud, traj)
            lowest = local_min_xn(projected, horizon, POSITIVITY_RADIUS)
            entry = {
                'samples': len(cloud),
                'constraint': cloud.constraint,
                'families': cloud.family_counts(),
                'local_min_xn': lowest,
                'positive': bool(lowest >= -POSITIVITY_TOL),
                'fits': {side: self._fit(projected, horizon, side, window) for side in '+-'}
            }
            if cloud.reparam_error is not None:
                entry['reparam_error'] = float(np.max(cloud.reparam_error))
            results[cloud.case] = entry

            rows.extend(
                (cloud.case, f, x1, xn) for f, (x1, xn) in zip(cloud.families, projected)
            )

        state.report_mgr.write_csv('cloud.csv', ('case', 'family', 'x1', 'xn'), rows)

        if cfg.small_horizon < horizon:
            results['small_horizon'] = self._small_horizon(state, listener)

        if coefficient is not None:
            fit = results['AFFINE']['fits']['+']
            if 'coefficient' in fit:
                fit['relative_error'] = abs(fit['coefficient'] - coefficient) / abs(coefficient)

        listener.on_result(self.name, '{} + {} end-points, positive: {}'.format(
            len(affine), len(sr), results['AFFINE']['positive'] and results['SR']['positive']
        ))

        return results

    @staticmethod
    def _small_horizon(state, listener):
        """
        Positivity of both clouds near the abnormal end-point at T_small.

        """
        cfg = state.config
        horizon = cfg.small_horizon
        state.gate(horizon)
        traj = state.trajectory(horizon)

        stage = 'Sampling at T_small'
        listener.on_stage_start(stage)
        clouds = (
            sample_affine(state.system, cfg.x0, horizon, cfg.eta, cfg.samples, cfg.seed,
                          workers=cfg.threads),
            sample_sr(state.system, cfg.x0, horizon, cfg.sr_alpha, cfg.samples, cfg.seed,
                      workers=cfg.threads)
        )
        listener.on_stage_finish(stage)

        out = {'T': horizon}
        for cloud in clouds:
            lowest = local_min_xn(adapted_projection(cloud, traj), horizon, POSITIVITY_RADIUS)
            out[cloud.case] = {
                'local_min_xn': lowest,
                'positive': bool(lowest >= -POSITIVITY_TOL)
            }

        return out

    @staticmethod
    def _fit(projected, horizon, side, window):
        """
        Envelope of one branch and its power-law fit; a branch without
        enough points above the noise floor reports its envelope only.

        """
        try:
            envelope = empirical_envelope(projected, horizon, side, window=window)
        except InsufficientDataError as err:
            return {'error': str(err)}

        out = {'max_abs_xn': float(np.max(np.abs(envelope.xn))), 'floor': envelope.floor}
        try:
            out.update(fit_contact(envelope, horizon).to_dict())
        except DegenerateFitError as err:
            out['error'] = str(err)

        return out

class SectorDemoCmd(PipelineCmd):

    """
    Implementation of 'sector-demo' command: explicit L2-close controls
    reaching negative xn.

    """

    name = 'sector-demo'

    def run(self, state, listener):
        cfg = state.config
        horizon = cfg.horizon
        state.gate(horizon)

        stage = 'Sector sweep'
        listener.on_stage_start(stage)
        sweep = sector_sweep(state.system, state.trajectory(horizon), horizon, cfg.epsilons)
        listener.on_stage_finish(stage)

        results = sweep.to_dict()
        results['expected_slope'] = 5
        if cfg.preset == 'martinet':
            results['expected_coefficient'] = -cfg.params['alpha'] / 12.0

        listener.on_result(self.name, 'log-log slope {:.4f}'.format(sweep.slope))

        return results

class ClassifyCmd(PipelineCmd):

    """
    Implementation of 'classify' command: optimality verdicts of the
    reference trajectory at the configured horizon.

    """

    name = 'classify'

    def run(self, state, listener):
        cfg = state.config
        horizon = cfg.horizon
        state.gate(horizon)

        control = state.control_times()
        t_cc, t_c = control['t_cc'].estimate, control['t_c'].estimate

        results = {
            'T': horizon,
            't_cc': Utils.conjugate_value(control['t_cc']),
            't_c': Utils.conjugate_value(control['t_c']),
            'scan_max': cfg.scan_max,
            'time_minimal': bool(horizon < t_cc),
            'fixed_time_cost_minimal': bool(horizon < t_c),
            'sr_time_minimal': bool(horizon < t_cc),
            'beyond_scan': bool(horizon > cfg.scan_max)
        }

        listener.on_result(self.name, 'time-minimal: {}, fixed-time cost-minimal: {}'.format(
            results['time_minimal'], results['fixed_time_cost_minimal']
        ))

        return results

class AllCmd(PipelineCmd):

    """
    Implementation of 'all' command: every command in turn, sharing the
    intermediate results.

    """

    name = 'all'

    subcommands = (
        CheckAssumptionsCmd,
        ConjugateTimesCmd,
        BoundaryCmd,
        SampleCmd,
        SectorDemoCmd,
        ClassifyCmd
    )

    def run(self, state, listener):
        results = {}
        for cmd in self.subcommands:
            results[cmd.name] = cmd(self.config, None, self.report_mgr, state).run(state, listener)

        return results

COMMANDS = {cmd.name: cmd for cmd in AllCmd.subcommands + (AllCmd,)}
