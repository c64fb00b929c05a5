########################################################################
## IMPORTS
########################################################################
import logging
import math
import time

import numpy as np

from .Algebra import SpectralParameter, chamber_gap, weyl_vector
from .CalogeroMoser import (
    PhysicalParams,
    asymptotic_mu_residual,
    calibration_residual,
    cosh_fourier_quad,
    difference_eq_residual,
    difference_eq_residual_physical,
    eigenvalue_mu,
    hr_eigen_residual,
    kernel_identity_residual,
    random_smooth_function,
    truncation_radius,
)
from .Config.ExperimentConfig import QUADRATURE_EXPERIMENTS, SWEEP_AXES, validate
from .Errors import NUMERIC_FAILURES, ConfigError, QOperatorError
from .Hypergeometric import dominant_asymptotics, extended_hypergeom, l2_residual_report, remainder_envelope
from .Quadrature import (
    NYSTROM_MAX_NODES,
    build_grid,
    commutator_norm,
    integral_equation_residual,
    interior_mask,
    nystrom_leading_eigenvalues,
    nystrom_matrix,
    plane_wave_defect,
)
from .Reports import SweepRow, VerificationReport, plot_sweep, write_sweep_csv
from .SpecialFunctions import cosh_fourier_gamma

logger = logging.getLogger(__name__)

MIN_U_SEPARATION = 0.2
DEFAULT_V = (0.0, 0.7, 2.0)
# checked besides the configured lambda
FOURIER_LAMBDAS = (1.0, 1.5, 2.0, 3.5)
DEFAULT_TAU = tuple(np.linspace(3.0, 12.0, 10))
# first-order kernel identity is tighter than the configured tolerance
KERNEL_R1_TOL = 1e-8
CALIBRATION_TOL = 1e-6
PLANE_WAVE_TOL = 1e-8
EIGENVALUE_BOUND_TOL = 1e-8
REFINEMENT_RATIO = 0.25
SLOPE_WINDOW = 0.25
L2_RATIO_WINDOW = 0.8


########################################################################
## SEEDED DRAWS
########################################################################
def random_momenta(rng, N, spread=1.5, min_separation=MIN_U_SEPARATION):
    '''N momenta in [-spread, spread] at least min_separation apart.'''
    while True:
        u = rng.uniform(-spread, spread, size=N)
        if N < 2 or np.min(np.diff(np.sort(u))) >= min_separation:
            return u


def random_chamber_point(rng, N, min_gap=0.5, max_gap=2.0, center=0.0):
    '''Increasing point with gaps in [min_gap, max_gap], centred near ``center``.'''
    gaps = rng.uniform(min_gap, max_gap, size=N - 1)
    t = np.concatenate([[0.0], np.cumsum(gaps)])
    return t - t.mean() + center + rng.uniform(-0.5, 0.5)


def _spectral(config, rng):
    u = np.asarray(config.u, dtype=float) if config.u is not None else random_momenta(rng, config.N)
    return SpectralParameter(u, config.lam)


def _point(config, rng, min_gap=0.5, max_gap=2.0):
    if config.t is not None:
        return np.sort(np.asarray(config.t, dtype=float))
    return random_chamber_point(rng, config.N, min_gap, max_gap)


def _plain(value):
    # JSON friendly copy of numpy scalars and arrays
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


########################################################################
## FOURIER-GAMMA
########################################################################
def _run_fourier_gamma(config, report, rng):
    values = config.v if config.v is not None else DEFAULT_V
    lambdas = [config.lam] + [lam for lam in FOURIER_LAMBDAS if lam != config.lam]
    worst = 0.0
    table = []
    for lam in lambdas:
        for v in values:
            exact = cosh_fourier_gamma(v, lam)
            numeric = cosh_fourier_quad(v, lam)
            error = abs(exact - numeric) / abs(exact)
            worst = max(worst, error)
            table.append({"lam": lam, "v": v, "gamma": exact, "quad": numeric})
    report.add_check("cosh-Fourier vs quadrature", worst, config.tol)
    report.diagnose(values=table)


########################################################################
## DIFFERENCE EQUATION
########################################################################
def _run_diff_eq(config, report, rng):
    sp = _spectral(config, rng)
    report.add_check("difference equation", difference_eq_residual(config.xi, sp), config.tol)

    params = PhysicalParams(g=config.lam * config.hbar, hbar=config.hbar, mu=config.mu)
    p = sp.u * config.hbar * config.mu
    z = config.xi * config.hbar * config.mu
    report.add_check("difference equation (physical)", difference_eq_residual_physical(z, p, params), config.tol)

    worst = 0.0
    for _ in range(config.samples):
        draw = SpectralParameter(random_momenta(rng, config.N), config.lam)
        worst = max(worst, difference_eq_residual(rng.uniform(-2.0, 2.0), draw))
    if config.samples:
        report.add_check("difference equation, random draws", worst, config.tol)
    report.diagnose(u=sp.u, mu_xi_abs=eigenvalue_mu(config.xi, sp), draws=config.samples)


########################################################################
## L_2 EIGEN-EQUATION
########################################################################
def _run_l2_eigen(config, report, rng):
    sp = _spectral(config, rng)
    t = _point(config, rng, min_gap=2.0, max_gap=3.0)
    main = l2_residual_report(sp, t, h=config.h, fd_order=config.fd_order, richardson=False)
    report.add_check("L_2 eigen-equation", main.residual, config.tol)
    # second order stencil so the h-halving ratio reads 4
    second = l2_residual_report(sp, t, h=config.h, fd_order=2)
    report.add_check("O(h^2) ratio |r(2h)/r(h) - 4|", abs(second.ratio - 4.0), L2_RATIO_WINDOW)
    report.diagnose(u=sp.u, t=t, degree=main.degree, ratio=second.ratio, residual_fd2=second.residual)


########################################################################
## QUANTUM INTEGRALS
########################################################################
def _integral_orders(N):
    orders = [r for r in (1, 2) if r <= N]
    if N == 3:
        orders.append(3)
    return orders


def _run_hr_eigen(config, report, rng):
    sp = _spectral(config, rng)
    t = _point(config, rng, min_gap=1.5, max_gap=2.5)
    params = PhysicalParams(g=config.lam * config.hbar, hbar=config.hbar, mu=config.mu)
    p = sp.u * config.hbar * config.mu
    x = t / config.mu
    for r in _integral_orders(config.N):
        residual = hr_eigen_residual(r, p, params, x, h=config.h, fd_order=config.fd_order, calibrated=True)
        report.add_check("H_%d eigen-equation" % r, residual, config.tol)

    worst = 0.0
    for _ in range(config.samples):
        center = random_chamber_point(rng, config.N, 0.5, 1.5)
        f = random_smooth_function(rng, center)
        worst = max(worst, calibration_residual(f, center, params, h=config.h, fd_order=config.fd_order))
    if config.samples:
        report.add_check("calibration H_1^2 - 2H_2", worst, CALIBRATION_TOL)
    report.diagnose(u=sp.u, t=t, p=p)


def _run_kernel_id(config, report, rng):
    samples = max(1, config.samples)
    worst = {r: 0.0 for r in _integral_orders(config.N)}
    for k in range(samples):
        t = _point(config, rng) if k == 0 else random_chamber_point(rng, config.N)
        s = random_chamber_point(rng, config.N)
        xi = rng.uniform(-1.0, 1.0)
        for r in worst:
            # third derivatives are rounding bound at small steps
            h = config.h if r < 3 else max(config.h, 1e-2)
            residual = kernel_identity_residual(r, xi, config.lam, t, s, h=h, fd_order=config.fd_order,
                                                calibrated=True)
            worst[r] = max(worst[r], residual)
    for r, residual in worst.items():
        report.add_check("kernel identity H_%d" % r, residual, KERNEL_R1_TOL if r == 1 else config.tol)
    report.diagnose(samples=samples)


########################################################################
## INTEGRAL EQUATION
########################################################################
def _run_int_eq(config, report, rng):
    sp = _spectral(config, rng)
    t = _point(config, rng, min_gap=1.0, max_gap=3.0)
    R = config.R if config.R is not None else truncation_radius(config.lam, config.N, 1e-2 * config.tol)
    grid = build_grid(t, R, panels=config.panels, order=config.order, wall_guard=config.wall_guard)
    result = integral_equation_residual(config.xi, sp, t, grid, tol=1e-12, threads=config.threads,
                                        degree=config.degree)
    report.add_check("integral equation", result.residual, config.tol)
    report.diagnose(u=sp.u, t=t, R=R, panels=grid.panels_per_dim, nodes=grid.size, degree=result.degree,
                    series_budget=result.series_budget, band_budget=result.band_budget,
                    mu_xi_abs=eigenvalue_mu(config.xi, sp), lhs=result.lhs, rhs=result.rhs)

    if config.refine:
        finer = integral_equation_residual(config.xi, sp, t, grid.refined(), tol=1e-12, threads=config.threads,
                                           degree=config.degree)
        report.add_check("integral equation, refined grid", finer.residual, config.tol)
        report.add_check("self-convergence |lhs(2P) - lhs(P)|/|rhs|",
                         abs(finer.lhs - result.lhs) / abs(result.rhs), config.tol)
        report.diagnose(refined_nodes=finer.nodes)


########################################################################
## COMMUTATOR
########################################################################
def _commutator_on(config, grid):
    A = nystrom_matrix(config.xi, config.lam, grid, threads=config.threads)
    B = nystrom_matrix(config.xi2, config.lam, grid, threads=config.threads)
    mask = interior_mask(grid, config.margin)
    if not np.any(mask):
        raise ConfigError("margin %g leaves no interior node" % config.margin, field="margin")
    return A, B, mask, commutator_norm(A, B, mask)


def _run_commutator(config, report, rng):
    center = _point(config, rng)
    R = config.R if config.R is not None else truncation_radius(config.lam, config.N, config.tol)
    grid = build_grid(center, R, panels=config.panels, order=config.order, wall_guard=config.wall_guard)
    A, B, mask, base = _commutator_on(config, grid)
    report.add_check("Hermiticity defect", max(A.hermiticity_defect(), B.hermiticity_defect()), 1e-14)

    if config.N == 1:
        u = config.u[0] if config.u is not None else 0.3
        report.add_check("plane-wave action", plane_wave_defect(A, grid, u, config.lam, mask), PLANE_WAVE_TOL)
        bound = cosh_fourier_gamma(0.0, config.lam)
        top = float(nystrom_leading_eigenvalues(A, 1)[0])
        report.add_check("leading eigenvalue / norm bound - 1", top / bound - 1.0, EIGENVALUE_BOUND_TOL)

    report.add_check("commutator [Q_xi, Q_xi2]", base, config.tol)
    report.diagnose(center=center, R=R, nodes=grid.size, interior_nodes=int(mask.sum()),
                    panels=grid.panels_per_dim, leading_eigenvalues=nystrom_leading_eigenvalues(A, 3))
    if config.N > 1 and config.u is not None:
        report.diagnose(mu_xi_abs=eigenvalue_mu(config.xi, SpectralParameter(config.u, config.lam)))

    if config.refine:
        coarse, fine, panels = _refinement_pair(config, grid, center, R, base)
        ratio = fine / coarse if coarse > 0 else 0.0
        report.add_check("refinement ratio", ratio, REFINEMENT_RATIO)
        report.diagnose(refinement_panels=panels, coarse_commutator=coarse, refined_commutator=fine)


def _refinement_pair(config, grid, center, R, base):
    # one panel doubling; steps down from the base grid when the doubled one exceeds the node limit
    finer = grid.refined()
    if finer.size <= NYSTROM_MAX_NODES:
        return base, _commutator_on(config, finer)[3], [grid.panels_per_dim, finer.panels_per_dim]
    if grid.panels_per_dim % 2:
        raise ConfigError("refined grid has %d nodes, over the limit of %d; use an even panel count to refine "
                          "downwards" % (finer.size, NYSTROM_MAX_NODES), field="panels")
    coarser = build_grid(center, R, panels=grid.panels_per_dim // 2, order=config.order,
                         wall_guard=config.wall_guard)
    logger.info("refined grid has %d nodes, comparing against %d panels instead", finer.size, coarser.panels_per_dim)
    return _commutator_on(config, coarser)[3], base, [coarser.panels_per_dim, grid.panels_per_dim]


########################################################################
## ASYMPTOTICS
########################################################################
def ray_directions(N):
    '''Three increasing directions into the chamber.'''
    if N == 2:
        return [np.array([-1.0, 1.0]), np.array([-1.0, 0.5]), np.array([-0.5, 1.0])]
    if N == 3:
        return [np.array([-1.0, 0.0, 1.5]), np.array([-2.0, 0.0, 1.0]), np.array([-1.0, 0.0, 1.0])]
    base = np.linspace(-1.0, 1.0, N)
    return [base, base * np.linspace(1.0, 1.5, N), base ** 3 + base]


def _run_asymptotics(config, report, rng):
    if config.N < 2:
        raise ConfigError("asymptotics need N >= 2, got %d" % config.N, field="N")
    sp = _spectral(config, rng)
    taus = np.asarray(config.tau if config.tau is not None else DEFAULT_TAU, dtype=float)
    rho = weyl_vector(sp.N, sp.lam)
    judged = taus.size >= 3
    rays = []
    for k, direction in enumerate(ray_directions(sp.N), start=1):
        gaps, envelope, defect = [], [], []
        for tau in taus:
            x = tau * direction
            lead = math.exp(-float(np.dot(rho, x)))
            gaps.append(chamber_gap(x))
            envelope.append(remainder_envelope(sp, x, degree=config.degree) * lead)
            F, _ = extended_hypergeom(sp, x, tol=1e-12)
            defect.append(abs(F - dominant_asymptotics(sp, x)) * lead)
        log_envelope = np.log(envelope)
        if k == 1:
            report.add_check("remainder envelope exp(-(rho,x)) A(x)", envelope[-1], judged=False)
        ray = {"direction": direction, "m_N": gaps, "envelope": envelope, "defect": defect}
        if judged:
            slope = float(np.polyfit(gaps, log_envelope, 1)[0])
            # |F_N - F_N^as| oscillates with the sigma u phases, so monotonicity is judged on the envelope
            defect_slope = float(np.polyfit(gaps, np.log(defect), 1)[0])
            report.add_check("ray %d slope |s - 1|" % k, abs(slope - 1.0), SLOPE_WINDOW)
            report.add_check("ray %d defect slope |s - 1|" % k, abs(defect_slope - 1.0), SLOPE_WINDOW)
            report.add_check("ray %d monotone max step" % k, float(np.max(np.diff(log_envelope))), 0.0)
            ray.update(slope=slope, defect_slope=defect_slope)
        rays.append(ray)
    report.diagnose(u=sp.u, tau=taus, rays=rays)


def _run_mu_asymptotic(config, report, rng):
    sp = _spectral(config, rng)
    t = _point(config, rng)
    report.add_check("asymptotic eigenvalue", asymptotic_mu_residual(config.xi, sp, t), config.tol)
    report.diagnose(u=sp.u, t=t, mu_xi_abs=eigenvalue_mu(config.xi, sp))


RUNNERS = {
    "int-eq": _run_int_eq,
    "kernel-id": _run_kernel_id,
    "commutator": _run_commutator,
    "diff-eq": _run_diff_eq,
    "asymptotics": _run_asymptotics,
    "fourier-gamma": _run_fourier_gamma,
    "l2-eigen": _run_l2_eigen,
    "hr-eigen": _run_hr_eigen,
    "mu-asymptotic": _run_mu_asymptotic,
}


########################################################################
## RUN
########################################################################
def run(config):
    '''
    Run one experiment and return its VerificationReport. Draws come from
    numpy's generator seeded with ``config.seed``, so a config reproduces
    its report exactly.
    '''
    validate(config)
    if config.exploratory:
        logger.warning("lambda = %g is below 1: exploratory run, checks are reported but not judged", config.lam)
    rng = np.random.default_rng(config.seed)
    report = VerificationReport(experiment=config.experiment, config=config.to_dict(), seed=config.seed,
                                exploratory=config.exploratory)
    start = time.perf_counter()
    RUNNERS[config.experiment](config, report, rng)
    report.wall_time_ms = 1000.0 * (time.perf_counter() - start)
    report.diagnostics = _plain(report.diagnostics)
    logger.info("%s finished in %.0f ms: %s", config.experiment, report.wall_time_ms,
                "pass" if report.passed else "FAIL")
    return report


########################################################################
## SWEEP
########################################################################
def _swept(config, axis, value):
    if axis == "xi":
        return config.replace(xi=float(value))
    if axis == "lambda":
        return config.replace(lam=float(value))
    if axis == "u-gap":
        if config.N < 2:
            raise ConfigError("a u-gap sweep needs N >= 2", field="axis")
        mean = float(np.mean(config.u)) if config.u is not None else 0.0
        offsets = np.arange(config.N)[::-1] - 0.5 * (config.N - 1)
        return config.replace(u=list(mean + float(value) * offsets))
    if axis == "grid-refinement":
        if config.experiment not in QUADRATURE_EXPERIMENTS:
            raise ConfigError("grid refinement applies to %s only" % ", ".join(QUADRATURE_EXPERIMENTS), field="axis")
        return config.replace(panels=int(value), refine=False)
    if axis == "tau":
        if config.experiment != "asymptotics":
            raise ConfigError("a tau sweep applies to asymptotics only", field="axis")
        return config.replace(tau=[float(value)])
    raise ConfigError("unknown sweep axis '%s', expected one of %s" % (axis, ", ".join(SWEEP_AXES)), field="axis")


def sweep(config, axis, values):
    '''
    One report row per value of ``axis``. A row that fails records its
    error and the sweep goes on. Writes config.csv and config.plot when set.
    '''
    if axis not in SWEEP_AXES:
        raise ConfigError("unknown sweep axis '%s', expected one of %s" % (axis, ", ".join(SWEEP_AXES)), field="axis")
    values = list(values)
    if not values:
        raise ConfigError("a sweep needs at least one value", field="values")
    _swept(config, axis, values[0])

    rows = []
    for value in values:
        try:
            report = run(validate(_swept(config, axis, value)))
        except (QOperatorError, *NUMERIC_FAILURES) as error:
            logger.warning("sweep %s = %g failed: %s", axis, value, error)
            rows.append(SweepRow.from_error(axis, value, error))
            continue
        rows.append(SweepRow.from_report(axis, value, report))

    if config.csv:
        write_sweep_csv(rows, config.csv)
    if config.plot:
        plot_sweep(rows, config.plot, title="%s: %s sweep" % (config.experiment, axis))
    return rows
