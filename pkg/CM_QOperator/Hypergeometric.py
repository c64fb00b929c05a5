########################################################################
## IMPORTS
########################################################################
import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np

from .Algebra import as_coords, chamber_gap, enumerate_weights, positive_roots, weyl_vector
from .Errors import (
    OracleRangeError,
    ParameterError,
    ResonantSpectralParameterError,
    SeriesDivergenceError,
    ToleranceUnreachableError,
    WallGuardError,
)
from .FiniteDifferences import StencilEvaluator
from .QOperatorWorker import chunk_ranges, run_chunks
from .SpecialFunctions import harish_chandra_c

logger = logging.getLogger(__name__)

RESONANCE_THRESHOLD = 1e-10
DEFAULT_WALL_GUARD = 0.05
START_DEGREE = 8
MAX_DEGREE = 64
ALARM_WINDOW = 5
HYBRID_GAP = 1.3
ORIGIN_SERIES_MAX_TERMS = 20000


########################################################################
## LATTICE STRUCTURE
########################################################################
@dataclass(frozen=True)
class _LatticeStructure:
    # everything about Q_A^+ up to a degree that does not depend on (xi, lam)
    weights: tuple
    index: dict
    embedded: np.ndarray
    degrees: np.ndarray
    bounds: tuple
    entry_bounds: tuple
    target: np.ndarray
    pred: np.ndarray
    root: np.ndarray
    shift: np.ndarray


@lru_cache(maxsize=16)
def _lattice_structure(N, max_degree):
    weights = enumerate_weights(N, max_degree)
    index = {w.m: k for k, w in enumerate(weights)}
    embedded = np.array([w.embed() for w in weights], dtype=float).reshape(len(weights), N)
    degrees = np.array([w.degree for w in weights], dtype=int)
    roots = positive_roots(N)
    # a positive root e_i - e_j has simple-root coordinates 1 on positions i..j-1
    root_steps = [tuple(1 if i <= k < j else 0 for k in range(N - 1)) for i, j in roots]

    target, pred, root, shift = [], [], [], []
    for k, w in enumerate(weights):
        for r, ((i, j), step) in enumerate(zip(roots, root_steps)):
            n = 1
            while True:
                m = tuple(a - n * b for a, b in zip(w.m, step))
                if min(m) < 0:
                    break
                p = index[m]
                target.append(k)
                pred.append(p)
                root.append(r)
                shift.append(embedded[p, i] - embedded[p, j])
                n += 1

    target = np.array(target, dtype=int)
    bounds = tuple(
        (int(np.searchsorted(degrees, d, "left")), int(np.searchsorted(degrees, d, "right")))
        for d in range(max_degree + 1))
    entry_bounds = tuple(
        (int(np.searchsorted(target, start, "left")), int(np.searchsorted(target, stop, "left")))
        for start, stop in bounds)
    return _LatticeStructure(
        weights=weights,
        index=index,
        embedded=embedded,
        degrees=degrees,
        bounds=bounds,
        entry_bounds=entry_bounds,
        target=target,
        pred=np.array(pred, dtype=int),
        root=np.array(root, dtype=int),
        shift=np.array(shift, dtype=float),
    )


########################################################################
## HARISH-CHANDRA SERIES TABLE
########################################################################
@dataclass(frozen=True, eq=False)
class HCSeriesTable:
    '''
    Coefficients Delta_chi(xi, lam) of the Harish-Chandra series up to a
    degree cutoff, aligned with ``weights`` (graded lexicographic order).
    '''
    xi: np.ndarray
    lam: float
    max_degree: int
    coeffs: np.ndarray
    min_denominator: float
    weights: tuple = field(repr=False)
    structure: _LatticeStructure = field(repr=False)

    @property
    def N(self):
        return self.xi.size

    def coeff(self, weight):
        return complex(self.coeffs[self.structure.index[tuple(weight.m)]])

    def degree_coeffs(self, degree):
        start, stop = self.structure.bounds[degree]
        return self.coeffs[start:stop]

    def to_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["degree"] + ["m%d" % (k + 1) for k in range(self.N - 1)] + ["re", "im"])
            for w, c in zip(self.weights, self.coeffs):
                writer.writerow([w.degree] + list(w.m) + [repr(float(c.real)), repr(float(c.imag))])


@dataclass(frozen=True)
class EvalDiagnostics:
    degree_used: int
    last_term_magnitude: float
    tail_estimate: float
    wall_gap: float
    scale: float = math.nan

    @property
    def relative_tail(self):
        if not self.scale > 0:
            return math.inf if self.tail_estimate > 0 else 0.0
        return self.tail_estimate / self.scale


def hc_coefficients(xi, lam, max_degree):
    '''
    Delta_chi from
    ((chi,chi) + 2(chi,xi)) Delta_chi
        = 2 lam sum_{alpha>0} sum_{n>=1} (alpha, xi + rho + chi - n alpha) Delta_{chi - n alpha}
    with Delta_0 = 1.
    '''
    xi = tuple(complex(z) for z in np.ravel(xi))
    return _hc_coefficients(xi, float(lam), int(max_degree))


@lru_cache(maxsize=512)
def _hc_coefficients(xi, lam, max_degree):
    if not lam > 0:
        raise ParameterError("hc_coefficients needs lambda > 0, got " + str(lam))
    if max_degree < 0:
        raise ParameterError("hc_coefficients needs max_degree >= 0, got " + str(max_degree))
    N = len(xi)
    structure = _lattice_structure(N, max_degree)
    xi_arr = np.array(xi, dtype=complex)
    emb = structure.embedded

    denominators = np.einsum("kn,kn->k", emb, emb) + 2.0 * (emb @ xi_arr)
    min_denominator = math.inf
    if len(structure.weights) > 1:
        magnitudes = np.abs(denominators[1:])
        worst = int(np.argmin(magnitudes))
        min_denominator = float(magnitudes[worst])
        if min_denominator < RESONANCE_THRESHOLD:
            chi = structure.weights[worst + 1]
            raise ResonantSpectralParameterError(
                "resonant spectral parameter: recursion denominator %.3e at chi = %s" % (min_denominator, chi),
                weight=chi)

    # (alpha, xi + rho) per positive root
    root_const = np.array([xi_arr[i] - xi_arr[j] + lam * (j - i) for i, j in positive_roots(N)], dtype=complex)
    factors = 2.0 * lam * (root_const[structure.root] + structure.shift) if structure.root.size else np.zeros(0)

    coeffs = np.zeros(len(structure.weights), dtype=complex)
    coeffs[0] = 1.0
    for degree in range(1, max_degree + 1):
        start, stop = structure.bounds[degree]
        first, last = structure.entry_bounds[degree]
        acc = np.zeros(stop - start, dtype=complex)
        np.add.at(acc, structure.target[first:last] - start,
                  factors[first:last] * coeffs[structure.pred[first:last]])
        coeffs[start:stop] = acc / denominators[start:stop]
    coeffs.setflags(write=False)
    xi_arr.setflags(write=False)

    return HCSeriesTable(
        xi=xi_arr,
        lam=lam,
        max_degree=max_degree,
        coeffs=coeffs,
        min_denominator=min_denominator,
        weights=structure.weights,
        structure=structure,
    )


########################################################################
## SERIES EVALUATION
########################################################################
def _series_terms(table, x, degree):
    stop = table.structure.bounds[degree][1]
    exponents = table.structure.embedded[:stop] @ x
    return table.coeffs[:stop] * np.exp(exponents)


def hc_series_eval(table, x, degree=None, alarm=True):
    '''
    phi(xi + rho, lam; x) = exp((xi+rho, x)) sum_chi Delta_chi exp((chi, x)),
    truncated at ``degree`` (default: the table's cutoff).
    '''
    x = as_coords(x)
    if x.size != table.N:
        raise ParameterError("point has %d coordinates, table has N = %d" % (x.size, table.N))
    gap = chamber_gap(x)
    if gap >= 0:
        raise WallGuardError("Harish-Chandra series needs a point inside the chamber, m_N = %g" % gap)
    D = table.max_degree if degree is None else min(int(degree), table.max_degree)

    terms = _series_terms(table, x, D)
    group_abs = np.bincount(table.structure.degrees[:terms.size], weights=np.abs(terms), minlength=D + 1)
    rho = weyl_vector(table.N, table.lam)
    lead = np.exp(np.dot(table.xi + rho, x))
    value = lead * terms.sum()

    last = float(group_abs[D] * abs(lead))
    tail = last / (1.0 - math.exp(gap))
    if alarm and D >= ALARM_WINDOW and np.all(np.diff(group_abs[D - ALARM_WINDOW + 1:]) > 0):
        raise SeriesDivergenceError(
            "Harish-Chandra series grows over the last %d degrees up to %d (m_N = %.3g)" % (ALARM_WINDOW, D, gap))
    return complex(value), EvalDiagnostics(D, last, tail, gap, float(abs(value)))


########################################################################
## EXTENDED HYPERGEOMETRIC FUNCTION
########################################################################
def _sigma_terms(sp, threshold):
    # (sigma u, c(-i sigma u)) for every permutation
    terms = []
    for sigma in permutations(range(sp.N)):
        su = sp.u[list(sigma)]
        terms.append((su, harish_chandra_c(-1j * su, sp.lam, threshold)))
    return terms


def _c_sum(terms, lam, x, degree, alarm):
    value = 0j
    tail = 0.0
    last = 0.0
    scale = 0.0
    diverged = False
    for su, c in terms:
        table = hc_coefficients(1j * su, lam, degree)
        try:
            phi, diag = hc_series_eval(table, x, alarm=alarm)
        except SeriesDivergenceError:
            diverged = True
            phi, diag = hc_series_eval(table, x, alarm=False)
        value += c * phi
        tail += abs(c) * diag.tail_estimate
        last += abs(c) * diag.last_term_magnitude
        scale += abs(c * phi)
    return value, tail, last, scale, diverged


def extended_hypergeom(sp, t, tol=1e-10, degree=None, wall_guard=DEFAULT_WALL_GUARD,
                       start_degree=START_DEGREE, max_degree=MAX_DEGREE, threshold=1e-8):
    '''
    F_N(u, lam; t) = sum_sigma c(-i sigma u, lam) phi(i sigma u + rho, lam; t).

    The degree cutoff doubles from ``start_degree`` until the summed tail
    estimate is below ``tol`` relative to sum_sigma |c_sigma phi_sigma|.
    A fixed ``degree`` skips the adaptation (shared cutoff for stencils).
    '''
    sp.check_regular(threshold)
    x = as_coords(t)
    if x.size != sp.N:
        raise ParameterError("point has %d coordinates, spectral parameter has N = %d" % (x.size, sp.N))
    gap = chamber_gap(x)
    if sp.N >= 2 and gap > -wall_guard:
        raise WallGuardError("extended_hypergeom needs m_N(t) <= -%g, got %.3g" % (wall_guard, gap))
    terms = _sigma_terms(sp, threshold)

    if degree is not None:
        value, tail, last, scale, _ = _c_sum(terms, sp.lam, x, int(degree), alarm=False)
        return value, EvalDiagnostics(int(degree), last, tail, gap, scale)

    D = int(start_degree)
    best = math.inf
    while True:
        value, tail, last, scale, diverged = _c_sum(terms, sp.lam, x, D, alarm=True)
        relative = tail / scale if scale > 0 else math.inf
        if not diverged and relative <= tol:
            return value, EvalDiagnostics(D, last, tail, gap, scale)
        best = min(best, relative)
        if D >= max_degree:
            raise ToleranceUnreachableError(
                "tolerance %.1e unreachable within degree %d at m_N = %.3g (best relative tail %.3e)"
                % (tol, max_degree, gap, best), best_tail=best)
        if diverged:
            logger.warning("divergence alarm at degree %d (m_N = %.3g), doubling", D, gap)
        else:
            logger.debug("degree %d insufficient (relative tail %.3e), doubling", D, relative)
        D = min(2 * D, int(max_degree))


def hybrid_hypergeom(sp, t, tol=1e-10, degree=None, threshold=1e-8):
    '''
    F_N valid up to the walls at N = 2 (origin series below HYBRID_GAP),
    extended_hypergeom everywhere else.
    '''
    x = as_coords(t)
    if sp.N == 2 and x.size == 2:
        sp.check_regular(threshold)
        gap = abs(x[1] - x[0])
        if gap < HYBRID_GAP:
            v = sp.u[0] - sp.u[1]
            value = np.exp(0.5j * (sp.u[0] + sp.u[1]) * (x[0] + x[1])) * a1_oracle(v, sp.lam, gap)
            return complex(value), EvalDiagnostics(0, 0.0, 0.0, -gap, abs(value))
    return extended_hypergeom(sp, x, tol=tol, degree=degree, threshold=threshold)


def dominant_asymptotics(sp, x, threshold=1e-8):
    '''F_N^as(u, lam; x) = sum_sigma c(-i sigma u, lam) exp((i sigma u + rho, x)).'''
    sp.check_regular(threshold)
    x = as_coords(x)
    rho = weyl_vector(sp.N, sp.lam)
    total = 0j
    for su, c in _sigma_terms(sp, threshold):
        total += c * np.exp(np.dot(1j * su + rho, x))
    return complex(total)


def remainder_envelope(sp, x, degree=32, threshold=1e-8):
    '''
    sum_sigma |c_sigma| |phi_sigma(x) - exp((i sigma u + rho, x))|, an upper
    bound for |F_N - F_N^as| that does not oscillate with sigma u.
    '''
    sp.check_regular(threshold)
    x = as_coords(x)
    rho = weyl_vector(sp.N, sp.lam)
    lead = math.exp(float(np.dot(rho, x)))
    total = 0.0
    for su, c in _sigma_terms(sp, threshold):
        table = hc_coefficients(1j * su, sp.lam, degree)
        terms = _series_terms(table, x, degree)
        total += abs(c) * lead * abs(terms[1:].sum())
    return total


def coefficient_growth(table, x0):
    '''
    max_{deg chi = d} |Delta_chi| exp(-(chi, x0)) per degree d, for a point
    x0 in -G_N; bounded in d when the coefficients obey the K_x0 estimate.
    '''
    x0 = np.asarray(x0, dtype=float)
    structure = table.structure
    normalised = np.abs(table.coeffs) * np.exp(-(structure.embedded @ x0))
    return np.array([normalised[start:stop].max() if stop > start else 0.0
                     for start, stop in structure.bounds[:table.max_degree + 1]])


########################################################################
## RANK-ONE ORACLE
########################################################################
def _free_closed_form(v, s):
    s = np.asarray(s, dtype=float)
    half = 0.5 * s
    out = np.ones_like(half)
    nz = half != 0
    if v == 0:
        out[nz] = half[nz] / np.sinh(half[nz])
    else:
        out[nz] = np.sin(v * half[nz]) / (v * np.sinh(half[nz]))
    return out


def _origin_series(v, lam, s):
    '''2F1((lam+iv)/2, (lam-iv)/2; lam+1/2; -sinh^2(s/2)) summed term by term.'''
    s = np.asarray(s, dtype=float)
    z = -np.sinh(0.5 * s) ** 2
    if np.any(np.abs(z) >= 1.0):
        raise OracleRangeError("origin series needs |sinh(s/2)| < 1, got s up to %g" % np.max(np.abs(s)))
    term = np.ones_like(z)
    total = np.ones_like(z)
    half = 0.5 * lam
    quarter_v2 = 0.25 * v * v
    c = lam + 0.5
    for k in range(ORIGIN_SERIES_MAX_TERMS):
        # (a+k)(b+k) = (lam/2+k)^2 + v^2/4 is real
        term = term * (((half + k) ** 2 + quarter_v2) / ((c + k) * (k + 1.0))) * z
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            return total
    raise SeriesDivergenceError("origin series did not converge within %d terms" % ORIGIN_SERIES_MAX_TERMS)


def a1_oracle_array(v, lam, s):
    if not lam > 0:
        raise ParameterError("a1_oracle needs lambda > 0, got " + str(lam))
    s = np.abs(np.asarray(s, dtype=float))
    if lam == 1.0:
        return _free_closed_form(float(v), s)
    return _origin_series(float(v), float(lam), s)


def a1_oracle(v, lam, s):
    '''
    Even solution of f'' + lam coth(s/2) f' + ((v^2 + lam^2)/4) f = 0 with
    f(0) = 1: the N = 2 reduced hypergeometric function. Closed form
    sin(vs/2)/(v sinh(s/2)) at lam = 1, origin series otherwise.
    '''
    return float(a1_oracle_array(v, lam, np.array([s], dtype=float))[0])


def a1_ode_residual(v, lam, s, h=1e-2, fd_order=4):
    '''Relative residual of the reduced ODE for a1_oracle under finite differences.'''
    stencil = StencilEvaluator(lambda y: a1_oracle(v, lam, y[0]), [s], h, fd_order)
    f = stencil.value()
    f1 = stencil.derivative(0)
    f2 = stencil.derivative(0, 0)
    drift = lam / math.tanh(0.5 * s) * f1
    mass = 0.25 * (v * v + lam * lam) * f
    return abs(f2 + drift + mass) / (abs(f2) + abs(drift) + abs(mass))


########################################################################
## BATCH EVALUATION ON QUADRATURE NODES
########################################################################
@dataclass(frozen=True)
class BatchEvaluation:
    '''
    gauged = exp(-(rho, s)) F_N(u, lam; s) per node, relative_tails per node.
    '''
    gauged: np.ndarray
    relative_tails: np.ndarray
    degree: int

    @property
    def max_relative_tail(self):
        return float(np.max(self.relative_tails)) if self.relative_tails.size else 0.0


def extended_hypergeom_batch(sp, nodes, degree=MAX_DEGREE, threads=1, chunk_size=2048,
                             hybrid_gap=HYBRID_GAP, threshold=1e-8):
    '''
    Gauged F_N on many sorted nodes at a fixed degree. For N = 2 nodes with
    a gap below ``hybrid_gap`` use the origin series instead of the c-sum.
    No divergence alarms: per-node relative tails are returned instead.
    '''
    sp.check_regular(threshold)
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    M, N = nodes.shape
    if N != sp.N:
        raise ParameterError("nodes have %d coordinates, spectral parameter has N = %d" % (N, sp.N))
    if N == 1:
        return BatchEvaluation(np.exp(1j * sp.u[0] * nodes[:, 0]), np.zeros(M), 0)

    gauged = np.empty(M, dtype=complex)
    tails = np.zeros(M)
    series_mask = np.zeros(M, dtype=bool)
    if N == 2 and hybrid_gap > 0:
        gaps = nodes[:, 1] - nodes[:, 0]
        series_mask = gaps < hybrid_gap
        if np.any(series_mask):
            v = sp.u[0] - sp.u[1]
            mean_u = 0.5 * (sp.u[0] + sp.u[1])
            g = gaps[series_mask]
            centre = nodes[series_mask].sum(axis=1)
            gauged[series_mask] = (np.exp(0.5 * sp.lam * g + 1j * mean_u * centre)
                                   * a1_oracle_array(v, sp.lam, g))

    rows = np.flatnonzero(~series_mask)
    if rows.size:
        terms = _sigma_terms(sp, threshold)
        structure = _lattice_structure(N, int(degree))
        deltas = np.column_stack([hc_coefficients(1j * su, sp.lam, int(degree)).coeffs for su, _ in terms])
        c = np.array([ci for _, ci in terms], dtype=complex)
        su_rows = np.array([su for su, _ in terms], dtype=float)
        last_start, last_stop = structure.bounds[int(degree)]
        last_deltas = np.abs(deltas[last_start:last_stop])
        emb_t = structure.embedded.T
        abs_c = np.abs(c)

        def evaluate(bounds):
            a, b = bounds
            X = nodes[rows[a:b]]
            E = np.exp(X @ emb_t)
            S = E @ deltas
            G = (np.exp(1j * (X @ su_rows.T)) * S) @ c
            last = (E[:, last_start:last_stop] @ last_deltas) @ abs_c
            scale = np.abs(S) @ abs_c
            gap = np.max(X[:, :-1] - X[:, 1:], axis=1)
            tail = last / (1.0 - np.exp(gap))
            return G, tail / np.maximum(scale, 1e-300)

        parts = run_chunks(evaluate, chunk_ranges(rows.size, chunk_size), threads, status="F_N on nodes")
        gauged[rows] = np.concatenate([p[0] for p in parts])
        tails[rows] = np.concatenate([p[1] for p in parts])

    return BatchEvaluation(gauged, tails, int(degree))


########################################################################
## L_2 EIGEN-EQUATION RESIDUAL
########################################################################
@dataclass(frozen=True)
class L2Residual:
    residual: float
    residual_2h: float
    ratio: float
    degree: int
    fd_order: int


def _l2_residual_at(sp, x, h, fd_order, degree):
    stencil = StencilEvaluator(lambda y: extended_hypergeom(sp, y, degree=degree, wall_guard=0.0)[0],
                               x, h, fd_order)
    F = stencil.value()
    grad = stencil.gradient()
    value = stencil.laplacian()
    for i in range(sp.N):
        for j in range(i + 1, sp.N):
            value = value + sp.lam / math.tanh(0.5 * (x[i] - x[j])) * (grad[i] - grad[j])
    rho = weyl_vector(sp.N, sp.lam)
    eigenvalue = -float(np.dot(sp.u, sp.u)) - float(np.dot(rho, rho))
    return abs(value - eigenvalue * F) / abs(F)


def l2_residual_report(sp, t, h=1e-3, fd_order=2, tol=1e-13, richardson=True):
    '''
    |(L_2 F_N)(t) - (-(u,u) - (rho,rho)) F_N(t)| / |F_N(t)| with
    L_2 = Laplacian + lam sum_{i<j} coth((t_i - t_j)/2)(d_i - d_j).
    '''
    x = as_coords(t)
    _, diag = extended_hypergeom(sp, x, tol=tol)
    degree = diag.degree_used
    residual = _l2_residual_at(sp, x, h, fd_order, degree)
    residual_2h = math.nan
    ratio = math.nan
    if richardson:
        residual_2h = _l2_residual_at(sp, x, 2.0 * h, fd_order, degree)
        ratio = residual_2h / residual if residual > 0 else math.inf
        expected = 2.0 ** fd_order
        if ratio < 0.5 * expected:
            logger.warning("L_2 residual: step h = %g looks too small (ratio %.2f, expected %.0f), rounding dominates",
                           h, ratio, expected)
        elif ratio > 2.0 * expected:
            logger.warning("L_2 residual: step h = %g looks too large (ratio %.2f, expected %.0f)", h, ratio, expected)
    return L2Residual(residual, residual_2h, ratio, degree, fd_order)


def l2_residual(sp, t, h=1e-3, fd_order=2, tol=1e-13, richardson=True):
    return l2_residual_report(sp, t, h, fd_order, tol, richardson).residual
