########################################################################
## IMPORTS
########################################################################
import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .Algebra import as_coords, weyl_vector
from .CalogeroMoser import eigenvalue_mu, log_kernel_K, log_weight_W
from .Errors import EmptyGridError, GridMismatchError, MemoryGuardError, ParameterError
from .Hypergeometric import HYBRID_GAP, MAX_DEGREE, extended_hypergeom_batch, hybrid_hypergeom
from .QOperatorWorker import chunk_ranges, run_chunks
from .SpecialFunctions import cosh_fourier_gamma

logger = logging.getLogger(__name__)

LAYOUTS = ("gaps", "box")
DEFAULT_PANEL_WIDTH = 4.0
NYSTROM_MAX_NODES = 4000
OSCILLATION_WARNING_XI = 2.0


########################################################################
## CHAMBER GRID
########################################################################
@dataclass(frozen=True, eq=False)
class ChamberGrid:
    '''
    Quadrature nodes (rows, strictly increasing) and positive weights on
    the chamber part of the cube [lo, hi]^N, lo = min(center) - R,
    hi = max(center) + R.
    '''
    nodes: np.ndarray
    weights: np.ndarray
    center: np.ndarray
    half_width: float
    panels_per_dim: int
    rule_order: int
    wall_guard: float
    layout: str
    grid_id: str = field(default="")

    @property
    def size(self):
        return self.weights.size

    @property
    def N(self):
        return self.nodes.shape[1]

    @property
    def lo(self):
        return float(np.min(self.center)) - self.half_width

    @property
    def hi(self):
        return float(np.max(self.center)) + self.half_width

    @property
    def region_volume(self):
        '''
        Volume of {lo <= s_1, s_N <= hi, every gap >= wall_guard}; for the
        "box" layout the volume of the box itself, an upper bound.
        '''
        N = self.N
        if self.layout == "box" or N == 1:
            return (2.0 * self.half_width) ** N
        H = max(self.hi - self.lo - (N - 1) * self.wall_guard, 0.0)
        return H ** N / math.factorial(N)

    def integrate(self, values):
        '''sum_k w_k values_k; numpy's pairwise summation keeps it reproducible.'''
        return np.sum(self.weights * np.asarray(values))

    def refined(self):
        return build_grid(self.center, self.half_width, panels=2 * self.panels_per_dim, order=self.rule_order,
                          wall_guard=self.wall_guard, layout=self.layout)

    def to_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["s%d" % (i + 1) for i in range(self.N)] + ["weight"])
            for row, w in zip(self.nodes, self.weights):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])


def _grid_id(nodes, weights):
    digest = hashlib.sha1()
    digest.update(np.ascontiguousarray(nodes).tobytes())
    digest.update(np.ascontiguousarray(weights).tobytes())
    return digest.hexdigest()[:16]


def composite_gauss_legendre(a, b, panels, order):
    '''Nodes and weights of the composite Gauss-Legendre rule on [a, b].'''
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tensor(rules):
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


def _box_layout(center, R, panels, order, wall_guard):
    rules = [composite_gauss_legendre(c - R, c + R, panels, order) for c in center]
    nodes, weights = _tensor(rules)
    if center.size > 1:
        keep = np.min(np.diff(nodes, axis=1), axis=1) > wall_guard
        nodes, weights = nodes[keep], weights[keep]
    return nodes, weights


def _gaps_layout(lo, hi, N, panels, order, wall_guard):
    # s_1 and the gaps g_k = s_{k+1} - s_k through a nested map of the unit cube:
    # h_k = g_k - wall_guard takes a fraction tau_k of what is left of H, and
    # s_1 takes the remaining room in [lo, hi - sum(g)]
    H = hi - lo - (N - 1) * wall_guard
    if H <= 0:
        raise EmptyGridError("grid is empty: the box [%g, %g] is too short for %d particles with wall guard %g"
                             % (lo, hi, N, wall_guard))
    unit = composite_gauss_legendre(0.0, 1.0, panels, order)
    tau, weights = _tensor([unit] * N)
    remaining = np.full(tau.shape[0], H)
    gaps = []
    for k in range(N - 1):
        h = remaining * tau[:, k]
        weights = weights * remaining
        remaining = remaining - h
        gaps.append(wall_guard + h)
    first = lo + remaining * tau[:, N - 1]
    weights = weights * remaining
    nodes = np.cumsum(np.column_stack([first] + gaps), axis=1)
    return nodes, weights


def build_grid(center, R, panels=None, order=10, wall_guard=0.0, layout="gaps",
               panel_width=DEFAULT_PANEL_WIDTH):
    '''
    Tensor-product Gauss-Legendre grid over the chamber part of the box around ``center``.

    layout "gaps" integrates in (s_1, gaps) coordinates, so the walls are
    integration boundaries and every node has all gaps >= wall_guard.
    layout "box" filters the tensor grid of [center - R, center + R]^N.
    '''
    center = np.array(as_coords(center), dtype=float)
    N = center.size
    if not R > 0:
        raise ParameterError("grid half width R must be positive, got " + str(R))
    if not 4 <= order <= 16:
        raise ParameterError("rule order must lie in 4..16, got " + str(order))
    if wall_guard < 0:
        raise ParameterError("wall guard must be nonnegative, got " + str(wall_guard))
    if layout not in LAYOUTS:
        raise ParameterError("unknown grid layout '%s', expected one of %s" % (layout, ", ".join(LAYOUTS)))

    lo = float(np.min(center)) - R
    hi = float(np.max(center)) + R
    length = 2.0 * R if (layout == "box" or N == 1) else hi - lo
    if panels is None:
        panels = max(1, int(math.ceil(length / panel_width)))
    if panels < 1:
        raise ParameterError("panels must be >= 1, got " + str(panels))

    if layout == "box" or N == 1:
        nodes, weights = _box_layout(center, R, panels, order, wall_guard)
    else:
        nodes, weights = _gaps_layout(lo, hi, N, panels, order, wall_guard)
    if weights.size == 0:
        raise EmptyGridError("grid is empty: the box around %s misses the chamber" % center)

    nodes.setflags(write=False)
    weights.setflags(write=False)
    center.setflags(write=False)
    logger.debug("grid %s: %d nodes, %d panels of order %d", layout, weights.size, panels, order)
    return ChamberGrid(nodes=nodes, weights=weights, center=center, half_width=float(R),
                       panels_per_dim=int(panels), rule_order=int(order), wall_guard=float(wall_guard),
                       layout=layout, grid_id=_grid_id(nodes, weights))


def interior_mask(grid, margin):
    '''Nodes whose coordinates all lie at least ``margin`` inside [lo, hi].'''
    nodes = grid.nodes
    return np.all((nodes >= grid.lo + margin) & (nodes <= grid.hi - margin), axis=1)


########################################################################
## INTEGRAL EQUATION
########################################################################
@dataclass(frozen=True)
class IntegralEquationResult:
    residual: float
    lhs: complex
    rhs: complex
    series_budget: float
    band_budget: float
    nodes: int
    degree: int

    def __iter__(self):
        return iter((self.residual, self.lhs, self.rhs))


def _band_budget(grid, lam, magnitudes):
    # the dropped band {gap < wall_guard} carries at most
    # gamma^(2 lam + 1)/(2 lam + 1) * sup(|integrand| / gap^(2 lam)) per unit wall area
    gamma = grid.wall_guard
    N = grid.N
    if gamma <= 0 or N < 2:
        return 0.0
    gaps = np.diff(grid.nodes, axis=1)
    smallest = gaps.min(axis=1)
    layer = smallest <= 2.0 * gamma
    if not np.any(layer):
        return 0.0
    sup = float(np.max(magnitudes[layer] / smallest[layer] ** (2.0 * lam)))
    length = grid.hi - grid.lo
    transverse = (N - 1) * length ** (N - 1) / math.factorial(N - 1)
    return gamma ** (2.0 * lam + 1.0) / (2.0 * lam + 1.0) * sup * transverse


def integral_equation_residual(xi, sp, t, grid, tol=1e-10, threads=1, degree=MAX_DEGREE,
                               hybrid_gap=HYBRID_GAP):
    '''
    Gauged integral equation at t:

    lhs = sum_k w_k exp(i xi sum(t - s_k)) K_N(t, s_k) F_N(u, lam; s_k) W_N(lam; s_k)
    rhs = mu_xi(u, lam) F_N(u, lam; t)

    residual = |lhs - rhs| / |rhs|. The result also carries the series
    truncation budget and, for a positive wall guard, the dropped-band
    budget, both relative to |rhs|.
    '''
    t = as_coords(t)
    if t.size != sp.N or grid.N != sp.N:
        raise ParameterError("integral equation mixes N = %d (u), %d (t) and %d (grid)" % (sp.N, t.size, grid.N))
    if sp.lam < 1:
        logger.warning("lambda = %g is below 1: integral equation run is exploratory", sp.lam)
    if abs(xi) > OSCILLATION_WARNING_XI:
        logger.warning("xi = %g: oscillatory phase, quadrature accuracy degrades", xi)

    nodes = grid.nodes
    batch = extended_hypergeom_batch(sp, nodes, degree=degree, threads=threads, hybrid_gap=hybrid_gap)
    rho = weyl_vector(sp.N, sp.lam)
    log_modulus = log_kernel_K(sp.lam, t[None, :], nodes) + log_weight_W(sp.lam, nodes) + nodes @ rho
    modulus = np.exp(log_modulus)
    phase = np.exp(1j * xi * (t.sum() - nodes.sum(axis=1)))
    values = modulus * phase * batch.gauged
    lhs = complex(grid.integrate(values))

    F, _ = hybrid_hypergeom(sp, t, tol=tol)
    rhs = eigenvalue_mu(xi, sp) * F
    scale = abs(rhs)
    residual = abs(lhs - rhs) / scale

    magnitudes = np.abs(values)
    series_budget = float(np.sum(grid.weights * modulus * np.abs(batch.gauged) * batch.relative_tails)) / scale
    band_budget = _band_budget(grid, sp.lam, magnitudes) / scale
    if series_budget > 0.1 * max(residual, tol):
        logger.warning("series truncation budget %.2e is comparable to the residual %.2e", series_budget, residual)
    logger.info("integral equation at t = %s: residual %.3e on %d nodes", t, residual, grid.size)
    return IntegralEquationResult(residual, lhs, complex(rhs), series_budget, band_budget, grid.size, batch.degree)


########################################################################
## NYSTROM MATRICES
########################################################################
@dataclass(frozen=True, eq=False)
class NystromMatrix:
    '''M[j, k] = sqrt(w_j) Q_xi(t_j, t_k) sqrt(w_k) on one grid.'''
    entries: np.ndarray
    grid_id: str
    xi: float

    @property
    def size(self):
        return self.entries.shape[0]

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def to_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["j", "k", "re", "im"])
            for (j, k), value in np.ndenumerate(self.entries):
                writer.writerow([j, k, repr(float(value.real)), repr(float(value.imag))])


def nystrom_matrix(xi, lam, grid, threads=1, max_nodes=NYSTROM_MAX_NODES, chunk_size=128):
    '''Symmetric-weight Nystrom matrix of the dimensionless Q-operator, symmetrised as (M + M^H)/2.'''
    M = grid.size
    if M == 0:
        raise EmptyGridError("Nystrom matrix needs a nonempty grid")
    if M > max_nodes:
        raise MemoryGuardError("Nystrom matrix refused: %d nodes exceed the limit of %d" % (M, max_nodes))
    nodes = grid.nodes
    sqrt_w = np.sqrt(grid.weights)
    half_log_w = 0.5 * log_weight_W(lam, nodes)
    sums = nodes.sum(axis=1)

    def fill(bounds):
        a, b = bounds
        log_modulus = (log_kernel_K(lam, nodes[a:b, None, :], nodes[None, :, :])
                       + half_log_w[a:b, None] + half_log_w[None, :])
        phase = xi * (sums[a:b, None] - sums[None, :])
        return sqrt_w[a:b, None] * sqrt_w[None, :] * np.exp(log_modulus + 1j * phase)

    blocks = run_chunks(fill, chunk_ranges(M, chunk_size), threads, status="Nystrom fill")
    entries = np.vstack(blocks)
    entries = 0.5 * (entries + entries.conj().T)
    return NystromMatrix(entries=entries, grid_id=grid.grid_id, xi=float(xi))


def commutator_norm(A, B, mask=None):
    '''
    ||AB - BA||_F / (||A||_F ||B||_F). With a node mask only the masked
    rows and columns of the commutator are measured; the norms of A and B
    stay global.
    '''
    if A.grid_id != B.grid_id:
        raise GridMismatchError("commutator of matrices on different grids (%s, %s)" % (A.grid_id, B.grid_id))
    C = A.entries @ B.entries - B.entries @ A.entries
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        C = C[np.ix_(mask, mask)]
    return float(np.linalg.norm(C) / (np.linalg.norm(A.entries) * np.linalg.norm(B.entries)))


def nystrom_leading_eigenvalues(A, k=1):
    '''The k largest eigenvalues of the Hermitian matrix, in decreasing order.'''
    values = np.linalg.eigvalsh(A.entries)
    return values[::-1][:k]


def plane_wave_defect(A, grid, u, lam, mask):
    '''
    N = 1: the Q-operator maps exp(i u t) to cosh_fourier_gamma(xi - u, lam) exp(i u t).
    Largest relative defect of the Nystrom action over the masked nodes.
    '''
    if grid.N != 1:
        raise ParameterError("plane-wave action is a rank-one check, got N = %d" % grid.N)
    t = grid.nodes[:, 0]
    sqrt_w = np.sqrt(grid.weights)
    wave = np.exp(1j * u * t)
    action = (A.entries @ (sqrt_w * wave)) / sqrt_w
    expected = cosh_fourier_gamma(A.xi - u, lam) * wave
    mask = np.asarray(mask, dtype=bool)
    return float(np.max(np.abs(action[mask] - expected[mask])) / abs(cosh_fourier_gamma(A.xi - u, lam)))
