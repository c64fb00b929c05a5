########################################################################
## IMPORTS
########################################################################
import cmath
import logging
import math
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import comb, gammaincc, gammaln, logsumexp

from .Algebra import (
    WALL_TOLERANCE,
    ChamberPoint,
    SpectralParameter,
    as_coords,
    elementary_symmetric,
    generating_E,
    weyl_vector,
)
from .Errors import ParameterError, PoleError
from .FiniteDifferences import StencilEvaluator
from .Hypergeometric import (
    HYBRID_GAP,
    a1_oracle,
    dominant_asymptotics,
    extended_hypergeom,
    hybrid_hypergeom,
)
from .SpecialFunctions import harish_chandra_c, log_cosh_fourier_gamma, log_gamma, sharp_weights

logger = logging.getLogger(__name__)


########################################################################
## PARAMETERS
########################################################################
@dataclass(frozen=True)
class PhysicalParams:
    '''Coupling g, Planck constant hbar and inverse length mu of the model.'''
    g: float
    hbar: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("g", "hbar", "mu"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError("%s must be positive, got %s" % (name, value))
            object.__setattr__(self, name, float(value))

    @classmethod
    def dimensionless(cls, lam):
        return cls(g=lam, hbar=1.0, mu=1.0)

    @property
    def lam(self):
        return self.g / self.hbar

    @property
    def is_dimensionless(self):
        return self.hbar == 1.0 and self.mu == 1.0

    def spectral(self, p):
        return SpectralParameter.from_physical(p, self.g, self.hbar, self.mu)

    def xi(self, z):
        return z / (self.hbar * self.mu)


@dataclass(frozen=True, eq=False)
class QKernelPoint:
    xi: float
    sp: SpectralParameter
    t: ChamberPoint
    s: ChamberPoint

    def __post_init__(self):
        if not (self.t.N == self.s.N == self.sp.N):
            raise ParameterError("kernel point mixes N = %d, %d and %d" % (self.t.N, self.s.N, self.sp.N))

    @classmethod
    def from_coords(cls, xi, sp, t, s):
        return cls(float(xi), sp, ChamberPoint.from_coords(t), ChamberPoint.from_coords(s))

    def kernel(self):
        return qz_kernel(self.xi, self.sp.lam, self.t, self.s)

    def integrand(self, tol=1e-10):
        return integrand_I(self.xi, self.sp, self.t, self.s, tol)


########################################################################
## POTENTIAL
########################################################################
def potential_u(x, params):
    '''u(x) = 2g(g - hbar) mu^2 / (4 sinh^2(mu x / 2)).'''
    if x == 0:
        raise PoleError("the pair potential has a pole at x = 0")
    sh = math.sinh(0.5 * params.mu * x)
    return 2.0 * params.g * (params.g - params.hbar) * params.mu ** 2 / (4.0 * sh * sh)


def total_potential(x, params):
    x = np.asarray(x, dtype=float).ravel()
    return sum(potential_u(x[i] - x[j], params) for i, j in combinations(range(x.size), 2))


########################################################################
## WEIGHT AND KERNEL (LOG SPACE)
########################################################################
def _log_2sinh_abs(y):
    y = np.abs(y)
    with np.errstate(divide="ignore"):
        return y + np.log(-np.expm1(-2.0 * y))


def _log_2cosh(y):
    y = np.abs(y)
    return y + np.log1p(np.exp(-2.0 * y))


def log_weight_W(lam, s):
    '''
    log W_N(lam; s) = lam sum_{i<j} log(4 sinh^2((s_i - s_j)/2)).

    Accepts a single point or an array of points along the last axis;
    returns -inf on the walls.
    '''
    s = np.asarray(s, dtype=float)
    N = s.shape[-1]
    total = np.zeros(s.shape[:-1])
    for i, j in combinations(range(N), 2):
        total = total + 2.0 * _log_2sinh_abs(0.5 * (s[..., i] - s[..., j]))
    total = lam * total
    return float(total) if total.ndim == 0 else total


def weight_W(lam, s):
    return np.exp(log_weight_W(lam, s))


def weight_W_exponential_form(lam, s):
    '''exp(-2(rho, s)) prod_{i<j} (1 - exp(s_i - s_j))^(2 lam), valid on G_N.'''
    s = as_coords(s)
    rho = weyl_vector(s.size, lam)
    log_total = -2.0 * float(np.dot(rho, s))
    for i, j in combinations(range(s.size), 2):
        log_total += 2.0 * lam * math.log1p(-math.exp(s[i] - s[j]))
    return math.exp(log_total)


def physical_weight(params, x):
    '''The weight in physical units: W_N(g/hbar; mu x).'''
    return weight_W(params.lam, params.mu * np.asarray(x, dtype=float))


def log_kernel_K(lam, t, s):
    '''
    log K_N(t, s) = -lam sum_{i,j} log(2 cosh((t_i - s_j)/2)).

    t and s broadcast against each other along the leading axes.
    '''
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    w = t[..., :, None] - s[..., None, :]
    total = -lam * _log_2cosh(0.5 * w).sum(axis=(-2, -1))
    return float(total) if np.ndim(total) == 0 else total


def kernel_K(lam, t, s):
    return np.exp(log_kernel_K(lam, t, s))


def qz_kernel(xi, lam, t, s):
    '''
    Dimensionless Q-kernel
    exp(i xi sum(t - s)) W^(1/2)(t) W^(1/2)(s) K_N(t, s).
    '''
    t = as_coords(t)
    s = as_coords(s)
    if t.size != s.size:
        raise ParameterError("qz_kernel needs points of equal length, got %d and %d" % (t.size, s.size))
    log_modulus = 0.5 * log_weight_W(lam, t) + 0.5 * log_weight_W(lam, s) + log_kernel_K(lam, t, s)
    if log_modulus == -math.inf:
        return 0j
    return cmath.exp(complex(log_modulus, xi * float(np.sum(t - s))))


def q_kernel_physical(z, params, x, y):
    '''Q_z(g; x, y) in physical units.'''
    mu = params.mu
    return qz_kernel(params.xi(z), params.lam, mu * as_coords(x), mu * as_coords(y))


########################################################################
## INTEGRAND AND EIGENFUNCTIONS
########################################################################
def integrand_I(xi, sp, t, s, tol=1e-10):
    '''
    I_xi(u, lam; t, s) = exp(i xi sum(t - s)) K_N(t, s) F_N(u, lam; s) W_N(lam; s).
    '''
    t = as_coords(t)
    s = as_coords(s)
    log_w = log_weight_W(sp.lam, s)
    if log_w == -math.inf:
        return 0j
    F, _ = hybrid_hypergeom(sp, s, tol=tol)
    phase = cmath.exp(1j * xi * float(np.sum(t - s)))
    return phase * math.exp(log_kernel_K(sp.lam, t, s) + log_w) * F


def _sorted_point(x):
    return np.sort(as_coords(x))


def _on_wall(x):
    return x.size > 1 and float(np.min(np.diff(x))) < WALL_TOLERANCE


def psi_eval(p, params, x, tol=1e-10, degree=None):
    '''Psi_N(p; x) = W_N^(1/2)(g; x) F_N(p/(hbar mu), g/hbar; mu x).'''
    x = _sorted_point(x)
    if _on_wall(x):
        return 0j
    sp = params.spectral(p)
    t = params.mu * x
    F, _ = hybrid_hypergeom(sp, t, tol=tol, degree=degree)
    return math.exp(0.5 * log_weight_W(params.lam, t)) * F


def psi_hat_eval(p, params, x, tol=1e-10, degree=None):
    '''Renormalised eigenfunction W^_N(p)^(1/2) Psi_N(p; x).'''
    weights = sharp_weights(p, params.g, params.hbar, params.mu)
    return math.exp(0.5 * weights.log_W_hat) * psi_eval(p, params, x, tol, degree)


def _gauged_function(sp, t0, tol):
    # fixed evaluation path around t0 so stencil values share one truncation
    t0 = np.sort(as_coords(t0))
    if sp.N == 2 and t0[1] - t0[0] < HYBRID_GAP:
        v = sp.u[0] - sp.u[1]
        mean_u = 0.5 * (sp.u[0] + sp.u[1])

        def evaluate(t):
            return cmath.exp(1j * mean_u * (t[0] + t[1])) * a1_oracle(v, sp.lam, t[1] - t[0])
        return evaluate

    _, diag = extended_hypergeom(sp, t0, tol=tol)
    degree = diag.degree_used

    def evaluate(t):
        return extended_hypergeom(sp, t, degree=degree, wall_guard=0.0)[0]
    return evaluate


def psi_function(p, params, x0, tol=1e-12):
    '''
    Psi_N as a callable on points near x0, with the series cutoff frozen
    at the one chosen for x0 (needed under finite differences).
    '''
    sp = params.spectral(p)
    F = _gauged_function(sp, params.mu * _sorted_point(x0), tol)

    def psi(x):
        t = params.mu * np.asarray(x, dtype=float)
        return math.exp(0.5 * log_weight_W(params.lam, t)) * F(t)
    return psi


########################################################################
## Q-EIGENVALUE
########################################################################
def log_eigenvalue_mu(xi, sp):
    '''
    log mu_xi(u, lam) with
    mu_xi = prod_i Gamma(lam/2 + i(u_i - xi)) Gamma(lam/2 - i(u_i - xi)) / Gamma(lam).
    xi may be complex.
    '''
    half = 0.5 * sp.lam
    log_norm = log_gamma(sp.lam)
    total = 0j
    for u in sp.u:
        a = 1j * (u - xi)
        total += log_gamma(half + a) + log_gamma(half - a) - log_norm
    return total


def eigenvalue_mu(xi, sp):
    '''mu_xi(u, lam) for real xi: a product of cosh-Fourier transforms, real and positive.'''
    return math.exp(sum(log_cosh_fourier_gamma(float(u - xi), sp.lam) for u in sp.u))


def phi_z(z, p, params):
    '''
    Physical Q-eigenvalue phi_z(p) = mu_xi(u, lam) / mu^N with xi = z/(hbar mu).
    Complex z gives the analytic continuation.
    '''
    sp = params.spectral(p)
    xi = params.xi(z)
    if isinstance(z, complex) and z.imag != 0:
        return cmath.exp(log_eigenvalue_mu(xi, sp) - sp.N * math.log(params.mu))
    return eigenvalue_mu(float(np.real(xi)), sp) / params.mu ** sp.N


########################################################################
## DIFFERENCE EQUATION
########################################################################
def _difference_sides(xi, sp):
    lam = sp.lam
    try:
        log_shifted = log_eigenvalue_mu(xi - 1j, sp)
    except PoleError:
        raise PoleError("pole collision in the difference equation at xi - i = %s" % (xi - 1j))
    log_mu = log_eigenvalue_mu(xi, sp)
    left = generating_E(1j * (1.0 - 0.5 * lam) - xi, sp.u) * cmath.exp(log_shifted)
    right = (-1) ** sp.N * generating_E(0.5j * lam - xi, sp.u) * cmath.exp(log_mu)
    return left, right


def difference_eq_residual(xi, sp):
    '''
    Relative defect of E(i(1 - lam/2) - xi; u) mu_{xi-i}(u) = (-1)^N E(i lam/2 - xi; u) mu_xi(u).
    '''
    left, right = _difference_sides(xi, sp)
    return abs(left - right) / (abs(left) + abs(right))


def difference_eq_residual_physical(z, p, params):
    '''
    Relative defect of
    E(i mu(hbar - g/2) - z; p) phi_{z - i hbar mu}(p) = (-1)^N E(i mu g/2 - z; p) phi_z(p).
    '''
    p = np.asarray(p, dtype=float).ravel()
    N = p.size
    mu, hbar, g = params.mu, params.hbar, params.g
    shift = 1j * hbar * mu
    try:
        shifted = phi_z(complex(z) - shift, p, params)
    except PoleError:
        raise PoleError("pole collision in the difference equation at z - i hbar mu = %s" % (z - shift))
    left = generating_E(1j * mu * (hbar - 0.5 * g) - z, p) * shifted
    right = (-1) ** N * generating_E(0.5j * mu * g - z, p) * phi_z(complex(z), p, params)
    return abs(left - right) / (abs(left) + abs(right))


########################################################################
## QUANTUM INTEGRALS
########################################################################
def _check_integral_order(r, N, calibrated):
    if r in (1, 2) and N >= r:
        return
    if r == 3 and N == 3:
        if not calibrated:
            raise ParameterError("H_3 is only available with calibrated=True")
        return
    raise ParameterError("quantum integral H_%s is not supported for N = %d" % (r, N))


def _momenta(stencil, axes, hbar, sign):
    # product of p_a = sign * (-i hbar) d_a over the given axes
    return (sign * -1j * hbar) ** len(axes) * stencil.derivative(*axes)


def _integral_action(r, stencil, axes, coords, params, sign):
    N = len(axes)
    if r == 1:
        return sum(_momenta(stencil, (a,), params.hbar, sign) for a in axes)
    value = stencil.value()
    if r == 2:
        total = 0j
        for i, j in combinations(range(N), 2):
            total += _momenta(stencil, (axes[i], axes[j]), params.hbar, sign)
            total -= 0.5 * potential_u(coords[i] - coords[j], params) * value
        return total
    total = _momenta(stencil, tuple(axes), params.hbar, sign)
    for i, j in combinations(range(N), 2):
        k = 3 - i - j
        total -= 0.5 * potential_u(coords[i] - coords[j], params) * _momenta(stencil, (axes[k],), params.hbar, sign)
    return total


def apply_Hr(r, f, x, params, h=1e-3, fd_order=2, calibrated=False):
    '''
    (H_r f)(x) by central finite differences, p_i = -i hbar d_i:

    H_1 = sum_i p_i
    H_2 = sum_{i<j} (p_i p_j - u(x_i - x_j)/2)
    H_3 = p_1 p_2 p_3 - (1/2) sum u(x_i - x_j) p_k   (N = 3, calibrated=True)

    The -1/2 potential insertion is the convention under which
    H_1^2 - 2 H_2 = -hbar^2 Laplacian + U.
    '''
    x = np.asarray(x, dtype=float).ravel()
    _check_integral_order(r, x.size, calibrated)
    stencil = StencilEvaluator(f, x, h, fd_order)
    return _integral_action(r, stencil, tuple(range(x.size)), x, params, 1.0)


def apply_H1_squared(f, x, params, h=1e-3, fd_order=2):
    x = np.asarray(x, dtype=float).ravel()
    stencil = StencilEvaluator(f, x, h, fd_order)
    total = 0j
    for i in range(x.size):
        for j in range(x.size):
            total += stencil.derivative(i, j)
    return -params.hbar ** 2 * total


def schrodinger_direct(f, x, params, h=1e-3, fd_order=2):
    '''(-hbar^2 Laplacian + U) f at x, straight from the definition.'''
    x = np.asarray(x, dtype=float).ravel()
    stencil = StencilEvaluator(f, x, h, fd_order)
    return -params.hbar ** 2 * stencil.laplacian() + total_potential(x, params) * stencil.value()


def calibration_residual(f, x, params, h=1e-3, fd_order=2):
    '''|(H_1^2 - 2 H_2) f - (-hbar^2 Laplacian + U) f| / |(-hbar^2 Laplacian + U) f|.'''
    lhs = apply_H1_squared(f, x, params, h, fd_order) - 2.0 * apply_Hr(2, f, x, params, h, fd_order)
    rhs = schrodinger_direct(f, x, params, h, fd_order)
    return abs(lhs - rhs) / abs(rhs)


def hr_eigen_residual(r, p, params, x, h=1e-3, fd_order=2, tol=1e-12, calibrated=False):
    '''|H_r Psi_N - S_r(p) Psi_N| / (|H_r Psi_N| + |S_r(p) Psi_N|) at x.'''
    x = _sorted_point(x)
    psi = psi_function(p, params, x, tol)
    action = apply_Hr(r, psi, x, params, h, fd_order, calibrated)
    expected = elementary_symmetric(r, p) * psi(x)
    return abs(action - expected) / (abs(action) + abs(expected))


def random_smooth_function(rng, center, width=1.0):
    '''Gaussian bump times a plane wave with a mixed polynomial factor, all parameters from rng.'''
    center = np.asarray(center, dtype=float).ravel()
    N = center.size
    shift = center + rng.normal(scale=0.3, size=N)
    scales = width * rng.uniform(0.6, 1.4, size=N)
    k = rng.normal(size=N)
    b = rng.normal(scale=0.3)

    def f(x):
        y = (np.asarray(x, dtype=float) - shift) / scales
        return np.exp(-0.5 * float(y @ y) + 1j * float(k @ x)) * (1.0 + b * y[0] * y[-1])
    return f


########################################################################
## KERNEL IDENTITIES
########################################################################
def kernel_identity_residual(r, xi, lam, t, s, h=1e-3, fd_order=2, calibrated=False):
    '''
    |(H_r(x) - H_r(-y)) Q(x, y)| / (|H_r(x) Q| + |H_r(-y) Q|) at (t, s), where
    H_r(-y) is H_r with p -> -p acting on the second argument.
    Dimensionless units: hbar = mu = 1, g = lam.
    '''
    t = as_coords(t)
    s = as_coords(s)
    N = t.size
    if s.size != N:
        raise ParameterError("kernel identity needs points of equal length, got %d and %d" % (N, s.size))
    _check_integral_order(r, N, calibrated)
    params = PhysicalParams.dimensionless(lam)
    stencil = StencilEvaluator(lambda z: qz_kernel(xi, lam, z[:N], z[N:]), np.concatenate([t, s]), h, fd_order)
    in_x = _integral_action(r, stencil, tuple(range(N)), t, params, 1.0)
    in_y = _integral_action(r, stencil, tuple(range(N, 2 * N)), s, params, -1.0)
    return abs(in_x - in_y) / (abs(in_x) + abs(in_y))


########################################################################
## TRUNCATION RADIUS
########################################################################
def _tail_log_weights(lam, N):
    # T(R) = sum_k C(P,k) 2^k int_R^inf r^(N-1+k) exp(-a r) dr, a = lam/2
    P = N * (N - 1) // 2
    a = 0.5 * lam
    k = np.arange(P + 1)
    n = k + N - 1
    log_weights = np.log(comb(P, k)) + k * math.log(2.0) + gammaln(n + 1) - (n + 1) * math.log(a)
    return log_weights, n, a


def log_tail_ratio(lam, N, R):
    '''log of T(R)/T(0) for T(R) = int_R^inf r^(N-1) (1+2r)^P exp(-lam r/2) dr, P = N(N-1)/2.'''
    log_weights, n, a = _tail_log_weights(lam, N)
    upper = gammaincc(n + 1, a * R)
    with np.errstate(divide="ignore"):
        return float(logsumexp(log_weights, b=upper) - logsumexp(log_weights))


def truncation_radius(lam, N, tol):
    '''
    Smallest R with T(R)/T(0) <= tol, the radial l1 tail of the integrand
    bound exp(-lam |s|_1 / 2) prod_{i<j}(1 + s_j - s_i).
    '''
    if not tol > 0:
        raise ParameterError("truncation tolerance must be positive, got " + str(tol))
    if not lam > 0:
        raise ParameterError("truncation_radius needs lambda > 0, got " + str(lam))
    if N < 1:
        raise ParameterError("truncation_radius needs N >= 1, got " + str(N))
    if tol >= 1.0:
        return 0.0
    target = math.log(tol)

    def excess(R):
        return log_tail_ratio(lam, N, R) - target

    upper = 1.0
    while excess(upper) > 0:
        upper *= 2.0
        if upper > 1e6:
            raise ParameterError("truncation_radius: no radius found for tol = %g" % tol)
    lower = 0.5 * upper if upper > 1.0 else 0.0
    return float(brentq(excess, lower, upper, xtol=1e-10, rtol=1e-12))


########################################################################
## ASYMPTOTIC EIGENVALUE CHECK
########################################################################
def cosh_fourier_quad(b, lam):
    '''Integral of cos(b w) / (2 cosh(w/2))^lam over the real line by adaptive quadrature.'''
    value, _ = quad(lambda w: math.cos(b * w) * math.exp(-lam * float(_log_2cosh(0.5 * w))),
                    -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
    return value


def asymptotic_mu_residual(xi, sp, t, threshold=1e-8):
    '''
    Compare the full-space integral of
    exp(-(rho, s) - i xi sum(s)) F_N^as(s) / prod_i (2 cosh((t_i - s_i)/2))^lam
    (summed over sigma from one-dimensional quadratures) with
    exp(-(rho, t) - i xi sum(t)) F_N^as(t) mu_xi(u, lam).
    Returned relative to mu_xi sum_sigma |c_sigma|.
    '''
    sp.check_regular(threshold)
    t = as_coords(t)
    if t.size != sp.N:
        raise ParameterError("point has %d coordinates, spectral parameter has N = %d" % (t.size, sp.N))
    integrals = {float(u): cosh_fourier_quad(float(u - xi), sp.lam) for u in sp.u}

    lhs = 0j
    scale = 0.0
    for sigma in permutations(range(sp.N)):
        su = sp.u[list(sigma)]
        c = harish_chandra_c(-1j * su, sp.lam, threshold)
        term = c
        for i in range(sp.N):
            term *= cmath.exp(1j * (su[i] - xi) * t[i]) * integrals[float(su[i])]
        lhs += term
        scale += abs(c)

    rho = weyl_vector(sp.N, sp.lam)
    mu = eigenvalue_mu(xi, sp)
    rhs = (cmath.exp(-float(np.dot(rho, t)) - 1j * xi * float(np.sum(t)))
           * dominant_asymptotics(sp, t, threshold) * mu)
    return abs(lhs - rhs) / (mu * scale)


def integrand_bound(lam, t, s):
    '''
    exp(-lam |s - t|_1 / 2) prod_{i<j}(1 + |s_j - s_i|), a majorant of
    |integrand_I| up to a constant. At t = 0 it is below
    exp(-lam r / 2)(1 + 2r)^P with r = |s|_1, the radial form whose tail
    truncation_radius integrates.
    '''
    t = as_coords(t)
    s = as_coords(s)
    d = np.abs(s - t)
    poly = 1.0
    for i, j in combinations(range(s.size), 2):
        poly *= 1.0 + abs(s[j] - s[i])
    return math.exp(-0.5 * lam * float(d.sum())) * poly


def growth_bound_ratio(sp, t, tol=1e-10):
    '''|F_N(u, lam; t)| / (exp((rho, t)) prod_{i<j}(1 + t_j - t_i)), bounded on G_N.'''
    t = as_coords(t)
    F, _ = hybrid_hypergeom(sp, t, tol=tol)
    rho = weyl_vector(sp.N, sp.lam)
    poly = 1.0
    for i, j in combinations(range(t.size), 2):
        poly *= 1.0 + (t[j] - t[i])
    return abs(F) / (math.exp(float(np.dot(rho, t))) * poly)
