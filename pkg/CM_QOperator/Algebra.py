########################################################################
## IMPORTS
########################################################################
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .Errors import IrregularSpectralParameterError, ParameterError, WallCollisionError

WALL_TOLERANCE = 1e-12


########################################################################
## CHAMBER POINT
########################################################################
@dataclass(frozen=True, eq=False)
class ChamberPoint:
    '''
    Strictly increasing coordinate vector t in the Weyl chamber G_N.

    Build with ``ChamberPoint.from_coords``: input is sorted and the
    applied permutation is kept in ``permutation`` (coords = raw[permutation]).
    '''
    coords: np.ndarray
    permutation: tuple = field(default=())

    @classmethod
    def from_coords(cls, x, wall_tolerance=WALL_TOLERANCE):
        raw = np.array(x, dtype=float).ravel()
        if raw.size == 0:
            raise ParameterError("a chamber point needs at least one coordinate")
        if not np.all(np.isfinite(raw)):
            raise ParameterError("chamber point coordinates must be finite")
        order = np.argsort(raw, kind="stable")
        coords = raw[order]
        if coords.size > 1:
            gaps = np.diff(coords)
            if np.min(gaps) < wall_tolerance:
                raise WallCollisionError(
                    "wall collision: coordinate gap %.3e below %.1e" % (np.min(gaps), wall_tolerance))
        coords.setflags(write=False)
        return cls(coords=coords, permutation=tuple(int(i) for i in order))

    @property
    def N(self):
        return self.coords.size

    @property
    def gap(self):
        return chamber_gap(self.coords)

    @property
    def gaps(self):
        return np.diff(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __repr__(self):
        return "ChamberPoint(" + np.array2string(self.coords, precision=6, separator=", ") + ")"


def as_coords(x):
    '''Coordinates of a ChamberPoint or of any array-like, as a float array.'''
    if isinstance(x, ChamberPoint):
        return x.coords
    return np.asarray(x, dtype=float).ravel()


########################################################################
## SPECTRAL PARAMETER
########################################################################
@dataclass(frozen=True, eq=False)
class SpectralParameter:
    '''Dimensionless momenta u = p/(hbar mu) and coupling lam = g/hbar.'''
    u: np.ndarray
    lam: float

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        if u.size == 0:
            raise ParameterError("spectral parameter needs at least one momentum")
        if not self.lam > 0:
            raise ParameterError("coupling lambda must be positive, got " + str(self.lam))
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_physical(cls, p, g, hbar=1.0, mu=1.0):
        return cls(np.asarray(p, dtype=float) / (hbar * mu), g / hbar)

    @property
    def N(self):
        return self.u.size

    @property
    def min_separation(self):
        if self.N < 2:
            return np.inf
        diffs = [abs(self.u[i] - self.u[j]) for i, j in combinations(range(self.N), 2)]
        return float(min(diffs))

    def is_regular(self, threshold=1e-8):
        return self.min_separation >= threshold

    def check_regular(self, threshold=1e-8):
        if not self.is_regular(threshold):
            raise IrregularSpectralParameterError(
                "irregular spectral parameter: min |u_i - u_j| = %.3e below %.1e"
                % (self.min_separation, threshold))
        return self

    def permuted(self, sigma):
        return SpectralParameter(self.u[list(sigma)], self.lam)

    def __repr__(self):
        return "SpectralParameter(u=%s, lam=%g)" % (np.array2string(self.u, precision=6, separator=", "), self.lam)


########################################################################
## LATTICE WEIGHT
########################################################################
@dataclass(frozen=True)
class LatticeWeight:
    '''chi = sum_i m_i (e_i - e_{i+1}) in the positive root cone Q_A^+.'''
    m: tuple

    @property
    def degree(self):
        return int(sum(self.m))

    @property
    def N(self):
        return len(self.m) + 1

    def embed(self):
        m = np.asarray(self.m, dtype=float)
        chi = np.zeros(len(self.m) + 1)
        chi[:-1] += m
        chi[1:] -= m
        return chi

    def __str__(self):
        return "(" + ",".join(str(k) for k in self.m) + ")"


########################################################################
## WEYL VECTOR, PROJECTION, CHAMBER GAP
########################################################################
def weyl_vector(N, lam):
    '''rho = (lam/2)(N-1, N-3, ..., 1-N).'''
    if N < 1:
        raise ParameterError("weyl_vector needs N >= 1, got " + str(N))
    if not lam > 0:
        raise ParameterError("weyl_vector needs lambda > 0, got " + str(lam))
    return 0.5 * lam * (N - 1 - 2.0 * np.arange(N))


def positive_roots(N):
    '''Positive roots e_i - e_j (i < j) as index pairs, in lexicographic order.'''
    return tuple(combinations(range(N), 2))


def root_vector(N, i, j):
    alpha = np.zeros(N)
    alpha[i] = 1.0
    alpha[j] = -1.0
    return alpha


def project_cms(v):
    v = np.asarray(v)
    return v - v.mean()


def chamber_gap(x):
    '''m_N(x) = max_i (x_i - x_{i+1}); negative iff x is strictly increasing.'''
    x = as_coords(x)
    if x.size < 2:
        return -np.inf
    return float(np.max(x[:-1] - x[1:]))


########################################################################
## SYMMETRIC FUNCTIONS
########################################################################
def elementary_symmetric_all(p):
    '''[S_0(p), ..., S_N(p)] by the product recursion.'''
    p = np.asarray(p).ravel()
    e = np.zeros(p.size + 1, dtype=np.result_type(p.dtype, float))
    e[0] = 1.0
    for k, value in enumerate(p, start=1):
        e[1:k + 1] = e[1:k + 1] + value * e[0:k]
    return e


def elementary_symmetric(r, p):
    p = np.asarray(p).ravel()
    if not 0 <= r <= p.size:
        raise ParameterError("elementary_symmetric needs 0 <= r <= N = %d, got r = %s" % (p.size, r))
    value = elementary_symmetric_all(p)[r]
    return value.item() if hasattr(value, "item") else value


def generating_E(gamma, p):
    '''E(gamma; p) = prod_i (gamma + p_i).'''
    result = complex(1.0)
    for value in np.asarray(p).ravel():
        result *= gamma + value
    return result


def generating_E_expansion(gamma, p):
    '''E(gamma; p) = sum_r gamma^(N-r) S_r(p).'''
    s = elementary_symmetric_all(p)
    n = s.size - 1
    return complex(sum(gamma ** (n - r) * s[r] for r in range(n + 1)))


########################################################################
## ROOT LATTICE ENUMERATION
########################################################################
def _compositions(total, parts):
    # lexicographically decreasing compositions of total into parts nonnegative integers
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=32)
def enumerate_weights(N, max_degree):
    '''
    All chi in Q_A^+ with degree <= max_degree, graded lexicographic order.
    '''
    if N < 1:
        raise ParameterError("enumerate_weights needs N >= 1, got " + str(N))
    if max_degree < 0:
        raise ParameterError("enumerate_weights needs max_degree >= 0, got " + str(max_degree))
    if N == 1:
        return (LatticeWeight(()),)
    weights = []
    for degree in range(max_degree + 1):
        for m in _compositions(degree, N - 1):
            weights.append(LatticeWeight(m))
    return tuple(weights)


def weight_count(N, max_degree):
    '''Number of weights of degree <= max_degree: C(max_degree + N - 1, N - 1).'''
    return comb(max_degree + N - 1, N - 1)
