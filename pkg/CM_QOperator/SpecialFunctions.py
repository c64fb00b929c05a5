########################################################################
## IMPORTS
########################################################################
import cmath
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .Errors import IrregularSpectralParameterError, ParameterError, PoleError

########################################################################
## LANCZOS CONSTANTS
########################################################################
# g = 607/128, 15 terms (Godfrey); relative error below 1e-15 for Re z >= 1/2
LANCZOS_G = 607.0 / 128.0
LANCZOS_COEFFS = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)
LOG_2 = math.log(2.0)

POLE_TOLERANCE = 1e-14
REGULARITY_THRESHOLD = 1e-8


########################################################################
## GAMMA PRODUCT
########################################################################
@dataclass(frozen=True)
class GammaProduct:
    '''
    Product of Gamma values kept in log-polar form.

    ``log_modulus`` is the natural log of the modulus and ``phase`` the
    argument wrapped to (-pi, pi]. An exact zero is represented by
    ``log_modulus = -inf``.
    '''
    log_modulus: float
    phase: float = 0.0

    @classmethod
    def from_log(cls, value):
        value = complex(value)
        if math.isinf(value.real) and value.real < 0:
            return cls(-math.inf, 0.0)
        return cls(value.real, _wrap_phase(value.imag))

    @classmethod
    def from_terms(cls, numerator=(), denominator=()):
        total = 0j
        for z in numerator:
            total += log_gamma(z)
        for z in denominator:
            if is_gamma_pole(z):
                # 1/Gamma vanishes at the poles
                return cls(-math.inf, 0.0)
            total -= log_gamma(z)
        return cls.from_log(total)

    @classmethod
    def one(cls):
        return cls(0.0, 0.0)

    @property
    def is_zero(self):
        return math.isinf(self.log_modulus) and self.log_modulus < 0

    def log(self):
        return complex(self.log_modulus, self.phase)

    def value(self):
        if self.is_zero:
            return 0j
        return cmath.exp(self.log())

    def modulus(self):
        return math.exp(self.log_modulus)

    def conjugate(self):
        return GammaProduct(self.log_modulus, _wrap_phase(-self.phase))

    def __mul__(self, other):
        if not isinstance(other, GammaProduct):
            return NotImplemented
        return GammaProduct(self.log_modulus + other.log_modulus, _wrap_phase(self.phase + other.phase))

    def __truediv__(self, other):
        if not isinstance(other, GammaProduct):
            return NotImplemented
        if other.is_zero:
            raise PoleError("division by a vanishing Gamma product")
        return GammaProduct(self.log_modulus - other.log_modulus, _wrap_phase(self.phase - other.phase))


def _wrap_phase(phase):
    wrapped = math.remainder(phase, 2.0 * math.pi)
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


########################################################################
## LOG GAMMA
########################################################################
def is_gamma_pole(z, tolerance=POLE_TOLERANCE):
    z = complex(z)
    n = round(z.real)
    if n > 0:
        return False
    return abs(z - n) <= tolerance * max(1.0, abs(z))


def _lanczos_log_gamma(z):
    # valid for Re z >= 1/2
    w = z - 1.0
    t = w + LANCZOS_G + 0.5
    series = LANCZOS_COEFFS[0]
    for k in range(1, len(LANCZOS_COEFFS)):
        series += LANCZOS_COEFFS[k] / (w + k)
    return HALF_LOG_2PI + (w + 0.5) * cmath.log(t) - t + cmath.log(series)


def _log_sin_pi(z):
    # branch continuous in the closed upper half plane
    return -LOG_2 + 0.5j * math.pi - 1j * math.pi * z + cmath.log(1.0 - cmath.exp(2j * math.pi * z))


def log_gamma(z):
    '''
    Principal branch of log Gamma(z).

    The branch is continuous in the upper half plane and on the positive
    real axis; the lower half plane follows from conj(logG(conj z)).
    Raises PoleError at z = 0, -1, -2, ...
    '''
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ParameterError("log_gamma needs a finite argument, got " + str(z))
    if is_gamma_pole(z):
        raise PoleError("Gamma has a pole at z = " + str(z))
    if z.imag < 0:
        return log_gamma(z.conjugate()).conjugate()
    if z.real >= 0.5:
        return _lanczos_log_gamma(z)
    # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
    return LOG_PI - _log_sin_pi(z) - _lanczos_log_gamma(1.0 - z)


def gamma(z):
    return cmath.exp(log_gamma(z))


########################################################################
## COSH FOURIER TRANSFORM
########################################################################
def log_cosh_fourier_gamma(v, lam):
    if lam <= 0:
        raise ParameterError("cosh_fourier_gamma needs lambda > 0, got " + str(lam))
    a = complex(0.5 * lam, v)
    # Gamma(a) Gamma(conj a) = |Gamma(a)|^2 for real v
    return 2.0 * log_gamma(a).real - log_gamma(lam).real


def cosh_fourier_gamma(v, lam):
    '''
    Integral of exp(i v w) / (2 cosh(w/2))^lam over the real line.

    Equals Gamma(lam/2 + iv) Gamma(lam/2 - iv) / Gamma(lam).
    '''
    return math.exp(log_cosh_fourier_gamma(float(v), float(lam)))


########################################################################
## HARISH-CHANDRA C-FUNCTION
########################################################################
def _check_regular(v, threshold):
    for i, j in combinations(range(len(v)), 2):
        d = v[i] - v[j]
        n = round(d.real)
        if n <= 0 and abs(d - n) < threshold:
            raise IrregularSpectralParameterError(
                "irregular spectral parameter: v[%d] - v[%d] = %s lies on the pole set" % (i, j, d))


def _c_tilde(v, lam):
    numerator = []
    denominator = []
    for i, j in combinations(range(len(v)), 2):
        d = v[i] - v[j]
        numerator.append(d)
        denominator.append(d + lam)
    return GammaProduct.from_terms(numerator, denominator)


def harish_chandra_c_log(v, lam, threshold=REGULARITY_THRESHOLD):
    '''
    c(v, lam) = c~(v, lam) / c~(rho, lam) as a GammaProduct, with
    c~(v, lam) = prod_{i<j} Gamma(v_i - v_j) / Gamma(v_i - v_j + lam).
    '''
    if lam <= 0:
        raise ParameterError("harish_chandra_c needs lambda > 0, got " + str(lam))
    v = [complex(x) for x in np.ravel(v)]
    _check_regular(v, threshold)
    n = len(v)
    rho = [0.5 * lam * (n - 1 - 2 * i) for i in range(n)]
    return _c_tilde(v, lam) / _c_tilde(rho, lam)


def harish_chandra_c(v, lam, threshold=REGULARITY_THRESHOLD):
    return harish_chandra_c_log(v, lam, threshold).value()


########################################################################
## SHARP WEIGHTS
########################################################################
@dataclass(frozen=True)
class SharpWeights:
    C_hat: GammaProduct
    log_W_hat: float

    @property
    def W_hat(self):
        return math.exp(self.log_W_hat)

    @property
    def C_hat_value(self):
        return self.C_hat.value()


def sharp_weights(p, g, hbar=1.0, mu=1.0, threshold=REGULARITY_THRESHOLD):
    '''
    C^(g;p) = prod_{i<j} Gamma(i(p_i-p_j)/hbar mu) / Gamma(g/hbar + i(p_i-p_j)/hbar mu)
    and W^ = 1/(C^(g;p) C^(g;-p)), which is 1/|C^|^2 for real p.
    '''
    p = np.asarray(p, dtype=float).ravel()
    scale = hbar * mu
    lam = g / hbar
    numerator = []
    denominator = []
    for i, j in combinations(range(len(p)), 2):
        d = (p[i] - p[j]) / scale
        if abs(d) < threshold:
            raise PoleError("coincident momenta p[%d] = p[%d] = %s" % (i, j, p[i]))
        numerator.append(1j * d)
        denominator.append(lam + 1j * d)
    c_hat = GammaProduct.from_terms(numerator, denominator)
    return SharpWeights(C_hat=c_hat, log_W_hat=-2.0 * c_hat.log_modulus)
