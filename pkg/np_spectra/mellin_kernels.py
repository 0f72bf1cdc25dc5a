"""
NP Spectra - Mellin Kernels
===========================
Mellin power integrals

    M_p(w, a) = int_0^inf t^w (t^2 - 2at + 1)^{-p} dt/t,   p in {3/2, 1/2}

and the kernels of H(i xi), H*(i xi) and S(i xi) on a spherical polygon.

With t = e^u and delta = 1 - a the integrand becomes
e^{(w-p)u} (4 sinh^2(u/2) + 2 delta)^{-p}. Folding u -> -u gives

    Re M = 2 int_0^inf cosh(k u) cos(xi u) h(u) du
    Im M = 2 int_0^inf sinh(k u) sin(xi u) h(u) du

with w = p + k + i xi, so the t -> 1/t symmetry M(w) = M(2p - w) and the
reality of M on Re w = p hold exactly. For large xi the fold is taken along
Im u = theta, just below the nearest singularity u = i arccos(a), which
factors out the exponential decay e^{-xi theta}.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Chebyshev, chebyshev
from scipy import integrate, special

from config import Config
from .errors import InvalidParams, SingularPoint, StripViolation
from .schemas import KernelKind

logger = logging.getLogger(__name__)

# 1 - a below which a comparison kernel is subtracted before quadrature
SUBTRACTION_DELTA = 1e-5
# 1 - a below which only the leading asymptotic is returned
ASYMPTOTIC_DELTA = 1e-8
COINCIDENCE_DELTA = 1e-14
SAME_FACE_TOL = 1e-12
# finite panels reach where the envelope is e^{-TAIL_LOG} ~ 1e-16; one infinite panel follows
TAIL_LOG = 37.0
OSCILLATORY_XI = 50.0
QUAD_LIMIT = 200

EXPONENTS = {
    KernelKind.THREE_HALF: 1.5,
    KernelKind.ONE_HALF: 0.5
}

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class MellinValue:
    """Quadrature result: value, absolute error estimate, asymptotic-regime flag"""
    value: complex
    error: float
    singular_flag: bool = False

    def to_dict(self):
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "error": self.error,
            "singular_flag": self.singular_flag
        }


@dataclass(frozen=True)
class KernelValue:
    value: complex
    singular_flag: bool = False


# ============================================================================
# ASYMPTOTICS
# ============================================================================

def m1_coincidence_constant(w: complex) -> complex:
    """
    Finite part of M_{1/2}(w, a) + log((1 - a)/2) as a -> 1^-;
    equals 4 log 2 at w = 1/2.
    """
    return complex(-2.0 * np.euler_gamma - special.digamma(w) - special.digamma(1.0 - w))


def _asymptote(w: complex, delta: float, kind: KernelKind) -> complex:
    if kind == KernelKind.THREE_HALF:
        return complex(1.0 / delta)
    return -np.log(delta / 2.0) + m1_coincidence_constant(w)


def _comparison_integral(delta: float, p: float) -> float:
    """2 int_0^1 (u^2 + 2 delta)^{-p} du in closed form"""
    if p == 1.5:
        return 1.0 / (delta * np.sqrt(1.0 + 2.0 * delta))
    return 2.0 * np.arcsinh(1.0 / np.sqrt(2.0 * delta))


# ============================================================================
# QUADRATURE
# ============================================================================

def _log_base(z, delta: float):
    """
    log(4 sinh^2(z/2) + 2 delta) = log(2 cosh z - 2a) without overflow.
    For complex z the principal branch is returned.
    """
    value = z + np.log(np.expm1(-z) ** 2 + 2.0 * delta * np.exp(-z))
    if np.iscomplexobj(value):
        value = value - 2j * np.pi * np.round(value.imag / (2 * np.pi))
    return value


def _contour_height(delta: float, xi: float) -> float:
    """
    Height theta of the shifted contour Im u = theta. The integrand is
    analytic for |Im u| < arccos(a); the shift pulls out the factor
    e^{-xi theta} so exponentially small values keep relative accuracy.
    """
    phi = float(np.arccos(1.0 - delta))
    if xi * phi < 1.0:
        return 0.0
    return phi - 1.0 / xi


def _breakpoints(width: float, upper: float) -> Sequence[float]:
    points = [0.0]
    scale = width
    while scale < 1.0:
        points.append(scale)
        scale *= 10.0
    points.append(1.0)
    edge = 4.0
    while edge < upper:
        points.append(edge)
        edge *= 4.0
    points.append(max(upper, points[-1] * 2.0))
    return points


def _oscillation_points(lo: float, hi: float, xi: float) -> Optional[np.ndarray]:
    if abs(xi) <= OSCILLATORY_XI:
        return None
    return np.arange(lo, hi, np.pi / abs(xi))[1:]


def _panel_quad(func, lo: float, hi: float, xi: float, part: str, tol: float,
                epsabs: float) -> Tuple[float, float]:
    """
    Integrate func(u) * cos(xi u) (part 're') or func(u) * sin(xi u) (part 'im')
    over [lo, hi]; hi may be inf. Large |xi| uses QUADPACK's oscillatory
    rules (QAWO, QAWF on the infinite tail).
    """
    trig = np.cos if part == "re" else np.sin
    if abs(xi) <= OSCILLATORY_XI:
        return integrate.quad(lambda u: func(u) * trig(xi * u), lo, hi, epsabs=epsabs,
                              epsrel=tol, limit=QUAD_LIMIT)
    weight = "cos" if part == "re" else "sin"
    if np.isinf(hi):
        # QAWF honours the absolute tolerance only
        return integrate.quad(func, lo, hi, weight=weight, wvar=xi, epsabs=epsabs,
                              limlst=100, limit=QUAD_LIMIT)
    return integrate.quad(func, lo, hi, weight=weight, wvar=xi, epsabs=epsabs,
                          epsrel=tol, limit=QUAD_LIMIT)


def _check_query(w: complex, a: float, kind: KernelKind) -> Tuple[float, float]:
    p = EXPONENTS[kind]
    if not 0 < w.real < 2 * p:
        raise StripViolation(f"Re w = {w.real} outside the strip (0, {2 * p}) for {kind.value}")
    if not np.isfinite(a):
        raise InvalidParams(f"a must be finite, got {a}")
    if a >= 1.0:
        raise SingularPoint(f"a = {a} is the coincident-point singularity")
    if a < -1.0 - 1e-12:
        raise InvalidParams(f"a = {a} below -1 is not an inner product of unit vectors")
    return p, 1.0 - max(a, -1.0)


def mellin_integral(w: complex, a: float, kind: Union[KernelKind, str],
                    tol: Optional[float] = None) -> MellinValue:
    """
    Evaluate M_p(w, a) to relative accuracy tol by adaptive Gauss-Kronrod
    quadrature of the folded integral along Im u = theta.

    With F(z) = (2 cosh z - 2a)^{-p}, z = s + i theta, the integrand pairs
    A = e^{ks} F + conj(e^{-ks} F) and B = e^{ks} F - conj(e^{-ks} F) give

        M = e^{-xi theta + i k theta} int_0^inf (cos(xi s) A + i sin(xi s) B) ds

    for xi >= 0; negative xi follows by conjugation. Flipping k conjugates
    every part exactly, so M(w) = M(2p - w) holds to the last bit.

    Raises:
        StripViolation: Re w outside (0, 2p)
        SingularPoint: a >= 1
    """
    kind = KernelKind(kind)
    w = complex(w)
    p, delta = _check_query(w, a, kind)
    tol = tol or Config.QUAD_TOL

    if delta < ASYMPTOTIC_DELTA:
        return MellinValue(_asymptote(w, delta, kind), 0.0, singular_flag=True)

    k = w.real - p
    xi = abs(w.imag)
    theta = _contour_height(delta, xi)
    rate = p - abs(k)
    upper = max(TAIL_LOG / rate, 2.0)
    subtract = theta == 0.0 and delta < SUBTRACTION_DELTA

    def pair(s):
        base = p * _log_base(s + 1j * theta if theta else s, delta)
        grow = np.exp(k * s - base)
        decay = np.exp(-k * s - base)
        return grow + np.conj(decay), grow - np.conj(decay)

    parts = {
        "cos_re": lambda s: pair(s)[0].real,
        "cos_im": lambda s: pair(s)[0].imag,
        "sin_re": lambda s: pair(s)[1].real,
        "sin_im": lambda s: pair(s)[1].imag
    }
    active = ["cos_re"]
    if theta and k != 0.0:
        active.append("cos_im")
    if xi != 0.0 and k != 0.0:
        active.append("sin_re")
    if theta:
        active.append("sin_im")

    def cos_re_subtracted(s):
        return parts["cos_re"](s) * np.cos(xi * s) - 2.0 * (s * s + 2.0 * delta) ** (-p)

    width = float(np.arccos(1.0 - delta)) - theta
    # integrand peak times peak width sets the scale of the result
    scale = abs(np.exp(-p * _log_base(1j * theta if theta else 0.0, delta))) * width
    epsabs = tol * scale

    points = _breakpoints(width, upper) + [np.inf]
    totals = dict.fromkeys(active, 0.0)
    err_total = 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        for name in active:
            if name == "cos_re" and subtract and hi <= 1.0:
                cycle_points = _oscillation_points(lo, hi, xi)
                limit = QUAD_LIMIT if cycle_points is None else max(QUAD_LIMIT, 4 * len(cycle_points) + 50)
                value, err = integrate.quad(cos_re_subtracted, lo, hi, points=cycle_points,
                                            epsabs=epsabs, epsrel=tol, limit=limit)
            else:
                value, err = _panel_quad(parts[name], lo, hi, xi,
                                         "re" if name.startswith("cos") else "im", tol, epsabs)
            totals[name] += value
            err_total += err

    if subtract:
        totals["cos_re"] += _comparison_integral(delta, p)

    inner = complex(totals["cos_re"] - totals.get("sin_im", 0.0),
                    totals.get("cos_im", 0.0) + totals.get("sin_re", 0.0))
    factor = np.exp(-xi * theta)
    value = inner * factor
    if theta and k != 0.0:
        value = value * np.exp(1j * k * theta)
    if w.imag < 0:
        value = value.conjugate()

    logger.debug(f"M_{p}(w={w}, a={a}) = {value} (theta {theta:.3g}, err {err_total * factor:.2e})")
    return MellinValue(complex(value), float(err_total * factor))


def mellin_M3(w: complex, a: float) -> complex:
    """M_{3/2}(w, a); returns the leading term 1/(1 - a) for 1 - a < 1e-8"""
    return mellin_integral(w, a, KernelKind.THREE_HALF).value


def mellin_M1(w: complex, a: float) -> complex:
    """M_{1/2}(w, a); log-singular as a -> 1"""
    return mellin_integral(w, a, KernelKind.ONE_HALF).value


# ============================================================================
# TABULATION FOR ASSEMBLY
# ============================================================================

class MellinTable:
    """
    Chebyshev interpolant of M(p + i xi, a) in x = log(1 - a) on
    [log 1e-8, log 2], for vectorized kernel evaluation over matrices of a.

    three_half tabulates (1 - a) M, one_half tabulates M + log((1 - a)/2);
    both are smooth in x. Values are real on the line Re w = p. Below
    1 - a = 1e-8 the asymptotic forms are used.
    """

    DEFAULT_NODES = 80

    def __init__(self, kind: Union[KernelKind, str], xi: float,
                 nodes: int = DEFAULT_NODES, tol: Optional[float] = None):
        self.kind = KernelKind(kind)
        self.xi = float(xi)
        self.w = complex(EXPONENTS[self.kind], self.xi)
        self.nodes = nodes
        self.tol = tol or Config.QUAD_TOL
        domain = np.array([np.log(ASYMPTOTIC_DELTA), np.log(2.0)])

        x = domain[0] + (chebyshev.chebpts1(nodes) + 1.0) * (domain[1] - domain[0]) / 2.0
        delta = np.exp(x)
        values = np.array([mellin_integral(self.w, 1.0 - d, self.kind, self.tol).value.real
                           for d in delta])
        if self.kind == KernelKind.THREE_HALF:
            regularized = values * delta
        else:
            regularized = values + np.log(delta / 2.0)
        self._series = Chebyshev.fit(x, regularized, nodes - 1, domain=domain)
        self._floor = 1.0 if self.kind == KernelKind.THREE_HALF \
            else m1_coincidence_constant(self.w).real
        logger.debug(f"Built {self.kind.value} table at xi={self.xi} with {nodes} nodes")

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if np.any(a >= 1.0):
            raise SingularPoint("Table evaluated at a coincident point (a >= 1)")
        delta = np.minimum(1.0 - a, 2.0)
        x = np.log(np.maximum(delta, ASYMPTOTIC_DELTA))
        reg = np.where(delta < ASYMPTOTIC_DELTA, self._floor, self._series(x))
        if self.kind == KernelKind.THREE_HALF:
            return reg / delta
        return reg - np.log(delta / 2.0)


@lru_cache(maxsize=64)
def mellin_table(kind: KernelKind, xi: float, nodes: int = MellinTable.DEFAULT_NODES,
                 tol: Optional[float] = None) -> MellinTable:
    return MellinTable(kind, xi, nodes, tol or Config.QUAD_TOL)


# ============================================================================
# KERNELS ON THE SPHERICAL POLYGON
# ============================================================================

def _unpack(omega) -> Tuple[np.ndarray, np.ndarray]:
    point, normal = omega[0], omega[1]
    return np.asarray(point, dtype=float), np.asarray(normal, dtype=float)


def _inner(point: np.ndarray, point_p: np.ndarray) -> float:
    a = float(np.dot(point, point_p))
    if 1.0 - a < COINCIDENCE_DELTA:
        raise SingularPoint(f"Coincident points (omega . omega' = {a})")
    return a


def kernel_H(xi: float, omega, omega_p) -> KernelValue:
    """
    Kernel of H(i xi) at (omega, omega'):
    -(1/4pi) (omega . n_{omega'}) M_{3/2}(i xi + 3/2, omega . omega').
    Zero without quadrature when omega lies in the face plane of omega'.
    """
    point, _ = _unpack(omega)
    point_p, normal_p = _unpack(omega_p)
    normal_dot = float(np.dot(point, normal_p))
    if abs(normal_dot) < SAME_FACE_TOL:
        return KernelValue(0.0)
    a = _inner(point, point_p)
    result = mellin_integral(complex(1.5, xi), a, KernelKind.THREE_HALF)
    return KernelValue(-normal_dot * result.value / FOUR_PI, result.singular_flag)


def kernel_Hstar(xi: float, omega, omega_p) -> KernelValue:
    """Kernel of H*(i xi): the transpose of kernel_H for real xi"""
    return kernel_H(xi, omega_p, omega)


def kernel_S(xi: float, omega, omega_p) -> KernelValue:
    """Kernel of S(i xi): (1/4pi) M_{1/2}(i xi + 1/2, omega . omega')"""
    point, _ = _unpack(omega)
    point_p, _ = _unpack(omega_p)
    a = _inner(point, point_p)
    result = mellin_integral(complex(0.5, xi), a, KernelKind.ONE_HALF)
    return KernelValue(result.value / FOUR_PI, result.singular_flag)
