"""Origin-symmetric convex bodies in the plane, sampled through their support function.

A body is stored as samples of its support function ``h`` on a uniform grid
of outer-normal angles.  Everything else (radial function, curvature, the
Gauss-map angle of the boundary point and the Jacobian relating the normal
measure ``dx`` to the radial measure ``du``) is derived from ``h`` and its
first two angular derivatives.

For a planar body with support function h(theta):

    X(theta) = h x + h' x_perp           boundary point with normal x
    rho      = sqrt(h**2 + h'**2)         |X|
    w        = h'' + h                    radius of curvature
    kappa    = 1 / w
    alpha    = theta + atan2(h', h)       polar angle of X
    J        = d alpha / d theta = h w / rho**2
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InvalidGridError, NonConvexError, NonPositiveSupportError, NotEvenError

SCHEMES = ("spectral", "central")

# Strict convexity threshold relative to the largest curvature radius.
CONVEXITY_RTOL = 1e-10


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Uniform periodic grid ``theta_i = 2 pi i / N`` on the unit circle."""

    N: int
    theta: np.ndarray = field(init=False, repr=False)
    dtheta: float = field(init=False, repr=False)

    def __post_init__(self):
        N = self.N
        if isinstance(N, bool) or int(N) != N:
            raise InvalidGridError(f"grid size must be an integer, got {N!r}")
        N = int(N)
        if N < 16 or N % 2:
            raise InvalidGridError(f"grid size must be even and >= 16, got {N}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "theta", _frozen(2.0 * np.pi * np.arange(N) / N))
        object.__setattr__(self, "dtheta", 2.0 * np.pi / N)

    def __eq__(self, other):
        return isinstance(other, AngularGrid) and other.N == self.N

    def __hash__(self):
        return hash(("AngularGrid", self.N))


def make_grid(N) -> AngularGrid:
    return AngularGrid(N)


def _check_samples(samples, grid: AngularGrid):
    a = np.asarray(samples, dtype=np.float64)
    if a.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} samples, got shape {a.shape}")
    return a


def is_even(samples, rtol=1e-12) -> bool:
    """True when ``samples`` agree with their antipodal values to ``rtol``."""
    a = np.asarray(samples, dtype=np.float64)
    half = a.shape[0] // 2
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    return bool(np.max(np.abs(a - np.roll(a, -half))) <= rtol * scale)


@dataclass(frozen=True, eq=False)
class SupportField:
    grid: AngularGrid
    h: np.ndarray
    dimension_n: int = 2

    def __post_init__(self):
        if self.dimension_n != 2:
            raise NotImplementedError("only planar bodies (n = 2) are supported")
        object.__setattr__(self, "h", _frozen(_check_samples(self.h, self.grid)))

    @classmethod
    def circle(cls, grid, r):
        return cls(grid, np.full(grid.N, float(r)))

    @classmethod
    def ellipse(cls, grid, a, b):
        """Centered ellipse with semi-axes ``a`` (along theta = 0) and ``b``."""
        t = grid.theta
        return cls(grid, np.sqrt((a * np.cos(t)) ** 2 + (b * np.sin(t)) ** 2))

    @classmethod
    def cosine_series(cls, grid, coeffs):
        """``h = sum_k coeffs[k] cos(2 k theta)``."""
        return cls(grid, even_cosine_series(grid, coeffs))

    def scaled(self, lam):
        return SupportField(self.grid, lam * self.h, self.dimension_n)

    def __eq__(self, other):
        return (
            isinstance(other, SupportField)
            and other.grid == self.grid
            and np.array_equal(other.h, self.h)
        )


def even_cosine_series(grid, coeffs):
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
    out = np.zeros(grid.N)
    for k, c in enumerate(coeffs):
        if c != 0.0:
            out += c * np.cos(2 * k * grid.theta)
    return out


@dataclass(frozen=True, eq=False)
class DensityField:
    """Positive even density ``f`` sampled on the grid."""

    grid: AngularGrid
    f: np.ndarray
    description: str = "samples"

    def __post_init__(self):
        f = _check_samples(self.f, self.grid)
        if not np.all(f > 0) or not np.all(np.isfinite(f)):
            raise ValueError("density must be finite and positive at every node")
        if not is_even(f):
            raise NotEvenError("density is not even: f(theta) != f(theta + pi)")
        object.__setattr__(self, "f", _frozen(f))

    @classmethod
    def constant(cls, grid, c=1.0):
        return cls(grid, np.full(grid.N, float(c)), "constant")

    @classmethod
    def cosine_series(cls, grid, coeffs):
        return cls(grid, even_cosine_series(grid, coeffs), "cosine-series")

    def __call__(self, x):
        """Trigonometric interpolant of the samples at arbitrary angles."""
        return fourier_interpolate(self.f, x)


def fourier_coefficients(samples):
    """Real Fourier data ``(k, a_k, b_k)`` with ``s = sum a_k cos k t + b_k sin k t``."""
    s = np.asarray(samples, dtype=np.float64)
    N = s.shape[0]
    c = np.fft.rfft(s) / N
    k = np.arange(c.shape[0])
    a = 2.0 * c.real
    b = -2.0 * c.imag
    a[0] = c[0].real
    if N % 2 == 0:
        a[-1] = c[-1].real
        b[-1] = 0.0
    return k, a, b


def fourier_interpolate(samples, x):
    k, a, b = fourier_coefficients(samples)
    keep = (np.abs(a) + np.abs(b)) > 1e-15 * max(np.abs(a).max(), 1e-300)
    k, a, b = k[keep], a[keep], b[keep]
    x = np.asarray(x, dtype=np.float64)
    kx = np.multiply.outer(x, k)
    return np.cos(kx) @ a + np.sin(kx) @ b


def refined_extrema(samples):
    """Min and max of the trigonometric interpolant of ``samples``.

    Each grid extremum is polished by a bounded scalar search on the
    interpolant within one node of it.
    """
    s = np.asarray(samples, dtype=np.float64)
    N = s.shape[0]
    dt = 2.0 * np.pi / N
    interp = lambda x: float(fourier_interpolate(s, x))
    out = []
    for sign, i in ((1.0, int(np.argmin(s))), (-1.0, int(np.argmax(s)))):
        res = optimize.minimize_scalar(
            lambda x: sign * interp(x),
            bounds=(i * dt - dt, i * dt + dt),
            method="bounded",
            options={"xatol": 1e-12},
        )
        out.append(min(sign * s[i], res.fun) * sign)
    return out[0], out[1]


def derivative(samples, order=1, scheme="spectral", grid=None):
    """Angular derivative of periodic samples.

    ``spectral`` differentiates the trigonometric interpolant (the Nyquist
    mode is dropped for odd orders); ``central`` uses the second-order
    three-point stencil.
    """
    s = np.asarray(samples, dtype=np.float64)
    N = s.shape[0]
    if grid is not None and grid.N != N:
        raise ValueError(f"expected {grid.N} samples, got {N}")
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order!r}")
    if scheme == "spectral":
        return _spectral_derivatives(s, (order,))[0]
    if scheme == "central":
        dt = 2.0 * np.pi / N
        up, down = np.roll(s, -1), np.roll(s, 1)
        if order == 1:
            return (up - down) / (2.0 * dt)
        return (up - 2.0 * s + down) / dt**2
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _spectral_derivatives(s, orders):
    N = s.shape[0]
    S = np.fft.rfft(s)
    k = np.arange(S.shape[0], dtype=np.float64)
    out = []
    for order in orders:
        if order == 1:
            mult = 1j * k
            if N % 2 == 0:
                mult[-1] = 0.0
        else:
            mult = -(k**2)
        out.append(np.fft.irfft(mult * S, N))
    return out


def first_and_second(samples, scheme="spectral"):
    s = np.asarray(samples, dtype=np.float64)
    if scheme == "spectral":
        d1, d2 = _spectral_derivatives(s, (1, 2))
        return d1, d2
    return derivative(s, 1, scheme), derivative(s, 2, scheme)


def enforce_even(field: SupportField) -> SupportField:
    """Project onto origin-symmetric data: ``h_i <- (h_i + h_{i+N/2}) / 2``."""
    h = field.h
    sym = 0.5 * (h + np.roll(h, -(h.shape[0] // 2)))
    return SupportField(field.grid, sym, field.dimension_n)


@dataclass(frozen=True, eq=False)
class BodyGeometry:
    grid: AngularGrid
    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    w: np.ndarray
    kappa: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    J: np.ndarray


def support_to_geometry(field: SupportField, scheme="spectral") -> BodyGeometry:
    h = field.h
    i = int(np.argmin(h))
    if not h[i] > 0:
        raise NonPositiveSupportError(i, h[i])
    h1, h2 = first_and_second(h, scheme)
    w = h2 + h
    threshold = CONVEXITY_RTOL * np.max(w)
    j = int(np.argmin(w))
    if not w[j] > threshold:
        raise NonConvexError(j, w[j], threshold)
    rho2 = h * h + h1 * h1
    return BodyGeometry(
        grid=field.grid,
        h=h,
        h1=h1,
        h2=h2,
        w=w,
        kappa=1.0 / w,
        rho=np.sqrt(rho2),
        alpha=field.grid.theta + np.arctan2(h1, h),
        J=h * w / rho2,
    )


def integrate_x(samples, grid: AngularGrid) -> float:
    """Periodic trapezoid rule over the normal circle.

    ``np.sum`` on a contiguous float64 vector is pairwise and deterministic.
    """
    s = np.ascontiguousarray(_check_samples(samples, grid))
    return float(np.sum(s) * grid.dtheta)


def integrate_u(samples, geometry: BodyGeometry) -> float:
    """Integral over the radial-direction circle, pulled back to normal angles."""
    s = _check_samples(samples, geometry.grid)
    return integrate_x(s * geometry.J, geometry.grid)
