"""Analytic reference values: Bessel functions, their zeros, closed-form spectra.

Everything here is independent of the finite-element code so it can serve as
a verification oracle.  Bessel values come from the defining power series and
Miller's downward recurrence, never from a library routine; zeros are found
by bracketing plus safeguarded Newton at build time (no hard-coded decimals
in the computation path).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

_SERIES_CUTOFF = 12.0
_MAX_ORDER = 10
_MAX_ARG = 100.0


def bessel_j(n: int, x: float) -> float:
    """Bessel function J_n(x) for 0 <= n <= 10, 0 <= x <= 100.

    Uses the ascending series below x = 12 and Miller's downward recurrence
    (normalized by J_0 + 2*sum J_2k = 1) above.  Absolute error <= 1e-12.
    """
    if not 0 <= n <= _MAX_ORDER:
        raise ValueError(f"order out of range: {n}")
    if not 0.0 <= x <= _MAX_ARG:
        raise ValueError(f"argument out of range: {x}")
    if x <= _SERIES_CUTOFF:
        return _bessel_series(n, x)
    return _bessel_miller(n, x)


def _bessel_series(n: int, x: float) -> float:
    # J_n(x) = sum_m (-1)^m / (m! (m+n)!) (x/2)^(2m+n)
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (m + n))
        total += term
        if abs(term) < 1e-17 * (1.0 + abs(total)) and m > n:
            return total
        if m > 200:  # unreachable for x <= 12
            return total


def _bessel_miller(n: int, x: float) -> float:
    # downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, started high enough
    # above the turning point that the seed error has decayed away
    start = int(max(n, x) + 20 + 10.0 * math.sqrt(x))
    if start % 2:
        start += 1
    jp = 0.0
    jc = 1e-30
    norm = 0.0
    wanted = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / x) * jc - jp
        jp, jc = jc, jm
        if abs(jc) > 1e250:  # rescale to dodge overflow
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            wanted *= 1e-250
        if k - 1 == n:
            wanted = jc
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * jc
    norm += jc  # J_0 contribution
    return wanted / norm


def bessel_j_derivative(n: int, x: float) -> float:
    """J_n'(x) via the recurrence J_n' = (J_{n-1} - J_{n+1}) / 2."""
    if n == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))


def bessel_zero(n: int, k: int, grid_step: float = 0.25) -> float:
    """k-th positive zero of J_n, by sign-change bracketing + safeguarded Newton."""
    value, _meta = _bessel_zero_with_meta(n, k, grid_step)
    return value


def _bessel_zero_with_meta(n: int, k: int, grid_step: float = 0.25):
    if k < 1:
        raise ValueError("zero index k starts at 1")
    # zeros of J_n are > n and spaced by roughly pi, so a 0.25 grid cannot skip one
    x = max(0.5, 0.5 * n)
    f_prev = bessel_j(n, x)
    found = 0
    bracket = None
    while x < _MAX_ARG:
        x_next = x + grid_step
        f_next = bessel_j(n, x_next)
        if f_prev == 0.0:
            f_prev = bessel_j(n, x + 1e-9)
        if f_prev * f_next < 0.0:
            found += 1
            if found == k:
                bracket = (x, x_next)
                break
        x, f_prev = x_next, f_next
    if bracket is None:
        raise RuntimeError(f"no bracket found for zero {k} of J_{n} below {_MAX_ARG}")

    a, b = bracket
    fa = bessel_j(n, a)
    z = 0.5 * (a + b)
    iterations = 0
    for _ in range(100):
        iterations += 1
        fz = bessel_j(n, z)
        if fa * fz <= 0.0:
            b = z
        else:
            a, fa = z, fz
        dz = bessel_j_derivative(n, z)
        step_ok = dz != 0.0
        if step_ok:
            z_new = z - fz / dz
            step_ok = a < z_new < b
        if not step_ok:
            z_new = 0.5 * (a + b)
        if abs(z_new - z) < 1e-15 * z:
            z = z_new
            break
        z = z_new
    if abs(bessel_j(n, z)) > 1e-12:
        raise RuntimeError(f"Newton failed to polish zero {k} of J_{n}")
    return z, {"iterations": iterations, "bracket": list(bracket)}


@dataclass(frozen=True)
class BesselZeroTable:
    """Zeros j_{n,k} for n in 0..2, k in 1..5, recomputed at construction."""

    orders: tuple = (0, 1, 2)
    count: int = 5
    zeros: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for n in self.orders:
            for k in range(1, self.count + 1):
                z, meta = _bessel_zero_with_meta(n, k)
                self.zeros[(n, k)] = z
                self.meta[(n, k)] = meta

    def __call__(self, n: int, k: int) -> float:
        return self.zeros[(n, k)]

    def to_json(self) -> str:
        doc = {
            f"j_{n}_{k}": {"value": self.zeros[(n, k)], **self.meta[(n, k)]}
            for (n, k) in sorted(self.zeros)
        }
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass(frozen=True)
class DiscReference:
    """Closed-form first eigenvalues and radial profiles for the disc of radius R.

    The clamped buckling ground state is psi(r) = J_0(j11 r / R) - J_0(j11)
    with eigenvalue (j11 / R)^2; psi(R) = 0 by construction and psi'(R) = 0
    because J_0' = -J_1 vanishes at j11.
    """

    radius: float
    j01: float
    j11: float

    @property
    def lambda1_dirichlet(self) -> float:
        return (self.j01 / self.radius) ** 2

    @property
    def lambda2_dirichlet(self) -> float:
        return (self.j11 / self.radius) ** 2

    @property
    def lambda1_buckling(self) -> float:
        return (self.j11 / self.radius) ** 2

    def psi_profile(self, r: float) -> float:
        k = self.j11 / self.radius
        return bessel_j(0, k * r) - bessel_j(0, self.j11)

    def w_profile(self, r: float) -> float:
        # w = laplacian of psi = -k^2 J_0(k r)
        k = self.j11 / self.radius
        return -(k * k) * bessel_j(0, k * r)


def disc_reference(radius: float = 1.0) -> DiscReference:
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    return DiscReference(radius=radius, j01=bessel_zero(0, 1), j11=bessel_zero(1, 1))


def rectangle_reference(a: float, b: float, count: int) -> list:
    """Sorted Dirichlet eigenvalues pi^2 (m^2/a^2 + n^2/b^2) with multiplicity."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("side lengths must be positive")
    modes = 1 + int(math.ceil(math.sqrt(count))) + 8
    values = [
        math.pi**2 * (m * m / (a * a) + n * n / (b * b))
        for m in range(1, modes + 1)
        for n in range(1, modes + 1)
    ]
    values.sort()
    return values[:count]
