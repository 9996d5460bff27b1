"""Adversarial bump families for the query lower-bound diagnostics (d = 1).

Members are shifted, rescaled copies of the inverse Fourier transform of the
smooth compactly-supported bump H(xi) = exp(-1/(1-xi^2)) on |xi| < 1. Each
member peaks at 2*gamma in its own cell of a uniform partition and stays at
or below gamma everywhere outside that cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FREQ_GRID_SIZE = 4096  # trapezoid quadrature nodes on [-1, 1]


class FamilyConfigError(ValueError):
    """gamma too large (or B too small) to fit at least two members."""


def bump_spectrum(xi: np.ndarray) -> np.ndarray:
    """H(xi) = exp(-1/(1-xi^2)) inside the unit ball, 0 outside."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    inside = np.abs(xi) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - xi[inside] ** 2))
    return out


def _freq_grid() -> tuple[np.ndarray, np.ndarray]:
    xi = np.linspace(-1.0, 1.0, FREQ_GRID_SIZE)
    return xi, bump_spectrum(xi)


def bump_profile(x) -> np.ndarray:
    """h(x) = (1/2pi) integral of H(xi) cos(x xi) d xi, by trapezoid quadrature."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    xi, H = _freq_grid()
    vals = np.trapezoid(H[None, :] * np.cos(np.outer(xs, xi)), xi, axis=1) / (2.0 * math.pi)
    return vals


def find_half_height_radius(lengthscale: float, step_scale: float = 0.01) -> float:
    """Smallest scanned radius beyond which h stays below h(0)/2.

    Scans x in [0, 20 l] at step l/100; operational stand-in for the implicit
    constant in the member-count formula.
    """
    xs = np.arange(0.0, 20.0 * lengthscale + 1e-12, lengthscale * step_scale)
    h = bump_profile(xs)
    h0 = h[0]
    below = h < h0 / 2.0
    # Last index where the profile is still at/above half height.
    above_idx = np.nonzero(~below)[0]
    if len(above_idx) == len(xs):
        raise FamilyConfigError(
            "half-height radius lies beyond the scan range [0, 20*lengthscale]; "
            "the profile's radius is about 2.81, so use a lengthscale of at least 0.15"
        )
    return float(xs[above_idx[-1] + 1]) if len(above_idx) else float(xs[0])


def member_count(gamma: float, B: float, lengthscale: float, zeta: float, h0: float,
                 d: int = 1) -> int:
    """Floor formula tying the family size to the amplitude gamma."""
    arg = B * (2.0 * math.pi * lengthscale**2) ** (d / 4.0) * h0 / (2.0 * gamma)
    if arg <= 1.0:
        return 0
    return math.floor((math.sqrt(math.log(arg)) / (lengthscale * math.pi * zeta)) ** d)


@dataclass(frozen=True)
class AdversaryFamily:
    dim: int
    gamma: float
    count: int  # M
    domain: tuple[float, float]
    cell_width: float
    peaks: np.ndarray  # (M,)
    scale: float  # argument scaling a: member(x) = 2 gamma h(a (x - peak)) / h(0)
    zeta: float
    h0: float
    rkhs_bound: float
    lengthscale: float

    def member_values(self, m: int, x) -> np.ndarray:
        """Evaluate member m at (a batch of) points."""
        if not 0 <= m < self.count:
            raise IndexError(f"member index {m} out of range")
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        return 2.0 * self.gamma / self.h0 * bump_profile(self.scale * (xs - self.peaks[m]))

    def cell_bounds(self, m: int) -> tuple[float, float]:
        lo = self.domain[0] + m * self.cell_width
        return lo, lo + self.cell_width

    def rkhs_norm_estimate(self, m: int = 0) -> float:
        """Quadrature estimate of the member RKHS norm (unit-amplitude SE kernel)."""
        xi, H = _freq_grid()
        l = self.lengthscale
        a = self.scale
        c = 2.0 * self.gamma / self.h0
        integrand = H**2 * np.exp(l**2 * a**2 * xi**2 / 2.0)
        integral = np.trapezoid(integrand, xi)
        norm_sq = c**2 * integral / (2.0 * math.pi * a * l * math.sqrt(2.0 * math.pi))
        return math.sqrt(norm_sq)


def build_adversary(
    d: int, gamma: float, B: float, lengthscale: float, domain=( -50.0, 50.0)
) -> AdversaryFamily:
    """Construct the size-M family on a uniform partition of the domain."""
    if d != 1:
        raise ValueError("only d = 1 is supported")
    if gamma <= 0 or B <= 0 or lengthscale <= 0:
        raise ValueError("gamma, B and lengthscale must be positive")
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= lo:
        raise ValueError("domain must have positive width")
    h0 = float(bump_profile(0.0)[0])
    zeta = find_half_height_radius(lengthscale)
    M = member_count(gamma, B, lengthscale, zeta, h0, d=d)
    if M < 2:
        raise FamilyConfigError(
            f"gamma={gamma} too large for B={B}, l={lengthscale}: member count {M} < 2"
        )
    width = (hi - lo) / M
    peaks = lo + (np.arange(M) + 0.5) * width
    # Scale so the half-height radius maps onto the cell half-width: outside
    # its own cell a member is below h(0)/2, i.e. below gamma.
    scale = 2.0 * zeta / width
    return AdversaryFamily(
        dim=d,
        gamma=gamma,
        count=M,
        domain=(lo, hi),
        cell_width=width,
        peaks=peaks,
        scale=scale,
        zeta=zeta,
        h0=h0,
        rkhs_bound=B,
        lengthscale=lengthscale,
    )
