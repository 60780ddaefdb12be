"""Phase-space model for the thermostatted BGK equation on the torus.

State: a one-particle density f(x, v) on T x R, with T = [0, 1) periodic.
The collision step relaxes f toward a mixture of two local Maxwellians,
one at the self-consistent temperature of f (weight alpha) and one at an
externally imposed wall temperature tau(x) (weight 1 - alpha), at rate
1/kappa.

This module holds the shared containers (parameters, grids, profiles,
kinetic states, moment sets) and the elementary operations on them:
Maxwellians, velocity moments, the weighted inner product with weight
1/g, and the hydrodynamic projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Parameter outside its physical domain (e.g. temperature <= 0)."""


class DegenerateStateError(RuntimeError):
    """State with vanishing or negative local density / temperature."""


class WeightError(ValueError):
    """Reference weight for an inner product is not strictly positive."""


@dataclass(frozen=True)
class Params:
    """Model parameters: self-interaction weight alpha, relaxation time kappa."""

    alpha: float
    kappa: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.kappa <= 0.0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid on T x [-vmax, vmax].

    x is uniform with periodic quadrature weights summing to 1; v is uniform
    with trapezoid weights summing to 2*vmax.  nx must be even (spectral
    derivatives pair modes +-m); modes stores the integer Fourier modes and
    dmodes the derivative multipliers with the unpaired Nyquist mode zeroed.
    """

    nx: int
    nv: int
    vmax: float
    x: np.ndarray
    wx: np.ndarray
    v: np.ndarray
    wv: np.ndarray
    modes: np.ndarray
    dmodes: np.ndarray

    @property
    def size(self) -> int:
        return self.nx * self.nv


def make_grid(nx: int, nv: int, vmax: float) -> PhaseGrid:
    if nx < 4 or nx % 2 != 0:
        raise DomainError(f"nx must be even and >= 4, got {nx}")
    if nv < 8:
        raise DomainError(f"nv must be >= 8, got {nv}")
    if vmax <= 0.0:
        raise DomainError(f"vmax must be positive, got {vmax}")
    x = np.arange(nx) / nx
    wx = np.full(nx, 1.0 / nx)
    v = np.linspace(-vmax, vmax, nv)
    h = v[1] - v[0]
    wv = np.full(nv, h)
    wv[0] = wv[-1] = 0.5 * h
    modes = np.fft.fftfreq(nx, d=1.0 / nx)
    dmodes = modes.copy()
    dmodes[nx // 2] = 0.0
    return PhaseGrid(nx=nx, nv=nv, vmax=float(vmax), x=x, wx=wx, v=v, wv=wv,
                     modes=modes, dmodes=dmodes)


@dataclass
class Profile:
    """Scalar field on the spatial grid (temperature, density, ...)."""

    samples: np.ndarray
    kind: str = "table"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    @property
    def min(self) -> float:
        return float(self.samples.min())

    @property
    def max(self) -> float:
        return float(self.samples.max())


def constant_profile(value: float, nx: int) -> Profile:
    if value <= 0.0:
        raise DomainError(f"profile value must be positive, got {value}")
    return Profile(np.full(nx, float(value)), kind="constant")


def cosine_profile(base, amplitude, harmonics, nx: int) -> Profile:
    """base + sum_j amplitude[j] * cos(2 pi harmonics[j] x), sampled on the grid."""
    x = np.arange(nx) / nx
    amps = np.atleast_1d(np.asarray(amplitude, dtype=float))
    harms = np.atleast_1d(np.asarray(harmonics, dtype=int))
    if amps.size == 1 and harms.size > 1:
        amps = np.full(harms.size, amps[0])
    if amps.size != harms.size:
        raise DomainError("amplitude and harmonics must have matching length")
    s = base + sum(a * np.cos(2.0 * np.pi * h * x) for a, h in zip(amps, harms))
    if s.min() <= 0.0:
        raise DomainError("cosine profile dips below zero")
    return Profile(s, kind="cosine-series")


@dataclass
class KineticState:
    """Density values f(x_i, v_j) on a PhaseGrid, shape (nx, nv)."""

    values: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.nv):
            raise DomainError(
                f"state shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.nv})")

    def mass(self) -> float:
        g = self.grid
        return float(g.wx @ self.values @ g.wv)

    def copy(self) -> "KineticState":
        return KineticState(self.values.copy(), self.grid)


@dataclass
class MomentSet:
    """Velocity moments per spatial node.

    T is the centered second moment P/rho - u^2.  d3 is the raw third moment
    (1 / (rho T^{3/2})) * int v^3 f dv, not centered; d4 is the excess
    flatness (1 / (rho T^2)) * int v^4 f dv - 3.
    """

    rho: np.ndarray
    u: np.ndarray
    P: np.ndarray
    T: np.ndarray
    d3: np.ndarray
    d4: np.ndarray

    def mass(self, wx: np.ndarray) -> float:
        return float(wx @ self.rho)


def _vals(f) -> np.ndarray:
    return f.values if isinstance(f, KineticState) else np.asarray(f, dtype=float)


def _samples(p) -> np.ndarray:
    return p.samples if isinstance(p, Profile) else np.asarray(p, dtype=float)


def maxwellian(v, u, T):
    """Gaussian velocity profile exp(-(v-u)^2 / 2T) / sqrt(2 pi T).

    Arguments broadcast; T must be strictly positive everywhere.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0) or not np.all(np.isfinite(T)):
        raise DomainError("maxwellian needs a strictly positive temperature")
    return np.exp(-((v - u) ** 2) / (2.0 * T)) / np.sqrt(2.0 * np.pi * T)


def moments(f, grid: PhaseGrid | None = None) -> MomentSet:
    """Velocity moments of a kinetic state under the grid's v-quadrature.

    Raises DegenerateStateError if the local density or temperature is not
    strictly positive (the normalized moments are then meaningless).
    """
    if grid is None:
        grid = f.grid
    vals = _vals(f)
    v, wv = grid.v, grid.wv
    rho = vals @ wv
    if np.any(rho <= 0.0):
        raise DegenerateStateError("density must stay strictly positive")
    m1 = vals @ (wv * v)
    P = vals @ (wv * v * v)
    m3 = vals @ (wv * v ** 3)
    m4 = vals @ (wv * v ** 4)
    u = m1 / rho
    T = P / rho - u * u
    if np.any(T <= 0.0):
        raise DegenerateStateError("temperature must stay strictly positive")
    d3 = m3 / (rho * T ** 1.5)
    d4 = m4 / (rho * T ** 2) - 3.0
    return MomentSet(rho=rho, u=u, P=P, T=T, d3=d3, d4=d4)


def weighted_inner(f1, f2, g, grid: PhaseGrid | None = None) -> float:
    """L^2(1/g) inner product: sum_ij wx_i wv_j f1_ij f2_ij / g_ij."""
    if grid is None:
        grid = g.grid if isinstance(g, KineticState) else f1.grid
    gv = _vals(g)
    if np.any(gv <= 0.0):
        raise WeightError("inner-product weight must be strictly positive")
    a = _vals(f1)
    b = _vals(f2)
    return float(np.einsum("i,j,ij->", grid.wx, grid.wv, a * b / gv))


def weighted_norm(f, g, grid: PhaseGrid | None = None) -> float:
    return np.sqrt(max(weighted_inner(f, f, g, grid), 0.0))


def project_pi(h, g, grid: PhaseGrid | None = None):
    """Hydrodynamic projection Pi h = (rho_h / rho_g) g.

    Pi is the orthogonal projection in L^2(1/g) onto densities of the form
    phi(x) g(x, v); it reproduces the spatial density of h.
    """
    if grid is None:
        grid = g.grid if isinstance(g, KineticState) else h.grid
    hv = _vals(h)
    gv = _vals(g)
    rho_h = hv @ grid.wv
    rho_g = gv @ grid.wv
    out = (rho_h / rho_g)[:, None] * gv
    if isinstance(h, KineticState):
        return KineticState(out, grid)
    return out
