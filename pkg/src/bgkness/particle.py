"""Stochastic particle counterpart of the kinetic model.

Each particle carries (x, v) on the torus; it flies freely, and at
exponential times (rate 1/kappa) redraws its velocity from the local
Maxwellian: the thermostat field tau with probability 1 - alpha, the
self-consistent temperature field with probability alpha.  In linear mode
that field is frozen (e.g. the computed steady profile); in meanfield mode
it is re-estimated from the ensemble at the start of each observation
interval (the exponential clock is memoryless, so restarting flights at
interval boundaries is exact).

Randomness is drawn in fixed-size blocks from counter-based Philox
streams keyed by (seed, interval, chunk, round), so runs are reproducible
regardless of chunking or backend.  The inner loop has two interchangeable
backends (numpy and Cython) that consume the same blocks identically and
produce bit-identical trajectories.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field

from .model import KineticState, Params, _samples
from . import _jump_py

try:
    from . import _jump_cy
except ImportError:
    _jump_cy = None

_BACKENDS = {"python": _jump_py}
if _jump_cy is not None:
    _BACKENDS["cython"] = _jump_cy

_KBLOCK = 12
_CHUNK = 1 << 17
_NESS_STREAM = 0xA11CE


def available_backends():
    return sorted(_BACKENDS)


def default_backend():
    return "cython" if "cython" in _BACKENDS else "python"


def _get_backend(name):
    if name is None:
        name = default_backend()
    try:
        return name, _BACKENDS[name]
    except KeyError:
        raise ValueError("unknown backend %r (available: %s)"
                         % (name, ", ".join(available_backends())))


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray
    time: float
    seed: int
    step_index: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.x.size


@dataclass
class CellStats:
    """Per-cell empirical moments on a uniform partition of the torus."""

    edges: np.ndarray
    counts: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray


def _key_base(interval, chunk_index):
    # 20 bits interval | 16 bits chunk | 24 bits redraw round
    return ((interval & 0xFFFFF) << 40) | ((chunk_index & 0xFFFF) << 24)


def _run_interval(x, v, t0, t1, seed, interval, params, Tg, taug,
                  backend=None, counts=None):
    """Advance all particles from t0 to t1 in place."""
    _, mod = _get_backend(backend)
    n = x.size
    Tg = np.ascontiguousarray(Tg, dtype=np.float64)
    taug = np.ascontiguousarray(taug, dtype=np.float64)
    no_counts = np.empty(0, dtype=np.int64)
    for ci in range(0, (n + _CHUNK - 1) // _CHUNK):
        sl = slice(ci * _CHUNK, min(n, (ci + 1) * _CHUNK))
        m = sl.stop - sl.start
        t = np.full(m, t0)
        alive = np.ones(m, dtype=np.int8)
        cslice = counts[sl] if counts is not None else no_counts
        base = _key_base(interval, ci)
        rnd = 0
        while alive.any():
            gen = np.random.Generator(np.random.Philox(key=[seed, base | rnd]))
            E = gen.exponential(params.kappa, (m, _KBLOCK))
            U = gen.random((m, _KBLOCK))
            Z = gen.standard_normal((m, _KBLOCK))
            mod.consume(x[sl], v[sl], t, alive, E, U, Z, t1,
                        params.alpha, Tg, taug, cslice)
            rnd += 1
            if rnd >= 1 << 24:
                raise RuntimeError("redraw budget exhausted in one interval")


def _empirical_temperature(x, v, cells, min_occupancy):
    """Per-cell temperature of the ensemble, with neighbor fallback for
    undersampled cells.  Returns (Tg, fallback_cell_list)."""
    idx = np.minimum((x * cells).astype(np.int64), cells - 1)
    cnt = np.bincount(idx, minlength=cells).astype(np.float64)
    s1 = np.bincount(idx, weights=v, minlength=cells)
    s2 = np.bincount(idx, weights=v * v, minlength=cells)
    ok = cnt >= min_occupancy
    Tg = np.empty(cells)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = s1 / cnt
        Tg = s2 / cnt - mu * mu
    fallback = []
    if not ok.all():
        if not ok.any():
            raise RuntimeError("no cell meets the occupancy floor; "
                               "increase particle count or coarsen cells")
        Tok = np.where(ok, Tg, 0.0)
        for c in np.flatnonzero(~ok):
            lo, hi = (c - 1) % cells, (c + 1) % cells
            nb = [Tok[j] for j in (lo, hi) if ok[j]]
            Tg[c] = np.mean(nb) if nb else Tok[ok].mean()
            fallback.append(int(c))
    return Tg, fallback


def step_ensemble(ens: ParticleEnsemble, dt: float, mode: str, profiles: dict,
                  params: Params, cells: int = 32, min_occupancy: int = 50,
                  track_counts: bool = False, backend: str | None = None
                  ) -> ParticleEnsemble:
    """Advance the ensemble by one observation interval.

    mode "linear" freezes the self-field at profiles["T"]; mode "meanfield"
    re-estimates it from the ensemble on a uniform partition (cells wide,
    occupancy floor with flagged neighbor fallback).  profiles["tau"] is
    the thermostat profile in both modes.
    """
    taug = np.asarray(_samples(profiles["tau"]), dtype=np.float64)
    fallback = None
    if mode == "linear":
        if params.alpha > 0.0:
            Tg = np.asarray(_samples(profiles["T"]), dtype=np.float64)
        else:
            Tg = taug
    elif mode == "meanfield":
        Tg, fallback = _empirical_temperature(ens.x, ens.v, cells,
                                              min_occupancy)
    else:
        raise ValueError("mode must be 'linear' or 'meanfield'")
    x = ens.x.copy()
    v = ens.v.copy()
    counts = np.zeros(ens.n, dtype=np.int64) if track_counts else None
    _run_interval(x, v, ens.time, ens.time + dt, ens.seed, ens.step_index,
                  params, Tg, taug, backend=backend, counts=counts)
    out = ParticleEnsemble(x, v, ens.time + dt, ens.seed,
                           ens.step_index + 1, dict(ens.meta))
    if track_counts:
        out.meta["jump_counts"] = counts
    if fallback is not None:
        out.meta["fallback_cells"] = fallback
        out.meta["T_field"] = Tg
    return out


def empirical_moments(ens: ParticleEnsemble, n_cells: int = 32) -> CellStats:
    """Density, bulk velocity and temperature per uniform cell."""
    idx = np.minimum((ens.x * n_cells).astype(np.int64), n_cells - 1)
    cnt = np.bincount(idx, minlength=n_cells).astype(np.float64)
    s1 = np.bincount(idx, weights=ens.v, minlength=n_cells)
    s2 = np.bincount(idx, weights=ens.v * ens.v, minlength=n_cells)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = s1 / cnt
        T = s2 / cnt - u * u
    rho = cnt / ens.n * n_cells
    edges = np.arange(n_cells + 1) / n_cells
    return CellStats(edges=edges, counts=cnt.astype(np.int64),
                     rho=rho, u=u, T=T)


def meanfield_sigma(T, n_cell):
    """Gaussian-order fluctuation scales of cell moments at occupancy n_cell."""
    T = np.asarray(T, dtype=float)
    n_cell = np.asarray(n_cell, dtype=float)
    return {"sigma_u": np.sqrt(T / n_cell),
            "sigma_T": T * np.sqrt(2.0 / n_cell)}


def sample_ness(g, n: int, seed: int) -> ParticleEnsemble:
    """Draw n particles from a kinetic state on the grid.

    Positions come from the per-cell mass (uniform within a cell); the
    conditional velocity uses the piecewise-linear CDF whose density is
    constant on each velocity bin, so cell moments match the quadrature
    moments up to single-bin discretization.
    """
    state = g.g if hasattr(g, "g") else g
    vals, grid = state.values, state.grid
    gen = np.random.Generator(np.random.Philox(key=[seed, _NESS_STREAM]))
    pcell = grid.wx * (vals @ grid.wv)
    pcell = pcell / pcell.sum()
    cum = np.cumsum(pcell)
    cum[-1] = 1.0
    ci = np.searchsorted(cum, gen.random(n), side="right")
    x = (ci + gen.random(n)) / grid.nx
    hv = grid.v[1] - grid.v[0]
    edges = np.concatenate(([grid.v[0] - 0.5 * hv], grid.v + 0.5 * hv))
    uv = gen.random(n)
    v = np.empty(n)
    for c in range(grid.nx):
        mask = ci == c
        if not mask.any():
            continue
        w = grid.wv * vals[c]
        cdf = np.concatenate(([0.0], np.cumsum(w)))
        cdf /= cdf[-1]
        v[mask] = np.interp(uv[mask], cdf, edges)
    return ParticleEnsemble(x=x, v=v, time=0.0, seed=seed)


def doeblin_check(x0: float, v0: float, t_star: float, n: int, seed: int,
                  profiles: dict, params: Params, cells=(32, 16),
                  v_window=(-1.0, 1.0), backend: str | None = None) -> dict:
    """Empirical minorization mass from a Dirac start.

    Runs n copies from (x0, v0) to t_star in linear mode, bins the final
    state on [0,1) x v_window, and reports beta_hat = min cell mass
    normalized so a uniform occupancy gives beta_hat = 1.  An empty cell
    yields beta_hat = 0 plus a suggested larger n.
    """
    x = np.full(n, float(x0))
    v = np.full(n, float(v0))
    taug = np.asarray(_samples(profiles["tau"]), dtype=np.float64)
    if params.alpha > 0.0:
        Tg = np.asarray(_samples(profiles["T"]), dtype=np.float64)
    else:
        Tg = taug
    _run_interval(x, v, 0.0, t_star, seed, 0, params, Tg, taug,
                  backend=backend)
    H, _, _ = np.histogram2d(x, v, bins=list(cells),
                             range=[[0.0, 1.0], list(v_window)])
    mn = H.min()
    ncells = cells[0] * cells[1]
    beta = mn / n * ncells
    out = {"beta_hat": float(beta), "min_count": int(mn), "hist": H,
           "n": n, "t_star": t_star, "recommended_n": None}
    if mn == 0:
        out["recommended_n"] = int(10 * n)
    return out
