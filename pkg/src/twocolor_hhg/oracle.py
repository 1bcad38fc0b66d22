"""Brute-force evaluation of the harmonic dipole by direct 2D integration.

This is the verification oracle for the saddle-point pipeline: the double
integral over real recombination time and excursion tau is discretized with
plain rectangle rules (tau on midpoints, tr commensurate with the period, so
exact field symmetries survive discretization and disjoint tau bands add
exactly).  The tau -> 0 spreading singularity is regularized by the complex
shift tau -> tau + i*eps.  Slow by design; correctness only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (FieldParams, TargetParams, apot, apot_integral,
                    apot_sq_integral)
from .dipole import HarmonicSpectrum, dme, ionisation_amplitude
from .field import SPEED_OF_LIGHT


class ResolutionError(ValueError):
    """Step too coarse for the requested harmonic order."""


@dataclass(frozen=True)
class OracleConfig:
    """Discretization of the direct dipole integral.

    ``n_cycles`` fundamental periods of recombination time, excursions up to
    ``tau_max_periods`` * T, step T / ``steps_per_period``.
    """

    n_cycles: int = 1
    tau_max_periods: float = 1.5
    steps_per_period: int = 512
    eps: float = 1e-2

    def validate(self, p: FieldParams):
        if self.steps_per_period < 400:
            raise ValueError("dt must be at most T/400")
        if self.tau_max_periods < 1.2:
            raise ValueError("tau_max must be at least 1.2 T")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.n_cycles < 1:
            raise ValueError("need at least one cycle")

    def dt(self, p: FieldParams):
        return p.period / self.steps_per_period


def _integrand_rows(p, tgt, cfg, dme_form="paper"):
    """Q-independent part of the integrand on the (tr, tau) grid.

    Returns (tr_grid, g) where g has shape (2, n_tr): the tau integral of
    d(p_s + A(tr)) * Y * spread * e^{i S0}, with S0 the action without the
    q w tr term.
    """
    dt = cfg.dt(p)
    n_tr = cfg.n_cycles * cfg.steps_per_period
    tr = dt * np.arange(n_tr)
    n_tau = int(round(cfg.tau_max_periods * cfg.steps_per_period))
    tau = dt * (np.arange(n_tau) + 0.5)
    trg = tr[:, None]
    taug = tau[None, :]
    tig = trg - taug
    integral_a = apot_integral(p, tig, trg)
    ps = -integral_a / taug
    k = ps + apot(p, trg)
    d_rec = dme(k, tgt.Ip, form=dme_form)
    spread = (2.0 * np.pi / (1j * (taug + 1j * cfg.eps))) ** 1.5
    ps2 = (ps * ps).sum(axis=0)
    s0 = -tgt.Ip * taug + 0.5 * ps2 * taug - 0.5 * apot_sq_integral(p, tig, trg)
    rows = d_rec * (ionisation_amplitude(tgt) * spread * np.exp(1j * s0))
    return tr, rows * dt  # tau weight absorbed


def _project(p, cfg, tr, rows_tau_summed, q):
    dt = cfg.dt(p)
    phase = np.exp(1j * q * p.omega * tr)
    return (rows_tau_summed * phase).sum(axis=-1) * dt / (cfg.n_cycles * p.period)


def direct_dipole(p: FieldParams, tgt: TargetParams, cfg: OracleConfig, qs,
                  dme_form="paper"):
    """Direct-integration harmonic spectrum over the orders ``qs``."""
    cfg.validate(p)
    qs = np.asarray(sorted(qs), dtype=float)
    dt = cfg.dt(p)
    if qs[-1] * p.omega * dt > 0.5:
        raise ResolutionError(
            f"step {dt:.3f} too coarse for q={qs[-1]} (q w dt > 0.5)")
    tr, rows = _integrand_rows(p, tgt, cfg, dme_form=dme_form)
    g = rows.sum(axis=-1)   # tau integral done
    ix = np.zeros(qs.size)
    iy = np.zeros(qs.size)
    dips = []
    pref = 1.0 / (2.0 * np.pi * SPEED_OF_LIGHT ** 3)
    for n, q in enumerate(qs):
        d = _project(p, cfg, tr, g, q)
        dips.append(d)
        w4 = (q * p.omega) ** 4 * pref
        ix[n] = w4 * abs(d[0]) ** 2
        iy[n] = w4 * abs(d[1]) ** 2
    return HarmonicSpectrum(qs=qs, Ix=ix, Iy=iy, Itotal=ix + iy,
                            dipoles=tuple(dips), method="direct")


def windowed_dipole(p: FieldParams, tgt: TargetParams, cfg: OracleConfig, q,
                    tau_band, dme_form="paper", taper=0.0):
    """Direct dipole with the excursion restricted to (tau_min, tau_max].

    With ``taper = 0`` bands are sharp and half-open over the midpoint grid,
    so a union of disjoint bands reproduces the unrestricted integral
    exactly.  A nonzero ``taper`` replaces each interior band edge with a
    raised-cosine transition of that width, which suppresses the spurious
    non-stationary boundary contribution a sharp cut introduces; bands that
    share an edge (and taper) still sum exactly to the unrestricted result.
    """
    cfg.validate(p)
    lo, hi = tau_band
    if not (0.0 <= lo < hi <= cfg.tau_max_periods * p.period + 1e-12):
        raise ValueError(f"invalid tau band ({lo}, {hi})")
    if taper < 0:
        raise ValueError(f"taper width must be nonnegative, got {taper}")
    dt = cfg.dt(p)
    if q * p.omega * dt > 0.5:
        raise ResolutionError(f"step {dt:.3f} too coarse for q={q}")
    tr, rows = _integrand_rows(p, tgt, cfg, dme_form=dme_form)
    n_tau = rows.shape[-1]
    tau = dt * (np.arange(n_tau) + 0.5)
    tau_top = cfg.tau_max_periods * p.period
    if taper == 0.0:
        weight = ((tau > lo) & (tau <= hi)).astype(float)
    else:
        def rise(edge):
            t = np.clip((tau - (edge - 0.5 * taper)) / taper, 0.0, 1.0)
            return 0.5 * (1.0 - np.cos(np.pi * t))
        weight = np.ones_like(tau)
        if lo > 0.0:
            weight = weight * rise(lo)
        if hi < tau_top - 1e-12:
            weight = weight * (1.0 - rise(hi))
    g = (rows * weight).sum(axis=-1)
    return _project(p, cfg, tr, g, q)
