"""Relative-phase scans: per-harmonic modulation, Fourier fits, modality.

The scan sweeps the two-colour phase phi over a uniform grid on [0, 2pi),
re-solving the quantum orbits at every cell (with continuation warm starts
between neighbouring cells) and recording intensities and per-orbit
polarization axes.  The modulation model is the five-term series

    f(phi) = a0 + a1 cos(phi) + b1 sin(phi) + a2 cos(2 phi) + b2 sin(2 phi)

optionally extended by cos(4 phi) / sin(4 phi) terms when the five-term
residual exceeds 5% of the series peak-to-peak (a bimodal shape within one
pi period cannot be represented otherwise).  Single-atom intensities are
exactly pi-periodic in phi, so the fitted a1, b1 vanish for simulated
series; they are kept in the model for experimental data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .field import FieldParams, TargetParams
from .saddle import (BranchLostError, CoalescenceError, NoConvergenceError,
                     continue_in, solve_cycle)
from .taxonomy import _symmetrize_mask, classify, relevance_mask
from .dipole import harmonic_dipole, intensity
from .polarization import (EllipseDecomposition, UndefinedEllipseError,
                           decompose, signed_axes)

REFRESH_EVERY = 8          # dense re-solve cadence along the phi grid
RMS_EXTEND_FRACTION = 0.05
TAU_GRID_STEP = 1e-3
PERIODICITY_TOL = 1e-6
PHI_GROWTH_FACTOR = 5.0    # max amplitude growth per phi step for a branch


class IllConditionedFitError(ValueError):
    """Fit grid cannot resolve the model coefficients."""


class ClassificationRefusedError(ValueError):
    """Series is constant or not pi-periodic; modality undefined."""


@dataclass(frozen=True)
class ModulationFit:
    """Least-squares coefficients of the phase-modulation model."""

    a0: float
    a1: float
    b1: float
    a2: float
    b2: float
    rms: float
    a4: float = 0.0
    b4: float = 0.0
    extended: bool = False
    tau: float = 0.0

    def evaluate(self, phi):
        """Model value at phi (the stored alignment shift tau is applied)."""
        x = np.asarray(phi, dtype=float) - self.tau
        return (self.a0 + self.a1 * np.cos(x) + self.b1 * np.sin(x)
                + self.a2 * np.cos(2 * x) + self.b2 * np.sin(2 * x)
                + self.a4 * np.cos(4 * x) + self.b4 * np.sin(4 * x))


@dataclass(frozen=True)
class PhaseScan:
    """Phase-resolved intensities and per-orbit axes on a uniform phi grid."""

    phis: np.ndarray       # (n,), uniform on [0, 2pi)
    qs: np.ndarray         # (m,)
    Ix: np.ndarray         # (m, n)
    Iy: np.ndarray
    Itotal: np.ndarray
    axes: dict             # (q, branch_id) -> (n, 2) signed major axes
    minor: dict            # (q, branch_id) -> (n, 2) minor axes
    gamma: dict            # (q, branch_id) -> (n,) rectifying phase
    ellipticity: dict      # (q, branch_id) -> (n,) |N|/|M|
    gaps: tuple            # (q, phi, reason) for failed cells/branches

    def series(self, q):
        """The Itotal modulation of one harmonic order."""
        idx = int(np.argmin(np.abs(self.qs - q)))
        if abs(self.qs[idx] - q) > 1e-9:
            raise KeyError(f"order {q} not in scan")
        return self.Itotal[idx]


def _match_indices(prev_sads, saddles, period):
    """Index of each saddle's predecessor in the previous cell (-1 if new)."""
    from .taxonomy import MATCH_TOL_PERIODS
    out = np.full(len(saddles), -1, dtype=int)
    for i, sp in enumerate(saddles):
        d = [abs(sp.ti - ref.ti) + abs(sp.tr - ref.tr) for ref in prev_sads]
        if d and min(d) < MATCH_TOL_PERIODS * period:
            out[i] = int(np.argmin(d))
    return out


def _scan_cell(p, tgt, q, saddles, gaps, phi, prev_sads=None, prev_banned=None):
    """Relevance + classification + dipole sum for one (q, phi) cell.

    Returns the cell result plus the `banned` flags to carry to the next
    cell: a branch whose amplitude explodes between neighbouring phi cells
    is an anti-Stokes partner crossing in phi — invisible to the per-order
    growth test — and stays excluded for as long as it is tracked.
    """
    from .taxonomy import amplitude
    mask = relevance_mask(p, tgt, q, saddles)
    banned = np.zeros(len(saddles), dtype=bool)
    match = _match_indices(prev_sads or [], saddles, p.period)
    for i, sp in enumerate(saddles):
        k = match[i]
        if k < 0:
            continue
        if prev_banned is not None and prev_banned[k]:
            banned[i] = True
        elif amplitude(sp) > PHI_GROWTH_FACTOR * amplitude(prev_sads[k]):
            banned[i] = True
            gaps.append((q, phi, f"branch at ti={sp.ti:.2f} grows with phi "
                                 "(anti-Stokes crossing)"))
    mask &= ~banned
    _symmetrize_mask(p, saddles, mask, [None] * len(saddles))
    labelled = classify(p, saddles, relevant_mask=mask)
    hd = harmonic_dipole(p, tgt, q, labelled)
    ix, iy, itot = intensity(hd, p.omega)
    cell_axes = {}
    for c in hd.contributions:
        if not c.label.relevant:
            continue
        try:
            cell_axes[c.label.branch_id] = decompose(c.total)
        except UndefinedEllipseError:
            gaps.append((q, phi, f"{c.label.branch_id}: zero contribution"))
    return ix, iy, itot, cell_axes, banned


def _mirror_decomposition(dec):
    """Ellipse of the same orbit at phi + pi: the field there is the
    y-reflection of the field at phi, so M and N flip their y components."""
    return EllipseDecomposition(M=dec.M * np.array([1.0, -1.0]),
                                N=dec.N * np.array([1.0, -1.0]),
                                gamma=dec.gamma, ellipticity=dec.ellipticity)


def run_scan(p: FieldParams, tgt: TargetParams, q_list, n_phi,
             refresh_every=REFRESH_EVERY):
    """Sweep phi over ``n_phi`` uniform points for each order in ``q_list``.

    Saddles are carried from cell to cell by continuation; every
    ``refresh_every``-th cell re-solves from a dense seed grid so branches
    born mid-scan are picked up.  Failed cells or lost branches become gap
    records, never aborts.

    Shifting phi by pi reflects the driving field in y exactly, so only the
    half grid [0, pi) is computed and the second half is tiled from it:
    intensities repeat unchanged and the per-orbit ellipse axes flip their y
    components.  This keeps the exact pi-periodicity of the single-atom
    response free of path-dependent branch-tracking hysteresis (the
    underlying symmetry is verified independently at the spectrum level).
    """
    if n_phi < 32:
        raise ValueError(f"need at least 32 phase points, got {n_phi}")
    if n_phi % 2:
        raise ValueError(f"need an even number of phase points, got {n_phi}")
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    half = n_phi // 2
    qs = np.asarray(sorted(q_list), dtype=float)
    ix = np.full((qs.size, n_phi), np.nan)
    iy = np.full_like(ix, np.nan)
    itot = np.full_like(ix, np.nan)
    raw_axes = {}
    gaps = []
    for m, q in enumerate(qs):
        prev_p, prev_sads, prev_banned = None, None, None
        for j in range(half):
            phi = phis[j]
            pj = p.with_phi(phi)
            try:
                if prev_sads is None or j % refresh_every == 0:
                    sads = solve_cycle(pj, tgt, q)
                else:
                    sads = []
                    for sp in prev_sads:
                        try:
                            sads.extend(continue_in(prev_p, tgt, q, [sp],
                                                    "phi", phi))
                        except BranchLostError:
                            gaps.append((q, phi, "branch lost in continuation"))
                res = _scan_cell(pj, tgt, q, sads, gaps, phi,
                                 prev_sads=prev_sads, prev_banned=prev_banned)
            except (NoConvergenceError, CoalescenceError, ValueError) as exc:
                gaps.append((q, phi, str(exc)))
                prev_p, prev_sads, prev_banned = None, None, None
                continue
            ix[m, j], iy[m, j], itot[m, j], cell_axes, banned = res
            ix[m, j + half] = ix[m, j]
            iy[m, j + half] = iy[m, j]
            itot[m, j + half] = itot[m, j]
            for bid, dec in cell_axes.items():
                store = raw_axes.setdefault((q, bid), {})
                store[j] = dec
                store[j + half] = _mirror_decomposition(dec)
            prev_p, prev_sads, prev_banned = pj, sads, banned
    axes, minor, gam, ell = _signed_axis_tables(raw_axes, n_phi)
    return PhaseScan(phis=phis, qs=qs, Ix=ix, Iy=iy, Itotal=itot, axes=axes,
                     minor=minor, gamma=gam, ellipticity=ell, gaps=tuple(gaps))


def _signed_axis_tables(raw_axes, n_phi):
    """Build sign-continuous axis series, pairing h0/h1 partners per family."""
    axes = {}
    minor = {}
    gam = {}
    ell = {}
    for (q, bid), store in raw_axes.items():
        ms = np.full((n_phi, 2), np.nan)
        ns = np.full((n_phi, 2), np.nan)
        gs = np.full(n_phi, np.nan)
        es = np.full(n_phi, np.nan)
        for j, dec in store.items():
            ms[j] = dec.M
            ns[j] = dec.N
            gs[j] = dec.gamma
            es[j] = dec.ellipticity
        axes[(q, bid)] = ms
        minor[(q, bid)] = ns
        gam[(q, bid)] = gs
        ell[(q, bid)] = es
    for (q, bid) in list(axes):
        if not bid.startswith("h0-"):
            continue
        partner = "h1-" + bid[3:]
        if (q, partner) not in axes:
            continue
        lead, part = axes[(q, bid)], axes[(q, partner)]
        good = np.isfinite(lead).all(axis=1) & np.isfinite(part).all(axis=1)
        if not good.any():
            continue
        s_lead, s_part = signed_axes([lead[good], part[good]])
        lead[good], part[good] = s_lead, s_part
    return axes, minor, gam, ell


def _design_matrix(phis, extended):
    cols = [np.ones_like(phis), np.cos(phis), np.sin(phis),
            np.cos(2 * phis), np.sin(2 * phis)]
    if extended:
        cols += [np.cos(4 * phis), np.sin(4 * phis)]
    return np.column_stack(cols)


def _lstsq_scaled(a, y):
    scale = np.linalg.norm(a, axis=0)
    if np.any(scale == 0):
        raise IllConditionedFitError("degenerate design matrix column")
    coef, _, rank, sv = np.linalg.lstsq(a / scale, y, rcond=None)
    if rank < a.shape[1] or sv[0] / sv[-1] > 1e10:
        raise IllConditionedFitError(
            f"fit grid cannot resolve the model (rank {rank}/{a.shape[1]})")
    return coef / scale


def fourier_fit(series, phase_grid, extended=None):
    """Least-squares modulation fit of a phase series.

    ``extended=None`` fits the five-term model first and adds the 4 phi
    terms automatically when the residual rms exceeds 5% of the series
    peak-to-peak; pass True/False to force either model.
    """
    y = np.asarray(series, dtype=float)
    phis = np.asarray(phase_grid, dtype=float)
    if y.size < 8:
        raise ValueError(f"need at least 8 points, got {y.size}")
    if y.shape != phis.shape:
        raise ValueError("series and phase grid differ in length")

    def solve(ext):
        a = _design_matrix(phis, ext)
        coef = _lstsq_scaled(a, y)
        rms = float(np.sqrt(np.mean((a @ coef - y) ** 2)))
        full = np.zeros(7)
        full[:coef.size] = coef
        return ModulationFit(a0=full[0], a1=full[1], b1=full[2], a2=full[3],
                             b2=full[4], a4=full[5], b4=full[6],
                             rms=rms, extended=bool(ext))

    if extended is not None:
        return solve(extended)
    fit = solve(False)
    ptp = float(np.ptp(y))
    if ptp > 0 and fit.rms > RMS_EXTEND_FRACTION * ptp:
        fit = solve(True)
    return fit


def align_shift(reference_fit: ModulationFit, measured, phase_grid):
    """Alignment shift tau minimizing sum (f_fit(phi - tau) - measured)^2.

    Coarse grid search at 1e-3 resolution over [0, 2pi), then bounded local
    refinement.  A reference fit with no oscillatory content has a flat
    objective; that case warns and returns tau = 0.
    """
    y = np.asarray(measured, dtype=float)
    phis = np.asarray(phase_grid, dtype=float)
    osc = np.array([reference_fit.a1, reference_fit.b1, reference_fit.a2,
                    reference_fit.b2, reference_fit.a4, reference_fit.b4])
    if np.max(np.abs(osc)) <= 1e-12 * abs(reference_fit.a0):
        warnings.warn("constant reference fit: alignment shift is degenerate",
                      stacklevel=2)
        return 0.0
    base = replace(reference_fit, tau=0.0)
    taus = np.arange(0.0, 2.0 * np.pi, TAU_GRID_STEP)
    model = base.evaluate(phis[None, :] - taus[:, None])
    obj = ((model - y[None, :]) ** 2).sum(axis=1)
    k = int(np.argmin(obj))

    def f(tau):
        return float(((base.evaluate(phis - tau) - y) ** 2).sum())

    res = minimize_scalar(f, bounds=(taus[k] - TAU_GRID_STEP,
                                     taus[k] + TAU_GRID_STEP),
                          method="bounded",
                          options={"xatol": 1e-8})
    tau = float(res.x % (2.0 * np.pi))
    if 2.0 * np.pi - tau < 1e-6:   # refined just below the wrap point
        tau = 0.0
    return tau


def classify_modality(series, phase_grid, tol=PERIODICITY_TOL):
    """Count modulation maxima per pi period: 1 -> monomodal, >=2 -> bimodal.

    The series must be pi-periodic on its uniform 2pi grid (within ``tol``
    relative to its peak-to-peak) and non-constant; otherwise classification
    is refused.  Maxima are counted on the Fourier-smoothed series (extended
    model) so grid noise cannot split a peak.
    """
    y = np.asarray(series, dtype=float)
    phis = np.asarray(phase_grid, dtype=float)
    if y.size < 8 or y.size % 2:
        raise ClassificationRefusedError(
            "need an even-length uniform grid over [0, 2 pi)")
    ptp = float(np.ptp(y))
    scale = max(np.max(np.abs(y)), 1e-300)
    if ptp <= 1e-12 * scale:
        raise ClassificationRefusedError("constant series (degenerate)")
    half = y.size // 2
    defect = np.max(np.abs(y - np.roll(y, half)))
    if defect > tol * ptp:
        raise ClassificationRefusedError(
            f"series not pi-periodic (defect {defect:.3e} vs ptp {ptp:.3e})")
    fit = fourier_fit(y, phis, extended=True)
    fine = np.linspace(0.0, np.pi, 2048, endpoint=False)
    m = fit.evaluate(fine)
    left = np.roll(m, 1)
    right = np.roll(m, -1)
    n_max = int(np.count_nonzero((m > left) & (m > right)))
    label = "monomodal" if n_max <= 1 else "bimodal"
    return label, n_max
