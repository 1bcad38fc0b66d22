"""Complex saddle-point solver for the ionisation/recombination time system.

The stationary points (ti, tr) of the semiclassical action satisfy

    (1/2) (p_s + A(tr))^2 + Ip - q w = 0      (recombination)
    (1/2) (p_s + A(ti))^2 + Ip       = 0      (ionisation)

with the stationary momentum p_s = -(1/(tr - ti)) * integral(A, ti..tr).
All dot products of 2-vectors are unconjugated (analytic continuation).

The solver is a damped Newton iteration with the analytic Jacobian; the
public entry points are scalar, but internally everything is vectorized so
that a dense seed grid over one optical cycle is cheap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .field import FieldParams, TargetParams, apot, apot_integral, apot_sq_integral, efield

RESIDUAL_TOL = 1e-12
DEDUP_TOL = 1e-8
COALESCENCE_COND = 1e12


class CoalescenceError(ValueError):
    """Ionisation and recombination times coincide (or their saddles merge)."""


class NoConvergenceError(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""


class BranchLostError(RuntimeError):
    """Continuation lost a branch; carries the last converged point."""

    def __init__(self, message, last_good, last_value):
        super().__init__(message)
        self.last_good = last_good
        self.last_value = last_value


@dataclass(frozen=True)
class SaddlePoint:
    """One converged solution of the saddle system at harmonic order q."""

    ti: complex
    tr: complex
    ps: np.ndarray          # complex (2,) stationary momentum
    action: complex
    hessdet: complex
    q: float
    residual: float
    warning: str | None = None

    @property
    def excursion(self):
        """Real travel time Re(tr - ti)."""
        return (self.tr - self.ti).real


@dataclass(frozen=True)
class SeedGrid:
    """Initial guesses (ti, tr) within one fundamental period."""

    ti: np.ndarray
    tr: np.ndarray
    half_cycle: np.ndarray  # integer tag from Re(ti) binning by T/2


def stationary_momentum(p: FieldParams, ti, tr):
    """p_s = -(1/(tr-ti)) * integral of A over [ti, tr]."""
    tau = np.asarray(tr) - np.asarray(ti)
    if np.any(np.abs(tau) < 1e-14):
        raise CoalescenceError("tr and ti coincide; stationary momentum undefined")
    return -apot_integral(p, ti, tr) / tau


def action_value(p: FieldParams, tgt: TargetParams, q, ti, tr):
    """Semiclassical action S(ti, tr) in closed form (momentum eliminated)."""
    ps = stationary_momentum(p, ti, tr)
    tau = np.asarray(tr) - np.asarray(ti)
    ps2 = (ps * ps).sum(axis=0)
    return (-tgt.Ip * tau + 0.5 * ps2 * tau
            - 0.5 * apot_sq_integral(p, ti, tr) + q * p.omega * np.asarray(tr))


def saddle_residual(p: FieldParams, tgt: TargetParams, q, ti, tr):
    """The two saddle-equation values (recombination, ionisation)."""
    ps = stationary_momentum(p, ti, tr)
    vr = ps + apot(p, tr)
    vi = ps + apot(p, ti)
    f_rec = 0.5 * (vr * vr).sum(axis=0) + tgt.Ip - q * p.omega
    f_ion = 0.5 * (vi * vi).sum(axis=0) + tgt.Ip
    return np.stack([f_rec, f_ion])


def _residual_jacobian(p, tgt, q, ti, tr):
    """Residual and analytic Jacobian wrt (ti, tr), vectorized."""
    with np.errstate(all="ignore"):
        return _residual_jacobian_impl(p, tgt, q, ti, tr)


def _residual_jacobian_impl(p, tgt, q, ti, tr):
    tau = tr - ti
    ps = -apot_integral(p, ti, tr) / tau
    vr = ps + apot(p, tr)
    vi = ps + apot(p, ti)
    er = efield(p, tr)
    ei = efield(p, ti)
    vr2 = (vr * vr).sum(axis=0)
    vi2 = (vi * vi).sum(axis=0)
    vrvi = (vr * vi).sum(axis=0)
    f_rec = 0.5 * vr2 + tgt.Ip - q * p.omega
    f_ion = 0.5 * vi2 + tgt.Ip
    j = np.empty((2, 2) + np.shape(ti), dtype=complex)
    j[0, 0] = vrvi / tau                              # dF_rec/dti
    j[0, 1] = -vr2 / tau - (vr * er).sum(axis=0)      # dF_rec/dtr
    j[1, 0] = vi2 / tau - (vi * ei).sum(axis=0)       # dF_ion/dti
    j[1, 1] = -vrvi / tau                             # dF_ion/dtr
    return np.stack([f_rec, f_ion]), j


def _resnorm(p, tgt, q, ti, tr):
    with np.errstate(all="ignore"):
        tau = tr - ti
        bad = (np.abs(tau) < 1e-12) | (np.abs(ti.imag) > 1e3) | (np.abs(tr.imag) > 1e3)
        tau = np.where(bad, 1.0, tau)
        ti = np.where(bad, 0.0, ti)
        tr = np.where(bad, 1.0, tr)
        ps = -apot_integral(p, ti, tr) / tau
        vr = ps + apot(p, tr)
        vi = ps + apot(p, ti)
        f_rec = 0.5 * (vr * vr).sum(axis=0) + tgt.Ip - q * p.omega
        f_ion = 0.5 * (vi * vi).sum(axis=0) + tgt.Ip
        rn = np.maximum(np.abs(f_rec), np.abs(f_ion))
        return np.where(bad | ~np.isfinite(rn), np.inf, rn)


def _newton_batch(p, tgt, q, ti, tr, tol=RESIDUAL_TOL, max_iter=100, max_halvings=8):
    """Damped Newton on a batch of seeds. Returns (ti, tr, resnorm, converged)."""
    ti = np.array(ti, dtype=complex)
    tr = np.array(tr, dtype=complex)
    q = np.broadcast_to(np.asarray(q, dtype=float), ti.shape)
    rn = _resnorm(p, tgt, q, ti, tr)
    alive = np.isfinite(rn)
    for _ in range(max_iter):
        active = alive & (rn > tol)
        if not active.any():
            break
        f, j = _residual_jacobian(p, tgt, q[active], ti[active], tr[active])
        det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
        singular = np.abs(det) < 1e-300
        det = np.where(singular, 1.0, det)
        dti = -(j[1, 1] * f[0] - j[0, 1] * f[1]) / det
        dtr = -(-j[1, 0] * f[0] + j[0, 0] * f[1]) / det
        dti[singular] = np.nan
        dtr[singular] = np.nan
        # trust region: cap the step at half a period to keep iterates sane
        cap = 0.5 * p.period
        size = np.maximum(np.abs(dti), np.abs(dtr))
        shrink = size > cap
        factor = np.where(shrink, cap / np.where(size > 0, size, 1.0), 1.0)
        dti = dti * factor
        dtr = dtr * factor
        # step-halving line search on the residual max-norm
        scale = np.ones(dti.shape)
        base = rn[active]
        t1 = ti[active] + scale * dti
        t2 = tr[active] + scale * dtr
        trial = _resnorm(p, tgt, q[active], t1, t2)
        for _ in range(max_halvings):
            worse = ~(trial < base)
            if not worse.any():
                break
            scale[worse] *= 0.5
            t1 = ti[active] + scale * dti
            t2 = tr[active] + scale * dtr
            new = _resnorm(p, tgt, q[active], t1, t2)
            trial = np.where(worse, new, trial)
        improved = trial < base
        keep_ti = np.where(improved, t1, ti[active])
        keep_tr = np.where(improved, t2, tr[active])
        keep_rn = np.where(improved, trial, base)
        dead = ~improved | ~np.isfinite(trial)
        ti[active] = keep_ti
        tr[active] = keep_tr
        rn[active] = keep_rn
        idx = np.flatnonzero(active)
        alive[idx[dead]] = False
    converged = alive & (rn <= tol)
    return ti, tr, rn, converged


def _make_point(p, tgt, q, ti, tr, warning=None):
    ps = stationary_momentum(p, ti, tr)
    s = action_value(p, tgt, q, ti, tr)
    h, det = hessian_at(p, tgt, ti, tr)
    res = float(np.max(np.abs(saddle_residual(p, tgt, q, ti, tr))))
    return SaddlePoint(ti=complex(ti), tr=complex(tr), ps=ps, action=complex(s),
                       hessdet=complex(det), q=float(q), residual=res, warning=warning)


def newton_solve(p: FieldParams, tgt: TargetParams, q, seed_ti, seed_tr,
                 tol=RESIDUAL_TOL, max_iter=100):
    """Solve the saddle system from one seed; returns a converged SaddlePoint.

    Solutions with Im(ti) < 0 are the complex-conjugate (growing) partners
    and are rejected.  A near-coalescent Jacobian attaches a warning rather
    than failing.
    """
    if abs(complex(seed_tr) - complex(seed_ti)) < 1e-12:
        raise CoalescenceError("seed has tr == ti")
    ti, tr, rn, conv = _newton_batch(
        p, tgt, q, [complex(seed_ti)], [complex(seed_tr)], tol=tol, max_iter=max_iter)
    if not conv[0]:
        raise NoConvergenceError(
            f"no convergence from seed ({seed_ti}, {seed_tr}) at q={q}: "
            f"residual {rn[0]:.3e}")
    if ti[0].imag < 0:
        raise NoConvergenceError(
            f"seed ({seed_ti}, {seed_tr}) converged to an Im(ti) < 0 "
            "conjugate solution")
    warning = None
    _, j = _residual_jacobian(p, tgt, np.asarray([float(q)]), ti, tr)
    cond = np.linalg.cond(j[:, :, 0])
    if cond > COALESCENCE_COND:
        warning = f"near-coalescence: Jacobian condition number {cond:.3e}"
    return _make_point(p, tgt, q, ti[0], tr[0], warning=warning)


def hessian_at(p: FieldParams, tgt: TargetParams, ti, tr):
    """Total second derivatives of S wrt (ti, tr), including dp_s/dt terms."""
    tau = tr - ti
    ps = stationary_momentum(p, ti, tr)
    vr = ps + apot(p, tr)
    vi = ps + apot(p, ti)
    er = efield(p, tr)
    ei = efield(p, ti)
    a = (vi * vi).sum(axis=0) / tau - (vi * ei).sum(axis=0)   # d2S/dti2
    b = -(vi * vr).sum(axis=0) / tau                          # d2S/dti dtr
    c = (vr * vr).sum(axis=0) / tau + (vr * er).sum(axis=0)   # d2S/dtr2
    h = np.array([[a, b], [b, c]])
    return h, a * c - b * b


def hessian(p: FieldParams, tgt: TargetParams, q, sp: SaddlePoint):
    """Hessian matrix and determinant at a converged saddle."""
    return hessian_at(p, tgt, sp.ti, sp.tr)


def seed_grid(p: FieldParams, tgt: TargetParams, n_ti=48, n_tau=60, tau_max=None):
    """Dense (ti, tr) guesses over one period, lifted off the real axis.

    Im(ti) is initialised with the tunnelling-time estimate
    sqrt(2 Ip)/|E(Re ti)|, with the field magnitude floored to avoid blowup
    at its zero crossings.
    """
    t_period = p.period
    if tau_max is None:
        tau_max = 1.05 * t_period
    re_ti = np.linspace(0.0, t_period, n_ti, endpoint=False)
    taus = np.linspace(0.05 * t_period, tau_max, n_tau)
    e_abs = np.linalg.norm(efield(p, re_ti).real, axis=0)
    e_floor = 0.2 * max(p.E1, p.E2)
    im_ti = np.sqrt(2.0 * tgt.Ip) / np.maximum(e_abs, e_floor)
    ti = (re_ti + 1j * im_ti)[:, None] + np.zeros_like(taus)[None, :]
    tr = (re_ti[:, None] + taus[None, :]).astype(complex)
    half = (re_ti[:, None] // (t_period / 2.0)).astype(int) + np.zeros(
        taus.shape, dtype=int)[None, :]
    return SeedGrid(ti=ti.ravel(), tr=tr.ravel(), half_cycle=half.ravel())


def below_threshold(p: FieldParams, tgt: TargetParams, q):
    """True when the photon energy q*w does not exceed Ip (no real channel)."""
    return q * p.omega <= tgt.Ip


def solve_cycle(p: FieldParams, tgt: TargetParams, q, n_ti=48, n_tau=60,
                tau_max=None, tol=RESIDUAL_TOL):
    """All distinct saddles with Re(ti) in one fundamental period.

    Below the Ip threshold the result is empty (see :func:`below_threshold`
    for the flag).  Excursions are capped at ``tau_max`` (default 1.05 T,
    the single-return scope) so multi-cycle returns are excluded; solutions
    with Im(ti) < 0 or Im(S) < 0 are the exponentially growing conjugate
    partners and are discarded.  Survivors are deduplicated after folding by
    the field period and sorted by (Re ti, Re tr).
    """
    if below_threshold(p, tgt, q):
        return []
    t_period = p.period
    if tau_max is None:
        tau_max = 1.05 * t_period
    seeds = seed_grid(p, tgt, n_ti=n_ti, n_tau=n_tau, tau_max=tau_max)
    ti, tr, rn, conv = _newton_batch(p, tgt, q, seeds.ti, seeds.tr, tol=tol)
    good = conv & (ti.imag > 0) & (tr.real > ti.real) & (tr.real - ti.real <= tau_max)
    ti, tr = ti[good], tr[good]
    im_s = action_value(p, tgt, q, ti, tr).imag if ti.size else np.empty(0)
    keep = im_s >= 0.0
    ti, tr = ti[keep], tr[keep]
    # fold Re(ti) into [0, T)
    shift = np.floor(ti.real / t_period) * t_period
    ti = ti - shift
    tr = tr - shift
    order = np.lexsort((tr.real, ti.real))
    accepted = []
    for k in order:
        dup = False
        for a_ti, a_tr in accepted:
            for s in (-t_period, 0.0, t_period):
                if abs(ti[k] - a_ti - s) + abs(tr[k] - a_tr - s) < DEDUP_TOL:
                    dup = True
                    break
            if dup:
                break
        if not dup:
            accepted.append((ti[k], tr[k]))
    return [_make_point(p, tgt, q, a_ti, a_tr) for a_ti, a_tr in accepted]


def _apply_param(p, q, name, value):
    if name == "q":
        return p, value
    if name == "phi":
        return p.with_phi(value), q
    if name == "R":
        return p.with_ratio(value), q
    raise ValueError(f"unknown continuation parameter {name!r}")


def continue_in(p: FieldParams, tgt: TargetParams, q, saddles, parameter, to_value,
                max_halvings=10, tol=RESIDUAL_TOL):
    """Homotopy continuation of a converged saddle list in q, phi, or R.

    Branch identity is positional: the output list matches the input order.
    The step is halved on divergence (or on an unphysically large jump); a
    branch that cannot be recovered after ``max_halvings`` raises
    :class:`BranchLostError` with the last good point.  Branches that end
    within the dedup tolerance of each other are flagged as collided.
    """
    start = {"q": q, "phi": p.phi, "R": p.R}[parameter]
    if to_value == start:
        return list(saddles)
    t_period = p.period
    out = []
    for idx, sp in enumerate(saddles):
        cur_val = start
        cur = sp
        step = to_value - start
        halvings = 0
        while cur_val != to_value:
            nxt = cur_val + step
            if (step > 0 and nxt > to_value) or (step < 0 and nxt < to_value):
                nxt = to_value
            p2, q2 = _apply_param(p, q, parameter, nxt)
            try:
                cand = newton_solve(p2, tgt, q2, cur.ti, cur.tr, tol=tol)
                jump = abs(cand.ti - cur.ti)
                if jump > 0.25 * t_period:
                    raise NoConvergenceError("branch jump during continuation")
            except (NoConvergenceError, CoalescenceError):
                halvings += 1
                if halvings > max_halvings:
                    raise BranchLostError(
                        f"branch {idx} lost continuing {parameter} -> {to_value} "
                        f"(stalled at {cur_val})", cur, cur_val)
                step *= 0.5
                continue
            cur = cand
            cur_val = nxt
        out.append(cur)
    # flag coalescences among the continued branches
    flagged = list(out)
    for i in range(len(out)):
        for k in range(i + 1, len(out)):
            if (abs(out[i].ti - out[k].ti) + abs(out[i].tr - out[k].tr)) < DEDUP_TOL:
                msg = f"branch collision between continued branches {i} and {k}"
                flagged[i] = replace(flagged[i], warning=msg)
                flagged[k] = replace(flagged[k], warning=msg)
    return flagged
