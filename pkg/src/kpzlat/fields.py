"""Fluctuation fields of lattice ensembles and their martingale decomposition.

All fields pair the centered configuration with a periodic test function
evaluated along the moving frame: ``phi^n_j(t) = phi((j - f_n t)/n)``.
Discrete calculus follows the standard lattice conventions::

    grad_n phi_j = (n/2) (phi_{j+1} - phi_{j-1})
    lap_n  phi_j = n^2 (phi_{j+1} + phi_{j-1} - 2 phi_j)

Time integrals of field statistics decorrelate on the microscopic O(1)
timescale, so they are accumulated online by integrator observers (trapezoid
on the observation grid); an offline path over recorded snapshots exists for
small systems and cross-checks.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import tensors
from .gibbs import site_stats


def phi_lattice(phi, n, f_n, t):
    """Values of the moving-frame test function on the lattice at macro time t."""
    j = np.arange(n)
    return phi((j - f_n * t) / n)


def field_x(u, phi_values, center=0.0):
    """X^{n,i}_t = n^{-1/2} sum_j (u^i_j - c_i) phi^n_j for every species."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-2]
    return np.einsum("...jd,j->...d", u - center, phi_values) / math.sqrt(n)


def field_w(w, phi_values, lam):
    """Same pairing for the centered gradient field W - lam."""
    return field_x(w, phi_values, center=np.asarray(lam, dtype=float))


def local_average(values, ell, axis=-1):
    """Forward block average over ``ell`` sites with wraparound.

    Entry ``j`` becomes ``(1/ell) sum_{k=0}^{ell-1} v_{j+k}``.
    """
    ell = int(ell)
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    if ell < 1 or ell > v.shape[-1]:
        raise ValueError(f"window {ell} outside 1..{v.shape[-1]}")
    if ell == 1:
        return np.asarray(values, dtype=float).copy()
    ext = np.concatenate([v, v[..., : ell - 1]], axis=-1)
    cs = np.cumsum(ext, axis=-1)
    out = np.empty_like(v)
    out[..., 0] = cs[..., ell - 1]
    out[..., 1:] = cs[..., ell:] - cs[..., : v.shape[-1] - 1]
    return np.moveaxis(out / ell, -1, axis)


def estimate_center(system):
    """Per-species mean of the site marginal used for field centering.

    Deterministic quadrature for d <= 2, weighted sampling otherwise; the
    tilt itself is deliberately not used because the marginal mean departs
    from it at finite beta.
    """
    mean, _ = site_stats(system.measure)
    return mean


# ---------------------------------------------------------------------------
# quadratic variation


def qv_shift_rate(phi, n, shift):
    """n * sum_j (phi^n_j - phi^n_{j-1})^2 at a given frame shift (lattice units)."""
    j = np.arange(n)
    vals = phi((j - shift) / n)
    diff = vals - np.roll(vals, 1)
    return n * float(np.sum(diff * diff))


def qv_estimate(phi, n, f_n, t=1.0):
    """Quadratic-variation rate integrated over [0, t].

    The integrand is periodic in the frame shift with period one lattice
    unit; for band-limited test functions (bandwidth < n/2) it is constant,
    which the probe detects, making the value exact.  Otherwise the shift
    average over one period is used (the sub-period remainder is O(1/f_n)).
    """
    probes = np.array([qv_shift_rate(phi, n, v) for v in np.linspace(0.0, 1.0, 17)])
    top = float(np.max(np.abs(probes)))
    if top == 0.0:
        return 0.0
    if float(np.ptp(probes)) <= 1e-12 * top:
        return t * float(probes[0])
    fine = np.array([qv_shift_rate(phi, n, v) for v in np.linspace(0.0, 1.0, 257)])
    # composite trapezoid over one period; endpoints coincide by periodicity
    return t * float(np.mean(fine[:-1]))


# ---------------------------------------------------------------------------
# small-noise expansion of the gradient field


def taylor_remainder_stat(potential, n, samples, gamma=None, delta=None):
    """Worst normalized remainder of the cubic expansion of ``grad V_beta``.

    For each sampled site vector ``u`` the remainder
    ``W - u - n^{-1/2} g(u,u) - n^{-1} q(u,u,u)`` is weighted by
    ``n^{3/2} exp(-2 gamma_v |u|_1)``; the max over samples is returned.
    Exactly zero (to roundoff) for potentials that are quartic polynomials.
    """
    from .potentials import rescale

    if gamma is None or delta is None:
        gamma, delta = tensors.gamma_delta(potential)
    samples = np.asarray(samples, dtype=float)
    beta = float(n) ** -0.5
    w = rescale(potential, beta).gradient(samples)
    pred = samples + beta * np.einsum("abc,rb,rc->ra", gamma, samples, samples)
    pred += beta * beta * np.einsum("abcd,rb,rc,rd->ra", delta, samples, samples, samples)
    resid = np.max(np.abs(w - pred), axis=1)
    weight = np.exp(-2.0 * potential.gamma_v * np.sum(np.abs(samples), axis=1))
    return float(np.max(resid * weight) * float(n) ** 1.5)


# ---------------------------------------------------------------------------
# online accumulation


class TimeIntegralObserver:
    """Trapezoid-accumulates a per-replica integrand along the run.

    ``integrand(t, u, w) -> (R,)``.  Tracks the running integral, its
    pathwise sup of absolute value, and snapshots at requested times.
    """

    def __init__(self, integrand, record_times=()):
        self.integrand = integrand
        self.targets = sorted(float(t) for t in record_times)
        self._next = 0
        self._prev_t = None
        self._prev_f = None
        self.integral = None
        self.sup_abs = None
        self.series_times = []
        self.series = []

    def observe(self, step, t, u, w):
        f = np.asarray(self.integrand(t, u, w), dtype=float)
        if self._prev_t is None:
            self.integral = np.zeros_like(f)
            self.sup_abs = np.zeros_like(f)
        else:
            self.integral = self.integral + 0.5 * (f + self._prev_f) * (t - self._prev_t)
            np.maximum(self.sup_abs, np.abs(self.integral), out=self.sup_abs)
        self._prev_t = t
        self._prev_f = f
        while self._next < len(self.targets) and t >= self.targets[self._next] - 1e-12:
            self.series_times.append(t)
            self.series.append(self.integral.copy())
            self._next += 1

    def extend(self, other):
        self.integral = np.concatenate([self.integral, other.integral])
        self.sup_abs = np.concatenate([self.sup_abs, other.sup_abs])
        self.series = [np.concatenate([a, b]) for a, b in zip(self.series, other.series)]


class DecompositionObserver:
    """Accumulates every term of the field decomposition for all species.

    At each snapshot time the observer stores the field ``X`` together with
    the running integrals of the symmetric part ``S`` (lattice-Laplacian
    pairing of the centered gradient field), the quadratic part ``B``
    (nearest-neighbour gradient-field product contracted with the cubic
    tensor), and the exact Dynkin drift ``D``.  The martingale and remainder
    follow as ``M = X - X0 - D`` and ``Rres = D - S - B``.
    """

    def __init__(self, phi, system, f_n, center, record_times):
        self.phi = phi
        self.phi_prime = phi.derivative()
        self.system = system
        self.f_n = float(f_n)
        self.center = np.asarray(center, dtype=float)
        self.gamma, _ = tensors.gamma_delta(system.potential)
        self.targets = sorted(float(t) for t in record_times)
        self._next = 0
        self._prev = None
        self.x0 = None
        self.rows = []  # (t, X, S, B, D) with arrays (R, d)

    def _integrands(self, t, u, w):
        n = self.system.n
        j = np.arange(n)
        x = (j - self.f_n * t) / n
        vals = self.phi(x)
        dvals = self.phi_prime(x)
        up = np.roll(vals, -1)
        dn = np.roll(vals, 1)
        lap = n * n * (up + dn - 2.0 * vals)
        grad_n = 0.5 * n * (up - dn)
        fwd = up - vals
        wbar = w - self.system.lam
        ubar = u - self.center
        sqrt_n = math.sqrt(n)
        x_now = np.einsum("rjd,j->rd", ubar, vals) / sqrt_n
        s_int = np.einsum("rjd,j->rd", wbar, lap) / (2.0 * sqrt_n)
        wprev = np.roll(wbar, 1, axis=1)
        b_int = np.einsum("iab,rja,rjb,j->ri", self.gamma, wprev, wbar, grad_n)
        d_int = n ** 1.5 * np.einsum("rjd,j->rd", wbar, fwd)
        d_int -= (self.f_n / n ** 1.5) * np.einsum("rjd,j->rd", ubar, dvals)
        return x_now, s_int, b_int, d_int

    def observe(self, step, t, u, w):
        x_now, s_int, b_int, d_int = self._integrands(t, u, w)
        if self._prev is None:
            shape = s_int.shape
            self.s = np.zeros(shape)
            self.b = np.zeros(shape)
            self.dd = np.zeros(shape)
            self.x0 = x_now.copy()
        else:
            pt, ps, pb, pd = self._prev
            h = t - pt
            self.s += 0.5 * (s_int + ps) * h
            self.b += 0.5 * (b_int + pb) * h
            self.dd += 0.5 * (d_int + pd) * h
        self._prev = (t, s_int, b_int, d_int)
        while self._next < len(self.targets) and t >= self.targets[self._next] - 1e-12:
            self.rows.append((t, x_now.copy(), self.s.copy(), self.b.copy(), self.dd.copy()))
            self._next += 1

    def extend(self, other):
        self.x0 = np.concatenate([self.x0, other.x0])
        self.rows = [
            (ta, *(np.concatenate([p, q]) for p, q in zip(rest_a, rest_b)))
            for (ta, *rest_a), (_, *rest_b) in zip(self.rows, other.rows)
        ]

    def result(self):
        times = np.array([row[0] for row in self.rows])
        x = np.stack([row[1] for row in self.rows])
        s = np.stack([row[2] for row in self.rows])
        b = np.stack([row[3] for row in self.rows])
        d = np.stack([row[4] for row in self.rows])
        m = x - self.x0[None] - d
        resid = d - s - b
        return DecompositionResult(times=times, x=x, x0=self.x0, s=s, b=b, m=m, resid=resid)


@dataclass
class DecompositionResult:
    """Arrays indexed (time, replica, species)."""

    times: np.ndarray
    x: np.ndarray
    x0: np.ndarray
    s: np.ndarray
    b: np.ndarray
    m: np.ndarray
    resid: np.ndarray

    TERMS = ("X", "S", "B", "M", "R")

    def term(self, name):
        return {"X": self.x, "S": self.s, "B": self.b, "M": self.m, "R": self.resid}[name]


def decomposition_terms(trajectory, phi, system, f_n, center):
    """Offline decomposition from recorded snapshots (small systems only).

    Replays the observer over the stored states; the trapezoid rule runs on
    the recording grid, so the recording density must resolve the
    microscopic decorrelation time for the integrals to be trustworthy.
    """
    obs = DecompositionObserver(phi, system, f_n, center, record_times=trajectory.times)
    pot = system.pot_beta
    for k, t in enumerate(trajectory.times):
        u = trajectory.states[k]
        obs.observe(k, float(t), u, pot.gradient(u))
    return obs.result()


class PairReplacementObserver(TimeIntegralObserver):
    """Integrand of the block-average replacement gap for one species pair.

    ``sum_j (Wbar^{a}_{j-1} Wbar^{b}_j - avg_ell(Wbar^a)_j avg_ell(Wbar^b)_j)
    phi^n_j`` — the object whose time integral the second-order replacement
    bound controls.
    """

    def __init__(self, phi, system, f_n, pair, ell, record_times=()):
        self.phi = phi
        self.system = system
        self.f_n = float(f_n)
        self.pair = pair
        self.ell = int(ell)
        super().__init__(self._compute, record_times)

    def _compute(self, t, u, w):
        a, b = self.pair
        n = self.system.n
        vals = phi_lattice(self.phi, n, self.f_n, t)
        wbar = w - self.system.lam
        wa = wbar[:, :, a]
        wb = wbar[:, :, b]
        raw = np.roll(wa, 1, axis=1) * wb
        avg_a = local_average(wa, self.ell, axis=1)
        avg_b = avg_a if a == b else local_average(wb, self.ell, axis=1)
        return np.einsum("rj,j->r", raw - avg_a * avg_b, vals)


class QuadraticFieldObserver(TimeIntegralObserver):
    """Running integral of the block-averaged quadratic field for one pair.

    ``A^eps_t = int_0^t sum_j avg_{eps n}(ubar^a)_j avg_{eps n}(ubar^b)_j
    grad_n phi^n_j ds``.
    """

    def __init__(self, phi, system, f_n, pair, eps, center, record_times=()):
        self.phi = phi
        self.system = system
        self.f_n = float(f_n)
        self.pair = pair
        self.ell = max(1, int(round(eps * system.n)))
        self.center = np.asarray(center, dtype=float)
        super().__init__(self._compute, record_times)

    def _compute(self, t, u, w):
        a, b = self.pair
        n = self.system.n
        j = np.arange(n)
        vals = self.phi((j - self.f_n * t) / n)
        grad_n = 0.5 * n * (np.roll(vals, -1) - np.roll(vals, 1))
        ubar = u - self.center
        avg_a = local_average(ubar[:, :, a], self.ell, axis=1)
        avg_b = avg_a if a == b else local_average(ubar[:, :, b], self.ell, axis=1)
        return np.einsum("rj,j->r", avg_a * avg_b, grad_n)


@dataclass
class BgSweepRow:
    ell: int
    statistic: float
    stderr: float


def bg_sweep_rows(observers):
    """Summarize replacement observers into ``E[sup_t |integral|^2]`` rows."""
    rows = []
    for ob in observers:
        sup_sq = ob.sup_abs ** 2
        r = len(sup_sq)
        rows.append(
            BgSweepRow(
                ell=ob.ell,
                statistic=float(np.mean(sup_sq)),
                stderr=float(np.std(sup_sq, ddof=1) / math.sqrt(r)) if r > 1 else 0.0,
            )
        )
    return rows
