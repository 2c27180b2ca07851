"""Conic decay estimation of |V_psi u| and wave front classification.

Per direction omega on the phase-space unit sphere, shell suprema

    s(r) = max { |V|(p) : |p| in [r(1-h), r(1+h)], angle(p, omega) <= delta }

are fitted with log s(r) ~ C - eps * r^(1/theta) by least squares; a
direction is regular when the fitted decay rate clears eps_min with an
acceptable residual (or when everything beyond the first shell sits under
the noise floor, the +inf sentinel).  For d = 1 the suprema are taken
over the materialized STFT lattice; for d = 2 shells are sampled with
quasi-random point queries instead (no 4-d field is materialized).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (ConeSet, DetectConfig, DetectionError, GridSpec,
                   SampledSignal, WaveFrontReport, classify, default_config,
                   unit_vector, validate_signal, window_from_tag, worker_count)
from .transform import STFTField, stft_direct_batch, stft_field

__all__ = [
    "DecayProfile", "DecayFit", "MatchResult",
    "circle_directions", "fibonacci_sphere_s3",
    "ray_profile", "fit_decay", "detect_wf", "detect_from_magnitude",
    "compare_wf",
]


def circle_directions(n: int) -> np.ndarray:
    """n uniformly spaced unit directions on the phase-space circle."""
    ang = 2.0 * math.pi * np.arange(n) / n
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


_PLASTIC4 = 1.2207440846057596  # positive root of x^4 = x + 1


def fibonacci_sphere_s3(n: int) -> np.ndarray:
    """Quasi-uniform points on S^3 via a Kronecker sequence + Shoemake map."""
    alpha = np.array([1.0 / _PLASTIC4, 1.0 / _PLASTIC4 ** 2, 1.0 / _PLASTIC4 ** 3])
    k = np.arange(1, n + 1)[:, None]
    u = np.mod(0.5 + k * alpha[None, :], 1.0)
    s1, s2 = np.sqrt(1.0 - u[:, 0]), np.sqrt(u[:, 0])
    t1, t2 = 2.0 * math.pi * u[:, 1], 2.0 * math.pi * u[:, 2]
    return np.stack([s1 * np.sin(t1), s1 * np.cos(t1),
                     s2 * np.sin(t2), s2 * np.cos(t2)], axis=1)


@dataclass(frozen=True, eq=False)
class DecayProfile:
    """Shell suprema of |V| along one direction."""

    omega: np.ndarray
    radii: np.ndarray      # surviving shell centers
    suprema: np.ndarray
    counts: np.ndarray     # sample points per surviving shell
    dropped: tuple         # radii dropped for holding < 3 lattice points
    field_max: float       # global max |V|, the noise-floor reference


@dataclass(frozen=True)
class DecayFit:
    eps_hat: float     # >= 0, or +inf when the tail is below the floor
    c_hat: float       # log amplitude
    residual: float    # RMS of the log-model misfit
    used: int          # radii that entered the regression


class InsufficientSpanError(DetectionError):
    pass


# ---------------------------------------------------------------------------
# d = 1: lattice shells over the materialized field

_sector_cache: dict = {}


def _sector_key(grid: GridSpec, cfg: DetectConfig):
    return (grid.d, grid.L, grid.n, cfg.pad, cfg.n_dir, round(cfg.delta, 15),
            cfg.radii, cfg.shell_width)


def boundary_cut(grid: GridSpec) -> float:
    """Phase-space extent read by shells: max(|x|, |xi|) <= L - margin.

    Near |x| = L the translated window is visibly truncated, which floors
    |V| of non-decaying signals with O(psi(L - x)/xi) ripple; a margin of
    5 window widths keeps that ripple under the detector's working range.
    The same cut is applied to |xi| so that every direction sees the same
    truncated radial schedule (detector isotropy).
    """
    return grid.L - min(5.0, grid.L / 3.0)


def _build_sectors(grid: GridSpec, cfg: DetectConfig):
    """Flat lattice indices per (direction, shell), computed once per config."""
    key = _sector_key(grid, cfg)
    hit = _sector_cache.get(key)
    if hit is not None:
        return hit
    n, N = grid.n, cfg.pad * grid.n
    x = grid.axis()
    xi = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(N, d=grid.delta))
    X, XI = np.meshgrid(x, xi, indexing="ij")
    cut = boundary_cut(grid)
    inside = (np.abs(X) <= cut) & (np.abs(XI) <= cut)
    rad = np.where(inside, np.hypot(X, XI), -1.0).ravel()
    ang = np.arctan2(XI, X).ravel() % (2.0 * math.pi)
    order = np.argsort(ang, kind="stable")
    ang_sorted = ang[order]
    rad_sorted = rad[order]
    h = cfg.shell_width
    sectors = []
    for k in range(cfg.n_dir):
        alpha = 2.0 * math.pi * k / cfg.n_dir
        lo, hi = alpha - cfg.delta - 1e-12, alpha + cfg.delta + 1e-12
        segs = []
        for a, b in ((lo, hi),):
            if a < 0:
                segs += [(a + 2 * math.pi, 2 * math.pi), (0.0, b)]
            elif b > 2 * math.pi:
                segs += [(a, 2 * math.pi), (0.0, b - 2 * math.pi)]
            else:
                segs.append((a, b))
        idx = np.concatenate([
            order[np.searchsorted(ang_sorted, a):np.searchsorted(ang_sorted, b, "right")]
            for a, b in segs]) if segs else np.empty(0, dtype=int)
        r_sec = rad[idx]
        shells = []
        for r in cfg.radii:
            m = (r_sec >= r * (1 - h)) & (r_sec <= r * (1 + h))
            shells.append(idx[m])
        sectors.append(shells)
    _sector_cache[key] = sectors
    return sectors


def ray_profile(F: STFTField, omega, cfg: DetectConfig) -> DecayProfile:
    """Shell suprema for one direction of a d = 1 field."""
    if F.grid.d != 1:
        raise DetectionError("ray_profile reads materialized d = 1 fields")
    cfg.check_grid(F.grid)
    omega = unit_vector(omega)
    mag = F.magnitude().ravel()
    sectors = _build_sectors(F.grid, cfg)
    # locate the direction on the detector's angle grid (or build ad hoc)
    alpha = math.atan2(omega[1], omega[0]) % (2.0 * math.pi)
    k = int(round(alpha / (2.0 * math.pi / cfg.n_dir))) % cfg.n_dir
    if abs((2.0 * math.pi * k / cfg.n_dir) - alpha) > 1e-9:
        shells = _adhoc_shells(F.grid, cfg, alpha)
    else:
        shells = sectors[k]
    return _profile_from_shells(omega, mag, shells, cfg)


def _adhoc_shells(grid: GridSpec, cfg: DetectConfig, alpha: float):
    n, N = grid.n, cfg.pad * grid.n
    x = grid.axis()
    xi = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(N, d=grid.delta))
    X, XI = np.meshgrid(x, xi, indexing="ij")
    cut = boundary_cut(grid)
    inside = (np.abs(X) <= cut) & (np.abs(XI) <= cut)
    rad = np.where(inside, np.hypot(X, XI), -1.0).ravel()
    ang = np.arctan2(XI, X).ravel()
    dist = np.abs((ang - alpha + math.pi) % (2.0 * math.pi) - math.pi)
    sel = np.flatnonzero(dist <= cfg.delta + 1e-12)
    h = cfg.shell_width
    out = []
    for r in cfg.radii:
        m = (rad[sel] >= r * (1 - h)) & (rad[sel] <= r * (1 + h))
        out.append(sel[m])
    return out


def _profile_from_shells(omega, mag, shells, cfg) -> DecayProfile:
    radii, sups, counts, dropped = [], [], [], []
    for r, idx in zip(cfg.radii, shells):
        if idx.size < 3:
            dropped.append(float(r))
            continue
        radii.append(float(r))
        sups.append(float(mag[idx].max()))
        counts.append(int(idx.size))
    if not radii:
        raise DetectionError("cone unresolvable: every shell lost its lattice points")
    return DecayProfile(
        omega=np.asarray(omega, dtype=float), radii=np.array(radii),
        suprema=np.array(sups), counts=np.array(counts, dtype=int),
        dropped=tuple(dropped), field_max=float(mag.max()))


# ---------------------------------------------------------------------------
# decay fit


def fit_decay(p: DecayProfile, cfg: DetectConfig) -> DecayFit:
    """Least squares of log s(r) against {1, -r^(1/theta)}.

    +inf sentinel when every shell beyond the first is under the noise
    floor (log-regression on underflowed values is meaningless); at least
    4 usable radii are required otherwise.
    """
    if p.radii.size == 0:
        raise DetectionError("empty decay profile")
    floor_abs = cfg.floor * p.field_max
    if p.field_max == 0.0 or np.all(p.suprema[1:] <= floor_abs):
        return DecayFit(math.inf, -math.inf, 0.0, 0)
    usable = p.suprema > floor_abs
    m = int(np.count_nonzero(usable))
    if m < 4:
        raise InsufficientSpanError(
            f"only {m} shells above the noise floor; need at least 4")
    r = p.radii[usable]
    y = np.log(p.suprema[usable])
    t = -(r ** (1.0 / cfg.theta))
    A = np.stack([np.ones_like(t), t], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    c_hat, eps_hat = float(coef[0]), float(coef[1])
    if eps_hat < 0.0:
        eps_hat = 0.0
        c_hat = float(np.mean(y))
    resid = y - (c_hat + eps_hat * t)
    return DecayFit(eps_hat, c_hat, float(np.sqrt(np.mean(resid ** 2))), m)


# ---------------------------------------------------------------------------
# detection


def _absorb_gaps(singular: np.ndarray, d: int) -> np.ndarray:
    """Close 1-step regular gaps inside singular arcs (circular, d = 1)."""
    if d != 1 or singular.size == 0:
        return singular
    out = singular.copy()
    n = singular.size
    prev_ = np.roll(singular, 1)
    next_ = np.roll(singular, -1)
    out |= prev_ & next_
    return out


def _arcs_from_mask(mask: np.ndarray, n_dir: int) -> tuple:
    """Contiguous singular index runs as (start, end) angles, circularly."""
    if not mask.any():
        return ()
    if mask.all():
        return ((0.0, 2.0 * math.pi),)
    step = 2.0 * math.pi / n_dir
    idx = np.flatnonzero(mask)
    # break into circular runs
    runs = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i == prev + 1:
            prev = i
            continue
        runs.append((start, prev))
        start = prev = i
    runs.append((start, prev))
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == mask.size - 1:
        first, last = runs[0], runs.pop()
        runs[0] = (last[0], first[1] + mask.size)
    return tuple((step * a, step * b) for a, b in runs)


def detect_from_magnitude(mag: np.ndarray, grid: GridSpec,
                          cfg: DetectConfig) -> WaveFrontReport:
    """Run the d = 1 classification pipeline on a |V| lattice array."""
    cfg.check_grid(grid)
    sectors = _build_sectors(grid, cfg)
    flat = mag.ravel()
    fmax = float(flat.max())
    omegas = circle_directions(cfg.n_dir)
    eps = np.empty(cfg.n_dir)
    c = np.empty(cfg.n_dir)
    res = np.empty(cfg.n_dir)
    used = np.empty(cfg.n_dir, dtype=int)
    for k in range(cfg.n_dir):
        prof = _profile_from_shells(omegas[k], flat, sectors[k], cfg)
        fit = fit_decay(prof, cfg)
        eps[k], c[k], res[k], used[k] = fit.eps_hat, fit.c_hat, fit.residual, fit.used
    classes = tuple(classify(eps[k], res[k], cfg) for k in range(cfg.n_dir))
    mask = np.array([cl == "singular" for cl in classes])
    absorbed = _absorb_gaps(mask, 1)
    sing = ConeSet(omegas[absorbed], math.pi / cfg.n_dir)
    arcs = _arcs_from_mask(absorbed, cfg.n_dir)
    return WaveFrontReport(config=cfg, d=1, omegas=omegas, eps_hat=eps,
                           c_hat=c, residual=res, used=used, classes=classes,
                           singular=sing, arcs=arcs)


def _detect_d2(u: SampledSignal, cfg: DetectConfig) -> WaveFrontReport:
    """Point-query backend: shells sampled quasi-randomly via stft_direct."""
    grid = u.grid
    window = window_from_tag(grid, cfg.window)
    omegas = fibonacci_sphere_s3(cfg.n_dir)
    h = cfg.shell_width
    mseq = _PLASTIC4  # reuse the Kronecker generator for shell samples
    alpha4 = np.array([1.0 / mseq, 1.0 / mseq ** 2, 1.0 / mseq ** 3, 1.0 / mseq ** 4])
    P = cfg.shell_samples
    pts_per_dir = len(cfg.radii) * (P + 1)
    all_pts = np.empty((cfg.n_dir * pts_per_dir, 4))
    keep = np.empty(cfg.n_dir * pts_per_dir, dtype=bool)
    cut = boundary_cut(u.grid)
    row = 0
    for k in range(cfg.n_dir):
        w = omegas[k]
        # tangent frame at w
        basis = []
        for e in np.eye(4):
            v = e - (e @ w) * w
            for bvec in basis:
                v -= (v @ bvec) * bvec
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                basis.append(v / nv)
            if len(basis) == 3:
                break
        E = np.stack(basis, axis=0)
        for ri, r in enumerate(cfg.radii):
            seq = np.mod(0.5 + (np.arange(1, P + 1)[:, None]
                                + 31 * k + 7 * ri) * alpha4[None, :], 1.0)
            rho = r * (1 - h + 2 * h * seq[:, 0])
            angs = cfg.delta * np.sqrt(seq[:, 1])
            z = 2.0 * seq[:, 2] - 1.0
            phi = 2.0 * math.pi * seq[:, 3]
            tang = (np.sqrt(1 - z ** 2)[:, None]
                    * (np.cos(phi)[:, None] * E[0] + np.sin(phi)[:, None] * E[1])
                    + z[:, None] * E[2])
            p = rho[:, None] * (np.cos(angs)[:, None] * w + np.sin(angs)[:, None] * tang)
            all_pts[row] = r * w  # axis anchor
            all_pts[row + 1:row + 1 + P] = p
            block = all_pts[row:row + 1 + P]
            keep[row:row + 1 + P] = np.max(np.abs(block), axis=1) <= cut
            row += P + 1
    vals = np.empty(all_pts.shape[0])
    workers = worker_count()
    chunks = np.array_split(np.arange(all_pts.shape[0]), max(1, workers * 4))

    def job(ix):
        return ix, np.abs(stft_direct_batch(u, window, all_pts[ix]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for ix, v in pool.map(job, chunks):
                vals[ix] = v
    else:
        for ix in chunks:
            vals[ix] = np.abs(stft_direct_batch(u, window, all_pts[ix]))
    vals[~keep] = 0.0  # samples outside the boundary cut do not count
    fmax = float(vals.max())
    eps = np.empty(cfg.n_dir)
    c = np.empty(cfg.n_dir)
    res = np.empty(cfg.n_dir)
    used = np.empty(cfg.n_dir, dtype=int)
    nr = len(cfg.radii)
    for k in range(cfg.n_dir):
        block = vals[k * pts_per_dir:(k + 1) * pts_per_dir].reshape(nr, P + 1)
        kblock = keep[k * pts_per_dir:(k + 1) * pts_per_dir].reshape(nr, P + 1)
        counts = kblock.sum(axis=1)
        ok = counts >= 3
        if not np.any(ok):
            raise DetectionError("cone unresolvable: all shells outside the boundary cut")
        prof = DecayProfile(
            omega=omegas[k], radii=np.array(cfg.radii)[ok],
            suprema=block.max(axis=1)[ok],
            counts=counts[ok],
            dropped=tuple(np.array(cfg.radii)[~ok]), field_max=fmax)
        fit = fit_decay(prof, cfg)
        eps[k], c[k], res[k], used[k] = fit.eps_hat, fit.c_hat, fit.residual, fit.used
    classes = tuple(classify(eps[k], res[k], cfg) for k in range(cfg.n_dir))
    mask = np.array([cl == "singular" for cl in classes])
    sing = ConeSet(omegas[mask], math.pi / cfg.n_dir)
    return WaveFrontReport(config=cfg, d=2, omegas=omegas, eps_hat=eps,
                           c_hat=c, residual=res, used=used, classes=classes,
                           singular=sing, arcs=())


def detect_wf(u: SampledSignal, cfg: DetectConfig | None = None) -> WaveFrontReport:
    """Classify every detector direction of u and assemble the report."""
    validate_signal(u)
    if cfg is None:
        cfg = default_config(u.grid)
    cfg.check_grid(u.grid)
    if u.grid.d == 2:
        return _detect_d2(u, cfg)
    window = window_from_tag(u.grid, cfg.window)
    F = stft_field(u, window, pad=cfg.pad)
    return detect_from_magnitude(F.magnitude(), u.grid, cfg)


# ---------------------------------------------------------------------------
# comparison metric


@dataclass(frozen=True)
class MatchResult:
    detected_to_expected: float
    expected_to_detected: float
    passed: bool


def compare_wf(report: WaveFrontReport | np.ndarray, expected: ConeSet,
               tol: float) -> MatchResult:
    """One-sided angular Hausdorff distances between detected directions
    and an expected cone set.

    detected -> expected measures how far spurious detections stray from
    the expected cones (aperture-deflated); expected -> detected measures
    whether every prescribed direction was found.
    """
    detected = (report.singular_directions()
                if isinstance(report, WaveFrontReport) else np.atleast_2d(report))
    if detected.size == 0 and expected.empty:
        return MatchResult(0.0, 0.0, True)
    if detected.size == 0:
        return MatchResult(0.0, math.inf, False)
    if expected.empty:
        return MatchResult(math.inf, 0.0, False)
    d_ab = max(expected.distance(v) for v in detected)
    exp_dirs = expected.directions
    cosang = np.clip(exp_dirs @ detected.T, -1.0, 1.0)
    d_ba = float(np.max(np.min(np.arccos(cosang), axis=1)))
    return MatchResult(float(d_ab), d_ba, bool(max(d_ab, d_ba) <= tol))
