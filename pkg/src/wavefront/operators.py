"""Operators acting on sampled signals and their wave-front maps.

Symplectic generators (Fourier transform, chirp multiplication, dilation,
conjugation), the free Schrodinger flow, products / convolutions / tensor
products, polynomial-coefficient differential operators with principal
symbols and characteristic sets, and localization (anti-Wick) operators
realized as V* (a . V u).

The Fourier transform is the true quadrature transform evaluated on the
same spatial grid (Bluestein chirp-z), so Gaussians are honest fixed
points; it represents the continuum transform faithfully for signals that
decay inside the grid.  Spectral derivatives use the periodic FFT lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ConeSet, DetectConfig, GridSpec, GrowthError,
                   OperatorError, SampledSignal, SignalError, Window,
                   standard_window, unit_vector, window_from_tag)
from .detect import circle_directions, fibonacci_sphere_s3
from .synth import chirp as chirp_signal
from .transform import STFTField, stft_adjoint, stft_field

__all__ = [
    "SymplecticMapSpec", "fourier", "chirp_multiply", "dilate", "conjugate",
    "schrodinger_propagate", "wf_map", "pointwise_product", "convolve",
    "tensor", "product_wf_bound", "PolyOperator", "apply_polyop", "char_set",
    "LocalizationSymbol", "localization_apply", "regularize",
]


# ---------------------------------------------------------------------------
# Fourier transform on the grid (chirp-z quadrature at the grid points)


def _bluestein_axis(u: np.ndarray, grid: GridSpec, axis: int, sigma: float) -> np.ndarray:
    """Quadrature (2pi)^(-1/2) delta sum_m u_m e^{i sigma z_k y_m} at z_k = y_k.

    With z_k y_m = delta^2 km - L delta (k+m) + L^2 the kernel factors as
    a_m b_{k-m} c_k (Bluestein); the linear convolution runs on padded FFTs.
    """
    n, dlt, L = grid.n, grid.delta, grid.L
    m = np.arange(n)
    w = 1j * sigma
    d2 = dlt * dlt
    a_pre = np.exp(-w * L * dlt * m + 0.5 * w * d2 * m * m)
    b = np.exp(-0.5 * w * d2 * np.arange(-(n - 1), n) ** 2)
    nfft = 1 << int(math.ceil(math.log2(3 * n - 2)))
    u_ = np.moveaxis(u, axis, -1)
    A = np.zeros(u_.shape[:-1] + (nfft,), dtype=np.complex128)
    A[..., :n] = u_ * a_pre
    B = np.zeros(nfft, dtype=np.complex128)
    B[:2 * n - 1] = b
    conv = np.fft.ifft(np.fft.fft(A, axis=-1) * np.fft.fft(B), axis=-1)
    core = conv[..., n - 1:2 * n - 1]
    post = np.exp(w * L * L - w * L * dlt * m + 0.5 * w * d2 * m * m)
    out = core * post * dlt / math.sqrt(2.0 * math.pi)
    return np.moveaxis(out, -1, axis)


def fourier(u: SampledSignal, inverse: bool = False) -> SampledSignal:
    """Unitary-convention Fourier transform sampled on the same grid.

    Exact quadrature of the continuum transform at the grid points, so the
    Gaussian is an honest fixed point and the wave front map is the
    literal (x, xi) -> (xi, -x).  It represents the transform faithfully
    for signals whose mass decays inside the grid; norms of
    boundary-truncated signals pick up O(1/L) truncation defects.
    """
    sigma = 1.0 if inverse else -1.0
    vals = u.samples
    for ax in range(u.grid.d):
        vals = _bluestein_axis(vals, u.grid, ax, sigma)
    return u.with_samples(vals, label=f"F[{u.label}]")


# ---------------------------------------------------------------------------
# pointwise symplectic generators


def chirp_multiply(u: SampledSignal, A) -> SampledSignal:
    """Multiply by e^{i<Ax,x>/2}; phase-space shear (x, xi) -> (x, xi + Ax)."""
    c = chirp_signal(u.grid, A)
    return u.with_samples(u.samples * c.samples, label=f"chirp*{u.label}")


def conjugate(u: SampledSignal) -> SampledSignal:
    """Complex conjugation; wave front map (x, xi) -> (x, -xi)."""
    return u.with_samples(np.conj(u.samples), label=f"conj[{u.label}]")


def _check_dilation_matrix(A: np.ndarray, d: int):
    """Classify A as (scalar c) or signed permutation; else reject."""
    if A.shape != (d, d):
        raise OperatorError(f"dilation matrix must be {d}x{d}")
    if np.allclose(A, A[0, 0] * np.eye(d), atol=1e-12):
        c = float(A[0, 0])
        if c == 0.0:
            raise OperatorError("dilation matrix must be invertible")
        if abs(c - round(c)) > 1e-12 or abs(c) < 1:
            raise OperatorError(
                "scalar dilations are restricted to nonzero integers "
                "(off-grid support otherwise)")
        return "scalar", int(round(c))
    P = np.abs(A)
    if (np.all((P == 0) | (P == 1)) and np.all(P.sum(axis=0) == 1)
            and np.all(P.sum(axis=1) == 1)):
        return "signed-permutation", A.astype(int)
    raise OperatorError("dilation supports A = c*I (integer c) or signed "
                        "permutation matrices only")


def dilate(u: SampledSignal, A) -> SampledSignal:
    """A* u(y) = sqrt(|det A|) u(A y), for exactly representable maps.

    |c| = 1 scalars and signed permutations act as exact periodic index
    maps; |c| >= 2 integer scalars zero-fill samples that leave the grid.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    grid = u.grid
    kind, info = _check_dilation_matrix(A, grid.d)
    n = grid.n
    det = abs(np.linalg.det(A))
    scale = math.sqrt(det)
    if kind == "scalar":
        c = info
        idx1 = (1 - c) * (n // 2) + c * np.arange(n)
        if abs(c) == 1:
            idx1 = idx1 % n
            valid1 = np.ones(n, dtype=bool)
        else:
            valid1 = (idx1 >= 0) & (idx1 < n)
            idx1 = np.clip(idx1, 0, n - 1)
        if grid.d == 1:
            out = np.where(valid1, u.samples[idx1], 0.0)
        else:
            out = np.where(np.outer(valid1, valid1),
                           u.samples[np.ix_(idx1, idx1)], 0.0)
        return u.with_samples(scale * out, label=f"dilate[{u.label}]")
    # signed permutation: y -> A y permutes/reflects axes
    S = info
    if grid.d == 1:
        sgn = int(S[0, 0])
        idx = ((1 - sgn) * (n // 2) + sgn * np.arange(n)) % n
        return u.with_samples(u.samples[idx], label=f"dilate[{u.label}]")
    # d = 2: (A y)_i = sum_j S_ij y_j with exactly one nonzero per row
    ar = np.arange(n)
    maps = []
    for i in range(2):
        j = int(np.flatnonzero(S[i]).item())
        sgn = int(S[i, j])
        maps.append((j, ((1 - sgn) * (n // 2) + sgn * ar) % n))
    out = np.empty_like(u.samples)
    I1, I2 = np.meshgrid(ar, ar, indexing="ij")
    src = [None, None]
    src[maps[0][0]] = maps[0][1][I1]
    src[maps[1][0]] = maps[1][1][I2]
    out = u.samples[src[0], src[1]]
    return u.with_samples(out, label=f"dilate[{u.label}]")


def schrodinger_propagate(u: SampledSignal, t: float) -> SampledSignal:
    """Free flow with multiplier e^{-i|xi|^2 t/2}; shear (x,xi)->(x+t xi, xi).

    Under the package's analysis convention (hat u = int u e^{-i xi y} dy)
    this multiplier translates a packet at frequency xi by exactly +t*xi,
    so the stated wave front shear is literal; the half-Laplacian factor
    matches the chirp generators' 1/2-factor convention.
    """
    grid = u.grid
    freqs = 2.0 * math.pi * np.fft.fftfreq(grid.n, d=grid.delta)
    if grid.d == 1:
        mult = np.exp(-0.5j * t * freqs ** 2)
        vals = np.fft.ifft(mult * np.fft.fft(u.samples))
    else:
        K1, K2 = np.meshgrid(freqs, freqs, indexing="ij")
        mult = np.exp(-0.5j * t * (K1 ** 2 + K2 ** 2))
        vals = np.fft.ifft2(mult * np.fft.fft2(u.samples))
    return u.with_samples(vals, label=f"schrodinger({t})[{u.label}]")


# ---------------------------------------------------------------------------
# wave front maps


@dataclass(frozen=True)
class SymplecticMapSpec:
    """kind in {fourier, chirp, dilation, conjugation, schrodinger}."""

    kind: str
    A: tuple | None = None   # chirp / dilation matrix, row tuples
    t: float = 0.0           # schrodinger time

    def matrix(self, d: int, grid: GridSpec | None = None) -> np.ndarray:
        I = np.eye(d)
        Z = np.zeros((d, d))
        if self.kind == "fourier":
            return np.block([[Z, I], [-I, Z]])
        if self.kind == "chirp":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if not np.allclose(A, A.T):
                raise OperatorError("chirp matrix must be symmetric")
            return np.block([[I, Z], [A, I]])
        if self.kind == "dilation":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            return np.block([[np.linalg.inv(A), Z], [Z, A.T]])
        if self.kind == "conjugation":
            return np.block([[I, Z], [Z, -I]])
        if self.kind == "schrodinger":
            return np.block([[I, self.t * I], [Z, I]])
        raise OperatorError(f"unknown symplectic map kind {self.kind!r}")

    def apply(self, u: SampledSignal) -> SampledSignal:
        if self.kind == "fourier":
            return fourier(u)
        if self.kind == "chirp":
            return chirp_multiply(u, np.asarray(self.A, dtype=float))
        if self.kind == "dilation":
            return dilate(u, np.asarray(self.A, dtype=float))
        if self.kind == "conjugation":
            return conjugate(u)
        if self.kind == "schrodinger":
            return schrodinger_propagate(u, self.t)
        raise OperatorError(f"unknown symplectic map kind {self.kind!r}")


def wf_map(expected: ConeSet, m: SymplecticMapSpec, d: int = 1,
           grid: GridSpec | None = None) -> ConeSet:
    """Push a cone set through the linear phase-space map of m.

    The grid is needed for the Fourier map, whose on-grid realization
    carries the dilation factor xi_max / L.
    """
    M = m.matrix(d, grid)
    if expected.empty:
        return expected
    mapped = expected.directions @ M.T
    mapped = np.stack([unit_vector(v) for v in mapped])
    return ConeSet(mapped, expected.aperture)


# ---------------------------------------------------------------------------
# products, convolutions, tensor products


def pointwise_product(u: SampledSignal, v: SampledSignal) -> SampledSignal:
    if u.grid != v.grid:
        raise OperatorError("pointwise product needs matching grids")
    return u.with_samples(u.samples * v.samples, label=f"{u.label}*{v.label}")


def convolve(u: SampledSignal, v: SampledSignal) -> SampledSignal:
    """Linear FFT convolution (2x zero padding), truncated to the grid."""
    if u.grid != v.grid:
        raise OperatorError("convolution needs matching grids")
    grid = u.grid
    n = grid.n
    shape = tuple(2 * n for _ in range(grid.d))
    U = np.fft.fftn(u.samples, s=shape)
    V = np.fft.fftn(v.samples, s=shape)
    full = np.fft.ifftn(U * V)
    # center of the linear convolution: index n/2 aligns y = 0 with 0
    sl = tuple(slice(n // 2, n // 2 + n) for _ in range(grid.d))
    vals = full[sl] * grid.delta ** grid.d
    return u.with_samples(vals, label=f"{u.label}(*){v.label}")


def tensor(u: SampledSignal, v: SampledSignal) -> SampledSignal:
    """u (x) v on the product grid; inputs must be 1-d on equal grids."""
    if u.grid.d != 1 or v.grid.d != 1 or u.grid != v.grid:
        raise OperatorError("tensor product takes two signals on one 1-d grid")
    g2 = GridSpec(d=2, L=u.grid.L, n=u.grid.n)
    vals = np.outer(u.samples, v.samples)
    return SampledSignal(g2, vals, label=f"{u.label}(x){v.label}")


def product_wf_bound(g1: ConeSet, g2: ConeSet, n_dir: int = 360) -> ConeSet:
    """Expected cone bound for a product: {(x, xi+eta)} union both factors.

    Non-degeneracy ((0,xi) in G1 and (0,-xi) in G2) is a warning case for
    sampled functions, reported by the caller; here only the bound is built.
    """
    dirs = []
    ap = max(g1.aperture if not g1.empty else 0.0,
             g2.aperture if not g2.empty else 0.0, math.pi / n_dir)
    for a in g1.directions:
        dirs.append(a)
    for b in g2.directions:
        dirs.append(b)
    d = g1.directions.shape[1] // 2 if not g1.empty else (
        g2.directions.shape[1] // 2 if not g2.empty else 1)
    for a in g1.directions:
        for b in g2.directions:
            x, xi = a[:d], a[d:]
            y, eta = b[:d], b[d:]
            # combined frequencies live over the shared spatial direction;
            # all positive combinations of the two rays are admissible
            for s in (0.25, 0.5, 1.0, 2.0, 4.0):
                w = np.concatenate([x + s * y, xi + s * eta])
                if np.linalg.norm(w) > 1e-12:
                    dirs.append(unit_vector(w))
    if not dirs:
        return ConeSet(np.empty((0, 2)), ap)
    return ConeSet(np.stack(dirs), ap)


# ---------------------------------------------------------------------------
# polynomial-coefficient differential operators


def _normalize_multi(idx, d: int) -> tuple:
    t = tuple(int(i) for i in (idx if isinstance(idx, (tuple, list)) else (idx,)))
    if len(t) != d or any(i < 0 for i in t):
        raise OperatorError(f"multi-index {idx!r} invalid for d = {d}")
    return t


@dataclass(frozen=True, eq=False)
class PolyOperator:
    """p(x, D) = sum c_{alpha beta} x^beta D^alpha, D = -i d/dx."""

    d: int
    coeffs: dict  # (alpha, beta) -> complex

    def __post_init__(self):
        cleaned = {}
        for (al, be), c in self.coeffs.items():
            al = _normalize_multi(al, self.d)
            be = _normalize_multi(be, self.d)
            if c != 0:
                cleaned[(al, be)] = complex(c)
        if not cleaned:
            raise OperatorError("operator has no nonzero coefficients")
        object.__setattr__(self, "coeffs", cleaned)

    @property
    def order(self) -> int:
        return max(sum(al) + sum(be) for al, be in self.coeffs)

    def principal(self) -> dict:
        m = self.order
        return {k: c for k, c in self.coeffs.items()
                if sum(k[0]) + sum(k[1]) == m}

    def principal_symbol(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """p_m(x, xi) on arrays of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(np.broadcast(x[..., 0], xi[..., 0]).shape, dtype=complex)
        for (al, be), c in self.principal().items():
            term = np.full_like(out, c)
            for i in range(self.d):
                if be[i]:
                    term = term * x[..., i] ** be[i]
                if al[i]:
                    term = term * xi[..., i] ** al[i]
            out = out + term
        return out


def D(d: int = 1, axis: int = 0) -> PolyOperator:
    al = tuple(1 if i == axis else 0 for i in range(d))
    ze = (0,) * d
    return PolyOperator(d, {(al, ze): 1.0})


def X(d: int = 1, axis: int = 0) -> PolyOperator:
    be = tuple(1 if i == axis else 0 for i in range(d))
    ze = (0,) * d
    return PolyOperator(d, {(ze, be): 1.0})


def harmonic_oscillator(d: int = 1) -> PolyOperator:
    ze = (0,) * d
    coeffs = {}
    for i in range(d):
        al = tuple(2 if j == i else 0 for j in range(d))
        be = al
        coeffs[(al, ze)] = 1.0
        coeffs[(ze, be)] = 1.0
    return PolyOperator(d, coeffs)


def apply_polyop(P: PolyOperator, u: SampledSignal) -> SampledSignal:
    """Apply p(x, D): D^alpha spectrally, x^beta pointwise."""
    grid = u.grid
    if P.d != grid.d:
        raise OperatorError("operator dimension does not match the signal")
    freqs = 2.0 * math.pi * np.fft.fftfreq(grid.n, d=grid.delta)
    if grid.xi_max ** P.order * max(abs(c) for c in P.coeffs.values()) > 1e280:
        raise OperatorError("operator order overflows double range on this grid")
    ax = grid.axis()
    if grid.d == 1:
        xs = {b: ax ** b for b in {be[0] for _, be in P.coeffs}}
        uhat = np.fft.fft(u.samples)
        derivs = {}
        out = np.zeros_like(u.samples)
        for (al, be), c in P.coeffs.items():
            a = al[0]
            if a not in derivs:
                derivs[a] = np.fft.ifft((freqs ** a) * uhat) if a else u.samples
            out = out + c * xs[be[0]] * derivs[a]
        return u.with_samples(out, label=f"P[{u.label}]")
    K1, K2 = np.meshgrid(freqs, freqs, indexing="ij")
    X1, X2 = np.meshgrid(ax, ax, indexing="ij")
    uhat = np.fft.fft2(u.samples)
    derivs = {}
    out = np.zeros_like(u.samples)
    for (al, be), c in P.coeffs.items():
        if al not in derivs:
            mult = (K1 ** al[0]) * (K2 ** al[1])
            derivs[al] = np.fft.ifft2(mult * uhat) if sum(al) else u.samples
        out = out + c * (X1 ** be[0]) * (X2 ** be[1]) * derivs[al]
    return u.with_samples(out, label=f"P[{u.label}]")


def char_set(P: PolyOperator, n_dir: int = 360, tau: float = 1e-3) -> ConeSet:
    """Directions where the principal symbol (nearly) vanishes on the sphere."""
    dirs = circle_directions(n_dir) if P.d == 1 else fibonacci_sphere_s3(n_dir)
    vals = np.abs(P.principal_symbol(dirs[:, :P.d], dirs[:, P.d:]))
    vmax = float(vals.max())
    if vmax == 0.0:
        raise OperatorError("principal symbol vanishes identically")
    mask = vals <= tau * vmax
    return ConeSet(dirs[mask], 2.0 * math.pi / n_dir)


# ---------------------------------------------------------------------------
# localization (anti-Wick) operators


@dataclass(frozen=True, eq=False)
class LocalizationSymbol:
    """Phase-space symbol, given as a vectorized recipe a(x, xi).

    The growth certificate checks |a| <= C_eps e^{eps(|x|^{1/theta} +
    |xi|^{1/theta})} on the lattice for each eps in the test list, with a
    scale-invariant cap on C_eps.
    """

    recipe: object   # callable (x, xi) -> values, broadcasting over arrays
    name: str = "symbol"

    EPS_LIST = (0.25, 0.5, 1.0)
    CAP = 1e6

    def values(self, F: STFTField) -> np.ndarray:
        x = F.x_axis()
        xi = F.xi_axis()
        if F.grid.d == 1:
            X, XI = np.meshgrid(x, xi, indexing="ij")
            return np.asarray(self.recipe(X, XI))
        X1, X2, XI1, XI2 = np.meshgrid(x, x, xi, xi, indexing="ij")
        return np.asarray(self.recipe(np.stack([X1, X2], -1),
                                      np.stack([XI1, XI2], -1)))

    def certificate(self, grid: GridSpec, theta: float, pad: int = 2) -> dict:
        x = grid.axis()
        xi = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(pad * grid.n, d=grid.delta))
        X, XI = np.meshgrid(x, xi, indexing="ij")
        vals = np.abs(np.asarray(self.recipe(X, XI)))
        rad = np.hypot(X, XI)
        inner = vals[rad <= 1.0]
        ref = float(inner.max()) if inner.size else float(vals.max())
        if ref == 0.0:
            ref = float(vals.max()) or 1.0
        gs = np.abs(X) ** (1.0 / theta) + np.abs(XI) ** (1.0 / theta)
        out = {}
        for eps in self.EPS_LIST:
            c_eps = float(np.max(vals * np.exp(-eps * gs)))
            out[eps] = bool(c_eps <= self.CAP * ref)
        return out

    def check(self, grid: GridSpec, theta: float) -> None:
        cert = self.certificate(grid, theta)
        bad = [e for e, ok in cert.items() if not ok]
        if bad:
            raise GrowthError(
                f"symbol {self.name!r} violates the admissible growth bound "
                f"for eps in {bad}")


def localization_apply(a: LocalizationSymbol, u: SampledSignal,
                       theta: float = 0.75, window: Window | None = None,
                       pad: int = 2) -> SampledSignal:
    """A_a u = V* (a . V u) with the standard window by default."""
    if u.grid.d != 1:
        raise OperatorError("localization operators are realized for d = 1")
    a.check(u.grid, theta)
    g = window if window is not None else standard_window(u.grid)
    F = stft_field(u, g, pad=pad)
    weighted = STFTField(F.grid, F.window, a.values(F) * F.values, F.pad)
    out = stft_adjoint(weighted)
    return u.with_samples(out.samples, label=f"loc[{a.name}]{u.label}")


def gaussian_symbol(eps: float) -> LocalizationSymbol:
    if eps <= 0:
        raise OperatorError(f"regularization strength must be positive, got {eps}")
    return LocalizationSymbol(
        lambda x, xi, e=float(eps): np.exp(-0.5 * e * x ** 2) * np.exp(-0.5 * e * xi ** 2),
        name=f"gauss({eps})")


def regularize(u: SampledSignal, eps: float, theta: float = 0.75) -> SampledSignal:
    """u_eps = A_{a_eps} u with a_eps = e^{-eps|x|^2/2} e^{-eps|xi|^2/2}."""
    return localization_apply(gaussian_symbol(eps), u, theta=theta)
