"""Short-time Fourier transform, its adjoint, and point-query oracle.

Conventions, fixed once for the whole package:

    V_g u(x, xi) = k_g * sum_y u(y) conj(g(y - x)) e^{-i xi.y} delta^d
    k_g          = (2 pi)^(-d/2) / ||g||_2

The xi lattice is the FFT bin lattice of the grid, optionally refined by
an exact zero-padding factor (pad = 2 evaluates the same windowed
quadrature at half-step frequencies; no interpolation is involved).
Translated windows are truncated at the grid edge, never periodized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (GridSpec, SampledSignal, SignalError, Window,
                   WavefrontError, standard_window)

__all__ = [
    "STFTField", "stft_field", "stft_direct", "stft_adjoint",
    "bargmann_view", "parseval_check", "blur_magnitude",
    "write_field", "read_field",
]

_MAX_FIELD_CELLS = 8_000_000


@dataclass(frozen=True, eq=False)
class STFTField:
    """V_g u on the phase-space lattice (x from the grid, xi from FFT bins)."""

    grid: GridSpec
    window: Window
    values: np.ndarray   # d=1: (n, pad*n); d=2: (n, n, pad*n, pad*n)
    pad: int

    @property
    def k_g(self) -> float:
        return self.window.k_g

    def x_axis(self) -> np.ndarray:
        return self.grid.axis()

    def xi_axis(self) -> np.ndarray:
        N = self.pad * self.grid.n
        return np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(N, d=self.grid.delta))

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / (self.pad * self.grid.n * self.grid.delta)

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def value_at(self, x, xi):
        """Field value at a lattice point (snapped within 1e-9)."""
        idx = self._index(x, xi)
        return complex(self.values[idx])

    def _index(self, x, xi):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        xis = np.atleast_1d(np.asarray(xi, dtype=float))
        ax, xax = self.x_axis(), self.xi_axis()
        out = []
        for v in xs:
            i = int(round((v + self.grid.L) / self.grid.delta))
            if not (0 <= i < self.grid.n) or abs(ax[i] - v) > 1e-9:
                raise WavefrontError(f"x = {v} is not on the field lattice")
            out.append(i)
        for v in xis:
            j = int(round((v - xax[0]) / self.dxi))
            if not (0 <= j < xax.size) or abs(xax[j] - v) > 1e-9:
                raise WavefrontError(f"xi = {v} is not on the field lattice")
            out.append(j)
        return tuple(out)


def _window_matrix(g: Window, conjugate: bool) -> np.ndarray:
    """W[i, m] = g((m - i) delta), truncated outside the grid (d = 1)."""
    n = g.grid.n
    samples = np.conj(g.samples) if conjugate else g.samples
    gpad = np.zeros(3 * n, dtype=np.complex128)
    gpad[n:2 * n] = samples
    sw = sliding_window_view(gpad, n)
    starts = n + n // 2 - np.arange(n)
    return sw[starts]


def _phase(grid: GridSpec, pad: int) -> np.ndarray:
    # e^{i xi L} turns the index-space FFT into the quadrature at y = m*delta - L
    N = pad * grid.n
    xi = 2.0 * math.pi * np.fft.fftfreq(N, d=grid.delta)
    return np.exp(1j * xi * grid.L)


def stft_field(u: SampledSignal, g: Window, pad: int | None = None) -> STFTField:
    """Full STFT field via one padded FFT per x slice."""
    if u.grid != g.grid:
        raise SignalError("signal and window live on different grids")
    grid = u.grid
    if pad is None:
        pad = 2 if grid.d == 1 else 1
    scale = g.k_g * grid.delta ** grid.d
    if grid.d == 1:
        W = _window_matrix(g, conjugate=True)
        H = u.samples[None, :] * W
        V = np.fft.fft(H, n=pad * grid.n, axis=1)
        V *= _phase(grid, pad)[None, :] * scale
        V = np.fft.fftshift(V, axes=1)
        return STFTField(grid, g, V, pad)
    # d = 2: one padded 2-d FFT per spatial shift
    n, N = grid.n, pad * grid.n
    if n * n * N * N > _MAX_FIELD_CELLS:
        raise WavefrontError(
            "d=2 field too large to materialize; use stft_direct point queries")
    ph = _phase(grid, pad)
    ph2 = np.outer(ph, ph)
    gs = np.conj(g.samples)
    V = np.empty((n, n, N, N), dtype=np.complex128)
    gp = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    gp[n // 2:n // 2 + n, n // 2:n // 2 + n] = gs
    for i1 in range(n):
        for i2 in range(n):
            block = gp[n - i1:2 * n - i1, n - i2:2 * n - i2]
            H = u.samples * block
            V[i1, i2] = np.fft.fftshift(np.fft.fft2(H, s=(N, N)) * ph2) * scale
    return STFTField(grid, g, V, pad)


def _translated_window(g: Window, x: np.ndarray) -> np.ndarray:
    """conj(g(y - x)) on the grid, truncated where y - x leaves the grid.

    Gaussian windows are evaluated in closed form (required for off-lattice
    x); custom windows are looked up, so x must sit on the lattice.
    """
    grid = g.grid
    pts = grid.points()                       # (n^d, d)
    offs = pts - np.asarray(x, dtype=float)[None, :]
    lo, hi = -grid.L - 1e-9, grid.L - grid.delta + 1e-9
    inside = np.all((offs >= lo) & (offs <= hi), axis=1)
    if g.kind == "custom":
        idx = (offs + grid.L) / grid.delta
        ridx = np.rint(idx)
        if np.any(np.abs(idx[inside] - ridx[inside]) > 1e-6):
            raise SignalError("custom windows require lattice-aligned x")
        vals = np.zeros(pts.shape[0], dtype=np.complex128)
        ii = ridx[inside].astype(int)
        flatidx = ii[:, 0] if grid.d == 1 else ii[:, 0] * grid.n + ii[:, 1]
        vals[inside] = g.samples.reshape(-1)[flatidx]
        return np.conj(vals)
    sq = np.sum(offs ** 2, axis=1)
    sig = 1.0 if g.kind == "standard-gaussian" else float(g.sigma)
    vals = (math.pi ** (-grid.d / 4.0) * sig ** (-grid.d / 2.0)
            * np.exp(-sq / (2.0 * sig ** 2)))
    vals = vals * inside
    return vals.astype(np.complex128)  # real Gaussian: conj is itself


def stft_direct(u: SampledSignal, g: Window, points) -> np.ndarray:
    """Plain-summation STFT at arbitrary phase-space points.

    The independent oracle for stft_field: same quadrature, no FFT.
    points has shape (P, 2d) with rows (x, xi).
    """
    if u.grid != g.grid:
        raise SignalError("signal and window live on different grids")
    grid = u.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 2 * grid.d:
        raise WavefrontError(f"points must have {2 * grid.d} columns")
    y = grid.points()
    uf = u.flat()
    scale = g.k_g * grid.delta ** grid.d
    out = np.empty(pts.shape[0], dtype=np.complex128)
    for p in range(pts.shape[0]):
        x, xi = pts[p, :grid.d], pts[p, grid.d:]
        w = _translated_window(g, x)
        out[p] = scale * np.sum(uf * w * np.exp(-1j * (y @ xi)))
    return out


def stft_direct_batch(u: SampledSignal, g: Window, points,
                      chunk: int = 4096) -> np.ndarray:
    """Vectorized stft_direct for large point sets (Gaussian windows only).

    Exploits the per-axis factorization of both the Gaussian window and
    the Fourier kernel: every d = 2 query is a bilinear form a1^T U a2,
    evaluated in batches by matrix products.
    """
    grid = u.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if g.kind == "custom":
        return stft_direct(u, g, pts)
    sig = 1.0 if g.kind == "standard-gaussian" else float(g.sigma)
    ax = grid.axis()
    lo, hi = -grid.L - 1e-9, grid.L - grid.delta + 1e-9
    cst1 = math.pi ** -0.25 * sig ** -0.5   # per-axis window factor
    scale = g.k_g * grid.delta ** grid.d
    out = np.empty(pts.shape[0], dtype=np.complex128)

    def axis_factor(x, xi):
        offs = ax[None, :] - x[:, None]
        inside = (offs >= lo) & (offs <= hi)
        w = cst1 * np.exp(-offs ** 2 / (2.0 * sig ** 2)) * inside
        return w * np.exp(-1j * xi[:, None] * ax[None, :])

    for s in range(0, pts.shape[0], chunk):
        block = pts[s:s + chunk]
        if grid.d == 1:
            a1 = axis_factor(block[:, 0], block[:, 1])
            out[s:s + chunk] = scale * (a1 @ u.samples)
        else:
            a1 = axis_factor(block[:, 0], block[:, 2])
            a2 = axis_factor(block[:, 1], block[:, 3])
            out[s:s + chunk] = scale * np.einsum(
                "pi,pi->p", a1, a2 @ u.samples.T)
    return out


def stft_adjoint(F: STFTField) -> SampledSignal:
    """Adjoint V* of the analysis map; V* V = identity for unit windows.

    V* F(y) = k_g * sum_{x,xi} F(x,xi) g(y - x) e^{+i xi.y} dx dxi
    """
    grid = F.grid
    g = F.window
    if grid.d == 1:
        N = F.pad * grid.n
        Vunshift = np.fft.ifftshift(F.values, axes=1)
        B = N * np.fft.ifft(Vunshift * np.conj(_phase(grid, F.pad))[None, :], axis=1)
        B = B[:, :grid.n]
        W = np.conj(_window_matrix(g, conjugate=True))  # g((m-i) delta)
        out = (W * B).sum(axis=0)
        out *= g.k_g * grid.delta * F.dxi
        return SampledSignal(grid, out, label="adjoint")
    n, N = grid.n, F.pad * grid.n
    ph2 = np.outer(np.conj(_phase(grid, F.pad)), np.conj(_phase(grid, F.pad)))
    out = np.zeros((n, n), dtype=np.complex128)
    gp = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    gp[n // 2:n // 2 + n, n // 2:n // 2 + n] = g.samples
    for i1 in range(n):
        for i2 in range(n):
            Vi = np.fft.ifftshift(F.values[i1, i2])
            B = (N * N) * np.fft.ifft2(Vi * ph2)[:n, :n]
            out += gp[n - i1:2 * n - i1, n - i2:2 * n - i2] * B
    out *= g.k_g * grid.delta ** 2 * F.dxi ** 2
    return SampledSignal(grid, out, label="adjoint")


def bargmann_view(F: STFTField, x, xi) -> complex:
    """Entire-transform value T(-xi - i x) = e^{|x|^2/2} V_psi u(x, xi).

    Only meaningful for the standard Gaussian window, whose STFT is the
    weighted restriction of the entire Bargmann-type transform.
    """
    if F.window.kind != "standard-gaussian":
        raise WavefrontError("bargmann_view requires the standard Gaussian window")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    val = F.value_at(x, xi)
    return complex(math.exp(float(np.sum(xv ** 2)) / 2.0) * val)


def parseval_check(u: SampledSignal, g: Window, pad: int | None = None) -> float:
    """Relative discrete-Parseval defect |sum|V|^2 dx dxi - ||u||^2| / ||u||^2."""
    nrm2 = np.sum(np.abs(u.samples) ** 2) * u.grid.delta ** u.grid.d
    if nrm2 == 0.0:
        raise SignalError("parseval check is degenerate for the zero signal")
    F = stft_field(u, g, pad=pad)
    mass = np.sum(np.abs(F.values) ** 2) * (u.grid.delta ** u.grid.d) * F.dxi ** u.grid.d
    return float(abs(mass - nrm2) / nrm2)


def blur_magnitude(F: STFTField, width: float) -> np.ndarray:
    """|V| convolved with a normalized Gaussian of the given physical width.

    Used by the cone-convolution stability checks; d = 1 fields only.
    """
    from scipy.ndimage import gaussian_filter
    if F.grid.d != 1:
        raise WavefrontError("blur_magnitude supports d = 1 fields only")
    sigmas = (width / F.grid.delta, width / F.dxi)
    return gaussian_filter(F.magnitude(), sigma=sigmas, mode="constant")


# ---------------------------------------------------------------------------
# binary field dump: header + little-endian f64 interleaved re/im (row-major)

_MAGIC = b"WFLD"


def write_field(path: str, F: STFTField) -> None:
    import struct
    kind = F.window.tag().encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<iiqdi", 1, F.grid.d, F.grid.n, F.grid.L, F.pad))
        fh.write(struct.pack("<i", len(kind)))
        fh.write(kind)
        inter = np.empty(F.values.size * 2, dtype="<f8")
        inter[0::2] = F.values.real.ravel()
        inter[1::2] = F.values.imag.ravel()
        fh.write(inter.tobytes())


def read_field(path: str) -> STFTField:
    import struct
    from .core import window_from_tag
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise WavefrontError("not a field dump")
        _, d, n, L, pad = struct.unpack("<iiqdi", fh.read(struct.calcsize("<iiqdi")))
        klen, = struct.unpack("<i", fh.read(4))
        tag = fh.read(klen).decode()
        grid = GridSpec(d=d, L=L, n=n)
        shape = (n, pad * n) if d == 1 else (n, n, pad * n, pad * n)
        count = int(np.prod(shape)) * 2
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
        vals = (data[0::2] + 1j * data[1::2]).reshape(shape)
        return STFTField(grid, window_from_tag(grid, tag), vals, pad)
