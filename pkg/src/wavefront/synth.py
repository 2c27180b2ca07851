"""Test-object generators and their closed-form STFT oracles.

Gaussians, Hermite functions, quadratic chirps, constants, and the
prescribed-wave-front bump train

    u(x) = sum_j 2^{-j} sum_{k=1..k_max}
           exp(-|x - k^2 y_j|^2 / 2) exp(i k^2 <eta_j, x>),

whose STFT magnitude is a train of Gaussian bumps centered at
k^2 (y_j, eta_j) in phase space.  The translation sign is chosen so bumps
land on the positive ray of each requested direction; each bump has the
per-term closed form 0.53113^d * exp(-(|x - c|^2 + |xi - b|^2)/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (GridSpec, SampledSignal, SignalError, WavefrontError,
                   unit_vector)

__all__ = [
    "PrescribedWF", "gaussian", "hermite", "chirp", "constant",
    "prescribed_wf", "oracle_stft",
]


def _as_vec(v, d: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (d,):
        raise WavefrontError(f"{name} must have {d} components")
    return arr


def gaussian(grid: GridSpec, center, modulation, sigma: float = 1.0) -> SampledSignal:
    """exp(-|x-a|^2/(2 sigma^2)) e^{i<b,x>}; peak magnitude 1 at x = a."""
    if sigma <= 0:
        raise WavefrontError(f"gaussian spread must be positive, got {sigma}")
    a = _as_vec(center, grid.d, "center")
    b = _as_vec(modulation, grid.d, "modulation")
    if np.any(np.abs(a) >= grid.L):
        raise WavefrontError(f"center {a.tolist()} lies outside the grid")
    pts = grid.points()
    sq = np.sum((pts - a) ** 2, axis=1)
    vals = np.exp(-sq / (2.0 * sigma ** 2)) * np.exp(1j * (pts @ b))
    prov = {"kind": "gaussian", "center": a.tolist(),
            "modulation": b.tolist(), "sigma": sigma}
    return SampledSignal(grid, vals, label="gaussian", provenance=prov)


def _hermite_poly(k: int, x: np.ndarray) -> np.ndarray:
    # physicists' Hermite polynomials by recurrence
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev
    h = 2.0 * x
    for j in range(1, k):
        h, h_prev = 2.0 * x * h - 2.0 * j * h_prev, h
    return h


def hermite(grid: GridSpec, k: int) -> SampledSignal:
    """L2-normalized Hermite function h_k; (D^2 + x^2) h_k = (2k+1) h_k."""
    if grid.d != 1:
        raise WavefrontError("hermite functions are provided in d = 1 only")
    if not (0 <= k <= 8):
        raise WavefrontError(f"hermite index must satisfy 0 <= k <= 8, got {k}")
    x = grid.axis()
    norm = (2.0 ** k * math.factorial(k) * math.sqrt(math.pi)) ** -0.5
    vals = norm * _hermite_poly(k, x) * np.exp(-x ** 2 / 2.0)
    return SampledSignal(grid, vals.astype(np.complex128), label=f"hermite{k}",
                         provenance={"kind": "hermite", "k": k})


def chirp(grid: GridSpec, A) -> SampledSignal:
    """Unimodular quadratic chirp e^{i<Ax,x>/2} for symmetric real A.

    The half-factor convention makes the induced phase-space shear exactly
    (x, xi) -> (x, xi + Ax).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (grid.d, grid.d):
        raise WavefrontError(f"A must be {grid.d}x{grid.d}")
    if not np.allclose(A, A.T, atol=1e-12):
        raise WavefrontError("chirp matrix must be symmetric")
    pts = grid.points()
    quad = np.einsum("pi,ij,pj->p", pts, A, pts)
    vals = np.exp(0.5j * quad)
    return SampledSignal(grid, vals, label="chirp",
                         provenance={"kind": "chirp", "A": A.tolist()})


def constant(grid: GridSpec) -> SampledSignal:
    """The constant function 1 (boundary-truncated by construction)."""
    return SampledSignal(grid, np.ones(grid.size, dtype=np.complex128),
                         label="constant", provenance={"kind": "constant"})


@dataclass(frozen=True)
class PrescribedWF:
    """Recipe for a bump train with prescribed singular directions.

    directions: unit phase-space vectors (y_j, eta_j); term weights default
    to 2^{-j} with j counted from 1, and can be overridden per direction
    (closely spaced direction families need comparable weights to keep
    every member above its neighbors' bump tails at finite k_max).  Terms
    whose spatial center leaves the grid or whose modulation exceeds the
    Nyquist range are dropped.
    """

    directions: tuple
    k_max: int
    weights: tuple | None = None

    def __post_init__(self):
        if len(self.directions) == 0:
            raise WavefrontError("prescribed wave front needs at least one direction")
        dirs = tuple(tuple(unit_vector(v)) for v in self.directions)
        for i, a in enumerate(dirs):
            for b in dirs[i + 1:]:
                if np.allclose(a, b, atol=1e-12):
                    raise WavefrontError("prescribed directions must be pairwise distinct")
        object.__setattr__(self, "directions", dirs)
        if self.k_max < 1:
            raise WavefrontError("k_max must be at least 1")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(dirs) or any(x <= 0 for x in w):
                raise WavefrontError("weights must be positive, one per direction")
            object.__setattr__(self, "weights", w)

    def weight_list(self) -> tuple:
        if self.weights is not None:
            return self.weights
        return tuple(2.0 ** (-j) for j in range(1, len(self.directions) + 1))

    def check_extent(self, grid: GridSpec) -> None:
        extent = 0.9 * min(grid.L, grid.xi_max)
        if self.k_max ** 2 > 1.2 * extent:
            raise WavefrontError(
                f"k_max^2 = {self.k_max ** 2} exceeds 1.2x the detection extent "
                f"{extent:.3g}")


def default_k_max(grid: GridSpec) -> int:
    """Largest k with k^2 <= 0.9 * min(L, xi_max) (no off-grid bumps)."""
    return max(1, int(math.floor(math.sqrt(0.9 * min(grid.L, grid.xi_max)))))


def prescribed_wf(grid: GridSpec, p: PrescribedWF) -> SampledSignal:
    """Bump-train signal whose detected wave front set is the given cone."""
    p.check_extent(grid)
    d = grid.d
    pts = grid.points()
    vals = np.zeros(pts.shape[0], dtype=np.complex128)
    kept = []
    weights = p.weight_list()
    for j, omega in enumerate(p.directions, start=1):
        y = np.asarray(omega[:d])
        eta = np.asarray(omega[d:])
        w = weights[j - 1]
        for k in range(1, p.k_max + 1):
            c = k * k * y
            b = k * k * eta
            if np.any(np.abs(c) >= grid.L) or np.any(np.abs(b) >= grid.xi_max):
                continue  # bumps beyond the grid are dropped
            sq = np.sum((pts - c) ** 2, axis=1)
            vals += w * np.exp(-sq / 2.0) * np.exp(1j * (pts @ b))
            kept.append((j, k))
    if not kept:
        raise WavefrontError("all bump-train terms fell outside the grid")
    prov = {"kind": "prescribed-wf",
            "directions": [list(v) for v in p.directions],
            "k_max": p.k_max, "terms": len(kept)}
    return SampledSignal(grid, vals, label="prescribed-wf", provenance=prov)


# ---------------------------------------------------------------------------
# closed-form oracles


def _gauss_oracle_1d(a, b, sigma, x, xi):
    # int exp(-(y-a)^2/(2 s^2) + i b y - (y-x)^2/2 - i xi y) dy, times
    # k_psi * pi^{-1/4}; exact Gaussian integral
    A = (1.0 + sigma ** 2) / (2.0 * sigma ** 2)
    B = a / sigma ** 2 + x + 1j * (b - xi)
    C = -a ** 2 / (2.0 * sigma ** 2) - x ** 2 / 2.0
    integral = np.sqrt(np.pi / A) * np.exp(B ** 2 / (4.0 * A) + C)
    return (2.0 * math.pi) ** -0.5 * math.pi ** -0.25 * integral


def oracle_stft(kind: str, params: dict, point, d: int = 1) -> complex:
    """Exact closed-form V_psi value for supported generator kinds.

    Supported kinds: "gaussian" (center/modulation/sigma), "constant",
    "prescribed-term" (direction, j, k).  Authoritative in oracle suites.
    """
    pt = np.asarray(point, dtype=float)
    x, xi = pt[:d], pt[d:]
    if kind == "gaussian":
        a = _as_vec(params.get("center", np.zeros(d)), d, "center")
        b = _as_vec(params.get("modulation", np.zeros(d)), d, "modulation")
        sigma = float(params.get("sigma", 1.0))
        val = 1.0 + 0.0j
        for i in range(d):
            val *= _gauss_oracle_1d(a[i], b[i], sigma, x[i], xi[i])
        return complex(val)
    if kind == "constant":
        val = math.pi ** (-d / 4.0) * np.exp(-float(xi @ xi) / 2.0)
        return complex(val * np.exp(-1j * float(xi @ x)))
    if kind == "prescribed-term":
        omega = unit_vector(params["direction"])
        j, k = int(params["j"]), int(params["k"])
        weight = float(params.get("weight", 2.0 ** (-j)))
        c, b = k * k * omega[:d], k * k * omega[d:]
        val = weight + 0.0j
        for i in range(d):
            val *= _gauss_oracle_1d(c[i], b[i], 1.0, x[i], xi[i])
        return complex(val)
    raise WavefrontError(f"oracle_stft does not support kind {kind!r}")
