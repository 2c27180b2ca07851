"""Domain types, grid arithmetic, and JSON serialization.

Value types shared by the whole package: centered spatial grids, sampled
signals, window functions, phase-space directions and cones, detection
configuration, and wave front reports.  Everything is immutable after
construction and safe to share read-only across threads.

JSON schemas (all numbers are IEEE-754 doubles, "inf" encodes the
infinite decay sentinel):

    signal  {"d", "L", "n", "label", "samples": [[re, im], ...]}
    config  {"theta", "n_dir", "delta", "radii", "shell_width",
             "floor", "eps_min", "window", ...}
    report  {"config", "directions": [{"omega", "eps_hat", "c_hat",
             "residual", "class"}, ...], "singular_arcs": [...]}
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "WavefrontError", "GridError", "SignalError", "SchemaError",
    "DetectionError", "OperatorError", "GrowthError",
    "GridSpec", "SampledSignal", "Window", "ConeSet", "DetectConfig",
    "WaveFrontReport", "Diagnostics",
    "make_grid", "validate_signal", "classify",
    "standard_window", "dilated_window", "custom_window", "window_from_tag",
    "unit_vector", "angle_between",
    "signal_to_json", "signal_from_json", "config_to_json",
    "config_from_json", "report_to_json", "report_from_json",
    "dump_json", "load_json", "save_json_file", "load_json_file",
    "BOUNDARY_FLAG_THRESHOLD", "worker_count",
]

BOUNDARY_FLAG_THRESHOLD = 1e-6


class WavefrontError(Exception):
    """Base class for all package errors."""


class GridError(WavefrontError):
    pass


class SignalError(WavefrontError):
    pass


class SchemaError(WavefrontError):
    """Malformed serialized document; message names the offending field."""


class DetectionError(WavefrontError):
    pass


class OperatorError(WavefrontError):
    pass


class GrowthError(WavefrontError):
    """Localization symbol failed its growth certificate."""


def worker_count() -> int:
    """Parallelism cap: WAVEFRONT_THREADS if set, else cpu count."""
    env = os.environ.get("WAVEFRONT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# grids and signals


@dataclass(frozen=True)
class GridSpec:
    """Uniform centered grid on [-L, L)^d with n samples per axis."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {self.d}")
        if not (isinstance(self.n, int) and self.n >= 32 and (self.n & (self.n - 1)) == 0):
            raise GridError(f"n must be a power of two >= 32, got {self.n}")
        if not (self.L > 0):
            raise GridError(f"L must be positive, got {self.L}")

    @property
    def delta(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def xi_max(self) -> float:
        return math.pi / self.delta

    def axis(self) -> np.ndarray:
        """Sample positions -L + k*delta, k = 0..n-1 (contains 0)."""
        return -self.L + self.delta * np.arange(self.n)

    def points(self) -> np.ndarray:
        """All grid points, shape (n^d, d), row-major."""
        ax = self.axis()
        if self.d == 1:
            return ax[:, None]
        X1, X2 = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], axis=1)

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d


def make_grid(L: float, n: int, d: int = 1) -> GridSpec:
    """Build a GridSpec; raises GridError on invalid parameters."""
    return GridSpec(d=d, L=float(L), n=int(n))


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Complex samples of a tempered function on a uniform grid."""

    grid: GridSpec
    samples: np.ndarray
    label: str = ""
    provenance: dict | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.size != self.grid.size:
            raise SignalError(
                f"expected {self.grid.size} samples, got {arr.size}")
        arr = arr.reshape(self.grid.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1)

    def l2_norm(self) -> float:
        """Quadrature L2 norm: sqrt(sum |u|^2 * delta^d)."""
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2)
                             * self.grid.delta ** self.grid.d))

    def with_samples(self, samples, label=None, provenance=None) -> "SampledSignal":
        return SampledSignal(self.grid, samples,
                             self.label if label is None else label,
                             self.provenance if provenance is None else provenance)


@dataclass(frozen=True)
class Diagnostics:
    max_abs: float
    boundary_ratio: float
    boundary_truncated: bool


def _boundary_shell(samples: np.ndarray) -> np.ndarray:
    if samples.ndim == 1:
        return np.abs(samples[[0, -1]])
    edge = np.concatenate([
        np.abs(samples[0, :]), np.abs(samples[-1, :]),
        np.abs(samples[:, 0]), np.abs(samples[:, -1])])
    return edge


def validate_signal(s: SampledSignal) -> Diagnostics:
    """NaN/Inf scan plus the boundary-decay diagnostic.

    Signals whose outermost-shell magnitude exceeds 1e-6 of the peak are
    flagged boundary-truncated (constants and chirps legitimately are).
    """
    if not np.all(np.isfinite(s.samples.view(np.float64))):
        raise SignalError("signal contains NaN or Inf samples")
    max_abs = float(np.max(np.abs(s.samples))) if s.samples.size else 0.0
    if max_abs == 0.0:
        return Diagnostics(0.0, 0.0, False)
    ratio = float(np.max(_boundary_shell(s.samples)) / max_abs)
    return Diagnostics(max_abs, ratio, ratio > BOUNDARY_FLAG_THRESHOLD)


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True, eq=False)
class Window:
    """Window function sampled on a grid, with its quadrature L2 norm."""

    grid: GridSpec
    samples: np.ndarray
    l2_norm: float
    kind: str  # "standard-gaussian" | "dilated-gaussian" | "custom"
    sigma: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128).reshape(self.grid.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        quad = float(np.sqrt(np.sum(np.abs(arr) ** 2) * self.grid.delta ** self.grid.d))
        if quad == 0.0:
            raise SignalError("window must be nonzero")
        if abs(self.l2_norm - quad) > 1e-12 * quad:
            raise SignalError("window l2_norm does not match its quadrature norm")
        if self.kind == "standard-gaussian" and abs(self.l2_norm - 1.0) > 1e-8:
            raise SignalError("standard Gaussian window must have unit norm")

    @property
    def k_g(self) -> float:
        """Normalization (2 pi)^(-d/2) / ||g||_2 of the analysis map."""
        return (2.0 * math.pi) ** (-self.grid.d / 2.0) / self.l2_norm

    def envelope(self, offsets: np.ndarray) -> np.ndarray:
        """Evaluate the window at arbitrary offsets (Gaussian kinds only)."""
        if self.kind == "custom":
            raise SignalError("custom windows have no closed form off the lattice")
        sig = 1.0 if self.kind == "standard-gaussian" else float(self.sigma)
        t = np.asarray(offsets, dtype=float)
        sq = t ** 2 if self.grid.d == 1 else np.sum(t ** 2, axis=-1)
        return (math.pi ** (-self.grid.d / 4.0) * sig ** (-self.grid.d / 2.0)
                * np.exp(-sq / (2.0 * sig ** 2)))

    def tag(self) -> str:
        if self.kind == "dilated-gaussian":
            return f"dilated-gaussian:{self.sigma}"
        return self.kind


def _gaussian_samples(grid: GridSpec, sigma: float) -> np.ndarray:
    ax = grid.axis()
    g1 = math.pi ** -0.25 * sigma ** -0.5 * np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    if grid.d == 1:
        return g1.astype(np.complex128)
    return np.outer(g1, g1).astype(np.complex128)


def standard_window(grid: GridSpec) -> Window:
    """psi(y) = pi^(-d/4) exp(-|y|^2/2), unit L2 norm."""
    s = _gaussian_samples(grid, 1.0)
    quad = float(np.sqrt(np.sum(np.abs(s) ** 2) * grid.delta ** grid.d))
    return Window(grid, s, quad, "standard-gaussian", 1.0)


def dilated_window(grid: GridSpec, sigma: float) -> Window:
    if sigma <= 0:
        raise SignalError("window dilation must be positive")
    s = _gaussian_samples(grid, float(sigma))
    quad = float(np.sqrt(np.sum(np.abs(s) ** 2) * grid.delta ** grid.d))
    return Window(grid, s, quad, "dilated-gaussian", float(sigma))


def custom_window(grid: GridSpec, samples) -> Window:
    arr = np.asarray(samples, dtype=np.complex128)
    quad = float(np.sqrt(np.sum(np.abs(arr) ** 2) * grid.delta ** grid.d))
    return Window(grid, arr, quad, "custom")


def window_from_tag(grid: GridSpec, tag: str) -> Window:
    """Build a window from its config tag, e.g. "dilated-gaussian:0.7"."""
    if tag == "standard-gaussian":
        return standard_window(grid)
    if tag.startswith("dilated-gaussian:"):
        return dilated_window(grid, float(tag.split(":", 1)[1]))
    raise SchemaError(f"unknown window tag {tag!r}")


# ---------------------------------------------------------------------------
# directions and cones


def unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        raise WavefrontError("zero vector has no direction")
    return v / nrm


def angle_between(u, v) -> float:
    u = unit_vector(u)
    v = unit_vector(v)
    return float(np.arccos(np.clip(np.dot(u, v), -1.0, 1.0)))


@dataclass(frozen=True, eq=False)
class ConeSet:
    """Union of closed cones: unit directions with a common half-aperture."""

    directions: np.ndarray  # (m, 2d); m = 0 means the empty set
    aperture: float

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if dirs.size == 0:
            dirs = dirs.reshape(0, 2)
        else:
            nrm = np.linalg.norm(dirs, axis=1)
            if np.any(nrm == 0):
                raise WavefrontError("cone directions must be nonzero")
            dirs = dirs / nrm[:, None]
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        if not (0.0 < self.aperture < math.pi / 2):
            raise WavefrontError("cone aperture must lie in (0, pi/2)")

    @property
    def empty(self) -> bool:
        return self.directions.shape[0] == 0

    def distance(self, v) -> float:
        """Angular distance from direction v to the cone union (0 inside)."""
        if self.empty:
            return math.inf
        v = unit_vector(v)
        ang = np.arccos(np.clip(self.directions @ v, -1.0, 1.0))
        return max(0.0, float(np.min(ang)) - self.aperture)


# ---------------------------------------------------------------------------
# detection configuration


@dataclass(frozen=True)
class DetectConfig:
    """Knobs of the conic-decay wave front detector.

    radii is an increasing schedule of shell center radii; every shell is
    [r(1-h), r(1+h)] with h = shell_width.  floor is the relative noise
    floor beneath which shell suprema count as numerically zero.
    """

    theta: float = 0.75
    n_dir: int = 360
    delta: float = 2.0 * math.pi / 360.0
    radii: tuple = ()
    shell_width: float = 0.08
    floor: float = 1e-12
    eps_min: float = 3e-4
    window: str = "standard-gaussian"
    residual_max: float = 8.0
    pad: int = 2
    shell_samples: int = 64  # per-shell point budget of the d=2 backend

    def __post_init__(self):
        if not (0.5 < self.theta < 1.0):
            raise WavefrontError(f"theta must lie in (1/2, 1), got {self.theta}")
        if not (0.0 < self.delta < math.pi / 2):
            raise WavefrontError("cone half-aperture must lie in (0, pi/2)")
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if len(radii) < 8:
            raise WavefrontError("radii schedule needs at least 8 entries")
        if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
            raise WavefrontError("radii must be positive and strictly increasing")
        if not (0.0 < self.floor < 1e-6):
            raise WavefrontError("floor must lie in (0, 1e-6)")
        if self.eps_min <= 0:
            raise WavefrontError("eps_min must be positive")
        if not (0.0 < self.shell_width < 1.0):
            raise WavefrontError("shell_width must lie in (0, 1)")
        if self.pad not in (1, 2, 4):
            raise WavefrontError("pad factor must be 1, 2, or 4")

    @property
    def angular_step(self) -> float:
        return 2.0 * math.pi / self.n_dir

    def check_grid(self, grid: GridSpec) -> None:
        R = min(grid.L, grid.xi_max)
        if self.radii[-1] > 0.9 * R + 1e-9:
            raise DetectionError(
                f"largest detection radius {self.radii[-1]:.4g} exceeds "
                f"0.9*min(L, xi_max) = {0.9 * R:.4g}")


def default_config(grid: GridSpec, **overrides) -> DetectConfig:
    """Detector defaults for a grid: 20 geometric radii in [0.28R, 0.9R].

    The schedule and thresholds are calibrated on the reference corpus at
    (L, n) = (16, 512): bump trains classify singular within 3 angular
    steps of their prescribed directions, strips (constants, chirps)
    within 1 step, and the classification is invariant under window
    dilation 0.7, phase-space blur 0.5, and amplitude scaling.
    """
    R = min(grid.L, grid.xi_max)
    kw = dict(
        n_dir=360 if grid.d == 1 else 400,
        radii=tuple(np.geomspace(0.28 * R, 0.9 * R, 20)),
        pad=2 if grid.d == 1 else 1,
    )
    kw["delta"] = 2.0 * math.pi / kw["n_dir"]
    kw.update(overrides)
    return DetectConfig(**kw)


def classify(eps_hat: float, residual: float, cfg: DetectConfig) -> str:
    """Pure classification rule shared by detection and reports."""
    if math.isinf(eps_hat):
        return "regular"
    if eps_hat >= cfg.eps_min and residual <= cfg.residual_max:
        return "regular"
    return "singular"


# ---------------------------------------------------------------------------
# wave front report


@dataclass(frozen=True, eq=False)
class WaveFrontReport:
    """Per-direction decay estimates plus the singular-set summary."""

    config: DetectConfig
    d: int
    omegas: np.ndarray      # (N, 2d)
    eps_hat: np.ndarray     # (N,), +inf sentinel allowed
    c_hat: np.ndarray
    residual: np.ndarray
    used: np.ndarray        # usable radii per direction
    classes: tuple          # "regular" | "singular", the pure rule verdicts
    singular: ConeSet       # gap-absorbed summary
    arcs: tuple             # ((start_angle, end_angle), ...) for d = 1

    def singular_directions(self) -> np.ndarray:
        return self.singular.directions


# ---------------------------------------------------------------------------
# serialization


def _f(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _parse_f(x, path: str) -> float:
    if isinstance(x, str):
        if x == "inf":
            return math.inf
        if x == "-inf":
            return -math.inf
        raise SchemaError(f"{path}: bad number {x!r}")
    if not isinstance(x, (int, float)):
        raise SchemaError(f"{path}: bad number {x!r}")
    return float(x)


def _need(doc: dict, key: str, path: str = ""):
    if key not in doc:
        raise SchemaError(f"missing field {path + key!r}")
    return doc[key]


def signal_to_json(s: SampledSignal) -> dict:
    flat = s.flat()
    doc = {
        "d": s.grid.d, "L": s.grid.L, "n": s.grid.n, "label": s.label,
        "samples": [[float(z.real), float(z.imag)] for z in flat],
    }
    if s.provenance is not None:
        doc["provenance"] = s.provenance
    return doc


def signal_from_json(doc: dict) -> SampledSignal:
    d = int(_need(doc, "d"))
    L = _parse_f(_need(doc, "L"), "L")
    n = int(_need(doc, "n"))
    label = doc.get("label", "")
    raw = _need(doc, "samples")
    try:
        arr = np.array([complex(re, im) for re, im in raw], dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"samples: malformed entry ({e})")
    grid = GridSpec(d=d, L=L, n=n)
    if arr.size != grid.size:
        raise SchemaError(f"samples: expected {grid.size} entries, got {arr.size}")
    return SampledSignal(grid, arr, label, doc.get("provenance"))


def config_to_json(cfg: DetectConfig) -> dict:
    return {
        "theta": cfg.theta, "n_dir": cfg.n_dir, "delta": cfg.delta,
        "radii": [float(r) for r in cfg.radii],
        "shell_width": cfg.shell_width, "floor": cfg.floor,
        "eps_min": cfg.eps_min, "window": cfg.window,
        "residual_max": cfg.residual_max, "pad": cfg.pad,
        "shell_samples": cfg.shell_samples,
    }


def config_from_json(doc: dict) -> DetectConfig:
    kw = dict(
        theta=_parse_f(_need(doc, "theta"), "theta"),
        n_dir=int(_need(doc, "n_dir")),
        delta=_parse_f(_need(doc, "delta"), "delta"),
        radii=tuple(_parse_f(r, "radii") for r in _need(doc, "radii")),
        shell_width=_parse_f(_need(doc, "shell_width"), "shell_width"),
        floor=_parse_f(_need(doc, "floor"), "floor"),
        eps_min=_parse_f(_need(doc, "eps_min"), "eps_min"),
        window=str(_need(doc, "window")),
    )
    for opt in ("residual_max", "pad", "shell_samples"):
        if opt in doc:
            kw[opt] = type(DetectConfig.__dataclass_fields__[opt].default)(doc[opt])
    try:
        return DetectConfig(**kw)
    except WavefrontError as e:
        raise SchemaError(str(e))


def report_to_json(r: WaveFrontReport) -> dict:
    dirs = []
    for i in range(r.omegas.shape[0]):
        dirs.append({
            "omega": [float(c) for c in r.omegas[i]],
            "eps_hat": _f(float(r.eps_hat[i])),
            "c_hat": _f(float(r.c_hat[i])),
            "residual": _f(float(r.residual[i])),
            "used": int(r.used[i]),
            "class": r.classes[i],
        })
    return {
        "config": config_to_json(r.config),
        "d": r.d,
        "directions": dirs,
        "singular_arcs": [[float(a), float(b)] for a, b in r.arcs],
        "singular_directions": [[float(c) for c in v]
                                for v in r.singular.directions],
        "singular_aperture": r.singular.aperture,
    }


def report_from_json(doc: dict) -> WaveFrontReport:
    cfg = config_from_json(_need(doc, "config"))
    d = int(_need(doc, "d"))
    entries = _need(doc, "directions")
    omegas, eps, c, res, used, classes = [], [], [], [], [], []
    for i, e in enumerate(entries):
        omegas.append([_parse_f(v, "omega") for v in _need(e, "omega", f"directions[{i}].")])
        eps.append(_parse_f(_need(e, "eps_hat", f"directions[{i}]."), "eps_hat"))
        c.append(_parse_f(_need(e, "c_hat", f"directions[{i}]."), "c_hat"))
        res.append(_parse_f(_need(e, "residual", f"directions[{i}]."), "residual"))
        used.append(int(e.get("used", 0)))
        cls = _need(e, "class", f"directions[{i}].")
        if cls not in ("regular", "singular"):
            raise SchemaError(f"directions[{i}].class: bad value {cls!r}")
        classes.append(cls)
    sdirs = np.array(doc.get("singular_directions", []), dtype=float).reshape(-1, 2 * d)
    sing = ConeSet(sdirs, doc.get("singular_aperture", math.pi / cfg.n_dir))
    arcs = tuple((float(a), float(b)) for a, b in doc.get("singular_arcs", []))
    return WaveFrontReport(
        config=cfg, d=d, omegas=np.array(omegas, dtype=float),
        eps_hat=np.array(eps), c_hat=np.array(c), residual=np.array(res),
        used=np.array(used, dtype=int), classes=tuple(classes),
        singular=sing, arcs=arcs)


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=None, separators=(",", ":"))


def load_json(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}")
    if not isinstance(doc, dict):
        raise SchemaError("top-level JSON value must be an object")
    return doc


def save_json_file(path: str, doc: dict) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dump_json(doc))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json_file(path: str) -> dict:
    with open(path) as fh:
        return load_json(fh.read())
