"""Grids, phantoms, and the measurement geometry.

A phantom bundles the known absorption part f0, the unknown part f1, and
the sound-speed contrast q on a common grid, together with the support ball
Omega, the measurement ball B with boundary detectors, and the sliced
illumination parameters.  Validation enforces the standing model
assumptions: supports of f1 and q inside Omega, Omega strictly inside B,
f = f0 + f1 nonvanishing on the closure of B, and a smallness bound on q.
"""

import numpy as np

from . import _kernels, persist

DEFAULT_Q_MAX = 0.1
DEFAULT_DELTA_MARGIN_FRAC = 0.2
_F_NONZERO_REL = 1e-9


class ScalarField:
    """Regular n-dimensional grid of real samples with physical placement."""

    def __init__(self, origin, spacing, values):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.dim = self.values.ndim
        if self.dim not in (2, 3):
            raise ValueError("ScalarField supports 2 or 3 dimensions")
        self.origin = np.asarray(origin, dtype=np.float64).reshape(self.dim)
        self.spacing = np.asarray(spacing, dtype=np.float64).reshape(self.dim)
        if np.any(self.spacing <= 0):
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def shape(self):
        return self.values.shape

    def axes(self):
        return [self.origin[i] + self.spacing[i] * np.arange(self.shape[i]) for i in range(self.dim)]

    def bbox(self):
        hi = self.origin + self.spacing * (np.array(self.shape) - 1)
        return self.origin.copy(), hi

    def grid_points(self):
        """All node positions as an (N, dim) array in row-major node order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def copy_like(self, values):
        return ScalarField(self.origin, self.spacing, np.asarray(values, dtype=np.float64).reshape(self.shape))

    def same_grid(self, other):
        return (
            self.shape == other.shape
            and np.allclose(self.origin, other.origin, atol=1e-12)
            and np.allclose(self.spacing, other.spacing, atol=1e-12)
        )

    def save(self, stem, extra_meta=None):
        meta = {
            "kind": "scalar_field",
            "dim": self.dim,
            "origin": [float(v) for v in self.origin],
            "spacing": [float(v) for v in self.spacing],
        }
        if extra_meta:
            meta.update(extra_meta)
        persist.write_array(stem, self.values, meta)

    @classmethod
    def load(cls, stem):
        values, meta = persist.read_array(stem)
        return cls(meta["origin"], meta["spacing"], values)


def eval_field(field, x):
    """Multilinear interpolation of field at x; 0 outside the bounding box.

    Accepts one position or an (N, dim) batch; exact at grid nodes.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[1] != field.dim:
        raise ValueError("position dimensionality does not match the field")
    if field.dim == 2:
        out = _kernels.bilinear(
            field.values, field.origin[0], field.origin[1], field.spacing[0], field.spacing[1], pts
        )
    else:
        out = _kernels.trilinear(
            field.values,
            field.origin[0], field.origin[1], field.origin[2],
            field.spacing[0], field.spacing[1], field.spacing[2],
            pts,
        )
    out = np.asarray(out)
    if np.asarray(x).ndim == 1:
        return float(out[0])
    return out


class DetectorSet:
    """Quadrature nodes on the measurement boundary Gamma = boundary of B."""

    def __init__(self, points, inward_normals, weights, radius):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.inward_normals = np.ascontiguousarray(inward_normals, dtype=np.float64)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.radius = float(radius)
        norms = np.linalg.norm(self.points, axis=1)
        if np.max(np.abs(norms - self.radius)) > 1e-12:
            raise ValueError("detector points must lie on the sphere of the given radius")
        dim = self.points.shape[1]
        surface = 2.0 * np.pi * self.radius if dim == 2 else 4.0 * np.pi * self.radius**2
        if abs(self.weights.sum() - surface) > 1e-8:
            raise ValueError("detector weights must sum to the surface measure")

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def to_meta(self):
        return {
            "radius": self.radius,
            "points": [[float(v) for v in p] for p in self.points],
            "inward_normals": [[float(v) for v in p] for p in self.inward_normals],
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_meta(cls, meta):
        return cls(meta["points"], meta["inward_normals"], meta["weights"], meta["radius"])


def circle_detectors(radius, count):
    """count equally spaced detectors on the circle of the given radius."""
    ang = 2.0 * np.pi * np.arange(count) / count
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    pts = radius * dirs
    w = np.full(count, 2.0 * np.pi * radius / count)
    return DetectorSet(pts, -dirs, w, radius)


def _fibonacci_dirs(count, hemisphere=False):
    # golden-ratio lattice; cos(polar) uniform over (-1,1) or (0,1)
    i = np.arange(count)
    if hemisphere:
        z = (i + 0.5) / count
    else:
        z = (2.0 * (i + 0.5) / count) - 1.0
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    phi = 2.0 * np.pi * i / golden
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_detectors(radius, count):
    """count Fibonacci-lattice detectors on the sphere of the given radius."""
    dirs = _fibonacci_dirs(count)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radius * dirs
    w = np.full(count, 4.0 * np.pi * radius**2 / count)
    return DetectorSet(pts, -dirs, w, radius)


class IlluminationSet:
    """Sliced illumination planes/lines E(r, theta) with mollification width."""

    def __init__(self, r_samples, theta_samples, slab_width):
        self.r_samples = np.asarray(r_samples, dtype=np.float64)
        self.theta_samples = np.atleast_2d(np.asarray(theta_samples, dtype=np.float64))
        self.slab_width = float(slab_width)
        if self.slab_width <= 0:
            raise ValueError("slab_width must be positive")
        norms = np.linalg.norm(self.theta_samples, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("theta samples must be unit vectors")

    @property
    def dim(self):
        return self.theta_samples.shape[1]

    def to_meta(self):
        return {
            "r_samples": [float(v) for v in self.r_samples],
            "theta_samples": [[float(v) for v in t] for t in self.theta_samples],
            "slab_width": self.slab_width,
        }

    @classmethod
    def from_meta(cls, meta):
        return cls(meta["r_samples"], meta["theta_samples"], meta["slab_width"])


def make_illumination(dim, r_count, theta_count, r_max, slab_width):
    """Signed offsets and a half-sphere of orientations: one cover per plane."""
    r = np.linspace(-r_max, r_max, r_count)
    if dim == 2:
        ang = np.pi * np.arange(theta_count) / theta_count
        thetas = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        thetas = _fibonacci_dirs(theta_count, hemisphere=True)
        thetas /= np.linalg.norm(thetas, axis=1, keepdims=True)
    return IlluminationSet(r, thetas, slab_width)


class Phantom:
    """f0, f1, q on one grid, plus the geometry of Omega, B, and Gamma."""

    def __init__(self, f0, f1, q, omega_center, omega_radius, b_radius, gamma,
                 q_max=DEFAULT_Q_MAX, delta_margin=None):
        self.f0 = f0
        self.f1 = f1
        self.q = q
        self.omega_center = np.asarray(omega_center, dtype=np.float64)
        self.omega_radius = float(omega_radius)
        self.b_radius = float(b_radius)
        self.gamma = gamma
        self.q_max = float(q_max)
        if delta_margin is None:
            delta_margin = DEFAULT_DELTA_MARGIN_FRAC * self.b_radius
        self.delta_margin = float(delta_margin)
        self._validate()

    @property
    def dim(self):
        return self.f0.dim

    def f_total(self):
        return self.f0.copy_like(self.f0.values + self.f1.values)

    def gamma_omega_distance(self):
        return self.b_radius - (float(np.linalg.norm(self.omega_center)) + self.omega_radius)

    def _validate(self):
        if not (self.f0.same_grid(self.f1) and self.f0.same_grid(self.q)):
            raise ValueError("f0, f1, q must share one grid")
        if self.gamma.dim != self.dim:
            raise ValueError("detector dimension does not match fields")
        if self.gamma_omega_distance() < self.delta_margin - 1e-12:
            raise ValueError("Omega must lie strictly inside B with the configured margin")
        lo, hi = self.f0.bbox()
        if np.any(lo > -self.b_radius + 1e-12) or np.any(hi < self.b_radius - 1e-12):
            raise ValueError("grid bounding box must cover the closure of B")
        pts = self.f0.grid_points()
        rad = np.linalg.norm(pts - self.omega_center, axis=1).reshape(self.f0.shape)
        outside = rad > self.omega_radius + 1e-12
        if np.any(np.abs(self.f1.values[outside]) > 0) or np.any(np.abs(self.q.values[outside]) > 0):
            raise ValueError("supports of f1 and q must be contained in Omega")
        in_b = (np.linalg.norm(pts, axis=1) <= self.b_radius + 1e-12).reshape(self.f0.shape)
        f = self.f0.values + self.f1.values
        fmax = np.max(np.abs(f))
        if fmax == 0 or np.min(np.abs(f[in_b])) < _F_NONZERO_REL * fmax:
            raise ValueError("f = f0 + f1 must be nonvanishing on the closure of B")
        if np.max(np.abs(self.q.values)) > self.q_max + 1e-12:
            raise ValueError("sup |q| exceeds the configured Born-regime bound")

    def omega_mask(self):
        pts = self.f0.grid_points()
        rad = np.linalg.norm(pts - self.omega_center, axis=1).reshape(self.f0.shape)
        return rad <= self.omega_radius

    def save(self, out_dir, extra_meta=None):
        import os

        meta = {
            "kind": "phantom",
            "dim": self.dim,
            "omega_center": [float(v) for v in self.omega_center],
            "omega_radius": self.omega_radius,
            "b_radius": self.b_radius,
            "q_max": self.q_max,
            "delta_margin": self.delta_margin,
            "detectors": self.gamma.to_meta(),
        }
        if extra_meta:
            meta.update(extra_meta)
        os.makedirs(out_dir, exist_ok=True)
        self.f0.save(os.path.join(out_dir, "f0"))
        self.f1.save(os.path.join(out_dir, "f1"))
        self.q.save(os.path.join(out_dir, "q"))
        persist.write_json(os.path.join(out_dir, "phantom.json"), meta)

    @classmethod
    def load(cls, out_dir):
        import os

        meta = persist.read_json(os.path.join(out_dir, "phantom.json"))
        f0 = ScalarField.load(os.path.join(out_dir, "f0"))
        f1 = ScalarField.load(os.path.join(out_dir, "f1"))
        q = ScalarField.load(os.path.join(out_dir, "q"))
        return cls(
            f0, f1, q,
            meta["omega_center"], meta["omega_radius"], meta["b_radius"],
            DetectorSet.from_meta(meta["detectors"]),
            q_max=meta.get("q_max", DEFAULT_Q_MAX),
            delta_margin=meta.get("delta_margin"),
        )


def _bump_values(grid_pts, shape, bumps):
    vals = np.zeros(int(np.prod(shape)))
    for b in bumps:
        c = np.asarray(b["center"], dtype=np.float64)
        rho = float(b["radius"])
        amp = float(b["amplitude"])
        if rho <= 0:
            raise ValueError("bump radius must be positive")
        s = np.sum((grid_pts - c) ** 2, axis=1) / rho**2
        inside = s < 1.0
        vals[inside] += amp * np.exp(-1.0 / (1.0 - s[inside]))
    return vals.reshape(shape)


def _grid_from_spec(g, dim):
    if "shape" in g:
        shape = [int(v) for v in g["shape"]]
        origin = [float(v) for v in g["origin"]]
        spacing = [float(v) for v in g["spacing"]]
    else:
        n = int(g["n"])
        extent = float(g["extent"])
        shape = [n] * dim
        origin = [-extent] * dim
        spacing = [2.0 * extent / (n - 1)] * dim
    return shape, origin, spacing


def make_phantom(spec):
    """Build a validated Phantom from a declarative spec mapping.

    Keys: dim, grid ({n, extent} or {shape, origin, spacing}), b_radius,
    omega_center, omega_radius, detector_count, f0_bumps, f1_bumps, q_bumps,
    optional q_max and delta_margin.  Bumps are C-infinity:
    amplitude * exp(-1 / (1 - |x-c|^2/rho^2)) inside |x-c| < rho, 0 outside.
    """
    dim = int(spec["dim"])
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    shape, origin, spacing = _grid_from_spec(spec["grid"], dim)
    b_radius = float(spec["b_radius"])
    omega_center = np.asarray(spec.get("omega_center", [0.0] * dim), dtype=np.float64)
    omega_radius = float(spec["omega_radius"])
    q_max = float(spec.get("q_max", DEFAULT_Q_MAX))
    delta_margin = spec.get("delta_margin")

    for key in ("f1_bumps", "q_bumps"):
        for b in spec.get(key, []):
            c = np.asarray(b["center"], dtype=np.float64)
            if np.linalg.norm(c - omega_center) + float(b["radius"]) > omega_radius + 1e-12:
                raise ValueError(f"{key} entry not contained in Omega")

    probe = ScalarField(origin, spacing, np.zeros(shape))
    pts = probe.grid_points()
    f0 = probe.copy_like(_bump_values(pts, shape, spec.get("f0_bumps", [])))
    f1 = probe.copy_like(_bump_values(pts, shape, spec.get("f1_bumps", [])))
    q = probe.copy_like(_bump_values(pts, shape, spec.get("q_bumps", [])))

    count = int(spec.get("detector_count", 64))
    gamma = circle_detectors(b_radius, count) if dim == 2 else sphere_detectors(b_radius, count)
    return Phantom(f0, f1, q, omega_center, omega_radius, b_radius, gamma,
                   q_max=q_max, delta_margin=delta_margin)
