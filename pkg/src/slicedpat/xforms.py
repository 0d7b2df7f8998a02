"""Fourier transform, Radon transform and inverse, and time antiderivatives.

Fourier convention: forward F f(k) = integral of f(t) e^{+ikt} dt, inverse
carries the 1/(2pi).  Time-domain inputs are one-sided (zero before t0), so
forward transforms zero-pad to at least twice the record length to suppress
wraparound in the long-time tail.
"""

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fields import ScalarField, eval_field


class TimeSeries:
    """Uniformly sampled real time signal starting at t0."""

    def __init__(self, t0, dt, samples):
        self.t0 = float(t0)
        self.dt = float(dt)
        self.samples = np.ascontiguousarray(samples, dtype=np.float64)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.shape[-1])


class Spectrum:
    """Uniformly sampled complex spectrum starting at k0."""

    def __init__(self, k0, dk, samples, t0=0.0, dt=None, n_time=None):
        self.k0 = float(k0)
        self.dk = float(dk)
        self.samples = np.ascontiguousarray(samples, dtype=np.complex128)
        if self.dk <= 0:
            raise ValueError("dk must be positive")
        # provenance of the originating time grid, used by the inverse
        self.t0 = float(t0)
        self.dt = dt
        self.n_time = n_time

    def wavenumbers(self):
        return self.k0 + self.dk * np.arange(self.samples.shape[-1])


def _pad_length(n):
    n_pad = 1
    while n_pad < 2 * n:
        n_pad *= 2
    return n_pad


def fourier(obj, direction):
    """Discrete realization of the one-sided transform pair.

    direction "forward": TimeSeries -> Spectrum on the symmetric wavenumber
    grid k0 = -pi/dt, dk = 2 pi/(Npad dt).  direction "inverse": Spectrum ->
    TimeSeries on the grid recorded at forward time (or starting at t0 = 0).
    """
    if direction == "forward":
        if not isinstance(obj, TimeSeries):
            raise ValueError("forward transform expects a TimeSeries")
        n = obj.samples.shape[-1]
        n_pad = _pad_length(n)
        padded = np.zeros(obj.samples.shape[:-1] + (n_pad,))
        padded[..., :n] = obj.samples
        dk = 2.0 * np.pi / (n_pad * obj.dt)
        k0 = -np.pi / obj.dt
        spec = np.fft.fftshift(np.fft.ifft(padded, axis=-1), axes=-1) * (n_pad * obj.dt)
        k = k0 + dk * np.arange(n_pad)
        spec = spec * np.exp(1j * k * obj.t0)
        return Spectrum(k0, dk, spec, t0=obj.t0, dt=obj.dt, n_time=n)
    if direction == "inverse":
        if not isinstance(obj, Spectrum):
            raise ValueError("inverse transform expects a Spectrum")
        n_pad = obj.samples.shape[-1]
        dt = obj.dt if obj.dt is not None else 2.0 * np.pi / (n_pad * obj.dk)
        m = np.arange(n_pad)
        phased = obj.samples * np.exp(-1j * m * obj.dk * obj.t0)
        f = np.fft.fft(phased, axis=-1) * (obj.dk / (2.0 * np.pi))
        t = obj.t0 + dt * m
        f = f * np.exp(-1j * obj.k0 * t)
        n = obj.n_time if obj.n_time is not None else n_pad
        return TimeSeries(obj.t0, dt, np.real(f[..., :n]))
    raise ValueError("direction must be forward or inverse")


def time_antiderivative(series, order):
    """order-fold cumulative integral with zero initial conditions."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if abs(series.t0) > 1e-12:
        raise ValueError("antiderivatives are taken from t0 = 0")
    vals = series.samples
    for _ in range(order):
        vals = cumulative_trapezoid(vals, dx=series.dt, axis=-1, initial=0.0)
    return TimeSeries(series.t0, series.dt, vals)


def _plane_frame(theta):
    # deterministic in-plane basis for a 3-d unit normal
    ax = int(np.argmin(np.abs(theta)))
    v = np.zeros(3)
    v[ax] = 1.0
    e2 = v - np.dot(v, theta) * theta
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(theta, e2)
    return e2, e3


def radon_forward(field, illum):
    """Hyperplane integrals R[f](r, theta) over the illumination set."""
    r = illum.r_samples
    thetas = illum.theta_samples
    lo, hi = field.bbox()
    half = 0.5 * float(np.linalg.norm(hi - lo))
    ds = 0.5 * float(np.min(field.spacing))
    ns = int(np.ceil(2.0 * half / ds)) + 1
    s = -half + (2.0 * half / (ns - 1)) * np.arange(ns)
    out = np.zeros((r.size, thetas.shape[0]))
    if field.dim == 2:
        for j, th in enumerate(thetas):
            perp = np.array([-th[1], th[0]])
            pts = r[:, None, None] * th[None, None, :] + s[None, :, None] * perp[None, None, :]
            vals = eval_field(field, pts.reshape(-1, 2)).reshape(r.size, ns)
            out[:, j] = np.trapezoid(vals, dx=s[1] - s[0], axis=1)
    else:
        for j, th in enumerate(thetas):
            e2, e3 = _plane_frame(th)
            grid = (s[:, None, None] * e2[None, None, :] + s[None, :, None] * e3[None, None, :])
            for i, ri in enumerate(r):
                pts = ri * th[None, None, :] + grid
                vals = eval_field(field, pts.reshape(-1, 3)).reshape(ns, ns)
                line = np.trapezoid(vals, dx=s[1] - s[0], axis=1)
                out[i, j] = np.trapezoid(line, dx=s[1] - s[0])
    return out


def _filtered_profiles(sino, dr):
    # Ramp filtering as circular convolution with the band-limited ramp
    # kernel sampled in the offset variable; its DFT replaces the naive
    # |omega| response, whose misfit at low frequency biases smooth parts.
    nr, nth = sino.shape
    n_pad = _pad_length(nr)
    pad0 = (n_pad - nr) // 2
    arr = np.zeros((n_pad, nth), dtype=sino.dtype)
    arr[pad0:pad0 + nr, :] = sino
    idx = np.minimum(np.arange(n_pad), n_pad - np.arange(n_pad))
    kern = np.zeros(n_pad)
    kern[0] = 0.25 / dr**2
    odd = idx % 2 == 1
    kern[odd] = -1.0 / (np.pi * idx[odd] * dr) ** 2
    filt = 2.0 * np.pi * dr * np.real(np.fft.fft(kern))
    q = np.fft.ifft(np.fft.fft(arr, axis=0) * filt[:, None], axis=0)
    if not np.iscomplexobj(sino):
        q = np.real(q)
    return q[pad0:pad0 + nr, :]


def radon_invert_points(sino, illum, points):
    """Inverse Radon transform evaluated at an arbitrary point set.

    Accepts real or complex sinograms (the inversion is linear, so a
    complex sinogram is inverted per component).  Points outside the
    sampled offset range contribute zero.
    """
    sino = np.asarray(sino)
    if not np.iscomplexobj(sino):
        sino = sino.astype(np.float64)
    r = illum.r_samples
    thetas = illum.theta_samples
    nr, nth = sino.shape
    if r.size != nr or thetas.shape[0] != nth:
        raise ValueError("sinogram shape does not match the illumination set")
    dim = thetas.shape[1]
    dr = r[1] - r[0]
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, dim)
    if dim == 2:
        q = _filtered_profiles(sino, dr)
        acc = np.zeros(pts.shape[0], dtype=q.dtype)
        for j, th in enumerate(thetas):
            acc += np.interp(pts @ th, r, q[:, j], left=0.0, right=0.0)
        return acc / (2.0 * nth)
    d2 = np.zeros_like(sino)
    d2[1:-1, :] = (sino[2:, :] - 2.0 * sino[1:-1, :] + sino[:-2, :]) / dr**2
    acc = np.zeros(pts.shape[0], dtype=d2.dtype)
    for j, th in enumerate(thetas):
        acc += np.interp(pts @ th, r, d2[:, j], left=0.0, right=0.0)
    return -acc * (4.0 * np.pi / nth) / (8.0 * np.pi**2)


def radon_invert(sino, illum, template):
    """Inverse Radon transform onto the template field's grid.

    2D: filtered backprojection with the exact ramp filter.  3D: second
    derivative in the offset followed by the backprojection over
    orientations.  An orientation-undersampling warning (Nyquist heuristic)
    is recorded on the returned field's meta attribute.
    """
    sino = np.asarray(sino, dtype=np.float64)
    r = illum.r_samples
    nr = r.size
    nth = illum.theta_samples.shape[0]
    warnings = []
    if nth < int(np.ceil(0.5 * np.pi * nr / 2.0)):
        warnings.append("orientation sampling below the Nyquist heuristic")
    vals = radon_invert_points(sino, illum, template.grid_points())
    out = template.copy_like(np.real(vals).reshape(template.shape))
    out.meta = {"warnings": warnings}
    return out
