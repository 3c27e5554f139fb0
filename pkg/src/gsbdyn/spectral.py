"""Form factors, memory kernels and bath discretization.

A model couples an (n+1)-level system (n excited levels, one ground
state) to r boson channels.  Only the coupling intensity |f(w)|^2 of
each channel enters the reduced dynamics, so form factors carry no
phase.  The memory kernel is

    G(t) = -i * sum_l [ integral dw |f_l(w)|^2 e^{-i w t} ] |beta_l><beta_l|

evaluated analytically for the lorentzian / box-window kinds and by
trapezoidal quadrature for tabulated data.  The flat kind has a
delta-function kernel and is never sampled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import FlatKernelNotSampleable, InvalidBandwidth

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class Flat:
    """|f(w)|^2 = gamma / 2pi on the whole real line (units 1/time)."""

    gamma: float
    unbounded_support = True
    kind = "flat"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("flat coupling rate must be positive")

    def density(self, omega):
        return np.full_like(np.asarray(omega, dtype=float), self.gamma / (2 * np.pi))


@dataclass(frozen=True)
class Lorentzian:
    """|f(w)|^2 = (gamma/2pi) * lam^2 / ((w - omega0)^2 + lam^2)."""

    gamma: float
    lam: float
    omega0: float = 0.0
    unbounded_support = False
    kind = "lorentzian"

    def __post_init__(self):
        if self.gamma <= 0 or self.lam <= 0:
            raise ValueError("lorentzian rate and width must be positive")

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        return (self.gamma / (2 * np.pi)) * self.lam**2 / ((omega - self.omega0) ** 2 + self.lam**2)

    def total_weight(self) -> float:
        # integral over the full line
        return self.gamma * self.lam / 2

    def fourier(self, t):
        """integral dw |f|^2 e^{-iwt}, closed form."""
        t = np.asarray(t, dtype=float)
        return (self.gamma * self.lam / 2) * np.exp(-1j * self.omega0 * t - self.lam * np.abs(t))


@dataclass(frozen=True)
class BoxWindow:
    """|f(w)|^2 = gamma / 2pi on [omega0 - half_width, omega0 + half_width]."""

    gamma: float
    half_width: float
    omega0: float = 0.0
    unbounded_support = False
    kind = "box_window"

    def __post_init__(self):
        if self.gamma <= 0 or self.half_width <= 0:
            raise ValueError("box-window rate and half-width must be positive")

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        inside = np.abs(omega - self.omega0) <= self.half_width
        return np.where(inside, self.gamma / (2 * np.pi), 0.0)

    def total_weight(self) -> float:
        return self.gamma * self.half_width / np.pi

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        # (gamma/pi) * sin(W t)/t, continuous at t=0
        sinc = np.sinc(self.half_width * t / np.pi)  # sin(Wt)/(Wt)
        return (self.gamma * self.half_width / np.pi) * sinc * np.exp(-1j * self.omega0 * t)


@dataclass(frozen=True)
class Tabulated:
    """|f(w)|^2 sampled on a strictly increasing frequency grid.

    The density is defined as zero outside the grid; integrals use the
    trapezoidal rule on the given (possibly non-uniform) grid.
    """

    omega: np.ndarray
    weight: np.ndarray  # |f(w)|^2 samples, nonnegative
    unbounded_support = False
    kind = "tabulated"

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        if omega.ndim != 1 or omega.shape != weight.shape:
            raise ValueError("tabulated grid and samples must be 1-d and equally long")
        if omega.size < 2:
            raise ValueError("tabulated form factor needs at least two samples")
        if not np.all(np.diff(omega) > 0):
            raise ValueError("tabulated frequency grid must be strictly increasing")
        if np.any(weight < 0):
            raise ValueError("tabulated |f|^2 samples must be nonnegative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "weight", weight)

    def density(self, omega):
        return np.interp(np.asarray(omega, dtype=float), self.omega, self.weight, left=0.0, right=0.0)

    def total_weight(self) -> float:
        return float(np.trapezoid(self.weight, self.omega))

    def fourier(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape, dtype=complex)
        # chunk over times to bound the phase-matrix size
        step = max(1, int(4e6 // max(self.omega.size, 1)))
        for lo in range(0, t.size, step):
            chunk = t[lo : lo + step, None]
            phases = np.exp(-1j * chunk * self.omega[None, :])
            out[lo : lo + step] = np.trapezoid(self.weight[None, :] * phases, self.omega, axis=1)
        return out if out.size > 1 else out[0]


FormFactor = Flat | Lorentzian | BoxWindow | Tabulated


@dataclass(frozen=True)
class ModelSpec:
    """Full model definition: excited-sector Hamiltonian, coupling vectors
    and one form factor per bath channel.

    H_e is the physical (already renormalized) excited-sector operator,
    units 1/time.  betas[j] is the coupling vector of channel j in the
    excited sector.
    """

    n: int
    r: int
    H_e: np.ndarray
    betas: np.ndarray  # shape (r, n)
    form_factors: tuple[FormFactor, ...]

    def __post_init__(self):
        H = np.asarray(self.H_e, dtype=complex)
        betas = np.asarray(self.betas, dtype=complex)
        if self.n < 1:
            raise ValueError("need at least one excited level")
        if not (1 <= self.r <= self.n):
            raise ValueError("bath channel count must satisfy 1 <= r <= n")
        if H.shape != (self.n, self.n):
            raise ValueError(f"H_e must be {self.n}x{self.n}")
        if np.max(np.abs(H - H.conj().T)) > HERMITICITY_TOL:
            raise ValueError("H_e is not Hermitian to 1e-12")
        if betas.shape != (self.r, self.n):
            raise ValueError(f"betas must have shape ({self.r}, {self.n})")
        if np.any(np.linalg.norm(betas, axis=1) == 0):
            raise ValueError("every coupling vector must be nonzero")
        if len(self.form_factors) != self.r:
            raise ValueError("one form factor per bath channel required")
        object.__setattr__(self, "H_e", H)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "form_factors", tuple(self.form_factors))

    @property
    def all_flat(self) -> bool:
        return all(isinstance(f, Flat) for f in self.form_factors)

    @property
    def any_flat(self) -> bool:
        return any(isinstance(f, Flat) for f in self.form_factors)

    def projectors(self) -> np.ndarray:
        """Rank-one coupling projectors |beta_l><beta_l|, shape (r, n, n)."""
        return np.einsum("ri,rj->rij", self.betas, self.betas.conj())


@dataclass(frozen=True)
class MemoryKernel:
    """Matrix kernel samples G(t_k) on a uniform time grid."""

    times: np.ndarray
    samples: np.ndarray  # (K+1, n, n)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0


@dataclass(frozen=True)
class DiscretizedBath:
    """Midpoint-rule quadrature of the coupling continuum.

    Per channel j the grid is omega_{j,k} in [omega0_j - W, omega0_j + W]
    with spacing delta_omega = 2W/M, and the mode coupling amplitude is
    g_{j,k} = f_j(omega_{j,k}) * sqrt(delta_omega) (real, phase fixed to 0).
    """

    omegas: np.ndarray  # (r, M)
    amplitudes: np.ndarray  # (r, M)
    half_width: float
    modes_per_channel: int

    @property
    def delta_omega(self) -> float:
        return 2 * self.half_width / self.modes_per_channel

    @property
    def recurrence_time(self) -> float:
        """Horizon 2*pi/delta_omega beyond which the finite bath echoes."""
        return 2 * np.pi / self.delta_omega

    @property
    def total_modes(self) -> int:
        return self.omegas.size


def uniform_grid(horizon: float, step: float) -> np.ndarray:
    """Time grid 0, h, ..., T with T/h integer (to 1e-9 relative)."""
    if horizon <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    count = round(horizon / step)
    if abs(count * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be an integer multiple of the step")
    return np.arange(count + 1) * step


def eval_kernel(spec: ModelSpec, grid: np.ndarray) -> MemoryKernel:
    """Evaluate the memory kernel G(t) on a uniform time grid.

    Raises FlatKernelNotSampleable when any channel is flat: the kernel
    of a flat channel is a Dirac delta, handled by the closed-form
    propagator instead.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1:
        steps = np.diff(grid)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1e-30):
            raise ValueError("kernel evaluation requires a uniform grid")
    if spec.any_flat:
        raise FlatKernelNotSampleable(
            "flat coupling has a delta kernel; use the closed-form propagator"
        )
    scalars = np.zeros((spec.r, grid.size), dtype=complex)
    for j, ff in enumerate(spec.form_factors):
        scalars[j] = ff.fourier(grid)
    samples = -1j * np.einsum("rk,rij->kij", scalars, spec.projectors())
    return MemoryKernel(times=grid, samples=samples)


def discretize_bath(spec: ModelSpec, half_width: float, modes_per_channel: int) -> DiscretizedBath:
    """Replace each coupling continuum by M midpoint modes on a window of
    half-width W around the channel center frequency."""
    if half_width <= 0:
        raise InvalidBandwidth("discretization half-width must be positive")
    if modes_per_channel < 2:
        raise ValueError("need at least two modes per channel")
    delta = 2 * half_width / modes_per_channel
    omegas = np.empty((spec.r, modes_per_channel))
    amps = np.empty((spec.r, modes_per_channel))
    offsets = -half_width + (np.arange(modes_per_channel) + 0.5) * delta
    for j, ff in enumerate(spec.form_factors):
        center = getattr(ff, "omega0", 0.0)
        omegas[j] = center + offsets
        amps[j] = np.sqrt(ff.density(omegas[j]) * delta)
    return DiscretizedBath(
        omegas=omegas,
        amplitudes=amps,
        half_width=half_width,
        modes_per_channel=modes_per_channel,
    )


# -- model ingestion ---------------------------------------------------------


def _complex_array(data, shape) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape != shape + (2,):
        raise ValueError(f"expected [re, im] pairs with shape {shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _form_factor_from_json(obj: dict) -> FormFactor:
    kind = obj.get("kind")
    if kind == "flat":
        return Flat(gamma=float(obj["gamma"]))
    if kind == "lorentzian":
        return Lorentzian(
            gamma=float(obj["gamma"]),
            lam=float(obj["lambda"]),
            omega0=float(obj.get("omega0", 0.0)),
        )
    if kind == "box_window":
        return BoxWindow(
            gamma=float(obj["gamma"]),
            half_width=float(obj["half_width"]),
            omega0=float(obj.get("omega0", 0.0)),
        )
    if kind == "tabulated":
        return Tabulated(omega=np.asarray(obj["omega"], dtype=float),
                         weight=np.asarray(obj["weight"], dtype=float))
    raise ValueError(f"unknown form factor kind: {kind!r}")


def model_from_dict(data: dict) -> ModelSpec:
    """Build a ModelSpec from parsed JSON.

    Complex matrices are encoded as row-major arrays of [re, im] pairs;
    form factors as tagged objects, e.g.
    {"kind": "lorentzian", "gamma": 1.0, "lambda": 1.0, "omega0": 0.0}.
    """
    n = int(data["n"])
    r = int(data["r"])
    H_e = _complex_array(data["H_e"], (n, n))
    betas = _complex_array(data["betas"], (r, n))
    ffs = tuple(_form_factor_from_json(obj) for obj in data["form_factors"])
    return ModelSpec(n=n, r=r, H_e=H_e, betas=betas, form_factors=ffs)


def load_model(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def model_to_dict(spec: ModelSpec) -> dict:
    """Inverse of model_from_dict (used by tests and tooling)."""

    def pairs(arr):
        stacked = np.stack([arr.real, arr.imag], axis=-1)
        return stacked.tolist()

    ffs = []
    for ff in spec.form_factors:
        if isinstance(ff, Flat):
            ffs.append({"kind": "flat", "gamma": ff.gamma})
        elif isinstance(ff, Lorentzian):
            ffs.append({"kind": "lorentzian", "gamma": ff.gamma, "lambda": ff.lam, "omega0": ff.omega0})
        elif isinstance(ff, BoxWindow):
            ffs.append({"kind": "box_window", "gamma": ff.gamma, "half_width": ff.half_width, "omega0": ff.omega0})
        else:
            ffs.append({"kind": "tabulated", "omega": ff.omega.tolist(), "weight": ff.weight.tolist()})
    return {"n": spec.n, "r": spec.r, "H_e": pairs(spec.H_e), "betas": pairs(spec.betas), "form_factors": ffs}
