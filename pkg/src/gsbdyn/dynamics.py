"""Survival-operator dynamics.

The excited-sector evolution operator A(t) (a scalar a(t) for a single
excited level) obeys

    i dA/dt = H_e A(t) + integral_0^t G(t-s) A(s) ds,   A(0) = 1,

which is integrated with an explicit predictor (rectangle memory sum)
plus trapezoidal corrector, second order in the step.  For flat
coupling the kernel is a delta and the solution is the exponential
family A(t) = exp(-(i H_e + Gamma/2) t) with dissipation operator
Gamma = sum_l gamma_l |beta_l><beta_l|.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import MixedKinds, StepTooCoarse, TimeNotOnGrid
from .spectral import ModelSpec, eval_kernel, uniform_grid

STABILITY_MARGIN = 0.1
NORM_SLACK = 1e-8


def operator_norm(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on A^dag A.

    Deterministic: starts from the normalized all-ones vector, with a
    second fixed ramp start as a tie-break against the (measure-zero)
    case where the first start is orthogonal to the top singular space.
    """
    A = np.asarray(matrix, dtype=complex)
    n = A.shape[0]
    if n == 1:
        return float(abs(A[0, 0]))
    B = A.conj().T @ A
    best = 0.0
    for start in (np.ones(n), 1.0 + np.arange(n)):
        v = start / np.linalg.norm(start)
        lam = 0.0
        for _ in range(max_iter):
            w = B @ v
            norm_w = np.linalg.norm(w)
            if norm_w == 0.0:
                lam = 0.0
                break
            lam_new = float(np.real(np.vdot(v, w)))
            v = w / norm_w
            if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
                lam = lam_new
                break
            lam = lam_new
        best = max(best, lam)
    return float(np.sqrt(max(best, 0.0)))


@dataclass(frozen=True)
class SurvivalOperator:
    """Time-sampled excited-sector evolution operators A(t_k).

    provenance is one of {"volterra", "closed_form_flat", "fock_extracted"}.
    """

    times: np.ndarray
    samples: np.ndarray  # (K+1, n, n)
    provenance: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[0] != times.size:
            raise ValueError("samples must be (K+1, n, n) matching the grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def index_of(self, t: float) -> int:
        if self.times.size == 1:
            if abs(t - self.times[0]) < 1e-9:
                return 0
            raise TimeNotOnGrid(f"t={t} not on the sampled grid")
        k = round(t / self.step)
        if k < 0 or k >= self.times.size or abs(k * self.step - t) > 1e-9 * max(1.0, abs(t)):
            raise TimeNotOnGrid(f"t={t} not on the sampled grid (step {self.step})")
        return int(k)

    def at(self, t: float) -> np.ndarray:
        return self.samples[self.index_of(t)]


@dataclass(frozen=True)
class GKLSGenerator:
    """Semigroup generator data for all-flat coupling: effective excited
    Hamiltonian and positive-semidefinite dissipation operator."""

    H_eff: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.Gamma, dtype=complex)
        if np.max(np.abs(G - G.conj().T)) > 1e-12:
            raise ValueError("dissipation operator must be Hermitian")
        if np.min(np.linalg.eigvalsh(G)) < -1e-12:
            raise ValueError("dissipation operator must be positive semidefinite")

    @property
    def rank(self) -> int:
        svals = np.linalg.svd(np.asarray(self.Gamma), compute_uv=False)
        if svals.size == 0 or svals[0] == 0.0:
            return 0
        return int(np.sum(svals > 1e-12 * svals[0]))


def solve_survival(
    spec: ModelSpec,
    horizon: float,
    step: float,
    *,
    allow_coarse: bool = False,
) -> SurvivalOperator:
    """Integrate the memory-kernel equation on a uniform grid.

    Second-order accurate: Euler predictor with a left-rectangle memory
    sum, trapezoidal corrector with trapezoidal memory sums.  Raises
    StepTooCoarse when h * ||G(0)|| > 0.1 unless allow_coarse is set.
    """
    grid = uniform_grid(horizon, step)
    kernel = eval_kernel(spec, grid)  # raises FlatKernelNotSampleable for flat kinds
    G = kernel.samples
    n = spec.n
    h = step
    if not allow_coarse and h * operator_norm(G[0]) > STABILITY_MARGIN:
        raise StepTooCoarse(
            f"h*||G(0)|| = {h * operator_norm(G[0]):.3g} > {STABILITY_MARGIN}; "
            "reduce the step or pass allow_coarse=True"
        )
    H = spec.H_e
    K = grid.size - 1
    A = np.empty((K + 1, n, n), dtype=complex)
    A[0] = np.eye(n)
    for k in range(K):
        # sum_{j=0..k-1} G(t_k - t_j) A_j  (zero for k = 0)
        if k > 0:
            past = np.matmul(G[k:0:-1], A[:k]).sum(axis=0)
        else:
            past = np.zeros((n, n), dtype=complex)
        rect_mem = h * past
        trap_mem = h * (past - 0.5 * G[k] @ A[0] + 0.5 * G[0] @ A[k]) if k > 0 else np.zeros((n, n), dtype=complex)

        f_rect = -1j * (H @ A[k]) - 1j * rect_mem
        predicted = A[k] + h * f_rect

        f_trap = -1j * (H @ A[k]) - 1j * trap_mem
        # memory sum at t_{k+1} with the predicted endpoint
        past_next = np.matmul(G[k + 1 : 0 : -1], A[: k + 1]).sum(axis=0)
        trap_next = h * (past_next - 0.5 * G[k + 1] @ A[0] + 0.5 * G[0] @ predicted)
        f_next = -1j * (H @ predicted) - 1j * trap_next
        A[k + 1] = A[k] + 0.5 * h * (f_trap + f_next)
    return SurvivalOperator(times=grid, samples=A, provenance="volterra")


def gkls_generator(spec: ModelSpec) -> GKLSGenerator:
    """Effective Hamiltonian and dissipation operator for all-flat coupling.

    Gamma = sum_l gamma_l |beta_l><beta_l|; its rank equals the number of
    bath channels whenever the coupling vectors are linearly independent.
    """
    if not spec.all_flat:
        raise MixedKinds("semigroup generator requires every form factor to be flat")
    rates = np.array([ff.gamma for ff in spec.form_factors])
    Gamma = np.einsum("r,rij->ij", rates, spec.projectors())
    gen = GKLSGenerator(H_eff=spec.H_e, Gamma=Gamma)
    if gen.rank != spec.r:
        raise ValueError(
            f"dissipation operator has rank {gen.rank} but the model has {spec.r} "
            "bath channels; coupling vectors must be linearly independent"
        )
    return gen


def closed_form_flat(spec: ModelSpec, horizon: float, step: float) -> SurvivalOperator:
    """Exact exponential family A(t) = exp(-(i H_e + Gamma/2) t) for
    all-flat coupling, sampled by repeated application of the one-step
    matrix exponential (exactly a semigroup on the grid)."""
    if spec.any_flat and not spec.all_flat:
        raise MixedKinds("cannot mix flat and non-flat channels in the closed form")
    gen = gkls_generator(spec)  # raises MixedKinds when not all flat
    grid = uniform_grid(horizon, step)
    M = -(1j * gen.H_eff + 0.5 * gen.Gamma)
    P = scipy.linalg.expm(M * step)
    A = np.empty((grid.size, spec.n, spec.n), dtype=complex)
    A[0] = np.eye(spec.n)
    for k in range(grid.size - 1):
        A[k + 1] = P @ A[k]
    return SurvivalOperator(times=grid, samples=A, provenance="closed_form_flat")


def semigroup_residual(A: SurvivalOperator, max_points: int = 64) -> float:
    """max over a deterministic triangular sample of (s, t) pairs of
    ||A(t+s) - A(t) A(s)||_op; zero (to tolerance) iff the sampled family
    is a semigroup on its grid.

    The sample takes every (K // max_points)-th grid index for s and t
    with s <= t and s + t still on the grid.
    """
    K = A.times.size - 1
    if K <= 0:
        return 0.0
    stride = max(1, K // max_points)
    idx = range(stride, K + 1, stride)
    worst = 0.0
    for i in idx:
        for j in idx:
            if j < i or i + j > K:
                continue
            residual = operator_norm(A.samples[i + j] - A.samples[j] @ A.samples[i])
            worst = max(worst, residual)
    return worst


# -- CSV serialization -------------------------------------------------------


def survival_to_csv(A: SurvivalOperator, extra_metadata: dict | None = None) -> str:
    """Serialize to CSV: one row per time, columns t then Re/Im of each
    matrix entry row-major.  A leading comment line carries n, the
    provenance flag and any extra metadata."""
    n = A.n
    meta = {"n": n, "provenance": A.provenance}
    if extra_metadata:
        meta.update(extra_metadata)
    buf = io.StringIO()
    buf.write("# " + ",".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t"]
    for i in range(n):
        for j in range(n):
            header += [f"re_A_{i + 1}_{j + 1}", f"im_A_{i + 1}_{j + 1}"]
    writer.writerow(header)
    for t, mat in zip(A.times, A.samples):
        row = [repr(float(t))]
        for i in range(n):
            for j in range(n):
                row += [repr(float(mat[i, j].real)), repr(float(mat[i, j].imag))]
        writer.writerow(row)
    return buf.getvalue()


def survival_from_csv(text: str) -> tuple[SurvivalOperator, dict]:
    """Parse the survival CSV format; returns the operator and metadata."""
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing metadata comment line")
    meta = {}
    for item in lines[0][1:].strip().split(","):
        key, _, value = item.partition("=")
        meta[key.strip()] = value.strip()
    n = int(meta["n"])
    rows = list(csv.reader(lines[1:]))
    body = rows[1:]  # skip header row
    times = np.array([float(row[0]) for row in body])
    samples = np.empty((len(body), n, n), dtype=complex)
    for k, row in enumerate(body):
        vals = np.array([float(x) for x in row[1:]])
        samples[k] = (vals[0::2] + 1j * vals[1::2]).reshape(n, n)
    return SurvivalOperator(times=times, samples=samples, provenance=meta.get("provenance", "unknown")), meta
