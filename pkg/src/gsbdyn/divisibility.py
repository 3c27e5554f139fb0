"""Divisibility classification of a survival-operator family.

P-divisibility of the reduced maps is equivalent to monotone decrease of
||A(t)||_op, and (for invertible A) equivalent to CP-divisibility; a
semigroup additionally satisfies A(t+s) = A(t) A(s).  The classifier
decides monotonicity by forward differences of the operator norm on the
solver's own grid and cross-checks every one-step propagator through the
sign of its smallest Choi eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import choi, SINGULARITY_CUTOFF
from .dynamics import SurvivalOperator, operator_norm, semigroup_residual
from .errors import NonUniformGrid

SEMIGROUP_TOL = 1e-8


@dataclass(frozen=True)
class DivisibilityReport:
    """Per-time diagnostics plus summary flags.

    step_choi_min[k] is the smallest Choi eigenvalue of the one-step
    propagator from t_k to t_{k+1} (nan where A(t_k) is singular and the
    point was excluded).
    """

    times: np.ndarray
    opnorms: np.ndarray
    dnorm_dt: np.ndarray  # forward differences, length K
    step_choi_min: np.ndarray  # length K
    excluded: np.ndarray  # bool, length K+1: numerically singular grid points
    cp_divisible: bool
    p_divisible: bool
    semigroup: bool
    first_violation_time: float | None
    tol: float
    semigroup_tol: float
    semigroup_residual: float

    def mono_flags(self) -> np.ndarray:
        """Per-step flag: norm non-increasing within tolerance."""
        return self.opnorms[1:] - self.opnorms[:-1] <= self.tol

    def choi_flags(self) -> np.ndarray:
        """Per-step flag: one-step propagator CP within tolerance."""
        return self.step_choi_min >= -self.tol


def classify(A: SurvivalOperator, tol: float | None = None,
             semigroup_tol: float = SEMIGROUP_TOL) -> DivisibilityReport:
    """Classify the family as CP-/P-divisible and/or a semigroup.

    Grid points where A is numerically singular are flagged and excluded
    from the one-step propagator check (the divisibility notion assumes
    invertibility).
    """
    times = A.times
    if times.size > 1:
        steps = np.diff(times)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1e-30):
            raise NonUniformGrid("classification requires a uniform grid")
    K = times.size - 1
    norms = np.array([operator_norm(M) for M in A.samples])
    if tol is None:
        tol = 1e-9 * (1.0 + float(norms.max(initial=0.0)))

    h = A.step if K > 0 else 1.0
    dnorm = (norms[1:] - norms[:-1]) / h if K > 0 else np.zeros(0)

    excluded = np.zeros(times.size, dtype=bool)
    for k in range(times.size):
        svals = np.linalg.svd(A.samples[k], compute_uv=False)
        excluded[k] = svals[-1] < SINGULARITY_CUTOFF * max(1.0, float(svals[0]))

    step_min = np.full(K, np.nan)
    for k in range(K):
        if excluded[k]:
            continue
        V = np.linalg.solve(A.samples[k].T, A.samples[k + 1].T).T
        step_min[k] = choi(V).min_eigenvalue()

    mono_ok = norms[1:] - norms[:-1] <= tol
    choi_ok = np.where(np.isnan(step_min), True, step_min >= -tol)
    p_div = bool(np.all(mono_ok))
    cp_div = bool(np.all(choi_ok))

    first_violation = None
    viol = ~(mono_ok & choi_ok)
    if np.any(viol):
        first_violation = float(times[int(np.argmax(viol))])

    residual = semigroup_residual(A)
    return DivisibilityReport(
        times=times,
        opnorms=norms,
        dnorm_dt=dnorm,
        step_choi_min=step_min,
        excluded=excluded,
        cp_divisible=cp_div,
        p_divisible=p_div,
        semigroup=residual <= semigroup_tol,
        first_violation_time=first_violation,
        tol=float(tol),
        semigroup_tol=float(semigroup_tol),
        semigroup_residual=float(residual),
    )


def _hermitian_samples(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Gaussian Hermitian test operators; every other one made traceless."""
    out = np.empty((count, dim, dim), dtype=complex)
    for i in range(count):
        Z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        X = 0.5 * (Z + Z.conj().T)
        if i % 2 == 1:
            X -= np.trace(X) / dim * np.eye(dim)
        out[i] = X
    return out


def trace_norm_contraction_scan(A: SurvivalOperator, samples: int = 100, seed: int = 202) -> float:
    """Worst observed forward-difference derivative of t -> ||L_t(X)||_1
    over random Hermitian X.

    P-divisibility predicts a nonpositive result (up to grid slack);
    a clearly positive value falsifies it.
    """
    K = A.times.size - 1
    if K <= 0:
        return 0.0
    h = A.step
    dim = A.n + 1
    rng = np.random.default_rng(seed)
    xs = _hermitian_samples(rng, dim, samples)
    n = A.n
    At = A.samples  # (K+1, n, n)
    eye = np.eye(n)
    worst = -np.inf
    for X in xs:
        out = np.zeros((K + 1, dim, dim), dtype=complex)
        out[:, :n, :n] = np.einsum("kab,bc,kdc->kad", At, X[:n, :n], At.conj())
        out[:, :n, n] = np.einsum("kab,b->ka", At, X[:n, n])
        out[:, n, :n] = np.conj(out[:, :n, n])
        defect = eye[None] - np.einsum("kba,kbc->kac", At.conj(), At)
        out[:, n, n] = X[n, n] + np.einsum("kab,ba->k", defect, X[:n, :n])
        eigs = np.linalg.eigvalsh(out)
        tnorm = np.abs(eigs).sum(axis=1)
        worst = max(worst, float(np.max(np.diff(tnorm) / h)))
    return worst
