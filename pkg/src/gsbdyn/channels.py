"""Reduced maps built from a survival operator.

For a system with excited block rho_e, coherence column |w> and ground
population rho_g, the reduced map acts blockwise:

    rho_e -> A rho_e A^dag
    |w>   -> A |w>
    rho_g -> rho_g + Tr[(1 - A^dag A) rho_e]

This extends linearly to arbitrary (non-Hermitian) matrices, with the
two off-diagonal blocks transformed independently.  The module also
provides Choi matrices, Kraus sets, positivity tests and the
intermediate propagator A(t, s) = A(t) A(s)^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SurvivalOperator, operator_norm
from .errors import NotContractive, SingularSurvival

CP_EIG_TOL = 1e-10
CONTRACTIVITY_SLACK = 1e-10
SINGULARITY_CUTOFF = 1e-12


@dataclass(frozen=True)
class DensityBlock:
    """Block form of a system operator: excited block, coherence column,
    ground population."""

    rho_e: np.ndarray
    w: np.ndarray
    rho_g: complex

    @property
    def n(self) -> int:
        return np.asarray(self.rho_e).shape[0]

    def assemble(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n + 1, n + 1), dtype=complex)
        out[:n, :n] = self.rho_e
        out[:n, n] = self.w
        out[n, :n] = np.conj(self.w)
        out[n, n] = self.rho_g
        return out

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "DensityBlock":
        mat = np.asarray(mat, dtype=complex)
        n = mat.shape[0] - 1
        return cls(rho_e=mat[:n, :n].copy(), w=mat[:n, n].copy(), rho_g=complex(mat[n, n]))

    def trace(self) -> complex:
        return complex(np.trace(self.rho_e) + self.rho_g)

    def validate_state(self, tol: float = 1e-12) -> None:
        mat = self.assemble()
        if np.max(np.abs(mat - mat.conj().T)) > tol:
            raise ValueError("state is not Hermitian")
        if abs(self.trace() - 1) > tol:
            raise ValueError("state trace differs from 1")
        if np.min(np.linalg.eigvalsh(mat)) < -tol:
            raise ValueError("state is not positive semidefinite")


def apply_block_map(A_t: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Blockwise channel action on an arbitrary (n+1)x(n+1) matrix."""
    A_t = np.asarray(A_t, dtype=complex)
    mat = np.asarray(mat, dtype=complex)
    n = A_t.shape[0]
    out = np.zeros_like(mat)
    Me = mat[:n, :n]
    out[:n, :n] = A_t @ Me @ A_t.conj().T
    out[:n, n] = A_t @ mat[:n, n]
    out[n, :n] = mat[n, :n] @ A_t.conj().T
    out[n, n] = mat[n, n] + np.trace((np.eye(n) - A_t.conj().T @ A_t) @ Me)
    return out


def apply_channel(A_t: np.ndarray, rho: DensityBlock) -> DensityBlock:
    """Amplitude-damping action on a block-form state; trace preserving."""
    return DensityBlock.from_matrix(apply_block_map(A_t, rho.assemble()))


def superoperator_matrix(A_t: np.ndarray) -> np.ndarray:
    """Column-stacking matrix representation of the channel, (n+1)^2 square."""
    A_t = np.asarray(A_t, dtype=complex)
    d = A_t.shape[0] + 1
    S = np.zeros((d * d, d * d), dtype=complex)
    for j in range(d):
        for i in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            S[:, j * d + i] = apply_block_map(A_t, E).T.reshape(-1)
    return S


@dataclass(frozen=True)
class ChoiMatrix:
    """Unnormalized Choi operator sum_ij |i><j| (x) L(|i><j|), trace n+1."""

    matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])


def choi(A_t: np.ndarray) -> ChoiMatrix:
    A_t = np.asarray(A_t, dtype=complex)
    d = A_t.shape[0] + 1
    C = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            C[i * d : (i + 1) * d, j * d : (j + 1) * d] = apply_block_map(A_t, E)
    # enforce exact Hermiticity against roundoff before eigensolves
    C = 0.5 * (C + C.conj().T)
    return ChoiMatrix(matrix=C)


def is_cp(A_t: np.ndarray, tol: float = CP_EIG_TOL) -> bool:
    return choi(A_t).min_eigenvalue() >= -tol


def is_positive_map(A_t: np.ndarray, samples: int = 500, seed: int = 7, tol: float = CP_EIG_TOL) -> bool:
    """Sampled positivity: apply the channel to Haar-random pure states and
    look for a negative output eigenvalue.  Falsification only; the norm
    criterion is the decision procedure."""
    A_t = np.asarray(A_t, dtype=complex)
    d = A_t.shape[0] + 1
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        psi /= np.linalg.norm(psi)
        out = apply_block_map(A_t, np.outer(psi, psi.conj()))
        if np.min(np.linalg.eigvalsh(0.5 * (out + out.conj().T))) < -tol:
            return False
    return True


def kraus_set(A_t: np.ndarray) -> list[np.ndarray]:
    """Kraus operators of the channel: the block embedding of A plus one
    rank-one lowering operator per nonzero eigenvalue of 1 - A^dag A."""
    A_t = np.asarray(A_t, dtype=complex)
    n = A_t.shape[0]
    if operator_norm(A_t) > 1 + CONTRACTIVITY_SLACK:
        raise NotContractive("survival operator norm exceeds 1; no Kraus set exists")
    K0 = np.zeros((n + 1, n + 1), dtype=complex)
    K0[:n, :n] = A_t
    K0[n, n] = 1.0
    ops = [K0]
    defect = np.eye(n) - A_t.conj().T @ A_t
    eigvals, eigvecs = np.linalg.eigh(0.5 * (defect + defect.conj().T))
    for mu, vec in zip(eigvals, eigvecs.T):
        if mu <= CONTRACTIVITY_SLACK:
            continue
        K = np.zeros((n + 1, n + 1), dtype=complex)
        K[n, :n] = np.sqrt(mu) * vec.conj()
        ops.append(K)
    return ops


def choi_from_kraus(ops: list[np.ndarray]) -> ChoiMatrix:
    """Choi operator rebuilt from a Kraus set (gauge-invariant comparison)."""
    d = ops[0].shape[0]
    C = np.zeros((d * d, d * d), dtype=complex)
    for K in ops:
        vecK = K.T.reshape(-1)  # component at index i*d + a is K[a, i]
        C += np.outer(vecK, vecK.conj())
    return ChoiMatrix(matrix=C)


def propagator(A: SurvivalOperator, s: float, t: float) -> np.ndarray:
    """Intermediate-map matrix A(t, s) = A(t) A(s)^{-1} for grid times
    t >= s.  Raises SingularSurvival when A(s) is numerically singular
    (smallest singular value below 1e-12 relative to the family scale)."""
    if t < s:
        raise ValueError("propagator requires t >= s")
    As = A.at(s)
    At = A.at(t)
    svals = np.linalg.svd(As, compute_uv=False)
    scale = max(1.0, float(svals[0]))
    if svals[-1] < SINGULARITY_CUTOFF * scale:
        raise SingularSurvival(f"survival operator singular at s={s}")
    return np.linalg.solve(As.T, At.T).T


@dataclass(frozen=True)
class ChannelFamily:
    """The reduced maps of a sampled survival-operator family.

    Representations (superoperator matrix, Choi operator, Kraus set) are
    derived per call from the stored samples; nothing mutable is shared,
    so a family may be used concurrently.
    """

    survival: SurvivalOperator

    @property
    def system_dim(self) -> int:
        return self.survival.n + 1

    def apply(self, t: float, rho: DensityBlock) -> DensityBlock:
        return apply_channel(self.survival.at(t), rho)

    def superoperator_at(self, t: float) -> np.ndarray:
        return superoperator_matrix(self.survival.at(t))

    def choi_at(self, t: float) -> ChoiMatrix:
        return choi(self.survival.at(t))

    def kraus_at(self, t: float) -> list[np.ndarray]:
        return kraus_set(self.survival.at(t))

    def trace_preservation_defect(self, t: float) -> float:
        """max |sum_K K^dag K - 1| entry; zero for a trace-preserving map."""
        ops = self.kraus_at(t)
        total = sum(K.conj().T @ K for K in ops)
        return float(np.max(np.abs(total - np.eye(self.system_dim))))


def choi_scan(A: SurvivalOperator) -> tuple[np.ndarray, np.ndarray]:
    """Choi eigenvalues of the reduced map at every grid time.

    Returns (eigenvalues sorted descending, shape (K+1, (n+1)^2)) and the
    per-time cp flag."""
    d2 = (A.n + 1) ** 2
    eigs = np.empty((A.times.size, d2))
    for k in range(A.times.size):
        eigs[k] = choi(A.samples[k]).eigenvalues()[::-1]
    cp_flags = eigs[:, -1] >= -CP_EIG_TOL
    return eigs, cp_flags
