"""Isotropic material tensor acting on symmetric 2x2 matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularMaterial


@dataclass(frozen=True)
class MaterialTensor:
    """C N = D ((1 - nu) N + nu tr(N) I); (D, nu) = (1, 0) is the identity."""

    D: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"stiffness D must be positive, got {self.D}")
        if not -1.0 < self.nu < 1.0:
            raise ValueError(f"Poisson ratio must lie in (-1, 1), got {self.nu}")

    @property
    def is_identity(self) -> bool:
        return self.D == 1.0 and self.nu == 0.0

    @property
    def trace_factor(self) -> float:
        """tr(C^-1 M) = trace_factor * tr(M)."""
        return 1.0 / (self.D * (1.0 + self.nu))

    def _check(self):
        if abs(1.0 - self.nu) < 1e-12 or abs(1.0 + self.nu) < 1e-12:
            raise SingularMaterial(f"material tensor is singular for nu={self.nu}")


def _eye_like(M):
    return np.broadcast_to(np.eye(2), M.shape) * 1.0


def apply_C(mat: MaterialTensor, N) -> np.ndarray:
    """Apply the material tensor to one or a stack (..., 2, 2) of symmetric matrices."""
    N = np.asarray(N, dtype=float)
    tr = np.trace(N, axis1=-2, axis2=-1)[..., None, None]
    return mat.D * ((1.0 - mat.nu) * N + mat.nu * tr * _eye_like(N))


def apply_Cinv(mat: MaterialTensor, M) -> np.ndarray:
    """Inverse of :func:`apply_C`: (M - nu/(1+nu) tr(M) I) / (D (1 - nu))."""
    mat._check()
    M = np.asarray(M, dtype=float)
    tr = np.trace(M, axis1=-2, axis2=-1)[..., None, None]
    return (M - mat.nu / (1.0 + mat.nu) * tr * _eye_like(M)) / (mat.D * (1.0 - mat.nu))


def cinv_inner(mat: MaterialTensor, S, T) -> np.ndarray:
    """(C^-1 S) : T for symmetric matrices stored as (..., 3) = (11, 22, 12)."""
    S = np.asarray(S)
    T = np.asarray(T)
    frob = S[..., 0] * T[..., 0] + S[..., 1] * T[..., 1] + 2.0 * S[..., 2] * T[..., 2]
    trs = S[..., 0] + S[..., 1]
    trt = T[..., 0] + T[..., 1]
    return (frob - mat.nu / (1.0 + mat.nu) * trs * trt) / (mat.D * (1.0 - mat.nu))
