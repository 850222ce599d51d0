"""Dense complex tensor algebra with a fixed layout convention.

Convention used throughout the package:

* Linear layout is first-index-fastest (Fortran / column-major order).
* ``unfold(A, n)`` places mode-``n`` fibers as columns; among the remaining
  modes the lowest one varies fastest.
* Under this convention a Tucker product ``core x_0 U0 x_1 U1 ... x_{D-1} U_{D-1}``
  unfolds as ``U_n @ unfold(core, n) @ kron(U_{D-1}, ..., U_{n+1}, U_{n-1}, ..., U_0).T``,
  i.e. the Kronecker chain runs over the remaining factors in descending
  mode order.
* ``kronecker(A, B)`` lets the second factor's index vary fastest, so that
  ``vec(A @ B @ C) == kronecker(C.T, A) @ vec(B)`` and
  ``vec(A @ diag(b) @ C) == khatri_rao(C.T, A) @ b`` hold exactly.

Modes are 0-based.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidModeError, ShapeError


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the entries of ``a`` with the first index varying fastest."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec` for a ``rows x cols`` matrix."""
    v = np.asarray(v).reshape(-1)
    if v.size != rows * cols:
        raise ShapeError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def unfold(a: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding: ``a.shape[mode]`` rows, remaining modes as
    columns with the lowest remaining mode varying fastest."""
    a = np.asarray(a)
    if not 0 <= mode < a.ndim:
        raise InvalidModeError(f"mode {mode} out of range for order-{a.ndim} tensor")
    return np.reshape(np.moveaxis(a, mode, 0), (a.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, shape: tuple[int, ...]) -> np.ndarray:
    """Rebuild a tensor of ``shape`` from its mode-``mode`` unfolding."""
    m = np.asarray(m)
    shape = tuple(int(s) for s in shape)
    if not 0 <= mode < len(shape):
        raise InvalidModeError(f"mode {mode} out of range for shape {shape}")
    if m.shape != (shape[mode], int(np.prod(shape)) // shape[mode]):
        raise ShapeError(
            f"matrix of shape {m.shape} is not a mode-{mode} unfolding of {shape}")
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    return np.moveaxis(np.reshape(m, moved, order="F"), 0, mode)


def mode_product(a: np.ndarray, b: np.ndarray, mode: int) -> np.ndarray:
    """n-mode product: fold back ``b @ unfold(a, mode)``."""
    a, b = np.asarray(a), np.asarray(b)
    if b.ndim != 2:
        raise ShapeError("mode_product factor must be a matrix")
    if not 0 <= mode < a.ndim:
        raise InvalidModeError(f"mode {mode} out of range for order-{a.ndim} tensor")
    if b.shape[1] != a.shape[mode]:
        raise ShapeError(
            f"factor with {b.shape[1]} columns cannot act on extent {a.shape[mode]}")
    new_shape = a.shape[:mode] + (b.shape[0],) + a.shape[mode + 1:]
    return fold(b @ unfold(a, mode), mode, new_shape)


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, second factor's index fastest (textbook layout)."""
    return np.kron(np.asarray(a), np.asarray(b))


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(
            f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise product of two equally shaped arrays."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def pinv(m: np.ndarray, tol: float = 1e-12, return_rank: bool = False):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``tol * sigma_max`` are treated as zero.  With
    ``return_rank=True`` also returns the effective rank as a diagnostic.
    """
    m = np.atleast_2d(np.asarray(m))
    if m.size == 0:
        raise ShapeError("pinv of an empty matrix")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size and s[0] > 0:
        keep = s > tol * s[0]
    else:
        keep = np.zeros_like(s, dtype=bool)
    rank = int(np.count_nonzero(keep))
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    out = (vh.conj().T * inv_s) @ u.conj().T
    return (out, rank) if return_rank else out


def build_core(n: int) -> np.ndarray:
    """Known core tensor of the nested Tucker model.

    Shape ``(n, n, n**4, n**2)``; its mode-2 unfolding (0-based) is the
    ``n**4 x n**4`` identity, equivalently ``core[i1, i2, i3, i4] == 1`` iff
    ``i3 == i1 + n*i2 + n*n*i4``.
    """
    if n < 1:
        raise ShapeError("group size must be >= 1")
    core = np.zeros((n, n, n ** 4, n ** 2), dtype=np.complex128)
    i1, i2, i4 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n * n),
                             indexing="ij")
    core[i1, i2, i1 + n * i2 + n * n * i4, i4] = 1.0
    return core
