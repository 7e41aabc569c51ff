"""Global system assembly over free degrees of freedom.

Fixed vertices are eliminated: their rows and columns never enter the
system. The sparsity pattern is computed once per solve and every element
entry is mapped to a slot of the CSC data array up front, so numeric
assembly is a single ordered scatter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kernels

try:
    from sksparse.cholmod import CholmodError, analyze

    HAVE_CHOLMOD = True
except ImportError:  # pragma: no cover - depends on the environment
    HAVE_CHOLMOD = False


class AssemblyError(ArithmeticError):
    pass


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DofMap:
    free_index: np.ndarray  # per vertex, -1 for fixed
    free_count: int

    @property
    def n_free_vertices(self) -> int:
        return self.free_count // 3

    def vertex_dofs(self) -> np.ndarray:
        """(n, 3) free DOF of each vertex coordinate, -1 when fixed."""
        fi = self.free_index
        d = 3 * fi[:, None] + np.arange(3)
        d[fi < 0] = -1
        return d

    def gather(self, x: np.ndarray) -> np.ndarray:
        """Free coordinates of an (n, 3) position array as a flat vector."""
        return np.asarray(x)[self.free_index >= 0].ravel()

    def scatter(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Copy of ``x`` with ``u`` added to the free coordinates."""
        y = np.array(x, dtype=float, copy=True)
        y[self.free_index >= 0] += np.asarray(u).reshape(-1, 3)
        return y


def make_dofmap(n_vertices: int, fixed) -> DofMap:
    is_fixed = np.zeros(n_vertices, dtype=bool)
    is_fixed[np.asarray(list(fixed), dtype=np.int64)] = True
    free_index = np.full(n_vertices, -1, dtype=np.int64)
    free_index[~is_fixed] = np.arange(int((~is_fixed).sum()))
    return DofMap(free_index, 3 * int((~is_fixed).sum()))


@dataclass(frozen=True)
class SparsityPattern:
    indptr: np.ndarray
    indices: np.ndarray
    slots: np.ndarray  # (m, 12, 12) CSC data position per element entry, -1 if dropped
    element_dofs: np.ndarray  # (m, 12) free DOF per local coordinate, -1 if fixed
    size: int

    @property
    def nnz(self) -> int:
        return len(self.indices)


def build_pattern(tets, dofmap: DofMap) -> SparsityPattern:
    """Symbolic structure of the free-DOF Hessian (full symmetric, CSC)."""
    tets = np.asarray(tets, dtype=np.int64)
    n = dofmap.free_count
    edofs = dofmap.vertex_dofs()[tets].reshape(len(tets), 12)
    rows = np.broadcast_to(edofs[:, :, None], (len(tets), 12, 12))
    cols = np.broadcast_to(edofs[:, None, :], (len(tets), 12, 12))
    valid = (rows >= 0) & (cols >= 0)
    keys = np.where(valid, cols * max(n, 1) + rows, -1)
    uniq = np.unique(keys[valid])
    slots = np.full(keys.shape, -1, dtype=np.int64)
    slots[valid] = np.searchsorted(uniq, keys[valid])
    col_of, row_of = np.divmod(uniq, max(n, 1))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, col_of + 1, 1)
    indptr = np.cumsum(indptr)
    return SparsityPattern(indptr, row_of.astype(np.int64), slots, edofs, n)


@dataclass
class GlobalSystem:
    energy: float
    gradient: np.ndarray
    hessian: sp.csc_matrix


def _check_finite(arr, what):
    bad = ~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1)
    if bad.any():
        raise AssemblyError(f"non-finite {what} in element {int(np.argmax(bad))}")


def assemble_gradient(gradients, pattern: SparsityPattern) -> np.ndarray:
    return kernels.scatter_add(pattern.element_dofs, np.asarray(gradients), pattern.size)


def assemble_hessian(hessians, pattern: SparsityPattern) -> sp.csc_matrix:
    data = kernels.scatter_add(pattern.slots, np.asarray(hessians), pattern.nnz)
    return sp.csc_matrix((data, pattern.indices, pattern.indptr), shape=(pattern.size, pattern.size))


def assemble(elems, pattern: SparsityPattern, hessians=None) -> GlobalSystem:
    """Sum element quadratics into the free-DOF system.

    ``hessians`` replaces ``elems.hessian`` (e.g. projected matrices) while
    energy and gradient still come from ``elems``.
    """
    H = elems.hessian if hessians is None else hessians
    _check_finite(np.atleast_1d(elems.value), "energy")
    _check_finite(elems.gradient, "gradient")
    _check_finite(H, "hessian")
    return GlobalSystem(
        float(np.sum(elems.value)),
        assemble_gradient(elems.gradient, pattern),
        assemble_hessian(H, pattern),
    )


def quadratic_form(hessians, pattern: SparsityPattern, u) -> float:
    """u^T H u summed element by element, without a global matrix."""
    u = np.append(np.asarray(u, dtype=float), 0.0)
    ue = u[pattern.element_dofs]  # -1 picks the appended zero
    return float(np.einsum("mi,mij,mj->", ue, np.asarray(hessians), ue))


def dense_scatter(hessians, pattern: SparsityPattern) -> np.ndarray:
    """Reference assembly: explicit sum of P_i^T H_i P_i in dense form."""
    n = pattern.size
    out = np.zeros((n, n))
    for e, dofs in enumerate(pattern.element_dofs):
        keep = np.nonzero(dofs >= 0)[0]
        out[np.ix_(dofs[keep], dofs[keep])] += hessians[e][np.ix_(keep, keep)]
    return out


class Factorization:
    """Cholesky factor of a symmetric positive-definite matrix.

    Uses CHOLMOD (supernodal LL^T) when scikit-sparse is importable, with the
    symbolic analysis cached on the instance; otherwise dense LAPACK.
    Raises :class:`NotPositiveDefinite` when the matrix is not PD.
    """

    def __init__(self, backend: str | None = None):
        if backend is None:
            backend = "cholmod" if HAVE_CHOLMOD else "dense"
        if backend == "cholmod" and not HAVE_CHOLMOD:
            raise RuntimeError("scikit-sparse is not installed")
        self.backend = backend
        self._symbolic = None
        self._pattern_key = None
        self._dense = None
        self.matrix = None

    def factor(self, H: sp.spmatrix, shift: float = 0.0) -> "Factorization":
        H = sp.csc_matrix(H)
        n = H.shape[0]
        if n == 0:
            raise AssemblyError("zero-dimensional system: every vertex is fixed")
        if shift:
            H = (H + shift * sp.identity(n, format="csc")).tocsc()
        self.matrix = H
        if self.backend == "cholmod":
            key = (n, H.indptr.tobytes(), H.indices.tobytes())
            try:
                if self._symbolic is None or key != self._pattern_key:
                    self._symbolic = analyze(H, mode="supernodal")
                    self._pattern_key = key
                self._symbolic.cholesky_inplace(H)
            except CholmodError as exc:
                raise NotPositiveDefinite(str(exc)) from exc
        else:
            try:
                self._dense = scipy.linalg.cho_factor(H.toarray(), lower=True, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NotPositiveDefinite(str(exc)) from exc
        return self

    def _raw_solve(self, b):
        if self.backend == "cholmod":
            return self._symbolic(b)
        return scipy.linalg.cho_solve(self._dense, b)

    def solve(self, rhs, rtol: float = 1e-8, max_refine: int = 3) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        u = self._raw_solve(rhs)
        if not np.all(np.isfinite(u)):
            raise NotPositiveDefinite("factorization produced non-finite solution")
        target = rtol * np.linalg.norm(rhs)
        for _ in range(max_refine):
            r = rhs - self.matrix @ u
            if np.linalg.norm(r) <= target:
                break
            u = u + self._raw_solve(r)
        return u


def factor_solve(system: GlobalSystem, rhs, factorization: Factorization | None = None) -> np.ndarray:
    """Solve H u = rhs with a Cholesky factorization of the system Hessian."""
    f = factorization or Factorization()
    return f.factor(system.hessian).solve(rhs)
