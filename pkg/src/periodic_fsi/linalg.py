"""Sparse solve helpers: direct factorization with an iterative fallback."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure


class SparseSolver:
    """Factorize ``A`` once and solve many right-hand sides.

    If the LU factorization fails the solver falls back to GMRES (or CG when
    ``symmetric`` is set), and raises :class:`SolverFailure` with the residual
    history when that does not reach ``rtol`` either.
    """

    def __init__(self, A, symmetric=False, rtol=1e-12, maxiter=5000, name="system"):
        self.A = sp.csc_matrix(A)
        self.symmetric = symmetric
        self.rtol = rtol
        self.maxiter = maxiter
        self.name = name
        try:
            self._lu = spla.splu(self.A)
        except RuntimeError:
            self._lu = None

    @property
    def shape(self):
        return self.A.shape

    def solve(self, b):
        b = np.asarray(b)
        if self._lu is not None:
            x = self._lu.solve(b)
            if np.all(np.isfinite(x)):
                return x
        return self._iterate(b)

    def _iterate(self, b):
        if b.ndim == 2:
            return np.column_stack([self._iterate(col) for col in b.T])
        history = []
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b)

        def record(x):
            history.append(float(np.linalg.norm(b - self.A @ x) / bnorm))

        method = spla.cg if self.symmetric else spla.gmres
        x, info = method(self.A, b, rtol=self.rtol, maxiter=self.maxiter,
                         callback=record, **({} if self.symmetric else {"callback_type": "x"}))
        res = np.linalg.norm(b - self.A @ x) / bnorm
        if info != 0 or res > 10 * self.rtol:
            raise SolverFailure(f"{self.name}: iterative solve stalled at residual {res:.3e}",
                                residual_history=history[-50:])
        return x
