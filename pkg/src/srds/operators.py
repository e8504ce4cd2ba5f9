"""Divergence-form elliptic operators with conormal (zero-flux) boundaries.

The operator A = div(a grad .) - c is discretized with cell-centered finite
volumes on a uniform box grid.  Face diffusivities are harmonic averages of
the adjacent cell coefficients, boundary faces carry zero flux, and the
zeroth-order coefficient c subtracts from the diagonal.  This preserves,
exactly at the discrete level, the structure the analysis relies on:
symmetry of the bilinear form, constants in the kernel for c = 0,
nonpositive spectrum for c >= 0, and the M-matrix property of (I - dt*A).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AuditError
from .grid import DomainGrid
from .linalg import ShiftedSolve, jacobi_cg


@dataclass(frozen=True)
class CoefficientField:
    """Per-cell diffusion tensor and zeroth-order coefficient.

    ``a`` has shape (n_total, dim, dim) and must be symmetric with
    eigenvalues in [eta, m_bound] at every cell; ``c`` has shape (n_total,).
    Only grid-aligned (diagonal) tensors are accepted by the assembler, see
    `assemble_operator`.
    """

    grid: DomainGrid
    a: np.ndarray
    c: np.ndarray
    eta: float
    m_bound: float

    def __post_init__(self):
        n, d = self.grid.n_total, self.grid.dim
        if self.a.shape != (n, d, d):
            raise AuditError("shape", f"a has shape {self.a.shape}, expected {(n, d, d)}")
        if self.c.shape != (n,):
            raise AuditError("shape", f"c has shape {self.c.shape}, expected {(n,)}")
        if not (self.eta > 0):
            raise AuditError("ellipticity", f"eta={self.eta} must be positive")
        if not np.allclose(self.a, np.swapaxes(self.a, 1, 2), rtol=0, atol=1e-14):
            raise AuditError("symmetry", "diffusion tensor not symmetric")
        eigs = np.linalg.eigvalsh(self.a)
        lo, hi = float(eigs.min()), float(eigs.max())
        if lo < self.eta - 1e-12 or hi > self.m_bound + 1e-12:
            raise AuditError(
                "ellipticity",
                f"tensor eigenvalues in [{lo:.6g}, {hi:.6g}] outside [eta={self.eta}, M={self.m_bound}]",
            )
        if not np.all(np.isfinite(self.c)):
            raise AuditError("bounded-c", "c has non-finite entries")

    @classmethod
    def constant(cls, grid: DomainGrid, a: float = 1.0, c: float = 0.0,
                 eta: float | None = None, m_bound: float | None = None) -> "CoefficientField":
        """Isotropic constant coefficients a*I and scalar c."""
        n, d = grid.n_total, grid.dim
        a_arr = np.tile(a * np.eye(d), (n, 1, 1))
        c_arr = np.full(n, float(c))
        return cls(grid, a_arr, c_arr,
                   eta=0.5 * a if eta is None else eta,
                   m_bound=2.0 * a if m_bound is None else m_bound)

    @classmethod
    def from_arrays(cls, grid: DomainGrid, a_diag: np.ndarray, c: np.ndarray,
                    eta: float, m_bound: float) -> "CoefficientField":
        """Diagonal tensor from per-cell per-axis values, shape (n_total, dim)."""
        n, d = grid.n_total, grid.dim
        a_diag = np.asarray(a_diag, dtype=float).reshape(n, d)
        a_arr = np.zeros((n, d, d))
        for i in range(d):
            a_arr[:, i, i] = a_diag[:, i]
        return cls(grid, a_arr, np.asarray(c, dtype=float).reshape(n), eta, m_bound)

    def descriptor(self) -> bytes:
        return (self.grid.descriptor() + self.a.tobytes() + self.c.tobytes()
                + repr((self.eta, self.m_bound)).encode())


def coefficient_field_from_csv(grid: DomainGrid, path, eta: float,
                               m_bound: float) -> CoefficientField:
    """Load a coefficient field from CSV: one row per cell with
    ``index, a_00, ..., a_{d-1,d-1} (row-major), c``.
    """
    d = grid.dim
    n = grid.n_total
    a = np.zeros((n, d, d))
    c = np.zeros(n)
    seen = np.zeros(n, dtype=bool)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            vals = [float(v) for v in row]
            idx = int(vals[0])
            if idx < 0 or idx >= n:
                raise AuditError("shape", f"cell index {idx} out of range 0..{n-1}")
            a[idx] = np.array(vals[1:1 + d * d]).reshape(d, d)
            c[idx] = vals[1 + d * d]
            seen[idx] = True
    if not seen.all():
        raise AuditError("shape", f"{int((~seen).sum())} cells missing from CSV")
    return CoefficientField(grid, a, c, eta, m_bound)


class EllipticOperator:
    """Assembled sparse divergence-form operator on cell-centered fields."""

    def __init__(self, grid: DomainGrid, coeffs: CoefficientField, matrix: sp.csr_matrix):
        self.grid = grid
        self.coeffs = coeffs
        self.matrix = matrix
        self._steppers: dict[float, ShiftedSolve] = {}

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def stepper(self, dt: float) -> ShiftedSolve:
        """Cached prefactorized solver for (I - dt*A)."""
        key = float(dt)
        st = self._steppers.get(key)
        if st is None:
            st = ShiftedSolve(self.matrix, key)
            self._steppers[key] = st
        return st

    def dense_spectrum(self) -> np.ndarray:
        """Eigenvalues of the assembled matrix, ascending (small grids only)."""
        if self.grid.n_total > 4096:
            raise ValueError("dense spectrum limited to grids with <= 4096 cells")
        return np.linalg.eigvalsh(self.matrix.toarray())

    def descriptor(self) -> bytes:
        return b"elliptic:" + self.coeffs.descriptor()


def assemble_operator(grid: DomainGrid, coeffs: CoefficientField) -> EllipticOperator:
    """Assemble A = div(a grad .) - c with zero-flux boundary faces.

    Face diffusivity along axis i between neighboring cells is the harmonic
    mean of their a_ii entries.  Off-diagonal tensor entries are rejected:
    two-point fluxes cannot represent them and they would destroy the
    M-matrix property the positivity checks rest on.
    """
    if coeffs.grid is not grid and coeffs.grid != grid:
        raise AuditError("shape", "coefficient field built on a different grid")
    d = grid.dim
    if d == 2:
        off = np.abs(coeffs.a[:, 0, 1])
        if off.max() > 0:
            raise AuditError(
                "diagonal-tensor",
                "off-diagonal diffusion entries are not supported by the "
                "two-point flux assembler",
            )

    shape = grid.n_cells
    n = grid.n_total
    ids = np.arange(n).reshape(shape)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for axis in range(d):
        h = grid.spacing[axis]
        a_ax = coeffs.a[:, axis, axis].reshape(shape)
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a1 = a_ax[tuple(lo)].ravel()
        a2 = a_ax[tuple(hi)].ravel()
        t = 2.0 * a1 * a2 / (a1 + a2) / h**2  # harmonic face average
        i1 = ids[tuple(lo)].ravel()
        i2 = ids[tuple(hi)].ravel()
        rows += [i1, i2, i1, i2]
        cols += [i2, i1, i1, i2]
        vals += [t, t, -t, -t]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(-coeffs.c)
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return EllipticOperator(grid, coeffs, matrix)


def apply_resolvent(op: EllipticOperator, lam: float, f: np.ndarray,
                    method: str = "cg", rtol: float = 1e-10) -> np.ndarray:
    """Return lam*(lam*I - A)^{-1} f.

    For c >= 0 and lam > 0 the shifted matrix is SPD and the output sup norm
    never exceeds that of f.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    n = op.matrix.shape[0]
    M = (lam * sp.identity(n, format="csr") - op.matrix).tocsr()
    if method == "cg":
        return lam * jacobi_cg(M, np.asarray(f, dtype=float), rtol=rtol)
    import scipy.sparse.linalg as spla

    return lam * spla.spsolve(M.tocsc(), np.asarray(f, dtype=float))


def semigroup_step(op: EllipticOperator, dt: float, u: np.ndarray,
                   method: str = "cg", rtol: float = 1e-10) -> np.ndarray:
    """One backward-Euler semigroup step: (I - dt*A)^{-1} u."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    st = op.stepper(dt)
    if method == "cg":
        return st.cg(np.asarray(u, dtype=float), rtol=rtol)
    return st.solve(np.asarray(u, dtype=float))


def evolve_semigroup(op: EllipticOperator, t: float, u: np.ndarray,
                     n_substeps: int = 32) -> np.ndarray:
    """Approximate S(t) u by n_substeps backward-Euler steps of size t/n."""
    dt = t / n_substeps
    st = op.stepper(dt)
    v = np.asarray(u, dtype=float)
    for _ in range(n_substeps):
        v = st.solve(v)
    return v


def smoothing_profile(op: EllipticOperator, times: np.ndarray | None = None,
                      n_substeps: int = 32) -> dict:
    """Empirical ultracontractivity check for a unit-L1 spike.

    Evolves a delta-like initial field and tabulates ||S(t) spike||_inf * t^{d/2}
    over a dyadic sweep of times above the mesh-resolution time h^2.  The
    scaled quantity staying bounded is the smoothing surrogate.
    """
    grid = op.grid
    d = grid.dim
    h2 = max(s**2 for s in grid.spacing)
    if times is None:
        n_dyadic = int(np.floor(np.log2(1.0 / h2))) + 1
        times = h2 * 2.0 ** np.arange(max(n_dyadic, 1))
        times = times[times <= 1.0 + 1e-12]
    spike = np.zeros(grid.n_total)
    center = grid.n_total // 2
    spike[center] = 1.0 / grid.cell_volume  # unit L1 mass
    scaled = []
    for t in times:
        v = evolve_semigroup(op, float(t), spike, n_substeps=n_substeps)
        scaled.append(float(np.max(np.abs(v))) * float(t) ** (d / 2.0))
    scaled = np.asarray(scaled)
    # Bounded verdict: no blow-up relative to the small-time plateau or the
    # long-time mean-value level t^{d/2}/|O|.
    ref = max(float(scaled.min()), float(times.max()) ** (d / 2.0) / grid.volume)
    bounded = bool(scaled.max() <= 10.0 * ref)
    return {"times": np.asarray(times), "scaled_sup": scaled, "bounded": bounded}


def dump_spectrum_csv(op: EllipticOperator, path) -> np.ndarray:
    """Write the dense spectrum (ascending) to CSV for oracle comparison."""
    ev = op.dense_spectrum()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "eigenvalue"])
        for k, lam in enumerate(ev):
            w.writerow([k, repr(float(lam))])
    return ev
