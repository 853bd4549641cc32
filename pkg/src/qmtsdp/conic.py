"""Operator-valued convex programs solved as real symmetric-cone programs.

A program has Hermitian PSD matrix variables and real scalar variables,
Euclidean-norm bounds on groups of scalars, linear constraints of the form

    sum_i Tr(F_i X_i) + sum_s c_s t_s  (<=, ==, >=)  rhs

and an objective that is linear in all variables plus an optional diagonal
quadratic term on scalars. Each Hermitian ``d x d`` variable is parametrized
by ``d**2`` real numbers (diagonal, real and imaginary parts of the upper
triangle) and constrained through its real ``2d x 2d`` embedding

    [[Re X, -Im X],
     [Im X,  Re X]]  >= 0.

The assembled problem is handed to Clarabel, an interior-point solver; the
returned solution is re-checked independently before a status is reported.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import clarabel
import numpy as np
import scipy.sparse as sp

from .quantum import hermitian

SQRT2 = np.sqrt(2.0)


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near_optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"

    @property
    def ok(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.NEAR_OPTIMAL)


SENSES = ("<=", "==", ">=")


@dataclass
class Constraint:
    ops: Dict[str, np.ndarray]
    scalars: Dict[str, float]
    sense: str
    rhs: float


@dataclass
class SolveOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iter: int = 200
    # solver stopping tolerances are this factor tighter than the reported ones
    solver_margin: float = 0.01


@dataclass
class SolveResult:
    status: SolveStatus
    objective_value: float
    values: Dict[str, object]
    stats: Dict[str, object] = field(default_factory=dict)

    @property
    def solve_time(self) -> float:
        return self.stats.get("solve_time", float("nan"))

    def __getitem__(self, name):
        return self.values[name]


def hermitian_to_real_embedding(h) -> np.ndarray:
    """Real symmetric ``2d x 2d`` matrix ``[[Re H, -Im H], [Im H, Re H]]``.

    Its spectrum is that of ``H`` with every eigenvalue doubled in
    multiplicity, so ``H >= 0`` exactly when the embedding is.
    """
    h = hermitian(h)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def real_embedding_to_hermitian(e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    d = e.shape[0] // 2
    re = 0.5 * (e[:d, :d] + e[d:, d:])
    im = 0.5 * (e[d:, :d] - e[:d, d:])
    return hermitian(re + 1j * im)


def _param_index(d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays (diag, upper-real, upper-imag) of a Hermitian parametrization."""
    iu, ju = np.triu_indices(d, 1)
    return np.arange(d), iu, ju


def hermitian_to_params(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    _, iu, ju = _param_index(d)
    return np.concatenate([np.diag(x).real, x[iu, ju].real, x[iu, ju].imag])


def params_to_hermitian(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    _, iu, ju = _param_index(d)
    n_up = len(iu)
    x = np.diag(v[:d]).astype(complex)
    x[iu, ju] = v[d : d + n_up] + 1j * v[d + n_up :]
    x[ju, iu] = np.conj(x[iu, ju])
    return x


def trace_coefficients(f) -> np.ndarray:
    """Real vector ``a`` with ``Tr(F X) = a . params(X)`` for Hermitian ``F``, ``X``."""
    f = hermitian(f)
    d = f.shape[0]
    _, iu, ju = _param_index(d)
    return np.concatenate([np.diag(f).real, 2 * f[iu, ju].real, 2 * f[iu, ju].imag])


def _svec_index(n: int) -> Dict[Tuple[int, int], int]:
    # column-major upper triangle, matching Clarabel's PSDTriangleConeT
    idx = {}
    pos = 0
    for j in range(n):
        for i in range(j + 1):
            idx[(i, j)] = pos
            pos += 1
    return idx


def _embedding_svec_map(d: int) -> sp.csc_matrix:
    """Sparse map from Hermitian params to the scaled triangle of the real embedding."""
    n = 2 * d
    svec = _svec_index(n)
    _, iu, ju = _param_index(d)
    n_up = len(iu)
    rows, cols, vals = [], [], []

    def put(i, j, col, val):
        if i > j:
            i, j = j, i
        scale = 1.0 if i == j else SQRT2
        rows.append(svec[(i, j)])
        cols.append(col)
        vals.append(scale * val)

    for i in range(d):
        put(i, i, i, 1.0)
        put(d + i, d + i, i, 1.0)
    for t, (i, j) in enumerate(zip(iu, ju)):
        re_col, im_col = d + t, d + n_up + t
        put(i, j, re_col, 1.0)
        put(d + i, d + j, re_col, 1.0)
        # lower-left block holds Im X; Im X[i, j] = im, Im X[j, i] = -im
        put(i, d + j, im_col, -1.0)  # upper-right block (-Im X)[i, j]
        put(j, d + i, im_col, 1.0)  # upper-right block (-Im X)[j, i]
    return sp.csc_matrix((vals, (rows, cols)), shape=(n * (n + 1) // 2, d * d))


class OperatorProgram:
    """Builder for a convex program over Hermitian PSD and real scalar variables.

    Examples
    --------
    >>> prog = OperatorProgram()
    >>> prog.add_psd("X", 2)
    'X'
    >>> prog.add_constraint(ops={"X": np.eye(2)}, sense="==", rhs=1.0)
    >>> prog.minimize(ops={"X": np.eye(2)})
    >>> round(solve(prog).objective_value, 6)
    1.0
    """

    def __init__(self):
        self.psd_vars: Dict[str, int] = {}
        self.scalar_vars: Dict[str, Optional[float]] = {}
        self.constraints: List[Constraint] = []
        self.norm_bounds: List[Tuple[str, List[str]]] = []
        self.objective_ops: Dict[str, np.ndarray] = {}
        self.objective_scalars: Dict[str, float] = {}
        self.objective_quadratic: Dict[str, float] = {}
        self.objective_constant = 0.0

    def _check_new(self, name):
        if name in self.psd_vars or name in self.scalar_vars:
            raise ValueError(f"variable {name!r} already defined")

    def add_psd(self, name: str, dim: int) -> str:
        self._check_new(name)
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.psd_vars[name] = int(dim)
        return name

    def add_scalar(self, name: str, lower: Optional[float] = None) -> str:
        self._check_new(name)
        self.scalar_vars[name] = lower
        return name

    def _check_terms(self, ops, scalars):
        ops = {k: hermitian(v) for k, v in (ops or {}).items()}
        scalars = {k: float(v) for k, v in (scalars or {}).items()}
        for name, f in ops.items():
            if name not in self.psd_vars:
                raise KeyError(f"unknown operator variable {name!r}")
            if f.shape != (self.psd_vars[name],) * 2:
                raise ValueError(f"coefficient for {name!r} has shape {f.shape}")
        for name in scalars:
            if name not in self.scalar_vars:
                raise KeyError(f"unknown scalar variable {name!r}")
        return ops, scalars

    def add_norm_bound(self, bound: str, entries) -> None:
        """Second-order cone constraint ``||(t_1, ..., t_n)||_2 <= bound`` on scalar variables."""
        entries = list(entries)
        for name in [bound, *entries]:
            if name not in self.scalar_vars:
                raise KeyError(f"unknown scalar variable {name!r}")
        self.norm_bounds.append((bound, entries))

    def add_constraint(self, ops=None, scalars=None, sense: str = "==", rhs: float = 0.0):
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
        ops, scalars = self._check_terms(ops, scalars)
        self.constraints.append(Constraint(ops, scalars, sense, float(rhs)))

    def minimize(self, ops=None, scalars=None, quadratic=None, constant: float = 0.0):
        """Set the objective ``sum Tr(F X) + sum c t + sum w t**2 + constant``."""
        self.objective_ops, self.objective_scalars = self._check_terms(ops, scalars)
        quadratic = {k: float(v) for k, v in (quadratic or {}).items()}
        for name, w in quadratic.items():
            if name not in self.scalar_vars:
                raise KeyError(f"unknown scalar variable {name!r}")
            if w < 0:
                raise ValueError("quadratic weights must be nonnegative")
        self.objective_quadratic = quadratic
        self.objective_constant = float(constant)

    # -- assembly ---------------------------------------------------------

    def layout(self) -> Dict[str, slice]:
        """Position of each variable inside the real decision vector."""
        out, pos = {}, 0
        for name in self.scalar_vars:
            out[name] = slice(pos, pos + 1)
            pos += 1
        for name, d in self.psd_vars.items():
            out[name] = slice(pos, pos + d * d)
            pos += d * d
        return out

    def _row(self, layout, ops, scalars, n):
        row = np.zeros(n)
        for name, f in ops.items():
            row[layout[name]] += trace_coefficients(f)
        for name, c in scalars.items():
            row[layout[name].start] += c
        return row

    def assemble(self):
        """Build ``(P, q, A, b, cones)`` in Clarabel's standard form.

        ``min 1/2 x'Px + q'x  s.t.  Ax + s = b,  s in cones``.
        """
        layout = self.layout()
        n = sum(sl.stop - sl.start for sl in layout.values())
        q = self._row(layout, self.objective_ops, self.objective_scalars, n)

        pd = np.zeros(n)
        for name, w in self.objective_quadratic.items():
            pd[layout[name].start] = 2 * w
        P = sp.diags(pd, format="csc")

        eq_rows, eq_b, le_rows, le_b = [], [], [], []
        for c in self.constraints:
            row = self._row(layout, c.ops, c.scalars, n)
            if c.sense == "==":
                eq_rows.append(row)
                eq_b.append(c.rhs)
            elif c.sense == "<=":
                le_rows.append(row)
                le_b.append(c.rhs)
            else:
                le_rows.append(-row)
                le_b.append(-c.rhs)
        for name, lower in self.scalar_vars.items():
            if lower is not None:
                row = np.zeros(n)
                row[layout[name].start] = -1.0
                le_rows.append(row)
                le_b.append(-lower)

        blocks, b_parts, cones = [], [], []
        if eq_rows:
            blocks.append(sp.csr_matrix(np.array(eq_rows)))
            b_parts.append(np.array(eq_b))
            cones.append(clarabel.ZeroConeT(len(eq_rows)))
        if le_rows:
            blocks.append(sp.csr_matrix(np.array(le_rows)))
            b_parts.append(np.array(le_b))
            cones.append(clarabel.NonnegativeConeT(len(le_rows)))
        for bound, entries in self.norm_bounds:
            cols = [layout[name].start for name in [bound, *entries]]
            blocks.append(sp.csr_matrix((-np.ones(len(cols)), (np.arange(len(cols)), cols)), shape=(len(cols), n)))
            b_parts.append(np.zeros(len(cols)))
            cones.append(clarabel.SecondOrderConeT(len(cols)))
        for name, d in self.psd_vars.items():
            m = _embedding_svec_map(d)
            full = sp.lil_matrix((m.shape[0], n))
            full[:, layout[name]] = -m
            blocks.append(full.tocsr())
            b_parts.append(np.zeros(m.shape[0]))
            cones.append(clarabel.PSDTriangleConeT(2 * d))
        if not blocks:
            return P, q, sp.csc_matrix((0, n)), np.zeros(0), cones
        A = sp.vstack(blocks, format="csc")
        b = np.concatenate(b_parts)
        return P, q, A, b, cones

    def unpack(self, x) -> Dict[str, object]:
        out = {}
        for name, sl in self.layout().items():
            if name in self.scalar_vars:
                out[name] = float(x[sl.start])
            else:
                out[name] = params_to_hermitian(x[sl], self.psd_vars[name])
        return out

    def evaluate(self, values) -> Tuple[float, float, float]:
        """Objective, worst constraint violation and worst PSD violation at ``values``."""
        def lhs(ops, scalars):
            total = sum(np.trace(f @ values[k]).real for k, f in ops.items())
            return total + sum(c * values[k] for k, c in scalars.items())

        obj = lhs(self.objective_ops, self.objective_scalars) + self.objective_constant
        obj += sum(w * values[k] ** 2 for k, w in self.objective_quadratic.items())
        viol = 0.0
        for c in self.constraints:
            r = lhs(c.ops, c.scalars) - c.rhs
            if c.sense == "==":
                viol = max(viol, abs(r))
            elif c.sense == "<=":
                viol = max(viol, r)
            else:
                viol = max(viol, -r)
        for name, lower in self.scalar_vars.items():
            if lower is not None:
                viol = max(viol, lower - values[name])
        psd = 0.0
        for bound, entries in self.norm_bounds:
            viol = max(viol, np.linalg.norm([values[k] for k in entries]) - values[bound])
        for name in self.psd_vars:
            psd = max(psd, -np.linalg.eigvalsh(hermitian(values[name])).min())
        return float(obj), float(viol), float(psd)

    def dump(self, path) -> None:
        """Write the assembled conic problem as a sparse-triplet text file.

        Format: a header line ``n m``, then sections ``P``, ``q``, ``A``,
        ``b`` and ``cones``. Matrix sections list one ``row col value``
        triplet per line (0-based); vector sections list ``index value``;
        the cones section lists ``kind size`` in order, where kind is one
        of ``zero``, ``nonneg``, ``soc``, ``psd_triangle`` (size = matrix
        order for the PSD cone, vector length otherwise).
        """
        P, q, A, b, cones = self.assemble()
        kinds = {
            "ZeroConeT": "zero",
            "NonnegativeConeT": "nonneg",
            "SecondOrderConeT": "soc",
            "PSDTriangleConeT": "psd_triangle",
        }
        with open(path, "w") as fh:
            fh.write(f"{A.shape[1]} {A.shape[0]}\n")
            for tag, mat in (("P", P), ("A", A)):
                coo = mat.tocoo()
                fh.write(f"{tag} {coo.nnz}\n")
                for i, j, v in zip(coo.row, coo.col, coo.data):
                    fh.write(f"{i} {j} {v:.17g}\n")
            for tag, vec in (("q", q), ("b", b)):
                nz = np.flatnonzero(vec)
                fh.write(f"{tag} {len(nz)}\n")
                for i in nz:
                    fh.write(f"{i} {vec[i]:.17g}\n")
            fh.write(f"cones {len(cones)}\n")
            for cone in cones:
                name = type(cone).__name__
                fh.write(f"{kinds.get(name, name)} {_cone_size(cone)}\n")


def _cone_size(cone) -> int:
    return int(cone.dim)


_SOLVED = {"Solved"}
_ALMOST = {"AlmostSolved"}
_INFEASIBLE = {"PrimalInfeasible", "AlmostPrimalInfeasible"}


def solve(program: OperatorProgram, options: Optional[SolveOptions] = None) -> SolveResult:
    """Solve ``program`` and verify the returned point independently.

    The result status is ``optimal`` only if the solver reports success
    *and* the recomputed constraint residuals and PSD eigenvalues are within
    ``feas_tol``. Infeasibility and numerical trouble are reported through
    the status, not raised.
    """
    options = options or SolveOptions()
    t0 = time.perf_counter()
    P, q, A, b, cones = program.assemble()

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = options.max_iter
    settings.tol_feas = options.feas_tol * options.solver_margin
    settings.tol_gap_abs = options.opt_tol * options.solver_margin
    settings.tol_gap_rel = options.opt_tol * options.solver_margin
    settings.presolve_enable = False

    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    elapsed = time.perf_counter() - t0
    solver_status = str(sol.status).split(".")[-1]

    x = np.asarray(sol.x, dtype=float)
    stats = {
        "iterations": int(sol.iterations),
        "solve_time": elapsed,
        "solver_time": float(sol.solve_time),
        "solver_status": solver_status,
        "primal_objective": float(sol.obj_val) + program.objective_constant,
        "dual_objective": float(sol.obj_val_dual) + program.objective_constant,
        "num_variables": A.shape[1],
        "num_constraints": A.shape[0],
    }
    if solver_status in _INFEASIBLE:
        return SolveResult(SolveStatus.INFEASIBLE, float("nan"), {}, stats)
    if x.size != A.shape[1] or not np.all(np.isfinite(x)):
        return SolveResult(SolveStatus.NUMERICAL_FAILURE, float("nan"), {}, stats)

    values = program.unpack(x)
    objective, viol, psd_viol = program.evaluate(values)
    stats["max_constraint_violation"] = viol
    stats["max_psd_violation"] = psd_viol
    stats["duality_gap"] = stats["primal_objective"] - stats["dual_objective"]

    gap = abs(stats["duality_gap"])
    if solver_status not in _SOLVED | _ALMOST:
        status = SolveStatus.NUMERICAL_FAILURE
    elif max(viol, psd_viol) <= options.feas_tol and gap <= options.opt_tol:
        status = SolveStatus.OPTIMAL
    elif max(viol, psd_viol) <= 100 * options.feas_tol and gap <= 100 * options.opt_tol:
        status = SolveStatus.NEAR_OPTIMAL
    else:
        status = SolveStatus.NUMERICAL_FAILURE
    return SolveResult(status, objective, values, stats)
