"""Small dense conic programs: LP, second-order, power and PSD cones.

Problems are written against :class:`ConicProblem` with sparse affine forms
(:class:`Affine`) and compiled to the standard form

    minimize    q^T x
    subject to  A x + s = b,   s in K = {0} x R+ x SOC x ... x PSD x ... x POW

which is handed to the Clarabel interior-point solver.  Every returned solution
is re-certified here from its own primal/dual vectors, so a status of
``optimal`` always means the KKT residuals were checked independently.

Complex Hermitian PSD blocks use the real embedding ``[[Re X, -Im X], [Im X, Re X]]``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

__all__ = [
    "Affine",
    "BuildError",
    "ConicProblem",
    "ConicSolution",
    "PsdBlock",
    "VarBlock",
    "embed_hermitian",
    "extract_rank_one",
    "solve_conic",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


class BuildError(ValueError):
    """The problem is ill-posed (no objective, inconsistent dimensions...)."""


class Affine:
    """Sparse affine form ``sum(val[i] * x[idx[i]]) + const``.

    Indices may repeat; duplicates are summed on evaluation/compilation.
    """

    __slots__ = ("idx", "val", "const")

    def __init__(self, idx=(), val=(), const: float = 0.0):
        self.idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        self.val = np.asarray(val, dtype=float).reshape(-1)
        self.const = float(const)

    @staticmethod
    def lift(x) -> "Affine":
        if isinstance(x, Affine):
            return x
        if isinstance(x, (int, float, np.floating, np.integer)):
            return Affine(const=float(x))
        raise TypeError(f"cannot use {type(x).__name__} as an affine form")

    def __add__(self, other) -> "Affine":
        o = Affine.lift(other)
        return Affine(np.concatenate([self.idx, o.idx]), np.concatenate([self.val, o.val]), self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(self.idx, -self.val, -self.const)

    def __sub__(self, other) -> "Affine":
        return self + (-Affine.lift(other))

    def __rsub__(self, other) -> "Affine":
        return Affine.lift(other) + (-self)

    def __mul__(self, c) -> "Affine":
        if isinstance(c, Affine):
            raise TypeError("affine forms can only be scaled by constants")
        c = float(c)
        return Affine(self.idx, self.val * c, self.const * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "Affine":
        return self * (1.0 / float(c))

    def value(self, x: np.ndarray) -> float:
        return float(self.val @ x[self.idx] + self.const) if self.idx.size else self.const

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        np.add.at(out, self.idx, self.val)
        return out

    def __repr__(self) -> str:
        return f"Affine(nnz={self.idx.size}, const={self.const:.4g})"


def asum(terms: Iterable) -> Affine:
    terms = [Affine.lift(t) for t in terms]
    if not terms:
        return Affine()
    return Affine(
        np.concatenate([t.idx for t in terms]),
        np.concatenate([t.val for t in terms]),
        sum(t.const for t in terms),
    )


@dataclass
class VarBlock:
    name: str
    start: int
    size: int
    aux: bool = False

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size)

    def __getitem__(self, i: int) -> Affine:
        if not -self.size <= i < self.size:
            raise IndexError(f"{self.name}[{i}] out of range")
        return Affine([self.start + (i % self.size)], [1.0])

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return (self[i] for i in range(self.size))

    @property
    def x(self) -> Affine:
        if self.size != 1:
            raise BuildError(f"{self.name} is not scalar")
        return self[0]


@dataclass
class PsdBlock:
    """Hermitian (or real symmetric) matrix variable of dimension ``dim``.

    Layout: ``dim`` diagonal reals, then the strict upper triangle (real
    parts) and, for complex blocks, the strict upper imaginary parts.
    """

    name: str
    start: int
    dim: int
    complex: bool = True

    @property
    def _iu(self):
        return np.triu_indices(self.dim, 1)

    @property
    def size(self) -> int:
        m = self.dim * (self.dim - 1) // 2
        return self.dim + m * (2 if self.complex else 1)

    def diag(self, i: int) -> Affine:
        return Affine([self.start + i], [1.0])

    def trace(self) -> Affine:
        return Affine(self.start + np.arange(self.dim), np.ones(self.dim))

    def trace_with(self, H) -> Affine:
        """Affine form of the real number Tr(H X) for Hermitian H."""
        H = np.asarray(H)
        if H.shape != (self.dim, self.dim):
            raise BuildError(f"{self.name}: coefficient shape {H.shape} != {(self.dim, self.dim)}")
        iu = self._iu
        m = iu[0].size
        coef = [np.real(np.diag(H)), 2.0 * np.real(H[iu])]
        if self.complex:
            coef.append(2.0 * np.imag(H[iu]))
        elif np.iscomplexobj(H) and np.any(np.imag(H) != 0):
            raise BuildError(f"{self.name} is real; complex coefficient given")
        c = np.concatenate(coef)
        return Affine(self.start + np.arange(self.dim + m * (2 if self.complex else 1)), c)

    def value(self, x: np.ndarray) -> np.ndarray:
        n = self.dim
        iu = self._iu
        m = iu[0].size
        seg = x[self.start : self.start + self.size]
        X = np.zeros((n, n), dtype=complex if self.complex else float)
        X[np.diag_indices(n)] = seg[:n]
        X[iu] = seg[n : n + m] + (1j * seg[n + m :] if self.complex else 0.0)
        X[(iu[1], iu[0])] = np.conj(X[iu])
        return X

    def pack(self, X, x: np.ndarray) -> np.ndarray:
        """Write the matrix ``X`` into the variable vector ``x`` (in place)."""
        X = np.asarray(X)
        iu = self._iu
        m = iu[0].size
        x[self.start : self.start + self.dim] = np.real(np.diag(X))
        x[self.start + self.dim : self.start + self.dim + m] = np.real(X[iu])
        if self.complex:
            x[self.start + self.dim + m : self.start + self.size] = np.imag(X[iu])
        return x

    def embedding_rows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Sparse map x -> svec(real embedding); returns (row, col, val, cone_dim)."""
        n = self.dim
        iu_r, iu_c = self._iu
        m = iu_r.size
        pos = {}
        for t, (i, j) in enumerate(zip(iu_r, iu_c)):
            pos[(i, j)] = t
        N = 2 * n if self.complex else n
        rows, cols, vals = [], [], []
        r_out = 0
        s2 = math.sqrt(2.0)
        for c in range(N):
            for r in range(c + 1):
                scale = 1.0 if r == c else s2
                var, sign = self._embedded_entry(r, c, n, m, pos)
                if var is not None:
                    rows.append(r_out)
                    cols.append(self.start + var)
                    vals.append(sign * scale)
                r_out += 1
        return np.array(rows), np.array(cols), np.array(vals, dtype=float), N

    def _embedded_entry(self, r, c, n, m, pos):
        # entry (r, c), r <= c, of the (real) embedding -> (offset, sign)
        def re(i, j):
            if i == j:
                return i, 1.0
            a, b = (i, j) if i < j else (j, i)
            return n + pos[(a, b)], 1.0

        def im(i, j):  # Im X[i, j]
            if i == j:
                return None, 0.0
            if i < j:
                return n + m + pos[(i, j)], 1.0
            return n + m + pos[(j, i)], -1.0

        if not self.complex:
            return re(r, c)
        if c < n:
            return re(r, c)
        if r >= n:
            return re(r - n, c - n)
        var, sign = im(r, c - n)  # top-right block is -Im X
        return var, -sign


@dataclass
class _Con:
    kind: str  # eq | nonneg | soc | psd | pow
    label: str
    exprs: list = field(default_factory=list)
    block: PsdBlock | None = None
    alpha: float = 0.0


class ConicProblem:
    """Container for variables, a linear objective and conic constraints."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self.n = 0
        self.blocks: dict[str, VarBlock | PsdBlock] = {}
        self.constraints: list[_Con] = []
        self.objective: Affine | None = None

    # variables -----------------------------------------------------------
    def _claim(self, name: str, size: int) -> int:
        if name in self.blocks:
            raise BuildError(f"duplicate block name {name!r}")
        start = self.n
        self.n += size
        return start

    def variable(self, name: str, size: int = 1, *, nonneg: bool = False, aux: bool = False) -> VarBlock:
        if size < 1:
            raise BuildError(f"block {name!r} must have positive size")
        blk = VarBlock(name, self._claim(name, size), size, aux)
        self.blocks[name] = blk
        if nonneg:
            for i in range(size):
                self.add_ge(blk[i], 0.0, f"{name}>=0")
        return blk

    def psd(self, name: str, dim: int, complex: bool = True) -> PsdBlock:
        if dim < 1:
            raise BuildError(f"PSD block {name!r} must have positive dimension")
        blk = PsdBlock(name, 0, dim, complex)
        blk.start = self._claim(name, blk.size)
        self.blocks[name] = blk
        self.constraints.append(_Con("psd", f"{name}>>0", block=blk))
        return blk

    def _aux(self, prefix: str) -> Affine:
        name = f"_{prefix}{self.n}"
        return self.variable(name, 1, aux=True).x

    # constraints -----------------------------------------------------------
    def minimize(self, expr) -> None:
        self.objective = Affine.lift(expr)

    def add_eq(self, lhs, rhs=0.0, label: str = "eq") -> None:
        self.constraints.append(_Con("eq", label, [Affine.lift(lhs) - rhs]))

    def add_ge(self, lhs, rhs=0.0, label: str = "ge") -> None:
        self.constraints.append(_Con("nonneg", label, [Affine.lift(lhs) - rhs]))

    def add_le(self, lhs, rhs=0.0, label: str = "le") -> None:
        self.constraints.append(_Con("nonneg", label, [Affine.lift(rhs) - lhs]))

    def add_soc(self, t, xs: Sequence, label: str = "soc") -> None:
        """||xs||_2 <= t."""
        if not len(xs):
            self.add_ge(t, 0.0, label)
            return
        self.constraints.append(_Con("soc", label, [Affine.lift(t)] + [Affine.lift(x) for x in xs]))

    def add_rotated(self, u, v, xs: Sequence, label: str = "rsoc") -> None:
        """||xs||^2 <= u * v with u, v >= 0."""
        u, v = Affine.lift(u), Affine.lift(v)
        self.add_soc(u + v, [2.0 * Affine.lift(x) for x in xs] + [u - v], label)

    def add_sum_squares_le(self, xs: Sequence, rhs, label: str = "quad") -> None:
        """sum(x_i^2) <= rhs."""
        self.add_rotated(rhs, 1.0, xs, label)

    def add_power(self, x, y, z, alpha: float, label: str = "pow") -> None:
        """x^alpha * y^(1-alpha) >= |z| with x, y >= 0."""
        if not 0.0 < alpha < 1.0:
            raise BuildError("power cone exponent must lie in (0, 1)")
        self.constraints.append(_Con("pow", label, [Affine.lift(x), Affine.lift(y), Affine.lift(z)], alpha=alpha))

    def add_geo_mean_ge(self, xs: Sequence, t, label: str = "geomean") -> None:
        """(prod x_i)^(1/k) >= t, built from a binary tree of rotated cones."""
        leaves = [Affine.lift(x) for x in xs]
        k = len(leaves)
        if k == 0:
            raise BuildError("geometric mean of nothing")
        t = Affine.lift(t)
        if k == 1:
            self.add_ge(leaves[0], t, label)
            return
        width = 1 << (k - 1).bit_length()
        level = leaves + [t] * (width - k)
        while len(level) > 1:
            nxt = []
            for a, b in zip(level[0::2], level[1::2]):
                y = self._aux("gm")
                self.add_rotated(a, b, [y], label)
                nxt.append(y)
            level = nxt
        self.add_ge(level[0], t, label)

    def add_inverse_le(self, x, y, label: str = "inv") -> None:
        """1 / x <= y with x, y > 0."""
        self.add_rotated(x, y, [1.0], label)

    # introspection ---------------------------------------------------------
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.kind] = out.get(c.kind, 0) + 1
        return out

    def labelled(self, label: str) -> list[_Con]:
        return [c for c in self.constraints if c.label == label]

    def decision_size(self) -> int:
        """Scalar count of user-declared (non-auxiliary) variables."""
        return sum(b.size for b in self.blocks.values() if not getattr(b, "aux", False))

    def check(self) -> None:
        if self.objective is None:
            raise BuildError(f"{self.name}: no objective")
        for c in self.constraints:
            for e in c.exprs:
                if e.idx.size and (e.idx.min() < 0 or e.idx.max() >= self.n):
                    raise BuildError(f"{self.name}: constraint {c.label!r} references unknown variables")

    def violation(self, x) -> float:
        """Largest violation of any constraint at the point ``x`` (0 if feasible)."""
        q, A, b, cones, _ = _compile(self)
        s = b - A @ np.asarray(x, dtype=float)
        return max(0.0, _cone_violation(s, cones))

    def dump(self, stream=None) -> str:
        """Plain-text listing of the compiled standard form.

        Lines: ``n``/``m`` sizes, ``cone <kind> <dim> [alpha]`` in row order,
        ``row <first> <last+1> <label>`` per constraint, then the nonzeros of
        q, A and b as ``q j v`` / ``A i j v`` / ``b i v`` with 17 significant digits.
        """
        q, A, b, cones, spans = _compile(self)
        out = io.StringIO() if stream is None else stream
        out.write(f"# conic problem {self.name}\n# minimize q'x  s.t.  A x + s = b, s in K\n")
        out.write(f"n {self.n}\nm {A.shape[0]}\n")
        for kind, dim, extra in cones:
            out.write(f"cone {kind} {dim}{'' if extra is None else f' {float(extra):.17g}'}\n")
        for c, a, z in spans:
            out.write(f"row {a} {z} {c.label}\n")
        for j in np.flatnonzero(q):
            out.write(f"q {j} {float(q[j]):.17g}\n")
        coo = A.tocoo()
        for i, j, v in zip(coo.row, coo.col, coo.data):
            out.write(f"A {i} {j} {float(v):.17g}\n")
        for i in np.flatnonzero(b):
            out.write(f"b {i} {float(b[i]):.17g}\n")
        return out.getvalue() if stream is None else ""


def _compile(p: ConicProblem):
    p.check()
    order = ("eq", "nonneg", "soc", "psd", "pow")
    rows, cols, vals, b_parts = [], [], [], []
    cones: list[tuple[str, int, float | None]] = []
    spans: list[tuple[_Con, int, int]] = []
    r0 = 0
    for kind in order:
        group = [c for c in p.constraints if c.kind == kind]
        if not group:
            continue
        if kind in ("eq", "nonneg"):
            for c in group:
                e = c.exprs[0]
                rows.append(np.full(e.idx.size, r0))
                cols.append(e.idx)
                vals.append(-e.val)
                b_parts.append(np.array([e.const]))
                spans.append((c, r0, r0 + 1))
                r0 += 1
            cones.append(("zero" if kind == "eq" else "nonneg", len(group), None))
            continue
        for c in group:
            start = r0
            if kind == "psd":
                rr, cc, vv, N = c.block.embedding_rows()
                rows.append(rr + r0)
                cols.append(cc)
                vals.append(-vv)
                dim = N * (N + 1) // 2
                b_parts.append(np.zeros(dim))
                r0 += dim
                cones.append(("psd", N, None))
            else:
                for e in c.exprs:
                    rows.append(np.full(e.idx.size, r0))
                    cols.append(e.idx)
                    vals.append(-e.val)
                    r0 += 1
                b_parts.append(np.array([e.const for e in c.exprs]))
                cones.append((kind, len(c.exprs), c.alpha if kind == "pow" else None))
            spans.append((c, start, r0))
    m = r0
    A = sp.csc_matrix(
        (np.concatenate(vals) if vals else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
        shape=(m, p.n),
    )
    A.sum_duplicates()
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    q = p.objective.dense(p.n)
    return q, A, b, cones, spans


def _clarabel_cones(cones):
    out = []
    for kind, dim, extra in cones:
        if kind == "zero":
            out.append(clarabel.ZeroConeT(dim))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(dim))
        elif kind == "soc":
            out.append(clarabel.SecondOrderConeT(dim))
        elif kind == "psd":
            out.append(clarabel.PSDTriangleConeT(dim))
        elif kind == "pow":
            out.append(clarabel.PowerConeT(extra))
    return out


def _smat(v: np.ndarray, N: int) -> np.ndarray:
    S = np.zeros((N, N))
    k = 0
    for c in range(N):
        for r in range(c + 1):
            S[r, c] = v[k] if r == c else v[k] / math.sqrt(2.0)
            S[c, r] = S[r, c]
            k += 1
    return S


def _cone_violation(v: np.ndarray, cones, dual: bool = False) -> float:
    """Largest distance-like violation of membership in K (or K*)."""
    worst = 0.0
    k = 0
    for kind, dim, extra in cones:
        if kind == "zero":
            seg_len = dim
            if not dual:
                worst = max(worst, float(np.max(np.abs(v[k : k + dim]))) if dim else 0.0)
        elif kind == "nonneg":
            seg_len = dim
            if dim:
                worst = max(worst, float(-np.min(v[k : k + dim])))
        elif kind == "soc":
            seg_len = dim
            seg = v[k : k + dim]
            worst = max(worst, float(np.linalg.norm(seg[1:]) - seg[0]))
        elif kind == "psd":
            seg_len = dim * (dim + 1) // 2
            S = _smat(v[k : k + seg_len], dim)
            worst = max(worst, float(-np.linalg.eigvalsh(S)[0]))
        else:  # power cone, self-dual up to scaling by alpha
            seg_len = 3
            x, y, z = v[k : k + 3]
            a = extra
            if dual:
                x, y = x / a, y / (1 - a)
            worst = max(worst, -x, -y)
            if x > 0 and y > 0:
                worst = max(worst, abs(z) - x**a * y ** (1 - a))
            else:
                worst = max(worst, abs(z))
        k += seg_len
    return worst


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | max-iterations
    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int = 0
    solver_status: str = ""
    dual_objective: float = float("nan")
    z: np.ndarray | None = None
    spans: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def kkt(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.gap)

    def value(self, item):
        if isinstance(item, Affine):
            return item.value(self.x)
        if isinstance(item, PsdBlock):
            return item.value(self.x)
        if isinstance(item, VarBlock):
            v = self.x[item.start : item.start + item.size]
            return float(v[0]) if item.size == 1 else v.copy()
        raise TypeError(type(item))

    def dual(self, label: str) -> list[np.ndarray]:
        return [self.z[a:b].copy() for c, a, b in self.spans if c.label == label]


def _certify(p, q, A, b, cones, x, s, z):
    c0 = p.objective.const
    pobj = float(q @ x) + c0
    dobj = float(-b @ z) + c0
    bnorm = 1.0 + (np.max(np.abs(b)) if b.size else 0.0)
    qnorm = 1.0 + np.max(np.abs(q))
    r = A @ x + s - b
    rp = max(float(np.max(np.abs(r))) if r.size else 0.0, _cone_violation(s, cones)) / bnorm
    rd_vec = A.T @ z + q
    rd = max(float(np.max(np.abs(rd_vec))), _cone_violation(z, cones, dual=True)) / qnorm
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    return pobj, dobj, rp, rd, gap


def _settle(p, q, A, b, cones, spans, x, s, z, raw, iters, tol, accept_tol, backend) -> ConicSolution:
    if "PrimalInfeasible" in raw:
        status = "infeasible"
    elif "DualInfeasible" in raw:
        status = "unbounded"
    else:
        status = "candidate"
    pobj, dobj, rp, rd, gap = _certify(p, q, A, b, cones, x, s, z)
    if status == "candidate":
        limit = accept_tol if accept_tol is not None else max(10.0 * tol, 1e-7)
        finite = np.all(np.isfinite(x)) and np.all(np.isfinite(z))
        if finite and max(rp, rd, gap) <= limit and ("Solved" in raw):
            status = "optimal"
        else:
            status = "max-iterations"
    return ConicSolution(
        status=status, x=x, objective=pobj, primal_residual=rp, dual_residual=rd, gap=gap,
        iterations=int(iters), solver_status=f"{backend}:{raw}", dual_objective=dobj, z=z, spans=spans,
    )


def _solve_clarabel(p, compiled, tol, max_iter, accept_tol):
    q, A, b, cones, spans = compiled
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = min(1e-6, tol * 100)
    settings.presolve_enable = False
    # tiny ill-scaled SDPs otherwise stall at "almost solved"
    settings.iterative_refinement_max_iter = 50
    settings.iterative_refinement_reltol = 1e-16
    settings.iterative_refinement_abstol = 1e-16
    P = sp.csc_matrix((p.n, p.n))
    res = clarabel.DefaultSolver(P, q, A, b, _clarabel_cones(cones), settings).solve()
    x = np.asarray(res.x, dtype=float)
    z = np.asarray(res.z, dtype=float)
    s = np.asarray(res.s, dtype=float)
    return _settle(p, q, A, b, cones, spans, x, s, z, str(res.status), res.iterations, tol, accept_tol, "clarabel")


def _coef_matrix(block: PsdBlock, a: np.ndarray) -> np.ndarray:
    """Hermitian F with <F, X> = a . x_block (real inner product Re Tr(F X))."""
    n = block.dim
    iu = block._iu
    m = iu[0].size
    F = np.zeros((n, n), dtype=complex if block.complex else float)
    F[np.diag_indices(n)] = a[:n]
    off = 0.5 * a[n : n + m]
    if block.complex:
        off = off + 0.5j * a[n + m :]
    F[iu] = off
    F[(iu[1], iu[0])] = np.conj(off)
    return F


_EMBED_MAPS: dict = {}


def _embed_map(dim: int, complex_: bool) -> sp.csr_matrix:
    """Sparse T with vec(E(F)) = T @ a, E the real embedding, vec column-major."""
    key = (dim, complex_)
    if key in _EMBED_MAPS:
        return _EMBED_MAPS[key]
    n = dim
    N = 2 * n if complex_ else n
    iu_r, iu_c = np.triu_indices(n, 1)
    m = iu_r.size
    rows, cols, vals = [], [], []

    def put(r, c, var, v):
        rows.append(r + c * N)
        cols.append(var)
        vals.append(v)

    for i in range(n):
        put(i, i, i, 1.0)
        if complex_:
            put(n + i, n + i, i, 1.0)
    for t, (i, j) in enumerate(zip(iu_r, iu_c)):
        for r, c in ((i, j), (j, i)):
            put(r, c, n + t, 0.5)
            if complex_:
                put(n + r, n + c, n + t, 0.5)
        if complex_:
            v = n + m + t
            put(n + i, j, v, 0.5)
            put(n + j, i, v, -0.5)
            put(i, n + j, v, -0.5)
            put(j, n + i, v, 0.5)
    size = n + m * (2 if complex_ else 1)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(N * N, size))
    _EMBED_MAPS[key] = T
    return T


def _svec(S: np.ndarray) -> np.ndarray:
    N = S.shape[0]
    out = []
    r2 = math.sqrt(2.0)
    for c in range(N):
        for r in range(c + 1):
            out.append(S[r, c] if r == c else r2 * S[r, c])
    return np.array(out)


def _solve_lmi(p, compiled, tol, max_iter, accept_tol):
    """Dual (LMI) route through cvxopt for problems whose PSD blocks are large.

    The problem is read as PSD matrices plus cone slacks plus free scalars tied
    by one equality per non-PSD row; its dual has one variable per such row,
    so the Newton systems stay small.  Returns None when not applicable or
    when cvxopt does not reach an optimum.
    """
    import cvxopt
    from cvxopt import solvers

    q, A, b, cones, spans = compiled
    if any(k == "pow" for k, _, _ in cones):
        return None
    A = A.tocsr()
    psd = [(c, lo, hi) for c, lo, hi in spans if c.kind == "psd"]
    m = sum(hi - lo for c, lo, hi in spans if c.kind != "psd")  # non-PSD rows come first
    if m == 0:
        return None
    in_block = np.zeros(p.n, dtype=bool)
    for c, _, _ in psd:
        in_block[c.block.start : c.block.start + c.block.size] = True
    O = np.flatnonzero(~in_block)
    Ar = A[:m]
    dims = {"l": 0, "q": [], "s": []}
    G_rows = []
    h_parts = []
    for kind, dim, _ in cones:
        if kind == "nonneg":
            dims["l"] += dim
        elif kind == "soc":
            dims["q"].append(dim)
    n_zero = sum(dim for kind, dim, _ in cones if kind == "zero")
    n_cone = m - n_zero
    if n_cone:
        G_rows.append(np.hstack([np.zeros((n_cone, n_zero)), np.eye(n_cone)]))
        h_parts.append(np.zeros(n_cone))
    for c, _, _ in psd:
        blk = c.block
        cols = slice(blk.start, blk.start + blk.size)
        N = 2 * blk.dim if blk.complex else blk.dim
        dims["s"].append(N)
        T = _embed_map(blk.dim, blk.complex)
        G_rows.append(np.asarray((T @ Ar[:, cols].T).todense()))
        h_parts.append(T @ q[cols])
    G = np.vstack(G_rows)
    h = np.concatenate(h_parts)
    Aeq = Ar[:, O].T.toarray()
    beq = q[O]
    keep = np.any(Aeq != 0, axis=1)
    if np.any(~keep & (beq != 0)):
        return None  # a free variable only in the objective; let the primal route report it
    Aeq, beq = Aeq[keep], beq[keep]
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": max_iter}
    try:
        if Aeq.shape[0]:
            res = solvers.conelp(cvxopt.matrix(-b[:m]), cvxopt.matrix(G), cvxopt.matrix(h), dims,
                                 cvxopt.matrix(Aeq), cvxopt.matrix(beq), options=opts)
        else:
            res = solvers.conelp(cvxopt.matrix(-b[:m]), cvxopt.matrix(G), cvxopt.matrix(h), dims, options=opts)
    except (ValueError, ArithmeticError):
        return None
    if res["status"] != "optimal" and res.get("gap") is None:
        return None
    y = np.array(res["x"]).reshape(-1)
    zc = np.array(res["z"]).reshape(-1)
    yeq = np.array(res["y"]).reshape(-1) if Aeq.shape[0] else np.zeros(0)

    x = np.zeros(p.n)
    xo = np.zeros(O.size)
    xo[keep] = yeq
    x[O] = xo
    off = n_cone
    for c, _, _ in psd:
        blk = c.block
        N = 2 * blk.dim if blk.complex else blk.dim
        Z = zc[off : off + N * N].reshape(N, N, order="F")
        Z = 0.5 * (Z + Z.T)
        off += N * N
        if blk.complex:
            n = blk.dim
            X = (Z[:n, :n] + Z[n:, n:]) + 1j * (Z[n:, :n] - Z[:n, n:])
        else:
            X = Z
        blk.pack(X, x)
    # dual vector in the A x + s = b convention
    z = np.zeros(A.shape[0])
    z[:m] = -y
    for (c, lo, hi), Gs in zip(psd, G_rows[-len(psd):] if psd else []):
        blk = c.block
        N = 2 * blk.dim if blk.complex else blk.dim
        T = _embed_map(blk.dim, blk.complex)
        S = (T @ q[blk.start : blk.start + blk.size] - Gs @ y).reshape(N, N, order="F")
        z[lo:hi] = 0.5 * _svec(0.5 * (S + S.T)) if blk.complex else _svec(0.5 * (S + S.T))
    s = b - A @ x
    raw = "Solved" if res["status"] == "optimal" else str(res["status"])
    return _settle(p, q, A.tocsc(), b, cones, spans, x, s, z, raw, res["iterations"], tol, accept_tol, "cvxopt")


def solve_conic(p: ConicProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                accept_tol: float | None = None, backend: str = "auto") -> ConicSolution:
    """Solve and certify.

    ``accept_tol`` is the KKT level required for ``optimal`` (defaults to
    ``max(10 * tol, 1e-7)``).  ``backend`` is ``clarabel``, ``lmi`` or
    ``auto``; ``auto`` takes the LMI route for problems with PSD blocks and
    falls back to Clarabel whenever that route does not certify an optimum.
    """
    if p.n == 0:
        raise BuildError(f"{p.name}: no variables")
    compiled = _compile(p)
    has_psd = any(c.kind == "psd" for c in p.constraints)
    if backend == "lmi" or (backend == "auto" and has_psd):
        sol = _solve_lmi(p, compiled, tol, max_iter, accept_tol)
        if sol is not None and (sol.optimal or backend == "lmi"):
            return sol
    return _solve_clarabel(p, compiled, tol, max_iter, accept_tol)


def embed_hermitian(X: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re X, -Im X], [Im X, Re X]]."""
    X = np.asarray(X)
    return np.block([[X.real, -X.imag], [X.imag, X.real]])


def extract_rank_one(X) -> tuple[np.ndarray, float]:
    """Dominant eigen-pair as a vector ``sqrt(l1) u1`` plus the ratio l2 / l1.

    The global phase is fixed so the first non-negligible entry is real
    positive.  A zero matrix gives a zero vector and ratio 0.
    """
    X = np.asarray(X)
    X = 0.5 * (X + X.conj().T)
    n = X.shape[0]
    lam, U = np.linalg.eigh(X)
    l1 = float(lam[-1])
    if l1 <= 0.0 or not np.isfinite(l1):
        return np.zeros(n, dtype=X.dtype), 0.0
    l2 = float(max(lam[-2], 0.0)) if n > 1 else 0.0
    v = np.sqrt(l1) * U[:, -1]
    mags = np.abs(v)
    first = int(np.argmax(mags > 1e-12 * mags.max()))
    if np.iscomplexobj(v):
        v = v * np.exp(-1j * np.angle(v[first]))
    elif v[first] < 0:
        v = -v
    return v, l2 / l1
