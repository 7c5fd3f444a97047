"""Graded multivariate polynomial arithmetic and degree-sliced exact linear algebra.

Everything is exact: coefficients are `fractions.Fraction`, matrices are tuples
of tuples of Fractions, and linear algebra is Gaussian elimination with
deterministic first-nonzero pivoting.  No floating point enters the pipeline.

Grading convention: linear forms (elements of V*) sit in degree 2, so a
polynomial whose monomials have total exponent m is homogeneous of graded
degree 2m.  Degree shifts follow (M<k>)_n = M_{n-k}: a generator "of degree g"
spans a copy of S(V*)<g>.  Odd degrees are legal for generators; polynomial
coefficients themselves always have even degree.

Polynomial vectors ("polyvecs") are lists of Poly entries against a fixed slot
layout; each slot carries a coordinate degree so that an element of degree g
has a homogeneous entry of degree g - coord_deg[slot] in every slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import (
    DimensionMismatch,
    InhomogeneousInput,
    NotClosedUnderAction,
    NotDivisible,
    ZeroDivisor,
)

Q0 = Fraction(0)
Q1 = Fraction(1)

Matrix = tuple  # tuple of tuples of Fraction
Vector = tuple  # tuple of Fraction


# ---------------------------------------------------------------------------
# rational matrices
# ---------------------------------------------------------------------------

def mat(rows: Iterable[Iterable]) -> Matrix:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def mat_identity(n: int) -> Matrix:
    return tuple(tuple(Q1 if i == j else Q0 for j in range(n)) for i in range(n))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    if len(a[0]) != k:
        raise DimensionMismatch("matrix product shape mismatch")
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum(ra[t] * cb[t] for t in range(k)) for cb in bt) for ra in a
    )


def mat_vec(a: Matrix, v: Vector) -> Vector:
    return tuple(sum(row[j] * v[j] for j in range(len(v))) for row in a)


def vec_mat(v: Vector, a: Matrix) -> Vector:
    return tuple(sum(v[i] * a[i][j] for i in range(len(v))) for j in range(len(a[0])))


def mat_inv(a: Matrix) -> Matrix:
    """Inverse by Gauss-Jordan; raises ZeroDivisor on singular input."""
    n = len(a)
    rows = [list(a[i]) + [Q1 if i == j else Q0 for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisor("singular matrix")
        rows[col], rows[piv] = rows[piv], rows[col]
        inv = Q1 / rows[col][col]
        rows[col] = [x * inv for x in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return tuple(tuple(row[n:]) for row in rows)


def mat_order(a: Matrix, limit: int) -> Optional[int]:
    """Multiplicative order of a, or None if it exceeds `limit`."""
    ident = mat_identity(len(a))
    p = a
    for k in range(1, limit + 1):
        if p == ident:
            return k
        p = mat_mul(p, a)
    return None


# ---------------------------------------------------------------------------
# sparse multivariate polynomials
# ---------------------------------------------------------------------------

class Poly:
    """Sparse polynomial: dict {exponent tuple: Fraction} in `n` variables."""

    __slots__ = ("n", "c")

    def __init__(self, n: int, coeffs: Optional[dict] = None):
        self.n = n
        self.c = coeffs if coeffs is not None else {}

    # -- constructors

    @staticmethod
    def zero(n: int) -> "Poly":
        return Poly(n)

    @staticmethod
    def const(n: int, q) -> "Poly":
        q = Fraction(q)
        return Poly(n, {(0,) * n: q} if q else {})

    @staticmethod
    def variable(n: int, i: int) -> "Poly":
        e = [0] * n
        e[i] = 1
        return Poly(n, {tuple(e): Q1})

    @staticmethod
    def linear(coeffs: Sequence) -> "Poly":
        """Linear form sum(coeffs[i] * x_i)."""
        n = len(coeffs)
        d = {}
        for i, q in enumerate(coeffs):
            q = Fraction(q)
            if q:
                e = [0] * n
                e[i] = 1
                d[tuple(e)] = q
        return Poly(n, d)

    @staticmethod
    def monomial(n: int, exp: Sequence[int], q=Q1) -> "Poly":
        q = Fraction(q)
        return Poly(n, {tuple(exp): q} if q else {})

    # -- queries

    def is_zero(self) -> bool:
        return not self.c

    def linear_coeffs(self) -> Vector:
        """Coefficient vector, requiring the poly to be linear (degree 2)."""
        out = [Q0] * self.n
        for e, q in self.c.items():
            if sum(e) != 1:
                raise InhomogeneousInput("not a linear form")
            out[e.index(1)] = q
        return tuple(out)

    def homogeneous_mdeg(self) -> Optional[int]:
        """Total monomial degree if homogeneous (None for 0), else raises."""
        if not self.c:
            return None
        degs = {sum(e) for e in self.c}
        if len(degs) != 1:
            raise InhomogeneousInput("polynomial is not homogeneous")
        return degs.pop()

    def graded_deg(self) -> Optional[int]:
        m = self.homogeneous_mdeg()
        return None if m is None else 2 * m

    def key(self):
        return tuple(sorted(self.c.items()))

    # -- arithmetic

    def __eq__(self, other):
        return isinstance(other, Poly) and self.n == other.n and self.c == other.c

    def __add__(self, other: "Poly") -> "Poly":
        if self.n != other.n:
            raise DimensionMismatch("variable count mismatch")
        d = dict(self.c)
        for e, q in other.c.items():
            s = d.get(e, Q0) + q
            if s:
                d[e] = s
            else:
                d.pop(e, None)
        return Poly(self.n, d)

    def __neg__(self) -> "Poly":
        return Poly(self.n, {e: -q for e, q in self.c.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            q = Fraction(other)
            if not q:
                return Poly(self.n)
            return Poly(self.n, {e: c * q for e, c in self.c.items()})
        if self.n != other.n:
            raise DimensionMismatch("variable count mismatch")
        d: dict = {}
        for e1, q1 in self.c.items():
            for e2, q2 in other.c.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = d.get(e, Q0) + q1 * q2
                if s:
                    d[e] = s
                else:
                    d.pop(e, None)
        return Poly(self.n, d)

    __rmul__ = __mul__

    def substitute(self, m: Matrix) -> "Poly":
        """Apply x_i -> sum_j m[i][j] x_j."""
        if len(m) != self.n:
            raise DimensionMismatch("substitution matrix size mismatch")
        lins = [Poly.linear(row) for row in m]
        powers: dict = {}

        def power(i: int, e: int) -> "Poly":
            got = powers.get((i, e))
            if got is None:
                got = Poly.const(self.n, 1) if e == 0 else power(i, e - 1) * lins[i]
                powers[(i, e)] = got
            return got

        out = Poly(self.n)
        for e, q in self.c.items():
            term = Poly.const(self.n, q)
            for i, ei in enumerate(e):
                if ei:
                    term = term * power(i, ei)
            out = out + term
        return out

    def __repr__(self):
        if not self.c:
            return "0"
        bits = []
        for e, q in sorted(self.c.items()):
            mono = "*".join(f"x{i}^{k}" if k > 1 else f"x{i}" for i, k in enumerate(e) if k)
            bits.append(f"{q}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def act(w, p: Poly) -> Poly:
    """Dual action of a group element on a polynomial: p composed with w^{-1}.

    `w` must expose `dual_subs`, the substitution matrix of the inverse element
    (rows give the image of each variable).  Degree-preserving and satisfies
    (vw).p = v.(w.p).
    """
    return p.substitute(w.dual_subs)


# -- division by linear forms ------------------------------------------------

def alpha_pivot(alpha: Poly) -> int:
    """Index of the lexicographically-first variable with nonzero coefficient."""
    coeffs = alpha.linear_coeffs()
    for i, q in enumerate(coeffs):
        if q:
            return i
    raise ZeroDivisor("zero linear form")


def divmod_linear(p: Poly, alpha: Poly) -> tuple[Poly, Poly]:
    """Unique (q, r) with p = alpha*q + r and r free of alpha's pivot variable."""
    if alpha.is_zero():
        raise ZeroDivisor("division by zero form")
    piv = alpha_pivot(alpha)
    a_p = alpha.linear_coeffs()[piv]
    q = Poly(p.n)
    r = p
    while True:
        lead = {e: c for e, c in r.c.items() if e[piv] > 0}
        if not lead:
            break
        # peel the highest pivot-exponent terms
        top = max(e[piv] for e in lead)
        step = Poly(p.n)
        for e, c in lead.items():
            if e[piv] == top:
                e2 = list(e)
                e2[piv] -= 1
                step = step + Poly.monomial(p.n, e2, c / a_p)
        q = q + step
        r = r - alpha * step
    return q, r


def normal_form_mod(p: Poly, alpha: Poly) -> Poly:
    """Canonical representative of p modulo (alpha): eliminate the pivot variable."""
    return divmod_linear(p, alpha)[1]


def divide_exact(p: Poly, alpha: Poly) -> Poly:
    """Exact quotient p / alpha for a linear form alpha; NotDivisible otherwise."""
    q, r = divmod_linear(p, alpha)
    if not r.is_zero():
        raise NotDivisible(f"remainder {r!r} is nonzero")
    return q


# ---------------------------------------------------------------------------
# monomial bases and coordinates
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def monomials(nvars: int, mdeg: int) -> tuple:
    """All exponent tuples of total degree mdeg, in a fixed (sorted) order."""
    if mdeg < 0:
        return ()
    if nvars == 1:
        return ((mdeg,),)
    out = []
    for first in range(mdeg, -1, -1):
        for rest in monomials(nvars - 1, mdeg - first):
            out.append((first,) + rest)
    return tuple(out)


def slice_dim(nvars: int, graded_d: int) -> int:
    """dim of the graded-degree-d slice of S(V*): C(d/2 + n - 1, n - 1) for even d."""
    if graded_d < 0 or graded_d % 2:
        return 0
    return len(monomials(nvars, graded_d // 2))


def poly_coords(p: Poly, graded_d: int) -> list:
    """Coordinates of a homogeneous polynomial on the degree-d monomial basis."""
    if graded_d < 0 or graded_d % 2:
        if p.is_zero():
            return []
        raise InhomogeneousInput(f"no polynomials in degree {graded_d}")
    basis = monomials(p.n, graded_d // 2)
    index = {e: i for i, e in enumerate(basis)}
    out = [Q0] * len(basis)
    for e, q in p.c.items():
        pos = index.get(e)
        if pos is None:
            raise InhomogeneousInput(f"term {e} off degree {graded_d}")
        out[pos] = q
    return out


def poly_from_coords(nvars: int, graded_d: int, coords: Sequence) -> Poly:
    basis = monomials(nvars, graded_d // 2)
    return Poly(nvars, {e: Fraction(q) for e, q in zip(basis, coords) if q})


# ---------------------------------------------------------------------------
# exact linear algebra: RREF span tracking
# ---------------------------------------------------------------------------

class SpanSolver:
    """Incremental RREF of a list of vectors with expression tracking.

    Vectors are sequences of Fractions of fixed length.  `add` returns True
    when the vector enlarged the span.  `coords` expresses a vector over the
    inserted ones (in insertion order) or returns None.
    """

    def __init__(self, ncols: int, track: bool = True):
        self.ncols = ncols
        self.track = track
        self.rows: list[list] = []
        self.combs: list[dict] = []
        self.pivots: list[int] = []
        self.n_inserted = 0

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _reduce(self, vec) -> tuple[list, dict]:
        row = list(vec)
        comb: dict = {}
        for r, p in enumerate(self.pivots):
            f = row[p]
            if f:
                ref = self.rows[r]
                for j in range(p, self.ncols):
                    if ref[j]:
                        row[j] -= f * ref[j]
                if self.track:
                    for k, v in self.combs[r].items():
                        s = comb.get(k, Q0) - f * v
                        if s:
                            comb[k] = s
                        else:
                            comb.pop(k, None)
        return row, comb

    def add(self, vec) -> bool:
        idx = self.n_inserted
        self.n_inserted += 1
        row, comb = self._reduce(vec)
        piv = next((j for j in range(self.ncols) if row[j]), None)
        if piv is None:
            return False
        inv = Q1 / row[piv]
        row = [x * inv for x in row]
        if self.track:
            comb = {k: v * inv for k, v in comb.items()}
            comb[idx] = comb.get(idx, Q0) + inv
        # back-eliminate to keep full RREF
        for r, p in enumerate(self.pivots):
            f = self.rows[r][piv]
            if f:
                ref = self.rows[r]
                for j in range(self.ncols):
                    if row[j]:
                        ref[j] -= f * row[j]
                if self.track:
                    cr = self.combs[r]
                    for k, v in comb.items():
                        s = cr.get(k, Q0) - f * v
                        if s:
                            cr[k] = s
                        else:
                            cr.pop(k, None)
        pos = 0
        while pos < len(self.pivots) and self.pivots[pos] < piv:
            pos += 1
        self.rows.insert(pos, row)
        self.pivots.insert(pos, piv)
        if self.track:
            self.combs.insert(pos, comb)
        else:
            self.combs.insert(pos, {})
        return True

    def residual(self, vec) -> tuple[list, dict]:
        """(residual, coeffs): vec = sum coeffs[i]*inserted_i + residual."""
        row, comb = self._reduce(vec)
        return row, {k: -v for k, v in comb.items()}

    def contains(self, vec) -> bool:
        row, _ = self._reduce(vec)
        return not any(row)

    def coords(self, vec) -> Optional[dict]:
        """Expression of vec over inserted vectors, or None if outside the span."""
        row, comb = self._reduce(vec)
        if any(row):
            return None
        return {k: -v for k, v in comb.items()}


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[tuple]:
    """Basis of {x : row . x = 0 for all rows}, deterministic order."""
    solver = SpanSolver(ncols, track=False)
    for r in rows:
        solver.add(r)
    pivset = set(solver.pivots)
    free = [j for j in range(ncols) if j not in pivset]
    basis = []
    for f in free:
        x = [Q0] * ncols
        x[f] = Q1
        for r, p in zip(solver.rows, solver.pivots):
            x[p] = -r[f]
        basis.append(tuple(x))
    return basis


def span_basis(vectors: Sequence[Sequence], ncols: int) -> list[int]:
    """Indices of a deterministic spanning subset (first independent ones)."""
    solver = SpanSolver(ncols, track=False)
    out = []
    for i, v in enumerate(vectors):
        if solver.add(v):
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# polynomial vectors over a slot layout
# ---------------------------------------------------------------------------

def pv_zero(nslots: int, nvars: int) -> list[Poly]:
    return [Poly(nvars) for _ in range(nslots)]


def pv_add(a: Sequence[Poly], b: Sequence[Poly]) -> list[Poly]:
    return [x + y for x, y in zip(a, b)]


def pv_scale(p, a: Sequence[Poly]) -> list[Poly]:
    """Multiply each entry by a Poly or Fraction."""
    return [p * x if isinstance(p, Poly) else x * p for x in a]


def pv_is_zero(a: Sequence[Poly]) -> bool:
    return all(x.is_zero() for x in a)


@lru_cache(maxsize=None)
def _layout(nvars: int, coord_degs: tuple, g: int) -> tuple:
    """Flat coordinate layout for elements of degree g: (slot, exponent) pairs."""
    out = []
    for slot, cd in enumerate(coord_degs):
        d = g - cd
        if d >= 0 and d % 2 == 0:
            for e in monomials(nvars, d // 2):
                out.append((slot, e))
    return tuple(out)


def pv_flatten(vec: Sequence[Poly], coord_degs: Sequence[int], g: int) -> list:
    """Flat Fraction coordinates of a degree-g polyvec; checks homogeneity."""
    nvars = vec[0].n
    lay = _layout(nvars, tuple(coord_degs), g)
    index = {pair: i for i, pair in enumerate(lay)}
    out = [Q0] * len(lay)
    for slot, p in enumerate(vec):
        for e, q in p.c.items():
            pos = index.get((slot, e))
            if pos is None:
                raise InhomogeneousInput(
                    f"entry in slot {slot} has term {e} off degree {g}"
                )
            out[pos] = q
    return out


def pv_unflatten(coords: Sequence, coord_degs: Sequence[int], g: int, nvars: int) -> list[Poly]:
    lay = _layout(nvars, tuple(coord_degs), g)
    vec = [Poly(nvars) for _ in coord_degs]
    for (slot, e), q in zip(lay, coords):
        if q:
            vec[slot] = vec[slot] + Poly.monomial(nvars, e, q)
    return vec


def pv_layout_dim(nvars: int, coord_degs: Sequence[int], g: int) -> int:
    return len(_layout(nvars, tuple(coord_degs), g))


# ---------------------------------------------------------------------------
# degree slices and graded bases
# ---------------------------------------------------------------------------

@dataclass
class DegreeSlice:
    """Basis of the degree-d piece of a space of polynomial vectors."""

    degree: int
    coord_degs: tuple
    nvars: int
    vectors: list = field(default_factory=list)   # polyvecs
    solver: Optional[SpanSolver] = None           # RREF witness over the flat layout

    @property
    def dim(self) -> int:
        return len(self.vectors)

    def membership(self, vec: Sequence[Poly]) -> Optional[dict]:
        """Coordinates of vec over the slice basis, or None."""
        flat = pv_flatten(vec, self.coord_degs, self.degree)
        if self.solver is None:
            raise InhomogeneousInput("slice has no solver witness")
        return self.solver.coords(flat)


def slice_from_vectors(vectors: Sequence[Sequence[Poly]], coord_degs, nvars: int,
                       degree: int) -> DegreeSlice:
    """Deterministically thin a spanning family to a basis with RREF witness."""
    ncols = pv_layout_dim(nvars, coord_degs, degree)
    solver = SpanSolver(ncols)
    kept = []
    for v in vectors:
        if solver.add(pv_flatten(v, coord_degs, degree)):
            kept.append([Poly(nvars, dict(p.c)) for p in v])
    basis_solver = SpanSolver(ncols)
    for v in kept:
        basis_solver.add(pv_flatten(v, coord_degs, degree))
    return DegreeSlice(degree, tuple(coord_degs), nvars, kept, basis_solver)


def solve_slice(conditions: Sequence[Sequence], coord_degs, nvars: int,
                degree: int) -> DegreeSlice:
    """Kernel mode: basis of flat solutions of homogeneous linear conditions."""
    ncols = pv_layout_dim(nvars, coord_degs, degree)
    basis = nullspace(conditions, ncols)
    vectors = [pv_unflatten(b, coord_degs, degree, nvars) for b in basis]
    solver = SpanSolver(ncols)
    for b in basis:
        solver.add(b)
    return DegreeSlice(degree, tuple(coord_degs), nvars, vectors, solver)


@dataclass
class GradedBasis:
    """Homogeneous generators with sorted degrees over a slot layout."""

    degrees: list
    elements: list          # polyvecs, parallel to degrees
    coord_degs: tuple
    nvars: int
    ambient: str = ""
    free_verified: bool = False

    def __len__(self):
        return len(self.elements)

    def hilbert(self, d: int) -> int:
        """Slice dimension of the free module on these generators."""
        return sum(slice_dim(self.nvars, d - g) for g in self.degrees)


def minimal_generators(slices: Mapping[int, DegreeSlice], d_max: int,
                       coord_degs, nvars: int, ambient: str = "") -> GradedBasis:
    """Graded-Nakayama extraction of minimal generators from module slices.

    `slices` must contain every degree in [d_min, d_max] where the module is
    nonzero, and be closed under multiplication by V* (checked; violations
    raise NotClosedUnderAction).  Generators are returned degree by degree as
    the complement of V*.slice_{d-2} inside slice_d.
    """
    degs = sorted(d for d in slices if slices[d].dim > 0 and d <= d_max)
    gen_degs: list = []
    gens: list = []
    variables = [Poly.variable(nvars, i) for i in range(nvars)]
    for d in degs:
        cur = slices[d]
        ncols = pv_layout_dim(nvars, coord_degs, d)
        solver = SpanSolver(ncols, track=False)
        prev = slices.get(d - 2)
        if prev is not None:
            for v in prev.vectors:
                for x in variables:
                    w = pv_scale(x, v)
                    flat = pv_flatten(w, coord_degs, d)
                    if cur.solver is not None and not cur.solver.contains(flat):
                        raise NotClosedUnderAction(
                            f"V*-multiple escapes the degree-{d} slice"
                        )
                    solver.add(flat)
        for v in cur.vectors:
            if solver.add(pv_flatten(v, coord_degs, d)):
                gen_degs.append(d)
                gens.append(v)
    return GradedBasis(gen_degs, gens, tuple(coord_degs), nvars, ambient)


# ---------------------------------------------------------------------------
# rational formatting helpers
# ---------------------------------------------------------------------------

def frac_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def parse_frac(s) -> Fraction:
    return Fraction(s) if not isinstance(s, str) else Fraction(*map(int, s.split("/"))) if "/" in s else Fraction(int(s))
