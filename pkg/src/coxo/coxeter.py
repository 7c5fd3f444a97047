"""Coxeter systems with exact rational realizations and Bruhat combinatorics.

A system is given by a Coxeter matrix together with a realization: one exact
rational involution per generator acting on V, plus the root functional
alpha_s in V* cutting out its fixed hyperplane.  Group elements are interned
by their matrix (the canonical key); lengths and reduced words come from
breadth-first enumeration, and the Bruhat order is decided by the subword
property applied to a fixed reduced word.

The Kazhdan-Lusztig oracle implements the classical recursion (left descents
with mu-correction) and is independent of the sheaf-theoretic pipeline; the
two are cross-checked downstream.
"""

from __future__ import annotations

import json
import threading
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import (
    CoxoError,
    NonInvolution,
    NotInInterval,
    NotReducedWord,
    RootMismatch,
    WrongBraidOrder,
)
from .polylin import (
    Poly,
    mat,
    mat_identity,
    mat_inv,
    mat_mul,
    mat_order,
    parse_frac,
)

Q0 = Fraction(0)
Q1 = Fraction(1)

_LETTERS = "stuvw"


def _matrix_rank(m) -> int:
    rows = [list(r) for r in m]
    rank = 0
    ncols = len(m[0])
    piv_row = 0
    for col in range(ncols):
        sel = next((r for r in range(piv_row, len(rows)) if rows[r][col] != 0), None)
        if sel is None:
            continue
        rows[piv_row], rows[sel] = rows[sel], rows[piv_row]
        inv = Q1 / rows[piv_row][col]
        rows[piv_row] = [x * inv for x in rows[piv_row]]
        for r in range(len(rows)):
            if r != piv_row and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[piv_row])]
        piv_row += 1
        rank += 1
    return rank


def fixed_space_codim(matrix) -> int:
    n = len(matrix)
    shifted = tuple(
        tuple(matrix[i][j] - (Q1 if i == j else Q0) for j in range(n)) for i in range(n)
    )
    return _matrix_rank(shifted)


class Element:
    """Group element: exact matrix key, length, and a stored reduced word."""

    __slots__ = ("system", "matrix", "length", "word", "dual_subs", "_key")

    def __init__(self, system: "CoxeterSystem", matrix, length: int, word: tuple):
        self.system = system
        self.matrix = matrix
        self.length = length
        self.word = word
        # Substitution matrix for the dual action on V*: variables map through
        # the inverse matrix, so (vw).p = v.(w.p) holds.
        self.dual_subs = mat_inv(matrix)
        self._key = (length, tuple(x for row in matrix for x in row))

    def sort_key(self):
        return self._key

    def __hash__(self):
        return hash(self._key[1])

    def __eq__(self, other):
        return isinstance(other, Element) and self.matrix == other.matrix

    def __lt__(self, other):
        return self._key < other._key

    def letters(self) -> str:
        if not self.word:
            return "e"
        if self.system.rank <= len(_LETTERS):
            return "".join(_LETTERS[i] for i in self.word)
        return "*".join(f"s{i + 1}" for i in self.word)

    def __repr__(self):
        return f"<{self.letters()}>"


class KLTable:
    """Write-once memo of Kazhdan-Lusztig polynomials (coefficient tuples).

    Tolerates concurrent readers and idempotent concurrent writers: a second
    write of the same key must carry the same value.
    """

    def __init__(self):
        self._table: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._table.get(key)

    def put(self, key, value: tuple):
        with self._lock:
            prev = self._table.get(key)
            if prev is None:
                self._table[key] = value
            elif prev != value:
                raise CoxoError("KL memo rewrite with a different value")

    def items(self):
        return dict(self._table)


class CoxeterSystem:
    """Validated Coxeter system with a rational reflection realization."""

    def __init__(self, coxeter_matrix, generators, name: str = "",
                 enumeration_limit: int = 20000):
        self.name = name
        self.rank = len(coxeter_matrix)
        self.coxeter_matrix = tuple(tuple(int(x) for x in row) for row in coxeter_matrix)
        self.gen_matrices = tuple(mat(g[0]) for g in generators)
        self.dimV = len(self.gen_matrices[0])
        self.alphas = tuple(Poly.linear([Fraction(a) for a in g[1]]) for g in generators)
        self.enumeration_limit = enumeration_limit
        self._validate()
        self._elements: dict = {}
        self._by_level: list[list[Element]] = []
        self._enumerated_all = False
        self._downsets: dict = {}
        self._reflections: Optional[tuple] = None
        self.kl_table = KLTable()
        ident = mat_identity(self.dimV)
        e = Element(self, ident, 0, ())
        self._elements[ident] = e
        self._by_level.append([e])

    # -- validation ---------------------------------------------------------

    def _validate(self):
        m = self.coxeter_matrix
        if any(len(row) != self.rank for row in m):
            raise CoxoError("coxeter matrix is not square")
        for i in range(self.rank):
            if m[i][i] != 1:
                raise CoxoError("coxeter matrix diagonal must be 1")
            for j in range(self.rank):
                if m[i][j] != m[j][i]:
                    raise CoxoError("coxeter matrix must be symmetric")
        ident = mat_identity(self.dimV)
        for i, g in enumerate(self.gen_matrices):
            if len(g) != self.dimV or any(len(row) != self.dimV for row in g):
                raise CoxoError("realization matrices must be square of equal size")
            if mat_mul(g, g) != ident:
                raise NonInvolution(f"generator {i} does not square to identity")
            if fixed_space_codim(g) != 1:
                raise NonInvolution(f"generator {i} fixed space has codim != 1")
        for i in range(self.rank):
            for j in range(i + 1, self.rank):
                order = self.coxeter_matrix[i][j]
                if order in (0,):  # infinity
                    continue
                prod = mat_mul(self.gen_matrices[i], self.gen_matrices[j])
                got = mat_order(prod, 2 * order + 2)
                if got != order:
                    raise WrongBraidOrder(
                        f"product of generators {i},{j} has order {got}, expected {order}"
                    )
        for i, alpha in enumerate(self.alphas):
            if alpha.is_zero():
                raise RootMismatch(f"alpha_{i} is zero")
            coeffs = alpha.linear_coeffs()
            g = self.gen_matrices[i]
            # alpha vanishes on the fixed hyperplane iff alpha . (g v) = -alpha . v
            # for v spanning the (-1)-eigenline plus 0 on fixed vectors; both are
            # captured by the single dual-action identity s(alpha) = -alpha.
            image = tuple(
                sum(coeffs[k] * g[k][j] for k in range(self.dimV))
                for j in range(self.dimV)
            )
            if image != tuple(-c for c in coeffs):
                raise RootMismatch(f"alpha_{i} is not anti-invariant under generator {i}")

    # -- enumeration ----------------------------------------------------------

    def generator(self, i: int) -> Element:
        self._enumerate_to(1)
        g = self.gen_matrices[i]
        return self._elements[g]

    def identity(self) -> Element:
        return self._by_level[0][0]

    def _enumerate_to(self, depth: int):
        """BFS levels of the Cayley graph up to the given word length."""
        while len(self._by_level) <= depth and not self._enumerated_all:
            frontier = self._by_level[-1]
            level = len(self._by_level)
            new: dict = {}
            for el in frontier:
                for i, g in enumerate(self.gen_matrices):
                    m2 = mat_mul(el.matrix, g)
                    if m2 in self._elements or m2 in new:
                        continue
                    new[m2] = Element(self, m2, level, el.word + (i,))
            if not new:
                self._enumerated_all = True
                return
            batch = sorted(new.values())
            for el in batch:
                self._elements[el.matrix] = el
            self._by_level.append(batch)
            if len(self._elements) > self.enumeration_limit:
                raise CoxoError("enumeration limit exceeded (infinite system?)")

    def element_from_word(self, word: Sequence[int]) -> Element:
        m = mat_identity(self.dimV)
        for i in word:
            m = mat_mul(m, self.gen_matrices[i])
        self._enumerate_to(len(word))
        return self._elements[m]

    def all_elements(self) -> list[Element]:
        """Every element of a finite system, sorted by (length, matrix key)."""
        self._enumerate_to(self.enumeration_limit)
        if not self._enumerated_all:
            raise CoxoError("group is not finite within the enumeration limit")
        return sorted(self._elements.values())

    def order(self) -> int:
        return len(self.all_elements())

    def mul(self, a: Element, b: Element) -> Element:
        m = mat_mul(a.matrix, b.matrix)
        self._enumerate_to(a.length + b.length)
        return self._elements[m]

    def inv(self, a: Element) -> Element:
        m = mat_inv(a.matrix)
        self._enumerate_to(a.length)
        return self._elements[m]

    def left_mul_gen(self, i: int, a: Element) -> Element:
        m = mat_mul(self.gen_matrices[i], a.matrix)
        self._enumerate_to(a.length + 1)
        return self._elements[m]

    def right_mul_gen(self, a: Element, i: int) -> Element:
        m = mat_mul(a.matrix, self.gen_matrices[i])
        self._enumerate_to(a.length + 1)
        return self._elements[m]

    # -- Bruhat order -----------------------------------------------------------

    def downset(self, w: Element) -> frozenset:
        """{y : y <= w} as a frozenset of matrices, via the subword property."""
        got = self._downsets.get(w.matrix)
        if got is not None:
            return got
        word = w.word
        seen = {mat_identity(self.dimV)}
        # grow subword products letter by letter: at each letter either skip or use
        for i in word:
            g = self.gen_matrices[i]
            seen |= {mat_mul(m, g) for m in seen}
        self._enumerate_to(len(word))
        out = frozenset(seen)
        self._downsets[w.matrix] = out
        return out

    def bruhat_leq(self, x: Element, y: Element) -> bool:
        return x.matrix in self.downset(y)

    def enumerate_interval(self, w: Element) -> list[Element]:
        """Ordered list of {y : y <= w}: downward closed, identity first."""
        keys = self.downset(w)
        return sorted(self._elements[k] for k in keys)

    def is_reflection_matrix(self, m) -> bool:
        return (
            m != mat_identity(self.dimV)
            and mat_mul(m, m) == mat_identity(self.dimV)
            and fixed_space_codim(m) == 1
        )

    def reflections(self) -> tuple:
        """All reflections of a finite system (conjugates of the generators)."""
        if self._reflections is None:
            elems = self.all_elements()
            found = {}
            for el in elems:
                for i in range(self.rank):
                    m = mat_mul(mat_mul(el.matrix, self.gen_matrices[i]), mat_inv(el.matrix))
                    found[m] = self._elements[m]
            self._reflections = tuple(sorted(found.values()))
        return self._reflections

    def reflections_between(self, interval: Sequence[Element]) -> list[tuple]:
        """All triples (t, x, tx) with x, tx in the interval, shorter first."""
        inset = {el.matrix for el in interval}
        for el in interval:
            if el.matrix not in self._elements:
                raise NotInInterval("element not interned in this system")
        out = []
        for x in interval:
            for y in interval:
                if x.length < y.length:
                    t_mat = mat_mul(y.matrix, mat_inv(x.matrix))
                    if self.is_reflection_matrix(t_mat) and y.matrix in inset:
                        self._enumerate_to(x.length + y.length)
                        t = self._elements.get(t_mat)
                        if t is None:
                            # reflection may be longer than enumerated; extend
                            self._enumerate_to(self.enumeration_limit)
                            t = self._elements[t_mat]
                        out.append((t, x, y))
        out.sort(key=lambda triple: (triple[1].sort_key(), triple[2].sort_key()))
        return out

    # -- descents / words ------------------------------------------------------

    def left_descent(self, x: Element) -> Optional[int]:
        for i in range(self.rank):
            if self.left_mul_gen(i, x).length < x.length:
                return i
        return None

    def is_reduced_word(self, word: Sequence[int]) -> bool:
        return self.element_from_word(word).length == len(word)

    def reduced_words(self, w: Element) -> list[tuple]:
        """All reduced words of w, by descent recursion, sorted."""
        if w.length == 0:
            return [()]
        out = []
        for i in range(self.rank):
            wi = self.right_mul_gen(w, i)
            if wi.length < w.length:
                out.extend(word + (i,) for word in self.reduced_words(wi))
        return sorted(out)

    # -- Kazhdan-Lusztig oracle --------------------------------------------------

    def kl_polynomial(self, y: Element, x: Element) -> tuple:
        """P_{y,x}(q) as a tuple of integer coefficients (constant term first)."""
        key = (y.matrix, x.matrix)
        got = self.kl_table.get(key)
        if got is not None:
            return got
        if y == x:
            val = (1,)
        elif not self.bruhat_leq(y, x):
            val = ()
        else:
            s = self.left_descent(x)
            assert s is not None
            xp = self.left_mul_gen(s, x)          # sx < x
            sy = self.left_mul_gen(s, y)
            c = 1 if sy.length < y.length else 0
            term1 = _q_shift(self.kl_polynomial(sy, xp), 1 - c)
            term2 = _q_shift(self.kl_polynomial(y, xp), c)
            val = _q_add(term1, term2)
            for z in self.enumerate_interval(xp):
                if self.left_mul_gen(s, z).length < z.length and self.bruhat_leq(y, z):
                    pzx = self.kl_polynomial(z, xp)
                    mu_deg = (xp.length - z.length - 1)
                    if mu_deg < 0 or mu_deg % 2:
                        continue
                    mu = pzx[mu_deg // 2] if mu_deg // 2 < len(pzx) else 0
                    if mu:
                        corr = _q_shift(
                            _q_scale(self.kl_polynomial(y, z), mu),
                            (x.length - z.length) // 2,
                        )
                        val = _q_sub(val, corr)
        self.kl_table.put(key, val)
        return val

    # -- reflection faithfulness ---------------------------------------------------

    def check_reflection_faithful(self, interval: Sequence[Element]) -> dict:
        """Verify codim(V^w) == 1 exactly for reflections, over the interval.

        Reflections are detected as conjugates u s u^{-1} formed from interval
        elements; for a full finite group this is the complete reflection set.
        """
        refl_mats = set()
        for u in interval:
            for i in range(self.rank):
                refl_mats.add(
                    mat_mul(mat_mul(u.matrix, self.gen_matrices[i]), mat_inv(u.matrix))
                )
        violations = []
        for w in interval:
            codim = fixed_space_codim(w.matrix)
            is_refl = w.matrix in refl_mats
            if (codim == 1) != is_refl:
                violations.append(
                    {"element": list(w.word), "codim": codim, "is_reflection": is_refl}
                )
        full = self._enumerated_all and len(interval) == len(self._elements)
        return {
            "violations": violations,
            "passed": not violations,
            "scope": "full group" if full else "working interval only",
        }


# -- integer q-polynomials (KL coefficients) -----------------------------------

def _q_trim(p: list) -> tuple:
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def _q_add(a: tuple, b: tuple) -> tuple:
    n = max(len(a), len(b))
    return _q_trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def _q_sub(a: tuple, b: tuple) -> tuple:
    return _q_add(a, tuple(-x for x in b))


def _q_scale(a: tuple, c: int) -> tuple:
    return _q_trim([x * c for x in a])


def _q_shift(a: tuple, k: int) -> tuple:
    if not a:
        return ()
    return tuple([0] * k + list(a))


def qpoly_str(p: tuple) -> str:
    if not p:
        return "0"
    bits = []
    for i, c in enumerate(p):
        if c == 0:
            continue
        if i == 0:
            bits.append(str(c))
        else:
            mono = "q" if i == 1 else f"q^{i}"
            bits.append(mono if c == 1 else f"{c}{mono}")
    return "+".join(bits)


# ---------------------------------------------------------------------------
# built-in crystallographic realizations
# ---------------------------------------------------------------------------

_CARTAN = {
    "A1": [[2]],
    "A1XA1": [[2, 0], [0, 2]],
    "A2": [[2, -1], [-1, 2]],
    "B2": [[2, -1], [-2, 2]],
    "G2": [[2, -1], [-3, 2]],
    "A3": [[2, -1, 0], [-1, 2, -1], [0, -1, 2]],
}

_BRAID_ORDER = {0: 2, 1: 3, 2: 4, 3: 6}


def _cartan_system(cartan, name: str) -> CoxeterSystem:
    n = len(cartan)
    cox = [[1] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                prod = cartan[i][j] * cartan[j][i]
                if prod not in _BRAID_ORDER:
                    raise CoxoError("non-crystallographic Cartan product")
                cox[i][j] = _BRAID_ORDER[prod]
    gens = []
    for i in range(n):
        m = [[Q1 if r == c else Q0 for c in range(n)] for r in range(n)]
        for j in range(n):
            m[i][j] -= Fraction(cartan[i][j])
        gens.append((m, [Fraction(c) for c in cartan[i]]))
    return CoxeterSystem(cox, gens, name=name)


def builtin_system(name: str) -> CoxeterSystem:
    key = name.upper().replace("X", "X")
    if key not in _CARTAN:
        raise CoxoError(f"unknown built-in system {name!r}; have {sorted(_CARTAN)}")
    return _cartan_system(_CARTAN[key], key if key != "A1XA1" else "A1xA1")


def build_system(coxeter_matrix, realization, name: str = "") -> CoxeterSystem:
    """Validated system from explicit data: realization = [(matrix, alpha), ...]."""
    return CoxeterSystem(coxeter_matrix, realization, name=name)


def load_realization(path_or_dict) -> CoxeterSystem:
    """Realization input file: rationals are "p/q" strings, builtins by name."""
    if isinstance(path_or_dict, str):
        with open(path_or_dict) as fh:
            data = json.load(fh)
    else:
        data = path_or_dict
    if isinstance(data, str):
        return builtin_system(data)
    gens = [
        (
            [[parse_frac(x) for x in row] for row in g["matrix"]],
            [parse_frac(x) for x in g["alpha"]],
        )
        for g in data["generators"]
    ]
    if len(gens) != data["rank"]:
        raise CoxoError("generator count does not match rank")
    if any(len(g[0]) != data["dimV"] for g in gens):
        raise CoxoError("matrix size does not match dimV")
    return build_system(data["coxeter_matrix"], gens, name=data.get("name", "custom"))
