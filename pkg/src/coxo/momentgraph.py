"""Moment graphs of Bruhat intervals, sheaves on them, and section computations.

Vertices are the elements of a Bruhat interval; for every reflection t and
every pair (x, tx) inside the interval there is one edge, directed from the
Bruhat-smaller element (the head) to the larger (the tail), labeled by the
line through alpha_t.  Labels are stored as actual linear forms, normalized so
the first nonzero coefficient is 1.

A sheaf assigns a graded free module to each vertex, a graded free module over
S(V*)/(alpha_E) to each edge, and restriction maps from the two endpoint
stalks; edge-module entries are kept in normal form modulo the label (the
label's pivot variable is eliminated).  Sections over an upwardly closed
vertex set are computed degreewise as the kernel of the edge-compatibility
system, with minimal generators extracted by graded Nakayama.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from .coxeter import CoxeterSystem, Element
from .errors import CoxoError, NotInInterval, NotSeparating
from .polylin import (
    GradedBasis,
    Poly,
    SpanSolver,
    act,
    alpha_pivot,
    minimal_generators,
    monomials,
    normal_form_mod,
    nullspace,
    pv_flatten,
    pv_layout_dim,
    pv_unflatten,
    slice_dim,
    slice_from_vectors,
    DegreeSlice,
)

Q0 = Fraction(0)
Q1 = Fraction(1)


@lru_cache(maxsize=None)
def nf_monomials(nvars: int, mdeg: int, pivot: int) -> tuple:
    """Monomial basis of S(V*)/(alpha) in its normal form: pivot exponent 0."""
    return tuple(e for e in monomials(nvars, mdeg) if e[pivot] == 0)


def nf_slice_dim(nvars: int, graded_d: int, pivot: int) -> int:
    if graded_d < 0 or graded_d % 2:
        return 0
    return len(nf_monomials(nvars, graded_d // 2, pivot))


@dataclass(frozen=True)
class Edge:
    head: int        # index of the Bruhat-smaller endpoint
    tail: int        # index of the larger endpoint
    label: Poly      # normalized multiple of alpha_t
    pivot: int       # eliminated variable for normal forms mod the label
    reflection: Element


class MomentGraph:
    """The V*-moment graph of the interval {y <= w}."""

    def __init__(self, system: CoxeterSystem, vertices: Sequence[Element],
                 edges: Sequence[Edge], top: Optional[Element] = None):
        self.system = system
        self.vertices = list(vertices)
        self.top = top
        self.nvars = system.dimV
        self.vindex = {v.matrix: i for i, v in enumerate(self.vertices)}
        self.edges = list(edges)
        self.up_edges: list[list[int]] = [[] for _ in self.vertices]
        self.down_edges: list[list[int]] = [[] for _ in self.vertices]
        for k, e in enumerate(self.edges):
            self.up_edges[e.head].append(k)
            self.down_edges[e.tail].append(k)
        self._leq = None

    def index(self, el: Element) -> int:
        got = self.vindex.get(el.matrix)
        if got is None:
            raise NotInInterval(f"{el!r} is not a vertex of this graph")
        return got

    def leq(self, i: int, j: int) -> bool:
        if self._leq is None:
            n = len(self.vertices)
            self._leq = [
                [self.system.bruhat_leq(self.vertices[a], self.vertices[b])
                 for b in range(n)]
                for a in range(n)
            ]
        return self._leq[i][j]

    def principal_upset(self, i: int, strict: bool = False) -> "UpSet":
        members = [
            j for j in range(len(self.vertices))
            if self.leq(i, j) and (not strict or j != i)
        ]
        return UpSet(self, tuple(sorted(members)))

    def full_upset(self) -> "UpSet":
        return UpSet(self, tuple(range(len(self.vertices))))

    def to_json(self) -> dict:
        from .polylin import frac_str
        return {
            "system": self.system.name,
            "vertices": [list(v.word) for v in self.vertices],
            "edges": [
                {
                    "head": list(self.vertices[e.head].word),
                    "tail": list(self.vertices[e.tail].word),
                    "label": [frac_str(c) for c in e.label.linear_coeffs()],
                }
                for e in self.edges
            ],
            "bruhat_leq": [
                [1 if self.leq(a, b) else 0 for b in range(len(self.vertices))]
                for a in range(len(self.vertices))
            ],
            "realization": {
                "dimV": self.system.dimV,
                "alphas": [
                    [frac_str(c) for c in a.linear_coeffs()] for a in self.system.alphas
                ],
            },
        }


@dataclass(frozen=True)
class UpSet:
    graph: MomentGraph
    members: tuple  # sorted vertex indices

    def __post_init__(self):
        inset = set(self.members)
        for i in self.members:
            for j in range(len(self.graph.vertices)):
                if self.graph.leq(i, j) and j not in inset:
                    raise CoxoError("vertex set is not upwardly closed")

    def __contains__(self, i: int) -> bool:
        return i in set(self.members)

    def edge_indices(self) -> list[int]:
        inset = set(self.members)
        return [
            k for k, e in enumerate(self.graph.edges)
            if e.head in inset and e.tail in inset
        ]


def reflection_label(system: CoxeterSystem, t: Element) -> tuple[Poly, int]:
    """Normalized linear form cutting the fixed hyperplane of a reflection."""
    m = t.matrix
    n = system.dimV
    for i in range(n):
        row = [m[i][j] - (Q1 if i == j else Q0) for j in range(n)]
        if any(row):
            alpha = Poly.linear(row)
            piv = alpha_pivot(alpha)
            lead = alpha.linear_coeffs()[piv]
            alpha = alpha * (Q1 / lead)
            return alpha, piv
    raise CoxoError("identity passed as a reflection")


def build_moment_graph(system: CoxeterSystem, w: Element) -> MomentGraph:
    interval = system.enumerate_interval(w)
    vindex = {v.matrix: i for i, v in enumerate(interval)}
    edges = []
    for t, x, tx in system.reflections_between(interval):
        label, piv = reflection_label(system, t)
        edges.append(Edge(vindex[x.matrix], vindex[tx.matrix], label, piv, t))
    graph = MomentGraph(system, interval, edges, top=w)
    _check_graph(graph)
    return graph


def full_moment_graph(system: CoxeterSystem) -> MomentGraph:
    els = system.all_elements()
    return build_moment_graph(system, els[-1]) if els[-1].length > 0 else MomentGraph(
        system, els, [], top=els[-1]
    )


def _check_graph(graph: MomentGraph):
    for e in graph.edges:
        h, t = graph.vertices[e.head], graph.vertices[e.tail]
        if not (h.length < t.length and graph.system.bruhat_leq(h, t)):
            raise CoxoError("edge direction violates the Bruhat order")
    # distinct reflections at a shared vertex give non-proportional labels
    for i in range(len(graph.vertices)):
        incident = graph.up_edges[i] + graph.down_edges[i]
        for a in range(len(incident)):
            for b in range(a + 1, len(incident)):
                ea, eb = graph.edges[incident[a]], graph.edges[incident[b]]
                if ea.reflection != eb.reflection and ea.label == eb.label:
                    raise CoxoError("distinct reflections share a label at a vertex")


# ---------------------------------------------------------------------------
# the structure algebra Z, degreewise
# ---------------------------------------------------------------------------

def structure_sections(graph: MomentGraph, d: int) -> DegreeSlice:
    """Basis of degree-d tuples (z_x) with z_x = z_y mod alpha_E on every edge."""
    n = len(graph.vertices)
    coord_degs = tuple([0] * n)
    nvars = graph.nvars
    unknown_dim = pv_layout_dim(nvars, coord_degs, d)
    conditions = _edge_condition_rows(
        graph, list(range(n)), coord_degs, {i: [0] for i in range(n)}, d,
        stalk_rho=None,
    )
    basis = nullspace(conditions, unknown_dim)
    vectors = [pv_unflatten(b, coord_degs, d, nvars) for b in basis]
    solver = SpanSolver(unknown_dim)
    for b in basis:
        solver.add(b)
    return DegreeSlice(d, coord_degs, nvars, vectors, solver)


def euler_element(graph: MomentGraph, lam: Poly) -> list[Poly]:
    """zeta_lambda = (w(lambda))_w; raises NotSeparating if values collide."""
    vals = [act(v, lam) for v in graph.vertices]
    seen = {}
    for v, p in zip(graph.vertices, vals):
        key = p.key()
        if key in seen:
            raise NotSeparating(
                f"lambda takes equal values at {seen[key]!r} and {v!r}"
            )
        seen[key] = v
    _verify_congruences(graph, vals)
    return vals


def c_element(graph: MomentGraph, s: int) -> list[Poly]:
    """c_s = (w(alpha_s))_w, a degree-2 section of the structure sheaf."""
    vals = [act(v, graph.system.alphas[s]) for v in graph.vertices]
    _verify_congruences(graph, vals)
    return vals


def _verify_congruences(graph: MomentGraph, vals: Sequence[Poly]):
    for e in graph.edges:
        diff = vals[e.head] - vals[e.tail]
        if not normal_form_mod(diff, e.label).is_zero():
            raise CoxoError("edge congruence violated")


def separating_element(graph: MomentGraph) -> tuple[Poly, list[Poly]]:
    """Deterministic choice of a separating lambda: coefficient ladder."""
    nvars = graph.nvars
    for attempt in range(1, 8):
        lam = Poly.linear([Fraction((i + 1) ** attempt) for i in range(nvars)])
        try:
            return lam, euler_element(graph, lam)
        except NotSeparating:
            continue
    raise NotSeparating("no separating functional found in the ladder")


# ---------------------------------------------------------------------------
# sheaves
# ---------------------------------------------------------------------------

@dataclass
class GSheaf:
    """Per-vertex graded free stalks, per-edge quotient modules, restrictions.

    stalks[i]   : sorted generator degrees of the stalk at vertex i
    edge_gens[k]: generator degrees of the module on edge k (normal form mod
                  the label: entries never contain the label's pivot variable)
    rho[(i, k)] : matrix (rows: edge generators, cols: stalk generators) of the
                  restriction, entries in normal form mod the edge label
    """

    graph: MomentGraph
    stalks: dict
    edge_gens: dict
    rho: dict
    name: str = ""

    def support(self) -> list[int]:
        return sorted(i for i, degs in self.stalks.items() if degs)

    def stalk_rank(self, i: int) -> int:
        return len(self.stalks.get(i, []))

    def graded_rank(self, i: int) -> tuple:
        """Stalk rank as a q-polynomial: coefficient of q^k counts degree-2k gens."""
        degs = self.stalks.get(i, [])
        if not degs:
            return ()
        if any(d < 0 or d % 2 for d in degs):
            raise CoxoError("stalk generator degrees are not of the form 2k")
        out = [0] * (max(d // 2 for d in degs) + 1)
        for d in degs:
            out[d // 2] += 1
        return tuple(out)


def structure_sheaf(graph: MomentGraph) -> GSheaf:
    nvars = graph.nvars
    stalks = {i: [0] for i in range(len(graph.vertices))}
    edge_gens = {k: [0] for k in range(len(graph.edges))}
    rho = {}
    for k, e in enumerate(graph.edges):
        one = [[Poly.const(nvars, 1)]]
        rho[(e.head, k)] = one
        rho[(e.tail, k)] = [[Poly.const(nvars, 1)]]
    return GSheaf(graph, stalks, edge_gens, rho, name="structure")


def verma_sheaf(graph: MomentGraph, x: Element) -> GSheaf:
    ix = graph.index(x)
    stalks = {i: ([0] if i == ix else []) for i in range(len(graph.vertices))}
    edge_gens = {k: [] for k in range(len(graph.edges))}
    rho = {}
    for k, e in enumerate(graph.edges):
        for side in (e.head, e.tail):
            rho[(side, k)] = [[] for _ in range(0)]  # zero module target
    return GSheaf(graph, stalks, edge_gens, rho, name=f"verma({x.letters()})")


def shift_sheaf(sheaf: GSheaf, k: int) -> GSheaf:
    """Grading shift <k>: a generator of degree g moves to degree g + k."""
    return GSheaf(
        sheaf.graph,
        {i: [d + k for d in degs] for i, degs in sheaf.stalks.items()},
        {e: [d + k for d in degs] for e, degs in sheaf.edge_gens.items()},
        dict(sheaf.rho),
        name=f"{sheaf.name}<{k}>",
    )


# -- section solving ---------------------------------------------------------

def _edge_condition_rows(graph, members, coord_degs, slots_of_vertex, d,
                         stalk_rho, sheaf: Optional[GSheaf] = None,
                         edge_list: Optional[list] = None):
    """Rows of the compatibility system over the flat unknown layout.

    Unknowns: stalk coordinates of vertices in `members` at degree d (layout
    given by coord_degs/slots_of_vertex).  For the structure sheaf pass
    stalk_rho=None; otherwise the sheaf's restriction matrices are used.
    """
    nvars = graph.nvars
    inset = set(members)
    unknown_dim = pv_layout_dim(nvars, coord_degs, d)
    edge_iter = edge_list if edge_list is not None else range(len(graph.edges))
    rows = []
    # iterate unknown coordinates and record their image in each edge module,
    # then transpose into condition rows
    from .polylin import _layout
    lay = _layout(nvars, tuple(coord_degs), d)
    images = []
    for (slot, exp) in lay:
        vertex, gen_idx = _slot_owner(slots_of_vertex, slot)
        contrib = {}
        for k in edge_iter:
            e = graph.edges[k]
            if e.head not in inset or e.tail not in inset:
                continue
            if vertex not in (e.head, e.tail):
                continue
            sign = Q1 if vertex == e.head else -Q1
            mono = Poly.monomial(nvars, exp)
            if sheaf is None:
                imgs = [normal_form_mod(mono, e.label) * sign]
                edegs = [0]
            else:
                mat_rho = sheaf.rho.get((vertex, k))
                edegs = sheaf.edge_gens[k]
                if mat_rho is None or not edegs:
                    continue
                imgs = [
                    normal_form_mod(mat_rho[j][gen_idx] * mono, e.label) * sign
                    for j in range(len(edegs))
                ]
            contrib[k] = (imgs, edegs, e.pivot)
        images.append(contrib)
    # output layout: for each edge, for each edge generator, NF monomials
    out_index = {}
    pos = 0
    for k in edge_iter:
        e = graph.edges[k]
        if e.head not in inset or e.tail not in inset:
            continue
        edegs = [0] if sheaf is None else sheaf.edge_gens[k]
        for j, ed in enumerate(edegs):
            dd = d - ed
            if dd < 0 or dd % 2:
                continue
            for m in nf_monomials(nvars, dd // 2, e.pivot):
                out_index[(k, j, m)] = pos
                pos += 1
    if pos == 0:
        return []
    cols = []
    for contrib in images:
        col = [Q0] * pos
        for k, (imgs, edegs, pivot) in contrib.items():
            for j, img in enumerate(imgs):
                for m, q in img.c.items():
                    col[out_index[(k, j, m)]] = col[out_index[(k, j, m)]] + q
        cols.append(col)
    return [[cols[u][r] for u in range(unknown_dim)] for r in range(pos)]


def _slot_owner(slots_of_vertex: dict, slot: int):
    for vertex, slots in slots_of_vertex.items():
        if slot in slots:
            return vertex, slots.index(slot)
    raise CoxoError("slot without owner")


@dataclass
class SectionSpace:
    """Degreewise sections of a sheaf over an upset, plus minimal generators."""

    sheaf: GSheaf
    upset: UpSet
    coord_degs: tuple
    slots_of_vertex: dict
    slices: dict
    generators: GradedBasis


def sheaf_layout(sheaf: GSheaf, members: Sequence[int]):
    """Slot layout of sections over `members`: one slot per stalk generator."""
    coord_degs = []
    slots_of_vertex = {}
    for i in members:
        degs = sheaf.stalks.get(i, [])
        slots_of_vertex[i] = list(range(len(coord_degs), len(coord_degs) + len(degs)))
        coord_degs.extend(degs)
    return tuple(coord_degs), slots_of_vertex


def sheaf_sections(sheaf: GSheaf, upset: UpSet, d_max: int,
                   d_min: Optional[int] = None) -> SectionSpace:
    """Solve the compatibility system over the upset for every degree <= d_max."""
    graph = sheaf.graph
    nvars = graph.nvars
    members = list(upset.members)
    coord_degs, slots_of_vertex = sheaf_layout(sheaf, members)
    lo = min([d for d in coord_degs], default=0) if d_min is None else d_min
    slices = {}
    for d in range(lo, d_max + 1):
        unknown_dim = pv_layout_dim(nvars, coord_degs, d)
        if unknown_dim == 0:
            continue
        rows = _edge_condition_rows(
            graph, members, coord_degs, slots_of_vertex, d, True, sheaf=sheaf
        )
        basis = nullspace(rows, unknown_dim)
        if not basis:
            continue
        vectors = [pv_unflatten(b, coord_degs, d, nvars) for b in basis]
        solver = SpanSolver(unknown_dim)
        for b in basis:
            solver.add(b)
        slices[d] = DegreeSlice(d, coord_degs, nvars, vectors, solver)
    gens = minimal_generators(slices, d_max, coord_degs, nvars,
                              ambient=f"sections({sheaf.name})")
    return SectionSpace(sheaf, upset, coord_degs, slots_of_vertex, slices, gens)


def flabby_check(sheaf: GSheaf, d_max: int) -> dict:
    """Degreewise surjectivity of restriction to every principal upset."""
    graph = sheaf.graph
    full = sheaf_sections(sheaf, graph.full_upset(), d_max)
    report = {"passed": True, "upsets": []}
    for i in range(len(graph.vertices)):
        upset = graph.principal_upset(i)
        sub = sheaf_sections(sheaf, upset, d_max)
        ok = True
        for d, sub_slice in sub.slices.items():
            projected = SpanSolver(
                pv_layout_dim(graph.nvars, sub.coord_degs, d), track=False
            )
            rank = 0
            for vec in full.slices.get(d, DegreeSlice(d, (), graph.nvars)).vectors:
                restricted = _restrict_polyvec(
                    vec, full.slots_of_vertex, sub.slots_of_vertex,
                    len(sub.coord_degs), graph.nvars,
                )
                if projected.add(pv_flatten(restricted, sub.coord_degs, d)):
                    rank += 1
            if rank != sub_slice.dim:
                ok = False
        report["upsets"].append(
            {"vertex": graph.vertices[i].letters(), "surjective": ok}
        )
        report["passed"] = report["passed"] and ok
    return report


def _restrict_polyvec(vec, slots_full: dict, slots_sub: dict, nslots: int, nvars: int):
    out = [Poly(nvars) for _ in range(nslots)]
    for vertex, sub_slots in slots_sub.items():
        full_slots = slots_full[vertex]
        for a, b in zip(full_slots, sub_slots):
            out[b] = vec[a]
    return out


def costalk_kernel(sheaf: GSheaf, x: Element, d_max: int) -> tuple[GradedBasis, bool]:
    """Minimal generators of Ker(stalk_x -> sum of down-edge modules) + freeness."""
    graph = sheaf.graph
    ix = graph.index(x)
    nvars = graph.nvars
    degs = sheaf.stalks.get(ix, [])
    coord_degs = tuple(degs)
    slices = {}
    for d in range(min(degs, default=0), d_max + 1):
        unknown_dim = pv_layout_dim(nvars, coord_degs, d)
        if unknown_dim == 0:
            continue
        rows = []
        from .polylin import _layout
        lay = _layout(nvars, coord_degs, d)
        out_index = {}
        pos = 0
        for k in graph.up_edges[ix]:
            e = graph.edges[k]
            for j, ed in enumerate(sheaf.edge_gens[k]):
                dd = d - ed
                if dd < 0 or dd % 2:
                    continue
                for m in nf_monomials(nvars, dd // 2, e.pivot):
                    out_index[(k, j, m)] = pos
                    pos += 1
        cols = []
        for (slot, exp) in lay:
            col = [Q0] * pos
            mono = Poly.monomial(nvars, exp)
            for k in graph.up_edges[ix]:
                e = graph.edges[k]
                mat_rho = sheaf.rho.get((ix, k))
                if mat_rho is None:
                    continue
                for j in range(len(sheaf.edge_gens[k])):
                    img = normal_form_mod(mat_rho[j][slot] * mono, e.label)
                    for m, q in img.c.items():
                        col[out_index[(k, j, m)]] += q
            cols.append(col)
        rows = [[cols[u][r] for u in range(len(lay))] for r in range(pos)]
        basis = nullspace(rows, len(lay))
        if not basis:
            continue
        vectors = [pv_unflatten(b, coord_degs, d, nvars) for b in basis]
        solver = SpanSolver(len(lay))
        for b in basis:
            solver.add(b)
        slices[d] = DegreeSlice(d, coord_degs, nvars, vectors, solver)
    gens = minimal_generators(slices, d_max, coord_degs, nvars,
                              ambient=f"costalk({sheaf.name},{x.letters()})")
    free = all(
        slices[d].dim == gens.hilbert(d) for d in slices
    ) and all(
        gens.hilbert(d) == 0 or d in slices
        for d in range(min(gens.degrees, default=0), d_max + 1)
    )
    gens.free_verified = free
    return gens, free
