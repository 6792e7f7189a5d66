"""Exact polytopes of probability distributions.

A :class:`DistPolytope` is the intersection of a user-supplied system of
linear (in)equalities with the probability simplex over a finite support.
Everything here runs on :class:`fractions.Fraction`; nothing is ever
rounded.

Vertex enumeration uses the double-description method on the homogenized
cone of the polytope's affine-hull coordinates.  Dimensions up to about 10
are practical; the number of vertices can grow like ``m ** (d // 2)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import EmptyPolytope, NotInSimplex, UnknownState
from .rational import format_fraction, to_fraction

RELATIONS = ("<=", "=", ">=")

Vector = tuple[Fraction, ...]

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# exact linear algebra

def _rref(rows: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over the first ``ncols`` columns."""
    m = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(vectors: Sequence[Sequence[Fraction]]) -> int:
    if not vectors:
        return 0
    return len(_rref([list(v) for v in vectors], len(vectors[0]))[1])


def solve_exact(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction] | None:
    """Unique solution of ``a x = b`` (possibly overdetermined), else ``None``."""
    n = len(a[0])
    m, pivots = _rref([list(row) + [rhs] for row, rhs in zip(a, b)], n)
    if len(pivots) < n:
        return None
    for row in m[len(pivots):]:
        if row[n] != 0:
            return None
    x = [ZERO] * n
    for i, c in enumerate(pivots):
        x[c] = m[i][n]
    return x


def _dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), ZERO)


def _normalize_ray(v: list[Fraction]) -> tuple[Fraction, ...]:
    scale = max(abs(x) for x in v)
    return tuple(x / scale for x in v)


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class LinearConstraint:
    """One row ``sum_s coeffs[s] * mu(s)  REL  bound``.

    ``coeffs`` holds only the nonzero entries, keyed by successor state.
    """

    coeffs: tuple[tuple[Hashable, Fraction], ...]
    relation: str
    bound: Fraction

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {self.relation!r}")

    @classmethod
    def of(cls, coeffs: Mapping[Hashable, object], relation: str, bound) -> "LinearConstraint":
        items = []
        for state, c in coeffs.items():
            c = to_fraction(c)
            if c != 0:
                items.append((state, c))
        items.sort(key=lambda kv: str(kv[0]))
        return cls(tuple(items), relation, to_fraction(bound))

    def coefficient(self, state: Hashable) -> Fraction:
        for s, c in self.coeffs:
            if s == state:
                return c
        return ZERO

    def lhs(self, point: Mapping[Hashable, Fraction]) -> Fraction:
        return sum((c * point.get(s, ZERO) for s, c in self.coeffs), ZERO)

    def holds(self, point: Mapping[Hashable, Fraction]) -> bool:
        v = self.lhs(point)
        if self.relation == "<=":
            return v <= self.bound
        if self.relation == ">=":
            return v >= self.bound
        return v == self.bound

    def __str__(self) -> str:
        terms = " + ".join(f"{format_fraction(c)}*{s}" for s, c in self.coeffs) or "0"
        return f"{terms} {self.relation} {format_fraction(self.bound)}"


@dataclass(frozen=True)
class DistPolytope:
    """User constraints intersected with the simplex over ``support``.

    Build instances through :func:`build_dist_polytope`, which checks that
    the feasible set is nonempty.
    """

    support: tuple[Hashable, ...]
    constraints: tuple[LinearConstraint, ...] = ()

    @property
    def dimension(self) -> int:
        verts = enumerate_vertices(self).vertices
        if len(verts) == 1:
            return 0
        base = verts[0]
        return rank([[a - b for a, b in zip(v, base)] for v in verts[1:]])

    def is_dirac(self) -> bool:
        return len(enumerate_vertices(self)) == 1

    def rows(self) -> tuple[tuple[Vector, str, Fraction], ...]:
        """Constraint rows as dense vectors aligned with ``support``."""
        index = {s: i for i, s in enumerate(self.support)}
        out = []
        for con in self.constraints:
            vec = [ZERO] * len(self.support)
            for s, c in con.coeffs:
                vec[index[s]] = c
            out.append((tuple(vec), con.relation, con.bound))
        return tuple(out)

    def point(self, mapping: Mapping[Hashable, object]) -> Vector:
        """Dense vector of ``mapping`` over the support (missing keys are 0)."""
        unknown = set(mapping) - set(self.support)
        if unknown:
            raise UnknownState(f"point has states outside the support: {sorted(map(str, unknown))}")
        return tuple(to_fraction(mapping.get(s, 0)) for s in self.support)


@dataclass(frozen=True)
class VertexSet:
    support: tuple[Hashable, ...]
    vertices: tuple[Vector, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i: int) -> Vector:
        return self.vertices[i]

    def as_dicts(self) -> list[dict[Hashable, Fraction]]:
        """Vertices as sparse ``{state: probability}`` maps (zeros dropped)."""
        return [{s: p for s, p in zip(self.support, v) if p != 0} for v in self.vertices]


@dataclass(frozen=True)
class Simplex:
    """Affinely independent subset of a :class:`VertexSet`."""

    vertex_indices: tuple[int, ...]
    vertices: tuple[Vector, ...] = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class BarycentricCoords:
    weights: dict[int, Fraction]

    def reconstruct(self, simplex: Simplex) -> Vector:
        n = len(simplex.vertices[0])
        out = [ZERO] * n
        for idx, v in zip(simplex.vertex_indices, simplex.vertices):
            w = self.weights[idx]
            for i in range(n):
                out[i] += w * v[i]
        return tuple(out)


# ---------------------------------------------------------------------------
# construction

def build_dist_polytope(support: Iterable[Hashable], constraints: Iterable[LinearConstraint] = ()) -> DistPolytope:
    """Validate and build a :class:`DistPolytope`.

    Raises :class:`UnknownState` when a constraint mentions a state outside
    ``support`` and :class:`EmptyPolytope` when the system is infeasible.
    """
    support = tuple(support)
    if not support:
        raise ValueError("support must be nonempty")
    if len(set(support)) != len(support):
        raise ValueError("support contains duplicates")
    members = set(support)
    constraints = tuple(constraints)
    for con in constraints:
        for s, _ in con.coeffs:
            if s not in members:
                raise UnknownState(f"constraint {con} references {s!r}, not in support")
    poly = DistPolytope(support, constraints)
    if not _vertices_of(len(support), poly.rows()):
        raise EmptyPolytope(f"infeasible polytope over {list(map(str, support))}")
    return poly


def dirac(state: Hashable) -> DistPolytope:
    """The single-point polytope ``{delta_state}``."""
    return DistPolytope((state,), ())


def from_point(distribution: Mapping[Hashable, object]) -> DistPolytope:
    """Single-point polytope for a fixed distribution (zeros dropped)."""
    dist = {s: to_fraction(p) for s, p in distribution.items()}
    dist = {s: p for s, p in dist.items() if p != 0}
    support = tuple(dist)
    cons = [LinearConstraint.of({s: 1}, "=", p) for s, p in dist.items()][:-1]
    return build_dist_polytope(support, cons)


# ---------------------------------------------------------------------------
# vertex enumeration

def enumerate_vertices(poly: DistPolytope) -> VertexSet:
    """All extreme points, sorted in descending lexicographic order."""
    return VertexSet(poly.support, _vertices_of(len(poly.support), poly.rows()))


@functools.lru_cache(maxsize=8192)
def _vertices_of(n: int, rows: tuple[tuple[Vector, str, Fraction], ...]) -> tuple[Vector, ...]:
    # keyed on dense rows only, so polytopes differing just in state names share work
    eqs: list[list[Fraction]] = [[ONE] * n + [ONE]]
    ineqs: list[tuple[list[Fraction], Fraction]] = []
    for vec, rel, b in rows:
        if rel == "=":
            eqs.append(list(vec) + [b])
        elif rel == "<=":
            ineqs.append((list(vec), b))
        else:
            ineqs.append(([-c for c in vec], -b))
    for i in range(n):
        ineqs.append(([-ONE if j == i else ZERO for j in range(n)], ZERO))

    # parametrize the affine hull of the equalities: x = x0 + N t
    m, pivots = _rref(eqs, n)
    for row in m[len(pivots):]:
        if row[n] != 0:
            return ()
    free = [c for c in range(n) if c not in pivots]
    x0 = [ZERO] * n
    for i, c in enumerate(pivots):
        x0[c] = m[i][n]
    basis = []
    for f in free:
        col = [ZERO] * n
        col[f] = ONE
        for i, c in enumerate(pivots):
            col[c] = -m[i][f]
        basis.append(col)
    k = len(free)

    reduced: list[tuple[tuple[Fraction, ...], Fraction]] = []
    seen = set()
    for a, b in ineqs:
        c = tuple(_dot(a, col) for col in basis)
        d = b - _dot(a, x0)
        if all(v == 0 for v in c):
            if d < 0:
                return ()
            continue
        scale = max(abs(v) for v in c)
        key = (tuple(v / scale for v in c), d / scale)
        if key not in seen:
            seen.add(key)
            reduced.append(key)

    if k == 0:
        return (tuple(x0),)

    points = _double_description(reduced, k)
    verts = {tuple(x0[i] + sum((t[j] * basis[j][i] for j in range(k)), ZERO) for i in range(n)) for t in points}
    return tuple(sorted(verts, reverse=True))


def _double_description(rows: list[tuple[tuple[Fraction, ...], Fraction]], k: int) -> list[Vector]:
    """Vertices of the bounded polytope ``{t : c.t <= d}`` in ``Q^k``.

    Works on the cone ``{(t, lam) : c.t - d*lam <= 0, -lam <= 0}``; the rays
    with ``lam > 0`` are the vertices.
    """
    dim = k + 1
    hom = [tuple(c) + (-d,) for c, d in rows]
    hom.append(tuple([ZERO] * k) + (-ONE,))

    # initial cone from dim linearly independent rows
    chosen: list[int] = []
    for i, h in enumerate(hom):
        if rank([hom[j] for j in chosen] + [h]) > len(chosen):
            chosen.append(i)
            if len(chosen) == dim:
                break
    if len(chosen) < dim:
        raise ValueError("polytope coordinates are not pointed")
    a0 = [list(hom[i]) for i in chosen]
    rays: list[tuple[Vector, frozenset[int]]] = []
    for j in range(dim):
        rhs = [-ONE if i == j else ZERO for i in range(dim)]
        r = solve_exact(a0, rhs)
        tight = frozenset(chosen[i] for i in range(dim) if i != j)
        rays.append((_normalize_ray(r), tight))

    for idx, h in enumerate(hom):
        if idx in chosen:
            continue
        vals = [_dot(h, r) for r, _ in rays]
        pos = [i for i, v in enumerate(vals) if v > 0]
        if not pos:
            rays = [(r, t | {idx} if vals[i] == 0 else t) for i, (r, t) in enumerate(rays)]
            continue
        neg = [i for i, v in enumerate(vals) if v < 0]
        zero = [i for i, v in enumerate(vals) if v == 0]
        new_rays = [(rays[i][0], rays[i][1] | {idx}) for i in zero]
        new_rays += [rays[i] for i in neg]
        for p in pos:
            rp, tp = rays[p]
            for q in neg:
                rq, tq = rays[q]
                common = tp & tq
                if len(common) < dim - 2:
                    continue
                if any(common <= rays[o][1] for o in range(len(rays)) if o != p and o != q):
                    continue
                if rank([hom[i] for i in common]) < dim - 2:
                    continue
                combo = [vals[p] * b - vals[q] * a for a, b in zip(rp, rq)]
                new_rays.append((_normalize_ray(combo), common | {idx}))
        rays = new_rays

    out = []
    for r, _ in rays:
        lam = r[-1]
        if lam > 0:
            out.append(tuple(v / lam for v in r[:-1]))
    return out


# ---------------------------------------------------------------------------
# membership, triangulation, barycentric coordinates

def contains(poly: DistPolytope, point: Mapping[Hashable, object] | Sequence) -> bool:
    """Exact membership test (constraints plus simplex rows)."""
    vec = _as_vector(poly, point)
    if any(p < 0 for p in vec) or sum(vec, ZERO) != 1:
        return False
    for row, rel, b in poly.rows():
        v = _dot(row, vec)
        if (rel == "<=" and v > b) or (rel == ">=" and v < b) or (rel == "=" and v != b):
            return False
    return True


def _as_vector(poly: DistPolytope, point) -> Vector:
    if isinstance(point, Mapping):
        return poly.point(point)
    vec = tuple(to_fraction(p) for p in point)
    if len(vec) != len(poly.support):
        raise ValueError("point length does not match the support")
    return vec


def _affine_chart(points: Sequence[Vector]) -> list[int]:
    """Coordinate indices on which projection is injective for the affine hull."""
    base = points[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    if not diffs:
        return []
    return _rref(diffs, len(base))[1]


def _det(m: list[list[Fraction]]) -> Fraction:
    m = [list(r) for r in m]
    n = len(m)
    det = ONE
    for c in range(n):
        p = next((i for i in range(c, n) if m[i][c] != 0), None)
        if p is None:
            return ZERO
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for i in range(c + 1, n):
            f = m[i][c] / m[c][c]
            if f:
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return det


def triangulate(poly: DistPolytope, verts: VertexSet | None = None) -> list[Simplex]:
    """Lexicographic placing triangulation over the canonical vertex order.

    Every vertex of ``poly`` appears in some simplex, and no other points are
    introduced, so the triangulation is vertex-preserving.
    """
    if verts is None:
        verts = enumerate_vertices(poly)
    pts = list(verts.vertices)
    simplices: list[tuple[int, ...]] = [(0,)]
    placed = [0]
    chart: list[int] = []
    for j in range(1, len(pts)):
        new_chart = _affine_chart([pts[i] for i in placed] + [pts[j]])
        if len(new_chart) > len(chart):
            simplices = [s + (j,) for s in simplices]
            chart = new_chart
        else:
            simplices += _visible_cones(pts, simplices, chart, j)
        placed.append(j)
    return [Simplex(s, tuple(pts[i] for i in s)) for s in simplices]


def _visible_cones(pts, simplices, chart, j) -> list[tuple[int, ...]]:
    def proj(i):
        return [pts[i][c] for c in chart]

    facet_owner: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for s in simplices:
        for drop in range(len(s)):
            facet = s[:drop] + s[drop + 1:]
            facet_owner.setdefault(facet, []).append(s)
    out = []
    p = proj(j)
    for facet, owners in facet_owner.items():
        if len(owners) != 1:
            continue
        (opposite,) = set(owners[0]) - set(facet)
        f0 = proj(facet[0])
        base = [[a - b for a, b in zip(proj(i), f0)] for i in facet[1:]]
        side_p = _det(base + [[a - b for a, b in zip(p, f0)]])
        side_o = _det(base + [[a - b for a, b in zip(proj(opposite), f0)]])
        if side_p != 0 and (side_p > 0) != (side_o > 0):
            out.append(tuple(sorted(facet + (j,))))
    return sorted(out)


def barycentric(simplex: Simplex, point: Sequence) -> BarycentricCoords:
    """Unique convex weights reconstructing ``point`` from the simplex vertices."""
    vec = [to_fraction(p) for p in point]
    n = len(vec)
    a = [[v[i] for v in simplex.vertices] for i in range(n)]
    a.append([ONE] * len(simplex.vertices))
    w = solve_exact(a, vec + [ONE])
    if w is None or any(x < 0 for x in w):
        raise NotInSimplex(f"point is not in simplex {simplex.vertex_indices}")
    return BarycentricCoords(dict(zip(simplex.vertex_indices, w)))


# ---------------------------------------------------------------------------
# projection (coinciding successors)

def project(poly: DistPolytope, targets: Mapping[Hashable, Hashable]) -> DistPolytope:
    """Image of ``poly`` under ``mu -> (sum of mu(x) over x with targets[x] = y)``.

    Used when several outcomes of a command lead to the same successor.  The
    H-representation of the image is obtained by Fourier-Motzkin elimination.
    """
    support = poly.support
    order: list[Hashable] = []
    groups: dict[Hashable, list[int]] = {}
    for i, s in enumerate(support):
        y = targets[s]
        if y not in groups:
            groups[y] = []
            order.append(y)
        groups[y].append(i)
    if all(len(g) == 1 for g in groups.values()):
        rename = {support[g[0]]: y for y, g in groups.items()}
        cons = [LinearConstraint.of({rename[s]: c for s, c in con.coeffs}, con.relation, con.bound)
                for con in poly.constraints]
        return build_dist_polytope(order, cons)

    p = len(order)
    aux = [i for y in order for i in groups[y][1:]]
    aux_pos = {i: p + k for k, i in enumerate(aux)}
    width = p + len(aux)

    # x_i as a linear form over (y, aux)
    forms: list[list[Fraction]] = [None] * len(support)  # type: ignore[list-item]
    for j, y in enumerate(order):
        rep, *rest = groups[y]
        f = [ZERO] * width
        f[j] = ONE
        for i in rest:
            f[aux_pos[i]] = -ONE
        forms[rep] = f
        for i in rest:
            g = [ZERO] * width
            g[aux_pos[i]] = ONE
            forms[i] = g

    def transform(vec):
        out = [ZERO] * width
        for c, f in zip(vec, forms):
            if c:
                for t in range(width):
                    out[t] += c * f[t]
        return out

    le: list[tuple[list[Fraction], Fraction]] = []
    eq: list[tuple[list[Fraction], Fraction]] = []
    for vec, rel, b in poly.rows():
        row = transform(vec)
        if rel == "=":
            eq.append((row, b))
        elif rel == "<=":
            le.append((row, b))
        else:
            le.append(([-c for c in row], -b))
    for i in range(len(support)):
        le.append(([-c for c in forms[i]], ZERO))

    for t in range(p, width):
        piv = next((e for e in eq if e[0][t] != 0), None)
        if piv is not None:
            eq.remove(piv)
            prow, pb = piv

            def sub(row, b, prow=prow, pb=pb, t=t):
                f = row[t] / prow[t]
                return [a - f * c for a, c in zip(row, prow)], b - f * pb

            eq = [sub(r, b) for r, b in eq]
            le = [sub(r, b) for r, b in le]
            continue
        pos = [(r, b) for r, b in le if r[t] > 0]
        neg = [(r, b) for r, b in le if r[t] < 0]
        keep = [(r, b) for r, b in le if r[t] == 0]
        for rp, bp in pos:
            for rn, bn in neg:
                a, c = rp[t], -rn[t]
                keep.append(([c * x + a * z for x, z in zip(rp, rn)], c * bp + a * bn))
        le = _dedupe(keep)

    cons = []
    for rows, rel in ((le, "<="), (eq, "=")):
        for r, b in _dedupe(rows) if rel == "<=" else rows:
            coeffs = {order[j]: r[j] for j in range(p) if r[j] != 0}
            if not coeffs:
                if (rel == "<=" and b < 0) or (rel == "=" and b != 0):
                    raise EmptyPolytope("projected polytope is infeasible")
                continue
            if rel == "<=" and b == 0 and len(coeffs) == 1 and next(iter(coeffs.values())) < 0:
                continue  # nonnegativity, implicit in the simplex
            cons.append(LinearConstraint.of(coeffs, rel, b))
    return build_dist_polytope(order, cons)


def _dedupe(rows):
    seen = set()
    out = []
    for r, b in rows:
        scale = max((abs(x) for x in r), default=ZERO)
        if scale == 0:
            key = (tuple(r), b)
        else:
            key = (tuple(x / scale for x in r), b / scale)
        if key not in seen:
            seen.add(key)
            out.append((list(key[0]), key[1]))
    return out
