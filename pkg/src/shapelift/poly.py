"""Sparse polynomials and the fitting problem as a polynomial program.

Variables are ordered c_1..c_K, r_1..r_9 where r is the column-major
flattening of the rotation (R[a, m] = r[3m + a], zero-based).  Monomials
are exponent tuples of length K + 9; the canonical ordering is graded
lexicographic with c_1 < ... < c_K < r_1 < ... < r_9.  Coefficients with
magnitude below PRUNE_EPS are dropped after every arithmetic operation.
"""

from dataclasses import dataclass, field
import numpy as np

PRUNE_EPS = 1e-14


def grlex_key(exponents):
    """Sort key: total degree first, then lexicographic (x1 highest)."""
    return (sum(exponents), tuple(-e for e in exponents))


class SparsePoly:
    """Dict-backed multivariate polynomial with tuple exponent keys."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for expo, coef in terms.items():
                if abs(coef) > PRUNE_EPS:
                    self.terms[tuple(expo)] = float(coef)

    @classmethod
    def constant(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, index):
        expo = [0] * nvars
        expo[index] = 1
        return cls(nvars, {tuple(expo): 1.0})

    def _check(self, other):
        if self.nvars != other.nvars:
            raise ValueError("polynomials over different variable counts")

    def __add__(self, other):
        if np.isscalar(other):
            other = SparsePoly.constant(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for expo, coef in other.terms.items():
            c = out.get(expo, 0.0) + coef
            if abs(c) > PRUNE_EPS:
                out[expo] = c
            else:
                out.pop(expo, None)
        return SparsePoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if np.isscalar(other):
            other = SparsePoly.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            if abs(other) <= PRUNE_EPS:
                return SparsePoly(self.nvars)
            return SparsePoly(
                self.nvars, {e: c * other for e, c in self.terms.items()}
            )
        self._check(other)
        out = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                out[key] = out.get(key, 0.0) + ca * cb
        return SparsePoly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0 or n != int(n):
            raise ValueError("only nonnegative integer powers")
        result = SparsePoly.constant(self.nvars, 1.0)
        for _ in range(int(n)):
            result = result * self
        return result

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def support(self):
        return sorted(self.terms, key=grlex_key)

    def coeff(self, expo):
        return self.terms.get(tuple(expo), 0.0)

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_zero(self):
        return not self.terms

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(f"point must have shape ({self.nvars},)")
        total = 0.0
        for expo, coef in self.terms.items():
            term = coef
            for xi, e in zip(x, expo):
                if e:
                    term *= xi**e
            total += term
        return total

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"SparsePoly(nvars={self.nvars}, nterms={len(self.terms)})"


@dataclass
class PolyProgram:
    """Objective with rotation equalities and coefficient inequalities."""

    objective: SparsePoly
    equalities: list
    inequalities: list
    k: int

    @property
    def nvars(self):
        return self.k + 9


def _rvar(k, col, row):
    """Variable index of R[row, col] in the column-major flattening."""
    return k + 3 * col + row


def build_objective(prob):
    """Weighted reprojection error plus alpha * sum(c) as a polynomial.

    f(c, r) = sum_i || z_tilde_i - diag(s) P sum_k c_k R btilde_ki ||^2
              + alpha * sum_k c_k

    Assembled directly from the closed-form expansion: a constant, the
    linear c_k terms from the penalty, bilinear c_k r_j terms from the
    data cross products, and quartic c c r r terms from the Gram tensor
    of the centered bases.
    """
    z, b = prob.z_tilde, prob.b_tilde
    k = prob.k
    nvars = k + 9
    s = np.array(prob.intrinsics)

    terms = {}
    zero = (0,) * nvars
    const = float((z**2).sum())
    if abs(const) > PRUNE_EPS:
        terms[zero] = const

    if prob.alpha:
        for ki in range(k):
            expo = [0] * nvars
            expo[ki] = 1
            terms[tuple(expo)] = prob.alpha

    # linear in (c_k r_j): -2 * s_a * sum_i z[i,a] * b[k,m,i]
    lin = np.einsum("ia,kmi->kma", z, b)
    for ki in range(k):
        for m in range(3):
            for a in range(2):
                coef = -2.0 * s[a] * lin[ki, m, a]
                if abs(coef) <= PRUNE_EPS:
                    continue
                expo = [0] * nvars
                expo[ki] = 1
                expo[_rvar(k, m, a)] += 1
                key = tuple(expo)
                terms[key] = terms.get(key, 0.0) + coef

    # quartic: sum_a s_a^2 * Q[k,m,l,n] * c_k c_l r_{3m+a} r_{3n+a}
    quad = np.einsum("kmi,lni->kmln", b, b)
    s2 = s**2
    for ki in range(k):
        for m in range(3):
            for li in range(k):
                for n in range(3):
                    q = quad[ki, m, li, n]
                    if abs(q) <= PRUNE_EPS:
                        continue
                    for a in range(2):
                        expo = [0] * nvars
                        expo[ki] += 1
                        expo[li] += 1
                        expo[_rvar(k, m, a)] += 1
                        expo[_rvar(k, n, a)] += 1
                        key = tuple(expo)
                        terms[key] = terms.get(key, 0.0) + s2[a] * q
    return SparsePoly(nvars, terms)


def objective_value(prob, coeffs, rotation):
    """Numeric objective at a rotation matrix and coefficient vector."""
    shape = np.tensordot(coeffs, prob.b_tilde, axes=(0, 0))  # (3, N)
    proj = (rotation @ shape)[:2].T * np.array(prob.intrinsics)  # (N, 2)
    resid = prob.z_tilde - proj
    return float((resid**2).sum() + prob.alpha * coeffs.sum())


def so3_constraints(k):
    """The 15 quadratics characterizing rotation matrices.

    Unit columns (3), pairwise orthogonality (3), and the right-handed
    cross products of the three column pairs (9).  All vanish exactly on
    rotations; reflections violate the cross-product block.
    """
    nvars = k + 9
    cols = [
        [SparsePoly.variable(nvars, _rvar(k, m, a)) for a in range(3)]
        for m in range(3)
    ]

    def dot(u, v):
        return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]

    def cross_minus(u, v, w):
        return [
            u[1] * v[2] - u[2] * v[1] - w[0],
            u[2] * v[0] - u[0] * v[2] - w[1],
            u[0] * v[1] - u[1] * v[0] - w[2],
        ]

    hs = [
        1.0 - dot(cols[0], cols[0]),
        1.0 - dot(cols[1], cols[1]),
        1.0 - dot(cols[2], cols[2]),
        dot(cols[0], cols[1]),
        dot(cols[1], cols[2]),
        dot(cols[2], cols[0]),
    ]
    hs += cross_minus(cols[0], cols[1], cols[2])
    hs += cross_minus(cols[1], cols[2], cols[0])
    hs += cross_minus(cols[2], cols[0], cols[1])
    return hs


SO3_SUBSET12 = (0, 1, 2, 6, 7, 8, 9, 10, 11, 12, 13, 14)


def bound_constraints(k):
    """g_j >= 0 constraints: c_k >= 0 and 1 - c_k^2 >= 0 for each k."""
    nvars = k + 9
    lower = [SparsePoly.variable(nvars, ki) for ki in range(k)]
    upper = [
        1.0 - SparsePoly.variable(nvars, ki) * SparsePoly.variable(nvars, ki)
        for ki in range(k)
    ]
    return lower + upper


def check_archimedean_identity(k):
    """Verify (K + 3) - ||x||^2 equals the certifying combination.

    The identity (K + 3) - sum c_k^2 - sum r_j^2
        = sum_k (1 - c_k^2) + h_1 + h_2 + h_3
    bounds the feasible set inside a ball of radius sqrt(K + 3), which is
    what makes the relaxation hierarchy complete.  Exact coefficient
    arithmetic; returns True iff the residual is the zero polynomial.
    """
    nvars = k + 9
    lhs = SparsePoly.constant(nvars, float(k + 3))
    for i in range(nvars):
        v = SparsePoly.variable(nvars, i)
        lhs = lhs - v * v
    rhs = SparsePoly(nvars)
    for g in bound_constraints(k)[k:]:
        rhs = rhs + g
    h = so3_constraints(k)
    rhs = rhs + h[0] + h[1] + h[2]
    return (lhs - rhs).is_zero()


def build_program(prob, so3_subset12=False):
    """Assemble the polynomial program for a centered problem.

    All 15 rotation constraints are used by default; so3_subset12 keeps
    only the 12 that stay sufficient (unit columns plus cross products).
    """
    f = build_objective(prob)
    hs = so3_constraints(prob.k)
    if so3_subset12:
        hs = [hs[i] for i in SO3_SUBSET12]
    return PolyProgram(
        objective=f,
        equalities=hs,
        inequalities=bound_constraints(prob.k),
        k=prob.k,
    )


@dataclass
class SupportReport:
    """Which monomial families the objective support falls into."""

    counts: dict = field(default_factory=dict)
    foreign: list = field(default_factory=list)

    @property
    def clean(self):
        return not self.foreign


def objective_support(f, k):
    """Classify objective monomials into the four expected families.

    The fitting objective only produces 1, c_k, c_k r_j, and
    c_k c_l r_i r_j monomials; anything else lands in `foreign` and
    invalidates the reduced relaxation basis.
    """
    report = SupportReport(counts={"const": 0, "c": 0, "cr": 0, "ccrr": 0})
    for expo in f.support():
        cdeg = sum(expo[:k])
        rdeg = sum(expo[k:])
        if (cdeg, rdeg) == (0, 0):
            report.counts["const"] += 1
        elif (cdeg, rdeg) == (1, 0):
            report.counts["c"] += 1
        elif (cdeg, rdeg) == (1, 1):
            report.counts["cr"] += 1
        elif (cdeg, rdeg) == (2, 2):
            report.counts["ccrr"] += 1
        else:
            report.foreign.append(expo)
    return report
