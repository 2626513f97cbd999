"""Sum-of-squares relaxation data for the fitting program.

The bound certificate searched for is

    f - gamma = m0' S0 m0 + sum_j (ms' Sj ms) g_j + sum_i lambda_i' me h_i

with S0, Sj positive semidefinite and lambda_i free.  Matching
coefficients monomial-by-monomial over the union support turns this into
linear equality constraints on (gamma, S0, Sj, lambda); maximizing gamma
is then a semidefinite program.

Two order-2 bases are supported.  'full2' uses all monomials up to
degree 2 everywhere.  'reduced2' exploits the objective support (only
1, c, cr, ccrr monomials appear) to shrink the gram basis to
[1, c, r, c x r], the multiplier basis to [1, r], and the free basis to
degree <= 2 in c alone.
"""

from dataclasses import dataclass
import numpy as np

from .poly import SparsePoly, grlex_key


class InfeasibleStructureError(ValueError):
    """The objective has a monomial no certificate term can produce."""


@dataclass
class BasisSpec:
    """Monomial bases for the gram, multiplier, and free blocks."""

    variant: str
    k: int
    gram: list
    ineq: list
    eq: list

    @property
    def nvars(self):
        return self.k + 9


def _unit(nvars, i):
    e = [0] * nvars
    e[i] = 1
    return tuple(e)


def _deg_le2(nvars, var_indices):
    """All monomials of degree <= 2 in the given variables, grlex order."""
    out = [(0,) * nvars]
    out += [_unit(nvars, i) for i in var_indices]
    for a, i in enumerate(var_indices):
        for j in var_indices[a:]:
            e = [0] * nvars
            e[i] += 1
            e[j] += 1
            out.append(tuple(e))
    return sorted(out, key=grlex_key)


def build_basis(k, variant):
    """Monomial bases for the chosen relaxation variant.

    Gram-basis sizes: (K+11)(K+10)/2 for 'full2', 10K + 10 for
    'reduced2'.  Both lead with the constant monomial, then c, then r.
    """
    nvars = k + 9
    call = list(range(k))
    rall = list(range(k, nvars))
    if variant == "full2":
        gram = _deg_le2(nvars, call + rall)
        ineq = [(0,) * nvars] + [_unit(nvars, i) for i in call + rall]
        eq = list(gram)
    elif variant == "reduced2":
        gram = [(0,) * nvars]
        gram += [_unit(nvars, i) for i in call]
        gram += [_unit(nvars, j) for j in rall]
        for i in call:  # c-major Kronecker block c x r
            for j in rall:
                e = [0] * nvars
                e[i] += 1
                e[j] += 1
                gram.append(tuple(e))
        ineq = [(0,) * nvars] + [_unit(nvars, j) for j in rall]
        eq = _deg_le2(nvars, call)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BasisSpec(variant=variant, k=k, gram=gram, ineq=ineq, eq=eq)


@dataclass
class SdpProblem:
    """Equality-form SDP data for the bound maximization.

    Each constraint row corresponds to one monomial of the union support
    and reads  sum_b <A_pb, S_b> + (F u)_p = rhs_p  where u stacks gamma
    (index 0) and the flattened lambda vectors.  Block entry arrays hold
    the symmetric expansion of the upper-triangle data: entries (i, j)
    and (j, i) each with half the paired coefficient, diagonal entries
    with the full coefficient.
    """

    sides: list
    block_rows: list
    block_ii: list
    block_jj: list
    block_vals: list
    free_rows: np.ndarray
    free_cols: np.ndarray
    free_vals: np.ndarray
    nfree: int
    rhs: np.ndarray
    free_obj: np.ndarray
    monomials: list
    spec: BasisSpec = None
    n_eq: int = 0
    eq_len: int = 0

    @property
    def m(self):
        return len(self.rhs)


def _pair_products(basis):
    """Exponent sums over unordered basis pairs, with (i, j, expo) rows."""
    out = []
    for i, ei in enumerate(basis):
        for j in range(i, len(basis)):
            expo = tuple(x + y for x, y in zip(ei, basis[j]))
            out.append((i, j, expo))
    return out


def support_union(prog, spec):
    """Union support of objective and all certificate product terms."""
    seen = set(prog.objective.terms)
    for _, _, expo in _pair_products(spec.gram):
        seen.add(expo)
    ineq_pairs = _pair_products(spec.ineq)
    for g in prog.inequalities:
        for _, _, pe in ineq_pairs:
            for te in g.terms:
                seen.add(tuple(x + y for x, y in zip(pe, te)))
    for h in prog.equalities:
        for me in spec.eq:
            for te in h.terms:
                seen.add(tuple(x + y for x, y in zip(me, te)))
    return sorted(seen, key=grlex_key)


def assemble_sdp(prog, spec):
    """Coefficient-matching constraints as numeric SDP data.

    Raises InfeasibleStructureError if some objective monomial cannot be
    produced by any certificate term (so no bound proof could exist over
    these bases).
    """
    if prog.k != spec.k:
        raise ValueError("program and basis are for different K")
    nvars = prog.nvars
    zero = (0,) * nvars

    gram_pairs = _pair_products(spec.gram)
    ineq_pairs = _pair_products(spec.ineq)

    producible = {zero}
    for _, _, expo in gram_pairs:
        producible.add(expo)
    for g in prog.inequalities:
        for _, _, pe in ineq_pairs:
            for te in g.terms:
                producible.add(tuple(x + y for x, y in zip(pe, te)))
    for h in prog.equalities:
        for me in spec.eq:
            for te in h.terms:
                producible.add(tuple(x + y for x, y in zip(me, te)))

    foreign = [e for e in prog.objective.terms if e not in producible]
    if foreign:
        raise InfeasibleStructureError(
            f"objective monomials outside certificate support: {foreign[:5]}"
        )

    monomials = sorted(
        producible | set(prog.objective.terms), key=grlex_key
    )
    index = {e: p for p, e in enumerate(monomials)}
    m = len(monomials)

    sides = [len(spec.gram)] + [len(spec.ineq)] * len(prog.inequalities)
    block_rows, block_ii, block_jj, block_vals = [], [], [], []

    def add_block(pairs, multiplier_terms):
        rows, ii, jj, vals = [], [], [], []
        for i, j, pe in pairs:
            for te, tc in multiplier_terms:
                p = index[tuple(x + y for x, y in zip(pe, te))]
                if i == j:
                    rows.append(p)
                    ii.append(i)
                    jj.append(j)
                    vals.append(tc)
                else:
                    rows += [p, p]
                    ii += [i, j]
                    jj += [j, i]
                    vals += [tc, tc]
        block_rows.append(np.array(rows, dtype=np.int64))
        block_ii.append(np.array(ii, dtype=np.int64))
        block_jj.append(np.array(jj, dtype=np.int64))
        block_vals.append(np.array(vals, dtype=float))

    add_block(gram_pairs, [(zero, 1.0)])
    for g in prog.inequalities:
        add_block(ineq_pairs, list(g.terms.items()))

    free_rows, free_cols, free_vals = [index[zero]], [0], [1.0]
    eq_len = len(spec.eq)
    for hi, h in enumerate(prog.equalities):
        for t, me in enumerate(spec.eq):
            col = 1 + hi * eq_len + t
            for te, tc in h.terms.items():
                free_rows.append(index[tuple(x + y for x, y in zip(me, te))])
                free_cols.append(col)
                free_vals.append(tc)
    nfree = 1 + len(prog.equalities) * eq_len

    rhs = np.zeros(m)
    for e, c in prog.objective.terms.items():
        rhs[index[e]] = c

    free_obj = np.zeros(nfree)
    free_obj[0] = 1.0

    return SdpProblem(
        sides=sides,
        block_rows=block_rows,
        block_ii=block_ii,
        block_jj=block_jj,
        block_vals=block_vals,
        free_rows=np.array(free_rows, dtype=np.int64),
        free_cols=np.array(free_cols, dtype=np.int64),
        free_vals=np.array(free_vals, dtype=float),
        nfree=nfree,
        rhs=rhs,
        free_obj=free_obj,
        monomials=monomials,
        spec=spec,
        n_eq=len(prog.equalities),
        eq_len=eq_len,
    )


def dump_sdp(problem, path):
    """Write the SDP data as plain text.

    Format: one `side` line per block, `entry <block> <row> <i> <j> <val>`
    lines for upper-triangle block coefficients (off-diagonal values
    already include the symmetric factor 2), `fentry <row> <col> <val>`
    lines for the free part, and `rhs <row> <val>` lines for nonzero
    right-hand sides.  Rows index the union support in graded-lex order.
    """
    with open(path, "w") as fh:
        fh.write(f"sdp rows {problem.m} blocks {len(problem.sides)} "
                 f"free {problem.nfree}\n")
        for b, side in enumerate(problem.sides):
            fh.write(f"side {b} {side}\n")
        for b in range(len(problem.sides)):
            rows = problem.block_rows[b]
            ii = problem.block_ii[b]
            jj = problem.block_jj[b]
            vals = problem.block_vals[b]
            for p, i, j, v in zip(rows, ii, jj, vals):
                if i > j:
                    continue
                val = v if i == j else 2.0 * v
                fh.write(f"entry {b} {p} {i} {j} {val:.17g}\n")
        for p, c, v in zip(problem.free_rows, problem.free_cols,
                           problem.free_vals):
            fh.write(f"fentry {p} {c} {v:.17g}\n")
        for p, v in enumerate(problem.rhs):
            if v != 0.0:
                fh.write(f"rhs {p} {v:.17g}\n")
