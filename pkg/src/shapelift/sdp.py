"""Interior-point solver for block SDPs with free variables.

Solves  max  q' u   subject to   sum_b <A_pb, S_b> + (F u)_p = rhs_p,
        S_b >= 0 (PSD), u free,

which is the form produced by `relax.assemble_sdp` (u stacks the bound
gamma and the equality multipliers).  The method is a dense primal-dual
path follower with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step; the free variables are eliminated from the
Schur system by a second (much smaller) Cholesky factorization.

The equality-multiplier columns of F are linearly dependent: the
rotation constraints satisfy polynomial identities (for example
r1'(r1 x r2 - r3) + r2'r3 = 0), so products of constraints with monomial
multipliers cancel.  Dependent columns are removed up front by a pivoted
QR on the multiplier block (the gamma column is always kept; it cannot
lie in the multiplier span because no combination of constraints equals
a nonzero constant on the feasible set).  Removed multipliers are
reported as zeros, which leaves the returned certificate valid.
"""

from dataclasses import dataclass
import time
import numpy as np
import scipy.linalg
import scipy.sparse


@dataclass
class SdpSettings:
    """Solver parameters, exposed on the CLI as --sdp-tol/--sdp-max-iter."""

    tol: float = 1e-8
    max_iter: int = 100
    backend: str = "embedded"
    step_frac: float = 0.99
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str  # optimal | inaccurate | infeasible | iter_limit
    gamma: float
    gram_blocks: list
    lambdas: list
    free: np.ndarray
    y: np.ndarray
    obj_primal: float
    obj_dual: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    wall_time: float


_COLUMN_CACHE = {}


def _select_columns(problem):
    """Indices of an independent subset of free columns (gamma first)."""
    F = scipy.sparse.csr_matrix(
        (problem.free_vals, (problem.free_rows, problem.free_cols)),
        shape=(problem.m, problem.nfree),
    )
    if problem.nfree == 0:
        return np.array([], dtype=np.int64), F
    if problem.nfree == 1:
        return np.array([0]), F
    key = None
    if problem.spec is not None:
        key = (problem.spec.variant, problem.spec.k, problem.n_eq,
               problem.eq_len, problem.nfree)
    if key is not None and key in _COLUMN_CACHE:
        keep = _COLUMN_CACHE[key]
    else:
        lam = F[:, 1:].toarray()
        r, piv = scipy.linalg.qr(lam, mode="r", pivoting=True)[0:2]
        diag = np.abs(np.diag(r))
        rank = 0
        if diag.size and diag[0] > 0:
            rank = int(np.sum(diag > 1e-9 * diag[0]))
        keep = np.concatenate(([0], np.sort(piv[:rank]) + 1))
        if key is not None:
            _COLUMN_CACHE[key] = keep
    return keep, F


def solve(problem, settings=None):
    """Solve an assembled SDP; dispatches on settings.backend."""
    settings = settings or SdpSettings()
    if settings.backend == "cvxopt":
        from .cvxopt_backend import solve_cvxopt

        return solve_cvxopt(problem, settings)
    if settings.backend != "embedded":
        raise ValueError(f"unknown backend {settings.backend!r}")
    return _solve_embedded(problem, settings)


def _empty_solution(problem, status, wall):
    sides = problem.sides
    lambdas = [np.zeros(problem.eq_len) for _ in range(problem.n_eq)]
    return SdpSolution(
        status=status,
        gamma=0.0,
        gram_blocks=[np.zeros((s, s)) for s in sides],
        lambdas=lambdas,
        free=np.zeros(problem.nfree),
        y=np.zeros(problem.m),
        obj_primal=0.0,
        obj_dual=0.0,
        primal_residual=np.inf,
        dual_residual=np.inf,
        gap=np.inf,
        iterations=0,
        wall_time=wall,
    )


def _solve_embedded(problem, settings):
    t0 = time.perf_counter()
    m = problem.m
    sides = problem.sides
    nblocks = len(sides)

    # presolve: a row touching no variable is either vacuous or infeasible
    touched = np.zeros(m, dtype=bool)
    for b in range(nblocks):
        touched[problem.block_rows[b]] = True
    touched[problem.free_rows] = True
    if not touched.all():
        if np.any(np.abs(problem.rhs[~touched]) > 0):
            return _empty_solution(
                problem, "infeasible", time.perf_counter() - t0
            )
        keep_rows = np.where(touched)[0]
    else:
        keep_rows = None

    keep_cols, F_full = _select_columns(problem)
    F = F_full[:, keep_cols]
    b_vec = problem.rhs.copy()
    rows_map = None
    if keep_rows is not None:
        rows_map = -np.ones(m, dtype=np.int64)
        rows_map[keep_rows] = np.arange(len(keep_rows))
        F = F[keep_rows]
        b_vec = b_vec[keep_rows]
        m = len(keep_rows)

    q = problem.free_obj[keep_cols]
    cf = -q  # minimize -q'u
    nf = len(keep_cols)
    Fd = F.toarray()

    # per-block symmetric entry arrays (rows remapped if any were dropped)
    brows, bii, bjj, bvals, emats = [], [], [], [], []
    for b in range(nblocks):
        rows = problem.block_rows[b]
        if rows_map is not None:
            rows = rows_map[rows]
        brows.append(rows)
        bii.append(problem.block_ii[b])
        bjj.append(problem.block_jj[b])
        bvals.append(problem.block_vals[b])
        nb = sides[b]
        emats.append(
            scipy.sparse.csr_matrix(
                (problem.block_vals[b],
                 (rows, problem.block_ii[b] * nb + problem.block_jj[b])),
                shape=(m, nb * nb),
            )
        )

    def apply_A(mats):
        out = np.zeros(m)
        for b in range(nblocks):
            out += emats[b] @ mats[b].ravel()
        return out

    def apply_At(y):
        mats = []
        for b in range(nblocks):
            nb = sides[b]
            flat = (emats[b].T @ y).reshape(nb, nb)
            mats.append(flat)
        return mats

    ntot = sum(sides)
    scale_init = max(1.0, float(np.sqrt(np.abs(b_vec).max() + 1.0)))
    S = [np.eye(nb) * scale_init for nb in sides]
    Z = [np.eye(nb) * scale_init for nb in sides]
    u = np.zeros(nf)
    y = np.zeros(m)

    bnorm = 1.0 + np.linalg.norm(b_vec)
    cnorm = 1.0 + np.linalg.norm(cf)

    best = None
    best_metric = np.inf
    status = "iter_limit"
    iters_done = 0
    stall = 0

    def metrics():
        rp = b_vec - apply_A(S) - Fd @ u
        At = apply_At(y)
        Rd = [-Z[b] - At[b] for b in range(nblocks)]
        rf = cf - Fd.T @ y
        relp = np.linalg.norm(rp) / bnorm
        reld = np.sqrt(
            sum(np.sum(R**2) for R in Rd) + np.sum(rf**2)
        ) / cnorm
        pobj = cf @ u
        dobj = b_vec @ y
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, Rd, rf, relp, reld, relgap, pobj, dobj

    def chol_or_none(mat):
        try:
            return np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return None

    def max_step(mat, dmat):
        L = chol_or_none(mat)
        if L is None:
            return 0.0
        w = scipy.linalg.solve_triangular(L, dmat, lower=True,
                                          check_finite=False)
        w = scipy.linalg.solve_triangular(L, w.T, lower=True,
                                          check_finite=False)
        lam = np.linalg.eigvalsh(0.5 * (w + w.T)).min()
        if lam >= 0:
            return 1.0
        return min(1.0, -1.0 / lam)

    for it in range(settings.max_iter):
        rp, Rd, rf, relp, reld, relgap, pobj, dobj = metrics()
        metric = max(relp, reld, relgap)
        if metric < best_metric:
            best_metric = metric
            best = ([s.copy() for s in S], [z.copy() for z in Z],
                    u.copy(), y.copy(), relp, reld, relgap, pobj, dobj)
            stall = 0
        else:
            stall += 1
        if settings.verbose:
            mu_dbg = sum(np.sum(S[b] * Z[b]) for b in range(nblocks)) / ntot
            print(f"  it {it:3d} relp {relp:9.2e} reld {reld:9.2e} "
                  f"gap {relgap:9.2e} mu {mu_dbg:9.2e}")
        if metric <= settings.tol:
            status = "optimal"
            iters_done = it
            break
        if stall >= 10:
            status = "inaccurate"
            iters_done = it
            break

        mu = sum(np.sum(S[b] * Z[b]) for b in range(nblocks)) / ntot
        if mu < 1e-16:
            status = "inaccurate"
            iters_done = it
            break

        # NT scaling per block: W = G G', V = G' Z G = G^-1 S G^-T
        Gs, Ws, Vs, Veigs = [], [], [], []
        failed = False
        for b in range(nblocks):
            Ls = chol_or_none(S[b])
            if Ls is None:
                failed = True
                break
            E = Ls.T @ Z[b] @ Ls
            d, Q = np.linalg.eigh(0.5 * (E + E.T))
            if d.min() <= 0:
                failed = True
                break
            G = Ls @ (Q * d**-0.25)
            W = G @ G.T
            V = G.T @ Z[b] @ G
            V = 0.5 * (V + V.T)
            dv, Qv = np.linalg.eigh(V)
            Gs.append(G)
            Ws.append(W)
            Vs.append(V)
            Veigs.append((dv, Qv))
        if failed:
            status = "inaccurate"
            iters_done = it
            break

        # Schur matrix M[p,q] = sum_b <A_pb, W_b A_qb W_b>
        M = np.zeros((m, m))
        for b in range(nblocks):
            nb = sides[b]
            W = Ws[b]
            E = emats[b]
            chunk = max(1, min(m, int(6e6 // max(1, nb * nb))))
            for p0 in range(0, m, chunk):
                p1 = min(m, p0 + chunk)
                Asub = np.asarray(E[p0:p1].todense()).reshape(-1, nb, nb)
                Vsub = W @ Asub @ W
                M[:, p0:p1] += E @ Vsub.reshape(p1 - p0, -1).T
        M = 0.5 * (M + M.T)

        L = None
        jitter = 0.0
        base = np.trace(M) / m
        for attempt in range(6):
            L = chol_or_none(M if jitter == 0.0 else
                             M + jitter * base * np.eye(m))
            if L is not None:
                break
            jitter = 1e-12 if jitter == 0.0 else jitter * 100.0
        if L is None:
            status = "inaccurate"
            iters_done = it
            break

        X = scipy.linalg.solve_triangular(L, Fd, lower=True,
                                          check_finite=False)
        H = X.T @ X
        Lh = None
        hjit = 0.0
        hbase = max(np.trace(H) / max(1, nf), 1e-300)
        for attempt in range(6):
            Lh = chol_or_none(H if hjit == 0.0 else
                              H + hjit * hbase * np.eye(nf))
            if Lh is not None:
                break
            hjit = 1e-12 if hjit == 0.0 else hjit * 100.0
        if Lh is None:
            status = "inaccurate"
            iters_done = it
            break

        def kkt_solve(r1, r2):
            w1 = scipy.linalg.solve_triangular(L, r1, lower=True,
                                               check_finite=False)
            rhs_u = X.T @ w1 - r2
            du = scipy.linalg.cho_solve((Lh, True), rhs_u,
                                        check_finite=False)
            dy = scipy.linalg.solve_triangular(
                L.T, w1 - X @ du, lower=False, check_finite=False
            )
            return du, dy

        def newton(Rc):
            rhat = rp.copy()
            for b in range(nblocks):
                T = Ws[b] @ Rd[b] @ Ws[b]
                rhat += emats[b] @ ((T - Rc[b]).ravel())
            du, dy = kkt_solve(rhat, rf)
            # iterative refinement; the Schur system gets very
            # ill-conditioned once mu is small
            scale = 1.0 + np.abs(rhat).max() + np.abs(rf).max()
            for _ in range(3):
                res1 = rhat - M @ dy - Fd @ du
                res2 = rf - Fd.T @ dy
                if max(np.abs(res1).max(), np.abs(res2).max()) <= 1e-13 * scale:
                    break
                ddu, ddy = kkt_solve(res1, res2)
                du = du + ddu
                dy = dy + ddy
            dAt = apply_At(dy)
            dZ = [Rd[b] - dAt[b] for b in range(nblocks)]
            dS = []
            for b in range(nblocks):
                DS = Rc[b] - Ws[b] @ dZ[b] @ Ws[b]
                dS.append(0.5 * (DS + DS.T))
            return du, dy, dZ, dS

        # predictor
        du_a, dy_a, dZ_a, dS_a = newton([-S[b] for b in range(nblocks)])
        ap = min(max_step(S[b], dS_a[b]) for b in range(nblocks))
        ad = min(max_step(Z[b], dZ_a[b]) for b in range(nblocks))
        mu_aff = sum(
            np.sum((S[b] + ap * dS_a[b]) * (Z[b] + ad * dZ_a[b]))
            for b in range(nblocks)
        ) / ntot
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0))

        # corrector: solve V D + D V = 2(sigma mu I - V^2 - sym(dSh dZh))
        Rc = []
        for b in range(nblocks):
            G = Gs[b]
            dv, Qv = Veigs[b]
            Ginv_dS = np.linalg.solve(G, dS_a[b])
            dSh = np.linalg.solve(G, Ginv_dS.T).T  # G^-1 dS G^-T
            dZh = G.T @ dZ_a[b] @ G
            corr = 0.5 * (dSh @ dZh + dZh @ dSh)
            RHS = sigma * mu * np.eye(sides[b]) - Vs[b] @ Vs[b] - corr
            RHSt = Qv.T @ RHS @ Qv
            denom = dv[:, None] + dv[None, :]
            Dt = 2.0 * RHSt / denom
            D = Qv @ Dt @ Qv.T
            Rc.append(G @ D @ G.T)

        du, dy, dZ, dS = newton(Rc)
        ap = min(max_step(S[b], dS[b]) for b in range(nblocks))
        ad = min(max_step(Z[b], dZ[b]) for b in range(nblocks))
        ap = min(1.0, settings.step_frac * ap)
        ad = min(1.0, settings.step_frac * ad)
        if max(ap, ad) < 1e-6:
            status = "inaccurate"
            iters_done = it
            break
        for b in range(nblocks):
            S[b] += ap * dS[b]
            Z[b] += ad * dZ[b]
        u += ap * du
        y += ad * dy
        iters_done = it + 1
    else:
        status = "iter_limit"

    if best is not None and status != "optimal":
        S, Z, u, y, relp, reld, relgap, pobj, dobj = best
    else:
        rp, Rd, rf, relp, reld, relgap, pobj, dobj = metrics()
    if status != "optimal" and best_metric <= settings.tol:
        status = "optimal"

    free = np.zeros(problem.nfree)
    free[keep_cols] = u
    y_full = np.zeros(problem.m)
    if keep_rows is not None:
        y_full[keep_rows] = y
    else:
        y_full = y
    lambdas = []
    for i in range(problem.n_eq):
        lam = free[1 + i * problem.eq_len: 1 + (i + 1) * problem.eq_len]
        lambdas.append(lam.copy())
    return SdpSolution(
        status=status,
        gamma=float(free[0]) if problem.nfree else 0.0,
        gram_blocks=[0.5 * (s + s.T) for s in S],
        lambdas=lambdas,
        free=free,
        y=y_full,
        obj_primal=float(-pobj),
        obj_dual=float(-dobj),
        primal_residual=float(relp),
        dual_residual=float(reld),
        gap=float(relgap),
        iterations=iters_done,
        wall_time=time.perf_counter() - t0,
    )
