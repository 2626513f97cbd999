"""Optional external conic solver adapter (cvxopt).

Maps the assembled problem onto cvxopt's conelp dual: the moment vector
becomes the conelp primal variable, the gram blocks come back as the
semidefinite dual variables, and gamma/lambda as the equality
multipliers.  Used as a cross-check for the embedded solver; requires
the cvxopt package.
"""

import time

import numpy as np
import scipy.sparse

from . import sdp as _sdp


def _stat(sol, key):
    value = sol.get(key)
    return float(value) if value is not None else float("nan")


def solve_cvxopt(problem, settings):
    try:
        import cvxopt
        import cvxopt.solvers
    except ImportError as e:  # pragma: no cover - environment dependent
        raise RuntimeError("cvxopt backend requested but not installed") from e

    t0 = time.perf_counter()
    keep_cols, F_full = _sdp._select_columns(problem)
    F = F_full[:, keep_cols]
    m = problem.m
    sides = problem.sides

    # conelp: min c'x  s.t.  Gx + s = h (s PSD blocks), Ax = b
    # with x = y (multiplier vector), s = dual slack blocks,
    # equality rows = reduced free columns.
    c = cvxopt.matrix(-problem.rhs)
    g_rows, g_cols, g_vals = [], [], []
    offset = 0
    for b, nb in enumerate(sides):
        g_rows.append(offset + problem.block_ii[b] * nb + problem.block_jj[b])
        g_cols.append(problem.block_rows[b])
        g_vals.append(problem.block_vals[b])
        offset += nb * nb
    G = scipy.sparse.coo_matrix(
        (np.concatenate(g_vals),
         (np.concatenate(g_rows), np.concatenate(g_cols))),
        shape=(offset, m),
    )
    G = cvxopt.spmatrix(
        G.data, G.row.astype(int), G.col.astype(int), (offset, m)
    )
    h = cvxopt.matrix(np.zeros(offset))
    A = F.T.tocoo()
    A = cvxopt.spmatrix(
        A.data, A.row.astype(int), A.col.astype(int), (len(keep_cols), m)
    )
    bvec = cvxopt.matrix(-problem.free_obj[keep_cols])

    options = {
        "show_progress": bool(settings.verbose),
        "maxiters": settings.max_iter,
        "abstol": settings.tol,
        "reltol": settings.tol,
        "feastol": settings.tol,
    }
    sol = cvxopt.solvers.conelp(
        c, G, h, dims={"l": 0, "q": [], "s": list(sides)}, A=A, b=bvec,
        options=options,
    )
    wall = time.perf_counter() - t0

    status_map = {
        "optimal": "optimal",
        "primal infeasible": "infeasible",
        "dual infeasible": "infeasible",
        "unknown": "inaccurate",
    }
    status = status_map.get(sol["status"], "inaccurate")
    if sol["x"] is None or sol["z"] is None or sol["y"] is None:
        out = _sdp._empty_solution(problem, status, wall)
        return out

    y = np.array(sol["x"]).ravel()
    free = np.zeros(problem.nfree)
    free[keep_cols] = np.array(sol["y"]).ravel()
    # z stacks the PSD blocks column-major in one flat vector
    zflat = np.array(sol["z"]).ravel()
    grams = []
    offset = 0
    for nb in sides:
        block = zflat[offset:offset + nb * nb].reshape(nb, nb)
        grams.append(0.5 * (block + block.T))
        offset += nb * nb
    lambdas = []
    for i in range(problem.n_eq):
        lambdas.append(
            free[1 + i * problem.eq_len: 1 + (i + 1) * problem.eq_len].copy()
        )
    gamma = float(free[0]) if problem.nfree else 0.0
    pobj = gamma
    dobj = float(problem.rhs @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return _sdp.SdpSolution(
        status=status,
        gamma=gamma,
        gram_blocks=grams,
        lambdas=lambdas,
        free=free,
        y=y,
        obj_primal=pobj,
        obj_dual=dobj,
        primal_residual=_stat(sol, "primal infeasibility"),
        dual_residual=_stat(sol, "dual infeasibility"),
        gap=gap,
        iterations=int(sol.get("iterations") or 0),
        wall_time=wall,
    )
