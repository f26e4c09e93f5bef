"""Dense primal-dual interior-point solver for small trace-constrained SDPs.

Problem template (the only shape the optimizers in this package need):

    maximize    t
    subject to  X[k, k] = d_k                      k in diag_idx
                <G_j, X>  >=  r_j + q_j * t        (or <=)
                X  positive semidefinite

``X`` may be real symmetric or complex Hermitian; the cone arithmetic is
written against the conjugate transpose, so a single code path covers both
dtypes. The method is an infeasible-start Nesterov-Todd path-following
iteration with a Mehrotra predictor-corrector step. Inequalities carry
nonnegative slacks and ``t`` is a free variable handled inside the reduced
KKT system, whose Schur complement has one row per constraint, i.e. it stays
tiny even when the matrix variable is large.

Structure exploitation: rows that pin a single diagonal entry contribute
``|W|^2`` entries to the Schur complement (W is the NT scaling point), so a
problem with hundreds of diagonal constraints and a couple of dense trace
constraints costs only a handful of n^3 products per iteration.

The problem is internally rescaled (variable, objective and row scales) and
the reported residuals refer to this unit-scaled data, which is what the
solution contract is stated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

_STALL_STEP = 1e-8
_MIN_SCALE = 1e-140


@dataclass
class ConeProgram:
    dim: int
    diag_idx: np.ndarray     # (nd,) int
    diag_rhs: np.ndarray     # (nd,) float
    mats: list               # m dense Hermitian matrices, (dim, dim)
    senses: np.ndarray       # (m,) +1 for >=, -1 for <=
    rhs_const: np.ndarray    # (m,) r_j
    rhs_t: np.ndarray        # (m,) q_j

    def __post_init__(self):
        self.diag_idx = np.asarray(self.diag_idx, dtype=int)
        self.diag_rhs = np.asarray(self.diag_rhs, dtype=float)
        self.senses = np.asarray(self.senses, dtype=float)
        self.rhs_const = np.asarray(self.rhs_const, dtype=float)
        self.rhs_t = np.asarray(self.rhs_t, dtype=float)
        if not np.any(self.rhs_t != 0.0):
            raise ValueError("the objective variable t must appear in at least one constraint")


@dataclass
class ConeSolution:
    x: np.ndarray
    t: float
    status: str              # "optimal" | "infeasible" | "max_iters"
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    t_slack: float = 0.0     # absolute uncertainty certificate on t
    message: str = ""
    y: np.ndarray = field(default=None, repr=False)


def _hdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(np.conj(a) * b)))


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _lp_alpha(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0.0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _psd_alpha(d_scaled: np.ndarray, lam: np.ndarray) -> float:
    # X + alpha*dX >= 0  <=>  I + alpha * lam^-1/2 D lam^-1/2 >= 0
    h = d_scaled / np.sqrt(np.outer(lam, lam))
    emin = float(np.linalg.eigvalsh(_herm(h))[0])
    if emin >= 0.0:
        return np.inf
    return -1.0 / emin


def solve_cone(
    prog: ConeProgram,
    tol: float = 1e-8,
    max_iters: int = 200,
    step_frac: float = 0.98,
) -> ConeSolution:
    n = prog.dim
    diag_idx = prog.diag_idx
    nd = diag_idx.size
    m = len(prog.mats)
    p = nd + m
    senses = prog.senses

    use_complex = any(np.iscomplexobj(g) for g in prog.mats)
    dtype = np.complex128 if use_complex else np.float64
    g_raw = [np.asarray(g, dtype=dtype) for g in prog.mats]

    # ---- problem scaling -------------------------------------------------
    g_norms = np.array([max(np.linalg.norm(g), 1e-300) for g in g_raw])
    if nd > 0:
        x_scale = float(np.mean(np.abs(prog.diag_rhs))) or 1.0
    else:
        cands = [
            prog.rhs_const[j] / g_norms[j]
            for j in range(m)
            if senses[j] < 0 and prog.rhs_const[j] > 0
        ]
        x_scale = float(max(cands)) if cands else 1.0
    with_t = prog.rhs_t != 0.0
    t_scale = float(
        np.max(
            (g_norms[with_t] * x_scale * np.sqrt(n) + np.abs(prog.rhs_const[with_t]))
            / np.abs(prog.rhs_t[with_t])
        )
    )
    row_scale = g_norms * x_scale + np.abs(prog.rhs_t) * t_scale + np.abs(prog.rhs_const)
    row_scale = np.maximum(row_scale, 1e-300)

    g_stack = np.stack([_herm(g) * (x_scale / row_scale[j]) for j, g in enumerate(g_raw)])
    q = prog.rhs_t * (t_scale / row_scale)
    r = prog.rhs_const / row_scale
    d_rhs = prog.diag_rhs / x_scale
    b = np.concatenate([d_rhs, r])
    b_norm = float(np.linalg.norm(b))

    def inner_all(mat: np.ndarray) -> np.ndarray:
        out = np.empty(p)
        if nd:
            out[:nd] = mat[diag_idx, diag_idx].real
        if m:
            out[nd:] = np.einsum("jkl,kl->j", g_stack.conj(), mat).real
        return out

    def adjoint(y: np.ndarray) -> np.ndarray:
        out = np.zeros((n, n), dtype=dtype)
        if m:
            out += np.einsum("j,jkl->kl", y[nd:].astype(dtype), g_stack)
        if nd:
            out[diag_idx, diag_idx] += y[:nd]
        return out

    # ---- state -----------------------------------------------------------
    x = np.eye(n, dtype=dtype)
    zc = np.eye(n, dtype=dtype)          # dual cone matrix
    s = np.ones(m)
    z = np.ones(m)
    y = np.zeros(p)
    t = 0.0

    bt = np.zeros(p)
    bt[nd:] = -q

    best = None
    status, message = "max_iters", "iteration limit reached"
    iters_done = 0

    for it in range(max_iters):
        iters_done = it
        # residuals
        ax = inner_all(x)
        ax[nd:] += -q * t - senses * s
        r_p = b - ax
        r_dual_mat = -adjoint(y) - zc
        r_ds = senses * y[nd:] - z
        r_dt = -1.0 + float(q @ y[nd:])

        pobj, dobj = -t, float(b @ y)
        compl = _hdot(x, zc) + float(s @ z)
        rel_p = float(np.linalg.norm(r_p)) / (1.0 + b_norm)
        rel_d = float(
            np.sqrt(np.linalg.norm(r_dual_mat) ** 2 + np.linalg.norm(r_ds) ** 2 + r_dt**2)
        ) / 2.0
        # conservative gap: complementarity or the raw objective spread,
        # whichever is larger, so the optimality certificate is never optimistic
        rel_g = max(compl, abs(pobj - dobj)) / (1.0 + abs(pobj) + abs(dobj))
        err = max(rel_p, rel_d, rel_g)
        if best is None or err < best[0]:
            best = (err, x.copy(), t, y.copy(), rel_p, rel_d, rel_g)
        if err <= tol:
            status, message = "optimal", ""
            break

        # NT scaling point
        try:
            rx = np.linalg.cholesky(x)
            rz = np.linalg.cholesky(zc)
        except np.linalg.LinAlgError:
            message = "iterate left the cone numerically"
            break
        _, sig, vh = np.linalg.svd(rz.conj().T @ rx)
        if sig[-1] < _MIN_SCALE:
            message = "scaling point degenerate"
            break
        gmat = (rx @ vh.conj().T) * (sig**-0.5)[None, :]
        rx_inv = solve_triangular(rx, np.eye(n, dtype=dtype), lower=True)
        g_inv = (sig**0.5)[:, None] * (vh @ rx_inv)
        lam = sig
        w = _herm(gmat @ gmat.conj().T)

        # Schur complement
        mmat = np.empty((p, p))
        if nd:
            w_abs2 = (w * w.conj()).real
            mmat[:nd, :nd] = w_abs2[np.ix_(diag_idx, diag_idx)]
        t_stack = np.empty_like(g_stack)
        for j in range(m):
            t_stack[j] = w @ g_stack[j] @ w
            if nd:
                col = t_stack[j][diag_idx, diag_idx].real
                mmat[:nd, nd + j] = col
                mmat[nd + j, :nd] = col
        for i in range(m):
            for j in range(i, m):
                val = _hdot(g_stack[i], t_stack[j])
                mmat[nd + i, nd + j] = val
                mmat[nd + j, nd + i] = val
        if m:
            mmat[np.arange(nd, p), np.arange(nd, p)] += s / z

        try:
            mchol = np.linalg.cholesky(mmat)
        except np.linalg.LinAlgError:
            mchol = np.linalg.cholesky(mmat + (1e-12 * np.trace(mmat) + 1e-300) * np.eye(p))

        def kkt_solve(rhs_vec: np.ndarray):
            u = solve_triangular(mchol, rhs_vec, lower=True)
            return solve_triangular(mchol.conj().T, u, lower=False)

        w_rd_w = w @ r_dual_mat @ w
        rhs_base = r_p + inner_all(w_rd_w)
        u2 = kkt_solve(bt)
        denom = float(bt @ u2)

        def direction(rc_scaled: np.ndarray, rc_mat: np.ndarray, rc_lp: np.ndarray):
            rhs = rhs_base - inner_all(rc_mat)
            if m:
                rhs[nd:] += senses * (rc_lp - s * r_ds) / z
            u1 = kkt_solve(rhs)
            dt = (float(bt @ u1) - r_dt) / denom
            dy = u1 - u2 * dt
            dz_mat = r_dual_mat - adjoint(dy)
            dz_lp = r_ds + senses * dy[nd:]
            d_z = _herm(gmat.conj().T @ dz_mat @ gmat)
            d_x = rc_scaled - d_z
            dx_mat = _herm(gmat @ d_x @ gmat.conj().T)
            ds_lp = (rc_lp - s * dz_lp) / z if m else rc_lp
            return dx_mat, dz_mat, d_x, d_z, ds_lp, dz_lp, dy, dt

        mu = compl / (n + m)

        # predictor
        rc_scaled_a = -np.diag(lam).astype(dtype)
        dxa, dza, d_xa, d_za, dsa, dza_lp, _, _ = direction(rc_scaled_a, -x, -s * z)
        ap = min(1.0, _psd_alpha(d_xa, lam), _lp_alpha(s, dsa))
        ad = min(1.0, _psd_alpha(d_za, lam), _lp_alpha(z, dza_lp))
        lam_mat = np.diag(lam).astype(dtype)
        mu_aff = (
            _hdot(lam_mat + ap * d_xa, lam_mat + ad * d_za)
            + float((s + ap * dsa) @ (z + ad * dza_lp))
        ) / (n + m)
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0 - 1e-8))

        # corrector
        r_til = (
            sigma * mu * np.eye(n, dtype=dtype)
            - np.diag(lam**2).astype(dtype)
            - 0.5 * (d_xa @ d_za + d_za @ d_xa)
        )
        rc_scaled = r_til * (2.0 / np.add.outer(lam, lam))
        rc_mat = gmat @ rc_scaled @ gmat.conj().T
        rc_lp = sigma * mu - s * z - dsa * dza_lp
        dx, dzm, d_x, d_z, ds, dz, dy, dt = direction(rc_scaled, rc_mat, rc_lp)

        ap = min(1.0, step_frac * min(_psd_alpha(d_x, lam), _lp_alpha(s, ds)))
        ad = min(1.0, step_frac * min(_psd_alpha(d_z, lam), _lp_alpha(z, dz)))
        if max(ap, ad) < _STALL_STEP:
            message = "step sizes collapsed"
            break

        x = _herm(x + ap * dx)
        s = s + ap * ds
        t = t + ap * dt
        y = y + ad * dy
        zc = _herm(zc + ad * dzm)
        z = z + ad * dz

    err, x_best, t_best, y_best, rel_p, rel_d, rel_g = best
    if status != "optimal" and err <= tol:
        status, message = "optimal", ""
    if status != "optimal":
        farkas = _infeasibility_certificate(y_best, adjoint, senses, q, b, nd, tol)
        if farkas:
            status, message = "infeasible", farkas

    # absolute uncertainty on t: the relative metrics are normalized in scaled
    # units, so widen back out; the factor 2 absorbs feasibility cross terms
    denom = 1.0 + 2.0 * abs(t_best)
    t_slack = 2.0 * t_scale * denom * max(rel_p, rel_d, rel_g)

    return ConeSolution(
        x=_herm(x_best) * x_scale,
        t=t_best * t_scale,
        status=status,
        iterations=iters_done + 1,
        primal_residual=rel_p,
        dual_residual=rel_d,
        gap=rel_g,
        t_slack=t_slack,
        message=message,
        y=y_best,
    )


def _infeasibility_certificate(y, adjoint, senses, q, b, nd, tol) -> str:
    """Farkas-style primal infeasibility check on the dual iterate.

    The iterate carries a bounded component with q'y = 1 (dual feasibility for
    the free objective variable); the improving ray lives in its orthogonal
    complement, so that component is projected out before testing.
    """
    ray = y.copy()
    qq = float(q @ q)
    if qq > 0:
        ray[nd:] -= (float(q @ y[nd:]) / qq) * q
    norm_ray = float(np.linalg.norm(ray))
    if norm_ray < 1e-12:
        return ""
    yn = ray / norm_ray
    gain = float(b @ yn)
    if gain <= np.sqrt(tol):
        return ""
    zmax = float(np.linalg.eigvalsh(_herm(adjoint(yn)))[-1])
    sense_ok = np.all(senses * yn[nd:] >= -np.sqrt(tol))
    if zmax <= np.sqrt(tol) and sense_ok:
        return (
            f"improving ray found: b'y={gain:.3e} with A*(y) <= {zmax:.1e} I; "
            "no X in the cone satisfies the constraints"
        )
    return ""
