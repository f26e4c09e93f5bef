"""Small dense SDPs in trace-constraint form, plus rank-one extraction.

The relaxed phase and beamformer designs all share one problem template:
maximize ``t`` over a PSD matrix subject to optional unit-diagonal pinning
and a few trace inequalities whose right sides are affine in ``t``; a pure
feasibility question is posed as "maximize the worst slack". Solving is
delegated to :mod:`ris_twr.ipm`. Rank-one candidates are then recovered by
the usual Gaussian randomization: sample vectors with covariance equal to
the relaxed solution, project each one onto the feasible set, and keep the
best according to a caller-supplied objective.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ipm
from .system import PhaseShifts

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
DEFAULT_TOL = 1e-6          # SDP solution accuracy
DEFAULT_PSD_TOL = 1e-8      # eigenvalue slack tolerated before randomization
DEFAULT_DRAWS = 200         # Gaussian randomization candidates
DEFAULT_MAX_ITERS = 200
RANK_ONE_TOL = 1e-8         # second/first eigenvalue ratio for the shortcut


class SdpSolveError(RuntimeError):
    """The solver did not return a certified optimal solution."""


@dataclass(frozen=True)
class TraceConstraint:
    """tr(X @ mat) >= (or <=) rhs_const + rhs_t * t, with Hermitian mat."""

    mat: np.ndarray
    sense: str = ">="            # ">=" | "<="
    rhs_const: float = 0.0
    rhs_t: float = 0.0

    def __post_init__(self):
        mat = np.asarray(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("constraint matrix must be square")
        scale = max(np.linalg.norm(mat), 1.0)
        if np.linalg.norm(mat - mat.conj().T) > HERMITIAN_TOL * scale:
            raise ValueError("constraint matrix must be Hermitian")
        object.__setattr__(self, "mat", 0.5 * (mat + mat.conj().T))
        if self.sense not in (">=", "<="):
            raise ValueError(f"unknown sense {self.sense!r}")


@dataclass(frozen=True)
class SdpProblem:
    """maximize t over X >= 0 under unit-diagonal and trace constraints."""

    dim: int
    unit_diag: bool
    constraints: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        cons = tuple(self.constraints)
        for c in cons:
            if c.mat.shape[0] != self.dim:
                raise ValueError("constraint dimension mismatch")
        object.__setattr__(self, "constraints", cons)

    @classmethod
    def max_min_trace(cls, mats, weights=None) -> "SdpProblem":
        """max t s.t. unit diag and tr(X mats[i]) >= weights[i] * t."""
        mats = list(mats)
        weights = [1.0] * len(mats) if weights is None else list(weights)
        cons = [
            TraceConstraint(mat=m, sense=">=", rhs_const=0.0, rhs_t=float(w))
            for m, w in zip(mats, weights)
        ]
        return cls(dim=mats[0].shape[0], unit_diag=True, constraints=tuple(cons))

    @classmethod
    def feasibility_with_margin(cls, dim, ge_constraints, le_constraints) -> "SdpProblem":
        """Slack maximization: t is the worst margin of the >= constraints.

        Feasibility of {tr(X G_i) >= r_i, tr(X F_j) <= u_j, X >= 0} is then
        equivalent to the optimal t being nonnegative.
        """
        cons = [
            TraceConstraint(mat=g, sense=">=", rhs_const=float(r), rhs_t=1.0)
            for g, r in ge_constraints
        ]
        cons += [
            TraceConstraint(mat=f, sense="<=", rhs_const=float(u), rhs_t=0.0)
            for f, u in le_constraints
        ]
        return cls(dim=dim, unit_diag=False, constraints=tuple(cons))


@dataclass
class SdpSolution:
    x_mat: np.ndarray
    t_opt: float
    status: str                  # "optimal" | "infeasible" | "max_iters"
    primal_residual: float
    dual_residual: float
    min_eigenvalue: float
    gap: float = 0.0
    t_slack: float = 0.0         # absolute uncertainty certificate on t_opt
    iterations: int = 0
    message: str = ""


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> SdpSolution:
    """Solve the relaxation; residuals refer to the unit-scaled problem data."""
    diag_idx = np.arange(problem.dim) if problem.unit_diag else np.array([], dtype=int)
    prog = ipm.ConeProgram(
        dim=problem.dim,
        diag_idx=diag_idx,
        diag_rhs=np.ones(diag_idx.size),
        mats=[c.mat for c in problem.constraints],
        senses=np.array([1.0 if c.sense == ">=" else -1.0 for c in problem.constraints]),
        rhs_const=np.array([c.rhs_const for c in problem.constraints]),
        rhs_t=np.array([c.rhs_t for c in problem.constraints]),
    )
    sol = ipm.solve_cone(prog, tol=tol, max_iters=max_iters)
    x = 0.5 * (sol.x + sol.x.conj().T)
    return SdpSolution(
        x_mat=x,
        t_opt=sol.t,
        status=sol.status,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        min_eigenvalue=float(np.linalg.eigvalsh(x)[0]),
        gap=sol.gap,
        t_slack=sol.t_slack,
        iterations=sol.iterations,
        message=sol.message,
    )


def require_optimal(sol: SdpSolution) -> SdpSolution:
    if sol.status != "optimal":
        raise SdpSolveError(f"SDP solve failed: status={sol.status} ({sol.message})")
    return sol


def gaussian_randomization(
    psi: np.ndarray,
    n_draws: int,
    evaluate: Callable[[np.ndarray], float],
    rng: int | np.random.Generator,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    psd_tol: float = DEFAULT_PSD_TOL,
    rank_one_tol: float = RANK_ONE_TOL,
) -> np.ndarray:
    """Best rank-one candidate drawn from a PSD matrix.

    A numerically rank-one input short-circuits to its scaled principal
    component. Otherwise candidates are sampled with covariance ``psi``,
    passed through ``project`` (identity when omitted) and scored with
    ``evaluate``; the highest-scoring projected candidate is returned.
    Candidates are drawn one at a time so a fixed seed gives nested
    candidate sets for increasing ``n_draws``.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    psi = np.asarray(psi)
    w, u = np.linalg.eigh(0.5 * (psi + psi.conj().T))
    if w[0] < -psd_tol * max(1.0, float(w[-1])):
        raise ValueError(f"matrix is not PSD within tolerance (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)

    if w[-1] > 0.0 and (w.size == 1 or w[-2] <= rank_one_tol * w[-1]):
        return np.sqrt(w[-1]) * u[:, -1]

    if project is None:
        project = lambda v: v
    root = np.sqrt(w)
    best_val, best_vec = -np.inf, None
    for _ in range(max(1, int(n_draws))):
        e = (rng.standard_normal(w.size) + 1j * rng.standard_normal(w.size)) / np.sqrt(2.0)
        cand = project(u @ (root * e))
        val = float(evaluate(cand))
        if val > best_val:
            best_val, best_vec = val, cand
    return best_vec


def extract_phases(phi_bar: np.ndarray, ref_tol: float = 1e-12) -> PhaseShifts:
    """Unit-modulus phases from a lifted candidate, referenced to its last entry."""
    phi_bar = np.asarray(phi_bar, dtype=complex).reshape(-1)
    ref = phi_bar[-1]
    if abs(ref) < ref_tol:
        raise ValueError("reference entry of the lifted vector is numerically zero")
    return PhaseShifts(np.exp(1j * np.angle(phi_bar[:-1] / ref)))


def project_unit_modulus(v: np.ndarray) -> np.ndarray:
    """Total projection of a lifted candidate onto {[phi, 1] : |phi_n| = 1}."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    ref = v[-1] if abs(v[-1]) > 1e-12 else 1.0
    out = np.empty(v.size, dtype=complex)
    out[:-1] = np.exp(1j * np.angle(v[:-1] / ref))
    out[-1] = 1.0
    return out


def solve_max_min_quadratic(
    mats,
    weights,
    n_draws: int,
    tol: float,
    rng: int | np.random.Generator,
) -> tuple[np.ndarray, SdpSolution]:
    """Relax-and-randomize max over unit-modulus liftings of min_i q_i(v)/w_i.

    Here ``q_i(v) = v^H mats[i] v`` and the lifting fixes the last coordinate
    to one. Returns the best projected lifted vector and the relaxed solution.
    """
    problem = SdpProblem.max_min_trace(mats, weights)
    sol = require_optimal(solve(problem, tol=tol))
    mats = [np.asarray(m) for m in mats]
    weights = np.asarray(weights, dtype=float)

    def score(v: np.ndarray) -> float:
        vals = [float(np.real(v.conj() @ m @ v)) / w for m, w in zip(mats, weights)]
        return min(vals)

    phi_bar = gaussian_randomization(
        sol.x_mat, n_draws, score, rng, project=project_unit_modulus
    )
    return phi_bar, sol


def dump_problem_json(problem: SdpProblem, path) -> None:
    """Debug dump for cross-checking an instance against an external solver."""
    payload = {
        "dim": problem.dim,
        "unit_diag": problem.unit_diag,
        "objective": "maximize t",
        "constraints": [
            {
                "sense": c.sense,
                "rhs_const": c.rhs_const,
                "rhs_t": c.rhs_t,
                "mat_real": np.real(c.mat).tolist(),
                "mat_imag": np.imag(c.mat).tolist(),
            }
            for c in problem.constraints
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_problem_json(path) -> SdpProblem:
    with open(path) as fh:
        payload = json.load(fh)
    cons = tuple(
        TraceConstraint(
            mat=np.array(c["mat_real"]) + 1j * np.array(c["mat_imag"]),
            sense=c["sense"],
            rhs_const=c["rhs_const"],
            rhs_t=c["rhs_t"],
        )
        for c in payload["constraints"]
    )
    return SdpProblem(dim=payload["dim"], unit_diag=payload["unit_diag"], constraints=cons)
