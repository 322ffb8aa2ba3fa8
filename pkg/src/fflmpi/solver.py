"""Joint TV-regularized reconstruction of concentration and Radon data.

Solves, over the feasible set {c >= 0, v >= 0},

    min  0.5 * sum_l ||Khat_l v - uhat_l||^2
         + (alpha1/2) * ||R c - v||^2  +  alpha2 * || |grad c|_2 ||_1

with a primal-dual hybrid-gradient iteration: one dual block per data
trace, one for the coupling term, one for the isotropic TV term;
nonnegativity is enforced by primal projection.  The data operator Khat_l
is the drive-term convolution alone (methods M1/M2) or drive plus
orientation term (M3); the rotation-coupling term is always dropped from
reconstruction, as justified by its speed-ratio bound.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core import GeometryError, ImageGrid, SignalTrace, Sinogram, SolverError
from .forward import kernel_operators
from .metrics import ssim as _ssim
from .projection import radon_matrix, sequential_geometry, simultaneous_dashed_geometry

METHODS = ("M1", "M2", "M3")


# ---------------------------------------------------------------------------
# Discrete TV machinery
# ---------------------------------------------------------------------------

def grad_image(c):
    """Forward-difference gradient with Neumann boundary (last row/col zero).

    Returns a (2, n, n) field: channel 0 differences along x (columns),
    channel 1 along y (rows).  Unit spacing: TV is measured per pixel edge.
    """
    c = np.asarray(c, dtype=float)
    g = np.zeros((2,) + c.shape)
    g[0, :, :-1] = c[:, 1:] - c[:, :-1]
    g[1, :-1, :] = c[1:, :] - c[:-1, :]
    return g


def div_field(g):
    """Negative adjoint of grad_image: <grad c, g> = -<c, div g> exactly."""
    g = np.asarray(g, dtype=float)
    d = np.zeros(g.shape[1:])
    gx, gy = g[0], g[1]
    d[:, 0] += gx[:, 0]
    d[:, 1:-1] += gx[:, 1:-1] - gx[:, :-2]
    d[:, -1] -= gx[:, -2]
    d[0, :] += gy[0, :]
    d[1:-1, :] += gy[1:-1, :] - gy[:-2, :]
    d[-1, :] -= gy[-2, :]
    return d


def tv_isotropic(c):
    """Isotropic total variation: sum over pixels of |grad c|_2."""
    g = grad_image(c)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


# ---------------------------------------------------------------------------
# Problem and result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReconProblem:
    """One joint reconstruction instance.

    data holds the normalized traces uhat (n_coils, n_t) with their scale
    u_star; method selects the data operator and sinogram layout; grid_n
    is the reconstruction image size.  alpha1 weights the coupling term,
    alpha2 the TV term.
    """

    method: str
    data: np.ndarray
    u_star: float
    config: object               # ScanConfig of the scan that produced data
    tracer: object
    grid_n: int
    alpha1: float
    alpha2: float
    max_iters: int = 2000
    tol: float = 1e-6
    check_window: int = 20

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("alpha1 and alpha2 must be positive")
        d = np.atleast_2d(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", d)


@dataclass(frozen=True)
class ReconResult:
    c: ImageGrid
    v: Sinogram
    objective_history: np.ndarray
    residual_norms: dict
    iterations: int
    termination: str             # "converged" | "max_iters"
    model_data_mismatch: bool    # M1 operator applied to simultaneous data


@dataclass(frozen=True)
class JointSystem:
    """Assembled linear operators of one reconstruction instance."""

    b_ops: tuple                 # per-coil csr, act on the scaled sinogram
    r_op: object                 # csr image -> sinogram
    geometry: object
    grid: ImageGrid
    v_scale: float               # sinogram variable scaling (conditioning)
    mismatch: bool


def build_system(problem):
    """Assemble the data and coupling operators for a ReconProblem.

    M1 uses the sweep-angle layout (sequential model); if the data were
    produced under simultaneous rotation this is the deliberate
    model/data-mismatch experiment and is flagged.  M2/M3 use the
    half-sweep layout of the simultaneous scan.  The sinogram variable is
    scaled by the FOV radius so all operator blocks are O(1).
    """
    config = problem.config
    mismatch = False
    if problem.method == "M1":
        if config.rotation_mode == "simultaneous":
            mismatch = True
            n_sweeps = int(round(config.duration * 2.0 * config.f_drive))
            op_config = replace(config, rotation_mode="sequential",
                                n_angles=n_sweeps, total_time=config.duration)
        else:
            op_config = config
        geometry = sequential_geometry(op_config)
    else:
        if config.rotation_mode != "simultaneous":
            raise GeometryError(f"{problem.method} expects simultaneous-rotation data")
        op_config = config
        geometry = simultaneous_dashed_geometry(config)
    ops = kernel_operators(op_config, problem.tracer, geometry)
    n_t = ops.t_grid.size
    if problem.data.shape[1] != n_t:
        raise GeometryError(
            f"data has {problem.data.shape[1]} samples, scan expects {n_t}")
    n_s = geometry.s_grid.size
    v_scale = config.r_fov
    cols = (ops.col_index[:, None] * n_s + np.arange(n_s)[None, :]).ravel()
    rows = np.repeat(np.arange(n_t), n_s)
    w = ops.s_weights[None, :]
    scale = v_scale / problem.u_star
    b_ops = []
    for l in range(config.n_coils):
        data = ops.a1[l][:, None] * ops.kern_deriv * w
        if problem.method == "M3":
            data = data + ops.a3[l][:, None] * ops.kern_moment * w
        mat = sp.csr_matrix((data.ravel() * scale, (rows, cols)),
                            shape=(n_t, geometry.n_columns * n_s))
        b_ops.append(mat)
    grid = ImageGrid(problem.grid_n, problem.grid_n, config.r_fov,
                     np.zeros((problem.grid_n, problem.grid_n)))
    r_op = radon_matrix(problem.grid_n, config.r_fov, geometry)
    return JointSystem(tuple(b_ops), r_op, geometry, grid, v_scale, mismatch)


# ---------------------------------------------------------------------------
# Primal-dual solve
# ---------------------------------------------------------------------------

def _inv_or_one(sums):
    s = np.asarray(sums, dtype=float).ravel()
    return np.where(s > 0, 1.0 / np.maximum(s, 1e-300), 1.0)


def _preconditioners(system, n, shape_img):
    """Diagonal primal/dual steps from absolute row and column sums.

    The stacked operator has one dual row block per data trace, one for
    the coupling term R c - v, and one per gradient component; steps
    tau_j = 1/sum_i |K_ij| and sigma_i = 1/sum_j |K_ij| satisfy the
    primal-dual convergence condition while equalizing the very
    differently scaled blocks.
    """
    abs_r = sp.csr_matrix((np.abs(system.r_op.data), system.r_op.indices,
                           system.r_op.indptr), shape=system.r_op.shape)
    ones_v = np.ones(system.r_op.shape[0])
    ones_c = np.ones(system.r_op.shape[1])
    sigma1 = []
    col_b = 0.0
    for b in system.b_ops:
        abs_b = sp.csr_matrix((np.abs(b.data), b.indices, b.indptr), shape=b.shape)
        sigma1.append(_inv_or_one(abs_b @ np.ones(b.shape[1])))
        col_b = col_b + abs_b.T @ np.ones(b.shape[0])
    sigma2 = _inv_or_one(abs_r @ ones_c + system.v_scale)
    sigma3 = 0.5                                  # each difference row has sum 2
    # gradient column sums: own x/y difference plus the neighbors' ones
    grad_cols = np.zeros(shape_img)
    grad_cols[:, :-1] += 1.0
    grad_cols[:-1, :] += 1.0
    grad_cols[:, 1:] += 1.0
    grad_cols[1:, :] += 1.0
    tau_c = _inv_or_one(abs_r.T @ ones_v + grad_cols.ravel())
    tau_v = _inv_or_one(col_b + system.v_scale * ones_v)
    return sigma1, sigma2, sigma3, tau_c, tau_v


def _objective(system, problem, bv, rc_minus_v, gc):
    data_res = [float(np.linalg.norm(b - u)) for b, u in zip(bv, problem.data)]
    tv = float(np.sqrt(gc[0] ** 2 + gc[1] ** 2).sum())
    coupling = float(np.linalg.norm(rc_minus_v))
    obj = (0.5 * sum(r**2 for r in data_res)
           + 0.5 * problem.alpha1 * coupling**2 + problem.alpha2 * tv)
    return obj, data_res, coupling, tv


def solve_joint(problem, start=None):
    """Run the preconditioned primal-dual iteration on a ReconProblem.

    Starts from (0, 0) (or a given feasible (c, v) pair); per-variable
    step sizes come from the absolute row/column sums of the stacked
    operator, which balances the data, coupling, and TV blocks.
    Terminates when the relative objective change over check_window
    iterations drops below tol, or at max_iters.
    """
    system = build_system(problem)
    n = problem.grid_n
    n_pix = n * n
    n_v = system.r_op.shape[0]
    shape_img = (n, n)
    sigma1, sigma2, sigma3, tau_c, tau_v = _preconditioners(system, n, shape_img)
    alpha1, alpha2 = problem.alpha1, problem.alpha2
    uhat = problem.data
    n_coils = uhat.shape[0]

    if start is None:
        c = np.zeros(n_pix)
        v = np.zeros(n_v)
    else:
        c = np.maximum(np.asarray(start[0], dtype=float).ravel(), 0.0)
        v = np.maximum(np.asarray(start[1], dtype=float).ravel() / system.v_scale, 0.0)
    y1 = [np.zeros(uhat.shape[1]) for _ in range(n_coils)]
    y2 = np.zeros(n_v)
    y3 = np.zeros((2,) + shape_img)

    def forward(ci, vi):
        bv = [b @ vi for b in system.b_ops]
        rcv = system.r_op @ ci - system.v_scale * vi
        gc = grad_image(ci.reshape(shape_img))
        return bv, rcv, gc

    bv, rcv, gc = forward(c, v)
    bv_prev, rcv_prev, gc_prev = bv, rcv, gc
    history = []
    obj0 = None
    termination = "max_iters"
    iterations = problem.max_iters
    for it in range(problem.max_iters):
        # dual ascent at the extrapolated point 2*x_k - x_{k-1}
        for l in range(n_coils):
            y1[l] = (y1[l] + sigma1[l] * (2.0 * bv[l] - bv_prev[l] - uhat[l])) / (1.0 + sigma1[l])
        y2 = (y2 + sigma2 * (2.0 * rcv - rcv_prev)) * (alpha1 / (alpha1 + sigma2))
        y3 = y3 + sigma3 * (2.0 * gc - gc_prev)
        mag = np.sqrt(y3[0] ** 2 + y3[1] ** 2)
        y3 *= alpha2 / np.maximum(alpha2, mag)
        # primal descent with nonnegativity projection
        adj_c = system.r_op.T @ y2 - div_field(y3).ravel()
        adj_v = sum(b.T @ y for b, y in zip(system.b_ops, y1)) - system.v_scale * y2
        c = np.maximum(c - tau_c * adj_c, 0.0)
        v = np.maximum(v - tau_v * adj_v, 0.0)
        bv_prev, rcv_prev, gc_prev = bv, rcv, gc
        bv, rcv, gc = forward(c, v)
        obj, data_res, coupling, tv = _objective(system, problem, bv, rcv, gc)
        history.append(obj)
        if obj0 is None:
            obj0 = max(obj, 1e-300)
        if obj > 10.0 * obj0 and obj > 1e-12:
            raise SolverError(
                f"objective grew to {obj:.3e} (initial {obj0:.3e}); "
                "step sizes appear unstable")
        k = problem.check_window
        if it >= k:
            window = history[it - k:]
            if max(window) - min(window) <= problem.tol * max(abs(obj), 1e-300):
                termination = "converged"
                iterations = it + 1
                break

    c_img = ImageGrid(n, n, problem.config.r_fov, c.reshape(shape_img))
    geom = system.geometry
    v_phys = (system.v_scale * v).reshape(geom.n_columns, geom.s_grid.size)
    v_sino = Sinogram(geom.angles, geom.s_grid, v_phys)
    obj, data_res, coupling, tv = _objective(system, problem, bv, rcv, gc)
    residuals = {f"data_coil{l}": data_res[l] for l in range(n_coils)}
    residuals["coupling"] = coupling
    residuals["tv"] = tv
    return ReconResult(
        c=c_img,
        v=v_sino,
        objective_history=np.asarray(history),
        residual_norms=residuals,
        iterations=iterations,
        termination=termination,
        model_data_mismatch=system.mismatch,
    )


def objective_value(problem, c, v):
    """Objective of the problem at an arbitrary feasible pair (c, v).

    c may be an ImageGrid or flat array; v a Sinogram or array in physical
    (unscaled) sinogram units.
    """
    system = build_system(problem)
    c = (c.values if hasattr(c, "values") else np.asarray(c, float)).ravel()
    v = (v.values if hasattr(v, "values") else np.asarray(v, float)).ravel()
    bv = [b @ (v / system.v_scale) for b in system.b_ops]
    rcv = system.r_op @ c - v
    gc = grad_image(c.reshape((problem.grid_n, problem.grid_n)))
    return _objective(system, problem, bv, rcv, gc)[0]


# ---------------------------------------------------------------------------
# Parameter sweep
# ---------------------------------------------------------------------------

def paper_alpha_grid():
    """Default sweep sets: alpha1 in {1,2,4}*1e4, alpha2 = 0.1^(5.5 - 0.05*i)."""
    alpha1 = [1e4, 2e4, 4e4]
    alpha2 = [0.1 ** (5.5 - 0.05 * i) for i in range(50)]
    return alpha1, alpha2


@dataclass(frozen=True)
class SweepEntry:
    alpha1: float
    alpha2: float
    ssim: float
    objective: float
    iterations: int


@dataclass(frozen=True)
class SweepResult:
    alpha1: float
    alpha2: float
    result: ReconResult
    ssim: float
    table: tuple                 # SweepEntry per candidate, sweep order


def parameter_sweep(problem, alpha1_set, alpha2_set, groundtruth, jobs=1,
                    solve=solve_joint):
    """Exhaustive (alpha1, alpha2) sweep maximizing SSIM against groundtruth.

    Ties break toward smaller alpha2, then smaller alpha1, making the
    argmax independent of candidate ordering.  Candidate solves are
    independent and may run on jobs > 1 worker threads; the reduction
    order is fixed.
    """
    alpha1_set = list(alpha1_set)
    alpha2_set = list(alpha2_set)
    if not alpha1_set or not alpha2_set:
        raise ValueError("parameter sets must be non-empty")
    gt = groundtruth.values if hasattr(groundtruth, "values") else np.asarray(groundtruth)
    if gt.shape != (problem.grid_n, problem.grid_n):
        raise GeometryError("groundtruth must live on the reconstruction grid")
    candidates = [(a1, a2) for a1 in alpha1_set for a2 in alpha2_set]

    def run(pair):
        a1, a2 = pair
        res = solve(replace(problem, alpha1=a1, alpha2=a2))
        return res, _ssim(res.c.values, gt)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, candidates))
    else:
        outcomes = [run(pair) for pair in candidates]
    table = []
    best = None
    best_key = None
    for (a1, a2), (res, score) in zip(candidates, outcomes):
        table.append(SweepEntry(a1, a2, score, float(res.objective_history[-1]),
                                res.iterations))
        key = (-score, a2, a1)
        if best_key is None or key < best_key:
            best_key = key
            best = (a1, a2, res, score)
    return SweepResult(alpha1=best[0], alpha2=best[1], result=best[2],
                       ssim=best[3], table=tuple(table))
