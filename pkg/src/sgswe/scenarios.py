"""Built-in experiments, field statistics, error norms, and comparators.

Five benchmark setups cover: a smooth accuracy test with an uncertain bump
bottom, a dam-break-style perturbation compared against stochastic
collocation, two-dimensional parameter variants, and a near-dry submerged
plateau.  Initial data are given as evaluators w(x, y, xi) (water surface),
u, v (velocities), and B(x, y, xi) (bottom); discretization samples them at
cell centers and projects onto the chosen basis.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import (
    DistributionSpec,
    MultiIndexSet,
    build_basis,
    p3_exact_rule,
    tensor_gauss_rule,
    tensor_index_set,
)
from .galerkin import galerkin_product, p_matrix, triple_product_tensor
from .solver import (
    BoundaryConditions,
    CentralUpwindSolver,
    Grid,
    SolverConfig,
    StateField,
    build_bottom,
)


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of one experiment."""

    name: str
    domain: tuple  # (xmin, xmax, ymin, ymax)
    w: callable
    u: callable
    v: callable
    bottom: callable
    dist: DistributionSpec
    index_set: MultiIndexSet
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)
    g: float = 1.0
    theta: float = 1.3
    t_end: float = 1.0
    snapshot_times: tuple = ()


def _const(value):
    return lambda x, y, xi: np.broadcast_to(float(value), np.broadcast(x, y).shape)


def builtin_scenario(scenario_id, k=None, degrees=None):
    """One of the five built-in experiments.

    ``k`` overrides the basis size for one-dimensional parameters (degrees
    0..k-1); ``degrees`` overrides the per-dimension tensor degrees for any
    parameter dimension.
    """
    if scenario_id == 1:
        dist = DistributionSpec.uniform()
        spec = ScenarioSpec(
            name="accuracy-test",
            domain=(0.0, 2.0, 0.0, 1.0),
            w=_const(1.0),
            u=_const(0.3),
            v=_const(0.0),
            bottom=lambda x, y, xi: 0.5 * np.exp(
                -25.0 * (x - 1.0) ** 2 - 50.0 * (y - 0.5) ** 2
            ) + 0.1 * (xi[0] + 1.0),
            dist=dist,
            index_set=tensor_index_set([3]),
            t_end=0.07,
            snapshot_times=(0.07,),
        )
    elif scenario_id == 2:
        dist = DistributionSpec.beta(1.0, 3.0)

        def w(x, y, xi):
            base = np.ones(np.broadcast(x, y).shape)
            return np.where((x > 0.05) & (x < 0.15), 1.01, base)

        spec = ScenarioSpec(
            name="collocation-comparison",
            domain=(0.0, 2.0, 0.0, 1.0),
            w=w,
            u=_const(0.0),
            v=_const(0.0),
            bottom=lambda x, y, xi: 0.8 * np.exp(
                -5.0 * (x - 0.9) ** 2 - 50.0 * (y - 0.5) ** 2
            ) + 0.1 * (xi[0] + 1.0),
            dist=dist,
            index_set=tensor_index_set([7]),
            bc=BoundaryConditions(
                left="extrapolate", right="extrapolate",
                bottom="periodic", top="periodic",
            ),
            t_end=1.2,
            snapshot_times=(1.2,),
        )
    elif scenario_id == 3:
        dist = DistributionSpec(((1.0, 3.0), (0.0, 0.0)))

        def w(x, y, xi):
            base = np.ones(np.broadcast(x, y).shape)
            return np.where((x > 0.05) & (x < 0.15), 1.01, base)

        spec = ScenarioSpec(
            name="moving-hump-2d",
            domain=(0.0, 2.0, 0.0, 1.0),
            w=w,
            u=_const(0.0),
            v=_const(0.0),
            bottom=lambda x, y, xi: 0.8 * np.exp(
                -5.0 * (x - 0.9 + 0.1 * xi[0]) ** 2
                - 50.0 * (y - 0.5 + 0.1 * xi[1]) ** 2
            ),
            dist=dist,
            index_set=tensor_index_set([3, 3]),
            t_end=1.8,
            snapshot_times=(0.6, 0.9, 1.2, 1.5, 1.8),
        )
    elif scenario_id == 4:
        dist = DistributionSpec(((0.0, 0.0), (1.0, 3.0)))

        def w(x, y, xi):
            base = np.ones(np.broadcast(x, y).shape)
            return np.where((x > -0.4) & (x < -0.3), 1.0001, base)

        def bottom(x, y, xi):
            r = np.sqrt(x**2 + y**2) + 0.0001 * (xi[1] + 1.0)
            mid = 9.997 * (0.2 - r) + 0.0001 * (xi[0] + 1.0)
            out = np.where(r <= 0.1, 0.9998, np.where(r <= 0.2, mid, 0.0001))
            return np.broadcast_to(out, np.broadcast(x, y).shape)

        spec = ScenarioSpec(
            name="submerged-plateau",
            domain=(-0.5, 0.5, -0.5, 0.5),
            w=w,
            u=_const(0.0),
            v=_const(0.0),
            bottom=bottom,
            dist=dist,
            index_set=tensor_index_set([3, 3]),
            theta=1.0,
            t_end=0.65,
            snapshot_times=(0.2, 0.35, 0.5, 0.65),
        )
    elif scenario_id == 5:
        dist = DistributionSpec(((3.0, 1.0), (0.0, 0.0)))
        spec = ScenarioSpec(
            name="uncertain-width-hump",
            domain=(0.0, 2.0, 0.0, 1.0),
            w=_const(1.0),
            u=_const(0.3),
            v=_const(0.0),
            bottom=lambda x, y, xi: 0.5 * np.exp(
                -12.5 * (xi[0] + 1.0) * (x - 1.0) ** 2
                - 25.0 * (xi[1] + 1.0) * (y - 0.5) ** 2
            ),
            dist=dist,
            index_set=tensor_index_set([3, 3]),
            t_end=0.07,
            snapshot_times=(0.07,),
        )
    else:
        raise ValueError(f"unknown scenario id {scenario_id!r} (expected 1..5)")

    if degrees is not None:
        spec = replace(spec, index_set=tensor_index_set(list(degrees)))
    elif k is not None:
        k = int(k)
        if spec.dist.dim == 1:
            spec = replace(spec, index_set=tensor_index_set([k - 1]))
        else:
            root = round(math.sqrt(k))
            if root * root != k:
                raise ValueError(
                    f"k={k} is not a tensor size for a {spec.dist.dim}-d parameter; "
                    "pass per-dimension degrees instead"
                )
            spec = replace(spec, index_set=tensor_index_set([root - 1] * spec.dist.dim))
    return spec


# -- discretization ---------------------------------------------------------


def initial_state(spec, grid, basis, rule, bottom):
    """Cell-average PCE coefficients at t = 0.

    The surface is projected at cell centers and the height uses the bottom
    cell average, so a xi-dependent flat surface is represented exactly.
    Discharges are projected pseudo-spectrally from velocity times height.
    """
    nx, ny, k = grid.nx, grid.ny, basis.size
    xc, yc = grid.cell_centers()
    xg = xc[:, None]
    yg = yc[None, :]
    phi = basis.evaluate(rule.nodes)  # (M, K)
    w_hat = np.zeros((nx, ny, k))
    for m in range(rule.size):
        vals = np.broadcast_to(
            np.asarray(spec.w(xg, yg, rule.nodes[m]), dtype=float), (nx, ny)
        )
        w_hat += rule.weights[m] * vals[..., None] * phi[m]
    h_hat = w_hat - bottom.center[2:-2, 2:-2]
    min_node = float((h_hat @ phi.T).min())
    if min_node < 0.0:
        raise ValueError(
            f"initial water height is negative at a quadrature node "
            f"(min {min_node:.3e}); the scheme requires non-negative initial "
            f"heights at every node"
        )
    qx_hat = np.zeros((nx, ny, k))
    qy_hat = np.zeros((nx, ny, k))
    for m in range(rule.size):
        h_node = h_hat @ phi[m]
        u_node = np.broadcast_to(
            np.asarray(spec.u(xg, yg, rule.nodes[m]), dtype=float), (nx, ny)
        )
        v_node = np.broadcast_to(
            np.asarray(spec.v(xg, yg, rule.nodes[m]), dtype=float), (nx, ny)
        )
        qx_hat += rule.weights[m] * (u_node * h_node)[..., None] * phi[m]
        qy_hat += rule.weights[m] * (v_node * h_node)[..., None] * phi[m]
    return StateField.from_interior(h_hat, qx_hat, qy_hat)


@dataclass
class RunResult:
    spec: object
    grid: Grid
    basis: object
    rule: object
    tensor: np.ndarray
    bottom: object
    state: StateField
    stats: object
    snapshots: dict  # time -> StateField copy


def make_config(spec, **overrides):
    """SolverConfig from a scenario's parameters plus keyword overrides."""
    base = {"g": spec.g, "theta": spec.theta, "bc": spec.bc}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**base)


def run_scenario(
    spec,
    nx,
    ny,
    *,
    config=None,
    t_end=None,
    snapshot_times=None,
    collect_snapshots=False,
    **config_overrides,
):
    """Discretize and integrate one scenario; returns a RunResult.

    Keyword overrides (theta, delta, eps, integrator, ...) feed the solver
    configuration; scenario-level boundary conditions and g are kept unless
    a full ``config`` is passed.
    """
    grid = Grid(nx, ny, *spec.domain)
    basis = build_basis(spec.dist, spec.index_set)
    rule = p3_exact_rule(basis)
    tensor = triple_product_tensor(basis, rule)
    if config is None:
        config = make_config(spec, **config_overrides)
    elif config_overrides:
        raise TypeError("pass either config or keyword overrides, not both")
    bottom = build_bottom(spec.bottom, grid, basis, rule, config.bc)
    state = initial_state(spec, grid, basis, rule, bottom)
    solver = CentralUpwindSolver(grid, bottom, basis, config, rule, tensor)
    t_final = spec.t_end if t_end is None else t_end
    snaps = spec.snapshot_times if snapshot_times is None else snapshot_times
    snaps = tuple(t for t in snaps if t <= t_final + 1e-12)
    snapshots = {}

    def grab(st):
        if collect_snapshots:
            snapshots[st.t] = st.copy()

    state, stats = solver.run(state, t_final, snapshot_times=snaps, callback=grab)
    return RunResult(spec, grid, basis, rule, tensor, bottom, state, stats, snapshots)


# -- statistics and norms ----------------------------------------------------


@dataclass(frozen=True)
class MomentField:
    mean: np.ndarray
    std: np.ndarray


def moments(coeffs):
    """Mean and standard deviation fields of a PCE coefficient array (..., K)."""
    coeffs = np.asarray(coeffs)
    mean = coeffs[..., 0]
    std = np.sqrt(np.sum(coeffs[..., 1:] ** 2, axis=-1))
    return MomentField(mean, std)


def downsample_average(arr, factor_x, factor_y):
    """Aggregate fine cell averages onto a coarser grid by block means."""
    nx, ny = arr.shape[0] // factor_x, arr.shape[1] // factor_y
    return arr.reshape(nx, factor_x, ny, factor_y, *arr.shape[2:]).mean(axis=(1, 3))


def error_norm(state, grid, ref_state, ref_grid):
    """L1-in-space of the stochastic L2 norm of the coefficient mismatch.

    The reference lives on an integer refinement of the coarse grid and is
    aggregated down to coarse cells by block averaging before comparing.
    """
    if ref_grid.nx % grid.nx or ref_grid.ny % grid.ny:
        raise ValueError("reference grid must be an integer refinement")
    rx = ref_grid.nx // grid.nx
    ry = ref_grid.ny // grid.ny
    h, qx, qy = state.interior()
    hr, qxr, qyr = (downsample_average(a, rx, ry) for a in ref_state.interior())
    cell = grid.dx * grid.dy
    total = 0.0
    for a, b in ((h, hr), (qx, qxr), (qy, qyr)):
        total += float(np.sqrt(np.sum((a - b) ** 2, axis=-1)).sum())
    return cell * total


def convergence_table(spec, grid_sizes, ref_size, *, t_end=None, config=None,
                      **config_overrides):
    """Errors and observed orders against a fine reference run.

    Returns (rows, reference_result); each row is a dict with nx, error, and
    order (None on the first row).  Orders use the refinement-ratio logarithm
    so non-dyadic sequences work too.
    """
    ref = run_scenario(spec, ref_size, ref_size, t_end=t_end, config=config,
                       **config_overrides)
    rows = []
    prev = None
    for n in grid_sizes:
        res = run_scenario(spec, n, n, t_end=t_end, config=config,
                           **config_overrides)
        err = error_norm(res.state, res.grid, ref.state, ref.grid)
        order = None
        if prev is not None:
            ratio = n / prev[0]
            order = math.log(prev[1] / err) / math.log(ratio)
        rows.append({"nx": n, "error": err, "order": order})
        prev = (n, err)
    return rows, ref


# -- stochastic collocation ---------------------------------------------------


def collocation_solve(spec, m_per_dim, nx, ny, *, t_end=None, config=None,
                      **config_overrides):
    """Non-intrusive comparator: deterministic runs at Gauss nodes, projected.

    Each node freezes xi and reuses the full solver with a one-term basis.
    Node runs are independent; SGSWE_THREADS > 1 runs them in a thread pool,
    with the projection accumulated in node order so results do not depend
    on scheduling.  Returns (h, qx, qy) coefficient fields in the scenario's
    basis.
    """
    if isinstance(m_per_dim, int):
        m_per_dim = (m_per_dim,) * spec.dist.dim
    sc_rule = tensor_gauss_rule(spec.dist, m_per_dim)
    basis = build_basis(spec.dist, spec.index_set)
    phi = basis.evaluate(sc_rule.nodes)  # (M, K)
    k = basis.size

    def node_run(m):
        node = sc_rule.nodes[m]
        frozen = replace(
            spec,
            w=_freeze(spec.w, node),
            u=_freeze(spec.u, node),
            v=_freeze(spec.v, node),
            bottom=_freeze(spec.bottom, node),
            dist=DistributionSpec.uniform(),
            index_set=tensor_index_set([0]),
        )
        res = run_scenario(frozen, nx, ny, t_end=t_end, config=config,
                           **config_overrides)
        h, qx, qy = res.state.interior()
        return np.stack([h[..., 0], qx[..., 0], qy[..., 0]], axis=0)

    threads = int(os.environ.get("SGSWE_THREADS", "1"))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            fields = list(pool.map(node_run, range(sc_rule.size)))
    else:
        fields = [node_run(m) for m in range(sc_rule.size)]
    acc = np.zeros((3, nx, ny, k))
    for m, f in enumerate(fields):
        acc += sc_rule.weights[m] * f[..., None] * phi[m]
    return acc[0], acc[1], acc[2]


def _freeze(f, node):
    return lambda x, y, xi, _f=f, _n=node: _f(x, y, _n)


# -- closure diagnostic -------------------------------------------------------


def closure_discrepancy(tensor, h, qx, qy):
    """Max over cells of the L2 gap between the two mixed-term closures.

    The x-flux closes qx*qy/h as P(qx) P^-1(h) qy and the y-flux as
    P(qy) P^-1(h) qx; the fields must be hyperbolicity-certified so P(h)
    is invertible.
    """
    ph = p_matrix(tensor, h)
    r_y = np.linalg.solve(ph, qy[..., None])[..., 0]
    r_x = np.linalg.solve(ph, qx[..., None])[..., 0]
    diff = galerkin_product(tensor, qx, r_y) - galerkin_product(tensor, qy, r_x)
    return float(np.sqrt(np.sum(diff**2, axis=-1)).max())
