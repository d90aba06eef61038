"""Hamiltonian characteristics, the Hamilton-Jacobi phase, the leading
transport amplitude and the oscillatory-kernel time parametrix.

The phase solver shoots characteristics with initial momentum xi and
Newton-inverts the position map; the geometric amplitude factor is the
inverse square root of the characteristic Jacobian, which the solver
already tracks. One space dimension is supported end to end.
"""

from dataclasses import dataclass

import numpy as np

from .util import TWO_PI, as_points

__all__ = [
    "Hamiltonian", "Trajectory", "PhaseSolution", "ParametrixAmplitude",
    "FlowError", "CausticError", "flow_step", "solve_hamilton_jacobi",
    "check_phase_periodicity", "initial_amplitude", "solve_transport_leading",
    "build_parametrix", "parametrix_error_sweep", "weyl_symbol_from_matrix",
]


class FlowError(RuntimeError):
    pass


class CausticError(RuntimeError):
    def __init__(self, msg, safe_horizon=0.0):
        super().__init__(msg)
        self.safe_horizon = safe_horizon


class Hamiltonian:
    """Classical Hamiltonian with gradient and Hessian callbacks.

    All callables take (..., d)-shaped position and momentum arrays.
    """

    def __init__(self, dim, value, grad_x, grad_xi, hess_xx=None,
                 hess_x_xi=None, hess_xi_xi=None):
        self.dim = int(dim)
        self.value = value
        self.grad_x = grad_x
        self.grad_xi = grad_xi
        self.hess_xx = hess_xx
        self.hess_x_xi = hess_x_xi
        self.hess_xi_xi = hess_xi_xi

    @classmethod
    def from_symbol(cls, sym):
        d = sym.dim

        def unit(k):
            e = [0] * d
            e[k] = 1
            return tuple(e)

        zero = (0,) * d
        val = sym.term_derivative(0, zero, zero)
        dx = [sym.term_derivative(0, unit(i), zero) for i in range(d)]
        dxi = [sym.term_derivative(0, zero, unit(i)) for i in range(d)]

        def pack(fns):
            def g(x, xi):
                cols = [np.real(np.asarray(f(x, xi))) for f in fns]
                return np.stack(cols, axis=-1)
            return g

        def unit2(i, j):
            e = [0] * d
            e[i] += 1
            e[j] += 1
            return tuple(e)

        def packmat(kind):
            fns = {}
            for i in range(d):
                for j in range(d):
                    if kind == "xx":
                        fns[i, j] = sym.term_derivative(0, unit2(i, j), zero)
                    elif kind == "xixi":
                        fns[i, j] = sym.term_derivative(0, zero, unit2(i, j))
                    else:
                        fns[i, j] = sym.term_derivative(0, unit(i), unit(j))

            def h(x, xi):
                rows = [np.stack([np.real(np.asarray(fns[i, j](x, xi)))
                                  for j in range(d)], axis=-1) for i in range(d)]
                return np.stack(rows, axis=-2)
            return h

        return cls(d, lambda x, xi: np.real(np.asarray(val(x, xi))),
                   pack(dx), pack(dxi), packmat("xx"), packmat("xxi"),
                   packmat("xixi"))


@dataclass
class Trajectory:
    times: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    action: np.ndarray
    energy_drift: float


def flow_step(h, state, dt, steps, drift_tol=1e-8):
    """RK4 integration of xdot = dH/dxi, xidot = -dH/dx with the action
    integral accumulated inside the same stages."""
    d = h.dim
    x0, _ = as_points(state[0], d)
    xi0, _ = as_points(state[1], d)
    x, xi = x0[0].copy(), xi0[0].copy()
    a = 0.0
    times = [0.0]
    xs, xis, acts = [x.copy()], [xi.copy()], [0.0]

    def rhs(x, xi):
        gx = h.grad_x(x, xi)
        gxi = h.grad_xi(x, xi)
        da = float(np.dot(xi, gxi) - h.value(x, xi))
        return gxi, -gx, da

    for n in range(steps):
        k1 = rhs(x, xi)
        k2 = rhs(x + 0.5 * dt * k1[0], xi + 0.5 * dt * k1[1])
        k3 = rhs(x + 0.5 * dt * k2[0], xi + 0.5 * dt * k2[1])
        k4 = rhs(x + dt * k3[0], xi + dt * k3[1])
        x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xi = xi + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        a = a + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        times.append((n + 1) * dt)
        xs.append(x.copy())
        xis.append(xi.copy())
        acts.append(a)

    xs, xis = np.array(xs), np.array(xis)
    e = np.array([float(h.value(xx, kk)) for xx, kk in zip(xs, xis)])
    drift = float(np.max(np.abs(e - e[0])))
    if drift > 10.0 * drift_tol * max(1.0, abs(steps * dt)):
        raise FlowError(f"energy drift {drift:.3e} beyond tolerance")
    return Trajectory(times=np.array(times), xs=xs, xis=xis,
                      action=np.array(acts), energy_drift=drift)


# ---------------------------------------------------------------------------
# Batched 1-d characteristics with variational Jacobian
# ---------------------------------------------------------------------------

def _h1(h):
    """Scalar-argument views of a d=1 Hamiltonian for batched arrays."""
    def wrap(f):
        def g(x, xi):
            v = f(x[..., None], xi[..., None])
            return np.asarray(v).reshape(np.shape(x))
        return g
    return (wrap(h.value), wrap(h.grad_x), wrap(h.grad_xi),
            wrap(h.hess_xx), wrap(h.hess_x_xi), wrap(h.hess_xi_xi))


def _shoot_bundle(h1, x0, xi, t_target, dt_int, a1_fn=None):
    """Integrate the batch (x0, xi) from 0 to t_target.

    Returns X, Xi, action, jac = dX/dx0 and the accumulated integral of
    a1 along each characteristic (zero array when a1_fn is None).
    """
    val, gx, gxi, hxx, hxxi, hkk = h1
    steps = max(1, int(np.ceil(abs(t_target) / dt_int)))
    dt = t_target / steps
    x = np.array(x0, dtype=float)
    k = np.array(xi, dtype=float)
    act = np.zeros_like(x)
    jx = np.ones_like(x)
    jk = np.zeros_like(x)
    ph = np.zeros_like(x)

    def rhs(x, k, jx, jk):
        a = gxi(x, k)
        b = -gx(x, k)
        da = k * a - val(x, k)
        djx = hxxi(x, k) * jx + hkk(x, k) * jk
        djk = -(hxx(x, k) * jx + hxxi(x, k) * jk)
        dph = a1_fn(x, k) if a1_fn is not None else 0.0
        return a, b, da, djx, djk, dph

    for _ in range(steps):
        k1 = rhs(x, k, jx, jk)
        k2 = rhs(x + 0.5 * dt * k1[0], k + 0.5 * dt * k1[1],
                 jx + 0.5 * dt * k1[3], jk + 0.5 * dt * k1[4])
        k3 = rhs(x + 0.5 * dt * k2[0], k + 0.5 * dt * k2[1],
                 jx + 0.5 * dt * k2[3], jk + 0.5 * dt * k2[4])
        k4 = rhs(x + dt * k3[0], k + dt * k3[1],
                 jx + dt * k3[3], jk + dt * k3[4])
        x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        k = k + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        act = act + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        jx = jx + dt / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        jk = jk + dt / 6.0 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
        ph = ph + dt / 6.0 * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5])
    return x, k, act, jx, ph


@dataclass
class PhaseSolution:
    """Phase phi = x xi + phi_T on a (t, x, xi) grid, with flow byproducts.

    xi columns beyond n_primary are ghost nodes at xi + 2 pi, solved
    independently for the periodicity check.
    """
    horizon: float
    t_grid: np.ndarray
    x_grid: np.ndarray
    xi_grid: np.ndarray
    n_primary: int
    phi: np.ndarray
    gradx: np.ndarray
    jac: np.ndarray
    foot: np.ndarray
    hamiltonian: object
    requested_horizon: float = 0.0
    newton_iters_max: int = 0

    @property
    def phi_t_part(self):
        return self.phi - self.x_grid[None, :, None] * self.xi_grid[None, None, :]

    def slice_index(self, t, tol=1e-9):
        hits = np.nonzero(np.abs(self.t_grid - t) <= tol)[0]
        if len(hits) != 1:
            raise ValueError(f"t={t} is not a solved time slice")
        return int(hits[0])

    def residual_report(self, max_spacing=None):
        """Max |d_t phi + H(x, grad_x phi)| with centered differences in t.

        With max_spacing set, only interior slices whose neighbours are
        that close contribute; this pairs with cluster-style time grids
        where tight triples surround a few probe times.
        """
        if len(self.t_grid) < 3:
            return {"max_residual": float("nan"), "slices_used": 0}
        gaps_l = np.diff(self.t_grid)[:-1]
        gaps_r = np.diff(self.t_grid)[1:]
        keep = np.ones(len(self.t_grid) - 2, dtype=bool)
        if max_spacing is not None:
            keep = (gaps_l <= max_spacing) & (gaps_r <= max_spacing)
        if not np.any(keep):
            return {"max_residual": float("nan"), "slices_used": 0}
        worst = 0.0
        for j in np.nonzero(keep)[0]:
            i = j + 1
            dphi = (self.phi[i + 1] - self.phi[i - 1]) / (self.t_grid[i + 1]
                                                          - self.t_grid[i - 1])
            xx = np.broadcast_to(self.x_grid[:, None, None], dphi.shape + (1,))
            kk = self.gradx[i][..., None]
            hv = self.hamiltonian.value(xx, kk)
            worst = max(worst, float(np.max(np.abs(dphi + hv))))
        return {"max_residual": worst, "slices_used": int(keep.sum())}

    def initial_condition_error(self):
        i0 = self.slice_index(0.0)
        target = self.x_grid[:, None] * self.xi_grid[None, :]
        return float(np.max(np.abs(self.phi[i0] - target)))


def solve_hamilton_jacobi(h, horizon, x_grid, xi_grid, time_slices=20,
                          dt_int=1e-3, with_ghosts=True, newton_tol=1e-10,
                          max_newton=50, jac_min=0.05, auto_shrink=True,
                          max_shrink=4, t_grid=None):
    """Short-time phase by characteristic shooting and Newton inversion.

    Initial momentum equals xi; phi(t, x, xi) = x0 xi + action along the
    characteristic that reaches x at time t. Caustics (Jacobian below
    jac_min) or Newton failures optionally shrink the horizon. An explicit
    t_grid (sorted, containing 0) overrides the uniform slicing; cluster
    grids keep the PDE-residual differencing cheap and tight.
    """
    if h.dim != 1:
        raise NotImplementedError("phase solver is one-dimensional")
    x_grid = np.asarray(x_grid, dtype=float)
    xi_primary = np.asarray(xi_grid, dtype=float)
    xi_all = np.concatenate([xi_primary, xi_primary + TWO_PI]) if with_ghosts \
        else xi_primary
    h1 = _h1(h)
    requested = float(horizon)
    base_grid = np.linspace(-requested, requested, 2 * time_slices + 1) \
        if t_grid is None else np.asarray(t_grid, dtype=float)
    if not np.any(base_grid == 0.0):
        raise ValueError("time grid must contain 0")

    for attempt in range(max_shrink + 1):
        shrink = 2.0 ** attempt
        try:
            sol = _solve_hj_fixed(h, h1, base_grid / shrink, x_grid, xi_all,
                                  len(xi_primary), dt_int, newton_tol,
                                  max_newton, jac_min)
        except CausticError:
            if not auto_shrink or attempt == max_shrink:
                raise
            continue
        # momentum displacement must stay below the dual-lattice gap
        disp = np.max(np.abs(sol.gradx - xi_all[None, None, :]))
        if disp < 0.98 * TWO_PI:
            sol.requested_horizon = requested
            return sol
        if not auto_shrink or attempt == max_shrink:
            raise CausticError("phase gradient displacement reached 2 pi",
                               sol.horizon)
    raise CausticError("horizon shrink failed", 0.0)


def _solve_hj_fixed(h, h1, t_grid, x_grid, xi_all, n_primary, dt_int,
                    newton_tol, max_newton, jac_min):
    nx, nxi = len(x_grid), len(xi_all)
    t_grid = np.sort(t_grid)
    xt = np.broadcast_to(x_grid[:, None], (nx, nxi)).reshape(-1)
    kk = np.broadcast_to(xi_all[None, :], (nx, nxi)).reshape(-1)

    phi = np.empty((len(t_grid), nx, nxi))
    gradx = np.empty_like(phi)
    jac = np.ones_like(phi)
    foot = np.empty_like(phi)
    i0 = int(np.nonzero(t_grid == 0.0)[0][0])
    phi[i0] = x_grid[:, None] * xi_all[None, :]
    gradx[i0] = xi_all[None, :]
    foot[i0] = x_grid[:, None]
    iters_max = 0

    for direction in (1, -1):
        x0 = xt.copy()
        order = range(i0 + 1, len(t_grid)) if direction == 1 else range(i0 - 1, -1, -1)
        prev = 0.0
        for it in order:
            t = t_grid[it]
            converged = False
            for itn in range(max_newton):
                X, K, act, jx, _ = _shoot_bundle(h1, x0, kk, t, dt_int)
                if np.min(np.abs(jx)) < jac_min:
                    raise CausticError("characteristic Jacobian collapsed", abs(prev))
                resid = X - xt
                if np.max(np.abs(resid)) < newton_tol:
                    converged = True
                    iters_max = max(iters_max, itn)
                    break
                x0 = x0 - resid / jx
            if not converged:
                raise CausticError("Newton inversion did not converge", abs(prev))
            phi[it] = (x0 * kk + act).reshape(nx, nxi)
            gradx[it] = K.reshape(nx, nxi)
            jac[it] = jx.reshape(nx, nxi)
            foot[it] = x0.reshape(nx, nxi)
            prev = t

    return PhaseSolution(horizon=float(np.max(np.abs(t_grid))), t_grid=t_grid,
                         x_grid=x_grid, xi_grid=xi_all, n_primary=n_primary,
                         phi=phi, gradx=gradx, jac=jac, foot=foot,
                         hamiltonian=h, newton_iters_max=iters_max)


def check_phase_periodicity(ps):
    """Max |phi_T(xi + 2 pi) - phi_T(xi)| using the ghost columns."""
    n = ps.n_primary
    if ps.xi_grid.shape[0] == n:
        raise ValueError("phase was solved without ghost nodes")
    pt = ps.phi_t_part
    return {"max_violation": float(np.max(np.abs(pt[..., n:] - pt[..., :n])))}


# ---------------------------------------------------------------------------
# Transport amplitude and parametrix assembly
# ---------------------------------------------------------------------------

@dataclass
class ParametrixAmplitude:
    """Leading kernel amplitude mu_0 in transported form.

    mu_0(t, x, y, xi) = jac^{-1/2} e^{i int a1~} chi(x0) chi(y)
    c((x0 + y)/2, xi) with x0 the characteristic foot point of (t, x).
    """
    ps: object
    chi: object
    c_fn: object
    transported: bool = False
    extra_phase: np.ndarray = None
    mu1_depth: int = 1

    def mu0(self, t_idx, y_points):
        if not self.transported:
            raise RuntimeError("amplitude not transported yet")
        ps = self.ps
        n = ps.n_primary
        foot = ps.foot[t_idx][:, :n]
        amp = ps.jac[t_idx][:, :n] ** (-0.5) * np.asarray(self.chi(foot))
        if self.extra_phase is not None:
            amp = amp * self.extra_phase[t_idx]
        y = np.asarray(y_points, dtype=float)
        chi_y = np.asarray(self.chi(y))
        nx, ny = foot.shape[0], len(y)
        out = np.empty((nx, ny, n), dtype=complex)
        for m in range(n):
            s = 0.5 * (foot[:, m][:, None] + y[None, :])
            out[:, :, m] = self.c_fn(s, m) * amp[:, m][:, None] * chi_y[None, :]
        return out

    def initial_check(self, y_points):
        """Round-off distance of mu_0(0, x, y, xi) from chi chi c."""
        ps = self.ps
        i0 = ps.slice_index(0.0)
        n = ps.n_primary
        y = np.asarray(y_points, dtype=float)
        direct = np.empty((len(ps.x_grid), len(y), n), dtype=complex)
        cx = np.asarray(self.chi(ps.x_grid))
        cy = np.asarray(self.chi(y))
        for m in range(n):
            s = 0.5 * (ps.x_grid[:, None] + y[None, :])
            direct[:, :, m] = self.c_fn(s, m) * cx[:, None] * cy[None, :]
        return float(np.max(np.abs(self.mu0(i0, y) - direct)))


def initial_amplitude(ps, chi, c_fn):
    return ParametrixAmplitude(ps=ps, chi=chi, c_fn=c_fn)


def solve_transport_leading(h, ps, init, a1_term=None, include_subprincipal=None):
    """Transport mu_0 along F = (grad_xi a0)(x, grad_x phi).

    The half-divergence damping equals jac^{-1/2} along each
    characteristic, so the solved phase already carries the homogeneous
    solution; a nonzero first-order symbol term adds the oscillatory
    factor exp(i int a1(x, grad_x phi) dtau). For a real leading symbol in
    Weyl quantisation with no first-order term the subprincipal
    contribution vanishes identically.
    """
    if include_subprincipal is None:
        include_subprincipal = a1_term is not None
    out = ParametrixAmplitude(ps=ps, chi=init.chi, c_fn=init.c_fn, transported=True)
    lo, hi = ps.x_grid.min(), ps.x_grid.max()
    sup = getattr(init.chi, "support", (lo, hi))
    if sup[0] < lo - 1e-9 or sup[1] > hi + 1e-9:
        raise ValueError("cutoff support leaves the solved x grid")
    if include_subprincipal and a1_term is not None:
        h1 = _h1(h)

        def a1_fn(x, k):
            return np.real(np.asarray(a1_term(x[..., None], k[..., None]))).reshape(np.shape(x))

        n = ps.n_primary
        nx = len(ps.x_grid)
        phase = np.zeros((len(ps.t_grid), nx, n))
        kk = np.broadcast_to(ps.xi_grid[:n][None, :], (nx, n)).reshape(-1)
        for it, t in enumerate(ps.t_grid):
            if t == 0.0:
                continue
            x0 = ps.foot[it][:, :n].reshape(-1)
            _, _, _, _, ph = _shoot_bundle(h1, x0, kk, t, 1e-3, a1_fn=a1_fn)
            phase[it] = ph.reshape(nx, n)
        out.extra_phase = np.exp(1j * phase)
    return out


def build_parametrix(mu, ps, t, lattice, eps, grid):
    """Assemble the oscillatory-kernel matrix at one solved time slice."""
    if lattice.dim != 1:
        raise NotImplementedError("parametrix assembly is one-dimensional")
    t_idx = ps.slice_index(t)
    xpts = lattice.points[:, 0]
    if len(xpts) != len(ps.x_grid) or np.max(np.abs(xpts - ps.x_grid)) > 1e-9:
        raise ValueError("phase grid must coincide with the lattice points")
    n = ps.n_primary
    if n != grid.size or np.max(np.abs(ps.xi_grid[:n] - grid.nodes[:, 0])) > 1e-12:
        raise ValueError("phase momentum grid must match the torus grid")
    phase_x = np.exp(-1j * ps.phi[t_idx][:, :n] / eps)  # (nx, M)
    phase_y = np.exp(1j * xpts[:, None] * ps.xi_grid[None, :n] / eps)  # (ny, M)
    out = np.empty((len(xpts), len(xpts)), dtype=complex)
    block = max(1, (1 << 22) // (len(xpts) * n))
    for start in range(0, len(xpts), block):
        ych = xpts[start:start + block]
        amp = mu.mu0(t_idx, ych)  # (nx, ny_chunk, M)
        out[:, start:start + block] = np.einsum(
            "im,jm,ijm->ij", phase_x, phase_y[start:start + block], amp) / grid.size
    # same aliasing policy as the quantisation: the M-node kernel cannot
    # carry couplings past half the grid, so those entries are zeroed
    kr = (grid.nodes_per_axis - 1) // 2
    ii = np.arange(len(xpts))
    out[np.abs(ii[None, :] - ii[:, None]) > kr] = 0.0
    return out


def weyl_symbol_from_matrix(entries, lattice, grid):
    """Invert the Weyl kernel relation on the box (one dimension).

    Entry (x, y) equals the Fourier coefficient e_k(s) of the symbol at
    midpoint s = (x+y)/2, k = (y-x)/eps, so each mode is known only on
    midpoints of matching parity. Modes are spline-filled onto the full
    half-step grid, which leaves the lattice data untouched (an even node
    count aliases within one parity class) while giving a smooth symbol
    between lattice midpoints.
    """
    from scipy.interpolate import CubicSpline
    if lattice.dim != 1:
        raise NotImplementedError("symbol inversion is one-dimensional")
    if grid.nodes_per_axis % 2:
        raise ValueError("symbol inversion needs an even torus grid")
    N = lattice.size
    eps = lattice.spacing
    nodes = grid.nodes[:, 0]
    s_count = 2 * N - 1
    s_coords = 0.5 * eps * (np.arange(s_count) - (N - 1))
    kmax = min(N - 1, (grid.nodes_per_axis - 1) // 2)
    modes = np.zeros((2 * kmax + 1, s_count), dtype=complex)
    for k in range(-kmax, kmax + 1):
        jj = np.arange(max(0, k), min(N - 1, N - 1 + k) + 1)
        ii = jj - k
        s_idx = ii + jj  # native midpoints for this mode, spacing eps
        vals = entries[ii, jj]
        if len(s_idx) >= 4:
            sp_k = CubicSpline(s_coords[s_idx], vals)
            modes[k + kmax] = sp_k(s_coords)
            modes[k + kmax, s_idx] = vals
        else:
            modes[k + kmax, s_idx] = vals
    phases = np.exp(-1j * np.outer(np.arange(-kmax, kmax + 1), nodes))
    table = modes.T @ phases
    return s_coords, table


def parametrix_error_sweep(sym, f, t_list, eps_list, halfwidth, torus_base=64,
                           chi=None, time_slices=None, dt_int=2.5e-3,
                           symbol_mode="exact", amplitude_depth=1,
                           scale_torus=True):
    """Spectral-norm error of the parametrix against the exact evolution.

    Per (t, eps): || U(t) - e^{i t P/eps} f(P) ||. Only the leading
    amplitude is available; the first correction needs the inhomogeneity
    of the next transport equation, which is not reconstructed here.

    The kernel of f(P) has order-one spatial width, so the momentum grid
    carrying the oscillatory integral must resolve couplings out to a
    fixed physical distance: the node count scales like 1/eps.
    """
    from scipy.interpolate import CubicSpline
    from .core import LatticeBox, TorusGrid
    from .quantize import build_operator
    from .spectral import apply_function_exact, eigendecompose, propagator
    from .util import fit_loglog_slope, spectral_norm

    if amplitude_depth != 1:
        raise NotImplementedError(
            "second amplitude term needs the next transport inhomogeneity")
    if chi is None:
        from .semiclassics import BumpFunction
        chi = BumpFunction(0.0, 0.9 * halfwidth, plateau=0.75)
    h = Hamiltonian.from_symbol(sym)
    t_max = max(abs(t) for t in t_list) or 0.05
    if time_slices is None:
        time_slices = max(4, int(round(t_max / 0.0125)))
    a1_term = sym.terms[1].fn if sym.num_terms > 1 else None
    eps_ref = max(eps_list)

    rows = []
    sup_err = []
    for eps in eps_list:
        m_nodes = torus_base
        if scale_torus:
            m_nodes = int(np.ceil(torus_base * eps_ref / eps / 2.0)) * 2
        grid = TorusGrid(1, m_nodes)
        box = LatticeBox(1, eps, halfwidth)
        op = build_operator(sym, 0.5, box, eps, grid)
        spec = eigendecompose(op)
        fp = apply_function_exact(spec, f)
        if symbol_mode == "exact":
            s_coords, table = weyl_symbol_from_matrix(fp, box, grid)
            splines = [CubicSpline(s_coords, table[:, m]) for m in range(grid.size)]
            lo, hi = s_coords[0], s_coords[-1]

            def c_fn(s, m, splines=splines, lo=lo, hi=hi):
                return splines[m](np.clip(s, lo, hi))
        else:
            def c_fn(s, m, eps=eps):
                pts = s[..., None]
                xi = np.broadcast_to(grid.nodes[m], pts.shape)
                a0 = np.real(np.asarray(sym.terms[0].fn(pts, xi)))
                out = np.asarray(f(a0), dtype=complex)
                if sym.num_terms > 1:
                    fp1 = f.derivative(1)(a0)
                    out = out + eps * fp1 * np.real(np.asarray(sym.terms[1].fn(pts, xi)))
                return out

        ps = solve_hamilton_jacobi(h, t_max, box.points[:, 0], grid.nodes[:, 0],
                                   time_slices=time_slices, dt_int=dt_int,
                                   with_ghosts=False)
        # land exactly on the requested times
        for t in t_list:
            ps.slice_index(t)
        mu = solve_transport_leading(h, ps, initial_amplitude(ps, chi, c_fn),
                                     a1_term=a1_term)
        errs = {}
        for t in t_list:
            u = build_parametrix(mu, ps, t, box, eps, grid)
            exact = propagator(spec, t, eps) @ fp
            errs[t] = spectral_norm(u - exact)
        # internal t = 0 consistency: the assembled kernel against the
        # directly quantised initial data (interpolation + quadrature only)
        u0 = build_parametrix(mu, ps, 0.0, box, eps, grid)
        dchi = np.asarray(chi(box.points[:, 0]))
        if symbol_mode == "exact":
            ref0 = dchi[:, None] * fp * dchi[None, :]
        else:
            from .core import Symbol, SymbolTerm

            def trunc_fn(x, xi, eps=eps):
                a0 = np.real(np.asarray(sym.terms[0].fn(x, xi)))
                out = np.asarray(f(a0), dtype=complex)
                if sym.num_terms > 1:
                    out = out + eps * f.derivative(1)(a0) \
                        * np.asarray(sym.terms[1].fn(x, xi))
                return out

            csym = Symbol(1, [SymbolTerm(trunc_fn)], name="c_trunc")
            opc = build_operator(csym, 0.5, box, eps, grid).entries
            ref0 = dchi[:, None] * opc * dchi[None, :]
        kr = (grid.nodes_per_axis - 1) // 2
        ii = np.arange(box.size)
        ref0 = np.where(np.abs(ii[None, :] - ii[:, None]) > kr, 0.0, ref0)
        consistency0 = spectral_norm(u0 - ref0)
        rows.append({"eps": eps, "errors": errs, "sup_error": max(errs.values()),
                     "consistency0": consistency0,
                     "u_norm_at_tmax": spectral_norm(
                         build_parametrix(mu, ps, t_list[-1], box, eps, grid))})
        sup_err.append(max(errs.values()))
    slope = fit_loglog_slope(eps_list, sup_err) if len(eps_list) >= 2 else float("nan")
    return {"rows": rows, "slope": slope}
