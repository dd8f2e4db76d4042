"""Time integration of radial perturbations about the steady state.

State variables are the density perturbation q = rho - rho_tilde, the radial
velocity component u (the field is u(r)*rhat), and the potential perturbation
phi with Lap(phi) = q.  The steady pair enters only through its density
profile: the steady potential cancels against the background enthalpy
gradient, so the flat state (q, u) = (0, 0) is an exact equilibrium of the
discrete system, not just an approximate one.

Dynamics, written with the linearization about rho_tilde on the left:

    q_t + div(rho_tilde u) = -div(q u)
    u_t + d_r(h'(rho_tilde) q) - nu(rho_tilde) d_r(div u) - d_r(phi) = f
    Lap(phi) = q,     h'(s) = gamma s**(gamma-2),   nu(s) = (2 mu + lambda)/s

where f is assembled as the exact difference between the primitive momentum
equation and the linear operator above (advection, the enthalpy remainder
h(rho) - h(rho_tilde) - h'(rho_tilde) q, and the density dependence of the
viscous coefficient).

Discretization notes:

* the continuity update is in flux form on the dual cells, so the discrete
  mass  sum_i w_i q_i  telescopes exactly to the wall fluxes, which vanish
  with u(R) = u(R_max) = 0;
* the stiff viscous term is advanced by Crank-Nicolson (tridiagonal solves),
  everything else by a Heun predictor-corrector; the combination is second
  order in time;
* an outer sponge layer relaxes u toward zero and q toward its layer mean --
  relaxing toward the mean rather than zero keeps the sponge exactly
  mass-neutral.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import energy as energy_mod
from .elliptic import solve_poisson_neumann
from .errors import (IterationError, ParameterError, SimulationAbort,
                     VacuumError)
from .grids import FluidParams, RadialField, RadialGrid, _derivative_matrix
from .steady import SteadyState

INIT_KINDS = ("standard", "density_only", "velocity_only")
MODES = ("nonlinear", "linear")
CFL_SAFETY = 0.4
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class PerturbationState:
    """Perturbation unknowns at one instant; u vanishes at both walls."""

    q: RadialField
    u: RadialField
    phi: RadialField
    t: float


@dataclass(frozen=True)
class Tendencies:
    """Equation-evaluated time derivatives (never finite differences in t).

    q_t comes from the continuity equation, phi_t from Lap(phi_t) = q_t, and
    q_tt from differentiating continuity:  q_tt = -div(q_t u + rho u_t).
    """

    q_t: RadialField
    u_t: RadialField
    phi_t: RadialField
    q_tt: RadialField


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs; dt, sponge width and rate accept 'auto'."""

    params: FluidParams
    grid: RadialGrid
    steady: SteadyState
    delta: float = 1e-3
    t_end: float = 10.0
    dt: float | str = "auto"
    sponge_width: float | str = "auto"
    sponge_rate: float | str = "auto"
    output_stride: int = 50
    init_kind: str = "standard"
    mode: str = "nonlinear"
    pressure: bool = True
    coupling: bool = True
    viscosity: bool = True
    margin: float = 2.0
    vacuum_floor: float = 0.1
    checkpoint_dir: str | None = None
    digest_extra: str = ""

    def __post_init__(self):
        if self.delta < 0.0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if self.t_end <= 0.0:
            raise ParameterError(f"t_end must be > 0, got {self.t_end}")
        if self.output_stride < 1:
            raise ParameterError("output_stride must be >= 1")
        if self.init_kind not in INIT_KINDS:
            raise ParameterError(f"unknown init_kind {self.init_kind!r}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if not (0.0 < self.vacuum_floor < 1.0):
            raise ParameterError("vacuum_floor must lie in (0, 1)")


def _smooth_bump(r: np.ndarray, center: float, width: float) -> np.ndarray:
    """Compactly supported C-infinity bump, 1 at the center, 0 for |x| >= 1."""
    x = (r - center) / width
    out = np.zeros_like(r)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


# initial-data geometry as fractions of the shell width: (center, width) for
# the positive density bump, the compensating negative shell, and the
# velocity bump; everything vanishes identically near both walls
_BUMP_GEOMETRY = {
    "q_pos": (0.20, 0.16),
    "q_neg": (0.45, 0.18),
    "u": (0.30, 0.20),
}


class _Workspace:
    """Per-run precomputation: operators, steady coefficients, sponge mask."""

    def __init__(self, config: SimConfig):
        grid = config.grid
        params = config.params
        self.grid = grid
        self.params = params
        self.r = grid.r
        self.cv = grid.weights / (4.0 * math.pi)  # dual-cell volumes / 4pi
        self.d1 = _derivative_matrix(grid, 1)
        self.rho_s = config.steady.rho_tilde.values
        self.hp_s = params.enthalpy_weight(self.rho_s)
        self.nu_s = params.longitudinal_viscosity / self.rho_s
        self.visc = _viscous_rows(grid)
        self.mode = config.mode
        self.pressure = config.pressure
        self.coupling = config.coupling
        self.viscosity = config.viscosity
        self.vacuum_min = config.vacuum_floor * params.c_star

        width = config.sponge_width
        if width == "auto":
            width = 0.2 * (grid.r_outer - grid.r_inner)
        rate = config.sponge_rate
        cs_max = float(np.max(params.sound_speed(self.rho_s)))
        dt_acoustic = grid.min_spacing / cs_max
        if rate == "auto":
            # inverse acoustic crossing time of the layer; a grid-scale rate
            # would turn the sponge into a reflective wall
            rate = cs_max / width if width > 0.0 else 0.0
        self.sponge_rate = float(rate)
        if self.sponge_rate > 0.0 and width > 0.0:
            from .steady import _smoothstep
            edge = grid.r_outer - width
            self.sponge_mask = _smoothstep((self.r - edge) / width)
        else:
            self.sponge_mask = np.zeros_like(self.r)
        self.sponge_on = self.sponge_rate > 0.0 and np.any(self.sponge_mask > 0.0)
        self.dt_acoustic = dt_acoustic

    def rho(self, q: np.ndarray) -> np.ndarray:
        rho = self.rho_s + q
        if float(np.min(rho)) <= self.vacuum_min:
            raise VacuumError(
                f"density fell to {float(np.min(rho)):.3e}, below the vacuum guard")
        return rho

    def flux_divergence(self, g: np.ndarray) -> np.ndarray:
        """Conservative divergence of the radial flux density g = r^2 * F:
        returns (1/r^2) d_r(g) on the dual cells, with the physical wall
        fluxes g[0], g[-1] as end closures.  sum_i w_i out_i telescopes to
        4*pi*(g[0] - g[-1]) exactly."""
        mid = 0.5 * (g[1:] + g[:-1])
        out = np.empty_like(g)
        out[1:-1] = (mid[1:] - mid[:-1]) / self.cv[1:-1]
        out[0] = (mid[0] - g[0]) / self.cv[0]
        out[-1] = (g[-1] - mid[-1]) / self.cv[-1]
        return out

    def rhs(self, q: np.ndarray, u: np.ndarray, phi: np.ndarray):
        """Continuity and momentum tendencies (sponge not included)."""
        nonlinear = self.mode == "nonlinear"
        rho = self.rho(q)  # vacuum guard in both modes
        carrier = rho if nonlinear else self.rho_s
        q_t = -self.flux_divergence(self.r**2 * carrier * u)

        u_t = np.zeros_like(u)
        if self.pressure:
            if nonlinear:
                u_t -= self.d1 @ self.params.enthalpy_increment(self.rho_s, q)
            else:
                u_t -= self.d1 @ (self.hp_s * q)
        if self.viscosity:
            lap_u = _apply_rows(self.visc, u)
            coef = self.params.longitudinal_viscosity / rho if nonlinear else self.nu_s
            u_t += coef * lap_u
        if self.coupling:
            u_t += self.d1 @ phi
        if nonlinear:
            u_t -= u * (self.d1 @ u)
        u_t[0] = 0.0
        u_t[-1] = 0.0
        return q_t, u_t

    def sponge(self, q: np.ndarray, u: np.ndarray):
        """Mass-neutral relaxation tendencies in the outer layer."""
        if not self.sponge_on:
            z = np.zeros_like(q)
            return z, z
        s = self.sponge_mask
        w = self.grid.weights
        wsum = float(np.dot(w, s))
        mean = float(np.dot(w, s * q)) / wsum
        dq = -self.sponge_rate * s * (q - mean)
        du = -self.sponge_rate * s * u
        return dq, du


def _viscous_rows(grid: RadialGrid) -> np.ndarray:
    """Banded rows of d_r(div u) = u'' + (2/r) u' - 2 u/r^2 with zero rows at
    the walls (u is pinned there)."""
    key = "viscous_rows"
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    r = grid.r
    n = r.size
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    denom = hm + hp
    rmid = r[1:-1]
    ab = np.zeros((3, n))
    ab[2, :-2] = 2.0 / (hm * denom) + (2.0 / rmid) * (-hp / (hm * denom))
    ab[1, 1:-1] = -2.0 / (hm * hp) + (2.0 / rmid) * ((hp - hm) / (hm * hp)) \
        - 2.0 / rmid**2
    ab[0, 2:] = 2.0 / (hp * denom) + (2.0 / rmid) * (hm / (hp * denom))
    ab.flags.writeable = False
    grid._cache[key] = ab
    return ab


def _apply_rows(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


def compute_rhs(state: PerturbationState, steady: SteadyState,
                params: FluidParams, *, mode: str = "nonlinear",
                pressure: bool = True, coupling: bool = True,
                viscosity: bool = True) -> Tendencies:
    """Evaluate the full tendency bundle (q_t, u_t, phi_t, q_tt) from the
    equations; used both by the stepper stages and by the energy functionals.
    """
    cfg = SimConfig(params=params, grid=state.q.grid, steady=steady,
                    mode=mode, pressure=pressure, coupling=coupling,
                    viscosity=viscosity, sponge_rate=0.0, sponge_width=0.0)
    ws = _Workspace(cfg)
    return _tendencies(ws, state)


def _tendencies(ws: _Workspace, state: PerturbationState) -> Tendencies:
    q, u, phi = state.q.values, state.u.values, state.phi.values
    q_t, u_t = ws.rhs(q, u, phi)
    grid = ws.grid
    phi_t = solve_poisson_neumann(RadialField(q_t, grid)).phi
    if ws.mode == "nonlinear":
        rho = ws.rho_s + q
        g = ws.r**2 * (q_t * u + rho * u_t)
    else:
        g = ws.r**2 * (ws.rho_s * u_t)
    q_tt = -ws.flux_divergence(g)
    return Tendencies(q_t=RadialField(q_t, grid), u_t=RadialField(u_t, grid),
                      phi_t=phi_t, q_tt=RadialField(q_tt, grid))


def init_perturbation(kind: str, delta: float, grid: RadialGrid,
                      steady: SteadyState, params: FluidParams,
                      mode: str = "nonlinear", pressure: bool = True,
                      coupling: bool = True,
                      viscosity: bool = True) -> PerturbationState:
    """Smooth, compactly supported initial data with exactly zero discrete
    mass and amplitude scaled so the energy functional at t = 0 equals delta.

    The density part is a positive bump plus a matched negative shell; the
    matching constant is computed against the discrete quadrature, so the two
    sums cancel exactly.  Both parts and the velocity bump vanish identically
    near the walls.
    """
    if kind not in INIT_KINDS:
        raise ParameterError(f"unknown init_kind {kind!r}")
    if delta < 0.0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    from .steady import effective_length
    r = grid.r
    length = effective_length(grid.r_inner, grid.r_outer)

    def loc(frac):
        return grid.r_inner + frac * length

    q_shape = np.zeros_like(r)
    u_shape = np.zeros_like(r)
    if kind in ("standard", "density_only"):
        cp, wp = _BUMP_GEOMETRY["q_pos"]
        cn, wn = _BUMP_GEOMETRY["q_neg"]
        pos = _smooth_bump(r, loc(cp), wp * length)
        neg = _smooth_bump(r, loc(cn), wn * length)
        match = float(np.dot(grid.weights, pos)) / float(np.dot(grid.weights, neg))
        q_shape = pos - match * neg
    if kind in ("standard", "velocity_only"):
        cu, wu = _BUMP_GEOMETRY["u"]
        u_shape = _smooth_bump(r, loc(cu), wu * length)

    def state_at(a: float) -> PerturbationState:
        q = RadialField(a * q_shape, grid)
        u = RadialField(a * u_shape, grid)
        phi = solve_poisson_neumann(q).phi
        return PerturbationState(q=q, u=u, phi=phi, t=0.0)

    if delta == 0.0:
        return state_at(0.0)

    def energy_of(a: float) -> float:
        st = state_at(a)
        tend = compute_rhs(st, steady, params, mode=mode, pressure=pressure,
                           coupling=coupling, viscosity=viscosity)
        return energy_mod.energy_E(st, tend, grid)

    probe = 1e-6
    amp = delta * probe / energy_of(probe)
    for _ in range(40):
        e = energy_of(amp)
        if abs(e - delta) <= 1e-12 * delta:
            break
        amp *= delta / e
    else:
        if abs(energy_of(amp) - delta) > 1e-9 * delta:
            raise IterationError("could not scale initial data to the target energy")
    return state_at(amp)


def _resolve_dt(config: SimConfig, state: PerturbationState,
                ws: _Workspace) -> float:
    rho = ws.rho_s + state.q.values
    speed = ws.params.sound_speed(rho) + np.abs(state.u.values)
    limit = config.grid.min_spacing / float(np.max(speed))
    if config.dt == "auto":
        dt = CFL_SAFETY * limit
    else:
        dt = float(config.dt)
        if dt <= 0.0:
            raise ParameterError(f"dt must be > 0, got {dt}")
        if dt > CFL_LIMIT * limit:
            raise ParameterError(
                f"dt = {dt:g} violates the acoustic CFL bound {CFL_LIMIT * limit:g}")
    return dt


def _cn_matrix(ws: _Workspace, dt: float) -> np.ndarray:
    """Banded matrix of I - (dt/2) nu(rho_tilde) L with identity wall rows."""
    n = ws.r.size
    ab = np.zeros((3, n))
    factor = 0.5 * dt * ws.nu_s
    ab[0, 1:] = -factor[:-1] * ws.visc[0, 1:]
    ab[1, :] = 1.0 - factor * ws.visc[1, :]
    ab[2, :-1] = -factor[1:] * ws.visc[2, :-1]
    ab[1, 0] = 1.0
    ab[0, 1] = 0.0
    ab[1, -1] = 1.0
    ab[2, -2] = 0.0
    return ab


class _Stepper:
    """One Heun/Crank-Nicolson IMEX step of fixed dt."""

    def __init__(self, config: SimConfig, ws: _Workspace, dt: float):
        self.ws = ws
        self.dt = dt
        self.implicit = config.viscosity
        if self.implicit:
            self.cn = _cn_matrix(ws, dt)

    def _explicit(self, q, u, phi):
        """Tendencies minus the implicitly treated part of the viscous term."""
        ws = self.ws
        q_t, u_t = ws.rhs(q, u, phi)
        if self.implicit:
            u_t = u_t - ws.nu_s * _apply_rows(ws.visc, u)
            u_t[0] = 0.0
            u_t[-1] = 0.0
        sp_q, sp_u = ws.sponge(q, u)
        return q_t + sp_q, u_t + sp_u

    def _solve_u(self, rhs: np.ndarray) -> np.ndarray:
        rhs = rhs.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        if not self.implicit:
            return rhs
        return solve_banded((1, 1), self.cn, rhs)

    def advance(self, state: PerturbationState) -> PerturbationState:
        ws = self.ws
        dt = self.dt
        q0, u0, phi0 = state.q.values, state.u.values, state.phi.values
        vu0 = ws.nu_s * _apply_rows(ws.visc, u0) if self.implicit else 0.0

        eq0, eu0 = self._explicit(q0, u0, phi0)
        u1 = self._solve_u(u0 + dt * eu0 + 0.5 * dt * vu0)
        q1 = q0 + dt * eq0
        phi1 = solve_poisson_neumann(RadialField(q1, ws.grid)).phi.values

        eq1, eu1 = self._explicit(q1, u1, phi1)
        q2 = q0 + 0.5 * dt * (eq0 + eq1)
        u2 = self._solve_u(u0 + 0.5 * dt * (eu0 + eu1) + 0.5 * dt * vu0)
        phi2 = solve_poisson_neumann(RadialField(q2, ws.grid)).phi

        if not (np.all(np.isfinite(q2)) and np.all(np.isfinite(u2))):
            raise VacuumError("non-finite values produced during time step")
        return PerturbationState(q=RadialField(q2, ws.grid),
                                 u=RadialField(u2, ws.grid),
                                 phi=phi2, t=state.t + dt)


def step_imex(state: PerturbationState, dt: float,
              config: SimConfig) -> PerturbationState:
    """Advance one step; dt = 0 returns the state unchanged bit-for-bit."""
    if dt < 0.0 or not math.isfinite(dt):
        raise ParameterError(f"dt must be finite and >= 0, got {dt}")
    if dt == 0.0:
        return state
    ws = _Workspace(config)
    return _Stepper(config, ws, dt).advance(state)


def _default_digest(config: SimConfig) -> str:
    p = config.params
    g = config.grid
    text = "|".join(str(x) for x in (
        p.gamma, p.mu, p.lambda_, p.alpha, p.c_star,
        g.r_inner, g.r_outer, g.n_nodes, config.delta, config.t_end,
        config.dt, config.sponge_width, config.sponge_rate,
        config.output_stride, config.init_kind, config.mode,
        config.pressure, config.coupling, config.viscosity,
        config.digest_extra))
    return hashlib.sha256(text.encode()).hexdigest()


def run_simulation(config: SimConfig) -> "energy_mod.TimeSeries":
    """Advance to t_end, sampling the energy functionals every output_stride
    steps; returns the series with the stability verdict attached.

    Aborts (vacuum or non-finite values) raise SimulationAbort carrying the
    failure time and the partial series.
    """
    ws = _Workspace(config)
    state = init_perturbation(config.init_kind, config.delta, config.grid,
                              config.steady, config.params, mode=config.mode,
                              pressure=config.pressure,
                              coupling=config.coupling,
                              viscosity=config.viscosity)
    dt = _resolve_dt(config, state, ws)
    n_steps = max(1, math.ceil(config.t_end / dt - 1e-12))
    dt = config.t_end / n_steps
    stepper = _Stepper(config, ws, dt)
    c_visc = config.params.longitudinal_viscosity

    recorder = energy_mod.SeriesRecorder(config, c_visc=c_visc, dt=dt,
                                         digest=_default_digest(config))

    def sample(st: PerturbationState):
        tend = _tendencies(ws, st)
        recorder.add(st, tend)

    def maybe_checkpoint(st: PerturbationState, step: int):
        if config.checkpoint_dir is not None:
            from pathlib import Path
            path = Path(config.checkpoint_dir) / f"state_{step:08d}.txt"
            write_checkpoint(st, path)

    sample(state)
    maybe_checkpoint(state, 0)
    try:
        for step in range(1, n_steps + 1):
            state = stepper.advance(state)
            if step % config.output_stride == 0 or step == n_steps:
                sample(state)
                maybe_checkpoint(state, step)
    except VacuumError as exc:
        raise SimulationAbort(str(exc), t_fail=state.t,
                              series=recorder.finish(margin=None)) from exc
    return recorder.finish(margin=config.margin)


def write_checkpoint(state: PerturbationState, path) -> None:
    """Columnar text checkpoint: comment with t, header row, then r q u phi."""
    grid = state.q.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# t {state.t:.17g}\n")
        fh.write("r q u phi\n")
        for r, q, u, p in zip(grid.r, state.q.values, state.u.values,
                              state.phi.values):
            fh.write(f"{r:.17g} {q:.17g} {u:.17g} {p:.17g}\n")


def read_checkpoint(path, grid: RadialGrid) -> PerturbationState:
    """Read a checkpoint written by write_checkpoint onto a matching grid."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        t = float(first.split()[2]) if first.startswith("#") else 0.0
        header = fh.readline().split()
        if header != ["r", "q", "u", "phi"]:
            raise ParameterError(f"unexpected checkpoint header {header}")
        data = np.loadtxt(fh)
    if data.shape[0] != grid.n_nodes:
        raise ParameterError("checkpoint does not match the grid")
    if not np.allclose(data[:, 0], grid.r, rtol=0.0, atol=1e-12):
        raise ParameterError("checkpoint nodes differ from the grid nodes")
    return PerturbationState(q=RadialField(data[:, 1], grid),
                             u=RadialField(data[:, 2], grid),
                             phi=RadialField(data[:, 3], grid), t=t)
