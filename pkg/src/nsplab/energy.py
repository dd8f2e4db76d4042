"""Energy and dissipation functionals, the zero-order energy identity, mass,
and the stability verdict.

The two headline functionals are sums of discrete Sobolev norms of the
perturbation and its equation-evaluated time derivatives:

    E = ||u||_H3 + ||q||_H2 + ||(q_t, u_t)||_H1 + ||grad phi|| + ||grad phi_t||
    D = ||grad u||_H2 + ||grad u_t||_H1 + ||q||_H2 + ||q_t||_H1 + ||q_tt||_L2

kept as plain sums (not root-sum-of-squares); both are reported, and D is
also reported without its ||q_tt|| term since the time-integrated stability
statement can be read either way.  Scalar norms use plain radial derivatives;
vector norms carry the angular metric terms.

The zero-order identity diagnostic is

    d/dt [ 1/2 int ( rho_tilde u^2 + h'(rho_tilde) q^2 + |grad phi|^2 ) ]
        + (2 mu + lambda) ||grad u||^2  ~  0   up to a nonlinear remainder,

evaluated with centered time differences over stored samples (the only place
time differencing is allowed; the functionals themselves never use it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grids import (RadialField, RadialGrid, integrate, radial_derivative,
                    sobolev_norm, vector_gradient_norm,
                    vector_gradient_sobolev_norm, vector_sobolev_norm,
                    weighted_l2_norm)


@dataclass(frozen=True)
class EnergyComponents:
    """The five summands of E, recoverable individually."""

    u_h3: float
    q_h2: float
    qt_ut_h1: float
    grad_phi: float
    grad_phi_t: float

    @property
    def total(self) -> float:
        return self.u_h3 + self.q_h2 + self.qt_ut_h1 + self.grad_phi \
            + self.grad_phi_t


@dataclass(frozen=True)
class DissipationComponents:
    """The five summands of D."""

    grad_u_h2: float
    grad_ut_h1: float
    q_h2: float
    qt_h1: float
    qtt_l2: float

    @property
    def total(self) -> float:
        return self.grad_u_h2 + self.grad_ut_h1 + self.q_h2 + self.qt_h1 \
            + self.qtt_l2

    @property
    def total_no_qtt(self) -> float:
        return self.total - self.qtt_l2


def energy_components(state, tendencies, grid: RadialGrid) -> EnergyComponents:
    pair = math.sqrt(sobolev_norm(tendencies.q_t, 1) ** 2
                     + vector_sobolev_norm(tendencies.u_t, 1) ** 2)
    return EnergyComponents(
        u_h3=vector_sobolev_norm(state.u, 3),
        q_h2=sobolev_norm(state.q, 2),
        qt_ut_h1=pair,
        grad_phi=weighted_l2_norm(radial_derivative(state.phi, 1)),
        grad_phi_t=weighted_l2_norm(radial_derivative(tendencies.phi_t, 1)),
    )


def energy_E(state, tendencies, grid: RadialGrid) -> float:
    """Instantaneous size of the perturbation (sum of five norms)."""
    return energy_components(state, tendencies, grid).total


def dissipation_components(state, tendencies,
                           grid: RadialGrid) -> DissipationComponents:
    return DissipationComponents(
        grad_u_h2=vector_gradient_sobolev_norm(state.u, 2),
        grad_ut_h1=vector_gradient_sobolev_norm(tendencies.u_t, 1),
        q_h2=sobolev_norm(state.q, 2),
        qt_h1=sobolev_norm(tendencies.q_t, 1),
        qtt_l2=weighted_l2_norm(tendencies.q_tt),
    )


def dissipation_D(state, tendencies, grid: RadialGrid) -> tuple[float, float]:
    """Dissipation functional, with and without the ||q_tt|| term."""
    comps = dissipation_components(state, tendencies, grid)
    return comps.total, comps.total_no_qtt


def mass(q: RadialField, grid: RadialGrid | None = None) -> float:
    """Discrete integral of q with the shell volume measure."""
    return integrate(q)


def basic_energy(state, steady, params) -> float:
    """Zero-order quadratic energy 1/2 int (rho_tilde u^2 + h' q^2 + |grad phi|^2)."""
    grid = state.q.grid
    rho_s = steady.rho_tilde.values
    hp = params.enthalpy_weight(rho_s)
    dphi = radial_derivative(state.phi, 1).values
    dens = rho_s * state.u.values**2 + hp * state.q.values**2 + dphi**2
    return 0.5 * float(np.dot(grid.weights, dens))


@dataclass(frozen=True)
class EnergySample:
    """One sampled instant of a simulation."""

    t: float
    E: float
    D: float
    D_no_qtt: float
    mass: float
    E_basic: float
    identity_residual: float
    min_density: float


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of the boundedness check against the initial energy.

    The sup of E(t)/E(0) is compared against ``margin``; the quadratic ratio
    (E(t)^2 + c_fit * int_0^t D^2 ds) / E(0)^2 against ``margin**2``.  The
    verdict uses the D variant without the q_tt term; the full-D ratio is
    reported alongside.
    """

    passed: bool
    margin: float
    sup_ratio_E: float
    sup_ratio_quadratic: float
    sup_ratio_quadratic_with_qtt: float
    c_fit: float


@dataclass
class TimeSeries:
    """Ordered samples plus the auxiliary data the diagnostics need."""

    samples: list
    grad_u_sq: np.ndarray
    c_visc: float
    dt: float
    config_digest: str
    verdict: StabilityVerdict | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")


class SeriesRecorder:
    """Accumulates samples during a run and assembles the TimeSeries."""

    def __init__(self, config, c_visc: float, dt: float, digest: str):
        self.config = config
        self.c_visc = c_visc
        self.dt = dt
        self.digest = digest
        self.rows = []
        self.grad_u_sq = []

    def add(self, state, tendencies) -> None:
        cfg = self.config
        grid = state.q.grid
        e = energy_E(state, tendencies, grid)
        d, d_no = dissipation_D(state, tendencies, grid)
        row = {
            "t": state.t,
            "E": e,
            "D": d,
            "D_no_qtt": d_no,
            "mass": mass(state.q),
            "E_basic": basic_energy(state, cfg.steady, cfg.params),
            "min_density": float(np.min(cfg.steady.rho_tilde.values
                                        + state.q.values)),
        }
        self.rows.append(row)
        self.grad_u_sq.append(vector_gradient_norm(state.u) ** 2)

    def finish(self, margin: float | None) -> TimeSeries:
        grad = np.array(self.grad_u_sq)
        t = np.array([r["t"] for r in self.rows])
        eb = np.array([r["E_basic"] for r in self.rows])
        resid = _identity_residuals(t, eb, grad, self.c_visc)
        samples = [EnergySample(identity_residual=float(resid[i]), **row)
                   for i, row in enumerate(self.rows)]
        series = TimeSeries(samples=samples, grad_u_sq=grad, c_visc=self.c_visc,
                            dt=self.dt, config_digest=self.digest)
        if margin is not None and samples and samples[0].E > 0.0:
            series.verdict = check_theorem_bound(series, margin=margin)
        return series


def _identity_residuals(t: np.ndarray, e_basic: np.ndarray,
                        grad_u_sq: np.ndarray, c_visc: float) -> np.ndarray:
    """Centered-difference residual of the zero-order identity per interior
    sample; endpoints are set to zero (no centered stencil there)."""
    n = t.size
    out = np.zeros(n)
    if n < 3:
        return out
    tm, t0, tp = t[:-2], t[1:-1], t[2:]
    em, e0, ep = e_basic[:-2], e_basic[1:-1], e_basic[2:]
    hm = t0 - tm
    hp = tp - t0
    dedt = (ep * hm**2 - em * hp**2 + e0 * (hp**2 - hm**2)) / (hm * hp * (hm + hp))
    out[1:-1] = dedt + c_visc * grad_u_sq[1:-1]
    return out


def basic_energy_identity_residual(series: TimeSeries,
                                   index: int | None = None):
    """Residual rho_i = (dE_basic/dt)|centered + c_visc ||grad u||^2 at one
    interior sample, or the array over all interior samples."""
    if len(series.samples) < 3:
        raise ParameterError("identity residual needs at least 3 samples")
    resid = _identity_residuals(series.t, series.column("E_basic"),
                                series.grad_u_sq, series.c_visc)
    if index is None:
        return resid[1:-1]
    if not (1 <= index <= len(series.samples) - 2):
        raise ParameterError("index must point at an interior sample")
    return float(resid[index])


def lemma_remainder_constant(series: TimeSeries) -> float:
    """Measured constant kappa in the zero-order remainder bound
    rho_i <= kappa * E(0) * D_i^2 over interior samples.

    Reported, never asserted: the initial energy stands in for the smallness
    parameter, and kappa * E(0) should scale roughly linearly in the
    perturbation amplitude.
    """
    if len(series.samples) < 3:
        raise ParameterError("remainder constant needs at least 3 samples")
    e0 = series.samples[0].E
    if e0 <= 0.0:
        return 0.0
    resid = basic_energy_identity_residual(series)
    d = series.column("D")[1:-1]
    mask = d > 0.0
    if not np.any(mask):
        return 0.0
    return float(np.max(resid[mask] / d[mask] ** 2)) / e0


def measure_viscous_constant(series: TimeSeries) -> float:
    """Least-squares fit of -dE_basic/dt against ||grad u||^2 over interior
    samples; falls back to the configured viscous coefficient when the run
    carries no usable signal."""
    if len(series.samples) < 3:
        return series.c_visc
    t = series.t
    eb = series.column("E_basic")
    grad = series.grad_u_sq
    tm, t0, tp = t[:-2], t[1:-1], t[2:]
    hm = t0 - tm
    hp = tp - t0
    dedt = (eb[2:] * hm**2 - eb[:-2] * hp**2
            + eb[1:-1] * (hp**2 - hm**2)) / (hm * hp * (hm + hp))
    g = grad[1:-1]
    denom = float(np.dot(g, g))
    if denom <= 0.0 or not math.isfinite(denom):
        return series.c_visc
    c = -float(np.dot(dedt, g)) / denom
    if not math.isfinite(c) or c <= 0.0:
        return series.c_visc
    return c


def check_theorem_bound(series: TimeSeries, margin: float = 2.0,
                        c_fit: float | None = None) -> StabilityVerdict:
    """Stability verdict: sup E(t)/E(0) <= margin and
    (E(t)^2 + c_fit int_0^t D_no_qtt^2) / E(0)^2 <= margin^2 for all t.

    c_fit defaults to the viscous constant measured from the run itself.
    """
    if not series.samples:
        raise ParameterError("empty series")
    e0 = series.samples[0].E
    if e0 <= 0.0:
        raise ParameterError("E(0) must be positive for the ratio check")
    if c_fit is None:
        c_fit = measure_viscous_constant(series)
    t = series.t
    e = series.column("E")
    d_no = series.column("D_no_qtt")
    d_full = series.column("D")

    def quad_ratio(d: np.ndarray) -> float:
        integral = np.concatenate(
            ([0.0], np.cumsum(0.5 * np.diff(t) * (d[1:] ** 2 + d[:-1] ** 2))))
        return float(np.max((e**2 + c_fit * integral) / e0**2))

    sup_e = float(np.max(e)) / e0
    ratio_no = quad_ratio(d_no)
    ratio_full = quad_ratio(d_full)
    passed = sup_e <= margin and ratio_no <= margin**2
    return StabilityVerdict(passed=passed, margin=margin, sup_ratio_E=sup_e,
                            sup_ratio_quadratic=ratio_no,
                            sup_ratio_quadratic_with_qtt=ratio_full,
                            c_fit=c_fit)
