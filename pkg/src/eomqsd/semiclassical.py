"""Classical steady state of the pumped electro-opto-mechanical system.

Frequencies are angular (rad/s), couplings g in rad/s per meter and the
zero-point length in meters.  With x the (real) mechanical displacement
amplitude, the driven cavity fields at steady state are

    alpha(x) = -A_o / (Delta_o - i kappa_o / 2 - g_o X_zp x)
    beta(x)  = -A_mu / (Delta_mu - i kappa_mu / 2 - g_mu X_zp x)

and x must satisfy x = X_zp (g_o |alpha|^2 + g_mu |beta|^2) / (2 omega_m).
The solver reduces the problem to this scalar equation, brackets every
real root on a grid that resolves both cavity resonances, and polishes
with Brent's method.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import BistabilityError, DomainError, IterationLimitError

SCAN_POINTS = 4001
RESONANCE_POINTS = 801
RESONANCE_SPAN = 60.0     # half-widths resolved around each cavity resonance
STABILITY_RTOL = 1e-9
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class PumpParams:
    delta_o: float
    delta_mu: float
    kappa_o: float
    kappa_mu: float
    g_o: float
    g_mu: float
    x_zp: float
    omega_m: float
    a_o: complex
    a_mu: complex

    def __post_init__(self):
        if not self.omega_m > 0:
            raise DomainError("omega_m must be positive")
        if self.kappa_o < 0 or self.kappa_mu < 0:
            raise DomainError("cavity linewidths must be nonnegative")
        if not self.x_zp > 0:
            raise DomainError("x_zp must be positive")

    @property
    def scale(self) -> float:
        return max(abs(self.a_o), abs(self.a_mu), self.omega_m)


@dataclass(frozen=True)
class SteadyState:
    alpha: complex
    beta: complex
    delta: float
    residual: float
    stable: bool = True
    max_growth: float = 0.0   # largest real part of the Jacobian spectrum


@dataclass(frozen=True)
class LinearizedParams:
    omega_o: float
    omega_mu: float
    delta_o_tilde: float
    delta_mu_tilde: float
    omega_m: float
    resonant: bool
    pump_phases: tuple = (0.0, 0.0)


def _fields(p: PumpParams, x):
    alpha = -p.a_o / (p.delta_o - 0.5j * p.kappa_o - p.g_o * p.x_zp * x)
    beta = -p.a_mu / (p.delta_mu - 0.5j * p.kappa_mu - p.g_mu * p.x_zp * x)
    return alpha, beta


def _displacement(p: PumpParams, alpha, beta):
    return p.x_zp * (p.g_o * abs(alpha) ** 2 + p.g_mu * abs(beta) ** 2) / (2.0 * p.omega_m)


def _reduced(p: PumpParams, x):
    alpha, beta = _fields(p, x)
    return x - p.x_zp * (p.g_o * np.abs(alpha) ** 2 + p.g_mu * np.abs(beta) ** 2) / (2.0 * p.omega_m)


def residuals(p: PumpParams, alpha, beta, delta):
    """Right-hand sides of the three stationarity equations."""
    two_re = 2.0 * np.real(delta)
    r_a = (p.delta_o - 0.5j * p.kappa_o) * alpha - 0.5 * p.g_o * p.x_zp * two_re * alpha + p.a_o
    r_b = (p.delta_mu - 0.5j * p.kappa_mu) * beta - 0.5 * p.g_mu * p.x_zp * two_re * beta + p.a_mu
    r_d = p.omega_m * delta - 0.5 * p.x_zp * (p.g_o * abs(alpha) ** 2 + p.g_mu * abs(beta) ** 2)
    return np.array([r_a, r_b, r_d])


def jacobian(p: PumpParams, alpha, beta, delta):
    """Real 6x6 Jacobian of the classical equations of motion.

    Variables are ordered (Re a, Im a, Re b, Im b, Re d, Im d).
    """
    x = float(np.real(delta))

    def cmul(c):
        return np.array([[c.real, -c.imag], [c.imag, c.real]])

    jac = np.zeros((6, 6))
    fields = ((alpha, p.delta_o, p.kappa_o, p.g_o), (beta, p.delta_mu, p.kappa_mu, p.g_mu))
    for n, (f, det, kap, g) in enumerate(fields):
        s = slice(2 * n, 2 * n + 2)
        jac[s, s] = cmul(-1j * (det - 0.5j * kap - g * p.x_zp * x))
        col = 1j * g * p.x_zp * f
        jac[s, 4] = (col.real, col.imag)
        # d/dt delta picks up i X_zp g (Re f, Im f) . (d Re f, d Im f)
        jac[5, s] = p.x_zp * g * np.array([f.real, f.imag])
    jac[4:6, 4:6] = cmul(-1j * p.omega_m)
    return jac


def _scan_grid(p: PumpParams):
    """Grid covering every possible root, refined near the cavity resonances."""
    lo = hi = 0.0
    for a, kap, g in ((p.a_o, p.kappa_o, p.g_o), (p.a_mu, p.kappa_mu, p.g_mu)):
        if a == 0 or g == 0:
            continue
        i_max = abs(a) ** 2 / (0.25 * kap * kap)
        reach = p.x_zp * g * i_max / (2.0 * p.omega_m)
        lo, hi = min(lo, reach), max(hi, reach)
    # the displacement is a weighted sum of the bounded intensities, so
    # every root lies in [lo, hi]
    span = hi - lo
    pad = 1e-6 * span if span > 0 else 1.0
    pts = [np.linspace(lo - pad, hi + pad, SCAN_POINTS)]
    for det, kap, g in ((p.delta_o, p.kappa_o, p.g_o), (p.delta_mu, p.kappa_mu, p.g_mu)):
        if g == 0:
            continue
        center = det / (g * p.x_zp)
        half = 0.5 * kap / abs(g * p.x_zp)
        if lo - pad <= center <= hi + pad:
            pts.append(center + half * RESONANCE_SPAN * np.linspace(-1, 1, RESONANCE_POINTS) ** 3)
    grid = np.unique(np.concatenate(pts))
    return grid[(grid >= lo - pad) & (grid <= hi + pad)]


def _real_roots(p: PumpParams):
    grid = _scan_grid(p)
    vals = _reduced(p, grid)
    roots = []
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0.0:
            roots.append(brentq(lambda x: _reduced(p, x), grid[i], grid[i + 1],
                                xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    return roots


def _candidate(p: PumpParams, x):
    alpha, beta = _fields(p, x)
    delta = _displacement(p, alpha, beta)
    res = float(np.max(np.abs(residuals(p, alpha, beta, delta))))
    growth = float(np.max(np.linalg.eigvals(jacobian(p, alpha, beta, delta)).real))
    rate_scale = max(p.omega_m, abs(p.delta_o), abs(p.delta_mu))
    stable = growth <= STABILITY_RTOL * rate_scale
    return SteadyState(complex(alpha), complex(beta), float(delta), res, stable, growth)


def all_steady_states(p: PumpParams):
    """Every real root of the reduced equation, stable or not, sorted by displacement."""
    if not (p.kappa_o > 0 and p.kappa_mu > 0):
        raise DomainError("the steady state needs kappa_o, kappa_mu > 0")
    if p.g_o == 0 and p.g_mu == 0 or p.a_o == 0 and p.a_mu == 0:
        return [_candidate(p, 0.0)]
    return [_candidate(p, x) for x in _real_roots(p)]


def solve_steady_state(p: PumpParams) -> SteadyState:
    """Stable steady state with the largest total intracavity intensity."""
    cands = all_steady_states(p)
    tol = RESIDUAL_RTOL * p.scale
    for c in cands:
        if not c.residual <= tol:
            raise IterationLimitError(
                f"root polishing stalled at residual {c.residual:.3e} (tolerance {tol:.3e})")
    stable = [c for c in cands if c.stable]
    if not stable:
        raise BistabilityError("no stable steady state", cands)
    return max(stable, key=lambda c: abs(c.alpha) ** 2 + abs(c.beta) ** 2)


def effective_coupling(g: float, x_zp: float, field: float) -> float:
    """Linearized coupling g * X_zp * field for a real field amplitude."""
    if isinstance(field, complex) or np.iscomplexobj(field):
        if np.imag(field) != 0:
            raise DomainError("field must be real; rotate the pump phase first")
        field = float(np.real(field))
    return g * x_zp * field


def shifted_detuning(delta: float, g: float, x_zp: float, delta_s: float) -> float:
    """Detuning corrected for the radiation-pressure shift of the cavity."""
    return delta - x_zp * delta_s * g


def phase_aligned(p: PumpParams, steady: SteadyState):
    """Pumps rephased so that the steady-state fields are real and nonnegative.

    Returns (new params, (phase_o, phase_mu)); the fields are linear in their
    pump at fixed displacement, and the displacement only sees intensities.
    """
    ph_o = float(np.angle(steady.alpha)) if steady.alpha != 0 else 0.0
    ph_mu = float(np.angle(steady.beta)) if steady.beta != 0 else 0.0
    q = replace(p, a_o=p.a_o * np.exp(-1j * ph_o), a_mu=p.a_mu * np.exp(-1j * ph_mu))
    return q, (ph_o, ph_mu)


def linearize(p: PumpParams, steady: SteadyState = None, rtol: float = 1e-9) -> LinearizedParams:
    steady = solve_steady_state(p) if steady is None else steady
    _, phases = phase_aligned(p, steady)
    d_o = shifted_detuning(p.delta_o, p.g_o, p.x_zp, steady.delta)
    d_mu = shifted_detuning(p.delta_mu, p.g_mu, p.x_zp, steady.delta)
    tol = rtol * p.omega_m
    resonant = abs(d_o - p.omega_m) <= tol and abs(d_mu - p.omega_m) <= tol
    return LinearizedParams(
        omega_o=effective_coupling(p.g_o, p.x_zp, abs(steady.alpha)),
        omega_mu=effective_coupling(p.g_mu, p.x_zp, abs(steady.beta)),
        delta_o_tilde=d_o, delta_mu_tilde=d_mu, omega_m=p.omega_m,
        resonant=resonant, pump_phases=phases)


def red_detuned(p: PumpParams, rtol: float = 1e-9) -> PumpParams:
    """Bare detunings for which both shifted detunings equal omega_m.

    On resonance the fields no longer depend on the displacement, which
    gives the detunings in closed form; the result is checked against the
    solver, which must select that same root.
    """
    alpha = -p.a_o / (p.omega_m - 0.5j * p.kappa_o)
    beta = -p.a_mu / (p.omega_m - 0.5j * p.kappa_mu)
    x = _displacement(p, alpha, beta)
    q = replace(p, delta_o=p.omega_m + p.g_o * p.x_zp * x,
                delta_mu=p.omega_m + p.g_mu * p.x_zp * x)
    lin = linearize(q, rtol=rtol)
    if not lin.resonant:
        raise BistabilityError("the solver selects a different branch at the tuned detunings",
                               all_steady_states(q))
    return q


def coupling_ratio(lin: LinearizedParams) -> float:
    """Largest effective coupling in units of omega_m."""
    return max(abs(lin.omega_o), abs(lin.omega_mu)) / lin.omega_m

