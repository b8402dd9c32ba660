"""Linear propagator, Duhamel integrals, flow-map derivatives and NLS solver.

Sign convention: the equation is ``i u_t + Delta u = mu |u|^(2k) u``, so the
linear propagator multiplies the coefficient of an eigenfunction with
eigenvalue Lambda by ``exp(-i Lambda t)`` and the Duhamel representation is
``u(t) = S_t u0 - i mu int_0^t S_(t-tau) (|u|^2k u)(tau) dtau``.  All moduli
(kernel magnitudes, norms) are independent of this choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import SpectralCoeffs, from_coeffs, hs_norm, lq_norm, to_coeffs
from .errors import BlowUpError, DomainError, PreconditionError, StepSizeError
from .geometry import GraphFunction
from .spectral import EigenBasis, EigenPair

#: relative tolerance below which two eigenvalues are treated as resonant
EPS_RESONANT = 1e-9
# Coefficients below this relative magnitude are treated as round-off when
# sizing oscillatory time quadratures; genuine mode content at level <= 8
# synthesis sits many orders above it.
ACTIVE_MODE_RTOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class NlsConfig:
    """Parameters of the nonlinear solve u(0) = gamma * u0."""

    k: int = 1
    mu: float = 1.0
    T: float = 1.0
    dt: float = 1e-3
    gamma: float = 1.0
    stride: int = 0  # sampling stride of the trajectory; 0 = automatic

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("nonlinearity order k must be >= 1")
        if self.dt <= 0 or self.T < self.dt:
            raise DomainError("need 0 < dt <= T")
        if self.mu not in (1.0, -1.0, 1, -1):
            raise DomainError("mu must be +1 or -1")


@dataclass(frozen=True)
class DuhamelResult:
    """Closed-form Duhamel integral of an eigenfunction source."""

    coeffs: SpectralCoeffs
    resonant_term: float  # t * (1+Lambda)^(s/2) * ||psi||_{L^(2k+2)}^(2k+2)
    hs: float  # full H^s norm of the integral
    s: float


def propagate(c: SpectralCoeffs, t: float) -> SpectralCoeffs:
    """Linear Schrodinger flow: coefficient-wise phase exp(-i Lambda t)."""
    lam = c.basis.eigenvalues
    return c.copy_with(np.exp(-1j * lam * t) * c.coeffs)


def heat_propagate(c: SpectralCoeffs, t: float) -> SpectralCoeffs:
    """Heat semigroup: coefficient-wise decay exp(-Lambda t), t >= 0."""
    if t < 0:
        raise DomainError("heat semigroup requires t >= 0")
    lam = c.basis.eigenvalues
    return c.copy_with(np.exp(-lam * t) * c.coeffs)


def duhamel_kernel(t: float, lam_src: float, lam_tgt: float,
                   eps_res: float = EPS_RESONANT) -> complex:
    """Closed form of int_0^t exp(-i lam_tgt (t-tau)) exp(-i lam_src tau) dtau.

    Modulus t at resonance, |2 sin((lam_src - lam_tgt) t / 2) / (lam_src -
    lam_tgt)| otherwise; the resonant branch is taken when the eigenvalue gap
    is below ``eps_res`` relative to max(1, lam_src).
    """
    diff = lam_tgt - lam_src
    if abs(diff) <= eps_res * max(1.0, abs(lam_src)):
        return t * np.exp(-1j * lam_tgt * t)
    return np.exp(-1j * lam_tgt * t) * (np.expm1(1j * diff * t)) / (1j * diff)


def _duhamel_kernel_vector(t: float, lam_src: float, lam_tgt: np.ndarray,
                           eps_res: float = EPS_RESONANT) -> np.ndarray:
    diff = lam_tgt - lam_src
    resonant = np.abs(diff) <= eps_res * max(1.0, abs(lam_src))
    safe = np.where(resonant, 1.0, diff)
    out = np.exp(-1j * lam_tgt * t) * np.expm1(1j * safe * t) / (1j * safe)
    return np.where(resonant, t * np.exp(-1j * lam_tgt * t), out)


def duhamel_of_eigenfunction(psi: EigenPair, k: int, t: float,
                             basis: EigenBasis, s: float = 0.0) -> DuhamelResult:
    """Duhamel integral of the source |S_tau psi|^2k S_tau psi in closed form.

    Requires a real-valued eigenfunction psi of the basis (the localized
    family qualifies); then the source is exp(-i Lambda tau) psi^(2k+1) and
    every coefficient is a single kernel evaluation.
    """
    if np.iscomplexobj(psi.values.values) and np.abs(psi.values.values.imag).max() > 0:
        raise PreconditionError("closed form requires a real-valued eigenfunction")
    vals = psi.values.values.real
    power = GraphFunction(basis.level, vals ** (2 * k + 1))
    c_src = to_coeffs(power, basis)
    kern = _duhamel_kernel_vector(t, psi.lam, basis.eigenvalues)
    coeffs = SpectralCoeffs(basis, c_src.coeffs * kern)
    resonant = t * (1.0 + psi.lam) ** (s / 2.0) * lq_norm(
        psi.values, 2 * k + 2, basis) ** (2 * k + 2)
    return DuhamelResult(coeffs=coeffs, resonant_term=resonant,
                         hs=hs_norm(coeffs, s), s=s)


def _quadrature_panels(t: float, top_freq: float, panels: int | None) -> int:
    if panels is not None:
        return max(1, panels)
    return max(32, math.ceil(8.0 * t * top_freq / (2.0 * math.pi)))


def _duhamel_quadrature(u0: SpectralCoeffs, t: float, k: int,
                        panels: int | None = None) -> SpectralCoeffs:
    """Time quadrature of int_0^t S_(t-tau) |S_tau u0|^2k S_tau u0 dtau.

    Composite 8-point Gauss-Legendre with the panel count set by the top
    oscillation frequency of the integrand: (2k+1) times the largest active
    eigenvalue of u0 plus the largest basis eigenvalue.
    """
    basis = u0.basis
    lam = basis.eigenvalues
    mat = basis.matrix
    w = basis.vs.quadrature_weights
    mag = np.abs(u0.coeffs)
    active = mag > ACTIVE_MODE_RTOL * (mag.max() if mag.max() > 0 else 1.0)
    lam_active = lam[active].max() if active.any() else 0.0
    top = (2 * k + 1) * lam_active + lam.max()
    n_panels = _quadrature_panels(t, top, panels)
    width = t / n_panels
    acc = np.zeros(basis.size, dtype=complex)
    for p in range(n_panels):
        taus = (p + 0.5 * (_GL_NODES + 1.0)) * width
        for tau, gw in zip(taus, _GL_WEIGHTS):
            vals = mat @ (np.exp(-1j * lam * tau) * u0.coeffs)
            nl = np.abs(vals) ** (2 * k) * vals
            c_nl = mat.T @ (w * nl)
            acc += (0.5 * width * gw) * np.exp(-1j * lam * (t - tau)) * c_nl
    return SpectralCoeffs(basis, acc)


def _single_mode_index(u0: SpectralCoeffs) -> int | None:
    mag = np.abs(u0.coeffs)
    top = int(np.argmax(mag))
    if mag[top] == 0.0:
        return None
    rest = np.delete(mag, top)
    if rest.size == 0 or rest.max() <= 1e-9 * mag[top]:
        return top
    return None


def map_derivative(m: int, u0: SpectralCoeffs, t: float, k: int,
                   mu: float = 1.0, panels: int | None = None,
                   method: str = "auto") -> SpectralCoeffs:
    """Derivative in gamma at gamma = 0 of the flow map gamma*u0 -> u(t).

    Orders: 0 -> zero; 1 -> S_t u0; strictly between 1 and 2k+1 -> zero;
    2k+1 -> -i mu (2k+1)! times the Duhamel integral of |S_t u0|^2k S_t u0.
    Eigenfunction data uses the closed-form kernel, general data the time
    quadrature; ``method`` forces one route.
    """
    if m < 0 or m > 2 * k + 1:
        raise DomainError(
            f"derivative order {m} unsupported for nonlinearity order {k}"
        )
    basis = u0.basis
    if m == 0 or 1 < m < 2 * k + 1:
        return SpectralCoeffs(basis, np.zeros(basis.size, dtype=complex))
    if m == 1:
        return propagate(u0, t)
    factor = -1j * mu * math.factorial(2 * k + 1)
    idx = _single_mode_index(u0) if method in ("auto", "closed") else None
    if method == "closed" and idx is None:
        raise PreconditionError("closed form requires single-eigenfunction data")
    if idx is not None and method != "quadrature":
        pair = basis.pairs[idx]
        alpha = u0.coeffs[idx]
        res = duhamel_of_eigenfunction(pair, k, t, basis)
        scale = np.abs(alpha) ** (2 * k) * alpha
        return SpectralCoeffs(basis, factor * scale * res.coeffs.coeffs)
    integral = _duhamel_quadrature(u0, t, k, panels=panels)
    return SpectralCoeffs(basis, factor * integral.coeffs)


def nls_solve(u0: SpectralCoeffs, cfg: NlsConfig):
    """Strang splitting for i u_t + Delta u = mu |u|^2k u with data gamma*u0.

    Half-step pointwise nonlinear phase, exact full linear step in
    coefficient space, half-step nonlinear phase.  Returns the sampled
    trajectory as a list of (time, SpectralCoeffs) including both endpoints.
    """
    basis = u0.basis
    mat = basis.matrix
    w = basis.vs.quadrature_weights
    lam = basis.eigenvalues
    n_steps = int(round(cfg.T / cfg.dt))
    dt = cfg.T / n_steps
    stride = cfg.stride if cfg.stride > 0 else max(1, n_steps // 128)

    c = cfg.gamma * u0.coeffs.astype(complex)
    lin_phase = np.exp(-1j * lam * dt)
    traj = [(0.0, SpectralCoeffs(basis, c.copy()))]

    def half_nonlinear(vals: np.ndarray) -> np.ndarray:
        phase = cfg.mu * np.abs(vals) ** (2 * cfg.k) * (dt / 2.0)
        top = float(phase.max(initial=0.0))
        if top >= math.pi / 4.0:
            raise StepSizeError(
                f"nonlinear phase {top:.3g} per half step exceeds pi/4; "
                f"reduce dt"
            )
        return vals * np.exp(-1j * phase)

    for step in range(1, n_steps + 1):
        vals = mat @ c
        vals = half_nonlinear(vals)
        c = lin_phase * (mat.T @ (w * vals))
        vals = mat @ c
        vals = half_nonlinear(vals)
        c = mat.T @ (w * vals)
        if not np.all(np.isfinite(c)):
            raise BlowUpError(
                f"non-finite values at t = {step * dt:.6g}",
                last_valid_time=(step - 1) * dt,
            )
        if step % stride == 0 or step == n_steps:
            traj.append((step * dt, SpectralCoeffs(basis, c.copy())))
    return traj


#: central finite-difference stencils: order -> ((offset, coefficient), ...)
_FD_STENCILS = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def default_fd_step(m: int, u0_norm: float = 1.0) -> float:
    """Default amplitude step h_m = (1e-6)^(1/(m+2)) scaled by the data norm."""
    return (1e-6) ** (1.0 / (m + 2)) / max(u0_norm, 1e-30)


def gamma_derivative_fd(m: int, u0: SpectralCoeffs, t: float, cfg: NlsConfig,
                        h: float | None = None) -> SpectralCoeffs:
    """Finite-difference order-m derivative in gamma of nls_solve at gamma = 0.

    Classical central stencils for m <= 4; the gamma = 0 node is the zero
    trajectory and is skipped.  Error O(h^2) against map_derivative.
    """
    if m not in _FD_STENCILS:
        raise DomainError(f"no stencil for derivative order {m} (need 1..4)")
    basis = u0.basis
    if h is None:
        l2 = float(np.linalg.norm(u0.coeffs))
        h = default_fd_step(m, l2)
    run_cfg = NlsConfig(k=cfg.k, mu=cfg.mu, T=t, dt=cfg.dt, gamma=1.0,
                        stride=max(1, int(round(t / cfg.dt))))
    acc = np.zeros(basis.size, dtype=complex)
    for offset, coeff in _FD_STENCILS[m]:
        if offset == 0:
            continue  # zero data evolves to zero
        scaled = SpectralCoeffs(basis, (offset * h) * u0.coeffs)
        traj = nls_solve(scaled, run_cfg)
        acc += coeff * traj[-1][1].coeffs
    return SpectralCoeffs(basis, acc / h ** m)


def strichartz_l4(c: SpectralCoeffs, T: float, panels: int | None = None) -> float:
    """Space-time L^4 norm of the free flow over [0, T].

    Composite 8-point Gauss-Legendre in time over the corner-average spatial
    quadrature.  The panel count resolves the top oscillation frequency of
    |S_t u|^4, which is the largest eigenvalue *gap* among active modes (a
    single eigenfunction gives a constant integrand, handled by the floor).
    """
    if T <= 0:
        raise DomainError("time horizon must be positive")
    basis = c.basis
    lam = basis.eigenvalues
    mat = basis.matrix
    w = basis.vs.quadrature_weights
    mag = np.abs(c.coeffs)
    active = mag > ACTIVE_MODE_RTOL * (mag.max() if mag.max() > 0 else 1.0)
    spread = float(lam[active].max() - lam[active].min()) if active.any() else 0.0
    n_panels = _quadrature_panels(T, 2.0 * spread, panels)
    width = T / n_panels
    total = 0.0
    # evaluate in chunks of panels to bound the synthesis workspace
    chunk = max(1, 4096 // 8)
    for p0 in range(0, n_panels, chunk):
        p = np.arange(p0, min(p0 + chunk, n_panels))
        times = (p[:, None] + 0.5 * (_GL_NODES[None, :] + 1.0)).ravel() * width
        phases = np.exp(-1j * lam[:, None] * times[None, :])
        vals = mat @ (phases * c.coeffs[:, None])
        l4 = w @ (np.abs(vals) ** 4)
        gw = np.tile(0.5 * width * _GL_WEIGHTS, len(p))
        total += float(np.dot(gw, l4))
    return total ** 0.25
