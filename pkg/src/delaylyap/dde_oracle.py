"""Brute-force Lyapunov matrix of a delay system.

The fundamental matrix is integrated on a uniform grid by classical RK4. Delayed
values come from the stored history (linear interpolation at half steps), and
the distributed term is a trapezoid sum over the same grid. U(tau) is then the
trapezoid quadrature of Phi(t)^T W Phi(t + tau) up to a horizon where Phi has
decayed. Nothing in here uses the lifted boundary value problem.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import GridError, InstabilityError

DEFAULT_DT = 1e-3
DEFAULT_TAU_STEP = 1e-2
DEFAULT_DECAY_THRESHOLD = 1e-8
DEFAULT_HORIZON_CAP = 200.0  # in units of h
OVERFLOW_GUARD = 1e12


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """``samples[k]`` is Phi(start + k * step)."""

    step: float
    start: float
    samples: np.ndarray

    def at_index(self, k):
        """Phi at grid index k, zero before the start of the record."""
        if k < 0:
            return np.zeros(self.samples.shape[1:])
        return self.samples[k]

    @property
    def times(self):
        return self.start + self.step * np.arange(len(self.samples))


@dataclass(frozen=True, eq=False)
class LyapunovSamples:
    """U(tau) on a grid symmetric about 0; ``values[i]`` belongs to ``taus[i]``."""

    tau_step: float
    taus: np.ndarray
    values: np.ndarray
    t_max: float = None

    def __post_init__(self):
        p = (len(self.taus) - 1) // 2
        if len(self.taus) % 2 != 1 or self.taus[p] != 0.0:
            raise GridError("tau grid must be symmetric and contain 0")
        if not np.array_equal(self.taus, -self.taus[::-1]):
            raise GridError("tau grid is not symmetric about 0")

    @property
    def half(self):
        """Number of grid steps from 0 to the largest tau."""
        return (len(self.taus) - 1) // 2

    def at(self, i):
        """U at signed grid offset i (tau = i * tau_step)."""
        return self.values[self.half + i]


def _steps(length, step, what):
    k = round(length / step)
    if k < 1 or abs(k * step - length) > 1e-9 * max(length, step):
        raise GridError(f"{what} {length!r} is not a multiple of the step {step!r}")
    return int(k)


def _integrate(spec, dt, n_steps, decay_threshold=None, tail=0):
    """RK4 march of Phi over ``n_steps`` steps of size ``dt``.

    With ``decay_threshold`` set, the march ends ``tail`` steps after the first
    multiple of h where ``|Phi|_F`` drops below it, and ``(samples, index)`` is
    returned with ``index`` that crossing; otherwise ``(samples, None)``.
    """
    n = spec.n
    m = _steps(spec.h, dt, "delay h")
    A0, A1 = spec.A0, spec.A1

    # Trapezoid weights over theta_j = -j*dt, j = 0..m, stored reversed so the
    # distributed sum at index k is one matmul against history[k-m .. k].
    w = np.full(m + 1, dt)
    w[0] = w[-1] = dt / 2
    G = spec.kernel(-dt * np.arange(m + 1))  # G[j] = G(-j dt)
    G_rev = (w[:, None, None] * G)[::-1]
    G_flat = np.ascontiguousarray(G_rev.transpose(1, 0, 2).reshape(n, (m + 1) * n))
    G0 = w[0] * G[0]

    # m zero matrices of pre-history, then Phi(0) = I.
    hist = np.zeros((m + n_steps + tail + 1, n, n))
    hist[m] = np.eye(n)

    def distributed(k):
        """Trapezoid sum for the distributed term at grid index k.

        Called before Phi at index k is stored, the j = 0 slot is still zero and
        the result is the sum without that term. For k < m the integrand jumps
        from 0 to G Phi(0) at theta = -t_k, so that point takes a half weight.
        """
        window = hist[k : k + m + 1].reshape((m + 1) * n, n)
        D = G_flat @ window
        if k < m:
            D = D - (dt / 2) * G[k] @ hist[m]
        return D

    D_k = distributed(0)
    stop = None
    end = n_steps
    k = 0
    while k < end:
        Y = hist[k + m]
        if k + 1 > m:
            P0, P1 = hist[k], hist[k + 1]
        else:
            # The step lies left of t = h: use the left limit 0 of Phi(t - h).
            P0 = P1 = np.zeros((n, n))
        Pm = 0.5 * (P0 + P1)
        D_known = distributed(k + 1)

        def rhs(Yst, P, D):
            return A0 @ Yst + A1 @ P + D

        k1 = rhs(Y, P0, D_k)
        Y2 = Y + 0.5 * dt * k1
        k2 = rhs(Y2, Pm, 0.5 * (D_k + D_known + G0 @ (Y + dt * k1)))
        Y3 = Y + 0.5 * dt * k2
        k3 = rhs(Y3, Pm, 0.5 * (D_k + D_known + G0 @ (Y + dt * k2)))
        Y4 = Y + dt * k3
        k4 = rhs(Y4, P1, D_known + G0 @ Y4)
        Ynew = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        hist[k + m + 1] = Ynew
        D_k = D_known + G0 @ Ynew

        norm = np.linalg.norm(Ynew)
        if not np.isfinite(norm) or norm > OVERFLOW_GUARD:
            raise InstabilityError(
                f"|Phi(t)| exceeded {OVERFLOW_GUARD:g} at t = {(k + 1) * dt:g}; "
                "the Lyapunov integral is ill-defined for an unstable system"
            )
        k += 1
        if stop is None and decay_threshold is not None and k % m == 0 and norm < decay_threshold:
            stop = k
            end = k + tail
    return hist[m : m + end + 1].copy(), stop


def fundamental_matrix(spec, t_max, dt=DEFAULT_DT):
    """Phi on ``[0, t_max]`` with Phi(0) = I and Phi = 0 before 0."""
    _steps(spec.h, dt, "delay h")
    _steps(t_max, spec.h, "t_max")
    samples, _ = _integrate(spec, dt, _steps(t_max, dt, "t_max"))
    return SampledTrajectory(step=dt, start=0.0, samples=samples)


def decay_time(spec, threshold=DEFAULT_DECAY_THRESHOLD, dt=DEFAULT_DT,
               horizon_cap=DEFAULT_HORIZON_CAP):
    """First multiple of h at which ``|Phi(t)|_F < threshold``.

    ``horizon_cap`` is measured in units of h; reaching it without decay raises
    :class:`InstabilityError`.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold!r}")
    m = _steps(spec.h, dt, "delay h")
    cap = int(math.floor(horizon_cap))
    _, stop = _integrate(spec, dt, cap * m, decay_threshold=threshold)
    if stop is None:
        raise InstabilityError(
            f"|Phi| did not fall below {threshold:g} within {cap} delays; "
            "the Lyapunov integral is ill-defined"
        )
    return (stop // m) * spec.h


def lyapunov_by_definition(spec, tau_step=DEFAULT_TAU_STEP, t_max=None, dt=DEFAULT_DT,
                           decay_threshold=DEFAULT_DECAY_THRESHOLD,
                           horizon_cap=DEFAULT_HORIZON_CAP):
    """U(tau) for tau on a ``tau_step`` grid over [-h, h], by direct quadrature.

    Each U(tau), negative taus included, is its own trapezoid sum of
    Phi(t)^T W Phi(t + tau) over t in [max(0, -tau), t_max]; the lower end of a
    negative tau sits on the jump of Phi at 0 and gets a half weight. With
    ``t_max`` unset it comes from :func:`decay_time`; a given ``t_max`` must be
    a multiple of h with ``|Phi(t_max)|_F < decay_threshold``.
    """
    p = _steps(spec.h, tau_step, "delay h")
    stride = _steps(tau_step, dt, "tau_step")
    m = _steps(spec.h, dt, "delay h")
    if t_max is None:
        # Same march as decay_time, continued one delay past the crossing.
        cap = int(math.floor(horizon_cap))
        Phi, K = _integrate(spec, dt, cap * m, decay_threshold=decay_threshold, tail=m)
        if K is None:
            raise InstabilityError(
                f"|Phi| did not fall below {decay_threshold:g} within {cap} delays; "
                "the Lyapunov integral is ill-defined"
            )
    else:
        _steps(t_max, spec.h, "t_max")
        K = _steps(t_max, dt, "t_max")
        Phi, _ = _integrate(spec, dt, K + m)
    if not np.linalg.norm(Phi[K]) < decay_threshold:
        raise InstabilityError(
            f"|Phi(t_max)| = {np.linalg.norm(Phi[K]):.3g} is not below {decay_threshold:g}; "
            "the truncated Lyapunov integral would be unreliable"
        )
    WPhi = np.einsum("ab,kbc->kac", spec.W, Phi)

    values = np.empty((2 * p + 1, spec.n, spec.n))
    for i in range(-p, p + 1):
        s = i * stride
        lo = max(0, -s)
        w = np.full(K - lo + 1, dt)
        w[0] = w[-1] = dt / 2
        left = Phi[lo : K + 1]
        right = WPhi[lo + s : K + 1 + s]
        values[i + p] = np.einsum("k,kba,kbc->ac", w, left, right)
    taus = tau_step * np.arange(-p, p + 1)
    taus[p] = 0.0
    return LyapunovSamples(tau_step=tau_step, taus=taus, values=values, t_max=K * dt)


def _trapezoid_weights(count, step):
    w = np.full(count, step)
    w[0] = w[-1] = step / 2
    return w


def _require(U, spec, minimum):
    if abs(U.half * U.tau_step - spec.h) > 1e-9 * spec.h:
        raise GridError("tau grid must cover exactly [-h, h]")
    if U.half < minimum:
        raise GridError(f"tau grid has {U.half} steps per delay, need at least {minimum}")


def dynamic_residual(U, spec):
    """Worst violation of U'(tau) = U(tau)A0 + U(tau-h)A1 + int U(tau+theta)G(theta) over (0, h).

    The derivative is a central difference and the integral a trapezoid sum
    on the tau grid.
    """
    _require(U, spec, 2)
    p = U.half
    d = U.tau_step
    theta = -d * np.arange(p + 1)
    wG = _trapezoid_weights(p + 1, d)[:, None, None] * spec.kernel(theta)
    worst = 0.0
    for i in range(1, p):
        lhs = (U.at(i + 1) - U.at(i - 1)) / (2 * d)
        # U(tau + theta_j) = U.at(i - j), j = 0..p.
        window = U.values[U.half + i - p : U.half + i + 1][::-1]
        integral = np.einsum("jab,jbc->ac", window, wG)
        rhs = U.at(i) @ spec.A0 + U.at(i - p) @ spec.A1 + integral
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def symmetry_residual(U):
    """max over the grid of ``|U(-tau) - U(tau)^T|_F``."""
    return float(max(np.linalg.norm(U.at(-i) - U.at(i).T) for i in range(U.half + 1)))


def algebraic_residual(U, spec):
    """Frobenius norm of the algebraic (tau = 0) identity, W moved to the left."""
    _require(U, spec, 1)
    p = U.half
    d = U.tau_step
    theta = -d * np.arange(p + 1)
    w = _trapezoid_weights(p + 1, d)
    G = spec.kernel(theta)
    neg = np.stack([U.at(-j) for j in range(p + 1)])  # U(theta_j)
    pos = np.stack([U.at(j) for j in range(p + 1)])  # U(-theta_j)
    int_UG = np.einsum("j,jab,jbc->ac", w, neg, G)
    int_GU = np.einsum("j,jba,jbc->ac", w, G, pos)
    total = (spec.W + U.at(0) @ spec.A0 + U.at(-p) @ spec.A1 + int_UG
             + spec.A0.T @ U.at(0) + spec.A1.T @ U.at(p) + int_GU)
    return float(np.linalg.norm(total))


def lifted_initial_state(U, spec):
    """(z, v, x0, x1) at tau = 0 built from a sampled Lyapunov matrix.

    Z = U, V(tau) = U(tau - h), and X0, X1 are the sine and cosine moments
    int_{-h}^0 U(tau + theta) {sin, cos}(omega theta) dtheta. These turn the
    dynamic property into the lifted ODE, so the true U yields one member of
    the boundary problem's solution family.
    """
    _require(U, spec, 1)
    p = U.half
    d = U.tau_step
    theta = -d * np.arange(p + 1)
    w = _trapezoid_weights(p + 1, d)
    neg = np.stack([U.at(-j) for j in range(p + 1)])
    X0 = np.einsum("j,jab->ab", w * np.sin(spec.omega * theta), neg)
    X1 = np.einsum("j,jab->ab", w * np.cos(spec.omega * theta), neg)
    parts = [U.at(0), U.at(-p), X0, X1]
    return np.concatenate([P.reshape(-1, 1, order="F") for P in parts])
