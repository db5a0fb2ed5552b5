"""Closed-form qubit quantities used as independent oracles in the tests.

Nothing in the library imports this module. Constant rates only; Γ = γt.
"""

import numpy as np
from scipy.integrate import quad


def geometric_integrand_mis_dephasing(t):
    """tr(d√ρ/dt)² for the maximally imaginary state under dephasing with γ = 2."""
    return 1.0 / np.expm1(4.0 * t)


def dephasing_bloch(theta, gamma, t):
    """(y, z) Bloch components of the dephased θ-state; x stays 0 when ω₀ = 0."""
    return np.sin(theta) * np.exp(-gamma * t), np.cos(theta)


def dephasing_generator_norm_sq(theta, gamma, omega0, t):
    """‖𝓛(ρ_t)‖²_HS: only the coherence moves, at rate |−γ − iω₀|."""
    return 0.5 * (gamma ** 2 + omega0 ** 2) * np.sin(theta) ** 2 * np.exp(-2 * gamma * t)


def qubit_log_norm_sq(r):
    """‖ln ρ‖²_HS for a qubit with Bloch radius r < 1."""
    lam = np.array([(1 - r) / 2, (1 + r) / 2])
    return float(np.sum(np.log(lam) ** 2))


def binary_entropy(p):
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log(p) - (1 - p) * np.log(1 - p))


def dephasing_relative_entropy_bound(theta, gamma, T):
    """Relative-entropy speed-limit time for constant-γ dephasing with ω₀ = 0 (real part is static)."""
    c2 = np.cos(theta / 2) ** 2

    def radius(t):
        y, z = dephasing_bloch(theta, gamma, t)
        return np.hypot(y, z)

    delta = abs((binary_entropy(c2) - binary_entropy((1 + radius(T)) / 2))
                - (binary_entropy(c2) - 0.0))
    speed_sq, _ = quad(lambda t: dephasing_generator_norm_sq(theta, gamma, 0.0, t), 0, T)
    log_sq, _ = quad(lambda t: qubit_log_norm_sq(radius(t)) if t > 0 else 0.0, 0, T, limit=200)
    return delta / (np.sqrt(speed_sq / T) * np.sqrt(log_sq / T))


def dissipative_entries(theta, gamma, t):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.exp(-gamma * t / 2) * c * c, np.exp(-gamma * t / 4) * c * s


def dissipative_generator_norm_sq(theta, gamma, t):
    population, coherence = dissipative_entries(theta, gamma, t)
    return 0.5 * gamma ** 2 * population ** 2 + gamma ** 2 / 8 * coherence ** 2


def dissipative_real_part_norm_sq(theta, gamma, t):
    population, _ = dissipative_entries(theta, gamma, t)
    return 0.5 * gamma ** 2 * population ** 2


def bloch_metric(r, r_dot, angular_speed_sq):
    """tr(d√ρ/dt)² of a qubit from its Bloch radius, radial speed and |dr̂/dt|²."""
    return r_dot ** 2 / (4 * (1 - r ** 2)) + (1 - np.sqrt(1 - r ** 2)) / 2 * angular_speed_sq


def dephasing_geometric_integrand(theta, gamma, t):
    y, z = dephasing_bloch(theta, gamma, t)
    r = np.hypot(y, z)
    r_dot = -gamma * y * y / r
    angular = gamma ** 2 * y * y * z * z / r ** 4
    return bloch_metric(r, r_dot, angular)


def dephasing_geometric_bound(theta, gamma, T):
    """Geometric speed-limit time: imaginarity angle arcsin(y)/2 over the averaged Bures speed."""
    y0, _ = dephasing_bloch(theta, gamma, 0.0)
    yT, _ = dephasing_bloch(theta, gamma, T)
    delta = abs(np.arcsin(yT) - np.arcsin(y0)) / 2
    # t = u² removes the t^(-1/2) endpoint singularity
    integral, _ = quad(lambda u: 2 * u * np.sqrt(dephasing_geometric_integrand(theta, gamma, u * u)),
                       0, np.sqrt(T), limit=200, epsabs=1e-13, epsrel=1e-12)
    return delta / (integral / T)


def rms_log_constant():
    """√((4/π) ∫₀^{π/4} (ln² cos² u + ln² sin² u) du) for the σ_x rotation example."""
    integral, _ = quad(lambda u: np.log(np.cos(u) ** 2) ** 2 + np.log(np.sin(u) ** 2) ** 2,
                       0, np.pi / 4, limit=200)
    return float(np.sqrt(4 / np.pi * integral))
