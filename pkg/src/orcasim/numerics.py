"""Spectral differentiation, velocity quadrature and RK4 stepping."""
from dataclasses import dataclass

import numpy as np

from .constants import K_B
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ChebyshevGrid:
    """Chebyshev-Gauss-Lobatto collocation grid on ``[0, length]``.

    Nodes are ordered ascending so ``nodes[0] == 0`` is the cell entrance
    and ``nodes[-1] == length`` the exit.
    """

    n_points: int
    length: float
    nodes: np.ndarray
    diff_matrix: np.ndarray

    def integrate(self, values, axis=0):
        """Clenshaw-Curtis quadrature of samples over ``[0, length]``."""
        w = clenshaw_curtis_weights(self.n_points) * (self.length / 2)
        return np.tensordot(w, values, axes=([0], [axis]))


@dataclass(frozen=True)
class VelocityQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    thermal_speed: float  # sqrt(k_B T / m)

    def __len__(self):
        return len(self.nodes)


def chebyshev_grid(n_points, length):
    """Build the Chebyshev-Gauss-Lobatto grid and its d/dz matrix.

    Uses the standard Trefethen construction with the negative-sum trick on
    the diagonal, then maps ``x in [-1, 1]`` onto ``z = (1 - x) L / 2``.
    """
    if int(n_points) != n_points or n_points < 2:
        raise InvalidArgumentError(f"n_points must be an integer >= 2, got {n_points}")
    if not length > 0:
        raise InvalidArgumentError(f"length must be positive, got {length}")
    n = int(n_points) - 1
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    c = np.where((k == 0) | (k == n), 2.0, 1.0) * (-1.0) ** k
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # z = (1 - x) L/2 reverses the order and scales d/dx by -2/L
    z = (1.0 - x) * length / 2.0
    Dz = D * (-2.0 / length)
    z[0], z[-1] = 0.0, float(length)
    return ChebyshevGrid(int(n_points), float(length), z, Dz)


def clenshaw_curtis_weights(n_points):
    """Quadrature weights on the Chebyshev-Gauss-Lobatto nodes of [-1, 1]."""
    n = n_points - 1
    if n == 1:
        return np.array([1.0, 1.0])
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for j in range(1, n // 2):
            v -= 2 * np.cos(2 * j * theta[1:-1]) / (4 * j**2 - 1)
        v -= np.cos(n * theta[1:-1]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for j in range(1, (n - 1) // 2 + 1):
            v -= 2 * np.cos(2 * j * theta[1:-1]) / (4 * j**2 - 1)
    w[1:-1] = 2 * v / n
    return w


def maxwell_boltzmann_quadrature(n_classes, temperature, mass):
    """Gauss-Hermite velocity classes for the 1-D Maxwell-Boltzmann law.

    With physicists' Hermite nodes ``x_i`` and weights ``h_i`` the velocity
    classes are ``v_i = sqrt(2) u x_i`` with probabilities
    ``h_i / sqrt(pi)``, where ``u**2 = k_B T / m``.
    """
    if int(n_classes) != n_classes or n_classes < 1:
        raise InvalidArgumentError(f"n_classes must be an integer >= 1, got {n_classes}")
    if not temperature > 0:
        raise InvalidArgumentError(f"temperature must be positive, got {temperature}")
    if not mass > 0:
        raise InvalidArgumentError(f"mass must be positive, got {mass}")
    u = np.sqrt(K_B * temperature / mass)
    x, h = np.polynomial.hermite.hermgauss(int(n_classes))
    w = h / np.sqrt(np.pi)
    w = w / w.sum()
    v = np.sqrt(2.0) * u * x
    if n_classes % 2 == 1:
        v[n_classes // 2] = 0.0
    return VelocityQuadrature(v, w, float(u))


def rk4_advance(state, derivative, t, dt):
    """One classical fourth-order Runge-Kutta step of ``dy/dt = f(t, y)``."""
    if dt == 0:
        return state
    k1 = derivative(t, state)
    k2 = derivative(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = derivative(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = derivative(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
