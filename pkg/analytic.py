"""
Closed-form noise-averaged fidelities in the rotating picture of H_sys.

All double integrals over [0,t]^2 are evaluated cumulatively on an analytic
grid (every `coarsen`-th integration point). The square splits into the two
triangles s2 < s1 and s2 > s1; each row integral int_0^s alpha(s,r) y(r) dr is
a trapezoid sum carried forward by the exponential decay of alpha, so a
whole curve costs O(M).
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate

import config
from logger import get_logger
from models import CoefficientSeries, Family
from noise import CorrelationSpec
from numerics import ComplexSeries, TimeGrid, cumulative_trapezoid
from qsd import FidelityCurve

# Largest phase of the detuning factors over one analytic step when the
# coarsening is chosen automatically
MAX_PHASE_STEP = 0.05


@dataclass(frozen=True, eq=False)
class BarredCoefficients:
    """Running integrals of E and of the O-bar coefficients on the analytic grid"""

    grid: TimeGrid
    family: Family
    N: int
    int_E: np.ndarray
    int_F: np.ndarray

    @property
    def Fbar_R(self):
        """exp(-int F_R) (multi-level: to the power N is applied by the caller)"""
        return np.exp(-np.real(self.int_F[:, 0]))

    @property
    def Fbar_I(self):
        scale = self.N if self.family is Family.MULTI_LEVEL else 1
        return np.cos(scale * np.imag(self.int_F[:, 0]))

    @property
    def Ebar(self):
        return np.exp(-1j * self.int_E)

    @property
    def Kbar(self):
        if self.family is Family.MULTI_LEVEL:
            return np.exp(1j * (2.0 * self.int_E + self.N * np.imag(self.int_F[:, 0])))
        return np.exp(1j * (self.int_E + np.imag(self.int_F[:, 0])))

    def Fbar(self, j=1):
        """Complex exp(-int F_j); j = 1, 2 for the qutrit"""
        return np.exp(-self.int_F[:, j - 1])

    @property
    def Bbar(self):
        """E-bar F-bar_2 / F-bar_1 (qutrit)"""
        return self.Ebar * np.exp(self.int_F[:, 0] - self.int_F[:, 1])


def default_coarsen(coeffs: CoefficientSeries):
    """config.ANALYTIC_COARSEN, reduced while the detuning phase per analytic step exceeds MAX_PHASE_STEP"""
    scale = 2.0 if coeffs.model.family is Family.MULTI_LEVEL else 1.0
    phase = scale * float(np.max(np.abs(coeffs.detuning))) * float(coeffs.grid.steps.max())
    if phase == 0:
        return config.ANALYTIC_COARSEN
    return int(max(1, min(config.ANALYTIC_COARSEN, np.floor(MAX_PHASE_STEP / phase))))


def barred_coefficients(coeffs: CoefficientSeries, coarsen=None):
    coarsen = default_coarsen(coeffs) if coarsen is None else int(coarsen)
    if coarsen < 1:
        raise ValueError(f"coarsen must be >= 1, got {coarsen}")
    indices = coeffs.grid.sample_indices(coarsen)
    fine = 2 * indices
    return BarredCoefficients(coeffs.grid.subgrid(indices), coeffs.model.family, coeffs.model.N,
                              coeffs.detuning_integral()[fine], coeffs.coefficient_integral()[fine])


def row_integrals(grid: TimeGrid, corr: CorrelationSpec, y):
    """H(s_k) = int_0^{s_k} alpha(s_k, r) y(r) dr by the trapezoid rule on every row"""
    y = np.asarray(y, dtype=complex)
    out = np.zeros_like(y)
    strength = corr.strength
    for k, step in enumerate(grid.steps):
        decay = np.exp(-corr.gamma * step)
        out[k + 1] = decay * out[k] + strength * 0.5 * step * (decay * y[k] + y[k + 1])
    return out


def square_integral(grid: TimeGrid, corr: CorrelationSpec, x, y):
    """int int_{[0,t]^2} alpha(s1, s2) x(s1) y(s2) for every t on the grid"""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    integrand = x * row_integrals(grid, corr, y) + y * row_integrals(grid, corr, x)
    return cumulative_trapezoid(ComplexSeries(grid, integrand)).values


def square_integral_direct(grid: TimeGrid, corr: CorrelationSpec, x, y):
    """Same quadrature as square_integral with every row summed explicitly (quadratic cost)"""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    t = grid.points
    rows_x = np.zeros_like(x)
    rows_y = np.zeros_like(y)
    for k in range(1, grid.size):
        kernel = corr.alpha(t[k], t[:k + 1])
        rows_y[k] = integrate.trapezoid(kernel * y[:k + 1], t[:k + 1])
        rows_x[k] = integrate.trapezoid(kernel * x[:k + 1], t[:k + 1])
    integrand = x * rows_y + y * rows_x
    return cumulative_trapezoid(ComplexSeries(grid, integrand)).values


def _curve(grid, values, label):
    values = np.real(values)
    return FidelityCurve(grid, values, np.zeros_like(values), 0, label=label)


def fidelity_two_level(coeffs: CoefficientSeries, coarsen=None):
    """1/4 (1 + F_R^2 + 2 F_R F_I + int int alpha x(s1) x*(s2)), x = E-bar F-bar"""
    if coeffs.model.family is not Family.TWO_LEVEL:
        raise ValueError("fidelity_two_level needs the two-level model")
    bars = barred_coefficients(coeffs, coarsen)
    F_R, F_I = bars.Fbar_R, bars.Fbar_I
    x = F_R / bars.Kbar
    memory = square_integral(bars.grid, coeffs.corr, x, np.conj(x))
    return _curve(bars.grid, 0.25 * (1.0 + F_R ** 2 + 2.0 * F_R * F_I + memory), "two_level analytic")


def fidelity_multilevel(coeffs: CoefficientSeries, coarsen=None):
    """1/(N+1)^2 (1 + N^2 F_R^{2N} + 2N F_R^N F'_I + N^2 int int alpha x(s1) x*(s2)), x = E-bar^2 F-bar^N"""
    if coeffs.model.family is not Family.MULTI_LEVEL:
        raise ValueError("fidelity_multilevel needs the multi-level model")
    bars = barred_coefficients(coeffs, coarsen)
    N = coeffs.model.N
    F_RN = bars.Fbar_R ** N
    x = F_RN / bars.Kbar
    memory = square_integral(bars.grid, coeffs.corr, x, np.conj(x))
    value = (1.0 + N ** 2 * F_RN ** 2 + 2.0 * N * F_RN * bars.Fbar_I + N ** 2 * memory) / (N + 1) ** 2
    return _curve(bars.grid, value, "multi_level analytic")


def fidelity_weak_coupling(coeffs: CoefficientSeries, coarsen=None):
    """
    F -> 0 limit: 1/(N+1)^2 (1 + N^2 + 2N + N^2 int int alpha x(s1) x*(s2)) with
    x = E-bar^2 (multi-level) or E-bar (two-level). Can exceed 1.
    """
    family = coeffs.model.family
    if family is Family.QUTRIT:
        raise ValueError("the weak-coupling formula covers the two-level and multi-level models")
    bars = barred_coefficients(coeffs, coarsen)
    N = coeffs.model.N if family is Family.MULTI_LEVEL else 1
    x = bars.Ebar ** 2 if family is Family.MULTI_LEVEL else bars.Ebar
    memory = square_integral(bars.grid, coeffs.corr, x, np.conj(x))
    value = (1.0 + N ** 2 + 2.0 * N + N ** 2 * memory) / (N + 1) ** 2
    return _curve(bars.grid, value, "weak coupling analytic")


def markov_two_level_fidelity(grid: TimeGrid, Gamma=1.0):
    """Memoryless limit of the undriven two-level fidelity: 1/2 + 1/2 exp(-Gamma t / 2)"""
    t = grid.points - grid.t_start
    return _curve(grid, 0.5 + 0.5 * np.exp(-0.5 * Gamma * t), "markov analytic")


def _trapezoid_weights(points):
    """Final (interior) trapezoid weight of every point"""
    steps = np.diff(points)
    weights = np.zeros(points.size)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def quadruple_integral(grid: TimeGrid, corr: CorrelationSpec, a, c):
    """
    Q(t) = int int_{[0,t]^2} ds du a(s) a*(u) B(s, u) with
    B(s, u) = alpha(s,u) I(s,u) + Phi(u,s) Phi(s,u)*,
    Phi(x, y) = int_0^y alpha(x, r) c(r) dr and I(s, u) = int_0^s c(r) Phi(r, u)* dr,
    which is M|int_0^t ds z*_s a(s) int_0^s z*_r c(r) dr|^2 for the complex OU noise.

    Trapezoid rule everywhere, streamed row by row: O(M^2) time and O(M) memory.
    """
    t = grid.points
    a = np.asarray(a, dtype=complex)
    c = np.asarray(c, dtype=complex)
    steps = grid.steps
    weights = _trapezoid_weights(t)
    out = np.zeros(grid.size, dtype=complex)

    # row = Phi(n, .), column = Phi(., n), i_row = I(n, .), i_col = I(., n), all over 0..n
    row = np.zeros(1, dtype=complex)
    column = np.zeros(1, dtype=complex)
    i_row = np.zeros(1, dtype=complex)
    i_col = np.zeros(1, dtype=complex)
    alpha_row = np.array([corr.strength])
    settled = 0.0j
    for n in range(grid.size):
        if n > 0:
            h = steps[n - 1]
            prev_row = row
            alpha_row = corr.alpha(t[n], t[:n + 1])
            row = integrate.cumulative_trapezoid(alpha_row * c[:n + 1], t[:n + 1], initial=0)
            column = column + 0.5 * h * (corr.alpha(t[:n], t[n - 1]) * c[n - 1] + alpha_row[:n] * c[n])
            column = np.append(column, row[n])
            i_col = integrate.cumulative_trapezoid(c[:n + 1] * np.conj(column), t[:n + 1], initial=0)
            i_row = i_row + 0.5 * h * (c[n - 1] * np.conj(prev_row) + c[n] * np.conj(row[:n]))
            i_row = np.append(i_row, i_col[n])

        forward = a[n] * np.conj(a[:n + 1]) * (alpha_row * i_row + column * np.conj(row))
        backward = a[:n + 1] * np.conj(a[n]) * (alpha_row * i_col + row * np.conj(column))
        cross = np.sum(weights[:n] * (forward[:n] + backward[:n]))
        diagonal = forward[n]
        if n > 0:
            edge = 0.5 * steps[n - 1]
            out[n] = settled + edge * cross + edge ** 2 * diagonal
        settled += weights[n] * cross + weights[n] ** 2 * diagonal
    return out


def quadruple_integral_brute(grid: TimeGrid, corr: CorrelationSpec, a, c):
    """quadruple_integral with every sum written out (quartic cost, small grids only)"""
    t = grid.points
    a = np.asarray(a, dtype=complex)
    c = np.asarray(c, dtype=complex)
    size = grid.size

    def weights_to(n):
        w = np.zeros(size)
        if n > 0:
            steps = np.diff(t[:n + 1])
            w[:n] += 0.5 * steps
            w[1:n + 1] += 0.5 * steps
        return w

    alpha = corr.alpha(t[:, None], t[None, :])
    phi = np.zeros((size, size), dtype=complex)
    for x in range(size):
        for y in range(size):
            w = weights_to(y)
            phi[x, y] = sum(w[r] * alpha[x, r] * c[r] for r in range(y + 1))
    inner = np.zeros((size, size), dtype=complex)
    for i in range(size):
        w = weights_to(i)
        for k in range(size):
            inner[i, k] = sum(w[j] * c[j] * np.conj(phi[j, k]) for j in range(i + 1))
    pairing = alpha.T * inner + phi.T * np.conj(phi)
    out = np.zeros(size, dtype=complex)
    for n in range(size):
        w = weights_to(n)
        out[n] = sum(w[i] * w[m] * a[i] * np.conj(a[m]) * pairing[i, m]
                     for i in range(n + 1) for m in range(n + 1))
    return out


def fidelity_qutrit(coeffs: CoefficientSeries, coarsen=None, brute_force=False):
    """
    Noise-free O-bar qutrit fidelity with psi_0 = (|0>+|1>+|2>)/sqrt(3):
    9 F = |1 + F1 + F2|^2 + kappa^2 M|int z* y_t|^2 + kappa^4 M|int z* a int z* B|^2,
    y_t(s) = F-bar_1(t) B-bar(s) + a(s), a = E-bar F-bar_1.
    """
    if coeffs.model.family is not Family.QUTRIT:
        raise ValueError("fidelity_qutrit needs the qutrit model")
    bars = barred_coefficients(coeffs, coarsen)
    grid, corr = bars.grid, coeffs.corr
    kappa = coeffs.model.kappa
    F1, F2 = bars.Fbar(1), bars.Fbar(2)
    B = bars.Bbar
    a = bars.Ebar * F1
    constant = np.abs(1.0 + F1 + F2) ** 2
    linear = (np.abs(F1) ** 2 * square_integral(grid, corr, B, np.conj(B))
              + 2.0 * np.real(F1 * square_integral(grid, corr, B, np.conj(a)))
              + square_integral(grid, corr, a, np.conj(a)))
    if brute_force:
        if grid.size > 81:
            raise ValueError(f"the brute-force evaluator is limited to 80 steps, got {grid.n_steps}")
        quadratic = quadruple_integral_brute(grid, corr, a, B)
    else:
        quadratic = quadruple_integral(grid, corr, a, B)
    value = (constant + kappa ** 2 * np.real(linear) + kappa ** 4 * np.real(quadratic)) / 9.0
    return _curve(grid, value, "qutrit analytic")


def evaluate(coeffs: CoefficientSeries, coarsen=None, weak_coupling=False):
    """Analytic fidelity of the coefficients' model family"""
    logger = get_logger()
    family = coeffs.model.family
    logger.info(f"Evaluating analytic {family.value} fidelity (coarsen={coarsen or default_coarsen(coeffs)})")
    if weak_coupling:
        return fidelity_weak_coupling(coeffs, coarsen)
    if family is Family.TWO_LEVEL:
        return fidelity_two_level(coeffs, coarsen)
    if family is Family.QUTRIT:
        return fidelity_qutrit(coeffs, coarsen)
    return fidelity_multilevel(coeffs, coarsen)
