"""Ground-state S=1 Hamiltonian of the NV center in a tilted static field.

H = gamma_nv * B0 * (sin(theta) Sx + cos(theta) Sz) + D * Sz^2, in MHz,
written in the zero-field basis {|+1>, |0>, |-1>}.  theta is the polar
angle between the field and the NV symmetry axis; the azimuthal angle is
irrelevant for the spectrum and is fixed to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_CONSTANTS, KET_MINUS1, KET_PLUS1, KET_ZERO, SX, SZ,
                   DegenerateTransitionError, FieldEstimate, NvSenseError,
                   PhysicalConstants)


class EigenConvergenceError(NvSenseError, ArithmeticError):
    """Eigendecomposition residual exceeded tolerance."""


@dataclass(frozen=True)
class NvHamiltonian:
    """3x3 Hermitian matrix in MHz plus the field that generated it."""

    matrix: np.ndarray
    b0: float     # mT
    theta: float  # rad

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError(f"matrix must be 3x3, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("matrix must be Hermitian")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class TransitionPair:
    """The two |0> -> |+-1> resonance frequencies, MHz."""

    f_minus: float
    f_plus: float

    def __post_init__(self):
        if not (math.isfinite(self.f_minus) and math.isfinite(self.f_plus)):
            raise ValueError("transition frequencies must be finite")
        if not 0.0 < self.f_minus < self.f_plus:
            raise ValueError(
                f"need 0 < f_minus < f_plus, got ({self.f_minus}, {self.f_plus}); "
                "outside the B0 < D/gamma regime this labelling breaks down")


def build_hamiltonian(b0: float, theta: float,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS,
                      ) -> NvHamiltonian:
    """Zeeman + zero-field-splitting Hamiltonian for field (b0, theta)."""
    if not (math.isfinite(b0) and b0 >= 0):
        raise ValueError(f"b0 must be finite and >= 0 mT, got {b0!r}")
    if not (math.isfinite(theta) and 0 <= theta <= math.pi / 2):
        raise ValueError(f"theta must lie in [0, pi/2] rad, got {theta!r}")
    gb = constants.gamma_nv * b0
    h = gb * (math.sin(theta) * SX + math.cos(theta) * SZ)
    h = h + constants.zero_field_d * (SZ @ SZ)
    return NvHamiltonian(h, b0=b0, theta=theta)


def eigen_hermitian_3(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors (columns) of a 3x3 Hermitian.

    Accepts an NvHamiltonian or a bare array.  The decomposition is
    verified against the residual || H v - v diag(w) ||_F; if it exceeds
    1e-9 * ||H||_F the matrix is re-symmetrized and retried once before
    raising EigenConvergenceError.
    """
    m = h.matrix if isinstance(h, NvHamiltonian) else np.asarray(h, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    scale = max(1.0, np.linalg.norm(m))
    for attempt in range(2):
        w, v = np.linalg.eigh(m)
        resid = np.linalg.norm(m @ v - v * w)
        if resid <= 1e-9 * scale:
            return w, v
        m = 0.5 * (m + m.conj().T)
    raise EigenConvergenceError(
        f"eigendecomposition residual {resid:.3e} exceeds 1e-9 * ||H||")


def _labelled_levels(ham: NvHamiltonian) -> dict[str, float]:
    """Map zero-field labels '+1', '0', '-1' to eigenenergies by overlap.

    The |0>-like state is found first (its overlap tie is the spec'd
    degeneracy signal); the remaining pair is assigned as the permutation
    with the larger total overlap, so the labelling is always one-to-one.
    """
    w, v = eigen_hermitian_3(ham)
    overlap_0 = np.abs(v.conj().T @ KET_ZERO) ** 2
    order = np.argsort(overlap_0)[::-1]
    if overlap_0[order[0]] - overlap_0[order[1]] <= 1e-9:
        raise DegenerateTransitionError(
            f"two eigenstates carry equal |0> character "
            f"(overlaps {overlap_0[order[0]]:.6f} vs "
            f"{overlap_0[order[1]]:.6f}); labels are ambiguous at this field")
    idx0 = int(order[0])
    i, j = (idx for idx in range(3) if idx != idx0)
    op = np.abs(v.conj().T @ KET_PLUS1) ** 2
    om = np.abs(v.conj().T @ KET_MINUS1) ** 2
    straight = op[i] + om[j]   # i -> +1, j -> -1
    swapped = op[j] + om[i]
    if abs(straight - swapped) <= 1e-9:
        raise DegenerateTransitionError(
            "the |+1>-like and |-1>-like eigenstates mix equally; labels "
            "are ambiguous at this field")
    if swapped > straight:
        i, j = j, i
    return {"0": float(w[idx0]), "+1": float(w[i]), "-1": float(w[j])}


def transition_frequencies(b0: float, theta: float,
                           constants: PhysicalConstants = DEFAULT_CONSTANTS,
                           ) -> TransitionPair:
    """Resonances |0> -> |-1> (f_minus) and |0> -> |+1> (f_plus), MHz."""
    levels = _labelled_levels(build_hamiltonian(b0, theta, constants))
    try:
        return TransitionPair(f_minus=levels["-1"] - levels["0"],
                              f_plus=levels["+1"] - levels["0"])
    except ValueError as exc:
        # e.g. zero field, where the |+-1> pair is exactly degenerate
        raise DegenerateTransitionError(str(exc)) from None


def _forward_pair(b0, theta, constants) -> np.ndarray:
    pair = transition_frequencies(b0, theta, constants)
    return np.array([pair.f_minus, pair.f_plus])


# Starting tilts for the inversion; the forward map is even in theta, so a
# start at exactly 0 has zero gradient and would stick there.
_THETA_STARTS_DEG = (0.0, 5.0, 10.0, 20.0)


def invert_field(pair: TransitionPair,
                 freq_errors: tuple[float, float] = (0.0, 0.0),
                 constants: PhysicalConstants = DEFAULT_CONSTANTS,
                 b_max: float = 300.0) -> FieldEstimate:
    """Recover (B0, theta) from a measured transition pair.

    Solves the 2x2 nonlinear least-squares problem with multiple tilt
    starts and propagates freq_errors (1 sigma, MHz) through the inverse
    Jacobian.  Raises ValueError when the pair cannot come from the S=1
    model within b0 <= b_max.
    """
    from .fitting import FitProblem, nlls_fit

    sig_m, sig_p = (float(freq_errors[0]), float(freq_errors[1]))
    if sig_m < 0 or sig_p < 0:
        raise ValueError("freq_errors must be non-negative")
    d = constants.zero_field_d
    if abs(pair.f_minus + pair.f_plus - 2.0 * d) > constants.gamma_nv * b_max:
        raise ValueError(
            f"f_minus + f_plus = {pair.f_minus + pair.f_plus:.1f} MHz is too far "
            f"from 2D = {2 * d:.1f} MHz for any field below {b_max} mT")

    target = np.array([pair.f_minus, pair.f_plus])
    b_init = min(max((pair.f_plus - pair.f_minus) / (2.0 * constants.gamma_nv),
                     1e-3), b_max)

    def model(params, _x):
        # The search box corners (large tilt at high field) can hit a
        # genuinely degenerate labelling; a huge finite residual there makes
        # the solver reject the trial instead of dying.
        try:
            return _forward_pair(params[0], params[1], constants)
        except DegenerateTransitionError:
            return np.array([1e9, -1e9])

    best = None
    for theta0 in _THETA_STARTS_DEG:
        problem = FitProblem(
            model=model,
            x=np.array([0.0, 1.0]),
            y=target,
            init=np.array([b_init, math.radians(theta0)]),
            bounds=((1e-3, b_max), (0.0, math.pi / 2)),
            tol=1e-14,
            max_iter=200,
        )
        result = nlls_fit(problem)
        if best is None or result.ss_res < best.ss_res:
            best = result
    b_fit, theta_fit = best.params

    b0_err = theta_err = 0.0
    if sig_m > 0 or sig_p > 0:
        jac = _pair_jacobian(b_fit, theta_fit, constants)
        sigma = np.diag([sig_m ** 2, sig_p ** 2])
        try:
            jinv = np.linalg.inv(jac)
        except np.linalg.LinAlgError:
            jinv = np.linalg.pinv(jac)
        cov = jinv @ sigma @ jinv.T
        b0_err = math.sqrt(max(cov[0, 0], 0.0))
        theta_err = math.sqrt(max(cov[1, 1], 0.0))
    return FieldEstimate(b0=float(b_fit), theta=float(theta_fit),
                         b0_err=b0_err, theta_err=theta_err)


def _pair_jacobian(b0, theta, constants) -> np.ndarray:
    """d(f_minus, f_plus)/d(b0, theta) by central differences."""
    db = 1e-5 * max(abs(b0), 1.0)
    dth = 1e-5
    jac = np.empty((2, 2))
    jac[:, 0] = (_forward_pair(b0 + db, theta, constants)
                 - _forward_pair(max(b0 - db, 0.0), theta, constants)) / (
                     b0 + db - max(b0 - db, 0.0))
    th_hi = min(theta + dth, math.pi / 2)
    th_lo = max(theta - dth, 0.0)
    jac[:, 1] = (_forward_pair(b0, th_hi, constants)
                 - _forward_pair(b0, th_lo, constants)) / (th_hi - th_lo)
    return jac


def g_value(f_res: float, b0: float,
            constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Electron g-factor of a bare spin resonant at f_res (MHz) in b0 (mT)."""
    if not (math.isfinite(b0) and b0 > 0):
        raise ValueError(f"b0 must be positive, got {b0!r}")
    if not (math.isfinite(f_res) and f_res > 0):
        raise ValueError(f"f_res must be positive, got {f_res!r}")
    return f_res / (constants.mu_b_over_h * b0)
