"""Cooperative uniform bearing-only pseudo-linear information filter.

The target state x = [p; v] (6-dim, inertial frame) follows discrete
double-integrator dynamics

    x_k = A x_{k-1} + B q_k,      A = [[I, dt I], [0, I]],
                                  B = [[dt^2/2 I], [dt I]],

with unknown target acceleration modeled as process noise q ~ N(0, Q).
Each pursuer i measures a noisy unit bearing lam~_i = lam_i + nu_i.
Multiplying the measurement equation by the orthogonal projector of the
measured bearing turns it pseudo-linear:

    H_i x_Pi = H_i x + r_i P_lam~ nu_i,      H_i = [P_lam~, 0_3x3],

which the filter fuses additively in information form (Y = P^-1,
y = Y x).  The information form keeps the update well defined when the
measurement count fluctuates or drops to zero (limited field of view),
and the vector bearing representation avoids angle singularities: no
trigonometric function appears anywhere in this module.

The per-measurement noise matrix V_i Sigma V_i^T (V_i = r^_i P_lam~) has
exact rank 2, hence the pseudo-inverse in the update.

``plkf_oracle_step`` is a covariance-form pseudo-linear Kalman filter over
the same measurement model.  It exists only as an independent reference
for equivalence testing; do not use it in production paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

from .errors import InvalidDt, NotYetObservable, NumericalFailure
from .geometry import EPS_NORM, pinv_psd, project

# Condition-number guard for the 6x6 inversions.
KAPPA_MAX = 1e12

# Default weak prior: keeps the estimate defined from step 0 while adding
# negligible information compared to a single bearing fusion.
DEFAULT_INITIAL_INFORMATION = 1e-2


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class InformationState:
    """Information-form belief over the target state.

    ``y`` is the information vector (y = Y x^), ``Y`` the information
    matrix (inverse covariance), ``k`` the step index.  ``skipped`` counts
    measurements dropped for degenerate predicted range, cumulative over
    the filter's life.
    """

    y: np.ndarray
    Y: np.ndarray
    k: int = 0
    skipped: int = 0

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).reshape(6)
        Y = np.asarray(self.Y, dtype=float).reshape(6, 6)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(Y))):
            raise NumericalFailure("information state contains non-finite entries")
        scale = max(1.0, float(np.abs(Y).max()))
        if float(np.abs(Y - Y.T).max()) > 1e-9 * scale:
            raise NumericalFailure("information matrix lost symmetry")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "Y", Y)


@dataclass(frozen=True)
class BearingMeasurement:
    """One noisy unit-direction measurement from a pursuer to the target.

    ``lambda_tilde`` is the measured bearing (approximately unit; noise is
    additive and deliberately NOT renormalized — the projector normalizes
    internally).  ``pursuer_state`` is the known 6-dim pursuer state
    [p; v] in the same inertial frame.  ``sigma`` is the 3x3 bearing-noise
    covariance.
    """

    lambda_tilde: np.ndarray
    pursuer_state: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        lam = np.asarray(self.lambda_tilde, dtype=float).reshape(3)
        xp = np.asarray(self.pursuer_state, dtype=float).reshape(6)
        sig = np.asarray(self.sigma, dtype=float).reshape(3, 3)
        n = float(np.linalg.norm(lam))
        if not 0.5 <= n <= 1.5:
            raise ValueError(
                f"measured bearing norm {n:.3f} outside sanity bound [0.5, 1.5]"
            )
        object.__setattr__(self, "lambda_tilde", lam)
        object.__setattr__(self, "pursuer_state", xp)
        object.__setattr__(self, "sigma", sig)


@dataclass(frozen=True)
class FilterParams:
    """Sampling step, process noise and initial belief for the filter."""

    dt: float
    q: np.ndarray  # 3x3 process-noise covariance on target acceleration
    initial_estimate: np.ndarray = field(
        default_factory=lambda: np.zeros(6)
    )
    initial_information: np.ndarray = field(
        default_factory=lambda: DEFAULT_INITIAL_INFORMATION * np.eye(6)
    )

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidDt(f"dt must be positive and finite, got {self.dt!r}")
        q = np.asarray(self.q, dtype=float).reshape(3, 3)
        object.__setattr__(self, "q", q)
        object.__setattr__(
            self, "initial_estimate",
            np.asarray(self.initial_estimate, dtype=float).reshape(6),
        )
        object.__setattr__(
            self, "initial_information",
            np.asarray(self.initial_information, dtype=float).reshape(6, 6),
        )
        a, b, a_inv = make_transition(self.dt)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_a_inv", a_inv)
        object.__setattr__(self, "_bqbt", b @ q @ b.T)
        try:
            q_inv = np.linalg.inv(q) if np.linalg.cond(q) < 1e12 else None
        except np.linalg.LinAlgError:
            q_inv = None
        object.__setattr__(self, "_q_inv", q_inv)

    def initial_state(self) -> InformationState:
        y0 = self.initial_information @ self.initial_estimate
        return InformationState(y=y0, Y=self.initial_information.copy(), k=0)


def make_transition(dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Double-integrator transition (A, B) plus the closed-form A^-1."""
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidDt(f"dt must be positive and finite, got {dt!r}")
    i3 = np.eye(3)
    a = np.eye(6)
    a[:3, 3:] = dt * i3
    b = np.vstack([0.5 * dt * dt * i3, dt * i3])
    a_inv = np.eye(6)
    a_inv[:3, 3:] = -dt * i3
    return a, b, a_inv


def _guarded_solve(m: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(m) > KAPPA_MAX:
        raise NumericalFailure(f"{what}: condition number exceeds {KAPPA_MAX:.1e}")
    return np.linalg.solve(m, rhs)


def predict(state: InformationState, params: FilterParams) -> InformationState:
    """Prior information state through the double-integrator model.

    M = A^-T Y A^-1;  Y^- = (I + M B Q B^T)^-1 M;
    y^- = (I + M B Q B^T)^-1 A^-T y.

    For invertible Q the equivalent Sherman-Morrison-Woodbury form

        Y^- = M - (M B) (Q^-1 + B^T M B)^-1 (M B)^T
        y^- = A^-T y - (M B) (Q^-1 + B^T M B)^-1 B^T A^-T y

    is used: it inverts a well-conditioned 3x3 instead of the 6x6, which
    otherwise overflows the condition guard after long steady tracking
    (information grows large and anisotropic).
    """
    a_inv = params._a_inv
    m = _symmetrize(a_inv.T @ state.Y @ a_inv)
    y_rot = a_inv.T @ state.y

    if params._q_inv is not None:
        b = params._b
        mb = m @ b
        k = params._q_inv + b.T @ mb  # 3x3 SPD
        if np.linalg.cond(k) > KAPPA_MAX:
            raise NumericalFailure("predict: noise-update block ill-conditioned")
        y_prior = m - mb @ np.linalg.solve(k, mb.T)
        yvec_prior = y_rot - mb @ np.linalg.solve(k, b.T @ y_rot)
    elif not params._bqbt.any():
        y_prior = m  # Q = 0: pure noiseless propagation
        yvec_prior = y_rot
    else:
        s = np.eye(6) + m @ params._bqbt
        y_prior = _guarded_solve(s, m, "predict")
        yvec_prior = _guarded_solve(s, y_rot, "predict")
    return InformationState(
        y=yvec_prior, Y=_symmetrize(y_prior), k=state.k + 1, skipped=state.skipped
    )


def correct(
    prior: InformationState, measurements: Sequence[BearingMeasurement]
) -> InformationState:
    """Fuse any number of bearing measurements additively.

    Per measurement i:  H_i = [P_lam~, 0],  V_i = r^_i P_lam~ with
    r^_i = |p^- - p_i| (predicted target position minus pursuer position),

        y += H_i^T (V_i Sigma_i V_i^T)+ H_i x_Pi
        Y += H_i^T (V_i Sigma_i V_i^T)+ H_i.

    An empty measurement list returns the prior unchanged (target lost).
    Measurements with degenerate predicted range are skipped and counted.
    """
    if not measurements:
        return replace(prior)

    x_prior = _guarded_solve(prior.Y, prior.y, "correct")
    p_prior = x_prior[:3]

    dy = np.zeros(6)
    d_information = np.zeros((6, 6))
    skipped = 0
    for meas in measurements:
        r_hat = float(np.linalg.norm(p_prior - meas.pursuer_state[:3]))
        if r_hat <= EPS_NORM:
            skipped += 1
            continue
        p_lam = project(meas.lambda_tilde)
        v = r_hat * p_lam
        w = pinv_psd(_symmetrize(v @ meas.sigma @ v.T))
        g = p_lam @ w @ p_lam  # position block of H^T W H
        dy[:3] += g @ meas.pursuer_state[:3]
        d_information[:3, :3] += g

    return InformationState(
        y=prior.y + dy,
        Y=_symmetrize(prior.Y + d_information),
        k=prior.k,
        skipped=prior.skipped + skipped,
    )


def estimate(state: InformationState) -> tuple[np.ndarray, np.ndarray]:
    """Recover (x^, P) = (Y^-1 y, Y^-1) from the information state.

    Raises :class:`NotYetObservable` while Y is singular; callers must not
    demand a point estimate before enough bearings have been fused.
    """
    cond = np.linalg.cond(state.Y)
    if not np.isfinite(cond) or cond > KAPPA_MAX:
        raise NotYetObservable(
            f"information matrix condition {cond:.2e} exceeds {KAPPA_MAX:.1e}"
        )
    x = np.linalg.solve(state.Y, state.y)
    cov = _symmetrize(np.linalg.inv(state.Y))
    return x, cov


# --------------------------------------------------------------------------
# Covariance-form reference (test oracle only)
# --------------------------------------------------------------------------

def plkf_oracle_step(
    state: tuple[np.ndarray, np.ndarray],
    measurements: Sequence[BearingMeasurement],
    params: FilterParams,
) -> tuple[np.ndarray, np.ndarray]:
    """One predict/update of the covariance-form pseudo-linear KF.

    Stacks all measurements into one linear update with block-diagonal
    noise V_i Sigma_i V_i^T and an SVD pseudo-inverse in the gain (the
    innovation covariance is rank deficient by construction).  Joseph form
    keeps the covariance symmetric.  Test oracle only.
    """
    x, cov = state
    x = np.asarray(x, dtype=float).reshape(6)
    cov = np.asarray(cov, dtype=float).reshape(6, 6)

    a, _, _ = make_transition(params.dt)
    x_prior = a @ x
    cov_prior = _symmetrize(a @ cov @ a.T + params._bqbt)
    if not measurements:
        return x_prior, cov_prior

    n = len(measurements)
    h = np.zeros((3 * n, 6))
    z = np.zeros(3 * n)
    r_noise = np.zeros((3 * n, 3 * n))
    for i, meas in enumerate(measurements):
        p_lam = project(meas.lambda_tilde)
        r_hat = float(np.linalg.norm(x_prior[:3] - meas.pursuer_state[:3]))
        v = r_hat * p_lam
        sl = slice(3 * i, 3 * i + 3)
        h[sl, :3] = p_lam
        z[sl] = p_lam @ meas.pursuer_state[:3]
        r_noise[sl, sl] = v @ meas.sigma @ v.T

    s = h @ cov_prior @ h.T + r_noise
    gain = cov_prior @ h.T @ np.linalg.pinv(_symmetrize(s))
    x_post = x_prior + gain @ (z - h @ x_prior)
    ikh = np.eye(6) - gain @ h
    cov_post = _symmetrize(ikh @ cov_prior @ ikh.T + gain @ r_noise @ gain.T)
    if not (np.all(np.isfinite(x_post)) and np.all(np.isfinite(cov_post))):
        raise NumericalFailure("oracle PLKF produced non-finite state")
    return x_post, cov_post


# --------------------------------------------------------------------------
# Trace export
# --------------------------------------------------------------------------

FILTER_TRACE_HEADER = (
    ["k"]
    + [f"xhat_{name}" for name in ("px", "py", "pz", "vx", "vy", "vz")]
    + [f"cov_{name}" for name in ("px", "py", "pz", "vx", "vy", "vz")]
    + ["n_measurements"]
)


class FilterTraceWriter:
    """Per-step CSV trace: (k, x^ (6), diag(P) (6), n_measurements)."""

    def __init__(self, stream: IO[str]) -> None:
        self._writer = csv.writer(stream, lineterminator="\n")
        self._writer.writerow(FILTER_TRACE_HEADER)

    def write(
        self, state: InformationState, n_measurements: int
    ) -> None:
        try:
            x, cov = estimate(state)
            diag = np.diag(cov)
        except NotYetObservable:
            x = np.full(6, np.nan)
            diag = np.full(6, np.nan)
        row = (
            [str(state.k)]
            + [repr(float(v)) for v in x]
            + [repr(float(v)) for v in diag]
            + [str(n_measurements)]
        )
        self._writer.writerow(row)
