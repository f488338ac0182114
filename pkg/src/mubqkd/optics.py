"""Jones calculus for Bob's analyzer: waveplates, PBS projections, angle synthesis.

Angles are in radians, measured counterclockwise from horizontal to the fast
axis. A setting (alpha, beta) synthesizes the projection

    |phi> = QWP(beta) HWP(alpha) |H>

which is the state accepted at the transmitted PBS port; the reflected port
accepts QWP(beta) HWP(alpha) |V>, its orthogonal complement.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import WaveplateSolveError
from .qstate import H, V, check_pure, normalize, overlap

SOLVE_TOL = 1e-12


@dataclass(frozen=True)
class WaveplateSetting:
    hwp_angle: float
    qwp_angle: float

    def __post_init__(self):
        object.__setattr__(self, "hwp_angle", _wrap(self.hwp_angle))
        object.__setattr__(self, "qwp_angle", _wrap(self.qwp_angle))

    @property
    def degrees(self):
        return np.degrees(self.hwp_angle), np.degrees(self.qwp_angle)

    def __str__(self):
        h, q = self.degrees
        return f"HWP {h:.4f} deg, QWP {q:.4f} deg"

    def matrix(self):
        return qwp(self.qwp_angle) @ hwp(self.hwp_angle)


def _wrap(angle):
    a = float(np.mod(angle, np.pi))
    # fold values that round to pi back onto 0
    return 0.0 if np.isclose(a, np.pi, rtol=0, atol=1e-13) else a


def hwp(alpha):
    c, s = np.cos(2 * alpha), np.sin(2 * alpha)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(beta):
    c, s = np.cos(beta), np.sin(beta)
    off = (1 - 1j) * s * c
    return np.array([[c**2 + 1j * s**2, off], [off, s**2 + 1j * c**2]], dtype=complex)


def rotator(theta):
    """Polarization rotation by ``theta`` (H -> cos theta H + sin theta V)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def apply(jones, state):
    return normalize(np.asarray(jones) @ np.asarray(state, dtype=complex))


def synthesize(setting):
    """The state accepted at the transmitted port for ``setting``."""
    return setting.matrix() @ H


def pbs_projectors(setting):
    """(transmitted, reflected) acceptance states of the analyzer.

    Light entering the analyzer sees M = (QWP HWP)^dagger before the PBS, so
    the ports accept M^dagger |H> and M^dagger |V>.
    """
    m = setting.matrix()
    return m @ H, m @ V


def _stokes(psi):
    a, b = psi
    s1 = abs(a) ** 2 - abs(b) ** 2
    s2 = 2 * np.real(np.conj(a) * b)
    s3 = 2 * np.imag(np.conj(a) * b)
    return s1, s2, s3


def _candidates(target):
    """Closed-form settings: choose beta so that QWP(beta)^dagger target is linear."""
    s1, s2, s3 = _stokes(target)
    beta0 = 0.5 * np.arctan2(s2, s1)
    out = []
    for beta in (beta0, beta0 + np.pi / 2):
        lin = qwp(beta).conj().T @ target
        # strip the global phase using the larger component
        k = int(np.argmax(np.abs(lin)))
        lin = lin * np.exp(-1j * np.angle(lin[k]))
        theta = np.arctan2(lin[1].real, lin[0].real)
        for alpha in (theta / 2, theta / 2 + np.pi / 2):
            out.append(WaveplateSetting(alpha, beta))
    return out


def _residual(setting, target):
    return 1 - overlap(target, synthesize(setting))


def solve_waveplate_angles(target, max_iter=200):
    """HWP/QWP angles realizing ``target`` at the transmitted port.

    Among all exact solutions the one with the smallest alpha^2 + beta^2
    (angles folded into [0, pi)) is returned. If the closed form fails, a
    bounded Nelder-Mead refinement from a grid of starts is tried before
    raising :class:`WaveplateSolveError`.
    """
    target = check_pure(normalize(target), 2)
    cands = _candidates(target)
    good = [c for c in cands if _residual(c, target) <= SOLVE_TOL]
    if good:
        return min(good, key=lambda c: (c.hwp_angle**2 + c.qwp_angle**2, c.hwp_angle))

    best, best_res = None, np.inf
    starts = [(c.hwp_angle, c.qwp_angle) for c in cands]
    starts += [(a, b) for a in np.linspace(0, np.pi, 4, endpoint=False) for b in np.linspace(0, np.pi, 4, endpoint=False)]
    for x0 in starts:
        res = minimize(
            lambda x: _residual(WaveplateSetting(*x), target),
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": max_iter},
        )
        if res.fun < best_res:
            best, best_res = WaveplateSetting(*res.x), res.fun
        if best_res <= SOLVE_TOL:
            return best
    raise WaveplateSolveError("waveplate solver did not converge", best_res)
