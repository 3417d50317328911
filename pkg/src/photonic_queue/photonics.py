"""Wavepackets, chiral scattering, and gate and loss fidelity models.

Frequency convention: ``F(w) = (2 pi)^{-1/2} int f(t) e^{i w t} dt`` so that
``int |F|^2 dw = int |f|^2 dt = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ProtocolError, QuadratureError

QUAD_TOL = 1e-10
SUPPORT_WIDTHS = 8.0


def scattering_phase(omega, gamma_r: float):
    """Transmission ``t(w) = (w - i g/2) / (w + i g/2)`` of a chiral emitter."""
    if not gamma_r > 0:
        raise ProtocolError(f"gamma_R must be positive, got {gamma_r}")
    omega = np.asarray(omega, dtype=float)
    half = 0.5j * gamma_r
    out = (omega - half) / (omega + half)
    return complex(out) if out.ndim == 0 else out


def _gamma_gaussian(t, B, t0):
    return 2.0 * B / (math.sqrt(math.pi) * special.erfcx(B * (t - t0)))


@dataclass(frozen=True)
class WavepacketModel:
    """Single-photon envelope with its emission-rate schedule.

    ``lorentzian``: ``f(t) = sqrt(g) e^{-g t/2}`` for ``t >= 0`` with constant
    rate ``g = gamma_l``.  ``gaussian``: ``f(t) = (B^2/pi)^{1/4}
    e^{-B^2 (t-t0)^2/2}``, produced by the rate ``2B / (sqrt(pi) erfcx(B(t-t0)))``.
    """

    shape: str
    gamma_l: float | None = None
    B: float | None = None
    t0: float = 0.0

    def __post_init__(self):
        if self.shape == "lorentzian":
            if self.gamma_l is None or not self.gamma_l > 0:
                raise ProtocolError("a Lorentzian wavepacket needs gamma_l > 0")
        elif self.shape == "gaussian":
            if self.B is None or not self.B > 0:
                raise ProtocolError("a Gaussian wavepacket needs B > 0")
        else:
            raise ProtocolError(f"unknown wavepacket shape {self.shape!r}")

    @classmethod
    def lorentzian(cls, gamma_l: float) -> "WavepacketModel":
        return cls("lorentzian", gamma_l=gamma_l)

    @classmethod
    def gaussian(cls, B: float, t0: float = 0.0) -> "WavepacketModel":
        return cls("gaussian", B=B, t0=t0)

    @property
    def width(self) -> float:
        """Characteristic time scale: ``1/gamma_l`` or ``1/B``."""
        return 1.0 / self.gamma_l if self.shape == "lorentzian" else 1.0 / self.B

    def support(self) -> tuple:
        """Time window holding the packet up to ``exp(-SUPPORT_WIDTHS)``-level tails."""
        if self.shape == "lorentzian":
            return 0.0, 2.0 * 40.0 / self.gamma_l
        w = SUPPORT_WIDTHS / self.B
        return self.t0 - w, self.t0 + w

    def amplitude(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "lorentzian":
            g = self.gamma_l
            return np.where(t >= 0, np.sqrt(g) * np.exp(-0.5 * g * np.maximum(t, 0.0)), 0.0)
        return (self.B ** 2 / math.pi) ** 0.25 * np.exp(-0.5 * (self.B * (t - self.t0)) ** 2)

    def decay_rate(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "lorentzian":
            return np.where(t >= 0, self.gamma_l, 0.0)
        return _gamma_gaussian(t, self.B, self.t0)

    def spectrum(self, omega):
        """``|F(w)|^2``, normalised to unit area."""
        omega = np.asarray(omega, dtype=float)
        if self.shape == "lorentzian":
            g = self.gamma_l
            return (g / (2 * math.pi)) / (omega ** 2 + 0.25 * g * g)
        return np.exp(-(omega / self.B) ** 2) / (self.B * math.sqrt(math.pi))

    def norm(self) -> float:
        lo, hi = self.support()
        val, _ = integrate.quad(lambda t: float(self.amplitude(t)) ** 2, lo, hi,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def regenerate(self, t, start: float | None = None):
        """``sqrt(g(t)) exp(-1/2 int_start^t g)`` from the rate schedule alone."""
        lo = self.support()[0] if start is None else start
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for j, tj in enumerate(t):
            acc, _ = integrate.quad(lambda s: float(self.decay_rate(s)), lo, tj,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            out[j] = math.sqrt(float(self.decay_rate(tj))) * math.exp(-0.5 * acc)
        return out


# -- scattering overlap --------------------------------------------------------------


def _quad(fn, a, b, what):
    val, err = integrate.quad(fn, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    if not err <= 100 * QUAD_TOL:
        raise QuadratureError(f"{what}: quadrature residual {err:.3g} exceeds tolerance", err)
    return val


def overlap_closed_form(w: WavepacketModel, gamma_r: float) -> float:
    """Closed-form ``int f* f~ dt`` for both shapes."""
    if w.shape == "lorentzian":
        x = w.gamma_l / gamma_r
        return -(1.0 - x) / (1.0 + x)
    x = w.B / gamma_r
    return 1.0 - math.sqrt(math.pi) * special.erfcx(1.0 / (2.0 * x)) / x


def _overlap_frequency(w: WavepacketModel, gamma_r: float) -> complex:
    # Re t(w) is even and Im t(w) odd; both spectra are even, so the imaginary part vanishes.
    def re(om):
        return float(w.spectrum(om)) * (om * om - 0.25 * gamma_r ** 2) / (om * om + 0.25 * gamma_r ** 2)

    scale = w.gamma_l if w.shape == "lorentzian" else w.B
    cuts = sorted({0.0, 10.0 * scale, 10.0 * gamma_r, 40.0 * max(scale, gamma_r)})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += _quad(re, a, b, "scattered_overlap")
    total += _quad(re, cuts[-1], np.inf, "scattered_overlap")
    return complex(2.0 * total, 0.0)


def _overlap_time(w: WavepacketModel, gamma_r: float) -> complex:
    """``f~ = f - g_R int_{-inf}^t e^{-g_R (t-s)/2} f(s) ds`` integrated as an ODE."""
    lo, hi = w.support()
    if w.shape == "lorentzian":
        hi = 2.0 * 40.0 / min(w.gamma_l, gamma_r)

    def rhs(t, y):
        f = float(w.amplitude(t))
        g = y[0]
        return [-0.5 * gamma_r * g + f, f * g]

    sol = integrate.solve_ivp(rhs, (lo, hi), [0.0, 0.0], method="DOP853",
                              rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise QuadratureError(f"time-domain overlap failed: {sol.message}")
    return complex(1.0 - gamma_r * sol.y[1, -1], 0.0)


def scattered_overlap(w: WavepacketModel, gamma_r: float, method: str = "frequency") -> complex:
    """``int f*(t) f~(t) dt`` after one pass of the photon past the emitter.

    ``method`` is ``frequency`` (quadrature of ``|F|^2 t(w)`` over the real
    line), ``time`` (convolution kernel in the time domain), or ``closed``.
    """
    if not gamma_r > 0:
        raise ProtocolError(f"gamma_R must be positive, got {gamma_r}")
    if method == "closed":
        return complex(overlap_closed_form(w, gamma_r), 0.0)
    if method == "frequency":
        return _overlap_frequency(w, gamma_r)
    if method == "time":
        return _overlap_time(w, gamma_r)
    raise ProtocolError(f"unknown method {method!r}")


def _packet(shape: str, x: float, gamma_r: float = 1.0) -> WavepacketModel:
    if not x > 0:
        raise ProtocolError(f"x must be positive, got {x}")
    if shape == "lorentzian":
        return WavepacketModel.lorentzian(x * gamma_r)
    if shape == "gaussian":
        return WavepacketModel.gaussian(x * gamma_r)
    raise ProtocolError(f"unknown shape {shape!r}")


def fidelity_from_overlap(overlap: complex) -> float:
    """``F_Z = (4 + |3 + m|^2) / 20`` with ``m = -overlap``."""
    m = -overlap
    return (4.0 + abs(3.0 + m) ** 2) / 20.0


def phase_gate_fidelity(shape: str, x: float, method: str = "frequency") -> float:
    """Controlled-phase fidelity; ``x`` is ``gamma_L/gamma_R`` or ``B/gamma_R``."""
    return fidelity_from_overlap(scattered_overlap(_packet(shape, x), 1.0, method))


def lorentzian_phase_fidelity_closed(x: float) -> float:
    """``(2x(x + 3) + 5) / (5 (x + 1)^2)``."""
    return (2.0 * x * (x + 3.0) + 5.0) / (5.0 * (x + 1.0) ** 2)


# -- controlled-NOT (photon generation) ---------------------------------------------


def cnot_completion_error_closed(shape: str, *, T: float, gamma_l: float | None = None,
                                 B: float | None = None) -> float:
    if shape == "lorentzian":
        return math.exp(-0.5 * gamma_l * T)
    x = B * T / 4.0
    e = special.erf(x)
    return 1.0 - math.sqrt(2.0) * e / math.sqrt(1.0 + e)


def cnot_completion_asymptote(x: float) -> float:
    """Large-``x`` form ``e^{-x^2} / (sqrt(pi) x)`` with ``x = BT/4``."""
    return math.exp(-x * x) / (math.sqrt(math.pi) * x)


def cnot_completion_error(shape: str, *, T: float, gamma_l: float | None = None,
                          B: float | None = None, method: str = "quadrature") -> float:
    """Error of photon generation within half a period.

    ``1 - eps`` is the overlap of the ideal packet with the packet emitted
    when the drive schedule starts at the window start.  For the Lorentzian
    the window is ``[0, T/2]``; for the Gaussian (centred at 0) it is
    ``[-T/4, T/4]`` and the ideal packet's rate is accumulated from its
    support start.
    """
    if not T > 0:
        raise ProtocolError(f"T must be positive, got {T}")
    w = WavepacketModel.lorentzian(gamma_l) if shape == "lorentzian" else (
        WavepacketModel.gaussian(B) if shape == "gaussian" else None)
    if w is None:
        raise ProtocolError(f"unknown shape {shape!r}")
    if method == "closed":
        return cnot_completion_error_closed(shape, T=T, gamma_l=gamma_l, B=B)
    if method != "quadrature":
        raise ProtocolError(f"unknown method {method!r}")
    if shape == "lorentzian":
        start, stop, support_start = 0.0, 0.5 * T, 0.0
    else:
        start, stop = -0.25 * T, 0.25 * T
        support_start = min(w.support()[0], start)

    def cumulative(a, b):
        if b <= a:
            return 0.0
        return _quad(lambda s: float(w.decay_rate(s)), a, b, "cnot_completion_error")

    def integrand(t):
        g = float(w.decay_rate(t))
        return g * math.exp(-0.5 * cumulative(support_start, t) - 0.5 * cumulative(start, t))

    overlap = _quad(integrand, start, stop, "cnot_completion_error")
    return 1.0 - overlap


def cnot_fidelity(eps: float) -> float:
    """``F_X = 1 - 2 eps/3 + eps^2/6``."""
    if not 0.0 <= eps <= 1.0:
        raise ProtocolError(f"eps must lie in [0, 1], got {eps}")
    return 1.0 - 2.0 * eps / 3.0 + eps * eps / 6.0


# -- photon loss -------------------------------------------------------------------------


def emission_survival(eta_l: float) -> float:
    """Probability that the emitted photon goes into the guided mode, ``eta/(1+eta)``."""
    if math.isinf(eta_l):
        return 1.0
    if not eta_l > 0:
        raise ProtocolError(f"eta_L must be positive, got {eta_l}")
    return eta_l / (1.0 + eta_l)


def scattering_survival(eta_r: float) -> float:
    """Probability that a returning photon is transmitted, ``((eta-1)/(eta+1))^2``."""
    if math.isinf(eta_r):
        return 1.0
    if not eta_r > 1:
        raise ProtocolError(f"eta_R must exceed 1 for the scattering model, got {eta_r}")
    return ((eta_r - 1.0) / (eta_r + 1.0)) ** 2


def loss_fidelity_model(N: int, M: float, eta_l: float, eta_r: float, form: str = "graph") -> float:
    """Closed-form fidelity of the lossy cluster state with ``K = N M`` photons.

    ``graph``: a photon with survival probability ``q`` multiplies the
    fidelity by ``(1 + sqrt q)/2``; ``N`` photons see only emission loss and
    ``K - N`` see emission and scattering loss.  For ``N = 1`` the chords
    cancel the chain, so a returning photon is left in ``|+>`` and its
    scattering loss costs only ``sqrt((1 + sqrt p_scat)/2)``.
    ``scaling``: ``(p_emit p_scat)^{K/2}``.
    """
    if not (eta_l > 1 and eta_r > 1):
        raise ProtocolError("loss model needs eta_L > 1 and eta_R > 1")
    if N < 1 or M < 0:
        raise ProtocolError("need N >= 1 and M >= 0")
    K = N * M
    pe = emission_survival(eta_l)
    ps = scattering_survival(eta_r)
    if form == "scaling":
        return (pe * ps) ** (K / 2.0)
    if form != "graph":
        raise ProtocolError(f"unknown form {form!r}")
    emit = (1.0 + math.sqrt(pe)) / 2.0
    if N == 1:
        return emit ** K * ((1.0 + math.sqrt(ps)) / 2.0) ** (max(K - 1, 0) / 2.0)
    both = (1.0 + math.sqrt(pe * ps)) / 2.0
    return both ** max(K - N, 0) * emit ** min(N, K)


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def loss_coefficients(points) -> dict:
    """Fit ``-ln F / K = alpha/eta_L + beta/eta_R`` by least squares.

    ``points`` holds ``(K, eta_l, eta_r, F)`` tuples.  The ratio ``beta/alpha``
    is what the size criterion ``NM <~ (1/eta_L + 2/eta_R)^{-1}`` puts at 2.
    """
    rows, rhs = [], []
    for K, el, er, F in points:
        rows.append([0.0 if math.isinf(el) else 1.0 / el, 0.0 if math.isinf(er) else 1.0 / er])
        rhs.append(-math.log(F) / K)
    (alpha, beta), *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return {"alpha_eta_l": float(alpha), "beta_eta_r": float(beta), "ratio": float(beta / alpha)}


# -- sweeps -----------------------------------------------------------------------------------


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:count`` (inclusive, linear) or a comma-separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ProtocolError(f"grid {spec!r} must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ProtocolError("grid count must be positive")
        return np.linspace(start, stop, count)
    return np.array([float(v) for v in spec.split(",") if v.strip()])


def fidelity_sweep(op: str, grid: dict) -> tuple:
    """Rows reproducing the gate and loss fidelity curves.

    ``gate-z``: ``grid["x"]``; x is ``gamma_L/gamma_R`` for the Lorentzian and
    ``B/gamma_R`` for the Gaussian.  ``gate-x``: ``grid["x"]`` is ``gamma_L T``
    for the Lorentzian and ``B T`` for the Gaussian.  ``loss``:
    ``grid["N"]``, ``grid["M"]``, ``grid["eta"]`` (used for both cooperativities).
    Returns ``(header, rows)``.
    """
    if op == "gate-z":
        header = ["x", "lorentzian_closed", "lorentzian_quadrature", "gaussian_closed", "gaussian_quadrature"]
        rows = []
        for x in grid["x"]:
            x = float(x)
            rows.append([x,
                         phase_gate_fidelity("lorentzian", x, "closed"),
                         phase_gate_fidelity("lorentzian", x, "frequency"),
                         phase_gate_fidelity("gaussian", x, "closed"),
                         phase_gate_fidelity("gaussian", x, "frequency")])
        return header, rows
    if op == "gate-x":
        header = ["x", "lorentzian_eps", "lorentzian_fx", "gaussian_eps", "gaussian_fx"]
        rows = []
        for x in grid["x"]:
            x = float(x)
            el = cnot_completion_error("lorentzian", T=x, gamma_l=1.0, method="closed")
            eg = cnot_completion_error("gaussian", T=x, B=1.0, method="closed")
            rows.append([x, el, cnot_fidelity(el), eg, cnot_fidelity(eg)])
        return header, rows
    if op == "loss":
        header = ["N", "M", "NM", "eta", "model", "scaling_form", "size_criterion"]
        rows = []
        for N in grid["N"]:
            for M in grid["M"]:
                for eta in grid["eta"]:
                    N_, M_, eta = int(N), float(M), float(eta)
                    crit = N_ * M_ * (1.0 / eta + 2.0 / eta)
                    rows.append([N_, M_, N_ * M_, eta,
                                 loss_fidelity_model(N_, M_, eta, eta),
                                 loss_fidelity_model(N_, M_, eta, eta, form="scaling"), crit])
        return header, rows
    raise ProtocolError(f"unknown sweep {op!r}; choose gate-z, gate-x, or loss")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(fh, header, rows, comments=()) -> None:
    """CSV with ``'.'`` decimals, shortest round-trip floats, and ``\\n`` line endings."""
    for line in comments:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
