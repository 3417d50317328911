import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from photonic_queue.errors import ProtocolError
from photonic_queue.photonics import (
    WavepacketModel,
    cnot_completion_asymptote,
    cnot_completion_error,
    cnot_fidelity,
    fidelity_from_overlap,
    fidelity_sweep,
    linear_fit,
    loss_fidelity_model,
    lorentzian_phase_fidelity_closed,
    parse_grid,
    phase_gate_fidelity,
    scattered_overlap,
    scattering_phase,
    write_csv,
)


def test_scattering_phase_examples():
    assert scattering_phase(0.0, 1.0) == -1
    assert abs(scattering_phase(1e12, 1.0) - 1) < 1e-11
    assert abs(scattering_phase(0.5, 1.0) - (-1j)) < 1e-15
    with pytest.raises(ProtocolError):
        scattering_phase(0.0, 0.0)


def test_scattering_is_pure_phase():
    omega = np.random.default_rng(0).normal(scale=50.0, size=10_000)
    assert np.max(np.abs(np.abs(scattering_phase(omega, 2.0)) - 1)) < 1e-14


@pytest.mark.parametrize("w", [WavepacketModel.lorentzian(0.7), WavepacketModel.gaussian(1.3, t0=2.0)])
def test_wavepackets_are_normalised(w):
    assert abs(w.norm() - 1) < 1e-9


@pytest.mark.parametrize("w", [WavepacketModel.lorentzian(0.7), WavepacketModel.gaussian(1.3, t0=2.0)])
def test_spectrum_is_normalised(w):
    from scipy import integrate

    val, _ = integrate.quad(w.spectrum, -np.inf, np.inf, epsabs=1e-12)
    assert abs(val - 1) < 1e-9


def test_gaussian_rate_regenerates_envelope():
    w = WavepacketModel.gaussian(2.0, t0=1.0)
    t = np.linspace(1.0 - 4 / 2.0, 1.0 + 4 / 2.0, 41)
    assert np.max(np.abs(w.regenerate(t) - w.amplitude(t))) <= 1e-8


def test_lorentzian_rate_regenerates_envelope():
    w = WavepacketModel.lorentzian(1.5)
    t = np.linspace(0.0, 5.0, 21)
    assert np.max(np.abs(w.regenerate(t) - w.amplitude(t))) <= 1e-8


def test_overlap_examples():
    assert abs(scattered_overlap(WavepacketModel.lorentzian(1.0), 1.0)) < 1e-8
    assert abs(scattered_overlap(WavepacketModel.lorentzian(0.1), 1.0) - (-9 / 11)) < 1e-6
    x = 0.25
    closed = 1 - math.sqrt(math.pi) * special.erfcx(1 / (2 * x)) / x
    assert abs(closed - (-0.8109)) < 5e-4  # quoted value is rounded; closed form is -0.81071
    assert abs(scattered_overlap(WavepacketModel.gaussian(x), 1.0) - closed) < 1e-6


@pytest.mark.parametrize("shape", ["lorentzian", "gaussian"])
@pytest.mark.parametrize("x", [0.01, 0.1, 0.5, 1.0])
def test_overlap_routes_agree(shape, x):
    w = WavepacketModel.lorentzian(x) if shape == "lorentzian" else WavepacketModel.gaussian(x)
    closed = scattered_overlap(w, 1.0, "closed")
    assert abs(scattered_overlap(w, 1.0, "frequency") - closed) < 1e-6
    assert abs(scattered_overlap(w, 1.0, "time") - closed) < 1e-6


def test_overlap_scales_with_gamma_r():
    a = scattered_overlap(WavepacketModel.gaussian(0.5), 1.0)
    b = scattered_overlap(WavepacketModel.gaussian(1.5), 3.0)
    assert abs(a - b) < 1e-8


def test_fidelity_map_reproduces_lorentzian_closed_form():
    for x in np.linspace(0.01, 3.0, 40):
        m_overlap = -(1 - x) / (1 + x)
        assert abs(fidelity_from_overlap(m_overlap) - lorentzian_phase_fidelity_closed(x)) < 1e-15


def test_phase_gate_examples():
    assert phase_gate_fidelity("lorentzian", 1.0) == pytest.approx(0.65, abs=1e-12)
    assert phase_gate_fidelity("gaussian", 0.25) == pytest.approx(0.9261, abs=1e-4)
    h = 1e-4
    slope = (phase_gate_fidelity("lorentzian", h, "closed") - 1.0) / h
    assert abs(slope + 0.8) < 1e-3
    slope_g = (phase_gate_fidelity("gaussian", h, "closed") - 1.0) / h
    assert abs(slope_g) < 1e-3


def test_gaussian_quadratic_coefficient():
    x = np.linspace(0.01, 0.05, 9)
    F = np.array([phase_gate_fidelity("gaussian", v) for v in x])
    coeffs = np.polyfit(x ** 2, F, 2)
    assert abs(coeffs[1] + 1.6) < 0.05


def test_cnot_examples():
    assert cnot_completion_error("lorentzian", T=10.0, gamma_l=1.0) == pytest.approx(math.exp(-5), abs=1e-12)
    eps = cnot_completion_error("gaussian", T=4.0, B=1.0)
    assert abs(eps - (1 - math.sqrt(2) * special.erf(1) / math.sqrt(1 + special.erf(1)))) < 1e-6
    assert eps == pytest.approx(0.1221, abs=1e-4)
    assert cnot_fidelity(0.0) == 1 and cnot_fidelity(1.0) == 0.5
    assert cnot_fidelity(0.1221) == pytest.approx(0.9211, abs=1e-4)
    with pytest.raises(ProtocolError):
        cnot_fidelity(1.5)


@pytest.mark.parametrize("T", [0.5, 2.0, 4.0, 8.0])
def test_cnot_quadrature_matches_closed_forms(T):
    for shape, kw in (("lorentzian", {"gamma_l": 1.3}), ("gaussian", {"B": 1.3})):
        q = cnot_completion_error(shape, T=T, **kw)
        c = cnot_completion_error(shape, T=T, method="closed", **kw)
        assert abs(q - c) < 1e-6


def test_cnot_asymptote_ratio():
    # the closed form approaches 3/4 of the quoted asymptote, not 1
    ratios = [cnot_completion_error("gaussian", T=4 * x, B=1.0, method="closed") / cnot_completion_asymptote(x)
              for x in (3.0, 4.0, 5.0)]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 0.75) < 0.02


def test_loss_model_examples():
    assert loss_fidelity_model(2, 3, math.inf, math.inf) == 1
    eta = 30.0
    NM = 1 / (1 / eta + 2 / eta)
    F = loss_fidelity_model(2, NM / 2, eta, eta)
    assert 1 / math.e <= F <= 1
    with pytest.raises(ProtocolError):
        loss_fidelity_model(2, 2, 1.0, 10.0)
    with pytest.raises(ProtocolError):
        loss_fidelity_model(0, 4, 10.0, 10.0)


@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(2.0, 1e4), st.floats(2.0, 1e4))
def test_loss_model_bounds_and_monotone(N, M, el, er):
    F = loss_fidelity_model(N, M, el, er)
    assert 0 < F <= 1
    assert loss_fidelity_model(N, M + 1, el, er) <= F
    assert loss_fidelity_model(N, M, 2 * el, er) >= F


def test_sweep_gate_z_gaussian_beats_lorentzian():
    header, rows = fidelity_sweep("gate-z", {"x": parse_grid("0.01:1:12")})
    g, l = header.index("gaussian_quadrature"), header.index("lorentzian_quadrature")
    assert all(r[g] >= r[l] for r in rows)
    assert all(abs(r[1] - r[2]) < 1e-9 for r in rows)


def test_sweep_gate_x_monotone_in_period():
    header, rows = fidelity_sweep("gate-x", {"x": parse_grid("0.5:12:24")})
    for col in ("lorentzian_fx", "gaussian_fx"):
        vals = [r[header.index(col)] for r in rows]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_sweep_loss_log_linear():
    header, rows = fidelity_sweep("loss", {"N": [2], "M": parse_grid("1:5:5"), "eta": [50.0]})
    nm = [r[header.index("NM")] for r in rows]
    logF = [math.log(r[header.index("model")]) for r in rows]
    assert linear_fit(nm, logF).r2 >= 0.999


def test_grid_parsing():
    np.testing.assert_allclose(parse_grid("0:1:3"), [0, 0.5, 1])
    np.testing.assert_allclose(parse_grid("1,2,5"), [1, 2, 5])
    with pytest.raises(ProtocolError):
        parse_grid("0:1")


def test_csv_formatting():
    buf = io.StringIO()
    write_csv(buf, ["x", "y"], [[0.1, 2], [1e-20, 3]], comments=["seed=0"])
    assert buf.getvalue() == "# seed=0\nx,y\n0.1,2\n1e-20,3\n"


def test_unknown_names():
    with pytest.raises(ProtocolError):
        phase_gate_fidelity("square", 0.5)
    with pytest.raises(ProtocolError):
        fidelity_sweep("gate-y", {})
    with pytest.raises(ProtocolError):
        WavepacketModel.lorentzian(-1.0)
