import math
from dataclasses import replace

import numpy as np
import pytest

from fluxmod import (
    BichromaticPulse,
    FlatResponse,
    NonMonotoneRegion,
    OutOfBand,
    TransferFunction,
    ValidationError,
    VirtualHardware,
    avg_frequency_bessel,
    calibrate_and_verify,
    calibrate_theta0,
    calibrate_transfer_function,
    distort_pulse,
    fourier_coefficients,
    load_scenario,
    reference_transfer_function,
    save_scenario,
    virtual_ramsey,
)

FLAT_TF = TransferFunction(
    freqs_mhz=(10.0, 100.0, 300.0, 500.0),
    transmission=(1.0, 1.0, 1.0, 1.0),
)


@pytest.fixture
def template():
    return BichromaticPulse(
        fm_mhz=100.0, phi_ac_phi0=0.45, alpha_rad=0.5, theta_rad=1.1, p=3
    )


class TestVirtualRamsey:
    def test_flat_line_applies_only_the_phase_offset(self, q1, template):
        # p=3 with offset 0.3 reaches the qubit with theta shifted by -0.6
        hw = VirtualHardware(spec=q1, theta0_rad=0.3, transfer=FLAT_TF)
        measured = virtual_ramsey(hw, template).f_bar_ghz
        series = fourier_coefficients(q1)
        expected = avg_frequency_bessel(
            series, replace(template, theta_rad=template.theta_rad - 0.6)
        )
        assert measured == pytest.approx(expected, abs=5e-12)

    def test_noise_is_seeded(self, q1, template):
        runs = []
        for seed in (7, 7, 8):
            hw = VirtualHardware(
                spec=q1, transfer=FLAT_TF, noise_sigma_khz=5.0, seed=seed
            )
            runs.append([virtual_ramsey(hw, template).f_bar_ghz for _ in range(4)])
        assert runs[0] == runs[1]
        assert runs[0] != runs[2]

    def test_randomized_offset_only_touches_two_tone_pulses(self, q1):
        hw = VirtualHardware(spec=q1, transfer=FLAT_TF, randomize_theta0=True)
        mono = BichromaticPulse(fm_mhz=100.0, phi_ac_phi0=0.4, p=1)
        vals = {virtual_ramsey(hw, mono).f_bar_ghz for _ in range(3)}
        assert len(vals) == 1
        bichro = BichromaticPulse(
            fm_mhz=100.0, phi_ac_phi0=0.4, alpha_rad=0.6, theta_rad=0.0, p=3
        )
        a = virtual_ramsey(hw, bichro).f_bar_ghz
        b = virtual_ramsey(hw, bichro).f_bar_ghz
        assert a != b

    def test_negative_noise_rejected(self, q1):
        with pytest.raises(ValidationError):
            VirtualHardware(spec=q1, noise_sigma_khz=-1.0)


class TestCalibrateTheta0:
    @pytest.mark.parametrize("theta0", [0.25, -0.4, 1.3])
    def test_noiseless_recovery(self, q1, template, theta0):
        hw = VirtualHardware(spec=q1, theta0_rad=theta0)
        est = calibrate_theta0(hw, template)
        assert est.theta0_rad == pytest.approx(theta0, abs=1e-6)
        assert est.ambiguity_rad == pytest.approx(math.pi)
        assert est.n_sweeps == 1

    def test_offset_reported_in_principal_branch(self, q1, template):
        # 2.0 and 2.0 - pi are indistinguishable for p=3
        hw = VirtualHardware(spec=q1, theta0_rad=2.0)
        est = calibrate_theta0(hw, template)
        assert est.theta0_rad == pytest.approx(2.0 - math.pi, abs=1e-6)

    def test_noisy_multi_amplitude(self, q1, template):
        hw = VirtualHardware(spec=q1, theta0_rad=0.25, noise_sigma_khz=2.0, seed=11)
        est = calibrate_theta0(hw, template, amplitudes=(0.35, 0.45, 0.55))
        err = (est.theta0_rad - 0.25 + math.pi / 2) % math.pi - math.pi / 2
        assert abs(err) < 1e-3
        assert est.n_sweeps == 3

    def test_rejects_unidentifiable_requests(self, q1, template):
        hw = VirtualHardware(spec=q1, theta0_rad=0.25)
        with pytest.raises(ValidationError):
            calibrate_theta0(hw, replace(template, p=1, alpha_rad=0.0))
        with pytest.raises(ValidationError):
            calibrate_theta0(hw, template, n_theta=8)
        with pytest.raises(ValidationError):
            calibrate_theta0(hw, replace(template, alpha_rad=0.0))

    def test_flat_response(self, q1, template):
        hw = VirtualHardware(spec=q1, theta0_rad=0.25)
        with pytest.raises(FlatResponse):
            calibrate_theta0(hw, replace(template, phi_ac_phi0=1e-5))


class TestCalibrateTransferFunction:
    def test_pointwise_recovery(self, q1):
        hw = VirtualHardware(spec=q1)
        probes = (30.0, 80.0, 150.0, 250.0, 350.0, 450.0)
        est = calibrate_transfer_function(hw, probes)
        assert est.freqs_mhz == probes
        for f, t in zip(est.freqs_mhz, est.transmission):
            assert t == pytest.approx(float(hw.transfer.at(f)), rel=1e-6)

    def test_probe_amplitude_guards(self, q1):
        hw = VirtualHardware(spec=q1)
        probes = (30.0, 80.0, 150.0, 250.0)
        with pytest.raises(NonMonotoneRegion):
            calibrate_transfer_function(hw, probes, probe_amp_phi0=0.65)
        with pytest.raises(ValidationError):
            calibrate_transfer_function(hw, probes, probe_amp_phi0=0.95)

    def test_needs_four_probes(self, q1):
        hw = VirtualHardware(spec=q1)
        with pytest.raises(ValidationError):
            calibrate_transfer_function(hw, (30.0, 80.0, 150.0))

    def test_out_of_band_probe_propagates(self, q1):
        hw = VirtualHardware(spec=q1)
        with pytest.raises(OutOfBand):
            calibrate_transfer_function(hw, (50.0, 150.0, 300.0, 600.0))


class TestClosedLoop:
    def test_calibrate_compensate_verify(self, q1, template):
        hw = VirtualHardware(spec=q1, theta0_rad=0.25)
        probes = tuple(np.linspace(20.0, 480.0, 10)) + (100.0, 300.0)
        out = calibrate_and_verify(hw, template, probes)
        assert abs(out.theta0.theta0_rad - 0.25) < 1e-6
        assert abs(out.residual_khz) < 1e-3
        # compensated pulse re-distorted lands on the requested one
        delivered = distort_pulse(out.compensated, hw.transfer, theta0_rad=0.25)
        assert delivered.phi_ac_phi0 == pytest.approx(template.phi_ac_phi0, rel=1e-9)
        assert delivered.alpha_rad == pytest.approx(template.alpha_rad, abs=1e-9)
        assert math.cos(delivered.theta_rad) == pytest.approx(
            math.cos(template.theta_rad), abs=1e-9
        )

    def test_noisy_loop_meets_budget(self, q1, template):
        hw = VirtualHardware(spec=q1, theta0_rad=0.25, noise_sigma_khz=2.0, seed=3)
        probes = tuple(np.linspace(20.0, 480.0, 10)) + (100.0, 300.0)
        out = calibrate_and_verify(
            hw, template, probes, amplitudes=(0.35, 0.45, 0.55)
        )
        err = (out.theta0.theta0_rad - 0.25 + math.pi / 2) % math.pi - math.pi / 2
        assert abs(err) < 1e-3
        for f, t in zip(out.transfer.freqs_mhz, out.transfer.transmission):
            assert t == pytest.approx(float(hw.transfer.at(f)), rel=5e-3)
        assert abs(out.residual_khz) < 10.0


class TestScenarioIO:
    def test_round_trip(self, q1, template, tmp_path):
        hw = VirtualHardware(
            spec=q1,
            theta0_rad=0.7,
            transfer=reference_transfer_function(),
            noise_sigma_khz=1.5,
            seed=42,
        )
        path = tmp_path / "scenario.json"
        save_scenario(hw, path)
        loaded = load_scenario(path)
        assert loaded.spec == q1
        assert loaded.theta0_rad == 0.7
        assert loaded.noise_sigma_khz == 1.5
        assert loaded.seed == 42
        assert loaded.transfer.freqs_mhz == hw.transfer.freqs_mhz
        assert loaded.transfer.transmission == hw.transfer.transmission
        # loaded hardware reproduces the original measurement stream
        fresh = VirtualHardware(
            spec=q1, theta0_rad=0.7, transfer=hw.transfer,
            noise_sigma_khz=1.5, seed=42,
        )
        assert virtual_ramsey(loaded, template).f_bar_ghz == virtual_ramsey(
            fresh, template
        ).f_bar_ghz
