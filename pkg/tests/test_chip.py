import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpu.chip import (
    CalibrationTable,
    ChipModel,
    CrosstalkModel,
    FringeData,
    FringeFitError,
    FringeFitter,
    HeaterModel,
    IsolationError,
    PhaseUnreachableError,
    SourceModel,
    apply_crosstalk,
    benchmark_phase_accuracy,
    calibration_residuals,
    fit_fringe,
    phase_voltage_map,
    precorrect,
    run_calibration,
    run_experiment,
    simulate_fringe,
    sweep_grid,
    voltage_for_phase,
)
from lpu.chip.calibration import alpha_routing, phi_routing
from lpu.fock import enumerate_outcomes, output_distribution, total_variation
from lpu.mesh import MeshConfig, compose, haar_sample

from oracles import nodal_crosstalk


def _pooled(residuals):
    v = np.array(list(residuals.values()))
    return float(np.sqrt(np.mean(v ** 2)))


def test_heater_law_and_inverse():
    h = HeaterModel(0.0, 0.1, 0.0)
    v = np.linspace(1.8, 10.0, 9)
    assert np.allclose(phase_voltage_map(h, v), 0.1 * v ** 2)
    with pytest.raises(ValueError):
        phase_voltage_map(h, 12.0)
    assert tuple(sweep_grid()[[0, -1]]) == (1.8, 10.0)


@given(st.floats(0.0, 2 * np.pi, exclude_max=True))
def test_voltage_for_phase_round_trip(target):
    h = HeaterModel(0.3, 0.09, 1e-4)
    v = voltage_for_phase(h, target)
    assert np.exp(1j * h.phase(v)) == pytest.approx(np.exp(1j * target), abs=1e-9)


def test_voltage_for_phase_unreachable():
    h = HeaterModel(0.0, 0.01, 0.0)  # under 1 rad of range
    with pytest.raises(PhaseUnreachableError):
        voltage_for_phase(h, 3.0)
    with pytest.raises(ValueError):
        HeaterModel(0.0, -0.1, 0.0)


def test_crosstalk_identity_without_shared_grounds():
    model = CrosstalkModel((), (100.0, 100.0), ())
    v = np.array([3.0, 7.0])
    assert np.array_equal(apply_crosstalk(model, v), v)


def test_crosstalk_two_heaters_against_nodal_analysis():
    model = CrosstalkModel(((0, 1),), (100.0, 100.0), (2.0,))
    v = np.array([5.0, 8.0])
    expected = nodal_crosstalk(v, model.groups, model.heater_resistances, model.ground_resistances)
    assert np.allclose(apply_crosstalk(model, v), expected, atol=1e-12)
    # equal resistors: the common node sits at Rg (v1 + v2) / (R + 2 Rg)
    assert apply_crosstalk(model, v)[0] == pytest.approx(5.0 - 2.0 * 13.0 / 104.0)
    target = np.array([4.0, 6.0])
    assert np.allclose(apply_crosstalk(model, precorrect(model, target)), target, atol=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_crosstalk_round_trip_random_group(seed):
    gen = np.random.default_rng(seed)
    R = gen.uniform(90, 110, 6)
    model = CrosstalkModel((tuple(range(6)),), tuple(R), (gen.uniform(0.5, 3.0),))
    target = gen.uniform(1.8, 10.0, 6)
    set_v = precorrect(model, target)
    assert np.allclose(apply_crosstalk(model, set_v), target, atol=1e-9)
    ref = nodal_crosstalk(set_v, model.groups, R, model.ground_resistances)
    assert np.allclose(apply_crosstalk(model, set_v), ref, atol=1e-9)


def test_crosstalk_rejects_bad_networks():
    with pytest.raises(ValueError):
        CrosstalkModel(((0, 1), (1, 2)), (1.0, 1.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        CrosstalkModel(((0,),), (1.0,), (np.inf,))


def test_chip_serialization_and_digest():
    chip = ChipModel.random(6, rng=4)
    again = ChipModel.from_dict(chip.to_dict())
    assert again.digest() == chip.digest()
    assert ChipModel.random(6, rng=5).digest() != chip.digest()


def test_chip_validation():
    with pytest.raises(ValueError):
        ChipModel(6, ChipModel.ideal(6).heaters[:4])
    with pytest.raises(ValueError):
        ChipModel.ideal(6).replace(interference_visibility=1.5)


def test_noiseless_fringe_is_exact_cosine():
    chip = ChipModel.ideal(6)
    routing, inp = alpha_routing(6, 2, 3)
    data = simulate_fringe(chip, ("alpha", 2, 3), routing, input_mode=inp)
    h = chip.heater(("alpha", 2, 3))
    fit = fit_fringe(data)
    expected = fit.A - fit.B * np.cos(h.phase(data.voltages) + data.offset)
    assert np.allclose(data.counts, expected, atol=1e-10)


def test_quadratic_heater_chirps():
    chip = ChipModel.ideal(6)
    routing, inp = alpha_routing(6, 1, 1)
    data = simulate_fringe(chip, ("alpha", 1, 1), routing, np.linspace(1.8, 10, 400), input_mode=inp)
    beta = chip.heater(("alpha", 1, 1)).beta
    # an exact sinusoid of V^2 at the heater's beta, not of V
    def residual(x):
        D = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
        coef, *_ = np.linalg.lstsq(D, data.counts, rcond=None)
        return np.max(np.abs(D @ coef - data.counts))

    assert residual(beta * data.voltages ** 2) <= 1e-10
    k = beta * (10 ** 2 - 1.8 ** 2) / (10 - 1.8)
    assert residual(k * data.voltages) > 0.05


def test_fit_noiseless_synthetic_exact():
    v = sweep_grid()
    truth = (1000.0, 800.0, 1.1, 0.09, 2e-4)
    counts = truth[0] - truth[1] * np.cos(truth[2] + truth[3] * v ** 2 + truth[4] * v ** 3)
    fit = fit_fringe((v, counts))
    got = (fit.A, fit.B, fit.alpha0, fit.beta, fit.gamma)
    assert np.allclose(got, truth, rtol=0, atol=1e-8)


def _poisson_fits(n_trials=5):
    v = sweep_grid()
    truth = (0.5, 0.5, 1.1, 0.09, 2e-4)
    fits = []
    for s in range(n_trials):
        mean = 1e5 * (truth[0] - truth[1] * np.cos(truth[2] + truth[3] * v ** 2 + truth[4] * v ** 3))
        fits.append(fit_fringe((v, np.random.default_rng(s).poisson(mean).astype(float))))
    return truth, fits


def test_fit_poisson_beta_within_one_percent():
    truth, fits = _poisson_fits()
    for f in fits:
        assert abs(f.beta / truth[3] - 1) <= 0.01


@pytest.mark.xfail(strict=True, reason="the cubic coefficient is too small to resolve to 1% at this shot count")
def test_fit_poisson_gamma_within_one_percent():
    truth, fits = _poisson_fits()
    for f in fits:
        assert abs(f.gamma / truth[4] - 1) <= 0.01


def test_fit_constant_data_is_unidentifiable():
    with pytest.raises(FringeFitError, match="unidentifiable"):
        fit_fringe((sweep_grid(), np.full(41, 500.0)))


def test_fringe_fitter_estimator_api():
    v = sweep_grid()
    y = 100 - 80 * np.cos(0.4 + 0.1 * v ** 2)
    est = FringeFitter().fit(v.reshape(-1, 1), y)
    assert np.allclose(est.predict(v), y, atol=1e-6)
    assert est.score(v.reshape(-1, 1), y) == pytest.approx(1.0)
    assert est.get_params()["n_starts"] == 4


def test_fringe_data_validation():
    with pytest.raises(ValueError):
        FringeData([1.0, 0.5], [1.0, 2.0])
    with pytest.raises(ValueError):
        FringeData([1.0, 2.0], [1.0, -2.0])


def test_phi_routing_isolates_and_rejects_diagonal():
    chip = ChipModel.ideal(6)
    routing, inp = phi_routing(6, 2, 4)
    simulate_fringe(chip, ("phi", 2, 4), routing, input_mode=inp)
    with pytest.raises(ValueError):
        phi_routing(6, 3, 3)
    # the bar mesh leaves phi_{1,1} invisible
    with pytest.raises(IsolationError):
        simulate_fringe(chip, ("phi", 1, 1), MeshConfig.bar(6), input_mode=1)


def test_ideal_chip_matches_fock():
    chip = ChipModel.ideal(6, splitters=False)
    config = haar_sample(6, 11).without_output_phases()
    photons = (1, 0, 1, 0, 0, 0)
    run = run_experiment(chip, config, SourceModel.ideal(photons), 10**6, 12, detector="pnr")
    exact = output_distribution(compose(config), photons).probabilities
    assert run.events == 10**6
    assert total_variation(run.frequencies(), exact) <= 0.01


def test_two_photons_into_split_mode():
    eff = 0.8
    chip = ChipModel.ideal(2).replace(detector_efficiencies=((eff, eff), (eff, eff)))
    run = run_experiment(chip, MeshConfig.bar(2), SourceModel.ideal((2, 0)), 200_000, 13)
    both = run.counts.get((2, 0), 0) / run.trials
    expected = 0.5 * eff ** 2
    sigma = np.sqrt(expected * (1 - expected) / run.trials)
    assert abs(both - expected) <= 5 * sigma


def test_uniform_efficiency_scaling_preserves_collision_free_frequencies():
    config = haar_sample(6, 14).without_output_phases()
    photons = (1, 1, 1, 0, 0, 0)
    base = ChipModel.ideal(6)
    dimmer = base.replace(detector_efficiencies=((0.5, 0.5),) * 6)
    support = enumerate_outcomes(6, 3, "collision-free")
    freqs = []
    for chip in (base, dimmer):
        run = run_experiment(chip, config, SourceModel.ideal(photons), 20_000, 15,
                             detection=support, target_events=100_000)
        freqs.append(run.frequencies())
    assert total_variation(*freqs) <= 0.02


def test_loss_commutes_with_bar_mzi():
    gen = np.random.default_rng(16)
    U = compose(MeshConfig.bar(6).with_phases({(2, 3): (np.pi, 1.3)}))
    loss = np.diag(np.sqrt(gen.uniform(0.3, 1.0, 6)))
    assert np.allclose(loss @ U, U @ loss, atol=1e-12)


def test_run_experiment_validation():
    chip = ChipModel.ideal(6)
    with pytest.raises(ValueError):
        run_experiment(chip, MeshConfig.bar(4), SourceModel.ideal((1, 0, 0, 0)), 10)
    with pytest.raises(ValueError):
        run_experiment(chip, MeshConfig.bar(6), SourceModel.ideal((1, 0, 0, 0, 0, 0)), 10, detector="spad")


def test_source_validation():
    with pytest.raises(ValueError):
        SourceModel(())
    spdc = SourceModel.spdc(6, ((1, 2), (3, 4)))
    assert {s for s, _ in spdc.terms} == {(1, 1, 1, 1, 0, 0), (2, 2, 0, 0, 0, 0), (0, 0, 2, 2, 0, 0)}


def test_calibration_noiseless_recovers_truth():
    chip = ChipModel.random(6, rng=17)
    cal = run_calibration(chip, None)
    res = calibration_residuals(chip, cal)
    assert len(res) == 25
    assert max(res.values()) <= 1e-3


def test_calibration_table_serialization():
    chip = ChipModel.random(6, rng=18)
    cal = run_calibration(chip, None)
    again = CalibrationTable.from_dict(cal.to_dict())
    assert again.heaters == cal.heaters
    assert sum(not seen for seen in cal.observable.values()) == 5


def test_calibration_residual_decreases_with_budget():
    chip = ChipModel.random(6, rng=19)
    pooled = [
        _pooled(calibration_residuals(chip, run_calibration(chip, shots, np.random.default_rng(20))))
        for shots in (10**4, 10**5, 10**6, 10**7)
    ]
    assert all(a > b for a, b in zip(pooled, pooled[1:]))


def test_precorrection_beats_uncorrected_crosstalk():
    chip = ChipModel.random(6, rng=21)
    with_pc = _pooled(calibration_residuals(chip, run_calibration(chip, 10**6, 22)))
    try:
        without = _pooled(calibration_residuals(
            chip, run_calibration(chip, 10**6, 22, precorrect_crosstalk=False)
        ))
    except Exception:
        # a fit that cannot even be completed is worse still
        without = np.inf
    assert without > with_pc


def test_benchmark_zero_noise_below_floor():
    chip = ChipModel.ideal(6)
    bench = benchmark_phase_accuracy(chip, None, 50, 100_000, 23)
    assert bench.delta_phi <= bench.floor


def test_benchmark_recovers_injected_noise():
    chip = ChipModel.random(6, rng=24).replace(phase_noise=0.035)
    bench = benchmark_phase_accuracy(chip, None, 100, 100_000, 25)
    assert abs(bench.delta_phi - 0.035) <= 0.2 * 0.035
