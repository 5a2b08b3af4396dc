import numpy as np
import pytest

from assocnw.control import (BACKWARD_MASK, FORWARD_MASK, ControllerConfig, ControlTrace,
                             TargetProfile, backward_control, forward_predict, new_car_model,
                             run_control, teach)
from assocnw.density import MixtureModel
from assocnw.powertrain import KMH, DriverParams, PlantState, plant_step, simulate_drive


def _truth(plant, v_kmh, p, b):
    return plant_step(plant, PlantState(v_kmh / KMH), p, b).speed * KMH


# ------------------------------------------------------------- forward_predict
def test_forward_full_throttle(plant, car_model):
    pred = forward_predict(car_model, 50.0, 1.0, 0.0)
    assert pred == pytest.approx(_truth(plant, 50.0, 1.0, 0.0), abs=0.5)
    assert pred > 50.0


def test_forward_heldout_grid(plant, car_model):
    rng = np.random.default_rng(3)
    errs = []
    for v, u in zip(rng.uniform(10, 110, 40), rng.uniform(-1, 1, 40)):
        p, b = max(u, 0.0), max(-u, 0.0)
        errs.append(abs(forward_predict(car_model, v, p, b) - _truth(plant, v, p, b)))
    assert np.median(errs) < 0.1 and max(errs) < 0.5


def test_forward_braking(car_model):
    assert forward_predict(car_model, 50.0, 0.0, 1.0) < 50.0


def test_forward_single_kernel():
    m = MixtureModel.from_kernels([1.0], [[10.0, 12.5, 0.3, 0.0]], np.ones((1, 4)),
                                  names=["v_prev", "v", "p", "b"])
    assert forward_predict(m, 80.0, 0.0, 1.0) == 12.5


def test_masks():
    np.testing.assert_array_equal(FORWARD_MASK, [1, 0, 1, 1])
    np.testing.assert_array_equal(BACKWARD_MASK, [1, 1, 0, 0])


# ------------------------------------------------------------ backward_control
def test_backward_empty_model_guesses():
    cmd = backward_control(new_car_model(), 10.0, 20.0)
    assert cmd == (0.0, 0.0, 0.0, True)


def test_backward_saturates_throttle(car_model):
    cmd = backward_control(car_model, 0.0, 100.0)
    assert cmd.p == 1.0 and cmd.b == 0.0


def test_backward_heavy_braking(car_model):
    cmd = backward_control(car_model, 100.0, 0.0)
    assert cmd.b > 0.5 and cmd.p == 0.0


@pytest.mark.parametrize("v", [20.0, 50.0, 80.0, 110.0])
def test_backward_holding(plant, car_model, v):
    cfg = ControllerConfig()
    state = PlantState(v / KMH)
    for _ in range(100):
        cmd = backward_control(car_model, state.speed * KMH, v, cfg)
        state = plant_step(plant, state, cmd.p, cmd.b)
    assert abs(state.speed - v / KMH) / 1.0 < 0.3


def test_backward_command_in_range(car_model):
    cfg = ControllerConfig(mc_samples=200)
    rng = np.random.default_rng(0)
    for v_now, v_t in rng.uniform(0, 180, (30, 2)):
        cmd = backward_control(car_model, v_now, v_t, cfg)
        assert 0.0 <= cmd.p <= 1.0 and 0.0 <= cmd.b <= 1.0
        assert cmd.p * cmd.b == 0.0
        assert 0.0 <= cmd.plausibility <= 1.0


def test_non_exclusive_pedals_allowed(car_model):
    cfg = ControllerConfig(exclusive_pedals=False, mc_samples=100)
    cmd = backward_control(car_model, 50.0, 50.0, cfg)
    assert 0.0 <= cmd.p <= 1.0 and 0.0 <= cmd.b <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(order=2)
    with pytest.raises(ValueError):
        ControllerConfig(clamp_low=1.0, clamp_high=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(plausibility_floor=1.5)
    with pytest.raises(ValueError):
        ControllerConfig(explore_sigma=-1.0)


# ----------------------------------------------------------------- run_control
PROFILE = TargetProfile.steps([60.0, 30.0, 90.0], 100.0)


@pytest.fixture(scope="module")
def tracking_run(plant, _car_model):
    return run_control(_car_model.copy(), plant, PROFILE, 300.0, ControllerConfig())


def test_trace_shape_and_safety(tracking_run):
    tr = tracking_run
    assert len(tr.time) == 30_000
    assert tr.time[-1] == pytest.approx(300.0)
    assert tr.p.min() >= 0 and tr.p.max() <= 1 and tr.b.min() >= 0 and tr.b.max() <= 1
    assert np.all(tr.p * tr.b == 0.0)
    assert np.all((tr.plausibility >= 0) & (tr.plausibility <= 1))
    assert not tr.learned.any()


def test_error_contracts_after_each_step(tracking_run):
    tr = tracking_run
    for t0, _, _ in PROFILE.segments(300.0):
        i = int(round(t0 / 0.01))
        assert tr.error[i + 100] < tr.error[i]


def test_steady_state_tracking(tracking_run):
    assert max(tracking_run.steady_state_errors(PROFILE)) < 1.0


def test_run_is_deterministic(plant, car_model):
    cfg = ControllerConfig(online_learn=True, seed=4)
    a = run_control(car_model.copy(), plant, TargetProfile.constant(40.0), 5.0, cfg)
    b = run_control(car_model.copy(), plant, TargetProfile.constant(40.0), 5.0, cfg)
    assert a.to_csv() == b.to_csv()


def test_online_learning_mutates_model(plant, car_model):
    before = car_model.update_count
    tr = run_control(car_model, plant, TargetProfile.constant(40.0), 2.0,
                     ControllerConfig(online_learn=True))
    assert tr.learned.all()
    assert car_model.update_count == before + 200


def test_unreachable_target_saturates(plant, car_model):
    tr = run_control(car_model, plant, TargetProfile.constant(250.0), 20.0, ControllerConfig())
    assert tr.saturated_ticks() > 1500
    assert np.all(tr.p[tr.p > 0.999] == 1.0)


def test_run_requires_calibrated_plant(car_model):
    from assocnw.powertrain import PlantParams
    with pytest.raises(ValueError):
        run_control(car_model, PlantParams(), PROFILE, 1.0)


def test_empty_model_run_starts_with_guesses(plant):
    tr = run_control(None, plant, TargetProfile.constant(50.0), 1.0,
                     ControllerConfig(online_learn=True, explore_sigma=0.3,
                                      plausibility_floor=0.05, mc_samples=200))
    assert tr.guessed[0]
    assert np.all(tr.p * tr.b == 0.0)


# ---------------------------------------------------------------------- teach
def test_teach_invariants(car_model, training_drive):
    assert len(training_drive) == 50_000
    assert car_model.m <= 500
    assert abs(car_model.weights.sum() - 1.0) <= 1e-12


def test_teach_empty_stream(car_model):
    before = car_model.to_document()
    teach(car_model, [])
    assert car_model.to_document() == before


def test_teach_dimension_mismatch():
    with pytest.raises(ValueError):
        teach(new_car_model(), [[1.0, 2.0, 3.0]])


def test_teach_twice_is_stable(plant):
    drive = simulate_drive(plant, DriverParams(), 100.0, seed=1)
    once = teach(new_car_model(decay=1.0), drive)
    twice = teach(teach(new_car_model(decay=1.0), drive), drive)
    grid = [(v, p, b) for v in (20.0, 40.0, 60.0) for p, b in ((0.5, 0.0), (0.0, 0.0), (0.0, 0.3))]
    for v, p, b in grid:
        assert abs(forward_predict(once, v, p, b) - forward_predict(twice, v, p, b)) < 0.5


# ------------------------------------------------------------ profile & trace
def test_profile_lookup():
    assert [PROFILE.target_at(t) for t in (0.0, 99.99, 100.0, 250.0, 1e9)] == [60, 60, 30, 90, 90]
    assert PROFILE.segments(250.0) == [(0.0, 100.0, 60.0), (100.0, 200.0, 30.0),
                                       (200.0, 250.0, 90.0)]


def test_profile_csv_roundtrip():
    back = TargetProfile.read_csv("# comment\n" + PROFILE.to_csv())
    np.testing.assert_array_equal(back.times, PROFILE.times)
    np.testing.assert_array_equal(back.speeds, PROFILE.speeds)


@pytest.mark.parametrize("text", ["a,b\n0,1\n", "time_s,target_kmh\n0,x\n",
                                  "time_s,target_kmh\n5,1\n2,3\n", "time_s,target_kmh\n0,-1\n"])
def test_profile_rejects(text):
    with pytest.raises(ValueError):
        TargetProfile.read_csv(text)


def test_trace_csv_format():
    tr = ControlTrace(np.array([0.01]), np.array([50.0]), np.array([0.1]), np.array([1.0]),
                      np.array([0.0]), np.array([0.5]), np.array([True]))
    assert tr.to_csv("seed=0") == ("# seed=0\ntime_s,target_kmh,actual_kmh,p,b,plausibility,"
                                   "learned\n0.01,50.0,0.1,1.0,0.0,0.5,1\n")
