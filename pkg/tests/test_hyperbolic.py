import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacflow.errors import DegenerateField, DomainError, RangeViolation, ValidationError
from evacflow.field import RoutingField
from evacflow.geometry import build_grid
from evacflow.hyperbolic import (
    CUSTOM,
    DensityState,
    SpeedLaw,
    cfl_timestep,
    discrete_tv,
    evolve,
    exit_outflow_rate,
    face_speeds,
    flux_q,
    mass,
    numerical_face_flux,
    step,
    time_lipschitz_ratio,
    uniform_state,
)
from evacflow.library import BUILTINS, builtin
from evacflow.verification import solved

LIN = SpeedLaw()
TABLE = SpeedLaw(CUSTOM, 1.0, 1.0, ((0.0, 1.0), (0.3, 0.9), (0.7, 0.3), (1.0, 0.0)))


def test_flux_examples():
    assert flux_q(0.0, LIN) == 0.0
    assert flux_q(0.5, LIN) == 0.25
    assert flux_q(1.0, LIN) == 0.0
    with pytest.raises(DomainError):
        flux_q(1.2, LIN)
    with pytest.raises(DomainError):
        flux_q(-0.1, LIN)


def test_rusanov_examples():
    assert numerical_face_flux(0.3, 0.3, 1.0, LIN) == pytest.approx(0.21, abs=1e-15)
    assert numerical_face_flux(0.8, 0.0, 0.9, LIN) == pytest.approx(0.432, abs=1e-15)
    for r in (0.0, 0.4, 1.0):
        assert numerical_face_flux(r, r, 0.0, LIN) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(-1, 1), st.sampled_from([LIN, TABLE]))
def test_rusanov_consistency(r, s, law):
    assert numerical_face_flux(r, r, s, law) == pytest.approx(s * float(law.q(r)), abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1), st.sampled_from([LIN, TABLE]))
def test_rusanov_is_monotone(a, b, c, s, law):
    lo, hi = min(a, b), max(a, b)
    # nondecreasing in the left state, nonincreasing in the right state
    assert numerical_face_flux(hi, c, s, law) >= numerical_face_flux(lo, c, s, law) - 1e-15
    assert numerical_face_flux(c, hi, s, law) <= numerical_face_flux(c, lo, s, law) + 1e-15


def test_speed_law_validation():
    with pytest.raises(ValidationError):
        SpeedLaw(CUSTOM, 1.0, 1.0, ((0.0, 1.0), (0.5, 1.2), (1.0, 0.0)))
    with pytest.raises(ValidationError):
        SpeedLaw(CUSTOM, 1.0, 1.0, ((0.0, 1.0), (0.9, 0.0)))
    with pytest.raises(ValidationError):
        SpeedLaw("parabolic")
    assert TABLE.v(0.0) == 1.0 and TABLE.v(1.0) == 0.0
    # derivative exact on each linear piece
    r = np.linspace(0.01, 0.99, 97)
    eps = 1e-7
    fd = (TABLE.q(r + eps) - TABLE.q(r - eps)) / (2 * eps)
    inner = np.all(np.abs(r[:, None] - np.array([0.3, 0.7])) > 2 * eps, axis=1)
    assert np.allclose(TABLE.dq(r)[inner], fd[inner], atol=1e-6)
    assert TABLE.max_abs_dq() == pytest.approx(max(abs(float(TABLE.dq(x))) for x in np.linspace(0, 1, 10001)), rel=1e-3)


def _field(g, w):
    arr = np.zeros((g.ny, g.nx, 2))
    arr[g.inside] = w
    return RoutingField(arr, 0.1)


def test_cfl_examples():
    g = build_grid(["." * 10 + "E"] * 10, 0.01, 0.01)
    f = _field(g, (1.0, 0.0))
    assert cfl_timestep(None, f, LIN, 0.4, g) == pytest.approx(0.002, rel=1e-15)
    g2 = build_grid(["." * 20 + "E"] * 20, 0.005, 0.005)
    assert cfl_timestep(None, _field(g2, (1.0, 0.0)), LIN, 0.4, g2) == pytest.approx(0.001, rel=1e-15)
    assert cfl_timestep(None, f, LIN, 0.4, g, remaining=1e-4) == 1e-4
    with pytest.raises(ValidationError):
        cfl_timestep(None, f, LIN, 0.0, g)
    with pytest.raises(ValidationError):
        cfl_timestep(None, f, LIN, 1.0, g)
    with pytest.raises(DegenerateField):
        cfl_timestep(None, _field(g, (0.0, 0.0)), LIN, 0.4, g)


def test_single_cell_step():
    g = build_grid("E.#", 1.0, 1.0)
    f = _field(g, (-0.9, 0.0))  # w.nu = 0.9 on the left exit
    out = step(DensityState(np.where(g.inside, 0.8, 0.0)), f, LIN, 0.1, g)
    assert out.rho[0, 1] == pytest.approx(0.8 - 0.1 * 0.432, abs=1e-15)
    assert out.rho[0, 0] == 0.0 and out.rho[0, 2] == 0.0


def test_zero_state_is_fixed(square32):
    g, _, f = square32
    out = step(uniform_state(g, 0.0), f, LIN, 0.01, g)
    assert not out.rho.any()
    rep = evolve(uniform_state(g, 0.0), f, LIN, g, 1.0)
    assert rep.evacuation_time == 0.0
    assert all(m == 0.0 for m in rep.mass)


def test_mass_identity_per_step(square32, rng):
    g, _, f = square32
    speeds = face_speeds(f, g)
    rho = np.where(g.inside, rng.uniform(0, 1, (g.ny, g.nx)), 0.0)
    dt = cfl_timestep(None, f, LIN, 0.4, g)
    st_ = DensityState(rho)
    rate = exit_outflow_rate(st_, speeds, LIN, g)
    new = step(st_, f, LIN, dt, g, speeds)
    assert mass(new.rho, g) == pytest.approx(mass(rho, g) - dt * rate, rel=1e-14)
    assert rate > 0


@pytest.mark.parametrize("name", BUILTINS)
@pytest.mark.parametrize("law", [LIN, TABLE], ids=["linear", "table"])
def test_range_and_conservation(name, law):
    g, _, f = solved(builtin(name))
    rep = evolve(uniform_state(g, 0.6), f, law, g, 2.0, stop_at_evacuation=False, record_steps=True, cfl=0.9)
    assert max(rep.rho_max) <= 1.0
    assert rep.final.rho.min() >= 0.0
    assert rep.conservation_defect <= 1e-12


def test_sealed_exits_conserve_mass(square32, rng):
    g, _, f = square32
    rho = np.where(g.inside, rng.uniform(0, 1, (g.ny, g.nx)), 0.0)
    rep = evolve(DensityState(rho), f, LIN, g, 1e9, seal_exits=True, max_steps=1000,
                 stop_at_evacuation=False, record_steps=True)
    m = np.array(rep.mass)
    assert rep.n_steps == 1000
    assert np.max(np.abs(m - m[0])) / m[0] <= 1e-12
    assert rep.outflow[-1] == 0.0


def test_range_violation_detected(square32):
    g, _, f = square32
    with pytest.raises(RangeViolation):
        step(uniform_state(g, 0.5), f, LIN, 10.0, g)


def test_strip_mass_strictly_decreasing(strip64):
    g, _, f = strip64
    rep = evolve(uniform_state(g, 0.5), f, LIN, g, 3.0, record_steps=True)
    assert np.all(np.diff(rep.mass) < 0)
    assert rep.evacuation_time is not None and rep.evacuation_time < 3.0


def test_semigroup_bitwise(square32):
    g, _, f = square32
    full = evolve(uniform_state(g, 0.5), f, LIN, g, 0.2, output_times=[0.1], stop_at_evacuation=False)
    first = evolve(uniform_state(g, 0.5), f, LIN, g, 0.1, stop_at_evacuation=False)
    second = evolve(first.final, f, LIN, g, 0.2, stop_at_evacuation=False)
    assert full.dts == first.dts + second.dts
    assert np.array_equal(full.final.rho, second.final.rho)


def test_output_instants_are_hit_exactly(square32):
    g, _, f = square32
    rep = evolve(uniform_state(g, 0.5), f, LIN, g, 1.0, output_times=[0.1, 0.35, 0.7],
                 keep_snapshots=True, stop_at_evacuation=False)
    assert sorted(rep.snapshots) == [0.0, 0.1, 0.35, 0.7, 1.0]
    assert rep.t[-1] == 1.0


def test_discrete_tv_examples():
    g = build_grid(["..E"], 0.5, 0.25)
    assert discrete_tv(np.array([[0.3, 0.3, 0.0]]), g) == 0.0
    assert discrete_tv(np.array([[0.8, 0.2, 0.0]]), g) == pytest.approx(0.6 * 0.25)
    n = 6
    gc = build_grid(["." * n + "E"] * n, 1 / n, 1 / n)
    jj, ii = np.indices((n, n + 1))
    board = np.where(gc.inside, (ii + jj) % 2, 0).astype(float)
    assert discrete_tv(board, gc) == pytest.approx(2 * (n - 1))


@st.composite
def ordered_pairs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    lo = r.uniform(0, 1, (9, 10))
    hi = np.minimum(lo + r.uniform(0, 0.5, lo.shape) * (r.uniform(size=lo.shape) < 0.5), 1.0)
    return lo, hi, draw(st.sampled_from([LIN, TABLE])), draw(st.floats(0.05, 0.7))


@settings(max_examples=200, deadline=None)
@given(ordered_pairs())
def test_monotone_pairs(pair):
    lo, hi, law, cfl = pair
    mask = ["#" * 10] + ["E" + "." * 8 + "#"] * 7 + ["#" * 4 + "EE" + "#" * 4]
    g, _, f = solved(builtin("square_room", 8).replace(mask=tuple(mask), hx=0.1, hy=0.1))
    lo = np.where(g.inside, lo, 0.0)
    hi = np.where(g.inside, hi, 0.0)
    dt = cfl_timestep(None, f, law, cfl, g)
    a = step(DensityState(lo), f, law, dt, g)
    b = step(DensityState(hi), f, law, dt, g)
    assert np.all(a.rho <= b.rho + 1e-15)


def test_time_lipschitz_stable_under_sampling(square32):
    g, _, f = square32
    ratios = []
    for k in (8, 16):
        ts = [4.0 * m / k for m in range(1, k + 1)]
        rep = evolve(uniform_state(g, 0.5), f, LIN, g, 4.0, output_times=ts, keep_snapshots=True,
                     stop_at_evacuation=False)
        ratios.append(time_lipschitz_ratio(rep.snapshots, g))
    assert max(ratios) <= 16.0
    assert ratios[1] <= 1.25 * ratios[0]
