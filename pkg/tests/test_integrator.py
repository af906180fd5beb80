import math

import numpy as np
import pytest

from surfvort import (
    IntegratorConfig,
    SingularityError,
    VortexSystem,
    advect_sphere,
    energy_diagnostics,
    rk4_step,
    run,
)
from surfvort.dynamics import PLANE, SPHERE, make_rhs
from surfvort.numerics import normalize_rows

from helpers import random_plane_system, random_sphere_system


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(dt=0.0, steps=10)
        with pytest.raises(ValueError):
            IntegratorConfig(dt=0.1, steps=-1)
        with pytest.raises(ValueError):
            IntegratorConfig(dt=0.1, steps=1, scheme="rk2")
        with pytest.raises(ValueError):
            IntegratorConfig(dt=0.1, steps=1, advection="spiral")

    def test_advection_must_match_geometry(self, rng):
        system = random_sphere_system(rng, 2)
        with pytest.raises(ValueError):
            run(system, make_rhs(system), IntegratorConfig(dt=0.1, steps=1))


class TestAdvectSphere:
    def test_zero_velocity(self):
        p = np.array([0.0, 0.0, 1.0])
        np.testing.assert_array_equal(advect_sphere(p, np.zeros(3), 0.5), p)

    def test_quarter_turn(self):
        p = np.array([1.0, 0.0, 0.0])
        u = np.array([0.0, math.pi / 2, 0.0])
        np.testing.assert_allclose(advect_sphere(p, u, 1.0), [0.0, 1.0, 0.0], atol=1e-15)

    def test_unit_norm_preserved(self, rng):
        for _ in range(200):
            p = normalize_rows(rng.normal(size=3))
            u = rng.normal(size=3)
            u -= (u @ p) * p
            q = advect_sphere(p, u, rng.uniform(-2, 2))
            assert abs(np.linalg.norm(q) - 1.0) < 1e-15

    def test_arc_length_equals_speed_times_dt(self, rng):
        p = normalize_rows(rng.normal(size=3))
        u = rng.normal(size=3)
        u -= (u @ p) * p
        dt = 0.37
        q = advect_sphere(p, u, dt)
        travelled = math.acos(np.clip(p @ q, -1, 1))
        assert travelled == pytest.approx(np.linalg.norm(u) * dt, rel=1e-12)


class TestRk4Step:
    def test_zero_strength_system_is_static(self):
        system = VortexSystem(PLANE, [[0, 0, 0], [1, 0, 0]], [0.0, 0.0])
        cfg = IntegratorConfig(dt=0.1, steps=1)
        stepped = rk4_step(system, make_rhs(system), cfg)
        np.testing.assert_array_equal(stepped.positions, system.positions)

    def test_planar_pair_travels_straight(self):
        system = VortexSystem(PLANE, [[1, 0, 0], [-1, 0, 0]], [-1.0, 1.0])
        cfg = IntegratorConfig(dt=0.01, steps=1000)
        result = run(system, make_rhs(system), cfg)
        end = result.records[-1].positions
        expected_y = 1000 * 0.01 / (4 * math.pi)
        np.testing.assert_allclose(end[:, 1], expected_y, atol=1e-12)
        seps = [np.linalg.norm(r.positions[0] - r.positions[1]) for r in result.records]
        assert max(abs(s - 2.0) for s in seps) < 1e-9

    def test_sphere_pair_keeps_contact_angle(self):
        s = 0.05
        p1 = [math.cos(s), math.sin(s), 0.0]
        p2 = [math.cos(s), -math.sin(s), 0.0]
        system = VortexSystem(SPHERE, [p1, p2], [-1.0, 1.0])
        cfg = IntegratorConfig(dt=0.002, steps=1000, advection="rotational")
        result = run(system, make_rhs(system), cfg)
        dots = [float(r.positions[0] @ r.positions[1]) for r in result.records]
        assert max(abs(d - dots[0]) for d in dots) < 1e-9


class TestRun:
    def test_zero_steps_returns_initial_state(self, rng):
        system = random_plane_system(rng, 3)
        result = run(system, make_rhs(system), IntegratorConfig(dt=0.1, steps=0))
        assert len(result.records) == 1
        np.testing.assert_array_equal(result.records[0].positions, system.positions)

    def test_record_count(self, rng):
        system = random_plane_system(rng, 3)
        result = run(system, make_rhs(system), IntegratorConfig(dt=0.01, steps=17))
        assert [r.step for r in result.records] == list(range(18))
        assert result.records[-1].time == pytest.approx(0.17)

    def test_energy_drift_planar_three_vortex(self):
        system = VortexSystem(
            PLANE, [[0, 0, 0], [1.2, 0, 0], [0.4, 1.0, 0]], [1.0, -0.5, 0.75]
        )
        result = run(
            system,
            make_rhs(system),
            IntegratorConfig(dt=1e-3, steps=10_000),
            diagnostics=energy_diagnostics,
            diagnostics_every=200,
        )
        energies = [r.energy.kinetic_excess for r in result.records if r.energy]
        drift = max(abs(e - energies[0]) for e in energies) / abs(energies[0])
        assert drift < 1e-6

    def test_diagnostics_decimation(self, rng):
        system = random_plane_system(rng, 3)
        result = run(
            system,
            make_rhs(system),
            IntegratorConfig(dt=0.01, steps=10),
            diagnostics=energy_diagnostics,
            diagnostics_every=4,
        )
        with_diag = [r.step for r in result.records if r.energy is not None]
        assert with_diag == [0, 4, 8, 10]  # final step always included

    def test_collision_reported_not_raised(self, rng):
        system = random_plane_system(rng, 3)
        rhs = make_rhs(system)
        calls = {"n": 0}

        def failing_rhs(p):
            calls["n"] += 1
            if calls["n"] > 9:
                raise SingularityError("vortices 0 and 1 collided")
            return rhs(p)

        result = run(system, failing_rhs, IntegratorConfig(dt=0.01, steps=10))
        assert not result.completed
        assert result.collision_step == 3  # 4 rhs calls per RK4 step
        assert "collided" in result.collision_message
        assert len(result.records) == 3  # steps 0..2 survived

    def test_near_coincident_positions_raise_in_rhs(self, rng):
        system = random_plane_system(rng, 2)
        rhs = make_rhs(system)
        squeezed = np.array([[0.0, 0.0, 0.0], [3e-10, 0.0, 0.0]])
        with pytest.raises(SingularityError):
            rhs(squeezed)

    def test_observers_see_every_record(self, rng):
        system = random_plane_system(rng, 2)
        seen = []
        run(system, make_rhs(system), IntegratorConfig(dt=0.01, steps=5),
            observers=(lambda rec: seen.append(rec.step),))
        assert seen == [0, 1, 2, 3, 4, 5]


class TestInvariants:
    def test_sphere_norm_never_drifts(self, rng):
        system = random_sphere_system(rng, 4)
        result = run(system, make_rhs(system),
                     IntegratorConfig(dt=0.01, steps=500, advection="rotational"))
        worst = max(
            abs(np.linalg.norm(r.positions, axis=1) - 1.0).max() for r in result.records
        )
        assert worst < 1e-12

    def test_time_reversal(self, rng):
        # reversing every strength integrates the time-reversed flow: RK4 with
        # (-w, +dt) is algebraically identical to (w, -dt)
        for make, adv in ((random_plane_system, "planar"), (random_sphere_system, "rotational")):
            system = make(rng, 3)
            cfg = IntegratorConfig(dt=1e-3, steps=50, advection=adv)
            fw = run(system, make_rhs(system), cfg)
            back_sys = VortexSystem(system.geometry, fw.records[-1].positions,
                                    -system.strengths)
            bw = run(back_sys, make_rhs(back_sys), cfg)
            assert np.abs(bw.records[-1].positions - system.positions).max() < 1e-8

    def test_planar_momentum_invariant(self, rng):
        system = random_plane_system(rng, 4)
        result = run(system, make_rhs(system), IntegratorConfig(dt=1e-3, steps=2000))
        w = system.strengths[:, None]
        momenta = np.stack([(r.positions * w).sum(axis=0) for r in result.records])
        assert np.abs(momenta - momenta[0]).max() < 1e-9

    def test_strength_sum_constant_across_records(self, rng):
        system = random_plane_system(rng, 4)
        result = run(system, make_rhs(system), IntegratorConfig(dt=0.01, steps=20),
                     diagnostics=energy_diagnostics)
        totals = {r.energy.total_vorticity for r in result.records if r.energy}
        assert len(totals) == 1
