import numpy as np
import pytest

from herglotzsim.geometry import MetricField
from herglotzsim.lagrangian import (MechanicalSystem, State, dissipation_rate, energy, kinetic_energy,
                                    lagrangian, linear_dissipation_potential, momentum, potential_energy)
from herglotzsim.scenarios import CylinderParams, SphereParams, cylinder_system, sphere_system

from helpers import free_system


def _state(q, v, z=0.0):
    return State(0.0, q, v, z)


def test_kinetic_energy_examples():
    flat = free_system(MetricField.constant(np.eye(2)))
    assert kinetic_energy(flat, _state([0, 0], [0, 0])) == 0.0
    assert kinetic_energy(flat, _state([0, 0], [3, 4])) == 12.5
    sph = sphere_system(SphereParams(k2=0.4))
    assert kinetic_energy(sph, _state([0, 0], [1, 0, 0, 1, 0])) == pytest.approx(0.7, abs=1e-15)


def test_energy_examples():
    flat = free_system(MetricField.constant(np.eye(2)))
    assert energy(flat, _state([0, 0], [0, 0])) == 0.0
    assert energy(flat, _state([0, 0], [1, 0])) == 0.5


def test_cylinder_energy_includes_action_term():
    # T = 1, mechanical V = 2, beta z = 2  ->  E = 1
    p = CylinderParams(m=2.0, M=1.0, I=1.0, k=1.0, g=1.0, beta=0.5, gamma=0.0)
    sys = cylinder_system(p)
    # m g y = 2 y with h = 0 -> y = 1 gives V_mech = 2; v chosen so T = 1
    st = _state([0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], z=4.0)
    assert kinetic_energy(sys, st) == 1.0
    assert potential_energy(sys, st) == pytest.approx(0.0)
    assert energy(sys, st) == pytest.approx(1.0)


def test_momentum_examples():
    flat = free_system(MetricField.constant(np.eye(3)))
    np.testing.assert_array_equal(momentum(flat, _state([0, 0, 0], [1, 2, 3])), [1, 2, 3])
    sph = sphere_system(SphereParams(k2=0.4))
    np.testing.assert_allclose(momentum(sph, _state([0, 0], [1, 2, 3, 4, 5])), [1, 2, 1.2, 1.6, 2.0])
    d = free_system(MetricField.diagonal([2.0, 3.0]))
    np.testing.assert_array_equal(momentum(d, _state([0, 0], [1, 1])), [2, 3])


def test_dissipation_rate_examples():
    flat = free_system(MetricField.constant(np.eye(2)))
    assert dissipation_rate(flat, _state([0, 0], [1, 0])) == 0.0
    cyl = cylinder_system(CylinderParams(beta=0.3))
    assert dissipation_rate(cyl, _state([0, 1, 0, 0], [0, 0, 0, 0])) == -0.3
    quad = MechanicalSystem(MetricField.constant(np.eye(1)), lambda q, z: z * z,
                            lambda q, z: np.zeros(1), lambda q, z: 2 * z)
    assert dissipation_rate(quad, _state([0.0], [0.0], z=3.0)) == 6.0


def test_sphere_damps_and_cylinder_drives():
    assert dissipation_rate(sphere_system(SphereParams(beta=0.1)), _state([0, 0], np.zeros(5))) == 0.1


def test_energy_is_sum_of_parts(rng):
    sys = cylinder_system(CylinderParams())
    for _ in range(20):
        st = _state(rng.normal(size=4), rng.normal(size=4), float(rng.normal()))
        assert energy(sys, st) == kinetic_energy(sys, st) + potential_energy(sys, st)
        assert lagrangian(sys, st) == kinetic_energy(sys, st) - potential_energy(sys, st)


def test_derivative_cross_check_rejects_wrong_gradient():
    with pytest.raises(ValueError, match="potential_dq"):
        MechanicalSystem(MetricField.constant(np.eye(2)), lambda q, z: float(q @ q),
                         lambda q, z: q, lambda q, z: 0.0)
    with pytest.raises(ValueError, match="potential_dz"):
        MechanicalSystem(MetricField.constant(np.eye(2)), lambda q, z: 2.0 * z,
                         lambda q, z: np.zeros(2), lambda q, z: 1.0)


def test_linear_dissipation_potential():
    V, dVdq, dVdz = linear_dissipation_potential(lambda q: 0.5 * q @ q, lambda q: q, 0.2, 2)
    sys = MechanicalSystem(MetricField.constant(np.eye(2)), V, dVdq, dVdz)
    st = _state([1.0, 2.0], [0, 0], z=3.0)
    assert potential_energy(sys, st) == pytest.approx(2.5 + 0.6)
    assert dissipation_rate(sys, st) == 0.2


def test_state_validation():
    with pytest.raises(ValueError):
        State(0.0, [np.nan], [0.0], 0.0)
    st = State(0.0, [1.0], [2.0], 3.0)
    with pytest.raises(ValueError):
        st.q[0] = 5.0
    back = State.unpack(0.0, st.pack(), 1, 1)
    assert back.z == 3.0 and back.q[0] == 1.0 and back.v[0] == 2.0
