import numpy as np
import pytest

from mhdfem.diagnostics import compute_record, eoc, error_norms
from mhdfem.eos import GasParams
from mhdfem.euler import conserved_from_primitive
from mhdfem.fespace import (build_curl_space, build_p1_space, interpolate_curl,
                            interpolate_scalar)
from mhdfem.mesh import build_rect_mesh
from mhdfem.problems import make_state, vortex_problem
from mhdfem.splitting import MhdState, build_system


def unit_square_state(b_field=None):
    mesh = build_rect_mesh(4, 4)
    params = GasParams(gamma=1.4)
    system = build_system(mesh, params)
    rho = np.ones(system.space_v.ndofs)
    U = conserved_from_primitive(rho, 0.0, 0.0, 1.0, params)
    b = np.zeros(system.space_w.ndofs)
    if b_field is not None:
        b = interpolate_curl(b_field, system.space_w)
    return MhdState(system, U, b, 0.0)


def test_zero_field_has_zero_magnetic_energy():
    rec = compute_record(unit_square_state())
    assert rec.magnetic_energy == 0.0
    assert rec.total_energy == rec.total_mech_energy


def test_mass_and_magnetic_energy_values():
    st = unit_square_state(lambda p: np.tile([1.0, 0.0], (len(p), 1)))
    rec = compute_record(st)
    # uniform rho = 1 on the unit square
    assert st.sys.graph.m @ st.U[:, 0] == pytest.approx(1.0, rel=1e-13)
    # (mu/2) int |B|^2 = 0.5 for B = (1, 0), mu = 1
    assert rec.magnetic_energy == pytest.approx(0.5, rel=1e-13)


def test_error_norms_trivial_cases():
    mesh = build_rect_mesh(5, 5)
    space = build_p1_space(mesh)
    f = lambda p: np.sin(p[:, 0]) + p[:, 1]
    nodal = interpolate_scalar(f, space)
    l1, l2, linf = error_norms(nodal, f, space)
    assert l1 <= 2e-2                      # interpolation error of a smooth f
    z = np.zeros(space.ndofs)
    l1, l2, linf = error_norms(z + 0.1, lambda p: np.zeros(len(p)), space)
    assert l1 == pytest.approx(0.1, rel=1e-13)
    assert l2 == pytest.approx(0.1, rel=1e-13)
    assert linf == pytest.approx(0.1, rel=1e-13)


def test_error_norm_exact_zero_for_representable_field():
    mesh = build_rect_mesh(4, 3)
    space = build_p1_space(mesh)
    f = lambda p: 2.0 * p[:, 0] - 0.5 * p[:, 1] + 1.0
    nodal = interpolate_scalar(f, space)
    l1, l2, linf = error_norms(nodal, f, space)
    assert max(l1, l2, linf) <= 1e-13
    W = build_curl_space(mesh)
    F = lambda p: np.stack([p[:, 1] + 1.0, 2.0 * p[:, 0]], axis=1)
    c = interpolate_curl(F, W)
    l1, l2, linf = error_norms(c, F, W)
    assert max(l1, l2, linf) <= 1e-12


def test_eoc_examples():
    assert eoc([4e-4, 1e-4], [1000, 4000], dim=2)[0] == pytest.approx(2.0)
    # published Riemann-strip pair, 1D convention
    r = eoc([3.11e-2, 1.89e-2], [100, 200], dim=1)[0]
    assert r == pytest.approx(0.72, abs=0.01)
    assert eoc([1e-3, 1e-3, 1e-3], [100, 400, 1600])[0] == pytest.approx(0.0)
    assert np.isnan(eoc([1e-3, 0.0], [100, 400])[0])
    with pytest.raises(ValueError):
        eoc([1.0], [10])


def test_record_total_is_sum_of_parts():
    st = make_state(vortex_problem(1.0), 0)
    rec = compute_record(st)
    assert rec.total_energy == pytest.approx(
        rec.total_mech_energy + rec.magnetic_energy, rel=1e-15)
    assert rec.min_pressure > 0.0
