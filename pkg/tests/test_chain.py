import json

import numpy as np
import pytest

from covergap.chain import (
    ChainSpec,
    FamilyParams,
    build_family,
    complete,
    cycle,
    grid_torus,
    hypercube,
    load_spec,
    make_spec,
    random_reversible,
    spec_from_dict,
    spec_to_dict,
    srw_graph,
    stationary,
    two_state,
    validate,
)
from covergap.errors import BadParams, Disconnected, NonStochastic
from covergap.reportio import canonical_json


def test_two_state_symmetric():
    spec = two_state(0.5, 0.5)
    np.testing.assert_allclose(spec.P, [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(spec.pi, [0.5, 0.5])
    assert spec.is_transitive_hint


def test_complete_3():
    spec = complete(3)
    off = spec.P[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, 0.5)
    np.testing.assert_allclose(spec.pi, 1 / 3)


def test_grid_torus_4x4_uniform_reversible():
    spec = grid_torus(4, 4)
    assert spec.n == 16
    np.testing.assert_allclose(spec.pi, 1 / 16)
    d = validate(spec)
    assert d.ok
    assert d.max_detailed_balance_dev < 1e-10


def test_torus_m1_is_cycle():
    t = grid_torus(10, 1)
    c = cycle(10)
    np.testing.assert_array_equal(t.P, c.P)


def test_torus_m2_multigraph_mass():
    spec = grid_torus(4, 2)
    # vertical neighbors coincide: combined mass 1/2, horizontals 1/4 each
    row = spec.P[0]
    assert row[1] == 0.5  # (0,1) via up and down
    assert row[2] == 0.25 and row[6] == 0.25
    assert validate(spec).ok


def test_cycle_2_collapses_to_flip():
    spec = cycle(2)
    np.testing.assert_allclose(spec.P, [[0.0, 1.0], [1.0, 0.0]])


def test_hypercube_structure():
    spec = hypercube(3)
    assert spec.n == 8
    assert np.count_nonzero(spec.P[0]) == 3
    np.testing.assert_allclose(spec.P[0, [1, 2, 4]], 1 / 3)


def test_two_state_asymmetric_stationary():
    # hand oracle: pi proportional to (q, p)
    spec = two_state(1 / 3, 2 / 3)
    np.testing.assert_allclose(spec.pi, [2 / 3, 1 / 3], atol=1e-12)
    assert not spec.is_transitive_hint


def test_stationary_examples():
    np.testing.assert_allclose(stationary(cycle(4).P), 0.25, atol=1e-12)
    np.testing.assert_allclose(stationary(complete(5).P), 0.2, atol=1e-12)


def test_stationary_disconnected_raises():
    with pytest.raises(Disconnected):
        stationary(np.eye(2))


def test_validate_flags_reducible():
    spec = ChainSpec(n=2, P=np.eye(2), pi=np.array([0.5, 0.5]))
    d = validate(spec)
    assert not d.irreducible
    assert not d.ok


def test_random_reversible_detailed_balance():
    spec = random_reversible(20, seed=7)
    F = spec.pi[:, None] * spec.P
    assert np.abs(F - F.T).max() < 1e-12
    assert spec.is_reversible


def test_build_family_deterministic():
    a = build_family(FamilyParams("random_reversible", {"n": 12}, seed=99))
    b = build_family(FamilyParams("random_reversible", {"n": 12}, seed=99))
    np.testing.assert_array_equal(a.P, b.P)


@pytest.mark.parametrize(
    "spec",
    [cycle(7), grid_torus(6, 3), hypercube(4), complete(6), two_state(0.5, 0.5),
     random_reversible(15, 3)],
    ids=lambda s: s.name,
)
def test_families_validate(spec):
    d = validate(spec)
    assert d.ok
    assert d.max_row_dev < 1e-10


def test_bad_params():
    with pytest.raises(BadParams):
        grid_torus(4, 8)  # m > n
    with pytest.raises(BadParams):
        cycle(0)
    with pytest.raises(BadParams):
        two_state(0.0, 0.5)
    with pytest.raises(BadParams):
        build_family(FamilyParams("nosuch", {}))
    with pytest.raises(BadParams):
        build_family(FamilyParams("cycle", {}))


def test_make_spec_rejects_bad_matrices():
    with pytest.raises(NonStochastic):
        make_spec(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(NonStochastic):
        make_spec(np.array([[1.2, -0.2], [0.5, 0.5]]))
    with pytest.raises(Disconnected):
        make_spec(np.eye(3))


def test_srw_graph():
    A = np.zeros((4, 4))
    for i in range(3):
        A[i, i + 1] = A[i + 1, i] = 1.0
    spec = srw_graph(A)
    np.testing.assert_allclose(spec.pi, np.array([1, 2, 2, 1]) / 6, atol=1e-12)
    A[2, 3] = A[3, 2] = 0.0
    A[3, 3] = 0.0
    with pytest.raises(Disconnected):
        srw_graph(A)


def test_spec_json_roundtrip(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(canonical_json({"family": "grid_torus", "params": {"n": 4, "m": 2}}))
    spec = load_spec(str(path))
    assert spec.n == 8
    # explicit-matrix form
    d = spec_to_dict(two_state(0.5, 0.5))
    back = spec_from_dict(json.loads(canonical_json(d)))
    np.testing.assert_allclose(back.P, [[0.5, 0.5], [0.5, 0.5]])


def test_spec_arrays_readonly():
    spec = cycle(5)
    with pytest.raises(ValueError):
        spec.P[0, 0] = 1.0
