import numpy as np
import pytest

from patchwave import (
    BasisSpec,
    WaveletIndex,
    analyze,
    basis_inner_product,
    classify_index,
    classify_level,
    dual_l2_norm,
    empty_field,
    haar_basis,
    iter_level_indices,
    level_size,
    load_field,
    moment_check,
    multiwavelet_basis,
    save_field,
    support_of,
    synth_field,
    synthesize,
    synthesize_params,
)


class _FieldSampler:
    """Evaluate a coefficient field as if it were boundary data."""

    def __init__(self, field):
        self.field = field

    def eval_params(self, patch_index, S, T):
        return synthesize_params(self.field, patch_index, S, T)


@pytest.fixture(params=["haar", "alpert2"])
def basis(request, haar, alpert2):
    return haar if request.param == "haar" else alpert2


def test_basis_spec_validation():
    assert haar_basis().d == 1 and haar_basis().j_star == 0
    assert multiwavelet_basis().d == 2 and multiwavelet_basis().j_star == 2
    with pytest.raises(ValueError):
        BasisSpec(d=3, dt=3)
    with pytest.raises(ValueError):
        BasisSpec(d=2, dt=1)  # construction is self-dual


def test_level_size(basis):
    r = basis.d
    for j in (basis.j_star, basis.j_star + 2):
        assert level_size(basis, j, 6) == 6 * 3 * 4 ** j * r * r


def test_orthonormality(cube, basis, rng):
    j0 = basis.j_star
    r = basis.d
    idxs = [
        WaveletIndex(j0, 0, 0, 0, 0, 0, 0),
        WaveletIndex(j0, 0, 1, 0, 0, r - 1, 0),
        WaveletIndex(j0, 0, 2, 0, 0, 0, r - 1),
        WaveletIndex(j0, 0, 3, 0, 0, r - 1, r - 1),
        WaveletIndex(j0 + 1, 0, 1, 1, 0, 0, 0),
        WaveletIndex(j0 + 1, 0, 3, 0, 1, 0, 0),
    ]
    for a in idxs:
        for b in idxs:
            expect = 1.0 if a == b else 0.0
            got = basis_inner_product(cube, basis, a, b)
            assert got == pytest.approx(expect, abs=1e-12)
    # the self-dual system is L2-normalized on the geometric surface too
    assert dual_l2_norm(cube, basis, idxs[0]) == pytest.approx(1.0, abs=1e-12)
    assert dual_l2_norm(cube, basis, idxs[4]) == pytest.approx(1.0, abs=1e-12)


def test_analyze_synthesize_roundtrip(cube, basis):
    J = basis.j_star + 2
    field = synth_field(cube, basis, "random_besov", J,
                        spec=_any_spec(), seed=7)
    # the synthesized function is piecewise polynomial on the level-(J+1)
    # dyadic grid, so force analysis quadrature cells at least that fine
    back = analyze(cube, _FieldSampler(field), basis, J, min_cell_level=J + 1)
    assert np.allclose(back.coarse, field.coarse, atol=1e-11)
    for j in field.level_range():
        assert np.allclose(back.level(j), field.level(j), atol=1e-11)


def _any_spec():
    from patchwave import BesovSpec

    return BesovSpec(1.0, 2.0, 2.0)


def test_analyze_workers_match(cube, haar):
    field = synth_field(cube, haar, "random_besov", 3, spec=_any_spec(), seed=3)
    sampler = _FieldSampler(field)
    a1 = analyze(cube, sampler, haar, 3, workers=1)
    a4 = analyze(cube, sampler, haar, 3, workers=4)
    assert np.array_equal(a1.coarse, a4.coarse)
    for j in a1.level_range():
        assert np.array_equal(a1.level(j), a4.level(j))


def test_synthesize_at_points(cube, haar):
    field = synth_field(cube, haar, "random_besov", 2, spec=_any_spec(), seed=5)
    patch = cube.patches[2]
    S = np.array([0.12, 0.55, 0.81])
    T = np.array([0.33, 0.9, 0.05])
    want = synthesize_params(field, 2, S, T)
    got = synthesize(field, patch.chart(S, T))
    assert np.allclose(got, want, atol=1e-12)


def test_moment_spot_checks(cube, haar, alpert2):
    idx = WaveletIndex(3, 0, 1, 3, 4, 0, 0)
    # Haar wavelets kill constants; order-2 wavelets kill all of P1
    assert moment_check(cube, haar, idx, [[1.0]]) < 1e-14
    for coeffs in ([[1.0]], [[0.0, 1.0]], [[0.0], [1.0]]):
        assert moment_check(cube, alpert2, idx, coeffs) < 1e-14
    with pytest.raises(ValueError):
        moment_check(cube, haar, idx, [[0.0, 1.0]])  # degree 1 >= dt


def test_moment_check_refuses_boundary(cube, haar):
    edge_idx = WaveletIndex(3, 0, 1, 0, 4, 0, 0)
    with pytest.raises(ValueError):
        moment_check(cube, haar, edge_idx, [[1.0]])


def test_classify_level_matches_classify_index(cube, haar):
    j = 3
    mask = classify_level(cube, haar, j)
    cells = 1 << j
    for i in (0, 4):
        for k1 in range(cells):
            for k2 in range(cells):
                cls = classify_index(cube, haar, WaveletIndex(j, i, 1, k1, k2, 0, 0))
                assert cls.interior == bool(mask[i, k1, k2])
    # the outermost ring can never be interior
    assert not mask[:, 0, :].any()
    assert not mask[:, -1, :].any()
    assert not mask[:, :, 0].any()
    assert not mask[:, :, -1].any()


def test_support_of(cube, haar):
    idx = WaveletIndex(2, 1, 2, 1, 3, 0, 0)
    rect, param_area, surf_area = support_of(haar, idx, cube)
    assert rect == ((0.25, 0.5), (0.75, 1.0))
    assert param_area == pytest.approx(1 / 16)
    assert surf_area == pytest.approx(1 / 16)  # unit jacobian on the cube


def test_field_save_load_roundtrip(tmp_path, cube, haar):
    field = synth_field(cube, haar, "random_besov", 3, spec=_any_spec(), seed=1)
    path = tmp_path / "field.npz"
    save_field(field, path)
    back = load_field(path, cube)
    assert back.basis == field.basis
    assert back.J == field.J
    assert np.array_equal(back.coarse, field.coarse)
    for j in field.level_range():
        assert np.array_equal(back.level(j), field.level(j))


def test_field_structure(cube, haar):
    field = empty_field(haar, cube.n_patches, 4)
    assert list(field.level_range()) == [0, 1, 2, 3, 4]
    assert field.level(2).shape == (6, 3, 4, 4, 1, 1)
    assert field.n_wavelet_indices() == sum(
        level_size(haar, j, 6) for j in range(5))
    truncated = field.truncated(2)
    assert list(truncated.level_range()) == [0, 1, 2]


def test_entry_and_replace_level(cube, haar):
    field = synth_field(cube, haar, "random_besov", 2, spec=_any_spec(), seed=2)
    idx = WaveletIndex(1, 3, 2, 0, 1, 0, 0)
    assert field.entry(idx) == field.level(1)[3, 1, 0, 1, 0, 0]
    swapped = field.replace_level(1, np.zeros_like(field.level(1)))
    assert not np.array_equal(field.level(1), swapped.level(1))
    assert swapped.entry(idx) == 0.0


def test_iter_level_indices_lexicographic(haar):
    seq = list(iter_level_indices(haar, 2, 1))
    assert len(seq) == level_size(haar, 1, 2)
    keys = [(w.patch, w.etype, w.k1, w.k2, w.m1, w.m2) for w in seq]
    assert keys == sorted(keys)
    assert all(w.level == 1 for w in seq)
