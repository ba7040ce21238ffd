import math

import numpy as np
import pytest

from patchwave import (
    BesovSpec,
    VertexPowerModel,
    WeightedSpec,
    alpha_star,
    analyze,
    assess_growth,
    best_n_term,
    boundary_tail_check,
    classify_level,
    cumulative_tail,
    fit_rate,
    gamma_star,
    interior_tail_check,
    level_size,
    level_tail_sums,
    n_term_plan,
    predicted_rate,
    synth_field,
    uniform_approx,
    whitney_check,
)

L2 = BesovSpec(1.0, 2.0, 2.0)


def _random_field(cube, haar, seed, J=3):
    return synth_field(cube, haar, "random_besov", J, spec=L2, seed=seed)


def test_plan_orders_by_weight(cube, haar):
    field = _random_field(cube, haar, seed=31)
    plan = n_term_plan(field, L2)
    assert np.all(np.diff(plan.weights) <= 0.0)
    assert plan.n_indices == field.n_wavelet_indices()
    # plan errors are nonincreasing and hit zero once everything is kept
    errs = [plan.error_at(n) for n in (0, 1, 10, 100, plan.n_indices)]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert errs[-1] == 0.0


def test_error_matches_applied_field(cube, haar):
    field = _random_field(cube, haar, seed=5)
    target = BesovSpec(0.8, 2.0, 2.0)
    plan = n_term_plan(field, target)
    e = target.weight_exponent()
    for n in (0, 7, 64):
        kept = plan.apply(field, n)
        total = 0.0
        for j in field.level_range():
            diff = np.abs(field.level(j) - kept.level(j))
            total += float((((2.0 ** (j * e)) * diff) ** 2).sum())
        assert plan.error_at(n) == pytest.approx(math.sqrt(total), rel=1e-12)
        assert np.array_equal(kept.coarse, field.coarse)


def test_best_n_term_returns_heaviest(cube, haar):
    field = _random_field(cube, haar, seed=8)
    target = BesovSpec(1.2, 2.0, 2.0)
    indices, err = best_n_term(field, target, 5)
    assert len(indices) == 5
    e = target.weight_exponent()
    weights = sorted(
        (2.0 ** (j * e) * abs(v)
         for j in field.level_range()
         for v in field.level(j).ravel()),
        reverse=True)
    got = sorted((2.0 ** (idx.level * e) * abs(field.entry(idx))
                  for idx in indices), reverse=True)
    assert got == pytest.approx(weights[:5], rel=1e-13)
    assert err <= n_term_plan(field, target).error_at(4)


def test_uniform_approx_census(cube, haar):
    field = _random_field(cube, haar, seed=2)
    full = uniform_approx(field, L2, field.J)
    assert full.error == 0.0
    assert full.n_effective == field.n_wavelet_indices()
    nothing = uniform_approx(field, L2, -1)
    assert nothing.n_effective == 0
    assert nothing.error == pytest.approx(n_term_plan(field, L2).error_at(0))
    partial = uniform_approx(field, L2, 1)
    assert partial.n_effective == sum(level_size(haar, j, 6) for j in (0, 1))


def test_fit_rate_recovers_exact_power_law():
    ns = [2 ** m for m in range(4, 12)]
    samples = [(n, 3.0 * n ** -0.75) for n in ns]
    report = fit_rate(samples, predicted=0.75)
    assert report.slope == pytest.approx(-0.75, abs=1e-12)
    assert report.decay == pytest.approx(0.75, abs=1e-12)
    assert report.r_squared == pytest.approx(1.0, abs=1e-12)
    assert report.verdict == "consistent"
    # with seven or more samples the ends are trimmed before fitting
    assert report.fit_lo == 2 and report.fit_hi == len(ns) - 1


def test_fit_rate_trims_polluted_ends():
    ns = [2 ** m for m in range(4, 13)]
    errors = [8.0 * n ** -0.5 for n in ns]
    errors[1] *= 0.9   # bend the head (stays monotone)
    errors[-1] *= 0.9  # truncation dip at the tail
    report = fit_rate(list(zip(ns, errors)))
    assert report.slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_rate_verdict_tolerance():
    ns = [2 ** m for m in range(4, 10)]
    samples = [(n, n ** -0.6) for n in ns]
    assert fit_rate(samples, predicted=0.646).verdict == "consistent"
    assert fit_rate(samples, predicted=0.71).verdict == "inconsistent"
    assert fit_rate(samples, predicted=0.63, rel_tol=0.0,
                    abs_tol=0.001).verdict == "inconsistent"


def test_fit_rate_input_validation():
    with pytest.raises(ValueError):
        fit_rate([(16, 1.0), (32, 0.5), (64, 0.25)])
    with pytest.raises(ValueError):
        fit_rate([(16, 1.0), (8, 0.5), (64, 0.25), (128, 0.1)])
    with pytest.raises(ValueError):
        fit_rate([(16, 1.0), (32, 1.5), (64, 0.25), (128, 0.1)])
    with pytest.raises(ValueError):
        fit_rate([(16, 1.0), (32, 0.5), (64, -0.2), (128, 0.1)])


def test_predicted_rate_cases():
    dst = BesovSpec(0.0, 2.0, 2.0)
    # gamma equals the integrability payment: the q-gap caps the rate
    limiting = BesovSpec(1.0, 1.0, 1.0)
    assert predicted_rate(limiting, dst) == pytest.approx(0.5)
    # strict smoothness surplus: the full gamma / 2
    assert predicted_rate(BesovSpec(2.5, 1.0, 1.0), dst) == pytest.approx(1.25)
    with pytest.raises(ValueError):
        predicted_rate(BesovSpec(0.5, 2.0, 2.0), BesovSpec(1.0, 2.0, 2.0))


def test_alpha_gamma_star():
    assert alpha_star(1.0, 2, 1.0, 2.0) == pytest.approx(1.0)
    assert alpha_star(0.5, 1, 0.75, 2.0) == pytest.approx(0.5)
    assert alpha_star(1.8, 2, 2.0, 2.0) == pytest.approx(0.2)
    # s' = 0 resolves to theta = 1: the full doubled-adaptivity gap
    assert gamma_star(0.75, 0.0, 2.0, 0.5) == pytest.approx(1.0)
    assert gamma_star(1.0, 0.5, 2.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gamma_star(0.75, 1.6, 2.0, 0.5)


def test_synth_suffix_saturator_is_exact(cube, haar):
    gamma = 1.0
    field = synth_field(cube, haar, "suffix_saturator", 4, gamma=gamma, spec=L2)
    plan = n_term_plan(field, L2)
    M = plan.n_indices
    a = gamma * L2.p / 2.0
    for n in (0, 1, 16, 200, 4000):
        want = ((n + 1.0) ** -a - (M + 1.0) ** -a) ** (1.0 / L2.p)
        assert plan.error_at(n) == pytest.approx(want, rel=1e-10)


def test_synth_reproducible(cube, haar):
    f1 = synth_field(cube, haar, "random_besov", 3, spec=L2, seed=42)
    f2 = synth_field(cube, haar, "random_besov", 3, spec=L2, seed=42)
    f3 = synth_field(cube, haar, "random_besov", 3, spec=L2, seed=43)
    for j in f1.level_range():
        assert np.array_equal(f1.level(j), f2.level(j))
    assert not np.array_equal(f1.level(3), f3.level(3))


def test_synth_extremal_and_lacunary(cube, haar):
    ext = synth_field(cube, haar, "extremal_a_star", 3, level=2, alpha=1.0)
    assert np.all(ext.level(2) == 2.0 ** (-2 * 2.0))
    assert np.all(ext.level(1) == 0.0) and np.all(ext.level(3) == 0.0)
    lac = synth_field(cube, haar, "lacunary", 3, alpha=0.5)
    for j in lac.level_range():
        lev = lac.level(j)
        assert np.count_nonzero(lev) == 1
        assert lev[0, 0, 0, 0, 0, 0] == 2.0 ** (-j * 1.5)


def test_level_tail_sums_split(cube, haar):
    field = _random_field(cube, haar, seed=77)
    tau = 1.0
    full = level_tail_sums(field, tau)
    interior = level_tail_sums(field, tau, kinds="interior")
    boundary = level_tail_sums(field, tau, kinds="boundary")
    for j in field.level_range():
        assert full[j] == pytest.approx(interior[j] + boundary[j], rel=1e-12)
    with pytest.raises(ValueError):
        level_tail_sums(field, tau, kinds="everything")


def test_boundary_census_growth(cube, haar):
    js = np.arange(2, 7)
    counts = [float((~classify_level(cube, haar, j)).sum() * 3) for j in js]
    # one boundary layer of cells: the census grows like 2^j
    slope = np.polyfit(js * np.log(2.0), np.log(counts), 1)[0]
    assert 0.8 <= slope <= 1.35


def test_assess_growth_windows():
    stable = assess_growth([1.0, 1.5, 1.7, 1.75, 1.76, 1.762])
    assert stable.stable and not stable.growing
    growing = assess_growth([1.0, 1.1, 1.3, 1.7, 2.4, 3.6])
    assert growing.growing and not growing.stable
    mixed = assess_growth([1.0, 1.2, 1.21, 1.5, 1.51, 1.9])
    assert not mixed.stable and not mixed.growing
    with pytest.raises(ValueError):
        assess_growth([1.0, 1.1, 1.2])


def test_cumulative_tail_orders_levels():
    sums = {3: 1.0, 1: 2.0, 2: 0.5}
    assert np.allclose(cumulative_tail(sums), [2.0, 2.5, 3.5])


def test_tail_check_ranges(cube, haar):
    field = _random_field(cube, haar, seed=13)
    lhs, rhs, ratio = boundary_tail_check(field, 0.75, 2.0, 1.25)
    assert lhs > 0 and rhs > 0 and ratio == pytest.approx(lhs / rhs)
    with pytest.raises(ValueError):
        boundary_tail_check(field, 0.75, 2.0, 0.4)
    handle = VertexPowerModel(cube, vertex=0, beta=0.6)
    with pytest.raises(ValueError):
        interior_tail_check(field, handle, WeightedSpec(1, 0.5), 0.95)


def test_whitney_polynomial_reproduction():
    # anything of total degree < k is matched exactly: the ratio is 0.0
    assert whitney_check(lambda x, y: 1.0 + 2 * x - y, (0.3, 0.4, 0.25), 2) == 0.0
    assert whitney_check(lambda x, y: x * x - y + 0.2 * x * y,
                         (0.1, 0.2, 0.5), 3) == 0.0
    # degree k is no longer free
    assert whitney_check(lambda x, y: x * x, (0.3, 0.4, 0.25), 2) > 0.0


def test_whitney_scale_invariance_of_smooth_ratio():
    func = lambda x, y: np.exp(x + y)  # noqa: E731
    vals = [whitney_check(func, (0.3, 0.4, 0.25 * 0.5 ** i), 2)
            for i in range(4)]
    assert all(v > 0 for v in vals)
    spread = max(vals) / min(vals)
    assert spread < 1.2


def test_whitney_validation():
    with pytest.raises(ValueError):
        whitney_check(lambda x, y: x, (0.0, 0.0, -1.0), 2)
    with pytest.raises(ValueError):
        whitney_check(lambda x, y: x, (0.0, 0.0, 1.0), 0)
