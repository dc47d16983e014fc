import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorecard.data import ClassWeights
from scorecard.scoring import (
    CoefficientSet,
    ScoringSystem,
    is_coprime,
    load_model,
    norms,
    objective,
    points,
    render_table,
    save_model,
    score,
    weighted_loss,
    zero_one_loss,
)

from conftest import toy_dataset

# Published fixture: the sleep-apnea screening table (five rules, threshold 1)
APNEA = ScoringSystem(
    intercept=-1,
    coefficients=(4, 4, 2, 2, -6),
    feature_names=("age_ge_60", "hypertension", "bmi_ge_30", "bmi_ge_40", "female"),
    metadata={},
)

# Published fixture: the mushroom table (threshold 3, seven nonzero coefficients)
MUSHROOM = ScoringSystem(
    intercept=-3,
    coefficients=(4, 2, 2, -2, -4, -4, -4),
    feature_names=(
        "spore_print_color==green",
        "stalk_surface_above_ring==grooves",
        "population==clustered",
        "gill_size==broad",
        "odor==none",
        "odor==almond",
        "odor==anise",
    ),
    metadata={},
)


class TestScore:
    def test_apnea_patient(self):
        # male, age >= 60, hypertensive, bmi 32
        x = [1, 1, 1, 1, 0, 0]
        assert score(APNEA, x) == 9
        assert points(APNEA, x) == 10  # 10 > 1, table threshold
        assert APNEA.predict(x) == 1

    def test_zero_model(self):
        zero = ScoringSystem(0, (0, 0), ("a", "b"))
        assert score(zero, [1, 5, -3]) == 0
        assert zero.predict([1, 5, -3]) == -1  # ties predict negative

    def test_mushroom_odor_none(self):
        x = [1, 0, 0, 0, 0, 1, 0, 0]
        assert points(MUSHROOM, x) == -4  # not above the threshold of 3
        assert score(MUSHROOM, x) == -7
        assert MUSHROOM.predict(x) == -1

    def test_dimension_mismatch(self):
        with pytest.raises(Exception):
            score(APNEA, [1, 1])

    def test_integer_exactness_on_binary_features(self):
        model = ScoringSystem(10 ** 9, (10 ** 9,), ("big",))
        assert score(model, [1, 1]) == 2 * 10 ** 9


class TestLosses:
    def test_zero_model_errs_everywhere(self, rng):
        ds = toy_dataset(rng.integers(0, 2, size=(12, 3)).astype(float),
                         rng.choice([-1, 1], size=12))
        zero = ScoringSystem(0, (0, 0, 0), ds.feature_names)
        count, rate = zero_one_loss(zero, ds)
        assert (count, rate) == (12, 1.0)

    def test_perfect_separator(self):
        ds = toy_dataset([[1.0], [0.0]], [1, -1])
        model = ScoringSystem(-1, (2,), ds.feature_names)
        assert zero_one_loss(model, ds) == (0, 0.0)

    def test_margin_zero_counts_as_error(self):
        ds = toy_dataset([[1.0], [1.0], [0.0], [3.0]], [1, 1, -1, -1])
        model = ScoringSystem(0, (0,), ds.feature_names)  # all scores 0
        count, _ = zero_one_loss(model, ds)
        assert count == 4

    def test_weighted_uniform_halves_rate(self, rng):
        ds = toy_dataset(rng.integers(0, 2, size=(10, 2)).astype(float),
                         [1] * 5 + [-1] * 5)
        model = ScoringSystem(0, (0, 0), ds.feature_names)
        w = ClassWeights(0.5, 0.5)
        assert weighted_loss(model, ds, w) == pytest.approx(0.5)

    def test_weighted_ignores_zero_weight_class(self):
        ds = toy_dataset([[1.0], [0.0]], [1, -1])
        model = ScoringSystem(2, (0,), ds.feature_names)  # all +1: errs negatives
        assert weighted_loss(model, ds, ClassWeights(1.0, 0.0)) == 0.0

    def test_balanced_zero_model_formula(self):
        # six-point fixture: 2 positive, 4 negative
        ds = toy_dataset(np.zeros((6, 1)), [1, 1, -1, -1, -1, -1])
        w = ClassWeights(ds.n_neg / ds.n, ds.n_pos / ds.n)
        model = ScoringSystem(0, (0,), ds.feature_names)
        expect = 2.0 * (ds.n_neg / ds.n) * (ds.n_pos / ds.n)
        assert weighted_loss(model, ds, w) == pytest.approx(expect, abs=1e-15)

    def test_scale_invariance(self, rng):
        ds = toy_dataset(rng.integers(0, 2, size=(15, 3)).astype(float),
                         rng.choice([-1, 1], size=15))
        base = ScoringSystem(-1, (2, -3, 1), ds.feature_names)
        for k in (2, 3, 7):
            scaled = ScoringSystem(-k, (2 * k, -3 * k, k), ds.feature_names)
            assert zero_one_loss(scaled, ds) == zero_one_loss(base, ds)


class TestNormsObjective:
    def test_apnea_norms(self):
        assert norms(APNEA) == (5, 18)

    def test_zero_and_single(self):
        assert norms(ScoringSystem(3, (0, 0), ("a", "b"))) == (0, 0)
        assert norms(ScoringSystem(0, (-7,), ("a",))) == (1, 7)

    def test_objective_zero_model_is_one(self, rng):
        ds = toy_dataset(rng.normal(size=(9, 2)), rng.choice([-1, 1], size=9))
        zero = ScoringSystem(0, (0, 0), ds.feature_names)
        for c0, eps in [(0.01, 0.0), (0.3, 1e-4), (0.9, 1e-2)]:
            assert objective(zero, ds, c0, eps) == 1.0

    def test_objective_perfect_model(self):
        ds = toy_dataset([[1.0, 0, 1], [0.0, 1, 0]], [1, -1])
        model = ScoringSystem(-1, (2, 0, 2), ds.feature_names)
        # wait: ensure it separates
        assert zero_one_loss(model, ds)[0] == 0
        assert objective(model, ds, 0.01, 0.0) == pytest.approx(0.02)

    def test_objective_hand_recomputed(self, rng):
        ds = toy_dataset(rng.integers(0, 2, size=(10, 3)).astype(float),
                         rng.choice([-1, 1], size=10))
        model = ScoringSystem(1, (2, 0, -1), ds.feature_names)
        c0, eps = 0.05, 1e-5
        margins = ds.labels * (ds.features @ model.vector)
        by_hand = (margins <= 0).mean() + c0 * 2 + eps * 3
        assert objective(model, ds, c0, eps) == pytest.approx(by_hand, abs=1e-12)

    def test_per_feature_c0_vector(self):
        ds = toy_dataset([[1.0, 1.0]], [1])
        model = ScoringSystem(0, (1, 1), ds.feature_names)
        val = objective(model, ds, [0.1, 0.3], 0.0)
        assert val == pytest.approx(0.0 + 0.4)


class TestCoprime:
    def test_gcd_one(self):
        assert is_coprime(ScoringSystem(-1, (2, 2), ("a", "b")))

    def test_gcd_two(self):
        assert not is_coprime(ScoringSystem(2, (4, -6), ("a", "b")))

    def test_apnea_coprime(self):
        assert is_coprime(APNEA)

    def test_zero_model_vacuous(self):
        with pytest.warns(UserWarning, match="gcd undefined"):
            assert is_coprime(ScoringSystem(0, (0,), ("a",)))


class TestRenderTable:
    def test_apnea_headline_and_rows(self):
        text = render_table(APNEA, threshold_note="PATIENT HAS OBSTRUCTIVE SLEEP APNEA")
        lines = text.splitlines()
        assert lines[0] == "PREDICT PATIENT HAS OBSTRUCTIVE SLEEP APNEA IF SCORE > 1"
        rows = [l for l in lines if " points" in l]
        assert len(rows) == 5
        assert "female" in rows[0]  # largest magnitude first

    def test_deterministic(self):
        a = render_table(APNEA)
        b = render_table(APNEA)
        assert a == b

    def test_zero_model(self):
        text = render_table(ScoringSystem(0, (0, 0), ("a", "b")))
        assert "SCORE > 0" in text
        assert "no nonzero coefficients" in text

    def test_mushroom_golden(self):
        golden = (
            "PREDICT MUSHROOM IS POISONOUS IF SCORE > 3\n"
            "==========================================\n"
            "  1.  odor==almond                       -4 points    ......\n"
            "  2.  odor==anise                        -4 points  + ......\n"
            "  3.  odor==none                         -4 points  + ......\n"
            "  4.  spore_print_color==green            4 points  + ......\n"
            "  5.  gill_size==broad                   -2 points  + ......\n"
            "  6.  population==clustered               2 points  + ......\n"
            "  7.  stalk_surface_above_ring==grooves   2 points  + ......\n"
            "------------------------------------------\n"
            "      ADD POINTS FROM ROWS 1-7               SCORE  = ......\n"
        )
        assert render_table(MUSHROOM, threshold_note="MUSHROOM IS POISONOUS") == golden

    def test_markdown_variant(self):
        text = render_table(APNEA, markdown=True)
        assert text.startswith("**PREDICT")
        assert "| 1 | female | -6 |" in text


class TestPersistence:
    def test_round_trip_predictions(self, tmp_path, rng):
        ds = toy_dataset(rng.integers(0, 2, size=(20, 5)).astype(float),
                         rng.choice([-1, 1], size=20))
        model = ScoringSystem(-2, (1, 0, 3, -1, 0), ds.feature_names,
                              metadata={"c0": 0.01, "eps": 1e-5,
                                        "solver_status": "optimal", "gap": 0.0})
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.intercept == model.intercept
        assert back.coefficients == model.coefficients
        for i in range(ds.n):
            assert back.predict(ds.features[i]) == model.predict(ds.features[i])


class TestCoefficientSet:
    def test_requires_zero(self):
        with pytest.raises(Exception):
            CoefficientSet(((1, 2),))

    def test_uniform_bounds(self):
        cs = CoefficientSet.uniform(3, lam=10, intercept=100)
        assert cs.bounds(0) == (-100, 100)
        assert cs.bounds(1) == (-10, 10)
        assert cs.lam(2) == 10
        assert cs.max_l1() == 30

    def test_sign_restriction(self):
        cs = CoefficientSet.uniform(1, lam=3, intercept=3).with_sign(1, +1)
        assert cs.values[1] == (0, 1, 2, 3)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=4).flatmap(
        lambda p: st.tuples(
            st.just(p),
            st.lists(st.integers(min_value=-9, max_value=9),
                     min_size=p + 1, max_size=p + 1),
            st.permutations(list(range(p))),
        )
    )
)
def test_norms_invariant_under_feature_permutation(args):
    p, lam, perm = args
    names = tuple(f"f{j}" for j in range(p))
    model = ScoringSystem(lam[0], tuple(lam[1:]), names)
    shuffled = ScoringSystem(lam[0], tuple(lam[1 + j] for j in perm),
                             tuple(names[j] for j in perm))
    assert norms(model) == norms(shuffled)
