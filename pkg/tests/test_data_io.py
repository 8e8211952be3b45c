import numpy as np
import pytest

from gamspline.data_io import (
    FUNCTION_CATALOG,
    SchemaManifest,
    SplitPlan,
    SyntheticSpec,
    default_manifest,
    generate_synthetic,
    grouped_split,
    load_dataset,
    save_dataset,
)
from gamspline.design import Dataset
from gamspline.errors import DatasetError

BASIC_CSV = """group_id,label,age,sex,q_LVH,site
p1,1,63.0,1,0.82,north
p1,0,61.0,1,0.41,north
p2,0,44.0,0,0.13,south
"""

BASIC_MANIFEST = SchemaManifest(
    label="label",
    covariates=("age", "sex"),
    predictors=("q_LVH",),
    group_id="group_id",
    tags={"site": "site"},
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadDataset:
    def test_well_formed(self, tmp_path):
        data = load_dataset(write(tmp_path, BASIC_CSV), BASIC_MANIFEST)
        assert data.n_rows == 3
        np.testing.assert_array_equal(data.labels, [1, 0, 0])
        assert data.covariate_names == ("age", "sex")
        assert data.predictors[0, 0] == 0.82
        assert list(data.tags["site"]) == ["north", "north", "south"]

    def test_logits_input_sigmoid(self, tmp_path):
        csv_text = "group_id,label,q\np1,1,0.0\np2,0,-2.0\np3,1,2.0\n"
        manifest = SchemaManifest(
            label="label", covariates=(), predictors=("q",),
            group_id="group_id", logits_input=True,
        )
        data = load_dataset(write(tmp_path, csv_text), manifest)
        assert data.predictors[0, 0] == 0.5
        assert data.predictors[1, 0] == pytest.approx(1 / (1 + np.exp(2.0)))

    def test_out_of_range_predictor_names_row_and_column(self, tmp_path):
        bad = BASIC_CSV.replace("0.41", "1.7")
        with pytest.raises(DatasetError, match=r"row 2, column q_LVH out of \[0,1\]"):
            load_dataset(write(tmp_path, bad), BASIC_MANIFEST)

    def test_missing_column(self, tmp_path):
        manifest = SchemaManifest(
            label="label", covariates=("age", "bmi"), predictors=("q_LVH",),
            group_id="group_id",
        )
        with pytest.raises(DatasetError, match="missing column 'bmi'"):
            load_dataset(write(tmp_path, BASIC_CSV), manifest)

    def test_non_numeric_cell(self, tmp_path):
        bad = BASIC_CSV.replace("44.0", "abc")
        with pytest.raises(DatasetError, match="row 3, column age"):
            load_dataset(write(tmp_path, bad), BASIC_MANIFEST)

    def test_bad_label(self, tmp_path):
        bad = BASIC_CSV.replace("p2,0,", "p2,2,")
        with pytest.raises(DatasetError, match="label must be 0 or 1"):
            load_dataset(write(tmp_path, bad), BASIC_MANIFEST)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError, match="empty"):
            load_dataset(write(tmp_path, ""), BASIC_MANIFEST)

    def test_timestamp_column(self, tmp_path):
        csv_text = "group_id,label,q,ts\np1,1,0.5,3.0\np1,0,0.6,5.0\np2,0,0.2,1.0\n"
        manifest = SchemaManifest(
            label="label", covariates=(), predictors=("q",),
            group_id="group_id", timestamp="ts",
        )
        data = load_dataset(write(tmp_path, csv_text), manifest)
        np.testing.assert_array_equal(data.timestamps, [3.0, 5.0, 1.0])


class TestManifest:
    def test_roundtrip(self):
        payload = BASIC_MANIFEST.to_dict()
        assert SchemaManifest.from_dict(payload) == BASIC_MANIFEST

    def test_missing_keys_rejected(self):
        with pytest.raises(ValueError, match="missing keys"):
            SchemaManifest.from_dict({"label": "y"})

    def test_duplicate_columns_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            SchemaManifest(label="y", covariates=("a", "a"), predictors=(), group_id="g")


class TestSaveRoundtrip:
    def test_save_load_identity(self, tmp_path):
        spec = SyntheticSpec(
            n=50, function_ids=("sine", "zero"), covariate_coefs=(0.3,), seed=77
        )
        data, _ = generate_synthetic(spec)
        path = tmp_path / "out.csv"
        manifest = save_dataset(data, path)
        loaded = load_dataset(path, manifest)
        np.testing.assert_array_equal(loaded.labels, data.labels)
        np.testing.assert_array_equal(loaded.covariates, data.covariates)
        np.testing.assert_array_equal(loaded.predictors, data.predictors)
        assert list(loaded.group_ids) == list(data.group_ids)

    def test_default_manifest_matches_layout(self):
        spec = SyntheticSpec(n=10, function_ids=("zero",), seed=1)
        data, _ = generate_synthetic(spec)
        manifest = default_manifest(data)
        assert manifest.label == "label"
        assert manifest.predictors == data.predictor_names


def make_grouped_dataset(rng, n_groups, rows_per_group=1, with_timestamps=False):
    rows = []
    for g in range(n_groups):
        for _ in range(rows_per_group):
            rows.append(g)
    idx = np.asarray(rows)
    n = idx.size
    return Dataset(
        labels=rng.integers(0, 2, size=n),
        covariates=rng.standard_normal((n, 1)),
        predictors=rng.random((n, 1)),
        group_ids=np.array([f"p{g}" for g in idx]),
        covariate_names=("z",),
        predictor_names=("q",),
        timestamps=rng.random(n) if with_timestamps else None,
    )


class TestGroupedSplit:
    def test_ten_groups_eight_one_one(self):
        rng = np.random.default_rng(0)
        data = make_grouped_dataset(rng, 10, rows_per_group=3, with_timestamps=True)
        train, valid, test = grouped_split(data, SplitPlan(fractions=(0.8, 0.1, 0.1), seed=4))
        groups = [set(train.group_ids), set(valid.group_ids), set(test.group_ids)]
        assert len(groups[0]) == 8 and len(groups[1]) == 1 and len(groups[2]) == 1
        assert not (groups[0] & groups[1])
        assert not (groups[0] & groups[2])
        assert not (groups[1] & groups[2])
        assert train.n_rows == 24  # training keeps all rows

    def test_same_seed_identical(self):
        rng = np.random.default_rng(1)
        data = make_grouped_dataset(rng, 25, rows_per_group=2, with_timestamps=True)
        plan = SplitPlan(seed=7)
        a = grouped_split(data, plan)
        b = grouped_split(data, plan)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.labels, y.labels)
            np.testing.assert_array_equal(x.group_ids, y.group_ids)

    def test_dedup_keeps_max_timestamp(self):
        labels = np.array([0, 1, 0, 1, 0, 1])
        data = Dataset(
            labels=labels,
            covariates=np.zeros((6, 0)),
            predictors=np.linspace(0.1, 0.6, 6).reshape(-1, 1),
            group_ids=np.array(["a", "a", "a", "b", "c", "d"]),
            covariate_names=(),
            predictor_names=("q",),
            timestamps=np.array([1.0, 9.0, 4.0, 1.0, 1.0, 1.0]),
        )
        # Force group "a" into the test split by scanning seeds.
        for seed in range(50):
            train, valid, test = grouped_split(
                data, SplitPlan(fractions=(0.5, 0.25, 0.25), seed=seed)
            )
            if "a" in set(test.group_ids):
                rows = test.group_ids == "a"
                assert rows.sum() == 1
                assert test.timestamps[rows][0] == 9.0
                return
        pytest.fail("group never landed in test split")

    def test_dedup_without_timestamps_warns(self, caplog):
        rng = np.random.default_rng(2)
        data = make_grouped_dataset(rng, 12, rows_per_group=3, with_timestamps=False)
        with caplog.at_level("WARNING"):
            _, valid, test = grouped_split(data, SplitPlan(seed=0))
        for split in (valid, test):
            values, counts = np.unique(split.group_ids, return_counts=True)
            assert np.all(counts == 1)
        assert "seeded-random" in caplog.text

    def test_too_few_groups(self):
        rng = np.random.default_rng(3)
        data = make_grouped_dataset(rng, 2)
        with pytest.raises(ValueError, match="at least 3 groups"):
            grouped_split(data, SplitPlan())

    def test_row_level_split(self):
        rng = np.random.default_rng(4)
        data = make_grouped_dataset(rng, 4, rows_per_group=5)
        train, valid, test = grouped_split(
            data, SplitPlan(fractions=(0.5, 0.25, 0.25), group_aware=False, seed=0)
        )
        assert train.n_rows + valid.n_rows + test.n_rows == 20

    def test_fraction_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            SplitPlan(fractions=(0.5, 0.3, 0.3))
        with pytest.raises(ValueError, match="positive"):
            SplitPlan(fractions=(1.0, 0.0, 0.0))


class TestSynthetic:
    def test_neutral_generator_half_positive(self):
        spec = SyntheticSpec(n=4000, function_ids=("zero", "zero"), seed=5)
        data, _ = generate_synthetic(spec)
        assert abs(data.labels.mean() - 0.5) < 3.0 / np.sqrt(4000)

    def test_large_negative_intercept(self):
        spec = SyntheticSpec(n=10_000, function_ids=("zero",), intercept=-10.0, seed=6)
        data, _ = generate_synthetic(spec)
        assert data.labels.mean() < 0.01

    def test_deterministic(self):
        spec = SyntheticSpec(
            n=200, function_ids=("sine", "linear"), covariate_coefs=(0.2, -0.2), seed=8
        )
        a, _ = generate_synthetic(spec)
        b, _ = generate_synthetic(spec)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.covariates, b.covariates)
        np.testing.assert_array_equal(a.predictors, b.predictors)

    def test_catalog_functions_integrate_to_zero(self):
        # Composite Simpson with 40001 points resolves these smooth shapes
        # to well below the 1e-10 bound.
        grid = np.linspace(0.0, 1.0, 40_001)
        h = grid[1] - grid[0]
        for name, func in FUNCTION_CATALOG.items():
            values = func(grid)
            integral = (h / 3) * (
                values[0] + values[-1] + 4 * values[1:-1:2].sum() + 2 * values[2:-2:2].sum()
            )
            assert abs(integral) < 1e-10, name

    def test_predictors_clipped_inside_unit_interval(self):
        spec = SyntheticSpec(
            n=2000, function_ids=("zero",), predictor_sigma=(8.0,), seed=9
        )
        data, _ = generate_synthetic(spec)
        assert data.predictors.min() >= 1e-6
        assert data.predictors.max() <= 1.0 - 1e-6

    def test_ground_truth_linear_predictor(self):
        spec = SyntheticSpec(
            n=100, function_ids=("sine",), covariate_coefs=(1.0,), intercept=0.5, seed=10
        )
        data, truth = generate_synthetic(spec)
        eta = truth.linear_predictor(data)
        expected = 0.5 + data.covariates[:, 0] + np.sin(2 * np.pi * data.predictors[:, 0])
        np.testing.assert_allclose(eta, expected, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="unknown function"):
            SyntheticSpec(n=10, function_ids=("cubic",))
        with pytest.raises(ValueError, match="positive"):
            SyntheticSpec(n=10, function_ids=("zero",), predictor_sigma=(0.0,))
        with pytest.raises(ValueError, match="at least 1"):
            SyntheticSpec(n=0, function_ids=("zero",))
