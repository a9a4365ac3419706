import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sampleopt import (
    AnalyticalFunction,
    CsvFormatError,
    Dataset,
    GeneratorSpec,
    Predicate,
    build_index,
    generate_synthetic,
    load_csv,
    stack_groups,
    to_csv,
    true_result,
)


def test_generate_deterministic_bit_identical():
    spec = GeneratorSpec("normal", (0.0, 1.0), rows_per_group=5000, seed=123)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    assert np.array_equal(a.measures, b.measures)
    assert np.array_equal(a.group_ids, b.group_ids)


def test_generate_pareto_mean_matches_theory():
    spec = GeneratorSpec("pareto", (3.0,), rows_per_group=1_000_000, seed=5)
    ds = generate_synthetic(spec)
    col = ds.measures[:, 0]
    se = col.std(ddof=1) / np.sqrt(col.size)
    assert abs(col.mean() - 1.5) <= 3 * se


def test_generate_uniform_mean_matches_theory():
    spec = GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=1_000_000, seed=6)
    col = generate_synthetic(spec).measures[:, 0]
    se = col.std(ddof=1) / np.sqrt(col.size)
    assert abs(col.mean() - 0.5) <= 3 * se


@pytest.mark.parametrize(
    "dist,params",
    [
        ("uniform", (1.0, 1.0)),
        ("uniform", (2.0, 1.0)),
        ("pareto", (0.0,)),
        ("pareto", (-1.0,)),
        ("normal", (0.0, 0.0)),
        ("exponential", (-2.0,)),
    ],
)
def test_generate_rejects_bad_params(dist, params):
    with pytest.raises(ValueError):
        GeneratorSpec(dist, params, rows_per_group=10)


def test_generate_group_bias_ladder_shifts_means():
    spec = GeneratorSpec(
        "normal", (1.0, 1.0), rows_per_group=200_000, num_groups=2,
        group_bias=0.05, seed=9,
    )
    ds = generate_synthetic(spec)
    theta = true_result(ds, AnalyticalFunction.avg())
    assert abs(theta[0] - 1.0) < 0.01
    assert abs(theta[1] - 1.05) < 0.01


def test_load_csv_counts_groups(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("group,value\na,1\na,2\nb,3\n")
    ds = load_csv(path, "group", ["value"])
    assert ds.num_groups == 2
    assert ds.group_sizes.tolist() == [2, 1]
    assert ds.group_names == ("a", "b")


def test_load_csv_header_only_is_empty_dataset(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("group,value\n")
    with pytest.raises(CsvFormatError, match="empty dataset"):
        load_csv(path, "group", ["value"])


def test_load_csv_parse_error_cites_row(tmp_path):
    path = tmp_path / "d.csv"
    rows = "".join(f"a,{i}\n" for i in range(1, 7))
    path.write_text("group,value\n" + rows + "a,x\n")
    with pytest.raises(CsvFormatError, match="row 7") as err:
        load_csv(path, "group", ["value"])
    assert err.value.row == 7


def test_load_csv_missing_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("group,value\na,1\n")
    with pytest.raises(CsvFormatError, match="missing"):
        load_csv(path, "group", ["nope"])


def test_csv_round_trip(tmp_path):
    spec = GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=50, num_groups=3, seed=2)
    ds = generate_synthetic(spec)
    path = tmp_path / "out.csv"
    to_csv(ds, path)
    back = load_csv(path, "group", ["value"])
    assert np.array_equal(back.group_ids, ds.group_ids)
    assert np.allclose(back.measures, ds.measures)


def test_build_index_examples():
    ds = Dataset.from_columns(["a", "b", "a"], {"v": [1.0, 2.0, 3.0]})
    idx = build_index(ds)
    assert idx.lists[0].tolist() == [0, 2]
    assert idx.lists[1].tolist() == [1]

    single = Dataset.from_columns(["x"] * 5, {"v": np.arange(5.0)})
    assert build_index(single).lists[0].tolist() == [0, 1, 2, 3, 4]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=200))
def test_build_index_partitions_all_rows(ids):
    ds = Dataset.from_columns([f"g{v}" for v in ids], {"v": np.zeros(len(ids))})
    idx = build_index(ds)
    merged = np.sort(np.concatenate(idx.lists))
    assert np.array_equal(merged, np.arange(len(ids)))
    for g, rows in enumerate(idx.lists):
        assert len(rows) == ds.group_sizes[g]
        assert (ds.group_ids[rows] == g).all()


def test_true_result_examples():
    ds = Dataset.from_columns(["a"] * 3, {"v": [1.0, 2.0, 3.0]})
    assert true_result(ds, AnalyticalFunction.avg()).tolist() == [2.0]

    ds2 = Dataset.from_columns(["a"] * 3, {"v": [-1.0, 1.0, 1.0]})
    prop = AnalyticalFunction.proportion(Predicate("v", ">", 0.0))
    assert true_result(ds2, prop)[0] == pytest.approx(2 / 3)

    ds3 = Dataset.from_columns(["a"] * 3, {"v": [1.0, 1.0, 1.0]})
    assert true_result(ds3, AnalyticalFunction.var())[0] == 0.0


def test_true_result_uniform_avg_near_half():
    ds = generate_synthetic(GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=1_000_000, seed=13))
    theta = true_result(ds, AnalyticalFunction.avg())
    assert abs(theta[0] - 0.5) <= 0.005


def test_stack_groups_concatenates():
    a = generate_synthetic(GeneratorSpec("normal", (0.0, 1.0), rows_per_group=100, seed=1))
    b = generate_synthetic(GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=150, seed=2))
    ds = stack_groups([a, b])
    assert ds.num_groups == 2
    assert ds.group_sizes.tolist() == [100, 150]
    assert np.allclose(ds.measures[:100, 0], a.measures[:, 0])


def test_dataset_arrays_are_immutable():
    ds = Dataset.from_columns(["a", "b"], {"v": [1.0, 2.0]})
    with pytest.raises(ValueError):
        ds.measures[0, 0] = 9.0
    with pytest.raises(ValueError):
        ds.group_ids[0] = 1


def test_dataset_rejects_empty():
    with pytest.raises(ValueError):
        Dataset.from_columns([], {"v": []})
