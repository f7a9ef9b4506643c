import numpy as np
import pytest

from vbma import (
    DataError,
    ModelIndex,
    SingularModelError,
    cross_products,
    prepare_dataset,
    submodel_chol,
)
from vbma.data import load_csv

from .oracles import naive_cross_products


def test_existence_precondition_probit():
    X = np.random.default_rng(0).normal(size=(4, 2))
    with pytest.raises(DataError, match="all outcomes equal"):
        prepare_dataset(X, np.ones(4), "probit")


def test_existence_precondition_tobit():
    X = np.random.default_rng(0).normal(size=(5, 2))
    y = np.array([0.0, 0.0, 0.0, 0.0, 1.3])
    with pytest.raises(DataError, match="fewer than two uncensored"):
        prepare_dataset(X, y, "tobit", y_L=0.0)


def test_existence_precondition_star():
    X = np.random.default_rng(0).normal(size=(5, 2))
    y = np.array([0.0, 0.0, 0.0, 0.0, 3.0])
    with pytest.raises(DataError, match="fewer than two positive counts"):
        prepare_dataset(X, y, "star")


def test_centering_records_means():
    X = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 9.0]])
    y = np.array([0.0, 1.0, 1.0])
    ds = prepare_dataset(X, y, "probit")
    np.testing.assert_allclose(ds.X[:, 0], [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(ds.column_means, [2.0, 6.0])
    assert np.abs(ds.X.sum(axis=0)).max() < 3 * 1e-10


def test_centering_idempotent():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    y = (rng.normal(size=40) > 0).astype(float)
    ds1 = prepare_dataset(X, y, "probit")
    ds2 = prepare_dataset(ds1.X, y, "probit")
    np.testing.assert_allclose(ds1.X, ds2.X, atol=1e-14)


def test_constant_column_rejected():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    y = np.array([0, 1, 0, 1, 1.0])
    with pytest.raises(DataError, match="constant column"):
        prepare_dataset(X, y, "probit")


def test_cross_products_small_cases():
    y = np.array([0.0, 1.0, 1.0])
    X = np.array([[-1.0, 0.0], [0.0, 1.0], [1.0, -1.0]])
    ds = prepare_dataset(X, y, "probit")
    G = cross_products(ds).G
    np.testing.assert_allclose(G, ds.X.T @ ds.X, atol=1e-12)

    ds1 = prepare_dataset(np.array([[1.0], [2.0], [3.0]]), y, "probit")
    np.testing.assert_allclose(cross_products(ds1).G, [[2.0]], atol=1e-12)


def test_cross_products_match_naive_oracle():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(50, 5))
    y = (rng.normal(size=50) > 0).astype(float)
    ds = prepare_dataset(X, y, "probit")
    G = cross_products(ds).G
    np.testing.assert_allclose(G, naive_cross_products(ds.X), rtol=1e-12, atol=1e-12)


def test_cross_products_row_permutation_invariant():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 4))
    y = (rng.normal(size=30) > 0).astype(float)
    perm = rng.permutation(30)
    ds1 = prepare_dataset(X, y, "probit")
    ds2 = prepare_dataset(X[perm], y[perm], "probit")
    np.testing.assert_allclose(cross_products(ds1).G, cross_products(ds2).G, atol=1e-10)


def test_submodel_chol_null_and_single():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(3, 2))
    X[:, 0] = [1.0, 2.0, 3.0]
    y = np.array([0.0, 1.0, 1.0])
    ds = prepare_dataset(X, y, "probit")
    xp = cross_products(ds)

    null = submodel_chol(xp, ModelIndex.null(2))
    assert null.logdet == 0.0

    one = submodel_chol(xp, ModelIndex.from_string("10"))
    np.testing.assert_allclose(one.solve(np.array([4.0])), [2.0], rtol=1e-12)
    assert one.logdet == pytest.approx(np.log(2.0), rel=1e-12)


def test_submodel_chol_matches_explicit_inverse():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 5))
    y = (rng.normal(size=40) > 0).astype(float)
    ds = prepare_dataset(X, y, "probit")
    xp = cross_products(ds)
    model = ModelIndex.from_string("10110")
    handle = submodel_chol(xp, model)
    idx = np.asarray(model.indices)
    Gk = xp.G[np.ix_(idx, idx)]
    v = rng.normal(size=3)
    np.testing.assert_allclose(handle.solve(v), np.linalg.inv(Gk) @ v, rtol=1e-10)
    assert handle.logdet == pytest.approx(np.linalg.slogdet(Gk)[1], rel=1e-10)


def test_submodel_chol_solve_property(rng):
    X = rng.normal(size=(60, 6))
    y = (rng.normal(size=60) > 0).astype(float)
    ds = prepare_dataset(X, y, "probit")
    xp = cross_products(ds)
    for bits in rng.integers(1, 64, size=10):
        model = ModelIndex(int(bits), 6)
        handle = submodel_chol(xp, model)
        idx = np.asarray(model.indices)
        Gk = xp.G[np.ix_(idx, idx)]
        v = rng.normal(size=model.size)
        np.testing.assert_allclose(Gk @ handle.solve(v), v, rtol=1e-8, atol=1e-8)


def test_submodel_chol_singular_selection():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(20, 2))
    X[:, 1] = X[:, 0]
    y = (rng.normal(size=20) > 0).astype(float)
    ds = prepare_dataset(X, y, "probit")
    xp = cross_products(ds)
    with pytest.raises(SingularModelError):
        submodel_chol(xp, ModelIndex.full(2))


def test_load_csv_roundtrip(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,a,b\n1,0.5,2.25\n0,-1.5,0.125\n", encoding="utf-8")
    X, y, names = load_csv(str(path), "y")
    np.testing.assert_allclose(y, [1.0, 0.0])
    np.testing.assert_allclose(X, [[0.5, 2.25], [-1.5, 0.125]])
    assert names == ["a", "b"]


def test_outcome_validity_rejections():
    rng = np.random.default_rng(60)
    X = rng.normal(size=(6, 2))
    with pytest.raises(DataError, match="0/1"):
        prepare_dataset(X, np.array([0.0, 1, 2, 0, 1, 0]), "probit")
    with pytest.raises(DataError, match="non-negative integers"):
        prepare_dataset(X, np.array([0.0, 1, 2.5, 0, 1, 3]), "star")
    with pytest.raises(DataError, match="non-negative integers"):
        prepare_dataset(X, np.array([0.0, 1, -2, 0, 1, 3]), "pln")
    with pytest.raises(DataError, match="y >= y_L"):
        prepare_dataset(X, np.array([0.0, 1, -2, 0, 1, 3]), "tobit", y_L=0.0)


def test_load_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,a\n1,x\n", encoding="utf-8")
    with pytest.raises(DataError, match="non-numeric"):
        load_csv(str(bad), "y")
    from vbma import ParameterError

    ok = tmp_path / "ok.csv"
    ok.write_text("y,a\n1,2\n", encoding="utf-8")
    with pytest.raises(ParameterError, match="outcome column"):
        load_csv(str(ok), "missing")
