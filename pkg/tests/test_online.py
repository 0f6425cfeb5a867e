import numpy as np
import pytest

from dictad import (
    CodingConfig,
    DataError,
    Dictionary,
    DiscriminativeModel,
    NumericalError,
    SparseCode,
    SparseCodeMatrix,
    fixed_lambdas,
    init_state,
    lambda_select,
    load_state,
    rls_update,
    save_state,
    spectral_norm,
    tikhonov_update,
    toddler_step,
    GRAM_NORM,
    MODEL_NORMS,
)

from helpers import planted_instance


def _model(D, c=2):
    n = D.shape[1]
    rng = np.random.default_rng(0)
    class_of_atom = np.repeat(np.arange(c), n // c)[:n]
    return DiscriminativeModel(
        Dictionary(D.copy()), rng.standard_normal((c, n)),
        rng.standard_normal((n, n)), class_of_atom,
    )


def _sparse_cols(rng, n, s, N):
    X = np.zeros((n, N))
    for i in range(N):
        sup = rng.choice(n, s, replace=False)
        X[sup, i] = rng.standard_normal(s)
    return X


def test_init_state_identity_warmup():
    D, _, _ = planted_instance(6, 4, 4, 2, seed=0)
    model = _model(D)
    X = SparseCodeMatrix.from_dense(np.eye(4))
    st = init_state(model, D @ np.eye(4), X, phi=1.0, coding=CodingConfig(2))
    assert np.allclose(np.diag(st.G), 1.0, atol=1e-6)
    assert np.allclose(st.Ginv, np.linalg.inv(st.G), atol=1e-10)
    assert st.samples_seen == 4


def test_init_state_empty_warmup_rejected():
    D, _, _ = planted_instance(6, 4, 4, 2, seed=0)
    with pytest.raises(DataError):
        init_state(_model(D), np.zeros((6, 0)), SparseCodeMatrix([]), phi=1.0)


def test_init_state_inverse_accuracy():
    D, _, _ = planted_instance(8, 10, 40, 3, seed=1)
    rng = np.random.default_rng(1)
    X = _sparse_cols(rng, 10, 3, 40)
    st = init_state(_model(D), D @ X, SparseCodeMatrix.from_dense(X),
                    phi=0.95, coding=CodingConfig(3))
    assert np.linalg.norm(st.Ginv @ st.G - np.eye(10), "fro") <= 1e-10 * 10


def test_rls_zero_residual_leaves_dictionary_fixed():
    D, _, _ = planted_instance(8, 10, 40, 3, seed=2)
    rng = np.random.default_rng(2)
    X = _sparse_cols(rng, 10, 3, 30)
    st = init_state(_model(D), D @ X, SparseCodeMatrix.from_dense(X),
                    phi=1.0, coding=CodingConfig(3))
    D_before, G_before = st.model.D.atoms.copy(), st.G.copy()
    x = SparseCode([1, 4], [0.5, -1.0], 10)
    rls_update(st, st.model.D.atoms @ x.to_dense(), x)
    assert np.max(np.abs(st.model.D.atoms - D_before)) < 1e-12
    assert not np.array_equal(st.G, G_before)
    assert st.samples_seen == 31


def test_rls_streaming_equals_batch_least_squares():
    rng = np.random.default_rng(3)
    m, n, s = 10, 12, 3
    Dt, _, _ = planted_instance(m, n, 1, 1, seed=3)
    Xw = _sparse_cols(rng, n, s, 40)
    Yw = Dt @ Xw + 0.05 * rng.standard_normal((m, 40))
    G0 = Xw @ Xw.T + (1e-8 * np.trace(Xw @ Xw.T) / n) * np.eye(n)
    D0 = (Yw @ Xw.T) @ np.linalg.inv(G0)
    model = _model(D0)
    st = init_state(model, Yw, SparseCodeMatrix.from_dense(Xw),
                    phi=1.0, coding=CodingConfig(s))
    Xs = _sparse_cols(rng, n, s, 100)
    Ys = Dt @ Xs + 0.05 * rng.standard_normal((m, 100))
    cols = SparseCodeMatrix.from_dense(Xs).columns
    for i in range(100):
        rls_update(st, Ys[:, i], cols[i])
    Xall, Yall = np.hstack([Xw, Xs]), np.hstack([Yw, Ys])
    Dbatch = (Yall @ Xall.T) @ np.linalg.inv(Xall @ Xall.T)
    rel = np.linalg.norm(st.model.D.atoms - Dbatch, "fro") / np.linalg.norm(Dbatch, "fro")
    assert rel < 1e-8


def test_rls_corrupted_state_detected():
    D, _, _ = planted_instance(6, 4, 4, 2, seed=4)
    X = SparseCodeMatrix.from_dense(np.eye(4))
    st = init_state(_model(D), D @ np.eye(4), X, phi=1.0, coding=CodingConfig(2))
    st.Ginv = -10.0 * np.eye(4)
    with pytest.raises(NumericalError):
        rls_update(st, np.zeros(6), SparseCode([0], [1.0], 4))


def test_rls_inverse_drift_bounded_with_forgetting():
    rng = np.random.default_rng(5)
    m, n, s = 10, 12, 3
    Dt, _, _ = planted_instance(m, n, 1, 1, seed=5)
    Xw = _sparse_cols(rng, n, s, 50)
    st = init_state(_model(Dt), Dt @ Xw, SparseCodeMatrix.from_dense(Xw),
                    phi=0.95, coding=CodingConfig(s))
    for _ in range(1200):
        x = _sparse_cols(rng, n, s, 1)
        y = Dt @ x[:, 0] + 0.05 * rng.standard_normal(m)
        rls_update(st, y, SparseCodeMatrix.from_dense(x).columns[0])
    drift = np.linalg.norm(st.Ginv @ st.G - np.eye(n), "fro")
    assert drift <= 1e-6 * n


def test_spectral_norm_identity_and_diagonal():
    assert abs(spectral_norm(np.eye(3)) - 1.0) < 1e-8
    assert abs(spectral_norm(np.diag([5.0, 1.0])) - 5.0) < 1e-8


def test_spectral_norm_matches_dense_eigensolver():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((8, 8))
        G = B @ B.T + 0.1 * np.eye(8)
        exact = np.max(np.abs(np.linalg.eigvalsh(G)))
        assert abs(spectral_norm(G) - exact) <= 1e-6 * exact


def test_lambda_policies():
    D, _, _ = planted_instance(8, 6, 6, 2, seed=6)
    model = _model(D)
    X = SparseCodeMatrix.from_dense(np.eye(6))
    st = init_state(model, D @ np.eye(6), X, phi=1.0,
                    lambda_policy=GRAM_NORM, coding=CodingConfig(2))
    l1, l2 = lambda_select(st)
    assert l1 == l2
    assert abs(l1 - spectral_norm(st.G)) < 1e-10

    st.lambda_policy = MODEL_NORMS
    l1, l2 = lambda_select(st)
    assert abs(l1 - spectral_norm(model.W)) < 1e-10
    assert abs(l2 - spectral_norm(model.A)) < 1e-10

    st.lambda_policy = fixed_lambdas(2.5, 0.5)
    assert lambda_select(st) == (2.5, 0.5)


def test_tikhonov_already_optimal_anchor():
    rng = np.random.default_rng(7)
    M0 = rng.standard_normal((3, 6))
    x = SparseCode([0, 3], [1.0, -2.0], 6)
    M = tikhonov_update(M0, M0 @ x.to_dense(), x, 1.0)
    assert np.max(np.abs(M - M0)) < 1e-14


def test_tikhonov_large_lambda_pins_anchor():
    rng = np.random.default_rng(8)
    M0 = rng.standard_normal((3, 6))
    x = SparseCode([1, 2], [1.0, 1.0], 6)
    target = rng.standard_normal(3)
    lam = 1e9 * float(x.to_dense() @ x.to_dense())
    M = tikhonov_update(M0, target, x, lam)
    scale = np.linalg.norm(target - M0 @ x.to_dense()) * np.linalg.norm(x.values)
    assert np.linalg.norm(M - M0, "fro") <= 1e-6 * scale


def test_tikhonov_stationarity_and_gradient():
    rng = np.random.default_rng(9)
    for _ in range(10):
        M0 = rng.standard_normal((4, 8))
        x = SparseCode(rng.choice(8, 3, replace=False), rng.standard_normal(3), 8)
        target = rng.standard_normal(4)
        lam = float(rng.uniform(0.5, 5.0))
        M = tikhonov_update(M0, target, x, lam)
        xd = x.to_dense()
        stat = lam * (M - M0) - np.outer(target - M @ xd, xd)
        scale = np.linalg.norm(target) + np.linalg.norm(M0) * np.linalg.norm(xd) + 1.0
        assert np.linalg.norm(stat, "fro") <= 1e-8 * scale

        # finite-difference gradient of the regularized objective at M
        def f(Mat):
            return (np.linalg.norm(target - Mat @ xd) ** 2
                    + lam * np.linalg.norm(Mat - M0, "fro") ** 2)

        h = 1e-6
        grad = np.zeros_like(M)
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                E = np.zeros_like(M)
                E[i, j] = h
                grad[i, j] = (f(M + E) - f(M - E)) / (2 * h)
        assert np.linalg.norm(grad, "fro") <= 1e-5 * (1.0 + abs(f(M)))


def test_tikhonov_nonpositive_lambda_rejected():
    with pytest.raises(NumericalError):
        tikhonov_update(np.zeros((2, 3)), np.zeros(2), SparseCode([0], [1.0], 3), 0.0)


def _toy_state(seed=10, phi=1.0, policy=GRAM_NORM):
    rng = np.random.default_rng(seed)
    m, n, s = 10, 8, 2
    Dt, _, _ = planted_instance(m, n, 1, 1, seed=seed)
    X = _sparse_cols(rng, n, s, 30)
    Y = Dt @ X
    model = _model(Dt)
    return init_state(model, Y, SparseCodeMatrix.from_dense(X), phi=phi,
                      lambda_policy=policy, coding=CodingConfig(s)), Dt


def test_toddler_zero_classifier_predicts_class_zero():
    st, Dt = _toy_state()
    st.model.W = np.zeros_like(st.model.W)
    _, outcome = toddler_step(st, Dt[:, 0])
    assert outcome.predicted_class == 0
    assert np.all(outcome.scores == 0)


def test_toddler_prediction_uses_pre_update_classifier():
    st, Dt = _toy_state(seed=11)
    y = Dt[:, 1] + 0.5 * Dt[:, 2]
    W_before = st.model.W.copy()
    x_expect = None
    from dictad import omp
    x_expect = omp(st.model.D, y, st.coding)
    expected_scores = W_before[:, x_expect.support] @ x_expect.values
    _, outcome = toddler_step(st, y)
    assert np.allclose(outcome.scores, expected_scores)
    assert not np.array_equal(st.model.W, W_before)


def test_toddler_step_deterministic():
    outs = []
    for _ in range(2):
        st, Dt = _toy_state(seed=12)
        st2, outcome = toddler_step(st, Dt[:, 0] + Dt[:, 3])
        outs.append((outcome.predicted_class, outcome.scores.copy(),
                     st2.model.D.atoms.copy(), st2.G.copy()))
    assert outs[0][0] == outs[1][0]
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])
    assert np.array_equal(outs[0][3], outs[1][3])


def test_toddler_updates_every_sample():
    st, Dt = _toy_state(seed=13)
    G0 = st.G.copy()
    W0 = st.model.W.copy()
    A0 = st.model.A.copy()
    n0 = st.samples_seen
    toddler_step(st, Dt[:, 0])
    assert st.samples_seen == n0 + 1
    assert not np.array_equal(st.G, G0)
    assert not np.array_equal(st.model.W, W0)
    assert not np.array_equal(st.model.A, A0)


def test_state_checkpoint_round_trip(tmp_path):
    st, Dt = _toy_state(seed=14, phi=0.95, policy=fixed_lambdas(1.5, 2.5))
    for k in range(5):
        toddler_step(st, Dt[:, k % Dt.shape[1]])
    path = tmp_path / "state.npz"
    save_state(path, st)
    st2 = load_state(path)
    assert np.array_equal(st2.model.D.atoms, st.model.D.atoms)
    assert np.array_equal(st2.model.W, st.model.W)
    assert np.array_equal(st2.model.A, st.model.A)
    assert np.array_equal(st2.G, st.G)
    assert np.array_equal(st2.Ginv, st.Ginv)
    assert st2.phi == st.phi
    assert st2.lambda_policy == st.lambda_policy
    assert st2.samples_seen == st.samples_seen
    assert st2.coding == st.coding
