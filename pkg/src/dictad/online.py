"""Online dictionary and classifier updates (RLS + Tikhonov-anchored step).

The recursive least-squares dictionary update keeps the Gram matrix
G = sum phi^(t-i) x_i x_i^T and its inverse, both rank-one updated per
sample. A full online step codes the sample, classifies it with the
pre-update classifier, Tikhonov-updates W and A toward the estimated
indicators, then applies the rank-one dictionary update. Every sample
updates the model; there is no confidence gating. Atoms are not
renormalized after the update (doing so would invalidate G), so online
coding runs against raw atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError
from .sparse_coding import CodingConfig, Dictionary, SparseCode, SparseCodeMatrix, omp
from .supervised import DiscriminativeModel, classify

STATE_FORMAT_VERSION = 1

# Inverse drift grows like phi^-t under forgetting (about 170x per 100
# updates at phi = 0.95), so the periodic consistency check has to run well
# before the error becomes visible. Checking every 100 updates and
# re-inverting above 1e-9*n keeps ||Ginv G - I||_F under 1e-6*n at any point.
_DRIFT_CHECK_EVERY = 100
_DRIFT_REINVERT_AT = 1e-9


@dataclass(frozen=True)
class LambdaPolicy:
    """Regularization-weight policy: spectral norm of G, spectral norms of
    the current W and A, or fixed constants."""

    kind: str  # "gram-norm" | "model-norms" | "fixed"
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gram-norm", "model-norms", "fixed"):
            raise DataError(f"unknown lambda policy {self.kind!r}")


GRAM_NORM = LambdaPolicy("gram-norm")
MODEL_NORMS = LambdaPolicy("model-norms")


def fixed_lambdas(lambda1: float, lambda2: float) -> LambdaPolicy:
    return LambdaPolicy("fixed", lambda1, lambda2)


@dataclass
class OnlineState:
    model: DiscriminativeModel
    G: np.ndarray
    Ginv: np.ndarray
    phi: float
    lambda_policy: LambdaPolicy
    samples_seen: int
    coding: CodingConfig


@dataclass
class ToddlerOutcome:
    predicted_class: int
    scores: np.ndarray
    code: SparseCode
    lambda1: float
    lambda2: float
    reconstruction_error: float


def spectral_norm(M: np.ndarray, tol: float = 1e-8, max_iter: int = 10000) -> float:
    """Largest singular value by power iteration on M^T M (deterministic
    seeded start vector)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    B = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    v = np.random.default_rng(0).standard_normal(B.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return float(np.sqrt(max(lam_new, 0.0)))
        lam = lam_new
    raise NumericalError(f"power iteration did not converge in {max_iter} steps")


def init_state(
    model: DiscriminativeModel,
    warmup_Y: np.ndarray,
    warmup_X: SparseCodeMatrix,
    phi: float = 0.95,
    lambda_policy: LambdaPolicy = GRAM_NORM,
    coding: CodingConfig | None = None,
) -> OnlineState:
    """Build the online state from pretraining codes: G = X X^T plus a small
    ridge for conditioning, Ginv its exact inverse."""
    if warmup_X.n_columns == 0:
        raise DataError("empty warmup: G is undefined")
    if warmup_X.dim != model.D.n:
        raise DataError("warmup codes inconsistent with the model dictionary")
    if not (0.0 < phi <= 1.0):
        raise DataError("forgetting factor must lie in (0, 1]")
    Xd = warmup_X.to_dense()
    n = model.D.n
    G = Xd @ Xd.T
    G += (1e-8 * np.trace(G) / n) * np.eye(n)
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError:
        raise NumericalError("warmup Gram matrix is singular despite ridge") from None
    drift = np.linalg.norm(Ginv @ G - np.eye(n), "fro")
    if drift > 1e-6 * n:
        raise NumericalError(
            f"warmup Gram matrix is ill-conditioned (cond ~ {np.linalg.cond(G):.3g})"
        )
    if coding is None:
        coding = CodingConfig(s=max(1, min(5, n)))
    return OnlineState(model, G, Ginv, phi, lambda_policy, warmup_X.n_columns, coding)


def rls_update(state: OnlineState, y: np.ndarray, x: SparseCode) -> OnlineState:
    """Rank-one recursive least-squares dictionary update with forgetting:
    D absorbs the new sample, G <- phi G + x x^T and Ginv follows by
    Sherman-Morrison. Inverse drift is re-checked periodically with exact
    re-inversion as the fallback."""
    xd = x.to_dense()
    u = (state.Ginv @ xd) / state.phi
    denom = 1.0 + float(xd @ u)
    if denom <= 0.0:
        raise NumericalError("nonpositive RLS gain denominator: corrupted online state")
    alpha = 1.0 / denom
    r = np.asarray(y, dtype=float) - state.model.D.atoms @ xd
    state.model.D.atoms += alpha * np.outer(r, u)
    state.G = state.phi * state.G + np.outer(xd, xd)
    state.Ginv = state.Ginv / state.phi - alpha * np.outer(u, u)
    state.samples_seen += 1
    if state.samples_seen % _DRIFT_CHECK_EVERY == 0:
        n = state.G.shape[0]
        drift = np.linalg.norm(state.Ginv @ state.G - np.eye(n), "fro")
        if drift > _DRIFT_REINVERT_AT * n:
            state.Ginv = np.linalg.inv(state.G)
    return state


def lambda_select(state: OnlineState):
    """Regularization weights per the configured policy."""
    p = state.lambda_policy
    if p.kind == "gram-norm":
        lam = spectral_norm(state.G)
        return lam, lam
    if p.kind == "model-norms":
        return spectral_norm(state.model.W), spectral_norm(state.model.A)
    return p.lambda1, p.lambda2


def tikhonov_update(M0: np.ndarray, target: np.ndarray, x: SparseCode, lam: float) -> np.ndarray:
    """Closed-form minimizer of ||target - M x||^2 + lam ||M - M0||_F^2:
    a rank-one correction of the anchor M0."""
    if lam <= 0:
        raise NumericalError("Tikhonov weight must be positive")
    xd = x.to_dense()
    resid = np.asarray(target, dtype=float) - M0 @ xd
    return M0 + np.outer(resid, xd) / (lam + float(xd @ xd))


def toddler_step(state: OnlineState, y: np.ndarray):
    """One full online step: code, classify with the pre-update model,
    Tikhonov-update W then A toward the estimated indicators, rank-one
    update D. Returns (state, outcome)."""
    x = omp(state.model.D, y, state.coding)
    pred, scores = classify(state.model.W, x)
    c = state.model.n_classes
    h_hat = np.zeros(c)
    h_hat[pred] = 1.0
    q_hat = (state.model.class_of_atom == pred).astype(float)
    lam1, lam2 = lambda_select(state)
    state.model.W = tikhonov_update(state.model.W, h_hat, x, lam1)
    state.model.A = tikhonov_update(state.model.A, q_hat, x, lam2)
    err = float(np.linalg.norm(np.asarray(y, dtype=float) - state.model.D.atoms @ x.to_dense()))
    rls_update(state, y, x)
    return state, ToddlerOutcome(pred, scores, x, lam1, lam2, err)


def save_state(path, state: OnlineState):
    """Checkpoint the full online state (bit-exact round trip, versioned)."""
    np.savez(
        path,
        format_version=np.int64(STATE_FORMAT_VERSION),
        D=state.model.D.atoms,
        W=state.model.W,
        A=state.model.A,
        class_of_atom=state.model.class_of_atom,
        G=state.G,
        Ginv=state.Ginv,
        phi=np.float64(state.phi),
        policy_kind=np.array(state.lambda_policy.kind),
        policy_lambda1=np.float64(state.lambda_policy.lambda1),
        policy_lambda2=np.float64(state.lambda_policy.lambda2),
        samples_seen=np.int64(state.samples_seen),
        coding_s=np.int64(state.coding.s),
        coding_residual_tol=np.float64(state.coding.residual_tol),
    )


def load_state(path) -> OnlineState:
    with np.load(path) as z:
        if int(z["format_version"]) != STATE_FORMAT_VERSION:
            raise DataError(f"unsupported state format version {int(z['format_version'])}")
        model = DiscriminativeModel(
            Dictionary(z["D"]), z["W"], z["A"], z["class_of_atom"].astype(int)
        )
        policy = LambdaPolicy(
            str(z["policy_kind"]), float(z["policy_lambda1"]), float(z["policy_lambda2"])
        )
        return OnlineState(
            model,
            z["G"],
            z["Ginv"],
            float(z["phi"]),
            policy,
            int(z["samples_seen"]),
            CodingConfig(int(z["coding_s"]), float(z["coding_residual_tol"])),
        )
