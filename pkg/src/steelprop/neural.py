"""One-hidden-layer MLP regression with selectable full-batch trainers.

Architecture is fixed: tanh hidden layer (1-10 units), linear output.
Trainers: plain gradient descent, gradient descent with momentum, resilient
backprop (iRPROP- update rule), Levenberg-Marquardt damped Gauss-Newton, and
an L2-regularized LM variant. Every trainer runs full-batch epochs with
early stopping on validation MSE and returns the parameters that achieved
the best recorded validation score.

Parameters pack into one flat vector in the order
[W1.ravel(), b1, w2, b2]; the loss is 0.5 * sum(residual**2) with
residual = prediction - target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ValidationError

RPROP_ETA_PLUS = 1.2
RPROP_ETA_MINUS = 0.5
RPROP_DELTA0 = 0.1
RPROP_DELTA_MAX = 50.0
RPROP_DELTA_MIN = 1e-6

LM_MU0 = 1e-3
LM_MU_MAX = 1e10


@dataclass(frozen=True)
class NetworkSpec:
    n_hidden: int
    n_inputs: int
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_hidden <= 10:
            raise ValidationError(f"n_hidden must be in [1, 10], got {self.n_hidden}")
        if self.n_inputs < 1:
            raise ValidationError("n_inputs must be >= 1")

    @property
    def n_params(self) -> int:
        h, f = self.n_hidden, self.n_inputs
        return h * f + h + h + 1


@dataclass
class Network:
    spec: NetworkSpec
    w_hidden: np.ndarray    # (h, n_inputs)
    b_hidden: np.ndarray    # (h,)
    w_out: np.ndarray       # (h,)
    b_out: float

    def copy(self) -> "Network":
        return Network(self.spec, self.w_hidden.copy(), self.b_hidden.copy(),
                       self.w_out.copy(), float(self.b_out))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.w_hidden.ravel(), self.b_hidden,
                               self.w_out, [self.b_out]])

    def unpack(self, theta: np.ndarray) -> None:
        h, f = self.spec.n_hidden, self.spec.n_inputs
        self.w_hidden = theta[:h * f].reshape(h, f).copy()
        self.b_hidden = theta[h * f:h * f + h].copy()
        self.w_out = theta[h * f + h:h * f + 2 * h].copy()
        self.b_out = float(theta[-1])

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.spec.n_inputs:
            raise ValidationError(
                f"expected {self.spec.n_inputs} inputs, got {X.shape[1]}")
        hidden = np.tanh(X @ self.w_hidden.T + self.b_hidden)
        return hidden @ self.w_out + self.b_out


def init_network(spec: NetworkSpec) -> Network:
    """Uniform [-0.5, 0.5] parameters from the seeded generator (PCG64)."""
    rng = np.random.default_rng(spec.seed)
    h, f = spec.n_hidden, spec.n_inputs
    return Network(
        spec=spec,
        w_hidden=rng.uniform(-0.5, 0.5, size=(h, f)),
        b_hidden=rng.uniform(-0.5, 0.5, size=h),
        w_out=rng.uniform(-0.5, 0.5, size=h),
        b_out=float(rng.uniform(-0.5, 0.5)),
    )


def _forward_hidden(net: Network, X: np.ndarray):
    hidden = np.tanh(X @ net.w_hidden.T + net.b_hidden)
    pred = hidden @ net.w_out + net.b_out
    return hidden, pred


def gradient(net: Network, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backprop gradient of 0.5 * sum((pred - y)**2), packed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValidationError("empty batch")
    hidden, pred = _forward_hidden(net, X)
    r = pred - y
    g_b_out = float(np.sum(r))
    g_w_out = hidden.T @ r
    d_hidden = (r[:, None] * net.w_out[None, :]) * (1.0 - hidden ** 2)
    g_b_hidden = d_hidden.sum(axis=0)
    g_w_hidden = d_hidden.T @ X
    return np.concatenate([g_w_hidden.ravel(), g_b_hidden, g_w_out, [g_b_out]])


def jacobian(net: Network, X: np.ndarray) -> np.ndarray:
    """Residual Jacobian: row per sample, column per packed parameter."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValidationError("empty batch")
    hidden, _ = _forward_hidden(net, X)
    sech2 = 1.0 - hidden ** 2                       # (n, h)
    d_hidden = net.w_out[None, :] * sech2           # d pred / d z_hidden
    J_w_hidden = d_hidden[:, :, None] * X[:, None, :]   # (n, h, f)
    n = X.shape[0]
    return np.hstack([
        J_w_hidden.reshape(n, -1),
        d_hidden,
        hidden,
        np.ones((n, 1)),
    ])


@dataclass(frozen=True)
class TrainerSpec:
    algorithm: str = "lm"            # gd | gd_momentum | rprop | lm | lm_l2
    learning_rate: float = 0.01
    momentum: float = 0.9
    lm_mu0: float = LM_MU0
    l2_lambda: float = 0.01          # lm_l2 only
    max_epochs: int = 200
    patience: int = 6

    def __post_init__(self):
        if self.algorithm not in ("gd", "gd_momentum", "rprop", "lm", "lm_l2"):
            raise ValidationError(f"unknown trainer: {self.algorithm}")
        for name in ("learning_rate", "momentum", "lm_mu0", "l2_lambda"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValidationError("max_epochs and patience must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float
    step_accepted: bool


@dataclass
class TrainedNetwork:
    network: Network
    history: list[EpochRecord]
    best_val_mse: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.network.forward(X)

    def history_csv(self) -> str:
        from .dataset import fmt
        lines = ["epoch,train_mse,val_mse,step_accepted"]
        for rec in self.history:
            lines.append(f"{rec.epoch},{fmt(rec.train_mse)},{fmt(rec.val_mse)},"
                         f"{int(rec.step_accepted)}")
        return "\n".join(lines) + "\n"


@dataclass
class MlpPredictor:
    """Fitted network bound to its fold scaler: raw features in, raw units out."""
    trained: TrainedNetwork
    scaler: "Scaler | None" = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.scaler is None:
            return self.trained.predict(X)
        out = self.trained.predict(self.scaler.transform(X))
        return self.scaler.inverse_targets(out)


SERIAL_VERSION = "steelprop-mlp/1"


def serialize(pred: MlpPredictor) -> str:
    from .dataset import fmt
    net = pred.trained.network
    lines = [SERIAL_VERSION,
             f"shape {net.spec.n_hidden} {net.spec.n_inputs} {net.spec.seed}"]
    if pred.scaler is None:
        lines.append("scaler none")
    else:
        s = pred.scaler
        lines.append("scaler "
                     + " ".join(fmt(v) for v in s.feature_min) + " | "
                     + " ".join(fmt(v) for v in s.feature_max) + " | "
                     + f"{fmt(s.target_mean)} {fmt(s.target_std)}")
    for row in net.w_hidden:
        lines.append("wh " + " ".join(fmt(v) for v in row))
    lines.append("bh " + " ".join(fmt(v) for v in net.b_hidden))
    lines.append("wo " + " ".join(fmt(v) for v in net.w_out))
    lines.append(f"bo {fmt(net.b_out)}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> MlpPredictor:
    from .dataset import Scaler
    from .errors import DataError
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIAL_VERSION:
        raise DataError(f"unsupported model format, expected {SERIAL_VERSION!r}")
    _, h, f, seed = lines[1].split()
    spec = NetworkSpec(n_hidden=int(h), n_inputs=int(f), seed=int(seed))
    scaler = None
    body = lines[2]
    if body != "scaler none":
        payload = body[len("scaler "):]
        lo, hi, tail = payload.split(" | ")
        mean, std = tail.split()
        scaler = Scaler(feature_min=np.array([float(v) for v in lo.split()]),
                        feature_max=np.array([float(v) for v in hi.split()]),
                        target_mean=float(mean), target_std=float(std))
    w_hidden = []
    b_hidden = w_out = None
    b_out = 0.0
    for ln in lines[3:]:
        head, _, rest = ln.partition(" ")
        if head == "wh":
            w_hidden.append([float(v) for v in rest.split()])
        elif head == "bh":
            b_hidden = np.array([float(v) for v in rest.split()])
        elif head == "wo":
            w_out = np.array([float(v) for v in rest.split()])
        elif head == "bo":
            b_out = float(rest)
    net = Network(spec=spec, w_hidden=np.array(w_hidden), b_hidden=b_hidden,
                  w_out=w_out, b_out=b_out)
    trained = TrainedNetwork(network=net, history=[], best_val_mse=float("nan"))
    return MlpPredictor(trained=trained, scaler=scaler)


def _mse(net: Network, X, y) -> float:
    r = net.forward(X) - y
    return float(np.mean(r * r))


def train(net: Network, X: np.ndarray, y: np.ndarray,
          X_val: np.ndarray, y_val: np.ndarray,
          trainer: TrainerSpec, _probe=None) -> TrainedNetwork:
    """Full-batch training with early stopping on validation MSE.

    Expects scaled inputs and targets. Raises DivergenceError (history
    attached) if the loss leaves the float range. `_probe`, when given, is
    called once per epoch with the trainer's internal state (test hook).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if X.shape[0] == 0 or X_val.shape[0] == 0:
        raise ValidationError("train and validation sets must be non-empty")

    net = net.copy()
    history: list[EpochRecord] = []
    # initial parameters are the baseline best (epoch 0)
    start = (net.pack(), _mse(net, X_val, y_val))

    if trainer.algorithm in ("lm", "lm_l2"):
        best_theta, best_val = _train_lm(net, X, y, X_val, y_val, trainer,
                                         history, start, _probe)
    else:
        best_theta, best_val = _train_gradient(net, X, y, X_val, y_val, trainer,
                                               history, start, _probe)
    net.unpack(best_theta)
    return TrainedNetwork(network=net, history=history, best_val_mse=best_val)


def _train_gradient(net, X, y, X_val, y_val, trainer, history, start, probe=None):
    theta = net.pack()
    velocity = np.zeros_like(theta)
    step_sizes = np.full_like(theta, RPROP_DELTA0)
    prev_grad = np.zeros_like(theta)
    best_theta, best_val = start[0].copy(), start[1]
    stall = 0

    for epoch in range(1, trainer.max_epochs + 1):
        net.unpack(theta)
        g = gradient(net, X, y)
        if trainer.algorithm == "gd":
            theta = theta - trainer.learning_rate * g
        elif trainer.algorithm == "gd_momentum":
            velocity = trainer.momentum * velocity - trainer.learning_rate * g
            theta = theta + velocity
        else:   # rprop (iRPROP-): no step where the gradient sign flips
            sign_prod = prev_grad * g
            grew = sign_prod > 0.0
            shrank = sign_prod < 0.0
            step_sizes = np.where(grew, np.minimum(step_sizes * RPROP_ETA_PLUS,
                                                   RPROP_DELTA_MAX), step_sizes)
            step_sizes = np.where(shrank, np.maximum(step_sizes * RPROP_ETA_MINUS,
                                                     RPROP_DELTA_MIN), step_sizes)
            g_effective = np.where(shrank, 0.0, g)
            theta = theta - np.sign(g_effective) * step_sizes
            prev_grad = g_effective

        if probe is not None:
            probe({"epoch": epoch, "step_sizes": step_sizes.copy()})
        net.unpack(theta)
        train_mse = _mse(net, X, y)
        val_mse = _mse(net, X_val, y_val)
        history.append(EpochRecord(epoch, train_mse, val_mse, True))
        if not np.isfinite(train_mse):
            raise DivergenceError(
                f"epoch {epoch}: non-finite training loss", history)
        if val_mse < best_val:
            best_val = val_mse
            best_theta = theta.copy()
            stall = 0
        else:
            stall += 1
            if stall >= trainer.patience:
                break
    return best_theta, best_val


def _train_lm(net, X, y, X_val, y_val, trainer, history, start, probe=None):
    lam = trainer.l2_lambda if trainer.algorithm == "lm_l2" else 0.0
    theta = net.pack()
    mu = trainer.lm_mu0
    best_theta, best_val = start[0].copy(), start[1]
    stall = 0

    def objective(t):
        net.unpack(t)
        r = net.forward(X) - y
        return 0.5 * float(r @ r) + 0.5 * lam * float(t @ t)

    current = objective(theta)
    n_params = theta.size
    for epoch in range(1, trainer.max_epochs + 1):
        net.unpack(theta)
        J = jacobian(net, X)
        r = net.forward(X) - y
        g = J.T @ r + lam * theta
        A = J.T @ J + (mu + lam) * np.eye(n_params)
        try:
            delta = np.linalg.solve(A, -g)
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        candidate = theta + delta
        cand_obj = objective(candidate)
        accepted = np.isfinite(cand_obj) and cand_obj < current
        if accepted:
            theta = candidate
            current = cand_obj
            mu = max(mu / 10.0, 1e-20)
        else:
            mu *= 10.0

        if probe is not None:
            probe({"epoch": epoch, "mu": mu, "accepted": accepted})
        net.unpack(theta)
        train_mse = _mse(net, X, y)
        val_mse = _mse(net, X_val, y_val)
        history.append(EpochRecord(epoch, train_mse, val_mse, accepted))
        if not np.isfinite(train_mse):
            raise DivergenceError(
                f"epoch {epoch}: non-finite training loss", history)
        if val_mse < best_val:
            best_val = val_mse
            best_theta = theta.copy()
            stall = 0
        else:
            stall += 1
            if stall >= trainer.patience:
                break
        if mu > LM_MU_MAX:   # damping saturated: no useful step remains
            break
    return best_theta, best_val
