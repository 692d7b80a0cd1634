"""Linear SVM trained by full-batch hinge-loss subgradient descent.

Step sizes follow the Pegasos schedule 1/(lambda t); the returned weights
average the iterates of the second half of training.  Scores come from a
logistic link fitted to the training margins (Platt scaling).
"""

import numpy as np

DEFAULTS = {"lam": 1e-3, "epochs": 500}


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_platt(margins, y, n_iter=100):
    """Logistic link P(y=1 | m) = sigmoid(a m + b) by Newton's method.

    Targets are smoothed as in Platt (1999) to keep the fit finite on
    separable data.
    """
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, float(np.log((n_pos + 1.0) / (n_neg + 1.0)))

    def loss(a, b):
        z = a * margins + b
        return float(np.sum(np.logaddexp(0.0, z) - t * z))

    current = loss(a, b)
    for _ in range(n_iter):
        p = _sigmoid(a * margins + b)
        d = p - t
        w = p * (1.0 - p)
        grad = np.array([d @ margins, d.sum()])
        hess = np.array([[w @ (margins * margins), w @ margins], [w @ margins, w.sum()]])
        hess += 1e-12 * np.eye(2)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        while scale > 1e-10:
            na, nb = a - scale * step[0], b - scale * step[1]
            new = loss(na, nb)
            if new <= current:
                break
            scale *= 0.5
        else:
            break
        improvement = current - new
        a, b, current = na, nb, new
        if improvement < 1e-12 * max(1.0, abs(current)):
            break
    return float(a), float(b)


def fit(X, y, hp, rng=None):
    n, p = X.shape
    s = np.where(y == 1, 1.0, -1.0)
    lam = float(hp["lam"])
    epochs = int(hp["epochs"])
    w = np.zeros(p)
    b = 0.0
    w_sum = np.zeros(p)
    b_sum = 0.0
    n_avg = 0
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        viol = s * (X @ w + b) < 1.0
        grad_w = (s[viol, None] * X[viol]).sum(axis=0) / n
        grad_b = s[viol].sum() / n
        w = (1.0 - eta * lam) * w + eta * grad_w
        b = b + eta * grad_b
        norm = np.linalg.norm(w)
        if norm > 1.0 / np.sqrt(lam):
            w *= 1.0 / (np.sqrt(lam) * norm)
        if t > epochs // 2:
            w_sum += w
            b_sum += b
            n_avg += 1
    w = w_sum / n_avg
    b = b_sum / n_avg
    margins = X @ w + b
    a, c = fit_platt(margins, y)
    return {"w": w, "b": float(b), "platt_a": a, "platt_b": c}


def decision_function(params, X):
    return X @ params["w"] + params["b"]


def predict_proba(params, X):
    return _sigmoid(params["platt_a"] * decision_function(params, X) + params["platt_b"])


def to_json(params):
    return {"w": np.asarray(params["w"]).tolist(), "b": params["b"],
            "platt_a": params["platt_a"], "platt_b": params["platt_b"]}


def from_json(d):
    return {"w": np.asarray(d["w"], dtype=float), "b": d["b"], "platt_a": d["platt_a"],
            "platt_b": d["platt_b"]}
