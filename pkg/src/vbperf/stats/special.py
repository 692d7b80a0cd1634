"""Regularized incomplete beta and the t / F distribution functions built on it."""

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 5000


def _beta_continued_fraction(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a, b, x):
    """Regularized incomplete beta function I_x(a, b).

    Parameters
    ----------
    a, b : float
        Positive shape parameters.
    x : float
        Evaluation point in [0, 1].

    Returns
    -------
    float
    """
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_split(a, b, num, den):
    """I_x(a, b) with x = num / (num + den), never forming 1 - x by subtraction."""
    total = num + den
    if num <= den:
        return regularized_incomplete_beta(a, b, num / total)
    return 1.0 - regularized_incomplete_beta(b, a, den / total)


def student_t_cdf(t, df):
    """CDF of Student's t distribution with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * _beta_split(df / 2.0, 0.5, df, t * t)
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided_p(t, df):
    """Two-sided tail probability P(|T| >= |t|)."""
    if math.isinf(t):
        return 0.0
    return _beta_split(df / 2.0, 0.5, df, t * t)


def f_cdf(f, dfn, dfd):
    """CDF of the F distribution with (dfn, dfd) degrees of freedom."""
    if dfn <= 0 or dfd <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 0.0
    if math.isinf(f):
        return 1.0
    return _beta_split(dfn / 2.0, dfd / 2.0, dfn * f, dfd)


def f_sf(f, dfn, dfd):
    """Upper tail P(F > f), evaluated without cancellation."""
    if dfn <= 0 or dfd <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return _beta_split(dfd / 2.0, dfn / 2.0, dfd, dfn * f)
