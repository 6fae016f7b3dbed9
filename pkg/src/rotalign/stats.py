"""Two-sample location tests with a self-contained t-distribution kernel.

The p-value machinery is built from first principles: the regularized
incomplete beta function I_x(a, b) is evaluated with the standard continued
fraction (modified Lentz), switching to the symmetric expansion at
x = (a + 1) / (a + b + 2) for stability.  The one-sided survival function of
Student's t then follows from

    P(T > t) = 0.5 * I_x(df/2, 1/2),   x = df / (df + t^2),   t >= 0

and symmetry for t < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateInputError, GroupingError
from .store import ModelManifest

_CF_TOL = 1e-15
_CF_MAX_ITER = 300
_TINY = 1e-300


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value_two_tailed: float
    group_sizes: tuple[int, int]
    group_means: tuple[float, float]
    variant: str = "student"

    def to_dict(self, metric: str | None = None) -> dict:
        out = {
            "metric": metric,
            "variant": self.variant,
            "t": self.t_statistic,
            "df": self.degrees_of_freedom,
            "p": self.p_value_two_tailed,
            "groups": {
                "sizes": list(self.group_sizes),
                "means": list(self.group_means),
            },
        }
        if metric is None:
            out.pop("metric")
        return out


def _beta_cont_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        # odd step
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
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("incomplete beta requires a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_fraction(a, b, x) / a
    return 1.0 - front * _beta_cont_fraction(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """One-sided survival function P(T > t) of Student's t with ``df`` dof.

    Satisfies t_sf(t, df) + t_sf(-t, df) == 1 exactly by construction.
    """
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isnan(t):
        raise ValueError("t must not be NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    half_tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x)
    return half_tail if t >= 0 else 1.0 - half_tail


def _mean(xs) -> float:
    return math.fsum(xs) / len(xs)


def _sample_var(xs, mean: float) -> float:
    return math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1)


def two_sample_ttest(a, b, variant: str = "student") -> TTestResult:
    """Independent two-sample t-test with a two-tailed p-value.

    ``student`` pools the variances (df = n1 + n2 - 2); ``welch`` uses
    unpooled variances with Welch-Satterthwaite degrees of freedom.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError(
            f"each group needs at least 2 values, got {len(a)} and {len(b)}"
        )
    if variant not in ("student", "welch"):
        raise ValueError(f"variant must be 'student' or 'welch', got {variant!r}")
    n1, n2 = len(a), len(b)
    m1, m2 = _mean(a), _mean(b)
    v1, v2 = _sample_var(a, m1), _sample_var(b, m2)

    if v1 == 0.0 and v2 == 0.0:
        if m1 == m2:
            raise DegenerateInputError(
                "both groups are constant with equal means; t is undefined"
            )
        # Perfect separation with zero spread: infinitely significant.
        t = math.inf if m1 > m2 else -math.inf
        df = float(n1 + n2 - 2)
        return TTestResult(t, df, 0.0, (n1, n2), (m1, m2), variant)

    if variant == "student":
        pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
        se = math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
        df = float(n1 + n2 - 2)
    else:
        se2 = v1 / n1 + v2 / n2
        se = math.sqrt(se2)
        df = se2 * se2 / (
            (v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1)
        )
    t = (m1 - m2) / se
    p = 2.0 * t_sf(abs(t), df)
    p = min(p, 1.0)
    return TTestResult(t, df, p, (n1, n2), (m1, m2), variant)


def split_groups(
    manifest: ModelManifest,
    aggregates,
    metric: str,
) -> tuple[list[float], list[float]]:
    """Partition per-model mean scores by the rotation-augmentation flag.

    ``aggregates`` is a mapping or sequence of per-model aggregate records
    (anything with ``model`` / ``mean_mknn`` / ``mean_cosine`` attributes, or
    a dict model -> (mean_mknn, mean_cosine)).  Returns
    (augmented_values, plain_values) in manifest order.
    """
    if metric not in ("mknn", "cosine"):
        raise ValueError(f"metric must be 'mknn' or 'cosine', got {metric!r}")

    values: dict[str, float] = {}
    if isinstance(aggregates, dict):
        for model, pair in aggregates.items():
            values[model] = float(pair[0] if metric == "mknn" else pair[1])
    else:
        for agg in aggregates:
            values[agg.model] = float(
                agg.mean_mknn if metric == "mknn" else agg.mean_cosine
            )

    flags = {e.model_name: e.rotation_augmented for e in manifest.entries}
    for model in values:
        if model not in flags:
            raise ValueError(f"aggregated model {model!r} not present in manifest")

    order = [e.model_name for e in manifest.entries if e.model_name in values]
    augmented = [values[m] for m in order if flags[m]]
    plain = [values[m] for m in order if not flags[m]]
    if not augmented or not plain:
        side = "rotation-augmented" if not augmented else "non-augmented"
        raise GroupingError(f"cannot compare groups: no {side} models present")
    return augmented, plain
