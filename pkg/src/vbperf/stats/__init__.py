"""Correlation tables, trend regressions and the distribution functions behind them."""

from .correlation import daily_hits_vs, ema_vs_season, perceived_vs_box_metrics, spearman
from .special import f_cdf, f_sf, regularized_incomplete_beta, student_t_cdf, student_t_two_sided_p
from .trend import ols_trend

__all__ = [
    "daily_hits_vs", "ema_vs_season", "perceived_vs_box_metrics", "spearman",
    "f_cdf", "f_sf", "regularized_incomplete_beta", "student_t_cdf", "student_t_two_sided_p",
    "ols_trend",
]
