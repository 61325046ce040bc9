"""scikit-learn style front end for the discrepancy reports."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .discrepancy import tv_bound, w_bound
from .errors import ValidationError
from .measures import ConditionalModel, SampleSet, bin_samples


class ConditionalSteinDiscrepancy(BaseEstimator):
    """Stein-side TV or Wasserstein report for samples against a conditional model.

    Parameters
    ----------
    model : ConditionalModel
        Target conditional model.
    bound : {"tv", "w"}
        Which test dictionary to sweep.
    seed : int
        Seed of the random part of the dictionary.
    y_edges : array-like or None
        Bin edges for continuous y; samples are binned to bin midpoints
        before fitting, so the midpoints must be the model's y-values.

    Attributes
    ----------
    report_ : DiscrepancyReport
    sup_ : float
        ``report_.sup_value``.
    n_samples_ : int
    """

    def __init__(self, model: ConditionalModel | None = None, bound: str = "tv", seed: int = 0,
                 y_edges=None):
        self.model = model
        self.bound = bound
        self.seed = seed
        self.y_edges = y_edges

    def _samples(self, X) -> SampleSet:
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValidationError(f"X must have two columns (x, y), got {X.shape[1]}")
        s = SampleSet(X[:, 0], X[:, 1], "estimator")
        if self.y_edges is not None:
            s = bin_samples(s, self.y_edges)
        return s

    def _report(self, samples):
        if not isinstance(self.model, ConditionalModel):
            raise ValidationError("model must be a ConditionalModel")
        if self.bound == "tv":
            return tv_bound(samples, self.model, self.seed)
        if self.bound == "w":
            return w_bound(samples, self.model, self.seed)
        raise ValidationError(f"bound must be 'tv' or 'w', got {self.bound!r}")

    def fit(self, X, y=None):
        samples = self._samples(X)
        self.report_ = self._report(samples)
        self.sup_ = self.report_.sup_value
        self.n_samples_ = len(samples)
        return self

    def score(self, X, y=None) -> float:
        """Negative sup discrepancy (larger is a better fit)."""
        return -self._report(self._samples(X)).sup_value
