"""Scikit-learn estimator wrapper around the selection heuristic.

``fit`` learns the intensity bounds from an observed history; ``predict``
maps current intensities to model names. This is a thin adapter over the
functional core in :mod:`carbonsched.selector`, so the heuristic composes
with sklearn tooling (``get_params``/``set_params``, ``clone``, pipelines).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .registry import energy_bounds, resolve_pool
from .selector import IntensityBounds, SelectionDecision, decide_with_bounds
from .traces import CarbonTrace

__all__ = ["CarbonAwareModelSelector"]


def _as_intensity_array(X, allow_empty: bool = False) -> np.ndarray:
    """Coerce input to a 1-D float array of intensities; a CarbonTrace's
    intensities, a 1-D array-like, or an (n, 1) column are all accepted."""
    if isinstance(X, CarbonTrace):
        values = np.asarray(X.intensities(), dtype=float)
    else:
        values = np.asarray(X, dtype=float)
        if values.ndim == 2 and values.shape[1] == 1:
            values = values.ravel()
        if values.ndim != 1:
            raise ValueError(
                f"expected a 1-D intensity series, got shape {values.shape}"
            )
    if not allow_empty and values.size == 0:
        raise ValueError("empty intensity series")
    if values.size and (
        not np.all(np.isfinite(values)) or np.any(values < 0)
    ):
        raise ValueError("intensities must be finite and non-negative")
    return values


class CarbonAwareModelSelector(BaseEstimator):
    """Select a model variant per grid carbon intensity.

    Parameters
    ----------
    pool : str | Path | ModelPool, default="resnet"
        Candidate pool: ``"full"`` / ``"resnet"`` builtin, a pool CSV path,
        or a ModelPool instance.
    mapping : {"prose", "literal"}, default="prose"
        Direction of the intensity-to-energy mapping. ``prose`` serves the
        cheapest model at the highest observed intensity.

    Attributes
    ----------
    bounds_ : IntensityBounds
        Low/high intensity learned from the fitted history.
    pool_ : ModelPool
        Resolved candidate pool.
    energy_bounds_ : EnergyBounds
        Pool energy bounds the fraction interpolates between.
    """

    def __init__(self, pool="resnet", mapping="prose"):
        self.pool = pool
        self.mapping = mapping

    def fit(self, X, y=None):
        """Learn intensity bounds from an observed history.

        X is a CarbonTrace or a 1-D (or single-column) array of observed
        intensities in g/kWh. y is ignored.
        """
        values = _as_intensity_array(X)
        self.pool_ = resolve_pool(self.pool)
        self.energy_bounds_ = energy_bounds(self.pool_)
        self.bounds_ = IntensityBounds(float(values.min()), float(values.max()))
        self.n_samples_seen_ = int(values.size)
        return self

    def partial_fit(self, X, y=None):
        """Extend the learned bounds with newly observed intensities."""
        values = _as_intensity_array(X)
        if not hasattr(self, "bounds_"):
            return self.fit(values)
        self.bounds_ = IntensityBounds(
            min(self.bounds_.c_low, float(values.min())),
            max(self.bounds_.c_high, float(values.max())),
        )
        self.n_samples_seen_ += int(values.size)
        return self

    def decide(self, c_current: float) -> SelectionDecision:
        """Full decision record for one current intensity."""
        check_is_fitted(self, "bounds_")
        return decide_with_bounds(
            float(c_current), self.bounds_, self.pool_, self.mapping
        )

    def predict(self, X) -> np.ndarray:
        """Chosen model name for each current intensity."""
        check_is_fitted(self, "bounds_")
        values = _as_intensity_array(X, allow_empty=True)
        return np.array([self.decide(c).model for c in values], dtype=object)

    def predict_energy(self, X) -> np.ndarray:
        """Target energy (mJ per inference) for each current intensity."""
        check_is_fitted(self, "bounds_")
        values = _as_intensity_array(X, allow_empty=True)
        return np.array([self.decide(c).e_target for c in values], dtype=float)

    def _more_tags(self):
        return {"X_types": ["1darray"], "requires_y": False}
