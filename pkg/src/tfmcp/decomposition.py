"""Scikit-learn style front end for the tensor factor estimators.

``CPFactorDecomposition`` follows the estimator protocol: construct with
hyperparameters, ``fit`` on an array of shape ``(T, d_1, ..., d_K)``,
read the results off trailing-underscore attributes, and move factor
series back and forth with ``transform`` / ``inverse_transform``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .estimators import FitConfig, fit_method
from .linalg import regularized_b
from .metrics import explained_variability
from .model import CpFactorModel, reconstruct_series
from .validation import check_series


class CPFactorDecomposition(BaseEstimator):
    """Tensor factor model with rank-one (CP) signal components.

    Fits ``X_t = sum_i w_i f_it a_i1 (x) ... (x) a_iK + noise`` from the
    lag-h cross moment of the series.

    Parameters
    ----------
    n_factors : int
        Number of rank-one components r.
    lag : int, default 1
        Moment lag h.
    method : str, default "hope"
        One of ``cpca``, ``hope``, ``1hope``, ``cals``, ``coals``,
        ``als``, ``oals``.
    eps : float, default 1e-6
        Convergence tolerance on the per-loading projector change.
    max_iter : int, default 30
        Iteration cap for the refinement loops.
    gram_floor : float, default 0.1
        Eigenvalue floor when inverting loading Grams.
    random_state : int or None
        Seed for the random-restart variants.
    random_inits : int, default 20
        Restart count for ``als`` / ``oals``.

    Attributes
    ----------
    loadings_ : list of (d_k, r) ndarrays, unit sign-normalized columns
    weights_ : (r,) ndarray
    factors_ : (r, T) ndarray with unit sum of squares per row
    lambda_ : (r,) ndarray or None, spectrum of the square moment
    n_iter_ : int
    converged_ : bool

    Examples
    --------
    >>> from tfmcp.simulate import named_config, gen_series
    >>> x, truth = gen_series(named_config("I", seed=7, t_len=120))
    >>> est = CPFactorDecomposition(n_factors=2).fit(x)
    >>> est.factors_.shape
    (2, 120)
    """

    def __init__(
        self,
        n_factors: int = 1,
        lag: int = 1,
        method: str = "hope",
        eps: float = 1e-6,
        max_iter: int = 30,
        gram_floor: float = 0.1,
        random_state: int | None = None,
        random_inits: int = 20,
    ):
        self.n_factors = n_factors
        self.lag = lag
        self.method = method
        self.eps = eps
        self.max_iter = max_iter
        self.gram_floor = gram_floor
        self.random_state = random_state
        self.random_inits = random_inits

    def _config(self) -> FitConfig:
        return FitConfig(
            r=self.n_factors,
            h=self.lag,
            eps=self.eps,
            max_iter=self.max_iter,
            gram_floor=self.gram_floor,
            seed=self.random_state,
            random_inits=self.random_inits,
        )

    def fit(self, X, y=None):
        """Fit the factor model on a series of shape (T, d_1, ..., d_K)."""
        x = check_series(X)
        result = fit_method(x, self.method, self._config())
        self.result_ = result
        self.loadings_ = result.loadings
        self.weights_ = result.weights
        self.factors_ = result.factors
        self.lambda_ = result.lambda_hat
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.dims_ = result.dims
        self.duals_ = [regularized_b(a, self.gram_floor) for a in result.loadings]
        return self

    def _check_fitted(self):
        if not hasattr(self, "loadings_"):
            raise NotFittedError(
                "this CPFactorDecomposition instance is not fitted yet"
            )

    def transform(self, X) -> np.ndarray:
        """Project a series onto the fitted components: (T, r) scores.

        Score ``(t, i)`` is the slice contracted against factor i's dual
        vectors on every mode, i.e. the unnormalized signal path
        ``w_i f_it`` plus projected noise.
        """
        self._check_fitted()
        x = check_series(X, order=len(self.dims_), min_t=1)
        if tuple(x.shape[1:]) != self.dims_:
            raise ValueError(
                f"series dims {x.shape[1:]} do not match fitted dims {self.dims_}"
            )
        r = self.weights_.size
        out = np.empty((x.shape[0], r))
        for i in range(r):
            z = x
            for mode in range(len(self.dims_) - 1, -1, -1):
                z = np.tensordot(z, self.duals_[mode][:, i], axes=(mode + 1, 0))
            out[:, i] = z
        return out

    def inverse_transform(self, scores) -> np.ndarray:
        """Rebuild signal slices from (T, r) scores."""
        self._check_fitted()
        scores = np.asarray(scores, dtype=float)
        if scores.ndim != 2 or scores.shape[1] != self.weights_.size:
            raise ValueError(
                f"scores must have shape (T, {self.weights_.size}), got {scores.shape}"
            )
        model = CpFactorModel(
            weights=np.ones(self.weights_.size),
            loadings=self.loadings_,
            factors=scores.T,
        )
        return reconstruct_series(model)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).transform(X)

    def score(self, X, y=None) -> float:
        """Explained variability of the fitted signal on ``X``."""
        self._check_fitted()
        return explained_variability(X, self.result_)

    def reconstruct(self, X) -> np.ndarray:
        """Fitted signal series for ``X`` (projection then rank-one rebuild)."""
        return self.inverse_transform(self.transform(X))
