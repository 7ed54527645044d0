"""Nuisance models for the general estimators.

Three estimation methods are provided:

* ``frequency`` — exact cell tables for fully discrete features; this is the
  reference method the identification-oracle tests run against.
* ``knn`` — k-nearest-neighbor smoothing over standardized features for
  continuous data (default k = ceil(n**0.8) within arm; Euclidean metric).
* ``binning`` — equal-mass binning of a continuous secondary outcome, used
  only by the density-ratio fit (default 20 bins).

All fitted objects are immutable after construction; evaluation is read-only.
"""

import math

import numpy as np

from .exceptions import EstimationError, PositivityError, ValidationError, WarningRecord
from .sample import CombinedSample

FREQUENCY = "frequency"
KNN = "knn"
BINNING = "binning"


def default_knn_k(n: int) -> int:
    return max(1, math.ceil(n ** 0.8))


# -- low-level predictors ------------------------------------------------------


class FrequencyMean:
    """Exact cell means keyed on the byte pattern of the feature row."""

    def __init__(self, features: np.ndarray, y: np.ndarray):
        F = np.ascontiguousarray(np.atleast_2d(features), dtype=np.float64)
        if F.shape[0] != len(y):
            F = F.T
        self._d = F.shape[1]
        if self._d == 0:
            self._global = float(np.mean(y))
            self._table = {}
            return
        self._global = None
        sums: dict[bytes, float] = {}
        counts: dict[bytes, int] = {}
        for row, value in zip(F, y):
            key = row.tobytes()
            sums[key] = sums.get(key, 0.0) + float(value)
            counts[key] = counts.get(key, 0) + 1
        self._table = {k: sums[k] / counts[k] for k in sums}
        self._counts = counts

    def predict(self, features: np.ndarray) -> np.ndarray:
        F = np.ascontiguousarray(np.atleast_2d(features), dtype=np.float64)
        if self._d == 0:
            return np.full(F.shape[0] if F.ndim == 2 else 1, self._global)
        out = np.empty(F.shape[0])
        for i, row in enumerate(F):
            key = row.tobytes()
            if key not in self._table:
                raise PositivityError(f"query lands in empty cell {tuple(row)}")
            out[i] = self._table[key]
        return out


class KnnMean:
    """k-nearest-neighbor conditional mean over standardized features.

    One-dimensional features use an exact sorted-window search; higher
    dimensions fall back to chunked brute force.
    """

    def __init__(self, features: np.ndarray, y: np.ndarray, k: int):
        Z = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if Z.shape[0] != len(y):
            Z = Z.T
        n, d = Z.shape
        if k < 1:
            raise ValidationError("knn requires k >= 1")
        if k > n:
            raise EstimationError(f"k={k} exceeds arm size {n}")
        self.k = int(k)
        self._mu = Z.mean(axis=0)
        sd = Z.std(axis=0)
        self._sd = np.where(sd > 0, sd, 1.0)
        self._Z = (Z - self._mu) / self._sd
        self._y = np.asarray(y, dtype=np.float64)
        self._d = d
        if d == 1:
            order = np.argsort(self._Z[:, 0], kind="stable")
            self._xs = self._Z[order, 0]
            self._prefix = np.concatenate([[0.0], np.cumsum(self._y[order])])

    def predict(self, features: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if Z.shape[1] != self._d:
            Z = Z.T
        Zs = (Z - self._mu) / self._sd
        if self._d == 1:
            return self._predict_sorted(Zs[:, 0])
        return self._predict_brute(Zs)

    def _predict_sorted(self, q: np.ndarray) -> np.ndarray:
        xs, k = self._xs, self.k
        n = len(xs)
        # window [i, i+k) of the k nearest is where xs[i] + xs[i+k-1] crosses 2q
        z = xs[: n - k + 1] + xs[k - 1 :]
        i0 = np.searchsorted(z, 2.0 * q, side="left")
        best = np.clip(i0, 0, n - k)
        alt = np.clip(i0 - 1, 0, n - k)
        span_best = np.maximum(q - xs[best], xs[best + k - 1] - q)
        span_alt = np.maximum(q - xs[alt], xs[alt + k - 1] - q)
        start = np.where(span_alt < span_best, alt, best)
        return (self._prefix[start + k] - self._prefix[start]) / k

    def _predict_brute(self, Zq: np.ndarray) -> np.ndarray:
        out = np.empty(len(Zq))
        chunk = max(1, int(2**22 // max(1, len(self._Z))))
        for lo in range(0, len(Zq), chunk):
            block = Zq[lo : lo + chunk]
            d2 = ((block[:, None, :] - self._Z[None, :, :]) ** 2).sum(axis=2)
            if self.k < d2.shape[1]:
                idx = np.argpartition(d2, self.k - 1, axis=1)[:, : self.k]
            else:
                idx = np.broadcast_to(np.arange(d2.shape[1]), d2.shape).copy()
            out[lo : lo + chunk] = self._y[idx].mean(axis=1)
        return out


# -- fitted nuisance objects ---------------------------------------------------


class NuisanceFit:
    """Common surface: what was fitted, how, with what smoothing parameters."""

    kind: str
    method: str

    def __init__(self, kind: str, method: str, params: dict, warnings=()):
        self.kind = kind
        self.method = method
        self.params = dict(params)
        self.warnings = tuple(warnings)


class ConditionalMeanFit(NuisanceFit):
    """Per-arm conditional mean of an outcome given features (treatment split)."""

    def __init__(self, kind, method, params, models, warnings=()):
        super().__init__(kind, method, params, warnings)
        self._models = models  # {0: predictor, 1: predictor}

    def evaluate(self, w, features) -> np.ndarray:
        w = np.asarray(w)
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if F.shape[0] != len(w):
            F = F.T
        out = np.empty(len(w))
        for arm in (0, 1):
            m = w == arm
            if m.any():
                out[m] = self._models[arm].predict(F[m])
        return out


class ProbabilityFit(NuisanceFit):
    """Trimmed conditional probability of a binary flag given covariates."""

    def __init__(self, kind, method, params, model, trim, warnings=()):
        super().__init__(kind, method, params, warnings)
        self._model = model
        self.trim = float(trim)

    def probability(self, features) -> np.ndarray:
        p = self._model.predict(np.atleast_2d(np.asarray(features, dtype=np.float64)))
        return np.clip(p, self.trim, 1.0 - self.trim)

    def odds(self, features) -> np.ndarray:
        p = self.probability(features)
        return p / (1.0 - p)


class DensityRatioFit(NuisanceFit):
    """Ratio of experimental to observational conditional frequencies of
    (treatment, secondary) given covariates."""

    def __init__(self, kind, method, params, table, bin_edges, warnings=()):
        super().__init__(kind, method, params, warnings)
        self._table = table  # key -> ratio
        self._bin_edges = bin_edges

    def _key(self, w, x_row, s):
        if self._bin_edges is not None:
            s = float(np.searchsorted(self._bin_edges, s, side="right"))
        return (int(w), tuple(np.asarray(x_row, dtype=np.float64)), float(s))

    def ratio(self, w, features, s) -> np.ndarray:
        w = np.asarray(w)
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if F.shape[0] != len(w):
            F = F.T
        s = np.asarray(s, dtype=np.float64)
        out = np.empty(len(w))
        for i in range(len(w)):
            key = self._key(w[i], F[i], s[i])
            if key not in self._table:
                raise PositivityError(f"observational cell {key} has zero frequency")
            out[i] = self._table[key]
        return out


class SecondaryRankFit(NuisanceFit):
    """Right-continuous empirical conditional CDF of the secondary outcome in
    the experimental sample, within (treatment, covariate) cells."""

    def __init__(self, kind, method, params, cells, knn_state, warnings=()):
        super().__init__(kind, method, params, warnings)
        self._cells = cells  # frequency: {(w, xkey): sorted secondary values}
        self._knn = knn_state  # knn: {w: (standardized X, s values, mu, sd, k)}

    def evaluate(self, s, w, features) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        w = np.asarray(w)
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if F.shape[0] != len(w):
            F = F.T
        out = np.empty(len(w))
        if self.method == FREQUENCY:
            for i in range(len(w)):
                key = (int(w[i]), F[i].tobytes())
                if key not in self._cells:
                    raise PositivityError(
                        f"no experimental units in cell (treatment={int(w[i])}, "
                        f"covariates={tuple(F[i])})"
                    )
                values = self._cells[key]
                out[i] = np.searchsorted(values, s[i], side="right") / len(values)
            return out
        for arm in (0, 1):
            m = w == arm
            if not m.any():
                continue
            Z, sv, mu, sd, k = self._knn[arm]
            Q = (F[m] - mu) / sd
            chunk = max(1, int(2**22 // max(1, len(Z))))
            vals = np.empty(int(m.sum()))
            sq = s[m]
            for lo in range(0, len(Q), chunk):
                block = Q[lo : lo + chunk]
                d2 = ((block[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
                idx = (
                    np.argpartition(d2, k - 1, axis=1)[:, :k]
                    if k < d2.shape[1]
                    else np.broadcast_to(np.arange(d2.shape[1]), d2.shape).copy()
                )
                vals[lo : lo + chunk] = (sv[idx] <= sq[lo : lo + chunk, None]).mean(axis=1)
            out[m] = vals
        return out


# -- fitting frontends ---------------------------------------------------------


def _require_discrete_features(sample: CombinedSample, with_secondary: bool, what: str):
    if not sample.schema.all_covariates_categorical():
        raise ValidationError(f"{what} with the frequency method requires categorical covariates")
    if with_secondary and not sample.schema.secondary_discrete:
        raise ValidationError(
            f"{what} with the frequency method requires a discrete secondary outcome"
        )


def fit_primary_outcome_model(sample: CombinedSample, method: str = FREQUENCY,
                              k: int | None = None) -> ConditionalMeanFit:
    """Conditional mean of the primary outcome given (treatment, covariates,
    secondary), fitted on the observational sample."""
    mask = sample.mask(group="O")
    return _fit_conditional_mean(
        kind="primary_outcome_mean",
        w=sample.treatment[mask],
        features=np.column_stack([sample.covariates[mask], sample.secondary[mask]]),
        y=sample.primary[mask],
        method=method,
        k=k,
        discrete_check=lambda: _require_discrete_features(sample, True, "primary outcome model"),
    )


def fit_rank_outcome_model(sample: CombinedSample, ranks_o: np.ndarray,
                           method: str = FREQUENCY, k: int | None = None) -> ConditionalMeanFit:
    """Conditional mean of the primary outcome given (treatment, rank,
    covariates), fitted on the observational sample."""
    mask = sample.mask(group="O")
    return _fit_conditional_mean(
        kind="rank_outcome_mean",
        w=sample.treatment[mask],
        features=np.column_stack([sample.covariates[mask], np.asarray(ranks_o)]),
        y=sample.primary[mask],
        method=method,
        k=k,
        discrete_check=lambda: _require_discrete_features(sample, False, "rank outcome model"),
    )


def _fit_conditional_mean(kind, w, features, y, method, k, discrete_check):
    models = {}
    if method == FREQUENCY:
        discrete_check()
        for arm in (0, 1):
            m = w == arm
            models[arm] = FrequencyMean(features[m], y[m])
        params = {}
    elif method == KNN:
        for arm in (0, 1):
            m = w == arm
            arm_k = k if k is not None else default_knn_k(int(m.sum()))
            models[arm] = KnnMean(features[m], y[m], k=arm_k)
        params = {"k": k if k is not None else "ceil(n**0.8)"}
    else:
        raise ValidationError(f"unsupported method {method!r} for {kind}")
    return ConditionalMeanFit(kind, method, params, models)


def fit_selection_odds(sample: CombinedSample, method: str = FREQUENCY,
                       trim: float = 0.01, k: int | None = None) -> ProbabilityFit:
    """Probability of being observational given covariates, clamped to
    [trim, 1-trim] before forming odds."""
    if not 0.0 < trim < 0.5:
        raise ValidationError(f"trim must lie in (0, 0.5), got {trim}")
    flags = sample.group_obs.astype(np.float64)
    return _fit_probability(
        kind="selection_odds",
        features=sample.covariates,
        flags=flags,
        sample=sample,
        method=method,
        trim=trim,
        k=k,
        support_message="covariate cell present only in the experimental sample",
        support_check=lambda cell_flags: cell_flags.sum() == 0,
    )


def fit_propensity(sample: CombinedSample, group: str, method: str = FREQUENCY,
                   trim: float = 0.01, k: int | None = None) -> ProbabilityFit:
    """Probability of treatment given covariates, within one group."""
    if not 0.0 < trim < 0.5:
        raise ValidationError(f"trim must lie in (0, 0.5), got {trim}")
    mask = sample.mask(group=group)
    sub_features = sample.covariates[mask]
    flags = sample.treatment[mask].astype(np.float64)
    return _fit_probability(
        kind=f"propensity_{group}",
        features=sub_features,
        flags=flags,
        sample=sample,
        method=method,
        trim=trim,
        k=k,
        support_message=None,
        support_check=None,
    )


def _fit_probability(kind, features, flags, sample, method, trim, k,
                     support_message, support_check):
    warnings = []
    if method == FREQUENCY:
        if not sample.schema.all_covariates_categorical():
            raise ValidationError(f"{kind} with the frequency method requires categorical covariates")
        if support_check is not None and features.shape[1] > 0:
            F = np.ascontiguousarray(features, dtype=np.float64)
            seen = {}
            for row, flag in zip(F, flags):
                seen.setdefault(row.tobytes(), []).append(flag)
            for key, cell_flags in seen.items():
                if support_check(np.asarray(cell_flags)):
                    raise PositivityError(f"{support_message} (common-support violation)")
        model = FrequencyMean(features, flags)
    elif method == KNN:
        n = len(flags)
        model = KnnMean(features, flags, k=k if k is not None else default_knn_k(n))
    else:
        raise ValidationError(f"unsupported method {method!r} for {kind}")
    raw = model.predict(np.atleast_2d(np.asarray(features, dtype=np.float64)))
    n_clamped = int(np.sum((raw < trim) | (raw > 1.0 - trim)))
    if n_clamped:
        warnings.append(WarningRecord(
            code="probability_trimmed",
            message=f"{kind}: {n_clamped} fitted probabilities clamped to [{trim}, {1-trim}]",
            context={"n_clamped": n_clamped, "trim": trim},
        ))
    return ProbabilityFit(kind, method, {"trim": trim, "k": k}, model, trim, warnings)


def fit_density_ratio(sample: CombinedSample, method: str = FREQUENCY,
                      bins: int = 20) -> DensityRatioFit:
    """Ratio of experimental to observational conditional frequencies of
    (treatment, secondary) given covariates, evaluable at observational units.

    Discrete data use exact cells; a continuous secondary outcome is grouped
    into equal-mass bins. Cells carrying experimental mass with no
    observational counterpart raise a positivity error; cells with no
    experimental mass get ratio 0 with a warning.
    """
    if not sample.schema.all_covariates_categorical():
        raise ValidationError("density ratio requires categorical (or no) covariates")
    if method == FREQUENCY:
        if not sample.schema.secondary_discrete:
            raise ValidationError(
                "density ratio with the frequency method requires a discrete secondary "
                "outcome; use method='binning' for continuous data"
            )
        edges = None
        svals = sample.secondary
    elif method == BINNING:
        if bins < 1:
            raise ValidationError("binning requires bins >= 1")
        qs = np.quantile(sample.secondary, np.arange(1, bins) / bins)
        edges = np.unique(qs)
        svals = np.searchsorted(edges, sample.secondary, side="right").astype(np.float64)
    else:
        raise ValidationError(f"unsupported method {method!r} for density ratio")

    warnings = []
    cells_e: dict = {}
    cells_o: dict = {}
    x_e: dict = {}
    x_o: dict = {}
    for i in range(sample.n):
        xkey = tuple(sample.covariates[i])
        key = (int(sample.treatment[i]), xkey, float(svals[i]))
        if sample.group_obs[i]:
            cells_o[key] = cells_o.get(key, 0) + 1
            x_o[xkey] = x_o.get(xkey, 0) + 1
        else:
            cells_e[key] = cells_e.get(key, 0) + 1
            x_e[xkey] = x_e.get(xkey, 0) + 1

    table = {}
    for key, c_o in cells_o.items():
        _, xkey, _ = key
        if xkey not in x_e:
            raise PositivityError(
                f"covariate cell {xkey} present only in the observational sample"
            )
        c_e = cells_e.get(key, 0)
        if c_e == 0:
            table[key] = 0.0
            warnings.append(WarningRecord(
                code="zero_experimental_cell",
                message="observational cell has no experimental counterpart; weight 0",
                context={"treatment": key[0], "secondary": key[2]},
            ))
        else:
            table[key] = (c_e / x_e[xkey]) / (c_o / x_o[xkey])
    for key in cells_e:
        if key not in cells_o:
            raise PositivityError(
                f"experimental cell (treatment={key[0]}, covariates={key[1]}, "
                f"secondary={key[2]:g}) has no observational counterpart"
            )
    return DensityRatioFit("density_ratio", method, {"bins": bins if edges is not None else None},
                           table, edges, warnings)


def fit_secondary_rank(sample: CombinedSample, method: str = FREQUENCY,
                       k: int | None = None) -> SecondaryRankFit:
    """Empirical conditional CDF of the secondary outcome in the experimental
    sample within (treatment, covariate) cells; continuous covariates use
    k-nearest-neighbor cells."""
    mask = sample.mask(group="E")
    w = sample.treatment[mask]
    X = sample.covariates[mask]
    s = sample.secondary[mask]
    if method == FREQUENCY:
        if not sample.schema.all_covariates_categorical():
            raise ValidationError(
                "rank fit with the frequency method requires categorical covariates"
            )
        cells: dict = {}
        for i in range(len(w)):
            key = (int(w[i]), np.ascontiguousarray(X[i]).tobytes())
            cells.setdefault(key, []).append(s[i])
        cells = {key: np.sort(np.asarray(v)) for key, v in cells.items()}
        return SecondaryRankFit("secondary_rank_cdf", method, {}, cells, None)
    if method == KNN:
        knn_state = {}
        for arm in (0, 1):
            m = w == arm
            Z = X[m]
            mu = Z.mean(axis=0) if Z.size else np.zeros(Z.shape[1])
            sd = Z.std(axis=0) if Z.size else np.ones(Z.shape[1])
            sd = np.where(sd > 0, sd, 1.0)
            arm_k = k if k is not None else default_knn_k(int(m.sum()))
            if arm_k > int(m.sum()):
                raise EstimationError(f"k={arm_k} exceeds arm size {int(m.sum())}")
            knn_state[arm] = ((Z - mu) / sd, s[m], mu, sd, arm_k)
        return SecondaryRankFit("secondary_rank_cdf", method,
                                {"k": k if k is not None else "ceil(n**0.8)"}, None, knn_state)
    raise ValidationError(f"unsupported method {method!r} for rank fit")
