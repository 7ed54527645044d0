"""Exact identification oracle on fully discrete data-generating processes.

A :class:`DiscreteDgpTable` carries, per group, both the observed-data joint
distribution (treatment, covariate, realized secondary and primary outcomes)
and the potential-outcome joint distribution. The oracle computes the
treatment effect in the observational population purely from observed-data
conditionals — the constructive content of the point-identification result —
and verifies it against the directly enumerated potential-outcome truth.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import EstimationError, PositivityError, ValidationError
from .sample import CombinedSample
from .schema import CovariateSpec, SampleSchema


@dataclass(frozen=True)
class DiscreteDgpTable:
    """Finite-support DGP with integer cell counts (exact rational probabilities).

    ``observed_counts[g, w, x, u, p]`` counts units in group g (0=E, 1=O) with
    treatment w, covariate level x, latent index u and realized primary level
    p. The realized secondary value is ``secondary_values[w, u]``; each row is
    strictly increasing in u, so conditioning on the realized secondary within
    an arm pins down u. ``potential_counts[g, x, u, p0, p1]`` counts the joint
    of both potential primary outcomes.
    """

    secondary_values: np.ndarray  # (2, n_u), strictly increasing rows
    primary_values: np.ndarray  # (n_p,)
    observed_counts: np.ndarray  # (2, 2, n_x, n_u, n_p) int
    potential_counts: np.ndarray  # (2, n_x, n_u, n_p, n_p) int
    assumptions_certified: bool = False

    def __post_init__(self):
        sv = np.asarray(self.secondary_values)
        if sv.ndim != 2 or sv.shape[0] != 2:
            raise ValidationError("secondary_values must have shape (2, n_u)")
        if not (np.diff(sv, axis=1) > 0).all():
            raise ValidationError("secondary values must be strictly increasing in the latent index")
        oc = np.asarray(self.observed_counts)
        pc = np.asarray(self.potential_counts)
        if (oc < 0).any() or (pc < 0).any():
            raise ValidationError("counts must be nonnegative")
        n_u = sv.shape[1]
        n_p = len(self.primary_values)
        if oc.shape[:2] != (2, 2) or oc.shape[3:] != (n_u, n_p):
            raise ValidationError(f"observed_counts shape {oc.shape} inconsistent with supports")
        if pc.shape[0] != 2 or pc.shape[2:] != (n_u, n_p, n_p):
            raise ValidationError(f"potential_counts shape {pc.shape} inconsistent with supports")
        for g in (0, 1):
            if oc[g].sum() <= 0:
                raise ValidationError("each group needs positive total mass")

    @property
    def n_x(self) -> int:
        return self.observed_counts.shape[2]

    def observed_probs(self, group: int) -> np.ndarray:
        c = self.observed_counts[group].astype(np.float64)
        return c / c.sum()

    def to_sample(self) -> CombinedSample:
        """Materialize the exact finite population implied by the counts."""
        schema = SampleSchema(
            group_column="g",
            treatment_column="w",
            secondary_column="s",
            primary_column="y",
            covariates=(CovariateSpec(
                name="x", kind="categorical",
                levels=tuple(str(i) for i in range(self.n_x))),),
            secondary_discrete=True,
        )
        rows_g, rows_w, rows_x, rows_s, rows_y = [], [], [], [], []
        counts = np.asarray(self.observed_counts)
        for g in (0, 1):
            for w in (0, 1):
                for x in range(self.n_x):
                    for u in range(counts.shape[3]):
                        for p in range(counts.shape[4]):
                            c = int(counts[g, w, x, u, p])
                            if c == 0:
                                continue
                            rows_g.append(np.full(c, bool(g)))
                            rows_w.append(np.full(c, w, dtype=np.int8))
                            rows_x.append(np.full(c, float(x)))
                            rows_s.append(np.full(c, self.secondary_values[w, u]))
                            rows_y.append(np.full(
                                c, self.primary_values[p] if g == 1 else np.nan))
        return CombinedSample(
            schema,
            np.concatenate(rows_g),
            np.concatenate(rows_w),
            np.concatenate(rows_x)[:, None],
            np.concatenate(rows_s),
            np.concatenate(rows_y),
        )


@dataclass(frozen=True)
class OracleResult:
    tau_identified: float
    tau_truth: float


def potential_outcome_truth(dgp: DiscreteDgpTable, group: int = 1) -> float:
    """Mean of Y(1) - Y(0) in one group, enumerated from the potential tables."""
    pot = dgp.potential_counts[group].astype(np.float64)
    total = pot.sum()
    if total <= 0:
        raise ValidationError("empty potential-outcome table")
    yp = np.asarray(dgp.primary_values, dtype=np.float64)
    effect = yp[None, None, None, :] - yp[None, None, :, None]  # p1 minus p0
    return float((pot * effect).sum() / total)


def identification_oracle(dgp: DiscreteDgpTable, tol: float = 1e-12) -> OracleResult:
    """Exact-summation identification of the observational-population effect.

    Chains the observed-data conditionals: the primary-outcome mean given
    (treatment, covariate, secondary) in the observational group, averaged
    over the experimental arm's secondary distribution per covariate level,
    then averaged over the observational covariate distribution. Raises on
    positivity violations and if the identified value disagrees with the
    enumerated potential-outcome truth beyond ``tol``.
    """
    if not dgp.assumptions_certified:
        raise ValidationError("dgp does not certify the identifying assumptions")
    p_e = dgp.observed_probs(0)  # (w, x, u, p)
    p_o = dgp.observed_probs(1)
    yp = np.asarray(dgp.primary_values, dtype=np.float64)

    mass_o_wxu = p_o.sum(axis=3)
    mass_e_wxu = p_e.sum(axis=3)
    mass_e_wx = mass_e_wxu.sum(axis=2)
    px_o = p_o.sum(axis=(0, 2, 3))

    terms = np.zeros(2)
    for w in (0, 1):
        for x in range(dgp.n_x):
            if px_o[x] <= 0:
                continue
            if mass_e_wx[w, x] <= 0:
                raise PositivityError(
                    f"experimental cell (treatment={w}, x={x}) has zero probability"
                )
            k_x = 0.0
            for u in range(p_e.shape[2]):
                weight = mass_e_wxu[w, x, u] / mass_e_wx[w, x]
                if weight <= 0:
                    continue
                if mass_o_wxu[w, x, u] <= 0:
                    raise PositivityError(
                        f"observational cell (treatment={w}, x={x}, "
                        f"secondary={dgp.secondary_values[w, u]:g}) has zero probability"
                    )
                h = float(p_o[w, x, u] @ yp) / mass_o_wxu[w, x, u]
                k_x += weight * h
            terms[w] += px_o[x] * k_x

    identified = float(terms[1] - terms[0])
    truth = potential_outcome_truth(dgp, group=1)
    if abs(identified - truth) > tol:
        raise EstimationError(
            f"identified effect {identified!r} disagrees with enumerated truth {truth!r}"
        )
    return OracleResult(tau_identified=identified, tau_truth=truth)
