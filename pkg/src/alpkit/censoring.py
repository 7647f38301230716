"""Offer-ratio censoring that rebalances rejects toward ~5% acceptances.

Two rules: (1) inside each accepted match run, drop reject offers whose
offer ratio falls strictly below the accepting center's ratio; (2) across
unused-kidney runs, drop offers below a single global ratio threshold,
chosen by monotone search so the surviving acceptance share lands at the
target.  Accept offers are never removed and surviving offers keep their
baseline relative order.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import Center, Dataset, MatchRun, Offer, Response


@dataclass(frozen=True)
class CensorConfig:
    """Target acceptance share after censoring and the search tolerance."""

    target_accept_share: float = 0.05
    tolerance: float = 0.005

    def __post_init__(self) -> None:
        if not 0.0 <= self.target_accept_share < 1.0:
            raise ValueError(
                f"target_accept_share must be in [0, 1), got {self.target_accept_share}"
            )
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(frozen=True)
class DatasetCounts:
    """One row of the before/after summary (dataset-variant table shape)."""

    centers: int
    donors: int
    rejected_offers: int
    accepted_offers: int


@dataclass(frozen=True)
class CensorReport:
    before: DatasetCounts
    after: DatasetCounts
    unused_threshold: float
    achieved_share: float
    target_reached: bool
    rows: tuple[dict, ...] = field(default_factory=tuple)

    def as_rows(self) -> list[dict]:
        out = []
        for label, c in (("before", self.before), ("after", self.after)):
            out.append(
                {
                    "stage": label,
                    "centers": c.centers,
                    "donors": c.donors,
                    "rejected_offers": c.rejected_offers,
                    "accepted_offers": c.accepted_offers,
                }
            )
        return out


def dataset_counts(runs: Sequence[MatchRun]) -> DatasetCounts:
    centers = {o.center_id for r in runs for o in r.offers}
    donors = {r.donor_id for r in runs if r.offers}
    accepted = sum(1 for r in runs for o in r.offers if o.response is Response.ACCEPT)
    rejected = sum(1 for r in runs for o in r.offers if o.response is Response.REJECT)
    return DatasetCounts(len(centers), len(donors), rejected, accepted)


def offer_ratio(offer: Offer, center: Center) -> float:
    """Patient-level offer count over the center's listed-patient count."""
    if center.patient_count <= 0:
        raise ValueError(
            f"center {center.center_id!r} has patient_count "
            f"{center.patient_count}; offer ratio undefined"
        )
    return offer.patient_offer_count / center.patient_count


def censor_accepted_run(run: MatchRun, centers: Mapping[str, Center]) -> MatchRun:
    """Drop rejects offered to a strictly smaller share of their patients
    than the accepting center's share.  Ties with the accepting ratio keep
    the offer; baseline order is preserved.
    """
    idx = run.accept_index
    if idx is None:
        raise ValueError(f"run for donor {run.donor_id!r} has no Accept offer")
    accept_ratio = offer_ratio(run.offers[idx], centers[run.offers[idx].center_id])
    kept = tuple(
        o
        for o in run.offers
        if o.response is Response.ACCEPT
        or offer_ratio(o, centers[o.center_id]) >= accept_ratio
    )
    return MatchRun(run.donor_id, kept)


def _share(n_accepts: int, n_total: int) -> float:
    return n_accepts / n_total if n_total > 0 else 0.0


def censor_unused(
    runs: Sequence[MatchRun],
    centers: Mapping[str, Center],
    cfg: CensorConfig,
    accepted_offer_count: int,
) -> tuple[float, list[MatchRun]]:
    """Censor unused-kidney runs with one global ratio threshold.

    ``runs`` is the full run list; accepted runs pass through untouched.
    Returns the smallest threshold whose surviving acceptance share is
    within tolerance of the target, or the closest achievable one.  A
    threshold of ``inf`` drops every unused-run offer.
    """
    unused_ratios: list[float] = []
    for run in runs:
        if run.is_accepted:
            continue
        for o in run.offers:
            unused_ratios.append(offer_ratio(o, centers[o.center_id]))
    if not unused_ratios:
        raise ValueError("no unused-kidney runs to censor")
    unused_ratios.sort()

    fixed_total = sum(len(r.offers) for r in runs if r.is_accepted)
    n_unused = len(unused_ratios)

    def share_at(t: float) -> float:
        survivors = n_unused - bisect_left(unused_ratios, t)
        return _share(accepted_offer_count, fixed_total + survivors)

    # Candidate thresholds where the survivor count changes; share is
    # non-decreasing in t, so scan for the first in-tolerance candidate.
    candidates = [0.0] + sorted(set(unused_ratios)) + [math.inf]
    lo_bound = cfg.target_accept_share - cfg.tolerance
    hi_bound = cfg.target_accept_share + cfg.tolerance

    threshold: float | None = None
    for t in candidates:
        s = share_at(t)
        if s >= lo_bound:
            if s <= hi_bound:
                threshold = t
            break
    if threshold is None:
        # Target window skipped over (or unreachable): closest achievable.
        threshold = min(candidates, key=lambda t: (abs(share_at(t) - cfg.target_accept_share), t))

    out: list[MatchRun] = []
    for run in runs:
        if run.is_accepted:
            out.append(run)
            continue
        kept = tuple(
            o for o in run.offers if offer_ratio(o, centers[o.center_id]) >= threshold
        )
        out.append(MatchRun(run.donor_id, kept))
    return threshold, out


def censor_dataset(dataset: Dataset, cfg: CensorConfig) -> tuple[Dataset, CensorReport]:
    """Apply both censoring rules and report dataset counts before/after.

    Runs reduced to zero offers are dropped.  Idempotent: censoring an
    already-censored dataset with the same config changes nothing.
    """
    centers = {c.center_id: c for c in dataset.centers}
    before = dataset_counts(dataset.match_runs)

    staged: list[MatchRun] = []
    for run in dataset.match_runs:
        staged.append(censor_accepted_run(run, centers) if run.is_accepted else run)

    accepted_count = sum(1 for r in staged if r.is_accepted)
    has_unused = any(not r.is_accepted and r.offers for r in staged)
    if has_unused and accepted_count > 0:
        threshold, staged = censor_unused(staged, centers, cfg, accepted_count)
    else:
        threshold = 0.0

    kept_runs = tuple(r for r in staged if r.offers)
    after = dataset_counts(kept_runs)
    achieved = _share(after.accepted_offers, after.accepted_offers + after.rejected_offers)
    report = CensorReport(
        before=before,
        after=after,
        unused_threshold=threshold,
        achieved_share=achieved,
        target_reached=abs(achieved - cfg.target_accept_share) <= cfg.tolerance,
    )
    censored = Dataset(
        centers=dataset.centers,
        donors=dataset.donors,
        match_runs=kept_runs,
        airports=dataset.airports,
        provenance=dataset.provenance,
    )
    return censored, report
