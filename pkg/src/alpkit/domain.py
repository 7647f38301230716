"""Shared domain types for kidney-offer datasets.

All timestamps are timezone-aware UTC at minute resolution; cold-ischemia
arithmetic is integer minutes.  Categorical fields never go missing: raw
values that cannot be classified map to an explicit ``OTHER``/``UNKNOWN``
arm.  Every type here is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone


class BloodType(enum.Enum):
    O = "O"
    A = "A"
    B = "B"
    AB = "AB"


class Ethnicity(enum.Enum):
    WHITE = "White"
    BLACK = "Black"
    HISPANIC = "Hispanic"
    OTHER = "Other"


class Gender(enum.Enum):
    M = "M"
    F = "F"


class CauseOfDeath(enum.Enum):
    CVD_STROKE = "CVD_Stroke"
    ANOXIA = "Anoxia"
    HEAD_TRAUMA = "HeadTrauma"
    OTHER = "Other"


class DiabetesHistory(enum.Enum):
    NO = "No"
    YES_0_TO_5 = "Yes0to5"
    YES_6_TO_10 = "Yes6to10"
    YES_OVER_10 = "YesOver10"
    YES_UNKNOWN_DURATION = "YesUnknownDuration"
    UNSURE = "Unsure"

    @property
    def is_yes(self) -> bool:
        """True for any confirmed-diabetes arm (duration known or not)."""
        return self in (
            DiabetesHistory.YES_0_TO_5,
            DiabetesHistory.YES_6_TO_10,
            DiabetesHistory.YES_OVER_10,
            DiabetesHistory.YES_UNKNOWN_DURATION,
        )


class InsulinDependence(enum.Enum):
    NO = "No"
    YES = "Yes"
    UNKNOWN = "Unknown"


class TriState(enum.Enum):
    """Yes/No flags whose raw source may carry unknown or free-text codes."""

    NO = "No"
    YES = "Yes"
    OTHER = "Other"


class SeroStatus(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


class SeroStatusOrOther(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    OTHER = "Other"


class InterstitialFibrosis(enum.Enum):
    OCCASIONAL = "Occasional"
    SOME = "Some"
    MOST = "Most"
    OTHER = "Other"


class AirportClass(enum.Enum):
    MEDIUM = "Medium"
    LARGE = "Large"


class Response(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class TimeOfDay(enum.Enum):
    LATE_NIGHT = "LateNight"
    EARLY_MORNING = "EarlyMorning"
    MORNING = "Morning"
    NOON = "Noon"
    EVE = "Eve"
    NIGHT = "Night"


def _require_utc_minute(value: datetime, name: str) -> datetime:
    if value.tzinfo is None:
        raise ValueError(f"{name} must be timezone-aware (UTC)")
    value = value.astimezone(timezone.utc)
    if value.second != 0 or value.microsecond != 0:
        value = value.replace(second=0, microsecond=0)
    return value


def _require_finite(value: float, name: str) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        _require_finite(self.lat, "lat")
        _require_finite(self.lon, "lon")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon}")


@dataclass(frozen=True)
class Donor:
    """One deceased-donor kidney source.

    ``kdri`` is the relative graft-failure risk versus a median reference
    donor (higher = riskier); ``kdpi`` is its population percentile.
    ``peak_creatinine`` is a separate measurement and is not required to
    dominate ``creatinine``.
    """

    donor_id: str
    clamp_time: datetime
    kdri: float
    kdpi: float
    age: float
    height_cm: float
    weight_kg: float
    bmi: float
    creatinine: float
    peak_creatinine: float
    blood_urea_nitrogen: float
    glomeruli_count: float
    blood_type: BloodType
    ethnicity: Ethnicity
    gender: Gender
    cause_of_death: CauseOfDeath
    death_mechanism_code: float
    diabetes_history: DiabetesHistory
    insulin_dependent: InsulinDependence
    hypertension: TriState
    cancer_history: TriState
    cmv: SeroStatus
    hbv_surface_antigen: SeroStatusOrOther
    hbv_core_antibody: SeroStatusOrOther
    hcv_antibody: SeroStatusOrOther
    hcv_nat: SeroStatusOrOther
    tattoos: TriState
    dcd: TriState
    smoking: TriState
    mi_history: TriState
    cocaine_use: TriState
    iv_drug_use: TriState
    other_drug_use: TriState
    insulin_use: TriState
    cdc_risk_hiv: TriState
    urine_protein: TriState
    antihypertensive_use: TriState
    arginine_use: TriState
    coronary_angiography: TriState
    legally_brain_dead: TriState
    interstitial_fibrosis: InterstitialFibrosis
    hospital_location: GeoPoint

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "clamp_time", _require_utc_minute(self.clamp_time, "clamp_time")
        )
        if not (math.isfinite(self.kdri) and self.kdri > 0):
            raise ValueError(f"kdri must be > 0, got {self.kdri}")
        if not (math.isfinite(self.kdpi) and 0.0 <= self.kdpi <= 100.0):
            raise ValueError(f"kdpi must be in [0, 100], got {self.kdpi}")
        for name in ("age", "creatinine", "peak_creatinine", "glomeruli_count"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v}")
        for name in ("height_cm", "weight_kg", "bmi", "blood_urea_nitrogen",
                     "death_mechanism_code"):
            _require_finite(getattr(self, name), name)

    @property
    def any_drug_use(self) -> bool:
        """Any of cocaine / IV / other drug use confirmed."""
        return TriState.YES in (self.cocaine_use, self.iv_drug_use, self.other_drug_use)


@dataclass(frozen=True)
class AcceptedKidneyRecord:
    """One kidney a center accepted in the past, as seen by rolling features."""

    accept_time: datetime
    kdri: float
    kdpi: float
    donor_age: float
    cit_minutes: float
    creatinine: float
    diabetes_flag: bool
    drug_flag: bool
    dcd_flag: bool
    iv_drug_flag: bool
    peak_creatinine: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "accept_time", _require_utc_minute(self.accept_time, "accept_time")
        )
        if not (math.isfinite(self.cit_minutes) and self.cit_minutes >= 0):
            raise ValueError(f"cit_minutes must be >= 0, got {self.cit_minutes}")
        for name in ("kdri", "kdpi", "donor_age", "creatinine", "peak_creatinine"):
            _require_finite(getattr(self, name), name)


@dataclass(frozen=True)
class Center:
    """A transplant center with its full time-stamped acceptance history.

    ``patient_count`` is a static per-dataset snapshot of listed patients.
    ``history`` must be sorted non-decreasing by ``accept_time``.
    """

    center_id: str
    location: GeoPoint
    patient_count: int
    state_gdp_per_capita: float
    history: tuple[AcceptedKidneyRecord, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.patient_count < 0:
            raise ValueError(f"patient_count must be >= 0, got {self.patient_count}")
        _require_finite(self.state_gdp_per_capita, "state_gdp_per_capita")
        object.__setattr__(self, "history", tuple(self.history))
        times = [r.accept_time for r in self.history]
        if any(a > b for a, b in zip(times, times[1:])):
            raise ValueError(f"center {self.center_id}: history not time-sorted")


@dataclass(frozen=True)
class Offer:
    """One center-level offer row after first-offer reduction.

    ``patient_offer_count`` is the number of listed patients at the center
    that received this organ's offer during the match run (>= 1).
    """

    donor_id: str
    center_id: str
    offer_time: datetime
    response: Response
    patient_offer_count: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "offer_time", _require_utc_minute(self.offer_time, "offer_time")
        )
        if self.patient_offer_count < 1:
            raise ValueError(
                f"patient_offer_count must be >= 1, got {self.patient_offer_count}"
            )


@dataclass(frozen=True)
class MatchRun:
    """The ordered offer sequence of one kidney (baseline = observed order)."""

    donor_id: str
    offers: tuple[Offer, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "offers", tuple(self.offers))

    @property
    def accept_index(self) -> int | None:
        """Baseline 0-based index of the accepting offer, or None (unused)."""
        for i, o in enumerate(self.offers):
            if o.response is Response.ACCEPT:
                return i
        return None

    @property
    def is_accepted(self) -> bool:
        return self.accept_index is not None


@dataclass(frozen=True)
class AirportIndex:
    """Medium/large airport locations used for distance features."""

    airports: tuple[tuple[GeoPoint, AirportClass], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "airports", tuple(self.airports))

    def of_class(self, cls: AirportClass) -> list[GeoPoint]:
        return [p for p, c in self.airports if c is cls]


@dataclass(frozen=True)
class Violation:
    """One match-run invariant violation (data, not a fault)."""

    offer_index: int
    rule: str
    message: str


def validate_match_run(run: MatchRun) -> list[Violation]:
    """Check MatchRun invariants; empty list iff the run is well-formed.

    Rules checked: offers sorted non-decreasing by offer_time (ties keep
    stable order), at most one Accept, at most one offer per center, all
    offers reference the run's donor.
    """
    violations: list[Violation] = []
    accept_seen = False
    seen_centers: set[str] = set()
    prev_time: datetime | None = None
    for i, offer in enumerate(run.offers):
        if offer.donor_id != run.donor_id:
            violations.append(
                Violation(i, "donor_mismatch",
                          f"offer {i} references donor {offer.donor_id!r}, "
                          f"run is for {run.donor_id!r}")
            )
        if prev_time is not None and offer.offer_time < prev_time:
            violations.append(
                Violation(i, "ordering",
                          f"offer {i} at {offer.offer_time.isoformat()} precedes "
                          f"offer {i - 1}")
            )
        prev_time = offer.offer_time
        if offer.center_id in seen_centers:
            violations.append(
                Violation(i, "duplicate_center",
                          f"center {offer.center_id!r} offered more than once")
            )
        seen_centers.add(offer.center_id)
        if offer.response is Response.ACCEPT:
            if accept_seen:
                violations.append(
                    Violation(i, "multiple_accepts",
                              "more than one Accept in a single match run")
                )
            accept_seen = True
    return violations


@dataclass(frozen=True)
class Dataset:
    """A full offer-level dataset: centers, donors, match runs, airports.

    ``provenance`` is ``"ingested"`` or ``"synthetic:<seed>"``.
    """

    centers: tuple[Center, ...]
    donors: tuple[Donor, ...]
    match_runs: tuple[MatchRun, ...]
    airports: AirportIndex
    provenance: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers", tuple(self.centers))
        object.__setattr__(self, "donors", tuple(self.donors))
        object.__setattr__(self, "match_runs", tuple(self.match_runs))
        donor_ids = {d.donor_id for d in self.donors}
        center_ids = {c.center_id for c in self.centers}
        if len(donor_ids) != len(self.donors):
            raise ValueError("duplicate donor_id in dataset")
        if len(center_ids) != len(self.centers):
            raise ValueError("duplicate center_id in dataset")
        for run in self.match_runs:
            if run.donor_id not in donor_ids:
                raise ValueError(f"match run references unknown donor {run.donor_id!r}")
            for o in run.offers:
                if o.center_id not in center_ids:
                    raise ValueError(
                        f"offer references unknown center {o.center_id!r}"
                    )

    def donor_by_id(self, donor_id: str) -> Donor:
        return self._donor_index()[donor_id]

    def center_by_id(self, center_id: str) -> Center:
        return self._center_index()[center_id]

    def _donor_index(self) -> dict[str, Donor]:
        cached = self.__dict__.get("_donor_idx")
        if cached is None:
            cached = {d.donor_id: d for d in self.donors}
            self.__dict__["_donor_idx"] = cached
        return cached

    def _center_index(self) -> dict[str, Center]:
        cached = self.__dict__.get("_center_idx")
        if cached is None:
            cached = {c.center_id: c for c in self.centers}
            self.__dict__["_center_idx"] = cached
        return cached

    def n_offers(self) -> int:
        return sum(len(r.offers) for r in self.match_runs)

    def n_accepted_offers(self) -> int:
        return sum(1 for r in self.match_runs if r.is_accepted)
