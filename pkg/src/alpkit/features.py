"""Feature engineering for (donor, center, offer-time) triples.

The canonical feature-name list below is the cross-module contract: the
CSV export header, the learner input order, and the explanation output
order all follow it.  Rolling history features use half-open windows
``[as_of - W, as_of)`` so the offer being featurized can never count its
own outcome.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Callable, Iterable, Sequence

import numpy as np

from .domain import (
    AcceptedKidneyRecord,
    AirportClass,
    AirportIndex,
    BloodType,
    CauseOfDeath,
    Center,
    Dataset,
    DiabetesHistory,
    Donor,
    Ethnicity,
    Gender,
    GeoPoint,
    InsulinDependence,
    InterstitialFibrosis,
    MatchRun,
    Offer,
    SeroStatus,
    SeroStatusOrOther,
    TimeOfDay,
    TriState,
)

EARTH_RADIUS_MILES = 3958.8

DAYS_PER_YEAR = 365

# Fallback center-history averages when the whole dataset has no
# acceptance records (median reference donor, mid-range age).
DEFAULT_FALLBACK_KDRI = 1.0
DEFAULT_FALLBACK_AGE = 50.0

CONTINUOUS_FEATURES: tuple[str, ...] = (
    "distance_donor_to_center_miles",
    "cold_ischemia_time_minutes",
    "kidney_donor_risk_index",
    "donor_age_years",
    "donor_height_cm",
    "donor_weight_kg",
    "donor_creatinine_mg_dl",
    "center_state_gdp_per_capita_usd",
    "donor_bmi",
    "donor_blood_urea_nitrogen_mg_dl",
    "donor_death_mechanism_code",
    "kidney_glomeruli_count",
    "higher_cit_acceptances_1y",
    "higher_cit_acceptances_2y",
    "higher_cit_acceptances_3y",
    "higher_kdri_acceptances_1y",
    "higher_kdri_acceptances_2y",
    "higher_kdri_acceptances_3y",
    "center_distance_to_medium_airport_miles",
    "center_distance_to_large_airport_miles",
    "center_patient_count",
    "donor_distance_to_medium_airport_miles",
    "donor_distance_to_large_airport_miles",
    "center_acceptance_rate",
    "center_avg_accepted_kdri",
    "center_avg_accepted_age_years",
    "older_kidney_acceptances_2y",
    "higher_creatinine_acceptances_2y",
    "diabetes_related_acceptances_2y",
    "drug_related_acceptances_2y",
    "dcd_acceptances_2y",
    "kap_eligible_acceptances_2y",
)

# (donor field, enum) pairs in canonical order; each expands to a one-hot
# block named "<field>=<level>" whose entries sum to exactly 1 per row.
CATEGORICAL_FIELDS: tuple[tuple[str, type], ...] = (
    ("blood_type", BloodType),
    ("ethnicity", Ethnicity),
    ("gender", Gender),
    ("cause_of_death", CauseOfDeath),
    ("diabetes_history", DiabetesHistory),
    ("insulin_dependent", InsulinDependence),
    ("hypertension", TriState),
    ("cancer_history", TriState),
    ("cmv", SeroStatus),
    ("hbv_surface_antigen", SeroStatusOrOther),
    ("hbv_core_antibody", SeroStatusOrOther),
    ("hcv_antibody", SeroStatusOrOther),
    ("hcv_nat", SeroStatusOrOther),
    ("tattoos", TriState),
    ("dcd", TriState),
    ("smoking", TriState),
    ("mi_history", TriState),
    ("cocaine_use", TriState),
    ("iv_drug_use", TriState),
    ("other_drug_use", TriState),
    ("insulin_use", TriState),
    ("cdc_risk_hiv", TriState),
    ("urine_protein", TriState),
    ("antihypertensive_use", TriState),
    ("arginine_use", TriState),
    ("coronary_angiography", TriState),
    ("legally_brain_dead", TriState),
    ("interstitial_fibrosis", InterstitialFibrosis),
)

TIME_OF_DAY_FIELD = "time_of_day"


def feature_names() -> list[str]:
    """The canonical ordered feature-name list (stable across versions)."""
    names = list(CONTINUOUS_FEATURES)
    for field_name, enum_cls in CATEGORICAL_FIELDS:
        names.extend(f"{field_name}={level.value}" for level in enum_cls)
    names.extend(f"{TIME_OF_DAY_FIELD}={level.value}" for level in TimeOfDay)
    return names


@dataclass(frozen=True)
class FeatureVector:
    """A named, ordered, finite numeric encoding of one offer."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise ValueError("names and values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


@dataclass(frozen=True)
class HistoryWindow:
    """A rolling lookback of 1, 2, or 3 years."""

    years: int

    def __post_init__(self) -> None:
        if self.years not in (1, 2, 3):
            raise ValueError(f"window years must be 1, 2, or 3, got {self.years}")

    @property
    def delta(self) -> timedelta:
        return timedelta(days=DAYS_PER_YEAR * self.years)


def compute_cit(clamp_time: datetime, offer_time: datetime) -> int:
    """Cold-ischemia time in whole minutes, floored at zero.

    Offers logged before the clamp (the source data contains them) yield 0
    rather than a negative duration.
    """
    delta = offer_time - clamp_time
    minutes = int(delta.total_seconds() // 60)
    return max(0, minutes)


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in miles (Earth radius 3,958.8 mi)."""
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def _haversine_miles_array(lat: np.ndarray, lon: np.ndarray, p: GeoPoint) -> np.ndarray:
    """Vectorized haversine from arrays of radians to a single point."""
    plat, plon = math.radians(p.lat), math.radians(p.lon)
    h = (
        np.sin((plat - lat) / 2.0) ** 2
        + np.cos(lat) * np.cos(plat) * np.sin((plon - lon) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def nearest_airport_miles(loc: GeoPoint, idx: AirportIndex, cls: AirportClass) -> float:
    """Distance to the closest airport of the given class."""
    points = idx.of_class(cls)
    if not points:
        raise ValueError(f"airport index has no {cls.value} airports")
    return min(haversine_miles(loc, p) for p in points)


def kap_qualifies(historical: AcceptedKidneyRecord, offered: Donor) -> bool:
    """Whether a past acceptance qualifies the center for the offered kidney.

    All six thresholds must hold: historical KDPI at least the offered
    KDPI, age at least 90% of the offered age, peak creatinine at least
    75% of the offered peak, and for each of diabetes, IV drug use, and
    DCD: if the offered donor has it, the historical one must too.
    """
    if historical.kdpi < offered.kdpi:
        return False
    if historical.donor_age < 0.9 * offered.age:
        return False
    if historical.peak_creatinine < 0.75 * offered.peak_creatinine:
        return False
    if offered.diabetes_history.is_yes and not historical.diabetes_flag:
        return False
    if offered.iv_drug_use is TriState.YES and not historical.iv_drug_flag:
        return False
    if offered.dcd is TriState.YES and not historical.dcd_flag:
        return False
    return True


# Predicate factories for rolling_count.  "Higher"/"older" comparisons are
# strict: ties with the offered kidney do not count.

def higher_cit(offer_cit: float) -> Callable[[AcceptedKidneyRecord], bool]:
    return lambda r: r.cit_minutes > offer_cit


def higher_kdri(offer_kdri: float) -> Callable[[AcceptedKidneyRecord], bool]:
    return lambda r: r.kdri > offer_kdri


def older(offer_age: float) -> Callable[[AcceptedKidneyRecord], bool]:
    return lambda r: r.donor_age > offer_age


def higher_creatinine(offer_creatinine: float) -> Callable[[AcceptedKidneyRecord], bool]:
    return lambda r: r.creatinine > offer_creatinine


def diabetes_related(r: AcceptedKidneyRecord) -> bool:
    return r.diabetes_flag


def drug_related(r: AcceptedKidneyRecord) -> bool:
    return r.drug_flag


def dcd(r: AcceptedKidneyRecord) -> bool:
    return r.dcd_flag


def kap_eligible(offered: Donor) -> Callable[[AcceptedKidneyRecord], bool]:
    return lambda r: kap_qualifies(r, offered)


def _window_slice(
    history: Sequence[AcceptedKidneyRecord],
    times: Sequence[datetime],
    as_of: datetime,
    window: HistoryWindow,
) -> Sequence[AcceptedKidneyRecord]:
    lo = bisect_left(times, as_of - window.delta)
    hi = bisect_left(times, as_of)
    return history[lo:hi]


def rolling_count(
    center: Center,
    as_of: datetime,
    window: HistoryWindow,
    predicate: Callable[[AcceptedKidneyRecord], bool],
) -> int:
    """Count history records in ``[as_of - window, as_of)`` satisfying ``predicate``."""
    times = [r.accept_time for r in center.history]
    return sum(1 for r in _window_slice(center.history, times, as_of, window) if predicate(r))


def center_rate_stats(
    center: Center,
    as_of: datetime,
    offers_received_count: int,
    fallback_kdri: float = DEFAULT_FALLBACK_KDRI,
    fallback_age: float = DEFAULT_FALLBACK_AGE,
) -> tuple[float, float, float]:
    """(acceptance rate, avg accepted KDRI, avg accepted age) over a 2y window.

    The rate denominator is the number of offers the center received in the
    window (0 denominator yields rate 0).  Centers with no accepted kidneys
    in the window fall back to the supplied dataset-wide averages rather
    than 0, which would fabricate an extreme picky-center signal.
    """
    window = HistoryWindow(2)
    times = [r.accept_time for r in center.history]
    accepted = _window_slice(center.history, times, as_of, window)
    n_acc = len(accepted)
    rate = n_acc / offers_received_count if offers_received_count > 0 else 0.0
    if n_acc > 0:
        avg_kdri = sum(r.kdri for r in accepted) / n_acc
        avg_age = sum(r.donor_age for r in accepted) / n_acc
    else:
        avg_kdri = fallback_kdri
        avg_age = fallback_age
    return rate, avg_kdri, avg_age


def time_of_day_bucket(offer_time: datetime, tz_offset_minutes: int = 0) -> TimeOfDay:
    """4-hour local-time buckets; the reference zone is a fixed offset per dataset."""
    local = offer_time.astimezone(timezone.utc) + timedelta(minutes=tz_offset_minutes)
    bucket = local.hour // 4
    return (
        TimeOfDay.LATE_NIGHT,
        TimeOfDay.EARLY_MORNING,
        TimeOfDay.MORNING,
        TimeOfDay.NOON,
        TimeOfDay.EVE,
        TimeOfDay.NIGHT,
    )[bucket]


class FeatureBuilder:
    """Precomputed dataset context for building feature vectors.

    Holds per-center sorted history and offer-time arrays (for rolling
    counts and rate denominators), airport coordinate arrays, and the
    dataset-wide fallback averages.  Instances are read-only after
    construction; feature building is pure and safe to parallelize over
    offers.
    """

    def __init__(self, dataset: Dataset, tz_offset_minutes: int = 0):
        self.dataset = dataset
        self.tz_offset_minutes = tz_offset_minutes
        self.names: tuple[str, ...] = tuple(feature_names())
        self._name_pos = {n: i for i, n in enumerate(self.names)}

        self._center_history: dict[str, tuple[list[datetime], list[AcceptedKidneyRecord]]] = {}
        for c in dataset.centers:
            self._center_history[c.center_id] = (
                [r.accept_time for r in c.history],
                list(c.history),
            )

        self._center_offer_times: dict[str, list[datetime]] = {
            c.center_id: [] for c in dataset.centers
        }
        for run in dataset.match_runs:
            for o in run.offers:
                self._center_offer_times[o.center_id].append(o.offer_time)
        for v in self._center_offer_times.values():
            v.sort()

        all_records = [r for c in dataset.centers for r in c.history]
        if all_records:
            self.fallback_kdri = sum(r.kdri for r in all_records) / len(all_records)
            self.fallback_age = sum(r.donor_age for r in all_records) / len(all_records)
        else:
            self.fallback_kdri = DEFAULT_FALLBACK_KDRI
            self.fallback_age = DEFAULT_FALLBACK_AGE

        medium = [p for p, c in dataset.airports.airports if c is AirportClass.MEDIUM]
        large = [p for p, c in dataset.airports.airports if c is AirportClass.LARGE]
        self._medium_lat = np.radians([p.lat for p in medium])
        self._medium_lon = np.radians([p.lon for p in medium])
        self._large_lat = np.radians([p.lat for p in large])
        self._large_lon = np.radians([p.lon for p in large])

        self._nearest_cache: dict[tuple[float, float, AirportClass], float] = {}
        self._donor_static_cache: dict[str, np.ndarray] = {}

    def index_of(self, name: str) -> int:
        return self._name_pos[name]

    def nearest_airport(self, loc: GeoPoint, cls: AirportClass) -> float:
        key = (loc.lat, loc.lon, cls)
        hit = self._nearest_cache.get(key)
        if hit is not None:
            return hit
        lat = self._medium_lat if cls is AirportClass.MEDIUM else self._large_lat
        lon = self._medium_lon if cls is AirportClass.MEDIUM else self._large_lon
        if lat.size == 0:
            raise ValueError(f"airport index has no {cls.value} airports")
        d = float(_haversine_miles_array(lat, lon, loc).min())
        self._nearest_cache[key] = d
        return d

    def offers_received(self, center_id: str, as_of: datetime, window: HistoryWindow) -> int:
        times = self._center_offer_times[center_id]
        lo = bisect_left(times, as_of - window.delta)
        hi = bisect_left(times, as_of)
        return hi - lo

    def rolling(self, center_id: str, as_of: datetime, window: HistoryWindow,
                predicate: Callable[[AcceptedKidneyRecord], bool]) -> int:
        times, records = self._center_history[center_id]
        lo = bisect_left(times, as_of - window.delta)
        hi = bisect_left(times, as_of)
        return sum(1 for r in records[lo:hi] if predicate(r))

    def _donor_static(self, donor: Donor) -> np.ndarray:
        """Donor-only features and one-hot blocks, shared across a match run."""
        cached = self._donor_static_cache.get(donor.donor_id)
        if cached is not None:
            return cached
        v = np.zeros(len(self.names))
        pos = self._name_pos
        v[pos["kidney_donor_risk_index"]] = donor.kdri
        v[pos["donor_age_years"]] = donor.age
        v[pos["donor_height_cm"]] = donor.height_cm
        v[pos["donor_weight_kg"]] = donor.weight_kg
        v[pos["donor_creatinine_mg_dl"]] = donor.creatinine
        v[pos["donor_bmi"]] = donor.bmi
        v[pos["donor_blood_urea_nitrogen_mg_dl"]] = donor.blood_urea_nitrogen
        v[pos["donor_death_mechanism_code"]] = donor.death_mechanism_code
        v[pos["kidney_glomeruli_count"]] = donor.glomeruli_count
        v[pos["donor_distance_to_medium_airport_miles"]] = self.nearest_airport(
            donor.hospital_location, AirportClass.MEDIUM
        )
        v[pos["donor_distance_to_large_airport_miles"]] = self.nearest_airport(
            donor.hospital_location, AirportClass.LARGE
        )
        for field_name, _enum_cls in CATEGORICAL_FIELDS:
            level = getattr(donor, field_name)
            v[pos[f"{field_name}={level.value}"]] = 1.0
        self._donor_static_cache[donor.donor_id] = v
        return v

    def build(self, donor: Donor, center: Center, offer_time: datetime) -> FeatureVector:
        """Build the full canonical vector for one (donor, center, time) triple."""
        v = self._donor_static(donor).copy()
        pos = self._name_pos

        v[pos["distance_donor_to_center_miles"]] = haversine_miles(
            donor.hospital_location, center.location
        )
        cit = compute_cit(donor.clamp_time, offer_time)
        v[pos["cold_ischemia_time_minutes"]] = cit
        v[pos["center_state_gdp_per_capita_usd"]] = center.state_gdp_per_capita
        v[pos["center_patient_count"]] = center.patient_count
        v[pos["center_distance_to_medium_airport_miles"]] = self.nearest_airport(
            center.location, AirportClass.MEDIUM
        )
        v[pos["center_distance_to_large_airport_miles"]] = self.nearest_airport(
            center.location, AirportClass.LARGE
        )

        cid = center.center_id
        for years, name in ((1, "higher_cit_acceptances_1y"),
                            (2, "higher_cit_acceptances_2y"),
                            (3, "higher_cit_acceptances_3y")):
            v[pos[name]] = self.rolling(cid, offer_time, HistoryWindow(years), higher_cit(cit))
        for years, name in ((1, "higher_kdri_acceptances_1y"),
                            (2, "higher_kdri_acceptances_2y"),
                            (3, "higher_kdri_acceptances_3y")):
            v[pos[name]] = self.rolling(
                cid, offer_time, HistoryWindow(years), higher_kdri(donor.kdri)
            )
        w2 = HistoryWindow(2)
        v[pos["older_kidney_acceptances_2y"]] = self.rolling(cid, offer_time, w2, older(donor.age))
        v[pos["higher_creatinine_acceptances_2y"]] = self.rolling(
            cid, offer_time, w2, higher_creatinine(donor.creatinine)
        )
        v[pos["diabetes_related_acceptances_2y"]] = self.rolling(cid, offer_time, w2, diabetes_related)
        v[pos["drug_related_acceptances_2y"]] = self.rolling(cid, offer_time, w2, drug_related)
        v[pos["dcd_acceptances_2y"]] = self.rolling(cid, offer_time, w2, dcd)
        v[pos["kap_eligible_acceptances_2y"]] = self.rolling(cid, offer_time, w2, kap_eligible(donor))

        rate, avg_kdri, avg_age = center_rate_stats(
            center, offer_time, self.offers_received(cid, offer_time, w2),
            self.fallback_kdri, self.fallback_age,
        )
        v[pos["center_acceptance_rate"]] = rate
        v[pos["center_avg_accepted_kdri"]] = avg_kdri
        v[pos["center_avg_accepted_age_years"]] = avg_age

        bucket = time_of_day_bucket(offer_time, self.tz_offset_minutes)
        v[pos[f"{TIME_OF_DAY_FIELD}={bucket.value}"]] = 1.0
        return FeatureVector(self.names, v)

    def build_for_run(self, run: MatchRun) -> np.ndarray:
        """Feature matrix for every offer of one match run (rows in baseline order)."""
        donor = self.dataset.donor_by_id(run.donor_id)
        rows = [
            self.build(donor, self.dataset.center_by_id(o.center_id), o.offer_time).values
            for o in run.offers
        ]
        return np.vstack(rows) if rows else np.zeros((0, len(self.names)))

    def build_matrix(
        self, runs: Iterable[MatchRun] | None = None
    ) -> tuple[np.ndarray, np.ndarray, list[tuple[str, str]]]:
        """(X, y, keys) over all offers of ``runs`` (default: whole dataset).

        ``y`` is 1 for accepted offers; ``keys`` holds (donor_id, center_id)
        per row, in dataset order.
        """
        if runs is None:
            runs = self.dataset.match_runs
        blocks: list[np.ndarray] = []
        labels: list[int] = []
        keys: list[tuple[str, str]] = []
        for run in runs:
            if not run.offers:
                continue
            blocks.append(self.build_for_run(run))
            for o in run.offers:
                labels.append(1 if o.response.value == "Accept" else 0)
                keys.append((o.donor_id, o.center_id))
        if not blocks:
            return np.zeros((0, len(self.names))), np.zeros(0, dtype=int), []
        return np.vstack(blocks), np.asarray(labels, dtype=int), keys


def build_feature_vector(
    donor: Donor, center: Center, offer: Offer, context: FeatureBuilder
) -> FeatureVector:
    """Convenience wrapper: the canonical vector for one offer row."""
    return context.build(donor, center, offer.offer_time)
