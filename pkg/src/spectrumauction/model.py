"""Domain model: channels, requests, conflict geometry, and time segmentation.

Channels carry disjoint license disks and an interference radius; requests
ask for a fixed time window at a point (or disk) location. Two requests
conflict on a channel when they are spatially too close for that channel's
interference radius and their time windows overlap. All constructions here
are pure functions of the instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "GeometryMode",
    "Disk",
    "Channel",
    "Request",
    "AuctionInstance",
    "ConflictStructure",
    "build_location_matrix",
    "build_conflict_tensor",
    "segment_timeline",
    "build_conflict_structure",
    "validate_instance",
    "check_allocation",
    "instance_to_dict",
    "instance_from_dict",
]


class GeometryMode(str, Enum):
    POINT = "point"
    AREA = "area"


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class Channel:
    """A channel: interference radius plus a set of disjoint license disks."""

    id: int
    interference_radius: float
    license_areas: tuple[Disk, ...]


@dataclass(frozen=True)
class Request:
    """A buyer's request for one channel during a fixed window [arrival, deadline).

    ``location`` is a point in point mode or a Disk in area mode. Times are
    integer minutes so slice arithmetic stays exact. ``valuation`` is the
    private value; ``bid`` is what the buyer reports.
    """

    id: int
    location: tuple[float, float] | Disk
    bid: float
    valuation: float
    arrival: int
    deadline: int
    duration: int


@dataclass(frozen=True)
class AuctionInstance:
    channels: tuple[Channel, ...]
    requests: tuple[Request, ...]
    horizon: int
    geometry_mode: GeometryMode

    @property
    def n(self) -> int:
        return len(self.requests)

    @property
    def m(self) -> int:
        return len(self.channels)

    def restricted_to(self, keep: Sequence[int]) -> "AuctionInstance":
        """New instance keeping only the requests at the given positions."""
        return AuctionInstance(
            channels=self.channels,
            requests=tuple(self.requests[i] for i in keep),
            horizon=self.horizon,
            geometry_mode=self.geometry_mode,
        )


def _request_point(req: Request) -> tuple[float, float]:
    if isinstance(req.location, Disk):
        return req.location.center
    return req.location


def _dist(p: tuple[float, float], q: tuple[float, float]) -> float:
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def build_location_matrix(instance: AuctionInstance) -> np.ndarray:
    """c[i, j]: request i sits inside channel j's license region.

    Point mode: the point lies in some license disk. Area mode: the request
    disk is fully contained in some license disk (a transmission area
    partially outside the license region is not sellable).
    """
    n, m = instance.n, instance.m
    c = np.zeros((n, m), dtype=bool)
    for i, req in enumerate(instance.requests):
        for j, ch in enumerate(instance.channels):
            for disk in ch.license_areas:
                if instance.geometry_mode is GeometryMode.AREA:
                    assert isinstance(req.location, Disk)
                    inside = (
                        _dist(req.location.center, disk.center) + req.location.radius
                        <= disk.radius
                    )
                else:
                    inside = _dist(_request_point(req), disk.center) <= disk.radius
                if inside:
                    c[i, j] = True
                    break
    return c


def _windows_overlap(a: Request, b: Request) -> bool:
    # Half-open windows [arrival, deadline): adjacent bookings do not conflict.
    return a.arrival < b.deadline and b.arrival < a.deadline


def build_conflict_tensor(instance: AuctionInstance) -> np.ndarray:
    """y[i, k, j]: requests i and k conflict on channel j.

    Spatial: point mode, distance < 2 * interference radius; area mode, the
    two request disks intersect. Temporal: half-open windows overlap. Both
    must hold.
    """
    n, m = instance.n, instance.m
    y = np.zeros((n, n, m), dtype=bool)
    for i in range(n):
        ri = instance.requests[i]
        for k in range(i + 1, n):
            rk = instance.requests[k]
            if not _windows_overlap(ri, rk):
                continue
            if instance.geometry_mode is GeometryMode.AREA:
                assert isinstance(ri.location, Disk) and isinstance(rk.location, Disk)
                spatial = _dist(ri.location.center, rk.location.center) < (
                    ri.location.radius + rk.location.radius
                )
                if spatial:
                    y[i, k, :] = True
                    y[k, i, :] = True
            else:
                d = _dist(_request_point(ri), _request_point(rk))
                for j, ch in enumerate(instance.channels):
                    if d < 2.0 * ch.interference_radius:
                        y[i, k, j] = True
                        y[k, i, j] = True
    return y


def segment_timeline(
    instance: AuctionInstance, location: Optional[np.ndarray] = None
) -> tuple[list[list[tuple[int, int]]], np.ndarray, np.ndarray]:
    """Cut each channel's [0, horizon] at the endpoints of its eligible requests.

    Returns (slices, first_slice, last_slice): per channel an ordered list of
    (start, end) slices, and for each (request, channel) with c true the
    inclusive slice-index range covering the request's window (-1 where
    ineligible). Boundaries are integers, so slice lengths are exact.
    """
    if location is None:
        location = build_location_matrix(instance)
    n, m = instance.n, instance.m
    slices: list[list[tuple[int, int]]] = []
    first = np.full((n, m), -1, dtype=int)
    last = np.full((n, m), -1, dtype=int)
    for j in range(m):
        bounds = {0, instance.horizon}
        for i in range(n):
            if location[i, j]:
                bounds.add(instance.requests[i].arrival)
                bounds.add(instance.requests[i].deadline)
        ordered = sorted(bounds)
        ch_slices = list(zip(ordered[:-1], ordered[1:]))
        slices.append(ch_slices)
        starts = [s for s, _ in ch_slices]
        ends = [e for _, e in ch_slices]
        for i in range(n):
            if location[i, j]:
                req = instance.requests[i]
                first[i, j] = starts.index(req.arrival)
                last[i, j] = ends.index(req.deadline)
    return slices, first, last


@dataclass(frozen=True)
class ConflictStructure:
    """Location matrix, conflict tensor, and per-channel time slices."""

    location: np.ndarray  # (n, m) bool
    conflict: np.ndarray  # (n, n, m) bool
    slices: list[list[tuple[int, int]]]  # per channel
    first_slice: np.ndarray  # (n, m) int, -1 where ineligible
    last_slice: np.ndarray  # (n, m) int

    def slice_lengths(self, j: int) -> np.ndarray:
        return np.array([e - s for s, e in self.slices[j]], dtype=float)

    def window_slices(self, i: int, j: int) -> range:
        if self.first_slice[i, j] < 0:
            return range(0)
        return range(self.first_slice[i, j], self.last_slice[i, j] + 1)


def build_conflict_structure(instance: AuctionInstance) -> ConflictStructure:
    location = build_location_matrix(instance)
    conflict = build_conflict_tensor(instance)
    slices, first, last = segment_timeline(instance, location)
    return ConflictStructure(location, conflict, slices, first, last)


def validate_instance(instance: AuctionInstance) -> list[str]:
    """Every violated invariant, as one human-readable line each.

    An empty report means the instance is valid.
    """
    report: list[str] = []
    if instance.horizon <= 0:
        report.append(f"horizon must be positive, got {instance.horizon}")
    for ch in instance.channels:
        if ch.interference_radius <= 0:
            report.append(f"channel {ch.id}: interference radius must be positive")
        for disk in ch.license_areas:
            if disk.radius <= 0:
                report.append(f"channel {ch.id}: license disk radius must be positive")
        areas = ch.license_areas
        for a in range(len(areas)):
            for b in range(a + 1, len(areas)):
                if _dist(areas[a].center, areas[b].center) < areas[a].radius + areas[b].radius:
                    report.append(f"channel {ch.id}: license disks {a} and {b} overlap")
    for req in instance.requests:
        if not (0 <= req.arrival < req.deadline <= instance.horizon):
            report.append(
                f"request {req.id}: window [{req.arrival}, {req.deadline}) must lie inside "
                f"[0, {instance.horizon}] with arrival < deadline"
            )
        if req.duration <= 0:
            report.append(f"request {req.id}: duration must be positive")
        if req.deadline - req.arrival != req.duration:
            report.append(
                f"request {req.id}: fixed-interval rule requires deadline - arrival = duration "
                f"({req.deadline} - {req.arrival} != {req.duration})"
            )
        if req.bid < 0:
            report.append(f"request {req.id}: bid must be nonnegative")
        if req.valuation < 0:
            report.append(f"request {req.id}: valuation must be nonnegative")
        is_area = isinstance(req.location, Disk)
        if is_area and instance.geometry_mode is GeometryMode.POINT:
            report.append(f"request {req.id}: area location in a point-model instance")
        if not is_area and instance.geometry_mode is GeometryMode.AREA:
            report.append(f"request {req.id}: point location in an area-model instance")
        if is_area and req.location.radius <= 0:
            report.append(f"request {req.id}: request disk radius must be positive")
        for t in (req.arrival, req.deadline, req.duration):
            if int(t) != t:
                report.append(f"request {req.id}: times must be integer minutes")
                break
    return report


def check_allocation(
    instance: AuctionInstance,
    structure: ConflictStructure,
    assignment: Sequence[Optional[int]],
) -> list[str]:
    """Feasibility report for an integral allocation (empty means feasible).

    Checks one channel per winner (by construction of ``assignment``),
    channel eligibility, pairwise conflict-freeness of co-channel winners,
    and exact coverage of each winner's window by that channel's slices.
    """
    report: list[str] = []
    n = instance.n
    if len(assignment) != n:
        return [f"assignment length {len(assignment)} != {n} requests"]
    winners = [(i, j) for i, j in enumerate(assignment) if j is not None]
    for i, j in winners:
        if not (0 <= j < instance.m):
            report.append(f"request {instance.requests[i].id}: unknown channel {j}")
            continue
        if not structure.location[i, j]:
            report.append(
                f"request {instance.requests[i].id}: not eligible on channel "
                f"{instance.channels[j].id}"
            )
            continue
        req = instance.requests[i]
        covered = sum(
            structure.slices[j][l][1] - structure.slices[j][l][0]
            for l in structure.window_slices(i, j)
        )
        if covered != req.duration:
            report.append(
                f"request {req.id}: covered {covered} minutes on channel "
                f"{instance.channels[j].id}, needs {req.duration}"
            )
    for a in range(len(winners)):
        for b in range(a + 1, len(winners)):
            i, j = winners[a]
            k, jk = winners[b]
            if j == jk and structure.conflict[i, k, j]:
                report.append(
                    f"requests {instance.requests[i].id} and {instance.requests[k].id} "
                    f"conflict on channel {instance.channels[j].id}"
                )
    return report


def instance_to_dict(instance: AuctionInstance) -> dict:
    """Instance as the JSON-schema dict consumed by the CLI."""
    channels = [
        {
            "id": ch.id,
            "interference_radius": ch.interference_radius,
            "license_areas": [
                {"center": [d.center[0], d.center[1]], "radius": d.radius}
                for d in ch.license_areas
            ],
        }
        for ch in instance.channels
    ]
    requests = []
    for req in instance.requests:
        if isinstance(req.location, Disk):
            loc = {
                "area": {
                    "center": [req.location.center[0], req.location.center[1]],
                    "radius": req.location.radius,
                }
            }
        else:
            loc = {"point": [req.location[0], req.location[1]]}
        requests.append(
            {
                "id": req.id,
                "location": loc,
                "bid": req.bid,
                "valuation": req.valuation,
                "arrival": req.arrival,
                "deadline": req.deadline,
                "duration": req.duration,
            }
        )
    return {
        "horizon": instance.horizon,
        "geometry_mode": instance.geometry_mode.value,
        "channels": channels,
        "requests": requests,
    }


def instance_from_dict(data: dict) -> AuctionInstance:
    """Parse the instance JSON schema; raises ValueError naming the bad field."""
    try:
        mode = GeometryMode(data["geometry_mode"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"geometry_mode must be 'point' or 'area': {exc}") from exc
    try:
        channels = tuple(
            Channel(
                id=int(ch["id"]),
                interference_radius=float(ch["interference_radius"]),
                license_areas=tuple(
                    Disk(center=(float(d["center"][0]), float(d["center"][1])),
                         radius=float(d["radius"]))
                    for d in ch["license_areas"]
                ),
            )
            for ch in data["channels"]
        )
        requests = []
        for r in data["requests"]:
            loc_field = r["location"]
            if "point" in loc_field:
                loc: tuple[float, float] | Disk = (
                    float(loc_field["point"][0]),
                    float(loc_field["point"][1]),
                )
            elif "area" in loc_field:
                a = loc_field["area"]
                loc = Disk(center=(float(a["center"][0]), float(a["center"][1])),
                           radius=float(a["radius"]))
            else:
                raise ValueError(f"request {r.get('id')}: location needs 'point' or 'area'")
            requests.append(
                Request(
                    id=int(r["id"]),
                    location=loc,
                    bid=float(r["bid"]),
                    valuation=float(r["valuation"]),
                    arrival=int(r["arrival"]),
                    deadline=int(r["deadline"]),
                    duration=int(r["duration"]),
                )
            )
        return AuctionInstance(
            channels=channels,
            requests=tuple(requests),
            horizon=int(data["horizon"]),
            geometry_mode=mode,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed instance JSON: missing or bad field {exc}") from exc
