"""Gridded post-processing: gradients, normalization, max tracking, and
grid-to-station bilinear interpolation.

Grids are regular lat/lon rasters with strictly monotone axes in degrees and
an optional validity mask (ocean cells, for instance, are simply marked
invalid). Gradient distances are computed in raw degrees, matching the
neighbor formula used for the gust-gradient maps, so values depend on the
grid convention rather than on geodesic distance.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputWarning, DomainError, UsageError
from .fileio import atomic_open, fmt


@dataclass
class GridField:
    """One scalar per cell on a regular lat/lon raster.

    ``valid`` is True where the cell participates in statistics; invalid
    cells are excluded from maxima, normalization, and interpolation.
    """

    lats: np.ndarray  # [rows], strictly monotone, degrees
    lons: np.ndarray  # [cols], strictly monotone, degrees
    values: np.ndarray  # [rows, cols]
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.lats = np.asarray(self.lats, dtype=float)
        self.lons = np.asarray(self.lons, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for name, axis in (("lats", self.lats), ("lons", self.lons)):
            if axis.ndim != 1 or axis.size < 1:
                raise UsageError(f"{name} must be a nonempty 1-D axis")
            steps = np.diff(axis)
            if axis.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
                raise UsageError(f"{name} must be strictly monotone")
        if self.values.shape != (self.lats.size, self.lons.size):
            raise UsageError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.lats.size}, {self.lons.size})"
            )
        if self.valid is None:
            self.valid = np.ones(self.values.shape, dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.values.shape:
                raise UsageError("validity mask shape does not match values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values: np.ndarray, valid: np.ndarray | None = None) -> "GridField":
        return GridField(
            lats=self.lats,
            lons=self.lons,
            values=values,
            valid=self.valid if valid is None else valid,
        )


def spatial_gradient(grid: GridField) -> GridField:
    """Mean absolute value difference to the four nearest neighbors, each
    divided by the degree distance to that neighbor.

    Boundary cells average over their existing neighbors; invalid neighbors
    are skipped and a cell with no valid neighbor (or invalid itself) comes
    out masked.
    """
    rows, cols = grid.shape
    if rows < 2 or cols < 2:
        raise UsageError("spatial gradient needs a grid of at least 2x2 cells")
    v = grid.values
    ok = grid.valid
    total = np.zeros_like(v)
    count = np.zeros_like(v)

    d_lat = np.abs(np.diff(grid.lats))[:, None]  # distance row i <-> i+1
    pair = np.abs(v[1:, :] - v[:-1, :]) / d_lat
    pair_ok = ok[1:, :] & ok[:-1, :]
    contrib = np.where(pair_ok, pair, 0.0)
    total[:-1, :] += contrib
    count[:-1, :] += pair_ok
    total[1:, :] += contrib
    count[1:, :] += pair_ok

    d_lon = np.abs(np.diff(grid.lons))[None, :]  # distance col j <-> j+1
    pair = np.abs(v[:, 1:] - v[:, :-1]) / d_lon
    pair_ok = ok[:, 1:] & ok[:, :-1]
    contrib = np.where(pair_ok, pair, 0.0)
    total[:, :-1] += contrib
    count[:, :-1] += pair_ok
    total[:, 1:] += contrib
    count[:, 1:] += pair_ok

    out_valid = ok & (count > 0)
    out = np.full_like(v, np.nan)
    np.divide(total, count, out=out, where=out_valid)
    return grid.with_values(out, valid=out_valid)


def minmax_normalize(values):
    """Affine rescale to [0, 1]: (V - Vmin) / (Vmax - Vmin).

    Accepts a plain array or a :class:`GridField`; for a field the extrema
    come from valid cells only. A constant input has no well-defined scaling
    and raises.
    """
    if isinstance(values, GridField):
        masked = values.values[values.valid]
        if masked.size == 0:
            raise UsageError("cannot normalize a fully masked field")
        lo, hi = float(masked.min()), float(masked.max())
        if hi == lo:
            raise UsageError("cannot min-max normalize a constant field")
        out = np.full_like(values.values, np.nan)
        out[values.valid] = (values.values[values.valid] - lo) / (hi - lo)
        return values.with_values(out)
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise UsageError("cannot normalize an empty array")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        raise UsageError("cannot min-max normalize a constant input")
    return (x - lo) / (hi - lo)


@dataclass
class TrackPoint:
    """Location and value of the spatial maximum at one time step."""

    time: np.datetime64
    value: float
    lat: float
    lon: float
    row: int
    col: int


def track_spatial_max(series) -> list[TrackPoint]:
    """Per-hour maximum over unmasked cells, ties broken row-major first.

    ``series`` is an iterable of ``(time, GridField)`` pairs; hours with no
    valid cell are skipped with a warning.
    """
    track: list[TrackPoint] = []
    n_seen = 0
    for time, grid in series:
        n_seen += 1
        if not np.any(grid.valid):
            warnings.warn(f"hour {time}: all cells masked, skipped", DegenerateInputWarning)
            continue
        masked = np.where(grid.valid, grid.values, -np.inf)
        flat = int(np.argmax(masked))
        r, c = np.unravel_index(flat, grid.shape)
        track.append(
            TrackPoint(
                time=np.datetime64(time, "s"),
                value=float(grid.values[r, c]),
                lat=float(grid.lats[r]),
                lon=float(grid.lons[c]),
                row=int(r),
                col=int(c),
            )
        )
    if n_seen == 0:
        raise UsageError("track_spatial_max needs a nonempty series")
    return track


def alignment_fraction(
    track_a: list[TrackPoint], track_b: list[TrackPoint], max_cell_distance: int
) -> float:
    """Fraction of common hours whose two argmax cells are within k cells.

    Distance is the Chebyshev cell distance max(|drow|, |dcol|), so k=0
    requires identical cells.
    """
    if max_cell_distance < 0:
        raise UsageError("max_cell_distance must be >= 0")
    b_by_time = {p.time: p for p in track_b}
    hits = 0
    common = 0
    for p in track_a:
        q = b_by_time.get(p.time)
        if q is None:
            continue
        common += 1
        if max(abs(p.row - q.row), abs(p.col - q.col)) <= max_cell_distance:
            hits += 1
    if common == 0:
        raise UsageError("tracks share no common time steps")
    return hits / common


@dataclass
class StationSet:
    """Station identities and coordinates for grid-to-point interpolation."""

    ids: np.ndarray
    lats: np.ndarray
    lons: np.ndarray
    elevations: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids)
        self.lats = np.asarray(self.lats, dtype=float)
        self.lons = np.asarray(self.lons, dtype=float)
        if not (self.ids.shape == self.lats.shape == self.lons.shape):
            raise UsageError("station ids/lats/lons must have equal lengths")

    def __len__(self) -> int:
        return len(self.ids)


def _ascending(grid: GridField) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    lats, lons, values, valid = grid.lats, grid.lons, grid.values, grid.valid
    if lats.size > 1 and lats[1] < lats[0]:
        lats, values, valid = lats[::-1], values[::-1, :], valid[::-1, :]
    if lons.size > 1 and lons[1] < lons[0]:
        lons, values, valid = lons[::-1], values[:, ::-1], valid[:, ::-1]
    return lats, lons, values, valid


def bilinear_to_stations(
    grid: GridField, stations: StationSet
) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate a field to station coordinates with bilinear weights.

    Returns ``(values, fallback)`` where ``fallback`` marks stations whose
    enclosing cell quad contained an invalid cell and the nearest valid cell
    value was used instead. Stations outside the grid hull raise a domain
    error naming them.
    """
    lats, lons, values, valid = _ascending(grid)
    if lats.size < 2 or lons.size < 2:
        raise UsageError("bilinear interpolation needs a grid of at least 2x2 cells")
    out = np.empty(len(stations))
    fallback = np.zeros(len(stations), dtype=bool)
    outside: list[str] = []
    valid_cells = np.argwhere(valid)
    for k in range(len(stations)):
        slat = stations.lats[k]
        slon = stations.lons[k]
        if not (lats[0] <= slat <= lats[-1] and lons[0] <= slon <= lons[-1]):
            outside.append(str(stations.ids[k]))
            continue
        i1 = int(np.clip(np.searchsorted(lats, slat, side="right"), 1, lats.size - 1))
        j1 = int(np.clip(np.searchsorted(lons, slon, side="right"), 1, lons.size - 1))
        i0, j0 = i1 - 1, j1 - 1
        corners_valid = valid[i0, j0] & valid[i0, j1] & valid[i1, j0] & valid[i1, j1]
        if not corners_valid:
            if valid_cells.size == 0:
                raise DomainError("grid has no valid cells to fall back on")
            d2 = (lats[valid_cells[:, 0]] - slat) ** 2 + (lons[valid_cells[:, 1]] - slon) ** 2
            nearest = valid_cells[int(np.argmin(d2))]
            out[k] = values[nearest[0], nearest[1]]
            fallback[k] = True
            continue
        t = (slat - lats[i0]) / (lats[i1] - lats[i0])
        u = (slon - lons[j0]) / (lons[j1] - lons[j0])
        out[k] = (1 - t) * ((1 - u) * values[i0, j0] + u * values[i0, j1]) + t * (
            (1 - u) * values[i1, j0] + u * values[i1, j1]
        )
    if outside:
        raise DomainError(
            f"stations outside the grid hull: {', '.join(outside[:10])}"
        )
    return out, fallback


def write_grid_series(path, series) -> None:
    """Long-format grid output: one row per valid cell per hour."""
    from .data import format_timestamp

    with atomic_open(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "lat", "lon", "value"])
        for time, grid in series:
            stamp = format_timestamp(np.datetime64(time, "s"))
            for r in range(grid.shape[0]):
                for c in range(grid.shape[1]):
                    if grid.valid[r, c]:
                        writer.writerow(
                            [stamp, fmt(grid.lats[r]), fmt(grid.lons[c]), fmt(grid.values[r, c])]
                        )


def read_grid_series(path) -> list[tuple[np.datetime64, GridField]]:
    """Rebuild a grid series from the long format; absent cells come back
    masked."""
    from .data import parse_timestamp

    rows: list[tuple[np.datetime64, float, float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"time", "lat", "lon", "value"}:
            raise UsageError(f"{path}: expected columns time, lat, lon, value")
        for row in reader:
            rows.append(
                (
                    parse_timestamp(row["time"]),
                    float(row["lat"]),
                    float(row["lon"]),
                    float(row["value"]),
                )
            )
    if not rows:
        raise UsageError(f"{path}: no grid rows")
    lats = np.unique([r[1] for r in rows])
    lons = np.unique([r[2] for r in rows])
    lat_index = {v: i for i, v in enumerate(lats)}
    lon_index = {v: j for j, v in enumerate(lons)}
    series: dict[np.datetime64, GridField] = {}
    for time, lat, lon, value in rows:
        if time not in series:
            series[time] = GridField(
                lats=lats,
                lons=lons,
                values=np.full((lats.size, lons.size), np.nan),
                valid=np.zeros((lats.size, lons.size), dtype=bool),
            )
        grid = series[time]
        grid.values[lat_index[lat], lon_index[lon]] = value
        grid.valid[lat_index[lat], lon_index[lon]] = True
    return sorted(series.items(), key=lambda kv: kv[0])


def write_station_values(path, rows) -> None:
    """Station output rows: (station_id, time, value, fallback_flag)."""
    from .data import format_timestamp

    with atomic_open(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_id", "time", "value", "fallback"])
        for station_id, time, value, flag in rows:
            writer.writerow(
                [station_id, format_timestamp(np.datetime64(time, "s")), fmt(value), int(flag)]
            )
