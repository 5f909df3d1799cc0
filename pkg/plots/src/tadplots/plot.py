"""Render figures from serialized simulator artifacts.

Everything is reconstructed from the trajectory CSV and the events
sidecar; the package has no dependency on the simulator itself, so
figures can be regenerated from archived runs alone.

Rendering is deterministic: the Agg backend is pinned before pyplot is
imported and version stamps are stripped from the output, so the same
artifacts produce byte-identical images.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
# unsalted SVG ids come from uuid4, which would defeat byte-identical output
matplotlib.rcParams["svg.hashsalt"] = "tadplots"
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("trajectories", "controls", "network-timeline")

_SPEC_KEYS = {
    "kind",
    "trajectory",
    "events",
    "out",
    "overlay",
    "divergence",
    "radii",
    "markers",
    "labels",
}


class SchemaError(ValueError):
    """An artifact or figure spec does not match the expected layout."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request.

    trajectory/events/overlay are artifact paths (events holds the run
    sidecar with config, transition events and termination; overlay is a
    second trajectory CSV drawn dashed on control plots).  The toggles
    control capture-radius circles, event markers and player labels.
    """

    kind: str
    trajectory: str
    out: str
    events: str | None = None
    overlay: str | None = None
    divergence: float | None = None
    radii: bool = True
    markers: bool = True
    labels: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "FigureSpec":
        unknown = set(doc) - _SPEC_KEYS
        if unknown:
            raise SchemaError(f"unknown figure spec keys: {sorted(unknown)}")
        for key in ("kind", "trajectory", "out"):
            if key not in doc:
                raise SchemaError(f"figure spec needs {key!r}")
        spec = cls(
            kind=str(doc["kind"]),
            trajectory=str(doc["trajectory"]),
            out=str(doc["out"]),
            events=None if doc.get("events") is None else str(doc["events"]),
            overlay=None if doc.get("overlay") is None else str(doc["overlay"]),
            divergence=(
                None if doc.get("divergence") is None else float(doc["divergence"])
            ),
            radii=bool(doc.get("radii", True)),
            markers=bool(doc.get("markers", True)),
            labels=bool(doc.get("labels", True)),
        )
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r}, expected one of {KINDS}"
            )
        for path in (self.trajectory, self.events, self.overlay):
            if path is not None and not os.path.isfile(path):
                raise SchemaError(f"artifact {path!r} does not exist")
        if self.kind == "network-timeline" and self.events is None:
            raise SchemaError("network-timeline needs an events sidecar")


@dataclass(frozen=True)
class Trajectory:
    """Parsed trajectory CSV: per-player positions and held controls."""

    times: np.ndarray
    players: tuple[str, ...]
    positions: dict[str, np.ndarray]  # label -> (m, 2)
    controls: dict[str, np.ndarray]
    terminated: bool


def read_trajectory(path: str) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"trajectory file {path!r} is empty") from None
        rows = [row for row in reader]
    if not rows:
        raise SchemaError(f"trajectory file {path!r} has no data rows")

    cols = {name: i for i, name in enumerate(header)}
    players = tuple(name[2:] for name in header if name.startswith("x_"))
    if "t" not in cols:
        raise SchemaError(f"trajectory file {path!r} is missing column 't'")
    if not players:
        raise SchemaError(f"trajectory file {path!r} has no x_* position columns")
    for p in players:
        for name in (f"y_{p}", f"ux_{p}", f"uy_{p}"):
            if name not in cols:
                raise SchemaError(
                    f"trajectory file {path!r} is missing column {name!r}"
                )
    if "terminated" not in cols:
        raise SchemaError(f"trajectory file {path!r} is missing column 'terminated'")

    data = np.array([[float(v) for v in row] for row in rows])
    positions = {
        p: data[:, [cols[f"x_{p}"], cols[f"y_{p}"]]] for p in players
    }
    controls = {
        p: data[:, [cols[f"ux_{p}"], cols[f"uy_{p}"]]] for p in players
    }
    return Trajectory(
        times=data[:, cols["t"]],
        players=players,
        positions=positions,
        controls=controls,
        terminated=bool(data[-1, cols["terminated"]]),
    )


def read_sidecar(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"sidecar {path!r} is not valid JSON: {exc}") from exc


def _color(player: str) -> str:
    if player == "a":
        return "tab:red"
    if player == "tau":
        return "tab:green"
    shades = ["tab:blue", "tab:cyan", "tab:purple", "tab:olive", "tab:brown"]
    return shades[(int(player[1:]) - 1) % len(shades)]


def _term_title(sidecar: dict | None, traj: Trajectory) -> str:
    if sidecar and "termination" in sidecar:
        term = sidecar["termination"]
        who = f" by {term['defender']}" if term.get("defender") else ""
        return f"{term['kind']}{who} at t={term['time']:g}"
    if traj.terminated:
        return f"terminated at t={traj.times[-1]:g}"
    return f"horizon t={traj.times[-1]:g}"


def build_figure(spec: FigureSpec):
    """Build the requested figure and return it unsaved.

    Exposed separately so callers (and tests) can inspect artists; plot()
    saves and closes.
    """
    traj = read_trajectory(spec.trajectory)
    sidecar = read_sidecar(spec.events) if spec.events else None
    if spec.kind == "trajectories":
        return _fig_trajectories(spec, traj, sidecar)
    if spec.kind == "controls":
        return _fig_controls(spec, traj, sidecar)
    return _fig_timeline(spec, traj, sidecar)


def _fig_trajectories(spec, traj, sidecar):
    fig, ax = plt.subplots(figsize=(6.4, 6.4))
    for p in traj.players:
        xy = traj.positions[p]
        color = _color(p)
        ax.plot(xy[:, 0], xy[:, 1], color=color, lw=1.4)
        ax.plot(xy[0, 0], xy[0, 1], "o", color=color, ms=5)
        if spec.labels:
            ax.annotate(
                p,
                xy[0],
                textcoords="offset points",
                xytext=(5, 5),
                fontsize=9,
                color=color,
            )
    if traj.terminated:
        end = traj.positions["a"][-1]
        ax.plot(end[0], end[1], "*", color="black", ms=12, gid="termination")

    if spec.radii and sidecar and "config" in sidecar:
        cap = sidecar["config"]["capture_radii"]
        circles = [("tau", cap["a"])]
        circles += [(f"d{i + 1}", s) for i, s in enumerate(cap["d"])]
        for p, radius in circles:
            if p in traj.positions:
                ax.add_patch(
                    plt.Circle(
                        traj.positions[p][-1],
                        radius,
                        fill=False,
                        ls=":",
                        lw=0.8,
                        color="gray",
                        gid="capture-radius",
                    )
                )

    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(_term_title(sidecar, traj))
    ax.grid(alpha=0.25)
    return fig


def _fig_controls(spec, traj, sidecar):
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for p in traj.players:
        norm = np.hypot(traj.controls[p][:, 0], traj.controls[p][:, 1])
        ax.plot(traj.times, norm, color=_color(p), lw=1.3, label=p)
    if spec.overlay:
        other = read_trajectory(spec.overlay)
        for p in other.players:
            norm = np.hypot(other.controls[p][:, 0], other.controls[p][:, 1])
            ax.plot(
                other.times,
                norm,
                color=_color(p),
                lw=1.0,
                ls="--",
                alpha=0.7,
                gid="overlay",
            )
    if spec.markers and sidecar:
        for ev in sidecar.get("events", ()):
            ax.axvline(ev["t"], ls="--", lw=0.7, color="gray", gid="event-marker")
    if spec.divergence is not None:
        ax.axvline(
            spec.divergence, ls="--", lw=1.2, color="tab:red", gid="divergence"
        )
    ax.set_xlabel("t")
    ax.set_ylabel("|u|")
    ax.set_title("control magnitudes")
    if spec.labels:
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.25)
    return fig


def _fig_timeline(spec, traj, sidecar):
    """Active intervals of every directed visibility edge over the run."""
    t_end = float(traj.times[-1])
    active: dict[str, float] = {}
    spans: dict[str, list[tuple[float, float]]] = {}
    marks: list[tuple[float, str]] = []

    for src, dst in sidecar.get("initial_edges", ()):
        active[f"{src}>{dst}"] = 0.0
    for ev in sidecar.get("events", ()):
        edge = f"{ev['from']}>{ev['to']}"
        marks.append((ev["t"], edge))
        if ev["kind"] == "formed":
            active.setdefault(edge, ev["t"])
        else:
            start = active.pop(edge, None)
            if start is not None:
                spans.setdefault(edge, []).append((start, ev["t"]))
    for edge, start in active.items():
        spans.setdefault(edge, []).append((start, t_end))

    edges = sorted(spans)
    fig, ax = plt.subplots(figsize=(7.2, 0.6 + 0.3 * max(len(edges), 4)))
    for row, edge in enumerate(edges):
        for start, stop in spans[edge]:
            ax.hlines(row, start, stop, color="tab:blue", lw=3.0)
    rows = {edge: row for row, edge in enumerate(edges)}
    for t, edge in marks:
        if edge in rows:
            ax.plot(t, rows[edge], "|", color="black", ms=9, gid="transition")
    if not edges:
        ax.text(0.5, 0.5, "no visibility edges", ha="center", transform=ax.transAxes)
    ax.set_yticks(range(len(edges)), edges, fontsize=8)
    if t_end > 0.0:
        ax.set_xlim(0.0, t_end)
    ax.set_xlabel("t")
    ax.set_title("visibility network timeline")
    ax.grid(axis="x", alpha=0.25)
    return fig


def plot(spec: FigureSpec | dict) -> str:
    """Render one figure to spec.out and return that path."""
    if isinstance(spec, dict):
        spec = FigureSpec.from_dict(spec)
    else:
        spec.validate()
    fig = build_figure(spec)
    parent = os.path.dirname(spec.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    # strip the version stamp so identical inputs give identical bytes
    meta = {"Date": None} if spec.out.endswith(".svg") else {"Software": None}
    fig.savefig(spec.out, dpi=150, metadata=meta)
    plt.close(fig)
    return spec.out
