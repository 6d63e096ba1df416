"""Trajectory markers on per-floor top-down maps: the planner's visual prompt.

Stage colors: red start, blue intermediates (numbered), green current ("now").
Rendering is deterministic: identical inputs produce byte-identical PNGs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from PIL import Image, ImageDraw, ImageFont

from .errors import AnnotationError

MARKER_RADIUS = 8
OUTLINE_WIDTH = 2
LABEL_SIZE = 12
COLOR_START = (255, 0, 0)
COLOR_INTERMEDIATE = (0, 0, 255)
COLOR_CURRENT = (0, 255, 0)
COLOR_OUTLINE = (0, 0, 0)


@dataclass(frozen=True)
class FloorMap:
    floor: int
    image_ref: str
    pixel_coords: dict[str, tuple[int, int]]


@dataclass
class MarkedMapSet:
    step_index: int
    floors: list[tuple[int, Image.Image]]  # ascending floor order

    def png_bytes(self) -> list[tuple[int, bytes]]:
        out = []
        for floor, img in self.floors:
            buf = io.BytesIO()
            img.save(buf, format="PNG")
            out.append((floor, buf.getvalue()))
        return out

    def save(self, directory: str | Path, prefix: str = "map") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for floor, data in self.png_bytes():
            path = directory / f"{prefix}_step{self.step_index:03d}_floor{floor}.png"
            path.write_bytes(data)
            paths.append(path)
        return paths


def load_floor_maps(path: str | Path) -> list[FloorMap]:
    """Load floor-map metadata: {"scan", "floors": [{"floor", "image", "coords"}]}.

    Relative image paths resolve against the metadata file's directory.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    maps = []
    for entry in raw.get("floors", []):
        image = Path(entry["image"])
        if not image.is_absolute():
            image = path.parent / image
        coords = {str(k): (int(v[0]), int(v[1])) for k, v in entry.get("coords", {}).items()}
        maps.append(FloorMap(floor=int(entry["floor"]), image_ref=str(image), pixel_coords=coords))
    maps.sort(key=lambda m: m.floor)
    return maps


def _label_font() -> ImageFont.ImageFont:
    try:
        return ImageFont.load_default(size=LABEL_SIZE)
    except TypeError:  # older Pillow without sized default font
        return ImageFont.load_default()


def _assign_roles(history: Sequence[str], current: str) -> dict[str, tuple[str, str]]:
    """Map viewpoint id -> (color role, label). Precedence: current > start > latest intermediate."""
    seq = list(history)
    if not seq or seq[-1] != current:
        seq.append(current)
    roles: dict[str, tuple[str, str]] = {}
    for i, vid in enumerate(seq[1:-1], start=1):
        roles[vid] = ("intermediate", str(i))
    if len(seq) > 1:
        roles[seq[0]] = ("start", "")
    roles[seq[-1]] = ("current", "now")
    return roles


def annotate_trajectory(
    maps: Iterable[FloorMap], history: Sequence[str], current: str
) -> MarkedMapSet:
    """Draw the visited trajectory onto copies of the floor images.

    The first history entry is red, intermediates blue with step-number
    labels, the current viewpoint green labeled "now". At step 0 the single
    point is drawn green only. Source images are never modified.
    """
    floor_maps = sorted(maps, key=lambda m: m.floor)
    roles = _assign_roles(history, current)

    placements: dict[str, tuple[int, tuple[int, int]]] = {}
    for vid in roles:
        for fmap in floor_maps:
            if vid in fmap.pixel_coords:
                placements[vid] = (fmap.floor, fmap.pixel_coords[vid])
                break
        else:
            raise AnnotationError(f"viewpoint {vid!r} has no pixel coordinate on any floor")

    colors = {"start": COLOR_START, "intermediate": COLOR_INTERMEDIATE, "current": COLOR_CURRENT}
    font = _label_font()
    rendered: list[tuple[int, Image.Image]] = []
    for fmap in floor_maps:
        img = Image.open(fmap.image_ref).convert("RGB")
        draw = ImageDraw.Draw(img)
        # stable draw order: intermediates first so start/current stay on top
        order = {"intermediate": 0, "start": 1, "current": 2}
        here = [
            (vid, roles[vid]) for vid in roles
            if placements[vid][0] == fmap.floor
        ]
        here.sort(key=lambda item: (order[item[1][0]], item[0]))
        for vid, (role, label) in here:
            px, py = placements[vid][1]
            if not (0 <= px < img.width and 0 <= py < img.height):
                raise AnnotationError(
                    f"pixel coordinate ({px}, {py}) for {vid!r} is outside the floor-{fmap.floor} image"
                )
            draw.ellipse(
                [px - MARKER_RADIUS, py - MARKER_RADIUS, px + MARKER_RADIUS, py + MARKER_RADIUS],
                fill=colors[role],
                outline=COLOR_OUTLINE,
                width=OUTLINE_WIDTH,
            )
            if label:
                draw.text((px, py - MARKER_RADIUS - 2), label, fill=COLOR_OUTLINE, font=font, anchor="mb")
        rendered.append((fmap.floor, img))

    step_index = len(history) - 1 if history and history[-1] == current else len(history)
    if not history:
        step_index = 0
    return MarkedMapSet(step_index=step_index, floors=rendered)
