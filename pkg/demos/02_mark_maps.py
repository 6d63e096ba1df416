"""Render the planner's visual prompt: trajectory markers on a top-down map.

    python3 demos/02_mark_maps.py

Writes annotated PNGs under demos/output/maps/.
"""

from pathlib import Path

from PIL import Image

from daco import FloorMap, annotate_trajectory

out_dir = Path(__file__).parent / "output" / "maps"
out_dir.mkdir(parents=True, exist_ok=True)

# In real runs the background comes from preprocessed floor-plan data; here a
# plain canvas stands in for it.
background = out_dir / "floor0_background.png"
Image.new("RGB", (240, 160), (245, 245, 245)).save(background)

floor = FloorMap(
    floor=0,
    image_ref=str(background),
    pixel_coords={"A": (30, 80), "B": (100, 80), "C": (170, 80), "D": (170, 30)},
)

# Colors mark trajectory stages: red start, blue numbered intermediates,
# green "now". Rendering is deterministic, so re-runs are byte-identical.
for step, (history, current) in enumerate(
    [(["A"], "A"), (["A", "B"], "B"), (["A", "B", "C"], "C"), (["A", "B", "C", "D"], "D")]
):
    marked = annotate_trajectory([floor], history, current)
    for path in marked.save(out_dir, prefix="demo"):
        print(f"step {step}: wrote {path}")
