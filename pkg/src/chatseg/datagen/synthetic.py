"""Procedural scene backend: places simple shapes with known masks and
renders templated reasoning dialogue about them.

Everything is a pure function of the RNG handed in, so a fixed seed
reproduces scenes, questions, and trees bit for bit. This is what lets the
training and evaluation stack run with zero external calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..imaging import BinaryMask, ImageBuffer
from .types import ReasoningNode, ReasoningQuestion, SceneElement

PALETTE = [
    ("red", (200, 45, 45)),
    ("blue", (45, 85, 200)),
    ("green", (45, 160, 75)),
    ("yellow", (220, 200, 55)),
    ("purple", (140, 65, 185)),
    ("orange", (230, 140, 40)),
    ("teal", (40, 170, 170)),
    ("pink", (230, 120, 170)),
    ("brown", (140, 95, 55)),
    ("gray", (120, 120, 120)),
]

SHAPES = ("circle", "square", "triangle")

# Area ranges per granularity bin, kept well clear of the (1.6*32)^2 and
# (1.6*96)^2 thresholds so rasterization error cannot flip a bin.
GRANULARITY_AREAS = {
    "fine": (350, 2200),
    "medium": (3300, 20000),
    "coarse": (26500, 42000),
}

# Fine-heavy target mix: just over half of all targets are fine-grained.
FINE_HEAVY_MIXTURE = (0.53, 0.25, 0.22)

ROOT_TEMPLATES = [
    "Something in the {position} of this scene stands out; what should I focus on?",
    "Which of the drawn items would you call {size} and {color}-looking?",
    "There is a {size} item near the {position}; can you work out which one it is?",
    "If I am after the {color}-toned thing here, where should I be looking?",
]

MID_STEPS = [
    ("What color does it appear to be?", "It looks {color}."),
    ("How large is it compared with the rest of the scene?", "It is a {size} item next to its neighbours."),
    ("What outline does it have?", "Its outline is best described as a {shape}."),
    ("Which part of the image holds it?", "It stays within the {position} region."),
]

FINAL_STEP = (
    "So which object exactly should be singled out?",
    "The target is the {color} {shape} in the {position}.",
)


@dataclass
class SceneConfig:
    """Knobs for procedural scene synthesis."""

    image_size: int | None = None          # fixed canvas; None sizes the canvas to fit
    min_canvas: int = 96
    n_elements: tuple[int, int] = (2, 5)
    mixture: tuple[float, float, float] = FINE_HEAVY_MIXTURE  # fine/medium/coarse target shares
    area_mode: str = "granularity"         # "granularity" (absolute px) or "relative"
    relative_area: tuple[float, float] = (0.05, 0.22)
    blank_probability: float = 0.0
    depth_range: tuple[int, int] = (2, 4)
    decoy_probability: float = 0.3


@dataclass
class Scene:
    image_id: str
    image: ImageBuffer
    elements: list[SceneElement] = field(default_factory=list)


def _position_word(cy: float, cx: float, h: int, w: int) -> str:
    row = min(2, int(3 * cy / h))
    col = min(2, int(3 * cx / w))
    vert = ("top", "middle", "bottom")[row]
    horiz = ("left", "center", "right")[col]
    if vert == "middle" and horiz == "center":
        return "center"
    return f"{vert} {horiz}"


def _size_word(area: float, canvas_area: float) -> str:
    frac = area / canvas_area
    if frac < 0.03:
        return "small"
    if frac < 0.12:
        return "medium-sized"
    return "large"


def _shape_bbox(shape: str, area: float, aspect: float) -> tuple[float, float]:
    if shape == "circle":
        d = 2.0 * math.sqrt(area / math.pi)
        return d, d
    if shape == "square":
        w = math.sqrt(area * aspect)
        return area / w, w
    # right triangle with legs (h, w): area = h*w/2
    w = math.sqrt(2.0 * area * aspect)
    return 2.0 * area / w, w


def _rasterize(shape: str, area: float, aspect: float, cy: float, cx: float, h: int, w: int) -> np.ndarray:
    # evaluate only inside the shape's bounding box; the rest stays false
    bh, bw = _shape_bbox(shape, area, aspect)
    y0 = max(0, int(math.floor(cy - bh / 2.0)) - 1)
    y1 = min(h, int(math.ceil(cy + bh / 2.0)) + 2)
    x0 = max(0, int(math.floor(cx - bw / 2.0)) - 1)
    x1 = min(w, int(math.ceil(cx + bw / 2.0)) + 2)
    out = np.zeros((h, w), dtype=bool)
    if y0 >= y1 or x0 >= x1:
        return out, (cy, cx)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    if shape == "circle":
        r = math.sqrt(area / math.pi)
        window = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    else:
        top, left = cy - bh / 2.0, cx - bw / 2.0
        window = (yy >= top) & (yy < top + bh) & (xx >= left) & (xx < left + bw)
        if shape == "triangle":
            # keep the half of the bounding box below the diagonal
            window &= (yy - top) * bw >= (xx - left) * bh
    out[y0:y1, x0:x1] = window
    if window.any():
        ys, xs = np.nonzero(window)
        centroid = (float(ys.mean()) + y0, float(xs.mean()) + x0)
    else:
        centroid = (cy, cx)
    return out, centroid


class SyntheticSceneGenerator:
    """Creates scenes and remembers their construction lists by image id."""

    def __init__(self, config: SceneConfig | None = None):
        self.config = config or SceneConfig()
        self._scenes: dict[str, Scene] = {}

    def scene_for(self, image_id: str) -> Scene | None:
        return self._scenes.get(image_id)

    def create_scene(self, image_id: str, rng: np.random.Generator) -> Scene:
        cfg = self.config
        if cfg.blank_probability > 0 and rng.random() < cfg.blank_probability:
            side = cfg.image_size or max(cfg.min_canvas, 64)
            scene = Scene(image_id, _render_masks([], side, side, rng))
            self._scenes[image_id] = scene
            return scene

        n = int(rng.integers(cfg.n_elements[0], cfg.n_elements[1] + 1))
        areas, aspects, shapes = [], [], []
        for _ in range(n):
            if cfg.area_mode == "granularity":
                bin_name = ("fine", "medium", "coarse")[int(rng.choice(3, p=np.asarray(cfg.mixture) / sum(cfg.mixture)))]
                lo, hi = GRANULARITY_AREAS[bin_name]
                areas.append(float(rng.uniform(lo, hi)))
            else:
                lo, hi = cfg.relative_area
                side = cfg.image_size or cfg.min_canvas
                areas.append(float(rng.uniform(lo, hi)) * side * side)
            aspects.append(float(rng.uniform(0.6, 1.7)))
            shapes.append(SHAPES[rng.integers(0, len(SHAPES))])

        margin = 3
        cols = math.ceil(math.sqrt(n))
        rows = math.ceil(n / cols)

        def grid_cell():
            return max(_shape_bbox(s, a, q)[i] for s, a, q in zip(shapes, areas, aspects) for i in (0, 1)) + 2 * margin

        if cfg.image_size is None:
            cell = grid_cell()
            side = max(cfg.min_canvas, math.ceil(cell * max(rows, cols)))
        else:
            side = cfg.image_size
            while grid_cell() * max(rows, cols) > side:
                areas = [a * 0.85 for a in areas]
            cell = grid_cell()
        h = w = int(side)

        color_idx = rng.choice(len(PALETTE), size=min(n, len(PALETTE)), replace=False)
        if n > len(PALETTE):
            extra = rng.choice(len(PALETTE), size=n - len(PALETTE), replace=True)
            color_idx = np.concatenate([color_idx, extra])

        order = list(range(n))
        elements = []
        masks = []
        for k in order:
            row, col = divmod(k, cols)
            bh, bw = _shape_bbox(shapes[k], areas[k], aspects[k])
            slack_y = max(0.0, cell - bh - 2 * margin)
            slack_x = max(0.0, cell - bw - 2 * margin)
            # grid cells are packed from the top-left; the canvas may be larger
            cy = row * cell + margin + bh / 2.0 + rng.uniform(0, slack_y)
            cx = col * cell + margin + bw / 2.0 + rng.uniform(0, slack_x)
            bits, centroid = _rasterize(shapes[k], areas[k], aspects[k], cy, cx, h, w)
            if not bits.any():
                continue
            mask = BinaryMask(bits)
            color_name, _rgb = PALETTE[int(color_idx[k])]
            attrs = {
                "color": color_name,
                "position": _position_word(centroid[0], centroid[1], h, w),
                "size": _size_word(float(bits.sum()), h * w),
                "shape": shapes[k],
            }
            name = f"{color_name} {shapes[k]}"
            elements.append(
                SceneElement(
                    id=f"e{len(elements)}",
                    name=name,
                    attributes=attrs,
                    description=f"a {attrs['size']} {color_name} {shapes[k]} in the {attrs['position']} of the image",
                    gt_mask=mask,
                )
            )
            masks.append((mask, PALETTE[int(color_idx[k])][1]))

        scene = Scene(image_id, _render_masks(masks, h, w, rng), elements)
        self._scenes[image_id] = scene
        return scene


def _render_masks(masks, h: int, w: int, rng: np.random.Generator) -> ImageBuffer:
    base = float(rng.uniform(0.78, 0.92))
    img = np.empty((h, w, 3), dtype=np.float32)
    grad = np.linspace(base, base - 0.1, h, dtype=np.float32)[:, None]
    img[:] = grad[..., None]
    for mask, rgb in masks:
        img[mask.bits] = np.asarray(rgb, dtype=np.float32) / 255.0
    return ImageBuffer(img)


class SyntheticBackend:
    """Generator backend that answers from scene construction lists."""

    name = "synthetic"

    def __init__(self, generator: SyntheticSceneGenerator | None = None):
        self.generator = generator or SyntheticSceneGenerator()

    def list_elements(self, image: ImageBuffer, image_id: str) -> list[SceneElement]:
        scene = self.generator.scene_for(image_id)
        if scene is None:
            raise KeyError(f"unknown synthetic scene {image_id!r}")
        return list(scene.elements)

    def compose_question(self, image: ImageBuffer, target: SceneElement, rng: np.random.Generator) -> str:
        template = ROOT_TEMPLATES[rng.integers(0, len(ROOT_TEMPLATES))]
        return template.format(**target.attributes)

    def expand_reasoning(
        self,
        question: ReasoningQuestion,
        target: SceneElement,
        elements: list[SceneElement],
        rng: np.random.Generator,
        max_depth: int,
    ) -> ReasoningNode:
        cfg = self.generator.config
        lo, hi = cfg.depth_range
        depth = int(rng.integers(lo, hi + 1))
        depth = max(2, min(depth, max_depth))
        attrs = dict(target.attributes)

        steps = [(question.text, "It is in the {position} area and looks {size}; let us narrow it down.".format(**attrs))]
        for i in range(depth - 2):
            q, a = MID_STEPS[i % len(MID_STEPS)]
            steps.append((q.format(**attrs), a.format(**attrs)))
        steps.append((FINAL_STEP[0], FINAL_STEP[1].format(**attrs)))

        nodes = [ReasoningNode(question=q, answer=a) for q, a in steps]
        for parent, child in zip(nodes, nodes[1:]):
            parent.children.append(child)

        # sprinkle dead-end branches so the child-count bound is exercised
        others = [e for e in elements if e.id != target.id]
        for node in nodes[:-1]:
            if others and rng.random() < cfg.decoy_probability:
                for _ in range(int(rng.integers(1, 3))):
                    if len(node.children) >= 3:
                        break
                    other = others[rng.integers(0, len(others))]
                    node.children.append(
                        ReasoningNode(
                            question=f"Could it be the {other.name} instead?",
                            answer=f"No, the {other.name} does not match the clues.",
                        )
                    )
        return nodes[0]

    def refine_turns(self, steps: list[tuple[str, str]], elements: list[SceneElement]) -> list[tuple[str, str]]:
        return steps
