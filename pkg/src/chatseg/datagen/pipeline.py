"""Three-step dialogue-dataset pipeline.

Step 1 lists visible elements, step 2 forms an implicit question per selected
target and expands it into a reasoning chain, step 3 linearizes each chain
into a multi-turn dialogue that ends with a segmentation instruction and a
`[OBJ] {class} [SEG]` response. `generate_dataset` drives the whole thing and
writes a JSONL manifest plus PNG images/masks.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import BackendError, PipelineError
from ..imaging import ImageBuffer, classify_granularity, mask_area, mask_to_png
from .backends import ChatCompletionsBackend, GeneratorBackend, LlmBackendConfig
from .synthetic import SceneConfig, SyntheticBackend, SyntheticSceneGenerator
from .types import (
    K_MAX,
    K_MIN,
    MAX_CHILDREN,
    MAX_DEPTH,
    SEG_INSTRUCTION,
    DialogueSample,
    ReasoningNode,
    ReasoningPath,
    ReasoningQuestion,
    ReasoningTree,
    SceneElement,
    Turn,
    seg_response_text,
)

logger = logging.getLogger("chatseg.datagen")


def extract_elements(image: ImageBuffer, backend: GeneratorBackend, image_id: str = "image") -> list[SceneElement]:
    """Step 1: list visible elements with attributes and descriptions."""
    try:
        elements = backend.list_elements(image, image_id)
    except BackendError as exc:
        raise PipelineError(f"element extraction failed for {image_id}: {exc}", image_id=image_id) from exc
    for el in elements:
        if not el.attributes:
            raise PipelineError(f"element {el.id} of {image_id} has no attributes", image_id=image_id)
        if not el.description.strip():
            raise PipelineError(f"element {el.id} of {image_id} has no description", image_id=image_id)
    seen = set()
    for el in elements:
        if el.id in seen:
            raise PipelineError(f"duplicate element id {el.id} in {image_id}", image_id=image_id)
        seen.add(el.id)
    if not elements:
        logger.info("image %s skipped: no elements", image_id)
    return elements


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def select_targets(
    elements: list[SceneElement], rng_seed, k_min: int = K_MIN, k_max: int = K_MAX
) -> list[SceneElement]:
    """Step 2-1 target choice: K uniform in [k_min, min(N, k_max)], then K
    distinct elements uniformly without replacement."""
    n = len(elements)
    if n < k_min:
        raise PipelineError(f"need at least {k_min} elements, got {n}")
    rng = _as_rng(rng_seed)
    k_hi = min(n, k_max)
    k = int(rng.integers(k_min, k_hi + 1))
    idx = rng.choice(n, size=k, replace=False)
    return [elements[int(i)] for i in idx]


def form_question(
    image: ImageBuffer, target: SceneElement, backend: GeneratorBackend, rng_seed=0
) -> ReasoningQuestion:
    """Step 2-1: one implicit question whose resolution requires the target."""
    rng = _as_rng(rng_seed)
    try:
        text = backend.compose_question(image, target, rng)
    except BackendError as exc:
        raise PipelineError(f"question formation failed for {target.id}: {exc}") from exc
    if not text.strip():
        raise PipelineError(f"backend produced an empty question for {target.id}")
    return ReasoningQuestion(target_id=target.id, text=text)


def _chain_steps(root: ReasoningNode) -> list[tuple[str, str]]:
    # first child is the on-path continuation by backend convention
    steps, node = [], root
    while True:
        steps.append((node.question, node.answer))
        if not node.children:
            return steps
        node = node.children[0]


def _clamp_children(root: ReasoningNode, max_children: int, warnings: list[str]):
    for node in root.walk():
        if len(node.children) > max_children:
            warnings.append(f"node truncated from {len(node.children)} to {max_children} children")
            node.children = node.children[:max_children]


def _bound_steps(
    steps: list[tuple[str, str]], target: SceneElement, max_depth: int, warnings: list[str]
) -> list[tuple[str, str]]:
    if len(steps) > max_depth:
        warnings.append(f"path for {target.id} truncated from depth {len(steps)} to {max_depth}")
        steps = steps[: max_depth - 1] + [steps[-1]]
    if target.name.lower() not in steps[-1][1].lower():
        warnings.append(f"final answer for {target.id} did not name the target; appended a closing step")
        closing = ("So which object exactly should be singled out?", f"The target is the {target.name}.")
        steps = (steps[: max_depth - 1] if len(steps) >= max_depth else steps) + [closing]
    if len(steps) < 2:
        warnings.append(f"path for {target.id} padded to the minimum depth of 2")
        steps = steps + [("Just to confirm, which object is it?", f"It is the {target.name}.")]
    return steps


def build_tree(
    questions: list[ReasoningQuestion],
    elements: list[SceneElement],
    backend: GeneratorBackend,
    max_children: int = MAX_CHILDREN,
    max_depth: int = MAX_DEPTH,
    rng_seed=0,
    image_id: str = "image",
) -> ReasoningTree:
    """Step 2-2: expand every question into a bounded reasoning chain.

    Backend output that violates the child/depth bounds is truncated to fit,
    with a warning recorded on the tree, so a fixed seed always yields the
    same structure.
    """
    if not (K_MIN <= len(questions) <= K_MAX):
        raise PipelineError(f"need between {K_MIN} and {K_MAX} questions, got {len(questions)}")
    by_id = {el.id: el for el in elements}
    rng = _as_rng(rng_seed)
    roots: list[ReasoningNode] = []
    paths: list[ReasoningPath] = []
    warnings: list[str] = []
    for question in questions:
        target = by_id.get(question.target_id)
        if target is None:
            raise PipelineError(f"question targets unknown element {question.target_id}")
        try:
            root = backend.expand_reasoning(question, target, elements, rng, max_depth)
        except BackendError as exc:
            raise PipelineError(f"tree expansion failed for {target.id}: {exc}", image_id=image_id) from exc
        _clamp_children(root, max_children, warnings)
        steps = _bound_steps(_chain_steps(root), target, max_depth, warnings)
        roots.append(root)
        paths.append(ReasoningPath(target_id=target.id, steps=steps))
    for message in warnings:
        logger.warning("%s: %s", image_id, message)
    return ReasoningTree(image_id=image_id, paths=paths, K=len(paths), roots=roots, warnings=warnings)


def assemble_dialogue(
    path: ReasoningPath,
    elements: list[SceneElement],
    backend: GeneratorBackend | None = None,
    sample_id: str = "sample",
    image_path: str = "",
    mask_path: str = "",
    instruction: str = SEG_INSTRUCTION,
) -> DialogueSample:
    """Step 3: linearize a reasoning path into alternating turns plus the
    final segmentation instruction and `[OBJ] {class} [SEG]` response."""
    by_id = {el.id: el for el in elements}
    target = by_id.get(path.target_id)
    if target is None:
        raise PipelineError(f"path targets unknown element {path.target_id}")
    if target.gt_mask is None:
        raise PipelineError(f"no ground-truth mask available for {target.id}")

    steps = path.steps
    if backend is not None:
        steps = backend.refine_turns(steps, elements)
        if len(steps) != len(path.steps):
            steps = path.steps

    turns: list[Turn] = []
    for q, a in steps:
        turns.append(Turn("user", q))
        turns.append(Turn("assistant", a))
    turns.append(Turn("user", instruction))
    turns.append(Turn("assistant", seg_response_text(target.name)))

    area = mask_area(target.gt_mask)
    return DialogueSample(
        sample_id=sample_id,
        image_path=image_path,
        turns=turns,
        target_class=target.name,
        mask_path=mask_path,
        granularity=classify_granularity(area),
    )


@dataclass
class GenerationConfig:
    backend: str = "synthetic"
    num_images: int = 10
    seed: int = 0
    out_dir: str = "dataset"
    k_min: int = K_MIN
    k_max: int = K_MAX
    max_depth: int = MAX_DEPTH
    split_ratios: tuple[float, float, float] = (0.88, 0.06, 0.06)
    scene: SceneConfig = field(default_factory=SceneConfig)
    llm: LlmBackendConfig | None = None
    images_dir: str | None = None  # source images for the llm backend
    fail_threshold: float = 0.10

    def make_backend(self) -> GeneratorBackend:
        if self.backend == "synthetic":
            return SyntheticBackend(SyntheticSceneGenerator(self.scene))
        if self.backend == "llm":
            return ChatCompletionsBackend(self.llm or LlmBackendConfig.from_env())
        raise PipelineError(f"unknown backend {self.backend!r}")


@dataclass
class DatasetManifest:
    out_dir: Path
    records: list[dict]
    per_image_status: dict[str, str]
    summary: dict

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / "manifest.jsonl"


def _assign_splits(records: list[dict], ratios, seed: int):
    """Stratify by granularity so each split sees the same size mix."""
    rng = np.random.default_rng([seed, 0xC0FFEE])
    buckets: dict[str, list[dict]] = {}
    for rec in records:
        buckets.setdefault(rec["granularity"], []).append(rec)
    for _, bucket in sorted(buckets.items()):
        order = rng.permutation(len(bucket))
        n = len(bucket)
        n_val = round(ratios[1] * n)
        n_test = round(ratios[2] * n)
        for pos, idx in enumerate(order):
            if pos < n_val:
                split = "validation"
            elif pos < n_val + n_test:
                split = "test"
            else:
                split = "train"
            bucket[int(idx)]["split"] = split


def generate_dataset(config: GenerationConfig) -> DatasetManifest:
    """Run the full pipeline and write manifest.jsonl, images/ and masks/.

    Per-image failures are recorded rather than fatal; the run only raises
    once more than `fail_threshold` of images failed outright.
    """
    out_dir = Path(config.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    backend = config.make_backend()
    synthetic = backend if isinstance(backend, SyntheticBackend) else None
    source_images = _list_source_images(config) if synthetic is None else None

    seed_seq = np.random.SeedSequence(config.seed)
    image_seeds = seed_seq.spawn(config.num_images)

    statuses: dict[str, str] = {}
    records: list[dict] = []
    pending_masks: list[tuple[str, bytes]] = []
    pending_images: dict[str, bytes] = {}
    failed = 0

    for i in range(config.num_images):
        image_id = f"img{i:05d}"
        rng = np.random.default_rng(image_seeds[i])
        try:
            if synthetic is not None:
                scene = synthetic.generator.create_scene(image_id, rng)
                image = scene.image
            else:
                image = ImageBuffer.from_png(source_images[i % len(source_images)].read_bytes())
            elements = extract_elements(image, backend, image_id)
            if not elements:
                statuses[image_id] = "skipped: no elements"
                continue
            if len(elements) < config.k_min:
                statuses[image_id] = f"skipped: only {len(elements)} elements (need {config.k_min})"
                continue
            targets = select_targets(elements, rng, config.k_min, config.k_max)
            questions = [form_question(image, t, backend, rng) for t in targets]
            tree = build_tree(
                questions, elements, backend,
                max_children=MAX_CHILDREN, max_depth=config.max_depth,
                rng_seed=rng, image_id=image_id,
            )
            image_rel = f"images/{image_id}.png"
            quarantined = 0
            for path_idx, path in enumerate(tree.paths):
                sample_id = f"{image_id}_s{path_idx}"
                mask_rel = f"masks/{sample_id}.png"
                try:
                    sample = assemble_dialogue(
                        path, elements, backend,
                        sample_id=sample_id, image_path=image_rel, mask_path=mask_rel,
                    )
                except PipelineError as exc:
                    logger.warning("sample %s quarantined: %s", sample_id, exc)
                    quarantined += 1
                    continue
                target = next(el for el in elements if el.id == path.target_id)
                pending_masks.append((mask_rel, mask_to_png(target.gt_mask)))
                records.append(_record_for(sample, image_id, path_idx, tree.K, path.depth))
            pending_images[image_rel] = image.to_png()
            statuses[image_id] = "ok" if quarantined == 0 else f"ok: {quarantined} samples quarantined"
        except PipelineError as exc:
            statuses[image_id] = f"failed: {exc}"
            failed += 1

    _assign_splits(records, config.split_ratios, config.seed)

    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    for rel, blob in pending_images.items():
        (out_dir / rel).write_bytes(blob)
    for rel, blob in pending_masks:
        (out_dir / rel).write_bytes(blob)

    summary = _summarize(records, statuses, config)
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, ensure_ascii=False)

    manifest = DatasetManifest(out_dir=out_dir, records=records, per_image_status=statuses, summary=summary)
    if config.num_images > 0 and failed / config.num_images > config.fail_threshold:
        raise PipelineError(
            f"{failed}/{config.num_images} images failed (threshold {config.fail_threshold:.0%}); "
            f"partial dataset written to {out_dir}"
        )
    return manifest


def _list_source_images(config: GenerationConfig) -> list[Path]:
    if not config.images_dir:
        raise PipelineError("llm backend needs --images-dir with source images")
    paths = sorted(Path(config.images_dir).glob("*.png")) + sorted(Path(config.images_dir).glob("*.jpg"))
    if not paths:
        raise PipelineError(f"no images found under {config.images_dir}")
    return paths


def _record_for(sample: DialogueSample, image_id: str, path_idx: int, k: int, depth: int) -> dict:
    return {
        "sample_id": sample.sample_id,
        "image_id": image_id,
        "split": "train",
        "image_path": sample.image_path,
        "mask_path": sample.mask_path,
        "target_class": sample.target_class,
        "granularity": sample.granularity.value.value,
        "area_px": sample.granularity.area_px,
        "turns": [t.to_dict() for t in sample.turns],
        "tree": {"K": k, "path_index": path_idx, "depth": depth},
    }


def _summarize(records: list[dict], statuses: dict[str, str], config: GenerationConfig) -> dict:
    split_counts: dict[str, int] = {}
    gran_counts: dict[str, dict[str, int]] = {}
    for rec in records:
        split_counts[rec["split"]] = split_counts.get(rec["split"], 0) + 1
        gran_counts.setdefault(rec["split"], {}).setdefault(rec["granularity"], 0)
        gran_counts[rec["split"]][rec["granularity"]] += 1
    overall = {g: sum(split.get(g, 0) for split in gran_counts.values()) for g in ("fine", "medium", "coarse")}
    total = sum(overall.values())
    return {
        "num_images": config.num_images,
        "num_samples": len(records),
        "seed": config.seed,
        "split_counts": split_counts,
        "granularity_by_split": gran_counts,
        "granularity_overall": overall,
        "fine_fraction": (overall["fine"] / total) if total else 0.0,
        "area_basis": "native resolution; areas are not rescaled to a 1024px reference",
        "per_image_status": statuses,
        "failed_images": sum(1 for s in statuses.values() if s.startswith("failed")),
        "skipped_images": sum(1 for s in statuses.values() if s.startswith("skipped")),
    }
