"""Procedural multi-person clips with exact skeleton ground truth.

Figures are stick skeletons drawn with OpenCV on a textured background. Joint
pixel positions are quantised to 1/16 px and drawn with 4 fractional bits, so
the rendered joint disks sit exactly on the ground truth. All randomness comes
from one ``numpy.random.Generator`` per clip, drawn in a fixed order, so a
seed always reproduces the same clip.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, replace
from typing import Literal

import cv2
import numpy as np
import torch
from torch import Tensor

from apps.pavenet.core.errors import LayoutCapacityError
from apps.pavenet.data.skeleton import LIMBS, NUM_JOINTS
from apps.pavenet.models.structures import PoseTarget


logger = logging.getLogger(name=__name__)

Difficulty = Literal["easy", "hard"]

FRAME_SIZE = (64, 96)
SUBPIXEL_BITS = 4
SUBPIXEL = 1 << SUBPIXEL_BITS
EASY_GRID = (2, 4)
HARD_CAPACITY = 20
MIN_IN_FRAME = 0.5

# segment lengths as fractions of the figure height
SEGMENTS = (
    "neck",
    "nose",
    "head",
    "shoulder",
    "upper_arm",
    "forearm",
    "hip",
    "thigh",
    "shin",
)
PROPORTIONS = (0.33, 0.10, 0.22, 0.10, 0.15, 0.14, 0.07, 0.23, 0.22)


def _segment(start: np.ndarray, length: float, angle: float) -> np.ndarray:
    # angle 0 points straight down
    return start + length * np.array([np.sin(angle), np.cos(angle)])


def quantize(points: np.ndarray) -> np.ndarray:
    """Rounds pixel coordinates to the 1/16 px drawing grid."""
    return np.rint(points * SUBPIXEL) / SUBPIXEL


@dataclass(frozen=True)
class FigureSpec:
    """One synthetic person.

    ``base`` is the pelvis position at the keyframe in pixels; the figure
    translates by ``velocity`` pixels per frame while its arms and legs swing
    with amplitude ``swing`` (radians) and phase ``phase + phase_rate * dt``.
    """

    base: tuple[float, float]
    velocity: tuple[float, float]
    height: float
    phase: float
    phase_rate: float
    swing: float
    color: tuple[int, int, int]
    proportions: tuple[float, ...] = PROPORTIONS

    def __post_init__(self) -> None:
        if self.height <= 0 or min(self.proportions) <= 0:
            raise ValueError(
                f"limb lengths should be positive, but got height {self.height} and proportions {self.proportions}"
            )

    @property
    def limb_lengths(self) -> dict[str, float]:
        return {
            name: fraction * self.height
            for name, fraction in zip(SEGMENTS, self.proportions)
        }

    @property
    def thickness(self) -> int:
        return max(2, int(round(self.height / 12)))

    @property
    def joint_radius(self) -> int:
        return self.thickness // 2 + 1

    def pose_at(self, dt: float) -> np.ndarray:
        """Joint pixel coordinates (J, 2) ``dt`` frames from the keyframe."""
        lengths = self.limb_lengths
        root = np.asarray(self.base, dtype=np.float64) + dt * np.asarray(
            self.velocity, dtype=np.float64
        )
        swing = self.swing * np.sin(self.phase + self.phase_rate * dt)

        joints = np.zeros((NUM_JOINTS, 2), dtype=np.float64)
        neck = root - np.array([0.0, lengths["neck"]])
        joints[1] = neck
        joints[0] = neck - np.array([0.0, lengths["nose"]])
        joints[2] = neck - np.array([0.0, lengths["head"]])

        # left limbs are drawn on the image right (figures face the camera)
        for side, (shoulder, elbow, wrist, hip, knee, ankle) in (
            (1.0, (3, 5, 7, 9, 11, 13)),
            (-1.0, (4, 6, 8, 10, 12, 14)),
        ):
            arm = side * (0.25 + swing)
            leg = side * 0.8 * swing
            joints[shoulder] = neck + np.array(
                [side * lengths["shoulder"], 0.02 * self.height]
            )
            joints[elbow] = _segment(joints[shoulder], lengths["upper_arm"], arm)
            joints[wrist] = _segment(
                joints[elbow], lengths["forearm"], arm + side * 0.3
            )
            joints[hip] = root + np.array([side * lengths["hip"], 0.0])
            joints[knee] = _segment(joints[hip], lengths["thigh"], leg)
            joints[ankle] = _segment(joints[knee], lengths["shin"], 0.5 * leg)

        return quantize(joints)


@dataclass
class ClipSample:
    """A rendered clip of ``2 * span + 1`` frames around the keyframe.

    ``frames`` are BGR ``uint8`` images (f, H, W, 3); ``joints`` are
    normalised (x / (W - 1), y / (H - 1)) coordinates of shape (f, G, J, 2);
    ``visible`` and per-person body ``masks`` have shapes (f, G, J) and
    (f, G, H, W).
    """

    frames: np.ndarray
    joints: np.ndarray
    visible: np.ndarray
    masks: np.ndarray
    figures: list[FigureSpec]
    span: int
    seed: int = 0
    difficulty: str = "easy"
    occluder: tuple[int, int, int, int] | None = field(default=None)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def keyframe(self) -> int:
        return self.span

    @property
    def num_persons(self) -> int:
        return len(self.figures)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    def pixel_joints(self) -> np.ndarray:
        height, width = self.image_size
        return self.joints * np.array([width - 1, height - 1], dtype=np.float64)

    def frames_tensor(self) -> Tensor:
        """Frames as a float64 tensor (f, 3, H, W) with values in [0, 1]."""
        frames = torch.from_numpy(np.ascontiguousarray(self.frames))
        return frames.permute(0, 3, 1, 2).to(torch.float64) / 255.0

    def target(self, frame: int | None = None) -> PoseTarget:
        """Ground truth of ``frame`` (the keyframe by default)."""
        frame = self.keyframe if frame is None else frame
        return PoseTarget(
            joints=torch.from_numpy(self.joints[frame].copy()),
            visible=torch.from_numpy(self.visible[frame].copy()),
        )

    def copy(self) -> ClipSample:
        return copy.deepcopy(self)


def layout_capacity(difficulty: Difficulty) -> int:
    """Maximum persons per clip: one per grid cell for ``easy`` figures, and
    the default number of pose queries for ``hard`` ones."""
    if difficulty == "easy":
        return EASY_GRID[0] * EASY_GRID[1]
    if difficulty == "hard":
        return HARD_CAPACITY

    raise ValueError(f"difficulty should be 'easy' or 'hard', but got {difficulty!r}")


def generate_background(
    rng: np.random.Generator, height: int = 64, width: int = 96
) -> np.ndarray:
    """Smooth low-intensity noise texture, values in [30, 90]."""
    noise = rng.uniform(30.0, 90.0, size=(height, width, 3))
    noise = cv2.GaussianBlur(noise, (5, 5), 1.5, borderType=cv2.BORDER_REFLECT)

    return np.rint(noise).astype(np.uint8)


def render_frame(
    figures: list[FigureSpec],
    dt: float = 0.0,
    background: np.ndarray | None = None,
    height: int = 64,
    width: int = 96,
) -> tuple[np.ndarray, np.ndarray]:
    """Draws ``figures`` at ``dt`` frames from the keyframe.

    Figures are drawn in list order, so later ones occlude earlier ones.

    Args:
        figures (list[FigureSpec]): persons to draw.
        dt (float, optional): frame offset from the keyframe. Defaults to 0.
        background (np.ndarray | None, optional): BGR ``uint8`` image of
            shape (H, W, 3). Defaults to the seed-0 texture.
        height (int, optional): frame height when no background is given.
            Defaults to 64.
        width (int, optional): frame width when no background is given.
            Defaults to 96.

    Returns:
        tuple[np.ndarray, np.ndarray]: the image and the body mask of every
        figure, shape (G, H, W).
    """
    if background is None:
        background = generate_background(np.random.default_rng(0), height, width)
    image = np.ascontiguousarray(background.copy())
    height, width = image.shape[:2]
    masks = np.zeros((len(figures), height, width), dtype=bool)

    for i, figure in enumerate(figures):
        points = np.rint(figure.pose_at(dt) * SUBPIXEL).astype(np.int64)
        points = [tuple(int(v) for v in p) for p in points]
        color = tuple(int(c) for c in figure.color)
        mask = np.zeros((height, width), dtype=np.uint8)

        for a, b in LIMBS:
            cv2.line(
                image, points[a], points[b], color, figure.thickness, cv2.LINE_AA, SUBPIXEL_BITS
            )
            cv2.line(
                mask, points[a], points[b], 255, figure.thickness, cv2.LINE_8, SUBPIXEL_BITS
            )
        for point in points:
            radius = figure.joint_radius * SUBPIXEL
            cv2.circle(image, point, radius, color, -1, cv2.LINE_AA, SUBPIXEL_BITS)
            cv2.circle(mask, point, radius, 255, -1, cv2.LINE_8, SUBPIXEL_BITS)

        masks[i] = mask > 0

    return image, masks


def joint_visibility(pixel_joints: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """A joint is visible when it lies inside the frame and no later-drawn
    figure's body covers its pixel.

    Args:
        pixel_joints (np.ndarray): joints of one frame, shape (G, J, 2).
        masks (np.ndarray): body masks of the frame, shape (G, H, W).

    Returns:
        np.ndarray: visibility of shape (G, J).
    """
    num_persons, num_joints = pixel_joints.shape[:2]
    height, width = masks.shape[1:]
    visible = np.zeros((num_persons, num_joints), dtype=bool)

    for i in range(num_persons):
        for j in range(num_joints):
            x, y = pixel_joints[i, j]
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                continue
            row, col = int(np.rint(y)), int(np.rint(x))
            visible[i, j] = not masks[i + 1 :, row, col].any()

    return visible


def _in_frame_fraction(joints: np.ndarray, height: int, width: int) -> float:
    inside = (
        (joints[:, 0] >= 0)
        & (joints[:, 0] <= width - 1)
        & (joints[:, 1] >= 0)
        & (joints[:, 1] <= height - 1)
    )
    return float(inside.mean())


def _figure_color(rng: np.random.Generator, index: int) -> tuple[int, int, int]:
    color = rng.integers(0, 80, size=3)
    color[index % 3] = 230 + rng.integers(0, 26)

    return tuple(int(c) for c in color)


def _sample_figure(
    rng: np.random.Generator,
    index: int,
    difficulty: Difficulty,
    cell: int,
    height: int,
    width: int,
) -> FigureSpec:
    proportions = tuple(
        float(p) for p in np.asarray(PROPORTIONS) * rng.uniform(0.9, 1.1, size=len(PROPORTIONS))
    )
    color = _figure_color(rng, index)
    phase = float(rng.uniform(0.0, 2 * np.pi))

    if difficulty == "easy":
        rows, cols = EASY_GRID
        cell_h, cell_w = height / rows, width / cols
        figure_height = float(rng.uniform(20.0, 28.0))
        row, col = divmod(cell, cols)
        jitter = rng.uniform(-2.0, 2.0, size=2)
        base = (
            (col + 0.5) * cell_w + jitter[0],
            (row + 0.5) * cell_h + 0.05 * figure_height + jitter[1],
        )
        velocity = tuple(float(v) for v in rng.uniform(-0.4, 0.4, size=2))
        phase_rate = float(rng.uniform(0.1, 0.25))
        swing = float(rng.uniform(0.2, 0.5))
    else:
        figure_height = float(rng.uniform(20.0, 48.0))
        x = rng.uniform(0.4 * figure_height, width - 1 - 0.4 * figure_height)
        y = rng.uniform(0.55 * figure_height, height - 1 - 0.45 * figure_height)
        base = (float(x), float(y))
        # head roughly towards the centre so trajectories cross
        direction = np.array([width / 2 - x, height / 2 - y]) + rng.normal(0.0, 8.0, size=2)
        direction /= max(float(np.linalg.norm(direction)), 1e-6)
        velocity = tuple(float(v) for v in direction * rng.uniform(0.8, 2.0))
        phase_rate = float(rng.uniform(0.3, 0.6))
        swing = float(rng.uniform(0.3, 0.8))

    return FigureSpec(
        base=(float(base[0]), float(base[1])),
        velocity=velocity,
        height=figure_height,
        phase=phase,
        phase_rate=phase_rate,
        swing=swing,
        color=color,
        proportions=proportions,
    )


def generate_clip(
    seed: int,
    n_persons: int,
    difficulty: Difficulty = "easy",
    span: int = 1,
    velocity_scale: float | None = None,
    image_size: tuple[int, int] = FRAME_SIZE,
) -> ClipSample:
    """Generates one clip.

    Easy clips place slow figures in separate cells of a 2 x 4 grid; hard
    clips place larger, faster figures anywhere, heading for the centre, so
    trajectories overlap and bodies occlude each other.

    Args:
        seed (int): random seed; equal arguments give bit-identical clips.
        n_persons (int): persons G.
        difficulty (str, optional): ``"easy"`` or ``"hard"``.
            Defaults to "easy".
        span (int, optional): auxiliary frames T on each side.
            Defaults to 1.
        velocity_scale (float | None, optional): multiplies every figure's
            translation and limb motion; 0 gives a static clip.
            Defaults to None.
        image_size (tuple[int, int], optional): (H, W). Defaults to (64, 96).

    Returns:
        ClipSample: frames, ground truth and body masks.

    Raises:
        LayoutCapacityError: if ``n_persons`` is not in
            ``[1, layout_capacity(difficulty)]``.
    """
    capacity = layout_capacity(difficulty)
    if not 1 <= n_persons <= capacity:
        raise LayoutCapacityError(
            f"{difficulty} layout holds 1 to {capacity} persons, but got {n_persons}"
        )
    if span < 0:
        raise ValueError(f"span should be non-negative, but got {span}")

    height, width = image_size
    rng = np.random.default_rng(seed)
    background = generate_background(rng, height, width)
    cells = rng.permutation(capacity)[:n_persons].tolist()

    figures = []
    for i, cell in enumerate(cells):
        figure = _sample_figure(rng, i, difficulty, cell, height, width)
        while _in_frame_fraction(figure.pose_at(0), height, width) < MIN_IN_FRAME:
            figure = _sample_figure(rng, i, difficulty, cell, height, width)
        if velocity_scale is not None:
            figure = replace(
                figure,
                velocity=tuple(velocity_scale * v for v in figure.velocity),
                phase_rate=velocity_scale * figure.phase_rate,
            )
        figures.append(figure)

    frames, joints, visible, masks = [], [], [], []
    scale = np.array([width - 1, height - 1], dtype=np.float64)
    for dt in range(-span, span + 1):
        image, frame_masks = render_frame(figures, dt, background)
        pixels = np.stack([figure.pose_at(dt) for figure in figures])
        frames.append(image)
        masks.append(frame_masks)
        joints.append(pixels / scale)
        visible.append(joint_visibility(pixels, frame_masks))

    logger.debug(f"generated {difficulty} clip seed={seed} with {n_persons} persons")

    return ClipSample(
        frames=np.stack(frames),
        joints=np.stack(joints),
        visible=np.stack(visible),
        masks=np.stack(masks),
        figures=figures,
        span=span,
        seed=seed,
        difficulty=difficulty,
    )
