"""Six-factor symbolic scene space, image indexing and contrast profiles.

Label vectors are stored in the fixed order
``(floor_color, wall_color, object_color, scale, shape, orientation)``,
which is also the mixed-radix digit order used for image ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

FEATURES = ("floor_color", "wall_color", "object_color", "scale", "shape", "orientation")
CARDINALITY = {
    "floor_color": 10,
    "wall_color": 10,
    "object_color": 10,
    "scale": 8,
    "shape": 4,
    "orientation": 15,
}
COLOR_FEATURES = ("floor_color", "wall_color", "object_color")
OBJECT_FEATURES = ("shape", "object_color", "scale")
BACKGROUND_FEATURES = ("wall_color", "floor_color")

RADICES = tuple(CARDINALITY[f] for f in FEATURES)
N_IMAGES = int(np.prod(RADICES))  # 480,000
# place value of each digit, most significant first
_PLACES = tuple(int(np.prod(RADICES[i + 1:])) for i in range(len(RADICES)))


class ValidationError(ValueError):
    """An out-of-range label component or image id."""


class DegeneratePairError(ValueError):
    """Target and distractor are the same image."""


class Label(NamedTuple):
    floor_color: int
    wall_color: int
    object_color: int
    scale: int
    shape: int
    orientation: int

    def __getitem__(self, key):
        if key.__class__ is str:
            return getattr(self, key)
        return tuple.__getitem__(self, key)

    def replace(self, **values) -> "Label":
        return self._replace(**values)


def check_feature(feature: str) -> None:
    if feature not in CARDINALITY:
        raise ValidationError(f"unknown feature {feature!r}")


def make_label(values: Sequence[int]) -> Label:
    """Build a validated Label from six integers in canonical order.

    Label instances pass through unchanged; build them with this function or
    ``decode_id`` rather than calling ``Label`` directly.
    """
    if type(values) is Label:
        return values
    values = tuple(values)
    if len(values) != len(FEATURES):
        raise ValidationError(f"label needs {len(FEATURES)} components, got {len(values)}")
    for feature, v in zip(FEATURES, values):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ValidationError(f"{feature}: value {v!r} is not an integer")
        if not 0 <= v < CARDINALITY[feature]:
            raise ValidationError(
                f"{feature}: value {v} outside [0, {CARDINALITY[feature]})")
    return Label(*(int(v) for v in values))


def encode_id(label: Sequence[int]) -> int:
    label = make_label(label)
    return sum(v * p for v, p in zip(label, _PLACES))


def decode_id(image_id: int) -> Label:
    if isinstance(image_id, bool) or not isinstance(image_id, (int, np.integer)):
        raise ValidationError(f"image id {image_id!r} is not an integer")
    if not 0 <= image_id < N_IMAGES:
        raise ValidationError(f"image id {image_id} outside [0, {N_IMAGES})")
    digits = []
    rest = int(image_id)
    for p in _PLACES:
        d, rest = divmod(rest, p)
        digits.append(d)
    return Label(*digits)


def encode_ids(labels: np.ndarray) -> np.ndarray:
    """Vectorised encode_id over an (n, 6) integer array."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 2 or labels.shape[1] != len(FEATURES):
        raise ValidationError(f"expected shape (n, 6), got {labels.shape}")
    radices = np.asarray(RADICES)
    bad = (labels < 0) | (labels >= radices)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ValidationError(
            f"{FEATURES[col]}: value {labels[row, col]} outside [0, {RADICES[col]}) at row {row}")
    return labels @ np.asarray(_PLACES, dtype=np.int64)


def decode_ids(ids: np.ndarray) -> np.ndarray:
    """Vectorised decode_id; returns an (n, 6) array."""
    ids = np.asarray(ids, dtype=np.int64)
    if ((ids < 0) | (ids >= N_IMAGES)).any():
        raise ValidationError(f"image ids must lie in [0, {N_IMAGES})")
    places = np.asarray(_PLACES, dtype=np.int64)
    return (ids[:, None] // places) % np.asarray(RADICES)


def all_labels() -> np.ndarray:
    """Every label in id order, as a (480000, 6) array."""
    return decode_ids(np.arange(N_IMAGES))


@dataclass(frozen=True)
class ImagePair:
    target: Label
    distractor: Label

    def __post_init__(self):
        object.__setattr__(self, "target", make_label(self.target))
        object.__setattr__(self, "distractor", make_label(self.distractor))
        if self.target == self.distractor:
            raise DegeneratePairError(f"target and distractor are identical: {tuple(self.target)}")

    @property
    def target_id(self) -> int:
        return encode_id(self.target)

    @property
    def distractor_id(self) -> int:
        return encode_id(self.distractor)

    def swapped(self) -> "ImagePair":
        return ImagePair(self.distractor, self.target)


@dataclass(frozen=True)
class ContrastProfile:
    """Which features set the target apart from the distractor."""

    contrastive: frozenset

    @property
    def z(self) -> int:
        return len(self.contrastive)

    @property
    def non_contrastive(self) -> frozenset:
        return frozenset(FEATURES) - self.contrastive

    def status(self, feature: str) -> str:
        check_feature(feature)
        return "contrastive" if feature in self.contrastive else "non_contrastive"

    def to_dict(self) -> dict:
        return {f: self.status(f) for f in FEATURES}


def contrast_profile(pair: ImagePair) -> ContrastProfile:
    diff = frozenset(f for f in FEATURES if pair.target[f] != pair.distractor[f])
    if not diff:
        raise DegeneratePairError("pair has no differing feature")
    return ContrastProfile(diff)
