"""Three-level gesture taxonomy and per-level trial partitioning.

The eight gestures form a full binary tree over (hand, finger state,
thumb state): level 1 splits on hand, level 2 on fingers, level 3 on
thumb.  Each level's two categories carry the signed labels -1 / +1,
and the three signs pack into a leaf index 0..7.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import ConfigError, TrainingError

if TYPE_CHECKING:
    from .dataio import Dataset, TrialMatrix, TrialMeta

LEVELS = (1, 2, 3)
N_GESTURES = 8

HAND_NAMES = {-1: "left", 1: "right"}
FINGERS_NAMES = {-1: "extension", 1: "flexion"}
THUMB_NAMES = {-1: "abduction", 1: "adduction"}

AXIS_FIELDS = {1: "hand", 2: "fingers", 3: "thumb"}
AXIS_NAMES = {1: HAND_NAMES, 2: FINGERS_NAMES, 3: THUMB_NAMES}
_SIGN_OF_NAME = {
    field: {name: sign for sign, name in names.items()}
    for field, names in (("hand", HAND_NAMES), ("fingers", FINGERS_NAMES), ("thumb", THUMB_NAMES))
}


def check_level(level: int) -> int:
    if level not in LEVELS:
        raise ConfigError(f"level must be one of {LEVELS}, got {level!r}")
    return level


def _check_sign(value, field: str) -> int:
    if value not in (-1, 1):
        raise ConfigError(f"{field} must be -1 or +1, got {value!r}")
    return value


def _bit(sign: int) -> int:
    return (sign + 1) // 2


@dataclass(frozen=True)
class GestureClass:
    """One leaf of the gesture tree, as a signed coordinate per axis."""

    hand: int
    fingers: int
    thumb: int

    def __post_init__(self):
        for level in LEVELS:
            field = AXIS_FIELDS[level]
            _check_sign(getattr(self, field), field)

    @property
    def leaf_index(self) -> int:
        """Pack the axis signs into 0..7 (hand is the high bit)."""
        return 4 * _bit(self.hand) + 2 * _bit(self.fingers) + _bit(self.thumb)

    def axis_sign(self, level: int) -> int:
        """The gesture's category sign (-1/+1) on the given level's axis."""
        check_level(level)
        return getattr(self, AXIS_FIELDS[level])

    @classmethod
    def from_index(cls, index: int) -> "GestureClass":
        if not 0 <= int(index) < N_GESTURES:
            raise ConfigError(f"leaf index must be in 0..{N_GESTURES - 1}, got {index!r}")
        index = int(index)
        return cls(
            hand=2 * ((index >> 2) & 1) - 1,
            fingers=2 * ((index >> 1) & 1) - 1,
            thumb=2 * (index & 1) - 1,
        )

    @classmethod
    def from_names(cls, hand: str, fingers: str, thumb: str) -> "GestureClass":
        signs = {}
        for field, name in (("hand", hand), ("fingers", fingers), ("thumb", thumb)):
            try:
                signs[field] = _SIGN_OF_NAME[field][name]
            except (KeyError, TypeError):
                valid = sorted(_SIGN_OF_NAME[field])
                raise ConfigError(
                    f"unknown {field} label {name!r}, expected one of {valid}"
                ) from None
        return cls(**signs)

    def to_names(self) -> dict[str, str]:
        return {
            "hand": HAND_NAMES[self.hand],
            "fingers": FINGERS_NAMES[self.fingers],
            "thumb": THUMB_NAMES[self.thumb],
        }

    def __str__(self) -> str:
        names = self.to_names()
        return f"{names['hand']}/{names['fingers']}/{names['thumb']}"


ALL_GESTURES = tuple(GestureClass.from_index(i) for i in range(N_GESTURES))


@dataclass(frozen=True)
class CategoryLabel:
    """One side (-1/+1) of a level's binary split."""

    level: int
    l: int

    def __post_init__(self):
        check_level(self.level)
        _check_sign(self.l, "category label")

    @property
    def name(self) -> str:
        return AXIS_NAMES[self.level][self.l]


def category_of(gesture: GestureClass, level: int) -> CategoryLabel:
    """Project a gesture onto the given level's axis."""
    return CategoryLabel(level=check_level(level), l=gesture.axis_sign(level))


@dataclass(frozen=True)
class CategoryScope:
    """Which trials a level classifier trains on.

    ``path=None`` pools every trial and splits on the level's own axis
    (three classifiers cover the tree).  ``path=(s1, ...)`` keeps only
    trials whose higher-level signs match, mirroring one branch of the
    tree (seven classifiers cover it).
    """

    path: tuple[int, ...] | None = None

    @classmethod
    def pooled(cls) -> "CategoryScope":
        return cls(path=None)

    @classmethod
    def branch(cls, *signs: int) -> "CategoryScope":
        return cls(path=tuple(_check_sign(s, "branch sign") for s in signs))

    def admits(self, gesture: GestureClass) -> bool:
        if self.path is None:
            return True
        return all(
            gesture.axis_sign(level) == sign
            for level, sign in enumerate(self.path, start=1)
        )

    def __str__(self) -> str:
        if self.path is None:
            return "pooled"
        if not self.path:
            return "branch()"
        names = [AXIS_NAMES[lvl][s] for lvl, s in enumerate(self.path, start=1)]
        return "branch(" + ", ".join(names) + ")"


def partition(
    ds: "Dataset",
    level: int,
    scope: CategoryScope = CategoryScope.pooled(),
) -> tuple[list, list]:
    """Split a dataset's trials into the level's two categories.

    Returns ``(trials_neg, trials_pos)`` as lists of (TrialMeta,
    TrialMatrix) pairs.  The two sets are disjoint and, for pooled
    scope, exhaust the dataset.  Raises TrainingError when either side
    is empty, naming the empty category.
    """
    check_level(level)
    if scope.path is not None and len(scope.path) != level - 1:
        raise ConfigError(
            f"branch scope for level {level} needs {level - 1} fixed signs, "
            f"got {len(scope.path)}"
        )
    neg: list = []
    pos: list = []
    for meta, mat in ds.trials:
        if not scope.admits(meta.gesture):
            continue
        (neg if meta.gesture.axis_sign(level) == -1 else pos).append((meta, mat))
    for side, label in ((neg, -1), (pos, 1)):
        if not side:
            raise TrainingError(
                f"no trials in category '{AXIS_NAMES[level][label]}' "
                f"at level {level} (scope: {scope})"
            )
    return neg, pos
