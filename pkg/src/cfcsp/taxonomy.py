"""Label spaces for the two-stage cascade.

Three index spaces are involved:

* fine     -- the 8 expression classes that are finally reported,
* coarse   -- 5 classes, where the four negative expressions collapse into one,
* negative -- the 4 negative expressions the second stage separates.

All index assignments live in :class:`LabelScheme`, so a dataset with a
different ordering only needs a different config, never a code change.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import IntEnum

from ._kv import parse_key_values, split_list
from .errors import InvalidLabelError, SchemeValidationError

N_FINE = 8
N_COARSE = 5
N_NEGATIVE = 4

DEFAULT_FINE = ("Neutral", "Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise", "Other")
DEFAULT_COARSE = ("Neutral", "Negative", "Happiness", "Surprise", "Other")
DEFAULT_NEGATIVE = ("Anger", "Disgust", "Fear", "Sadness")


class Expression(IntEnum):
    """Canonical fine indices (Aff-Wild2 EXPR order)."""

    NEUTRAL = 0
    ANGER = 1
    DISGUST = 2
    FEAR = 3
    HAPPINESS = 4
    SADNESS = 5
    SURPRISE = 6
    OTHER = 7


class Coarse(IntEnum):
    NEUTRAL = 0
    NEGATIVE = 1
    HAPPINESS = 2
    SURPRISE = 3
    OTHER = 4


class Negative(IntEnum):
    ANGER = 0
    DISGUST = 1
    FEAR = 2
    SADNESS = 3


def canonical_name(name: str) -> str:
    return name.strip().capitalize()


def _check_distinct(names: tuple[str, ...], what: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise SchemeValidationError(f"bijection violated: duplicate name {n!r} in {what} list")
        seen.add(n)


@dataclass(frozen=True)
class LabelScheme:
    """Immutable description of the fine/coarse/negative spaces and their maps.

    ``fine_to_coarse[i]`` is the coarse index of fine label ``i``;
    ``negative_to_fine[j]`` is the fine index of negative label ``j``.
    """

    fine_names: tuple[str, ...]
    coarse_names: tuple[str, ...]
    negative_names: tuple[str, ...]
    fine_to_coarse: tuple[int, ...]
    negative_to_fine: tuple[int, ...]

    def __post_init__(self) -> None:
        for names, size, what in (
            (self.fine_names, N_FINE, "fine"),
            (self.coarse_names, N_COARSE, "coarse"),
            (self.negative_names, N_NEGATIVE, "negative"),
        ):
            if len(names) != size:
                raise SchemeValidationError(
                    f"cardinality violated: {what} list has {len(names)} names, expected {size}"
                )
            _check_distinct(names, what)
        if len(self.fine_to_coarse) != N_FINE or any(
            not 0 <= c < N_COARSE for c in self.fine_to_coarse
        ):
            raise SchemeValidationError("fine_to_coarse must map every fine label to a coarse index")
        if len(self.negative_to_fine) != N_NEGATIVE or len(set(self.negative_to_fine)) != N_NEGATIVE:
            raise SchemeValidationError("negative_to_fine must be injective over 4 negative labels")
        if any(not 0 <= f < N_FINE for f in self.negative_to_fine):
            raise SchemeValidationError("negative_to_fine points outside the fine space")

        # The group label is the unique coarse label with fan-out > 1.
        fan_in: dict[int, list[int]] = {}
        for f, c in enumerate(self.fine_to_coarse):
            fan_in.setdefault(c, []).append(f)
        if len(fan_in) != N_COARSE:
            raise SchemeValidationError("fine_to_coarse must be onto the coarse space")
        groups = [c for c, fs in fan_in.items() if len(fs) > 1]
        if len(groups) != 1:
            raise SchemeValidationError("exactly one coarse label must group several fine labels")
        group = groups[0]
        if sorted(fan_in[group]) != sorted(self.negative_to_fine):
            raise SchemeValidationError(
                "preimage-of-Negative mismatch: grouped fine labels differ from the negative list"
            )
        for j, f in enumerate(self.negative_to_fine):
            if self.fine_names[f] != self.negative_names[j]:
                raise SchemeValidationError(
                    f"negative label {self.negative_names[j]!r} maps to fine {self.fine_names[f]!r}"
                )
        for f, c in enumerate(self.fine_to_coarse):
            if c != group and self.fine_names[f] != self.coarse_names[c]:
                raise SchemeValidationError(
                    f"fine label {self.fine_names[f]!r} maps to differently named coarse "
                    f"label {self.coarse_names[c]!r}"
                )
        object.__setattr__(self, "_group", group)

    @classmethod
    def from_names(
        cls,
        fine: list[str] | tuple[str, ...],
        coarse: list[str] | tuple[str, ...],
        negative: list[str] | tuple[str, ...],
        negative_group: list[str] | tuple[str, ...] | None = None,
    ) -> "LabelScheme":
        """Build a scheme from name lists, deriving both index maps by name."""
        fine_t = tuple(canonical_name(n) for n in fine)
        coarse_t = tuple(canonical_name(n) for n in coarse)
        neg_t = tuple(canonical_name(n) for n in negative)
        group_t = neg_t if negative_group is None else tuple(canonical_name(n) for n in negative_group)

        for names, size, what in (
            (fine_t, N_FINE, "fine"),
            (coarse_t, N_COARSE, "coarse"),
            (neg_t, N_NEGATIVE, "negative"),
        ):
            if len(names) != size:
                raise SchemeValidationError(
                    f"cardinality violated: {what} list has {len(names)} names, expected {size}"
                )
            _check_distinct(names, what)
        _check_distinct(group_t, "negative_group")
        if set(group_t) != set(neg_t):
            raise SchemeValidationError(
                "preimage-of-Negative mismatch: negative_group must name exactly the negative labels"
            )
        missing = [n for n in neg_t if n not in fine_t]
        if missing:
            raise SchemeValidationError(f"negative labels {missing} are not fine labels")
        group_names = [c for c in coarse_t if c not in fine_t]
        if len(group_names) != 1:
            raise SchemeValidationError(
                "coarse list must contain exactly one name absent from the fine list (the group label)"
            )
        group = coarse_t.index(group_names[0])
        f2c = []
        for name in fine_t:
            if name in group_t:
                f2c.append(group)
            elif name in coarse_t:
                f2c.append(coarse_t.index(name))
            else:
                raise SchemeValidationError(f"fine label {name!r} has no coarse counterpart")
        n2f = tuple(fine_t.index(n) for n in neg_t)
        return cls(fine_t, coarse_t, neg_t, tuple(f2c), n2f)

    @property
    def negative_coarse_index(self) -> int:
        return self._group  # type: ignore[attr-defined]

    @property
    def negative_coarse_name(self) -> str:
        return self.coarse_names[self.negative_coarse_index]

    def is_negative(self, fine_label: int) -> bool:
        return to_coarse(fine_label, self) == self.negative_coarse_index

    def fine_index(self, name: str) -> int:
        try:
            return self.fine_names.index(canonical_name(name))
        except ValueError:
            raise InvalidLabelError(f"unknown fine label name {name!r}") from None


DEFAULT_SCHEME = LabelScheme.from_names(DEFAULT_FINE, DEFAULT_COARSE, DEFAULT_NEGATIVE)


def _check_index(label: int, size: int, what: str) -> int:
    if isinstance(label, bool):
        raise InvalidLabelError(f"{what} label must be an integer, got {label!r}")
    try:
        idx = operator.index(label)
    except TypeError:
        raise InvalidLabelError(f"{what} label must be an integer, got {label!r}") from None
    if not 0 <= idx < size:
        raise InvalidLabelError(f"{what} label index {idx} outside [0, {size - 1}]")
    return idx


def to_coarse(label: int, scheme: LabelScheme = DEFAULT_SCHEME) -> int:
    """Coarse index for a fine label; the negatives all land on the group label."""
    return scheme.fine_to_coarse[_check_index(label, N_FINE, "fine")]


def from_negative(label: int, scheme: LabelScheme = DEFAULT_SCHEME) -> int:
    """Fine index carrying the same name as negative label ``label``."""
    return scheme.negative_to_fine[_check_index(label, N_NEGATIVE, "negative")]


def coarse_to_fine(label: int, scheme: LabelScheme = DEFAULT_SCHEME) -> int:
    """Fine index for a non-group coarse label, matched by name.

    Raises InvalidLabelError for the group label, which has no single fine
    counterpart.
    """
    idx = _check_index(label, N_COARSE, "coarse")
    if idx == scheme.negative_coarse_index:
        raise InvalidLabelError(f"coarse label {scheme.coarse_names[idx]!r} needs the negative stage")
    return scheme.fine_names.index(scheme.coarse_names[idx])


def load_scheme(config_text: str | None, source: str = "<scheme>") -> LabelScheme:
    """Parse a scheme document, or return the canonical scheme.

    ``None``, an empty document, or the single word ``default`` select the
    canonical scheme. Otherwise the document must provide ``fine``,
    ``coarse``, ``negative`` and ``negative_group`` as comma-separated name
    lists.
    """
    if config_text is None or config_text.strip().lower() in ("", "default"):
        return DEFAULT_SCHEME
    kv = parse_key_values(config_text, source)
    return scheme_from_mapping({k: v for k, (v, _) in kv.items()})


SCHEME_KEYS = ("fine", "coarse", "negative", "negative_group")


def scheme_from_mapping(values: dict[str, str]) -> LabelScheme:
    unknown = sorted(set(values) - set(SCHEME_KEYS))
    if unknown:
        raise SchemeValidationError(f"unknown scheme keys: {', '.join(unknown)}")
    missing = [k for k in SCHEME_KEYS if k not in values]
    if missing:
        raise SchemeValidationError(f"scheme config missing keys: {', '.join(missing)}")
    return LabelScheme.from_names(
        split_list(values["fine"]),
        split_list(values["coarse"]),
        split_list(values["negative"]),
        split_list(values["negative_group"]),
    )


def scheme_to_text(scheme: LabelScheme) -> str:
    group = [scheme.fine_names[f] for f in scheme.negative_to_fine]
    return (
        f"fine = {', '.join(scheme.fine_names)}\n"
        f"coarse = {', '.join(scheme.coarse_names)}\n"
        f"negative = {', '.join(scheme.negative_names)}\n"
        f"negative_group = {', '.join(group)}\n"
    )
