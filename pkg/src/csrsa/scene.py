"""Reference-game contexts, utterances and alternative sets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

SLOTS = ("size", "color", "type", "sub", "basic", "super")
TAXONOMY_SLOTS = ("sub", "basic", "super")
_SLOT_ORDER = {slot: i for i, slot in enumerate(SLOTS)}


class ContextError(ValueError):
    """Raised for malformed contexts, utterances or alternative policies."""


def _label(value) -> str | None:
    if value is None:
        return None
    value = " ".join(str(value).split()).lower()
    return value or None


@dataclass(frozen=True)
class FeatureBundle:
    type_name: str
    size: str | None = None
    color: str | None = None
    taxonomy: tuple[str, str, str] | None = None

    def __post_init__(self):
        type_name = _label(self.type_name)
        if not type_name:
            raise ContextError("type_name must be non-empty")
        object.__setattr__(self, "type_name", type_name)
        object.__setattr__(self, "size", _label(self.size))
        object.__setattr__(self, "color", _label(self.color))
        if self.taxonomy is not None:
            levels = tuple(_label(v) for v in self.taxonomy)
            if len(levels) != 3 or not all(levels):
                raise ContextError("taxonomy needs non-empty sub, basic and super labels")
            if len(set(levels)) != 3:
                raise ContextError(f"taxonomy levels must be distinct, got {levels}")
            object.__setattr__(self, "taxonomy", levels)

    def value(self, slot: str) -> str | None:
        """Label of this bundle for ``slot`` (None when the slot is unset)."""
        if slot == "type":
            return self.type_name
        if slot in TAXONOMY_SLOTS:
            if self.taxonomy is None:
                return None
            return self.taxonomy[TAXONOMY_SLOTS.index(slot)]
        if slot in ("size", "color"):
            return getattr(self, slot)
        raise ContextError(f"unknown slot {slot!r}")

    @property
    def key(self) -> str:
        """Canonical object key used by typicality tables, e.g. ``blue_banana``."""
        if self.taxonomy is not None:
            parts = [self.taxonomy[0]]
        else:
            parts = [v for v in (self.size, self.color, self.type_name) if v]
        return "_".join(p.replace(" ", "_") for p in parts)


@dataclass(frozen=True)
class SceneObject:
    id: str
    features: FeatureBundle

    def __post_init__(self):
        if not str(self.id):
            raise ContextError("object id must be non-empty")
        object.__setattr__(self, "id", str(self.id))

    @property
    def key(self) -> str:
        return self.features.key


def obj(id: str, type_name: str, size: str | None = None, color: str | None = None,
        taxonomy: Sequence[str] | None = None) -> SceneObject:
    """Shorthand constructor for a :class:`SceneObject`."""
    return SceneObject(id, FeatureBundle(type_name, size=size, color=color,
                                         taxonomy=tuple(taxonomy) if taxonomy else None))


@dataclass(frozen=True)
class ReferenceContext:
    """Objects in a scene, the designated target and the object prior.

    ``prior`` is stored as a tuple aligned with ``objects``; use
    :attr:`prior_map` for the id-keyed view.
    """

    objects: tuple[SceneObject, ...]
    target_id: str
    prior: tuple[float, ...]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    @property
    def target_index(self) -> int:
        return self.ids.index(self.target_id)

    @property
    def target(self) -> SceneObject:
        return self.objects[self.target_index]

    @property
    def distractors(self) -> tuple[SceneObject, ...]:
        return tuple(o for o in self.objects if o.id != self.target_id)

    @property
    def prior_map(self) -> dict[str, float]:
        return dict(zip(self.ids, self.prior))

    def __getitem__(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def with_target(self, target_id: str) -> "ReferenceContext":
        return make_context(self.objects, target_id, self.prior_map)


def make_context(objects: Iterable[SceneObject], target_id: str,
                 prior: Mapping[str, float] | None = None) -> ReferenceContext:
    """Validate objects, target and prior and build a :class:`ReferenceContext`.

    A missing prior becomes uniform. The prior must cover exactly the object
    ids, be nonnegative and sum to 1 within 1e-6. Off by more than 1e-12 it
    is renormalised, so a stored prior reloads unchanged.
    """
    objects = tuple(objects)
    if len(objects) < 2:
        raise ContextError("a context needs at least 2 objects")
    ids = [o.id for o in objects]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ContextError(f"duplicate object ids: {dupes}")
    target_id = str(target_id)
    if target_id not in ids:
        raise ContextError(f"target {target_id!r} is not one of the objects {ids}")
    if prior is None:
        values = [1.0 / len(objects)] * len(objects)
    else:
        prior = {str(k): float(v) for k, v in prior.items()}
        if set(prior) != set(ids):
            raise ContextError(f"prior keys {sorted(prior)} do not match object ids {sorted(ids)}")
        values = [prior[i] for i in ids]
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ContextError("prior mass must be finite and nonnegative")
        total = math.fsum(values)
        if abs(total - 1.0) > 1e-6:
            raise ContextError(f"prior sums to {total}, not 1")
        if abs(total - 1.0) > 1e-12:
            values = [v / total for v in values]
    return ReferenceContext(objects, target_id, tuple(values))


@dataclass(frozen=True, order=True)
class Utterance:
    """A coded utterance: ordered (slot, label) terms.

    Terms are kept in canonical slot order (size, color, type, sub, basic,
    super) so that equal utterances compare and hash equal.
    """

    terms: tuple[tuple[str, str], ...]

    def __post_init__(self):
        terms = tuple((str(s), _label(l)) for s, l in self.terms)
        if not terms:
            raise ContextError("an utterance needs at least one term")
        slots = [s for s, _ in terms]
        for s, l in terms:
            if s not in _SLOT_ORDER:
                raise ContextError(f"unknown slot {s!r}")
            if not l:
                raise ContextError(f"empty label for slot {s!r}")
        if len(set(slots)) != len(slots):
            raise ContextError(f"duplicate slots in utterance {terms}")
        levels = [s for s in slots if s in TAXONOMY_SLOTS]
        if len(levels) > 1 or (levels and "type" in slots):
            raise ContextError("at most one taxonomy level, never together with 'type'")
        object.__setattr__(self, "terms", tuple(sorted(terms, key=lambda t: _SLOT_ORDER[t[0]])))

    @classmethod
    def of(cls, **slots: str) -> "Utterance":
        """``Utterance.of(size="small", color="blue")``; ``super_`` is accepted for ``super``."""
        return cls(tuple((k.rstrip("_"), v) for k, v in slots.items()))

    @classmethod
    def parse_key(cls, key: str) -> "Utterance":
        """Inverse of :attr:`key`: ``"size:small|color:blue"``."""
        terms = []
        for part in key.split("|"):
            slot, sep, label = part.partition(":")
            if not sep:
                raise ContextError(f"malformed utterance key {key!r}")
            terms.append((slot.strip(), label))
        return cls(tuple(terms))

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.terms)

    @property
    def text(self) -> str:
        """Surface form in canonical order, e.g. ``small blue``."""
        return " ".join(l for _, l in self.terms)

    @property
    def key(self) -> str:
        return "|".join(f"{s}:{l}" for s, l in self.terms)

    @property
    def utterance_class(self) -> str:
        """Coded class such as ``size``, ``color`` or ``size-and-color``."""
        return "-and-".join(self.slots)

    def is_true_of(self, o: SceneObject) -> bool:
        return all(o.features.value(s) == l for s, l in self.terms)

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class AlternativePolicy:
    """How the utterance alternatives for a context are built.

    ``slots`` selects the feature dimensions used by the ``size-color-grid``
    and ``contextual-features`` modes; it defaults to (size, color) and
    (color, type) respectively. ``require`` drops alternatives that do not
    mention every listed slot (e.g. ``("type",)`` keeps only noun phrases).
    """

    mode: str = "contextual-features"
    slots: tuple[str, ...] | None = None
    require: tuple[str, ...] = ()

    MODES = ("size-color-grid", "contextual-features", "taxonomy-levels")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ContextError(f"unknown alternative mode {self.mode!r}; choose from {self.MODES}")
        if self.slots is not None:
            slots = tuple(self.slots)
            bad = [s for s in slots if s not in ("size", "color", "type")]
            if bad or not slots:
                raise ContextError(f"policy slots must be drawn from size/color/type, got {slots}")
            object.__setattr__(self, "slots", tuple(sorted(set(slots), key=_SLOT_ORDER.get)))
        require = tuple(self.require)
        if any(s not in _SLOT_ORDER for s in require):
            raise ContextError(f"unknown required slot in {require}")
        object.__setattr__(self, "require", require)

    @property
    def effective_slots(self) -> tuple[str, ...]:
        if self.slots is not None:
            return self.slots
        return ("size", "color") if self.mode == "size-color-grid" else ("color", "type")


def scene_variation(ctx: ReferenceContext, insufficient_slot: str) -> float:
    """Share of distractors whose ``insufficient_slot`` value differs from the target's."""
    values = [o.features.value(insufficient_slot) for o in ctx.objects]
    if any(v is None for v in values):
        raise ContextError(f"every object needs a value for {insufficient_slot!r}")
    target_value = ctx.target.features.value(insufficient_slot)
    distractors = ctx.distractors
    n_diff = sum(o.features.value(insufficient_slot) != target_value for o in distractors)
    return n_diff / len(distractors)


def enumerate_alternatives(ctx: ReferenceContext, policy: AlternativePolicy) -> tuple[Utterance, ...]:
    """Sorted tuple of utterance alternatives for ``ctx`` under ``policy``."""
    out: set[Utterance] = set()
    if policy.mode == "taxonomy-levels":
        taxonomy = ctx.target.features.taxonomy
        if taxonomy is None:
            raise ContextError("taxonomy-levels policy needs a target with a taxonomy")
        out = {Utterance(((slot, label),)) for slot, label in zip(TAXONOMY_SLOTS, taxonomy)}
    else:
        slots = policy.effective_slots
        labels = {s: sorted({o.features.value(s) for o in ctx.objects} - {None}) for s in slots}
        for s in slots:
            out.update(Utterance(((s, l),)) for l in labels[s])
        if policy.mode == "size-color-grid":
            for combo in itertools.product(*(labels[s] for s in slots)):
                if len(combo) > 1:
                    out.add(Utterance(tuple(zip(slots, combo))))
        else:
            for o in ctx.objects:
                for r in range(2, len(slots) + 1):
                    for sub in itertools.combinations(slots, r):
                        vals = [o.features.value(s) for s in sub]
                        if all(vals):
                            out.add(Utterance(tuple(zip(sub, vals))))
    if policy.require:
        out = {u for u in out if all(s in u.slots for s in policy.require)}
    if not out:
        raise ContextError("policy produced no alternatives for this context")
    return tuple(sorted(out, key=_utterance_sort_key))


def _utterance_sort_key(u: Utterance):
    return (u.text, u.key)


def resolve_utterance(code: str, ctx: ReferenceContext, alternatives: Sequence[Utterance]) -> Utterance:
    """Map a coded utterance string onto one of ``alternatives``.

    Accepts an utterance key (``size:small|color:blue``), surface text
    (``small blue``) or a coded class (``size-and-color``), which names the
    target's own values for those slots.
    """
    code = code.strip()
    if ":" in code:
        u = Utterance.parse_key(code)
    else:
        text = " ".join(code.lower().split())
        by_text = [a for a in alternatives if a.text == text]
        if len(by_text) == 1:
            return by_text[0]
        slots = text.split("-and-")
        if all(s in _SLOT_ORDER for s in slots):
            values = [ctx.target.features.value(s) for s in slots]
            if not all(values):
                raise ContextError(f"target lacks a value for coded class {code!r}")
            u = Utterance(tuple(zip(slots, values)))
        else:
            raise ContextError(f"cannot resolve coded utterance {code!r}")
    if u not in alternatives:
        raise ContextError(f"utterance {u.text!r} is not among the alternatives")
    return u
