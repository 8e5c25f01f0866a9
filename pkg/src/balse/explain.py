"""Taste profiles and per-item explanations from LASSO preference rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lasso import clamp_tau

# Sentence templates; {item}, {because} and {even_though} are filled in.
TEMPLATES = {
    "recommend": "We recommend to you {item}, because there is {because}",
    "warn": "You might not like {item} because there is {because}",
    "even_though": ", even though there is {even_though}",
    "empty": "No tag of {item} carries a learned preference",
}


@dataclass(frozen=True)
class TasteProfile:
    user_index: int
    top_positive: list[tuple[str, float]]
    top_negative: list[tuple[str, float]]


@dataclass(frozen=True)
class Explanation:
    top_positive: list[tuple[str, float]]   # (tag, contribution), largest first
    top_negative: list[tuple[str, float]]   # most negative first
    score: float                            # unclamped sum of contributions
    total: float                            # clamped prediction

    @property
    def empty(self) -> bool:
        return not self.top_positive and not self.top_negative


def _ranked(values: np.ndarray, tag_names, k: int):
    # stable sort keeps index order under ties
    pos = [i for i in np.argsort(-values, kind="stable") if values[i] > 0][:k]
    neg = [i for i in np.argsort(values, kind="stable") if values[i] < 0][:k]
    return ([(tag_names[i], float(values[i])) for i in pos],
            [(tag_names[i], float(values[i])) for i in neg])


def taste_profile(P_i, tag_names, k: int = 6, user_index: int = -1) -> TasteProfile:
    P_i = np.asarray(P_i, dtype=np.float64)
    if len(P_i) != len(tag_names):
        raise ValueError("preference row and tag names differ in length")
    pos, neg = _ranked(P_i, tag_names, k)
    return TasteProfile(user_index, pos, neg)


def explain_prediction(P_i, T_j, tag_names, k: int = 3) -> Explanation:
    P_i = np.asarray(P_i, dtype=np.float64)
    T_j = np.asarray(T_j, dtype=np.float64)
    if not (len(P_i) == len(T_j) == len(tag_names)):
        raise ValueError("preference row, tag row and tag names differ in length")
    contrib = P_i * T_j
    score = float(contrib.sum())
    pos, neg = _ranked(contrib, tag_names, k)
    return Explanation(pos, neg, score, clamp_tau(score))


def _join(tags) -> str:
    names = [t for t, _ in tags]
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def render(expl: Explanation, item: str, templates=TEMPLATES) -> str:
    """Sentence form; the sign of the clamped total picks recommend vs warn."""
    if expl.empty:
        return templates["empty"].format(item=item) + "."
    # a nonnegative total implies a positive contribution exists, and vice versa
    if expl.total >= 0:
        main, other, key = expl.top_positive, expl.top_negative, "recommend"
    else:
        main, other, key = expl.top_negative, expl.top_positive, "warn"
    text = templates[key].format(item=item, because=_join(main))
    if other:
        text += templates["even_though"].format(even_though=_join(other))
    return text + "."


def profile_lines(profile: TasteProfile) -> list[str]:
    likes = ", ".join(f"{t} ({w:+.3f})" for t, w in profile.top_positive) or "-"
    dislikes = ", ".join(f"{t} ({w:+.3f})" for t, w in profile.top_negative) or "-"
    return [f"most preferred tags: {likes}", f"most disliked tags: {dislikes}"]


def explanation_rows(expl: Explanation):
    """(side, rank, tag, contribution) rows for CSV output."""
    for side, items in (("positive", expl.top_positive), ("negative", expl.top_negative)):
        for rank, (tag, c) in enumerate(items, 1):
            yield side, rank, tag, c
