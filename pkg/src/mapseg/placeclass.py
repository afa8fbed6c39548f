"""Place classifiers over mined segments.

Two retrieval routes: a TF-IDF bag-of-visual-words scorer where each mined
segment contributes place-specific words, and a compact inverted file keyed
by segment-class tokens.  Raw scores are handed to the localization module
unnormalized.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .core import MapSegment


@dataclass(frozen=True)
class Codebook:
    """Deterministic descriptor quantizer: seeded nearest-centroid table."""

    centroids: np.ndarray  # (word_count, dim)

    @classmethod
    def from_seed(cls, word_count: int, dim: int, seed: int) -> "Codebook":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((word_count, dim)))

    @property
    def word_count(self) -> int:
        return self.centroids.shape[0]

    def _distances(self, vec: np.ndarray) -> np.ndarray:
        diff = self.centroids - np.asarray(vec, dtype=np.float64)
        return np.sqrt(np.sum(diff * diff, axis=1))

    def quantize(self, vec) -> int:
        """Nearest centroid; ties resolve to the smallest word id."""
        return int(np.argmin(self._distances(vec)))

    def quantize_with_ratio(self, vec) -> Tuple[int, float]:
        """(word id, nearest/second-nearest distance ratio)."""
        d = self._distances(vec)
        order = np.argsort(d, kind="stable")
        best = int(order[0])
        if d.shape[0] < 2:
            return best, 0.0
        d2 = d[order[1]]
        if d2 == 0.0:
            return best, 0.0 if d[best] == 0.0 else math.inf
        return best, float(d[best] / d2)


def build_bow(
    descriptors_by_class: Mapping[int, np.ndarray], codebook: Codebook
) -> Tuple[Dict[int, Counter], Dict[int, int]]:
    """Per-class word histograms plus document frequencies."""
    docs: Dict[int, Counter] = {}
    for cls, descs in descriptors_by_class.items():
        descs = np.atleast_2d(np.asarray(descs, dtype=np.float64))
        if descs.size == 0:
            raise ValueError(f"class {cls} has no descriptors")
        hist: Counter = Counter()
        for vec in descs:
            hist[codebook.quantize(vec)] += 1
        docs[cls] = hist
    df: Dict[int, int] = Counter()
    for hist in docs.values():
        for word in hist:
            df[word] += 1
    return docs, dict(df)


def score_bow(
    query_descriptors: np.ndarray,
    docs: Mapping[int, Counter],
    df: Mapping[int, int],
    n_docs: int,
    codebook: Codebook,
    ratio_test: bool = True,
    ratio_threshold: float = 0.8,
) -> Dict[int, float]:
    """TF-IDF scores: sum over query words of tf_q * tf_class * idf^2.

    With the ratio test on, a query descriptor votes only when its
    nearest/second-nearest centroid distance ratio is below the threshold.
    Words never seen in any class (df = 0) contribute nothing.
    """
    query = np.atleast_2d(np.asarray(query_descriptors, dtype=np.float64))
    tf_q: Counter = Counter()
    for vec in query:
        if ratio_test:
            word, ratio = codebook.quantize_with_ratio(vec)
            if ratio >= ratio_threshold:
                continue
        else:
            word = codebook.quantize(vec)
        tf_q[word] += 1

    scores = {cls: 0.0 for cls in docs}
    for word, qcount in tf_q.items():
        d = df.get(word, 0)
        if d == 0:
            continue
        idf2 = math.log(n_docs / d) ** 2
        for cls, hist in docs.items():
            c = hist.get(word, 0)
            if c:
                scores[cls] += qcount * c * idf2
    return scores


@dataclass(frozen=True)
class SegmentClassIndex:
    """Inverted file over segment-class tokens; log2(C)-bit token width."""

    class_count: int
    postings: Mapping[int, Tuple[Tuple[int, int], ...]]  # token -> ((place, frame), ...)
    token_bits: int


def token_width_bits(class_count: int) -> int:
    if class_count < 1:
        raise ValueError("class count must be positive")
    return max(1, math.ceil(math.log2(class_count)))


def build_class_index(
    tokens_by_place: Mapping[int, Sequence[Tuple[int, int]]], class_count: int
) -> SegmentClassIndex:
    """Index (frame, token) observations per place into sorted postings."""
    postings: Dict[int, List[Tuple[int, int]]] = {}
    for place, observations in tokens_by_place.items():
        for frame, token in observations:
            if not 0 <= token < class_count:
                raise ValueError(
                    f"token {token} out of range for {class_count} classes"
                )
            postings.setdefault(token, []).append((place, frame))
    return SegmentClassIndex(
        class_count=class_count,
        postings={t: tuple(sorted(p)) for t, p in sorted(postings.items())},
        token_bits=token_width_bits(class_count),
    )


def score_class_index(
    query_tokens: Sequence[int], index: SegmentClassIndex
) -> Dict[int, float]:
    """Multiset-intersection size between the query bag and each place's bag."""
    query_bag = Counter(query_tokens)
    place_bags: Dict[int, Counter] = {}
    for token, posts in index.postings.items():
        for place, _ in posts:
            place_bags.setdefault(place, Counter())[token] += 1
    return {
        place: float(sum(min(n, bag[t]) for t, n in query_bag.items()))
        for place, bag in place_bags.items()
    }


def assemble_training_set(
    segments: Sequence[MapSegment],
    image_extent: Tuple[float, float],
    variant: str = "whole",
    bbox_min_pixels: int = 100,
) -> List[Tuple[int, int, Tuple[float, float, float, float]]]:
    """(class id, frame, crop region) training samples.

    "whole" crops the full image, "part" crops the segment's frame box; in
    both variants a sample is dropped when the frame box is under the pixel
    threshold in width or height.
    """
    if variant not in ("whole", "part"):
        raise ValueError(f"unknown variant {variant!r}")
    width, height = image_extent
    samples = []
    for seg in segments:
        for frame, bb in sorted(seg.frame_boxes.items()):
            x0, y0, x1, y1 = bb
            if x1 - x0 < bbox_min_pixels or y1 - y0 < bbox_min_pixels:
                continue
            crop = (0.0, 0.0, width, height) if variant == "whole" else bb
            samples.append((seg.id, frame, crop))
    return samples
