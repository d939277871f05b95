"""Independent brute-force strategy implementation used as a test oracle.

Deliberately written with plain Python loops and repeated-max selection so
it shares no code path with the library's vectorized implementation.
"""


def brute_scores(rows: list[list[int]], name: str, threshold: float | None = None) -> list[float]:
    n_items = len(rows[0])
    scores = []
    for j in range(n_items):
        column = [row[j] for row in rows]
        if name == "ADD":
            total = 0
            for v in column:
                total += v
            scores.append(float(total))
        elif name == "MPL":
            best = column[0]
            for v in column[1:]:
                if v > best:
                    best = v
            scores.append(float(best))
        elif name == "LMS":
            worst = column[0]
            for v in column[1:]:
                if v < worst:
                    worst = v
            scores.append(float(worst))
        elif name == "APP":
            count = 0
            for v in column:
                if v >= threshold:
                    count += 1
            scores.append(float(count))
        else:
            raise ValueError(name)
    return scores


def brute_rank(scores: list[float], k: int) -> list[int]:
    """Indices of the k best scores; ties go to the earliest index."""
    remaining = list(range(len(scores)))
    picked = []
    while remaining and len(picked) < k:
        best = remaining[0]
        for idx in remaining[1:]:
            if scores[idx] > scores[best]:
                best = idx
        picked.append(best)
        remaining.remove(best)
    return picked


def brute_ranking(rows: list[list[int]], name: str, k: int, threshold: float | None = None) -> list[str]:
    scores = brute_scores(rows, name, threshold)
    return [f"item_{i + 1}" for i in brute_rank(scores, k)]
