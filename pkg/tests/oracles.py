"""Slow, obviously-correct reference implementations used by the tests."""
import itertools
from collections import deque


def bfs_footprint(footprint, start, goal, blocked, clearance_units, width, height):
    """Breadth-first shortest translate-only path length, or None."""
    r = -(-clearance_units // 2)
    blocked = set(blocked)

    def ok(p):
        for fx, fy in footprint:
            x, y = p[0] + fx, p[1] + fy
            if not (0 <= x < width and 0 <= y < height):
                return False
            for bx, by in blocked:
                if max(abs(bx - x), abs(by - y)) <= r:
                    return False
        return True

    if not ok(goal):
        return None
    seen = {start: 0}
    q = deque([start])
    while q:
        p = q.popleft()
        if p == goal:
            return seen[p]
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (p[0] + dx, p[1] + dy)
            if n not in seen and ok(n):
                seen[n] = seen[p] + 1
                q.append(n)
    return None


def grid_bfs(width, height, obstacles, src, dst):
    return bfs_footprint([(0, 0)], src, dst, obstacles, 0, width, height)


def min_permutation_cost(m):
    n = len(m)
    best = None
    for perm in itertools.permutations(range(n)):
        if any(m[i][perm[i]] < 0 for i in range(n)):
            continue
        c = sum(m[i][perm[i]] for i in range(n))
        if best is None or c < best:
            best = c
    return best


def exhaustive_best_score(S):
    best = 0
    for k in (0, 1):
        for thr in sorted({c[k] for c in S}):
            low = [c for c in S if c[k] < thr]
            if low and len(low) < len(S):
                best = max(best, len(low) * (len(S) - len(low)))
    return best
