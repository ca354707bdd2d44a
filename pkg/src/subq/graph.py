"""Max-flow / min-cut, cut-function oracles and benchmark instance generators."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InputError, NumericalError, SetFunction, as_mask
from .zoo import CoverSpec

RESIDUAL_EPS = 1e-12
FLOW_CHECK_TOL = 1e-9


@dataclass(frozen=True)
class WeightedDigraph:
    """Arcs ``(u, v, capacity)`` on vertices ``0..n-1``.

    With ``symmetric=True`` every arc also stands for its reverse.
    """

    n: int
    arcs: tuple
    symmetric: bool = False

    def __init__(self, n: int, arcs, symmetric: bool = False):
        arcs = tuple((int(u), int(v), float(c)) for u, v, c in arcs)
        if n < 1:
            raise InputError("graph needs at least one vertex")
        for u, v, c in arcs:
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"arc ({u}, {v}) outside vertex range [0, {n})")
            if u == v:
                raise InputError(f"self-loop at vertex {u}")
            if not np.isfinite(c) or c < 0:
                raise InputError(f"capacity {c} must be finite and non-negative")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "symmetric", bool(symmetric))

    def directed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tails, heads and capacities with symmetric arcs expanded."""
        if not self.arcs:
            z = np.zeros(0, dtype=np.int64)
            return z, z, np.zeros(0)
        a = np.array(self.arcs, dtype=float)
        t, h, c = a[:, 0].astype(np.int64), a[:, 1].astype(np.int64), a[:, 2]
        if self.symmetric:
            t, h, c = np.concatenate([t, h]), np.concatenate([h, t]), np.concatenate([c, c])
        return t, h, c

    def laplacian(self) -> np.ndarray:
        """``diag(sum_k d(i,k)) - d`` for the (symmetrized) weight matrix."""
        t, h, c = self.directed()
        D = np.zeros((self.n, self.n))
        np.add.at(D, (t, h), c)
        return np.diag(D.sum(axis=1)) - D


@dataclass(frozen=True)
class StNetwork:
    base: WeightedDigraph
    source: int
    sink: int

    def __post_init__(self):
        if self.source == self.sink:
            raise InputError("source and sink must differ")
        for x in (self.source, self.sink):
            if not 0 <= x < self.base.n:
                raise InputError("terminal outside the vertex range")


@dataclass
class FlowResult:
    value: float
    source_side: np.ndarray  # boolean mask over all vertices, includes the source
    flow: np.ndarray  # per directed arc, in the order of ``WeightedDigraph.directed``


def max_flow(net: StNetwork, maximal_source_side: bool = False) -> FlowResult:
    """Edmonds-Karp shortest augmenting paths on a float-capacity network.

    The returned source side is the smallest minimum cut, or the largest one
    when ``maximal_source_side`` is set.  Feasibility, conservation and
    flow/cut equality are verified before returning.
    """
    n, s, t = net.base.n, net.source, net.sink
    tails, heads, caps = net.base.directed()
    m = len(caps)
    # residual arcs 2i (forward) and 2i+1 (reverse)
    head = np.empty(2 * m, dtype=np.int64)
    head[0::2], head[1::2] = heads, tails
    res = np.zeros(2 * m)
    res[0::2] = caps
    res = res.tolist()
    head_l = head.tolist()
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(m):
        adj[tails[i]].append(2 * i)
        adj[heads[i]].append(2 * i + 1)

    value = 0.0
    while True:
        parent = [-1] * n
        parent[s] = -2
        queue = deque([s])
        while queue and parent[t] == -1:
            u = queue.popleft()
            for a in adj[u]:
                v = head_l[a]
                if parent[v] == -1 and res[a] > RESIDUAL_EPS:
                    parent[v] = a
                    queue.append(v)
        if parent[t] == -1:
            break
        bottleneck = np.inf
        v = t
        while v != s:
            a = parent[v]
            bottleneck = min(bottleneck, res[a])
            v = head_l[a ^ 1]
        v = t
        while v != s:
            a = parent[v]
            res[a] -= bottleneck
            res[a ^ 1] += bottleneck
            v = head_l[a ^ 1]
        value += bottleneck

    res_arr = np.asarray(res)
    flow = np.clip(caps - res_arr[0::2], 0.0, None)
    if maximal_source_side:
        # vertices that can still reach the sink form the sink side
        radj: list[list[int]] = [[] for _ in range(n)]
        for a in range(2 * m):
            if res[a] > RESIDUAL_EPS:
                radj[head_l[a]].append(head_l[a ^ 1])
        seen = np.zeros(n, dtype=bool)
        seen[t] = True
        queue = deque([t])
        while queue:
            u = queue.popleft()
            for v in radj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        side = ~seen
    else:
        side = np.zeros(n, dtype=bool)
        side[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for a in adj[u]:
                v = head_l[a]
                if not side[v] and res[a] > RESIDUAL_EPS:
                    side[v] = True
                    queue.append(v)
    _check_flow(n, s, t, tails, heads, caps, flow, value, side)
    return FlowResult(float(value), side, flow)


def _check_flow(n, s, t, tails, heads, caps, flow, value, side):
    scale = FLOW_CHECK_TOL * (1.0 + float(caps.sum()))
    if np.any(flow > caps + scale):
        raise NumericalError("flow exceeds an arc capacity")
    net = np.zeros(n)
    np.add.at(net, tails, flow)
    np.subtract.at(net, heads, flow)
    inner = np.ones(n, dtype=bool)
    inner[[s, t]] = False
    if np.any(np.abs(net[inner]) > scale) or abs(net[s] - value) > scale:
        raise NumericalError("flow conservation violated")
    cut = float(caps[side[tails] & ~side[heads]].sum())
    if abs(cut - value) > scale:
        raise NumericalError(f"cut capacity {cut} differs from flow value {value}")


# ---------------------------------------------------------------------------
# cut functions


class CutPlusModular(SetFunction):
    """``A -> d(A, V - A) + z(A)`` with fast greedy sweeps and min-cut minimization."""

    def __init__(self, g: WeightedDigraph, z=None):
        self.graph = g
        self.tails, self.heads, self.caps = g.directed()
        self.z = np.zeros(g.n) if z is None else np.asarray(z, dtype=float).copy()
        if self.z.shape != (g.n,):
            raise InputError("modular part has the wrong length")
        super().__init__(g.n, name="cut" if z is None else "cut+modular")

    def _value(self, mask):
        return float(self.caps[mask[self.tails] & ~mask[self.heads]].sum() + self.z[mask].sum())

    def _chain(self, perm):
        rank = np.empty(self.p, dtype=np.int64)
        rank[perm] = np.arange(self.p)
        rt, rh = rank[self.tails], rank[self.heads]
        c = np.where(rt < rh, self.caps, 0.0)
        inc = np.bincount(rt, c, self.p) - np.bincount(rh, c, self.p) + self.z[perm]
        # bincount indexes by rank, so increments are already in sweep order
        return np.cumsum(inc)

    def _induced(self, keep: np.ndarray):
        idx = np.full(self.p, -1, dtype=np.int64)
        idx[keep] = np.arange(int(keep.sum()))
        sel = keep[self.tails] & keep[self.heads]
        arcs = zip(idx[self.tails[sel]], idx[self.heads[sel]], self.caps[sel])
        return WeightedDigraph(int(keep.sum()), arcs)

    def restrict(self, A):
        A = as_mask(A, self.p)
        out = A[self.tails] & ~A[self.heads]
        leak = np.bincount(self.tails[out], self.caps[out], self.p)
        return CutPlusModular(self._induced(A), (self.z + leak)[A])

    def contract(self, A):
        A = as_mask(A, self.p)
        inward = A[self.tails] & ~A[self.heads]
        gain = np.bincount(self.heads[inward], self.caps[inward], self.p)
        return CutPlusModular(self._induced(~A), (self.z - gain)[~A])

    def min_minus_modular(self, y, maximal: bool = False):
        u = np.asarray(y, dtype=float) - self.z
        return min_cut_minus_modular(self.graph, u, maximal=maximal)


def cut_function(g: WeightedDigraph) -> CutPlusModular:
    """``A -> d(A, V - A)``, the total capacity of arcs leaving ``A``."""
    return CutPlusModular(g)


def min_cut_minus_modular(g: WeightedDigraph, z, maximal: bool = False) -> tuple[np.ndarray, float]:
    """Exact ``argmin`` and ``min`` of ``A -> cut(A) - z(A)`` by one max-flow.

    Elements with ``z_k > 0`` get a source arc of capacity ``z_k`` and
    elements with ``z_k < 0`` a sink arc of capacity ``-z_k``; the minimum
    equals the flow value minus ``sum (z_k)_+``.  The smallest minimizer is
    returned unless ``maximal`` is set.
    """
    z = np.asarray(z, dtype=float)
    p = g.n
    if z.shape != (p,):
        raise InputError("modular vector has the wrong length")
    s, t = p, p + 1
    tails, heads, caps = g.directed()
    arcs = list(zip(tails.tolist(), heads.tolist(), caps.tolist()))
    arcs += [(s, k, z[k]) for k in range(p) if z[k] > 0]
    arcs += [(k, t, -z[k]) for k in range(p) if z[k] < 0]
    res = max_flow(StNetwork(WeightedDigraph(p + 2, arcs), s, t), maximal_source_side=maximal)
    A = res.source_side[:p].copy()
    value = float(caps[A[tails] & ~A[heads]].sum() - z[A].sum())
    return A, value


def min_cut_certificate(g: WeightedDigraph, z) -> tuple[np.ndarray, float, np.ndarray]:
    """Minimizer and minimum of ``cut(A) - z(A)`` with an optimal base as certificate.

    The certificate is the net outflow of the maximum flow on the graph arcs
    minus ``z``; it lies in the base polyhedron of ``cut - z`` and its
    negative part sums to the minimum.
    """
    z = np.asarray(z, dtype=float)
    p = g.n
    s, t = p, p + 1
    tails, heads, caps = g.directed()
    arcs = list(zip(tails.tolist(), heads.tolist(), caps.tolist()))
    arcs += [(s, k, z[k]) for k in range(p) if z[k] > 0]
    arcs += [(k, t, -z[k]) for k in range(p) if z[k] < 0]
    res = max_flow(StNetwork(WeightedDigraph(p + 2, arcs), s, t))
    A = res.source_side[:p].copy()
    phi = res.flow[: len(caps)]
    out = np.bincount(tails, phi, p) - np.bincount(heads, phi, p)
    value = float(caps[A[tails] & ~A[heads]].sum() - z[A].sum())
    return A, value, out - z


def st_cut_function(net: StNetwork) -> CutPlusModular:
    """Cut of ``{source} | A`` against ``{sink} | rest`` over the inner vertices, normalized."""
    n, s, t = net.base.n, net.source, net.sink
    inner = np.ones(n, dtype=bool)
    inner[[s, t]] = False
    idx = np.full(n, -1, dtype=np.int64)
    idx[inner] = np.arange(n - 2)
    tails, heads, caps = net.base.directed()
    z = np.zeros(n - 2)
    arcs = []
    for u, v, c in zip(tails.tolist(), heads.tolist(), caps.tolist()):
        if inner[u] and inner[v]:
            arcs.append((idx[u], idx[v], c))
        elif u == s and inner[v]:
            z[idx[v]] -= c
        elif inner[u] and v == t:
            z[idx[u]] += c
    return CutPlusModular(WeightedDigraph(n - 2, arcs), z)


# ---------------------------------------------------------------------------
# generators


def chain(p: int, weight: float = 1.0) -> WeightedDigraph:
    if p < 1:
        raise InputError("chain needs p >= 1")
    return WeightedDigraph(p, [(k, k + 1, weight) for k in range(p - 1)], symmetric=True)


def grid2d(h: int, w: int, weight: float = 1.0) -> WeightedDigraph:
    """Four-connected ``h x w`` grid, vertices numbered row by row."""
    if h < 1 or w < 1:
        raise InputError("grid sizes must be positive")
    arcs = []
    for r in range(h):
        for c in range(w):
            k = r * w + c
            if c + 1 < w:
                arcs.append((k, k + 1, weight))
            if r + 1 < h:
                arcs.append((k, k + w, weight))
    return WeightedDigraph(h * w, arcs, symmetric=True)


def genrmf_like(a: int, b: int, c1: float, c2: float, seed: int) -> StNetwork:
    """Layered network of ``b`` frames, each an ``a x a`` four-connected grid.

    In-frame arcs run both ways with capacity ``c2 * a * a``; every vertex of
    frame ``i`` has one arc into frame ``i + 1``, targets following a random
    permutation, with capacity uniform in ``[c1, c2]``.  The source is the
    first vertex of the first frame and the sink the last vertex of the last
    frame.
    """
    if a < 1 or b < 2 or not 0 <= c1 <= c2:
        raise InputError("genrmf_like needs a >= 1, b >= 2 and 0 <= c1 <= c2")
    rng = np.random.default_rng(seed)
    frame = a * a
    big = c2 * frame
    arcs = []
    for f in range(b):
        off = f * frame
        for r in range(a):
            for c in range(a):
                k = off + r * a + c
                if c + 1 < a:
                    arcs += [(k, k + 1, big), (k + 1, k, big)]
                if r + 1 < a:
                    arcs += [(k, k + a, big), (k + a, k, big)]
        if f + 1 < b:
            perm = rng.permutation(frame)
            caps = rng.uniform(c1, c2, size=frame)
            arcs += [(off + i, off + frame + int(perm[i]), float(caps[i])) for i in range(frame)]
    n = frame * b
    return StNetwork(WeightedDigraph(n, arcs), 0, n - 1)


@dataclass
class TwoMoons:
    points: np.ndarray
    classes: np.ndarray
    kernel: np.ndarray  # RBF kernel plus ridge on the diagonal
    prior: np.ndarray  # modular term: large negative on class-1 labels, positive on class-0
    labeled: np.ndarray
    bandwidth: float


def two_moons_logdet(
    n: int = 400,
    noise: float = 0.1,
    bandwidth: Optional[float] = None,
    labeled=None,
    seed: int = 0,
    ridge: float = 0.1,
    label_weight: float = 100.0,
    n_labels: int = 16,
) -> TwoMoons:
    """Two interleaved half circles with a Gaussian-RBF kernel and hard labels.

    The default bandwidth puts the median pairwise kernel value at 0.5.
    Labels default to ``n_labels`` points drawn evenly from both classes.
    """
    if n < 2:
        raise InputError("two moons needs n >= 2")
    rng = np.random.default_rng(seed)
    half = n // 2
    theta = rng.uniform(0, np.pi, size=n)
    classes = (np.arange(n) >= half).astype(int)
    x = np.where(classes == 0, np.cos(theta), 1 - np.cos(theta))
    y = np.where(classes == 0, np.sin(theta), 0.5 - np.sin(theta))
    pts = np.column_stack([x, y]) + noise * rng.standard_normal((n, 2))
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    if bandwidth is None:
        med = np.median(np.sqrt(d2[np.triu_indices(n, 1)]))
        bandwidth = float(med / np.sqrt(2 * np.log(2)))
    K = np.exp(-d2 / (2 * bandwidth**2)) + ridge * np.eye(n)
    if labeled is None:
        per = max(1, n_labels // 2)
        labeled = np.concatenate([
            rng.choice(np.flatnonzero(classes == c), size=min(per, int((classes == c).sum())), replace=False)
            for c in (0, 1)
        ])
    labeled = np.sort(np.asarray(labeled, dtype=np.int64))
    prior = np.zeros(n)
    prior[labeled] = np.where(classes[labeled] == 1, -label_weight, label_weight)
    return TwoMoons(pts, classes, K, prior, labeled, bandwidth)


def random_cover(p: int, groups: int, seed: int, max_size: Optional[int] = None) -> CoverSpec:
    """``groups`` random non-empty groups with weights uniform in ``[0.5, 1.5]``."""
    if p < 1 or groups < 1:
        raise InputError("random_cover needs positive sizes")
    rng = np.random.default_rng(seed)
    max_size = max_size or max(1, min(p, 5))
    out = []
    for _ in range(groups):
        size = int(rng.integers(1, max_size + 1))
        out.append(tuple(sorted(int(i) for i in rng.choice(p, size=size, replace=False))))
    weights = tuple(float(w) for w in rng.uniform(0.5, 1.5, size=groups))
    return CoverSpec(p, tuple(out), weights)


def zipf_cover(p: int, vocab: int, words: int, exponent: float, seed: int) -> CoverSpec:
    """Bag-of-words cover: each element draws ``words`` tokens from a Zipf law.

    Groups are the tokens that occur at least once, weighted by their
    self-information ``-log prob``, so rare tokens are expensive to cover.
    """
    if p < 1 or vocab < 1 or words < 1 or exponent <= 0:
        raise InputError("zipf_cover needs positive sizes and exponent")
    rng = np.random.default_rng(seed)
    prob = 1.0 / np.arange(1, vocab + 1) ** exponent
    prob /= prob.sum()
    members: list = [[] for _ in range(vocab)]
    for k in range(p):
        for tok in sorted(set(rng.choice(vocab, size=words, p=prob).tolist())):
            members[tok].append(k)
    used = [t for t in range(vocab) if members[t]]
    return CoverSpec(p, tuple(tuple(members[t]) for t in used), tuple(float(-np.log(prob[t])) for t in used))


# ---------------------------------------------------------------------------
# edge-list files


def read_edge_list(path, symmetric: bool = False) -> WeightedDigraph:
    """Read ``n m`` then ``m`` lines ``u v cap`` with 1-based vertices."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise InputError("edge-list header must be 'n m'")
        n, m = int(header[0]), int(header[1])
        arcs = []
        for line in fh:
            if line.strip():
                u, v, c = line.split()
                arcs.append((int(u) - 1, int(v) - 1, float(c)))
    if len(arcs) != m:
        raise InputError(f"edge list declares {m} arcs but holds {len(arcs)}")
    return WeightedDigraph(n, arcs, symmetric=symmetric)


def write_edge_list(path, g: WeightedDigraph):
    path = Path(path)
    lines = [f"{g.n} {len(g.arcs)}"] + [f"{u + 1} {v + 1} {c!r}" for u, v, c in g.arcs]
    path.write_text("\n".join(lines) + "\n")
