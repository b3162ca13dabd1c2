"""Reference implementations kept deliberately naive and independent of rafsim internals."""


def brute_force_paths(topo, src, dst):
    """Every simple switch route from src to dst as (nodes, links) tuples.

    Recursion over the raw link list; no adjacency index, no port ordering.
    """
    usable = [l for l in topo.links if l.up]
    out = set()

    def walk(node, nodes, links):
        if node == dst:
            out.add((tuple(nodes), tuple(links)))
            return
        for l in usable:
            ends = (l.end_a[0], l.end_b[0])
            if node not in ends:
                continue
            nxt = ends[1] if ends[0] == node else ends[0]
            if nxt in nodes:
                continue
            walk(nxt, nodes + [nxt], links + [l.id])

    walk(src, [src], [])
    return out


def product(xs):
    r = 1.0
    for x in xs:
        r *= x
    return r


def tier_oracle(r, available, mode="total"):
    """Literal transcription of the six reliability cases as if/elif branches."""
    if r > 0.9:
        n = 1
    elif r > 0.8:
        n = 2 if mode == "total" else 1 + 2
    elif r > 0.7:
        n = 3 if mode == "total" else 1 + 3
    elif r > 0.6:
        n = 4 if mode == "total" else 1 + 4
    elif r > 0.5:
        n = 5 if mode == "total" else 1 + 5
    else:
        return available
    return min(n, available)
