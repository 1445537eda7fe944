import contextvars
from concurrent.futures import ThreadPoolExecutor


def run_groups(fn, groups: int, threads: int = 1):
    """Call ``fn(k)`` for every group; results come back in group order.

    Callers write into disjoint channel slices, so the output does not
    depend on scheduling.  The compiled kernels release the GIL.  Workers
    run in a copy of the caller's context so allocation tracking and test
    hooks still apply.
    """
    if threads <= 1 or groups == 1:
        return [fn(k) for k in range(groups)]
    ctxs = [contextvars.copy_context() for _ in range(groups)]
    with ThreadPoolExecutor(max_workers=min(threads, groups)) as pool:
        return list(pool.map(lambda k: ctxs[k].run(fn, k), range(groups)))
