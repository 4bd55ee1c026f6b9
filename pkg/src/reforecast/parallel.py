"""Order-preserving thread map.

numpy releases the GIL in its kernels, so a thread pool buys real overlap
for the data-parallel loops (scenario rebuilds, distance blocks). Results
are collected by input index, which keeps every reduction bit-deterministic
regardless of the worker count.
"""

from concurrent.futures import ThreadPoolExecutor


def thread_map(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
