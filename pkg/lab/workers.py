"""
Thread pool for pure work units.

Workers drain a shared queue; results land in a dict keyed by unit key and
are handed back in key order, so the output never depends on the number of
threads or on scheduling.
"""

import logging
from queue import Empty, Queue
from threading import Event, Lock, Thread
from typing import Any, Callable, Dict, Hashable, Optional, Sequence, Tuple

from tqdm import tqdm

from lab.settings import PROGRESS_COLOUR, PROGRESS_NCOLS

logger = logging.getLogger(__name__)

JOIN_POLL_SECONDS = 0.2


def worker_batch(queue, fn, results, stats, stats_lock, progress_bar, stop, on_result):
    while not stop.is_set():
        try:
            key, args = queue.get_nowait()
        except Empty:
            return
        try:
            value = fn(*args)
            with stats_lock:
                results[key] = value
                if on_result is not None:
                    on_result(key, value)
        except Exception as e:
            with stats_lock:
                stats["failed"] += 1
                stats["last_failed"] = key
                if stats["error"] is None:
                    stats["error"] = e
                progress_bar.set_postfix(failed=stats["failed"], last_failed=str(key))
            stop.set()
        finally:
            with stats_lock:
                progress_bar.update(1)
            queue.task_done()


def run_work_units(
    units: Sequence[Tuple[Hashable, Tuple[Any, ...]]],
    fn: Callable[..., Any],
    threads: int,
    desc: str,
    progress: bool = True,
    on_result: Optional[Callable[[Hashable, Any], None]] = None,
) -> Dict[Hashable, Any]:
    """Run ``fn(*args)`` for every ``(key, args)`` unit and return results ordered by key.

    ``on_result`` is called under the results lock as each unit finishes. The
    first failing unit stops the pool and its exception is raised once every
    worker has returned.
    """
    queue = Queue()
    for unit in units:
        queue.put(unit)

    results: Dict[Hashable, Any] = {}
    stats = {"failed": 0, "last_failed": "N/A", "error": None}
    stats_lock = Lock()
    stop = Event()
    progress_bar = tqdm(total=len(units), desc=desc, ncols=PROGRESS_NCOLS, colour=PROGRESS_COLOUR, disable=not progress)

    workers = []
    for _ in range(max(1, min(threads, len(units)))):
        worker = Thread(
            target=worker_batch,
            args=(queue, fn, results, stats, stats_lock, progress_bar, stop, on_result),
        )
        worker.start()
        workers.append(worker)

    try:
        for worker in workers:
            while worker.is_alive():
                worker.join(JOIN_POLL_SECONDS)
    except KeyboardInterrupt:
        stop.set()
        for worker in workers:
            worker.join()
        raise
    finally:
        progress_bar.close()

    if stats["error"] is not None:
        logger.error("Work unit %s failed", stats["last_failed"])
        raise stats["error"]
    return {key: results[key] for key in sorted(results)}
