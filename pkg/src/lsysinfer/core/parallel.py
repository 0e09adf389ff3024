"""Order-preserving parallel map over independent tasks."""

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    workers: int = 1,
    processes: bool = False,
) -> list[R]:
    """Apply ``fn`` to every item and return results in input order.

    Args:
        fn: The task. Must be a module-level function when ``processes`` is True.
        items: Task inputs.
        workers: Number of workers; 1 runs serially in the calling thread.
        processes: Use a process pool instead of a thread pool.

    Returns:
        ``[fn(item) for item in items]``, independent of scheduling.
    """
    tasks = list(items)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]

    workers = min(workers, len(tasks))
    executor_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    logger.debug("Running %d tasks on %d %s", len(tasks), workers, executor_cls.__name__)
    with executor_cls(max_workers=workers) as executor:
        return list(executor.map(fn, tasks))
