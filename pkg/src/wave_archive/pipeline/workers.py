import queue
import threading
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_DONE = object()


def run_parallel(func: Callable[[T], R], items: Sequence[T], worker_count: int = 1) -> List[R]:
    """
    Apply ``func`` to every item on ``worker_count`` threads.

    Results come back in input order. If any call raises, the exception of
    the earliest failing item is re-raised after all workers stop.
    """
    if worker_count <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    tasks: "queue.Queue[object]" = queue.Queue()
    results: "queue.Queue[Tuple[int, Optional[R], Optional[BaseException]]]" = queue.Queue()
    for index, item in enumerate(items):
        tasks.put((index, item))
    workers = min(worker_count, len(items))
    for _ in range(workers):
        tasks.put(_DONE)

    def _worker() -> None:
        while True:
            task = tasks.get()
            if task is _DONE:
                return
            index, item = task  # type: ignore[misc]
            try:
                results.put((index, func(item), None))
            except BaseException as e:  # noqa: BLE001
                results.put((index, None, e))

    threads = [threading.Thread(target=_worker, daemon=True) for _ in range(workers)]
    for thread in threads:
        thread.start()

    collected: List[Tuple[int, Optional[R], Optional[BaseException]]] = [results.get() for _ in items]
    for thread in threads:
        thread.join()

    collected.sort(key=lambda r: r[0])
    for _, _, error in collected:
        if error is not None:
            raise error
    return [value for _, value, _ in collected]  # type: ignore[misc]
