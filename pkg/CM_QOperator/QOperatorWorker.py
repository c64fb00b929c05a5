########################################################################
## IMPORTS
########################################################################
import logging
import sys
import threading
import traceback

from . import Logs

logger = logging.getLogger(__name__)

try:
    from PySide6.QtCore import QObject, QRunnable, QThreadPool, Qt, Signal, Slot
    QT_AVAILABLE = True
except ModuleNotFoundError:
    QT_AVAILABLE = False
    logger.warning("Please install any suitable version of PySide 6; chunks will run serially")


if QT_AVAILABLE:
    ########################################################################
    ## WORKER SIGNAL CLASS
    ########################################################################
    class WorkerSignals(QObject):
        '''
        Defines the signals available from a running worker thread.

        Supported signals are:

        finished
            No data

        error
            tuple (exctype, value, traceback.format_exc() )

        result
            tuple (chunk index, object returned by the chunk function)

        '''
        finished = Signal()
        error = Signal(tuple)
        result = Signal(object)

    ########################################################################
    ## WORKER  CLASS
    ########################################################################
    class Worker(QRunnable):
        '''
        Worker thread evaluating one chunk of quadrature nodes.

        :param fn: The chunk function. Receives the chunk as its only argument.
        :param index: Position of the chunk; results are reassembled in this order.
        :param chunk: The data handed to fn.
        '''

        def __init__(self, fn, index, chunk):
            super(Worker, self).__init__()

            self.fn = fn
            self.index = index
            self.chunk = chunk
            self.signals = WorkerSignals()
            self.setAutoDelete(False)

        @Slot()
        def run(self):
            try:
                result = self.fn(self.chunk)
            except Exception:
                exctype, value = sys.exc_info()[:2]
                self.signals.error.emit((exctype, value, traceback.format_exc()))
            else:
                self.signals.result.emit((self.index, result))
            finally:
                self.signals.finished.emit()


########################################################################
## CHUNK RUNNER
########################################################################
class ChunkCollector:
    '''Receives worker results by chunk index and counts finished chunks.'''

    def __init__(self, total, status=''):
        self.total = total
        self.status = status
        self.results = [None] * total
        self.errors = []
        self.done = 0
        self._lock = threading.Lock()

    def store(self, payload):
        index, result = payload
        self.results[index] = result

    def fail(self, error):
        with self._lock:
            self.errors.append(error)

    def finish(self):
        with self._lock:
            self.done += 1
            done = self.done
        Logs.progress(done, self.total, self.status)


def run_chunks(fn, chunks, threads=1, status=''):
    '''
    Apply fn to every chunk and return the results in chunk order.

    With threads > 1 the chunks run on a QThreadPool; the ordering of the
    returned list never depends on the thread count, so reductions done by
    the caller are reproducible bit for bit.
    '''
    chunks = list(chunks)
    collector = ChunkCollector(len(chunks), status)
    if threads <= 1 or len(chunks) <= 1 or not QT_AVAILABLE:
        for index, chunk in enumerate(chunks):
            collector.store((index, fn(chunk)))
            collector.finish()
        return collector.results

    pool = QThreadPool()
    pool.setMaxThreadCount(int(threads))
    workers = []
    for index, chunk in enumerate(chunks):
        worker = Worker(fn, index, chunk)
        # slots run in the worker thread; no event loop is needed
        worker.signals.result.connect(collector.store, Qt.ConnectionType.DirectConnection)
        worker.signals.error.connect(collector.fail, Qt.ConnectionType.DirectConnection)
        worker.signals.finished.connect(collector.finish, Qt.ConnectionType.DirectConnection)
        workers.append(worker)
        pool.start(worker)
    pool.waitForDone()

    if collector.errors:
        exctype, value, trace = collector.errors[0]
        logger.debug(trace)
        raise value
    return collector.results


def chunk_ranges(total, chunk_size):
    '''Consecutive (start, stop) index ranges covering range(total).'''
    chunk_size = max(1, int(chunk_size))
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]
