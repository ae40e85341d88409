"""
A pool of worker threads fed with task indices over ZeroMQ. Used for
rounding trials and corpus sweeps; results are merged by task index so the
outcome does not depend on scheduling.
"""

import logging
import itertools
import threading

import zmq

import nashwelfare


# Each pool gets its own pair of in-process addresses.
_POOL_IDS = itertools.count()
ZMQ_TASK_SOCKET = 'inproc://nashwelfare-tasks-%d'
ZMQ_RESULT_SOCKET = 'inproc://nashwelfare-results-%d'


class ZMQThread(threading.Thread):
    """
    Base class for pool threads. The thread reports every task back to the
    pool, including tasks that raised.
    """

    def setup_zmq(self, context, task_address, result_address):
        self.context = context
        self.task_address = task_address
        self.result_address = result_address

    def run(self):
        self.socket = None
        self.results = None
        try:
            self.socket = self.context.socket(zmq.PULL)
            self.socket.connect(self.task_address)
            self.results = self.context.socket(zmq.PUSH)
            self.results.connect(self.result_address)
            self.run_inner()
        except zmq.ContextTerminated:
            pass
        finally:
            for socket in (self.socket, self.results):
                if socket is not None:
                    socket.close(linger=0)


class WorkerThread(ZMQThread):
    """
    Runs tasks from the shared task list. Return values and exceptions are
    stored by task index; the pool only receives the index.
    """

    def __init__(self, pool, number):
        threading.Thread.__init__(self)
        self.daemon = True
        self.name = 'WorkerThread-%d' % number
        self.pool = pool
        self.setup_zmq(pool.context, pool.task_address, pool.result_address)

    def run_inner(self):
        while True:
            index = self.socket.recv_json()
            logging.debug('Running task %d' % index)
            try:
                self.pool.results[index] = self.pool.function(self.pool.tasks[index])
                failed = False
            except Exception as e:
                self.pool.errors[index] = e
                failed = True
            self.results.send_json([index, failed])


class WorkerPool(object):
    """
    Map a function over tasks with a fixed number of worker threads. With one
    worker (the default) tasks run inline in the calling thread.
    """

    def __init__(self, worker_threads=1):
        self.worker_threads = max(1, int(worker_threads))

    def map(self, function, tasks):
        tasks = list(tasks)
        if self.worker_threads <= 1 or len(tasks) <= 1:
            return [function(task) for task in tasks]
        return _PoolRun(self.worker_threads, function, tasks).run()


class _PoolRun(object):
    def __init__(self, worker_threads, function, tasks):
        pool_id = next(_POOL_IDS)
        self.context = zmq.Context()
        self.task_address = ZMQ_TASK_SOCKET % pool_id
        self.result_address = ZMQ_RESULT_SOCKET % pool_id
        self.function = function
        self.tasks = tasks
        self.results = [None] * len(tasks)
        self.errors = {}
        self.worker_threads = min(worker_threads, len(tasks))

    def run(self):
        submit = self.context.socket(zmq.PUSH)
        submit.bind(self.task_address)
        collect = self.context.socket(zmq.PULL)
        collect.bind(self.result_address)
        threads = [WorkerThread(self, number) for number in range(self.worker_threads)]
        for thread in threads:
            thread.start()
        logging.debug('Distributing %d tasks to %d worker threads' % (len(self.tasks), len(threads)))
        try:
            for index in range(len(self.tasks)):
                submit.send_json(index)
            for _ in range(len(self.tasks)):
                index, failed = collect.recv_json()
                if failed:
                    logging.error('Task %d failed: %s' % (index, self.errors[index]))
        finally:
            submit.close(linger=0)
            collect.close(linger=0)
            self.context.term()
            for thread in threads:
                thread.join()
        if self.errors:
            raise self.errors[min(self.errors)]
        return self.results
