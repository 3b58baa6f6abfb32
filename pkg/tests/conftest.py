import time

_START = None


def pytest_configure(config):
    global _START
    _START = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _START
    print(f"\nfull suite wall time: {elapsed:.2f}s (budget 10s)")
    if elapsed >= 10.0 and session.testsfailed == 0:
        session.exitstatus = 1
        print("FAIL: suite exceeded the 10s runtime budget")
