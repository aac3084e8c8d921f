from __future__ import annotations

import functools

import pytest

from cpwall.quadpath import integrated_force, sigma_quad

CRITERIA = {
    1: "closed-form plate integral equals 6 pi",
    2: "action-reaction holds bitwise",
    3: "quadrature path matches closed form at six points",
    4: "integrated quadrature profile reproduces 6 pi",
    5: "physical density obeys the d^-7 scaling law",
    6: "Bessel J0, J1 and first J0 zero",
    7: "plane-wave reduction identity",
    8: "mode-sum structure and convergence direction",
    9: "enclosed fraction and half-force radius",
    10: "negative control breaks the cross-path check",
}

_outcomes: dict[int, list[bool]] = {}


@functools.lru_cache(maxsize=None)
def cached_sigma_quad(u: float):
    return sigma_quad(u)


@functools.lru_cache(maxsize=None)
def cached_integrated_force():
    return integrated_force()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for n in getattr(report, "criteria", ()):
        _outcomes.setdefault(n, []).append(report.outcome == "passed")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep.criteria = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        got = _outcomes.get(n)
        status = "NOT RUN" if got is None else ("PASS" if all(got) else "FAIL")
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {title}")
