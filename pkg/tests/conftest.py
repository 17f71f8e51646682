from collections import OrderedDict

import pytest

_KEY = pytest.StashKey[OrderedDict]()


class AcceptanceLedger:
    """Sub-check results grouped by acceptance criterion."""

    def __init__(self, store: OrderedDict):
        self.store = store

    def record(self, criterion: int, title: str, check: str, passed: bool, detail: str = "") -> bool:
        entry = self.store.setdefault(criterion, {"title": title, "checks": []})
        entry["checks"].append((check, bool(passed), detail))
        return bool(passed)

    def lines(self) -> list[str]:
        out = []
        for crit in sorted(self.store):
            entry = self.store[crit]
            ok = all(p for _, p, _ in entry["checks"])
            failed = [f"{c} ({d})" if d else c for c, p, d in entry["checks"] if not p]
            passed = [f"{c} ({d})" if d else c for c, p, d in entry["checks"] if p]
            body = "; ".join(failed) if failed else "; ".join(passed)
            out.append(f"{'PASS' if ok else 'FAIL'} criterion {crit} {entry['title']}: {body}")
        return out


def pytest_configure(config):
    config.stash[_KEY] = OrderedDict()


@pytest.fixture(scope="session")
def acceptance(request):
    return AcceptanceLedger(request.config.stash[_KEY])


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for line in AcceptanceLedger(store).lines():
        terminalreporter.write_line(line)
