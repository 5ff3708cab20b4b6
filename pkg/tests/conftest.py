import json
from pathlib import Path

import pytest

from socialsim.cognition import CognitionBackend, CognitionRequest, response_from_raw
from socialsim.errors import CognitionError

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


class ScriptedBackend(CognitionBackend):
    """Answers each template with canned raw text; callables get the request.

    A tuple of answers is consumed in order (the last one repeats). An
    exception instance is raised instead of answered.
    """

    def __init__(self, answers=None):
        self.answers = dict(answers or {})
        self.requests: list[CognitionRequest] = []

    def respond(self, request):
        self.requests.append(request)
        if request.template not in self.answers:
            raise CognitionError(f"no scripted answer for {request.template}")
        ans = self.answers[request.template]
        if isinstance(ans, tuple):
            ans, rest = ans[0], ans[1:]
            if rest:
                self.answers[request.template] = rest
        if callable(ans):
            ans = ans(request)
        if isinstance(ans, Exception):
            raise ans
        raw = ans if isinstance(ans, str) else json.dumps(ans)
        return response_from_raw(request.template, raw)

    def count(self, template):
        return sum(1 for r in self.requests if r.template == template)


@pytest.fixture
def scripted():
    return ScriptedBackend


@pytest.fixture
def fixture_config():
    return FIXTURES / "run.yaml"


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
