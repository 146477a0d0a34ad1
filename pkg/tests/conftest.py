import json
from collections import Counter
from pathlib import Path

import pytest

from caafc.gateway import Gateway

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


class Script:
    """Scripted model keyed on template name.

    An answer may be a string, a JSON-able object, a list (consumed in order,
    the last one repeats) or a callable taking the request.
    """

    max_in_flight = 4

    def __init__(self, **answers):
        self.answers = {k: (list(v) if isinstance(v, list) else v) for k, v in answers.items()}
        self.calls = Counter()
        self.requests = []

    def generate(self, request):
        self.calls[request.template] += 1
        self.requests.append(request)
        answer = self.answers[request.template]
        if isinstance(answer, list):
            answer = answer.pop(0) if len(answer) > 1 else answer[0]
        if callable(answer):
            answer = answer(request)
        return answer if isinstance(answer, str) else json.dumps(answer)


def scripted(model="m", gateway=None, **answers):
    gateway = gateway or Gateway(sleep=lambda s: None)
    script = Script(**answers)
    gateway.register(model, script)
    return gateway, script


def verdicts_json(*pairs):
    return {"subclaims": [{"text": t, "label": l, "justification": f"because {t}"} for t, l in pairs]}


def judge(ed, ec, relevant=True, supportive=True):
    return {"error_detection": ed, "error_correction": ec, "links_relevant": relevant, "links_supportive": supportive}


@pytest.fixture
def fixtures_dir():
    return FIXTURES
