from hypothesis import settings

settings.register_profile("qdlab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("qdlab")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", {}) if mod else {}
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
