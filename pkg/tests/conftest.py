ACCEPTANCE = {}


def record_criterion(number, title, checks):
    """Store the outcome of one acceptance criterion for the terminal summary."""
    failed = [c for c in checks if not c[1]]
    ACCEPTANCE[number] = (title, not failed and bool(checks), checks)
    return failed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, checks = ACCEPTANCE[n]
        bad = [c for c in checks if not c[1]]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        if bad:
            line += "  [" + "; ".join(c[0] for c in bad) + "]"
        terminalreporter.write_line(line)
