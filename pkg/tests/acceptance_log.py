"""Collects one line per acceptance criterion for the end-of-run summary."""

LINES = []


def record(number: int, title: str, ok: bool, detail: str, seconds: float) -> str:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail} [{seconds:.1f}s]"
    LINES.append((number, line))
    print(line)
    return line
