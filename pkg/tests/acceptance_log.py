"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    LINES.append(f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    return passed
