"""Collects PASS/FAIL lines per acceptance criterion for the terminal summary."""

LINES = []


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append((number, line))
    print(line)
    return ok
