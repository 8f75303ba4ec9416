"""Collects one verdict line per acceptance criterion for the terminal summary."""
LINES: dict = {}


def record(key: str, ok: bool, detail: str) -> str:
    line = f"{key:<4} {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[key] = line
    print(line)
    return line
