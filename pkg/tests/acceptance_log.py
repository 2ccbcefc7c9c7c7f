"""Collects one line per acceptance criterion for the end-of-run summary."""

RESULTS: list[str] = []


def record(label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
