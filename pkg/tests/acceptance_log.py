"""One pass/fail line per acceptance criterion, shared with the terminal summary."""

LINES = {}


def record(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[number] = line
    print(line)
    return passed
