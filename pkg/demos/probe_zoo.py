"""Ray-probe every catalog entry at its listed points and print a verdict table.

Run: python3 demos/probe_zoo.py
"""
from selfcont.probe import probe_ray
from selfcont.zoo import entry_names, instantiate


def main():
    print(f"{'entry':<22} {'point':<18} {'verdict':<26} expected")
    for name in entry_names():
        e = instantiate(name)
        for x, expected in e.verdicts:
            got = probe_ray(e.field, x).verdict
            mark = "" if got is expected else "  <-- mismatch"
            print(f"{name:<22} {str(x):<18} {got.value:<26} {expected.value}{mark}")


if __name__ == "__main__":
    main()
