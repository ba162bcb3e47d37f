"""The value function m(r) = inf E over paths from x0 on [0, r].

It vanishes for self-continuous fields with linear growth. At the origin of
the unit rotation field Qx/|x| with value (1, 0) the polyline estimate stays
positive; it shrinks as the grid is refined, which the node sweep shows.

Run: python3 demos/value_function.py
"""
from selfcont.varmin import OptConfig, minimize_fixed_start, value_function
from selfcont.zoo import instantiate


def main():
    for name, x0 in [("radial-unit", (0, 0)), ("spiral-sin", (3, 0)), ("rot3d-axis", (0, 0, 2))]:
        pairs, _ = value_function(instantiate(name).field, x0, [0.25, 0.5, 1.0])
        print(f"{name:<12} from {x0}: " + ", ".join(f"m({r}) = {m:.1e}" for r, m in pairs))
    field = instantiate("rot-unit").field
    for n in (16, 32, 64):
        res = minimize_fixed_start(field, [0, 0], 1.0, OptConfig(n_nodes=n, budget=500_000))
        print(f"rot-unit from the origin, {n:>3} nodes: m(1) estimate {res.e_value:.4f}")


if __name__ == "__main__":
    main()
