"""Integrability of |x|^-N |grad u(x) x| near 0 for u = |x|^alpha x.

The radial reduction gives an integrand |alpha + 1| r^alpha, so the shell
table converges for alpha > -1, vanishes at alpha = -1 and diverges below.

Run: python3 demos/integrability.py
"""
from selfcont.sobolev import AnalyticGradient, FiniteDifferenceGradient, check_integrability
from selfcont.zoo import instantiate


def main():
    for alpha, N in [(-1.0, 2), (-1.25, 3), (-1.5, 3)]:
        e = instantiate("power-radial", alpha=alpha, N=N)
        x0 = [0.0] * N
        a = check_integrability(e.field, AnalyticGradient.parse(e.metadata["gradient"]), x0)
        f = check_integrability(e.field, FiniteDifferenceGradient(), x0)
        print(f"alpha={alpha:<6} N={N}: analytic {a.verdict.value:<12} {a.estimate:.4g}   "
              f"finite-difference {f.verdict.value:<12} {f.estimate:.4g}")


if __name__ == "__main__":
    main()
