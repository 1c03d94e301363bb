"""Checks that the pole lies inside the contour and evaluates the formula."""
import sympy as sp

z = sp.symbols("z")


def generalized_cauchy(f, a, n, radius, center=0):
    if abs(complex(a) - complex(center)) >= radius:
        return {"valid": False, "reason": "pole outside contour"}
    value = 2 * sp.pi * sp.I / sp.factorial(n) * sp.diff(f, z, n).subs(z, a)
    return {"valid": True, "value": sp.simplify(value)}


if __name__ == "__main__":
    print(generalized_cauchy(sp.exp(z), 0, 2, 1))
