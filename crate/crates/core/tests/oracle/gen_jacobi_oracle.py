"""Extended-precision reference values for the alpha-weighted Jacobi integrals.

Writes jacobi_oracle.csv with rows `kind,alpha,mu,arg,value` where

  kind = "J":  (1/Gamma(a)) * int_0^1 (x - tau)^(a-1) P_mu(tau) dtau,   arg = x >= 1
  kind = "I":  (1/Gamma(a)) * int_0^c (c - tau)^(a-1) P_mu(tau) dtau,   arg = c in (0, 1]

P_mu is the orthonormal polynomial on [0,1] for the weight a*(1-x)^(a-1) with positive
leading coefficient. It is expanded in monomials from the explicit Jacobi sum
  P_n^{(a-1,0)}(2x-1) = sum_s C(n+a-1, n-s) C(n, s) (x-1)^s x^(n-s)
and each monomial is integrated in closed form (Beta / incomplete Beta functions),
all at 60 significant digits.
"""
import mpmath as mp

mp.mp.dps = 60

ALPHAS = ["0.1", "0.3", "0.5", "0.6", "0.9"]
XS = ["1", "1.001", "1.01", "1.5", "2", "3.25", "5", "50"]
CS = ["0.013", "0.05", "0.1", "0.2", "0.25", "0.3", "0.33", "0.4", "0.45", "0.5",
      "0.55", "0.6", "0.65", "0.7", "0.75", "0.8", "0.85", "0.9", "0.95", "1"]
MU_MAX = 21


def monomial_coeffs(alpha, n):
    a = alpha - 1
    coeffs = [mp.mpf(0)] * (n + 1)
    for s in range(n + 1):
        w = mp.binomial(n + a, n - s) * mp.binomial(n, s)
        for r in range(s + 1):
            coeffs[n - s + r] += w * mp.binomial(s, r) * (-1) ** (s - r)
    # int_0^1 alpha (1-x)^(a) P^2 dx = alpha / (2n + alpha)
    norm = mp.sqrt(alpha / (2 * n + alpha))
    return [c / norm for c in coeffs]


def frac_int(alpha, coeffs, c):
    return sum(cj * mp.gamma(j + 1) / mp.gamma(j + 1 + alpha) * c ** (j + alpha)
               for j, cj in enumerate(coeffs))


def j_value(alpha, coeffs, x):
    # int_0^1 (x - t)^(a-1) t^j dt = x^(j+a) B(1/x; j+1, a)
    tot = 0
    for j, cj in enumerate(coeffs):
        tot += cj * x ** (j + alpha) * mp.betainc(j + 1, alpha, 0, 1 / x)
    return tot / mp.gamma(alpha)


def main():
    rows = []
    for a_str in ALPHAS:
        alpha = mp.mpf(a_str)
        for mu in range(MU_MAX + 1):
            coeffs = monomial_coeffs(alpha, mu)
            for x_str in XS:
                rows.append(("J", a_str, mu, x_str, j_value(alpha, coeffs, mp.mpf(x_str))))
            for c_str in CS:
                rows.append(("I", a_str, mu, c_str, frac_int(alpha, coeffs, mp.mpf(c_str))))
    with open("jacobi_oracle.csv", "w") as fh:
        fh.write("kind,alpha,mu,arg,value\n")
        for kind, a_str, mu, arg, val in rows:
            fh.write(f"{kind},{a_str},{mu},{arg},{mp.nstr(val, 25, min_fixed=1, max_fixed=0)}\n")


if __name__ == "__main__":
    main()
