"""Independent reference values for the C++ test suite.

Run with: python3 tests/oracles/oracles.py
Uses mpmath for special constants, scipy for quadrature and a plain numpy
re-implementation of the discrete capacitory problem.
"""
import numpy as np
import mpmath as mp
from scipy import integrate, special

mp.mp.dps = 30


def riesz_constant(d, a):
    return mp.gamma((d - a) / 2) / (2**a * mp.pi ** (mp.mpf(d) / 2) * mp.gamma(a / 2))


def form_constant(d, a):
    return 2**a * mp.gamma((d + a) / 2) / (mp.pi ** (mp.mpf(d) / 2) * abs(mp.gamma(-a / 2)))


def kernel_1d(alpha, lo, hi, n):
    h = (hi - lo) / n
    x = lo + (np.arange(n) + 0.5) * h
    c = float(riesz_constant(1, mp.mpf(alpha)))
    r = np.abs(x[:, None] - x[None, :])
    with np.errstate(divide="ignore"):
        k = c * h * r ** (alpha - 1.0)
    # equal-volume ball in 1D is the cell itself
    np.fill_diagonal(k, c * 2.0 * (h / 2) ** alpha / alpha)
    return x, h, k


def gamma_linear(k, v, h):
    # U = K v (1 - U)  <=>  (I + K diag v) U = K v
    n = len(v)
    u = np.linalg.solve(np.eye(n) + k * v[None, :], k @ v)
    return h * np.sum(v * (1 - u))


def main():
    print("riesz c(1,0.5) =", mp.nstr(riesz_constant(1, mp.mpf("0.5")), 17), " 1/sqrt(2pi) =", mp.nstr(1 / mp.sqrt(2 * mp.pi), 17))
    print("riesz c(2,1)   =", mp.nstr(riesz_constant(2, 1), 17))
    print("riesz c(1,0.6) =", mp.nstr(riesz_constant(1, mp.mpf("0.6")), 17))
    print("riesz c(3,1.5) =", mp.nstr(riesz_constant(3, mp.mpf("1.5")), 17))
    print("form A(1,0.6)  =", mp.nstr(form_constant(1, mp.mpf("0.6")), 17))
    print("form A(2,1)    =", mp.nstr(form_constant(2, 1), 17))
    a = mp.mpf("0.6")
    print("gaussian energy Gamma((1+a)/2) =", mp.nstr(mp.gamma((1 + a) / 2), 17))
    cap = 2**a * mp.pi / (mp.gamma((1 - a) / 2) * mp.gamma(1 + (1 - a) / 2))
    print("Cap([-1,1]) continuum =", mp.nstr(cap, 17))

    # Gaussian potential on [-4, 4], n = 256
    x, h, k = kernel_1d(0.6, -4.0, 4.0, 256)
    v = np.exp(-x**2 / (2 * 0.25))
    print("Gamma(gaussian w=0.5), n=256 =", repr(gamma_linear(k, v, h)))
    s = (np.abs(x) <= 1.0).astype(float)
    for m in (10.0, 100.0, 1000.0, 10000.0):
        print(f"Gamma({m:g} 1_[-1,1]) =", repr(gamma_linear(k, m * s, h)))
    idx = np.where(s > 0)[0]
    mu = np.linalg.solve(k[np.ix_(idx, idx)], np.ones(len(idx)))
    print("discrete Cap([-1,1]) n=256 =", repr(h * mu.sum()))

    # two-cell grid on [0, 1], v = 3 on the first cell only
    x2, h2, k2 = kernel_1d(0.6, 0.0, 1.0, 2)
    v2 = np.array([3.0, 0.0])
    print("two-cell Gamma =", repr(gamma_linear(k2, v2, h2)), " closed form =", repr(h2 * 3.0 / (1 + k2[0, 0] * 3.0)))

    # exterior kernel mass in 2D for x in the unit square [-1,1]^2
    for p in ((0.0, 0.0), (0.5, -0.25)):
        def radial(theta):
            d = np.array([np.cos(theta), np.sin(theta)])
            reach = np.inf
            for ax in range(2):
                if d[ax] > 0:
                    reach = min(reach, (1 - p[ax]) / d[ax])
                elif d[ax] < 0:
                    reach = min(reach, (-1 - p[ax]) / d[ax])
            return reach ** (-1.0) / 1.0
        # alpha = 1: integral over exterior of |x-y|^-3 = int R(theta)^-1 dtheta
        corners = sorted(np.mod([np.arctan2(cy - p[1], cx - p[0]) for cx in (-1, 1) for cy in (-1, 1)], 2 * np.pi))
        pts = [0.0] + list(corners) + [2 * np.pi]
        val = sum(integrate.quad(radial, pts[i], pts[i + 1], epsabs=1e-14, epsrel=1e-13)[0] for i in range(len(pts) - 1))
        print(f"exterior mass 2D alpha=1 at {p} =", repr(val))

    # positive stable with beta = 1/2: CDF erfc(1/(2 sqrt x)) at a few points
    for t in (0.1, 1.0, 10.0):
        print(f"Levy CDF({t}) =", repr(special.erfc(1 / (2 * np.sqrt(t)))))


if __name__ == "__main__":
    main()
