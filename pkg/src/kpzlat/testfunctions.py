"""Periodic test functions on the unit torus with exact coefficient-level norms."""

from dataclasses import dataclass

import numpy as np

MAX_LIBRARY_FREQUENCY = 8


@dataclass(frozen=True)
class TrigPolynomial:
    """phi(x) = const + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x).

    Coefficients are stored densely from k = 1; norms come from Parseval's
    identity rather than numerical integration, which keeps every norm exact
    to roundoff.
    """

    const: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()
    name: str = "phi"

    def __post_init__(self):
        if len(self.cos_coeffs) != len(self.sin_coeffs):
            ka, kb = len(self.cos_coeffs), len(self.sin_coeffs)
            k = max(ka, kb)
            object.__setattr__(self, "cos_coeffs", tuple(self.cos_coeffs) + (0.0,) * (k - ka))
            object.__setattr__(self, "sin_coeffs", tuple(self.sin_coeffs) + (0.0,) * (k - kb))

    @property
    def max_frequency(self):
        return len(self.cos_coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.const)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            ang = 2.0 * np.pi * k * x
            if a:
                out += a * np.cos(ang)
            if b:
                out += b * np.sin(ang)
        return out

    def derivative(self):
        k_arr = np.arange(1, self.max_frequency + 1)
        cos_new = tuple(2.0 * np.pi * k * b for k, b in zip(k_arr, self.sin_coeffs))
        sin_new = tuple(-2.0 * np.pi * k * a for k, a in zip(k_arr, self.cos_coeffs))
        return TrigPolynomial(0.0, cos_new, sin_new, name=self.name + "'")

    @property
    def l2_norm_sq(self):
        acc = self.const * self.const
        for a, b in zip(self.cos_coeffs, self.sin_coeffs):
            acc += 0.5 * (a * a + b * b)
        return acc

    @property
    def h1_seminorm_sq(self):
        """Exact squared L2 norm of the spatial derivative."""
        acc = 0.0
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            acc += 0.5 * (2.0 * np.pi * k) ** 2 * (a * a + b * b)
        return acc

    def fourier_coefficients(self):
        """Complex coefficients c_k, k = 0..K, for phi = sum c_k e^{2 pi i k x}
        with c_{-k} = conj(c_k)."""
        coeffs = np.zeros(self.max_frequency + 1, dtype=complex)
        coeffs[0] = self.const
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            coeffs[k] = 0.5 * (a - 1j * b)
        return coeffs


def sine(k=1, name=None):
    if not 1 <= k <= MAX_LIBRARY_FREQUENCY:
        raise ValueError(f"library frequency must be in 1..{MAX_LIBRARY_FREQUENCY}")
    coeffs = [0.0] * k
    coeffs[k - 1] = 1.0
    return TrigPolynomial(0.0, (0.0,) * k, tuple(coeffs), name=name or f"sin{k}")


def cosine(k=1, name=None):
    if not 1 <= k <= MAX_LIBRARY_FREQUENCY:
        raise ValueError(f"library frequency must be in 1..{MAX_LIBRARY_FREQUENCY}")
    coeffs = [0.0] * k
    coeffs[k - 1] = 1.0
    return TrigPolynomial(0.0, tuple(coeffs), (0.0,) * k, name=name or f"cos{k}")


def standard_library(max_frequency=3):
    """sin/cos pairs up to ``max_frequency`` plus one mixed polynomial."""
    funcs = []
    for k in range(1, max_frequency + 1):
        funcs.append(sine(k))
        funcs.append(cosine(k))
    funcs.append(
        TrigPolynomial(0.0, (0.5, 0.0, -0.25), (1.0, 0.3, 0.0), name="mixed3")
    )
    return funcs


def by_name(name):
    """Resolve a config-level test-function name like ``sin2`` or ``mixed3``."""
    name = name.strip().lower()
    if name.startswith("sin"):
        return sine(int(name[3:] or 1))
    if name.startswith("cos"):
        return cosine(int(name[3:] or 1))
    if name == "mixed3":
        return standard_library(1)[-1]
    raise ValueError(f"unknown test function {name!r}")


def indicator_fejer(x0, eps, order=None):
    """Fejer-smoothed truncation of the kernel ``eps^{-1} 1_[x0, x0+eps)``.

    The sharp kernel is not an admissible smooth test function, so its
    Fourier series is truncated at ``order`` (default ``round(4/eps)``) with
    Fejer weights ``1 - k/(order+1)``, which keeps the approximation
    nonnegative and removes the Gibbs overshoot.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    m = int(order) if order is not None else max(1, round(4.0 / eps))
    cos_c = []
    sin_c = []
    for k in range(1, m + 1):
        theta = 2.0 * np.pi * k
        c_k = np.exp(-1j * theta * x0) * (1.0 - np.exp(-1j * theta * eps)) / (1j * theta * eps)
        w = 1.0 - k / (m + 1.0)
        cos_c.append(2.0 * w * c_k.real)
        sin_c.append(-2.0 * w * c_k.imag)
    return TrigPolynomial(
        1.0, tuple(cos_c), tuple(sin_c), name=f"fejer(x0={x0:g},eps={eps:g})"
    )
