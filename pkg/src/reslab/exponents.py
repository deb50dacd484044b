"""Closed-form convergence-rate exponents and regularity constants.

Parameters follow the volume/resistance growth conventions
``c_l r^s0 <= mu(B(x,r)) <= c_u r^s1`` and ``R(x, B(x,r)^c) >= c_LR r^theta``.
Every calculator validates its domain and raises :class:`ExponentDomainError`
instead of returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LOG_53 = math.log(5.0 / 3.0)


class ExponentDomainError(ValueError):
    pass


def _log53(x: float) -> float:
    return math.log(x) / LOG_53


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ExponentDomainError(msg)


def _kappa_range(kappa, lo=0.5, hi=1.0, hi_open=False):
    ok = lo <= kappa < hi if hi_open else lo <= kappa <= hi
    _need(ok, f"kappa={kappa} outside [{lo}, {hi}{')' if hi_open else ']'}")


def _a3_condition(s0, s1):
    _need(s0 > 0 and s1 > 0, "s0, s1 must be positive")
    _need((s0 - s1) * (2 + s0) < 1, f"(s0-s1)(2+s0) < 1 fails for s0={s0}, s1={s1}")


def theta_cap(s0: float, s1: float) -> float:
    """``(1 + s0 - s1) / (1 - (s0 - s1)(2 + s0))``."""
    _a3_condition(s0, s1)
    return (1 + s0 - s1) / (1 - (s0 - s1) * (2 + s0))


def beta(s0: float, s1: float) -> float:
    _a3_condition(s0, s1)
    gap = (2 + s0) * (s0 - s1)
    return (1 - gap) / (s1 + 2 * gap)


def sg_exponent_a2(s0: float, theta: float, kappa: float) -> float:
    """Semigroup exponent under volume bounds plus a lower resistance estimate."""
    _need(s0 > 0 and theta > 0, "s0 and theta must be positive")
    _kappa_range(kappa)
    return kappa / (kappa + (1 + s0) * (2 + kappa) * (kappa + theta))


def sg_exponents_a3(s0: float, s1: float, kappa: float) -> tuple[float, float]:
    """``(E1, E2)`` for the rate ``h^E1 log(1/h)^E2`` in the local, uniformly perfect case."""
    _kappa_range(kappa)
    th = theta_cap(s0, s1)
    den = kappa + (1 + s0) * (2 + kappa) * th
    return kappa / den, kappa * (2 + kappa) * ((1 + s0) * th - 1) / den


def hk_exponent_a1(s0: float, s1: float, kappa: float) -> float:
    _need(s0 > 0 and s1 > 0, "s0, s1 must be positive")
    _need(s0 < s1 + 1, "need s0 < s1 + 1")
    _kappa_range(kappa, 0.5, 2.0 / 3.0, hi_open=True)
    gap = s1 - s0 + 1
    return 2 * gap / (((2 * kappa + 5) * s0 + 2 * kappa + 4) * (s1 + 2) + 2 * gap)


def hk_exponent_a2(s0: float, s1: float, theta: float, kappa: float) -> float:
    # theta only enters through the validity condition
    _need(s0 > 0 and s1 > 0 and theta > 0, "s0, s1, theta must be positive")
    _need(s0 < s1 + 1, "need s0 < s1 + 1")
    _need((1 + s0) * theta > max(1.0, s1), "need (1+s0) theta > max(1, s1)")
    _kappa_range(kappa)
    gap = s1 - s0 + 1
    return gap / ((kappa + 2) * (1 + s0) * (s1 + 2) + s0 / 2 + gap)


def hk_exponents_a3(s0: float, s1: float, kappa: float) -> tuple[float, float]:
    _need(s0 < s1 + 1, "need s0 < s1 + 1")
    _kappa_range(kappa)
    th = theta_cap(s0, s1)
    gap = s1 - s0 + 1
    e1 = gap / ((2 + kappa) * (1 + s0) * th + s0 / 2 + gap)
    e2 = (2 + kappa) * (s1 + 2 * (2 + s0) * (s0 - s1)) / (1 - (2 + s0) * (s0 - s1))
    return e1, e2


def sierpinski_exponents(kappa: float) -> tuple[float, float, float, float]:
    """``(E_sg1, E_sg2, E_hk1, E_hk2)`` for the gasket with rate base ``3/5``."""
    _kappa_range(kappa)
    l5, l3 = _log53(5.0), _log53(3.0)
    den = kappa + (2 + kappa) * l5
    e_sg1 = kappa ** 2 / den
    e_sg2 = kappa * (2 + kappa) * l3 / den
    e_hk1 = kappa / ((2 + kappa) * l5 + 0.5 * l3 + 1)
    e_hk2 = (2 + kappa) * l5
    return e_sg1, e_sg2, e_hk1, e_hk2


def sierpinski_dimensions() -> dict:
    """Volume exponent in the resistance metric and the Euclidean/resistance exponent."""
    return {"s": _log53(3.0), "log2_5_3": math.log(5.0 / 3.0) / math.log(2.0)}


def _btm_alpha(alpha):
    _need(alpha > 1, f"alpha={alpha} must exceed 1")


def btm_quenched_exponents(alpha: float, kappa: float) -> tuple[float, float]:
    """Suprema of admissible quenched exponents: (distribution function, semigroup)."""
    _btm_alpha(alpha)
    _need(0.5 < kappa <= 1, f"kappa={kappa} outside (1/2, 1]")
    core = min(1 - 1 / alpha, 0.5)
    return 2.0 / 11.0 * core, kappa / (3 * kappa + 4) * core


def btm_annealed_threshold(kappa: float) -> float:
    """Smallest tail exponent (exclusive) for which the annealed bounds hold."""
    return kappa / (3 * kappa + 4) + 5 * kappa + 3.5


def btm_annealed_exponents(alpha: float, kappa: float) -> tuple[float, float]:
    """Suprema of admissible annealed exponents: (semigroup, heat kernel)."""
    _need(0.5 < kappa <= 1, f"kappa={kappa} outside (1/2, 1]")
    thr = btm_annealed_threshold(kappa)
    _need(alpha > thr, f"annealed bounds need alpha > {thr}, got {alpha}")
    sg = kappa / (2 * (3 * kappa + 4))
    return sg, sg / (kappa + 2)


@dataclass(frozen=True)
class RegularityParams:
    s0: float
    s1: float
    theta: float
    kappa: float
    c_l: float
    c_u: float
    c_LR: float
    c_UP: float

    def __post_init__(self):
        for name in ("s0", "s1", "theta", "c_l", "c_u", "c_LR"):
            _need(getattr(self, name) > 0, f"{name} must be positive")
        _need(0 < self.c_UP < 1, "c_UP must lie in (0, 1)")
        _kappa_range(self.kappa)

    def satisfies_a2(self) -> bool:
        return (1 + self.s0) * self.theta > max(1.0, self.s1)

    def satisfies_a3(self) -> bool:
        return (self.s0 - self.s1) * (2 + self.s0) < 1


def regularity_constants(p: RegularityParams, diam: float) -> dict:
    """Every explicit constant of the regularity summary, evaluated for ``p``.

    ``diam`` is the diameter of the space; it enters ``D_F`` and the ranges of
    validity but not the constants themselves.
    """
    _need(diam > 0, "diam must be positive")
    c_A1 = 1 + 1 / p.c_l
    c_LR_derived = 1.0 / (4 * p.c_u * (p.c_UP / 4 + 1) ** p.s1
                          / (p.c_l * (p.c_UP / 16) ** p.s0 * p.c_UP))
    c_UR = 1 + 1 / p.c_UP
    c_Exit = 4 ** (2 + p.s0) / (3 * p.c_l * p.c_LR ** (1 + p.s0))
    D_F = min(0.5 * diam, (2 * diam / p.c_LR) ** (1 / p.theta))
    c_A2 = 0.01 / (p.c_u * (5 * c_Exit) ** (p.s1 / ((1 + p.s0) * p.theta)))
    out = {
        "c_A1": c_A1,
        "c_LR_derived": c_LR_derived,
        "c_UR": c_UR,
        "c_Exit": c_Exit,
        "D_F": D_F,
        "c_A2": c_A2,
        "c_A2_time_limit": D_F ** ((1 + p.s0) * p.theta) / (5 * c_Exit),
    }
    if p.satisfies_a3():
        b = beta(p.s0, p.s1)
        base = p.c_l * (p.c_LR / 4) ** (1 + p.s0)
        C = base / (4 * p.c_u * c_UR) * (base ** 2 / (256 * p.c_u * c_UR)) ** b
        out.update({
            "beta": b,
            "c_summ": C,
            "c_A3": 1 / (4 * p.c_u) * (math.log(4) / (2 ** b * C)) ** (b * p.s1 / (1 + b)),
            "c_A3_time_limit": 2 * (C * (0.5 * diam) ** (1 + b) / math.log(4)) ** (1 / b),
        })
    return out


def noncompact_exponent(s: float, theta: float, kappa: float) -> float:
    return sg_exponent_a2(s, theta, kappa)


def noncompact_constant(mu_n_r: float, mu_r: float, diam_union: float, diam_r: float,
                        s: float, theta: float, kappa: float, diam_n_r: float | None = None) -> float:
    """The polynomial prefactor ``C_n(r)`` of the truncation argument.

    ``mu_r``/``mu_n_r`` are the masses of the radius-``r`` balls of the limit
    and the approximation, ``diam_r``/``diam_n_r`` their diameters and
    ``diam_union`` the diameter of their union inside the common space.
    """
    if diam_n_r is None:
        diam_n_r = diam_r
    for v in (mu_n_r, mu_r, diam_union, diam_r, diam_n_r):
        _need(v >= 0, "masses and diameters must be nonnegative")
    _need(s > 0 and theta > 0, "s and theta must be positive")
    _kappa_range(kappa)
    D = max(mu_r * diam_r, mu_n_r * diam_n_r)
    power = 4 + 2 * (1 + s / (2 * (1 + s) * theta)) * (2 * kappa - 1)
    bracket = ((diam_union + mu_n_r) * diam_union * mu_n_r * mu_r ** 1.5 * diam_r
               * (math.sqrt(mu_r) + mu_n_r))
    return D ** power * bracket


def exponent_table(s0: float, s1: float, theta: float, kappa: float, alpha: float | None = None) -> dict:
    """All exponents that are defined for the given parameters; others map to an error string."""
    table: dict = {"params": {"s0": s0, "s1": s1, "theta": theta, "kappa": kappa, "alpha": alpha}}

    def put(name, fn, *args):
        try:
            table[name] = fn(*args)
        except ExponentDomainError as exc:
            table[name] = f"undefined: {exc}"

    put("Theta", theta_cap, s0, s1)
    put("beta", beta, s0, s1)
    put("E_sg_A2", sg_exponent_a2, s0, theta, kappa)
    put("E_sg_A3", sg_exponents_a3, s0, s1, kappa)
    put("E_hk_A1", hk_exponent_a1, s0, s1, kappa)
    put("E_hk_A2", hk_exponent_a2, s0, s1, theta, kappa)
    put("E_hk_A3", hk_exponents_a3, s0, s1, kappa)
    put("E_noncompact", noncompact_exponent, s0, theta, kappa)
    put("sierpinski", sierpinski_exponents, kappa)
    if alpha is not None:
        put("btm_quenched", btm_quenched_exponents, alpha, kappa)
        put("btm_annealed", btm_annealed_exponents, alpha, kappa)
        table["btm_annealed_alpha_threshold"] = btm_annealed_threshold(kappa)
    for k, v in list(table.items()):
        if isinstance(v, tuple):
            table[k] = list(v)
    return table
