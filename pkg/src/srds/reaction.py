"""Reaction terms f_l = h_l + k_l: odd polynomial drifts with negative
leading coefficients plus locally Lipschitz couplings of linear growth.

Construction certifies the one-sided polynomial bounds

    h(s) <= a2 - b2 s^q   on s >= 0,      a1 - b1 s^q <= h(s)   on s <= 0,

(q = 2N+1 the odd degree) together with the sup/ratio constants feeding the
dissipativity margins, all by exact critical-point analysis of the
polynomials involved.  Couplings are user-supplied callables with declared
constants which are trusted but audited on seeded samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AuditError


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients ascending, constant term omitted: j = 1..q)


def _horner(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate sum_j coeffs[j-1] * s^j; coeffs is (q,) or (n, q) row-per-cell."""
    if coeffs.ndim == 1:
        r = np.full_like(np.asarray(s, dtype=float), coeffs[-1])
        for c in coeffs[-2::-1]:
            r = r * s + c
        return r * s
    r = np.broadcast_to(coeffs[:, -1], np.shape(s)).copy()
    for j in range(coeffs.shape[1] - 2, -1, -1):
        r = r * s + coeffs[:, j]
    return r * s


def _with_constant(coeffs: np.ndarray) -> np.ndarray:
    """Ascending coefficient vector [0, w_1, ..., w_q] for numpy.polynomial."""
    return np.concatenate(([0.0], coeffs))


def _poly_max_nonneg(asc: np.ndarray) -> float:
    """max over s >= 0 of the polynomial with ascending coefficients ``asc``.

    Requires a negative leading coefficient so the max is attained.
    """
    p = np.polynomial.Polynomial(asc)
    dp = p.deriv()
    cands = [0.0]
    roots = dp.roots()
    for z in roots:
        if abs(z.imag) < 1e-9 and z.real > 0:
            cands.append(float(z.real))
    return float(max(p(c) for c in cands))


def _ratio_sup_nonneg(asc: np.ndarray, q: int) -> float:
    """sup over t >= 0 of P(t) / (1 + t^q) for a degree-q polynomial P.

    The sup is either at a stationary point (root of P'(1+t^q) - q t^{q-1} P)
    or the t -> infinity limit, which is the leading coefficient.
    """
    P = np.polynomial.Polynomial(asc)
    dP = P.deriv()
    tq = np.polynomial.Polynomial([1.0] + [0.0] * (q - 1) + [1.0])  # 1 + t^q
    dtq = tq.deriv()
    num = dP * tq - dtq * P
    cands = [0.0]
    for z in num.roots():
        if abs(z.imag) < 1e-9 and z.real > 0:
            cands.append(float(z.real))
    best = max(float(P(c)) / (1.0 + c**q) for c in cands)
    return max(best, float(asc[-1]))


def _flip(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of s -> h(-s) (ascending, constant omitted)."""
    signs = (-1.0) ** np.arange(1, len(coeffs) + 1)
    return coeffs * signs


# ---------------------------------------------------------------------------
# drifts


class PolynomialDrift:
    """h(x, s) = sum_{j=1}^{q} w_j(x) s^j with odd q and w_q <= -epsilon_lead.

    ``coeffs`` is either a constant vector of length q or a per-cell array
    of shape (n_cells, q).
    """

    def __init__(self, coeffs, epsilon_lead: float = 1e-8):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim not in (1, 2) or coeffs.shape[-1] < 1:
            raise AuditError("drift-shape", f"bad coefficient shape {coeffs.shape}")
        q = coeffs.shape[-1]
        if q % 2 == 0:
            raise AuditError("even-degree", f"drift degree {q} must be odd")
        if not epsilon_lead > 0:
            raise AuditError("leading-coefficient", "epsilon_lead must be positive")
        lead = coeffs[..., -1]
        if np.any(lead > -epsilon_lead):
            raise AuditError(
                "leading-coefficient",
                f"leading coefficient max {np.max(lead):.6g} above -{epsilon_lead}")
        self.coeffs = coeffs
        self.degree = q
        self.epsilon_lead = float(epsilon_lead)

    @property
    def n_poly(self) -> int:
        return (self.degree - 1) // 2

    @property
    def per_cell(self) -> bool:
        return self.coeffs.ndim == 2

    def evaluate(self, s: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        c = self.coeffs
        if self.per_cell and cells is not None:
            c = c[cells]
        return _horner(c, np.asarray(s, dtype=float))

    def lipschitz_bound(self, m: float) -> float:
        """sup_{|s|<=m} |h'| bounded by sum_j j |w_j| m^{j-1}."""
        j = np.arange(1, self.degree + 1)
        wmax = np.max(np.abs(self.coeffs), axis=0) if self.per_cell else np.abs(self.coeffs)
        return float(np.sum(j * wmax * m ** (j - 1)))

    def coefficient_rows(self) -> np.ndarray:
        return self.coeffs if self.per_cell else self.coeffs[None, :]

    def descriptor(self) -> bytes:
        return b"poly:" + self.coeffs.tobytes() + repr(self.degree).encode()


class TruncatedDrift:
    """Drift frozen beyond |s| = level: h^(n)(x, s) = h(x, clip(s, -n, n))."""

    def __init__(self, base: PolynomialDrift, level: float):
        self.base = base
        self.level = float(level)
        self.degree = base.degree

    @property
    def n_poly(self) -> int:
        return self.base.n_poly

    def evaluate(self, s, cells=None):
        return self.base.evaluate(np.clip(s, -self.level, self.level), cells)

    def lipschitz_bound(self, m: float) -> float:
        return self.base.lipschitz_bound(min(m, self.level))

    def descriptor(self) -> bytes:
        return self.base.descriptor() + f"|trunc:{self.level!r}".encode()


# ---------------------------------------------------------------------------
# (F1)/(F2) certificates


@dataclass(frozen=True)
class F1F2Certificate:
    """Certified constants for one drift.

    ``a`` is the one-sided bound (h <= a on s >= 0, h >= -a on s <= 0);
    ``a_sym`` additionally covers the opposite-sign directions through the
    ratio sup of |h(s)| / (1 + |s|^q).  The sandwich constants satisfy
    h <= a2 - b2 s^q on s >= 0 and h >= a1 - b1 s^q on s <= 0.  a_prime,
    a_dd, b_dd are the derived dissipativity-margin constants.
    """

    degree: int
    a: float
    a_sym: float
    a1: float
    a2: float
    b1: float
    b2: float
    a_prime: float
    a_dd: float
    b_dd: float

    @property
    def n_poly(self) -> int:
        return (self.degree - 1) // 2


ZERO_CERTIFICATE = F1F2Certificate(degree=1, a=0.0, a_sym=0.0, a1=0.0, a2=0.0,
                                   b1=0.0, b2=0.0, a_prime=0.0, a_dd=0.0, b_dd=0.0)


def check_f1_f2(drift: PolynomialDrift) -> F1F2Certificate:
    """Certify the one-sided polynomial bounds for a drift.

    b1 = b2 = half the smallest leading-coefficient magnitude; a2 and a1
    bound the auxiliary polynomials h + b2 s^q on s >= 0 and h + b1 s^q on
    s <= 0 via exact critical points, worst case over cells.
    """
    q = drift.degree
    rows = drift.coefficient_rows()
    eps_min = float(np.min(-rows[:, -1]))
    b = 0.5 * eps_min

    a2 = -np.inf
    a1 = np.inf
    m_plus = -np.inf
    m_minus_neg = -np.inf  # max over t>=0 of -h(-t), i.e. -min_{s<=0} h
    ratio_pos = 0.0  # sup_{s>=0} -h/(1+s^q)
    ratio_neg = 0.0  # sup_{s<=0} h/(1+|s|^q)
    shift = np.zeros(q)
    shift[-1] = b
    for w in rows:
        a2 = max(a2, _poly_max_nonneg(_with_constant(w + shift)))
        # min_{s<=0}(h + b s^q) = -max_{t>=0}(-h(-t) + b t^q)
        a1 = min(a1, -_poly_max_nonneg(_with_constant(-_flip(w) + shift)))
        m_plus = max(m_plus, _poly_max_nonneg(_with_constant(w)))
        m_minus_neg = max(m_minus_neg, _poly_max_nonneg(_with_constant(-_flip(w))))
        ratio_pos = max(ratio_pos, _ratio_sup_nonneg(_with_constant(-w), q))
        ratio_neg = max(ratio_neg, _ratio_sup_nonneg(_with_constant(_flip(w)), q))

    a_one = max(m_plus, m_minus_neg, 0.0)
    a_sym = max(a_one, ratio_pos, ratio_neg)
    a_prime = max(a_sym, a2, -a1, 0.0)
    b_dd = b * 2.0 ** (1 - q)
    a_dd = max(a2, 0.0) + max(-a1, 0.0) + 2.0 * b + 2.0 * a_sym
    return F1F2Certificate(degree=q, a=a_one, a_sym=a_sym, a1=float(a1), a2=float(a2),
                           b1=b, b2=b, a_prime=a_prime, a_dd=a_dd, b_dd=b_dd)


# ---------------------------------------------------------------------------
# couplings


class CouplingTerm:
    """k_l(x, s_1..s_r) with declared growth and local Lipschitz constants.

    ``fn`` is vectorized: it maps a state block of shape (r, n) to (n,).
    """

    def __init__(self, fn, c1: float, c2: float, lipschitz, name: str = "custom"):
        self.fn = fn
        self.c1 = float(c1)
        self.c2 = float(c2)
        self._lipschitz = lipschitz if callable(lipschitz) else (lambda m, L=lipschitz: L)
        self.name = name

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return self.fn(states)

    def lipschitz(self, m: float) -> float:
        return float(self._lipschitz(m))

    def audit(self, r: int, radii=(1.0, 10.0, 100.0), n_samples: int = 2048,
              seed: int = 99, tol: float = 1e-9) -> None:
        rng = np.random.default_rng(seed)
        for m in radii:
            s = rng.uniform(-m, m, size=(r, n_samples))
            t = rng.uniform(-m, m, size=(r, n_samples))
            ks, kt = self.fn(s), self.fn(t)
            growth = self.c1 + self.c2 * np.sum(np.abs(s), axis=0)
            if np.any(np.abs(ks) > growth + tol):
                i = int(np.argmax(np.abs(ks) - growth))
                raise AuditError("growth",
                                 f"coupling |k|={abs(ks[i]):.6g} exceeds "
                                 f"{self.c1}+{self.c2}*sum|s| at sample {i}")
            L = self.lipschitz(m)
            lip = L * np.sum(np.abs(s - t), axis=0)
            if np.any(np.abs(ks - kt) > lip + tol):
                i = int(np.argmax(np.abs(ks - kt) - lip))
                raise AuditError("lipschitz",
                                 f"coupling increment {abs(ks[i]-kt[i]):.6g} exceeds "
                                 f"L_{m}={L:.6g} bound at sample {i}")

    def descriptor(self) -> bytes:
        return f"coupling:{self.name}:{self.c1!r}:{self.c2!r}".encode()


class TruncatedCoupling:
    """Coupling frozen beyond the l1-ball: k^(n)(x,s) = k(x, n s / ||s||_1)."""

    def __init__(self, base: CouplingTerm, level: float):
        self.base = base
        self.level = float(level)
        self.c1 = base.c1
        self.c2 = base.c2
        self.name = f"{base.name}|trunc:{level}"

    def __call__(self, states: np.ndarray) -> np.ndarray:
        norms = np.sum(np.abs(states), axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > self.level, self.level / norms, 1.0)
        return self.base.fn(states * scale)

    def lipschitz(self, m: float) -> float:
        return self.base.lipschitz(min(m, self.level))

    def descriptor(self) -> bytes:
        return self.base.descriptor() + f"|trunc:{self.level!r}".encode()


def coupling_none(r: int) -> CouplingTerm:
    return CouplingTerm(lambda s: np.zeros(s.shape[1]), 0.0, 0.0, 0.0, name="none")


def coupling_linear(row: np.ndarray) -> CouplingTerm:
    """k(s) = sum_j row[j] * s_j."""
    row = np.asarray(row, dtype=float)
    cmax = float(np.max(np.abs(row))) if row.size else 0.0
    return CouplingTerm(lambda s, w=row: w @ s, 0.0, cmax, cmax, name="linear")


# ---------------------------------------------------------------------------
# the reaction system


class ReactionSystem:
    """F_l(u)(x) = h_l(x, u_l(x)) + k_l(x, u_1(x), ..., u_r(x))."""

    def __init__(self, drifts, couplings, audit: bool = True,
                 audit_radii=(1.0, 10.0, 100.0)):
        if len(drifts) != len(couplings):
            raise AuditError("component-count",
                             f"{len(drifts)} drifts vs {len(couplings)} couplings")
        self.r = len(drifts)
        self.drifts = list(drifts)
        self.couplings = list(couplings)
        self.certificates = []
        for h in self.drifts:
            if h is None:
                self.certificates.append(ZERO_CERTIFICATE)
            elif isinstance(h, TruncatedDrift):
                # truncation preserves (F1) with the original constants
                self.certificates.append(check_f1_f2(h.base))
            else:
                self.certificates.append(check_f1_f2(h))
        if audit:
            for k in self.couplings:
                base = k.base if isinstance(k, TruncatedCoupling) else k
                base.audit(self.r, radii=audit_radii)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim != 2 or u.shape[0] != self.r:
            raise ValueError(f"state must have shape ({self.r}, n), got {u.shape}")
        out = np.empty_like(u)
        for l in range(self.r):
            drift = self.drifts[l]
            out[l] = 0.0 if drift is None else drift.evaluate(u[l])
            out[l] += self.couplings[l](u)
        return out

    def evaluate_samples(self, component: int, samples: np.ndarray,
                         cells: np.ndarray | None = None) -> np.ndarray:
        """F_l at arbitrary state vectors, shape (r, n_samples)."""
        drift = self.drifts[component]
        h = 0.0 if drift is None else drift.evaluate(samples[component], cells)
        return h + self.couplings[component](samples)

    def coupling_lipschitz(self, m: float) -> float:
        return max(k.lipschitz(m) for k in self.couplings)

    def lipschitz(self, m: float) -> float:
        """Bound for the full f on [-m, m]^r (drift derivative + coupling)."""
        drift = 0.0
        for h in self.drifts:
            if h is not None:
                drift = max(drift, h.lipschitz_bound(m))
        return drift + self.coupling_lipschitz(m)

    def descriptor(self) -> bytes:
        parts = []
        for h, k in zip(self.drifts, self.couplings):
            parts.append(b"0" if h is None else h.descriptor())
            parts.append(k.descriptor())
        return b"|".join(parts)


def evaluate_reaction(sys: ReactionSystem, u: np.ndarray) -> np.ndarray:
    return sys.evaluate(u)


# ---------------------------------------------------------------------------
# checkers


def dissipativity_gap(sys: ReactionSystem, component: int, u: np.ndarray,
                      v: np.ndarray, mode: int = 1) -> float:
    """Signed dissipativity margin at the sup-norm argmax of u.

    The subdifferential element is the signed point evaluation at
    x* = argmax |u| (lowest cell index on ties).  Mode 1 returns
    a'(1+||v||)^q - <H(u+v), phi>; mode 2 returns
    a''(1+||v||)^q - b''||u||^q - <H(u+v) - H(v), phi>.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.all(u == 0.0):
        raise ValueError("zero u field: subdifferential evaluation needs an argmax")
    xstar = int(np.argmax(np.abs(u)))
    sgn = 1.0 if u[xstar] > 0 else -1.0
    cert = sys.certificates[component]
    drift = sys.drifts[component]
    q = cert.degree
    vnorm = float(np.max(np.abs(v)))
    envelope = (1.0 + vnorm) ** q

    def h_at(field):
        if drift is None:
            return 0.0
        return float(drift.evaluate(field[xstar:xstar + 1],
                                    cells=np.array([xstar]))[0])

    if mode == 1:
        return cert.a_prime * envelope - sgn * h_at(u + v)
    if mode == 2:
        unorm = float(np.max(np.abs(u)))
        pairing = sgn * (h_at(u + v) - h_at(v))
        return cert.a_dd * envelope - cert.b_dd * unorm**q - pairing
    raise ValueError(f"mode must be 1 or 2, got {mode}")


@dataclass
class QuasiPositivityReport:
    passed: bool
    witness: tuple | None
    audit_margin_min: float
    lipschitz_used: float
    samples: int


def check_quasi_positive(sys: ReactionSystem, grid_samples: int = 10_000,
                         range_m: float = 1.0, seed: int = 2024,
                         lipschitz_m: float | None = None,
                         tol: float = 1e-9) -> QuasiPositivityReport:
    """Sample-based quasi-positivity check plus its Lipschitz consequence.

    Phase 1 samples states with s_l = 0 and s_j >= 0 elsewhere and requires
    F_l >= 0 (witness returned on failure).  Phase 2 samples s_l <= 0 in
    [-m, m]^r and audits -F_l <= L_m * sum_j s_j^- + tol.
    """
    if not range_m > 0:
        raise ValueError("range_m must be positive")
    rng = np.random.default_rng(seed)
    L = sys.lipschitz(range_m) if lipschitz_m is None else float(lipschitz_m)
    # per-cell drift coefficients are sampled through random cell indices
    n_cells = max((h.coeffs.shape[0] for h in sys.drifts
                   if h is not None and getattr(h, "per_cell", False)),
                  default=0)
    cells = rng.integers(0, n_cells, size=grid_samples) if n_cells else None
    margin_min = np.inf
    for l in range(sys.r):
        s = rng.uniform(0.0, range_m, size=(sys.r, grid_samples))
        s[l] = 0.0
        vals = sys.evaluate_samples(l, s, cells)
        if np.any(vals < -1e-12):
            i = int(np.argmin(vals))
            return QuasiPositivityReport(False, (l, s[:, i].copy(), float(vals[i])),
                                         float("nan"), L, grid_samples)
        t = rng.uniform(-range_m, range_m, size=(sys.r, grid_samples))
        t[l] = -np.abs(t[l])
        neg_part = np.sum(np.maximum(-t, 0.0), axis=0)
        margins = L * neg_part + tol - (-sys.evaluate_samples(l, t, cells))
        margin_min = min(margin_min, float(np.min(margins)))
        if margin_min < 0:
            return QuasiPositivityReport(False, None, margin_min, L, grid_samples)
    return QuasiPositivityReport(True, None, margin_min, L, grid_samples)


# ---------------------------------------------------------------------------
# the FitzHugh-Nagumo instance


def _fhn_k1(s):
    return s[1].copy()


class _FhnK2:
    def __init__(self, a: float, b: float):
        self.a = a
        self.b = b

    def __call__(self, s):
        return self.a * s[0] - self.b * s[1]


def fhn_system(a: float = 1.0, b: float = 1.0) -> ReactionSystem:
    """FitzHugh-Nagumo reaction: f1 = u - u^3 + v, f2 = a*u - b*v.

    Split as h1(s) = s - s^3 with coupling v, h2 = 0 with coupling a*u - b*v.
    Quasi-positivity is certified at construction.
    """
    if not (a > 0 and b > 0):
        raise AuditError("fhn-parameters", f"a={a}, b={b} must be positive")
    h1 = PolynomialDrift([1.0, 0.0, -1.0], epsilon_lead=1.0)
    k1 = CouplingTerm(_fhn_k1, 0.0, 1.0, 1.0, name="fhn-k1")
    k2 = CouplingTerm(_FhnK2(a, b), 0.0, max(a, b), max(a, b), name="fhn-k2")
    sys = ReactionSystem([h1, None], [k1, k2])
    report = check_quasi_positive(sys, grid_samples=2000, range_m=5.0,
                                  lipschitz_m=max(1.0, a, b) * sys.r)
    if not report.passed:
        raise AuditError("quasi-positivity", f"witness {report.witness}")
    return sys
