"""Problem data: the reaction term f, the potential V, and hypothesis checkers.

The default reaction term is the smooth odd double-power interpolant

    f(s) = |s|^(q-2) s / (1 + |s|^(q-p)),        2 < p < 2* < q,

which behaves like |s|^(q-2)s near 0 and |s|^(p-2)s at infinity.  Its
primitive F is available in closed form whenever p = q/2 (the default
p=3, q=6 case) and otherwise through a fixed high-order panel quadrature.
A pure power |s|^(e-2)s is provided for oracle tests only: it admits a
closed-form ray scaling but deliberately violates the two-sided growth
envelope, so it is barred from production runs.

Checkers sweep log grids and report margins; they are numerical sweeps,
not proofs.
"""

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy import integrate

from .errors import BracketError, ConfigError, DivergenceError, DomainError

_LD = np.longdouble


def two_star(N):
    """Critical Sobolev exponent 2N/(N-2)."""
    if N < 3:
        raise DomainError("critical exponent requires N >= 3")
    return 2.0 * N / (N - 2.0)


def sphere_area(N):
    """Surface measure of the unit sphere S^(N-1)."""
    return 2.0 * pi ** (N / 2.0) / gamma(N / 2.0)


def sobolev_constant(N):
    """Best constant S of the embedding D^{1,2}(R^N) -> L^{2*}(R^N).

    Closed form of the extremal (bubble) value; see the package tests for
    the independent Rayleigh-quotient cross-check.
    """
    if N < 3:
        raise DomainError("Sobolev constant S is defined for N >= 3 only")
    return N * (N - 2.0) * pi * (gamma(N / 2.0) / gamma(float(N))) ** (2.0 / N)


def _dyadic_unit_rule(n_panels=48, n_gauss=8):
    """Gauss nodes/weights on [0,1] with panels graded dyadically toward 0.

    Integrates x^a * smooth accurately for any a > 2; used for primitives
    of reaction terms without a closed form.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    nodes, weights = [], []
    hi = 1.0
    for _ in range(n_panels):
        lo = hi / 2.0
        nodes.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * xg)
        weights.append(0.5 * (hi - lo) * wg)
        hi = lo
    return np.concatenate(nodes), np.concatenate(weights)


_UNIT_TAU, _UNIT_TW = _dyadic_unit_rule()


@dataclass(frozen=True)
class Nonlinearity:
    """Odd reaction term with primitive F and derivative f'.

    kind 'double_power_smooth' is the production term; 'pure_power_test'
    (exponent field) exists only to exercise closed-form oracles.
    amplitude is the envelope constant used by the growth checker.
    """

    kind: str = "double_power_smooth"
    p: float = 3.0
    q: float = 6.0
    theta: float = 3.0
    amplitude: float = 6.0
    exponent: float = None  # pure_power_test only

    def __post_init__(self):
        if self.kind not in ("double_power_smooth", "pure_power_test"):
            raise ConfigError(f"unknown nonlinearity kind {self.kind!r}")
        if not (self.p > 2.0 and self.q > self.p):
            raise ConfigError("exponents must satisfy 2 < p < q")
        if self.theta <= 2.0:
            raise ConfigError("superquadraticity exponent theta must exceed 2")
        if self.amplitude <= 0.0:
            raise ConfigError("envelope amplitude must be positive")
        if self.kind == "pure_power_test" and self.exponent is None:
            object.__setattr__(self, "exponent", self.p)

    # -- evaluation ---------------------------------------------------------

    def f(self, s):
        s = np.asarray(s)
        a = np.abs(s)
        if self.kind == "pure_power_test":
            e = self.exponent
            return np.sign(s) * a ** (e - 1.0)
        return np.sign(s) * a ** (self.q - 1.0) / (1.0 + a ** (self.q - self.p))

    def fprime(self, s):
        s = np.asarray(s)
        a = np.abs(s)
        if self.kind == "pure_power_test":
            e = self.exponent
            return (e - 1.0) * a ** (e - 2.0)
        x = a ** (self.q - self.p)
        return a ** (self.q - 2.0) * ((self.q - 1.0) + (self.p - 1.0) * x) / (1.0 + x) ** 2

    def F(self, s):
        s = np.asarray(s)
        a = np.abs(s)
        if self.kind == "pure_power_test":
            e = self.exponent
            return a ** e / e
        d = self.q - self.p
        if abs(self.p - self.q / 2.0) < 1e-14:
            # p = q/2: F = (x - log(1+x))/d with x = |s|^d, series for small x
            x = a ** d
            small = x < 1e-3
            xs = np.where(small, x, 0.0)
            series = xs * xs * (0.5 - xs / 3.0 + xs * xs / 4.0 - xs ** 3 / 5.0 + xs ** 4 / 6.0)
            return np.where(small, series, x - np.log1p(np.where(small, 1.0, x))) / d
        # generic: F(s) = s * int_0^1 f(s t) dt on the fixed dyadic rule
        vals = self.f(np.multiply.outer(a, _UNIT_TAU))
        return a * np.sum(vals * _UNIT_TW, axis=-1)

    def ar_margins(self, s):
        """Cancellation-safe values of (f(s)s - theta F(s), f'(s)s^2 - f(s)s).

        Both must be strictly positive for s != 0 under the superquadratic
        sandwich.  For theta <= p the first difference is evaluated as
        (p - theta) F + (f s - p F) with the second summand written as an
        explicit positive integral, which avoids the catastrophic
        cancellation at large |s| when theta = p.
        """
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        th = self.theta
        if self.kind == "pure_power_test":
            e = self.exponent
            m1 = (1.0 - th / e) * a ** e
            m2 = (e - 2.0) * a ** e
            return m1, m2
        p, q = self.p, self.q
        x = a ** (q - p)
        fs = a ** q / (1.0 + x)
        m2 = a ** q * ((q - 2.0) + (p - 2.0) * x) / (1.0 + x) ** 2
        if th <= p + 1e-14:
            # f s - p F = (q-p) * int_0^s t^{q-1}/(1+t^{q-p})^2 dt  (>= 0)
            g = np.multiply.outer(a, _UNIT_TAU)
            integ = g ** (q - 1.0) / (1.0 + g ** (q - p)) ** 2
            fspF = (q - p) * a * np.sum(integ * _UNIT_TW, axis=-1)
            m1 = (p - th) * self.F(s) + fspF
        else:
            m1 = fs - th * self.F(s)
        return m1, m2

    def eval(self, s, order):
        """Dispatch on order: -1 -> F, 0 -> f, 1 -> f'."""
        if order == -1:
            return self.F(s)
        if order == 0:
            return self.f(s)
        if order == 1:
            return self.fprime(s)
        raise DomainError(f"order must be in {{-1, 0, 1}}, got {order}")


def eval_f(nl, s, order=0):
    """Evaluate F, f, or f' at s; rejects non-finite arguments."""
    arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite argument to the reaction term")
    return nl.eval(arr, order)


# -- growth / superquadraticity checkers ------------------------------------


def default_sample_grid(lo=1e-6, hi=1e6, per_decade=60):
    decades = np.log10(hi / lo)
    n = int(decades * per_decade) + 1
    return np.geomspace(lo, hi, n)


@dataclass
class CheckResult:
    ok: bool
    margin: float
    worst: tuple = None  # (tag, sample, relative margin)
    reason: str = ""

    def __iter__(self):  # allow tuple-style unpacking (ok, margin)
        yield self.ok
        yield self.margin


def check_growth_f1(nl, N=4, grid=None):
    """Two-sided power envelope sweep for m in {-1, 0, 1}.

    |f^(m)(s)| <= A |s|^(p-(m+1)) for |s| >= 1 and <= A |s|^(q-(m+1)) for
    |s| <= 1, with A = nl.amplitude.  Exponent ordering 2 < p < 2* < q is
    rejected before sweeping.
    """
    ts = two_star(N)
    if nl.kind == "pure_power_test":
        # a single power cannot satisfy both envelope branches; still sweep
        # so the violating branch is reported.
        pass
    elif not (2.0 < nl.p < ts < nl.q):
        return CheckResult(False, -np.inf, ("config", None, -np.inf),
                           f"exponent ordering 2 < p < {ts:g} < q violated")
    s = default_sample_grid() if grid is None else np.asarray(grid)
    A = nl.amplitude
    worst = (None, None, np.inf)
    for m in (-1, 0, 1):
        vals = np.abs(nl.eval(s, m))
        bexp = np.where(s >= 1.0, nl.p - (m + 1.0), nl.q - (m + 1.0))
        bound = A * s ** bexp
        rel = (bound - vals) / bound
        i = int(np.argmin(rel))
        if rel[i] < worst[2]:
            worst = (f"f1[m={m}]", float(s[i]), float(rel[i]))
    ok = worst[2] > 0.0
    return CheckResult(ok, float(worst[2]), worst,
                       "" if ok else f"envelope violated at {worst[0]} s={worst[1]:g}")


def minimal_envelope_amplitude(nl, grid=None):
    """Smallest A for which the growth envelope holds on the sweep grid."""
    s = default_sample_grid() if grid is None else np.asarray(grid)
    need = 0.0
    for m in (-1, 0, 1):
        vals = np.abs(nl.eval(s, m))
        bexp = np.where(s >= 1.0, nl.p - (m + 1.0), nl.q - (m + 1.0))
        need = max(need, float(np.max(vals / s ** bexp)))
    return need


def check_ar_f2(nl, grid=None):
    """Strict superquadratic sandwich 0 < theta F <= f s < f' s^2 on a grid."""
    s = default_sample_grid() if grid is None else np.asarray(grid)
    s = s[s != 0.0]
    Fv = nl.F(s)
    fs = nl.f(s) * s
    m1, m2 = nl.ar_margins(s)
    scale1 = np.abs(fs) + 1e-300
    scale2 = np.abs(nl.fprime(s) * s * s) + 1e-300
    checks = [
        ("F>0", Fv, np.abs(Fv) + 1e-300),
        ("fs>0", fs, scale1),
        ("thetaF<=fs", m1, scale1),
        ("fs<f's^2", m2, scale2),
    ]
    worst = (None, None, np.inf)
    for tag, v, sc in checks:
        rel = v / sc
        i = int(np.argmin(rel))
        if rel[i] < worst[2]:
            worst = (f"f2[{tag}]", float(s[i]), float(rel[i]))
        if np.any(v <= 0.0):
            j = int(np.argmin(v))
            return CheckResult(False, float((v / sc)[j]), (f"f2[{tag}]", float(s[j]), float((v / sc)[j])),
                               f"{tag} fails at s={s[j]:g}")
    return CheckResult(True, float(worst[2]), worst)


def check_f3_odd(nl, rng=None, n=1000, tol=1e-12):
    """Sampled parity check: F even, f odd, f' even."""
    rng = rng or np.random.default_rng(0)
    s = rng.uniform(-50.0, 50.0, n)
    worst = 0.0
    worst = max(worst, float(np.max(np.abs(nl.F(s) - nl.F(-s)) / (1.0 + np.abs(nl.F(s))))))
    worst = max(worst, float(np.max(np.abs(nl.f(s) + nl.f(-s)) / (1.0 + np.abs(nl.f(s))))))
    worst = max(worst, float(np.max(np.abs(nl.fprime(s) - nl.fprime(-s)) / (1.0 + np.abs(nl.fprime(s))))))
    return CheckResult(worst <= tol, tol - worst)


# -- potentials --------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """Scalar potential.  Radial kinds depend on |x| only.

    kinds:
      zero            -- V = 0
      radial_gaussian -- V(r) = -depth * exp(-((r-center)/width)^2)
      radial_table    -- linear interpolation of (r_i, V_i), zero outside
      general_grid    -- arbitrary callable V(x) on R^N (programmatic use)
    """

    kind: str = "zero"
    depth: float = 0.0
    width: float = 1.0
    center: float = 0.0
    table: tuple = None            # (radii tuple, values tuple)
    func: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "radial_gaussian", "radial_table", "general_grid"):
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if self.kind == "radial_gaussian" and self.width <= 0.0:
            raise ConfigError("gaussian width must be positive")
        if self.kind == "radial_table" and not self.table:
            raise ConfigError("radial_table potential needs a table")
        if self.kind == "general_grid" and self.func is None:
            raise ConfigError("general_grid potential needs a callable")

    @property
    def is_radial(self):
        return self.kind in ("zero", "radial_gaussian", "radial_table")

    def radial(self, r):
        """Evaluate on radii; defined for radial kinds only."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "radial_gaussian":
            return -self.depth * np.exp(-(((r - self.center) / self.width) ** 2))
        if self.kind == "radial_table":
            rs, vs = (np.asarray(t, dtype=float) for t in self.table)
            return np.interp(r, rs, vs, left=vs[0], right=0.0)
        raise DomainError("general_grid potential has no radial profile")

    def __call__(self, x):
        """Evaluate at points x of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "general_grid":
            return np.asarray(self.func(x), dtype=float)
        return self.radial(np.linalg.norm(x, axis=-1))


def check_radiality(pot, N=4, n_samples=50, tol=1e-12, rng=None):
    """Sample |V(Qx) - V(x)| over random rotations Q; radial kinds pass."""
    rng = rng or np.random.default_rng(1)
    worst = 0.0
    for _ in range(n_samples):
        x = rng.normal(size=N)
        # random rotation via QR
        M = rng.normal(size=(N, N))
        Q, _ = np.linalg.qr(M)
        worst = max(worst, abs(float(pot(x[None])[0] - pot((Q @ x)[None])[0])))
    return worst <= tol, worst


@dataclass
class HypothesisReport:
    """Machine-checkable record of (V_1), (f_1)-(f_3) for one problem setup."""

    f1_ok: bool
    f2_ok: bool
    f3_ok: bool
    v1_ok: bool
    worst_violation: tuple
    S_value: float
    vminus_integral: float
    vn2_integral: float = 0.0
    vr_integral: float = 0.0
    v1_converged: bool = True
    margins: dict = field(default_factory=dict)

    @property
    def all_ok(self):
        return self.f1_ok and self.f2_ok and self.f3_ok and self.v1_ok

    def to_dict(self):
        return {
            "f1_ok": self.f1_ok, "f2_ok": self.f2_ok, "f3_ok": self.f3_ok,
            "v1_ok": self.v1_ok, "all_ok": self.all_ok,
            "worst_violation": list(self.worst_violation) if self.worst_violation else None,
            "S_value": self.S_value,
            "vminus_integral": self.vminus_integral,
            "vn2_integral": self.vn2_integral,
            "vr_integral": self.vr_integral,
            "v1_converged": self.v1_converged,
            "margins": self.margins,
        }


def _radial_integral(fun, N, r_hi, n_panels=240):
    """Composite-Gauss integral of fun(r) r^(N-1) |S^(N-1)| over [0, r_hi]."""
    edges = np.concatenate([[0.0], np.geomspace(r_hi * 2.0 ** (-40), r_hi, n_panels)])
    xg, wg = np.polynomial.legendre.leggauss(8)
    lo, hi = edges[:-1], edges[1:]
    rm = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xg
    wm = 0.5 * (hi - lo)[:, None] * wg
    vals = fun(rm) * rm ** (N - 1)
    return float(np.sum(vals * wm)) * sphere_area(N)


def check_v1(pot, N=4, r_exponent=None, base_radius=20.0):
    """Quadrature verdict on (V_1): integrability and the Sobolev bound.

    Computes int |V^-|^{N/2}, int |V|^{N/2}, int |V|^r by composite radial
    quadrature over windows [0, R], doubling R (and the panel count) until
    the tails stabilize; a non-decaying potential raises DivergenceError
    with the partial sums.
    """
    if not pot.is_radial and pot.kind != "general_grid":
        raise ConfigError("unsupported potential kind for (V_1)")
    r_exponent = r_exponent if r_exponent is not None else N / 2.0 + 1.0
    if r_exponent <= N / 2.0:
        raise ConfigError("(V_1) requires the auxiliary exponent r > N/2")
    S = sobolev_constant(N)
    if pot.kind == "zero":
        return {"vminus": 0.0, "vn2": 0.0, "vr": 0.0, "ok": True,
                "converged": True, "S": S}

    if pot.kind == "general_grid":
        prof = lambda r: np.abs(pot(np.concatenate(
            [r.reshape(-1, 1), np.zeros((r.size, N - 1))], axis=1))).reshape(r.shape)
    else:
        prof = lambda r: np.abs(pot.radial(r))
    neg = (lambda r: np.maximum(-pot.radial(r), 0.0)) if pot.is_radial else \
          (lambda r: np.maximum(-pot(np.concatenate(
              [r.reshape(-1, 1), np.zeros((r.size, N - 1))], axis=1)).reshape(r.shape), 0.0))

    def windowed(fun, power):
        partials = []
        prev = None
        for k in range(6):
            R = base_radius * 2.0 ** k
            val = _radial_integral(lambda r: fun(r) ** power, N, R, n_panels=240 + 120 * k)
            partials.append(val)
            if prev is not None:
                tail = abs(val - prev)
                if tail <= 1e-3 * max(abs(val), 1e-300) or tail < 1e-14:
                    return val, True, partials
            prev = val
        # tails still growing: divergent or far too slowly decaying
        raise DivergenceError(
            f"integral of |V|^{power:g} does not stabilize under window doubling",
            partial_sums=partials)

    vminus, conv1, _ = windowed(neg, N / 2.0)
    vn2, conv2, _ = windowed(prof, N / 2.0)
    vr, conv3, _ = windowed(prof, r_exponent)
    converged = conv1 and conv2 and conv3
    ok = converged and vminus < S ** (N / 2.0)
    return {"vminus": vminus, "vn2": vn2, "vr": vr, "ok": ok,
            "converged": converged, "S": S}


def v1_critical_kappa(N=4, width=1.0, center=0.0, bracket=(1e-3, 1e3), tol=1e-4):
    """Bisection for the depth where the (V_1) verdict flips.

    For the centered unit-width well the flip is at 2 S / pi in dimension 4
    (the closed-form gaussian integral); the bisection reproduces it from
    the quadrature verdict to bracket width < tol.
    """
    def ok(kappa):
        pot = Potential(kind="radial_gaussian", depth=kappa, width=width, center=center)
        return check_v1(pot, N=N)["ok"]

    lo, hi = bracket
    if not ok(lo):
        raise BracketError("lower bracket already violates (V_1)")
    if ok(hi):
        raise BracketError("upper bracket still satisfies (V_1)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hypothesis_report(nl, pot, N=4, r_exponent=None):
    """Run all four checkers and collate margins."""
    f1 = check_growth_f1(nl, N=N)
    f2 = check_ar_f2(nl)
    f3 = check_f3_odd(nl)
    try:
        v1 = check_v1(pot, N=N, r_exponent=r_exponent)
        v1_ok, converged = v1["ok"], v1["converged"]
        vminus, vn2, vr, S = v1["vminus"], v1["vn2"], v1["vr"], v1["S"]
    except DivergenceError:
        v1_ok, converged = False, False
        vminus = vn2 = vr = float("inf")
        S = sobolev_constant(N)
    worst = None
    for res in (f1, f2):
        if res.worst is not None and (worst is None or res.worst[2] < worst[2]):
            worst = res.worst
    return HypothesisReport(
        f1_ok=f1.ok, f2_ok=f2.ok, f3_ok=f3.ok, v1_ok=v1_ok,
        worst_violation=worst, S_value=S,
        vminus_integral=vminus, vn2_integral=vn2, vr_integral=vr,
        v1_converged=converged,
        margins={"f1": f1.margin, "f2": f2.margin, "f3": f3.margin,
                 "v1": (S ** (N / 2.0) - vminus) / S ** (N / 2.0) if np.isfinite(vminus) else -1.0},
    )


def rayleigh_sobolev_estimate(N, n_lambda=160):
    """Independent check of S: minimize the Rayleigh quotient over the
    Aubin-Talenti bubble family U_lam(r) = (1 + (r/lam)^2)^(-(N-2)/2) by
    direct quadrature and a sweep over the dilation parameter."""
    ts = two_star(N)
    area = sphere_area(N)
    best = np.inf
    for lam in np.geomspace(0.2, 5.0, n_lambda):
        U = lambda r: (1.0 + (r / lam) ** 2) ** (-(N - 2) / 2.0)
        dU = lambda r: -(N - 2) * (r / lam ** 2) * (1.0 + (r / lam) ** 2) ** (-(N - 2) / 2.0 - 1.0)
        num = integrate.quad(lambda r: dU(r) ** 2 * r ** (N - 1), 0, np.inf, limit=200)[0] * area
        den = (integrate.quad(lambda r: U(r) ** ts * r ** (N - 1), 0, np.inf, limit=200)[0] * area) ** (2.0 / ts)
        best = min(best, num / den)
    return best
