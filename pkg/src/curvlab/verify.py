"""Registry of theorem checks run against chains and fixture batteries."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import generators as gen
from .capacity import N_MAX_PAIRS, alpha_cap, alpha_cap_theta
from .chain import MarkovChain, chain_constants, lipschitz_constant
from .curvature import (exp_ratio_margin, gradient_commutation_margin,
                        kappa, lipschitz_contraction_margin, sectional_nonneg)
from .functional import (OptConfig, alpha_logsob, alpha_mod, counterexample_ratio,
                         mixing_time)
from .isoperimetry import (N_MAX_ENUM, SubsetTable, cheeger, concentration_profile,
                           gaussian_rho, mask_to_indices, obs_diameter)
from .spectral import alpha_spectral, spectrum

CHECK_TOL = 1e-8
KAPPA_TOL = 1e-9
COUNTEREXAMPLE_EPS = tuple(10.0 ** -k for k in range(1, 9))


@dataclass
class TheoremCheckResult:
    theorem: str
    instance: str
    hypothesis: str
    lhs: float | None
    rhs: float | None
    relation: str
    margin: float | None
    status: str
    runtime: float = 0.0
    detail: str = ""

    @property
    def passed(self) -> bool | None:
        return None if self.status == "skipped" else self.status == "pass"


def _check_tol(lhs, rhs, tol):
    return tol * max(1.0, abs(lhs), abs(rhs))


def compare(theorem, instance, hypothesis, lhs, rhs, relation=">=", detail="",
            tol=CHECK_TOL) -> TheoremCheckResult:
    """Build a result; ``margin >= 0`` means the inequality holds."""
    lhs, rhs = float(lhs), float(rhs)
    if relation == ">=":
        margin = lhs - rhs
    elif relation == "<=":
        margin = rhs - lhs
    else:
        raise ValueError(f"unknown relation {relation!r}")
    if math.isnan(margin):
        margin = -math.inf if not (math.isinf(lhs) and math.isinf(rhs)) else 0.0
    ok = margin >= -_check_tol(lhs if math.isfinite(lhs) else 0.0,
                               rhs if math.isfinite(rhs) else 0.0, tol)
    return TheoremCheckResult(theorem, instance, hypothesis, lhs, rhs, relation, margin,
                              "pass" if ok else "fail", detail=detail)


def skipped(theorem, instance, reason) -> TheoremCheckResult:
    return TheoremCheckResult(theorem, instance, reason, None, None, "", None, "skipped")


@dataclass
class VerifyConfig:
    opt: OptConfig = field(default_factory=OptConfig)
    check_tol: float = CHECK_TOL
    n_max_enum: int = N_MAX_ENUM
    n_max_pairs: int = N_MAX_PAIRS
    samples: int = 100
    times: tuple = (0.1, 1.0, 10.0)
    seed: int = 0


class Facts:
    """Lazily computed quantities shared by the checks on one instance."""

    def __init__(self, chain: MarkovChain, cfg: VerifyConfig):
        self.chain = chain
        self.cfg = cfg

    @cached_property
    def constants(self):
        return chain_constants(self.chain)

    @cached_property
    def kappas(self):
        return {e: kappa(self.chain, *e) for e in self.chain.edges}

    @cached_property
    def min_kappa(self) -> float:
        return min(self.kappas.values())

    @property
    def nonneg(self) -> bool:
        return self.min_kappa >= -KAPPA_TOL

    def curvature_hyp(self) -> str:
        k = self.min_kappa
        return f"min kappa = {k:.6g} {'>=' if self.nonneg else '<'} 0"

    @cached_property
    def sectional_failure(self):
        """First edge failing sectional nonnegativity, or ``None``."""
        for e in self.chain.edges:
            if not sectional_nonneg(self.chain, *e)[0]:
                return e
        return None

    @cached_property
    def combinatorial(self) -> bool:
        c = self.chain
        return bool(np.all(c.edge_len[c.adjacency] == 1.0))

    @cached_property
    def spectrum(self):
        return spectrum(self.chain)

    @cached_property
    def table(self):
        return SubsetTable(self.chain, self.cfg.n_max_enum)

    @cached_property
    def alpha(self):
        return alpha_logsob(self.chain, self.cfg.opt)

    @cached_property
    def alpha_mod(self):
        return alpha_mod(self.chain, self.cfg.opt)

    @cached_property
    def alpha_spectral(self):
        return alpha_spectral(self.chain, self.cfg.n_max_enum)

    def diam_obs(self, eps):
        cache = self.__dict__.setdefault("_diam_obs", {})
        if eps not in cache:
            cache[eps] = obs_diameter(self.chain, eps, "exact", self.table)
        return cache[eps]

    @cached_property
    def concentration(self):
        return concentration_profile(self.chain, self.table)

    def edge_label(self, e):
        lab = self.chain.labels
        return f"({lab[e[0]]},{lab[e[1]]})"


# ----------------------------------------------------------------------
# individual checks; each returns a list of results


def _need_enum(facts, limit=None):
    limit = facts.cfg.n_max_enum if limit is None else limit
    if facts.chain.n > limit:
        return f"n = {facts.chain.n} exceeds enumeration cap {limit}"
    return None


def check_T1(facts: Facts, inst: str):
    """Modified log-Sobolev constant dominates the curvature under sectional nonnegativity."""
    c = facts.chain
    if not c.is_lazy:
        return [skipped("T1", inst, "not a lazy probability kernel")]
    bad = facts.sectional_failure
    if bad is not None:
        return [skipped("T1", inst, f"sectional curvature negative on edge {facts.edge_label(bad)}")]
    res = facts.alpha_mod
    return [compare("T1", inst, "lazy, sectional curvature >= 0 on all edges",
                    res.value, facts.min_kappa, ">=",
                    f"alpha_mod witness ratio {res.witness_ratio:.6g}"
                    + (f", EL residual {res.el_residual:.2e}" if res.el_residual is not None else ""),
                    facts.cfg.check_tol)]


def check_T2(facts: Facts, inst: str):
    """Log-spectral constant against ``P0/(16 diam²)``."""
    if not facts.nonneg:
        return [skipped("T2", inst, facts.curvature_hyp())]
    if (why := _need_enum(facts)):
        return [skipped("T2", inst, why)]
    P0, _, diam = facts.constants
    value, X = facts.alpha_spectral
    return [compare("T2", inst, facts.curvature_hyp(), value, P0 / (16 * diam ** 2), ">=",
                    f"argmin X = {X}", facts.cfg.check_tol)]


def _worst(results):
    return min(results, key=lambda r: r.margin)


def check_T3(facts: Facts, inst: str):
    """Boundary measure against observable diameter, both epsilon choices, plus the large-eps corollary."""
    if not facts.nonneg:
        return [skipped("T3", inst, facts.curvature_hyp())]
    if (why := _need_enum(facts)):
        return [skipped("T3", inst, why)]
    t = facts.table
    P0 = facts.constants[0]
    n = facts.chain.n
    rows = np.nonzero((t.mass > 0) & (t.mass <= 0.5 + 1e-12))[0]
    hyp = facts.curvature_hyp()
    out = []
    for label in ("eps=1/8", "eps=m(W)/4"):
        thm, cor = [], []
        for b in rows:
            mW = float(t.mass[b])
            eps = 0.125 if label == "eps=1/8" else mW / 4
            dobs = facts.diam_obs(eps).value
            bd = float(t.boundary[b])
            W = mask_to_indices(int(b), n)
            rhs = P0 * min(mW, eps) * math.log(1 / eps) / (6 * dobs) if dobs > 0 else math.inf
            thm.append(compare("T3", f"{inst}[{label}]", hyp, bd, rhs, ">=", f"W = {W}",
                               facts.cfg.check_tol))
            rhs_c = P0 * math.log(1 / eps) / (24 * dobs) if dobs > 0 else math.inf
            cor.append(compare("T3c", f"{inst}[{label}]", hyp, bd / mW, rhs_c, ">=", f"W = {W}",
                               facts.cfg.check_tol))
        out += [_worst(thm), _worst(cor)]
    return out


def check_T4(facts: Facts, inst: str):
    if not facts.nonneg:
        return [skipped("T4", inst, facts.curvature_hyp())]
    if (why := _need_enum(facts)):
        return [skipped("T4", inst, why)]
    P0 = facts.constants[0]
    h = cheeger(facts.chain, "plain", facts.table)
    d = facts.diam_obs(0.125)
    return [compare("T4", inst, facts.curvature_hyp(), h.value, P0 / (12 * d.value), ">=",
                    f"h witness {h.witness}, diam_obs {d.value:g}", facts.cfg.check_tol)]


def check_T5(facts: Facts, inst: str):
    """Reverse Cheeger bound; no curvature hypothesis."""
    if not facts.combinatorial:
        return [skipped("T5", inst, "distance is not combinatorial")]
    if (why := _need_enum(facts)):
        return [skipped("T5", inst, why)]
    deg = facts.constants[1]
    h = cheeger(facts.chain, "plain", facts.table)
    d = facts.diam_obs(0.125)
    return [compare("T5", inst, "combinatorial distance", h.value, 57 * deg / d.value, "<=",
                    f"h witness {h.witness}, diam_obs {d.value:g}", facts.cfg.check_tol)]


def check_T6(facts: Facts, inst: str):
    """Boundary measure against the diameter of the closure, every proper ``W``."""
    if not facts.nonneg:
        return [skipped("T6", inst, facts.curvature_hyp())]
    if (why := _need_enum(facts)):
        return [skipped("T6", inst, why)]
    c = facts.chain
    t = facts.table
    P0 = facts.constants[0]
    full = (1 << c.n) - 1
    results = []
    for b in range(1, full):
        W = t.Z[b]
        cl = W | c.adjacency[W].any(axis=0)
        dcl = float(c.D[np.ix_(cl, cl)].max())
        mW = float(t.mass[b])
        rhs = P0 * mW * (1 - mW) / dcl
        results.append(compare("T6", inst, facts.curvature_hyp(), float(t.boundary[b]), rhs, ">=",
                               f"W = {mask_to_indices(b, c.n)}", facts.cfg.check_tol))
    return [_worst(results)]


def check_T7(facts: Facts, inst: str):
    """Gaussian concentration rate against the square-root-log Cheeger constant."""
    if not facts.nonneg:
        return [skipped("T7", inst, facts.curvature_hyp())]
    if not facts.combinatorial:
        return [skipped("T7", inst, "distance is not combinatorial")]
    if (why := _need_enum(facts)):
        return [skipped("T7", inst, why)]
    rho = gaussian_rho(facts.concentration)
    if math.isinf(rho):
        return [skipped("T7", inst, "far mass vanishes at r = 1 (rho = +inf); vacuous")]
    P0 = facts.constants[0]
    h = cheeger(facts.chain, "sqrtlog", facts.table)
    return [compare("T7", inst, f"{facts.curvature_hyp()}, rho = {rho:.6g} (far-set convention)",
                    h.value, P0 / 48 * math.sqrt(rho), ">=", f"witness {h.witness}",
                    facts.cfg.check_tol)]


def check_T8(facts: Facts, inst: str):
    """Concentration at radius ``r`` below ``eps`` forces ``diam_obs(eps) <= 2r``."""
    if not facts.combinatorial:
        return [skipped("T8", inst, "distance is not combinatorial")]
    if (why := _need_enum(facts)):
        return [skipped("T8", inst, why)]
    masses = np.unique(np.round(facts.table.mass[1:], 15))
    results = []
    for r, (conc, _) in facts.concentration.items():
        if r < 1:
            continue
        # diam_obs is a step function of eps; the worst eps above conc(r) is the next subset mass
        above = masses[masses > conc + 1e-12]
        candidates = {float(e) for e in above[:1]} | {e for e in (0.125, 0.25, 0.5) if e > conc}
        for eps in sorted(candidates):
            d = facts.diam_obs(eps).value
            results.append(compare("T8", inst, f"conc({r}) = {conc:.6g} < eps = {eps:.6g}",
                                   d, 2 * r, "<=", f"r = {r}, eps = {eps:.6g}", facts.cfg.check_tol))
    if not results:
        return [skipped("T8", inst, "no (r, eps) pair satisfies the concentration hypothesis")]
    return [_worst(results)]


def check_T9(facts: Facts, inst: str):
    """``4 alpha <= alpha_mod <= 2 lambda``; the left side needs grid-certified constants."""
    lam = facts.spectrum.lam
    am = facts.alpha_mod
    out = [compare("T9", f"{inst}[upper]", "none", am.value, 2 * lam, "<=", "", facts.cfg.check_tol)]
    if facts.chain.n > 3:
        out.append(skipped("T9", f"{inst}[lower]", "alpha not grid-certified for n > 3"))
    else:
        a = facts.alpha
        out.append(compare("T9", f"{inst}[lower]", "grid-certified (n <= 3)", 4 * a.value, am.value,
                           "<=", f"grid alpha {a.grid_value:.6g}", 1e-6))
    return out


def check_T10(facts: Facts, inst: str):
    if (why := _need_enum(facts, facts.cfg.n_max_pairs)):
        return [skipped("T10", inst, why)]
    ac = alpha_cap(facts.chain, facts.cfg.n_max_pairs)[0]
    at = alpha_cap_theta(facts.chain, facts.cfg.n_max_pairs)[0]
    facts.__dict__["_alpha_cap_theta"] = at
    return [compare("T10", f"{inst}[lower]", "none", at, 0.5 * ac, ">=", "", facts.cfg.check_tol),
            compare("T10", f"{inst}[upper]", "none", at, 3 * ac, "<=", "", facts.cfg.check_tol)]


def check_T11(facts: Facts, inst: str):
    if (why := _need_enum(facts, facts.cfg.n_max_pairs)):
        return [skipped("T11", inst, why)]
    at = facts.__dict__.get("_alpha_cap_theta")
    if at is None:
        at = alpha_cap_theta(facts.chain, facts.cfg.n_max_pairs)[0]
    s = facts.alpha_spectral[0]
    return [compare("T11", f"{inst}[lower]", "none", s, at / 4, ">=", "", facts.cfg.check_tol),
            compare("T11", f"{inst}[upper]", "none", s, 2 * at, "<=", "", facts.cfg.check_tol)]


def check_T12(facts: Facts, inst: str):
    """Mixing time sandwiched by the log-Sobolev constant."""
    if facts.chain.n > 3:
        return [skipped("T12", inst, "alpha not grid-certified for n > 3")]
    a = facts.alpha.value
    tau, _ = mixing_time(facts.chain)
    pi_star = float(facts.chain.m.min())
    upper = (4 + math.log(math.log(1 / pi_star))) / (4 * a)
    return [compare("T12", f"{inst}[lower]", "grid-certified (n <= 3)", tau, 1 / (2 * a), ">=",
                    f"tau = {tau:.9g}", 1e-6),
            compare("T12", f"{inst}[upper]", "grid-certified (n <= 3)", tau, upper, "<=",
                    f"tau = {tau:.9g}", 1e-6)]


def _random_functions(chain, rng, count, positive=False):
    for k in range(count):
        f = rng.standard_normal(chain.n) * (0.2, 1.0, 5.0)[k % 3]
        yield np.exp(f) if positive else f


def check_T13(facts: Facts, inst: str):
    """Lipschitz decay at rate ``min kappa`` (all chains) and the gradient
    commutation / exponential ratio estimates (lazy, sectional nonnegative)."""
    c = facts.chain
    rng = np.random.default_rng(facts.cfg.seed)
    K = facts.min_kappa
    worst = None
    for f in _random_functions(c, rng, facts.cfg.samples):
        if lipschitz_constant(c, f) == 0:
            continue
        for t in facts.cfg.times:
            m = lipschitz_contraction_margin(c, f, t, K)
            if worst is None or m < worst[0]:
                worst = (m, t)
    out = [TheoremCheckResult("T13", f"{inst}[lip_decay]", f"K = min kappa = {K:.6g}", None, None,
                              ">=", worst[0], "pass" if worst[0] >= -1e-9 else "fail",
                              detail=f"t = {worst[1]}")]
    if not c.is_lazy:
        out.append(skipped("T13", f"{inst}[gradient]", "not a lazy probability kernel"))
        return out
    bad = facts.sectional_failure
    if bad is not None:
        out.append(skipped("T13", f"{inst}[gradient]",
                           f"sectional curvature negative on edge {facts.edge_label(bad)}"))
        return out
    for variant in ("pointwise", "sqrt", "log_inf"):
        worst = (math.inf, None)
        for f in _random_functions(c, rng, facts.cfg.samples, positive=True):
            for t in facts.cfg.times:
                m = gradient_commutation_margin(c, f, t, variant)
                if m < worst[0]:
                    worst = (m, t)
        out.append(TheoremCheckResult("T13", f"{inst}[{variant}]", "lazy, sectional >= 0", None, None,
                                      ">=", worst[0], "pass" if worst[0] >= -1e-9 else "fail",
                                      detail=f"t = {worst[1]}"))
    worst = (math.inf, None)
    for x, y in c.edges:
        for f in (c.D[x], -c.D[y]):
            for lam in (0.1, 1.0, 5.0):
                m = exp_ratio_margin(c, x, y, f, lam)
                if m < worst[0]:
                    worst = (m, (x, y, lam))
    out.append(TheoremCheckResult("T13", f"{inst}[exp_ratio]", "lazy, sectional >= 0", None, None,
                                  ">=", worst[0], "pass" if worst[0] >= -1e-9 else "fail",
                                  detail=f"edge/lambda {worst[1]}"))
    return out


def check_T14(facts: Facts, inst: str):
    """Lazy birth-death chains: sectional nonnegativity iff monotone jump rates."""
    c = facts.chain
    if not gen.is_birth_death(c):
        return [skipped("T14", inst, "not a birth-death chain")]
    if not c.is_lazy:
        return [skipped("T14", inst, "not a lazy probability kernel")]
    sec = facts.sectional_failure is None
    mono = gen.is_monotone_birth_death(c, tol=1e-12)
    ok = sec == mono
    return [TheoremCheckResult("T14", inst, "lazy birth-death", float(sec), float(mono), "==",
                               0.0 if ok else -1.0, "pass" if ok else "fail",
                               detail=f"sectional >= 0: {sec}, monotone rates: {mono}")]


REGISTRY = {
    "T1": check_T1, "T2": check_T2, "T3": check_T3, "T4": check_T4, "T5": check_T5,
    "T6": check_T6, "T7": check_T7, "T8": check_T8, "T9": check_T9, "T10": check_T10,
    "T11": check_T11, "T12": check_T12, "T13": check_T13, "T14": check_T14,
}
ALL_THEOREMS = tuple(REGISTRY) + ("CX",)


def verify(chain: MarkovChain, theorem_ids=None, cfg: VerifyConfig | None = None,
           instance: str = "chain") -> list[TheoremCheckResult]:
    cfg = cfg or VerifyConfig()
    ids = list(theorem_ids or REGISTRY)
    facts = Facts(chain, cfg)
    out = []
    for tid in ids:
        if tid == "CX":
            out += counterexample_program(cfg)
            continue
        if tid not in REGISTRY:
            raise ValueError(f"unknown theorem id {tid!r}")
        start = time.perf_counter()
        res = REGISTRY[tid](facts, instance)
        elapsed = time.perf_counter() - start
        for r in res:
            r.runtime = elapsed / len(res)
        out += res
    return out


def counterexample_program(cfg: VerifyConfig | None = None) -> list[TheoremCheckResult]:
    """Uniform curvature ``>= 1`` on the three-point family while the test-function ratio falls."""
    cfg = cfg or VerifyConfig()
    start = time.perf_counter()
    kmin = min(min(kappa(gen.counterexample(e), *edge) for edge in [(0, 1), (1, 2)])
               for e in COUNTEREXAMPLE_EPS)
    ratios = [counterexample_ratio(e) for e in COUNTEREXAMPLE_EPS]
    steps = np.diff(ratios)
    out = [
        compare("CX", "sweep[kappa]", "eps = 1e-1..1e-8", kmin, 1.0 - 1e-9, ">=", "", 0.0),
        TheoremCheckResult("CX", "sweep[decreasing]", "eps = 1e-1..1e-8", None, None, "<",
                           float(-steps.max()), "pass" if np.all(steps < 0) else "fail",
                           detail="ratios " + ", ".join(f"{r:.6g}" for r in ratios)),
        TheoremCheckResult("CX", "sweep[ratio<1]", "eps = 1e-8", ratios[-1], 1.0, "<",
                           1.0 - ratios[-1], "pass" if ratios[-1] < 1.0 else "fail"),
    ]
    elapsed = time.perf_counter() - start
    for r in out:
        r.runtime = elapsed / len(out)
    return out


# ----------------------------------------------------------------------
# fixture battery


@dataclass
class Instance:
    id: str
    chain: MarkovChain
    provenance: dict


def _inst(family, params, seed=0, name=None):
    chain = gen.make_chain(family, params, seed)
    label = name or family + "(" + ",".join(f"{k}={v}" for k, v in params.items()) + ")"
    return Instance(label, chain, {"family": family, "params": params, "seed": seed})


def default_battery(seed: int = 0) -> list[Instance]:
    out = []
    out += [_inst("path", {"n": n}) for n in range(2, 9)]
    out += [_inst("cycle", {"n": n}) for n in range(3, 13)]
    out += [_inst("hypercube", {"d": d}) for d in range(1, 5)]
    out += [_inst("complete", {"n": n}) for n in range(2, 9)]
    out += [_inst("birth_death", {"n": n, "monotone": True, "lazy": True}, seed + n) for n in range(3, 11)]
    for base in ({"family": "cycle", "params": {"n": 6}}, {"family": "hypercube", "params": {"d": 3}},
                 {"family": "path", "params": {"n": 5}}, {"family": "complete", "params": {"n": 4}}):
        for mode in ("normalize", "uniform"):
            out.append(_inst("lazify", {"base": base, "mode": mode}, seed,
                             f"lazify[{mode}]({base['family']},{next(iter(base['params'].values()))})"))
    out += [_inst("counterexample", {"eps": e}) for e in COUNTEREXAMPLE_EPS]
    return out


def _run_instance(args):
    inst, ids, cfg = args
    return verify(inst.chain, ids, cfg, inst.id)


def run_battery(instances, theorem_ids=None, cfg: VerifyConfig | None = None,
                threads: int | None = None) -> list[TheoremCheckResult]:
    """Verify every instance; results keep battery order regardless of worker count."""
    cfg = cfg or VerifyConfig()
    ids = [t for t in (theorem_ids or REGISTRY) if t != "CX"]
    threads = threads or int(os.environ.get("CURVLAB_THREADS", "1") or 1)
    jobs = [(inst, ids, cfg) for inst in instances]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_instance, jobs))
    else:
        chunks = [_run_instance(j) for j in jobs]
    out = [r for chunk in chunks for r in chunk]
    if theorem_ids is None or "CX" in theorem_ids:
        out += counterexample_program(cfg)
    return out
