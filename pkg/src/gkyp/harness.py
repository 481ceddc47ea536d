"""Randomized cross-validation of the three routes over generated instances.

Each instance is checked for
  * agreement between the frequency sweep and the band LMI,
  * a violating constrained trajectory whenever the FDI fails,
  * the certificate dissipation bound on random constrained trajectories
    whenever the LMI is feasible.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GenerationFailed, HorizonExhausted
from .freq import fdi_check
from .lmi import gkyp_feasible
from .model import FrequencyBand, StateSpace, controllability_rank, hermitian
from .sdp import Status
from .tdomain import check_dissipation_bound, falsify_tdi

log = logging.getLogger(__name__)

DECISION_MARGIN = 1e-4
MARGINAL = 1e-6
OUTCOMES = ("agree_holds", "agree_fails", "marginal_skipped", "anomalies")


@dataclass(frozen=True)
class InstanceSpec:
    seed: int
    n: int
    m: int
    data_field: str
    band: FrequencyBand
    stability: str

    def __post_init__(self):
        if not 1 <= self.n <= 6 or not 1 <= self.m <= 3:
            raise ValueError("need 1 <= n <= 6 and 1 <= m <= 3")
        if self.data_field not in ("real", "complex"):
            raise ValueError(f"unknown data field {self.data_field!r}")
        if self.stability not in ("hurwitz", "mixed"):
            raise ValueError(f"unknown stability mode {self.stability!r}")


def draw_band(rng, data_field):
    """Symmetric band ``[-w, w]`` for real data, a general interval otherwise."""
    if data_field == "real":
        w = rng.uniform(0.2, 3.0)
        return FrequencyBand(-w, w)
    w1 = rng.uniform(-3.0, 2.0)
    return FrequencyBand(w1, w1 + rng.uniform(0.2, 3.0))


def draw_spec(seed, n_max=6, m_max=3, data_field="any", stability="any"):
    rng = np.random.default_rng([seed, 0x5EED])
    fld = data_field if data_field != "any" else ("real", "complex")[rng.integers(2)]
    stab = stability if stability != "any" else ("hurwitz", "mixed")[rng.integers(2)]
    return InstanceSpec(
        seed=int(seed),
        n=int(rng.integers(1, n_max + 1)),
        m=int(rng.integers(1, m_max + 1)),
        data_field=fld,
        band=draw_band(rng, fld),
        stability=stab,
    )


def _gauss(rng, shape, cplx):
    if cplx:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return rng.standard_normal(shape).astype(complex)


def generate_instance(spec):
    """Random controllable ``(A, B)``, supply rate ``Pi`` and the spec's band."""
    rng = np.random.default_rng(spec.seed)
    cplx = spec.data_field == "complex"
    n, m = spec.n, spec.m
    for _ in range(100):
        A = _gauss(rng, (n, n), cplx)
        B = _gauss(rng, (n, m), cplx)
        sys = StateSpace(A, B)
        if controllability_rank(sys) == n:
            break
    else:
        raise GenerationFailed(f"no controllable pair after 100 draws (seed {spec.seed})")
    if spec.stability == "hurwitz":
        amax = np.linalg.eigvals(A).real.max()
        A = A - (amax + 0.5) * np.eye(n)
        sys = StateSpace(A, B)
    X = _gauss(rng, (n + m, n + m), cplx)
    H = 0.5 * (X + X.conj().T)
    H = H / np.linalg.norm(H, 2)
    H[n:, n:] -= rng.uniform(0.0, 1.0) * np.eye(m)
    return sys, hermitian(H, "Pi"), spec.band


@dataclass(frozen=True)
class SuiteConfig:
    count: int = 100
    seed: int = 0
    n_max: int = 4
    m_max: int = 3
    data_field: str = "any"
    stability: str = "any"
    sufficiency_trials: int = 20
    timeout: float = 10.0
    workers: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass
class Scorecard:
    counts: dict = field(default_factory=lambda: dict.fromkeys(OUTCOMES, 0))
    anomalies: list = field(default_factory=list)
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.counts.values())

    def anomaly_count(self, cls):
        return sum(a.get("anomaly_class") == cls for a in self.anomalies)

    def to_json(self, include_records=True):
        out = {
            "schema_version": 1,
            "counts": dict(self.counts),
            "anomalies": list(self.anomalies),
            "config": dict(self.config),
        }
        if include_records:
            out["records"] = list(self.records)
        return out


def _instance_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _falsify(sys, Pi, band, fdi, rec):
    """Run the necessity route; returns an anomaly reason or ``""``."""
    try:
        res = falsify_tdi(sys, Pi, band, fdi)
    except HorizonExhausted as exc:
        rec["falsified"] = False
        return f"horizon exhausted: {exc}"
    rec.update(falsified=True, falsify_j_pi=res.j_pi, falsify_iqc_max=res.iqc_max_eig,
               falsify_epsilon=res.epsilon, falsify_T=res.details["T"],
               falsify_omega=res.details["omega"], falsify_decay=res.terminal_decay)
    return ""


def run_instance(index, cfg, spec=None, instance=None):
    """Run every route on one instance and classify it.

    Anomalies carry an ``anomaly_class``: ``disagreement`` (FDI and LMI
    verdicts differ with both margins above the decision margin),
    ``numerical_failure``, ``necessity``, ``sufficiency``, ``timeout`` or
    ``crash``.
    """
    start = time.perf_counter()
    seed = _instance_seed(cfg.seed, index)
    spec = spec or draw_spec(seed, cfg.n_max, cfg.m_max, cfg.data_field, cfg.stability)
    sys, Pi, band = instance or generate_instance(spec)
    rec = {
        "index": index, "seed": spec.seed, "n": sys.n, "m": sys.m,
        "field": spec.data_field, "stability": spec.stability,
        "band": [band.w1, band.w2], "falsified": None,
    }
    fdi = fdi_check(sys, Pi, band)
    out, cert = gkyp_feasible(sys, Pi, band)
    rec.update(
        fdi_holds=fdi.holds, fdi_worst_eig=fdi.worst_eig, fdi_worst_omega=fdi.worst_omega,
        lmi_status=out.status.value, t_star=out.t_star, sdp_iterations=out.iterations,
    )

    def finish(outcome, cls="", reason=""):
        elapsed = time.perf_counter() - start
        rec["elapsed"] = elapsed
        if outcome != "anomalies" and elapsed > cfg.timeout:
            outcome, cls, reason = "anomalies", "timeout", f"{elapsed:.1f}s > {cfg.timeout}s"
        rec["outcome"], rec["anomaly_class"], rec["reason"] = outcome, cls, reason
        return rec

    fdi_fails_clearly = fdi.worst_eig > DECISION_MARGIN
    if out.status is Status.NUMERICAL_FAILURE:
        # the necessity route does not depend on the solver
        if fdi_fails_clearly:
            why = _falsify(sys, Pi, band, fdi, rec)
            if why:
                return finish("anomalies", "necessity", why)
        return finish("anomalies", "numerical_failure", out.message)
    lmi_holds = out.status.feasible
    if fdi.holds != lmi_holds:
        if abs(fdi.worst_eig) > DECISION_MARGIN and abs(out.t_star) > DECISION_MARGIN:
            return finish("anomalies", "disagreement",
                          f"fdi worst {fdi.worst_eig:.3e}, t_star {out.t_star:.3e}")
        return finish("marginal_skipped", reason="near-boundary disagreement")
    if abs(fdi.worst_eig) <= MARGINAL or out.status is Status.MARGINALLY_FEASIBLE:
        return finish("marginal_skipped", reason="marginal")

    if lmi_holds:
        rng = np.random.default_rng([seed, 1])
        made = []
        for _ in range(cfg.sufficiency_trials):
            r = check_dissipation_bound(sys, Pi, band, cert, rng)
            if r is not None:
                made.append(r)
        rec["sufficiency_trials"] = len(made)
        rec["sufficiency_violations"] = sum(not c["ok"] for c in made)
        rec["sufficiency_max_excess_ratio"] = max(
            (c["excess"] / c["tol"] for c in made), default=float("nan"))
        rec["cert_lmi_margin"] = cert.lmi_margin
        rec["cert_q_margin"] = cert.q_margin
        if rec["sufficiency_violations"]:
            return finish("anomalies", "sufficiency", "certificate bound violated")
        if len(made) < cfg.sufficiency_trials:
            return finish("anomalies", "sufficiency",
                          f"only {len(made)} constrained trajectories generated")
        return finish("agree_holds")

    if fdi_fails_clearly:
        why = _falsify(sys, Pi, band, fdi, rec)
        if why:
            return finish("anomalies", "necessity", why)
    return finish("agree_fails")


def _worker(args):
    index, cfg = args
    try:
        return run_instance(index, cfg)
    except Exception as exc:  # recorded, never fatal to the suite
        log.exception("instance %d crashed", index)
        return {"index": index, "outcome": "anomalies", "anomaly_class": "crash",
                "reason": repr(exc)}


def default_workers():
    env = os.environ.get("GKYP_THREADS")
    return max(1, int(env)) if env else 1


def run_equivalence_suite(count=None, template=None, **kwargs):
    """Run ``count`` generated instances; returns a :class:`Scorecard`.

    ``template`` is a :class:`SuiteConfig`; keyword arguments override its
    fields. Results do not depend on the number of workers.
    """
    cfg = template or SuiteConfig()
    if count is not None:
        kwargs["count"] = count
    if kwargs:
        cfg = SuiteConfig(**{**asdict(cfg), **kwargs})
    jobs = [(i, cfg) for i in range(cfg.count)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_worker, jobs))
    else:
        records = [_worker(j) for j in jobs]
    records.sort(key=lambda r: r["index"])
    card = Scorecard(config=asdict(cfg))
    for r in records:
        card.counts[r["outcome"]] += 1
        card.records.append(r)
        if r["outcome"] == "anomalies":
            card.anomalies.append({k: r.get(k) for k in (
                "index", "seed", "anomaly_class", "reason", "fdi_worst_eig", "t_star",
                "lmi_status")})
    return card
