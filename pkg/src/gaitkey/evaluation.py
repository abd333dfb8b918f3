"""Correctness/secureness analysis, Monte Carlo oracles, FAR/FRR,
Hamming histograms, unlinkability and key-compromise attacks."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import locker
from .cohort import (
    CohortModel,
    build_cohort,
    perturb_bits,
    sample_probe_means,
    sample_templates,
    user_rngs,
)
from .gf_bch import BchCode, bch_construct, encode
from .ieco import (
    FastVerifier,
    _symbol_keys,
    ieco_generate,
    unlock_codeword,
)
from .locker import DEFAULT_GAMMA
from .template import (
    SymbolString,
    binarize_mean,
    form_symbols,
    make_projection,
    project,
    select_reliable,
    symbols_from_bits_batch,
)


# -- closed forms ----------------------------------------------------------------

def p_intra_codeword_error(zeta: float, phi: int) -> float:
    """Per-position probability that a genuine probe flips a codeword bit.

    Average of the c=1 case (phi*zeta/2) and the c=0 decoy-hit case
    (phi*zeta / (2 (2^phi - 1))). First order in zeta.
    """
    _check_prob(zeta, "zeta")
    _check_phi(phi)
    return 0.5 * zeta * (phi + phi / (2**phi - 1))


def p_intra_codeword_error_exact(zeta: float, phi: int) -> float:
    """Same quantity without the first-order step: a symbol of phi
    independently flipping bits differs with probability 1 - (1 - zeta)^phi."""
    _check_prob(zeta, "zeta")
    _check_phi(phi)
    p_sym = 1.0 - (1.0 - zeta) ** phi
    return 0.5 * p_sym * (1.0 + 1.0 / (2**phi - 1))


def p_inter_codeword_match(eta: float, phi: int) -> float:
    """Per-position probability that an impostor reproduces the enrolled bit."""
    _check_prob(eta, "eta")
    _check_phi(phi)
    a = eta**phi
    return a + 0.5 * (1.0 - a) * (2**phi - 2) / (2**phi - 1)


def verify_limit_behavior(eta: float, phis=range(1, 13)) -> list[tuple[int, float]]:
    if not eta < 1:
        raise ValueError("eta must be < 1 for the limit to hold")
    return [(phi, p_inter_codeword_match(eta, phi)) for phi in phis]


def _check_prob(p: float, name: str) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1]")


def _check_phi(phi: int) -> None:
    if phi < 1:
        raise ValueError("phi must be >= 1")


# -- Monte Carlo ------------------------------------------------------------------

@dataclass
class ErrorAnalysis:
    phi: int
    param: float
    analytic: float
    empirical: float
    trials: int

    @property
    def sigma(self) -> float:
        p = self.analytic
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)

    def within(self, floor: float = 0.005, k: float = 3.0) -> bool:
        return abs(self.analytic - self.empirical) < max(floor, k * self.sigma)


def mc_codeword_error(
    mode: str,
    param: float,
    phi: int,
    code: BchCode,
    trials: int,
    rng: np.random.Generator,
    gamma: int = DEFAULT_GAMMA,
) -> tuple[float, int]:
    """Full-scheme simulation of per-position codeword disagreement.

    ``mode="intra"`` flips each string bit with probability ``param`` (zeta);
    ``mode="inter"`` draws a second string agreeing per bit with probability
    ``param`` (eta). Every enrollment runs real IECO locking; the reference
    codeword is what the enrolled string itself unlocks. Returns
    ``(disagreement_rate, positions)``; ``trials`` is rounded up to whole
    enrollments.
    """
    if mode not in ("intra", "inter"):
        raise ValueError("mode must be 'intra' or 'inter'")
    n = code.n
    enrollments = -(-trials // n)
    disagree = 0
    flip = param if mode == "intra" else 1.0 - param
    for _ in range(enrollments):
        omega = rng.integers(0, 2, phi * n, dtype=np.uint8)
        s = form_symbols(omega, phi)
        _, helper = ieco_generate(s, code, gamma, rng)
        c = unlock_codeword(s, helper.points, gamma)
        s_prime = form_symbols(perturb_bits(omega, flip, rng), phi)
        c_prime = unlock_codeword(s_prime, helper.points, gamma)
        disagree += int(np.count_nonzero(c != c_prime))
    positions = enrollments * n
    return disagree / positions, positions


def analyze_intra(zeta: float, phi: int, code: BchCode, trials: int, rng, exact: bool = False) -> ErrorAnalysis:
    rate, positions = mc_codeword_error("intra", zeta, phi, code, trials, rng)
    analytic = p_intra_codeword_error_exact(zeta, phi) if exact else p_intra_codeword_error(zeta, phi)
    return ErrorAnalysis(phi, zeta, analytic, rate, positions)


def analyze_inter(eta: float, phi: int, code: BchCode, trials: int, rng) -> ErrorAnalysis:
    rate, positions = mc_codeword_error("inter", eta, phi, code, trials, rng)
    return ErrorAnalysis(phi, eta, p_inter_codeword_match(eta, phi), 1.0 - rate, positions)


# -- metrics --------------------------------------------------------------------

def far_frr(genuine_outcomes, impostor_outcomes) -> tuple[float, float]:
    """(FAR %, FRR %) from boolean success outcomes."""
    g = np.asarray(genuine_outcomes, dtype=bool)
    i = np.asarray(impostor_outcomes, dtype=bool)
    if g.size == 0 or i.size == 0:
        raise ValueError("need at least one genuine and one impostor outcome")
    frr = np.count_nonzero(~g) * 100.0 / g.size
    far = np.count_nonzero(i) * 100.0 / i.size
    return far, frr


def normalized_hamming(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1:] != b.shape[-1:]:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return (a != b).mean(axis=-1)


def hamming_histogram(a, b, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Histogram over [0, 1] of normalized distances between paired strings.

    ``a`` and ``b`` are (P, L) arrays (or single strings).
    """
    d = np.atleast_1d(normalized_hamming(a, b))
    return np.histogram(d, bins=bins, range=(0.0, 1.0))


@dataclass
class UnlinkabilityReport:
    bin_centers: np.ndarray
    local_scores: np.ndarray
    global_score: float
    mated_density: np.ndarray
    nonmated_density: np.ndarray

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def unlinkability(mated_scores, nonmated_scores, omega_prior: float = 1.0, bins: int | None = None) -> UnlinkabilityReport:
    """Likelihood-ratio unlinkability: local D(s) per score bin and the
    mated-weighted global D_sys, from fixed-width histograms."""
    mated = np.asarray(mated_scores, dtype=np.float64)
    nonmated = np.asarray(nonmated_scores, dtype=np.float64)
    if mated.size == 0 or nonmated.size == 0:
        raise ValueError("score sets must be nonempty")
    lo = min(mated.min(), nonmated.min())
    hi = max(mated.max(), nonmated.max())
    if hi <= lo:
        raise ValueError("score sets are single-valued; densities are undefined")
    if bins is None:
        bins = max(2, int(round(math.sqrt(min(mated.size, nonmated.size)))))
    edges = np.linspace(lo, hi, bins + 1)
    width = edges[1] - edges[0]
    f_m = np.histogram(mated, bins=edges, density=True)[0]
    f_nm = np.histogram(nonmated, bins=edges, density=True)[0]
    lr = np.divide(f_m, f_nm, out=np.ones_like(f_m), where=f_nm > 0)
    D = 2.0 * (omega_prior * lr / (1.0 + omega_prior * lr)) - 1.0
    D[omega_prior * lr <= 1.0] = 0.0
    D[(f_nm == 0) & (f_m > 0)] = 1.0
    d_sys = float(np.sum(D * f_m) * width)
    return UnlinkabilityReport(0.5 * (edges[1:] + edges[:-1]), D, d_sys, f_m, f_nm)


# -- attacks --------------------------------------------------------------------

@dataclass
class AttackReport:
    recovered: dict[int, int] = field(default_factory=dict)  # position -> symbol
    unlock_calls: int = 0
    guesses: int = 0
    successes: int = 0
    success_trial: int | None = None
    claimed: dict[int, int] = field(default_factory=dict)


def _brute_force_points(points, positions, phi: int, gamma: int, report: AttackReport) -> dict[int, int]:
    keys = _symbol_keys(phi)
    found = {}
    for i in positions:
        for v, key in enumerate(keys):
            report.unlock_calls += 1
            if locker._unlock_raw(key, points[i], gamma) is not None:
                found[i] = v
                break
    return found


def attack_eco_with_key(m, points, phi: int, code: BchCode, gamma: int = DEFAULT_GAMMA) -> AttackReport:
    """Compromised ECO key: re-encode, then brute-force each genuine point."""
    report = AttackReport()
    c = encode(code, m)
    report.recovered = _brute_force_points(points, np.flatnonzero(c).tolist(), phi, gamma, report)
    report.claimed = dict(report.recovered)
    return report


def attack_ieco_with_key(
    kappa,
    helper,
    budget: int,
    rng: np.random.Generator | None = None,
    code: BchCode | None = None,
    exhaustive: bool = False,
) -> AttackReport:
    """Compromised IECO key: the only route to m is guessing it against L_kappa.

    With ``exhaustive=True`` the guesses enumerate all 2^k messages in order
    (toy codes only). Whatever is found, the attacker then labels points with
    its best codeword guess and claims the sealed plaintexts as biometric
    symbols; ``claimed`` holds those claims.
    """
    code = code or helper.code()
    kappa = np.asarray(kappa, dtype=np.uint8)
    report = AttackReport()
    found_m = None
    last_guess = None
    gamma = helper.gamma
    key_locker = helper.key_locker
    for trial in range(budget):
        if exhaustive:
            if trial >= 1 << code.k:
                break
            guess = ((trial >> np.arange(code.k)) & 1).astype(np.uint8)
        else:
            guess = locker.random_bits(code.k, rng)
        last_guess = guess
        report.guesses += 1
        out = locker.d_unlock(guess, key_locker, gamma)
        if out is not None and np.array_equal(out, kappa):
            report.successes += 1
            report.success_trial = trial + 1
            found_m = guess
            break
    labels = encode(code, found_m if found_m is not None else last_guess)
    claims = _brute_force_points(helper.points, np.flatnonzero(labels).tolist(), helper.phi, gamma, report)
    report.claimed = claims
    if found_m is not None:
        report.recovered = dict(claims)
    return report


# -- cohort experiments --------------------------------------------------------

@dataclass
class TableRow:
    k: int
    t: int
    far: float
    frr: float
    genuine_attempts: int
    impostor_attempts: int
    genuine_failures: int
    impostor_successes: int


def _simulate_user(u, rng, users, model, codes, phi, genuine_per_user, impostor_per_user, M, gamma, bit_level, enrollments):
    count = phi * codes[0].n
    if bit_level:
        omega = rng.integers(0, 2, count, dtype=np.uint8)
        genuine = np.stack([perturb_bits(omega, model.zeta, rng) for _ in range(genuine_per_user)])
        impostor = np.stack([perturb_bits(omega, 1.0 - model.eta, rng) for _ in range(impostor_per_user)])
    else:
        seed = int(rng.integers(0, 2**63))
        R = make_projection(seed, model.N)
        enroll = sample_templates(users[u], model.intra_sigma, M, rng)
        bits, rel = binarize_mean(project(enroll, R))
        sel = select_reliable(bits, rel, count)
        omega = sel.bits
        Rsel = R.entries[:, sel.indices]
        genuine = sample_probe_means(users[u], model.intra_sigma, genuine_per_user, M, rng) @ Rsel >= 0
        others = np.array([v for v in range(len(users)) if v != u])
        picks = rng.choice(others, size=impostor_per_user)
        chunks = []
        for v in np.unique(picks):
            cnt = int(np.count_nonzero(picks == v))
            chunks.append(sample_probe_means(users[v], model.intra_sigma, cnt, M, rng) @ Rsel >= 0)
        impostor = np.concatenate(chunks)
    s = form_symbols(omega, phi)
    S_gen = symbols_from_bits_batch(genuine, phi)
    S_imp = symbols_from_bits_batch(impostor, phi)
    fails = np.zeros(len(codes), dtype=np.int64)
    hits = np.zeros(len(codes), dtype=np.int64)
    for j, code in enumerate(codes):
        for e in range(enrollments):
            kappa, helper = ieco_generate(s, code, gamma, rng)
            verifier = FastVerifier.build(helper, code)
            for key in verifier.reproduce_many(S_gen):
                fails[j] += key is None or not np.array_equal(key, kappa)
            for key in verifier.reproduce_many(S_imp[e::enrollments]):
                hits[j] += key is not None and np.array_equal(key, kappa)
    return fails, hits, S_gen.shape[0] * enrollments, S_imp.shape[0]


def simulate_far_frr(
    model: CohortModel,
    ks=(115, 123, 131, 139, 147),
    n: int = 255,
    phi: int = 2,
    genuine_per_user: int = 50,
    impostor_per_user: int = 200,
    M: int = 5,
    gamma: int = DEFAULT_GAMMA,
    bit_level: bool = False,
    enrollments_per_user: int = 1,
    workers: int = 1,
) -> list[TableRow]:
    """Enroll every user once per code and run genuine and cross-user attempts.

    The same strings and probes are reused across all codes so rows differ
    only in the code. Each user's string is bound ``enrollments_per_user``
    times per code; genuine probes are replayed against every enrollment and
    impostor probes are split across them. ``bit_level=True`` skips templates
    and draws strings directly from the model's zeta/eta.

    Users run on ``workers`` threads. Every user owns a generator split from
    the model seed, so the counts do not depend on the worker count.
    """
    if enrollments_per_user < 1 or workers < 1:
        raise ValueError("enrollments_per_user and workers must be >= 1")
    if model.num_users < 2 and not bit_level:
        raise ValueError("impostor attempts need at least 2 users")
    codes = [bch_construct(n, k) for k in ks]
    users = None if bit_level else build_cohort(model)

    def job(args):
        u, rng = args
        return _simulate_user(
            u, rng, users, model, codes, phi, genuine_per_user, impostor_per_user, M, gamma, bit_level, enrollments_per_user
        )

    tasks = list(enumerate(user_rngs(model, stream=2)))
    if workers == 1:
        results = [job(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, tasks))
    genuine_fail = sum(r[0] for r in results)
    impostor_ok = sum(r[1] for r in results)
    g_total = sum(r[2] for r in results)
    i_total = sum(r[3] for r in results)
    rows = []
    for j, code in enumerate(codes):
        rows.append(
            TableRow(
                k=code.k,
                t=code.t,
                far=impostor_ok[j] * 100.0 / i_total,
                frr=genuine_fail[j] * 100.0 / g_total,
                genuine_attempts=g_total,
                impostor_attempts=i_total,
                genuine_failures=int(genuine_fail[j]),
                impostor_successes=int(impostor_ok[j]),
            )
        )
    return rows


def codeword_distances(
    model: CohortModel,
    code: BchCode,
    phi: int = 2,
    probes: int = 20,
    M: int = 5,
    gamma: int = DEFAULT_GAMMA,
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized Hamming distance between the enrolled codeword and
    codewords reproduced by the same user (intra) and by others (inter)."""
    users = build_cohort(model)
    count = phi * code.n
    intra, inter = [], []
    for u, rng in enumerate(user_rngs(model, stream=3)):
        R = make_projection(int(rng.integers(0, 2**63)), model.N)
        bits, rel = binarize_mean(project(sample_templates(users[u], model.intra_sigma, M, rng), R))
        sel = select_reliable(bits, rel, count)
        Rsel = R.entries[:, sel.indices]
        s = form_symbols(sel.bits, phi)
        _, helper = ieco_generate(s, code, gamma, rng)
        verifier = FastVerifier.build(helper, code)
        c = verifier.codewords(s.symbols[None, :])[0]
        mine = sample_probe_means(users[u], model.intra_sigma, probes, M, rng) @ Rsel >= 0
        intra.extend(normalized_hamming(verifier.codewords(symbols_from_bits_batch(mine, phi)), c))
        others = [v for v in range(len(users)) if v != u]
        theirs = np.concatenate(
            [sample_probe_means(users[v], model.intra_sigma, 1, M, rng) for v in rng.choice(others, size=min(probes, len(others)), replace=False)]
        ) @ Rsel >= 0
        inter.extend(normalized_hamming(verifier.codewords(symbols_from_bits_batch(theirs, phi)), c))
    return np.asarray(intra), np.asarray(inter)


def strings_under_seeds(templates, seeds, phi: int, n: int) -> np.ndarray:
    """Reliable strings (len(seeds), phi*n) of one user's templates under each seed."""
    T = np.asarray(templates, dtype=np.float64)
    out = []
    for seed in seeds:
        bits, rel = binarize_mean(project(T, make_projection(int(seed), T.shape[1])))
        out.append(select_reliable(bits, rel, phi * n).bits)
    return np.stack(out)


def unlinkability_scores(
    model: CohortModel,
    seeds_per_user: int = 100,
    phi: int = 2,
    n: int = 255,
    M: int = 5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mated / non-mated similarity scores (1 - normalized Hamming distance).

    Mated: one user's enrollment templates under two different projection
    seeds. Non-mated: different users and different seeds, subsampled to
    the mated count. Also returns the per-user string stacks' user labels.
    """
    users = build_cohort(model)
    strings, labels = [], []
    for u, rng in enumerate(user_rngs(model, stream=4)):
        T = sample_templates(users[u], model.intra_sigma, M, rng)
        seeds = rng.integers(0, 2**63, size=seeds_per_user)
        strings.append(strings_under_seeds(T, seeds, phi, n))
        labels.append(np.full(seeds_per_user, u))
    X = np.concatenate(strings).astype(np.float64)
    lab = np.concatenate(labels)
    mated = []
    for block in strings:
        B = block.astype(np.float64)
        dist = (B[:, None, :] != B[None, :, :]).mean(axis=2)
        iu = np.triu_indices(B.shape[0], k=1)
        mated.append(1.0 - dist[iu])
    mated = np.concatenate(mated)
    rng = np.random.default_rng([model.seed, 5])
    a = rng.integers(0, X.shape[0], size=4 * mated.size)
    b = rng.integers(0, X.shape[0], size=4 * mated.size)
    keep = lab[a] != lab[b]
    a, b = a[keep][: mated.size], b[keep][: mated.size]
    nonmated = 1.0 - (X[a] != X[b]).mean(axis=1)
    return mated, nonmated, lab
