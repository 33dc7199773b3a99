"""Experiment orchestration: Monte Carlo error estimates, convergence
records, the small-dimension best-N oracle, and CSV/SVG reporting."""

import hashlib
import itertools
import os

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .drivers import RandomPoolDriver, SurplusGreedyDriver, ResidualGreedyDriver
from .fields import ParametricFieldSpec
from .interp import FLOAT_FMT
from .vfp import PhaseGrid, VfpModel


def worker_count():
    """Parallelism cap from KINETIC_UQ_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("KINETIC_UQ_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# configuration

_KEYMAP = {
    "grid.nx": "nx", "grid.nv": "nv", "grid.dt_factor": "dt_factor",
    "solver.epsilon": "eps", "solver.t_final": "t_final",
    "solver.krylov_rtol": "krylov_rtol",
    "field.family": "family", "field.dim": "dim",
    "field.time_dependent": "time_dependent", "field.amplitudes": "amplitudes",
    "driver.kind": "driver", "driver.budget": "budget", "driver.norm": "norm_kind",
    "mc.samples": "mc_samples", "mc.seed": "seed",
    "run.out_dir": "out_dir", "run.error_every": "error_every",
    "run.eps_list": "eps_list", "run.cache_dir": "cache_dir",
}


@dataclass
class ExperimentConfig:
    """Flat experiment description; see docs/config.md for the file schema."""

    nx: int = 16
    nv: int = 32
    dt_factor: float = 8.0
    eps: float = 1.0
    t_final: float = 0.1
    krylov_rtol: float = 1e-10
    family: str = "exp2"
    dim: int = 20
    time_dependent: bool = False
    amplitudes: tuple = ()
    driver: str = "residual"
    budget: int = 60
    norm_kind: str = "l2"
    mc_samples: int = 200
    seed: int = 0
    error_every: int = 5
    out_dir: str = "out"
    cache_dir: str = ""
    eps_list: tuple = ()

    def __post_init__(self):
        for name in ("nx", "nv", "dim", "budget", "mc_samples", "error_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_mapping(cls, flat):
        kwargs = {}
        for key, value in flat.items():
            if key not in _KEYMAP:
                raise KeyError(f"unknown config key {key!r}")
            name = _KEYMAP[key]
            if name in ("eps_list", "amplitudes"):
                value = tuple(float(v) for v in value)
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping(_flatten(data))

    def model_key(self):
        """Hash of everything a reference solve depends on (not the driver)."""
        parts = (self.nx, self.nv, self.dt_factor, self.eps, self.t_final,
                 self.krylov_rtol, self.family, self.dim, self.time_dependent,
                 self.amplitudes)
        return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]

    def config_hash(self):
        skip = {"out_dir", "cache_dir"}
        parts = [(f.name, getattr(self, f.name)) for f in fields(self) if f.name not in skip]
        return hashlib.sha256(repr(sorted(parts)).encode()).hexdigest()[:16]

    def build_grid(self):
        grid = PhaseGrid(nx=self.nx, nv=self.nv, eps=self.eps)
        grid.dt = grid.dx / self.dt_factor
        return grid

    def build_field(self):
        return ParametricFieldSpec(self.family, dim=self.dim,
                                   time_dependent=self.time_dependent,
                                   amplitudes=self.amplitudes or None)

    def build_model(self):
        return VfpModel(self.build_grid(), self.build_field(),
                        t_final=self.t_final, krylov_rtol=self.krylov_rtol)

    def build_driver(self, model):
        if self.driver == "surplus":
            return SurplusGreedyDriver(model, norm_kind=self.norm_kind)
        if self.driver == "residual":
            return ResidualGreedyDriver(model, norm_kind=self.norm_kind)
        if self.driver == "random":
            return RandomPoolDriver(model, seed=self.seed, norm_kind=self.norm_kind)
        raise ValueError(f"unknown driver {self.driver!r}")


def _flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, prefix=f"{name}."))
        else:
            out[name] = value
    return out


# ---------------------------------------------------------------------------
# Monte Carlo error

def draw_samples(dim, count, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(count, dim))


def reference_solution(model, z, cache_dir=None, model_key=""):
    """Solve the model at z, memoized on disk by (model key, z hash)."""
    if not cache_dir:
        return np.asarray(model.solve(z), dtype=float)
    zh = hashlib.sha256(np.ascontiguousarray(z, dtype=float).tobytes()).hexdigest()[:20]
    path = os.path.join(cache_dir, model_key or "default", zh + ".npy")
    if os.path.exists(path):
        return np.load(path)
    out = np.asarray(model.solve(z), dtype=float)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    np.save(path, out)
    return out


def mc_error(interpolant, model, sample_count, seed, cache_dir=None,
             model_key="", samples=None):
    """Root mean square of per-sample discrete L2 distances between the
    interpolant and fresh reference solves at uniform parameter draws.

    An empty (or None) interpolant counts as the zero surrogate.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if samples is None:
        samples = draw_samples(model.dim, sample_count, seed)

    def ref(z):
        return reference_solution(model, z, cache_dir, model_key)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            refs = list(pool.map(ref, samples))
    else:
        refs = [ref(z) for z in samples]

    total = 0.0
    for z, reference in zip(samples, refs):
        if interpolant is None or len(interpolant) == 0:
            approx = np.zeros_like(reference)
        else:
            approx = interpolant.eval(z)
        total += model.norm(reference - approx, "l2") ** 2
    return float(np.sqrt(total / len(samples)))


# ---------------------------------------------------------------------------
# convergence records and slope fitting

@dataclass
class ConvergenceRecord:
    n: int
    error: float
    slope: float = float("nan")


def slope_fit(ns, errors, window_fraction=1.0):
    """Least-squares slope of log(error) against log(n) over the trailing
    window of records (default: all of them).

    Greedy error curves at desk scale descend in staircases; a narrow
    trailing window can put a single cliff in charge of the fit and even
    invert the cross-family ordering, so the robust default regresses over
    the full record range.
    """
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size < 4:
        raise ValueError("need at least 4 records to fit a slope")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive")
    start = int(np.floor(ns.size * (1.0 - window_fraction)))
    start = min(start, ns.size - 4)
    return float(np.polyfit(np.log(ns[start:]), np.log(errors[start:]), 1)[0])


# ---------------------------------------------------------------------------
# best-N oracle (small dimension)

def _orthonormal_legendre(k, x):
    coeff = np.zeros(k + 1)
    coeff[k] = 1.0
    return np.sqrt(2.0 * k + 1.0) * np.polynomial.legendre.legval(x, coeff)


def legendre_coefficient_norms(model_fn, dim, max_degree, vector_norm=None):
    """Norms of all tensor Legendre coefficients up to max_degree per
    dimension, computed by full tensor Gauss-Legendre quadrature."""
    if dim > 3:
        raise ValueError("tensor quadrature oracle limited to dim <= 3")
    if max_degree > 10:
        raise ValueError("oracle limited to max_degree <= 10")
    if vector_norm is None:
        vector_norm = np.linalg.norm
    q = max_degree + 1
    nodes, weights = np.polynomial.legendre.leggauss(q)
    points = np.array(list(itertools.product(nodes, repeat=dim)))
    values = np.array([np.atleast_1d(np.asarray(model_fn(z), dtype=float)) for z in points])
    tensor = values.reshape((q,) * dim + (-1,))

    # Rows of W are the quadrature functionals <., phi_k> on one axis.
    table = np.vstack([_orthonormal_legendre(k, nodes) for k in range(q)])
    contraction = table * (weights / 2.0)
    for m in range(dim):
        tensor = np.tensordot(contraction, tensor, axes=(1, m))
    # Axes come out reversed (last contracted axis first); norms are
    # enumerated over all of them anyway.
    coeffs = tensor.reshape(q**dim, -1)
    norms = np.array([vector_norm(c) for c in coeffs])
    return np.sort(norms)[::-1]


def best_n_oracle(model_fn, dim, max_degree, n, vector_norm=None):
    """L2(U) error of the best n-term Legendre truncation (tail norm)."""
    norms = legendre_coefficient_norms(model_fn, dim, max_degree, vector_norm)
    return float(np.sqrt(np.sum(norms[n:] ** 2)))


def l2u_error(approx_fn, model_fn, dim, quad_points, vector_norm=None):
    """Exact L2(U, drho) distance between two maps by tensor quadrature."""
    if vector_norm is None:
        vector_norm = np.linalg.norm
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    total = 0.0
    for combo in itertools.product(range(nodes.size), repeat=dim):
        z = np.array([nodes[i] for i in combo])
        w = np.prod([weights[i] for i in combo]) / 2.0**dim
        total += w * vector_norm(np.asarray(model_fn(z), float) - np.asarray(approx_fn(z), float)) ** 2
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# projections and reporting

def projection_histogram(indices, dim):
    """Distinct multiplicity count per dimension over a selected index set."""
    counts = np.ones(dim, dtype=int)
    for j in range(1, dim + 1):
        counts[j - 1] = len({nu.get(j) for nu in indices})
    return counts


def _svg_loglog(path, series, reference_slope=-0.5, title="convergence"):
    """Tiny hand-rolled log-log SVG plot with a reference slope line."""
    width, height, margin = 640, 440, 60
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    lx0, lx1 = np.log10(xs.min()), np.log10(xs.max())
    ly0, ly1 = np.log10(ys.min()), np.log10(ys.max())
    if lx1 - lx0 < 1e-9:
        lx1 = lx0 + 1.0
    if ly1 - ly0 < 1e-9:
        ly1 = ly0 + 1.0

    def mapx(v):
        return margin + (np.log10(v) - lx0) / (lx1 - lx0) * (width - 2 * margin)

    def mapy(v):
        return height - margin - (np.log10(v) - ly0) / (ly1 - ly0) * (height - 2 * margin)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="black"/>',
    ]
    for tick in range(int(np.floor(lx0)), int(np.ceil(lx1)) + 1):
        if lx0 <= tick <= lx1:
            px = mapx(10.0**tick)
            parts.append(f'<line x1="{px:.1f}" y1="{height - margin}" x2="{px:.1f}" '
                         f'y2="{height - margin + 5}" stroke="black"/>')
            parts.append(f'<text x="{px:.1f}" y="{height - margin + 18}" '
                         f'text-anchor="middle" font-size="10">1e{tick}</text>')
    for tick in range(int(np.floor(ly0)), int(np.ceil(ly1)) + 1):
        if ly0 <= tick <= ly1:
            py = mapy(10.0**tick)
            parts.append(f'<line x1="{margin - 5}" y1="{py:.1f}" x2="{margin}" '
                         f'y2="{py:.1f}" stroke="black"/>')
            parts.append(f'<text x="{margin - 8}" y="{py + 3:.1f}" '
                         f'text-anchor="end" font-size="10">1e{tick}</text>')
    for i, (label, ns, errs) in enumerate(series):
        pts = " ".join(f"{mapx(n):.1f},{mapy(e):.1f}" for n, e in zip(ns, errs))
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin + 4}" y="{margin + 14 * (i + 1)}" '
                     f'font-size="10" fill="{color}">{label}</text>')
    n0, n1 = xs.min(), xs.max()
    e0 = ys.max()
    ref = [(n0, e0), (n1, e0 * (n1 / n0) ** reference_slope)]
    pts = " ".join(f"{mapx(n):.1f},{mapy(e):.1f}" for n, e in ref)
    parts.append(f'<polyline points="{pts}" fill="none" stroke="gray" '
                 f'stroke-dasharray="4,3"/>')
    parts.append(f'<text x="{mapx(n1):.1f}" y="{mapy(ref[1][1]) - 4:.1f}" font-size="10" '
                 f'fill="gray">slope {reference_slope}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _svg_bars(path, counts, title="projection counts"):
    width, height, margin = 640, 300, 40
    counts = np.asarray(counts)
    span = width - 2 * margin
    bar = span / counts.size
    top = counts.max()
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for j, c in enumerate(counts):
        h = (height - 2 * margin) * (c / top)
        x = margin + j * bar
        parts.append(f'<rect x="{x:.1f}" y="{height - margin - h:.1f}" '
                     f'width="{max(bar - 2, 1):.1f}" height="{h:.1f}" fill="#1f77b4"/>')
    parts.append(f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
                 f'y2="{height - margin}" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# experiment runner

def _write_csv(path, header_comment, columns, rows):
    with open(path, "w") as fh:
        fh.write(f"# {header_comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row]
            fh.write(",".join(cells) + "\n")


def run_experiment(config):
    """Drive the configured sampler to its node budget, logging convergence
    and selection records; returns the output directory."""
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    if config.eps_list:
        return _run_eps_sweep(config)
    try:
        return _run_single(config, out_dir)
    except Exception as exc:
        with open(os.path.join(out_dir, "FAILED"), "w") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n")
        raise


def _run_single(config, out_dir, tag=""):
    model = config.build_model()
    driver = config.build_driver(model)
    cache_dir = config.cache_dir or os.path.join(out_dir, "refcache")
    header = f"seed={config.seed} config={config.config_hash()}"
    samples = draw_samples(model.dim, config.mc_samples, config.seed)
    records = []

    def observe(drv):
        n = len(drv)
        if n == 1 or n % config.error_every == 0 or n == config.budget:
            err = mc_error(drv.interpolant, model, config.mc_samples, config.seed,
                           cache_dir=cache_dir, model_key=config.model_key(),
                           samples=samples)
            rec = ConvergenceRecord(n=n, error=err)
            records.append(rec)
            if len(records) >= 4:
                rec.slope = slope_fit([r.n for r in records], [r.error for r in records])

    driver.run(config.budget, callback=observe)

    _write_csv(os.path.join(out_dir, "convergence.csv"), header,
               ("n", "error", "slope"),
               [(r.n, r.error, r.slope) for r in records])
    with open(os.path.join(out_dir, "selection.csv"), "w") as fh:
        driver.write_csv(fh, header_comment=header)
    counts = projection_histogram(driver.interpolant.indices, model.dim)
    _write_csv(os.path.join(out_dir, "projections.csv"), header,
               ("dim", "distinct_points"),
               [(j + 1, int(c)) for j, c in enumerate(counts)])
    _svg_loglog(os.path.join(out_dir, "plot.svg"),
                [(config.driver + tag, [r.n for r in records], [r.error for r in records])],
                title=f"{config.family} d={config.dim} eps={config.eps}")
    _svg_bars(os.path.join(out_dir, "projections.svg"), counts)
    return out_dir


def _run_eps_sweep(config):
    out_dir = config.out_dir
    series = []
    rows = []
    for eps in config.eps_list:
        sub = replace(config, eps=eps, eps_list=(),
                      out_dir=os.path.join(out_dir, f"eps_{eps:g}"))
        _run_single(sub, sub.out_dir, tag=f" eps={eps:g}")
        ns, errs = read_convergence(os.path.join(sub.out_dir, "convergence.csv"))
        series.append((f"eps={eps:g}", ns, errs))
        rows.extend((eps, int(n), e) for n, e in zip(ns, errs))
    _write_csv(os.path.join(out_dir, "eps_sweep.csv"),
               f"seed={config.seed} config={config.config_hash()}",
               ("eps", "n", "error"), rows)
    _svg_loglog(os.path.join(out_dir, "plot.svg"), series, title="eps sweep")
    return out_dir


def read_convergence(path):
    ns, errors = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("n,"):
                continue
            parts = line.strip().split(",")
            ns.append(int(parts[0]))
            errors.append(float(parts[1]))
    return np.asarray(ns), np.asarray(errors)
