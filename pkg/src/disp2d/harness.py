"""Configuration-driven pipeline: regularity, kernels, scans, fits, certificates, oracle.

Config files are INI text (see README for every key and default).  Each
stage writes one file into the output directory; every file starts with
the fully resolved configuration as '#' comment lines, floats are
printed with 17 significant digits and nothing depends on the clock, so
identical configurations give byte-identical outputs.  A final
``manifest.txt`` lists the sha256 of every output.

Exit codes: 0 success, 1 invalid configuration, 2 regularity inconclusive
or non-regular without --override-nonregular, 3 accuracy not reached in
a required stage (quadrature, certificate or fit).
"""

import argparse
import configparser
import hashlib
import math
import os
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .decay import (
    MODELS,
    FitRefusedError,
    ScanPoint,
    default_alpha,
    fit_decay,
    fit_report,
    weighted_sup,
)
from .grid import build_grid
from .operator import locate_nonregular_window, regularity_check
from .potential import ConfigurationError, PotentialSpec, load_table, standard_well
from .resolvent import FreeMachinery, GridMachinery, RadialMachinery, fmt
from .stone import (
    STONE_COLUMNS,
    CertificateUnavailableError,
    CutoffSpec,
    QuadConfig,
    ibp_certificate,
    oscillatory_integral,
    propagator_kernels,
    spline_density,
)
from .tdse import BoxDiscretization, evolve_and_compare, write_comparison_csv

EXIT_OK, EXIT_CONFIG, EXIT_REGULARITY, EXIT_ACCURACY = 0, 1, 2, 3
STAGES = ("regularity", "kernel", "scan", "fit", "certify", "oracle")
THREADS_ENV = "DISP2D_THREADS"

# section -> key -> (type, default); None default means "derived"
SCHEMA = {
    "potential": {
        "form": ("str", "gaussian_well"),
        "amplitude": ("float", 0.5),
        "width": ("float", 1.0),
        "center_x": ("float", 0.0),
        "center_y": ("float", 0.0),
        "beta": ("float", math.inf),
        "table": ("str", ""),
    },
    "grid": {
        "machinery": ("str", "grid"),
        "scheme": ("str", "polar_gauss"),
        "radial_order": ("int", 32),
        "angular_order": ("int", 96),
        "radius": ("float", None),
        "threshold": ("float", 1e-6),
    },
    "cutoff": {
        "lambda1": ("float", 0.1),
        "L_list": ("floats", (1.0, 2.0, 5.0, 10.0)),
    },
    "quadrature": {
        "panels_init": ("int", 64),
        "s_min": ("float", 1e-14),
        "lambda_max": ("float", 1.0),
        "filon_order": ("int", 2),
        "rtol": ("float", 1e-3),
        "max_refine": ("int", 3),
    },
    "scan": {
        "t_min": ("float", 100.0),
        "t_max": ("float", 1e6),
        "n_points": ("int", 25),
        "pairs": ("pairs", ((0.0, 0.0, 0.0, 0.0),)),
        "kernel_times": ("floats", (100.0, 1000.0, 10000.0)),
        "models": ("strs", MODELS),
        "alpha": ("float", None),
        "certificate_times": ("floats", (100.0, 1000.0, 10000.0)),
        "certificate_nodes": ("int", 240),
    },
    "oracle": {
        "half_width": ("float", 20.0),
        "n_per_side": ("int", 320),
        "boundary": ("str", "absorbing_layer"),
        "absorber_strength": ("float", 20.0),
        "sigma": ("float", 2.0),
        "t_list": ("floats", (2.0, 4.0, 6.0, 8.0, 10.0)),
        "n_radial": ("int", 128),
        "lambda1": ("float", 0.5),
        "L": ("float", 10.0),
        "panels_init": ("int", 8),
    },
    "outputs": {
        "directory": ("str", "out"),
    },
    "run": {
        "stages": ("strs", STAGES),
    },
}


class ExitError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _parse(kind, raw):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "floats":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if kind == "strs":
        return tuple(raw.replace(",", " ").split())
    if kind == "pairs":
        out = []
        for chunk in raw.split(";"):
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != 4:
                raise ConfigurationError(f"pair {chunk!r} needs four numbers x1 x2 y1 y2")
            out.append(tuple(vals))
        return tuple(out)
    raise AssertionError(kind)


def _render(value):
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(" ".join(_render(v) for v in p) for p in value)
        return " ".join(_render(v) for v in value)
    return str(value)


def load_config(path):
    """Parse and validate a config file; returns {section: {key: value}} with defaults filled."""
    path = Path(path)
    if not path.is_file():
        raise ExitError(EXIT_CONFIG, f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ExitError(EXIT_CONFIG, f"{path}: {exc}") from exc
    return validate_config({s: dict(parser[s]) for s in parser.sections()}, str(path))


def validate_config(raw, origin="<config>"):
    cfg = {}
    for section in raw:
        if section not in SCHEMA:
            raise ExitError(EXIT_CONFIG, f"{origin}: unknown section [{section}]")
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        for key in given:
            if key not in keys:
                raise ExitError(EXIT_CONFIG, f"{origin}: unknown key {key!r} in [{section}]")
        cfg[section] = {}
        for key, (kind, default) in keys.items():
            if key in given and given[key].strip() != "":
                try:
                    cfg[section][key] = _parse(kind, given[key])
                except (ValueError, ConfigurationError) as exc:
                    raise ExitError(EXIT_CONFIG, f"{origin}: [{section}] {key}: {exc}") from exc
            else:
                cfg[section][key] = default
    _derive(cfg, origin)
    return cfg


def _derive(cfg, origin):
    pot = cfg["potential"]
    forms = ("free", "gaussian_well", "compact_bump", "tabulated")
    if pot["form"] not in forms:
        raise ExitError(EXIT_CONFIG, f"{origin}: potential form must be one of {forms}")
    if cfg["grid"]["machinery"] not in ("grid", "radial"):
        raise ExitError(EXIT_CONFIG, f"{origin}: grid machinery must be 'grid' or 'radial'")
    for st in cfg["run"]["stages"]:
        if st not in STAGES:
            raise ExitError(EXIT_CONFIG, f"{origin}: unknown stage {st!r}")
    for m in cfg["scan"]["models"]:
        if m not in MODELS:
            raise ExitError(EXIT_CONFIG, f"{origin}: unknown model {m!r}")
    try:
        spec = potential_from_config(cfg)
        if spec is not None and cfg["grid"]["radius"] is None:
            cfg["grid"]["radius"] = float(spec.effective_radius())
        if cfg["scan"]["alpha"] is None:
            cfg["scan"]["alpha"] = default_alpha(spec.beta if spec is not None else math.inf)
        quad_from_config(cfg)
        CutoffSpec(cfg["cutoff"]["lambda1"], 1.0)
    except (ConfigurationError, ValueError, OSError) as exc:
        raise ExitError(EXIT_CONFIG, f"{origin}: {exc}") from exc
    sc = cfg["scan"]
    if not (2 < sc["t_min"] < sc["t_max"]) or sc["n_points"] < 2:
        raise ExitError(EXIT_CONFIG, f"{origin}: scan needs 2 < t_min < t_max and n_points >= 2")
    if any(t <= 2 for t in sc["kernel_times"] + sc["certificate_times"]):
        raise ExitError(EXIT_CONFIG, f"{origin}: kernel and certificate times must exceed 2")


def potential_from_config(cfg):
    pot = cfg["potential"]
    if pot["form"] == "free":
        return None
    table = load_table(pot["table"]) if pot["form"] == "tabulated" else None
    return PotentialSpec(pot["form"], pot["amplitude"], pot["width"], (pot["center_x"], pot["center_y"]),
                         pot["beta"], table)


def quad_from_config(cfg):
    q = cfg["quadrature"]
    return QuadConfig(panels_init=q["panels_init"], s_min=q["s_min"], lambda_max=q["lambda_max"],
                      L_list=cfg["cutoff"]["L_list"], filon_order=q["filon_order"], rtol=q["rtol"],
                      max_refine=q["max_refine"])


def header_lines(cfg):
    lines = [f"disp2d {__version__}"]
    for section in SCHEMA:
        for key in SCHEMA[section]:
            lines.append(f"{section}.{key} = {_render(cfg[section][key])}")
    lines.append(f"env.{THREADS_ENV} = {os.environ.get(THREADS_ENV, '')}")
    return lines


def config_hash(cfg):
    return hashlib.sha256("\n".join(header_lines(cfg)).encode()).hexdigest()


# -- pipeline ------------------------------------------------------------------


class Pipeline:
    def __init__(self, cfg, out_dir, override_nonregular=False):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.override = override_nonregular
        self.spec = potential_from_config(cfg)
        self.quad = quad_from_config(cfg)
        self.cutoff = CutoffSpec(cfg["cutoff"]["lambda1"])
        self.header = header_lines(cfg)
        self.written = []
        self._machinery = None

    def _write(self, name, text):
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(path)

    def _head(self):
        return "".join(f"# {line}\n" for line in self.header)

    @property
    def machinery(self):
        if self._machinery is None:
            g = self.cfg["grid"]
            lam_max = self.cfg["quadrature"]["lambda_max"]
            if self.spec is None:
                self._machinery = FreeMachinery()
            elif g["machinery"] == "radial":
                self._machinery = RadialMachinery(self.spec, g["radial_order"], g["radius"], lambda_max=lam_max)
            else:
                grid = build_grid(self.spec, g["radial_order"], g["angular_order"], g["radius"], g["scheme"])
                self._machinery = GridMachinery(grid, self.spec, lambda_max=lam_max)
        return self._machinery

    def pairs(self):
        p = np.array(self.cfg["scan"]["pairs"], dtype=float)
        return p[:, :2], p[:, 2:]

    def run(self, stages):
        self.out.mkdir(parents=True, exist_ok=True)
        status = EXIT_OK
        for st in STAGES:
            if st in stages:
                code = getattr(self, f"stage_{st}")()
                status = max(status, code or EXIT_OK)
                if code == EXIT_REGULARITY:
                    break
        self._manifest()
        return status

    def _manifest(self):
        lines = []
        for path in sorted(self.written):
            lines.append(f"{hashlib.sha256(path.read_bytes()).hexdigest()}  {path.name}")
        with open(self.out / "manifest.txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def stage_regularity(self):
        g = self.cfg["grid"]
        if self.spec is None:
            self._write("regularity.txt", self._head() + "verdict: regular\nnote: V = 0\n")
            return EXIT_OK
        grid = build_grid(self.spec, g["radial_order"], g["angular_order"], g["radius"], g["scheme"])
        rep = regularity_check(grid, self.spec, g["threshold"])
        body = [f"grid_id: {grid.grid_id}"]
        for k, v in rep.as_dict().items():
            body.append(f"{k}: {v if isinstance(v, str) else fmt(v)}")
        self._write("regularity.txt", self._head() + "\n".join(body) + "\n")
        if rep.verdict == "inconclusive" or (rep.verdict == "non_regular" and not self.override):
            print(f"regularity verdict {rep.verdict}; refine the grid or pass --override-nonregular",
                  file=sys.stderr)
            return EXIT_REGULARITY
        return EXIT_OK

    def stage_kernel(self):
        x, y = self.pairs()
        table = propagator_kernels(self.cfg["scan"]["kernel_times"], x, y, self.machinery, self.cutoff, self.quad)
        rows = [k.row() for row in table for k in row]
        self._write("kernels.csv", self._head() + ",".join(STONE_COLUMNS) + "\n"
                    + "".join(",".join(r) + "\n" for r in rows))
        return EXIT_OK if all(k.converged for row in table for k in row) else EXIT_ACCURACY

    def stage_scan(self):
        sc = self.cfg["scan"]
        ts = np.geomspace(sc["t_min"], sc["t_max"], sc["n_points"])
        x, y = self.pairs()
        table = propagator_kernels(ts, x, y, self.machinery, self.cutoff, self.quad)
        rows = [k.row() for c in range(x.shape[0]) for k in (row[c] for row in table)]
        self._write("scan.csv", self._head() + ",".join(STONE_COLUMNS) + "\n"
                    + "".join(",".join(r) + "\n" for r in rows))
        return EXIT_OK if all(k.converged for row in table for k in row) else EXIT_ACCURACY

    def stage_fit(self):
        path = self.out / "scan.csv"
        if not path.is_file():
            print(f"fit stage needs {path}; run the scan stage first", file=sys.stderr)
            return EXIT_ACCURACY
        scans = read_scan_csv(path)
        tol = self.cfg["quadrature"]["rtol"]
        inputs = hashlib.sha256(path.read_bytes()).hexdigest()
        blocks = []
        code = EXIT_OK
        for (x, y), pts in scans.items():
            for p in pts:
                p.ok = p.error <= tol * p.abs_k + self.quad.atol
            results = []
            for model in self.cfg["scan"]["models"]:
                try:
                    results.append(fit_decay(pts, model, alpha=self.cfg["scan"]["alpha"]))
                except FitRefusedError as exc:
                    print(f"fit {model} for pair {x} {y} refused: {exc}", file=sys.stderr)
                    code = EXIT_ACCURACY
            fixture = f"{self.spec.identity() if self.spec else 'free'} x={_render(x)} y={_render(y)}"
            text = fit_report(results, fixture, inputs)
            try:
                sup, t_at = weighted_sup(pts, x, y)
                text += f"weighted_sup: {fmt(sup)}\nweighted_sup_t: {fmt(t_at)}\n"
            except FitRefusedError:
                code = EXIT_ACCURACY
            blocks.append(text)
        self._write("fit_report.txt", self._head() + "\n".join(blocks))
        return code

    def stage_certify(self):
        sc = self.cfg["scan"]
        x, y = self.pairs()
        lam_top = min(max(self.cfg["cutoff"]["L_list"]) * self.cutoff.lambda1, self.quad.lambda_max)
        L = lam_top / self.cutoff.lambda1
        cut = self.cutoff.with_L(L)
        nodes = np.concatenate([np.geomspace(1e-12, 0.02 * lam_top, 60, endpoint=False),
                                np.linspace(0.02 * lam_top, lam_top, sc["certificate_nodes"])])
        cols = ["t", "x1", "x2", "y1", "y2", "variant", "integral_abs", "certificate", "calibration", "ratio"]
        lines = [",".join(cols)]
        code = EXIT_OK
        for c in range(x.shape[0]):
            dens = np.asarray(self.machinery.density_table(nodes, x[c:c + 1], y[c:c + 1])).reshape(-1)
            e_func = spline_density(nodes, dens, cut)
            e0 = complex(dens[0]) if abs(dens[0]) > 1e-3 else 0.0
            variants = ["with_boundary"] + (["zero_at_origin"] if e0 == 0 else [])
            ts = np.array(sc["certificate_times"])
            vals, _ = oscillatory_integral(ts, lambda lam: e_func(lam)[0], lam_top)
            for ti, t in enumerate(ts):
                for variant in variants:
                    try:
                        cert = ibp_certificate(e_func, t, variant, lam_top, e_origin=e0)
                    except CertificateUnavailableError as exc:
                        print(f"certificate unavailable at t={t}: {exc}", file=sys.stderr)
                        code = EXIT_ACCURACY
                        continue
                    target = vals[ti] - (1j * e0 / (2 * t) if variant == "with_boundary" else 0.0)
                    ratio = abs(target) / cert.value if cert.value > 0 else math.inf
                    lines.append(",".join([fmt(t), fmt(x[c, 0]), fmt(x[c, 1]), fmt(y[c, 0]), fmt(y[c, 1]), variant,
                                           fmt(abs(target)), fmt(cert.value), fmt(cert.calibration), fmt(ratio)]))
        self._write("certificates.csv", self._head() + "\n".join(lines) + "\n")
        return code

    def stage_oracle(self):
        o = self.cfg["oracle"]
        spec = self.spec if self.spec is not None else standard_well(0.0)
        if o["boundary"] == "absorbing_layer":
            box = BoxDiscretization.absorbing(o["half_width"], o["n_per_side"], o["absorber_strength"])
        else:
            box = BoxDiscretization(o["half_width"], o["n_per_side"], o["boundary"])
        lam_top = o["lambda1"] * o["L"]
        cutoff = CutoffSpec(o["lambda1"], o["L"])
        quad = QuadConfig(panels_init=o["panels_init"], lambda_max=lam_top, L_list=(o["L"],), s_min=self.quad.s_min)
        if self.spec is None:
            machinery = FreeMachinery()
        else:
            machinery = RadialMachinery(spec, o["n_radial"], lambda_max=lam_top)
        rows = evolve_and_compare(o["sigma"], list(o["t_list"]), box, spec, machinery, cutoff, quad)
        path = self.out / "oracle.csv"
        write_comparison_csv(path, rows, self.header)
        self.written.append(path)
        return EXIT_OK


def read_scan_csv(path):
    """Scan CSV (stone schema) -> {((x1, x2), (y1, y2)): [ScanPoint, ...]} in file order."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for ln in lines[1:]:
        f = ln.strip().split(",")
        t, x1, x2, y1, y2, re, im, err = (float(v) for v in f[:8])
        key = ((x1, x2), (y1, y2))
        out.setdefault(key, []).append(ScanPoint(t, abs(complex(re, im)), err, True))
    return out


# -- fixtures --------------------------------------------------------------------

FIXTURE_ORDERS = (24, 48)
RESONANT_BRACKET = (-3.6, -3.1)


@lru_cache(maxsize=1)
def list_fixtures():
    """Built-in fixtures with their regularity reports (computed once per process).

    Returns a tuple of (name, spec or None, report or None, verdict).
    """
    out = [("free", None, None, "regular")]
    for name, amp in (("gaussian_repulsive_0.5", 0.5), ("gaussian_attractive_0.5", -0.5)):
        spec = standard_well(amp)
        rep = regularity_check(build_grid(spec, *FIXTURE_ORDERS), spec)
        out.append((name, spec, rep, rep.verdict))
    window = locate_nonregular_window(standard_well(-1.0), RESONANT_BRACKET, *FIXTURE_ORDERS)
    spec = standard_well(window.center)
    rep = regularity_check(build_grid(spec, *FIXTURE_ORDERS), spec)
    out.append(("gaussian_resonant", spec, rep, rep.verdict))
    return tuple(out)


def format_fixtures(fixtures):
    lines = ["name,amplitude,sigma_min,verdict"]
    for name, spec, rep, verdict in fixtures:
        amp = fmt(spec.amplitude) if spec is not None else "0"
        sig = fmt(rep.sigma_min) if rep is not None else ""
        lines.append(f"{name},{amp},{sig},{verdict}")
    return "\n".join(lines) + "\n"


# -- CLI -----------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="disp2d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("all",):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run the configured stages")
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides [outputs] directory)")
        p.add_argument("--override-nonregular", action="store_true",
                       help="continue past a non_regular verdict")
    sub.add_parser("fixtures", help="list built-in fixtures and their regularity verdicts")
    return parser


def run(config_path, command="all", out_dir=None, override_nonregular=False):
    """Run one stage (or the configured stages for 'all'); returns the exit status."""
    try:
        cfg = load_config(config_path)
    except ExitError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    out = out_dir if out_dir is not None else cfg["outputs"]["directory"]
    stages = cfg["run"]["stages"] if command == "all" else (command,)
    try:
        return Pipeline(cfg, out, override_nonregular).run(stages)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "fixtures":
        sys.stdout.write(format_fixtures(list_fixtures()))
        return EXIT_OK
    return run(args.config, args.command, args.out, args.override_nonregular)


if __name__ == "__main__":
    sys.exit(main())
