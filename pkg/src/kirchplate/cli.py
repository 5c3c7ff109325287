"""Command line front end: single solves, convergence studies and diagnostics.

Settings come from an optional ``key=value`` file (``--config``) and are
overridden by command-line flags.  Failures print one line
``ERROR <CODE>: <message>`` to stderr and exit with status 2; a nonpositive
coercivity estimate in ``diagnose`` mode exits with status 3.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, NotCoercive, PlateError
from .fem.material import MaterialTensor
from .fem.space import FeSpace
from .mesh import DEFAULT_TAGS, SIDES, build_square_mesh, classify_boundary, normalize_tag
from .solver import coercivity_diagnostic, default_eta, moment_nn_norm, solve_plate, write_solution_csv
from .verification import convergence_study, load, study_csv, study_text, thread_count

log = logging.getLogger("kirchplate")

EXIT_OK, EXIT_ERROR, EXIT_NONPOSITIVE = 0, 2, 3
MODES = ("solve", "study", "diagnose")


@dataclass
class RunConfig:
    degree: int = 1
    levels: tuple = (3, 3)
    eta: float | None = None
    stiffness: float = 1.0
    nu: float = 0.0
    tags: dict = field(default_factory=lambda: dict(DEFAULT_TAGS))
    mode: str = "solve"
    out: str | None = None
    reference: str = "exact"
    export: str | None = None
    threads: int = 1

    def validate(self) -> "RunConfig":
        if self.degree not in (1, 2, 3):
            raise ConfigError(f"degree must be 1, 2 or 3, got {self.degree}")
        lo, hi = self.levels
        if lo < 0 or hi < lo:
            raise ConfigError(f"level range {lo}..{hi} must be nonempty and ascending")
        if self.eta is not None and not self.eta >= 0:
            raise ConfigError(f"eta must be nonnegative, got {self.eta}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reference not in ("exact", "fine"):
            raise ConfigError("reference must be 'exact' or 'fine'")
        try:
            self.material
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def eta_value(self) -> float:
        return default_eta(self.degree) if self.eta is None else self.eta

    @property
    def material(self) -> MaterialTensor:
        return MaterialTensor(self.stiffness, self.nu)

    @property
    def level_list(self) -> list:
        return list(range(self.levels[0], self.levels[1] + 1))


def parse_levels(text: str) -> tuple:
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return int(a), int(b)
        return int(text), int(text)
    except ValueError as exc:
        raise ConfigError(f"bad level range {text!r}; expected A..B or a single level") from exc


def parse_tags(text: str) -> dict:
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if len(parts) != 4:
        raise ConfigError("tags need four entries in west,north,east,south order")
    try:
        return {side: normalize_tag(t) for side, t in zip(SIDES, parts)}
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


_CONVERTERS = {
    "degree": int, "levels": parse_levels, "level": parse_levels, "eta": float, "stiffness": float,
    "nu": float, "tags": parse_tags, "mode": str, "out": str, "reference": str, "export": str,
    "threads": int,
}


def read_config(path) -> dict:
    """Flat ``key=value`` file; blank lines and ``#`` comments are ignored, later keys win."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values["levels" if key == "level" else key] = _convert(key, val)
    return values


def _convert(key, val):
    try:
        return _CONVERTERS[key](val)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {val!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kirchplate", description="Kirchhoff plate solver by regular decomposition")
    ap.add_argument("--config", help="key=value settings file")
    ap.add_argument("--degree", help="polynomial degree k (1-3)")
    ap.add_argument("--levels", help="refinement level L or range A..B")
    ap.add_argument("--eta", help="Nitsche penalty (default 10 k^2)")
    ap.add_argument("--nu", help="Poisson ratio")
    ap.add_argument("--stiffness", help="bending stiffness D")
    ap.add_argument("--tags", help="boundary tags west,north,east,south from {c,s,f}")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--out", help="output file")
    ap.add_argument("--reference", choices=("exact", "fine"), help="p/phi errors against closed forms or a finer run")
    ap.add_argument("--export-matrices", dest="export", metavar="DIR",
                    help="debug: write assembled matrices in Matrix Market format to DIR")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(argv=None) -> tuple:
    args = build_parser().parse_args(argv)
    values = read_config(args.config) if args.config else {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = _convert(f.name, raw) if f.name in _CONVERTERS else raw
    if "threads" not in values:
        values["threads"] = thread_count()
    return RunConfig(**values).validate(), args


def _default_out(cfg: RunConfig) -> str:
    return cfg.out or {"solve": "solution.csv", "study": "study.csv", "diagnose": "diagnose.txt"}[cfg.mode]


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one configuration; returns the process exit status."""
    stdout = stdout or sys.stdout
    out = Path(_default_out(cfg))
    if cfg.mode == "solve":
        level = cfg.levels[1]
        mesh = build_square_mesh(level)
        part = classify_boundary(mesh, cfg.tags)
        if cfg.export:
            Path(cfg.export).mkdir(parents=True, exist_ok=True)
        sol = solve_plate(mesh, part, cfg.degree, load, eta=cfg.eta_value, material=cfg.material,
                          export_dir=cfg.export)
        write_solution_csv(out, sol)
        print(f"solved L={level} k={cfg.degree} eta={cfg.eta_value:g}: {mesh.n_elements} elements -> {out}",
              file=stdout)
        return EXIT_OK

    if cfg.mode == "study":
        rows = convergence_study(cfg.level_list, cfg.degree, cfg.eta_value, cfg.material, cfg.tags,
                                 reference=cfg.reference, threads=cfg.threads)
        out.write_text(study_csv(rows))
        text = study_text(rows, cfg.degree)
        out.with_suffix(".txt").write_text(text)
        stdout.write(text)
        return EXIT_OK

    lines = [f"# diagnose k={cfg.degree} eta={cfg.eta_value:g}",
             "level,coercivity,min_eigen_sign,solve,mnn_boundary"]
    status = EXIT_OK
    for level in cfg.level_list:
        mesh = build_square_mesh(level)
        part = classify_boundary(mesh, cfg.tags)
        est = coercivity_diagnostic(FeSpace(mesh, cfg.degree), part, cfg.eta_value, cfg.material)
        try:
            sol = solve_plate(mesh, part, cfg.degree, load, eta=cfg.eta_value, material=cfg.material)
            solve_state, mnn = "ok", f"{moment_nn_norm(sol):.6g}"
        except NotCoercive:
            solve_state, mnn = NotCoercive.code, ""
        sign = "positive" if est > 0 else "nonpositive"
        if est <= 0:
            status = EXIT_NONPOSITIVE
        lines.append(f"{level},{est:.6g},{sign},{solve_state},{mnn}")
    text = "\n".join(lines) + "\n"
    out.write_text(text)
    stdout.write(text)
    return status


def main(argv=None) -> int:
    try:
        cfg, args = config_from_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return run(cfg)
    except PlateError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"ERROR INVALID_INPUT: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
