"""Config-driven experiment runner.

Configuration files are flat ``section.key = value`` lines; ``#`` starts a
comment. Every key is listed in SCHEMA with its type and default. Keys under
``field.`` are handed to :func:`fields.field_from_config` unchanged.

    relscatter sweep --config demo.cfg --out results/ --threads 4 --seed 7
"""
import argparse
import concurrent.futures as cf
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import bounds, dynamics, fields, reconstruct, verify
from .xray import Plane, Ray


class ConfigError(ValueError):
    def __init__(self, msg, key=None, line=None):
        where = ""
        if line is not None:
            where += f"line {line}: "
        if key is not None:
            where += f"{key}: "
        super().__init__(where + msg)
        self.key = key
        self.line = line


def _floats(text):
    return [float(s) for s in str(text).split(",") if s.strip()]


def _fmt_floats(vals):
    return ", ".join(repr(float(v)) for v in vals)


# key -> (parser, formatter, default, description)
_F = (float, repr)
_I = (int, str)
_S = (str.strip, str)
_L = (_floats, _fmt_floats)

SCHEMA = {
    "physics.c": (*_F, 1.0, "speed of light"),
    "speeds.list": (*_L, [0.9, 0.99, 0.999], "speeds as fractions of c, each in (0, 1)"),
    "rays.count": (*_I, 3, "sweep: number of random rays"),
    "rays.offset_scale": (*_F, 1.0, "sweep: standard deviation of ray offsets"),
    "rays.angles": (*_I, 120, "reconstruct: number of projection angles"),
    "rays.offsets": (*_I, 129, "reconstruct: offsets per angle"),
    "rays.extent": (*_F, 5.0, "reconstruct: offsets cover [-extent, extent]"),
    "grid.n": (*_I, 129, "reconstruct: output grid points per axis"),
    "grid.extent": (*_F, 3.5, "reconstruct: output grid covers [-extent, extent]^2"),
    "solver.method": (*_S, "auto", "picard, ode or auto (picard when contractive)"),
    "solver.du": (*_F, 0.01, "step in the sinh time variable"),
    "solver.tol": (*_F, 1e-14, "relative Picard tolerance"),
    "solver.max_iter": (*_I, 200, "Picard iteration cap"),
    "sweep.envelope_scale": (*_F, 1.0, "multiplier applied to C1 and C2 before comparison"),
    "sweep.c_fit": (*_S, "auto", "fitted offset constant, or auto to calibrate per ray"),
    "reconstruct.du": (*_F, 0.04, "time step for the simulated scattering data"),
    "reconstruct.i": (*_I, 1, "first axis of the plane and of B_ik (1-based)"),
    "reconstruct.k": (*_I, 2, "second axis (1-based)"),
    "nonunique.kind": (*_S, "magnetic2d", "magnetic2d, electric or zero"),
    "nonunique.rays": (*_I, 500, "number of random rays"),
    "constants.x_norm": (*_F, 0.0, "|x| used for the constants"),
    "constants.r": (*_S, "auto", "radius r, or auto to minimize mu at each speed"),
    "constants.c_fit": (*_F, 0.0, "fitted offset constant added to C2"),
    "verify.draws": (*_I, 1000, "draws per inequality"),
    "run.seed": (*_I, 0, "seed for random rays and draws"),
    "run.threads": (*_I, 1, "worker threads"),
    "run.out": (*_S, "out", "output directory"),
}


@dataclass
class ExperimentConfig:
    values: dict = dc_field(default_factory=dict)
    field_spec: dict = dc_field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return (isinstance(other, ExperimentConfig) and self.field_spec == other.field_spec
                and self.to_text() == other.to_text())

    @classmethod
    def defaults(cls):
        return cls({k: v[2] for k, v in SCHEMA.items()}, {})

    @classmethod
    def parse(cls, text):
        cfg = cls.defaults()
        seen = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected 'section.key = value'", line=n)
            key, val = (s.strip() for s in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"duplicate key (first on line {seen[key]})", key, n)
            seen[key] = n
            if key.startswith("field."):
                cfg.field_spec[key[6:]] = val
                continue
            if key not in SCHEMA:
                raise ConfigError("unknown key", key, n)
            try:
                cfg.values[key] = SCHEMA[key][0](val)
            except ValueError as e:
                raise ConfigError(f"bad value {val!r} ({e})", key, n) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text())

    def validate(self):
        v = self.values
        if not v["physics.c"] > 0:
            raise ConfigError("must be positive", "physics.c")
        for s in v["speeds.list"]:
            if not 0 < s < 1:
                raise ConfigError(f"speed fraction {s} outside (0, 1)", "speeds.list")
        for k in ("rays.angles", "rays.offsets", "grid.n"):
            if v[k] < 2:
                raise ConfigError("grid counts must be >= 2", k)
        for k in ("rays.count", "nonunique.rays", "verify.draws", "run.threads", "solver.max_iter"):
            if v[k] < 1:
                raise ConfigError("must be >= 1", k)
        if v["solver.method"] not in ("picard", "ode", "auto"):
            raise ConfigError("expected picard, ode or auto", "solver.method")
        if v["nonunique.kind"] not in ("magnetic2d", "electric", "zero"):
            raise ConfigError("expected magnetic2d, electric or zero", "nonunique.kind")
        for k in ("sweep.c_fit", "constants.r"):
            if v[k] != "auto":
                try:
                    float(v[k])
                except ValueError:
                    raise ConfigError("expected a number or auto", k) from None

    def to_text(self, exclude=()):
        lines = [f"{k} = {SCHEMA[k][1](self.values[k])}" for k in SCHEMA if k not in exclude]
        lines += [f"field.{k} = {self.field_spec[k]}" for k in sorted(self.field_spec)]
        return "\n".join(lines) + "\n"

    def build_field(self):
        if not self.field_spec:
            raise ConfigError("missing field section", "field.family")
        spec = dict(self.field_spec)
        spec.setdefault("c", repr(self.values["physics.c"]))
        try:
            return fields.field_from_config(spec)
        except KeyError as e:
            raise ConfigError("missing key", f"field.{e.args[0]}") from None
        except ValueError as e:
            raise ConfigError(str(e), "field") from None


# ------------------------------------------------------------ helpers

def _fmt(v):
    return format(float(v), ".17g")


def _pmap(fun, items, threads):
    if threads <= 1:
        return [fun(it) for it in items]
    with cf.ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fun, items))


def _with_beta(field):
    return field if field.is_zero else fields.with_estimated_beta(field)


# ------------------------------------------------------------ subcommands

def cmd_sweep(cfg, out, threads):
    """Gaps of the finite-speed identities against their envelopes, per ray and speed."""
    field = _with_beta(cfg.build_field())
    c = field.params.c
    th, xs = reconstruct.random_rays(field.d, cfg["rays.count"], cfg["run.seed"], cfg["rays.offset_scale"])
    rays = [Ray(t, x) for t, x in zip(th, xs)]
    fractions = cfg["speeds.list"]
    scale = cfg["sweep.envelope_scale"]
    kw = dict(du=cfg["solver.du"], tol=cfg["solver.tol"], max_iter=cfg["solver.max_iter"])

    def one(ray):
        if field.is_zero:
            info = dict(r=float("nan"), s1=float("nan"), s2=float("nan"), C1=0.0, C2=0.0, C_fit=0.0)
        else:
            try:
                bp, info = asy.ray_constants(field, ray)
                info = dict(info, r=bp.r)
                cfit = cfg["sweep.c_fit"]
                info["C_fit"] = (asy.fit_offset_constant(field, [ray], du=cfg["solver.du"])
                                 if cfit == "auto" else float(cfit))
                info["C2"] += info["C_fit"]
            except bounds.NoRootError as e:
                info = dict(r=float("nan"), s1=float("nan"), s2=float("nan"), C1=float("nan"),
                            C2=float("nan"), C_fit=float("nan"), error=str(e))
        rows, data, errors = [], [], []
        for f in fractions:
            s = f * c
            try:
                dat = dynamics.scattering_data(s * ray.theta, ray.x, field, cfg["solver.method"], c, **kw)
            except Exception as e:  # recorded per row, reflected in the exit code
                errors.append(f"s={s}: {type(e).__name__}: {e}")
                rows.append(asy.SweepRow(s, np.nan, np.nan, np.nan, np.nan))
                continue
            a = asy.compare_velocity_asymptotics(field, ray, s, dat, C1=scale * info["C1"])
            b = asy.compare_offset_asymptotics(field, ray, s, dat, C2=scale * info["C2"])
            rows.append(asy.SweepRow(s, a.gap, a.envelope, b.gap, b.envelope))
            data.append((s, ray.theta, ray.x, dat))
        return rows, data, info, errors

    results = _pmap(one, rays, threads)
    all_data, ok = [], True
    with open(out / "sweep_constants.csv", "w", newline="\n") as fh:
        fh.write("ray,r,s1,s2,C1,C2,C_fit\n")
        for i, (rows, data, info, errors) in enumerate(results):
            asy.write_sweep_csv(out / f"sweep_ray{i}.csv", rows)
            fh.write(",".join([str(i)] + [_fmt(info[k]) for k in ("r", "s1", "s2", "C1", "C2", "C_fit")]) + "\n")
            all_data += data
            for e in errors + ([info["error"]] if "error" in info else []):
                print(f"ray {i}: {e}", file=sys.stderr)
                ok = False
            for r in rows:
                if not r.ok:
                    ok = False
                    print(f"ray {i} s={r.s:.6g}: gap above envelope "
                          f"(a: {r.gap_a:.3e} vs {r.envelope_a:.3e}, b: {r.gap_b:.3e} vs {r.envelope_b:.3e})",
                          file=sys.stderr)
    dynamics.write_results_csv(out / "results.csv", all_data, field.d)
    print(f"sweep: {len(rays)} rays x {len(fractions)} speeds, {'all under envelopes' if ok else 'VIOLATIONS'}")
    return 0 if ok else 1


def cmd_reconstruct(cfg, out, threads):
    """V and B_ik on a coordinate plane from simulated a_sc at each speed."""
    field = cfg.build_field()
    c = field.params.c
    i, k = cfg["reconstruct.i"] - 1, cfg["reconstruct.k"] - 1
    if not (0 <= i < field.d and 0 <= k < field.d and i != k):
        raise ConfigError("axes must be distinct and within the dimension", "reconstruct.i")
    plane = Plane.coordinate(field.d, i, k)
    fractions = cfg["speeds.list"]

    def one(f):
        data = reconstruct.simulate_plane(field, f * c, plane, cfg["rays.angles"], cfg["rays.offsets"],
                                          cfg["rays.extent"], cfg["reconstruct.du"])
        rb = reconstruct.reconstruct_B(data, field, i, k, cfg["grid.n"], cfg["grid.extent"])
        rv = reconstruct.reconstruct_V(data, field, cfg["grid.n"], cfg["grid.extent"])
        return rb, rv

    reports = _pmap(one, fractions, threads)
    with open(out / "reconstruct_summary.csv", "w", newline="\n") as fh:
        fh.write("s,target,error,systematic,energy_drift\n")
        for j, (f, reps) in enumerate(zip(fractions, reports)):
            for rep in reps:
                rep.write(str(out / f"reconstruct_s{j}_{rep.target}"))
                fh.write(",".join([_fmt(f * c), rep.target, _fmt(rep.error), _fmt(rep.meta["systematic"]),
                                   _fmt(rep.meta["energy_drift"])]) + "\n")
                print(f"s = {f:.6g} c  {rep.target:<5s} relative L2 error {rep.error:.4f}")
    return 0


def cmd_demo_nonunique(cfg, out, threads):
    """Report the invisible-field witness; exit 0 iff it behaves as predicted."""
    kind = cfg["nonunique.kind"]
    field = cfg.build_field() if cfg.field_spec and kind != "zero" else None
    rep = reconstruct.nonuniqueness_demo(kind, cfg["nonunique.rays"], cfg["run.seed"], field)
    if kind == "magnetic2d":
        ok = rep["max_w4"] < 1e-8 and rep["max_w3"] > 0
    elif kind == "electric":
        ok = rep["max_w2"] < 1e-8 and rep["max_w1"] > 0
    else:
        ok = rep["max_all"] == 0
    rep["kernel_confirmed"] = ok
    text = "".join(f"{k} = {_fmt(v) if isinstance(v, float) else v}\n" for k, v in rep.items())
    (out / "nonunique.txt").write_text(text)
    sys.stdout.write(text)
    return 0 if ok else 1


def _constant_row(bp, c_fit):
    try:
        return bounds.constant_set(bp, c_fit), None
    except (bounds.NoRootError, bounds.RangeError) as e:
        nan = float("nan")
        return bounds.ConstantSet(**{k: nan for k in bounds.ConstantSet.__dataclass_fields__}), str(e)


def cmd_constants(cfg, out, threads):
    """ConstantSet at each speed as aligned CSV, plus root plug-back residuals."""
    field = _with_beta(cfg.build_field())
    b0, b1, b2 = field.beta
    p = field.params
    base = bounds.BoundParams(c=p.c, d=p.d, alpha=p.alpha, beta0=b0, beta1=b1, beta2=b2,
                              x_norm=cfg["constants.x_norm"])
    rows, resid, status = [], [], 0
    for f in cfg["speeds.list"]:
        s = f * p.c
        bp = base.at(v_norm=s)
        bp = bounds.best_r(bp) if cfg["constants.r"] == "auto" else bp.at(r=float(cfg["constants.r"]))
        cs, err = _constant_row(bp, cfg["constants.c_fit"])
        if err:
            print(f"s = {s:.6g}: {err}", file=sys.stderr)
            status = 1
        else:
            resid.append((s, bounds.z1_residual(bp, cs.z1), bounds.mu_of(bp.at(v_norm=cs.z)) - 1.0,
                          bounds.z2_residual(bp, cs.z2)))
        rows.append((bp, cs))
    bounds.write_constants_csv(sys.stdout, rows)
    bounds.write_constants_csv(str(out / "constants.csv"), rows)
    with open(out / "constants_residuals.csv", "w", newline="\n") as fh:
        fh.write("v_norm,z1_residual,z_residual,z2_residual\n")
        for r in resid:
            fh.write(",".join(_fmt(q) for q in r) + "\n")
            print("plug-back residuals at v = {}: z1 {:.3e}, z {:.3e}, z2 {:.3e}".format(*r), file=sys.stderr)
    return status


def cmd_verify_bounds(cfg, out, threads):
    """Randomized inequality suites; exit 0 iff every draw satisfies its bound."""
    n, c = cfg["verify.draws"], cfg["physics.c"]
    seeds = np.random.SeedSequence(cfg["run.seed"]).generate_state(4)
    groups = [verify.operator_suites, verify.force_suites, verify.solution_suites, verify.fixed_point_suites]
    parts = _pmap(lambda j: groups[j](n, int(seeds[j]), c), range(4), threads)
    S = verify.Suites()
    for part in parts:
        S.update(part)
    with open(out / "verify_bounds.csv", "w", newline="\n") as fh:
        fh.write("suite,draws,violations,worst_ratio\n")
        for s in S.values():
            fh.write(f"{s.name},{s.draws},{s.violations},{_fmt(s.worst_ratio)}\n")
    print(S.report())
    return 0 if S.all_passed() else 1


COMMANDS = {
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "demo-nonunique": cmd_demo_nonunique,
    "constants": cmd_constants,
    "verify-bounds": cmd_verify_bounds,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="relscatter", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value config file (defaults if omitted)")
    ap.add_argument("--out", help="output directory (overrides run.out)")
    ap.add_argument("--threads", type=int, help="worker threads (overrides run.threads)")
    ap.add_argument("--seed", type=int, help="seed, 0 <= seed < 2^64 (overrides run.seed)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.defaults()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("must fit in an unsigned 64-bit integer", "--seed")
            cfg.values["run.seed"] = args.seed
        if args.threads is not None:
            cfg.values["run.threads"] = args.threads
        if args.out is not None:
            cfg.values["run.out"] = args.out
        cfg.validate()
        out = Path(cfg["run.out"])
        out.mkdir(parents=True, exist_ok=True)
        # run.out and run.threads do not affect results; leave them out of the echo
        (out / "config.cfg").write_text(cfg.to_text(exclude=("run.out", "run.threads")))
        return COMMANDS[args.command](cfg, out, cfg["run.threads"])
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
