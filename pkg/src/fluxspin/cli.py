"""Command-line front end.

Every command writes its artifacts into ``--outdir`` (default: the
``FLUXSPIN_OUTDIR`` environment variable, else the working directory)
together with ``<command>.manifest.json`` recording the resolved
configuration, seed, package versions and output checksums. Nothing
time-dependent is recorded, so seeded reruns are byte-identical.

Bare numbers on the command line are in lab units (us, uPhi0, mK, Hz, uA,
um); a unit suffix such as ``5ms`` or ``0.7mm`` is also accepted.

Exit codes: 0 success, 1 statistical failure or non-convergence, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import inference, oracles, physics, protocol, spectrum
from .errors import FluxSpinError, InfeasibleError, NumericalError, RankDeficiencyError
from .kernels import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion, f_asymptotic
from .units import parse_quantity, to_natural

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
OUTDIR_ENV = "FLUXSPIN_OUTDIR"

_MODELS = {
    "homog": "homogeneous", "homogeneous": "homogeneous",
    "inhomog": "inhomogeneous", "inhomogeneous": "inhomogeneous",
    "cutoff": "cutoff", "1/f": "cutoff",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types

def _quantity(kind):
    def convert(text):
        try:
            return parse_quantity(text, kind)
        except FluxSpinError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    convert.__name__ = kind
    return convert


def _model(text):
    try:
        return _MODELS[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown model {text!r}; choose from {', '.join(sorted(_MODELS))}") from None


def _grid_spec(kind):
    def convert(text):
        parts = str(text).split(":")
        if len(parts) not in (3, 4):
            raise argparse.ArgumentTypeError("grid must be start:stop:points[:log|linear]")
        spacing = parts[3] if len(parts) == 4 else "log"
        try:
            start, stop = parse_quantity(parts[0], kind), parse_quantity(parts[1], kind)
            n = int(parts[2])
        except (FluxSpinError, ValueError) as exc:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None
        if spacing not in ("log", "linear") or n < 1 or stop < start:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}")
        if spacing == "log":
            if start <= 0:
                raise argparse.ArgumentTypeError("log grid needs a positive start")
            return np.geomspace(start, stop, n)
        return np.linspace(start, stop, n)
    convert.__name__ = f"{kind} grid"
    return convert


def _kernel(args):
    """Kernel in microsecond units from model flags."""
    if args.model == "cutoff":
        for name in ("alpha", "tau_min", "tau_max"):
            if getattr(args, name) is None:
                raise UsageError(f"--{name.replace('_', '-')} is required for the cutoff model")
        return CutoffOneOverF(args.alpha, args.tau_min, args.tau_max)
    if args.omega is None:
        raise UsageError("--omega is required for the diffusion models")
    cls = HomogeneousDiffusion if args.model == "homogeneous" else InhomogeneousDiffusion
    return cls(args.omega * 1e-6)


def _add_kernel_args(p, required=True):
    p.add_argument("--model", type=_model, required=required, help="homog, inhomog or cutoff")
    p.add_argument("--omega", type=_quantity("rate"), help="diffusion rate Omega (Hz)")
    p.add_argument("--alpha", type=float, help="cutoff 1/f exponent")
    p.add_argument("--tau-min", type=_quantity("time"), help="shortest relaxation time (us)")
    p.add_argument("--tau-max", type=_quantity("time"), help="longest relaxation time (us)")


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows, comments=()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"#{c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class Run:
    """Collects output files of one command and writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.outdir = Path(args.outdir or os.environ.get(OUTDIR_ENV) or ".")
        self.outputs = {}

    def write(self, name, text):
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / name
        path.write_text(text)
        self.outputs[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def finish(self, status, summary=None):
        config = {k: v for k, v in sorted(vars(self.args).items())
                  if k not in ("func", "outdir", "config") and not callable(v)}
        manifest = {
            "command": self.args.command,
            "config": config,
            "seed": getattr(self.args, "seed", None),
            "versions": _versions(),
            "outputs": self.outputs,
            "status": status,
        }
        if summary is not None:
            manifest["summary"] = summary
        self.write(f"{self.args.command}.manifest.json", _json_text(manifest))
        return status


def _versions():
    out = {}
    for dist in ("artifact", "numpy", "scipy"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_kernel(args):
    run = Run(args)
    kernel = _kernel(args)
    t = args.grid
    f = np.atleast_1d(kernel.f(t))
    if args.model == "cutoff":
        asym = np.full_like(f, np.nan)
    else:
        x = kernel.omega_c * t
        asym = np.where(x < 1.0, f_asymptotic(kernel, t, "short"), f_asymptotic(kernel, t, "long"))
    if args.units == "natural":
        header, tcol = ("t_s", "F", "F_asymptotic"), to_natural(t, "time")
    else:
        header, tcol = ("t_us", "F", "F_asymptotic"), t
    run.write("kernel.csv", _csv_text(header, zip(tcol, f, asym), [f"model={args.model}"]))
    return run.finish(EXIT_OK)


def cmd_psd(args):
    run = Run(args)
    kernel = _kernel(args)
    f_hz = args.freq
    omega_us = 2.0 * math.pi * f_hz * 1e-6
    # natural-unit prefactor T eps_p / I_p^2 with eps_p = 2 I_p phi_p
    i_p = to_natural(args.i_p, "current")
    eps = 2.0 * i_p * to_natural(args.phi_p, "flux")
    temp = to_natural(args.temperature, "temperature")
    shape = np.atleast_1d(spectrum.psd_from_kernel(kernel, 1.0, 1.0, 1.0, omega_us, method=args.method))
    s_si = temp * eps / i_p ** 2 * shape * 1e-6
    slope = np.gradient(np.log(s_si), np.log(f_hz)) if f_hz.size > 1 else np.full_like(s_si, np.nan)
    if args.units == "natural":
        header, cols = ("omega_rad_s", "S_Phi_Wb2_s", "local_slope"), (2 * math.pi * f_hz, s_si)
    else:
        header, cols = ("f_Hz", "S_Phi_uPhi0^2_per_Hz", "local_slope"), (f_hz, s_si / to_natural(1.0, "psd"))
    summary = {"model": args.model}
    if args.model == "cutoff":
        lo, hi = spectrum.cutoff_frequencies(args.tau_min * 1e-6, args.tau_max * 1e-6)
        summary["cutoff_frequencies_Hz"] = [lo, hi]
    run.write("psd.csv", _csv_text(header, zip(*cols, slope), [f"model={args.model}"]))
    run.write("psd.json", _json_text(summary))
    return run.finish(EXIT_OK, summary)


def cmd_synth(args):
    run = Run(args)
    kernel = _kernel(args)
    times = args.grid
    sched = dict(tau_a=args.tau_a, tau_r=args.tau_r, repeats=args.repeats)
    if args.mode == "polarization":
        grid = protocol.polarization_grid(times, args.fixed_time, **sched)
    else:
        grid = protocol.depolarization_grid(times, args.fixed_time, **sched)
    noise = protocol.NoiseSpec(args.sigma, args.drift_amplitude, args.drift_timescale, args.seed)
    trace = protocol.synth_trace(kernel, args.phi_p, grid, noise, mode=args.mode,
                                 temperature=args.temperature, device_id=args.device_id)
    run.write(args.out, protocol.write_trace(trace))
    return run.finish(EXIT_OK)


def _parse_init(items):
    init = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--init expects key=value, got {item!r}")
        init[key.strip()] = float(value)
    return init


def cmd_fit(args):
    run = Run(args)
    trace = protocol.read_trace(args.trace)
    result = inference.fit_kernel(trace, args.model, init=_parse_init(args.init), t_max=args.t_max)
    report = result.to_dict()
    if args.model != "cutoff":
        report["params_Hz"] = {"omega_c": result["omega_c"] * 1e6}
    run.write("fit.json", _json_text(report))
    p = result.params
    phi = p["phi_p"]
    kernel = inference.kernel_from_params(args.model, p)
    model = protocol.trace_model(trace, kernel, phi)
    rows = zip(trace.t, trace.phi_fb, model, (trace.phi_fb - model) / trace.sigma)
    run.write("fit_residuals.csv", _csv_text(("t_us", "phi_fb_uPhi0", "model_uPhi0", "residual_sigma"), rows))
    return run.finish(EXIT_OK if result.converged else EXIT_FAIL, {"converged": result.converged})


def _read_cw_table(path):
    rows, header_seen = [], False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not rows and not header_seen and line[0].isalpha():
                header_seen = True
                continue
            cells = line.split(",")
            try:
                rows.append(tuple(float(c) for c in cells[:3]))
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: non-numeric value") from None
            if len(cells) < 3:
                raise UsageError(f"{path}: line {lineno}: expected T_mK,phi_p_uPhi0,sigma_uPhi0")
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return map(np.array, zip(*rows))


def cmd_cw(args):
    run = Run(args)
    if args.data:
        temps, amps, sig = _read_cw_table(args.data)
    else:
        temps = np.linspace(args.t_lo, args.t_hi, args.points)
        rng = np.random.default_rng(args.seed)
        clean = inference.curie_weiss(temps, args.amplitude, args.t_c)
        amps = clean * (1.0 + args.noise * rng.standard_normal(temps.size))
        sig = args.noise * clean
        run.write("cw_data.csv", _csv_text(("T_mK", "phi_p_uPhi0", "sigma_uPhi0"), zip(temps, amps, sig)))
    result = inference.fit_curie_weiss(temps, amps, sig)
    run.write("cw.json", _json_text(result.to_dict()))
    ok = result.converged and "unphysical" not in result.flags
    return run.finish(EXIT_OK if ok else EXIT_FAIL, {"t_c_mK": result["t_c"], "flags": list(result.flags)})


def cmd_estimate(args):
    run = Run(args)
    dev = physics.DevicePhysics(to_natural(args.i_p, "current"), to_natural(args.loop_length, "length"),
                                to_natural(args.wire_width, "length"), spin=args.spin)
    if args.cw_report:
        rep = json.loads(Path(args.cw_report).read_text())
        amp, amp_err, t_c = rep["params"]["amplitude"], rep["errors"]["amplitude"], rep["params"]["t_c"]
        n_s, n_err = physics.estimate_surface_density(dev, phi_p=amp / (args.temperature - t_c),
                                                      temperature=args.temperature, t_c=t_c,
                                                      general_spin=args.spin != 0.5)
        n_err = n_s * amp_err / amp
    else:
        t_c = args.t_c
        n_s, n_err = physics.estimate_surface_density(dev, phi_p=args.phi_p, temperature=args.temperature,
                                                      t_c=t_c, general_spin=args.spin != 0.5)
    report = {"n_s_cm^-2": n_s * 1e-4, "n_s_err_cm^-2": n_err * 1e-4}
    if args.omega is not None:
        c = physics.solve_cluster_parameters(args.omega, n_s, args.temperature * 1e-3, t_c * 1e-3)
        report.update({
            "x_f": c.x_f, "a_nm": c.a * 1e9, "J_joule": c.j_coupling, "J_mK": c.j_coupling / to_natural(1.0, "temperature"),
            "eta": c.eta, "D_cm2_per_s": c.diffusion_coeff * 1e4, "mean_width_um": c.mean_width * 1e6,
            "omega_Hz": c.omega_c,
        })
    run.write("estimate.json", _json_text(report))
    return run.finish(EXIT_OK, report)


def _comparison_rows(comp):
    return zip(comp.t, comp.closed, comp.estimate, comp.stderr, comp.z)


def cmd_oracle_langevin(args):
    run = Run(args)
    cfg = oracles.diffusion_mode_config(args.modes, tau_1=args.tau1, epsilon_p=args.epsilon_p,
                                        temperature=args.temperature, ensemble_size=args.ensemble, seed=args.seed)
    t = np.geomspace(args.tau1 * 1e-3, args.tau1 * 3, args.points)
    if args.protocol == "depolarize":
        comp = oracles.langevin_depolarize_identity(cfg, args.t0, t)
    elif args.protocol == "steady":
        res = oracles.langevin_run(cfg, t, "steady")
        target = np.full_like(res.t, 2.0 * cfg.epsilon_p * cfg.temperature)
        comp = oracles.Comparison(res.t, res.variance, res.variance * math.sqrt(2.0 / (cfg.ensemble_size - 1)), target)
    else:
        comp = oracles.langevin_polarize_check(cfg, t)
    run.write("oracle_langevin.csv", _csv_text(("t", "closed", "oracle_mean", "oracle_stderr", "z"), _comparison_rows(comp)))
    passed = comp.within(3.0)
    return run.finish(EXIT_OK if passed else EXIT_FAIL, {"pass": passed, "max_abs_z": float(np.max(np.abs(comp.z)))})


def cmd_oracle_cluster(args):
    run = Run(args)
    cfg = oracles.ClusterEnsembleConfig(args.mean_width, args.samples, args.modes, args.diffusion, seed=args.seed,
                                        n_bootstrap=args.bootstrap)
    t = np.geomspace(args.omega_t_min, args.omega_t_max, args.points) / cfg.omega_c
    res = oracles.cluster_ensemble_f(cfg, t)
    closed = InhomogeneousDiffusion(cfg.omega_c).f(t)
    comp = oracles.Comparison(t, res.f, res.stderr, closed)
    run.write("oracle_cluster.csv", _csv_text(("t", "closed", "oracle_mean", "oracle_stderr", "z"), _comparison_rows(comp)))
    passed = comp.within(3.0)
    return run.finish(EXIT_OK if passed else EXIT_FAIL, {"pass": passed, "max_abs_z": float(np.max(np.abs(comp.z)))})


# ---------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; section names match commands, flags override it")
    common.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--units", choices=("lab", "natural"), default="lab")

    parser = argparse.ArgumentParser(prog="fluxspin", description="Spin-environment relaxation and flux-noise tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="tabulate F(t)")
    _add_kernel_args(p)
    p.add_argument("--grid", type=_grid_spec("time"), required=True, help="start:stop:points[:log|linear] in us")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("psd", parents=[common], help="tabulate the flux-noise PSD")
    _add_kernel_args(p)
    p.add_argument("--freq", type=_grid_spec("frequency"), required=True, help="start:stop:points[:log|linear] in Hz")
    p.add_argument("--phi-p", type=_quantity("flux"), default=34.8)
    p.add_argument("--i-p", type=_quantity("current"), default=2.0)
    p.add_argument("--temperature", type=_quantity("temperature"), default=12.5)
    p.add_argument("--method", choices=("closed", "quadrature"), default="closed")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic trace")
    _add_kernel_args(p)
    p.add_argument("--phi-p", type=_quantity("flux"), required=True)
    p.add_argument("--mode", choices=("polarization", "depolarization"), default="polarization")
    p.add_argument("--grid", type=_grid_spec("time"), required=True)
    p.add_argument("--fixed-time", type=_quantity("time"), default=0.0, help="tau_d (polarization) or tau_p (us)")
    p.add_argument("--sigma", type=_quantity("flux"), default=0.0)
    p.add_argument("--drift-amplitude", type=_quantity("flux"), default=0.0)
    p.add_argument("--drift-timescale", type=_quantity("time"), default=1e6)
    p.add_argument("--tau-a", type=_quantity("time"), default=0.0)
    p.add_argument("--tau-r", type=_quantity("time"), default=0.0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--temperature", type=_quantity("temperature"))
    p.add_argument("--device-id", default="synthetic")
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit a kernel to a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", type=_model, default="cutoff")
    p.add_argument("--init", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--t-max", type=_quantity("time"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cw", parents=[common], help="Curie-Weiss fit of phi_p(T)")
    p.add_argument("--data", help="CSV of T_mK,phi_p_uPhi0,sigma_uPhi0; omit to synthesize")
    p.add_argument("--amplitude", type=float, default=34.8 * 6.8, help="synthetic A (uPhi0 mK)")
    p.add_argument("--t-c", type=_quantity("temperature"), default=5.7)
    p.add_argument("--t-lo", type=_quantity("temperature"), default=12.5)
    p.add_argument("--t-hi", type=_quantity("temperature"), default=21.0)
    p.add_argument("--points", type=int, default=6)
    p.add_argument("--noise", type=float, default=0.03, help="relative noise of synthetic data")
    p.set_defaults(func=cmd_cw)

    p = sub.add_parser("estimate", parents=[common], help="surface density and cluster physics")
    p.add_argument("--i-p", type=_quantity("current"), default=2.0)
    p.add_argument("--loop-length", type=_quantity("length"), default=700.0)
    p.add_argument("--wire-width", type=_quantity("length"), default=1.0)
    p.add_argument("--spin", type=float, default=0.5)
    p.add_argument("--phi-p", type=_quantity("flux"), default=34.8)
    p.add_argument("--temperature", type=_quantity("temperature"), default=12.5)
    p.add_argument("--t-c", type=_quantity("temperature"), default=5.7)
    p.add_argument("--omega", type=_quantity("rate"), help="diffusion rate (Hz); enables the cluster solve")
    p.add_argument("--cw-report", help="cw.json to take the amplitude and T_c from")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("oracle", help="validate closed forms against stochastic oracles")
    osub = p.add_subparsers(dest="oracle", required=True)
    q = osub.add_parser("langevin", parents=[common], help="Langevin mode ensemble (model units)")
    q.add_argument("--modes", type=int, default=200)
    q.add_argument("--tau1", type=float, default=1.0)
    q.add_argument("--epsilon-p", type=float, default=1.0)
    q.add_argument("--temperature", type=float, default=1.0, help="energy, model units")
    q.add_argument("--ensemble", type=int, default=10_000)
    q.add_argument("--protocol", choices=("polarize", "depolarize", "steady"), default="polarize")
    q.add_argument("--t0", type=float, default=0.3)
    q.add_argument("--points", type=int, default=20)
    q.set_defaults(func=cmd_oracle_langevin)
    q = osub.add_parser("cluster", parents=[common], help="Poisson cluster ensemble (model units)")
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--mean-width", type=float, default=1.0)
    q.add_argument("--diffusion", type=float, default=1.0)
    q.add_argument("--modes", type=int, default=50)
    q.add_argument("--bootstrap", type=int, default=1000)
    q.add_argument("--omega-t-min", type=float, default=1e-3)
    q.add_argument("--omega-t-max", type=float, default=10.0)
    q.add_argument("--points", type=int, default=20)
    q.set_defaults(func=cmd_oracle_cluster)
    return parser


def _subparser(parser, argv_names):
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    p = action.choices[argv_names[0]]
    if len(argv_names) > 1 and argv_names[0] == "oracle":
        inner = next(a for a in p._actions if isinstance(a, argparse._SubParsersAction))
        p = inner.choices.get(argv_names[1], p)
    return p


def _apply_config(parser, argv):
    """Load ``--config`` and install its values as defaults of the chosen command."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        raise UsageError(f"cannot read config file {known.config}")
    commands = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices
    names = [a for a in argv if a in commands][:1]
    if not names:
        return
    if names[0] == "oracle":
        rest = argv[argv.index("oracle") + 1:]
        names += [a for a in rest if a in ("langevin", "cluster")][:1]
    target = _subparser(parser, names)
    section = " ".join(names) if names[0] == "oracle" else names[0]
    values = {}
    for sec in ("global", names[0], section):
        if cp.has_section(sec):
            values.update({k.replace("-", "_"): v for k, v in cp.items(sec)})
    # string defaults go through each option's type converter
    known_dests = {a.dest for a in target._actions}
    unknown = sorted(set(values) - known_dests)
    if unknown:
        raise UsageError(f"unknown config keys for {section}: {', '.join(unknown)}")
    for action in target._actions:
        if action.dest in values:
            action.default = values[action.dest]
            action.required = False


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "oracle":
            args.command = f"oracle_{args.oracle}"
        return args.func(args)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (NumericalError, RankDeficiencyError, InfeasibleError) as exc:
        print(f"fluxspin: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, FluxSpinError, OSError) as exc:
        print(f"fluxspin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
