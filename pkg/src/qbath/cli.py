"""``qbath`` command line: sweeps, fringe tables, oracle runs, scattering tables.

All quantities default to reduced units (hbar = kB = m = Omega = 1).
Exit codes: 0 success, 1 tolerance failure, 2 usage error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import datetime
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import equilibrium, finite_bath, interferometer, spectral
from .errors import DomainError, QBathError

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """12 significant digits, scientific notation."""
    if isinstance(v, complex):
        return f"{v.real:.11e}{v.imag:+.11e}j"
    return f"{v:.11e}"


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (points up to less than half a step past stop) or ``a,b,c``."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if not step > 0 or stop < start:
                raise UsageError(f"bad grid {text!r}: need step > 0 and stop >= start")
            n = int(math.ceil((stop - start) / step - 0.5))
            values = [start + i * step for i in range(n + 1)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if not values:
        raise UsageError("grid is empty")
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise UsageError(f"grid {text!r} must contain finite values >= 0")
    if any(b <= a for a, b in zip(values[:-1], values[1:])):
        raise UsageError(f"grid {text!r} must be strictly increasing")
    return values


@dataclass(frozen=True)
class EnvSpec:
    """Picklable description of an environment; for tables ``eta`` scales mu."""

    kind: str
    eta: float = 0.0
    omega_c: float = 100.0
    e: float = 0.0
    l: float = 1.0
    C: float = 1.0
    R: float = 1.0
    table: str = ""

    def build(self, eta=None):
        eta = self.eta if eta is None else eta
        if self.kind == "ohmic":
            return spectral.OhmicSharp(eta, self.omega_c)
        if self.kind == "drude":
            return spectral.Drude(eta, self.omega_c)
        if self.kind == "rc":
            return spectral.RCCircuit(self.e, self.l, self.C, self.R)
        if self.kind == "tabulated":
            tab = spectral.Tabulated.from_csv(self.table)
            return spectral.Tabulated(tab.omega, tab.values * eta)
        raise UsageError(f"unknown environment {self.kind!r}")


def _env_spec(args, eta=None) -> EnvSpec:
    if args.env == "tabulated" and not args.table:
        raise UsageError("--env tabulated needs --table FILE")
    return EnvSpec(kind=args.env, eta=args.eta if eta is None else eta, omega_c=args.omega_c,
                   e=args.rc_e, l=args.rc_l, C=args.rc_C, R=args.rc_R, table=args.table or "")


def _particle(args) -> spectral.ParticleParams:
    return spectral.ParticleParams(m=args.m, Omega=args.Omega, hbar=args.hbar, kB=args.kB)


def _include_pole(args):
    return {"auto": None, "yes": True, "no": False}[args.include_pole]


def _header(out, args, stamp_fields):
    fields = " ".join(f"{k}={v}" for k, v in stamp_fields)
    out.write(f"# qbath {args.command} {fields}\n")
    if args.stamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        out.write(f"# generated {now} on {platform.node()}\n")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def sweep_point(spec: EnvSpec, particle, T: float, eta: float, include_pole):
    """One sweep row; returns ``(values, error message or None)``."""
    try:
        env = spec.build(eta)
        st = equilibrium.equilibrium_state(env, particle, T, include_pole)
        xi = interferometer.coherence_length(st.T_eff, st.m_eff, particle)
        return [T, eta, st.q2, st.p2, st.T_eff, st.m_eff, st.entropy, xi], None
    except (QBathError, ValueError, ArithmeticError) as exc:
        return [T, eta] + [math.nan] * 6, f"T={T!r} eta={eta!r}: {type(exc).__name__}: {exc}"


def _star_point(a):
    return sweep_point(*a)


def cmd_sweep(args) -> int:
    particle = _particle(args)
    T_grid = parse_grid(args.t_grid)
    if args.env == "rc":
        spec = _env_spec(args, eta=0.0)
        eta_grid = [spec.build().eta]
    else:
        eta_grid = parse_grid(args.eta_grid)
        spec = _env_spec(args, eta=eta_grid[0])
    points = [(spec, particle, T, eta, _include_pole(args)) for T in T_grid for eta in eta_grid]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_star_point, points, chunksize=max(1, len(points) // (4 * args.workers))))
    else:
        results = [_star_point(p) for p in points]
    out, close = _open_out(args.output)
    try:
        _header(out, args, [("env", args.env), ("omega_c", args.omega_c), ("include_pole", args.include_pole)])
        out.write("T,eta,q2,p2,T_eff,m_eff,entropy,xi\n")
        for row, _ in results:
            out.write(",".join(fmt(v) for v in row) + "\n")
    finally:
        if close:
            out.close()
    errors = [msg for _, msg in results if msg]
    for msg in errors:
        print(f"qbath sweep: {msg}", file=sys.stderr)
    return EXIT_NUMERICAL if errors else EXIT_OK


def _junction(args, particle) -> interferometer.Junction:
    return interferometer.Junction(x=args.x, alpha=args.alpha, epsilon=args.epsilon, k=args.k,
                                   n_incident=args.n_incident, n_channels=args.n_channels,
                                   particle=particle, contact=args.contact)


def cmd_fringes(args) -> int:
    particle = _particle(args)
    env = _env_spec(args).build()
    st = equilibrium.equilibrium_state(env, particle, args.T, _include_pole(args))
    sigma = equilibrium.density_matrix(st.q2, st.p2, particle)
    junction = _junction(args, particle)
    if args.high_energy:
        tau = interferometer.tau_high_energy(junction)
    else:
        sol = interferometer.scattering_solve(junction)
        c = sol.c_plus[junction.n_incident]
        if c == 0:
            raise DomainError("incident channel does not couple to the contacts at this x")
        tau = sol.s1 / c
    phi = interferometer.uniform_phase_grid(args.n_phi)
    pat = interferometer.fringe_pattern(sigma, junction, tau, phi)
    out, close = _open_out(args.output)
    try:
        _header(out, args, [("env", args.env), ("T", args.T), ("x", args.x), ("k", args.k)])
        out.write(f"# P1={fmt(pat.P1)},P2={fmt(pat.P2)},C={fmt(pat.contrast)},xi={fmt(pat.xi)}\n")
        out.write("phi,P\n")
        for p, v in zip(pat.phi_grid, pat.intensity):
            out.write(f"{fmt(p)},{fmt(v)}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def _oracle_moments(env, particle, N, T, strategy, omega_min):
    band = None
    if omega_min is not None:
        lo, hi = finite_bath._default_band(env, particle)
        band = (omega_min, hi)
    bath = finite_bath.discretize(env, particle, N, strategy=strategy, band=band)
    modes = finite_bath.decompose(finite_bath.build_matrix(bath))
    return finite_bath.exact_moments(modes, particle, T)


def cmd_oracle(args) -> int:
    if args.N < 100:
        raise UsageError("oracle needs N >= 100")
    particle = _particle(args)
    env = _env_spec(args).build()
    st = equilibrium.equilibrium_state(env, particle, args.T, _include_pole(args))
    print(f"continuum  q2={fmt(st.q2)}  p2={fmt(st.p2)}")
    devs = None
    for n in (args.N // 4, args.N // 2, args.N):
        q2, p2 = _oracle_moments(env, particle, n, args.T, args.strategy, args.omega_min)
        devs = (abs(q2 / st.q2 - 1), abs(p2 / st.p2 - 1))
        print(f"N={n:<6d} q2={fmt(q2)}  p2={fmt(p2)}  dev_q2={devs[0]:.3e}  dev_p2={devs[1]:.3e}")
    if args.sensitivity:
        lo = args.omega_min if args.omega_min is not None else finite_bath._default_band(env, particle)[0]
        q2, p2 = _oracle_moments(env, particle, args.N, args.T, args.strategy, 10 * lo)
        print(f"omega_min x10: dev_q2={abs(q2 / st.q2 - 1):.3e}  dev_p2={abs(p2 / st.p2 - 1):.3e}")
    ok = devs[0] < 0.01 and devs[1] < 0.01
    print("PASS" if ok else "FAIL", "(tolerance 1%)")
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_scatter(args) -> int:
    particle = _particle(args)
    junction = _junction(args, particle)
    sol = interferometer.scattering_solve(junction)
    out, close = _open_out(args.output)
    try:
        _header(out, args, [("x", args.x), ("alpha", args.alpha), ("epsilon", args.epsilon), ("k", args.k),
                            ("n_incident", args.n_incident), ("contact", args.contact)])
        out.write(f"# s1={fmt(sol.s1)},s2={fmt(sol.s2)},R={fmt(sol.R)},Z={fmt(sol.Z)},"
                  f"channels_summed={sol.n_channels}\n")
        out.write("n,Re(t),Im(t),Re(r),Im(r),k_n\n")
        for n in range(min(junction.n_channels, sol.n_channels)):
            kn = sol.k_n[n]
            ks = fmt(kn.real) if kn.imag == 0 else f"{kn.imag:.11e}j"
            t, r = sol.t[n], sol.r[n]
            out.write(f"{n},{fmt(t.real)},{fmt(t.imag)},{fmt(r.real)},{fmt(r.imag)},{ks}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_bath(args) -> int:
    particle = _particle(args)
    env = _env_spec(args).build()
    u = np.array(parse_grid(args.u_grid))
    if np.any(u <= 0):
        raise UsageError("u grid must be positive")
    out, close = _open_out(args.output)
    try:
        _header(out, args, [("env", args.env), ("omega_c", args.omega_c)])
        cols = "u,mu,Gamma,Delta" + (",Delta_pv" if args.quadrature else "")
        out.write(cols + "\n")
        for x in u:
            row = [x, float(env.mu(x)), float(spectral.gamma(env, particle, x)),
                   float(spectral.delta_exact(env, particle, x))]
            if args.quadrature:
                row.append(spectral.delta(env, particle, x))
            out.write(",".join(fmt(v) for v in row) + "\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def _add_particle(p):
    g = p.add_argument_group("particle (reduced units by default)")
    g.add_argument("--m", type=float, default=1.0)
    g.add_argument("--Omega", type=float, default=1.0)
    g.add_argument("--hbar", type=float, default=1.0)
    g.add_argument("--kB", type=float, default=1.0)


def _add_env(p, eta_grid=False):
    g = p.add_argument_group("environment")
    g.add_argument("--env", choices=["ohmic", "drude", "rc", "tabulated"], default="ohmic")
    if eta_grid:
        g.add_argument("--eta", dest="eta_grid", default="0.1",
                       help="coupling grid (scale factor for --env tabulated)")
    else:
        g.add_argument("--eta", type=float, default=0.1)
    g.add_argument("--omega-c", type=float, default=100.0)
    g.add_argument("--rc-e", type=float, default=0.0)
    g.add_argument("--rc-l", type=float, default=1.0)
    g.add_argument("--rc-C", type=float, default=1.0)
    g.add_argument("--rc-R", type=float, default=1.0)
    g.add_argument("--table", help="CSV file with header omega,mu")
    g.add_argument("--include-pole", choices=["auto", "yes", "no"], default="auto")


def _add_junction(p):
    g = p.add_argument_group("junction")
    g.add_argument("--x", type=float, default=1.0)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--epsilon", type=float, default=0.5)
    g.add_argument("--k", type=float, default=7.5)
    g.add_argument("--n-incident", type=int, default=0)
    g.add_argument("--n-channels", type=int, default=64)
    g.add_argument("--contact", choices=["gaussian", "point"], default="gaussian")


def build_parser():
    parser = argparse.ArgumentParser(prog="qbath", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("-o", "--output", default="-")
        p.add_argument("--stamp", action="store_true", help="add time and host to the output")
        subs[name] = p
        return p

    p = add("sweep", cmd_sweep, "moments and derived parameters over (T, eta) grids")
    _add_env(p, eta_grid=True)
    _add_particle(p)
    p.add_argument("--t-grid", default="0:5:0.5")
    p.add_argument("--workers", type=int, default=1)

    p = add("fringes", cmd_fringes, "fringe intensity P(phi) for one junction and bath")
    _add_env(p)
    _add_particle(p)
    _add_junction(p)
    p.add_argument("--T", type=float, default=0.0)
    p.add_argument("--n-phi", type=int, default=1024)
    p.add_argument("--high-energy", action="store_true", help="use the factorised high-energy amplitude")

    p = add("oracle", cmd_oracle, "continuum moments against finite-bath diagonalisation")
    _add_env(p)
    _add_particle(p)
    p.add_argument("--N", type=int, default=4000)
    p.add_argument("--T", type=float, default=0.0)
    p.add_argument("--strategy", choices=["log", "uniform"], default="log")
    p.add_argument("--omega-min", type=float, default=None)
    p.add_argument("--no-sensitivity", dest="sensitivity", action="store_false")

    p = add("scatter", cmd_scatter, "per-channel junction amplitudes")
    _add_particle(p)
    _add_junction(p)

    p = add("bath", cmd_bath, "tabulate mu, Gamma and Delta")
    _add_env(p)
    _add_particle(p)
    p.add_argument("--u-grid", default="0.1:10:0.1")
    p.add_argument("--quadrature", action="store_true", help="add the principal-value quadrature column")
    return parser, subs


def _read_config(path) -> dict:
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg[key.lstrip("-").replace("-", "_")] = value
    return cfg


def _apply_config(sub, cfg):
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = "eta_grid" if key == "eta" and "eta_grid" in actions else key
        if dest not in actions:
            raise UsageError(f"config key {key!r} is not an option of this command")
        action = actions[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            flag = value.lower() in ("1", "true", "yes", "on")
            defaults[dest] = flag
        else:
            defaults[dest] = action.type(value) if action.type else value
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(subs[args.command], _read_config(args.config))
            args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, DomainError, OSError) as exc:
        print(f"qbath: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QBathError, ArithmeticError, ValueError) as exc:
        print(f"qbath: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
