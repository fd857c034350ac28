"""Command-line front end: config parsing, subcommand pipelines, artifacts.

Subcommands map to the figure-producing pipelines: resolve-bias (bias maps),
response (branch curves), critical (spinode + window), hysteresis (ramp
loops), s-curve, compare (two-bias sensing), sensitivity.  Every artifact
embeds the tool version, a hash of the parsed config, and the master seed;
numeric CSV fields are fixed at nine significant digits so reruns diff
clean.  Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from .measurement import AmplifierChain, charge_sensitivity
from .model import (
    BiasPoint,
    DeviceParams,
    InvalidArgumentError,
    NumericalError,
    dbm_to_photon_flux,
    resolve_bias,
)
from .protocol import SenseProtocol, compare_bias, s_curve
from .steady_state import (
    NoCriticalPointError,
    bistable_region,
    critical_point,
    phase_deg,
    photon_number_roots,
    response_curve,
)
from .model import Drive

TWO_PI = 2.0 * np.pi
FMT = "%.8e"  # nine significant digits


class ConfigError(ValueError):
    """Schema violation with a field-level diagnostic."""


# --- strict schema -----------------------------------------------------------

SCHEMA = {
    "device": {
        "e_j_hz": float, "e_c_hz": float, "omega_bare_hz": float,
        "phi_zp": float, "charge_cutoff": int,
        "kappa_int_hz": float, "kappa_ext_hz": float,
    },
    "bias": [{
        "label": str, "n_g": float, "phi_ext": float,
        "kappa_int_hz": float, "kappa_ext_hz": float,
    }],
    "bias_map": {
        "n_g_start": float, "n_g_stop": float, "n_g_count": int,
        "phi_ext_start": float, "phi_ext_stop": float, "phi_ext_count": int,
    },
    "drive": {"power_dbm": float, "frequency_hz": float, "detuning_hz": float},
    "protocol": {
        "f_ramp_hz": float, "t_r_s": float, "t_stab_s": float,
        "f_latch_hz": float, "t_acq_s": float, "t_down_s": float, "n_tot": int,
    },
    "noise": {"n_eff": float, "enabled": bool, "added_noise_density": float},
    "run": {"seed": int, "out_dir": str, "dt_s": float, "n_tot": int,
            "threads": int},
    "response": {
        "powers_dbm": [float], "detuning_start_hz": float,
        "detuning_stop_hz": float, "count": int,
    },
    "hysteresis": {
        "delta_hz": float, "p_min_dbm": float, "p_max_dbm": float,
        "t_ramp_s": [float], "repetitions": int, "t_acq_per_point_s": float,
    },
    "scurve": {
        "detuning_start_hz": float, "detuning_stop_hz": float, "count": int,
    },
    "compare": {
        "bias_a": str, "bias_b": str, "f_start_hz": float,
        "f_stop_hz": float, "count": int, "t_acq_sweep_s": [float],
    },
    "sensitivity": {"delta_ng_e": float, "t_acq_s": float},
}


def _check_value(path: str, value, spec):
    if isinstance(spec, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        for key, sub in value.items():
            if key not in spec:
                raise ConfigError(f"{path}.{key}: unknown key")
            _check_value(f"{path}.{key}", sub, spec[key])
        return
    if isinstance(spec, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected an array")
        for i, item in enumerate(value):
            _check_value(f"{path}[{i}]", item, spec[0])
        return
    if spec is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return
    if spec is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return
    if spec is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return
    if spec is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return
    raise AssertionError(f"bad schema node at {path}")


def validate_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown section")
        _check_value(key, value, SCHEMA[key])
    if "device" not in raw:
        raise ConfigError("device: required section missing")
    for field in ("e_j_hz", "e_c_hz", "omega_bare_hz", "phi_zp"):
        if field not in raw["device"]:
            raise ConfigError(f"device.{field}: required key missing")
    return raw


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}")
    return validate_config(raw)


# --- config -> domain objects ------------------------------------------------

def build_device(cfg: dict) -> DeviceParams:
    dev = cfg["device"]
    return DeviceParams(
        e_j=dev["e_j_hz"],
        e_c=dev["e_c_hz"],
        omega_bare=TWO_PI * dev["omega_bare_hz"],
        phi_zp=dev["phi_zp"],
        charge_cutoff=dev.get("charge_cutoff", 10),
        kappa_int=TWO_PI * dev.get("kappa_int_hz", 0.5e6),
        kappa_ext=TWO_PI * dev.get("kappa_ext_hz", 1.0e6),
    )


def build_bias_configs(cfg: dict):
    device = build_device(cfg)
    out = {}
    for i, entry in enumerate(cfg.get("bias", [])):
        label = entry.get("label", str(i))
        bias = BiasPoint(entry["n_g"], entry["phi_ext"])
        ki = entry.get("kappa_int_hz")
        ke = entry.get("kappa_ext_hz")
        out[label] = (bias, resolve_bias(
            device, bias,
            kappa_int=None if ki is None else TWO_PI * ki,
            kappa_ext=None if ke is None else TWO_PI * ke))
    return out


def build_protocol(cfg: dict, n_tot_override: int | None = None) -> SenseProtocol:
    p = cfg.get("protocol", {})
    kwargs = {}
    if "f_ramp_hz" in p:
        kwargs["f_ramp"] = TWO_PI * p["f_ramp_hz"]
    if "f_latch_hz" in p:
        kwargs["f_latch"] = TWO_PI * p["f_latch_hz"]
    for src, dst in (("t_r_s", "t_r"), ("t_stab_s", "t_stab"),
                     ("t_acq_s", "t_acq"), ("t_down_s", "t_down"),
                     ("n_tot", "n_tot")):
        if src in p:
            kwargs[dst] = p[src]
    if n_tot_override is not None:
        kwargs["n_tot"] = n_tot_override
    return SenseProtocol(**kwargs)


def build_noise(cfg: dict) -> dyn.NoiseModel:
    n = cfg.get("noise", {})
    if not n.get("enabled", True):
        return dyn.NoiseModel.off()
    return dyn.NoiseModel(n_eff=n.get("n_eff", 0.5))


def build_chain(cfg: dict) -> AmplifierChain:
    n = cfg.get("noise", {})
    return AmplifierChain(added_noise_density=n.get("added_noise_density", 4.67))


# --- artifact writing --------------------------------------------------------

def _header(cfg_hash: str, seed: int, subcommand: str) -> str:
    return (f"# ccpt-sim {__version__} | subcommand {subcommand} | "
            f"config {cfg_hash} | seed {seed}\n")


def write_csv(path: Path, header: str, columns: list[str],
              rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(
                (FMT % v) if isinstance(v, (int, float, np.floating))
                and not isinstance(v, bool) else str(v)
                for v in row) + "\n")


def write_json(path: Path, header_info: dict, payload: dict) -> None:
    doc = {"_meta": header_info, **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_resolve_bias(cfg, out_dir, seed, cfg_hash, args):
    device = build_device(cfg)
    rows = []
    points = []
    if "bias_map" in cfg:
        bm = cfg["bias_map"]
        ngs = np.linspace(bm["n_g_start"], bm["n_g_stop"], bm["n_g_count"])
        phis = np.linspace(bm["phi_ext_start"], bm["phi_ext_stop"],
                           bm["phi_ext_count"])
        points = [(ng, phi) for ng in ngs for phi in phis]
    for entry in cfg.get("bias", []):
        points.append((entry["n_g"], entry["phi_ext"]))
    if not points:
        raise ConfigError("resolve-bias needs a bias list or bias_map section")
    import warnings as _w
    for ng, phi in points:
        with _w.catch_warnings():
            _w.simplefilter("ignore")
            bias = BiasPoint(ng, phi)
            c = resolve_bias(device, bias)
        rows.append([ng, phi, c.omega0 / TWO_PI, c.kerr / TWO_PI,
                     c.kappa_int / TWO_PI, c.kappa_ext / TWO_PI,
                     c.kappa_tot / TWO_PI])
    path = out_dir / f"resolve_bias_{cfg_hash}.csv"
    write_csv(path, _header(cfg_hash, seed, "resolve-bias"),
              ["n_g", "phi_ext", "f0_hz", "kerr_hz", "kappa_int_hz",
               "kappa_ext_hz", "kappa_tot_hz"], rows)
    print(f"wrote {path}")
    return [path]


def _single_bias_config(cfg):
    configs = build_bias_configs(cfg)
    if not configs:
        raise ConfigError("bias: need at least one bias entry")
    label = next(iter(configs))
    return label, configs[label][1]


def cmd_response(cfg, out_dir, seed, cfg_hash, args):
    if "response" not in cfg:
        raise ConfigError("response: required section missing")
    label, config = _single_bias_config(cfg)
    r = cfg["response"]
    grid = TWO_PI * np.linspace(r["detuning_start_hz"], r["detuning_stop_hz"],
                                r["count"])
    paths = []
    for i, p_dbm in enumerate(r["powers_dbm"]):
        n_in = dbm_to_photon_flux(p_dbm, config.omega0)
        rows = []
        for delta, sols in response_curve(config, n_in, grid):
            for sol in sols:
                rows.append([delta / TWO_PI, sol.branch_label, sol.n,
                             abs(sol.s11), phase_deg(sol.s11),
                             str(sol.stable).lower()])
        path = out_dir / f"response_{cfg_hash}_p{i}.csv"
        header = _header(cfg_hash, seed, "response") + \
            f"# bias {label} | p_in_dbm {p_dbm}\n"
        write_csv(path, header,
                  ["delta_hz", "branch", "n", "s11_mag", "s11_phase_deg",
                   "stable"], rows)
        paths.append(path)
        print(f"wrote {path}")
    return paths


def cmd_critical(cfg, out_dir, seed, cfg_hash, args):
    label, config = _single_bias_config(cfg)
    drive = cfg.get("drive", {})
    cp = critical_point(config)
    payload = {
        "bias": label,
        "delta_c_hz": cp.delta_c / TWO_PI,
        "p_c_watts": cp.p_c,
        "p_c_dbm": 10 * np.log10(cp.p_c) + 30,
        "n_in_c_per_s": cp.n_in_c,
    }
    if "power_dbm" in drive:
        n_in = dbm_to_photon_flux(drive["power_dbm"], config.omega0)
        region = bistable_region(config, n_in)
        payload["drive_power_dbm"] = drive["power_dbm"]
        payload["bistable"] = bool(region.exists)
        if region.exists:
            payload["delta_lower_hz"] = region.delta_lower / TWO_PI
            payload["delta_upper_hz"] = region.delta_upper / TWO_PI
    path = out_dir / f"critical_{cfg_hash}.json"
    write_json(path, {"tool": f"ccpt-sim {__version__}", "config": cfg_hash,
                      "seed": seed, "subcommand": "critical"}, payload)
    print(f"wrote {path}")
    return [path]


def cmd_hysteresis(cfg, out_dir, seed, cfg_hash, args):
    if "hysteresis" not in cfg:
        raise ConfigError("hysteresis: required section missing")
    label, config = _single_bias_config(cfg)
    h = cfg["hysteresis"]
    noise = build_noise(cfg)
    paths = []
    areas = []
    for i, t_ramp in enumerate(h["t_ramp_s"]):
        res = dyn.hysteresis_ramp(
            config, TWO_PI * h["delta_hz"], h["p_min_dbm"], h["p_max_dbm"],
            t_ramp, h.get("repetitions", 500), noise,
            h["t_acq_per_point_s"], seed=seed, dt=args.dt)
        rows = [[p, f, r] for p, f, r in
                zip(res.p_dbm, res.phase_fwd_deg, res.phase_rev_deg)]
        path = out_dir / f"hysteresis_{cfg_hash}_t{i}.csv"
        header = _header(cfg_hash, seed, "hysteresis") + \
            f"# bias {label} | t_ramp_s {t_ramp:.6e} | " \
            f"loop_area_deg_dbm {res.loop_area_deg_dbm:.6e}\n"
        write_csv(path, header, ["p_dbm", "phase_fwd_deg", "phase_rev_deg"],
                  rows)
        paths.append(path)
        areas.append(res.loop_area_deg_dbm)
        print(f"wrote {path}")
    path = out_dir / f"hysteresis_{cfg_hash}_areas.json"
    write_json(path, {"tool": f"ccpt-sim {__version__}", "config": cfg_hash,
                      "seed": seed, "subcommand": "hysteresis"},
               {"t_ramp_s": list(h["t_ramp_s"]), "loop_area_deg_dbm": areas})
    paths.append(path)
    print(f"wrote {path}")
    return paths


def cmd_scurve(cfg, out_dir, seed, cfg_hash, args):
    if "scurve" not in cfg:
        raise ConfigError("scurve: required section missing")
    if "drive" not in cfg or "power_dbm" not in cfg["drive"]:
        raise ConfigError("drive.power_dbm: required for s-curve")
    sc = cfg["scurve"]
    run_cfg = cfg.get("run", {})
    proto = build_protocol(cfg, run_cfg.get("n_tot"))
    noise = build_noise(cfg)
    chain = build_chain(cfg)
    grid = TWO_PI * np.linspace(sc["detuning_start_hz"],
                                sc["detuning_stop_hz"], sc["count"])
    paths = []
    summary_rows = []
    for label, (bias, config) in build_bias_configs(cfg).items():
        run = s_curve(config, cfg["drive"]["power_dbm"], grid, proto, noise,
                      chain, master_seed=seed, threads=args.threads,
                      dt=args.dt)
        fit = run.scurve.fit
        rows = []
        for delta, p in zip(grid, run.scurve.p_high):
            from .measurement import sigmoid
            p_fit = (sigmoid(np.array([delta]), fit.delta0, fit.gamma)[0]
                     if fit else float("nan"))
            rows.append([delta / TWO_PI, p, p_fit])
        path = out_dir / f"scurve_{cfg_hash}_{label}.csv"
        header = _header(cfg_hash, seed, "s-curve")
        if fit:
            header += (f"# bias {label} | delta0_hz {fit.delta0 / TWO_PI:.6e} "
                       f"| gamma_hz {fit.gamma / TWO_PI:.6e}\n")
        write_csv(path, header, ["delta_hz", "p_high", "p_high_fit"], rows)
        paths.append(path)
        print(f"wrote {path}")
        if fit:
            summary_rows.append([label, bias.n_g, bias.phi_ext,
                                 config.kerr / TWO_PI,
                                 fit.delta0 / TWO_PI, fit.gamma / TWO_PI])
    if summary_rows:
        path = out_dir / f"scurve_{cfg_hash}_summary.csv"
        write_csv(path, _header(cfg_hash, seed, "s-curve"),
                  ["label", "n_g", "phi_ext", "kerr_hz", "delta0_hz",
                   "gamma_hz"], summary_rows)
        paths.append(path)
        print(f"wrote {path}")
    if args.dump_trajectory:
        _, config = _single_bias_config(cfg)
        paths.append(dump_trajectory(cfg, out_dir, seed, cfg_hash, args,
                                     config, float(np.median(grid))))
    return paths


def cmd_compare(cfg, out_dir, seed, cfg_hash, args):
    if "compare" not in cfg:
        raise ConfigError("compare: required section missing")
    if "drive" not in cfg or "power_dbm" not in cfg["drive"]:
        raise ConfigError("drive.power_dbm: required for compare")
    comp = cfg["compare"]
    configs = build_bias_configs(cfg)
    for key in ("bias_a", "bias_b"):
        if comp[key] not in configs:
            raise ConfigError(f"compare.{key}: no bias labeled {comp[key]!r}")
    config_a = configs[comp["bias_a"]][1]
    config_b = configs[comp["bias_b"]][1]
    run_cfg = cfg.get("run", {})
    proto = build_protocol(cfg, run_cfg.get("n_tot"))
    noise = build_noise(cfg)
    chain = build_chain(cfg)
    grid = TWO_PI * np.linspace(comp["f_start_hz"], comp["f_stop_hz"],
                                comp["count"])
    sweep = tuple(comp.get("t_acq_sweep_s", ()))
    res = compare_bias(config_a, config_b, cfg["drive"]["power_dbm"], grid,
                       proto, noise, chain, master_seed=seed,
                       threads=args.threads,
                       t_acq_sweep=sweep if sweep else None, dt=args.dt)
    paths = []
    hdr = _header(cfg_hash, seed, "compare")
    for tag, curve in (("a", res.scurve_a), ("b", res.scurve_b)):
        rows = [[w / TWO_PI, p] for w, p in zip(curve.detunings, curve.p_high)]
        path = out_dir / f"compare_{cfg_hash}_scurve_{tag}.csv"
        write_csv(path, hdr, ["f_d_hz", "p_high"], rows)
        paths.append(path)
        print(f"wrote {path}")
    rows = [[c, int(na), int(nb)] for c, na, nb in
            zip(res.hist_a.bin_centers, res.hist_a.counts, res.hist_b.counts)]
    path = out_dir / f"compare_{cfg_hash}_hist.csv"
    write_csv(path, hdr + f"# phi_th_deg {res.fidelity.phi_th:.6e}\n",
              ["phase_deg_bin_center", "count_a", "count_b"], rows)
    paths.append(path)
    print(f"wrote {path}")
    payload = {
        "power_dbm": cfg["drive"]["power_dbm"],
        "contrast": res.contrast,
        "f_opt_hz": res.omega_opt / TWO_PI,
        "phi_th_deg": res.fidelity.phi_th,
        "f_a": res.fidelity.f_a,
        "f_b": res.fidelity.f_b,
        "f_avg": res.fidelity.f_avg,
        "separation_deg": res.fidelity.separation,
        "gauss_width_deg": res.fidelity.gauss_width,
        "low_distinguishability": res.low_distinguishability,
        "n_high_a": res.n_high_a,
        "n_high_b": res.n_high_b,
        "kerr_a_hz": config_a.kerr / TWO_PI,
        "kerr_b_hz": config_b.kerr / TWO_PI,
        "fidelity_vs_t_acq": [
            {"t_acq_s": t, "f_avg": rep.f_avg, "f_a": rep.f_a, "f_b": rep.f_b}
            for t, rep in res.fidelity_vs_t_acq
        ],
        "n_tot": proto.n_tot,
        "config_echo": cfg,
    }
    path = out_dir / f"compare_{cfg_hash}_fidelity.json"
    write_json(path, {"tool": f"ccpt-sim {__version__}", "config": cfg_hash,
                      "seed": seed, "subcommand": "compare"}, payload)
    paths.append(path)
    print(f"wrote {path}")
    if args.dump_trajectory:
        paths.append(dump_trajectory(cfg, out_dir, seed, cfg_hash, args,
                                     config_a,
                                     res.omega_opt - config_a.omega0))
    return paths


def cmd_sensitivity(cfg, out_dir, seed, cfg_hash, args):
    if "sensitivity" not in cfg:
        raise ConfigError("sensitivity: required section missing")
    s = cfg["sensitivity"]
    value = charge_sensitivity(s["delta_ng_e"], s["t_acq_s"])
    print(f"{value:.4e} e/√Hz")
    path = out_dir / f"sensitivity_{cfg_hash}.json"
    write_json(path, {"tool": f"ccpt-sim {__version__}", "config": cfg_hash,
                      "seed": seed, "subcommand": "sensitivity"},
               {"delta_ng_e": s["delta_ng_e"], "t_acq_s": s["t_acq_s"],
                "sensitivity_e_per_rthz": value})
    print(f"wrote {path}")
    return [path]


def dump_trajectory(cfg, out_dir, seed, cfg_hash, args, config,
                    final_detuning: float) -> Path:
    """One noise-free sensing pulse, sampled to CSV for inspection."""
    run_cfg = cfg.get("run", {})
    proto = build_protocol(cfg, run_cfg.get("n_tot"))
    n_in = dbm_to_photon_flux(cfg["drive"]["power_dbm"],
                              config.omega0 + final_detuning)
    env = proto.envelope(final_detuning, np.sqrt(n_in))
    dt = args.dt if args.dt else dyn.default_dt(config)
    traj = dyn.integrate(config, env, dyn.NoiseModel.off(), dt)
    _, ain = env.sample(traj.times)
    beta = ain - np.sqrt(config.kappa_ext) * traj.alpha
    with np.errstate(invalid="ignore"):
        phase = np.degrees(np.angle(np.conj(beta) * ain))
        phase[ain == 0] = np.nan
    rows = [[t, a.real, a.imag, abs(a) ** 2, p]
            for t, a, p in zip(traj.times, traj.alpha, phase)]
    path = out_dir / f"trajectory_{cfg_hash}.csv"
    write_csv(path, _header(cfg_hash, seed, "trajectory"),
              ["t_s", "re_alpha", "im_alpha", "n", "phase_out_deg"], rows)
    print(f"wrote {path}")
    return path


COMMANDS = {
    "resolve-bias": cmd_resolve_bias,
    "response": cmd_response,
    "critical": cmd_critical,
    "hysteresis": cmd_hysteresis,
    "s-curve": cmd_scurve,
    "compare": cmd_compare,
    "sensitivity": cmd_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccpt",
        description="Kerr-bistable cCPT charge-sensing simulator")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides run.seed)")
    parser.add_argument("--out-dir", default=None,
                        help="artifact directory (overrides run.out_dir)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for Monte Carlo sweeps")
    parser.add_argument("--dt", type=float, default=None,
                        help="integrator step override in seconds")
    parser.add_argument("--dump-trajectory", action="store_true",
                        help="also write one noise-free sensing trajectory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    run_cfg = cfg.get("run", {})
    seed = args.seed if args.seed is not None else run_cfg.get("seed", 0)
    out_dir = Path(args.out_dir if args.out_dir is not None
                   else run_cfg.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    args.threads = (args.threads if args.threads is not None
                    else run_cfg.get("threads", 1))
    if args.dt is None:
        args.dt = run_cfg.get("dt_s")
    cfg_hash = config_hash(cfg)
    try:
        COMMANDS[args.subcommand](cfg, out_dir, seed, cfg_hash, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (NoCriticalPointError, NumericalError, InvalidArgumentError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
