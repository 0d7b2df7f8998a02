"""Command-line front end: simulation, reconstruction, metrics, plots.

One JSON config file drives a run; flags override single values.  Every
artifact directory receives a run.json sidecar with the hash of the fully
resolved config so outputs can be traced to their inputs.  Exit codes:
0 success, 2 validation failure, 3 cost cap exceeded, 4 numerical stage
failure.  Errors are reported as one JSON object on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import persist
from .fields import Phantom, ScalarField, eval_field, make_illumination, make_phantom
from .forward import (CostCapError, SeparatedData, SinogramData,
                      separate_data, simulate_fourier_full,
                      simulate_separated_2d, simulate_separated_3d)
from .recon import fixed_point_q3d, metrics, recon2d, recon3d

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COST_CAP = 3
EXIT_NUMERIC = 4

MODES = (
    "phantom", "forward2d", "forward3d", "forward-full",
    "recon2d", "recon3d", "fixed-point", "metrics", "plot",
)

_COMMON_KEYS = {"mode", "out", "threads", "seed"}
_MODE_KEYS = {
    "phantom": {"phantom"},
    "forward2d": {"phantom", "phantom_dir", "dt", "n_time", "ladder_offsets",
                  "noise_sigma"},
    "forward3d": {"phantom", "phantom_dir", "dt", "n_time", "ladder_offsets",
                  "noise_sigma"},
    "forward-full": {"phantom", "phantom_dir", "illumination", "dt", "n_time",
                     "eps", "dk", "k_max", "cost_cap", "separate"},
    "recon2d": {"data_dir", "phantom_dir", "mean_variant", "t_margin"},
    "recon3d": {"data_dir", "phantom_dir", "mean_variant", "t_margin"},
    "fixed-point": {"data_dir", "phantom_dir", "max_iters", "tol"},
    "metrics": {"recon_field", "truth_field"},
    "plot": {"inputs"},
}
_PHANTOM_KEYS = {"dim", "grid", "b_radius", "omega_center", "omega_radius",
                 "detector_count", "f0_bumps", "f1_bumps", "q_bumps",
                 "q_max", "delta_margin"}
_ILLUM_KEYS = {"r_count", "theta_count", "r_max", "slab_width"}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, err):
        self.stage = stage
        self.err = err
        super().__init__(f"stage {stage} failed: {err}")


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(config, key, value):
    parts = key.split(".")
    node = config
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def _check_keys(mapping, allowed, where):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def validate_config(config):
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    mode = config.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    _check_keys(config, _COMMON_KEYS | _MODE_KEYS[mode], "config")
    if not config.get("out"):
        raise ConfigError("an output directory is required (out or --out)")
    threads = config.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise ConfigError("threads must be a positive integer")
    seed = config.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    if "phantom" in config:
        if not isinstance(config["phantom"], dict):
            raise ConfigError("phantom must be an object")
        _check_keys(config["phantom"], _PHANTOM_KEYS, "phantom")
    if "illumination" in config:
        if not isinstance(config["illumination"], dict):
            raise ConfigError("illumination must be an object")
        _check_keys(config["illumination"], _ILLUM_KEYS, "illumination")
    if mode != "phantom" and mode.startswith("forward"):
        if ("phantom" in config) == ("phantom_dir" in config):
            raise ConfigError("give exactly one of phantom, phantom_dir")
    if mode == "phantom" and "phantom" not in config:
        raise ConfigError("phantom mode needs a phantom object")
    if mode in ("recon2d", "recon3d", "fixed-point"):
        for need in ("data_dir", "phantom_dir"):
            if need not in config:
                raise ConfigError(f"{mode} mode needs {need}")
    if mode == "metrics":
        for need in ("recon_field", "truth_field"):
            if need not in config:
                raise ConfigError(f"metrics mode needs {need}")
    if mode == "plot" and not config.get("inputs"):
        raise ConfigError("plot mode needs a non-empty inputs list")
    return config


def _load_phantom(config):
    if "phantom" in config:
        return make_phantom(config["phantom"])
    return Phantom.load(config["phantom_dir"])


def _write_run_sidecar(out_dir, config):
    os.makedirs(out_dir, exist_ok=True)
    payload = {"config_hash": persist.config_hash(config), "config": config}
    persist.write_json(os.path.join(out_dir, "run.json"), payload)


def _pgm_bytes(values):
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    if vmax > vmin:
        scaled = np.rint((values - vmin) / (vmax - vmin) * 255.0)
    else:
        scaled = np.zeros_like(values)
    body = scaled.astype(np.uint8).tobytes()
    h, w = values.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + body, vmin, vmax


def _emit_pgm(values, stem, sidecar_extra):
    data, vmin, vmax = _pgm_bytes(np.asarray(values, dtype=np.float64))
    persist.write_bytes(stem + ".pgm", data)
    persist.write_json(stem + ".pgm.json", {
        "scaling": "linear-min-max",
        "vmin": vmin,
        "vmax": vmax,
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        **sidecar_extra,
    })


def _emit_csv(t, values, path):
    lines = ["t,value"]
    for ti, vi in zip(t, values):
        lines.append(f"{ti!r},{vi!r}")
    persist.write_text(path, "\r\n".join(lines) + "\r\n")


def emit_plots(inputs, out_dir):
    """Render field stems to PGM images and series stems to CSV files.

    2D fields become one PGM; 3D fields become three central axis slices;
    1D arrays become CSV (a t0/dt sidecar supplies the time axis, else the
    sample index is used).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for path in inputs:
        stem = path[:-4] if path.endswith(".f64") else path
        if not os.path.exists(stem + ".f64"):
            raise FileNotFoundError(f"missing input {stem}.f64")
        values, meta = persist.read_array(stem)
        name = os.path.basename(stem)
        if values.ndim == 2:
            target = os.path.join(out_dir, name)
            _emit_pgm(values, target, {"source": name})
            written.append(target + ".pgm")
        elif values.ndim == 3:
            for axis in range(3):
                mid = values.shape[axis] // 2
                sl = np.take(values, mid, axis=axis)
                target = os.path.join(out_dir, f"{name}_axis{axis}_{mid}")
                _emit_pgm(sl, target, {"source": name, "axis": axis, "index": mid})
                written.append(target + ".pgm")
        elif values.ndim == 1:
            t0 = float(meta.get("t0", 0.0))
            dt = float(meta.get("dt", 1.0))
            t = t0 + dt * np.arange(values.size)
            target = os.path.join(out_dir, name + ".csv")
            _emit_csv(t, values, target)
            written.append(target)
        else:
            raise ValueError(f"cannot plot array of rank {values.ndim}")
    return written


def _run_phantom(config, out_dir, threads):
    phantom = make_phantom(config["phantom"])
    phantom.save(os.path.join(out_dir, "phantom"),
                 extra_meta={"config_hash": persist.config_hash(config)})
    return {"phantom_dir": os.path.join(out_dir, "phantom")}


def _run_forward(config, out_dir, threads, dim):
    phantom = _load_phantom(config)
    sim = simulate_separated_2d if dim == 2 else simulate_separated_3d
    data = sim(
        phantom,
        dt=config.get("dt"),
        n_time=config.get("n_time"),
        ladder_offsets=config.get("ladder_offsets"),
        threads=threads,
        noise_sigma=float(config.get("noise_sigma", 0.0)),
        noise_seed=int(config.get("seed", 0)),
    )
    data.meta["config_hash"] = persist.config_hash(config)
    data.save(os.path.join(out_dir, "separated"))
    return {"data_dir": os.path.join(out_dir, "separated")}


def _run_forward_full(config, out_dir, threads):
    phantom = _load_phantom(config)
    ill = config.get("illumination", {})
    # offsets must cover supp(f), which can fill the whole grid box
    lo, hi = phantom.f0.bbox()
    r_max = float(ill.get("r_max", 0.5 * float(np.linalg.norm(hi - lo))))
    illum = make_illumination(
        phantom.dim,
        int(ill.get("r_count", 32)),
        int(ill.get("theta_count", 32)),
        r_max,
        float(ill.get("slab_width", float(np.max(phantom.f0.spacing)))),
    )
    kwargs = {}
    if config.get("cost_cap") is not None:
        kwargs["cost_cap"] = float(config["cost_cap"])
    sino = simulate_fourier_full(
        phantom,
        illum,
        dt=config.get("dt"),
        n_time=config.get("n_time"),
        eps=config.get("eps"),
        dk=config.get("dk"),
        k_max=config.get("k_max"),
        threads=threads,
        **kwargs,
    )
    sino.meta["config_hash"] = persist.config_hash(config)
    sino.save(os.path.join(out_dir, "sinogram"))
    result = {"sinogram_dir": os.path.join(out_dir, "sinogram")}
    if config.get("separate", True):
        data = separate_data(sino, threads=threads)
        data.meta["config_hash"] = persist.config_hash(config)
        data.save(os.path.join(out_dir, "separated"))
        result["data_dir"] = os.path.join(out_dir, "separated")
    return result


def _run_recon(config, out_dir, threads, dim):
    data = SeparatedData.load(config["data_dir"])
    phantom = Phantom.load(config["phantom_dir"])
    fn = recon2d if dim == 2 else recon3d
    kwargs = {"threads": threads}
    if config.get("mean_variant"):
        kwargs["mean_variant"] = config["mean_variant"]
    if config.get("t_margin") is not None:
        kwargs["t_margin"] = float(config["t_margin"])
    result = fn(data, phantom.f0, **kwargs)
    result.diagnostics["config_hash"] = persist.config_hash(config)
    result.save(os.path.join(out_dir, "recon"))
    return {"recon_dir": os.path.join(out_dir, "recon")}


def _run_fixed_point(config, out_dir, threads):
    data = SeparatedData.load(config["data_dir"])
    phantom = Phantom.load(config["phantom_dir"])
    if data.dim != 3:
        raise ValueError("fixed-point mode needs 3D separated data")
    f_tot = phantom.f_total()
    fz = eval_field(f_tot, data.interior_points)
    psi = data.interior_values / fz[None, :, None]
    x_pts = data.detectors.points[data.interior_indices]
    q_field = fixed_point_q3d(
        psi,
        x_pts,
        data.interior_points,
        data.times(),
        phantom.f0,
        max_iters=int(config.get("max_iters", 10)),
        tol=float(config.get("tol", 1e-4)),
    )
    q_field.save(
        os.path.join(out_dir, "q_fixed_point"),
        extra_meta={"config_hash": persist.config_hash(config)},
    )
    persist.write_json(os.path.join(out_dir, "fixed_point.json"), {
        "config_hash": persist.config_hash(config),
        **{k: v for k, v in q_field.meta.items()},
    })
    return {"q_stem": os.path.join(out_dir, "q_fixed_point")}


def _run_metrics(config, out_dir, threads):
    recon_field = ScalarField.load(config["recon_field"])
    truth_field = ScalarField.load(config["truth_field"])
    report = metrics(recon_field, truth_field)
    report["config_hash"] = persist.config_hash(config)
    persist.write_json(os.path.join(out_dir, "metrics.json"), report)
    print(persist.canonical_json(report))
    return report


def _run_plot(config, out_dir, threads):
    written = emit_plots(config["inputs"], out_dir)
    return {"written": written}


def run(config):
    """Execute one validated config; returns a result summary dict."""
    mode = config["mode"]
    out_dir = config["out"]
    threads = int(config.get("threads") or os.cpu_count() or 1)
    _write_run_sidecar(out_dir, config)
    if mode == "phantom":
        return _run_phantom(config, out_dir, threads)
    if mode == "forward2d":
        return _run_forward(config, out_dir, threads, 2)
    if mode == "forward3d":
        return _run_forward(config, out_dir, threads, 3)
    if mode == "forward-full":
        return _run_forward_full(config, out_dir, threads)
    if mode == "recon2d":
        return _run_recon(config, out_dir, threads, 2)
    if mode == "recon3d":
        return _run_recon(config, out_dir, threads, 3)
    if mode == "fixed-point":
        return _run_fixed_point(config, out_dir, threads)
    if mode == "metrics":
        return _run_metrics(config, out_dir, threads)
    return _run_plot(config, out_dir, threads)


_STAGE_OF_MODE = {
    "phantom": "phantom-build",
    "forward2d": "forward-separated",
    "forward3d": "forward-separated",
    "forward-full": "forward-full",
    "recon2d": "reconstruction",
    "recon3d": "reconstruction",
    "fixed-point": "fixed-point",
    "metrics": "metrics",
    "plot": "plot",
}


def _fail(code, report):
    sys.stderr.write(json.dumps(report, sort_keys=True) + "\n")
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="slicedpat",
        description="Simulation and reconstruction for sectional "
                    "photoacoustic imaging with variable sound speed.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--mode", choices=MODES, help="override config mode")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="parallelism degree")
    parser.add_argument("--seed", type=int, help="seed for randomized data")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry")
    args = parser.parse_args(argv)

    try:
        config = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        for flag in ("mode", "out", "threads", "seed"):
            value = getattr(args, flag)
            if value is not None:
                config[flag] = value
        for item in args.override:
            key, value = _parse_override(item)
            _apply_override(config, key, value)
        validate_config(config)
    except (ConfigError, OSError, json.JSONDecodeError) as err:
        return _fail(EXIT_VALIDATION, {"error": "validation", "message": str(err)})

    try:
        summary = run(config)
    except CostCapError as err:
        return _fail(EXIT_COST_CAP, {
            "error": "cost_cap",
            "message": str(err),
            "estimate": err.estimate,
            "cap": err.cap,
        })
    except FileNotFoundError as err:
        return _fail(EXIT_VALIDATION, {"error": "validation", "message": str(err)})
    except Exception as err:  # noqa: BLE001 - mapped to a machine-readable report
        return _fail(EXIT_NUMERIC, {
            "error": "numerical",
            "stage": _STAGE_OF_MODE.get(config.get("mode"), "unknown"),
            "message": str(err),
        })
    sys.stdout.write(json.dumps({"status": "ok", **_jsonable_summary(summary)},
                                sort_keys=True) + "\n")
    return EXIT_OK


def _jsonable_summary(summary):
    out = {}
    for key, value in summary.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[key] = value
        elif isinstance(value, (list, tuple)):
            out[key] = [str(v) for v in value]
        else:
            out[key] = str(value)
    return out


if __name__ == "__main__":
    sys.exit(main())
