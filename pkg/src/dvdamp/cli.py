"""Command-line entry points: reconstruct, benchmark, validate-se.

Inputs are 8/16-bit grayscale images (PNG/PGM via Pillow), raw float64 files
with a JSON sidecar ({"height": H, "width": W}), or the synthetic
"phantom:N" source. All randomness flows from --seed through named sub-seeds
(mask, noise, probes) recorded in the run record.

Exit codes: 0 ok, 2 validation failure, 3 I/O error, 4 bridge error.
"""

import argparse
import csv
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .bridge import BridgeDenoiser, BridgeError
from .denoisers import (
    ImaginaryPolicy,
    SoftThresholdDenoiser,
    SureThresholdDenoiser,
    WienerSubbandDenoiser,
    apply_imaginary_policy,
)
from .diagnostics import psnr, subband_noise_report
from .forward_model import (
    make_variable_density_scheme,
    measure,
    snr_to_noise_sd,
    zero_filled_estimate,
)
from .solver import DivergenceProbeConfig, ReconstructionConfig, run_dvdamp
from .wavelet import SubbandLayout, haar_forward

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_BRIDGE = 4

BRIDGE_ENDPOINT_ENV = "DVDAMP_BRIDGE_ENDPOINT"

# Tolerances for validate-se, mirroring the diagnostics invariants.
SE_RATIO_BOUND = 1.5
SE_RATIO_MIN_COUNT = 64
SE_RATIO_MAX_ITER = 3
SE_GAUSS_THRESHOLD = 0.99
SE_GAUSS_MIN_COUNT = 256
SE_GAUSS_ITER = 2


class CliError(Exception):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def load_image(path):
    """Load a grayscale image as float64 in [0, 255]."""
    if path.startswith("phantom:"):
        try:
            size = int(path.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad phantom size in {path!r}", EXIT_IO)
        from skimage.data import shepp_logan_phantom
        from skimage.transform import resize

        img = resize(shepp_logan_phantom(), (size, size), anti_aliasing=True)
        return img * 255.0
    if not os.path.exists(path):
        raise CliError(f"input image not found: {path}", EXIT_IO)
    if path.endswith(".raw") or path.endswith(".f64"):
        sidecar = path + ".json"
        if not os.path.exists(sidecar):
            raise CliError(f"missing JSON sidecar for raw input: {sidecar}", EXIT_IO)
        with open(sidecar) as fh:
            meta = json.load(fh)
        data = np.fromfile(path, dtype="<f8")
        try:
            return data.reshape(meta["height"], meta["width"])
        except (KeyError, ValueError) as exc:
            raise CliError(f"bad raw sidecar {sidecar}: {exc}", EXIT_IO)
    try:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im)
    except Exception as exc:
        raise CliError(f"cannot read image {path}: {exc}", EXIT_IO)
    if arr.ndim == 3:
        arr = arr[..., 0]
    arr = arr.astype(np.float64)
    if arr.max() > 255.0:  # 16-bit source
        arr *= 255.0 / 65535.0
    return arr


def save_image_outputs(image, out_dir, stem):
    """Write the reconstruction as 16-bit PNG plus raw float64 + sidecar."""
    from PIL import Image

    real = np.real(image)
    png_path = os.path.join(out_dir, stem + ".png")
    scaled = np.clip(real, 0.0, 255.0) / 255.0 * 65535.0
    Image.fromarray(scaled.astype(np.uint16)).save(png_path)
    raw_path = os.path.join(out_dir, stem + ".raw")
    real.astype("<f8").tofile(raw_path)
    with open(raw_path + ".json", "w") as fh:
        json.dump({"height": real.shape[0], "width": real.shape[1]}, fh)
    return [png_path, raw_path, raw_path + ".json"]


def make_denoiser(spec_str, imag_mode, imag_scale, timeout=60.0):
    policy = ImaginaryPolicy(imag_mode, imag_scale)
    if spec_str == "soft":
        inner = SoftThresholdDenoiser()
    elif spec_str == "sure":
        inner = SureThresholdDenoiser()
    elif spec_str == "wiener":
        inner = WienerSubbandDenoiser()
    elif spec_str.startswith("bridge:") or spec_str == "bridge":
        endpoint = spec_str[7:] if spec_str.startswith("bridge:") else ""
        endpoint = endpoint or os.environ.get(BRIDGE_ENDPOINT_ENV, "")
        if not endpoint:
            raise CliError(
                f"bridge denoiser needs an endpoint (bridge:HOST:PORT or "
                f"${BRIDGE_ENDPOINT_ENV})",
                EXIT_BRIDGE,
            )
        inner = BridgeDenoiser(endpoint, timeout=timeout)
    else:
        raise CliError(f"unknown denoiser {spec_str!r}", EXIT_IO)
    return apply_imaginary_policy(inner, policy)


def derive_seeds(master_seed):
    """Named sub-seeds for every stochastic stage, derived from one master."""
    seq = np.random.SeedSequence(master_seed)
    mask_seq, noise_seq, probe_seq = seq.spawn(3)
    return {
        "master": int(master_seed),
        "mask": int(mask_seq.generate_state(1)[0]),
        "noise": int(noise_seq.generate_state(1)[0]),
        "probes": int(probe_seq.generate_state(1)[0]),
    }


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["k", "z_norm", "tau_l1", "psnr_db"]
        header += [f"tau_{i}" for i in range(13)]
        header += [f"alpha_{i}" for i in range(13)]
        writer.writerow(header)
        for rec in trace.records:
            row = [
                rec.k,
                repr(rec.z_norm),
                repr(float(np.sum(rec.tau))),
                "" if rec.psnr_db is None else repr(rec.psnr_db),
            ]
            row += [repr(float(v)) for v in rec.tau]
            row += [repr(float(v)) for v in rec.alpha]
            writer.writerow(row)


def run_single(image, args, seeds, denoiser):
    """One full reconstruction; returns a dict of results and timings."""
    h, w = image.shape
    timings = {}
    t0 = time.perf_counter()
    scheme = make_variable_density_scheme(
        h, w, args.rate,
        density_exponent=args.density_exponent,
        fully_sampled_radius=args.full_radius,
        seed=seeds["mask"],
    )
    noise_sd = snr_to_noise_sd(image, args.snr_db, scheme)
    y = measure(image, scheme, noise_sd, seed=seeds["noise"])
    timings["setup_s"] = time.perf_counter() - t0

    config = ReconstructionConfig(
        max_iterations=args.iters,
        gamma=args.gamma,
        divergence=DivergenceProbeConfig(seed=seeds["probes"]),
    )
    t0 = time.perf_counter()
    estimate, trace = run_dvdamp(
        y, scheme, denoiser, config, noise_sd,
        ground_truth=image, keep_pyramids=args.keep_pyramids,
    )
    timings["solve_s"] = time.perf_counter() - t0
    baseline = zero_filled_estimate(y, scheme)
    return {
        "scheme": scheme,
        "noise_sd": noise_sd,
        "estimate": estimate,
        "trace": trace,
        "baseline_psnr_db": psnr(image, baseline.real),
        "final_psnr_db": psnr(image, np.real(estimate)),
        "timings": timings,
    }


def _run_record(args, seeds, denoiser, result):
    return {
        "tool": {"name": "dvdamp", "version": __version__},
        "environment": {
            "python": sys.version.split()[0],
            "platform": platform.platform(),
            "numpy": np.__version__,
        },
        "config": {
            "input": args.input,
            "rate": args.rate,
            "snr_db": args.snr_db,
            "gamma": args.gamma,
            "iters": args.iters,
            "denoiser": denoiser.descriptor,
            "density_exponent": args.density_exponent,
            "full_radius": args.full_radius,
            "imag_policy": args.imag_policy,
            "imag_scale": args.imag_scale,
            "seeds": seeds,
        },
        "noise_sd": result["noise_sd"],
        "baseline_psnr_db": result["baseline_psnr_db"],
        "final_psnr_db": result["final_psnr_db"],
        "iterations_run": len(result["trace"].records),
        "stopped_early": result["trace"].stopped_early,
        "timings": result["timings"],
    }


def cmd_reconstruct(args):
    image = load_image(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    seeds = derive_seeds(args.seed)
    denoiser = make_denoiser(args.denoiser, args.imag_policy, args.imag_scale)
    result = run_single(image, args, seeds, denoiser)

    artifacts = save_image_outputs(result["estimate"], args.out_dir, "reconstruction")
    trace_path = os.path.join(args.out_dir, "trace.csv")
    write_trace_csv(result["trace"], trace_path)
    artifacts.append(trace_path)
    scheme_path = os.path.join(args.out_dir, "scheme.json")
    with open(scheme_path, "w") as fh:
        fh.write(result["scheme"].to_json())
    artifacts.append(scheme_path)

    record = _run_record(args, seeds, denoiser, result)
    record["artifacts"] = artifacts
    record_path = os.path.join(args.out_dir, "run_record.json")
    with open(record_path, "w") as fh:
        json.dump(record, fh, indent=2)
    print(
        f"final PSNR {result['final_psnr_db']:.2f} dB "
        f"(baseline {result['baseline_psnr_db']:.2f} dB) "
        f"after {record['iterations_run']} iterations"
    )
    return EXIT_OK


def cmd_benchmark(args):
    images = []
    for entry in args.images:
        if entry.startswith("phantom:") or os.path.isfile(entry):
            images.append(entry)
        elif os.path.isdir(entry):
            for name in sorted(os.listdir(entry)):
                if name.lower().endswith((".png", ".pgm")):
                    images.append(os.path.join(entry, name))
        else:
            raise CliError(f"no such image or directory: {entry}", EXIT_IO)
    if not images:
        raise CliError("no input images found", EXIT_IO)
    os.makedirs(args.out_dir, exist_ok=True)

    runs_path = os.path.join(args.out_dir, "runs.csv")
    summary_path = os.path.join(args.out_dir, "summary.csv")
    cells = {}
    with open(runs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["image", "denoiser", "rate", "snr_db", "seed",
             "psnr_db", "baseline_psnr_db", "runtime_s", "status"]
        )
        for image_path in images:
            image = load_image(image_path)
            for den_name in args.denoisers:
                for rate in args.rates:
                    for snr_db in args.snrs:
                        for seed in range(args.seeds_per_cell):
                            run_args = argparse.Namespace(**vars(args))
                            run_args.input = image_path
                            run_args.rate = rate
                            run_args.snr_db = snr_db
                            seeds = derive_seeds(args.seed + seed)
                            status = "ok"
                            psnr_db = baseline_db = runtime = ""
                            try:
                                denoiser = make_denoiser(
                                    den_name, args.imag_policy, args.imag_scale
                                )
                                t0 = time.perf_counter()
                                result = run_single(image, run_args, seeds, denoiser)
                                runtime = time.perf_counter() - t0
                                psnr_db = result["final_psnr_db"]
                                baseline_db = result["baseline_psnr_db"]
                                key = (den_name, rate, snr_db)
                                cells.setdefault(key, []).append((psnr_db, runtime))
                            except Exception as exc:  # record, keep going
                                status = f"error: {exc}"
                            writer.writerow(
                                [image_path, den_name, rate, snr_db, seed,
                                 psnr_db, baseline_db, runtime, status]
                            )
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["denoiser", "rate", "snr_db", "runs", "mean_psnr_db", "mean_runtime_s"]
        )
        for (den_name, rate, snr_db), values in sorted(cells.items()):
            psnrs = [v[0] for v in values]
            times = [v[1] for v in values]
            writer.writerow(
                [den_name, rate, snr_db, len(values),
                 float(np.mean(psnrs)), float(np.mean(times))]
            )
    print(f"wrote {runs_path} and {summary_path}")
    return EXIT_OK


def cmd_validate_se(args):
    image = load_image(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    seeds = derive_seeds(args.seed)
    denoiser = make_denoiser(args.denoiser, args.imag_policy, args.imag_scale)
    args.keep_pyramids = True
    result = run_single(image, args, seeds, denoiser)
    trace = result["trace"]

    layout = SubbandLayout.create(*image.shape)
    truth = haar_forward(image.astype(np.complex128), layout=layout)
    failures = []
    report_path = os.path.join(args.out_dir, "state_evolution.csv")
    with open(report_path, "w", newline="") as fh:
        first = True
        for rec in trace.records:
            report = subband_noise_report(rec.r, truth, rec.tau)
            text = report.to_csv(iteration=rec.k)
            fh.write(text if first else text.split("\n", 1)[1])
            first = False
            for band in report.bands:
                if (
                    rec.k <= SE_RATIO_MAX_ITER
                    and band.count >= SE_RATIO_MIN_COUNT
                    and (
                        band.ratio is None
                        or not (1.0 / SE_RATIO_BOUND <= band.ratio <= SE_RATIO_BOUND)
                    )
                ):
                    failures.append(
                        f"k={rec.k} band={band.band_index} ratio={band.ratio}"
                    )
                if (
                    rec.k == SE_GAUSS_ITER
                    and band.count >= SE_GAUSS_MIN_COUNT
                    and (
                        band.gaussianity_real is None
                        or band.gaussianity_real < SE_GAUSS_THRESHOLD
                    )
                ):
                    failures.append(
                        f"k={rec.k} band={band.band_index} "
                        f"gaussianity={band.gaussianity_real}"
                    )
    summary = {
        "iterations": len(trace.records),
        "violations": failures,
        "passed": not failures,
        "report_csv": report_path,
    }
    with open(os.path.join(args.out_dir, "validation.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print("state evolution validation:", "PASS" if not failures else "FAIL")
    for item in failures:
        print("  violation:", item)
    return EXIT_OK if not failures else EXIT_VALIDATION


def _add_common(parser):
    parser.add_argument("--rate", type=float, default=0.25, help="m/n target")
    parser.add_argument("--snr-db", type=float, default=40.0,
                        help="measurement SNR in dB (inf = noiseless)")
    parser.add_argument("--gamma", type=float, default=0.75)
    parser.add_argument("--iters", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--denoiser", default="soft",
                        help="soft | sure | wiener | bridge:ENDPOINT")
    parser.add_argument("--density-exponent", type=float, default=4.0)
    parser.add_argument("--full-radius", type=float, default=0.06)
    parser.add_argument("--imag-policy", default="scale",
                        choices=["scale", "zero", "passthrough"])
    parser.add_argument("--imag-scale", type=float, default=0.1)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--keep-pyramids", action="store_true")
    parser.add_argument("--config", default=None,
                        help="JSON file overriding flag defaults")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dvdamp",
        description="Reconstruction from variable-density-sampled Fourier data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rec = sub.add_parser("reconstruct", help="reconstruct one image")
    p_rec.add_argument("input", help="image path, raw file, or phantom:N")
    _add_common(p_rec)
    p_rec.set_defaults(func=cmd_reconstruct)

    p_bench = sub.add_parser("benchmark", help="grid of rates/SNRs/denoisers")
    p_bench.add_argument("images", nargs="+",
                         help="image files, directories, or phantom:N")
    _add_common(p_bench)
    p_bench.add_argument("--rates", type=float, nargs="+",
                         default=[1 / 16, 1 / 12, 1 / 8, 1 / 4])
    p_bench.add_argument("--snrs", type=float, nargs="+", default=[40.0])
    p_bench.add_argument("--denoisers", nargs="+", default=["soft"])
    p_bench.add_argument("--seeds-per-cell", type=int, default=1)
    p_bench.set_defaults(func=cmd_benchmark)

    p_val = sub.add_parser("validate-se",
                           help="check predicted band variances empirically")
    p_val.add_argument("input", help="image path, raw file, or phantom:N")
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate_se)

    return parser


def _apply_config_file(args):
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read config file: {exc}", EXIT_IO)
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise CliError(f"unknown config key {key!r}", EXIT_IO)
            setattr(args, attr, value)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except CliError as exc:
        json.dump({"error": str(exc), "exit_code": exc.exit_code}, sys.stderr)
        sys.stderr.write("\n")
        return exc.exit_code
    except BridgeError as exc:
        json.dump(
            {"error": str(exc), "kind": type(exc).__name__, "exit_code": EXIT_BRIDGE},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return EXIT_BRIDGE
    except Exception as exc:  # any other failure: machine-readable, exit 3
        json.dump(
            {"error": str(exc), "kind": type(exc).__name__, "exit_code": EXIT_IO},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
