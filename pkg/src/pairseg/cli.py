"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error. Every output embeds
full provenance (command line, configuration, seed, versions); seeds are
always explicit, never wall-clock derived.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ContractViolation, DataError, FitDiverged
from .grid import GridSpec
from .harness import (
    ContourMap,
    SweepConfig,
    contour_fscore,
    run_sweep,
    sample_pairset,
    simulate_responses,
    welch_test,
)
from .inference import FitConfig, fit_annealed, fit_nonparametric
from .io_files import (
    SessionFile,
    load_maps,
    load_pairs,
    load_session,
    save_maps,
    save_pairs,
    save_session,
)
from .maps import argmax_segmap, mae_aligned, mean_entropy
from .parametric import fit_parametric, rgb_features, wavelet_energy_features, FeatureMaps
from .render import render, save_gray16, write_images
from .synthesis import (
    MapGenParams,
    TextureParams,
    generate_probmaps,
    synthesize_rgb_clusters,
    synthesize_texture,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, with flag suggestions."""

    def _known_options(self) -> list[str]:
        known = []
        for action in self._actions:
            known.extend(action.option_strings)
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    for sub_action in sub._actions:
                        known.extend(sub_action.option_strings)
        return known

    def error(self, message):
        suggestion = ""
        if "unrecognized arguments:" in message:
            bad = message.split("unrecognized arguments:", 1)[1].split()
            known = self._known_options()
            hints = []
            for b in bad:
                close = difflib.get_close_matches(b, known, n=1)
                if close:
                    hints.append(f"{b} -> did you mean {close[0]}?")
            if hints:
                suggestion = " (" + "; ".join(hints) + ")"
        raise UsageError(f"{self.prog}: {message}{suggestion}")


def _provenance(argv, config: dict, seed: int | None) -> dict:
    return {
        "command": list(argv),
        "config": config,
        "seed": seed,
        "versions": {"pairseg": __version__, "numpy": np.__version__},
    }


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"cannot parse list {text!r}: {exc}") from exc


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True, help="number of segments")
    p.add_argument("--loss", choices=["bce", "se"], default="se")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="spatial regularization weight")
    p.add_argument("--kernel-width", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.5, help="learning rate")
    p.add_argument("--eps", type=float, default=1e-8, help="stopping criterion")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=["nonparam", "logistic", "variance"],
                   default="nonparam")
    p.add_argument("--features", default=None,
                   help="feature source for parametric models: 'rgb', 'wavelet', "
                        "or a .npy file of shape (n, n, d)")
    p.add_argument("--image", default=None,
                   help="image file for rgb/wavelet feature extraction")
    p.add_argument("--restarts", type=int, default=1,
                   help="seeded restarts, best objective kept")
    p.add_argument("--anneal", type=float, default=None, metavar="LAM",
                   help="two-stage fit: smooth at LAM first, then refine")


def _build_parser() -> _Parser:
    parser = _Parser(prog="pairseg", description="Probabilistic segmentation toolkit")
    parser.add_argument("--version", action="version", version=f"pairseg {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth-maps", help="generate ground-truth probability maps",
                       parents=[], description="Generate Gaussian-field probability maps.")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0, help="field amplitude")
    p.add_argument("--xi", type=float, default=2.5, help="correlation length (cells)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-px", type=int, default=None,
                   help="pixel size recorded in the grid (default: n)")
    p.add_argument("--harden", action="store_true",
                   help="write the one-hot argmax maps (deterministic GT)")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("synth-texture", help="synthesize an oriented two-segment texture")
    p.add_argument("--maps", required=True, help="maps file with k=2")
    p.add_argument("--theta0", required=True,
                   help="two center orientations in degrees, e.g. '85,95'")
    p.add_argument("--sigma-theta", type=float, default=5.0)
    p.add_argument("--mode-cpi", type=float, default=19.6,
                   help="radial mode in cycles per image")
    p.add_argument("--bandwidth", type=float, default=2.0, help="octave bandwidth")
    p.add_argument("--contrast", type=float, default=35.0, help="RMS gray levels")
    p.add_argument("--image-px", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("synth-rgb", help="synthesize an RGB cluster image")
    p.add_argument("--maps", required=True)
    p.add_argument("--palette", required=True,
                   help="k comma-separated r:g:b triplets, e.g. '0.8:0.2:0.2,0.2:0.8:0.2'")
    p.add_argument("--noise-sd", type=float, default=0.08)
    p.add_argument("--image-px", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("pairs", help="sample a pair set")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--coverage", choices=["minimal", "k_per_pixel"],
                   default="k_per_pixel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gt", default=None, help="maps file for informed minimal sampling")
    p.add_argument("--image-px", type=int, default=None)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("simulate", help="simulate observer responses")
    p.add_argument("--gt", required=True, help="ground-truth maps file")
    p.add_argument("--pairs", required=True, help="pairs file")
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("fit", help="reconstruct maps from a session file")
    p.add_argument("session", help="session JSON file")
    _add_fit_flags(p)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("eval", help="compare maps against a reference")
    p.add_argument("maps", help="fitted maps file")
    p.add_argument("--reference", required=True, help="reference maps file")
    p.add_argument("--tol", type=float, default=2.0, help="contour matching tolerance")
    p.add_argument("-o", "--out", default=None, help="write the report JSON here")

    p = sub.add_parser("sweep", help="resampled accuracy study along one axis")
    p.add_argument("--axis", choices=["blocks", "uncertainty", "resolution", "k"],
                   required=True)
    p.add_argument("--levels", required=True, help="comma-separated levels")
    p.add_argument("--resamples", type=int, default=100)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=2.5)
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--coverage", choices=["minimal", "k_per_pixel"],
                   default="k_per_pixel")
    p.add_argument("--lambdas", default="0,10",
                   help="fit conditions: one per regularization weight")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="CSV output path")
    p.add_argument("--json", dest="json_out", default=None)

    p = sub.add_parser("stats", help="Welch test between two samples")
    p.add_argument("group_a", help="JSON array of numbers")
    p.add_argument("group_b", help="JSON array of numbers")
    p.add_argument("-o", "--out", default=None)

    p = sub.add_parser("render", help="render maps to PNG")
    p.add_argument("maps")
    p.add_argument("--mode", choices=["per_segment", "argmax", "entropy"],
                   default="argmax")
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("grid-centers", help="emit grid cell centers in pixels")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--image-px", type=int, required=True)
    p.add_argument("-o", "--out", required=True)

    return parser


def _load_features(args, grid: GridSpec) -> FeatureMaps:
    if args.features in ("rgb", "wavelet"):
        if not args.image:
            raise UsageError("--features rgb/wavelet requires --image")
        from PIL import Image

        img = np.asarray(Image.open(args.image))
        if args.features == "rgb":
            if img.ndim == 3 and img.shape[2] == 4:
                img = img[..., :3]
            return rgb_features(img, grid)
        if img.ndim == 3:
            img = img.mean(axis=2)
        if str(args.image).endswith(".png") and img.dtype == np.uint16:
            img = img / 257.0
        return wavelet_energy_features(img, grid)
    if args.features:
        arr = np.load(args.features)
        return FeatureMaps(arr)
    raise UsageError("parametric models require --features")


def _cmd_synth_maps(args, argv) -> int:
    params = MapGenParams(k=args.k, n=args.n, sigma_amp=args.sigma, xi=args.xi,
                          seed=args.seed)
    maps = generate_probmaps(params)
    if args.harden:
        from .maps import onehot_maps

        maps = onehot_maps(argmax_segmap(maps).labels, maps.k)
    grid = GridSpec(n=args.n, image_px=args.image_px or args.n)
    config = {"k": args.k, "n": args.n, "sigma": args.sigma, "xi": args.xi,
              "harden": bool(args.harden)}
    save_maps(maps, grid, args.out, _provenance(argv, config, args.seed))
    print(f"wrote {args.out}")
    return 0


def _cmd_synth_texture(args, argv) -> int:
    maps, _grid, _ = load_maps(args.maps)
    theta0 = _parse_float_list(args.theta0)
    if len(theta0) != 2:
        raise UsageError("--theta0 needs exactly two angles")
    params = TextureParams(
        theta0_deg=tuple(theta0),
        sigma_theta_deg=args.sigma_theta,
        mode_cycles_per_image=args.mode_cpi,
        bandwidth_oct=args.bandwidth,
        rms_contrast=args.contrast,
        seed=args.seed,
    )
    tex = synthesize_texture(maps, params, args.image_px)
    manifest = _provenance(argv, {
        "theta0_deg": theta0,
        "sigma_theta_deg": args.sigma_theta,
        "mode_cycles_per_image": args.mode_cpi,
        "bandwidth_oct": args.bandwidth,
        "rms_contrast": args.contrast,
        "image_px": args.image_px,
    }, args.seed)
    save_gray16(tex, args.out, manifest)
    print(f"wrote {args.out}")
    return 0


def _cmd_synth_rgb(args, argv) -> int:
    maps, grid, _ = load_maps(args.maps)
    triplets = [t for t in args.palette.split(",") if t.strip()]
    try:
        palette = np.array([[float(x) for x in t.split(":")] for t in triplets])
    except ValueError as exc:
        raise UsageError(f"bad palette {args.palette!r}: {exc}") from exc
    img = synthesize_rgb_clusters(
        maps, palette, noise_sd=args.noise_sd, seed=args.seed,
        image_px=args.image_px or grid.image_px,
    )
    from PIL import Image

    Image.fromarray(np.round(img * 255).astype(np.uint8)).save(args.out)
    manifest = _provenance(argv, {"palette": palette.tolist(),
                                  "noise_sd": args.noise_sd}, args.seed)
    Path(args.out).with_suffix(".json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_pairs(args, argv) -> int:
    grid = GridSpec(n=args.n, image_px=args.image_px or args.n)
    gt = None
    if args.gt:
        gt, gt_grid, _ = load_maps(args.gt)
        if gt_grid.n != grid.n:
            raise DataError(f"--gt grid n={gt_grid.n} does not match --n {grid.n}")
    pairs = sample_pairset(grid, args.k, args.coverage, args.seed, gt=gt)
    save_pairs(pairs, grid, args.k, args.coverage, args.seed, args.out)
    print(f"wrote {args.out} ({len(pairs)} pairs)")
    return 0


def _cmd_simulate(args, argv) -> int:
    gt, gt_grid, _ = load_maps(args.gt)
    pairs, pair_grid, _ = load_pairs(args.pairs)
    if pair_grid.n != gt_grid.n:
        raise DataError(
            f"pair grid n={pair_grid.n} does not match ground truth n={gt_grid.n}"
        )
    dataset = simulate_responses(gt, pairs, args.blocks, seed=args.seed,
                                 grid=gt_grid, image_id=str(args.gt))
    session = SessionFile(dataset=dataset, participant_id=f"sim:{args.seed}")
    save_session(session, args.out)
    print(f"wrote {args.out} ({dataset.n_trials} trials)")
    return 0


def _cmd_fit(args, argv) -> int:
    session = load_session(args.session)
    cfg = FitConfig(
        loss=args.loss,
        lam=args.lam,
        kernel_width=args.kernel_width,
        learning_rate=args.lr,
        epsilon=args.eps,
        max_iter=args.max_iter,
        seed=args.seed,
    )
    grid = session.dataset.grid
    if args.model == "nonparam":
        if args.anneal is not None:
            res = fit_annealed(session.dataset, args.k, cfg, lam_anneal=args.anneal)
        else:
            res = fit_nonparametric(session.dataset, args.k, cfg,
                                    n_restarts=args.restarts)
    else:
        features = _load_features(args, grid)
        _, res = fit_parametric(session.dataset, features, args.k, cfg,
                                model=args.model,
                                n_restarts=max(1, args.restarts))
    config = {
        "k": args.k, "loss": args.loss, "lambda": args.lam,
        "kernel_width": args.kernel_width, "lr": args.lr, "eps": args.eps,
        "max_iter": args.max_iter, "model": args.model,
        "restarts": args.restarts, "anneal": args.anneal,
        "converged": res.converged, "iterations": res.iterations,
        "stationarity_gap": res.stationarity_gap,
    }
    save_maps(res.maps, grid, args.out, _provenance(argv, config, args.seed))
    print(f"wrote {args.out} (iterations={res.iterations}, "
          f"gap={res.stationarity_gap:.4g})")
    return 0


def _cmd_eval(args, argv) -> int:
    fit_maps, _, _ = load_maps(args.maps)
    ref_maps, _, _ = load_maps(args.reference)
    if fit_maps.values.shape != ref_maps.values.shape:
        raise DataError("maps and reference differ in shape")
    mae = mae_aligned(fit_maps, ref_maps, max_k=max(8, fit_maps.k))
    fit_contour = ContourMap.from_labels(argmax_segmap(fit_maps).labels)
    ref_contour = ContourMap.from_labels(argmax_segmap(ref_maps).labels)
    f, precision, recall = contour_fscore(fit_contour, ref_contour, tol_px=args.tol)
    me_fit = mean_entropy(fit_maps)
    me_ref = mean_entropy(ref_maps)
    report = {
        "mae": mae,
        "mean_entropy": {"maps": me_fit[0], "reference": me_ref[0]},
        "entropy_se": {"maps": me_fit[1], "reference": me_ref[1]},
        "contour_fscore": {"f": f, "precision": precision, "recall": recall,
                           "tol_px": args.tol},
    }
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_sweep(args, argv) -> int:
    levels = _parse_float_list(args.levels)
    if args.axis in ("blocks", "resolution", "k"):
        levels = [int(x) for x in levels]
    lambdas = _parse_float_list(args.lambdas)
    fit_configs = {
        f"lambda={lam:g}": FitConfig(lam=lam, max_iter=args.max_iter)
        for lam in lambdas
    }
    cfg = SweepConfig(
        axis=args.axis,
        levels=tuple(levels),
        map_params=MapGenParams(k=args.k, n=args.n, sigma_amp=args.sigma,
                                xi=args.xi, seed=args.seed),
        fit_configs=fit_configs,
        resamples=args.resamples,
        n_blocks=args.blocks,
        coverage=args.coverage,
        seed=args.seed,
    )
    result = run_sweep(cfg)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "level", "condition", "resample", "mae",
                         "ci_low", "ci_high", "failed", "message"])
        for r in result.rows:
            writer.writerow(["sample", r.level, r.condition, r.resample,
                             repr(r.mae), "", "", int(r.failed), r.message])
        for s in result.summaries:
            writer.writerow(["summary", s.level, s.condition, "",
                             repr(s.mae_mean), repr(s.ci_low), repr(s.ci_high),
                             "", f"n_ok={s.n_ok}"])
    if args.json_out:
        doc = {
            "provenance": _provenance(argv, {"axis": args.axis, "levels": levels,
                                             "lambdas": lambdas,
                                             "resamples": args.resamples},
                                      args.seed),
            "rows": [r.__dict__ for r in result.rows],
            "summaries": [s.__dict__ for s in result.summaries],
        }
        Path(args.json_out).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_stats(args, argv) -> int:
    def read_group(path):
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, list) or not all(
            isinstance(x, (int, float)) for x in doc
        ):
            raise DataError(f"{path}: expected a JSON array of numbers")
        return doc

    a = read_group(args.group_a)
    b = read_group(args.group_b)
    t, dof, p, d = welch_test(a, b)
    report = {"t": t, "dof": dof, "p": p, "cohens_d": d,
              "n_a": len(a), "n_b": len(b)}
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_render(args, argv) -> int:
    maps, grid, _ = load_maps(args.maps)
    images = render(maps, mode=args.mode, scale=args.scale)
    written = write_images(images, args.out)
    print("wrote " + ", ".join(written))
    return 0


def _cmd_grid_centers(args, argv) -> int:
    grid = GridSpec(n=args.n, image_px=args.image_px)
    doc = {
        "schema_version": 1,
        "n": grid.n,
        "image_px": grid.image_px,
        "cell_px": grid.cell_px,
        "centers": grid.all_centers_px().tolist(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "synth-maps": _cmd_synth_maps,
    "synth-texture": _cmd_synth_texture,
    "synth-rgb": _cmd_synth_rgb,
    "pairs": _cmd_pairs,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "stats": _cmd_stats,
    "render": _cmd_render,
    "grid-centers": _cmd_grid_centers,
}


def cli_dispatch(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    argv = list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version paths
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return 1
    handler = _COMMANDS[args.command]
    try:
        return handler(args, argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (DataError, ContractViolation, FitDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
