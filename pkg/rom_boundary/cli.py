"""
Command-line front end

    python -m rom_boundary <command> [options]

Exit codes: 0 success, 1 input/schema/usage error, 2 no feasible
hyperparameters, 3 solver non-convergence. DoF numbers on the command line
are 1-based (q1..q7).
"""

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .config import get_settings
from .constraints import MEsvConfig, nearest_neighbor_scale
from .dataset import (
    FLOAT_FORMAT,
    Provenance,
    assemble,
    from_frames,
    load_angles,
    load_frames,
    load_manifest,
    save_angles,
    subsample,
)
from .errors import ConvergenceError, NoFeasibleHyperparametersError, RomError, SchemaError
from .kinematics import DOF_NAMES, KinematicChain, Side, load_chain
from .logger import logger
from .manifest import ManifestSigner, RunManifest, manifest_path_for, verify_manifest
from .metrics import (
    ImpairmentResult,
    WeightMatrix,
    isoline_grid,
    metrics_report,
    pair_area,
    weighted_volume,
)
from .ocsvm import TrainConfig, load_model, save_model, train
from .report_pdf import MetricsReportGenerator
from .tuning import GridConfig, grid_search

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3


class RomArgumentParser(argparse.ArgumentParser):
    """Usage errors share the input-error exit code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _nu(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"nu must lie in (0, 1], got {text}")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _dofs(text: str) -> Tuple[int, ...]:
    try:
        numbers = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"DoFs must be comma-separated integers, got {text!r}")
    if not numbers or any(not 1 <= n <= len(DOF_NAMES) for n in numbers):
        raise argparse.ArgumentTypeError(f"DoF numbers must lie in 1..{len(DOF_NAMES)}, got {text!r}")
    if len(set(numbers)) != len(numbers):
        raise argparse.ArgumentTypeError(f"duplicate DoF numbers in {text!r}")
    return tuple(n - 1 for n in numbers)


def _signer(args) -> Optional[ManifestSigner]:
    if getattr(args, "sign", False) or get_settings().sign_manifests:
        return ManifestSigner()
    return None


def _snapshot(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "handler"}


def _finish(args, manifest: RunManifest, outputs: Sequence[Path]) -> int:
    for path in outputs:
        manifest.add_output(path)
        logger.log_artifact_written(manifest.command.capitalize(), path)
    manifest.write(manifest_path_for(outputs[0]), _signer(args))
    return EXIT_OK


def cmd_extract(args) -> int:
    manifest = RunManifest(command="extract", config=_snapshot(args))
    manifest.add_input(args.frames)
    chain = KinematicChain.default()
    if args.chain:
        manifest.add_input(args.chain)
        chain = load_chain(args.chain)

    frames = load_frames(args.frames)
    try:
        data = from_frames(frames, chain, args.side, provenance=Provenance(args.provenance), subject=args.subject)
    except SchemaError as e:
        raise SchemaError(f"{args.frames}: {e}")
    save_angles(data, args.output)
    return _finish(args, manifest, [Path(args.output)])


def cmd_assemble(args) -> int:
    manifest = RunManifest(command="assemble", config=_snapshot(args))
    if args.manifest:
        manifest.add_input(args.manifest)
        data = load_manifest(args.manifest)
    else:
        if not args.clinical and not args.exploration:
            raise SchemaError("assemble needs --manifest or at least one of --clinical/--exploration")
        parts = []
        for path, provenance in ((args.clinical, Provenance.CLINICAL), (args.exploration, Provenance.EXPLORATION)):
            if path:
                manifest.add_input(path)
                parts.append(load_angles(path, provenance=provenance, subject=args.subject, arm=args.arm))
        data = parts[0] if len(parts) == 1 else assemble(*parts)

    if args.subsample:
        data = subsample(data, args.subsample, args.method)
    save_angles(data, args.output)
    logger.info(f"Assembled {len(data)} samples")
    return _finish(args, manifest, [Path(args.output)])


def _load_training(path: Path, dofs: Optional[Tuple[int, ...]], provenance: Provenance = Provenance.CLINICAL):
    data = load_angles(path, provenance=provenance)
    return data.select_dofs(dofs) if dofs else data


def cmd_tune(args) -> int:
    manifest = RunManifest(command="tune", config=_snapshot(args))
    manifest.add_input(args.train)
    manifest.add_input(args.test)
    train_data = _load_training(args.train, args.dofs)
    test_data = _load_training(args.test, args.dofs, Provenance.TEST)
    if args.subsample:
        train_data = subsample(train_data, args.subsample, "farthest")

    grid = GridConfig(
        nu_range=tuple(args.nu_range),
        nu_count=args.nu_count,
        sigma_range=tuple(args.sigma_range),
        sigma_count=args.sigma_count,
        rounds=args.rounds,
        change_threshold=args.change_threshold,
    )
    radius = args.radius or args.radius_factor * nearest_neighbor_scale(train_data)
    mesv = MEsvConfig(
        radius=radius,
        max_misclassified=args.max_misclassified,
        max_interior=args.max_interior,
        min_neighbors=args.min_neighbors,
    )

    report = grid_search(train_data, test_data, grid, mesv, args.offset, workers=args.workers,
                         progress_callback=lambda percent, message: logger.debug(f"[{percent:3d}%] {message}"))
    outputs = [report.save_json(args.output)]
    if args.csv:
        outputs.append(report.save_csv(args.csv))
    _finish(args, manifest, outputs)

    report.raise_if_infeasible()
    print(f"selected nu={report.selected.nu:.6g} sigma={report.selected.sigma:.6g}")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = RunManifest(command="train", config=_snapshot(args))
    manifest.add_input(args.data)
    data = _load_training(args.data, args.dofs)
    if args.subsample:
        data = subsample(data, args.subsample, "farthest")

    settings = get_settings()
    cfg = TrainConfig.of(
        args.nu,
        args.sigma,
        tolerance=args.tolerance or settings.qp_tolerance,
        max_iterations=args.max_iterations or settings.max_iterations,
    )
    model = train(data, cfg)
    save_model(model, args.output)
    print(f"{model.n_support} support vectors ({100 * model.training.sv_fraction:.3f}% of {model.training.m})")
    return _finish(args, manifest, [Path(args.output)])


def cmd_eval(args) -> int:
    manifest = RunManifest(command="eval", config=_snapshot(args))
    manifest.add_input(args.model)
    manifest.add_input(args.query)
    model = load_model(args.model)
    query = load_angles(args.query).select_dofs(model.dofs)

    values = model.decision_function(query.samples)
    grads = model.gradient(query.samples)
    df = pd.DataFrame({"timestamp": query.timestamps})
    for k, name in enumerate(model.dof_names):
        df[name] = query.samples[:, k]
    df["gamma"] = values
    df["region"] = np.where(values > args.band, "inside", np.where(values < -args.band, "outside", "boundary"))
    for k, name in enumerate(model.dof_names):
        df[f"grad_{name}"] = grads[:, k]
    df.to_csv(args.output, index=False, float_format=FLOAT_FORMAT)
    return _finish(args, manifest, [Path(args.output)])


def _pair_areas(paths: Sequence[Path], manifest: RunManifest, resolution: int, padding: float):
    areas = []
    for path in paths:
        manifest.add_input(path)
        areas.append(pair_area(load_model(path), resolution, padding))
    return areas


def cmd_metrics(args) -> int:
    manifest = RunManifest(command="metrics", config=_snapshot(args))

    if args.v_impaired is not None or args.v_healthy is not None:
        if args.v_impaired is None or args.v_healthy is None:
            raise SchemaError("--v-impaired and --v-healthy must be given together")
        result = ImpairmentResult.from_volumes(args.v_impaired, args.v_healthy)
        report = {"version": "1.0", **result.to_dict()}
    else:
        if not args.model:
            raise SchemaError("metrics needs --model files or --v-impaired/--v-healthy")
        areas = _pair_areas(args.model, manifest, args.resolution, args.padding)
        if args.weights:
            manifest.add_input(args.weights)
            weights = WeightMatrix.load(args.weights)
        else:
            weights = WeightMatrix.from_pairs([(a.key[0], a.key[1], 1.0) for a in areas])
        volume = weighted_volume(areas, weights)

        impairment = None
        if args.impaired_model:
            impaired = _pair_areas(args.impaired_model, manifest, args.resolution, args.padding)
            impairment = ImpairmentResult.from_volumes(weighted_volume(impaired, weights), volume)
        report = metrics_report(areas, weights, volume, impairment)

    with open(args.output, 'w') as f:
        json.dump(report, f, indent=2)
    outputs = [Path(args.output)]
    if "II" in report:
        print(f"II = {report['II']:.4f}")

    if args.pdf:
        manifest_data = dict(manifest.to_dict())
        MetricsReportGenerator().generate(report, args.pdf, manifest_data)
        outputs.append(Path(args.pdf))
    return _finish(args, manifest, outputs)


def cmd_isolines(args) -> int:
    manifest = RunManifest(command="isolines", config=_snapshot(args))
    manifest.add_input(args.model)
    grid = isoline_grid(load_model(args.model), args.resolution, args.padding)
    grid.save_csv(args.output)
    return _finish(args, manifest, [Path(args.output)])


def cmd_verify(args) -> int:
    valid, message, _ = verify_manifest(args.manifest, require_signature=args.require_signature)
    print(message)
    return EXIT_OK if valid else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = RomArgumentParser(prog="rom_boundary", description="Range-of-motion boundary learning")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sign", action="store_true", help="ECDSA-sign the run manifest")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=RomArgumentParser)

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("extract", cmd_extract, "frame CSV -> joint-angle CSV")
    p.add_argument("frames", type=Path)
    p.add_argument("--chain", type=Path, help="kinematic chain JSON (default chain if omitted)")
    p.add_argument("--side", choices=[s.value for s in Side], default=Side.RIGHT.value)
    p.add_argument("--provenance", choices=[v.value for v in Provenance], default=Provenance.CLINICAL.value)
    p.add_argument("--subject", default="")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("assemble", cmd_assemble, "combine clinical and exploration angle files")
    p.add_argument("--clinical", type=Path)
    p.add_argument("--exploration", type=Path)
    p.add_argument("--manifest", type=Path, help="dataset manifest JSON instead of --clinical/--exploration")
    p.add_argument("--subject", default="")
    p.add_argument("--arm", default="")
    p.add_argument("--subsample", type=int)
    p.add_argument("--method", choices=["farthest", "stride"], default="farthest")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("tune", cmd_tune, "constrained grid search over (nu, sigma)")
    p.add_argument("train", type=Path)
    p.add_argument("test", type=Path)
    p.add_argument("--dofs", type=_dofs)
    p.add_argument("--nu-range", type=_nu, nargs=2, default=[0.001, 0.5], metavar=("LO", "HI"))
    p.add_argument("--nu-count", type=int, default=5)
    p.add_argument("--sigma-range", type=_positive, nargs=2, default=[1e-3, 1e3], metavar=("LO", "HI"))
    p.add_argument("--sigma-count", type=int, default=7)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--change-threshold", type=float, default=0.01)
    p.add_argument("--radius", type=_positive, help="M-ESV ball radius in degrees")
    p.add_argument("--radius-factor", type=_positive, default=4.0,
                   help="radius as a multiple of the median nearest-neighbour distance")
    p.add_argument("--max-misclassified", type=int, default=1)
    p.add_argument("--max-interior", type=int)
    p.add_argument("--min-neighbors", type=int, default=5)
    p.add_argument("--offset", type=_positive, default=5.0, help="negative-sample offset in degrees")
    p.add_argument("--subsample", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--csv", type=Path, help="also write the pass/fail matrix")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("train", cmd_train, "train one boundary model")
    p.add_argument("data", type=Path)
    p.add_argument("--nu", type=_nu, required=True)
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--dofs", type=_dofs)
    p.add_argument("--subsample", type=int)
    p.add_argument("--tolerance", type=_positive)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("eval", cmd_eval, "Gamma, region and gradient per query row")
    p.add_argument("model", type=Path)
    p.add_argument("query", type=Path)
    p.add_argument("--band", type=float, default=0.0, help="|Gamma| <= band counts as boundary")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("metrics", cmd_metrics, "pair areas, weighted volume and impairment index")
    p.add_argument("--model", type=Path, action="append", help="2-D model of the healthy arm (repeat per pair)")
    p.add_argument("--impaired-model", type=Path, action="append", help="2-D model of the impaired arm")
    p.add_argument("--weights", type=Path, help="JSON {\"weights\": [[i, j, c], ...]}")
    p.add_argument("--v-impaired", type=float)
    p.add_argument("--v-healthy", type=float)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--padding", type=_positive, default=30.0)
    p.add_argument("--pdf", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = add("isolines", cmd_isolines, "Gamma lattice CSV for plotting")
    p.add_argument("model", type=Path)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--padding", type=_positive, default=30.0)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("verify", help="check a run manifest's signature and file digests")
    p.set_defaults(handler=cmd_verify)
    p.add_argument("manifest", type=Path)
    p.add_argument("--require-signature", action="store_true")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    logger.log_command_start(args.command)
    try:
        code = args.handler(args)
        logger.log_command_complete(args.command, code, time.monotonic() - started)
        return code
    except NoFeasibleHyperparametersError as e:
        logger.error(str(e))
        return EXIT_INFEASIBLE
    except ConvergenceError as e:
        logger.error(str(e))
        return EXIT_NO_CONVERGENCE
    except RomError as e:
        logger.error(str(e))
        return EXIT_INPUT
    except FileNotFoundError as e:
        logger.error(f"File not found: {e.filename}")
        return EXIT_INPUT
    except Exception as e:
        logger.log_error_with_context(args.command, e)
        raise
