"""Command-line front end.

Subcommands: phantom, lesions, sextants, concordance, evaluate, simulate,
standardize. Every command takes its parameters from flags plus an optional
`key = value` config file (flags win), writes a manifest echoing the fully
resolved configuration into its output directory, and is deterministic given
that configuration. Exit codes: 0 success, 2 usage or validation error,
1 runtime error. Numeric CSV fields are printed with 6 significant digits.

LESION_HARNESS_JOBS sets the default worker count for cohort commands;
results do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import (
    MANIFEST_NAME,
    list_patients,
    read_case,
    read_manifest,
    read_prediction,
    write_case,
    write_manifest,
)
from .errors import LesionLabError
from .evaluation import PipelineParams, concordance, evaluate_patient
from .grid import ClassGroup, GridMeta, LabelSource, PatientCase
from .lesions import extract_lesions
from .metrics import METRIC_NAMES, aggregate
from .preprocess import fit_landmarks, save_landmarks, standardize, zscore
from .sextants import SEXTANT_NAMES, partition_sextants
from .synth import (
    CHANNEL_NAMES,
    DegradationSpec,
    PhantomSpec,
    derive_dpath_lesion,
    generate_phantom,
    one_hot_predictions,
    simulate_pathologist,
    simulate_predictions,
    simulate_radiologist,
)
from .vgrid import write_volume


class UsageError(Exception):
    """Invalid flags or config values; exits with status 2."""


def fmt(value) -> str:
    """Locale-independent numeric formatting, 6 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.6g" % float(value)


def _default_jobs() -> int:
    env = os.environ.get("LESION_HARNESS_JOBS", "1")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _positive_int(value: str) -> int:
    n = int(value)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return n


GROUP_CHOICES = tuple(g.value for g in ClassGroup) + ("all",)
SOURCE_CHOICES = tuple(s.value for s in LabelSource)


def _groups_from(name: str) -> list[ClassGroup]:
    if name == "all":
        return list(ClassGroup)
    return [ClassGroup.from_name(name)]


def _sources_from(name: str, available) -> list[LabelSource]:
    if name == "all":
        return [s for s in LabelSource if s in available]
    return [LabelSource.from_tag(name)]


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset flags from the `key = value` config file, rejecting unknown
    keys. Flags given on the command line keep priority."""
    if not getattr(args, "config", None):
        return
    fields = read_manifest(args.config)
    known = {a.dest: a for a in parser._actions if a.dest not in ("help", "config")}
    unknown = set(fields) - set(known)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, raw in fields.items():
        if getattr(args, key, None) is not None:
            continue  # flag overrides file
        action = known[key]
        convert = action.type or str
        try:
            if action.nargs in (None, "?"):
                value = convert(raw)
            else:
                value = [convert(tok) for tok in raw.split()]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
        setattr(args, key, value)


def _fill_defaults(args: argparse.Namespace, defaults: dict) -> dict:
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        resolved[key] = default if value is None else value
    return resolved


def _prepare_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _pipeline_params(cfg: dict) -> PipelineParams:
    return PipelineParams(
        se_radii_mm=tuple(cfg["se_radii_mm"]),
        connectivity=cfg["connectivity"],
        min_volume_mm3=cfg["min_volume_mm3"],
        agg_threshold=cfg["agg_threshold"],
        ind_threshold=cfg["ind_threshold"],
        score_threshold=cfg["score_threshold"],
    )


PIPE_DEFAULTS = {
    "se_radii_mm": [0.5, 1.5, 0.5],
    "connectivity": 26,
    "min_volume_mm3": 250.0,
    "agg_threshold": 0.01,
    "ind_threshold": 0.01,
    "score_threshold": 0.5,
}

_D = DegradationSpec()
DEG_DEFAULTS = {
    "miss_prob": _D.miss_prob,
    "erosion_mm": _D.erosion_mm,
    "slice_keep_prob": _D.slice_keep_prob,
    "fp_rate": _D.fp_rate,
    "blur_mm": _D.blur_mm,
    "noise_sigma": _D.noise_sigma,
}


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--se-radii-mm", dest="se_radii_mm", type=float, nargs=3,
                   metavar=("R1", "R2", "R3"))
    p.add_argument("--connectivity", type=int, choices=(6, 18, 26))
    p.add_argument("--min-volume", dest="min_volume_mm3", type=float)
    p.add_argument("--agg-threshold", dest="agg_threshold", type=float)
    p.add_argument("--ind-threshold", dest="ind_threshold", type=float)
    p.add_argument("--threshold", dest="score_threshold", type=float)


def _add_degradation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--miss-prob", dest="miss_prob", type=float)
    p.add_argument("--erosion-mm", dest="erosion_mm", type=float)
    p.add_argument("--slice-keep-prob", dest="slice_keep_prob", type=float)
    p.add_argument("--fp-rate", dest="fp_rate", type=float)
    p.add_argument("--blur-mm", dest="blur_mm", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)


def _degradation(cfg: dict) -> DegradationSpec:
    return DegradationSpec(
        miss_prob=cfg["miss_prob"],
        erosion_mm=cfg["erosion_mm"],
        slice_keep_prob=cfg["slice_keep_prob"],
        fp_rate=cfg["fp_rate"],
        blur_mm=cfg["blur_mm"],
        noise_sigma=cfg["noise_sigma"],
    )


def _manifest_fields(command: str, cfg: dict) -> dict:
    fields = {"command": command, "tool_version": __version__}
    for key, value in cfg.items():
        if isinstance(value, (list, tuple)):
            fields[key] = " ".join(fmt(v) for v in value)
        else:
            fields[key] = fmt(value) if isinstance(value, float) else value
    return fields


def _patient_index(patient_id: str) -> int:
    tail = patient_id.lstrip("p")
    if not tail.isdigit():
        raise UsageError(
            f"cannot derive a generation index from patient id {patient_id!r}"
        )
    return int(tail)


def _cohort_seed(cohort_dir: str, override) -> int:
    if override is not None:
        return override
    manifest = Path(cohort_dir) / MANIFEST_NAME
    if manifest.exists():
        fields = read_manifest(manifest)
        if "master_seed" in fields:
            return int(fields["master_seed"])
    raise UsageError("cohort manifest has no master_seed; pass --seed")


# ---------------------------------------------------------------- phantom

_PHANTOM_DEFAULTS = {
    "seed": 42,
    "patients": 40,
    "grid": [96, 96, 16],
    "spacing": [0.5, 0.5, 3.0],
    "lesions_min": 1,
    "lesions_max": 3,
    "radius_min_mm": 4.0,
    "radius_max_mm": 9.0,
    "agg_fraction_min": 0.0,
    "agg_fraction_max": 1.0,
    "contrast_t2w": 0.35,
    "contrast_adc": 0.5,
    "intensity_noise": 4.0,
    "jobs": 0,
}


def _phantom_spec(cfg: dict) -> PhantomSpec:
    return PhantomSpec(
        master_seed=cfg["seed"],
        n_patients=cfg["patients"],
        grid=GridMeta(tuple(cfg["grid"]), tuple(cfg["spacing"])),
        lesions_per_patient=(cfg["lesions_min"], cfg["lesions_max"]),
        lesion_radius_mm=(cfg["radius_min_mm"], cfg["radius_max_mm"]),
        aggressive_fraction=(cfg["agg_fraction_min"], cfg["agg_fraction_max"]),
        lesion_contrast=(cfg["contrast_t2w"], cfg["contrast_adc"]),
        intensity_noise=cfg["intensity_noise"],
    )


def _phantom_worker(task) -> str:
    spec, index, out = task
    case = generate_phantom(spec, index)
    write_case(case, out)
    return case.id


def cmd_phantom(args, parser) -> int:
    _apply_config(args, parser)
    cfg = _fill_defaults(args, _PHANTOM_DEFAULTS)
    if cfg["patients"] < 1:
        raise UsageError("--patients must be at least 1")
    if cfg["seed"] < 0:
        raise UsageError("--seed must be nonnegative")
    spec = _phantom_spec(cfg)
    out = _prepare_out(args.out)
    jobs = cfg["jobs"] or _default_jobs()
    tasks = [(spec, i, str(out)) for i in range(spec.n_patients)]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            ids = pool.map(_phantom_worker, tasks)
    else:
        ids = [_phantom_worker(t) for t in tasks]
    fields = _manifest_fields("phantom", {k: v for k, v in cfg.items() if k != "jobs"})
    fields["master_seed"] = cfg["seed"]
    fields["n_patients"] = cfg["patients"]
    write_manifest(out / MANIFEST_NAME, fields)
    print(f"wrote {len(ids)} patients to {out}")
    return 0


# ---------------------------------------------------------------- lesions

def cmd_lesions(args, parser) -> int:
    _apply_config(args, parser)
    cfg = _fill_defaults(
        args, {"source": "dpathpixel", "group": "cancer", **PIPE_DEFAULTS}
    )
    params = _pipeline_params(cfg)
    source = LabelSource.from_tag(cfg["source"])
    group = ClassGroup.from_name(cfg["group"])
    out = _prepare_out(args.out)
    rows = []
    for pid in list_patients(args.cohort):
        case = read_case(args.cohort, pid)
        lesions = extract_lesions(
            case.label(source),
            group,
            connectivity=params.connectivity,
            min_volume_mm3=params.min_volume_mm3,
            agg_threshold=params.agg_threshold,
            ind_threshold=params.ind_threshold,
        )
        for i, lesion in enumerate(lesions, start=1):
            rows.append(
                [pid, str(i), lesion.grade.value, lesion.n_voxels,
                 lesion.volume_mm3, lesion.agg_fraction, lesion.ind_fraction]
            )
    _write_csv(
        out / "lesions.csv",
        ["patient_id", "lesion_id", "grade", "n_voxels", "volume_mm3",
         "agg_fraction", "ind_fraction"],
        rows,
    )
    write_manifest(out / "manifest_lesions.txt", _manifest_fields("lesions", cfg))
    print(f"wrote {len(rows)} lesions to {out / 'lesions.csv'}")
    return 0


# ---------------------------------------------------------------- sextants

def cmd_sextants(args, parser) -> int:
    _apply_config(args, parser)
    out = _prepare_out(args.out)
    rows = []
    for pid in list_patients(args.cohort):
        case = read_case(args.cohort, pid)
        smap = partition_sextants(case.mask)
        for rid, name in enumerate(SEXTANT_NAMES):
            vox = smap.region_voxels(rid)
            nx, ny, _ = case.meta.dims
            n_slices = np.unique(vox // (nx * ny)).size if vox.size else 0
            rows.append([pid, name, int(vox.size), int(n_slices)])
    _write_csv(
        out / "sextants.csv", ["patient_id", "sextant", "n_voxels", "n_slices"], rows
    )
    write_manifest(out / "manifest_sextants.txt", _manifest_fields("sextants", {}))
    print(f"wrote {out / 'sextants.csv'}")
    return 0


# ------------------------------------------------------------- concordance

def cmd_concordance(args, parser) -> int:
    defaults = {"truth": "dpathlesion", "other": "rad", "group": "cancer",
                **PIPE_DEFAULTS}
    _apply_config(args, parser)
    cfg = _fill_defaults(args, defaults)
    params = _pipeline_params(cfg)
    truth_source = LabelSource.from_tag(cfg["truth"])
    other_source = LabelSource.from_tag(cfg["other"])
    groups = _groups_from(cfg["group"])
    out = _prepare_out(args.out)
    rows = []
    stats: dict[str, list[float]] = {}
    for pid in list_patients(args.cohort):
        case = read_case(args.cohort, pid)
        truth = case.label(truth_source)
        other = case.label(other_source)
        sextants = partition_sextants(case.mask)
        for group in groups:
            lesions = extract_lesions(
                truth,
                group,
                connectivity=params.connectivity,
                min_volume_mm3=params.min_volume_mm3,
                agg_threshold=params.agg_threshold,
                ind_threshold=params.ind_threshold,
            )
            dice, auc = concordance(truth, lesions, other, group, sextants)
            rows.append([pid, group.value, dice, auc])
            stats.setdefault(f"{group.value}.dice", []).append(dice)
            if auc is not None:
                stats.setdefault(f"{group.value}.auc", []).append(auc)
    for key in sorted(stats):
        vals = np.array(stats[key], dtype=np.float64)
        group_name, metric = key.split(".")
        std = vals.std(ddof=1) if vals.size > 1 else 0.0
        rows.append([f"cohort_mean_{metric}", group_name, vals.mean(), ""])
        rows.append([f"cohort_std_{metric}", group_name, std, ""])
    _write_csv(
        out / "concordance.csv", ["patient_id", "group", "dice", "lesion_auc"], rows
    )
    write_manifest(out / "manifest_concordance.txt", _manifest_fields("concordance", cfg))
    print(f"wrote {out / 'concordance.csv'}")
    return 0


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(args, parser) -> int:
    defaults = {"truth": "dpathlesion", "groups": "cancer", **PIPE_DEFAULTS}
    _apply_config(args, parser)
    cfg = _fill_defaults(args, defaults)
    params = _pipeline_params(cfg)
    groups = _groups_from(cfg["groups"])
    out = _prepare_out(args.out)
    pids = list_patients(args.cohort)

    csv_rows = []
    summary_lines = []
    for group in groups:
        by_truth: dict[LabelSource, list] = {}
        for pid in pids:
            case = read_case(args.cohort, pid)
            pred = read_prediction(args.pred_dir, pid)
            for truth_source in _sources_from(cfg["truth"], case.labels):
                row = evaluate_patient(case, truth_source, pred, group, params)
                by_truth.setdefault(truth_source, []).append(row)
                csv_rows.append(
                    [pid, group.value, truth_source.value, row.dice, row.auc,
                     row.sensitivity, row.specificity, row.counts.tp,
                     row.counts.fp, row.counts.tn, row.counts.fn,
                     row.n_gt_lesions, row.n_negative_sextants]
                )
        for truth_source in sorted(by_truth, key=lambda s: s.value):
            report = aggregate(by_truth[truth_source])
            parts = []
            for name in METRIC_NAMES:
                stat = report.cohort[name]
                if stat.mean is None:
                    parts.append(f"{name}=undefined(n=0,undef={stat.n_undefined})")
                else:
                    parts.append(
                        f"{name}={fmt(stat.mean)}+-{fmt(stat.std)}"
                        f"(n={stat.n_defined},undef={stat.n_undefined})"
                    )
            summary_lines.append(
                f"group={group.value} truth={truth_source.value} " + " ".join(parts)
            )
    _write_csv(
        out / "evaluation.csv",
        ["patient_id", "group", "truth", "dice", "auc", "sensitivity",
         "specificity", "tp", "fp", "tn", "fn", "n_gt_lesions",
         "n_negative_sextants"],
        csv_rows,
    )
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    write_manifest(out / "manifest_evaluate.txt", _manifest_fields("evaluate", cfg))
    print(f"wrote {out / 'evaluation.csv'}")
    return 0


# ---------------------------------------------------------------- simulate

def cmd_simulate(args, parser) -> int:
    defaults = {"what": "all", "seed": None, **DEG_DEFAULTS, **PIPE_DEFAULTS}
    _apply_config(args, parser)
    cfg = _fill_defaults(args, defaults)
    params = _pipeline_params(cfg)
    dspec = _degradation(cfg)
    seed = _cohort_seed(args.cohort, cfg["seed"])
    cfg["seed"] = seed
    out = _prepare_out(args.out)
    want_labels = cfg["what"] in ("labels", "all")
    want_predictions = cfg["what"] in ("predictions", "all")
    if cfg["what"] not in ("labels", "predictions", "all"):
        raise UsageError("--what must be labels, predictions or all")
    n = 0
    for pid in list_patients(args.cohort):
        case = read_case(args.cohort, pid)
        index = _patient_index(pid)
        dpl = derive_dpath_lesion(case, params)
        case.labels[LabelSource.DPATH_LESION] = dpl
        if want_labels:
            write_volume(dpl, out / f"{pid}_label_dpathlesion.vgh")
            path_label = simulate_pathologist(case, dspec, seed, index, params)
            write_volume(path_label, out / f"{pid}_label_path.vgh")
            rad_label = simulate_radiologist(case, dspec, seed, index, params)
            write_volume(rad_label, out / f"{pid}_label_rad.vgh")
        if want_predictions:
            pred = simulate_predictions(case, dspec, seed, index, params)
            write_volume(pred, out / f"{pid}_prob.vgh")
        n += 1
    write_manifest(out / "manifest_simulate.txt", _manifest_fields("simulate", cfg))
    print(f"simulated {n} patients into {out}")
    return 0


# -------------------------------------------------------------- standardize

def cmd_standardize(args, parser) -> int:
    defaults = {"channel": "t2w", "mask_scoped": False, "zscore": False}
    _apply_config(args, parser)
    cfg = _fill_defaults(args, defaults)
    out = _prepare_out(args.out)
    pids = list_patients(args.cohort)
    cases = [read_case(args.cohort, pid) for pid in pids]
    for case in cases:
        if cfg["channel"] not in case.intensities:
            raise UsageError(
                f"patient {case.id} has no intensity channel {cfg['channel']!r}"
            )
    volumes = [case.intensities[cfg["channel"]] for case in cases]
    masks = [case.mask for case in cases] if cfg["mask_scoped"] else None
    lm = fit_landmarks(volumes, masks)
    save_landmarks(lm, out / "landmarks.txt")
    for case, vol in zip(cases, volumes):
        mask = case.mask if cfg["mask_scoped"] else None
        result = standardize(vol, lm, mask)
        if cfg["zscore"]:
            result = zscore(result, mask)
        write_volume(result, out / f"{case.id}_int_{cfg['channel']}.vgh")
    write_manifest(out / "manifest_standardize.txt", _manifest_fields("standardize", cfg))
    print(f"standardized {len(cases)} volumes into {out}")
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionlab",
        description="Volumetric label processing and lesion-level evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--patients", type=_positive_int)
    p.add_argument("--grid", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    p.add_argument("--spacing", type=float, nargs=3, metavar=("SX", "SY", "SZ"))
    p.add_argument("--lesions-min", dest="lesions_min", type=int)
    p.add_argument("--lesions-max", dest="lesions_max", type=int)
    p.add_argument("--radius-min-mm", dest="radius_min_mm", type=float)
    p.add_argument("--radius-max-mm", dest="radius_max_mm", type=float)
    p.add_argument("--agg-fraction-min", dest="agg_fraction_min", type=float)
    p.add_argument("--agg-fraction-max", dest="agg_fraction_max", type=float)
    p.add_argument("--contrast-t2w", dest="contrast_t2w", type=float)
    p.add_argument("--contrast-adc", dest="contrast_adc", type=float)
    p.add_argument("--intensity-noise", dest="intensity_noise", type=float)
    p.add_argument("--jobs", type=_positive_int)
    p.set_defaults(func=cmd_phantom, _parser=p)

    p = sub.add_parser("lesions", help="extract graded lesions to CSV")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--source", choices=SOURCE_CHOICES)
    p.add_argument("--group", choices=GROUP_CHOICES)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_lesions, _parser=p)

    p = sub.add_parser("sextants", help="sextant partition statistics")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_sextants, _parser=p)

    p = sub.add_parser("concordance", help="label-vs-label dice and lesion AUC")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--truth", choices=SOURCE_CHOICES)
    p.add_argument("--other", choices=SOURCE_CHOICES)
    p.add_argument("--group", choices=GROUP_CHOICES)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_concordance, _parser=p)

    p = sub.add_parser("evaluate", help="sextant-based lesion-level evaluation")
    p.add_argument("--cohort", required=True)
    p.add_argument("--pred-dir", dest="pred_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--truth", choices=SOURCE_CHOICES + ("all",))
    p.add_argument("--groups", choices=GROUP_CHOICES)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_evaluate, _parser=p)

    p = sub.add_parser("simulate", help="derive degraded labels and predictions")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--what", choices=("labels", "predictions", "all"))
    p.add_argument("--seed", type=int)
    _add_degradation_flags(p)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_simulate, _parser=p)

    p = sub.add_parser("standardize", help="histogram-landmark standardization")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--channel", choices=CHANNEL_NAMES)
    p.add_argument("--mask-scoped", dest="mask_scoped", action="store_const", const=True)
    p.add_argument("--zscore", action="store_const", const=True)
    p.set_defaults(func=cmd_standardize, _parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args._parser)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LesionLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
