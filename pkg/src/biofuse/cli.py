"""Command-line interface.

Subcommands:

    train      fit face and ear eigenspace models from a dataset tree
    enroll     project samples into the models and write the template store
    verify     check a claimed identity from face + ear probe images
    identify   search the store for the best-matching enrolled subject
    evaluate   full sweep + fused report on a train/probe split
    sweep      per-modality threshold sweeps only

Exit codes: 0 success (verify/identify: accept), 1 reject, 2 error.

Values come from flags first, then an optional JSON config file (--config),
then built-in defaults. All output paths are plain files; evaluate and
sweep write CSV sweeps, PNG curve plots, and a JSON report under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .eigenspace import EigenModel, load_model, project, save_model
from .evaluation import EvaluationReport, Protocol, write_sweep_csv
from .figures import render_sweep
from .fusion import FusionPolicy, fuse_attempt
from .gallery import (
    DEFAULT_EAR_SIZE,
    DEFAULT_FACE_SIZE,
    EnrollmentStore,
    enroll,
    load_store,
    load_subject_samples,
    save_store,
    scan_dataset,
)
from .images import Modality, load_image
from .matching import Decision, DecisionPolicy, DecisionReason, quality_rejected, verify
from .pipeline import (
    outcome_to_dict,
    parse_split,
    run_evaluation,
    split_manifest,
    train_models,
)
from .quality import QualityPolicy, assess


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"malformed size {text!r}, expected WIDTHxHEIGHT")
    try:
        width, height = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"malformed size {text!r}, expected WIDTHxHEIGHT") from None
    if width < 1 or height < 1:
        raise ValueError(f"size must be positive, got {text!r}")
    return width, height


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return config


def _get(args: argparse.Namespace, config: dict, name: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _require(value, flag: str):
    if value is None:
        raise ValueError(f"missing required option {flag}")
    return value


def _fusion_policy(args, config) -> FusionPolicy:
    return FusionPolicy(
        samples_per_modality=int(_get(args, config, "samples", 3)),
        majority_min=int(_get(args, config, "majority", 2)),
    )


def _sizes(args, config) -> tuple[tuple[int, int], tuple[int, int]]:
    face = _parse_size(str(_get(args, config, "face_size", "%dx%d" % DEFAULT_FACE_SIZE)))
    ear = _parse_size(str(_get(args, config, "ear_size", "%dx%d" % DEFAULT_EAR_SIZE)))
    return face, ear


def _load_models(args, config) -> tuple[EigenModel, EigenModel]:
    face = load_model(_require(_get(args, config, "face_model"), "--face-model"))
    ear = load_model(_require(_get(args, config, "ear_model"), "--ear-model"))
    if face.modality is not Modality.FACE:
        raise ValueError("--face-model does not hold a face model")
    if ear.modality is not Modality.EAR:
        raise ValueError("--ear-model does not hold an ear model")
    return face, ear


def _print_warnings(warnings) -> None:
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dataset = _require(_get(args, config, "dataset"), "--dataset")
    face_path = _require(_get(args, config, "face_model"), "--face-model")
    ear_path = _require(_get(args, config, "ear_model"), "--ear-model")
    face_size, ear_size = _sizes(args, config)

    manifest = scan_dataset(dataset, face_size=face_size, ear_size=ear_size)
    if not manifest.subjects:
        raise ValueError("no subjects")
    _print_warnings(manifest.warnings)

    splits = None
    split_text = _get(args, config, "split")
    if split_text is not None:
        splits, split_warnings = split_manifest(
            manifest, parse_split(str(split_text)), seed=_get(args, config, "seed")
        )
        _print_warnings(split_warnings)

    k = _get(args, config, "k")
    face_model, ear_model, stats = train_models(
        manifest, splits, k=int(k) if k is not None else None
    )
    for st in stats:
        print(
            f"{st.modality.value}: {st.sample_count} training samples, "
            f"k={st.k}, cumulative variance {st.variance_fraction:.6f}"
        )
    save_model(face_model, face_path)
    print(f"wrote face model: {face_path}")
    save_model(ear_model, ear_path)
    print(f"wrote ear model: {ear_path}")
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dataset = _require(_get(args, config, "dataset"), "--dataset")
    store_path = _require(_get(args, config, "store"), "--store")
    face_model, ear_model = _load_models(args, config)
    manifest = scan_dataset(
        dataset,
        face_size=(face_model.image_width, face_model.image_height),
        ear_size=(ear_model.image_width, ear_model.image_height),
    )
    if not manifest.subjects:
        raise ValueError("no subjects")
    _print_warnings(manifest.warnings)

    models = {Modality.FACE: face_model, Modality.EAR: ear_model}
    store = EnrollmentStore()
    split_text = _get(args, config, "split")
    if split_text is not None:
        splits, warnings = split_manifest(
            manifest, parse_split(str(split_text)), seed=_get(args, config, "seed")
        )
        _print_warnings(warnings)
        for s in splits:
            entry = manifest.subject(s.subject_id)
            for modality in (Modality.FACE, Modality.EAR):
                samples = load_subject_samples(
                    manifest, entry, modality, paths=s.train_paths[modality]
                )
                enroll(store, models[modality], samples, s.subject_id)
    else:
        for entry in manifest.subjects:
            for modality in (Modality.FACE, Modality.EAR):
                samples = load_subject_samples(manifest, entry, modality)
                if samples:
                    enroll(store, models[modality], samples, entry.subject_id)

    save_store(store, store_path)
    n_face = len(store.templates(Modality.FACE))
    n_ear = len(store.templates(Modality.EAR))
    print(
        f"enrolled {len(store.subjects())} subjects: "
        f"{n_face} face + {n_ear} ear templates"
    )
    print(f"wrote store: {store_path}")
    return 0


def _probe_votes(
    paths: list[str],
    model: EigenModel,
    templates,
    claimed: str,
    policy: DecisionPolicy,
    quality: QualityPolicy,
) -> list[tuple[float | None, Decision]]:
    """Quality-gate and verify each probe image; returns (ncc, vote) pairs."""
    votes = []
    for path in paths:
        sample = load_image(
            path, model.image_width, model.image_height, model.modality
        )
        try:
            score = assess(quality, sample)
            ncc_value, passed = score.ncc, score.passed
        except ValueError:
            ncc_value, passed = None, False
        if not passed:
            votes.append((ncc_value, quality_rejected(model.modality)))
            continue
        probe = project(model, sample)
        votes.append((ncc_value, verify(claimed, templates, probe, policy)))
    return votes


def _print_votes(name: str, votes) -> None:
    for i, (ncc_value, vote) in enumerate(votes, start=1):
        ncc_text = "undefined" if ncc_value is None else f"{ncc_value:.6f}"
        verdict = "accept" if vote.accept else "reject"
        if vote.reason is DecisionReason.QUALITY_REJECTED:
            print(f"{name} sample {i}: ncc={ncc_text} gated vote=reject")
        else:
            print(
                f"{name} sample {i}: ncc={ncc_text} "
                f"distance={vote.score.distance:.6f} vote={verdict}"
            )


def _verify_inputs(args, config):
    face_model, ear_model = _load_models(args, config)
    store = load_store(
        _require(_get(args, config, "store"), "--store"),
        face_model=face_model,
        ear_model=ear_model,
    )
    policy = _fusion_policy(args, config)
    min_ncc = float(_get(args, config, "min_ncc", 0.0))
    face_threshold = _require(_get(args, config, "face_threshold"), "--face-threshold")
    ear_threshold = _require(_get(args, config, "ear_threshold"), "--ear-threshold")
    face_paths = list(args.face or [])
    ear_paths = list(args.ear or [])
    for name, paths in (("--face", face_paths), ("--ear", ear_paths)):
        if len(paths) != policy.samples_per_modality:
            raise ValueError(
                f"{name} needs exactly {policy.samples_per_modality} image paths, "
                f"got {len(paths)}"
            )
    return (
        face_model,
        ear_model,
        store,
        policy,
        min_ncc,
        DecisionPolicy(float(face_threshold)),
        DecisionPolicy(float(ear_threshold)),
        face_paths,
        ear_paths,
    )


def cmd_verify(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    (
        face_model,
        ear_model,
        store,
        policy,
        min_ncc,
        face_policy,
        ear_policy,
        face_paths,
        ear_paths,
    ) = _verify_inputs(args, config)
    claimed = args.claim

    face_quality = QualityPolicy(reference=face_model.mean_image(), min_ncc=min_ncc)
    ear_quality = QualityPolicy(reference=ear_model.mean_image(), min_ncc=min_ncc)
    face_votes = _probe_votes(
        face_paths, face_model, store.templates(Modality.FACE),
        claimed, face_policy, face_quality,
    )
    ear_votes = _probe_votes(
        ear_paths, ear_model, store.templates(Modality.EAR),
        claimed, ear_policy, ear_quality,
    )

    print(f"claim: {claimed}")
    _print_votes("face", face_votes)
    _print_votes("ear", ear_votes)
    fused = fuse_attempt(
        [v for _, v in face_votes], [v for _, v in ear_votes], policy
    )
    print(
        f"face verdict: {'accept' if fused.face.accept else 'reject'} "
        f"({fused.face.accept_count}/{policy.samples_per_modality} accepts, "
        f"need {policy.majority_min})"
    )
    print(
        f"ear verdict: {'accept' if fused.ear.accept else 'reject'} "
        f"({fused.ear.accept_count}/{policy.samples_per_modality} accepts, "
        f"need {policy.majority_min})"
    )
    print(f"fused: {'ACCEPT' if fused.accept else 'REJECT'}")
    return 0 if fused.accept else 1


def cmd_identify(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    (
        face_model,
        ear_model,
        store,
        policy,
        min_ncc,
        face_policy,
        ear_policy,
        face_paths,
        ear_paths,
    ) = _verify_inputs(args, config)

    subjects = store.subjects()
    if not subjects:
        raise ValueError("store holds no subjects")

    face_quality = QualityPolicy(reference=face_model.mean_image(), min_ncc=min_ncc)
    ear_quality = QualityPolicy(reference=ear_model.mean_image(), min_ncc=min_ncc)

    # Every candidate subject gets the full fused verification; accepted
    # candidates are ranked by summed per-modality best distances.
    results = []
    for candidate in subjects:
        face_votes = _probe_votes(
            face_paths, face_model, store.templates(Modality.FACE),
            candidate, face_policy, face_quality,
        )
        ear_votes = _probe_votes(
            ear_paths, ear_model, store.templates(Modality.EAR),
            candidate, ear_policy, ear_quality,
        )
        fused = fuse_attempt(
            [v for _, v in face_votes], [v for _, v in ear_votes], policy
        )
        face_best = min(
            (v.score.distance for _, v in face_votes if v.score is not None),
            default=float("inf"),
        )
        ear_best = min(
            (v.score.distance for _, v in ear_votes if v.score is not None),
            default=float("inf"),
        )
        results.append((candidate, fused, face_best + ear_best))
        print(
            f"{candidate}: face {fused.face.accept_count}/{policy.samples_per_modality} "
            f"ear {fused.ear.accept_count}/{policy.samples_per_modality} "
            f"fused={'accept' if fused.accept else 'reject'}"
        )

    accepted = [(score, candidate) for candidate, fused, score in results if fused.accept]
    if not accepted:
        print("identified: none")
        return 1
    accepted.sort()
    print(f"identified: {accepted[0][1]}")
    return 0


def _emit_outcome(outcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for evaluation in (outcome.face, outcome.ear):
        name = evaluation.modality.value
        write_sweep_csv(evaluation.reports, out_dir / f"{name}_sweep.csv")
        render_sweep(
            evaluation.reports,
            out_dir / f"{name}_sweep.png",
            title=f"{name} threshold sweep",
            best_threshold=evaluation.best.threshold,
        )
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="ascii") as fh:
        json.dump(outcome_to_dict(outcome), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _format_table(
    face: EvaluationReport, ear: EvaluationReport, fused: EvaluationReport
) -> str:
    rows = [
        ("Recognition Rate", face.recognition_rate, ear.recognition_rate,
         fused.recognition_rate),
        ("FAR", face.far, ear.far, fused.far),
        ("FRR", face.frr, ear.frr, fused.frr),
    ]
    lines = [f"{'':<18}{'Face':>10}{'Ear':>10}{'Multimodal Fusion':>19}"]
    for label, f, e, m in rows:
        lines.append(
            f"{label:<18}{f * 100.0:>9.3f}%{e * 100.0:>9.3f}%{m * 100.0:>18.3f}%"
        )
    return "\n".join(lines)


def _evaluation_outcome(args, config):
    dataset = _require(_get(args, config, "dataset"), "--dataset")
    face_model, ear_model = _load_models(args, config)
    manifest = scan_dataset(
        dataset,
        face_size=(face_model.image_width, face_model.image_height),
        ear_size=(ear_model.image_width, ear_model.image_height),
    )
    store = None
    store_path = _get(args, config, "store")
    if store_path is not None:
        store = load_store(store_path, face_model=face_model, ear_model=ear_model)
    protocol = Protocol(str(_get(args, config, "protocol", "identification")))
    outcome = run_evaluation(
        manifest,
        parse_split(str(_get(args, config, "split", "4:3"))),
        face_model,
        ear_model,
        store=store,
        seed=_get(args, config, "seed"),
        min_ncc=float(_get(args, config, "min_ncc", 0.0)),
        fusion_policy=_fusion_policy(args, config),
        protocol=protocol,
        workers=int(_get(args, config, "workers", 1)),
    )
    _print_warnings(outcome.warnings)
    return outcome


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    outcome = _evaluation_outcome(args, config)
    out_dir = Path(_get(args, config, "out", "."))
    _emit_outcome(outcome, out_dir)

    print(f"protocol: {outcome.protocol.value}")
    print(f"face threshold: {outcome.face.best.threshold!r}")
    print(f"ear threshold: {outcome.ear.best.threshold!r}")
    print(_format_table(outcome.face.best, outcome.ear.best, outcome.fused.report))
    print(f"wrote report: {out_dir / 'report.json'}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    outcome = _evaluation_outcome(args, config)
    out_dir = Path(_get(args, config, "out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    for evaluation in (outcome.face, outcome.ear):
        name = evaluation.modality.value
        write_sweep_csv(evaluation.reports, out_dir / f"{name}_sweep.csv")
        render_sweep(
            evaluation.reports,
            out_dir / f"{name}_sweep.png",
            title=f"{name} threshold sweep",
            best_threshold=evaluation.best.threshold,
        )
        best = evaluation.best
        print(
            f"{name}: best threshold {best.threshold!r} "
            f"recognition {best.recognition_rate:.6f} "
            f"far {best.far:.6f} frr {best.frr:.6f}"
        )
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags win over it")
    parser.add_argument("--dataset", help="dataset root directory")
    parser.add_argument("--face-model", dest="face_model", help="face model JSON path")
    parser.add_argument("--ear-model", dest="ear_model", help="ear model JSON path")


def _add_probe_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", help="enrollment store JSON path")
    parser.add_argument("--face-threshold", dest="face_threshold", type=float,
                        help="face accept distance bound")
    parser.add_argument("--ear-threshold", dest="ear_threshold", type=float,
                        help="ear accept distance bound")
    parser.add_argument("--min-ncc", dest="min_ncc", type=float,
                        help="quality gate threshold (default 0, gate off)")
    parser.add_argument("--samples", type=int, help="samples per modality (default 3)")
    parser.add_argument("--majority", type=int,
                        help="accepts needed within a modality (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biofuse",
        description="Face + ear eigenspace recognition with decision-level fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train face and ear models")
    _add_common(p)
    p.add_argument("--k", type=int, help="basis size (default: 95 percent variance)")
    p.add_argument("--split", help="TRAIN:PROBE; train on the training part only")
    p.add_argument("--seed", type=int, help="shuffle the split with this seed")
    p.add_argument("--face-size", dest="face_size", help="face WIDTHxHEIGHT")
    p.add_argument("--ear-size", dest="ear_size", help="ear WIDTHxHEIGHT")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enroll", help="build the template store")
    _add_common(p)
    p.add_argument("--store", help="output store path")
    p.add_argument("--split", help="TRAIN:PROBE; enroll the training part only")
    p.add_argument("--seed", type=int, help="shuffle the split with this seed")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="verify a claimed identity")
    _add_common(p)
    _add_probe_flags(p)
    p.add_argument("--claim", required=True, help="claimed subject id")
    p.add_argument("--face", nargs="+", help="face probe image paths")
    p.add_argument("--ear", nargs="+", help="ear probe image paths")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identify", help="search for the best enrolled match")
    _add_common(p)
    _add_probe_flags(p)
    p.add_argument("--face", nargs="+", help="face probe image paths")
    p.add_argument("--ear", nargs="+", help="ear probe image paths")
    p.set_defaults(func=cmd_identify)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "sweep + fused report on a split"),
        ("sweep", cmd_sweep, "per-modality threshold sweeps"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--store", help="existing store (default: enroll in memory)")
        p.add_argument("--split", help="TRAIN:PROBE split (default 4:3)")
        p.add_argument("--seed", type=int, help="shuffle the split with this seed")
        p.add_argument("--min-ncc", dest="min_ncc", type=float,
                       help="quality gate threshold")
        p.add_argument("--samples", type=int, help="samples per modality per attempt")
        p.add_argument("--majority", type=int, help="accepts needed within a modality")
        p.add_argument("--protocol", choices=[pr.value for pr in Protocol],
                       help="recognition-rate protocol (default identification)")
        p.add_argument("--workers", type=int, help="probe scoring threads (default 1)")
        p.add_argument("--out", help="output directory (default .)")
        p.set_defaults(func=func)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
