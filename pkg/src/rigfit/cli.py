"""Command-line driver: fit, eval, normalize, synth, inspect.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 internal error.
Machine output goes to stdout; diagnostics go to stderr via logging.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .bvh import BvhDocument, parse_bvh, write_bvh
from .errors import ValidationError
from .fit import FitConfig, fit_sequence
from .metrics import SkeletonInstance, cd_skeleton, mpjpe, mpjve
from .normalize import remove_global_translation, sequence_normalize
from .skeleton import AnimationClip, JointTrajectory, Pose, fk_sequence
from .trajectory import load_trajectory, save_trajectory, trajectory_to_dict

log = logging.getLogger("rigfit")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _configure_logging():
    level = os.environ.get("RIGFIT_LOG", "warn").lower()
    levels = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    logging.basicConfig(
        stream=sys.stderr,
        level=levels.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _read_text(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_side(path):
    """Load a BVH or trajectory JSON evaluation input.

    Returns (trajectory, joint_names, parents or None). BVH inputs run
    through forward kinematics first.
    """
    if path.endswith(".bvh"):
        doc = parse_bvh(_read_text(path))
        traj = fk_sequence(doc.skeleton, doc.clip)
        return traj, list(doc.skeleton.joint_names), doc.skeleton.parents
    traj, names = load_trajectory(path)
    return traj, names, None


def _normalize_side(traj):
    traj, _roots = remove_global_translation(traj)
    traj, _transform = sequence_normalize(traj)
    return traj


def cmd_fit(args):
    doc = parse_bvh(_read_text(args.rig))
    traj, names = load_trajectory(args.traj)
    name_map = {}
    if args.map:
        with open(args.map, "r", encoding="utf-8") as fh:
            name_map = json.load(fh)
        if not isinstance(name_map, dict):
            raise ValidationError("--map file must be a JSON object of rig->traj names")
    rig_names = doc.skeleton.joint_names
    traj_index = {n: i for i, n in enumerate(names)}
    columns = []
    unmatched = []
    for rig_name in rig_names:
        key = name_map.get(rig_name, rig_name)
        if key in traj_index:
            columns.append(traj_index[key])
        else:
            unmatched.append(rig_name)
    if unmatched:
        raise ValidationError(
            "trajectory has no joints named: " + ", ".join(unmatched)
        )
    reordered = JointTrajectory(
        positions=traj.positions[:, columns, :],
        mask=traj.mask[columns],
        fps=traj.fps,
    )
    config = FitConfig(
        lambda_prior=args.lambda_prior,
        lambda_twist=args.lambda_twist,
        max_iters=args.max_iters,
        fit_root_translation=args.fit_root_translation,
    )
    clip, reports = fit_sequence(doc.skeleton, reordered, config)
    out_doc = BvhDocument(
        skeleton=doc.skeleton,
        channel_layout=doc.channel_layout,
        end_sites=doc.end_sites,
        clip=clip,
        frame_time=1.0 / clip.fps,
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(write_bvh(out_doc))
    fk = fk_sequence(doc.skeleton, clip)
    fk_masked = JointTrajectory(positions=fk.positions, mask=reordered.mask, fps=fk.fps)
    mpjpe_fk = mpjpe(fk_masked, reordered)
    log.info("fit wrote %s (FK MPJPE %.3g)", args.out, mpjpe_fk)
    if args.report:
        report = {
            "frames": [
                {
                    "loss_pos": r["loss_pos"],
                    "loss_prior": r["loss_prior"],
                    "loss_twist": r["loss_twist"],
                    "iters": r["iters"],
                }
                for r in reports
            ],
            "mpjpe_fk": mpjpe_fk,
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh)
            fh.write("\n")
    return EXIT_OK


def cmd_eval(args):
    pred, _pred_names, pred_parents = _load_side(args.pred)
    gt, _gt_names, gt_parents = _load_side(args.gt)
    space = "input"
    if args.normalize:
        pred = _normalize_side(pred)
        gt = _normalize_side(gt)
        space = "normalized"
    wanted = ["mpjpe", "mpjve", "cds"] if args.metric == "all" else [args.metric]
    report = {"space": space}
    if "mpjpe" in wanted:
        report["mpjpe"] = mpjpe(pred, gt)
    if "mpjve" in wanted:
        report["mpjve"] = mpjve(pred, gt)
    if "cds" in wanted:
        if pred_parents is None and gt_parents is None:
            raise ValidationError(
                "cds needs a kinematic hierarchy; at least one input must be BVH"
            )
        if pred_parents is None:
            if pred.joint_count != len(gt_parents):
                raise ValidationError("cannot borrow parents: joint counts differ")
            pred_parents = gt_parents
        if gt_parents is None:
            if gt.joint_count != len(pred_parents):
                raise ValidationError("cannot borrow parents: joint counts differ")
            gt_parents = pred_parents
        if pred.frame_count != gt.frame_count:
            raise ValidationError("frame count mismatch between pred and gt")
        values = [
            cd_skeleton(
                SkeletonInstance(pred.positions[t], pred_parents),
                SkeletonInstance(gt.positions[t], gt_parents),
            )
            for t in range(pred.frame_count)
        ]
        report["cds"] = float(np.mean(values))
        report["cds_per_frame"] = values
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_normalize(args):
    traj, names = load_trajectory(args.infile)
    traj, roots = remove_global_translation(traj)
    traj, transform = sequence_normalize(traj)
    save_trajectory(args.out, traj, names)
    if args.transform:
        with open(args.transform, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "center": transform.center.tolist(),
                    "scale": transform.scale,
                    "root_positions": roots.tolist(),
                },
                fh,
            )
            fh.write("\n")
    return EXIT_OK


def _smooth_random_clip(skeleton, frames, rng, fps):
    """Deterministic smooth clip: per-joint sinusoidal axis-angle trajectories."""
    n = skeleton.joint_count
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    amps = rng.uniform(0.2, 0.7, size=n)
    freqs = rng.uniform(0.5, 2.0, size=n)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    t_amp = rng.uniform(0.0, 0.3, size=3)
    t_phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
    poses = []
    denom = max(frames, 2)
    for t in range(frames):
        s = 2.0 * np.pi * t / denom
        angles = amps * np.sin(freqs * s + phases)
        rot = angles[:, None] * axes
        root = t_amp * np.sin(s + t_phase)
        poses.append(Pose(rotations=rot, root_translation=root))
    return AnimationClip(frames=tuple(poses), fps=fps)


def cmd_synth(args):
    doc = parse_bvh(_read_text(args.rig))
    if args.frames < 1:
        raise ValidationError("--frames must be >= 1")
    rng = np.random.default_rng(args.seed)
    clip = _smooth_random_clip(doc.skeleton, args.frames, rng, fps=1.0 / doc.frame_time)
    out_doc = BvhDocument(
        skeleton=doc.skeleton,
        channel_layout=doc.channel_layout,
        end_sites=doc.end_sites,
        clip=clip,
        frame_time=doc.frame_time,
    )
    bvh_path = args.out + ".bvh"
    json_path = args.out + ".json"
    with open(bvh_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(write_bvh(out_doc))
    traj = fk_sequence(doc.skeleton, clip)
    save_trajectory(json_path, traj, doc.skeleton.joint_names)
    log.info("synth wrote %s and %s", bvh_path, json_path)
    return EXIT_OK


def cmd_inspect(args):
    doc = parse_bvh(_read_text(args.rig))
    skel = doc.skeleton
    lengths = np.linalg.norm(skel.offsets, axis=1)
    print(f"joints: {skel.joint_count}  frames: {doc.clip.frame_count}  "
          f"frame_time: {doc.frame_time:g}")
    for i in range(skel.joint_count):
        p = skel.parents[i]
        parent_name = "-" if p < 0 else skel.joint_names[p]
        chans = doc.channel_layout[i]
        order = "".join(c[0] for c in chans if c.endswith("rotation"))
        ox, oy, oz = skel.offsets[i]
        marker = " [end site]" if i in doc.end_sites else ""
        print(
            f"  {i:3d} {skel.joint_names[i]:<20} parent={parent_name:<20} "
            f"offset=({ox:.4f}, {oy:.4f}, {oz:.4f}) length={lengths[i]:.4f} "
            f"order={order}{marker}"
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rigfit",
        description="Fit rotation-based skeletal animation to 3D joint "
        "trajectories and evaluate the result.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a trajectory onto a rig and write BVH")
    p.add_argument("--rig", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda-prior", type=float, default=FitConfig.lambda_prior)
    p.add_argument("--lambda-twist", type=float, default=FitConfig.lambda_twist)
    p.add_argument("--max-iters", type=int, default=FitConfig.max_iters)
    p.add_argument("--fit-root-translation", action="store_true")
    p.add_argument("--map", help="JSON object mapping rig joint names to trajectory names")
    p.add_argument("--report", help="write a per-frame loss report JSON here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="compare two animations or trajectories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metric", choices=["mpjpe", "mpjve", "cds", "all"], default="all")
    p.add_argument("--normalize", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("normalize", help="normalize a trajectory into [-1,1]^3")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transform", help="write the inverse transform JSON here")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("synth", help="generate a deterministic test clip + trajectory")
    p.add_argument("--rig", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix (.bvh/.json added)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="dump a rig's joint tree")
    p.add_argument("--rig", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except Exception:  # pragma: no cover - defensive
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
