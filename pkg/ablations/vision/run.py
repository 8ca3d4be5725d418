import argparse

from pbpvision.configs import get_base_parser

from .src import (
    HogTiltStudy,
    LearningEffectStudy,
    MdeBootstrapStudy,
    MotionTrendStudy,
    PbpConvergenceStudy,
    SfmComparisonStudy,
)

OPTIONS_STUDIES = ["pbp_convergence", "hog_tilt", "learning_effect", "mde_bootstrap", "motion_trend", "sfm_comparison"]


def parse_args():
    parser = argparse.ArgumentParser(parents=[get_base_parser()])
    parser.add_argument("--studies", nargs="+", default=OPTIONS_STUDIES, choices=OPTIONS_STUDIES)
    parser.add_argument("--debug", action="store_true", default=False)
    args = parser.parse_args()
    return args


if __name__ == "__main__":
    args = parse_args()
    seed = args.seed if args.seed is not None else 42
    threads = args.threads or 1

    exp_name = "vision"
    if args.debug:
        exp_name += "-DEBUG"
    if seed != 42:
        exp_name += f"-seed_{seed}"

    print("Running vision ablations: ")
    print(exp_name)

    if args.debug:
        studies = [
            PbpConvergenceStudy(exp_name, seed, n_seeds=3),
            HogTiltStudy(exp_name, seed, n_seeds=1),
            LearningEffectStudy(exp_name, seed, n_pairs=2, n_holdout=1, iters=2, rounds=2),
            MdeBootstrapStudy(exp_name, seed, n_train=2, n_test=1, iters=1),
            MotionTrendStudy(exp_name, seed, n_scenes=1),
            SfmComparisonStudy(exp_name, seed, n_runs=5, sweep_runs=2, threads=threads),
        ]
    else:
        studies = [
            PbpConvergenceStudy(exp_name, seed),
            HogTiltStudy(exp_name, seed),
            LearningEffectStudy(exp_name, seed),
            MdeBootstrapStudy(exp_name, seed),
            MotionTrendStudy(exp_name, seed),
            SfmComparisonStudy(exp_name, seed, threads=threads),
        ]

    for study in studies:
        if study.name in args.studies:
            study.run()
