import fd_isac as fi
from fd_isac.experiment import cmd_beampattern, cmd_solve, cmd_sweep
from fd_isac.validate import cmd_validate

import argparse
import sys

from str2bool import str2bool

parser = argparse.ArgumentParser(
    prog='python -m fd_isac',
    formatter_class=argparse.ArgumentDefaultsHelpFormatter)
subparsers = parser.add_subparsers(dest='command', required=True)

solve = subparsers.add_parser('solve', help='joint design for one config')
solve.add_argument('--config', type=str, default=str(fi.CONFIGS_DIR / 'default.json'),
                   help='scenario config (json or yaml)')
solve.add_argument('--out-dir', type=str, default=None,
                   help='output folder. defaults to results/solve')
solve.add_argument('--seed', type=int, default=None,
                   help='overrides the config rng_seed')
solve.add_argument('--dump-problems', type=str2bool, default=False,
                   help='write every conic subproblem as sparse triplets')

beampattern = subparsers.add_parser('beampattern', help='beampattern of the optimized design')
beampattern.add_argument('--config', type=str, default=str(fi.CONFIGS_DIR / 'default.json'))
beampattern.add_argument('--out-dir', type=str, default=None)
beampattern.add_argument('--seed', type=int, default=None)
beampattern.add_argument('--grid-step', type=float, default=1.0,
                         help='angle step over [-90, 90] deg')

sweep = subparsers.add_parser('sweep', help='power sweep over a grid, seeds and schemes')
sweep.add_argument('--config', type=str, default=str(fi.SWEEPS_DIR / 'radar-threshold.json'),
                   help='sweep spec (json or yaml)')
sweep.add_argument('--out-dir', type=str, default=None)
sweep.add_argument('--seed', type=int, default=None,
                   help='overrides the base config rng_seed')
sweep.add_argument('--jobs', type=int, default=1,
                   help='parallel worker processes')

validate = subparsers.add_parser('validate', help='run the oracle suites')
validate.add_argument('--out-dir', type=str, default=None)
validate.add_argument('--seed', type=int, default=None)
validate.add_argument('--quick', type=str2bool, default=False,
                      help='smaller sample counts')

args = parser.parse_args()

if args.command == 'solve':
    code = cmd_solve(args.config, args.out_dir, seed=args.seed, dump_problems=args.dump_problems)
elif args.command == 'beampattern':
    code = cmd_beampattern(args.config, args.out_dir, grid_step=args.grid_step, seed=args.seed)
elif args.command == 'sweep':
    code = cmd_sweep(args.config, args.out_dir, jobs=args.jobs, seed=args.seed)
else:
    code = cmd_validate(args.out_dir, quick=args.quick, seed=args.seed)

sys.exit(code)
