from argparse import ArgumentParser, RawTextHelpFormatter
from sys import argv, exit
import logging

from app import App
from commands import COMMANDS

def parse_args(): # pragma: no cover
    """
    Parse the command line arguments.

    """
    banner = """
        _
   __ _| |__  _ __   __ _  ___ ___
  / _` | '_ \\| '_ \\ / _` |/ __/ __|
 | (_| | |_) | | | | (_| | (_| (__
  \\__,_|_.__/|_| |_|\\__,_|\\___\\___|
 (ab)normal trajectories, (acc)essibility sets and conjugate times"""

    parser = ArgumentParser(
        prog='abnacc',
        description=banner,
        formatter_class=RawTextHelpFormatter
    )

    parser.add_argument(
        '-c',
        '--config',
        help='configuration file (INI format)',
        required=True
    )

    parser.add_argument(
        '-o',
        '--out',
        help='output directory of report.json and the CSV artifacts',
        default='out'
    )

    parser.add_argument(
        '--command',
        help='pipeline command to run',
        choices=sorted(COMMANDS),
        default='all'
    )

    parser.add_argument(
        '--seed-override',
        help='seed replacing the configured one',
        type=int
    )

    parser.add_argument(
        '--threads',
        help='number of sampling worker processes',
        type=int
    )

    parser.add_argument(
        '-v',
        '--verbose',
        help='log the numerical diagnostics',
        action='store_true'
    )

    # no arguments were provided
    if len(argv) == 1:
        parser.print_help()

    return parser.parse_args()

if __name__ == '__main__': # pragma: no cover
    try:
        args = parse_args()
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format='%(asctime)s %(name)s %(levelname)s: %(message)s'
        )

        app = App(args)

        exit(app.run())
    except Exception as err:
        print(err)
        exit(1)
