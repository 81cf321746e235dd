from json import dump
from math import isfinite
from os import makedirs
from os.path import exists, isdir, join

import numpy as np

class ReportMgr:

    """
    Implementation of the class responsible for the management of the output
    directory: report.json and the plot-ready CSV artifacts.

    """

    report_file = 'report.json'

    def __init__(self, out_dir):
        """
        Initialize the report mgr data.

        :out_dir: Output directory (created when missing).

        """
        self.out_dir = out_dir

        if exists(self.out_dir) and not isdir(self.out_dir):
            raise RuntimeError(
                "the output path '{}' is not a directory!".format(self.out_dir)
            )

        makedirs(self.out_dir, exist_ok=True)

    def path(self, name):
        return join(self.out_dir, name)

    def write_report(self, command, config, results):
        """
        Write report.json.

        :command: Name of the command.
        :config: The SystemConfig used.
        :results: Dictionary of the command results.
        :returns: Path of the report.

        """
        report = {
            'command': command,
            'config_hash': config.digest(),
            'tolerances': config.tolerances(),
            'results': results
        }

        path = self.path(self.report_file)
        with open(path, 'w') as f:
            dump(ReportMgr.plain(report), f, sort_keys=True, indent=2, allow_nan=False)
            f.write('\n')

        return path

    def write_csv(self, name, header, rows):
        """
        Write a CSV artifact with floats at 17 significant digits.

        :name: File name.
        :header: Column names.
        :rows: Iterable of rows (strings are written as they are).
        :returns: Path of the file.

        """
        path = self.path(name)
        with open(path, 'w') as f:
            f.write(','.join(header) + '\n')
            for row in rows:
                f.write(','.join(ReportMgr.cell(v) for v in row) + '\n')

        return path

    @staticmethod
    def cell(value):
        if isinstance(value, str):
            return value
        return '%.17g' % float(value)

    @staticmethod
    def plain(obj):
        """
        Convert results to JSON-ready values: numpy scalars and arrays to
        Python numbers and lists, non-finite floats to strings.

        :obj: The object to convert.
        :returns: The converted object.

        """
        if isinstance(obj, dict):
            return {str(k): ReportMgr.plain(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [ReportMgr.plain(v) for v in obj]
        if isinstance(obj, np.ndarray):
            return ReportMgr.plain(obj.tolist())
        if isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, (float, np.floating)):
            value = float(obj)
            if not isfinite(value):
                return 'nan' if value != value else ('inf' if value > 0 else '-inf')
            return value

        return obj
