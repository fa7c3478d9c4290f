import os
import csv
import json

import numpy as np

from handlers.errors import OutputError
from handlers.logger_handler import Logger


class JSONEncoder(json.JSONEncoder):
    """
    Custom JSON encoder subclass that extends `json.JSONEncoder`.

    Methods:
        default(obj): Converts numpy scalars and arrays into plain Python numbers
                      and lists before JSON encoding. Defaults to the standard
                      JSON encoder for all other types.
    """

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return json.JSONEncoder.default(self, o)


def write2json(filename, data):
    """
    Writes a given data object to a JSON file.

    Args:
        filename (str): The name of the file to which the data will be written.
        data (dict/list): The data to be written to the file.

    Raises:
        OutputError: If the file could not be written.
    """

    try:
        with open(filename, 'w', newline='\n') as f:
            json.dump(data, f, cls=JSONEncoder, indent=2)
            f.write('\n')
        Logger.log(f"Data successfully written to {filename}.", "SUCCESS")
    except (OSError, TypeError, ValueError) as e:
        Logger.log(f"An error occurred while writing {filename}: {e}", "ERROR")
        raise OutputError(f"Could not write {filename}: {e}") from e


def write_csv(filename, header, columns):
    """
    Writes equally long numeric columns to a CSV file.

    Floats are written with 17 significant digits, so reruns with the same
    inputs produce byte-identical files.

    Args:
        filename (str): Destination file.
        header (list): Column names.
        columns (list): One 1-D array per column.

    Raises:
        OutputError: If the columns disagree in length or the file could not be written.
    """

    arrays = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len(arrays) != len(header) or len({a.size for a in arrays}) > 1:
        raise OutputError(f"{filename}: {len(header)} header fields for columns of sizes "
                          f"{[a.size for a in arrays]}")
    try:
        with open(filename, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in zip(*arrays):
                writer.writerow(['%.17g' % v for v in row])
        Logger.log(f"Wrote {arrays[0].size if arrays else 0} rows to {filename}", "SUCCESS")
    except OSError as e:
        Logger.log(f"An error occurred while writing {filename}: {e}", "ERROR")
        raise OutputError(f"Could not write {filename}: {e}") from e


def read_series_csv(filename, column=1):
    """
    Reads a sampled signal from a CSV file with a header row.

    Args:
        filename (str): Source file; column 0 holds times.
        column (int or str): Index or name of the value column.

    Returns:
        tuple: (times, values) as numpy arrays.

    Raises:
        OutputError: If the file is missing, malformed or lacks the column.
    """

    if not os.path.isfile(filename):
        raise OutputError(f"Sampled series {filename} not found")
    try:
        with open(filename, newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise OutputError(f"Could not read {filename}: {e}") from e
    if len(rows) < 3:
        raise OutputError(f"{filename} needs a header row and at least two samples")

    header, body = rows[0], [r for r in rows[1:] if r]
    index = header.index(column) if isinstance(column, str) and column in header else column
    if not isinstance(index, int) or index >= len(header):
        raise OutputError(f"{filename} has no column {column!r} (header: {', '.join(header)})")
    try:
        times = np.array([float(r[0]) for r in body])
        values = np.array([float(r[index]) for r in body])
    except (ValueError, IndexError) as e:
        raise OutputError(f"Malformed row in {filename}: {e}") from e
    return times, values
