import os
from ast import literal_eval

import pandas as pd


def parse_value(text):
    """Turn a config value into a python value. Anything literal_eval can't read stays a string."""
    text = text.strip()
    try:
        return literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_key_values(text):
    """Parse 'key = value' lines into a dict. Blank lines and lines starting with # are skipped."""
    result = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ValueError('line {}: expected key = value, got {!r}'.format(lineno, line))
        key, value = line.split('=', 1)
        result[key.strip().replace('-', '_')] = parse_value(value)
    return result


def read_key_values(path):
    with open(path, 'r') as fid:
        return parse_key_values(fid.read())


def format_key_values(adict, prefix=''):
    """Inverse of parse_key_values. Keys come out sorted so the text is deterministic."""
    return ''.join('{}{} = {!r}\n'.format(prefix, key, adict[key]) for key in sorted(adict))


def write_key_values(path, adict):
    with open(path, 'w') as fid:
        fid.write(format_key_values(adict))


def worker_count(requested=None):
    """Number of worker threads, capped by the FIVE_THREADS environment variable."""
    available = os.cpu_count() or 1
    cap = os.environ.get('FIVE_THREADS')
    if cap:
        try:
            cap = int(cap)
        except ValueError:
            raise ValueError('FIVE_THREADS must be an integer, got {!r}'.format(cap))
        if cap < 1:
            raise ValueError('FIVE_THREADS must be at least 1')
        available = min(available, cap)
    if requested is None:
        return available
    return max(1, min(requested, available))


def write_csv_report(path, rows, columns, header=None, append=False):
    """Write rows (list of dicts) as CSV.
       header is a dict echoed as '# key = value' lines before the rows it belongs to.
       With append=True rows go at the end of an existing file, preceded by their own header block;
       the column names are not repeated."""
    frame = pd.DataFrame(rows, columns=columns)
    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, 'a' if exists else 'w', newline='') as fid:
        if header:
            fid.write(format_key_values(header, prefix='# '))
        frame.to_csv(fid, header=not exists, index=False, float_format='%.12g')
    return frame


def read_csv_headers(path):
    """Every '# key = value' block of a report, in file order, as a list of dicts."""
    blocks, current = [], []
    with open(path, 'r') as fid:
        for line in fid:
            if line.startswith('#'):
                current.append(line[1:])
            elif current:
                blocks.append(parse_key_values(''.join(current)))
                current = []
    if current:
        blocks.append(parse_key_values(''.join(current)))
    return blocks


def read_csv_report(path):
    """Read a report written by write_csv_report. Returns (first header dict, DataFrame)."""
    headers = read_csv_headers(path)
    frame = pd.read_csv(path, comment='#')
    return (headers[0] if headers else {}), frame
