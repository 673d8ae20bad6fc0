"""SVG line plots of sweep results."""
import csv
import io

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from .exceptions import PreconditionError

__all__ = ['read_columns', 'plot_rows', 'plot_csv']


def read_columns(path, columns):
    """Rows of ``path`` restricted to ``columns``, checking they exist."""
    with open(path, newline='') as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c is not None and c not in header]
        if missing:
            raise PreconditionError('{} has no column(s) {}; found {}'
                                    .format(path, missing, header))
        return [row for row in reader]


def _number(value, col):
    try:
        return float(value)
    except ValueError:
        raise PreconditionError('column {!r} holds non-numeric value {!r}'
                                .format(col, value))


def plot_rows(rows, x_col, y_col, group_col=None, log_y=False, log_x=False,
              title=None):
    """Render one polyline per group and return the SVG text."""
    groups = {}
    for row in rows:
        key = row[group_col] if group_col else y_col
        groups.setdefault(key, []).append((_number(row[x_col], x_col),
                                           _number(row[y_col], y_col)))
    if log_y and any(y <= 0 for pts in groups.values() for _, y in pts):
        raise PreconditionError('log scale needs positive {!r} values'
                                .format(y_col))
    plt.rcParams['svg.hashsalt'] = 'lglab'
    fig, ax = plt.subplots(figsize=(6.4, 4.))
    for key in sorted(groups, key=_group_order):
        pts = sorted(groups[key])
        label = '{}={}'.format(group_col, key) if group_col else key
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker='o',
                label=label)
    if log_y:
        ax.set_yscale('log')
    if log_x:
        ax.set_xscale('log')
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    if title:
        ax.set_title(title)
    ax.grid(True)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format='svg', metadata={'Date': None})
    plt.close(fig)
    return buf.getvalue()


def _group_order(key):
    try:
        return (0, float(key), key)
    except ValueError:
        return (1, 0., key)


def plot_csv(csv_path, x_col, y_col, group_col, out_svg, log_y=False,
             log_x=False, title=None):
    rows = read_columns(csv_path, [x_col, y_col, group_col])
    svg = plot_rows(rows, x_col, y_col, group_col, log_y, log_x, title)
    with open(out_svg, 'w') as fh:
        fh.write(svg)
    return svg
