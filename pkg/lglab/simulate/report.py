from collections import namedtuple

from ..core.forward import final_output

__all__ = ['SimReport', 'measure_discrepancy', 'report_to_dict']

METHODS = ('joint_hard', 'suffix', 'markov')

SimReport = namedtuple('SimReport', ['z', 'err_f', 'err_g', 'len_z', 'method',
                                     'epsilon', 'seed'])


def measure_discrepancy(f, mode, x, z):
    """Euclidean distance between the final-position outputs on x and z."""
    return float((final_output(f, mode, x) - final_output(f, mode, z)).norm())


def report_to_dict(report):
    doc = report._asdict()
    doc['z'] = [int(t) for t in report.z.tolist()]
    return doc
