import io
import json
import os
import tempfile
import unittest
from unittest.mock import patch

from bellforge.accumulators import ExperimentSummary
from bellforge.accumulators import StrengthHistogram
from bellforge.cli import RunConfig
from bellforge.output import ExperimentResult
from bellforge.output import to_csv
from bellforge.output import write_output


def make_result(strengths=(0.0, 0.005, 0.0, 0.025), **kwargs) -> ExperimentResult:
    histogram = StrengthHistogram('ghz:alpha=45 2x2', 0.01)
    for strength in strengths:
        histogram.record(strength, strength > 0)

    params = {'state': 'ghz:alpha=45', 'shape': '2x2', 'trials': len(strengths), 'bin_width': 0.01}
    return ExperimentResult('strength-dist', params, 3, histogram,
                            ExperimentSummary.from_histogram(histogram, 3), **kwargs)


def make_config(out=None, output_format='json') -> RunConfig:
    return RunConfig(subcommand='strength-dist', state='ghz:alpha=45', shape=(2, 2), trials=4, seed=3,
                     workers=1, bin_width=None, out=out, output_format=output_format)


class OutputTest(unittest.TestCase):

    def test_json_document(self):
        """Tests the keys of the JSON document and that counts read back exactly
        """
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'result.json')
            write_output(make_result(), make_config(path))

            with open(path) as result_file:
                document = json.load(result_file)

        self.assertEqual(document['schema_version'], 1)
        self.assertEqual(document['experiment'], 'strength-dist')
        self.assertEqual(document['seed'], 3)
        self.assertEqual(document['params']['shape'], '2x2')
        self.assertEqual(document['histogram']['bin_width'], 0.01)
        self.assertEqual(len(document['histogram']['counts']), 100)
        self.assertEqual(document['histogram']['counts'][:3], [1, 0, 1])
        self.assertEqual(document['pv'], 0.5)
        self.assertEqual(document['trials'], 4)
        self.assertNotIn('partial', document)

        for key in ['pv_stderr', 'mean_strength', 'max_strength']:
            self.assertIn(key, document)

    def test_partial_and_extras(self):
        """Tests that partial runs carry a warning and extra sections are appended
        """
        result = make_result(partial=True, warning='cap reached', extras={'families': {'violations': 2}})

        document = json.loads(_capture(result, make_config()))

        self.assertTrue(document['partial'])
        self.assertEqual(document['warning'], 'cap reached')
        self.assertEqual(document['families'], {'violations': 2})

    def test_csv(self):
        """Tests the CSV density table, one row per bin of [0, 1]
        """
        lines = to_csv(make_result().histogram).splitlines()

        self.assertEqual(len(lines), 101)
        self.assertEqual(lines[:4], ['bin_upper,pdf', '0.01,25.000000', '0.02,0.000000', '0.03,25.000000'])
        self.assertEqual(lines[-1], '1.00,0.000000')

    def test_empty_csv(self):
        """Tests that a histogram without violations gives the header only
        """
        self.assertEqual(to_csv(make_result(strengths=(0.0, 0.0)).histogram), 'bin_upper,pdf\n')

    def test_byte_stable(self):
        """Tests that identical results give byte-identical files
        """
        with tempfile.TemporaryDirectory() as directory:
            contents = []
            for name in ['a.json', 'b.json', 'a.csv', 'b.csv']:
                path = os.path.join(directory, name)
                write_output(make_result(), make_config(path, name.split('.')[1]))
                with open(path, 'rb') as result_file:
                    contents.append(result_file.read())

        self.assertEqual(contents[0], contents[1])
        self.assertEqual(contents[2], contents[3])

    def test_unwritable_path(self):
        """Tests that an unwritable path raises OSError
        """
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(OSError):
                write_output(make_result(), make_config(os.path.join(directory, 'missing', 'result.json')))


def _capture(result, config) -> str:
    with patch('sys.stdout', new_callable=io.StringIO) as stdout:
        write_output(result, config)
    return stdout.getvalue()
