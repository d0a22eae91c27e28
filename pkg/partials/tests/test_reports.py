import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from django.test import SimpleTestCase

from partials.reports import envelope, render_csv, render_json


class Pair(NamedTuple):
    a: float
    b: float


@dataclass(frozen=True)
class Summary:
    gap: float
    pairs: tuple
    counts: np.ndarray


class RenderJsonTestCase(SimpleTestCase):

    def test_envelope_is_plain_json(self):
        """Test numpy scalars, NamedTuples, dataclasses and non-finite values"""
        result = Summary(gap=np.float64(math.inf), pairs=(Pair(1.0, np.float32(0.5)),),
                         counts=np.array([1, 2]))
        document = json.loads(render_json(envelope('lipcheck', {'seed': np.int64(42)}, result)))
        self.assertEqual(document, {
            'schema': 1,
            'command': 'lipcheck',
            'config': {'seed': 42},
            'result': {'gap': None, 'pairs': [{'a': 1.0, 'b': 0.5}], 'counts': [1, 2]},
        })

    def test_keys_are_sorted(self):
        text = render_json(envelope('eval', {'b': 1, 'a': 2}, {'value': 0.25}))
        self.assertLess(text.index('"command"'), text.index('"config"'))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertTrue(text.endswith('}\n'))

    def test_unconverted_values_are_rejected(self):
        with self.assertRaises(TypeError):
            render_json({'value': object()})
        with self.assertRaises(ValueError):
            render_json({'value': math.nan})


class RenderCsvTestCase(SimpleTestCase):

    def test_fixed_header_and_empty_non_finite_cells(self):
        text = render_csv('lipcheck', [(0.5, math.nan, True), (-0.25, 1.0, False)])
        self.assertEqual(text.splitlines(), [
            'slice,k_hat,excluded',
            '0.5,,true',
            '-0.25,1.0,false',
        ])

    def test_unknown_command_and_bad_rows(self):
        with self.assertRaises(ValueError):
            render_csv('eval', [])
        with self.assertRaises(ValueError):
            render_csv('lipcheck', [(0.5, 1.0)])
