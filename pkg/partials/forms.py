# forms.py - run configuration for the mixcheck subcommands
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from django import forms
from django.core.exceptions import ValidationError

from .funcs import Rectangle
from .reports import CSV_HEADERS, check_output_path

COMMAND_CHOICES = [
    ('list-builtins', 'List the built-in corpus'),
    ('eval', 'Evaluate a function at a point'),
    ('partials', 'First partial derivative at a point'),
    ('mixed', 'Mixed partial derivatives at a point'),
    ('schwarz-audit', 'Compare both mixed orders on a grid'),
    ('strongdiff', 'Strong differentiability verdict'),
    ('verify-theorem1', 'Strong mixed partials and their equality'),
    ('lipcheck', 'Uniform Lipschitz constant of a partial derivative'),
    ('tolstov', 'Double-integral construction checks'),
]
AXIS_CHOICES = [('x', 'x'), ('y', 'y')]
ORDER_CHOICES = [('xy', 'd/dx then d/dy'), ('yx', 'd/dy then d/dx')]
SCHEME_CHOICES = [(s, s) for s in ('central', 'forward', 'backward', 'richardson')]

NEEDS_FUNCTION = {'eval', 'partials', 'mixed', 'schwarz-audit', 'strongdiff',
                  'verify-theorem1', 'lipcheck'}
NEEDS_POINT = {'eval', 'partials', 'mixed', 'strongdiff', 'verify-theorem1'}


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(p) for p in str(text).replace(' ', '').split(',') if p)
    except ValueError:
        raise ValidationError(f"{what} must be comma-separated numbers, got '{text}'")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved options of one run; embedded in every JSON report."""
    command: str
    builtin: Optional[str]
    expr: Optional[str]
    expr_file: Optional[str]
    density: Optional[str]
    rect: Optional[tuple]
    grid: tuple
    tol: float
    seed: int
    at: Optional[tuple]
    axis: str
    order: tuple
    scheme: str
    h: Optional[float]
    k: Optional[float]
    eta: float
    factor: float
    radii: tuple
    pairs: int
    slices: int
    samples: int
    panels: int
    levels: int
    derivative_axis: str
    lipschitz_axis: str
    json: Optional[str]
    csv: Optional[str]
    hypotheses: bool
    both: bool
    lemma_only: bool

    @property
    def rectangle(self) -> Optional[Rectangle]:
        return Rectangle(*self.rect) if self.rect else None


class RunConfigForm(forms.Form):
    """Validates merged settings / TOML / flag values into a RunConfig"""
    command = forms.ChoiceField(choices=COMMAND_CHOICES)
    builtin = forms.CharField(required=False)
    expr = forms.CharField(required=False, strip=False)
    expr_file = forms.CharField(required=False)
    density = forms.CharField(required=False, strip=False)
    rect = forms.CharField(required=False)
    grid = forms.CharField()
    tol = forms.FloatField()
    seed = forms.IntegerField(min_value=0)
    at = forms.CharField(required=False)
    axis = forms.ChoiceField(choices=AXIS_CHOICES)
    order = forms.ChoiceField(choices=ORDER_CHOICES)
    scheme = forms.ChoiceField(choices=SCHEME_CHOICES)
    h = forms.FloatField(required=False)
    k = forms.FloatField(required=False)
    eta = forms.FloatField()
    factor = forms.FloatField()
    radii = forms.CharField()
    pairs = forms.IntegerField(min_value=16)
    slices = forms.IntegerField(min_value=3)
    samples = forms.IntegerField(min_value=8)
    panels = forms.IntegerField(min_value=8)
    levels = forms.IntegerField(min_value=1, max_value=6)
    derivative_axis = forms.ChoiceField(choices=AXIS_CHOICES)
    lipschitz_axis = forms.ChoiceField(choices=AXIS_CHOICES)
    json = forms.CharField(required=False)
    csv = forms.CharField(required=False)
    hypotheses = forms.BooleanField(required=False)
    both = forms.BooleanField(required=False)
    lemma_only = forms.BooleanField(required=False)

    def clean_rect(self):
        rect = self.cleaned_data.get('rect')
        if not rect:
            return None
        try:
            return Rectangle.from_string(rect).as_tuple()
        except ValueError as e:
            raise ValidationError(str(e))

    def clean_grid(self):
        grid = self.cleaned_data.get('grid', '').lower()
        try:
            nx, ny = (int(part) for part in grid.split('x'))
        except ValueError:
            raise ValidationError(f"grid must look like 51x51, got '{grid}'")
        if nx < 3 or ny < 3:
            raise ValidationError("grid needs at least 3 nodes per axis")
        return (nx, ny)

    def clean_tol(self):
        tol = self.cleaned_data.get('tol')
        if tol is None or not tol > 0:
            raise ValidationError("tol must be positive")
        return tol

    def clean_eta(self):
        eta = self.cleaned_data.get('eta')
        if eta is None or not eta > 0:
            raise ValidationError("eta must be positive")
        return eta

    def clean_factor(self):
        factor = self.cleaned_data.get('factor')
        if factor is None or not factor > 1:
            raise ValidationError("factor must be greater than 1")
        return factor

    def clean_at(self):
        at = self.cleaned_data.get('at')
        if not at:
            return None
        point = _floats(at, 'at')
        if len(point) != 2:
            raise ValidationError(f"at must be 'x,y', got '{at}'")
        return point

    def clean_h(self):
        return self._positive_or_none('h')

    def clean_k(self):
        return self._positive_or_none('k')

    def _positive_or_none(self, name):
        value = self.cleaned_data.get(name)
        if value is not None and not value > 0:
            raise ValidationError(f"{name} must be positive")
        return value

    def clean_radii(self):
        radii = _floats(self.cleaned_data.get('radii', ''), 'radii')
        if not radii:
            raise ValidationError("radii must not be empty")
        if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
            raise ValidationError("radii must be positive and strictly decreasing")
        return radii

    def clean_panels(self):
        panels = self.cleaned_data.get('panels')
        if panels is not None and panels % 2:
            raise ValidationError("panels must be even")
        return panels

    def clean_order(self):
        return tuple(self.cleaned_data.get('order'))

    def clean_expr_file(self):
        path = self.cleaned_data.get('expr_file')
        if not path:
            return None
        if not Path(path).is_file():
            raise ValidationError(f"expression file '{path}' does not exist")
        return path

    def clean_json(self):
        return self._output_path('json')

    def clean_csv(self):
        return self._output_path('csv')

    def _output_path(self, name):
        path = self.cleaned_data.get(name)
        if not path:
            return None
        try:
            check_output_path(path)
        except ValueError as e:
            raise ValidationError(str(e))
        return path

    def clean(self):
        cleaned_data = super().clean()
        command = cleaned_data.get('command')

        sources = [name for name in ('builtin', 'expr', 'expr_file')
                   if cleaned_data.get(name)]
        if command in NEEDS_FUNCTION and len(sources) != 1:
            raise ValidationError(
                "exactly one of --builtin, --expr, --expr-file is required")
        if command == 'tolstov' and not (cleaned_data.get('density') or cleaned_data.get('builtin')):
            raise ValidationError("tolstov needs --density")
        if command in NEEDS_POINT and not cleaned_data.get('at'):
            raise ValidationError(f"{command} needs --at x,y")
        if cleaned_data.get('csv') and command not in CSV_HEADERS:
            raise ValidationError(f"{command} has no CSV output")
        if cleaned_data.get('derivative_axis') == cleaned_data.get('lipschitz_axis') \
                and command == 'lipcheck' and not cleaned_data.get('both'):
            raise ValidationError("--derivative-axis and --lipschitz-axis must differ")

        return cleaned_data

    def to_config(self) -> RunConfig:
        data = dict(self.cleaned_data)
        for name in ('builtin', 'expr', 'expr_file', 'density', 'json', 'csv'):
            data[name] = data.get(name) or None
        return RunConfig(**{name: data.get(name) for name in RunConfig.__dataclass_fields__})
