"""
manage.py mixcheck <subcommand> ...

Every subcommand resolves its options as settings.MIXCHECK_DEFAULTS, then
the --config TOML file, then explicit flags; validates them with
RunConfigForm and writes one JSON report (stdout unless --json is given)
plus an optional CSV.
"""

import logging
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from partials.diffnum import (
    classical_hypotheses, mixed_cross, mixed_iterated, mixed_step, oracle_gaps, partial,
    schwarz_audit,
)
from partials.exceptions import EvalError, NumericFailure, ParseError, UnknownBuiltin
from partials.expr import parse
from partials.forms import COMMAND_CHOICES, RunConfigForm
from partials.funcs import Rectangle, builtin, corpus, from_expr
from partials.lipcheck import lipschitz_equivalence, uniform_partial_lipschitz
from partials.reports import (
    audit_rows, envelope, jsonable, render_csv, render_json, slice_rows, tolstov_rows,
    write_atomic,
)
from partials.strongdiff import is_strongly_differentiable, slice_family, verify_theorem1
from partials.tolstov import QuadratureSpec, theorem2_convergence, verify_lemma1, verify_theorem2

logger = logging.getLogger('partials')

EXPR_DOMAIN = Rectangle(-1.0, 1.0, -1.0, 1.0)
DENSITY_DOMAIN = Rectangle(0.0, 1.0, 0.0, 1.0)
VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}

SOURCE = ('builtin', 'expr', 'expr_file')
OPTIONS = {
    'builtin': dict(help='name of a built-in function (see list-builtins)'),
    'expr': dict(help='closed-form expression in x and y'),
    'expr_file': dict(help='file holding an expression'),
    'density': dict(help='density h(u, v): expression or built-in name'),
    'rect': dict(help='a,b,c,d'),
    'grid': dict(help='NXxNY, e.g. 51x51'),
    'tol': dict(type=float),
    'seed': dict(type=int),
    'at': dict(help='x,y'),
    'axis': dict(choices=['x', 'y']),
    'order': dict(choices=['xy', 'yx'], help='xy: differentiate in x, then in y'),
    'scheme': dict(choices=['central', 'forward', 'backward', 'richardson']),
    'h': dict(type=float, help='first step (x for the cross quotient)'),
    'k': dict(type=float, help='y step of the cross quotient'),
    'eta': dict(type=float),
    'factor': dict(type=float),
    'radii': dict(help='comma-separated, strictly decreasing'),
    'pairs': dict(type=int, help='random pairs per radius'),
    'slices': dict(type=int),
    'samples': dict(type=int),
    'derivative_axis': dict(choices=['x', 'y']),
    'lipschitz_axis': dict(choices=['x', 'y']),
    'panels': dict(type=int, help='Simpson panels per unit length (even)'),
    'levels': dict(type=int, help='panel doublings for the convergence study'),
    'json': dict(help='write the JSON report here instead of stdout'),
    'csv': dict(help='write the per-point CSV here'),
    'hypotheses': dict(action='store_true', help='attach the classical sufficient conditions'),
    'both': dict(action='store_true', help='test both Lipschitz hypotheses and the mixed bound'),
    'lemma_only': dict(action='store_true', help='only check the first partials'),
}
SUBCOMMAND_OPTIONS = {
    'list-builtins': ('json',),
    'eval': SOURCE + ('rect', 'at', 'json'),
    'partials': SOURCE + ('rect', 'at', 'axis', 'scheme', 'h', 'json'),
    'mixed': SOURCE + ('rect', 'at', 'order', 'h', 'k', 'tol', 'hypotheses', 'json'),
    'schwarz-audit': SOURCE + ('rect', 'grid', 'tol', 'json', 'csv'),
    'strongdiff': SOURCE + ('rect', 'at', 'axis', 'radii', 'eta', 'factor', 'pairs', 'seed',
                            'json', 'csv'),
    'verify-theorem1': SOURCE + ('rect', 'at', 'radii', 'tol', 'pairs', 'seed', 'json', 'csv'),
    'lipcheck': SOURCE + ('rect', 'derivative_axis', 'lipschitz_axis', 'slices', 'samples',
                          'seed', 'both', 'tol', 'grid', 'json', 'csv'),
    'tolstov': ('density', 'rect', 'panels', 'levels', 'grid', 'tol', 'lemma_only', 'json', 'csv'),
}


def load_toml(path) -> dict:
    """Flag values from a TOML file: keys are long flag names, lists become comma lists."""
    try:
        with open(path, 'rb') as handle:
            raw = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise CommandError(f"--config: cannot read {path}: {e}", returncode=1)
    values = {}
    for key, value in raw.items():
        name = key.replace('-', '_')
        if name not in OPTIONS and name != 'theorem1_radii':
            raise CommandError(f"--config: unknown key '{key}'", returncode=1)
        if isinstance(value, list):
            value = ','.join(str(v) for v in value)
        values[name] = value
    return values


def summary(obj):
    """JSON form of a report without its per-point lists (those go to CSV)."""
    data = jsonable(obj)
    if isinstance(data, dict):
        return {k: summary(v) for k, v in data.items() if k not in ('nodes', 'points')}
    if isinstance(data, list):
        return [summary(v) for v in data]
    return data


class Command(BaseCommand):
    help = 'Numerical checks of mixed partial derivative theorems'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML file supplying any flag by its long name')
        subparsers = parser.add_subparsers(dest='subcommand', required=True, metavar='subcommand')
        for name, help_text in COMMAND_CHOICES:
            sub = subparsers.add_parser(name, help=help_text)
            for option in SUBCOMMAND_OPTIONS[name]:
                kwargs = dict(OPTIONS[option])
                kwargs.setdefault('default', None)
                sub.add_argument('--' + option.replace('_', '-'), dest=option, **kwargs)

    def handle(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get('verbosity', 1), logging.DEBUG)
        logger.setLevel(level)

        command = options['subcommand']
        config = self.resolve_config(command, options)
        try:
            result, rows = getattr(self, 'run_' + command.replace('-', '_'))(config)
        except (ParseError, UnknownBuiltin) as e:
            raise CommandError(str(e), returncode=1)
        except ValueError as e:
            raise CommandError(f"invalid arguments: {e}", returncode=1)
        except (NumericFailure, EvalError) as e:
            logger.warning(f"{command} failed: {e}")
            raise CommandError(f"{type(e).__name__}: {e}", returncode=2)

        text = render_json(envelope(command, config, result))
        if config.json:
            write_atomic(config.json, text)
        elif command != 'eval':
            self.stdout.write(text, ending='')
        if config.csv and rows is not None:
            write_atomic(config.csv, render_csv(command, rows))

    # ---------------- CONFIGURATION ----------------

    def resolve_config(self, command, options):
        values = dict(settings.MIXCHECK_DEFAULTS)
        if options.get('config'):
            values.update(load_toml(options['config']))
        theorem1_radii = values.pop('theorem1_radii')
        if command == 'verify-theorem1' and options.get('radii') is None \
                and values.get('radii') == settings.MIXCHECK_DEFAULTS['radii']:
            values['radii'] = theorem1_radii
        values.update({name: value for name, value in options.items()
                       if name in OPTIONS and value is not None})
        values['command'] = command

        form = RunConfigForm(data=values)
        if not form.is_valid():
            field, errors = next(iter(form.errors.items()))
            flag = '' if field == '__all__' else f"--{field.replace('_', '-')}: "
            raise CommandError(f"{flag}{errors[0]}", returncode=1)
        return form.to_config()

    def load_function(self, config):
        if config.builtin:
            f = builtin(config.builtin)
            return f.with_domain(config.rectangle) if config.rect else f
        source = config.expr
        if source is None:
            source = Path(config.expr_file).read_text(encoding='utf-8')
        return from_expr(parse(source), config.rectangle or EXPR_DOMAIN)

    def load_density(self, config):
        name = config.density or config.builtin
        if name in corpus.names():
            h = builtin(name)
            return h.with_domain(config.rectangle) if config.rect else h
        return from_expr(parse(name), config.rectangle or DENSITY_DOMAIN)

    # ---------------- SUBCOMMANDS ----------------

    def run_list_builtins(self, config):
        return {'builtins': corpus.describe()}, None

    def run_eval(self, config):
        f = self.load_function(config)
        value = f(*config.at)
        self.stdout.write(format(value, '.17g'))
        return {'point': config.at, 'value': value}, None

    def run_partials(self, config):
        f = self.load_function(config)
        estimate = partial(f, config.axis, config.at, scheme=config.scheme, h0=config.h)
        result = {'point': config.at, 'axis': config.axis, 'estimate': estimate}
        oracle = f.oracle_d1 if config.axis == 'x' else f.oracle_d2
        if oracle is not None:
            result['oracle'] = oracle(*config.at)
        return result, None

    def run_mixed(self, config):
        f = self.load_function(config)
        x, y = config.at
        order = config.order
        result = {
            'point': config.at,
            'order': ''.join(order),
            'iterated': mixed_iterated(f, order, config.at),
            'reverse': mixed_iterated(f, order[::-1], config.at),
            'cross': mixed_cross(f, config.at, config.h or mixed_step(x), config.k or mixed_step(y)),
        }
        if f.has_mixed_oracles:
            result['oracle_gaps'] = oracle_gaps(f, [config.at])
        if config.hypotheses:
            result['hypotheses'] = classical_hypotheses(f, config.at, tol=config.tol)
        return result, None

    def run_schwarz_audit(self, config):
        f = self.load_function(config)
        nx, ny = config.grid
        report = schwarz_audit(f, config.rectangle or f.domain, nx, ny, config.tol)
        return summary(report), audit_rows(report)

    def run_strongdiff(self, config):
        f = self.load_function(config)
        x, y = config.at
        point = (x, y) if config.axis == 'x' else (y, x)
        verdict = is_strongly_differentiable(
            slice_family(f, config.axis), point, config.radii, config.eta, config.factor,
            sampler_seed=config.seed, pairs_per_radius=config.pairs, axis=config.axis,
        )
        rows = verdict.evidence.rows() if verdict.evidence is not None else []
        return verdict, rows

    def run_verify_theorem1(self, config):
        f = self.load_function(config)
        report = verify_theorem1(f, config.at, config.radii, config.tol,
                                 sampler_seed=config.seed, pairs_per_radius=config.pairs)
        return report, report.d21_curve.rows()

    def run_lipcheck(self, config):
        f = self.load_function(config)
        rect = config.rectangle or f.domain
        if config.both:
            report = lipschitz_equivalence(f, rect, config.slices, config.samples, config.tol,
                                           config.seed, config.grid)
            return summary(report), slice_rows(report.d1_in_y)
        report = uniform_partial_lipschitz(f, config.derivative_axis, config.lipschitz_axis, rect,
                                           config.slices, config.samples, config.seed)
        return report, slice_rows(report)

    def run_tolstov(self, config):
        h = self.load_density(config)
        rect = config.rectangle or h.domain
        spec = QuadratureSpec(config.panels, config.levels)
        nx, ny = config.grid
        lemma = verify_lemma1(h, rect, spec, nx, ny, config.tol)
        if config.lemma_only:
            nan = float('nan')
            rows = [(p.x, p.y, p.gap, nan, nan, nan, p.status) for p in lemma.points]
            return {'lemma1': summary(lemma)}, rows
        theorem2 = verify_theorem2(h, rect, spec, nx, ny, config.tol)
        result = {'lemma1': summary(lemma), 'theorem2': summary(theorem2)}
        if spec.refinement_levels > 1:
            result['convergence'] = theorem2_convergence(h, rect, spec, nx, ny, config.tol)
        return result, tolstov_rows(theorem2)
