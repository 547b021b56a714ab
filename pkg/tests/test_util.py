import io

import pytest

from udsmodellib.util.cli import (
    EXIT_FAILURE,
    EXIT_USAGE,
    diagnostic,
    load_json_arg,
    parse_assignments,
    run_command,
    stem
)
from udsmodellib.util.errors import ModelEvaluationError, RankDeficiencyError, SchemaError, UsageError
from udsmodellib.util.logging import BufferedLogger, PrintLogger
from udsmodellib.util.types import Logger, log_fn
from udsmodellib.util.utils import file_exists, get_text, join_path, save_text, split_uri

class TestLoggers:
    def test_print_logger_levels(self):
        stream = io.StringIO()
        logger = PrintLogger(min_level='WARNING', stream=stream)
        logger.log('hidden', level=Logger.INFO)
        logger.log('shown', level=Logger.WARNING)
        logger.log('plain')
        assert stream.getvalue() == '[WARNING]: shown\nplain\n'

    def test_buffered_logger(self):
        lines = []
        logger = BufferedLogger(buffer_size=2, callbacks=[lines.append])
        logger.log('a')
        assert lines == []
        logger.log('b', level=Logger.DEBUG)
        assert lines == ['a\n', '[DEBUG]: b\n']
        logger.log('c')
        assert logger.text() == 'a\n[DEBUG]: b\nc\n'

    def test_callback_errors(self):
        def fail(_line: str) -> None:
            raise RuntimeError('sink down')
        logger = BufferedLogger(callbacks=[fail], suppress_errors=True)
        logger.log('x', flush=True)
        assert logger.lines == ['x\n']
        with pytest.raises(RuntimeError):
            BufferedLogger(callbacks=[fail]).log('y', flush=True)

    def test_log_fn_without_logger(self):
        log_fn(None)('nothing', level=Logger.ERROR)

class TestFiles:
    def test_split_uri(self):
        assert split_uri('s3://bucket/key.csv') == ('s3', 'bucket/key.csv')
        assert split_uri('HTTPS://host/x') == ('https', 'host/x')
        assert split_uri('runs/a.csv') == ('file', 'runs/a.csv')

    def test_join_path(self):
        assert join_path('s3://bucket/runs/', 'storm', 'kpi.json') == 's3://bucket/runs/storm/kpi.json'
        assert join_path('runs', 'kpi.json') == 'runs/kpi.json'

    def test_save_creates_directories(self, tmp_path):
        path = str(tmp_path / 'a' / 'b' / 'out.txt')
        save_text(path, 'héllo\n')
        assert file_exists(path)
        assert get_text(path) == 'héllo\n'
        assert not file_exists(str(tmp_path / 'missing.txt'))

    def test_unsupported_protocol(self):
        with pytest.raises(UsageError, match='ftp'):
            get_text('ftp://host/file')

class TestCliPlumbing:
    def test_parse_assignments(self):
        assert parse_assignments('q_in5=1.5, d_abro=2') == {'q_in5': 1.5, 'd_abro': 2.0}
        assert parse_assignments('') == {}
        with pytest.raises(UsageError):
            parse_assignments('q_in5')
        with pytest.raises(UsageError, match='q_in5'):
            parse_assignments('q_in5=wet')

    def test_load_json_arg(self, tmp_path):
        assert load_json_arg('[1, 2]', '--init') == [1, 2]
        path = tmp_path / 'init.json'
        path.write_text('{"a": 1}')
        assert load_json_arg(str(path), '--init') == {'a': 1}
        with pytest.raises(SchemaError):
            load_json_arg('[1,', '--init')

    def test_stem(self):
        assert stem('data/storm-2024.csv') == 'storm-2024'
        assert stem('builtin://storm') == 'storm'
        assert stem('s3://bucket/events/e1.csv') == 'e1'

    def test_diagnostics(self):
        assert diagnostic(UsageError('bad\nflag')) == 'udsmodellib: error[usage] bad flag'
        assert diagnostic(RankDeficiencyError(['x', 'intercept'])).startswith('udsmodellib: error[rank] ')
        assert diagnostic(SchemaError('Missing column "q_in5"', 'rain.csv', 1)) == (
            'udsmodellib: error[schema] rain.csv:1: Missing column "q_in5"'
        )
        assert diagnostic(ModelEvaluationError('Q_1216', float('inf'))).startswith('udsmodellib: error[model] ')
        assert diagnostic(FileNotFoundError('gone')) == 'udsmodellib: error[io] gone'
        assert diagnostic(KeyError('k')) == "udsmodellib: error[runtime] KeyError: 'k'"

    @pytest.mark.parametrize('exc,code', [
        (UsageError('u'), EXIT_USAGE),
        (SchemaError('s'), EXIT_USAGE),
        (ModelEvaluationError('L_7', float('nan')), EXIT_FAILURE),
        (RuntimeError('r'), EXIT_FAILURE),
    ])
    def test_run_command(self, exc, code):
        logger = BufferedLogger()
        def command() -> int:
            raise exc
        assert run_command(command, logger) == code
        assert len(logger.lines) == 1

    def test_run_command_success(self):
        assert run_command(lambda: 0, BufferedLogger()) == 0
