#!/usr/bin/env python
import pytest

from pyfive.util import (parse_value, parse_key_values, format_key_values, read_key_values, write_key_values,
                         worker_count, write_csv_report, read_csv_report, read_csv_headers)


def test_parse_value():
    assert parse_value(' 3 ') == 3
    assert parse_value('1e-10') == 1e-10
    assert parse_value('None') is None
    assert parse_value("'gauss'") == 'gauss'
    assert parse_value('gauss') == 'gauss'


def test_parse_key_values():
    text = '# comment\n\nframe-size = 512\ncontrast = laplace\n'
    assert parse_key_values(text) == {'frame_size': 512, 'contrast': 'laplace'}
    with pytest.raises(ValueError):
        parse_key_values('frame_size 512\n')


def test_key_value_file(tmp_path):
    path = str(tmp_path / 'spec.txt')
    values = {'seed': 3, 'input_sinr_db': 5.0, 'mixing': 'instantaneous', 'uncorrelated_noise_fraction': 0.01}
    write_key_values(path, values)
    assert read_key_values(path) == values
    assert format_key_values({'b': 1, 'a': 2}).splitlines() == ['a = 2', 'b = 1']


def test_worker_count(monkeypatch):
    monkeypatch.delenv('FIVE_THREADS', raising=False)
    assert worker_count(1) == 1
    monkeypatch.setenv('FIVE_THREADS', '2')
    assert worker_count() <= 2
    assert worker_count(16) <= 2
    monkeypatch.setenv('FIVE_THREADS', 'many')
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.setenv('FIVE_THREADS', '0')
    with pytest.raises(ValueError):
        worker_count()


def test_csv_report(tmp_path):
    path = str(tmp_path / 'report.csv')
    columns = ['iteration', 'nll']
    write_csv_report(path, [{'iteration': 0, 'nll': 10.5}], columns, header={'contrast': 'gauss'})
    write_csv_report(path, [{'iteration': 1, 'nll': 9.25}], columns, header={'contrast': 'laplace'}, append=True)
    header, frame = read_csv_report(path)
    assert header == {'contrast': 'gauss'}
    assert list(frame.columns) == columns
    assert list(frame['nll']) == [10.5, 9.25]
    text = (tmp_path / 'report.csv').read_text()
    assert text.count('iteration,nll') == 1
    assert read_csv_headers(path) == [{'contrast': 'gauss'}, {'contrast': 'laplace'}]


if __name__ == '__main__':
    print(format_key_values({'contrast': 'gauss', 'iterations': 3}))
