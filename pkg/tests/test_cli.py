import json
import os

import pytest
import yaml
from rich.console import Console
from typer.testing import CliRunner

from heisenmix.cli import app
from heisenmix.core.configuration import load_project_config
from heisenmix.core.functions import get_function_description
from heisenmix.core.output_management import read_csv_config
from heisenmix.core.reporting import display_functions


runner = CliRunner()

COARSE_QUADRATURE = {
    'annuli_per_decade': 2,
    'points_per_annulus': 4,
    'polar_points': 8,
    'azimuth_points': 8,
    'tail_tolerance': 1e-3,
}


def write_config(tmp_path, payload):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def error_payload(output):
    for line in output.splitlines():
        if line.startswith("{"):
            return json.loads(line)
    raise AssertionError(f"no JSON error line in:\n{output}")


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "heisenmix v" in result.output


def test_bench_selected_suites(tmp_path):
    out = tmp_path / "bench"
    result = runner.invoke(app, ["bench", "--suite", "group_algebra", "-s", "degeneracy",
                                 "--seed", "5", "--out", str(out)])
    assert result.exit_code == 0, result.output
    document = json.load(open(out / "bench.json"))
    assert [r['name'] for r in document['results']] == ['group_algebra', 'degeneracy']
    assert document['seed'] == 5
    assert document['config']['bench']['suites'] == ['group_algebra', 'degeneracy']


def test_bench_unknown_suite_is_a_configuration_error(tmp_path):
    result = runner.invoke(app, ["bench", "-s", "speed", "--out", str(tmp_path / "b")])
    assert result.exit_code == 2
    assert error_payload(result.output) == {
        'error': 'configuration', 'field': 'bench.suites', 'message': 'unknown suite(s): speed'}


def test_eval_writes_csv_with_provenance(tmp_path):
    config = write_config(tmp_path, {
        'quadrature': COARSE_QUADRATURE,
        'eval': {'points': [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1]]},
    })
    out = tmp_path / "eval"
    result = runner.invoke(app, ["eval", "--config", config, "--out", str(out)])
    assert result.exit_code == 0, result.output
    lines = open(out / "eval.csv").read().splitlines()
    assert lines[1] == "x,y,t,L,local,frac_sublap,tail_bound"
    assert len(lines) == 4
    provenance = read_csv_config(str(out / "eval.csv"))
    assert provenance['quadrature']['tail_tolerance'] == 1e-3
    assert 'threads' not in provenance


def test_eval_output_does_not_depend_on_threads(tmp_path):
    config = write_config(tmp_path, {'quadrature': COARSE_QUADRATURE,
                                     'eval': {'points': [], 'random_points': 40}})
    for threads in ("1", "3"):
        result = runner.invoke(app, ["eval", "-c", config, "-j", threads, "--seed", "2",
                                     "-o", str(tmp_path / f"j{threads}")])
        assert result.exit_code == 0, result.output
    assert open(tmp_path / "j1" / "eval.csv").read() == open(tmp_path / "j3" / "eval.csv").read()


@pytest.mark.parametrize("payload,field", [
    ({'params': {'s': 1.5}}, 'params.s'),
    ({'params': {'s': 0.01}}, 'quadrature.tail_tolerance'),
    ({'eval': {'function': 'quadratic'}}, 'eval.function'),
])
def test_eval_configuration_errors_exit_2(tmp_path, payload, field):
    result = runner.invoke(app, ["eval", "-c", write_config(tmp_path, payload), "-o", str(tmp_path / "e")])
    assert result.exit_code == 2
    error = error_payload(result.output)
    assert error['error'] == 'configuration'
    assert error['field'] == field


def test_missing_config_file(tmp_path):
    result = runner.invoke(app, ["solve", "-c", str(tmp_path / "nope.yaml")])
    assert result.exit_code == 2
    assert error_payload(result.output)['field'] == 'config'


def solve_config(tmp_path, **solver):
    settings = {'tol': 1e-4, 'max_iter': 50, 'method': 'policy'}
    settings.update(solver)
    return write_config(tmp_path, {'grid': {'h_xy': 0.5}, 'problem': {'g': 'tanh_x:2'}, 'solver': settings})


def test_solve_with_check(tmp_path):
    out = tmp_path / "solve"
    result = runner.invoke(app, ["solve", "-c", solve_config(tmp_path), "--check", "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = json.load(open(out / "report.json"))
    assert report['report']['converged'] is True
    assert report['grid']['h_xy'] == 0.5
    assert set(report['viscosity']) == {'sub', 'super'}
    assert report['viscosity']['sub']['worst'] <= 1e-3
    header = open(out / "solution.csv").read().splitlines()[1]
    assert header == "x,y,t,u"


def test_solve_without_convergence_exits_3_after_writing(tmp_path):
    out = tmp_path / "solve"
    config = solve_config(tmp_path, method='richardson', max_iter=1, tol=1e-12)
    result = runner.invoke(app, ["solve", "-c", config, "-o", str(out)])
    assert result.exit_code == 3
    error = error_payload(result.output)
    assert error['error'] == 'numerical'
    assert error['report']['status'] == 'max_iter'
    assert os.path.exists(out / "solution.csv")
    assert os.path.exists(out / "report.json")


def test_regularity_of_a_registry_function(tmp_path):
    config = write_config(tmp_path, {
        'grid': {'h_xy': 0.0625},
        'regularity': {'source': 'gauge_pow:0.5', 'k_max': 2, 'radius': 0.5, 'min_nodes': 2},
    })
    out = tmp_path / "reg"
    result = runner.invoke(app, ["regularity", "-c", config, "-o", str(out)])
    assert result.exit_code == 0, result.output
    fit = json.load(open(out / "fit.json"))
    assert [e['k'] for e in fit['profile']['entries']] == [0, 1, 2]
    assert 0 < fit['fit']['gamma'] <= 1
    assert open(out / "profile.csv").read().splitlines()[1] == "k,radius,osc,nodes"


def test_barrier_with_an_easy_target(tmp_path):
    config = write_config(tmp_path, {'quadrature': COARSE_QUADRATURE, 'barrier': {'target': 100.0, 'C0': 2.0}})
    out = tmp_path / "barrier"
    result = runner.invoke(app, ["barrier", "-c", config, "-o", str(out)])
    assert result.exit_code == 0, result.output
    document = json.load(open(out / "barrier.json"))
    assert document['certificate']['C'] == 2.0
    assert document['certificate']['satisfied'] is True
    assert document['domain'] == {'center': [2.0, 0.0, 0.0], 'radius': 1.0}
    assert document['decomposition']['point'] == [2.0, 0.0, 0.0]
    assert document['decomposition']['sign_violations'] == []


def test_barrier_search_exhausted_exits_3(tmp_path):
    config = write_config(tmp_path, {'quadrature': COARSE_QUADRATURE,
                                     'barrier': {'target': -1e6, 'C0': 1.0, 'C_max': 1.0}})
    result = runner.invoke(app, ["barrier", "-c", config, "-o", str(tmp_path / "b")])
    assert result.exit_code == 3
    assert error_payload(result.output)['report']['C'] == 1.0


def test_init_writes_a_complete_configuration(tmp_path):
    base = write_config(tmp_path, {'params': {'s': 0.25}, 'grid': {'h_xy': 0.5}})
    target = tmp_path / "full.yaml"
    result = runner.invoke(app, ["init", str(target), "-c", base])
    assert result.exit_code == 0, result.output
    written = yaml.safe_load(target.read_text())
    assert written['params']['s'] == 0.25
    assert set(written) >= {'params', 'quadrature', 'grid', 'problem', 'solver', 'eval', 'barrier', 'bench'}
    reloaded = load_project_config(str(target))
    reloaded.validate()
    assert reloaded.resolved() == load_project_config(base).resolved()


def test_init_refuses_to_overwrite(tmp_path):
    target = tmp_path / "heisenmix.yaml"
    target.write_text("params: {s: 0.75}\n")
    result = runner.invoke(app, ["init", str(target)])
    assert result.exit_code == 2
    assert error_payload(result.output)['field'] == 'path'
    assert target.read_text() == "params: {s: 0.75}\n"
    result = runner.invoke(app, ["init", str(target), "--force"])
    assert result.exit_code == 0, result.output
    assert yaml.safe_load(target.read_text())['params']['s'] == 0.5


def test_init_rejects_an_invalid_base(tmp_path):
    target = tmp_path / "out.yaml"
    result = runner.invoke(app, ["init", str(target), "-c", write_config(tmp_path, {'params': {'s': 1.5}})])
    assert result.exit_code == 2
    assert error_payload(result.output)['field'] == 'params.s'
    assert not target.exists()


def test_functions_lists_the_registry():
    result = runner.invoke(app, ["functions"])
    assert result.exit_code == 0, result.output
    assert "Closed-form functions" in result.output
    assert "const" in result.output


def test_function_table_shows_usage_and_description():
    out = Console(width=200, record=True)
    display_functions([("tanh_x:k", "1", get_function_description("tanh_x")), ("gaussian_gauge", "", "exp")], out=out)
    text = out.export_text()
    assert "tanh_x:k" in text
    assert "tanh(k x_1), bounded and monotone in x_1" in text
    assert "gaussian_gauge" in text
