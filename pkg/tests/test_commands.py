"""
End-to-end tests of the command line: exit codes, CSV outputs and manifests.
"""
import json

import pandas as pd
import pytest

import main
from commands import FIGURE_PRESETS, PhaseBenchHandler, load_config, resolve_parameters
from errors import ValidationError
from utils import generate_content_hash

FIG1_FLAGS = ['--W', '1e-3', '--nbar', '1', '--m', '1e6', '--nu', '0.1']


def read_rows(path):
    """quantity -> value (as text) from a two-column CSV."""
    frame = pd.read_csv(path, dtype=str)
    return dict(zip(frame['quantity'], frame['value']))


def run(argv, outdir):
    return main.main(list(argv) + ['--out', str(outdir), '--quiet'])


class TestBounds:

    def test_first_scenario_table(self, outdir, capsys):
        assert run(['bounds'] + FIG1_FLAGS, outdir) == 0
        rows = read_rows(outdir / 'bounds.csv')
        assert float(rows['zz_closed']) == pytest.approx(3.5355e-5, rel=1e-4)
        assert float(rows['weak_scale']) == pytest.approx(1e-3)
        assert float(rows['strong_scale']) == pytest.approx(1e-6)
        assert rows['c1_ok'] == 'True'
        assert 'zz_closed' in capsys.readouterr().out

    def test_zero_width_rejected(self, outdir, capsys):
        assert run(['bounds', '--W', '0', '--nbar', '1', '--m', '1e6', '--nu', '0.1'], outdir) == 2
        assert "prior width must be positive" in capsys.readouterr().err
        assert not (outdir / 'bounds.csv').exists()

    @pytest.mark.parametrize("flags", [
        ['--m', '0'],
        ['--m', '2.5'],
        ['--nu', '1.5'],
        ['--tol', '0.5'],
        ['--nbar', 'abc'],
    ])
    def test_invalid_parameters(self, outdir, flags):
        assert run(['bounds'] + flags, outdir) == 2

    def test_full_precision_csv(self, outdir):
        run(['bounds'] + FIG1_FLAGS, outdir)
        text = (outdir / 'bounds.csv').read_text()
        assert '3.5355339059327' in text

    def test_manifest_lists_outputs(self, outdir):
        run(['bounds'] + FIG1_FLAGS, outdir)
        manifest = json.loads((outdir / 'bounds_manifest.json').read_text())
        assert manifest['command'] == 'bounds'
        assert manifest['parameters']['m'] == 1_000_000
        assert manifest['version'] == PhaseBenchHandler.VERSION
        [entry] = manifest['outputs']
        assert entry['path'] == 'bounds.csv'
        assert entry['sha256'] == generate_content_hash(outdir / 'bounds.csv')

    def test_manifest_replay(self, outdir, tmp_path):
        run(['bounds'] + FIG1_FLAGS + ['--phi', '2e-4'], outdir)
        replay = tmp_path / 'replay'
        assert run(['bounds', '--config', str(outdir / 'bounds_manifest.json')], replay) == 0
        assert (replay / 'bounds.csv').read_bytes() == (outdir / 'bounds.csv').read_bytes()

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        target = tmp_path / 'from_env'
        monkeypatch.setenv('PHASE_BENCH_OUTPUT_DIR', str(target))
        assert main.main(['bounds', '--quiet'] + FIG1_FLAGS) == 0
        assert (target / 'bounds.csv').exists()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / 'file'
        blocker.write_text('not a directory')
        assert run(['bounds'] + FIG1_FLAGS, blocker) == 4


class TestConfig:

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / 'scenario.json'
        path.write_text(json.dumps({'m': 1000, 'nu': 0.2}))
        params = resolve_parameters({'m': '1e4'}, str(path))
        assert params['m'] == 10_000
        assert params['nu'] == 0.2
        assert params['W'] == 1e-3

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'scenario.json'
        path.write_text(json.dumps({'mm': 5}))
        with pytest.raises(ValidationError, match="unknown configuration key"):
            load_config(str(path))

    def test_missing_file(self, outdir):
        assert run(['bounds', '--config', 'no/such/file.json'], outdir) == 2

    def test_counts_parsed_without_float_rounding(self):
        params = resolve_parameters({'seed': '12345678901234567891', 'm': '1e6'})
        assert params['seed'] == 12345678901234567891
        assert params['m'] == 1_000_000

    def test_non_integer_count_rejected(self):
        with pytest.raises(ValidationError, match="must be an integer"):
            resolve_parameters({'trials': '2.5'})

    def test_bad_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"m": ')
        with pytest.raises(ValidationError, match="invalid JSON"):
            load_config(str(path))


class TestPosterior:

    def test_writes_curves(self, outdir):
        assert run(['posterior'] + FIG1_FLAGS + ['--phi', '1e-4', '--points', '801'], outdir) == 0
        frame = pd.read_csv(outdir / 'posterior.csv')
        assert list(frame.columns) == ['phi_hat', 'density_exact', 'density_gauss']
        assert len(frame) == 801
        rows = read_rows(outdir / 'posterior_summary.csv')
        assert float(rows['sigma_gauss']) == pytest.approx(5e-5, rel=1e-5)

    def test_narrow_window_is_numerical_error(self, outdir):
        assert run(['posterior'] + FIG1_FLAGS + ['--half-width', '3'], outdir) == 3


class TestReproduce:

    def test_first_figure(self, outdir):
        assert run(['reproduce', 'fig1'], outdir) == 0
        rows = read_rows(outdir / 'fig1_summary.csv')
        assert float(rows['ratio_weak']) == pytest.approx(0.05, rel=1e-4)
        assert float(rows['ratio_W']) == pytest.approx(0.05, rel=1e-4)
        assert float(rows['ratio_strong']) == pytest.approx(50.0, rel=1e-4)
        assert rows['gap_ok'] == 'True'
        assert float(rows['phi_marker']) == 1e-4
        curve = pd.read_csv(outdir / 'fig1_curve.csv')
        assert list(curve.columns) == ['phi_hat', 'density_exact', 'density_gauss']
        assert (outdir / 'reproduce_fig1_manifest.json').exists()

    def test_second_figure(self, outdir):
        assert run(['reproduce', 'fig2'], outdir) == 0
        rows = read_rows(outdir / 'fig2_summary.csv')
        assert float(rows['ratio_weak']) == pytest.approx(0.015, rel=0.01)
        assert 0.11 <= float(rows['ratio_W']) <= 0.12
        assert 1.85 <= float(rows['ratio_strong']) <= 2.0
        assert float(rows['gap_peak_relative']) < FIGURE_PRESETS['fig2']['gap_threshold']
        assert rows['gap_ok'] == 'True'

    def test_with_monte_carlo(self, outdir):
        assert run(['reproduce', 'fig1', '--trials', '10000', '--seed', '3'], outdir) == 0
        rows = read_rows(outdir / 'fig1_summary.csv')
        assert 4.85e-5 <= float(rows['mc_rmse']) <= 5.15e-5
        manifest = json.loads((outdir / 'reproduce_fig1_manifest.json').read_text())
        assert manifest['master_seed'] == 3

    def test_unknown_figure(self, outdir):
        assert run(['reproduce', 'fig3'], outdir) == 2


class TestSimulate:

    def test_byte_identical_reruns(self, tmp_path):
        flags = ['simulate', '--trials', '10', '--m', '100', '--seed', '42', '--phi', '1e-4']
        assert run(flags, tmp_path / 'a') == 0
        assert run(flags, tmp_path / 'b') == 0
        assert (tmp_path / 'a' / 'records.csv').read_bytes() == (tmp_path / 'b' / 'records.csv').read_bytes()
        header = (tmp_path / 'a' / 'records.csv').read_text().splitlines()[0]
        assert header == 'index,phi_true,k,phi_hat,error,clamped'

    def test_first_scenario_campaign(self, outdir):
        assert run(['simulate'] + FIG1_FLAGS + ['--trials', '1e4', '--seed', '7', '--workers', '2'], outdir) == 0
        rows = read_rows(outdir / 'summary.csv')
        assert 4.85e-5 <= float(rows['rmse']) <= 5.15e-5
        manifest = json.loads((outdir / 'simulate_manifest.json').read_text())
        assert manifest['master_seed'] == 7
        assert {o['path'] for o in manifest['outputs']} == {'records.csv', 'summary.csv'}

    def test_zero_trials(self, outdir, capsys):
        assert run(['simulate', '--trials', '0'], outdir) == 2
        assert "trials must be at least 1" in capsys.readouterr().err

    @pytest.mark.parametrize("seed", [12345678901234567891, 2**64 - 1])
    def test_large_seed_kept_exactly(self, outdir, seed):
        assert run(['simulate', '--trials', '10', '--m', '100', '--seed', str(seed)], outdir) == 0
        manifest = json.loads((outdir / 'simulate_manifest.json').read_text())
        assert manifest['master_seed'] == seed
        assert manifest['parameters']['seed'] == seed

    def test_replay_from_manifest(self, tmp_path):
        first = tmp_path / 'first'
        run(['simulate', '--trials', '50', '--m', '500', '--seed', '9', '--policy', 'sample-from-prior'], first)
        second = tmp_path / 'second'
        assert run(['simulate', '--config', str(first / 'simulate_manifest.json')], second) == 0
        assert (second / 'records.csv').read_bytes() == (first / 'records.csv').read_bytes()


class TestSweep:

    def test_closed_form_scaling_in_m(self, outdir):
        assert run(['sweep', '--vary', 'm', '--values', '1e3,1e4,1e5,1e6'], outdir) == 0
        frame = pd.read_csv(outdir / 'sweep.csv')
        assert frame['m'].tolist() == [1000, 10_000, 100_000, 1_000_000]
        scaled = frame['zz_closed'] * frame['m']**0.5
        assert (scaled / scaled.iloc[0] - 1).abs().max() < 1e-6

    def test_fixed_mnu2_stays_near_strong_limit(self, outdir):
        argv = ['sweep', '--vary', 'nu', '--values', '0.05,0.1,0.2', '--fixed-mnu2', '20',
                '--trials', '4000', '--seed', '5']
        assert run(argv, outdir) == 0
        frame = pd.read_csv(outdir / 'sweep.csv')
        assert frame['m'].tolist() == [8000, 2000, 500]
        assert (frame['m'] * frame['nu']**2).round(9).eq(20.0).all()
        assert frame['mc_rmse_over_strong'].between(1.5, 3.0).all()

    def test_single_point_matches_bounds(self, tmp_path):
        run(['sweep', '--vary', 'm', '--values', '1e6'] + FIG1_FLAGS, tmp_path / 'sweep')
        run(['bounds'] + FIG1_FLAGS, tmp_path / 'bounds')
        row = pd.read_csv(tmp_path / 'sweep' / 'sweep.csv', float_precision='round_trip').iloc[0]
        bounds = read_rows(tmp_path / 'bounds' / 'bounds.csv')
        for name in ('weak_scale', 'strong_scale', 'cr', 'qcr', 'zz_exact', 'zz_closed', 'bcr', 'c1', 'c2'):
            assert row[name] == float(bounds[name])

    def test_empty_range(self, outdir):
        assert run(['sweep', '--vary', 'm', '--values', ''], outdir) == 2

    def test_fixed_mnu2_needs_m_or_nu(self, outdir):
        assert run(['sweep', '--vary', 'W', '--values', '1e-3', '--fixed-mnu2', '20'], outdir) == 2
