import json
import math

import numpy as np
import pytest

from informed_options.chain_cli import (
    EstimatedParams,
    PriceHistory,
    cli_dispatch,
    estimate_params,
    export_surface,
    load_chain,
    load_curves,
    load_history,
    load_params,
    price_from_options,
    read_surface,
    surface_to_csv,
    surface_to_json,
)
from informed_options.closed_form import BsmInputs, bsm_call
from informed_options.core_model import MarketParams, OptionSpec, Surface, SurfaceRow
from informed_options.errors import DataError, DomainError, UsageError
from informed_options.informed import InformedTraderSpec, enhance
from informed_options.mean_info import MeanInfoSpec, _price_call_grid, mean_info_price


# ---------------------------------------------------------------------------
# estimation


def test_estimate_constant_closes():
    hist = PriceHistory(rows=[("2024-01-0%d" % d, 100.0) for d in range(1, 6)])
    est = estimate_params(hist)
    assert est.p_hat == 1.0  # a flat day counts as an up day
    assert est.mu_hat == 0.0
    assert est.sigma_hat == 0.0
    assert est.window == 5


def test_estimate_invariant_under_price_scaling():
    closes = [100.0, 101.0, 99.5, 102.0, 101.3]
    days = ["2024-01-0%d" % d for d in range(1, 6)]
    small = estimate_params(PriceHistory(rows=list(zip(days, closes))))
    big = estimate_params(
        PriceHistory(rows=[(d, c * 1000.0) for d, c in zip(days, closes)])
    )
    assert small == big


def test_estimate_two_rows_has_no_dispersion():
    est = estimate_params(
        PriceHistory(rows=[("2024-01-01", 100.0), ("2024-01-02", 99.0)])
    )
    assert est.p_hat == 0.0
    assert est.sigma_hat == 0.0
    assert est.mu_hat == pytest.approx(math.log(0.99), abs=1e-15)
    assert est.window == 2


def test_estimate_needs_two_closes():
    with pytest.raises(DataError):
        estimate_params(PriceHistory(rows=[("2024-01-01", 100.0)]))


def test_history_validation():
    with pytest.raises(DataError):
        PriceHistory(rows=[("2024-01-01", 100.0), ("2024-01-01", 101.0)])
    with pytest.raises(DataError):
        PriceHistory(rows=[("2024-01-02", 100.0), ("2024-01-01", 101.0)])
    with pytest.raises(DataError):
        PriceHistory(rows=[("2024-01-01", -5.0)])


def test_estimated_params_validation():
    with pytest.raises(DomainError):
        EstimatedParams(p_hat=1.2, mu_hat=0.0, sigma_hat=0.0, window=5)
    with pytest.raises(DomainError):
        EstimatedParams(p_hat=0.5, mu_hat=0.0, sigma_hat=-1.0, window=5)
    with pytest.raises(DomainError):
        EstimatedParams(p_hat=0.5, mu_hat=0.0, sigma_hat=0.0, window=1)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_history_good_file(tmp_path):
    path = _write(tmp_path, "h.csv",
                  "date,close\n2024-01-01,100\n2024-01-02,101.5\n")
    hist = load_history(path)
    assert hist.rows == (("2024-01-01", 100.0), ("2024-01-02", 101.5))


@pytest.mark.parametrize("text", [
    "day,close\n2024-01-01,100\n2024-01-02,101\n",
    "date,close\nJan 1,100\n2024-01-02,101\n",
    "date,close\n2024-01-01,abc\n2024-01-02,101\n",
    "date,close\n2024-01-01,100,extra\n",
    "date,close\n2024-01-01,100\n",
])
def test_load_history_rejects_malformed(tmp_path, text):
    with pytest.raises(DataError):
        load_history(_write(tmp_path, "h.csv", text))


def test_load_history_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_history(str(tmp_path / "absent.csv"))


# ---------------------------------------------------------------------------
# chain and parameter loading


def test_load_chain_mid_price_and_moneyness(tmp_path):
    path = _write(tmp_path, "chain.csv",
                  "expiry_years,strike,bid,ask\n0.5,300,10.0,10.4\n")
    quotes, rejected = load_chain(path, spot=301.6)
    assert rejected == ()
    (q,) = quotes
    assert q.market_price == pytest.approx(10.2, abs=1e-12)
    assert q.moneyness == pytest.approx(0.9946949602122016, abs=1e-12)
    assert q.quote_id == "line2"


def test_load_chain_five_column_variant(tmp_path):
    path = _write(tmp_path, "chain.csv",
                  "expiry_years,strike,bid,ask,last\n0.5,300,10.0,10.4,10.1\n")
    quotes, rejected = load_chain(path, spot=301.6)
    assert len(quotes) == 1 and rejected == ()


def test_load_chain_collects_rejections(tmp_path):
    path = _write(tmp_path, "chain.csv",
                  "expiry_years,strike,bid,ask\n"
                  "0.5,300,10.0,10.4\n"
                  "0.5,310,9.0,8.0\n"
                  "-0.5,300,10.0,10.4\n")
    quotes, rejected = load_chain(path, spot=301.6)
    assert len(quotes) == 1
    assert [line for line, _ in rejected] == [3, 4]
    assert "exceeds" in rejected[0][1]


@pytest.mark.parametrize("text", [
    "strike,bid,ask\n300,10.0,10.4\n",
    "expiry_years,strike,bid,ask\n0.5,300,ten,10.4\n",
    "expiry_years,strike,bid,ask\n0.5,300,10.0\n",
    "expiry_years,strike,bid,ask\n0.5,310,9.0,8.0\n",
])
def test_load_chain_rejects_malformed(tmp_path, text):
    # the last case is structurally fine but leaves zero usable quotes
    with pytest.raises(DataError):
        load_chain(_write(tmp_path, "chain.csv", text), spot=301.6)


def test_load_chain_bad_spot(tmp_path):
    path = _write(tmp_path, "chain.csv",
                  "expiry_years,strike,bid,ask\n0.5,300,10.0,10.4\n")
    with pytest.raises(DataError):
        load_chain(path, spot=0.0)


def test_load_params(tmp_path):
    path = _write(tmp_path, "p.json", json.dumps(
        {"spot": 100.0, "r": 0.0064, "mu": 0.04536, "sigma": 0.3175, "p0": 0.56}
    ))
    m, spot = load_params(path)
    assert spot == 100.0
    assert m.mu == 0.04536
    assert m.dt == pytest.approx(1.0 / 252.0)
    explicit = _write(tmp_path, "p2.json", json.dumps(
        {"spot": 100.0, "r": 0.0064, "mu": 0.04536, "sigma": 0.3175,
         "p0": 0.56, "dt": 0.01}
    ))
    m2, _ = load_params(explicit)
    assert m2.dt == 0.01


@pytest.mark.parametrize("payload", [
    '{"spot": 100.0, "r": 0.0064}',
    '{"spot": 100.0, "r": 0.0064, "mu": 0.04, "sigma": -0.3, "p0": 0.56}',
    '{"spot": -1.0, "r": 0.0064, "mu": 0.04, "sigma": 0.3, "p0": 0.56}',
    '[1, 2, 3]',
    'not json at all',
])
def test_load_params_rejects_malformed(tmp_path, payload):
    with pytest.raises(DataError):
        load_params(_write(tmp_path, "p.json", payload))


def test_load_curves_interpolates(tmp_path):
    path = _write(tmp_path, "c.csv",
                  "t,mu,sigma,r,p,psi\n"
                  "0.0,0.05,0.20,0.01,0.5,0.0\n"
                  "1.0,0.07,0.30,0.02,0.6,0.4\n")
    c = load_curves(path)
    assert c.horizon == 1.0
    assert c.sigma(0.5) == pytest.approx(0.25, abs=1e-15)
    assert c.mu(0.0) == 0.05
    # held flat outside the sampled range
    assert c.p(5.0) == pytest.approx(0.6, abs=1e-15)


@pytest.mark.parametrize("text", [
    "t,mu,sigma,r,p\n0,0.05,0.2,0.01,0.5\n1,0.05,0.2,0.01,0.5\n",
    "t,mu,sigma,r,p,psi\n0,0.05,0.2,0.01,0.5,0\n",
    "t,mu,sigma,r,p,psi\n1,0.05,0.2,0.01,0.5,0\n0,0.05,0.2,0.01,0.5,0\n",
    "t,mu,sigma,r,p,psi\n0,x,0.2,0.01,0.5,0\n1,0.05,0.2,0.01,0.5,0\n",
])
def test_load_curves_rejects_malformed(tmp_path, text):
    with pytest.raises(DataError):
        load_curves(_write(tmp_path, "c.csv", text))


# ---------------------------------------------------------------------------
# surface serialization


def _sample_surface() -> Surface:
    return Surface(rows=(
        SurfaceRow(moneyness=1.05, maturity=1.0, value=0.003,
                   residual=2.5e-18, status="ok"),
        SurfaceRow(moneyness=0.95, maturity=0.5, value=-0.5,
                   residual=1e-9, status="boundary"),
        SurfaceRow(moneyness=1.2, maturity=0.5, value=None,
                   residual=None, status="failed"),
    ))


def test_surface_csv_round_trip(tmp_path):
    surface = _sample_surface()
    path = str(tmp_path / "s.csv")
    export_surface(surface, path, "csv")
    back = read_surface(path)
    assert back.sorted_rows() == surface.sorted_rows()
    # deterministic bytes
    again = str(tmp_path / "s2.csv")
    export_surface(surface, again, "csv")
    assert open(path).read() == open(again).read()


def test_surface_json_round_trip(tmp_path):
    surface = _sample_surface()
    path = str(tmp_path / "s.json")
    export_surface(surface, path, "json")
    back = read_surface(path)
    assert back.sorted_rows() == surface.sorted_rows()
    records = json.loads(open(path).read())
    assert records[1]["value"] is None  # failed row survives as null


def test_surface_csv_failed_row_has_empty_fields():
    text = surface_to_csv(_sample_surface())
    lines = text.splitlines()
    assert lines[0] == "moneyness,maturity_years,value,residual,status"
    assert lines[2] == "1.2,0.5,,,failed"


def test_surface_export_guards(tmp_path):
    with pytest.raises(DomainError):
        export_surface(Surface(rows=()), str(tmp_path / "s.csv"), "csv")
    with pytest.raises(DomainError):
        export_surface(_sample_surface(), str(tmp_path / "s.xml"), "xml")


def test_read_surface_rejects_malformed(tmp_path):
    with pytest.raises(DataError):
        read_surface(_write(tmp_path, "s.csv", "a,b\n1,2\n"))
    with pytest.raises(DataError):
        read_surface(_write(tmp_path, "s.json", '{"not": "a list"}'))
    with pytest.raises(DataError):
        read_surface(str(tmp_path / "absent.csv"))


# ---------------------------------------------------------------------------
# the pricing entry point


def test_price_dispatch_matches_library_calls():
    bsm_direct = bsm_call(BsmInputs(spot=100.0, strike=100.0, tau=1.0, r=0.01,
                                    sigma=0.2))
    price, se = price_from_options(model="bsm", S0=100.0, K=100.0, T=1.0,
                                   r=0.01, sigma=0.2)
    assert price == bsm_direct and se is None

    m = MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.56, dt=1.0 / 64.0)
    tree_direct = mean_info_price(m, MeanInfoSpec(0.3, 0.2),
                                  OptionSpec.call(105.0, 1.0), 100.0, 64)
    price, _ = price_from_options(model="mean-info", S0=100.0, K=105.0, T=1.0,
                                  r=0.01, mu=0.05, sigma=0.2, p0=0.56,
                                  delta=0.3, rho=0.2, n=64)
    assert price == tree_direct


def test_price_dispatch_zero_edge_needs_no_drift():
    # an informed trader with no edge collapses to the plain model even
    # though mu (required otherwise) is not supplied
    flat, _ = price_from_options(model="informed", S0=100.0, K=100.0, T=1.0,
                                 r=0.01, sigma=0.2, lam=0.0)
    plain, _ = price_from_options(model="bsm", S0=100.0, K=100.0, T=1.0,
                                  r=0.01, sigma=0.2, dy=0.0)
    assert flat == plain


def test_price_dispatch_psi_resolution():
    lam = 0.1 * math.sqrt(0.56 * 0.44)
    via_psi, _ = price_from_options(model="informed", S0=100.0, K=100.0, T=1.0,
                                    r=0.01, mu=0.05, sigma=0.2, p0=0.56, psi=0.1)
    via_lam, _ = price_from_options(model="informed", S0=100.0, K=100.0, T=1.0,
                                    r=0.01, mu=0.05, sigma=0.2, p0=0.56, lam=lam)
    assert via_psi == via_lam
    with pytest.raises(UsageError):
        price_from_options(model="informed", S0=100.0, K=100.0, T=1.0,
                           r=0.01, mu=0.05, sigma=0.2, psi=0.1)


def test_price_dispatch_usage_errors():
    with pytest.raises(UsageError):
        price_from_options(model="heston", S0=100.0, K=100.0, T=1.0)
    with pytest.raises(UsageError):
        price_from_options(model="bsm", S0=100.0, K=100.0, T=1.0)
    with pytest.raises(UsageError):
        price_from_options(model="ksrf", S0=100.0, K=100.0, T=1.0,
                           mu=0.05, sigma=0.2, p0=0.56)
    with pytest.raises(UsageError):
        price_from_options(model="ksrf", S0=100.0, K=100.0, T=1.0, mu=0.05,
                           sigma=0.2, p0=0.56, n=64, dt=0.5)
    with pytest.raises(UsageError):
        price_from_options(model="bsm", S0=100.0, K=100.0, T=1.0, sigma=0.2,
                           kind="straddle")


def test_step_resolution_from_dt():
    # --dt alone works when it divides the maturity evenly
    a, _ = price_from_options(model="ksrf", S0=100.0, K=100.0, T=1.0, r=0.01,
                              mu=0.05, sigma=0.2, p0=0.56, n=128)
    b, _ = price_from_options(model="ksrf", S0=100.0, K=100.0, T=1.0, r=0.01,
                              mu=0.05, sigma=0.2, p0=0.56, dt=1.0 / 128.0)
    assert a == b
    with pytest.raises(UsageError):
        price_from_options(model="ksrf", S0=100.0, K=100.0, T=1.0, r=0.01,
                           mu=0.05, sigma=0.2, p0=0.56, dt=0.3)


# ---------------------------------------------------------------------------
# the command line itself


def test_cli_price_bsm_stdout(capsys):
    code = cli_dispatch(["price", "--model", "bsm", "--S0", "100", "--K", "100",
                         "--T", "1", "--r", "0", "--sigma", "0.2"])
    out = capsys.readouterr()
    assert code == 0
    assert out.out == "7.965567455\n"
    assert out.err == ""


def test_cli_informed_zero_edge_equals_plain(capsys):
    base = ["--S0", "100", "--K", "105", "--T", "0.75", "--r", "0.01",
            "--sigma", "0.2"]
    assert cli_dispatch(["price", "--model", "informed", "--lambda", "0"] + base) == 0
    informed_out = capsys.readouterr().out
    assert cli_dispatch(["price", "--model", "bsm", "--dy", "0"] + base) == 0
    assert capsys.readouterr().out == informed_out


def test_cli_usage_failures(capsys):
    assert cli_dispatch([]) == 1
    capsys.readouterr()
    assert cli_dispatch(["price", "--S0", "100", "--K", "100", "--T", "1"]) == 1
    assert "usage error" in capsys.readouterr().err
    assert cli_dispatch(["price", "--model", "heston", "--S0", "1", "--K", "1",
                         "--T", "1"]) == 1
    capsys.readouterr()


def test_cli_help_exits_cleanly(capsys):
    assert cli_dispatch(["--help"]) == 0
    assert "informed-options" in capsys.readouterr().out


def test_cli_numerical_failure_exit_code(capsys):
    # a drift this large drives the risk-neutral weight out of (0, 1)
    code = cli_dispatch(["price", "--model", "ksrf", "--S0", "100", "--K", "100",
                         "--T", "1", "--mu", "80", "--sigma", "0.2",
                         "--p0", "0.56", "--n", "252"])
    out = capsys.readouterr()
    assert code == 3
    assert "error" in out.err


def test_cli_estimate(tmp_path, capsys):
    path = _write(tmp_path, "h.csv",
                  "date,close\n2024-01-01,100\n2024-01-02,101\n2024-01-03,100.5\n")
    assert cli_dispatch(["estimate", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    est = estimate_params(load_history(path))
    assert payload["p_hat"] == pytest.approx(est.p_hat)
    assert payload["mu_hat"] == pytest.approx(est.mu_hat, rel=1e-9)
    assert payload["sigma_hat"] == pytest.approx(est.sigma_hat, rel=1e-9)
    assert payload["window"] == 3


def test_cli_estimate_missing_file(tmp_path, capsys):
    assert cli_dispatch(["estimate", str(tmp_path / "absent.csv")]) == 2
    assert "data error" in capsys.readouterr().err


def test_cli_calibrate_lambda_chain(tmp_path, capsys):
    params = dict(spot=100.0, r=0.0064, mu=0.04536, sigma=0.3175, p0=0.56)
    m = MarketParams(mu=params["mu"], sigma=params["sigma"], r=params["r"],
                     p0=params["p0"])
    lam_true = 0.003
    d_y = enhance(m, InformedTraderSpec(lambda_info=lam_true)).d_y
    lines = ["expiry_years,strike,bid,ask"]
    for expiry in (0.5, 1.0):
        for strike in (95.0, 100.0, 105.0, 110.0):
            price = bsm_call(BsmInputs(spot=100.0, strike=strike, tau=expiry,
                                       r=m.r, sigma=m.sigma, d_y=d_y))
            lines.append(f"{expiry},{strike},{price!r},{price!r}")
    lines.append("1.0,120,5.0,4.0")  # bid over ask, must be reported not fatal
    chain = _write(tmp_path, "chain.csv", "\n".join(lines) + "\n")
    pfile = _write(tmp_path, "params.json", json.dumps(params))
    out = str(tmp_path / "lam.csv")

    code = cli_dispatch(["calibrate", "--target", "lambda", "--chain", chain,
                         "--params", pfile, "--out", out])
    captured = capsys.readouterr()
    assert code == 0
    assert "rejected line 10" in captured.err
    assert "wrote 8 rows (8 ok)" in captured.out
    surface = read_surface(out)
    assert len(surface.rows) == 8
    for row in surface.rows:
        assert row.status == "ok"
        assert row.value == pytest.approx(lam_true, abs=1e-6)


def test_cli_calibrate_dev_chain(tmp_path, capsys):
    params = dict(spot=100.0, r=0.0064, mu=0.04536, sigma=0.3175, p0=0.56)
    m = MarketParams(mu=params["mu"], sigma=params["sigma"], r=params["r"],
                     p0=params["p0"])
    rho_true, delta_true = 0.8, 0.75
    lines = ["expiry_years,strike,bid,ask"]
    for strike, expiry in ((100.0, 0.5), (110.0, 1.0)):
        n = round(expiry / m.dt)
        price = float(_price_call_grid(m, rho_true, np.array([delta_true]),
                                       100.0, strike, expiry, n)[0])
        lines.append(f"{expiry},{strike},{price!r},{price!r}")
    chain = _write(tmp_path, "chain.csv", "\n".join(lines) + "\n")
    pfile = _write(tmp_path, "params.json", json.dumps(params))
    out = str(tmp_path / "dev.json")

    code = cli_dispatch(["calibrate", "--target", "dev", "--chain", chain,
                         "--params", pfile, "--out", out, "--format", "json",
                         "--delta-lo", "0.5", "--delta-hi", "1.0",
                         "--delta-step", "0.05"])
    captured = capsys.readouterr()
    assert code == 0
    rho_line = [l for l in captured.out.splitlines() if l.startswith("rho_opt=")]
    assert rho_line and abs(float(rho_line[0].split("=")[1]) - rho_true) <= 0.02
    surface = read_surface(out)
    expect = m.sigma * delta_true / math.sqrt(m.p0 * (1.0 - m.p0))
    for row in surface.rows:
        assert row.value == pytest.approx(expect, abs=0.02)


def test_cli_calibrate_missing_chain(tmp_path, capsys):
    pfile = _write(tmp_path, "params.json", json.dumps(
        dict(spot=100.0, r=0.0064, mu=0.04536, sigma=0.3175, p0=0.56)))
    code = cli_dispatch(["calibrate", "--target", "lambda",
                         "--chain", str(tmp_path / "absent.csv"),
                         "--params", pfile])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_cli_surface_export_conversion(tmp_path, capsys):
    src = str(tmp_path / "s.csv")
    export_surface(_sample_surface(), src, "csv")
    assert cli_dispatch(["surface-export", src, "--format", "json"]) == 0
    records = json.loads(capsys.readouterr().out)
    assert len(records) == 3
    dest = str(tmp_path / "s2.csv")
    assert cli_dispatch(["surface-export", src, "--format", "csv",
                         "--out", dest]) == 0
    capsys.readouterr()
    assert open(dest).read() == surface_to_csv(_sample_surface())


def test_cli_tv_mc_deterministic_across_threads(tmp_path, capsys, monkeypatch):
    argv = ["price", "--model", "tv-mc", "--S0", "100", "--K", "100", "--T", "1",
            "--r", "0.02", "--sigma", "0.2", "--dy", "0.05",
            "--paths", "4096", "--steps", "8", "--seed", "3"]
    monkeypatch.setenv("INFORMED_OPTIONS_THREADS", "1")
    assert cli_dispatch(argv) == 0
    serial = capsys.readouterr().out
    monkeypatch.setenv("INFORMED_OPTIONS_THREADS", "4")
    assert cli_dispatch(argv) == 0
    assert capsys.readouterr().out == serial
    assert cli_dispatch(argv[:-1] + ["4"]) == 0
    assert capsys.readouterr().out != serial  # new seed, new draw
    price_str, se_str = serial.split()
    assert float(se_str) > 0.0
    assert abs(float(price_str) - 6.33) < 1.0


def test_cli_tv_mc_reads_curve_file(tmp_path, capsys):
    path = _write(tmp_path, "c.csv",
                  "t,mu,sigma,r,p,psi\n"
                  "0.0,0.05,0.20,0.02,0.5,0.0\n"
                  "1.0,0.05,0.20,0.02,0.5,0.0\n")
    argv = ["price", "--model", "tv-mc", "--S0", "100", "--K", "100", "--T", "1",
            "--curves", path, "--paths", "4096", "--steps", "8", "--seed", "3"]
    assert cli_dispatch(argv) == 0
    with_curves = capsys.readouterr().out
    flat = ["price", "--model", "tv-mc", "--S0", "100", "--K", "100", "--T", "1",
            "--r", "0.02", "--sigma", "0.2", "--mu", "0.05",
            "--paths", "4096", "--steps", "8", "--seed", "3"]
    assert cli_dispatch(flat) == 0
    assert capsys.readouterr().out == with_curves
