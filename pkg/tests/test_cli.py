import csv

import pytest

from prefnet.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def net_file(tmp_path, capsys):
    path = tmp_path / "net.csv"
    assert run(capsys, "gen-net", "--n", 15, "--param", "k=4", "--seed", 2, "-o", path)[0] == 0
    return path


def test_gen_net_writes_edge_csv(net_file):
    rows = list(csv.DictReader(open(net_file)))
    assert rows and set(rows[0]) == {"u", "v", "mu", "sigma"}
    assert len(rows) == 15 * 4 // 2


def test_missing_seed_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen-net", "--n", "10"])
    assert exc.value.code == 2


def test_bad_size_is_input_error(capsys):
    code, _, err = run(capsys, "gen-net", "--n", 1, "--seed", 0)
    assert code == 3 and "error" in err


def test_missing_network_file(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--network", tmp_path / "nope.csv", "--seed", 0)
    assert code == 3


def test_simulate_row_count(capsys, net_file, tmp_path):
    out = tmp_path / "prof.csv"
    code, _, _ = run(capsys, "simulate", "--network", net_file, "--topics", 4, "--r", 4, "--seed", 1, "-o", out)
    assert code == 0
    assert sum(1 for _ in open(out)) == 1 + 4 * 15


def test_capacity_error_exit(capsys, net_file):
    code, _, err = run(capsys, "simulate", "--network", net_file, "--model", "rpm-ic", "--r", 8, "--seed", 1)
    assert code == 4 and "capacity" in err


def test_outputs_are_deterministic(capsys, net_file):
    argv = ("simulate", "--network", net_file, "--topics", 3, "--r", 4, "--seed", 9)
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]
    sel = ("select", "--network", net_file, "--k", 3, "--r", 4, "--tr-samples", 200, "--seed", 9)
    a = run(capsys, *sel)
    assert a[0] == 0 and a[1] == run(capsys, *sel, "--threads", 2)[1]
    assert a[1].splitlines()[0] == "rank,node,weight"


def test_verify_tu(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "tu", "--n", 4, "--instances", 3, "--seed", 1)
    assert code == 0
    assert [line.rsplit(",", 1)[1] for line in out.splitlines()[1:]] == ["1"] * 3


def test_score_and_fit(capsys, net_file, tmp_path):
    prof = tmp_path / "prof.csv"
    run(capsys, "simulate", "--network", net_file, "--topics", 30, "--r", 4, "--seed", 3, "-o", prof)
    code, out, _ = run(capsys, "score", "--profiles", prof, "--user", 0, "--friend", 1)
    assert code == 0 and out.startswith("user,social_centrality")
    code, out, _ = run(capsys, "fit", "--profiles", prof, "--network", net_file)
    assert code == 0 and out.splitlines()[0] == "u,v,mu,sigma"


def test_evaluate_small(capsys):
    code, out, _ = run(capsys, "evaluate", "--n", 20, "--param", "k=4", "--topics", 5, "--r", 4,
                       "--ks", "1,2", "--algos", "greedy-sum,random-poll", "--poll-runs", 3,
                       "--tr-samples", 200, "--seed", 0)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "algorithm,rule,k,mean_error,stderr,runtime_ms,worst_error"
    assert len(lines) == 1 + 2 * 2
