import io
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

import synthetic
from condiv.cli import main
from condiv.corpus import save_dataset
from condiv.model import checkpoint_hash
from condiv.service import make_server


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Prepared artifacts plus a briefly trained checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "train.jsonl"
    records = synthetic.grounded_corpus([(i, j) for i in range(4) for j in range(3)])
    save_dataset(data, records)
    cfg = root / "train.cfg"
    cfg.write_text(
        "hidden_dim = 8\nembed_dim = 8\nattn_dim = 8\nn_div = 2\n"
        "top_n_topics = 2\nmax_epochs = 3\nlearning_rate = 0.01\n"
        "batch_size = 8\nseed = 3\nvocab_cap = 300\n"
    )
    assert main(["prepare", "--data", str(data), "--out", str(root)]) == 0
    rc = main(["train", "--data", str(data), "--config", str(cfg),
               "--out", str(root)])
    assert rc == 0
    return {"root": root, "data": data, "cfg": cfg}


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_prepare_artifacts(workspace):
    root = workspace["root"]
    assert (root / "vocab.txt").read_text().startswith("condiv-vocab v1\n")
    assert (root / "idf.txt").read_text().startswith("condiv-idf v1\n")
    assert (root / "pmi.txt").read_text().startswith("condiv-pmi v1\n")
    assert (root / "ckpt-best.bin").exists()
    assert (root / "train-log.jsonl").read_text().strip()


def test_train_deterministic_across_runs(workspace, tmp_path, capsys):
    args = ["train", "--data", str(workspace["data"]), "--config",
            str(workspace["cfg"])]
    code1, out1, _ = run_cli(args + ["--out", str(tmp_path / "a")], capsys)
    code2, out2, _ = run_cli(args + ["--out", str(tmp_path / "b")], capsys)
    assert code1 == code2 == 0
    loss1 = json.loads(out1.strip().splitlines()[-1])["best_dev_loss"]
    loss2 = json.loads(out2.strip().splitlines()[-1])["best_dev_loss"]
    assert loss1 == loss2


def test_eval_identical_files_bleu_100(tmp_path, capsys):
    hyp = tmp_path / "hyp.txt"
    ref = tmp_path / "ref.txt"
    text = "the otter likes the forest of norway\nthe lynx likes the river\n"
    hyp.write_text(text)
    ref.write_text(text)
    code, out, _ = run_cli(["eval", "--hyp", str(hyp), "--ref", str(ref)], capsys)
    assert code == 0
    assert json.loads(out.strip())["bleu"] == pytest.approx(100.0)


def test_eval_missing_file_exit_3(tmp_path, capsys):
    code, _, err = run_cli(["eval", "--hyp", str(tmp_path / "nope.txt"),
                            "--ref", str(tmp_path / "nope.txt")], capsys)
    assert code == 3
    assert "condiv-error code=3" in err
    assert "nope.txt" in err


def test_missing_checkpoint_exit_3(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CONDIV_HOME", str(tmp_path))
    code, _, err = run_cli(["generate", "--data", str(tmp_path / "x.jsonl")],
                           capsys)
    assert code == 3
    assert "ckpt-best.bin" in err


def test_unknown_subcommand_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_generate_beta_sweep_provenance(workspace, tmp_path, capsys):
    root = workspace["root"]
    base = ["generate", "--data", str(workspace["data"]),
            "--checkpoint", str(root / "ckpt-best.bin"),
            "--vocab", str(root / "vocab.txt"), "--idf", str(root / "idf.txt"),
            "--seed", "7"]

    def drift_fraction(out_text):
        drift = total = 0
        for line in out_text.strip().splitlines():
            rec = json.loads(line)
            for tag in rec["provenance"]:
                total += 1
                drift += tag.startswith("drift-")
        return drift / max(total, 1)

    code0, out0, _ = run_cli(base + ["--beta", "0"], capsys)
    code1, out1, _ = run_cli(base + ["--beta", "1"], capsys)
    assert code0 == code1 == 0
    assert drift_fraction(out0) == 0.0
    assert drift_fraction(out1) >= 0.0  # direction asserted on trained toy in acceptance


def test_eval_checkpoint_mode(workspace, capsys):
    root = workspace["root"]
    code, out, _ = run_cli(
        ["eval", "--data", str(workspace["data"]),
         "--checkpoint", str(root / "ckpt-best.bin"),
         "--vocab", str(root / "vocab.txt"), "--idf", str(root / "idf.txt"),
         "--pmi", str(root / "pmi.txt"), "--seed", "5", "--k", "1"], capsys)
    assert code == 0
    report = json.loads(out.strip().splitlines()[-1])
    assert set(report) >= {"schema", "bleu", "dist1", "dist2", "pmi"}
    assert report["pmi"] is not None


def test_inspect_drift_output(workspace, capsys):
    root = workspace["root"]
    code, out, _ = run_cli(
        ["inspect-drift", "--text", "tell me about the otter in the forest",
         "--checkpoint", str(root / "ckpt-best.bin"),
         "--vocab", str(root / "vocab.txt"), "--idf", str(root / "idf.txt")],
        capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert any(l.startswith("context-topic\t") for l in lines)
    assert any(l.startswith("context-drift\t") for l in lines)
    assert all("\t" in l for l in lines)


def test_chat_loop_scripted(workspace, capsys, monkeypatch):
    root = workspace["root"]
    monkeypatch.setattr("sys.stdin", io.StringIO(
        "tell me about the otter\n/beta 1.0\nand the lynx ?\nexit\n"))
    monkeypatch.setattr("builtins.input", lambda prompt="": next(_stdin_lines))
    global _stdin_lines
    _stdin_lines = iter(["tell me about the otter", "/beta 1.0",
                         "and the lynx ?", "exit"])
    code = main(["chat", "--checkpoint", str(root / "ckpt-best.bin"),
                 "--vocab", str(root / "vocab.txt"), "--idf",
                 str(root / "idf.txt"), "--seed", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "bot(beta=" in out
    assert "beta mode: 1.0" in out


# -- HTTP service -------------------------------------------------------------------


@pytest.fixture(scope="module")
def service(workspace):
    from condiv.cli import _load_bundle

    class Args:
        checkpoint = str(workspace["root"] / "ckpt-best.bin")
        vocab = str(workspace["root"] / "vocab.txt")
        idf = str(workspace["root"] / "idf.txt")

    bundle, ckpt_path = _load_bundle(Args)
    server = make_server(bundle, checkpoint_hash(ckpt_path), port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base
    server.shutdown()


def http(base, path, body=None):
    url = base + path
    if body is None:
        req = urllib.request.Request(url)
    else:
        req = urllib.request.Request(url, data=json.dumps(body).encode(),
                                     headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())


def test_health(service):
    status, payload = http(service, "/v1/health")
    assert status == 200
    assert payload["status"] == "ok"
    assert payload["checkpoint"].startswith("sha256:")
    status2, payload2 = http(service, "/v1/health")
    assert payload2["checkpoint"] == payload["checkpoint"]


def test_generate_endpoint_deterministic(service):
    body = {"context": ["tell me about the otter in the forest"],
            "facts": ["the otter lives in the forest of norway"],
            "seed": 9, "k": 2}
    status, p1 = http(service, "/v1/generate", body)
    assert status == 200
    assert p1["schema"] == "v1"
    _, p2 = http(service, "/v1/generate", body)
    assert p1["text"] == p2["text"]
    diag = p1["diagnostics"]
    assert set(d["source"].split(":")[0] for d in diag["provenance"]) <= {
        "vocab", "context-copy", "fact-copy", "drift-contextual", "drift-factual"}


def test_chat_round_trip_with_beta_override(service):
    body = {"session_id": "alpha", "text": "tell me about the otter",
            "beta": 1.0, "seed": 4}
    status, payload = http(service, "/v1/chat", body)
    assert status == 200
    diag = payload["diagnostics"]
    assert diag["beta_used"] == 1.0
    assert 0.0 < diag["beta_predicted"] < 1.0
    status, transcript = http(service, "/v1/session/alpha")
    assert status == 200
    assert len(transcript["transcript"]) == 2
    assert transcript["transcript"][1]["speaker"] == "system"


def test_malformed_body_400(service):
    status, payload = http(service, "/v1/chat", {"session_id": "x"})
    assert status == 400
    assert payload["error"]["field"] == "text"
    status, _ = http(service, "/v1/generate", {"context": "not-a-list"})
    assert status == 400


def test_unknown_session_404(service):
    status, payload = http(service, "/v1/session/never-seen")
    assert status == 404
    assert payload["error"]["field"] == "session_id"


def test_beta_out_of_range_422(service):
    status, payload = http(service, "/v1/chat",
                           {"session_id": "b", "text": "hi", "beta": 1.5})
    assert status == 422
    assert payload["error"]["field"] == "beta"


def test_concurrent_sessions_isolated(service):
    results = {}

    def run(session_id, text, seed):
        status, payload = http(service, "/v1/chat",
                               {"session_id": session_id, "text": text,
                                "seed": seed})
        results[session_id] = (status, payload)

    threads = [
        threading.Thread(target=run, args=("s-one", "tell me about the otter", 1)),
        threading.Thread(target=run, args=("s-two", "tell me about the lynx", 2)),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results["s-one"][0] == 200 and results["s-two"][0] == 200
    _, t1 = http(service, "/v1/session/s-one")
    _, t2 = http(service, "/v1/session/s-two")
    assert t1["transcript"][0]["text"] == "tell me about the otter"
    assert t2["transcript"][0]["text"] == "tell me about the lynx"
    assert len(t1["transcript"]) == 2
    assert len(t2["transcript"]) == 2


def test_facts_cap_enforced_on_chat(service):
    body = {"session_id": "caps", "text": "hello there",
            "facts": [f"fact {i}" for i in range(5)]}
    status, payload = http(service, "/v1/chat", body)
    assert status == 422
    assert payload["error"]["field"] == "facts"


def test_chat_provenance_reproducible_from_returned_seed(service):
    body = {"session_id": "repro", "text": "what of the otter in the forest ?",
            "facts": ["the otter lives in the forest of norway"], "seed": 77}
    _, chat = http(service, "/v1/chat", body)
    diag = chat["diagnostics"]
    # a first turn's effective context is the user utterance alone, so the
    # stateless endpoint with the returned seed replays it exactly
    _, gen = http(service, "/v1/generate", {
        "context": [body["text"]], "facts": body["facts"],
        "seed": diag["seed"],
    })
    assert gen["diagnostics"]["tokens"] == diag["tokens"]
    assert gen["diagnostics"]["provenance"] == diag["provenance"]


def test_cli_and_service_generations_identical(workspace, tmp_path, capsys):
    root = workspace["root"]
    prompts = tmp_path / "prompts.jsonl"
    from condiv.corpus import save_dataset
    import synthetic as syn
    save_dataset(prompts, syn.grounded_corpus([(0, 0), (1, 1)]))
    code, out, _ = run_cli(
        ["generate", "--data", str(prompts),
         "--checkpoint", str(root / "ckpt-best.bin"),
         "--vocab", str(root / "vocab.txt"), "--idf", str(root / "idf.txt"),
         "--seed", "21", "--k", "4"], capsys)
    assert code == 0
    cli_rows = [json.loads(l) for l in out.strip().splitlines()]

    from condiv.cli import _load_bundle
    from condiv.inference import GenerationRequest, generate

    class Args:
        checkpoint = str(root / "ckpt-best.bin")
        vocab = str(root / "vocab.txt")
        idf = str(root / "idf.txt")

    bundle, _ = _load_bundle(Args)
    for i, (rec, row) in enumerate(zip(syn.grounded_corpus([(0, 0), (1, 1)]),
                                       cli_rows)):
        direct = generate(GenerationRequest(context=rec["context"],
                                            facts=rec["facts"], k=4,
                                            seed=21 + i), bundle)
        assert direct.text == row["response"]
        assert direct.provenance == row["provenance"]
