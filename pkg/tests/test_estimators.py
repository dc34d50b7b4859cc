import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from fsakit import (
    Complementer,
    Determinizer,
    InputError,
    Minimizer,
    OocConfig,
    Reverser,
    determinize,
    dfa_accepts,
    minimize_forward,
)
from fsakit.generators import random_dfa, random_nfa


@pytest.fixture
def nfas():
    return [random_nfa(s, 7, 2) for s in range(6)]


def test_get_params_and_clone():
    est = Determinizer(engine="mt", workers=3)
    assert est.get_params()["workers"] == 3
    c = clone(est)
    assert c is not est and c.get_params() == est.get_params()
    est.set_params(policy="keep")
    assert est.policy == "keep"


def test_repr_shows_non_defaults():
    assert "hopcroft" in repr(Minimizer(algo="hopcroft"))


@pytest.mark.parametrize("engine", ["seq", "mt", "ooc"])
def test_determinizer_engines_agree(nfas, engine, tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10, tmpdir=str(tmp_path))
    out = Determinizer(engine=engine, workers=2, ooc_config=cfg).fit_transform(nfas)
    assert out == [determinize(n)[0] for n in nfas]


@pytest.mark.parametrize("algo,engine", [("forward", "seq"), ("hopcroft", "seq"),
                                         ("brzozowski", "seq"), ("forward", "mt"),
                                         ("forward", "ooc")])
def test_minimizer(algo, engine, tmp_path):
    dfas = [random_dfa(s, 20, 2, density=0.6) for s in range(5)]
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10, tmpdir=str(tmp_path))
    out = Minimizer(algo=algo, engine=engine, ooc_config=cfg).transform(dfas)
    assert out == [minimize_forward(d) for d in dfas]


def test_sklearn_pipeline(nfas):
    pipe = Pipeline([("det", Determinizer()), ("min", Minimizer()), ("neg", Complementer())])
    out = pipe.fit_transform(nfas)
    for nfa, d in zip(nfas, out):
        ref = determinize(nfa)[0]
        assert dfa_accepts(d, [0, 1]) != dfa_accepts(ref, [0, 1])


def test_reverser_accepts_dfas():
    out = Reverser().fit_transform([random_dfa(1, 5, 2)])
    assert out[0].num_states >= 1


@pytest.mark.parametrize("est", [
    Determinizer(engine="gpu"),
    Determinizer(workers=0),
    Determinizer(policy="maybe"),
    Minimizer(algo="hopcroft", engine="mt"),
    Minimizer(algo="nope"),
])
def test_invalid_params_raise_on_fit(est, nfas):
    X = nfas if isinstance(est, Determinizer) else [determinize(n)[0] for n in nfas]
    with pytest.raises(InputError):
        est.fit(X)


def test_single_automaton_rejected(nfas):
    with pytest.raises(InputError):
        Determinizer().fit(nfas[0])


def test_minimizer_rejects_nfa(nfas):
    with pytest.raises(InputError):
        Minimizer().fit(nfas)


def test_input_error_is_value_error():
    with pytest.raises(ValueError):
        Determinizer(engine="gpu").fit([])
