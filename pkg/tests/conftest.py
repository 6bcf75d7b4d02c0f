import warnings

import pytest

from adaptmt.adaptation import load_config
from adaptmt.simulator import build_project, make_corpus

# Decoding a degraded model can truncate mid-subword; that warning is
# expected noise in adaptation-heavy tests.
warnings.filterwarnings("ignore", message="dangling subword joiner")


@pytest.fixture(scope="session")
def demo_project(tmp_path_factory):
    """A small but working project: corpus, BPE, vocab, pretrained checkpoint.

    Deliberately undertrained (it only needs to be a functioning pipeline,
    not a good translator); built once per test session.
    """
    root = tmp_path_factory.mktemp("demo_project")
    corpus = make_corpus(seed=0, n_train=60, n_test=20)
    config = build_project(
        root,
        corpus=corpus,
        seed=0,
        embed_dim=32,
        hidden_dim=64,
        num_merges=250,
        pretrain_epochs=10,
        target_loss=0.2,
    )
    return config, corpus, root


@pytest.fixture
def demo_config(demo_project):
    config, _, _ = demo_project
    return config


@pytest.fixture
def demo_config_path(demo_project):
    config, _, root = demo_project
    return root / f"{config.project_id}.cfg"
