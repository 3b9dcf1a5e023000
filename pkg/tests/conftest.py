import pytest

from cerberus.fixtures import make_batch
from cerberus.issuance import prepare_batch
from cerberus.keys import KeyPair
from cerberus.ledger import Chain, SigningPolicy, create_issue_tx, register_university


class Net:
    """A three-authority chain with one registered 2-of-3 university."""

    def __init__(self, seed=0):
        self.authorities = [KeyPair.derive(f"authority-{i}", seed) for i in range(3)]
        self.acc_org = KeyPair.derive("accreditor/org", seed)
        self.acc = [KeyPair.derive(f"accreditor/key-{i}", seed) for i in (1, 2)]
        self.chain = Chain.genesis([k.public_key for k in self.authorities],
                                   accreditor_org=self.acc_org.address,
                                   accreditor_keys=[k.public_key for k in self.acc])
        self.uni = KeyPair.derive("NUST/org", seed)
        self.signers = [KeyPair.derive(f"NUST/s{i}", seed) for i in range(3)]
        self.policy = SigningPolicy.parse("2-of-3", [k.public_key for k in self.signers])
        self.commit(register_university(self.chain, self.authorities[0],
                                        self.uni.public_key, self.policy))

    def producer(self, height=None):
        addr = self.chain.scheduled_producer(height)
        return next(k for k in self.authorities if k.address == addr)

    def commit(self, *txs):
        return self.chain.produce_block(self.producer(), list(txs))

    def issue(self, records, signers=None):
        batch = prepare_batch(records)
        tx = create_issue_tx(batch.root, None, signers or self.signers[:2],
                             university=self.uni.address, chain=self.chain)
        block = self.commit(tx)
        assert tx in block.txs
        return batch, block.height, tx.tx_id


@pytest.fixture
def net():
    return Net()


@pytest.fixture
def small_batch():
    return make_batch(7, seed=3, university="NUST", fixed_width=False)


def pytest_terminal_summary(terminalreporter):
    import criteria

    if criteria.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in criteria.format_results():
            terminalreporter.write_line(line)
