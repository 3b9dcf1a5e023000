from .audit import AuditReport, Violation, audit_chain
from .chain import (
    Account,
    BlockRejected,
    Chain,
    ChainState,
    IssueRecord,
    Receipt,
    SigningPolicy,
    TxVerdict,
    blacklist_key,
    create_issue_tx,
    register_university,
    revocation_call,
)
from .records import (
    AddAuthority,
    Blacklist,
    Block,
    ConfirmRevocation,
    GenesisConfig,
    IssueBatch,
    RegisterUniversity,
    RevokeDocument,
    Role,
    Transaction,
    TxKind,
    make_tx,
)
from .store import LedgerStore

__all__ = [
    "Account", "AddAuthority", "AuditReport", "Blacklist", "Block", "BlockRejected", "Chain",
    "ChainState", "ConfirmRevocation", "GenesisConfig", "IssueBatch", "IssueRecord",
    "LedgerStore", "Receipt", "RegisterUniversity", "RevokeDocument", "Role",
    "SigningPolicy", "Transaction", "TxKind", "TxVerdict", "Violation", "audit_chain",
    "blacklist_key", "create_issue_tx", "make_tx", "register_university", "revocation_call",
]
