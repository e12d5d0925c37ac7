"""Usage contracts and the authorization decision."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import yaml

from .messages import Message, parse_rfc3339


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class Contract:
    id: str
    provider: str
    consumer: str
    resource: str
    operations: frozenset  # subset of {"catalog", "query"}
    not_before: datetime
    expiry: datetime
    purpose: str = ""

    def __post_init__(self):
        if not (self.id and self.provider and self.consumer and self.resource):
            raise ContractError("contract ids and parties must be non-empty")
        if not self.not_before < self.expiry:
            raise ContractError(f"contract {self.id}: not_before must precede expiry")
        bad = self.operations - {"catalog", "query"}
        if bad:
            raise ContractError(f"contract {self.id}: unknown operations {sorted(bad)}")


class ContractStore:
    def __init__(self, contracts=()):
        self._by_id: dict[str, Contract] = {}
        for c in contracts:
            if c.id in self._by_id:
                raise ContractError(f"duplicate contract id {c.id}")
            self._by_id[c.id] = c

    def get(self, contract_id: str) -> Optional[Contract]:
        return self._by_id.get(contract_id)

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self):
        return len(self._by_id)


def parse_contracts(text: str) -> ContractStore:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "contracts" not in doc:
        raise ContractError("contracts file must have a top-level 'contracts' list")
    contracts = []
    for i, entry in enumerate(doc["contracts"]):
        try:
            contracts.append(Contract(
                id=str(entry["id"]),
                provider=str(entry["provider"]),
                consumer=str(entry["consumer"]),
                resource=str(entry["resource"]),
                operations=frozenset(entry.get("operations", ["catalog", "query"])),
                not_before=parse_rfc3339(str(entry["not_before"])),
                expiry=parse_rfc3339(str(entry["expiry"])),
                purpose=str(entry.get("purpose", "")),
            ))
        except KeyError as exc:
            raise ContractError(f"contracts[{i}]: missing key {exc}") from None
    return ContractStore(contracts)


def load_contracts(path) -> ContractStore:
    with open(path, encoding="utf-8") as fh:
        return parse_contracts(fh.read())


_OPERATION_FOR_TYPE = {"CatalogRequest": "catalog", "QueryRequest": "query"}


def authorize(request: Message, contracts: ContractStore, node_id: str,
              resource: str, now: datetime):
    """Decide a CatalogRequest/QueryRequest.  Returns ``None`` to allow, else
    ``(reason, text)`` with the most specific rejection reason
    (unknown < consumer mismatch < window < operation)."""
    operation = _OPERATION_FOR_TYPE.get(request.type)
    if operation is None:
        return ("MALFORMED", f"{request.type} is not an authorizable request")
    contract_id = request.body.get("contractId")
    contract = contracts.get(contract_id) if contract_id else None
    if contract is None:
        return ("UNKNOWN_CONTRACT", f"no contract {contract_id!r}")
    if contract.consumer != request.sender or contract.provider != node_id \
            or contract.resource != resource:
        return ("NOT_AUTHORIZED",
                f"contract {contract.id} does not grant {request.sender!r} "
                f"access to {resource!r} at {node_id!r}")
    if now < contract.not_before:
        return ("CONTRACT_NOT_YET_VALID",
                f"contract {contract.id} valid from {contract.not_before.isoformat()}")
    if now >= contract.expiry:
        return ("CONTRACT_EXPIRED",
                f"contract {contract.id} expired {contract.expiry.isoformat()}")
    if operation not in contract.operations:
        return ("OPERATION_NOT_PERMITTED",
                f"contract {contract.id} does not permit {operation!r}")
    return None
