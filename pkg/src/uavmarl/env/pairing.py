"""Sequential GU claiming protocol between UAV base stations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavmarl.errors import DomainError


@dataclass(frozen=True)
class PairingAssignment:
    """Binary UAV x GU pairing matrix; each GU column has exactly one 1."""

    sigma: np.ndarray

    @property
    def served_counts(self) -> np.ndarray:
        return self.sigma.sum(axis=1)

    def served(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.sigma[m])

    def check(self) -> None:
        sig = self.sigma
        if not np.isin(sig, (0, 1)).all():
            raise DomainError("pairing matrix must be binary")
        if not (sig.sum(axis=0) == 1).all():
            raise DomainError("every GU must be paired with exactly one UAV")
        if not (sig.sum(axis=1) >= 1).all():
            raise DomainError("every UAV must serve at least one GU")


def resolve_pairing(intents, uav_order, uav_pos, gu_pos, claims=None) -> PairingAssignment:
    """Resolve per-UAV pairing intents into a valid assignment.

    UAVs claim in ``uav_order``; GUs taken by earlier UAVs are masked. A UAV
    left with nothing is given its highest-logit GU still available. Any GU
    nobody claimed goes to the nearest UAV, lower index winning ties.

    ``intents`` is an (M, N) array of logits. ``claims`` optionally gives the
    (M, N) multi-hot claim sets directly; otherwise a positive logit is a claim.
    """
    logits = np.asarray(intents, dtype=float)
    M, N = logits.shape
    if N < M:
        raise DomainError(f"cannot give {M} UAVs a GU each with only {N} GUs")
    order = [int(i) for i in uav_order]
    if sorted(order) != list(range(M)):
        raise DomainError(f"uav_order {order} is not a permutation of 0..{M - 1}")
    want = logits > 0 if claims is None else np.asarray(claims).astype(bool)

    sigma = np.zeros((M, N), dtype=np.int64)
    taken = np.zeros(N, dtype=bool)
    for k, m in enumerate(order):
        got = want[m] & ~taken
        if not got.any():
            # later UAVs in the order still need one GU each
            masked = np.where(taken, -np.inf, logits[m])
            got = np.zeros(N, dtype=bool)
            got[int(np.argmax(masked))] = True
        else:
            remaining_uavs = M - k - 1
            free_after = N - taken.sum() - got.sum()
            if free_after < remaining_uavs:
                # keep the highest-logit claims, leave enough GUs for the rest
                keep = N - taken.sum() - remaining_uavs
                idx = np.flatnonzero(got)
                idx = idx[np.argsort(-logits[m, idx], kind="stable")[:keep]]
                got = np.zeros(N, dtype=bool)
                got[idx] = True
        sigma[m, got] = 1
        taken |= got

    free = np.flatnonzero(~taken)
    if free.size:
        d = np.linalg.norm(np.asarray(uav_pos, float)[:, None, :] - np.asarray(gu_pos, float)[None, free, :], axis=-1)
        nearest = np.argmin(d, axis=0)  # argmin returns the first (lowest) index on ties
        sigma[nearest, free] = 1
    return PairingAssignment(sigma)


def initial_pairing(uav_pos, gu_pos) -> PairingAssignment:
    """Pairing at reset: each UAV in index order claims its nearest free GU."""
    uav_pos = np.asarray(uav_pos, float)
    gu_pos = np.asarray(gu_pos, float)
    d = np.linalg.norm(uav_pos[:, None, :] - gu_pos[None, :, :], axis=-1)
    M, N = d.shape
    return resolve_pairing(-d, range(M), uav_pos, gu_pos, claims=np.zeros((M, N), bool))
