"""Contrastive group graph and its signed Laplacian.

Different-group pairs attract (P), same-group pairs repel (N), each
row-normalized; C = P - N and L = D - C with D the diagonal of row sums of C.

The matrices are block-constant by group, so products with an n x k factor
are evaluated from per-group column sums in O(n k) instead of O(n^2 k).
Dense copies are only built when asked for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fairclust.graph import GroupAssignment


def _labels(groups) -> np.ndarray:
    if isinstance(groups, GroupAssignment):
        return groups.labels
    return np.asarray(groups)


def build_raw_indicators(groups, include_diagonal: bool = False):
    """Same-group and different-group 0/1 indicator matrices ``(N_raw, P_raw)``."""
    g = _labels(groups)
    same = (g[:, None] == g[None, :]).astype(float)
    if not include_diagonal:
        np.fill_diagonal(same, 0.0)
    diff = (g[:, None] != g[None, :]).astype(float)
    return same, diff


def normalize_rows(M) -> np.ndarray:
    """Divide each row by its sum; all-zero rows stay zero."""
    M = np.asarray(M, dtype=float)
    sums = M.sum(axis=1, keepdims=True)
    out = np.zeros_like(M)
    np.divide(M, sums, out=out, where=sums > 0)
    return out


def split_signed(L) -> tuple[np.ndarray, np.ndarray]:
    L = np.asarray(L, dtype=float)
    return np.maximum(L, 0.0), np.maximum(-L, 0.0)


@dataclass(frozen=True)
class ContrastiveSystem:
    labels: np.ndarray
    include_diagonal: bool = False

    @property
    def n(self) -> int:
        return self.labels.size

    @cached_property
    def _structure(self):
        g = self.labels
        m = int(g.max()) + 1
        sizes = np.bincount(g, minlength=m)
        own = sizes[g]
        same_count = own if self.include_diagonal else own - 1
        diff_count = self.n - own
        w_same = np.zeros(self.n)
        np.divide(1.0, same_count, out=w_same, where=same_count > 0)
        w_diff = np.zeros(self.n)
        np.divide(1.0, diff_count, out=w_diff, where=diff_count > 0)
        # diagonal of L: D_ii - C_ii, with C_ii = -N_ii
        degree = (diff_count > 0).astype(float) - (same_count > 0).astype(float)
        n_diag = w_same if self.include_diagonal else np.zeros(self.n)
        l_diag = degree + n_diag
        return m, w_same, w_diff, l_diag

    @property
    def m(self) -> int:
        return self._structure[0]

    def _group_sums(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.m
        S = np.zeros((m, H.shape[1]))
        np.add.at(S, self.labels, H)
        return S, S.sum(axis=0)

    def _parts(self, H: np.ndarray):
        _, w_same, w_diff, l_diag = self._structure
        S, total = self._group_sums(H)
        own = S[self.labels]
        # off-diagonal N @ H and P @ H
        n_off = (own - H) * w_same[:, None]
        p_off = (total[None, :] - own) * w_diff[:, None]
        return n_off, p_off, l_diag

    def split_dot(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(L+ @ H, L- @ H)``."""
        n_off, p_off, l_diag = self._parts(H)
        return (
            n_off + np.maximum(l_diag, 0.0)[:, None] * H,
            p_off + np.maximum(-l_diag, 0.0)[:, None] * H,
        )

    def laplacian_dot(self, H: np.ndarray) -> np.ndarray:
        plus, minus = self.split_dot(H)
        return plus - minus

    def regularizer(self, H: np.ndarray) -> float:
        """Tr(H^T L H) without forming L."""
        H = np.asarray(H, dtype=float)
        if H.shape[0] != self.n:
            raise ValueError(f"H has {H.shape[0]} rows, expected {self.n}")
        plus, minus = self.split_dot(H)
        return float(np.sum(H * plus) - np.sum(H * minus))

    # dense views, O(n^2) memory

    @cached_property
    def raw(self) -> tuple[np.ndarray, np.ndarray]:
        return build_raw_indicators(self.labels, self.include_diagonal)

    @cached_property
    def N(self) -> np.ndarray:
        return normalize_rows(self.raw[0])

    @cached_property
    def P(self) -> np.ndarray:
        return normalize_rows(self.raw[1])

    @cached_property
    def C(self) -> np.ndarray:
        return self.P - self.N

    @cached_property
    def L(self) -> np.ndarray:
        C = self.C
        return np.diag(C.sum(axis=1)) - C

    @cached_property
    def Lplus(self) -> np.ndarray:
        return split_signed(self.L)[0]

    @cached_property
    def Lminus(self) -> np.ndarray:
        return split_signed(self.L)[1]


def build_contrastive(groups, include_diagonal: bool = False) -> ContrastiveSystem:
    """Contrastive system for a group assignment (or raw label vector)."""
    g = _labels(groups)
    if isinstance(groups, GroupAssignment):
        labels = g
    else:
        labels = GroupAssignment(g).labels
    system = ContrastiveSystem(labels, include_diagonal)
    if system.m == 1:
        warnings.warn(
            "single sensitive group: attraction term is empty, regularizer only repels",
            RuntimeWarning,
            stacklevel=2,
        )
    return system


def regularizer_value(H, L) -> float:
    """Tr(H^T L H) for a dense Laplacian or a :class:`ContrastiveSystem`."""
    H = np.asarray(H, dtype=float)
    if isinstance(L, ContrastiveSystem):
        return L.regularizer(H)
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[1] != H.shape[0]:
        raise ValueError(f"dimension mismatch: L {L.shape}, H {H.shape}")
    return float(np.trace(H.T @ L @ H))
