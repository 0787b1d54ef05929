"""One-time tokens: issuance, redemption, amplification arithmetic."""

import re
import threading
from datetime import date

import numpy as np
import pytest

from netdist import (CONTACT, POSITIVE, RedemptionRejected, TokenService,
                     UnauthorizedAuthority, amplification_probability)
from netdist.config import TokenConfig
from netdist.reporting import canonical_token, generate_token_string

from conftest import BASE_T

SYMPTOMS = date(2019, 5, 1)


def svc(**kw):
    cfg = TokenConfig(authorities={"authA": "secretA", "authB": "secretB"}, **kw)
    return TokenService(cfg)


# -- issuance --------------------------------------------------------------


def test_issue_three_distinct_unconsumed():
    tokens = svc().issue("authA", POSITIVE, 3, now=BASE_T)
    assert len({t.token for t in tokens}) == 3
    assert all(not t.consumed for t in tokens)
    assert all(t.kind == POSITIVE and t.authority == "authA" for t in tokens)


def test_issue_contact_kind():
    (token,) = svc().issue("authA", CONTACT, 1, now=BASE_T)
    assert token.kind == CONTACT


def test_token_format_human_groupable():
    token = generate_token_string()
    assert re.fullmatch(r"[A-Z2-7]{4}-[A-Z2-7]{4}-[A-Z2-7]{4}-[A-Z2-7]{4}", token)
    assert len(canonical_token(token)) == 16


def test_token_entropy_no_collisions():
    issued = {canonical_token(generate_token_string()) for _ in range(10 ** 5)}
    assert len(issued) == 10 ** 5


def test_authentication():
    s = svc()
    s.authenticate("authA", "secretA")
    with pytest.raises(UnauthorizedAuthority):
        s.authenticate("authA", "wrong")
    with pytest.raises(UnauthorizedAuthority):
        s.authenticate("nobody", "secretA")


# -- redemption -----------------------------------------------------------------


def test_redeem_valid_positive():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    report = s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 3600)
    assert report.kind == POSITIVE
    assert report.device == "dev-1"
    assert report.symptom_start == SYMPTOMS
    assert report.case_id


def test_redeem_is_one_time():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 10)
    with pytest.raises(RedemptionRejected) as err:
        s.redeem(token.token, "dev-2", SYMPTOMS, now=BASE_T + 20)
    assert err.value.reason == "already-consumed"


def test_redeem_expired():
    s = svc(validity_hours=72.0)
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    with pytest.raises(RedemptionRejected) as err:
        s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 73 * 3600.0)
    assert err.value.reason == "expired"


def test_redeem_unknown():
    with pytest.raises(RedemptionRejected) as err:
        svc().redeem("AAAA-BBBB-CCCC-DDDD", "dev-1", SYMPTOMS, now=BASE_T)
    assert err.value.reason == "unknown-token"


def test_redeem_wrong_community():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    with pytest.raises(RedemptionRejected) as err:
        s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 10,
                 device_community="authB")
    assert err.value.reason == "wrong-community-scope"
    # unenrolled devices are not scoped
    report = s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 10)
    assert report.kind == POSITIVE


def test_redeem_accepts_hyphenless_lowercase():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    raw = token.token.replace("-", "").lower()
    assert s.redeem(raw, "dev-1", SYMPTOMS, now=BASE_T + 5).kind == POSITIVE


def test_contact_reports_carry_no_symptom_date():
    s = svc()
    (token,) = s.issue("authA", CONTACT, 1, now=BASE_T)
    report = s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 5)
    assert report.kind == CONTACT
    assert report.symptom_start is None


def test_concurrent_redemption_single_winner():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    results = []
    barrier = threading.Barrier(16)

    def worker(idx):
        barrier.wait()
        try:
            s.redeem(token.token, f"dev-{idx}", SYMPTOMS, now=BASE_T + 1)
            results.append("ok")
        except RedemptionRejected as exc:
            results.append(exc.reason)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count("ok") == 1
    assert results.count("already-consumed") == 15


def test_storage_rows_never_join_tokens_and_devices():
    s = svc()
    (token,) = s.issue("authA", POSITIVE, 1, now=BASE_T)
    s.redeem(token.token, "dev-1", SYMPTOMS, now=BASE_T + 5)
    for row in s.token_rows():
        joined = " ".join(str(v) for v in row.values())
        assert "dev-1" not in joined
        assert token.token not in joined  # digests only, never the raw value


# -- amplification --------------------------------------------------------------


def test_amplification_eleven_tokens_at_20_percent():
    # closed form: 1 - 0.8**11
    expected = 1.0 - 0.8 ** 11
    got = amplification_probability(11, 0.20)
    assert abs(got - expected) < 1e-12
    assert abs(got - 0.9141) < 1e-4
    assert got > 0.90


def test_amplification_degenerate_cases():
    assert amplification_probability(0, 0.7) == 0.0
    assert amplification_probability(5, 1.0) == 1.0
    assert amplification_probability(1, 0.25) == 0.25


def test_amplification_validates_inputs():
    with pytest.raises(ValueError):
        amplification_probability(-1, 0.5)
    with pytest.raises(ValueError):
        amplification_probability(3, 1.5)


def test_amplification_matches_monte_carlo_sweep():
    rng = np.random.default_rng(1)
    trials = 200_000
    for n in (1, 2, 5, 11):
        for p in (0.05, 0.2, 0.5, 0.9):
            hits = (rng.random((trials, n)) < p).any(axis=1)
            mc = hits.mean()
            se = np.sqrt(mc * (1 - mc) / trials)
            assert abs(amplification_probability(n, p) - mc) <= 3 * se + 1e-9
