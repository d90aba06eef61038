import json

import latticeweyl as lw


def test_flagship_certificate_passes(harmonic):
    cert = lw.certify(harmonic, lw.Interval(0.5, 2.5), {"halfwidth": 3.0})
    assert cert.overall
    assert set(cert.checks) == {"periodicity", "realness", "ellipticity_shifted",
                                "ess_bound", "noncritical_endpoints",
                                "truncation_margin"}
    for chk in cert.checks.values():
        assert chk["pass"]


def test_overall_is_conjunction(harmonic):
    bad = lw.builtin_symbol("xi_only", {"expr": "k0"})
    cert = lw.certify(bad, lw.Interval(0.5, 2.5), {"halfwidth": 3.0})
    assert not cert.checks["periodicity"]["pass"]
    assert cert.overall == all(c["pass"] for c in cert.checks.values())
    assert not cert.overall


def test_critical_endpoint_flagged(harmonic):
    cert = lw.certify(harmonic, lw.Interval(1e-9, 2.5), {"halfwidth": 3.0})
    assert not cert.checks["noncritical_endpoints"]["pass"]
    assert not cert.overall


def test_certificate_idempotent(harmonic):
    a = lw.certify(harmonic, lw.Interval(0.5, 2.5), {"halfwidth": 3.0})
    b = lw.certify(harmonic, lw.Interval(0.5, 2.5), {"halfwidth": 3.0})
    assert a.to_dict() == b.to_dict()


def test_certificate_serialises(harmonic):
    cert = lw.certify(harmonic, lw.Interval(0.5, 2.5), {"halfwidth": 3.0})
    blob = json.dumps(cert.to_dict(), sort_keys=True)
    back = json.loads(blob)
    assert back["overall"] is True
    assert back["interval"] == [0.5, 2.5]
