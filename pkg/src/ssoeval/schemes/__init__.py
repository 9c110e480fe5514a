"""Scheme drivers and the name registry."""

from __future__ import annotations

from typing import Any

from .base import (
    ATTACKER_KEY,
    FRESH,
    AuthOutcome,
    Driver,
    SchemeDescriptor,
    Service,
    SetupImpossible,
    SwitchImpossible,
    SwitchResult,
)
from .federated import OIDC, MobileConnect, MobileConnectAugmented, MobileConnectLoA2, OAuth2, OpenID2, Shibboleth
from .managers import UAF, FirefoxSync, FirefoxSync20, Impostor, UAFNonAttested
from .persona import Persona, PersonaFallback
from .saw import SAW, SAWAugmented
from .securekey import SecureKey

REGISTRY: dict[str, type[Driver]] = {
    cls.name: cls
    for cls in (
        OpenID2,
        OAuth2,
        OIDC,
        MobileConnectLoA2,
        MobileConnect,
        MobileConnectAugmented,
        Shibboleth,
        Persona,
        PersonaFallback,
        SecureKey,
        SAW,
        SAWAugmented,
        FirefoxSync,
        FirefoxSync20,
        Impostor,
        UAF,
        UAFNonAttested,
    )
}


class UnknownScheme(KeyError):
    pass


def get_driver(name: str, **features: Any) -> Driver:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise UnknownScheme(name) from None
    return cls(**features)


__all__ = [
    "ATTACKER_KEY",
    "FRESH",
    "REGISTRY",
    "AuthOutcome",
    "Driver",
    "SchemeDescriptor",
    "Service",
    "SetupImpossible",
    "SwitchImpossible",
    "SwitchResult",
    "UnknownScheme",
    "get_driver",
]
