"""Registry tying each training method to its head, output width and loss."""

from dataclasses import asdict, dataclass, replace

import numpy as np

from . import autodiff as ad
from . import heads
from . import losses
from .transport import CostMatrix

METHOD_NAMES = ("ce", "oe", "cdw-ce", "bu", "pu", "un", "wu-kldiv", "wu-wass", "co2", "co", "uu")
PENALISED = ("wu-kldiv", "wu-wass", "co2", "co", "uu")
# softplus(TAU_RAW_INIT) == 1
TAU_RAW_INIT = float(np.log(np.e - 1.0))


@dataclass(frozen=True)
class LossSpec:
    """Method name plus the knobs its loss uses.

    ``lam`` weighs the unimodality penalty, ``delta`` is the CO2/uu margin,
    ``r`` the transport cost exponent, ``alpha`` the CDW-CE power and
    ``tau`` a fixed Poisson temperature (``None`` learns it).
    """

    name: str = "ce"
    lam: float = 1.0
    delta: float = 0.05
    r: float = 1.0
    alpha: float = 1.0
    tau: float = None
    nonneg: str = "relu"

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown loss {self.name!r}; choose from {', '.join(METHOD_NAMES)}")
        if self.lam < 0 or self.delta < 0:
            raise ValueError("lam and delta must be >= 0")
        if self.r <= 0 or self.alpha <= 0:
            raise ValueError("r and alpha must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.nonneg not in heads.NONNEGATIVE:
            raise ValueError(f"nonneg must be one of {sorted(heads.NONNEGATIVE)}")

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def to_dict(self):
        return asdict(self)


def output_width(name, K):
    if name in ("bu", "pu"):
        return 1
    if name == "oe":
        return K - 1
    return K


def extra_parameters(spec):
    """Head parameters beyond the network weights."""
    if spec.name == "pu" and spec.tau is None:
        return {"tau_raw": np.array([TAU_RAW_INIT])}
    return {}


@dataclass
class HeadOutput:
    proba: object         # node, or plain array for OE
    raw: ad.Node
    kind: str = "distribution"

    @property
    def distribution(self):
        return self.proba.value if isinstance(self.proba, ad.Node) else np.asarray(self.proba)


def forward_head(spec, z, K, params=None):
    """Turn network outputs ``z`` into a :class:`HeadOutput`."""
    name = spec.name
    if name == "un":
        return HeadOutput(heads.unimodal_net_head(z, spec.nonneg), z)
    if name == "bu":
        return HeadOutput(heads.binomial_head(z, K), z)
    if name == "pu":
        tau = spec.tau if spec.tau is not None else ad.softplus(params["tau_raw"])
        return HeadOutput(heads.poisson_head(z, K, tau), z)
    if name == "oe":
        cumulative, yhat = heads.ordinal_encoding_head(z)
        return HeadOutput(yhat, z, kind="cumulative")
    return HeadOutput(heads.softmax_head(z), z)


def sample_losses(spec, out, k_star, targets=None):
    """Per-sample loss node for a batch of head outputs."""
    name = spec.name
    if name == "oe":
        return losses.oe_loss(k_star, out.raw)
    yhat = out.proba
    if name in ("ce", "un", "bu", "pu"):
        return losses.ce_loss(k_star, yhat)
    if name == "cdw-ce":
        return losses.cdw_ce_loss(k_star, yhat, spec.alpha)
    if name == "co2":
        return losses.co2_loss(spec.delta, spec.lam, k_star, yhat)
    if name == "co":
        return losses.co_loss(spec.lam, k_star, yhat)
    if name == "uu":
        return losses.uu_loss(spec.delta, spec.lam, k_star, yhat)
    d2 = "kldiv" if name == "wu-kldiv" else "wasserstein"
    cost = CostMatrix.power(yhat.shape[-1], spec.r)
    return losses.wu_loss(k_star, yhat, spec.lam, d2, cost, targets)


def predict_from_output(out):
    if out.kind == "cumulative":
        return heads.predict_label(ad.sigmoid(out.raw).value, "cumulative")
    return heads.predict_label(out.distribution)
