"""
operators.py

Congruence, parametric inequality, parametric sum and the similarity ratio.

All functions are pure and safe to call from any thread.
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.algebra.params import STAR, AlgebraError, ParamPair, ParamSet


class SimilarityConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.5, description="exactly one side is *")
    beta: float = Field(default=0.1, description="two different literals")

    @model_validator(mode="after")
    def _ordered(self) -> "SimilarityConfig":
        if not 0 < self.beta < self.alpha < 1:
            raise ValueError("expected 0 < beta < alpha < 1")
        return self


DEFAULT_SIMILARITY = SimilarityConfig()


def congruent(p: ParamSet, q: ParamSet) -> bool:
    return len(p) == len(q) and all(param in q for param in p.params())


def leq(p: ParamSet, q: ParamSet) -> bool:
    """`p` is parametrically less than or equal to `q`; the sets need not be congruent."""
    for pair in p:
        other = q.lookup(pair.param)
        if other is None:
            return False
        if pair.value is STAR or other is STAR or pair.value == other:
            continue
        return False
    return True


def psum(p: ParamSet, q: ParamSet) -> ParamSet:
    if not p:
        return q
    if not q:
        return p
    if not congruent(p, q):
        raise AlgebraError(f"cannot sum non-congruent sets {p} and {q}")
    merged = []
    for pair in p:
        other = q.get(pair.param)
        merged.append(pair if pair.value == other else ParamPair(pair.param, STAR))
    return ParamSet(tuple(merged))


def similarity(p: ParamSet, q: ParamSet, cfg: SimilarityConfig = DEFAULT_SIMILARITY) -> float:
    """
    Ratio in [beta^|p|/|p|, 1]; exactly 1 iff the sets are identical.

    Matching pairs add 1 each, mismatching pairs contribute one product of
    their pair scores (alpha or beta). With no mismatch the product is 0.
    """
    if not p or not q:
        raise AlgebraError("similarity is undefined for empty sets")
    if not congruent(p, q):
        raise AlgebraError(f"similarity needs congruent sets, got {p} and {q}")

    matched = 0
    product = 1.0
    mismatched = False
    for pair in p:
        other = q.get(pair.param)
        if pair.value == other:
            matched += 1
            continue
        mismatched = True
        product *= cfg.alpha if (pair.value is STAR or other is STAR) else cfg.beta

    return (matched + (product if mismatched else 0.0)) / len(p)


def name_similarity(a: ParamPair, b: ParamPair, cfg: SimilarityConfig = DEFAULT_SIMILARITY) -> float:
    if a.param != "name" or b.param != "name":
        raise AlgebraError(f"name routing expects 'name' pairs, got {a} and {b}")
    return similarity(ParamSet((a,)), ParamSet((b,)), cfg)
