"""Per-domain scoring of gap resolutions.

Every gap receives exactly one proposed antecedent (or an explicit
miss), so precision equals recall and the F-score reduces to
``100 * hits / total`` within each domain.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

from .errors import ValidationError
from .resolver import Resolution

# Familiar newswire-to-conversation ordering for display; anything else
# is appended alphabetically.
DOMAIN_ORDER = ("NW", "MZ", "WB", "BN", "BC", "TC")


@dataclass(frozen=True)
class DomainScore:
    domain: str
    hits: int
    total: int

    @property
    def f_score(self) -> float:
        return 100.0 * self.hits / self.total


def score(resolutions: Sequence[Resolution], domain_of: Mapping[str, str],
          ) -> Tuple[Dict[str, DomainScore], DomainScore]:
    """Group resolutions by their document's domain and count hits.

    Returns (per_domain, overall).  Domains with no instances are
    simply absent.  A resolution without a gold antecedent cannot be
    scored and raises.
    """
    if not resolutions:
        raise ValidationError("nothing to score: no resolutions given")
    hits: Dict[str, int] = {}
    totals: Dict[str, int] = {}
    for r in resolutions:
        if r.gold_index < 0:
            raise ValidationError(
                f"{r.doc_id} {r.sent_index}:{r.token_slot} has no gold antecedent")
        if r.doc_id not in domain_of:
            raise ValidationError(f"no domain known for document {r.doc_id!r}")
        dom = domain_of[r.doc_id]
        totals[dom] = totals.get(dom, 0) + 1
        hits[dom] = hits.get(dom, 0) + int(r.correct)
    per_domain = {d: DomainScore(d, hits[d], totals[d]) for d in totals}
    overall = DomainScore("overall", sum(hits.values()), sum(totals.values()))
    return per_domain, overall


def ordered_domains(per_domain: Mapping[str, DomainScore]) -> List[str]:
    known = [d for d in DOMAIN_ORDER if d in per_domain]
    rest = sorted(d for d in per_domain if d not in DOMAIN_ORDER)
    return known + rest


def format_score_table(per_domain: Mapping[str, DomainScore],
                       overall: DomainScore) -> str:
    """Human-readable grid, one domain per column plus the overall."""
    names = ordered_domains(per_domain) + [overall.domain]
    scores = [per_domain[d] for d in names[:-1]] + [overall]
    cells = [f"{s.f_score:.2f} [{s.hits}/{s.total}]" for s in scores]
    width = max(len(c) for c in cells + names) + 2
    head = "".join(n.rjust(width) for n in names)
    body = "".join(c.rjust(width) for c in cells)
    return head + "\n" + body


def write_scores_tsv(per_domain: Mapping[str, DomainScore],
                     overall: DomainScore, path) -> None:
    """Machine-readable scores at full float precision."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("domain\thits\ttotal\tf_score\n")
        for d in ordered_domains(per_domain):
            s = per_domain[d]
            fh.write(f"{s.domain}\t{s.hits}\t{s.total}\t{s.f_score!r}\n")
        fh.write(f"{overall.domain}\t{overall.hits}\t{overall.total}\t{overall.f_score!r}\n")
